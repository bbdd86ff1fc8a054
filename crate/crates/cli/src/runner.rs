//! Sweep execution. Worlds (graph kind × size × policy coordinates) crossed
//! with repeats form the work items; each item regenerates its graph,
//! simulates one observational panel, computes the ground truth for that
//! world draw, and runs every scenario × model estimator on the shared
//! panel. Items execute on a worker pool, but rows reach the CSVs through a
//! single writer in grid order, so output bytes never depend on scheduling.
//!
//! Every random draw descends from `(master_seed, world id, k)` through
//! tagged hashes; reruns with the same config are byte-identical, and a
//! resumed sweep only executes what the run CSV is still missing.

use crate::config::{ExperimentSpec, GraphKind};
use anyhow::{anyhow, bail, Context, Result};
use nettmle_core::design::Scenario;
use nettmle_core::graph::{self, PowerLawConfig, TemporalNetwork};
use nettmle_core::metrics::{self, BatchEntry, RunBatch, SummaryRow, SUMMARY_CSV_HEADER};
use nettmle_core::seed;
use nettmle_core::sim::{self, PolicySpec, Priority};
use nettmle_core::tmle::{self, EstimatorConfig, ModelKind, RunRow, RUN_CSV_HEADER};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

/// Degree bounds of the uniform generator's worlds.
pub const UNIFORM_DEGREE_BOUNDS: (usize, usize) = (1, 6);

/// Label of the stochastic quarantine policy family in the CSVs.
pub const POLICY_LABEL: &str = "bernoulli";

pub const TRUTH_CSV_HEADER: &str = "graph,n,p_omega,budget,priority,k,psi";

/// Power-law worlds of 2000 nodes run at most this many repeats.
pub const LARGE_POWERLAW_REPEAT_CAP: u32 = 15;

/// One sampled-world coordinate: everything that shapes the graph and the
/// quarantine policy, but not the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub graph: GraphKind,
    pub n: usize,
    pub p_omega: f64,
    pub budget: f64,
    pub priority: Priority,
}

impl World {
    pub fn id(&self) -> String {
        format!(
            "{}-{}-pw{}-b{}-{}",
            self.graph.name(),
            self.n,
            self.p_omega,
            self.budget,
            self.priority.name()
        )
    }

    /// Key under which this world's repeat-`k` truth is stored: the first
    /// six columns of the truth CSV.
    pub fn truth_key(&self, k: u32) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.graph.name(),
            self.n,
            self.p_omega,
            self.budget,
            self.priority.name(),
            k
        )
    }

    pub fn generate(&self, seed_value: u64) -> nettmle_core::Result<TemporalNetwork> {
        match self.graph {
            GraphKind::Uniform => graph::generate_uniform(
                self.n,
                UNIFORM_DEGREE_BOUNDS.0,
                UNIFORM_DEGREE_BOUNDS.1,
                seed_value,
            ),
            GraphKind::PowerLaw => {
                graph::generate_power_law_clustered(self.n, &PowerLawConfig::default(), seed_value)
            }
        }
    }
}

pub fn run_id(world: &World, scenario: Scenario, model: ModelKind, k: u32) -> String {
    format!("{}-{}-{}-k{:02}", world.id(), scenario.name(), model.name(), k)
}

/// Expands the grid into worlds, dropping the meaningless pairing of an
/// unrestricted priority with a partial budget.
pub fn build_worlds(spec: &ExperimentSpec) -> Result<Vec<World>> {
    let mut worlds = Vec::new();
    for &graph in &spec.graph_kinds {
        for &n in &spec.sizes {
            for &p_omega in &spec.p_omega_grid {
                for &budget in &spec.budgets {
                    for &priority in &spec.priorities {
                        if priority == Priority::All && budget < 1.0 {
                            continue;
                        }
                        worlds.push(World { graph, n, p_omega, budget, priority });
                    }
                }
            }
        }
    }
    if worlds.is_empty() {
        bail!(
            "the grid is empty: `priorities = all` only pairs with a full budget; \
             add a budgeted priority or the budget 1"
        );
    }
    Ok(worlds)
}

pub fn effective_repeats(spec: &ExperimentSpec, world: &World) -> u32 {
    if world.graph == GraphKind::PowerLaw && world.n == 2000 {
        spec.repeats.min(LARGE_POWERLAW_REPEAT_CAP)
    } else {
        spec.repeats
    }
}

/// Output directory after the `NETTMLE_OUT` override.
pub fn resolve_output_dir(spec: &ExperimentSpec) -> PathBuf {
    match std::env::var("NETTMLE_OUT") {
        Ok(v) if !v.is_empty() => PathBuf::from(v),
        _ => spec.output_dir.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub resume: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub total_runs: usize,
    pub failed_runs: usize,
    pub summary_rows: usize,
    pub runs_csv: PathBuf,
    pub truth_csv: PathBuf,
    pub summary_csv: PathBuf,
}

impl RunReport {
    /// Whether the sweep should exit nonzero: strictly more than 10% of the
    /// recorded runs failed.
    pub fn too_many_failures(&self) -> bool {
        self.failed_runs * 10 > self.total_runs
    }
}

/// One unit of parallel work: a world draw plus the estimator runs it still
/// owes. `idx` is the emission slot the writer waits on.
struct Item {
    idx: usize,
    world: World,
    k: u32,
    todo: Vec<(Scenario, ModelKind)>,
    truth_needed: bool,
}

struct ItemOutput {
    idx: usize,
    truth_line: Option<String>,
    run_lines: Vec<String>,
}

fn failed_line(world: &World, scenario: Scenario, model: ModelKind, k: u32, err: &str) -> String {
    let rid = run_id(world, scenario, model, k);
    RunRow {
        run_id: &rid,
        graph: world.graph.name(),
        n: world.n,
        scenario,
        policy: POLICY_LABEL,
        p_omega: world.p_omega,
        budget: world.budget,
        priority: world.priority,
        model,
        report: None,
        notes: &format!("failed: {err}"),
    }
    .to_csv()
}

fn execute_item(spec: &ExperimentSpec, item: &Item) -> ItemOutput {
    let world = &item.world;
    let wid = world.id();
    let k = item.k;
    let fail_all = |err: &str| ItemOutput {
        idx: item.idx,
        truth_line: None,
        run_lines: item
            .todo
            .iter()
            .map(|&(s, m)| failed_line(world, s, m, k, err))
            .collect(),
    };

    let policy = match PolicySpec::counterfactual(world.p_omega, world.budget, world.priority) {
        Ok(p) => p,
        Err(e) => return fail_all(&e.to_string()),
    };
    let network = match world.generate(seed::derive(spec.master_seed, &format!("graph:{wid}"), k.into())) {
        Ok(net) => net,
        Err(e) => return fail_all(&e.to_string()),
    };

    let truth_line = if item.truth_needed {
        let truth_seed = seed::derive(spec.master_seed, &format!("truth:{wid}"), k.into());
        match sim::counterfactual_truth(&network, &policy, &spec.sim, spec.truth_replicates, truth_seed)
        {
            Ok(psi) => Some(format!("{},{psi}", world.truth_key(k))),
            Err(e) => return fail_all(&e.to_string()),
        }
    } else {
        None
    };

    let mut run_lines = Vec::with_capacity(item.todo.len());
    if !item.todo.is_empty() {
        let panel_seed = seed::derive(spec.master_seed, &format!("panel:{wid}"), k.into());
        let (panel, realized) =
            match sim::run_sir(&network, &PolicySpec::observational(), &spec.sim, panel_seed) {
                Ok(pair) => pair,
                Err(e) => {
                    let mut out = fail_all(&e.to_string());
                    out.truth_line = truth_line;
                    return out;
                }
            };
        for &(scenario, model) in &item.todo {
            let rid = run_id(world, scenario, model, k);
            let mut cfg = EstimatorConfig::new(
                model,
                scenario,
                seed::derive(spec.master_seed, &format!("est:{rid}"), 0),
            );
            spec.estimator.configure(&mut cfg);
            let line = match tmle::run_estimator(&panel, &realized, &policy, &spec.sim, &cfg) {
                Ok(report) => RunRow {
                    run_id: &rid,
                    graph: world.graph.name(),
                    n: world.n,
                    scenario,
                    policy: POLICY_LABEL,
                    p_omega: world.p_omega,
                    budget: world.budget,
                    priority: world.priority,
                    model,
                    report: Some(&report),
                    notes: &report.notes(),
                }
                .to_csv(),
                Err(e) => failed_line(world, scenario, model, k, &e.to_string()),
            };
            run_lines.push(line);
        }
    }

    ItemOutput { idx: item.idx, truth_line, run_lines }
}

/// Drains the channel, reordering items back into grid order and flushing
/// after each one so an interrupted sweep leaves clean CSV prefixes.
fn write_ordered<W1: Write, W2: Write>(
    rx: mpsc::Receiver<ItemOutput>,
    mut runs_out: W1,
    mut truth_out: W2,
) -> std::io::Result<()> {
    let mut pending: BTreeMap<usize, ItemOutput> = BTreeMap::new();
    let mut next = 0usize;
    while let Ok(out) = rx.recv() {
        pending.insert(out.idx, out);
        while let Some(out) = pending.remove(&next) {
            if let Some(line) = &out.truth_line {
                writeln!(truth_out, "{line}")?;
            }
            for line in &out.run_lines {
                writeln!(runs_out, "{line}")?;
            }
            truth_out.flush()?;
            runs_out.flush()?;
            next += 1;
        }
    }
    debug_assert!(pending.is_empty());
    Ok(())
}

fn run_items(spec: &ExperimentSpec, items: Vec<Item>, jobs: Option<usize>, tx: mpsc::Sender<ItemOutput>) -> Result<()> {
    let body = || {
        items.par_iter().for_each_with(tx, |tx, item| {
            // a dropped receiver means the writer already failed; the join
            // below reports that error, so the send result is moot
            let _ = tx.send(execute_item(spec, item));
        });
    };
    match jobs {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .context("building worker pool")?;
            pool.install(body);
        }
        None => body(),
    }
    Ok(())
}

fn read_data_lines(path: &Path, header: &str) -> Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("opening `{}`", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(first) => {
            let first = first?;
            if first != header {
                bail!(
                    "`{}` does not start with the expected header (got `{first}`)",
                    path.display()
                );
            }
        }
        None => return Ok(Vec::new()),
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if !line.is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

fn existing_run_ids(path: &Path) -> Result<HashSet<String>> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    Ok(read_data_lines(path, RUN_CSV_HEADER)?
        .iter()
        .filter_map(|l| l.split(',').next().map(str::to_string))
        .collect())
}

fn existing_truth_keys(path: &Path) -> Result<HashSet<String>> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    Ok(read_data_lines(path, TRUTH_CSV_HEADER)?
        .iter()
        .filter_map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            (fields.len() == 7).then(|| fields[..6].join(","))
        })
        .collect())
}

fn open_for_append(path: &Path, header: &str) -> Result<BufWriter<File>> {
    let fresh = !path.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening `{}`", path.display()))?;
    let mut out = BufWriter::new(file);
    if fresh {
        writeln!(out, "{header}")?;
        out.flush()?;
    }
    Ok(out)
}

/// Runs (or resumes) the sweep described by `spec`: appends missing run and
/// truth rows, then rebuilds the summary CSV from the files alone.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<RunReport> {
    let out_dir = resolve_output_dir(spec);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir `{}`", out_dir.display()))?;
    let runs_csv = out_dir.join("runs.csv");
    let truth_csv = out_dir.join("truth.csv");
    let summary_csv = out_dir.join("summary.csv");

    if runs_csv.exists() && !opts.resume {
        bail!(
            "`{}` already exists; pass --resume to continue it or pick a fresh output_dir",
            runs_csv.display()
        );
    }
    let done_runs = existing_run_ids(&runs_csv)?;
    let done_truths = existing_truth_keys(&truth_csv)?;

    let worlds = build_worlds(spec)?;
    let mut items = Vec::new();
    for world in &worlds {
        for k in 0..effective_repeats(spec, world) {
            let todo: Vec<(Scenario, ModelKind)> = spec
                .scenarios
                .iter()
                .flat_map(|&s| spec.models.iter().map(move |&m| (s, m)))
                .filter(|&(s, m)| !done_runs.contains(&run_id(world, s, m, k)))
                .collect();
            let truth_needed = !done_truths.contains(&world.truth_key(k));
            if todo.is_empty() && !truth_needed {
                continue;
            }
            items.push(Item {
                idx: items.len(),
                world: world.clone(),
                k,
                todo,
                truth_needed,
            });
        }
    }

    if !items.is_empty() || !runs_csv.exists() {
        let runs_out = open_for_append(&runs_csv, RUN_CSV_HEADER)?;
        let truth_out = open_for_append(&truth_csv, TRUTH_CSV_HEADER)?;
        let (tx, rx) = mpsc::channel::<ItemOutput>();
        let writer = std::thread::spawn(move || write_ordered(rx, runs_out, truth_out));
        let run_result = run_items(spec, items, opts.jobs, tx);
        let write_result = writer
            .join()
            .map_err(|_| anyhow!("csv writer thread panicked"))?;
        run_result?;
        write_result.context("writing csv rows")?;
    }

    let summary_rows = build_summary(&runs_csv, &truth_csv, &summary_csv)?;

    let mut total_runs = 0usize;
    let mut failed_runs = 0usize;
    for line in read_data_lines(&runs_csv, RUN_CSV_HEADER)? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 19 {
            bail!("malformed run row: `{line}`");
        }
        total_runs += 1;
        if fields[9].is_empty() {
            failed_runs += 1;
        }
    }

    Ok(RunReport {
        total_runs,
        failed_runs,
        summary_rows,
        runs_csv,
        truth_csv,
        summary_csv,
    })
}

/// Truth-only mode: recomputes every world draw's ground truth and rewrites
/// the truth CSV from scratch. The values are pure functions of the config,
/// so this is idempotent and agrees with what a full run records.
pub fn run_truth_only(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<PathBuf> {
    let out_dir = resolve_output_dir(spec);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir `{}`", out_dir.display()))?;
    let truth_csv = out_dir.join("truth.csv");

    let worlds = build_worlds(spec)?;
    let mut items = Vec::new();
    for world in &worlds {
        for k in 0..effective_repeats(spec, world) {
            items.push(Item {
                idx: items.len(),
                world: world.clone(),
                k,
                todo: Vec::new(),
                truth_needed: true,
            });
        }
    }

    let truth_file = File::create(&truth_csv)
        .with_context(|| format!("creating `{}`", truth_csv.display()))?;
    let mut truth_out = BufWriter::new(truth_file);
    writeln!(truth_out, "{TRUTH_CSV_HEADER}")?;
    truth_out.flush()?;

    let (tx, rx) = mpsc::channel::<ItemOutput>();
    // the runs file is untouched in this mode; the writer gets a sink
    let writer = std::thread::spawn(move || write_ordered(rx, std::io::sink(), truth_out));
    let run_result = run_items(spec, items, jobs, tx);
    let write_result = writer
        .join()
        .map_err(|_| anyhow!("csv writer thread panicked"))?;
    run_result?;
    write_result.context("writing truth rows")?;
    Ok(truth_csv)
}

struct ParsedRun {
    k: u32,
    entry: BatchEntry,
}

/// Rebuilds the summary CSV by joining the run CSV with the truth CSV —
/// no simulation involved. Cells whose runs all failed (or whose truth rows
/// are missing) produce no summary row.
pub fn build_summary(runs_csv: &Path, truth_csv: &Path, summary_csv: &Path) -> Result<usize> {
    let truth: HashMap<String, f64> = read_data_lines(truth_csv, TRUTH_CSV_HEADER)?
        .iter()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                bail!("malformed truth row: `{line}`");
            }
            let psi: f64 = fields[6]
                .parse()
                .with_context(|| format!("truth value in `{line}`"))?;
            Ok((fields[..6].join(","), psi))
        })
        .collect::<Result<_>>()?;

    let mut cell_order: Vec<String> = Vec::new();
    let mut cells: HashMap<String, Vec<ParsedRun>> = HashMap::new();
    for line in read_data_lines(runs_csv, RUN_CSV_HEADER)? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 19 {
            bail!("malformed run row: `{line}`");
        }
        let cell_key = fields[1..9].join(",");
        if !cells.contains_key(&cell_key) {
            cell_order.push(cell_key.clone());
            cells.insert(cell_key.clone(), Vec::new());
        }
        if fields[9].is_empty() {
            continue; // failed run: grid coordinates only
        }
        let k: u32 = fields[0]
            .rsplit_once("-k")
            .and_then(|(_, digits)| digits.parse().ok())
            .ok_or_else(|| anyhow!("run_id `{}` has no trailing repeat index", fields[0]))?;
        let truth_key = format!(
            "{},{},{},{},{},{}",
            fields[1], fields[2], fields[5], fields[6], fields[7], k
        );
        let Some(&psi_truth) = truth.get(&truth_key) else {
            continue; // no recorded truth for this world draw
        };
        let num = |idx: usize| -> Result<f64> {
            fields[idx]
                .parse()
                .with_context(|| format!("field {idx} in `{line}`"))
        };
        cells.get_mut(&cell_key).expect("inserted above").push(ParsedRun {
            k,
            entry: BatchEntry {
                psi_hat: num(9)?,
                psi_truth,
                lci_d: num(13)?,
                uci_d: num(14)?,
                lci_l: num(15)?,
                uci_l: num(16)?,
            },
        });
    }

    let file = File::create(summary_csv)
        .with_context(|| format!("creating `{}`", summary_csv.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{SUMMARY_CSV_HEADER}")?;
    let mut rows = 0usize;
    for cell_key in cell_order {
        let mut runs = cells.remove(&cell_key).expect("keyed by cell_order");
        if runs.is_empty() {
            continue;
        }
        runs.sort_by_key(|r| r.k);
        let batch = RunBatch::new(runs.into_iter().map(|r| r.entry).collect())?;
        let m = metrics::summarize(&batch);
        let fields: Vec<&str> = cell_key.split(',').collect();
        let row = SummaryRow {
            graph: fields[0],
            n: fields[1].parse().context("cell size")?,
            scenario: Scenario::parse(fields[2])?,
            policy: fields[3],
            p_omega: fields[4].parse().context("cell p_omega")?,
            budget: fields[5].parse().context("cell budget")?,
            priority: Priority::parse(fields[6])?,
            model: ModelKind::parse(fields[7])?,
            metrics: m,
        };
        writeln!(out, "{}", row.to_csv())?;
        rows += 1;
    }
    out.flush()?;
    Ok(rows)
}
