//! Plot-ready series extraction: one `p_omega,value` file per summary facet
//! (everything but the exposure probability), optionally restricted by
//! facet-coordinate filters.

use anyhow::{bail, Context, Result};
use nettmle_core::metrics::SUMMARY_CSV_HEADER;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SERIES_CSV_HEADER: &str = "p_omega,value";

/// Metrics a series can plot, in summary-column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMetric {
    Bias,
    Ese,
    CoverDirect,
    CoverLatent,
}

impl SeriesMetric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bias" => Ok(SeriesMetric::Bias),
            "ese" => Ok(SeriesMetric::Ese),
            "cover_direct" => Ok(SeriesMetric::CoverDirect),
            "cover_latent" => Ok(SeriesMetric::CoverLatent),
            other => bail!(
                "unknown metric `{other}` (expected bias|ese|cover_direct|cover_latent)"
            ),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SeriesMetric::Bias => "bias",
            SeriesMetric::Ese => "ese",
            SeriesMetric::CoverDirect => "cover_direct",
            SeriesMetric::CoverLatent => "cover_latent",
        }
    }

    /// Column index in the summary CSV.
    fn column(self) -> usize {
        match self {
            SeriesMetric::Bias => 9,
            SeriesMetric::Ese => 10,
            SeriesMetric::CoverDirect => 11,
            SeriesMetric::CoverLatent => 12,
        }
    }
}

/// Optional facet-coordinate restrictions; `None` keeps every value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesFilter {
    pub graph: Option<String>,
    pub n: Option<usize>,
    pub scenario: Option<String>,
    pub budget: Option<f64>,
    pub priority: Option<String>,
    pub model: Option<String>,
}

impl SeriesFilter {
    fn fully_pinned(&self) -> bool {
        self.graph.is_some()
            && self.n.is_some()
            && self.scenario.is_some()
            && self.budget.is_some()
            && self.priority.is_some()
            && self.model.is_some()
    }

    /// The facet a fully pinned filter names, in summary-column form.
    fn pinned_facet(&self) -> Facet {
        (
            self.graph.clone().expect("pinned"),
            self.n.expect("pinned").to_string(),
            self.scenario.clone().expect("pinned"),
            self.budget.expect("pinned").to_string(),
            self.priority.clone().expect("pinned"),
            self.model.clone().expect("pinned"),
        )
    }
}

/// (graph, n, scenario, budget, priority, model) as written in the summary.
type Facet = (String, String, String, String, String, String);

fn facet_file_name(metric: SeriesMetric, facet: &Facet) -> String {
    format!(
        "{}_{}_n{}_{}_b{}_{}_{}.csv",
        metric.name(),
        facet.0,
        facet.1,
        facet.2,
        facet.3,
        facet.4,
        facet.5
    )
}

/// Writes one series file per facet of the summary, returning the paths.
/// Facets are read from the matching summary rows; a fully pinned filter
/// that matches nothing still produces its (header-only) file so the empty
/// result is visible on disk.
pub fn emit_series(
    summary_csv: &Path,
    metric: SeriesMetric,
    filter: &SeriesFilter,
    out_dir: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let file = File::open(summary_csv)
        .with_context(|| format!("opening `{}`", summary_csv.display()))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next().transpose()? {
        Some(first) if first == SUMMARY_CSV_HEADER => {}
        _ => bail!("`{}` is not a summary CSV", summary_csv.display()),
    }

    let mut facets: BTreeMap<Facet, Vec<(f64, String)>> = BTreeMap::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            bail!("malformed summary row: `{line}`");
        }
        let keep = filter.graph.as_deref().is_none_or(|v| v == fields[0])
            && filter.n.is_none_or(|v| v.to_string() == fields[1])
            && filter.scenario.as_deref().is_none_or(|v| v == fields[2])
            && filter
                .budget
                .is_none_or(|v| fields[5].parse::<f64>().is_ok_and(|b| b == v))
            && filter.priority.as_deref().is_none_or(|v| v == fields[6])
            && filter.model.as_deref().is_none_or(|v| v == fields[7]);
        if !keep {
            continue;
        }
        let p_omega: f64 = fields[4]
            .parse()
            .with_context(|| format!("p_omega in `{line}`"))?;
        let facet: Facet = (
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
            fields[5].to_string(),
            fields[6].to_string(),
            fields[7].to_string(),
        );
        facets
            .entry(facet)
            .or_default()
            .push((p_omega, fields[metric.column()].to_string()));
    }

    if facets.is_empty() {
        eprintln!(
            "warning: no summary rows match the requested facet; {}",
            if filter.fully_pinned() {
                "writing a header-only series file"
            } else {
                "nothing to write"
            }
        );
        if filter.fully_pinned() {
            facets.insert(filter.pinned_facet(), Vec::new());
        }
    }

    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => summary_csv
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating series dir `{}`", dir.display()))?;

    let mut paths = Vec::new();
    for (facet, mut points) in facets {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite p_omega"));
        let path = dir.join(facet_file_name(metric, &facet));
        let mut out = BufWriter::new(
            File::create(&path).with_context(|| format!("creating `{}`", path.display()))?,
        );
        writeln!(out, "{SERIES_CSV_HEADER}")?;
        for (p_omega, value) in points {
            writeln!(out, "{p_omega},{value}")?;
        }
        out.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// Convenience for callers holding the metric as text.
pub fn emit_series_named(
    summary_csv: &Path,
    metric: &str,
    filter: &SeriesFilter,
    out_dir: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    emit_series(summary_csv, SeriesMetric::parse(metric)?, filter, out_dir)
}
