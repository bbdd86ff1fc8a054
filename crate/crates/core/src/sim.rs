//! Epidemic simulation with behaviour-driven quarantine, and the panel
//! records the estimators consume.
//!
//! Dynamics are susceptible → infectious → recovered on a contact network.
//! At each step a quarantine wave runs first: every eligible node decides
//! whether to quarantine (observational logistic rule or a constant-probability
//! policy), removing its edges for the next `quarantine_period` steps.
//! Transmission then acts on the post-removal snapshot; infections last
//! exactly `infectious_duration` steps.
//!
//! Time indexing: step `t = 0` is the initial condition (no decisions);
//! decisions, transmissions, and recoveries happen at steps `1..=t_steps`.
//! Covariates at step `t` are measured on the previous realized snapshot and
//! the states entering the step, so they are legitimately "pre-decision".

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{summary_covariate, summary_exposure, Adjacency, SummaryMeasure, TemporalNetwork};
use crate::scalar::expit;
use crate::seed;

/// Cap on `m_copies · n · (t_steps + 1)` when sampling policy copies.
pub const MAX_SAMPLED_RECORDS: usize = 50_000_000;

// ---------------------------------------------------------------------------
// policy and simulation configuration
// ---------------------------------------------------------------------------

/// Who is allowed to quarantine when the budget is partial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Priority {
    /// Everyone; requires a full budget.
    All,
    /// Highest-degree nodes fill the budget pool.
    MostConnected,
    /// Lowest-degree nodes fill the budget pool.
    LeastConnected,
}

impl Priority {
    pub fn name(self) -> &'static str {
        match self {
            Priority::All => "all",
            Priority::MostConnected => "most_connected",
            Priority::LeastConnected => "least_connected",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Priority::All),
            "most_connected" => Ok(Priority::MostConnected),
            "least_connected" => Ok(Priority::LeastConnected),
            other => Err(Error::parse(format!("unknown priority `{other}`"))),
        }
    }
}

/// How quarantine decisions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    /// Covariate-driven logistic compliance (data generation).
    Observational,
    /// Constant-probability stochastic policy (the estimand).
    Counterfactual,
}

/// A quarantine policy: decision mode plus budget and priority rules.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub mode: PolicyMode,
    /// Per-step quarantine probability under the counterfactual mode.
    pub p_omega: f64,
    /// Fraction of the population allowed in the quarantine pool.
    pub budget_fraction: f64,
    pub priority: Priority,
}

impl PolicySpec {
    /// Constant-probability policy.
    pub fn counterfactual(p_omega: f64, budget_fraction: f64, priority: Priority) -> Result<Self> {
        let spec = PolicySpec {
            mode: PolicyMode::Counterfactual,
            p_omega,
            budget_fraction,
            priority,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Full-budget observational assignment.
    pub fn observational() -> Self {
        PolicySpec {
            mode: PolicyMode::Observational,
            p_omega: f64::NAN,
            budget_fraction: 1.0,
            priority: Priority::All,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == PolicyMode::Counterfactual && !(0.0..=1.0).contains(&self.p_omega) {
            return Err(Error::argument(format!(
                "p_omega {} outside [0, 1]",
                self.p_omega
            )));
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(Error::argument(format!(
                "budget fraction {} outside (0, 1]",
                self.budget_fraction
            )));
        }
        if self.priority == Priority::All && self.budget_fraction < 1.0 {
            return Err(Error::argument(
                "priority `all` requires a full budget; pick most/least connected instead",
            ));
        }
        Ok(())
    }
}

/// Epidemic mechanics and the observational compliance rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Number of transmission steps `T`.
    pub t_steps: usize,
    /// Steps a node stays infectious before recovering.
    pub infectious_duration: usize,
    /// Steps `P` an activated quarantine keeps edges removed.
    pub quarantine_period: usize,
    /// Fraction of nodes infected at step 0 (rounded up).
    pub init_infected_fraction: f64,
    /// Population-average per-contact transmission probability; the per-node
    /// probability is `transmission_prob · 2 · susceptibility`, clamped to 1.
    pub transmission_prob: f64,
    /// Multiplier on transmission through edges touching a quarantined node.
    /// At the default 1.0 quarantine removes edges outright; below 1.0 edges
    /// stay in place and transmission is damped instead ("leaky" quarantine).
    pub leaky_multiplier: f64,
    /// Whether a node may quarantine again after a window expires.
    pub allow_requarantine: bool,
    /// Logistic coefficients of the observational compliance rule over
    /// `[1, susceptibility, infected_neighbors, quarantine_history,
    /// neighbor_mean_susceptibility, neighbors_ever_infected]`.
    pub obs_coefficients: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_steps: 10,
            infectious_duration: 5,
            quarantine_period: 2,
            init_infected_fraction: 0.01,
            transmission_prob: 0.2,
            leaky_multiplier: 1.0,
            allow_requarantine: true,
            obs_coefficients: vec![-1.2, 0.4, 0.9, -0.3, 0.4, 0.15],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_steps == 0 {
            return Err(Error::argument("t_steps must be positive"));
        }
        if self.infectious_duration == 0 || self.quarantine_period == 0 {
            return Err(Error::argument("durations must be positive"));
        }
        if !(self.init_infected_fraction > 0.0 && self.init_infected_fraction <= 1.0) {
            return Err(Error::argument("init_infected_fraction outside (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.transmission_prob) {
            return Err(Error::argument("transmission_prob outside [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.leaky_multiplier) {
            return Err(Error::argument("leaky_multiplier outside [0, 1]"));
        }
        if self.obs_coefficients.len() != 6 {
            return Err(Error::argument(
                "obs_coefficients needs 6 entries: intercept plus five covariates",
            ));
        }
        if self.obs_coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::argument("non-finite observational coefficient"));
        }
        Ok(())
    }

    fn quarantine_removes_edges(&self) -> bool {
        self.leaky_multiplier >= 1.0
    }
}

// ---------------------------------------------------------------------------
// panel records
// ---------------------------------------------------------------------------

/// Compartment of a node at a given step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    Susceptible,
    Infectious,
    Recovered,
}

impl State {
    pub fn letter(self) -> char {
        match self {
            State::Susceptible => 'S',
            State::Infectious => 'I',
            State::Recovered => 'R',
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "S" => Ok(State::Susceptible),
            "I" => Ok(State::Infectious),
            "R" => Ok(State::Recovered),
            other => Err(Error::parse(format!("unknown state `{other}`"))),
        }
    }
}

/// Panel column identifiers, shared by design specs and serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Quarantine status during the step.
    Alpha,
    /// Quarantined-neighbor count on the previous realized snapshot.
    AlphaS,
    /// Baseline susceptibility (static, uniform on [0, 1]).
    XiStatic,
    /// Currently infectious neighbors.
    XiInfNbrs,
    /// Cumulative past steps spent quarantined.
    XiQuarHist,
    /// Neighbor mean of baseline susceptibility.
    XiSMean,
    /// Neighbors ever infected so far.
    XiSInfSum,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::Alpha => "alpha",
            Var::AlphaS => "alpha_s",
            Var::XiStatic => "xi_static",
            Var::XiInfNbrs => "xi_inf_nbrs",
            Var::XiQuarHist => "xi_quar_hist",
            Var::XiSMean => "xi_s_mean",
            Var::XiSInfSum => "xi_s_infsum",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Var::Alpha),
            "alpha_s" => Ok(Var::AlphaS),
            "xi_static" => Ok(Var::XiStatic),
            "xi_inf_nbrs" => Ok(Var::XiInfNbrs),
            "xi_quar_hist" => Ok(Var::XiQuarHist),
            "xi_s_mean" => Ok(Var::XiSMean),
            "xi_s_infsum" => Ok(Var::XiSInfSum),
            other => Err(Error::argument(format!("unknown variable name `{other}`"))),
        }
    }

    /// True for the real-valued columns (candidates for quantile binning).
    pub fn is_continuous(self) -> bool {
        matches!(self, Var::XiStatic | Var::XiSMean)
    }
}

/// Exposure and covariate history shared by observed panels and sampled
/// policy copies. All vectors are indexed `[t][node]` with `t` in
/// `0..=t_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub alpha: Vec<Vec<bool>>,
    pub alpha_s: Vec<Vec<u32>>,
    pub xi_inf_nbrs: Vec<Vec<u32>>,
    pub xi_quar_hist: Vec<Vec<u32>>,
    pub xi_s_mean: Vec<Vec<f64>>,
    pub xi_s_infsum: Vec<Vec<u32>>,
}

impl Trajectory {
    fn with_capacity(t_steps: usize) -> Self {
        let cap = t_steps + 1;
        Trajectory {
            alpha: Vec::with_capacity(cap),
            alpha_s: Vec::with_capacity(cap),
            xi_inf_nbrs: Vec::with_capacity(cap),
            xi_quar_hist: Vec::with_capacity(cap),
            xi_s_mean: Vec::with_capacity(cap),
            xi_s_infsum: Vec::with_capacity(cap),
        }
    }

    pub fn n(&self) -> usize {
        self.alpha[0].len()
    }

    /// Final step index `T`.
    pub fn t_steps(&self) -> usize {
        self.alpha.len() - 1
    }
}

/// Observed data from one simulation: covariate history plus disease states
/// and the final outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    /// Baseline susceptibility per node.
    pub xi_static: Vec<f64>,
    pub traj: Trajectory,
    /// Compartments, indexed `[t][node]`.
    pub state: Vec<Vec<State>>,
    /// Ever infected by the end of the simulation.
    pub upsilon: Vec<bool>,
}

impl Panel {
    pub fn n(&self) -> usize {
        self.xi_static.len()
    }

    pub fn t_steps(&self) -> usize {
        self.traj.t_steps()
    }

    /// Fraction of the population ever infected.
    pub fn attack_rate(&self) -> f64 {
        let hits = self.upsilon.iter().filter(|&&u| u).count();
        hits as f64 / self.n() as f64
    }

    pub fn view(&self) -> RecordView<'_> {
        RecordView {
            traj: &self.traj,
            xi_static: &self.xi_static,
        }
    }
}

/// One re-sampled exposure history under a counterfactual policy. Static
/// covariates and infection states stay at their observed values; everything
/// exposure-driven (quarantine windows, realized snapshots, and all summaries
/// computed on them) is re-simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCopy {
    pub traj: Trajectory,
}

impl PolicyCopy {
    pub fn view<'a>(&'a self, panel: &'a Panel) -> RecordView<'a> {
        RecordView {
            traj: &self.traj,
            xi_static: &panel.xi_static,
        }
    }
}

/// Uniform accessor over a trajectory plus the static covariate.
#[derive(Debug, Clone, Copy)]
pub struct RecordView<'a> {
    pub traj: &'a Trajectory,
    pub xi_static: &'a [f64],
}

impl RecordView<'_> {
    pub fn n(&self) -> usize {
        self.traj.n()
    }

    pub fn t_steps(&self) -> usize {
        self.traj.t_steps()
    }

    /// Value of a panel column for node `i` at step `t`.
    pub fn value(&self, var: Var, t: usize, i: usize) -> f64 {
        match var {
            Var::Alpha => f64::from(self.traj.alpha[t][i]),
            Var::AlphaS => f64::from(self.traj.alpha_s[t][i]),
            Var::XiStatic => self.xi_static[i],
            Var::XiInfNbrs => f64::from(self.traj.xi_inf_nbrs[t][i]),
            Var::XiQuarHist => f64::from(self.traj.xi_quar_hist[t][i]),
            Var::XiSMean => self.traj.xi_s_mean[t][i],
            Var::XiSInfSum => f64::from(self.traj.xi_s_infsum[t][i]),
        }
    }
}

// ---------------------------------------------------------------------------
// quarantine waves
// ---------------------------------------------------------------------------

/// Per-node quarantine bookkeeping across a simulation.
struct QuarantineTracker {
    period: usize,
    allow_requarantine: bool,
    /// Exclusive end of the latest window; 0 when never activated.
    active_until: Vec<usize>,
    ever: Vec<bool>,
    /// Steps spent quarantined so far (updated after each step).
    cum_steps: Vec<u32>,
}

impl QuarantineTracker {
    fn new(n: usize, period: usize, allow_requarantine: bool) -> Self {
        QuarantineTracker {
            period,
            allow_requarantine,
            active_until: vec![0; n],
            ever: vec![false; n],
            cum_steps: vec![0; n],
        }
    }

    fn active(&self, i: usize, t: usize) -> bool {
        self.active_until[i] > t
    }

    fn eligible(&self, i: usize, t: usize) -> bool {
        !self.active(i, t) && (self.allow_requarantine || !self.ever[i])
    }

    fn activate(&mut self, i: usize, t: usize) {
        self.active_until[i] = t + self.period;
        self.ever[i] = true;
    }

    fn finish_step(&mut self, t: usize) {
        for i in 0..self.active_until.len() {
            if self.active(i, t) {
                self.cum_steps[i] += 1;
            }
        }
    }
}

/// Budget pool: the `⌈budget·n⌉` nodes allowed to quarantine this wave,
/// ranked on the underlying contact structure (ties broken by node id).
/// Quarantine-punctured degrees are deliberately not used — a hub under
/// quarantine is still a hub for prioritization purposes.
fn budget_pool(policy: &PolicySpec, ranking: &Adjacency) -> Vec<bool> {
    let n = ranking.n();
    match policy.priority {
        Priority::All => vec![true; n],
        Priority::MostConnected | Priority::LeastConnected => {
            let k = (policy.budget_fraction * n as f64).ceil() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            match policy.priority {
                Priority::MostConnected => {
                    order.sort_by_key(|&i| (std::cmp::Reverse(ranking.degree(i)), i))
                }
                Priority::LeastConnected => order.sort_by_key(|&i| (ranking.degree(i), i)),
                Priority::All => unreachable!(),
            }
            let mut pool = vec![false; n];
            for &i in order.iter().take(k) {
                pool[i] = true;
            }
            pool
        }
    }
}

/// Runs one quarantine wave: eligible pool members draw a Bernoulli decision
/// with their per-node probability, in ascending node order.
fn quarantine_wave(
    tracker: &mut QuarantineTracker,
    pool: &[bool],
    probs: &[f64],
    t: usize,
    rng: &mut ChaCha8Rng,
) {
    for i in 0..pool.len() {
        if pool[i] && tracker.eligible(i, t) && rng.random::<f64>() < probs[i] {
            tracker.activate(i, t);
        }
    }
}

/// Logistic compliance probabilities from the covariates at one step.
pub fn compliance_probabilities(
    xi_static: &[f64],
    xi_inf_nbrs: &[u32],
    xi_quar_hist: &[u32],
    xi_s_mean: &[f64],
    xi_s_infsum: &[u32],
    coeffs: &[f64],
) -> Result<Vec<f64>> {
    if coeffs.len() != 6 {
        return Err(Error::argument("compliance rule needs 6 coefficients"));
    }
    Ok((0..xi_static.len())
        .map(|i| {
            let eta = coeffs[0]
                + coeffs[1] * xi_static[i]
                + coeffs[2] * f64::from(xi_inf_nbrs[i])
                + coeffs[3] * f64::from(xi_quar_hist[i])
                + coeffs[4] * xi_s_mean[i]
                + coeffs[5] * f64::from(xi_s_infsum[i]);
            expit(eta)
        })
        .collect())
}

/// Draws one round of covariate-driven quarantine decisions; exposed mainly
/// for direct inspection of the confounding rule.
pub fn observational_assignment<G: Rng>(
    xi_static: &[f64],
    xi_inf_nbrs: &[u32],
    xi_quar_hist: &[u32],
    xi_s_mean: &[f64],
    xi_s_infsum: &[u32],
    coeffs: &[f64],
    rng: &mut G,
) -> Result<Vec<bool>> {
    let probs = compliance_probabilities(
        xi_static,
        xi_inf_nbrs,
        xi_quar_hist,
        xi_s_mean,
        xi_s_infsum,
        coeffs,
    )?;
    Ok(probs.iter().map(|&p| rng.random::<f64>() < p).collect())
}

// ---------------------------------------------------------------------------
// covariate measurement
// ---------------------------------------------------------------------------

/// Covariates entering step `t`: everything is computed on the previous
/// realized snapshot and the states carried into the step.
fn measure_covariates(
    prev_snapshot: &Adjacency,
    states: &[State],
    xi_static: &[f64],
    cum_quarantine: &[u32],
) -> (Vec<u32>, Vec<u32>, Vec<f64>, Vec<u32>) {
    let n = prev_snapshot.n();
    let mut inf_nbrs = vec![0u32; n];
    let mut ever_nbrs = vec![0u32; n];
    for i in 0..n {
        for &j in prev_snapshot.neighbors(i) {
            if states[j] == State::Infectious {
                inf_nbrs[i] += 1;
            }
            if states[j] != State::Susceptible {
                ever_nbrs[i] += 1;
            }
        }
    }
    let s_mean = summary_covariate(prev_snapshot, xi_static, SummaryMeasure::Mean);
    (inf_nbrs, cum_quarantine.to_vec(), s_mean, ever_nbrs)
}

// ---------------------------------------------------------------------------
// the simulator
// ---------------------------------------------------------------------------

/// Simulates one epidemic under the given quarantine policy. Returns the
/// observed panel and the realized snapshot sequence (base network with the
/// active quarantine edges removed at each step).
pub fn run_sir(
    network: &TemporalNetwork,
    policy: &PolicySpec,
    config: &SimConfig,
    seed_value: u64,
) -> Result<(Panel, TemporalNetwork)> {
    policy.validate()?;
    config.validate()?;
    let n = network.n();
    let t_steps = config.t_steps;
    let mut rng = seed::rng(seed_value);

    // static covariates first, then the initially infected draw: the RNG
    // consumption order is part of the reproducibility contract
    let xi_static: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let n_seeds = (config.init_infected_fraction * n as f64).ceil() as usize;
    let mut seeds: Vec<usize> = rand::seq::index::sample(&mut rng, n, n_seeds.min(n)).into_vec();
    seeds.sort_unstable();

    let mut states = vec![State::Susceptible; n];
    let mut infected_at = vec![usize::MAX; n];
    for &s in &seeds {
        states[s] = State::Infectious;
        infected_at[s] = 0;
    }

    let mut tracker = QuarantineTracker::new(n, config.quarantine_period, config.allow_requarantine);
    let removes_edges = config.quarantine_removes_edges();

    let mut traj = Trajectory::with_capacity(t_steps);
    let mut state_rows: Vec<Vec<State>> = Vec::with_capacity(t_steps + 1);
    let mut realized: Vec<Adjacency> = Vec::with_capacity(t_steps + 1);

    // step 0: initial condition, no decisions yet
    let base0 = network.base_at(0);
    let (inf0, quar0, mean0, ever0) =
        measure_covariates(base0, &states, &xi_static, &tracker.cum_steps);
    traj.alpha.push(vec![false; n]);
    traj.alpha_s.push(vec![0; n]);
    traj.xi_inf_nbrs.push(inf0);
    traj.xi_quar_hist.push(quar0);
    traj.xi_s_mean.push(mean0);
    traj.xi_s_infsum.push(ever0);
    state_rows.push(states.clone());
    realized.push(base0.clone());

    for t in 1..=t_steps {
        let base = network.base_at(t);
        let prev = &realized[t - 1];

        // covariates entering the step
        let (inf_nbrs, quar_hist, s_mean, ever_nbrs) =
            measure_covariates(prev, &states, &xi_static, &tracker.cum_steps);

        // quarantine wave
        let probs = match policy.mode {
            PolicyMode::Counterfactual => vec![policy.p_omega; n],
            PolicyMode::Observational => compliance_probabilities(
                &xi_static,
                &inf_nbrs,
                &quar_hist,
                &s_mean,
                &ever_nbrs,
                &config.obs_coefficients,
            )?,
        };
        let pool = budget_pool(policy, base);
        quarantine_wave(&mut tracker, &pool, &probs, t, &mut rng);

        let alpha_t: Vec<bool> = (0..n).map(|i| tracker.active(i, t)).collect();
        let alpha_s_t = summary_exposure(prev, &alpha_t);

        // realized snapshot for this step
        let snapshot = if removes_edges {
            base.without_nodes(&alpha_t)
        } else {
            base.clone()
        };

        // transmissions from infectious nodes onto susceptibles, then
        // recoveries; both read the states entering the step
        let mut next_states = states.clone();
        for i in 0..n {
            if states[i] != State::Susceptible {
                continue;
            }
            let susceptibility = (config.transmission_prob * 2.0 * xi_static[i]).min(1.0);
            let mut escape = 1.0;
            if removes_edges {
                for &j in snapshot.neighbors(i) {
                    if states[j] == State::Infectious {
                        escape *= 1.0 - susceptibility;
                    }
                }
            } else {
                for &j in base.neighbors(i) {
                    if states[j] == State::Infectious {
                        let damp = if alpha_t[i] || alpha_t[j] {
                            config.leaky_multiplier
                        } else {
                            1.0
                        };
                        escape *= 1.0 - susceptibility * damp;
                    }
                }
            }
            if escape < 1.0 && rng.random::<f64>() < 1.0 - escape {
                next_states[i] = State::Infectious;
                infected_at[i] = t;
            }
        }
        for i in 0..n {
            if states[i] == State::Infectious && t - infected_at[i] >= config.infectious_duration {
                next_states[i] = State::Recovered;
            }
        }
        states = next_states;
        tracker.finish_step(t);

        traj.alpha.push(alpha_t);
        traj.alpha_s.push(alpha_s_t);
        traj.xi_inf_nbrs.push(inf_nbrs);
        traj.xi_quar_hist.push(quar_hist);
        traj.xi_s_mean.push(s_mean);
        traj.xi_s_infsum.push(ever_nbrs);
        state_rows.push(states.clone());
        realized.push(snapshot);
    }

    let upsilon: Vec<bool> = states.iter().map(|&s| s != State::Susceptible).collect();
    let panel = Panel {
        xi_static,
        traj,
        state: state_rows,
        upsilon,
    };
    let realized_network = TemporalNetwork::from_snapshots(realized)?;
    Ok((panel, realized_network))
}

// ---------------------------------------------------------------------------
// policy copies
// ---------------------------------------------------------------------------

/// Re-samples `m` exposure histories under a counterfactual policy, holding
/// the observed infection states fixed. Quarantine windows, realized
/// snapshots, and every network-dependent summary are re-simulated per copy;
/// the disease process itself is never re-run (the outcome mechanism is
/// treated as unknown).
pub fn sample_policy_copies(
    panel: &Panel,
    network: &TemporalNetwork,
    policy: &PolicySpec,
    m_copies: usize,
    config: &SimConfig,
    seed_value: u64,
) -> Result<Vec<PolicyCopy>> {
    policy.validate()?;
    config.validate()?;
    if policy.mode != PolicyMode::Counterfactual {
        return Err(Error::argument(
            "policy copies require a counterfactual policy",
        ));
    }
    if m_copies == 0 {
        return Err(Error::argument("need at least one policy copy"));
    }
    let n = network.n();
    if panel.n() != n {
        return Err(Error::argument("panel and network disagree on node count"));
    }
    let t_steps = panel.t_steps();
    if t_steps != config.t_steps {
        return Err(Error::argument("panel and config disagree on t_steps"));
    }
    let records = m_copies
        .saturating_mul(n)
        .saturating_mul(t_steps + 1);
    if records > MAX_SAMPLED_RECORDS {
        let per_copy = n * (t_steps + 1);
        return Err(Error::Resource {
            requested: records,
            budget: MAX_SAMPLED_RECORDS,
            suggested_m: (MAX_SAMPLED_RECORDS / per_copy).max(1),
        });
    }

    let removes_edges = config.quarantine_removes_edges();
    let mut copies = Vec::with_capacity(m_copies);
    for l in 0..m_copies {
        let mut rng = seed::rng(seed::derive(seed_value, "policy-copy", l as u64));
        let mut tracker =
            QuarantineTracker::new(n, config.quarantine_period, config.allow_requarantine);
        let mut traj = Trajectory::with_capacity(t_steps);
        let mut prev: Adjacency = network.base_at(0).clone();

        // step 0 mirrors the observed initial condition
        let (inf0, quar0, mean0, ever0) =
            measure_covariates(&prev, &panel.state[0], &panel.xi_static, &tracker.cum_steps);
        traj.alpha.push(vec![false; n]);
        traj.alpha_s.push(vec![0; n]);
        traj.xi_inf_nbrs.push(inf0);
        traj.xi_quar_hist.push(quar0);
        traj.xi_s_mean.push(mean0);
        traj.xi_s_infsum.push(ever0);

        for t in 1..=t_steps {
            let base = network.base_at(t);
            let (inf_nbrs, quar_hist, s_mean, ever_nbrs) = measure_covariates(
                &prev,
                &panel.state[t - 1],
                &panel.xi_static,
                &tracker.cum_steps,
            );
            let probs = vec![policy.p_omega; n];
            let pool = budget_pool(policy, base);
            quarantine_wave(&mut tracker, &pool, &probs, t, &mut rng);
            let alpha_t: Vec<bool> = (0..n).map(|i| tracker.active(i, t)).collect();
            let alpha_s_t = summary_exposure(&prev, &alpha_t);
            tracker.finish_step(t);

            prev = if removes_edges {
                base.without_nodes(&alpha_t)
            } else {
                base.clone()
            };

            traj.alpha.push(alpha_t);
            traj.alpha_s.push(alpha_s_t);
            traj.xi_inf_nbrs.push(inf_nbrs);
            traj.xi_quar_hist.push(quar_hist);
            traj.xi_s_mean.push(s_mean);
            traj.xi_s_infsum.push(ever_nbrs);
        }
        copies.push(PolicyCopy { traj });
    }
    Ok(copies)
}

// ---------------------------------------------------------------------------
// ground truth
// ---------------------------------------------------------------------------

/// Monte-Carlo estimate of the true mean infection rate under a policy:
/// fresh epidemics on the same network, averaged over replicates. Used only
/// for evaluating estimators, never by them.
pub fn counterfactual_truth(
    network: &TemporalNetwork,
    policy: &PolicySpec,
    config: &SimConfig,
    n_replicates: usize,
    seed_value: u64,
) -> Result<f64> {
    if policy.mode != PolicyMode::Counterfactual {
        return Err(Error::argument("ground truth requires a counterfactual policy"));
    }
    if n_replicates == 0 {
        return Err(Error::argument("need at least one replicate"));
    }
    let mut total = 0.0;
    for rep in 0..n_replicates {
        let rep_seed = seed::derive(seed_value, "truth-replicate", rep as u64);
        let (panel, _) = run_sir(network, policy, config, rep_seed)?;
        total += panel.attack_rate();
    }
    Ok(total / n_replicates as f64)
}

// ---------------------------------------------------------------------------
// panel CSV
// ---------------------------------------------------------------------------

pub const PANEL_CSV_HEADER: &str = "rep,t,node,alpha,alpha_s,state,xi_static,xi_inf_nbrs,\
xi_quar_hist,xi_s_mean,xi_s_infsum,upsilon_final";

/// Writes one panel as CSV rows under the shared header, tagged with a
/// replicate id. Floats use the shortest round-trip representation.
pub fn write_panel_csv<W: Write>(panel: &Panel, rep: u32, writer: W) -> Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "{PANEL_CSV_HEADER}")?;
    write_panel_rows(panel, rep, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Appends the rows of one panel without a header (for multi-replicate files).
pub fn write_panel_rows<W: Write>(panel: &Panel, rep: u32, out: &mut W) -> Result<()> {
    let t_steps = panel.t_steps();
    for t in 0..=t_steps {
        for i in 0..panel.n() {
            writeln!(
                out,
                "{rep},{t},{i},{},{},{},{},{},{},{},{},{}",
                u8::from(panel.traj.alpha[t][i]),
                panel.traj.alpha_s[t][i],
                panel.state[t][i].letter(),
                panel.xi_static[i],
                panel.traj.xi_inf_nbrs[t][i],
                panel.traj.xi_quar_hist[t][i],
                panel.traj.xi_s_mean[t][i],
                panel.traj.xi_s_infsum[t][i],
                u8::from(panel.upsilon[i]),
            )?;
        }
    }
    Ok(())
}

/// Reads panels back from the CSV format, grouped by replicate id in file
/// order. Rows must arrive grouped by replicate and sorted by `(t, node)`.
pub fn read_panel_csv<R: Read>(reader: R) -> Result<Vec<(u32, Panel)>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("empty panel CSV"))??;
    if header.trim() != PANEL_CSV_HEADER {
        return Err(Error::parse("unexpected panel CSV header"));
    }

    /// `(t, node, alpha, alpha_s, state, inf_nbrs, quar_hist, s_mean,
    /// ever_nbrs, upsilon)` straight off one CSV line.
    type RawRow = (usize, usize, bool, u32, State, u32, u32, f64, u32, bool);
    struct Builder {
        xi_static: BTreeMap<usize, f64>,
        rows: Vec<RawRow>,
    }
    let mut panels: Vec<(u32, Panel)> = Vec::new();
    let mut current: Option<(u32, Builder)> = None;

    let finish = |rep: u32, b: Builder, panels: &mut Vec<(u32, Panel)>| -> Result<()> {
        let n = b.xi_static.len();
        if n == 0 {
            return Err(Error::parse("replicate with no rows"));
        }
        let t_max = b.rows.iter().map(|r| r.0).max().unwrap_or(0);
        let expect = n * (t_max + 1);
        if b.rows.len() != expect {
            return Err(Error::parse(format!(
                "replicate {rep}: {} rows, expected {expect}",
                b.rows.len()
            )));
        }
        let mut traj = Trajectory::with_capacity(t_max);
        let mut state = Vec::with_capacity(t_max + 1);
        let mut upsilon = vec![false; n];
        let mut xi_static = vec![0.0; n];
        for (&i, &v) in &b.xi_static {
            if i >= n {
                return Err(Error::parse(format!("node id {i} out of range")));
            }
            xi_static[i] = v;
        }
        for t in 0..=t_max {
            let mut alpha = vec![false; n];
            let mut alpha_s = vec![0; n];
            let mut inf = vec![0; n];
            let mut quar = vec![0; n];
            let mut mean = vec![0.0; n];
            let mut ever = vec![0; n];
            let mut states = vec![State::Susceptible; n];
            for row in b.rows.iter().filter(|r| r.0 == t) {
                let i = row.1;
                alpha[i] = row.2;
                alpha_s[i] = row.3;
                states[i] = row.4;
                inf[i] = row.5;
                quar[i] = row.6;
                mean[i] = row.7;
                ever[i] = row.8;
                upsilon[i] = row.9;
            }
            traj.alpha.push(alpha);
            traj.alpha_s.push(alpha_s);
            traj.xi_inf_nbrs.push(inf);
            traj.xi_quar_hist.push(quar);
            traj.xi_s_mean.push(mean);
            traj.xi_s_infsum.push(ever);
            state.push(states);
        }
        panels.push((
            rep,
            Panel {
                xi_static,
                traj,
                state,
                upsilon,
            },
        ));
        Ok(())
    };

    for (line_no, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 12 {
            return Err(Error::parse(format!(
                "line {}: expected 12 fields, found {}",
                line_no + 2,
                fields.len()
            )));
        }
        let ctx = |what: &str| format!("line {}: bad {what}", line_no + 2);
        let rep: u32 = fields[0].parse().map_err(|_| Error::parse(ctx("rep")))?;
        let t: usize = fields[1].parse().map_err(|_| Error::parse(ctx("t")))?;
        let node: usize = fields[2].parse().map_err(|_| Error::parse(ctx("node")))?;
        let alpha = match fields[3] {
            "0" => false,
            "1" => true,
            _ => return Err(Error::parse(ctx("alpha"))),
        };
        let alpha_s: u32 = fields[4].parse().map_err(|_| Error::parse(ctx("alpha_s")))?;
        let state = State::parse(fields[5])?;
        let xi_static: f64 = fields[6].parse().map_err(|_| Error::parse(ctx("xi_static")))?;
        let inf: u32 = fields[7].parse().map_err(|_| Error::parse(ctx("xi_inf_nbrs")))?;
        let quar: u32 = fields[8]
            .parse()
            .map_err(|_| Error::parse(ctx("xi_quar_hist")))?;
        let mean: f64 = fields[9].parse().map_err(|_| Error::parse(ctx("xi_s_mean")))?;
        let ever: u32 = fields[10]
            .parse()
            .map_err(|_| Error::parse(ctx("xi_s_infsum")))?;
        let ups = match fields[11] {
            "0" => false,
            "1" => true,
            _ => return Err(Error::parse(ctx("upsilon_final"))),
        };

        match &mut current {
            Some((r, b)) if *r == rep => {
                b.xi_static.insert(node, xi_static);
                b.rows.push((t, node, alpha, alpha_s, state, inf, quar, mean, ever, ups));
            }
            _ => {
                if let Some((r, b)) = current.take() {
                    finish(r, b, &mut panels)?;
                }
                let mut b = Builder {
                    xi_static: BTreeMap::new(),
                    rows: Vec::new(),
                };
                b.xi_static.insert(node, xi_static);
                b.rows.push((t, node, alpha, alpha_s, state, inf, quar, mean, ever, ups));
                current = Some((rep, b));
            }
        }
    }
    if let Some((r, b)) = current.take() {
        finish(r, b, &mut panels)?;
    }
    Ok(panels)
}
