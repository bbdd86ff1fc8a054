//! The five-step targeted estimator for policy effects under interference.
//!
//! Given an observed panel and a counterfactual quarantine policy, the
//! pipeline (1) fits an outcome model (linear or deep), (2) computes
//! density-ratio weights from exposure models fit on observed versus
//! policy-sampled records, (3) solves for a correcting intercept on the
//! logit scale ("targeting"), (4) Monte-Carlo-averages the corrected
//! predictions over sampled policy copies, and (5) reports two variance
//! estimates — one treating residuals as independent, one admitting
//! dependence along second-order contacts — with normal-approximation
//! confidence intervals.

use crate::deepnet::{self, MlpParams, TrainConfig, TrainSample};
use crate::design::{build_design, build_windows, DesignSpec, Scenario};
use crate::error::{Error, Result};
use crate::glm::{self, Family, GlmFit};
use crate::graph::{second_order_closure, SecondOrderClosure, TemporalNetwork};
use crate::linalg::Matrix;
use crate::scalar::{expit, logit};
use crate::seed;
use crate::sim::{sample_policy_copies, Panel, PolicyCopy, PolicySpec, Priority, RecordView, SimConfig};

/// Linear-model predictions are bounded away from {0, 1} by this margin.
pub const GLM_CLIP: (f64, f64) = (1e-9, 1.0 - 1e-9);

/// Default multiplicative weight truncation range.
pub const DEFAULT_WEIGHT_BOUNDS: (f64, f64) = (0.01, 100.0);

/// Denominator densities below this trigger a positivity warning.
const POSITIVITY_FLOOR: f64 = 1e-12;

/// Targeting intercepts beyond this magnitude are treated as degenerate.
const EPSILON_LIMIT: f64 = 10.0;

/// Residual tolerance of the targeting score equation.
const TARGET_TOLERANCE: f64 = 1e-10;

const MAX_TARGET_ITERATIONS: usize = 200;

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

/// Outcome-model family driving the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Unpenalized binomial regression on final-step columns.
    Glm,
    /// Ridge-penalized binomial regression (the flexible pairing).
    L2,
    /// Adversarial network over trailing windows.
    Deep,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Glm => "glm",
            ModelKind::L2 => "l2",
            ModelKind::Deep => "deep",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "glm" => Ok(ModelKind::Glm),
            "l2" => Ok(ModelKind::L2),
            "deep" => Ok(ModelKind::Deep),
            other => Err(Error::parse(format!("unknown model `{other}`"))),
        }
    }
}

/// Everything one estimator run needs beyond the panel itself.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub model: ModelKind,
    pub scenario: Scenario,
    /// Sampled policy copies `M` (shared by weight fitting and the Monte
    /// Carlo mean).
    pub m_copies: usize,
    pub weight_bounds: (f64, f64),
    /// Ridge strength for the flexible scenario's penalized fits.
    pub ridge_penalty: f64,
    /// Deep-model training hyperparameters.
    pub train: TrainConfig,
    /// How many sampled copies join the deep training set as unlabeled
    /// records. Must be ≥ 1 for deep models: the network's adversarial head
    /// is meaningless without policy-sampled windows.
    pub train_unlabeled_copies: usize,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn new(model: ModelKind, scenario: Scenario, seed: u64) -> Self {
        EstimatorConfig {
            model,
            scenario,
            m_copies: 100,
            weight_bounds: DEFAULT_WEIGHT_BOUNDS,
            ridge_penalty: 1.0,
            train: TrainConfig::default(),
            train_unlabeled_copies: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_copies == 0 {
            return Err(Error::argument("need at least one sampled policy copy"));
        }
        let (lo, hi) = self.weight_bounds;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(Error::argument("weight bounds must satisfy 0 < low < high"));
        }
        if !(self.ridge_penalty >= 0.0 && self.ridge_penalty.is_finite()) {
            return Err(Error::argument("ridge penalty must be non-negative"));
        }
        if self.model == ModelKind::Deep {
            self.train.validate()?;
            if self.train_unlabeled_copies == 0 || self.train_unlabeled_copies > self.m_copies {
                return Err(Error::argument(
                    "deep outcome models need 1..=m_copies sampled copies in the training set",
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// outcome model
// ---------------------------------------------------------------------------

enum OutcomeInner {
    Linear(GlmFit<f64>),
    // boxed: the trained network dwarfs a coefficient vector
    Deep { params: Box<MlpParams<f64>>, reception_field: usize },
}

/// A fitted outcome model together with the design recipe needed to apply it
/// to any record set (observed or sampled). Predictions come back clipped:
/// deep models to (0.05, 0.95), linear models merely bounded away from {0,1}.
pub struct FittedOutcome {
    pub kind: ModelKind,
    spec: DesignSpec,
    inner: OutcomeInner,
}

impl FittedOutcome {
    pub fn converged(&self) -> bool {
        match &self.inner {
            OutcomeInner::Linear(fit) => fit.converged,
            OutcomeInner::Deep { .. } => true,
        }
    }

    /// Per-individual final-step outcome probability.
    pub fn predict(&self, view: &RecordView) -> Result<Vec<f64>> {
        match &self.inner {
            OutcomeInner::Linear(fit) => {
                let x = build_design(
                    view,
                    &self.spec.outcome_vars,
                    view.t_steps(),
                    self.spec.binning.as_ref(),
                    true,
                )?;
                Ok(glm::predict(fit, &x, None)
                    .into_iter()
                    .map(|p| p.clamp(GLM_CLIP.0, GLM_CLIP.1))
                    .collect())
            }
            OutcomeInner::Deep { params, reception_field } => {
                let windows = build_windows(
                    view,
                    &self.spec.outcome_vars,
                    *reception_field,
                    self.spec.binning.as_ref(),
                )?;
                deepnet::predict_many(params, &windows)
            }
        }
    }
}

/// Fits the outcome model. Linear kinds use final-step rows only; the deep
/// kind trains on trailing windows of the observed records (labeled) mixed
/// with windows from the leading sampled copies (unlabeled, feeding the
/// adversarial head).
pub fn fit_outcome(
    panel: &Panel,
    copies: &[PolicyCopy],
    spec: &DesignSpec,
    cfg: &EstimatorConfig,
) -> Result<FittedOutcome> {
    let view = panel.view();
    let y: Vec<f64> = panel.upsilon.iter().map(|&u| f64::from(u)).collect();
    let inner = match cfg.model {
        ModelKind::Glm | ModelKind::L2 => {
            let x = build_design(
                &view,
                &spec.outcome_vars,
                panel.t_steps(),
                spec.binning.as_ref(),
                true,
            )?;
            let l2 = if cfg.model == ModelKind::L2 {
                cfg.ridge_penalty
            } else {
                0.0
            };
            OutcomeInner::Linear(glm::fit_dropping_aliased(Family::Binomial, &x, &y, None, None, l2)?)
        }
        ModelKind::Deep => {
            if cfg.train_unlabeled_copies == 0 || cfg.train_unlabeled_copies > copies.len() {
                return Err(Error::argument(
                    "deep outcome models need 1..=m_copies sampled copies in the training set",
                ));
            }
            let t_r = cfg.train.reception_field;
            let binning = spec.binning.as_ref();
            let observed = build_windows(&view, &spec.outcome_vars, t_r, binning)?;
            let labeled: Vec<TrainSample<f64>> = observed
                .into_iter()
                .zip(y.iter())
                .map(|(window, &yi)| TrainSample {
                    window,
                    outcome: Some(yi),
                    intervention: 0.0,
                })
                .collect();
            let mut unlabeled = Vec::with_capacity(cfg.train_unlabeled_copies * panel.n());
            for copy in &copies[..cfg.train_unlabeled_copies] {
                let windows =
                    build_windows(&copy.view(panel), &spec.outcome_vars, t_r, binning)?;
                unlabeled.extend(windows.into_iter().map(|window| TrainSample {
                    window,
                    outcome: None,
                    intervention: 1.0,
                }));
            }
            let train_cfg = TrainConfig {
                seed: seed::derive(cfg.seed, "outcome-train", 0),
                ..cfg.train.clone()
            };
            let params = deepnet::train(&labeled, &unlabeled, &train_cfg)?;
            OutcomeInner::Deep {
                params: Box::new(params),
                reception_field: t_r,
            }
        }
    };
    Ok(FittedOutcome {
        kind: cfg.model,
        spec: spec.clone(),
        inner,
    })
}

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

/// Density-ratio weights after truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub weights: Vec<f64>,
    pub bounds: (f64, f64),
    /// Some denominator density fell below the positivity floor.
    pub positivity_warning: bool,
    /// All four exposure-model fits converged.
    pub converged: bool,
}

/// Fits the exposure models and produces per-individual weights: binomial
/// model `g` for the quarantine indicator and Poisson model `h` for the
/// quarantined-neighbor count, each fit once on the observed final step
/// (denominator) and once on the pooled sampled copies (numerator), with all
/// four densities evaluated at the observed records.
pub fn estimate_iptw(
    panel: &Panel,
    copies: &[PolicyCopy],
    spec: &DesignSpec,
    bounds: (f64, f64),
    ridge: f64,
) -> Result<WeightSet> {
    if copies.is_empty() {
        return Err(Error::argument("weight estimation needs sampled copies"));
    }
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        return Err(Error::argument("weight bounds must satisfy 0 < low < high"));
    }
    let t = panel.t_steps();
    let n = panel.n();
    let view = panel.view();
    let binning = spec.binning.as_ref();

    let x_obs = build_design(&view, &spec.exposure_vars, t, binning, true)?;
    let a_obs: Vec<f64> = panel.traj.alpha[t].iter().map(|&b| f64::from(b)).collect();
    let s_obs: Vec<f64> = panel.traj.alpha_s[t].iter().map(|&c| f64::from(c)).collect();

    let g = glm::fit_dropping_aliased(Family::Binomial, &x_obs, &a_obs, None, None, ridge)?;
    let h = glm::fit_dropping_aliased(Family::Poisson, &x_obs, &s_obs, None, None, ridge)?;
    let den_g = glm::density(&g, &x_obs, &a_obs, None)?;
    let den_h = glm::density(&h, &x_obs, &s_obs, None)?;

    // numerator models on the pooled copies
    let cols = x_obs.n_cols();
    let mut pooled = Vec::with_capacity(copies.len() * n * cols);
    let mut a_pool = Vec::with_capacity(copies.len() * n);
    let mut s_pool = Vec::with_capacity(copies.len() * n);
    for copy in copies {
        let x_copy = build_design(&copy.view(panel), &spec.exposure_vars, t, binning, true)?;
        pooled.extend_from_slice(x_copy.data());
        a_pool.extend(copy.traj.alpha[t].iter().map(|&b| f64::from(b)));
        s_pool.extend(copy.traj.alpha_s[t].iter().map(|&c| f64::from(c)));
    }
    let x_pool = Matrix::from_rows(copies.len() * n, cols, pooled);
    let g_star = glm::fit_dropping_aliased(Family::Binomial, &x_pool, &a_pool, None, None, ridge)?;
    let h_star = glm::fit_dropping_aliased(Family::Poisson, &x_pool, &s_pool, None, None, ridge)?;
    let num_g = glm::density(&g_star, &x_obs, &a_obs, None)?;
    let num_h = glm::density(&h_star, &x_obs, &s_obs, None)?;

    let mut positivity_warning = false;
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let den = den_g[i] * den_h[i];
            if den < POSITIVITY_FLOOR {
                positivity_warning = true;
            }
            let w = (num_g[i] * num_h[i]) / den.max(POSITIVITY_FLOOR);
            w.clamp(lo, hi)
        })
        .collect();
    Ok(WeightSet {
        weights,
        bounds,
        positivity_warning,
        converged: g.converged && h.converged && g_star.converged && h_star.converged,
    })
}

// ---------------------------------------------------------------------------
// targeting
// ---------------------------------------------------------------------------

/// Outcome of the targeting solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetResult {
    /// The correcting intercept (0 when the reset rule fired).
    pub epsilon: f64,
    /// True when the solution was degenerate (no root, or |ε| above 10).
    pub reset: bool,
    pub iterations: usize,
    /// Weighted score at the returned intercept.
    pub score: f64,
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Solves the weighted intercept-only logistic score equation
/// `Σ wᵢ (yᵢ − expit(ε + logit(ŷᵢ))) = 0` by bracketed Newton iteration.
/// Solutions with |ε| > 10, and instances with no finite root, return ε = 0
/// with the reset flag raised.
pub fn target(y: &[f64], y_hat: &[f64], weights: &[f64]) -> Result<TargetResult> {
    let n = y.len();
    if n == 0 || y_hat.len() != n || weights.len() != n {
        return Err(Error::argument("targeting inputs must be equal-length and nonempty"));
    }
    for i in 0..n {
        if !(0.0..=1.0).contains(&y[i]) {
            return Err(Error::argument("outcomes must lie in [0, 1]"));
        }
        if !(y_hat[i] > 0.0 && y_hat[i] < 1.0) {
            return Err(Error::argument("predictions must be strictly inside (0, 1)"));
        }
        if !(weights[i] >= 0.0 && weights[i].is_finite()) {
            return Err(Error::argument("weights must be finite and non-negative"));
        }
    }
    let logits: Vec<f64> = y_hat.iter().map(|&p| logit(p)).collect();
    let score_at = |e: f64| -> (f64, f64) {
        let s = neumaier_sum((0..n).map(|i| weights[i] * (y[i] - expit(e + logits[i]))));
        let d = neumaier_sum((0..n).map(|i| {
            let p = expit(e + logits[i]);
            -weights[i] * p * (1.0 - p)
        }));
        (s, d)
    };

    // the score is decreasing in ε; bracket wide enough for any clipped input
    let (mut lo, mut hi) = (-35.0, 35.0);
    let (s_lo, _) = score_at(lo);
    let (s_hi, _) = score_at(hi);
    if s_lo < 0.0 || s_hi > 0.0 {
        // no root in any reasonable range (all-zero or all-one responses)
        let (s0, _) = score_at(0.0);
        return Ok(TargetResult {
            epsilon: 0.0,
            reset: true,
            iterations: 0,
            score: s0,
        });
    }

    let mut e = 0.0;
    let (mut s, mut d) = score_at(e);
    let mut iterations = 0;
    while s.abs() > TARGET_TOLERANCE && iterations < MAX_TARGET_ITERATIONS {
        if s > 0.0 {
            lo = e;
        } else {
            hi = e;
        }
        let newton = e - s / d;
        e = if d < 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let (ns, nd) = score_at(e);
        s = ns;
        d = nd;
        iterations += 1;
        if hi - lo < f64::EPSILON * 4.0 {
            break;
        }
    }

    if e.abs() > EPSILON_LIMIT {
        let (s0, _) = score_at(0.0);
        return Ok(TargetResult {
            epsilon: 0.0,
            reset: true,
            iterations,
            score: s0,
        });
    }
    Ok(TargetResult {
        epsilon: e,
        reset: false,
        iterations,
        score: s,
    })
}

// ---------------------------------------------------------------------------
// point estimate and variance
// ---------------------------------------------------------------------------

/// Monte Carlo mean of the targeted predictions over all sampled copies:
/// `ψ̂ = (1/(M·N)) Σ_l Σ_i expit(logit(ŷ*_il) + ε)`.
pub fn estimate_psi(copy_predictions: &[Vec<f64>], epsilon: f64) -> Result<f64> {
    if copy_predictions.is_empty() || copy_predictions[0].is_empty() {
        return Err(Error::argument("need predictions from at least one copy"));
    }
    let n = copy_predictions[0].len();
    let mut total = 0.0;
    let mut count = 0usize;
    for preds in copy_predictions {
        if preds.len() != n {
            return Err(Error::argument("copies disagree on population size"));
        }
        for &p in preds {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::argument("predictions must be strictly inside (0, 1)"));
            }
            total += expit(logit(p) + epsilon);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// The two residual-variance estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceParts {
    /// Treats weighted residuals as independent.
    pub direct: f64,
    /// Admits covariance along the second-order contact relation.
    pub latent: f64,
}

/// `σ_d² = (1/N) Σ (Wᵢ(Yᵢ−Ŷᵢ))²` and
/// `σ_l² = (1/N) Σᵢ Σⱼ 𝒢ᵢⱼ (Wᵢrᵢ)(Wⱼrⱼ)` over the closure relation.
/// `y_hat` should be the targeted observed predictions.
pub fn estimate_variance(
    y: &[f64],
    y_hat: &[f64],
    weights: &[f64],
    closure: &SecondOrderClosure,
) -> Result<VarianceParts> {
    let n = y.len();
    if n == 0 || y_hat.len() != n || weights.len() != n || closure.n() != n {
        return Err(Error::argument("variance inputs must agree on length"));
    }
    let r: Vec<f64> = (0..n).map(|i| weights[i] * (y[i] - y_hat[i])).collect();
    let direct = r.iter().map(|&v| v * v).sum::<f64>() / n as f64;
    let mut latent = 0.0;
    for i in 0..n {
        for &j in closure.reach(i) {
            latent += r[i] * r[j];
        }
    }
    latent /= n as f64;
    Ok(VarianceParts { direct, latent })
}

/// Inverse standard-normal CDF (Acklam's rational approximation,
/// |relative error| < 1.2e-9).
// The coefficients keep Acklam's published digits verbatim so the
// implementation can be checked against the reference table by eye.
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::argument("quantile probability must be in (0, 1)"));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let q_from_tail = |p_tail: f64| {
        let q = (-2.0 * p_tail.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let z = if p < P_LOW {
        q_from_tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -q_from_tail(1.0 - p)
    };
    Ok(z)
}

/// Normal-approximation interval `ψ̂ ∓ z_{1−α/2}·sqrt(σ²/n)`.
pub fn confidence_interval(
    psi_hat: f64,
    sigma2: f64,
    n: usize,
    alpha: f64,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::argument("interval needs n ≥ 1"));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::argument("variance must be finite and non-negative"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::argument("alpha must be in (0, 1)"));
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let half = z * (sigma2 / n as f64).sqrt();
    Ok((psi_hat - half, psi_hat + half))
}

// ---------------------------------------------------------------------------
// orchestration
// ---------------------------------------------------------------------------

/// Full output of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub model: ModelKind,
    pub scenario: Scenario,
    pub psi_hat: f64,
    pub epsilon: f64,
    pub epsilon_reset: bool,
    pub sigma_d2: f64,
    pub sigma_l2: f64,
    pub ci_direct: (f64, f64),
    pub ci_latent: (f64, f64),
    pub m_copies: usize,
    pub positivity_warning: bool,
    pub outcome_converged: bool,
    pub weights_converged: bool,
    /// The latent variance came out negative and was floored at 0 for the CI.
    pub latent_clamped: bool,
}

impl EstimateReport {
    /// Diagnostic tokens for the run CSV `notes` column.
    pub fn notes(&self) -> String {
        let mut tokens = Vec::new();
        if self.positivity_warning {
            tokens.push("positivity_warning");
        }
        if self.epsilon_reset {
            tokens.push("epsilon_reset");
        }
        if !self.outcome_converged {
            tokens.push("outcome_nonconverged");
        }
        if !self.weights_converged {
            tokens.push("weights_nonconverged");
        }
        if self.latent_clamped {
            tokens.push("latent_variance_clamped");
        }
        tokens.join(";")
    }
}

/// Runs the five estimation steps in order. The sampled copies are generated
/// once and shared by the deep training set, the weight numerators, and the
/// Monte Carlo mean. `network` is the realized snapshot sequence paired with
/// the panel; its union drives the second-order closure.
pub fn run_estimator(
    panel: &Panel,
    network: &TemporalNetwork,
    policy: &PolicySpec,
    sim: &SimConfig,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    cfg.validate()?;
    let copies = sample_policy_copies(
        panel,
        network,
        policy,
        cfg.m_copies,
        sim,
        seed::derive(cfg.seed, "policy-copies", 0),
    )?;
    let mut spec = DesignSpec::for_scenario(cfg.scenario);
    spec.prepare(&panel.view());

    // step 1: outcome model
    let outcome = fit_outcome(panel, &copies, &spec, cfg)?;

    // step 2: weights
    let ridge = if spec.uses_ridge() { cfg.ridge_penalty } else { 0.0 };
    let weights = estimate_iptw(panel, &copies, &spec, cfg.weight_bounds, ridge)?;

    // step 3: targeting on the observed records
    let y: Vec<f64> = panel.upsilon.iter().map(|&u| f64::from(u)).collect();
    let y_hat = outcome.predict(&panel.view())?;
    let targeting = target(&y, &y_hat, &weights.weights)?;

    // step 4: Monte Carlo mean over the sampled copies
    let copy_predictions: Result<Vec<Vec<f64>>> = copies
        .iter()
        .map(|c| outcome.predict(&c.view(panel)))
        .collect();
    let psi_hat = estimate_psi(&copy_predictions?, targeting.epsilon)?;

    // step 5: variances from the targeted observed predictions
    let targeted: Vec<f64> = y_hat
        .iter()
        .map(|&p| expit(logit(p) + targeting.epsilon))
        .collect();
    let closure = second_order_closure(network);
    let variance = estimate_variance(&y, &targeted, &weights.weights, &closure)?;
    let latent_clamped = variance.latent < 0.0;
    let latent_for_ci = variance.latent.max(0.0);
    let n = panel.n();
    let ci_direct = confidence_interval(psi_hat, variance.direct, n, 0.05)?;
    let ci_latent = confidence_interval(psi_hat, latent_for_ci, n, 0.05)?;

    Ok(EstimateReport {
        model: cfg.model,
        scenario: cfg.scenario,
        psi_hat,
        epsilon: targeting.epsilon,
        epsilon_reset: targeting.reset,
        sigma_d2: variance.direct,
        sigma_l2: variance.latent,
        ci_direct,
        ci_latent,
        m_copies: cfg.m_copies,
        positivity_warning: weights.positivity_warning,
        outcome_converged: outcome.converged(),
        weights_converged: weights.converged,
        latent_clamped,
    })
}

// ---------------------------------------------------------------------------
// run CSV
// ---------------------------------------------------------------------------

pub const RUN_CSV_HEADER: &str = "run_id,graph,n,scenario,policy,p_omega,budget,priority,model,\
psi_hat,epsilon,sigma_d2,sigma_l2,lci_d,uci_d,lci_l,uci_l,m_copies,notes";

/// One run CSV row: grid coordinates plus the report (absent on failure,
/// leaving the numeric fields empty).
pub struct RunRow<'a> {
    pub run_id: &'a str,
    pub graph: &'a str,
    pub n: usize,
    pub scenario: Scenario,
    /// Policy family label (the stochastic Bernoulli policy is the only one).
    pub policy: &'a str,
    pub p_omega: f64,
    pub budget: f64,
    pub priority: Priority,
    pub model: ModelKind,
    pub report: Option<&'a EstimateReport>,
    pub notes: &'a str,
}

impl RunRow<'_> {
    pub fn to_csv(&self) -> String {
        let clean: String = self
            .notes
            .chars()
            .map(|c| match c {
                ',' => ';',
                '\n' | '\r' => ' ',
                c => c,
            })
            .collect();
        let head = format!(
            "{},{},{},{},{},{},{},{},{}",
            self.run_id,
            self.graph,
            self.n,
            self.scenario.name(),
            self.policy,
            self.p_omega,
            self.budget,
            self.priority.name(),
            self.model.name()
        );
        match self.report {
            Some(r) => format!(
                "{head},{},{},{},{},{},{},{},{},{},{clean}",
                r.psi_hat,
                r.epsilon,
                r.sigma_d2,
                r.sigma_l2,
                r.ci_direct.0,
                r.ci_direct.1,
                r.ci_latent.0,
                r.ci_latent.1,
                r.m_copies
            ),
            None => format!("{head},,,,,,,,,,{clean}"),
        }
    }
}
