//! Generalized linear models fit by iteratively reweighted least squares.
//!
//! Covers the two families the estimators need — binomial and Poisson, both
//! with canonical links — plus observation weights, offsets, and an optional
//! L2 penalty on the non-intercept coefficients. Convergence is declared on
//! the penalized score, `Xᵀ diag(w) (y − μ) − 2·λ·β̃` (intercept unpenalized),
//! dropping below [`SCORE_TOLERANCE`] in absolute value.

use crate::error::{Error, Result};
use crate::linalg::{dot, solve_spd, Matrix};
use crate::scalar::{expit, Real};

/// Maximum absolute penalized score accepted as converged.
pub const SCORE_TOLERANCE: f64 = 1e-8;
/// IRLS iteration cap.
pub const MAX_ITERATIONS: usize = 100;
/// Step-halving cap within one iteration.
const MAX_HALVINGS: usize = 30;
/// Linear predictors beyond this magnitude (net of offset) mark a
/// non-identified fit, e.g. complete separation in a binomial model.
const ETA_BOUND_BINOMIAL: f64 = 30.0;
const ETA_BOUND_POISSON: f64 = 300.0;

/// Response distribution, always with its canonical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Bernoulli responses, logit link.
    Binomial,
    /// Count responses, log link.
    Poisson,
}

impl Family {
    fn mean<R: Real>(self, eta: R) -> R {
        match self {
            Family::Binomial => expit(eta),
            Family::Poisson => eta.min(R::of(700.0)).exp(),
        }
    }

    /// Variance function evaluated at the mean.
    fn variance<R: Real>(self, mu: R) -> R {
        match self {
            Family::Binomial => mu * (R::one() - mu),
            Family::Poisson => mu,
        }
    }

    fn eta_bound(self) -> f64 {
        match self {
            Family::Binomial => ETA_BOUND_BINOMIAL,
            Family::Poisson => ETA_BOUND_POISSON,
        }
    }

    /// Unit deviance contribution (saturated minus fitted log-likelihood,
    /// times two).
    fn unit_deviance<R: Real>(self, y: R, mu: R) -> R {
        let tiny = R::of(1e-300);
        match self {
            Family::Binomial => {
                let mut d = R::zero();
                if y > R::zero() {
                    d = d + y * (y / mu.max(tiny)).ln();
                }
                let one = R::one();
                if y < one {
                    d = d + (one - y) * ((one - y) / (one - mu).max(tiny)).ln();
                }
                R::of(2.0) * d
            }
            Family::Poisson => {
                let mut d = mu - y;
                if y > R::zero() {
                    d = d + y * (y / mu.max(tiny)).ln();
                }
                R::of(2.0) * d
            }
        }
    }
}

/// Fitted model returned by [`fit`].
#[derive(Debug, Clone)]
pub struct GlmFit<R> {
    pub family: Family,
    /// Coefficients in design-column order (column 0 is the intercept).
    pub coefficients: Vec<R>,
    pub l2_penalty: R,
    /// False when the score criterion was not met within the iteration cap,
    /// or the fit drifted past the identifiability bound (separation).
    pub converged: bool,
    pub n_iterations: usize,
    /// Largest absolute penalized score component at the final coefficients.
    pub max_abs_score: R,
    /// Penalized deviance after each accepted step; non-increasing.
    pub deviance_trace: Vec<R>,
}

/// Fits by IRLS. `weights` are non-negative observation weights (default 1),
/// `offset` a fixed additive term on the linear predictor, `l2` the ridge
/// penalty applied to every coefficient except the intercept.
///
/// Fails on dimension mismatches, non-finite or out-of-family values, and on
/// a singular cross-product when `l2` is zero (reporting the dependent
/// columns).
pub fn fit<R: Real>(
    family: Family,
    x: &Matrix<R>,
    y: &[R],
    weights: Option<&[R]>,
    offset: Option<&[R]>,
    l2: R,
) -> Result<GlmFit<R>> {
    let n = x.n_rows();
    let p = x.n_cols();
    validate_inputs(family, x, y, weights, offset, l2)?;

    let ones = vec![R::one(); n];
    let w_obs: &[R] = weights.unwrap_or(&ones);
    let zeros = vec![R::zero(); n];
    let off: &[R] = offset.unwrap_or(&zeros);

    // adjusted-response start: first working state comes from a perturbed
    // response mean rather than from zero coefficients
    let mu_start: Vec<R> = match family {
        Family::Binomial => y
            .iter()
            .zip(w_obs)
            .map(|(&yi, &wi)| (wi * yi + R::of(0.5)) / (wi + R::one()))
            .collect(),
        Family::Poisson => y.iter().map(|&yi| yi + R::of(0.1)).collect(),
    };
    let mut eta: Vec<R> = match family {
        Family::Binomial => mu_start.iter().map(|&m| (m / (R::one() - m)).ln()).collect(),
        Family::Poisson => mu_start.iter().map(|&m| m.ln()).collect(),
    };
    let mut mu = mu_start;

    let mut beta = vec![R::zero(); p];
    let mut have_beta = false;
    let mut deviance_trace: Vec<R> = Vec::new();
    let tol = R::of(SCORE_TOLERANCE);
    let mut n_iterations = 0;
    let mut converged = false;

    for iter in 0..MAX_ITERATIONS {
        n_iterations = iter + 1;

        // working weights and response at the current state
        let floor = R::of(1e-12);
        let w_irls: Vec<R> = mu
            .iter()
            .zip(w_obs)
            .map(|(&m, &wi)| wi * family.variance(m).max(floor))
            .collect();
        let z: Vec<R> = (0..n)
            .map(|i| {
                let v = family.variance(mu[i]).max(floor);
                (eta[i] - off[i]) + (y[i] - mu[i]) / v
            })
            .collect();

        // penalized normal equations: (Xᵀ W X + 2 λ D) β = Xᵀ W z
        let mut xtwx = x.weighted_cross(&w_irls);
        let two_l2 = R::of(2.0) * l2;
        for j in 1..p {
            let d = xtwx.get(j, j);
            xtwx.set(j, j, d + two_l2);
        }
        let wz: Vec<R> = w_irls.iter().zip(&z).map(|(&w, &zi)| w * zi).collect();
        let xtwz = x.t_vec(&wz);
        let candidate = solve_spd(&xtwx, &xtwz)?;
        if candidate.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("IRLS solution at iteration {}", iter + 1),
            });
        }

        // step-halving toward the previous coefficients keeps the penalized
        // deviance non-increasing
        let prev_dev = deviance_trace.last().copied();
        let mut accepted = candidate.clone();
        let mut state = linear_state(family, x, &accepted, off);
        let mut dev = penalized_deviance(family, y, &state.1, w_obs, &accepted, l2);
        if have_beta {
            let mut halvings = 0;
            while let Some(prev) = prev_dev {
                if dev.is_finite() && dev <= prev + prev.abs() * R::of(1e-12) + R::of(1e-12) {
                    break;
                }
                if halvings >= MAX_HALVINGS {
                    // no usable step; stop at the previous coefficients
                    accepted = beta.clone();
                    state = linear_state(family, x, &accepted, off);
                    dev = prev;
                    break;
                }
                for (a, &b) in accepted.iter_mut().zip(&beta) {
                    *a = (*a + b) / R::of(2.0);
                }
                state = linear_state(family, x, &accepted, off);
                dev = penalized_deviance(family, y, &state.1, w_obs, &accepted, l2);
                halvings += 1;
            }
        }
        if !dev.is_finite() {
            return Err(Error::NonFinite {
                context: format!("penalized deviance at iteration {}", iter + 1),
            });
        }

        beta = accepted;
        have_beta = true;
        eta = state.0;
        mu = state.1;
        deviance_trace.push(dev);

        let score = penalized_score(x, y, &mu, w_obs, &beta, l2);
        let max_abs = score
            .iter()
            .map(|s| s.abs())
            .fold(R::zero(), |m, v| if v > m { v } else { m });
        let identified = eta
            .iter()
            .zip(off)
            .all(|(&e, &o)| (e - o).abs() <= R::of(family.eta_bound()));
        if max_abs < tol && identified {
            converged = true;
            break;
        }
    }

    let (final_eta, final_mu) = linear_state(family, x, &beta, off);
    let score = penalized_score(x, y, &final_mu, w_obs, &beta, l2);
    let max_abs_score = score
        .iter()
        .map(|s| s.abs())
        .fold(R::zero(), |m, v| if v > m { v } else { m });
    let _ = final_eta;

    Ok(GlmFit {
        family,
        coefficients: beta,
        l2_penalty: l2,
        converged,
        n_iterations,
        max_abs_score,
        deviance_trace,
    })
}

/// Like [`fit`], but recovers from a singular cross-product by dropping the
/// reported dependent columns and refitting on the remainder. Dropped columns
/// come back as zero coefficients, so the result applies to full-width
/// designs unchanged. Infection-driven covariates routinely go constant once
/// an epidemic burns out, which makes the unpenalized final-step design
/// rank-deficient; this is the standard aliased-column treatment.
pub fn fit_dropping_aliased<R: Real>(
    family: Family,
    x: &Matrix<R>,
    y: &[R],
    weights: Option<&[R]>,
    offset: Option<&[R]>,
    l2: R,
) -> Result<GlmFit<R>> {
    let p = x.n_cols();
    let mut active: Vec<usize> = (0..p).collect();
    loop {
        let reduced;
        let attempt = if active.len() == p {
            fit(family, x, y, weights, offset, l2)
        } else {
            let mut data = Vec::with_capacity(x.n_rows() * active.len());
            for i in 0..x.n_rows() {
                let row = x.row(i);
                data.extend(active.iter().map(|&j| row[j]));
            }
            reduced = Matrix::from_rows(x.n_rows(), active.len(), data);
            fit(family, &reduced, y, weights, offset, l2)
        };
        match attempt {
            Ok(mut fitted) => {
                if active.len() < p {
                    let mut full = vec![R::zero(); p];
                    for (k, &j) in active.iter().enumerate() {
                        full[j] = fitted.coefficients[k];
                    }
                    fitted.coefficients = full;
                }
                return Ok(fitted);
            }
            Err(Error::SingularDesign { columns }) => {
                let drop: Vec<usize> = columns
                    .iter()
                    .filter(|&&k| k < active.len())
                    .map(|&k| active[k])
                    .collect();
                let before = active.len();
                active.retain(|j| !drop.contains(j));
                if active.is_empty() || active.len() == before {
                    return Err(Error::SingularDesign { columns: drop });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn validate_inputs<R: Real>(
    family: Family,
    x: &Matrix<R>,
    y: &[R],
    weights: Option<&[R]>,
    offset: Option<&[R]>,
    l2: R,
) -> Result<()> {
    let n = x.n_rows();
    if n == 0 || x.n_cols() == 0 {
        return Err(Error::argument("empty design matrix"));
    }
    if y.len() != n {
        return Err(Error::argument(format!(
            "response length {} does not match {} design rows",
            y.len(),
            n
        )));
    }
    if x.has_non_finite() {
        return Err(Error::argument("non-finite value in design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument("non-finite response"));
    }
    match family {
        Family::Binomial => {
            if y.iter().any(|&v| v < R::zero() || v > R::one()) {
                return Err(Error::argument("binomial response outside [0, 1]"));
            }
        }
        Family::Poisson => {
            if y.iter().any(|&v| v < R::zero()) {
                return Err(Error::argument("negative Poisson response"));
            }
        }
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::argument("weight length mismatch"));
        }
        if w.iter().any(|&v| !v.is_finite() || v < R::zero()) {
            return Err(Error::argument("weights must be finite and non-negative"));
        }
    }
    if let Some(o) = offset {
        if o.len() != n {
            return Err(Error::argument("offset length mismatch"));
        }
        if o.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("non-finite offset"));
        }
    }
    if !l2.is_finite() || l2 < R::zero() {
        return Err(Error::argument("l2 penalty must be finite and non-negative"));
    }
    Ok(())
}

fn linear_state<R: Real>(
    family: Family,
    x: &Matrix<R>,
    beta: &[R],
    offset: &[R],
) -> (Vec<R>, Vec<R>) {
    let eta: Vec<R> = x
        .iter_rows()
        .zip(offset)
        .map(|(row, &o)| dot(row, beta) + o)
        .collect();
    let mu: Vec<R> = eta.iter().map(|&e| family.mean(e)).collect();
    (eta, mu)
}

/// `Xᵀ diag(w)(y − μ) − 2λ β̃` with the intercept unpenalized.
fn penalized_score<R: Real>(
    x: &Matrix<R>,
    y: &[R],
    mu: &[R],
    w_obs: &[R],
    beta: &[R],
    l2: R,
) -> Vec<R> {
    let resid: Vec<R> = (0..y.len()).map(|i| w_obs[i] * (y[i] - mu[i])).collect();
    let mut score = x.t_vec(&resid);
    let two_l2 = R::of(2.0) * l2;
    for j in 1..beta.len() {
        score[j] = score[j] - two_l2 * beta[j];
    }
    score
}

fn penalized_deviance<R: Real>(
    family: Family,
    y: &[R],
    mu: &[R],
    w_obs: &[R],
    beta: &[R],
    l2: R,
) -> R {
    let dev: R = (0..y.len())
        .map(|i| w_obs[i] * family.unit_deviance(y[i], mu[i]))
        .sum();
    let ridge: R = beta.iter().skip(1).map(|&b| b * b).sum();
    dev + R::of(2.0) * l2 * ridge
}

/// Mean response for each design row: `linkinv(X β + offset)`.
pub fn predict<R: Real>(fit: &GlmFit<R>, x: &Matrix<R>, offset: Option<&[R]>) -> Vec<R> {
    let zeros = vec![R::zero(); x.n_rows()];
    let off = offset.unwrap_or(&zeros);
    assert_eq!(off.len(), x.n_rows());
    x.iter_rows()
        .zip(off)
        .map(|(row, &o)| fit.family.mean(dot(row, &fit.coefficients) + o))
        .collect()
}

/// Probability (mass) of each observed response under the fitted model.
///
/// Binomial rows must carry responses in {0, 1}; Poisson rows non-negative
/// integers. Poisson mass is evaluated in log space.
pub fn density<R: Real>(
    fit: &GlmFit<R>,
    x: &Matrix<R>,
    observed: &[R],
    offset: Option<&[R]>,
) -> Result<Vec<R>> {
    if observed.len() != x.n_rows() {
        return Err(Error::argument("observed length mismatch"));
    }
    let means = predict(fit, x, offset);
    means
        .iter()
        .zip(observed)
        .map(|(&mu, &a)| match fit.family {
            Family::Binomial => {
                if a == R::one() {
                    Ok(mu)
                } else if a == R::zero() {
                    Ok(R::one() - mu)
                } else {
                    Err(Error::argument("binomial density needs a 0/1 outcome"))
                }
            }
            Family::Poisson => {
                let rounded = a.round();
                if a < R::zero() || (a - rounded).abs() > R::of(1e-9) {
                    return Err(Error::argument(
                        "Poisson density needs a non-negative integer outcome",
                    ));
                }
                let k = rounded.as_f64() as u64;
                let log_mass = a * mu.max(R::of(1e-300)).ln() - mu - R::of(ln_factorial(k));
                Ok(log_mass.exp())
            }
        })
        .collect()
}

/// `ln(k!)` by direct summation; counts here are small (node degrees).
fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn intercept_only(n: usize) -> Matrix<f64> {
        Matrix::from_rows(n, 1, vec![1.0; n])
    }

    #[test]
    fn binomial_intercept_matches_logit_of_mean() {
        // 3 successes in 10 -> coefficient logit(0.3)
        let y: Vec<f64> = (0..10).map(|i| if i < 3 { 1.0 } else { 0.0 }).collect();
        let fit = fit(Family::Binomial, &intercept_only(10), &y, None, None, 0.0).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - (-0.8472978603872034)).abs() < 1e-6);
    }

    #[test]
    fn poisson_intercept_matches_log_of_mean() {
        let y = [1.0, 2.0, 3.0, 2.0];
        let fit = fit(Family::Poisson, &intercept_only(4), &y, None, None, 0.0).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - 2.0_f64.ln()).abs() < 1e-6);
    }

    fn random_logistic_problem(seed_value: u64, n: usize, p: usize) -> (Matrix<f64>, Vec<f64>) {
        let mut rng = seed::rng(seed_value);
        // leading intercept column, then uniform(-1, 1) covariates
        let data: Vec<f64> = (0..n * p)
            .map(|k| {
                if k % p == 0 {
                    1.0
                } else {
                    rng.random::<f64>() * 2.0 - 1.0
                }
            })
            .collect();
        let x = Matrix::from_rows(n, p, data);
        let truth: Vec<f64> = (0..p).map(|j| 0.3 * j as f64 - 0.4).collect();
        let y: Vec<f64> = x
            .iter_rows()
            .map(|row| {
                let eta = dot(row, &truth);
                if rng.random::<f64>() < expit(eta) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn score_residual_vanishes_at_convergence() {
        for s in 0..5 {
            let (x, y) = random_logistic_problem(100 + s, 300, 4);
            let fit = fit(Family::Binomial, &x, &y, None, None, 0.0).unwrap();
            assert!(fit.converged, "seed {s}");
            assert!(fit.max_abs_score < SCORE_TOLERANCE, "seed {s}");
        }
    }

    #[test]
    fn deviance_trace_is_non_increasing() {
        let (x, y) = random_logistic_problem(42, 250, 5);
        for l2 in [0.0, 2.0] {
            let fit = fit(Family::Binomial, &x, &y, None, None, l2).unwrap();
            for w in fit.deviance_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "trace must not increase");
            }
        }
    }

    #[test]
    fn ridge_shrinks_slopes_not_intercept() {
        let (x, y) = random_logistic_problem(9, 400, 3);
        let plain = fit(Family::Binomial, &x, &y, None, None, 0.0).unwrap();
        let ridged = fit(Family::Binomial, &x, &y, None, None, 50.0).unwrap();
        for j in 1..3 {
            assert!(
                ridged.coefficients[j].abs() < plain.coefficients[j].abs(),
                "slope {j} should shrink"
            );
        }
        // heavy penalty pushes slopes toward zero, leaving the intercept near
        // the marginal log-odds
        let heavy = fit(Family::Binomial, &x, &y, None, None, 1e7).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(heavy.coefficients[1].abs() < 1e-4);
        assert!((heavy.coefficients[0] - (mean / (1.0 - mean)).ln()).abs() < 1e-3);
    }

    #[test]
    fn duplicated_column_reported_then_rescued_by_ridge() {
        let mut data = Vec::new();
        let mut rng = seed::rng(5);
        for _ in 0..50 {
            let v: f64 = rng.random::<f64>() - 0.5;
            data.extend_from_slice(&[1.0, v, v]);
        }
        let x = Matrix::from_rows(50, 3, data);
        let y: Vec<f64> = (0..50).map(|i| f64::from(i % 2 == 0)).collect();
        match fit(Family::Binomial, &x, &y, None, None, 0.0) {
            Err(Error::SingularDesign { columns }) => assert!(columns.contains(&2)),
            other => panic!("expected singular design, got {other:?}"),
        }
        let rescued = fit(Family::Binomial, &x, &y, None, None, 0.5).unwrap();
        assert!(rescued.converged);
    }

    #[test]
    fn complete_separation_flags_non_convergence() {
        let n = 20;
        let mut data = Vec::new();
        for i in 0..n {
            data.extend_from_slice(&[1.0, i as f64 - 9.5]);
        }
        let x = Matrix::from_rows(n, 2, data);
        let y: Vec<f64> = (0..n).map(|i| f64::from(i >= 10)).collect();
        let fit = fit(Family::Binomial, &x, &y, None, None, 0.0).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.n_iterations, MAX_ITERATIONS);
    }

    #[test]
    fn weights_match_row_duplication() {
        let x1 = Matrix::from_rows(4, 2, vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y1 = [0.0, 1.0, 1.0, 2.0];
        let w = [2.0, 1.0, 1.0, 2.0];
        let weighted = fit(Family::Poisson, &x1, &y1, Some(&w), None, 0.0).unwrap();

        let mut rows = Vec::new();
        let mut y2: Vec<f64> = Vec::new();
        for (i, &wi) in w.iter().enumerate() {
            for _ in 0..wi as usize {
                rows.extend_from_slice(x1.row(i));
                y2.push(y1[i]);
            }
        }
        let x2 = Matrix::from_rows(y2.len(), 2, rows);
        let duplicated = fit(Family::Poisson, &x2, &y2, None, None, 0.0).unwrap();
        for j in 0..2 {
            assert!((weighted.coefficients[j] - duplicated.coefficients[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn aliased_columns_are_dropped_with_zero_coefficients() {
        let (x, y) = random_logistic_problem(41, 200, 2);
        // widen with a constant-zero column and a duplicate of column 1
        let mut wide = Vec::with_capacity(200 * 4);
        for i in 0..200 {
            let row = x.row(i);
            wide.extend_from_slice(&[row[0], row[1], 0.0, row[1]]);
        }
        let x_wide = Matrix::from_rows(200, 4, wide);
        assert!(matches!(
            fit(Family::Binomial, &x_wide, &y, None, None, 0.0),
            Err(Error::SingularDesign { .. })
        ));
        let pruned = fit_dropping_aliased(Family::Binomial, &x_wide, &y, None, None, 0.0).unwrap();
        let plain = fit(Family::Binomial, &x, &y, None, None, 0.0).unwrap();
        assert_eq!(pruned.coefficients.len(), 4);
        assert_eq!(pruned.coefficients[2], 0.0);
        // one of the two duplicated columns carries the weight, the other is 0
        let dup = pruned.coefficients[1] + pruned.coefficients[3];
        assert!(pruned.coefficients[1] == 0.0 || pruned.coefficients[3] == 0.0);
        assert!((pruned.coefficients[0] - plain.coefficients[0]).abs() < 1e-8);
        assert!((dup - plain.coefficients[1]).abs() < 1e-8);
        // predictions on the full-width design match the well-posed fit
        let p_wide = predict(&pruned, &x_wide, None);
        let p_plain = predict(&plain, &x, None);
        for (a, b) in p_wide.iter().zip(p_plain.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
        // a well-posed problem passes through untouched
        let direct = fit_dropping_aliased(Family::Binomial, &x, &y, None, None, 0.0).unwrap();
        assert_eq!(direct.coefficients, plain.coefficients);
    }

    #[test]
    fn offset_shifts_the_linear_predictor() {
        let (x, y) = random_logistic_problem(77, 300, 2);
        let off = vec![0.7; 300];
        let with_offset = fit(Family::Binomial, &x, &y, None, Some(&off), 0.0).unwrap();
        let plain = fit(Family::Binomial, &x, &y, None, None, 0.0).unwrap();
        // identical slope problem, intercept absorbs the offset
        assert!((with_offset.coefficients[0] + 0.7 - plain.coefficients[0]).abs() < 1e-6);
        assert!((with_offset.coefficients[1] - plain.coefficients[1]).abs() < 1e-6);
    }

    #[test]
    fn predict_and_density_closed_forms() {
        let fit_b = GlmFit {
            family: Family::Binomial,
            coefficients: vec![(0.25_f64 / 0.75).ln()],
            l2_penalty: 0.0,
            converged: true,
            n_iterations: 1,
            max_abs_score: 0.0,
            deviance_trace: vec![],
        };
        let x = intercept_only(1);
        let p = predict(&fit_b, &x, None);
        assert!((p[0] - 0.25).abs() < 1e-12);
        let d0 = density(&fit_b, &x, &[0.0], None).unwrap();
        assert!((d0[0] - 0.75).abs() < 1e-12);

        let fit_p = GlmFit {
            family: Family::Poisson,
            coefficients: vec![1.0_f64.ln()],
            l2_penalty: 0.0,
            converged: true,
            n_iterations: 1,
            max_abs_score: 0.0,
            deviance_trace: vec![],
        };
        let d = density(&fit_p, &x, &[0.0], None).unwrap();
        assert!((d[0] - (-1.0_f64).exp()).abs() < 1e-12, "e^-1 = 0.3679");
    }

    #[test]
    fn poisson_density_matches_log_gamma_oracle() {
        let fit_p = GlmFit {
            family: Family::Poisson,
            coefficients: vec![2.5_f64.ln()],
            l2_penalty: 0.0,
            converged: true,
            n_iterations: 1,
            max_abs_score: 0.0,
            deviance_trace: vec![],
        };
        let x = intercept_only(1);
        let d = density(&fit_p, &x, &[3.0], None).unwrap();
        let oracle = (3.0 * 2.5_f64.ln() - 2.5 - statrs::function::gamma::ln_gamma(4.0)).exp();
        assert!((d[0] - oracle).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let x = intercept_only(3);
        let bad_y = [0.0, 2.0, 1.0];
        assert!(matches!(
            fit(Family::Binomial, &x, &bad_y, None, None, 0.0),
            Err(Error::Argument(_))
        ));
        let nan_y = [0.0, f64::NAN, 1.0];
        assert!(matches!(
            fit(Family::Binomial, &x, &nan_y, None, None, 0.0),
            Err(Error::Argument(_))
        ));
        let y = [0.0, 1.0, 1.0];
        assert!(matches!(
            fit(Family::Binomial, &x, &y, None, None, -1.0),
            Err(Error::Argument(_))
        ));
        let neg_w = [1.0, -1.0, 1.0];
        assert!(matches!(
            fit(Family::Binomial, &x, &y, Some(&neg_w), None, 0.0),
            Err(Error::Argument(_))
        ));
    }
}
