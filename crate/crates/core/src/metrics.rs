//! Batch metrics over repeated estimator runs: mean bias, empirical standard
//! error, and strict 95% interval coverage (direct and latent), plus the
//! summary CSV row format.

use crate::design::Scenario;
use crate::error::{Error, Result};
use crate::sim::Priority;
use crate::tmle::ModelKind;

/// One run's estimate, its true effect, and both intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEntry {
    pub psi_hat: f64,
    pub psi_truth: f64,
    pub lci_d: f64,
    pub uci_d: f64,
    pub lci_l: f64,
    pub uci_l: f64,
}

/// A nonempty collection of completed runs with well-ordered intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct RunBatch {
    entries: Vec<BatchEntry>,
}

impl RunBatch {
    pub fn new(entries: Vec<BatchEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::argument("a run batch needs at least one entry"));
        }
        for (k, e) in entries.iter().enumerate() {
            let values = [e.psi_hat, e.psi_truth, e.lci_d, e.uci_d, e.lci_l, e.uci_l];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::argument(format!("entry {k} has non-finite values")));
            }
            if e.lci_d > e.uci_d || e.lci_l > e.uci_l {
                return Err(Error::argument(format!("entry {k} has an inverted interval")));
            }
        }
        Ok(RunBatch { entries })
    }

    pub fn entries(&self) -> &[BatchEntry] {
        &self.entries
    }

    /// Number of runs, `U`.
    pub fn u(&self) -> usize {
        self.entries.len()
    }
}

/// Which interval family coverage counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageKind {
    Direct,
    Latent,
}

/// Mean signed error `(1/U) Σ_k (ψ̂_k − ψ_k)`.
pub fn bias(batch: &RunBatch) -> f64 {
    let u = batch.u() as f64;
    batch
        .entries
        .iter()
        .map(|e| e.psi_hat - e.psi_truth)
        .sum::<f64>()
        / u
}

/// Spread of the per-run errors around their mean, with the population
/// divisor: `sqrt((1/U) Σ_k (b_k − Bias)²)` for `b_k = ψ̂_k − ψ_k`.
pub fn ese(batch: &RunBatch) -> f64 {
    let errors: Vec<f64> = batch
        .entries
        .iter()
        .map(|e| e.psi_hat - e.psi_truth)
        .collect();
    let u = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / u;
    (errors.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / u).sqrt()
}

/// Fraction of runs whose chosen interval strictly contains that run's own
/// truth: an endpoint exactly on `ψ_k` does not count.
pub fn coverage(batch: &RunBatch, which: CoverageKind) -> f64 {
    let hits = batch
        .entries
        .iter()
        .filter(|e| {
            let (lo, hi) = match which {
                CoverageKind::Direct => (e.lci_d, e.uci_d),
                CoverageKind::Latent => (e.lci_l, e.uci_l),
            };
            lo < e.psi_truth && e.psi_truth < hi
        })
        .count();
    hits as f64 / batch.u() as f64
}

/// The four summary metrics for one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub u: usize,
    pub bias: f64,
    pub ese: f64,
    pub cover_direct: f64,
    pub cover_latent: f64,
}

/// Collapses one cell's batch into its summary metrics.
pub fn summarize(batch: &RunBatch) -> CellMetrics {
    CellMetrics {
        u: batch.u(),
        bias: bias(batch),
        ese: ese(batch),
        cover_direct: coverage(batch, CoverageKind::Direct),
        cover_latent: coverage(batch, CoverageKind::Latent),
    }
}

pub const SUMMARY_CSV_HEADER: &str =
    "graph,n,scenario,policy,p_omega,budget,priority,model,U,bias,ese,cover_direct,cover_latent";

/// One summary CSV row: cell coordinates plus its collapsed metrics.
pub struct SummaryRow<'a> {
    pub graph: &'a str,
    pub n: usize,
    pub scenario: Scenario,
    pub policy: &'a str,
    pub p_omega: f64,
    pub budget: f64,
    pub priority: Priority,
    pub model: ModelKind,
    pub metrics: CellMetrics,
}

impl SummaryRow<'_> {
    pub fn to_csv(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.graph,
            self.n,
            self.scenario.name(),
            self.policy,
            self.p_omega,
            self.budget,
            self.priority.name(),
            self.model.name(),
            m.u,
            m.bias,
            m.ese,
            m.cover_direct,
            m.cover_latent
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn entry(psi_hat: f64, psi_truth: f64) -> BatchEntry {
        BatchEntry {
            psi_hat,
            psi_truth,
            lci_d: psi_hat - 0.1,
            uci_d: psi_hat + 0.1,
            lci_l: psi_hat - 0.2,
            uci_l: psi_hat + 0.2,
        }
    }

    #[test]
    fn batch_validation() {
        assert!(RunBatch::new(vec![]).is_err());
        let mut bad = entry(0.5, 0.5);
        bad.lci_d = 0.7;
        assert!(RunBatch::new(vec![bad]).is_err());
        let mut nan = entry(0.5, 0.5);
        nan.psi_truth = f64::NAN;
        assert!(RunBatch::new(vec![nan]).is_err());
        assert_eq!(RunBatch::new(vec![entry(0.5, 0.4)]).unwrap().u(), 1);
    }

    #[test]
    fn bias_cancels_and_shifts() {
        let batch = RunBatch::new(vec![entry(0.3, 0.2), entry(0.5, 0.6)]).unwrap();
        assert_relative_eq!(bias(&batch), 0.0, epsilon = 1e-15);
        let single = RunBatch::new(vec![entry(0.4, 0.1)]).unwrap();
        assert_relative_eq!(bias(&single), 0.3, epsilon = 1e-15);
        let exact = RunBatch::new(vec![entry(0.25, 0.25), entry(0.7, 0.7)]).unwrap();
        assert_eq!(bias(&exact), 0.0);
    }

    #[test]
    fn ese_uses_population_divisor() {
        // errors (0.1, −0.1): mean 0, spread 0.1
        let batch = RunBatch::new(vec![entry(0.3, 0.2), entry(0.1, 0.2)]).unwrap();
        assert_relative_eq!(ese(&batch), 0.1, epsilon = 1e-12);
        // errors (0, 0, 0.3): sqrt(((−0.1)² + (−0.1)² + 0.2²)/3) = sqrt(0.02)
        let batch =
            RunBatch::new(vec![entry(0.2, 0.2), entry(0.2, 0.2), entry(0.5, 0.2)]).unwrap();
        let got = ese(&batch);
        assert_relative_eq!(got, 0.02f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(got, 0.1414, epsilon = 1e-4);
        // a sample divisor (U−1) would give sqrt(0.03) ≈ 0.1732 instead
        assert!((got - 0.03f64.sqrt()).abs() > 1e-2);
        // equal errors mean zero spread regardless of their size
        let batch = RunBatch::new(vec![entry(0.9, 0.1), entry(0.9, 0.1)]).unwrap();
        assert_eq!(ese(&batch), 0.0);
    }

    #[test]
    fn coverage_is_strict_per_run() {
        // each run is judged against its own truth
        let make = |lci: f64, uci: f64, truth: f64| BatchEntry {
            psi_hat: 0.5 * (lci + uci),
            psi_truth: truth,
            lci_d: lci,
            uci_d: uci,
            lci_l: lci - 0.05,
            uci_l: uci + 0.05,
        };
        // truth exactly on the lower endpoint counts zero
        let batch = RunBatch::new(vec![make(0.3, 0.6, 0.3)]).unwrap();
        assert_eq!(coverage(&batch, CoverageKind::Direct), 0.0);
        // ...but the wider latent interval still covers it
        assert_eq!(coverage(&batch, CoverageKind::Latent), 1.0);
        // three of four cover
        let batch = RunBatch::new(vec![
            make(0.0, 1.0, 0.3),
            make(0.2, 0.4, 0.3),
            make(0.25, 0.35, 0.3),
            make(0.4, 0.6, 0.3),
        ])
        .unwrap();
        assert_relative_eq!(coverage(&batch, CoverageKind::Direct), 0.75, epsilon = 1e-15);
        // every interval strictly containing its truth gives 1.0
        let batch = RunBatch::new(vec![make(0.1, 0.5, 0.2), make(0.6, 0.9, 0.7)]).unwrap();
        assert_eq!(coverage(&batch, CoverageKind::Direct), 1.0);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let forward = RunBatch::new(vec![entry(0.3, 0.2), entry(0.5, 0.6), entry(0.9, 0.4)]).unwrap();
        let backward =
            RunBatch::new(vec![entry(0.9, 0.4), entry(0.5, 0.6), entry(0.3, 0.2)]).unwrap();
        assert_relative_eq!(bias(&forward), bias(&backward), epsilon = 1e-15);
        assert_relative_eq!(ese(&forward), ese(&backward), epsilon = 1e-15);
        assert_eq!(
            coverage(&forward, CoverageKind::Direct),
            coverage(&backward, CoverageKind::Direct)
        );
    }

    #[test]
    fn summarize_collapses_all_four() {
        let batch = RunBatch::new(vec![entry(0.3, 0.3), entry(0.5, 0.3)]).unwrap();
        let m = summarize(&batch);
        assert_eq!(m.u, 2);
        assert_relative_eq!(m.bias, 0.1, epsilon = 1e-15);
        assert_relative_eq!(m.ese, 0.1, epsilon = 1e-15);
        // entry(0.3,·) covers its truth 0.3? interval (0.2,0.4) strictly: yes.
        // entry(0.5,·): (0.4,0.6) does not contain 0.3
        assert_eq!(m.cover_direct, 0.5);
        assert_eq!(m.cover_latent, 0.5);
    }

    #[test]
    fn summary_row_matches_header() {
        assert_eq!(SUMMARY_CSV_HEADER.split(',').count(), 13);
        let row = SummaryRow {
            graph: "uniform",
            n: 500,
            scenario: Scenario::CC,
            policy: "bernoulli",
            p_omega: 0.5,
            budget: 1.0,
            priority: Priority::All,
            model: ModelKind::Glm,
            metrics: CellMetrics {
                u: 30,
                bias: 0.01,
                ese: 0.02,
                cover_direct: 0.9,
                cover_latent: 0.95,
            },
        };
        let line = row.to_csv();
        assert_eq!(line.split(',').count(), 13);
        assert_eq!(line, "uniform,500,cc,bernoulli,0.5,1,all,glm,30,0.01,0.02,0.9,0.95");
    }
}
