//! Model specifications: which panel columns enter the outcome and exposure
//! models, and how continuous columns are discretized for the flexible
//! specification.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sim::{RecordView, Var};

/// Model specification scenario. The first letter grades the outcome model,
/// the second the exposure models (correct / wrong).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Both models see every relevant column.
    CC,
    /// Outcome model misses the infected-neighbor count.
    CW,
    /// Exposure models miss the neighborhood summaries.
    WC,
    /// Full column set with quartile-coded continuous covariates.
    Flexible,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::CC => "cc",
            Scenario::CW => "cw",
            Scenario::WC => "wc",
            Scenario::Flexible => "flexible",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cc" => Ok(Scenario::CC),
            "cw" => Ok(Scenario::CW),
            "wc" => Ok(Scenario::WC),
            "flexible" => Ok(Scenario::Flexible),
            other => Err(Error::parse(format!("unknown scenario `{other}`"))),
        }
    }

    pub fn all() -> [Scenario; 4] {
        [Scenario::CC, Scenario::CW, Scenario::WC, Scenario::Flexible]
    }
}

/// Quartile cut points for one continuous column.
#[derive(Debug, Clone, PartialEq)]
pub struct BinRule {
    pub var: Var,
    /// Lower quartile, median, upper quartile of the observed values.
    pub cuts: [f64; 3],
}

impl BinRule {
    /// Bin code 0..=3: the number of cut points strictly below the value.
    pub fn code(&self, value: f64) -> usize {
        self.cuts.iter().filter(|&&c| value > c).count()
    }
}

/// Discretization rules fitted on the observed panel and reused verbatim on
/// sampled policy copies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Binning {
    pub rules: Vec<BinRule>,
}

impl Binning {
    /// Fits quartile cuts for every continuous column among `vars`, pooling
    /// the values over all nodes and steps.
    pub fn fit(view: &RecordView, vars: &[Var]) -> Self {
        let mut rules = Vec::new();
        for &var in vars {
            if !var.is_continuous() || rules.iter().any(|r: &BinRule| r.var == var) {
                continue;
            }
            let mut values: Vec<f64> = Vec::with_capacity(view.n() * (view.t_steps() + 1));
            for t in 0..=view.t_steps() {
                for i in 0..view.n() {
                    values.push(view.value(var, t, i));
                }
            }
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let len = values.len();
            let cuts = [values[len / 4], values[len / 2], values[3 * len / 4]];
            rules.push(BinRule { var, cuts });
        }
        Binning { rules }
    }

    pub fn rule_for(&self, var: Var) -> Option<&BinRule> {
        self.rules.iter().find(|r| r.var == var)
    }
}

/// Column lists for one scenario, plus the fitted binning when the scenario
/// discretizes.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub scenario: Scenario,
    /// Columns of the outcome model (exposure terms included).
    pub outcome_vars: Vec<Var>,
    /// Columns of the exposure and summary-exposure models.
    pub exposure_vars: Vec<Var>,
    pub binning: Option<Binning>,
}

impl DesignSpec {
    pub fn for_scenario(scenario: Scenario) -> Self {
        let full_outcome = vec![
            Var::Alpha,
            Var::AlphaS,
            Var::XiStatic,
            Var::XiInfNbrs,
            Var::XiQuarHist,
            Var::XiSMean,
            Var::XiSInfSum,
        ];
        let full_exposure = vec![
            Var::XiStatic,
            Var::XiInfNbrs,
            Var::XiQuarHist,
            Var::XiSMean,
            Var::XiSInfSum,
        ];
        let (outcome_vars, exposure_vars) = match scenario {
            Scenario::CC | Scenario::Flexible => (full_outcome, full_exposure),
            Scenario::CW => (
                full_outcome
                    .iter()
                    .copied()
                    .filter(|&v| v != Var::XiInfNbrs)
                    .collect(),
                full_exposure,
            ),
            Scenario::WC => (
                full_outcome,
                full_exposure
                    .iter()
                    .copied()
                    .filter(|&v| v != Var::XiSMean && v != Var::XiSInfSum)
                    .collect(),
            ),
        };
        DesignSpec {
            scenario,
            outcome_vars,
            exposure_vars,
            binning: None,
        }
    }

    /// Fits the discretization on the observed panel (flexible scenario only;
    /// a no-op otherwise).
    pub fn prepare(&mut self, observed: &RecordView) {
        if self.scenario == Scenario::Flexible {
            self.binning = Some(Binning::fit(observed, &self.outcome_vars));
        }
    }

    /// The flexible scenario pairs with a ridge-penalized outcome model.
    pub fn uses_ridge(&self) -> bool {
        self.scenario == Scenario::Flexible
    }
}

/// Number of design columns a variable contributes (indicator expansion
/// spends three columns, reference bin dropped).
fn column_span(var: Var, binning: Option<&Binning>, expand_indicators: bool) -> usize {
    match binning.and_then(|b| b.rule_for(var)) {
        Some(_) if expand_indicators => 3,
        _ => 1,
    }
}

/// Builds the regression design for one step: an intercept column followed by
/// the requested variables. Binned columns become three quartile indicators
/// when `expand_indicators` is set (the form the linear models consume) and a
/// single numeric bin code otherwise.
pub fn build_design(
    view: &RecordView,
    vars: &[Var],
    t: usize,
    binning: Option<&Binning>,
    expand_indicators: bool,
) -> Result<Matrix<f64>> {
    if t > view.t_steps() {
        return Err(Error::argument(format!(
            "step {t} beyond horizon {}",
            view.t_steps()
        )));
    }
    let n_cols = 1 + vars
        .iter()
        .map(|&v| column_span(v, binning, expand_indicators))
        .sum::<usize>();
    let mut x = Matrix::zeros(view.n(), n_cols);
    for i in 0..view.n() {
        let row = x.row_mut(i);
        row[0] = 1.0;
        let mut c = 1;
        for &var in vars {
            let value = view.value(var, t, i);
            match binning.and_then(|b| b.rule_for(var)) {
                Some(rule) if expand_indicators => {
                    let code = rule.code(value);
                    if code > 0 {
                        row[c + code - 1] = 1.0;
                    }
                    c += 3;
                }
                Some(rule) => {
                    row[c] = rule.code(value) as f64;
                    c += 1;
                }
                None => {
                    row[c] = value;
                    c += 1;
                }
            }
        }
    }
    Ok(x)
}

/// Builds per-node feature windows over the last `reception_field` steps,
/// step-major (`[step][var]` flattened). Binned variables enter as numeric
/// quartile codes.
pub fn build_windows(
    view: &RecordView,
    vars: &[Var],
    reception_field: usize,
    binning: Option<&Binning>,
) -> Result<Vec<Vec<f64>>> {
    let t_max = view.t_steps();
    if reception_field == 0 || reception_field > t_max {
        return Err(Error::argument(format!(
            "reception field {reception_field} outside 1..={t_max}"
        )));
    }
    let start = t_max + 1 - reception_field;
    let mut windows = Vec::with_capacity(view.n());
    for i in 0..view.n() {
        let mut w = Vec::with_capacity(reception_field * vars.len());
        for t in start..=t_max {
            for &var in vars {
                let value = view.value(var, t, i);
                match binning.and_then(|b| b.rule_for(var)) {
                    Some(rule) => w.push(rule.code(value) as f64),
                    None => w.push(value),
                }
            }
        }
        windows.push(w);
    }
    Ok(windows)
}
