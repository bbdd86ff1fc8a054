//! Experiment config files: flat `key = value` lines, `#` comments, lists
//! written either bare (`a, b`) or bracketed (`[a, b]`). Every key except
//! `master_seed` has a documented default; unknown and duplicated keys are
//! rejected by name.

use anyhow::{anyhow, bail, Context, Result};
use nettmle_core::design::Scenario;
use nettmle_core::sim::{Priority, SimConfig};
use nettmle_core::tmle::{EstimatorConfig, ModelKind};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Network generator families the sweep can draw worlds from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Uniform,
    PowerLaw,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Uniform => "uniform",
            GraphKind::PowerLaw => "powerlaw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GraphKind::Uniform),
            "powerlaw" => Ok(GraphKind::PowerLaw),
            other => bail!("unknown graph kind `{other}` (expected uniform|powerlaw)"),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Population sizes accepted without `allow_custom_sizes = true`.
pub const SUPPORTED_SIZES: [usize; 3] = [500, 1000, 2000];

/// The `p_omega_grid = default` expansion: 0.05 through 0.95 in steps of
/// 0.05, nineteen levels.
pub fn default_p_omega_grid() -> Vec<f64> {
    (1..=19).map(|k| f64::from(k) / 20.0).collect()
}

/// Estimator knobs shared by every run of a sweep. Defaults mirror
/// [`EstimatorConfig::new`]; the deep-model fields feed its training config.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorKnobs {
    pub m_copies: usize,
    pub epochs: usize,
    pub reception_field: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub unlabeled_copies: usize,
    pub lambda_gamma: f64,
}

impl Default for EstimatorKnobs {
    fn default() -> Self {
        let base = EstimatorConfig::new(ModelKind::Glm, Scenario::CC, 0);
        EstimatorKnobs {
            m_copies: base.m_copies,
            epochs: base.train.n_epochs,
            reception_field: base.train.reception_field,
            hidden_dim: base.train.hidden_dim,
            learning_rate: base.train.learning_rate,
            batch_size: base.train.batch_size,
            unlabeled_copies: base.train_unlabeled_copies,
            lambda_gamma: base.train.lambda_gamma,
        }
    }
}

impl EstimatorKnobs {
    /// Applies the knobs, leaving model/scenario/seed untouched.
    pub fn configure(&self, cfg: &mut EstimatorConfig) {
        cfg.m_copies = self.m_copies;
        cfg.train.n_epochs = self.epochs;
        cfg.train.reception_field = self.reception_field;
        cfg.train.hidden_dim = self.hidden_dim;
        cfg.train.learning_rate = self.learning_rate;
        cfg.train.batch_size = self.batch_size;
        cfg.train.lambda_gamma = self.lambda_gamma;
        cfg.train_unlabeled_copies = self.unlabeled_copies;
    }
}

/// A fully validated sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub graph_kinds: Vec<GraphKind>,
    pub sizes: Vec<usize>,
    pub scenarios: Vec<Scenario>,
    /// Ascending, strictly inside (0, 1).
    pub p_omega_grid: Vec<f64>,
    /// Ascending, inside (0, 1].
    pub budgets: Vec<f64>,
    pub priorities: Vec<Priority>,
    /// Repeats per cell; power-law worlds of 2000 nodes are capped at 15.
    pub repeats: u32,
    pub models: Vec<ModelKind>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Fresh simulator replicates behind each per-run ground truth.
    pub truth_replicates: usize,
    pub allow_custom_sizes: bool,
    pub sim: SimConfig,
    pub estimator: EstimatorKnobs,
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config `{}`", path.display()))?;
    parse_config_str(&text)
}

/// Raw `key = value` pairs in file order, duplicates rejected.
fn split_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            bail!("line {}: empty key", lineno + 1);
        }
        if pairs.iter().any(|(k, _)| *k == key) {
            bail!("duplicate config key `{key}`");
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

/// Splits a list value, tolerating optional surrounding brackets.
fn list_items(value: &str) -> Result<Vec<String>> {
    let inner = match value.strip_prefix('[') {
        Some(rest) => rest
            .strip_suffix(']')
            .ok_or_else(|| anyhow!("unclosed `[` in `{value}`"))?,
        None => value,
    };
    let items: Vec<String> = inner
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        bail!("empty list `{value}`");
    }
    Ok(items)
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value
        .parse::<T>()
        .with_context(|| format!("key `{key}`: malformed value `{value}`"))
}

fn reject_duplicates<T: PartialEq + fmt::Debug>(key: &str, items: &[T]) -> Result<()> {
    for (i, a) in items.iter().enumerate() {
        if items[..i].contains(a) {
            bail!("key `{key}`: duplicate entry {a:?}");
        }
    }
    Ok(())
}

pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let mut pairs = split_pairs(text)?;
    let mut take = |key: &str| -> Option<String> {
        let pos = pairs.iter().position(|(k, _)| k == key)?;
        Some(pairs.remove(pos).1)
    };

    // the size gate is read first so `sizes` can validate against it
    // regardless of key order in the file
    let allow_custom_sizes = match take("allow_custom_sizes") {
        Some(v) => match v.as_str() {
            "true" => true,
            "false" => false,
            other => bail!("key `allow_custom_sizes`: expected true|false, got `{other}`"),
        },
        None => false,
    };

    let master_seed = match take("master_seed") {
        Some(v) => parse_scalar::<u64>("master_seed", &v)?,
        None => bail!("missing required key `master_seed`"),
    };

    let graph_kinds = match take("graph_kinds") {
        Some(v) => {
            let kinds: Vec<GraphKind> = list_items(&v)?
                .iter()
                .map(|s| GraphKind::parse(s))
                .collect::<Result<_>>()?;
            reject_duplicates("graph_kinds", &kinds)?;
            kinds
        }
        None => vec![GraphKind::Uniform],
    };

    let mut sizes = match take("sizes") {
        Some(v) => {
            let sizes: Vec<usize> = list_items(&v)?
                .iter()
                .map(|s| parse_scalar::<usize>("sizes", s))
                .collect::<Result<_>>()?;
            reject_duplicates("sizes", &sizes)?;
            for &n in &sizes {
                if !allow_custom_sizes && !SUPPORTED_SIZES.contains(&n) {
                    bail!("size {n} is unsupported without allow_custom_sizes=true");
                }
                if n < 10 {
                    bail!("size {n} is too small for a meaningful world (minimum 10)");
                }
            }
            sizes
        }
        None => vec![500],
    };
    sizes.sort_unstable();

    let scenarios = match take("scenarios") {
        Some(v) => {
            let scenarios: Vec<Scenario> = list_items(&v)?
                .iter()
                .map(|s| Scenario::parse(s).map_err(anyhow::Error::from))
                .collect::<Result<_>>()?;
            reject_duplicates("scenarios", &scenarios)?;
            scenarios
        }
        None => vec![Scenario::CC],
    };

    let mut p_omega_grid = match take("p_omega_grid") {
        Some(v) if v == "default" => default_p_omega_grid(),
        Some(v) => {
            let grid: Vec<f64> = list_items(&v)?
                .iter()
                .map(|s| parse_scalar::<f64>("p_omega_grid", s))
                .collect::<Result<_>>()?;
            for &p in &grid {
                if !(p > 0.0 && p < 1.0) {
                    bail!("key `p_omega_grid`: {p} is outside (0, 1)");
                }
            }
            reject_duplicates("p_omega_grid", &grid)?;
            grid
        }
        None => default_p_omega_grid(),
    };
    p_omega_grid.sort_unstable_by(|a, b| a.partial_cmp(b).expect("validated finite"));

    let mut budgets = match take("budgets") {
        Some(v) => {
            let budgets: Vec<f64> = list_items(&v)?
                .iter()
                .map(|s| parse_scalar::<f64>("budgets", s))
                .collect::<Result<_>>()?;
            for &b in &budgets {
                if !(b > 0.0 && b <= 1.0) {
                    bail!("key `budgets`: {b} is outside (0, 1]");
                }
            }
            reject_duplicates("budgets", &budgets)?;
            budgets
        }
        None => vec![1.0],
    };
    budgets.sort_unstable_by(|a, b| a.partial_cmp(b).expect("validated finite"));

    let priorities = match take("priorities") {
        Some(v) => {
            let priorities: Vec<Priority> = list_items(&v)?
                .iter()
                .map(|s| Priority::parse(s).map_err(anyhow::Error::from))
                .collect::<Result<_>>()?;
            reject_duplicates("priorities", &priorities)?;
            priorities
        }
        None => vec![Priority::All],
    };

    let repeats = match take("repeats") {
        Some(v) => parse_scalar::<u32>("repeats", &v)?,
        None => 30,
    };
    if repeats == 0 || repeats > 999 {
        bail!("key `repeats`: must be in 1..=999, got {repeats}");
    }

    let models = match take("models") {
        Some(v) => {
            let models: Vec<ModelKind> = list_items(&v)?
                .iter()
                .map(|s| ModelKind::parse(s).map_err(anyhow::Error::from))
                .collect::<Result<_>>()?;
            reject_duplicates("models", &models)?;
            models
        }
        None => vec![ModelKind::Glm],
    };

    let output_dir = PathBuf::from(take("output_dir").unwrap_or_else(|| "out".into()));

    let truth_replicates = match take("truth_replicates") {
        Some(v) => parse_scalar::<usize>("truth_replicates", &v)?,
        None => 30,
    };
    if truth_replicates == 0 {
        bail!("key `truth_replicates`: must be positive");
    }

    let mut sim = SimConfig::default();
    if let Some(v) = take("t_steps") {
        sim.t_steps = parse_scalar("t_steps", &v)?;
    }
    if let Some(v) = take("infectious_duration") {
        sim.infectious_duration = parse_scalar("infectious_duration", &v)?;
    }
    if let Some(v) = take("quarantine_period") {
        sim.quarantine_period = parse_scalar("quarantine_period", &v)?;
    }
    if let Some(v) = take("init_infected_fraction") {
        sim.init_infected_fraction = parse_scalar("init_infected_fraction", &v)?;
    }
    if let Some(v) = take("transmission_prob") {
        sim.transmission_prob = parse_scalar("transmission_prob", &v)?;
    }
    sim.validate().map_err(|e| anyhow!("simulation keys: {e}"))?;

    let mut estimator = EstimatorKnobs::default();
    if let Some(v) = take("m_copies") {
        estimator.m_copies = parse_scalar("m_copies", &v)?;
    }
    if let Some(v) = take("epochs") {
        estimator.epochs = parse_scalar("epochs", &v)?;
    }
    if let Some(v) = take("reception_field") {
        estimator.reception_field = parse_scalar("reception_field", &v)?;
    }
    if let Some(v) = take("hidden_dim") {
        estimator.hidden_dim = parse_scalar("hidden_dim", &v)?;
    }
    if let Some(v) = take("learning_rate") {
        estimator.learning_rate = parse_scalar("learning_rate", &v)?;
    }
    if let Some(v) = take("batch_size") {
        estimator.batch_size = parse_scalar("batch_size", &v)?;
    }
    if let Some(v) = take("unlabeled_copies") {
        estimator.unlabeled_copies = parse_scalar("unlabeled_copies", &v)?;
    }
    if let Some(v) = take("lambda_gamma") {
        estimator.lambda_gamma = parse_scalar("lambda_gamma", &v)?;
    }

    if let Some((key, _)) = pairs.first() {
        bail!("unknown config key `{key}`");
    }

    let spec = ExperimentSpec {
        graph_kinds,
        sizes,
        scenarios,
        p_omega_grid,
        budgets,
        priorities,
        repeats,
        models,
        master_seed,
        output_dir,
        truth_replicates,
        allow_custom_sizes,
        sim,
        estimator,
    };
    validate_spec(&spec)?;
    Ok(spec)
}

fn validate_spec(spec: &ExperimentSpec) -> Result<()> {
    if spec.estimator.m_copies == 0 {
        bail!("key `m_copies`: must be positive");
    }
    if spec.models.contains(&ModelKind::Deep) {
        let k = &spec.estimator;
        if k.unlabeled_copies == 0 || k.unlabeled_copies > k.m_copies {
            bail!(
                "key `unlabeled_copies`: must be in 1..=m_copies ({}), got {}",
                k.m_copies,
                k.unlabeled_copies
            );
        }
        if k.reception_field == 0 || k.reception_field > spec.sim.t_steps {
            bail!(
                "key `reception_field`: must be in 1..=t_steps ({}), got {}",
                spec.sim.t_steps,
                k.reception_field
            );
        }
        // remaining training knobs share the estimator's own validation
        let mut probe = EstimatorConfig::new(ModelKind::Deep, Scenario::CC, 0);
        k.configure(&mut probe);
        probe.validate().map_err(|e| anyhow!("estimator keys: {e}"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let spec = parse_config_str("master_seed = 42\n").unwrap();
        assert_eq!(spec.master_seed, 42);
        assert_eq!(spec.graph_kinds, vec![GraphKind::Uniform]);
        assert_eq!(spec.sizes, vec![500]);
        assert_eq!(spec.scenarios, vec![Scenario::CC]);
        assert_eq!(spec.p_omega_grid.len(), 19);
        assert_eq!(spec.budgets, vec![1.0]);
        assert_eq!(spec.priorities, vec![Priority::All]);
        assert_eq!(spec.repeats, 30);
        assert_eq!(spec.models, vec![ModelKind::Glm]);
        assert_eq!(spec.output_dir, PathBuf::from("out"));
        assert_eq!(spec.truth_replicates, 30);
        assert!(!spec.allow_custom_sizes);
        assert_eq!(spec.sim, SimConfig::default());
        assert_eq!(spec.estimator, EstimatorKnobs::default());
    }

    #[test]
    fn default_grid_is_nineteen_ascending_levels() {
        let grid = default_p_omega_grid();
        assert_eq!(grid.len(), 19);
        assert_eq!(grid[0], 0.05);
        assert_eq!(grid[9], 0.5);
        assert_eq!(grid[18], 0.95);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let spec = parse_config_str("master_seed = 1\np_omega_grid = default\n").unwrap();
        assert_eq!(spec.p_omega_grid, grid);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_named() {
        let err = parse_config_str("master_seed = 1\nbananas = 3\n").unwrap_err();
        assert!(err.to_string().contains("unknown config key `bananas`"), "{err}");
        let err = parse_config_str("master_seed = 1\nmaster_seed = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate config key `master_seed`"), "{err}");
        let err = parse_config_str("repeats = 3\n").unwrap_err();
        assert!(err.to_string().contains("missing required key `master_seed`"), "{err}");
    }

    #[test]
    fn unsupported_size_is_named() {
        let err = parse_config_str("master_seed = 1\nsizes = [500, 3000]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("3000"), "{msg}");
        assert!(msg.contains("allow_custom_sizes"), "{msg}");
        let spec = parse_config_str(
            "master_seed = 1\nsizes = [500, 3000]\nallow_custom_sizes = true\n",
        )
        .unwrap();
        assert_eq!(spec.sizes, vec![500, 3000]);
        // the gate may come later in the file than the sizes it unlocks
        let spec = parse_config_str(
            "master_seed = 1\nsizes = [120]\nallow_custom_sizes = true\n",
        )
        .unwrap();
        assert_eq!(spec.sizes, vec![120]);
    }

    #[test]
    fn lists_accept_brackets_and_reject_bad_members() {
        let spec = parse_config_str(
            "master_seed = 7\ngraph_kinds = [uniform, powerlaw]\nmodels = glm, l2, deep\n\
             scenarios = [cc, flexible]\npriorities = most_connected, least_connected\n\
             budgets = [0.5, 0.3]\np_omega_grid = 0.9, 0.1\n",
        )
        .unwrap();
        assert_eq!(spec.graph_kinds, vec![GraphKind::Uniform, GraphKind::PowerLaw]);
        assert_eq!(
            spec.models,
            vec![ModelKind::Glm, ModelKind::L2, ModelKind::Deep]
        );
        assert_eq!(spec.scenarios, vec![Scenario::CC, Scenario::Flexible]);
        // numeric grids come out ascending no matter the written order
        assert_eq!(spec.budgets, vec![0.3, 0.5]);
        assert_eq!(spec.p_omega_grid, vec![0.1, 0.9]);

        for bad in [
            "master_seed = 1\ngraph_kinds = grid\n",
            "master_seed = 1\nscenarios = cc, zz\n",
            "master_seed = 1\nmodels = forest\n",
            "master_seed = 1\npriorities = loudest\n",
            "master_seed = 1\np_omega_grid = 0.5, 1.5\n",
            "master_seed = 1\nbudgets = 0\n",
            "master_seed = 1\nrepeats = 0\n",
            "master_seed = 1\nmodels = glm, glm\n",
            "master_seed = 1\nmaster_seed\n",
        ] {
            assert!(parse_config_str(bad).is_err(), "accepted: {bad}");
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let spec = parse_config_str(
            "# sweep header\n\nmaster_seed = 9  # inline note\n\n# trailing\n",
        )
        .unwrap();
        assert_eq!(spec.master_seed, 9);
    }

    #[test]
    fn deep_knobs_are_validated_when_deep_is_selected() {
        let err = parse_config_str(
            "master_seed = 1\nmodels = deep\nm_copies = 4\nunlabeled_copies = 9\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("unlabeled_copies"), "{err}");
        let err = parse_config_str(
            "master_seed = 1\nmodels = deep\nt_steps = 4\nreception_field = 9\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("reception_field"), "{err}");
        // the same knobs pass when only linear models run
        parse_config_str("master_seed = 1\nm_copies = 4\nunlabeled_copies = 9\n").unwrap();
    }
}
