//! Hand-rolled outcome network with an adversarial intervention head.
//!
//! Architecture, per node window of the last `reception_field` steps:
//! a per-step backbone (two ReLU layers shared across steps) feeds a
//! temporal pyramid that halves the step axis until one step remains.
//! Each pyramid level mixes along time (weights shared across channels),
//! concatenates a skip copy of the most recent steps, and merges back to
//! the channel width. The final representation `K` drives two logistic
//! heads: the outcome head, and an intervention classifier attached
//! through a gradient-reversal coupling so that the trunk is pushed
//! *away* from features that reveal which policy generated the window.
//!
//! Everything (forward, backward, SGD) is implemented directly so the
//! gradient conventions stay inspectable: the intervention head itself
//! descends its classification loss, while the trunk receives the
//! reversed, `lambda`-scaled version of that gradient.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{expit, Real};
use crate::seed;

/// Outcome predictions are clamped to this range before use downstream.
pub const PREDICTION_CLIP: (f64, f64) = (0.05, 0.95);

/// Probability floor/ceiling inside the cross-entropy terms.
const BCE_CLIP: f64 = 1e-7;

/// First line of the checkpoint format.
pub const CHECKPOINT_MAGIC: &str = "NETTMLE-MLP v1";

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

/// Dense layer, `out × in` weights plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<R> {
    pub w: Matrix<R>,
    pub b: Vec<R>,
}

impl<R: Real> Linear<R> {
    fn zeros(n_out: usize, n_in: usize) -> Self {
        Linear {
            w: Matrix::zeros(n_out, n_in),
            b: vec![R::zero(); n_out],
        }
    }

    fn init<G: Rng>(n_out: usize, n_in: usize, rng: &mut G) -> Self {
        // He-style bound: keeps activation scale steady through the ReLU stack
        let scale = (6.0 / n_in as f64).sqrt();
        let mut w = Matrix::zeros(n_out, n_in);
        for r in 0..n_out {
            for c in 0..n_in {
                let u = rng.random::<f64>();
                w.set(r, c, R::of((2.0 * u - 1.0) * scale));
            }
        }
        Linear {
            w,
            b: vec![R::zero(); n_out],
        }
    }

    fn apply(&self, x: &[R]) -> Vec<R> {
        let mut out = self.b.clone();
        for (r, o) in out.iter_mut().enumerate() {
            *o = *o + crate::linalg::dot(self.w.row(r), x);
        }
        out
    }

    fn add_scaled(&mut self, other: &Linear<R>, scale: R) {
        for (a, b) in self.w.data_mut().iter_mut().zip(other.w.data().iter()) {
            *a = *a + scale * *b;
        }
        for (a, b) in self.b.iter_mut().zip(other.b.iter()) {
            *a = *a + scale * *b;
        }
    }
}

/// One pyramid level: a time-axis mix shared across channels and a channel
/// merge shared across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalLevel<R> {
    /// `len_out × len_in` over the step axis.
    pub time_mix: Linear<R>,
    /// `hidden × 2·hidden`, applied to [mixed ‖ skip] at each step.
    pub merge: Linear<R>,
}

/// Step-axis lengths of the pyramid: `(len_in, len_out)` per level, halving
/// (rounded up) until a single step remains.
pub fn level_lengths(reception_field: usize) -> Vec<(usize, usize)> {
    let mut lengths = Vec::new();
    let mut len = reception_field;
    while len > 1 {
        let next = len.div_ceil(2);
        lengths.push((len, next));
        len = next;
    }
    lengths
}

/// Full parameter set of the network. Doubles as the gradient container:
/// gradients mirror the layout one-to-one.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<R> {
    pub n_features: usize,
    pub reception_field: usize,
    pub hidden: usize,
    pub input_layer: Linear<R>,
    pub hidden_layer: Linear<R>,
    pub temporal: Vec<TemporalLevel<R>>,
    pub outcome_head: Linear<R>,
    pub intervention_head: Linear<R>,
}

impl<R: Real> MlpParams<R> {
    /// Fresh network with uniform `±sqrt(6/fan_in)` weights and zero biases.
    pub fn init(
        n_features: usize,
        reception_field: usize,
        hidden: usize,
        seed_value: u64,
    ) -> Result<Self> {
        if n_features == 0 || reception_field == 0 || hidden == 0 {
            return Err(Error::argument("network dimensions must be positive"));
        }
        let mut rng = seed::rng(seed_value);
        let input_layer = Linear::init(hidden, n_features, &mut rng);
        let hidden_layer = Linear::init(hidden, hidden, &mut rng);
        let temporal = level_lengths(reception_field)
            .into_iter()
            .map(|(len_in, len_out)| TemporalLevel {
                time_mix: Linear::init(len_out, len_in, &mut rng),
                merge: Linear::init(hidden, 2 * hidden, &mut rng),
            })
            .collect();
        let outcome_head = Linear::init(1, hidden, &mut rng);
        let intervention_head = Linear::init(1, hidden, &mut rng);
        Ok(MlpParams {
            n_features,
            reception_field,
            hidden,
            input_layer,
            hidden_layer,
            temporal,
            outcome_head,
            intervention_head,
        })
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            n_features: self.n_features,
            reception_field: self.reception_field,
            hidden: self.hidden,
            input_layer: Linear::zeros(self.hidden, self.n_features),
            hidden_layer: Linear::zeros(self.hidden, self.hidden),
            temporal: self
                .temporal
                .iter()
                .map(|lvl| TemporalLevel {
                    time_mix: Linear::zeros(lvl.time_mix.w.n_rows(), lvl.time_mix.w.n_cols()),
                    merge: Linear::zeros(self.hidden, 2 * self.hidden),
                })
                .collect(),
            outcome_head: Linear::zeros(1, self.hidden),
            intervention_head: Linear::zeros(1, self.hidden),
        }
    }

    /// Expected flattened window length.
    pub fn window_len(&self) -> usize {
        self.n_features * self.reception_field
    }

    fn linears(&self) -> Vec<(String, &Linear<R>)> {
        let mut list = vec![
            ("input".to_string(), &self.input_layer),
            ("hidden".to_string(), &self.hidden_layer),
        ];
        for (k, lvl) in self.temporal.iter().enumerate() {
            list.push((format!("temporal.{k}.time_mix"), &lvl.time_mix));
            list.push((format!("temporal.{k}.merge"), &lvl.merge));
        }
        list.push(("outcome".to_string(), &self.outcome_head));
        list.push(("intervention".to_string(), &self.intervention_head));
        list
    }

    fn linears_mut(&mut self) -> Vec<&mut Linear<R>> {
        let mut list = vec![&mut self.input_layer, &mut self.hidden_layer];
        for lvl in &mut self.temporal {
            list.push(&mut lvl.time_mix);
            list.push(&mut lvl.merge);
        }
        list.push(&mut self.outcome_head);
        list.push(&mut self.intervention_head);
        list
    }

    pub fn n_params(&self) -> usize {
        self.linears()
            .iter()
            .map(|(_, l)| l.w.data().len() + l.b.len())
            .sum()
    }

    /// Canonical flattening (layer order, weights row-major then bias).
    pub fn to_flat(&self) -> Vec<R> {
        let mut flat = Vec::with_capacity(self.n_params());
        for (_, l) in self.linears() {
            flat.extend_from_slice(l.w.data());
            flat.extend_from_slice(&l.b);
        }
        flat
    }

    pub fn assign_flat(&mut self, flat: &[R]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::argument("flat parameter vector has the wrong length"));
        }
        let mut pos = 0;
        for l in self.linears_mut() {
            let nw = l.w.data().len();
            l.w.data_mut().copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
        Ok(())
    }

    fn sgd_step(&mut self, grads: &Self, learning_rate: R) {
        let scale = -learning_rate;
        self.input_layer.add_scaled(&grads.input_layer, scale);
        self.hidden_layer.add_scaled(&grads.hidden_layer, scale);
        for (lvl, g) in self.temporal.iter_mut().zip(grads.temporal.iter()) {
            lvl.time_mix.add_scaled(&g.time_mix, scale);
            lvl.merge.add_scaled(&g.merge, scale);
        }
        self.outcome_head.add_scaled(&grads.outcome_head, scale);
        self.intervention_head
            .add_scaled(&grads.intervention_head, scale);
    }
}

// ---------------------------------------------------------------------------
// forward / backward
// ---------------------------------------------------------------------------

struct LevelCache<R> {
    input: Vec<Vec<R>>,
    mix_pre: Vec<Vec<R>>,
    mix_post: Vec<Vec<R>>,
    merge_pre: Vec<Vec<R>>,
}

struct ForwardCache<R> {
    z1: Vec<Vec<R>>,
    h1: Vec<Vec<R>>,
    z2: Vec<Vec<R>>,
    levels: Vec<LevelCache<R>>,
    k: Vec<R>,
}

/// Raw (unclipped) head outputs plus the shared representation.
#[derive(Debug, Clone)]
pub struct ForwardParts<R> {
    pub outcome_prob: R,
    pub intervention_prob: R,
    pub representation: Vec<R>,
}

fn relu<R: Real>(x: R) -> R {
    if x > R::zero() {
        x
    } else {
        R::zero()
    }
}

fn forward_cached<R: Real>(params: &MlpParams<R>, window: &[R]) -> Result<(ForwardCache<R>, R, R)> {
    if window.len() != params.window_len() {
        return Err(Error::argument(format!(
            "window length {} does not match {} features × {} steps",
            window.len(),
            params.n_features,
            params.reception_field
        )));
    }
    let f = params.n_features;
    let steps = params.reception_field;

    let mut z1 = Vec::with_capacity(steps);
    let mut h1 = Vec::with_capacity(steps);
    let mut z2 = Vec::with_capacity(steps);
    let mut grid = Vec::with_capacity(steps);
    for s in 0..steps {
        let xs = &window[s * f..(s + 1) * f];
        let a = params.input_layer.apply(xs);
        let ha: Vec<R> = a.iter().map(|&v| relu(v)).collect();
        let b = params.hidden_layer.apply(&ha);
        let hb: Vec<R> = b.iter().map(|&v| relu(v)).collect();
        z1.push(a);
        h1.push(ha);
        z2.push(b);
        grid.push(hb);
    }

    let mut levels = Vec::with_capacity(params.temporal.len());
    let mut current = grid;
    for lvl in &params.temporal {
        let len_in = current.len();
        let len_out = lvl.time_mix.w.n_rows();
        let h = params.hidden;
        let mut mix_pre = vec![vec![R::zero(); h]; len_out];
        for (s_out, row) in mix_pre.iter_mut().enumerate() {
            let weights = lvl.time_mix.w.row(s_out);
            for (c, cell) in row.iter_mut().enumerate() {
                let mut acc = lvl.time_mix.b[s_out];
                for s_in in 0..len_in {
                    acc = acc + weights[s_in] * current[s_in][c];
                }
                *cell = acc;
            }
        }
        let mix_post: Vec<Vec<R>> = mix_pre
            .iter()
            .map(|row| row.iter().map(|&v| relu(v)).collect())
            .collect();
        let mut merge_pre = Vec::with_capacity(len_out);
        let mut next = Vec::with_capacity(len_out);
        for s_out in 0..len_out {
            let skip = &current[len_in - len_out + s_out];
            let mut joined = mix_post[s_out].clone();
            joined.extend_from_slice(skip);
            let pre = lvl.merge.apply(&joined);
            next.push(pre.iter().map(|&v| relu(v)).collect());
            merge_pre.push(pre);
        }
        levels.push(LevelCache {
            input: current,
            mix_pre,
            mix_post,
            merge_pre,
        });
        current = next;
    }

    let k = current.into_iter().next().expect("pyramid ends at one step");
    let y_logit = params.outcome_head.apply(&k)[0];
    let a_logit = params.intervention_head.apply(&k)[0];
    let cache = ForwardCache { z1, h1, z2, levels, k };
    Ok((cache, expit(y_logit), expit(a_logit)))
}

/// Forward pass exposing the shared representation and raw head outputs.
pub fn forward_parts<R: Real>(params: &MlpParams<R>, window: &[R]) -> Result<ForwardParts<R>> {
    let (cache, y, a) = forward_cached(params, window)?;
    Ok(ForwardParts {
        outcome_prob: y,
        intervention_prob: a,
        representation: cache.k,
    })
}

/// Backpropagates `d_k` (gradient at the shared representation) through the
/// pyramid and backbone, accumulating into `grads`.
// indexed loops: each channel index addresses several parallel buffers
// (activations, gradients, weight rows), and a shared index keeps that
// correspondence visible where zipped iterators would hide it
#[allow(clippy::needless_range_loop)]
fn backward_trunk<R: Real>(
    params: &MlpParams<R>,
    cache: &ForwardCache<R>,
    window: &[R],
    d_k: Vec<R>,
    grads: &mut MlpParams<R>,
) {
    let f = params.n_features;
    let h = params.hidden;
    let mut d_current = vec![d_k];

    for (lvl_idx, lvl) in params.temporal.iter().enumerate().rev() {
        let lc = &cache.levels[lvl_idx];
        let len_in = lc.input.len();
        let len_out = lc.mix_pre.len();
        let mut d_input = vec![vec![R::zero(); h]; len_in];

        for s_out in 0..len_out {
            // through the merge ReLU
            let d_merge_pre: Vec<R> = d_current[s_out]
                .iter()
                .zip(lc.merge_pre[s_out].iter())
                .map(|(&d, &z)| if z > R::zero() { d } else { R::zero() })
                .collect();
            let skip_idx = len_in - len_out + s_out;
            {
                let gm = &mut grads.temporal[lvl_idx].merge;
                for c in 0..h {
                    let d = d_merge_pre[c];
                    if d == R::zero() {
                        continue;
                    }
                    let wrow = gm.w.row_mut(c);
                    for cc in 0..h {
                        wrow[cc] = wrow[cc] + d * lc.mix_post[s_out][cc];
                        wrow[h + cc] = wrow[h + cc] + d * lc.input[skip_idx][cc];
                    }
                    gm.b[c] = gm.b[c] + d;
                }
            }
            // split the merge input gradient into mixed and skip halves
            let mut d_mix_post = vec![R::zero(); h];
            for c in 0..h {
                let d = d_merge_pre[c];
                if d == R::zero() {
                    continue;
                }
                let wrow = lvl.merge.w.row(c);
                for cc in 0..h {
                    d_mix_post[cc] = d_mix_post[cc] + wrow[cc] * d;
                    d_input[skip_idx][cc] = d_input[skip_idx][cc] + wrow[h + cc] * d;
                }
            }
            // through the time-mix ReLU and weights
            let weights = lvl.time_mix.w.row(s_out);
            let gt = &mut grads.temporal[lvl_idx].time_mix;
            let gw = gt.w.row_mut(s_out);
            let mut d_bias = R::zero();
            for c in 0..h {
                let d = if lc.mix_pre[s_out][c] > R::zero() {
                    d_mix_post[c]
                } else {
                    R::zero()
                };
                if d == R::zero() {
                    continue;
                }
                d_bias = d_bias + d;
                for s_in in 0..len_in {
                    gw[s_in] = gw[s_in] + d * lc.input[s_in][c];
                    d_input[s_in][c] = d_input[s_in][c] + weights[s_in] * d;
                }
            }
            gt.b[s_out] = gt.b[s_out] + d_bias;
        }
        d_current = d_input;
    }

    // backbone, step by step
    for (s, d_h2) in d_current.iter().enumerate() {
        let xs = &window[s * f..(s + 1) * f];
        let mut d_h1 = vec![R::zero(); h];
        for c in 0..h {
            let d = if cache.z2[s][c] > R::zero() {
                d_h2[c]
            } else {
                R::zero()
            };
            if d == R::zero() {
                continue;
            }
            let wrow = grads.hidden_layer.w.row_mut(c);
            for cc in 0..h {
                wrow[cc] = wrow[cc] + d * cache.h1[s][cc];
            }
            grads.hidden_layer.b[c] = grads.hidden_layer.b[c] + d;
            let prow = params.hidden_layer.w.row(c);
            for cc in 0..h {
                d_h1[cc] = d_h1[cc] + prow[cc] * d;
            }
        }
        for c in 0..h {
            let d = if cache.z1[s][c] > R::zero() {
                d_h1[c]
            } else {
                R::zero()
            };
            if d == R::zero() {
                continue;
            }
            let wrow = grads.input_layer.w.row_mut(c);
            for (cc, &x) in xs.iter().enumerate() {
                wrow[cc] = wrow[cc] + d * x;
            }
            grads.input_layer.b[c] = grads.input_layer.b[c] + d;
        }
    }
}

// ---------------------------------------------------------------------------
// loss and gradients
// ---------------------------------------------------------------------------

/// One training record: a feature window, the infection outcome when the
/// record is observed (sampled policy records carry none), and the
/// intervention label separating observed from sampled windows.
#[derive(Debug, Clone)]
pub struct TrainSample<R> {
    pub window: Vec<R>,
    pub outcome: Option<R>,
    pub intervention: R,
}

/// Mean batch losses of the two heads.
#[derive(Debug, Clone, Copy)]
pub struct LossParts<R> {
    /// Outcome cross-entropy over labeled samples (0 when none).
    pub outcome: R,
    /// Intervention cross-entropy over the whole batch.
    pub intervention: R,
}

impl<R: Real> LossParts<R> {
    /// The objective the trunk descends.
    pub fn combined(&self, lambda: R) -> R {
        self.outcome - lambda * self.intervention
    }
}

fn bce<R: Real>(label: R, prob: R) -> (R, R) {
    let lo = R::of(BCE_CLIP);
    let hi = R::one() - lo;
    let clipped = prob < lo || prob > hi;
    let p = if prob < lo {
        lo
    } else if prob > hi {
        hi
    } else {
        prob
    };
    let loss = -(label * p.ln() + (R::one() - label) * (R::one() - p).ln());
    // gradient w.r.t. the logit; zero where the clip is active
    let grad = if clipped { R::zero() } else { p - label };
    (loss, grad)
}

/// Batch losses and the gradient container. Stored conventions:
/// the trunk holds `∂(L_y − λ·L_a)`, the outcome head `∂L_y`, and the
/// intervention head `+∂L_a` (its own descent direction; the reversal
/// happens only on the trunk side).
pub fn loss_and_gradients<R: Real>(
    params: &MlpParams<R>,
    samples: &[&TrainSample<R>],
    lambda: R,
) -> Result<(LossParts<R>, MlpParams<R>)> {
    if samples.is_empty() {
        return Err(Error::argument("empty batch"));
    }
    let n_all = samples.len();
    let n_labeled = samples.iter().filter(|s| s.outcome.is_some()).count();
    let mut grads = params.zeros_like();
    let mut loss_y = R::zero();
    let mut loss_a = R::zero();
    let inv_labeled = if n_labeled > 0 {
        R::one() / R::of_usize(n_labeled)
    } else {
        R::zero()
    };
    let inv_all = R::one() / R::of_usize(n_all);

    for sample in samples {
        let (cache, y_prob, a_prob) = forward_cached(params, &sample.window)?;
        let mut d_k = vec![R::zero(); params.hidden];

        if let Some(y) = sample.outcome {
            let (l, g) = bce(y, y_prob);
            loss_y = loss_y + l * inv_labeled;
            let gy = g * inv_labeled;
            if gy != R::zero() {
                let wrow = grads.outcome_head.w.row_mut(0);
                for (c, &kc) in cache.k.iter().enumerate() {
                    wrow[c] = wrow[c] + gy * kc;
                }
                grads.outcome_head.b[0] = grads.outcome_head.b[0] + gy;
                let prow = params.outcome_head.w.row(0);
                for c in 0..params.hidden {
                    d_k[c] = d_k[c] + gy * prow[c];
                }
            }
        }

        let (l, g) = bce(sample.intervention, a_prob);
        loss_a = loss_a + l * inv_all;
        let ga = g * inv_all;
        if ga != R::zero() {
            let wrow = grads.intervention_head.w.row_mut(0);
            for (c, &kc) in cache.k.iter().enumerate() {
                wrow[c] = wrow[c] + ga * kc;
            }
            grads.intervention_head.b[0] = grads.intervention_head.b[0] + ga;
            // reversed, scaled coupling into the trunk
            let prow = params.intervention_head.w.row(0);
            for c in 0..params.hidden {
                d_k[c] = d_k[c] - lambda * ga * prow[c];
            }
        }

        backward_trunk(params, &cache, &sample.window, d_k, &mut grads);
    }

    Ok((
        LossParts {
            outcome: loss_y,
            intervention: loss_a,
        },
        grads,
    ))
}

/// Smallest |pre-activation| across every ReLU unit of every sample, plus the
/// head probabilities' distance from the cross-entropy clip. Numerical
/// derivative probes should stay well inside this margin.
pub fn activation_margin<R: Real>(params: &MlpParams<R>, samples: &[&TrainSample<R>]) -> Result<R> {
    let mut margin = R::infinity();
    let clip = R::of(BCE_CLIP);
    for sample in samples {
        let (cache, y_prob, a_prob) = forward_cached(params, &sample.window)?;
        for row in cache.z1.iter().chain(cache.z2.iter()) {
            for &z in row {
                margin = margin.min(z.abs());
            }
        }
        for lvl in &cache.levels {
            for row in lvl.mix_pre.iter().chain(lvl.merge_pre.iter()) {
                for &z in row {
                    margin = margin.min(z.abs());
                }
            }
        }
        for p in [y_prob, a_prob] {
            margin = margin.min((p - clip).abs());
            margin = margin.min((R::one() - clip - p).abs());
        }
    }
    Ok(margin)
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Steps of history per window.
    pub reception_field: usize,
    pub hidden_dim: usize,
    pub n_epochs: usize,
    pub learning_rate: f64,
    /// Steepness of the adversarial ramp; 0 disables the intervention
    /// coupling entirely.
    pub lambda_gamma: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            reception_field: 5,
            hidden_dim: 64,
            n_epochs: 300,
            learning_rate: 1e-2,
            lambda_gamma: 10.0,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reception_field == 0 || self.hidden_dim == 0 {
            return Err(Error::argument("reception field and hidden width must be positive"));
        }
        if self.n_epochs == 0 || self.batch_size == 0 {
            return Err(Error::argument("epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::argument("learning rate must be positive and finite"));
        }
        if !(self.lambda_gamma >= 0.0 && self.lambda_gamma.is_finite()) {
            return Err(Error::argument("lambda_gamma must be non-negative"));
        }
        Ok(())
    }
}

/// Adversarial ramp: 0 at the start of training, saturating towards 1.
/// `progress` is the completed fraction of all SGD steps.
pub fn lambda_schedule(gamma: f64, progress: f64) -> f64 {
    2.0 / (1.0 + (-gamma * progress).exp()) - 1.0
}

fn validate_samples<R: Real>(samples: &[TrainSample<R>], window_len: usize, labeled: bool) -> Result<()> {
    for s in samples {
        if s.window.len() != window_len {
            return Err(Error::argument("inconsistent window length"));
        }
        if s.window.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("non-finite feature in training window"));
        }
        match (labeled, s.outcome) {
            (true, Some(y)) if y >= R::zero() && y <= R::one() => {}
            (false, None) => {}
            _ => return Err(Error::argument("outcome labels must be in [0, 1] on observed records only")),
        }
        if !(s.intervention >= R::zero() && s.intervention <= R::one()) {
            return Err(Error::argument("intervention labels must be in [0, 1]"));
        }
    }
    Ok(())
}

/// Trains on observed (labeled) windows mixed with sampled policy windows.
/// Plain SGD with shuffled mini-batches; the adversarial weight follows
/// `lambda_schedule` over global steps.
pub fn train<R: Real>(
    labeled: &[TrainSample<R>],
    unlabeled: &[TrainSample<R>],
    config: &TrainConfig,
) -> Result<MlpParams<R>> {
    config.validate()?;
    if labeled.is_empty() {
        return Err(Error::argument("need at least one labeled sample"));
    }
    let window_len = labeled[0].window.len();
    if !window_len.is_multiple_of(config.reception_field) {
        return Err(Error::argument(
            "window length is not a multiple of the reception field",
        ));
    }
    let n_features = window_len / config.reception_field;
    validate_samples(labeled, window_len, true)?;
    validate_samples(unlabeled, window_len, false)?;

    let mut params = MlpParams::init(
        n_features,
        config.reception_field,
        config.hidden_dim,
        seed::derive(config.seed, "mlp-init", 0),
    )?;
    let mut rng = seed::rng(seed::derive(config.seed, "mlp-shuffle", 0));

    let pool: Vec<&TrainSample<R>> = labeled.iter().chain(unlabeled.iter()).collect();
    let n_batches = pool.len().div_ceil(config.batch_size);
    let total_steps = config.n_epochs * n_batches;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let lr = R::of(config.learning_rate);
    let mut step = 0usize;

    for epoch in 0..config.n_epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let progress = step as f64 / (total_steps - 1).max(1) as f64;
            let lambda = R::of(lambda_schedule(config.lambda_gamma, progress));
            let batch: Vec<&TrainSample<R>> = chunk.iter().map(|&i| pool[i]).collect();
            let (loss, grads) = loss_and_gradients(&params, &batch, lambda)?;
            if !loss.outcome.is_finite() || !loss.intervention.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: batch_idx,
                    reason: "non-finite batch loss".to_string(),
                });
            }
            params.sgd_step(&grads, lr);
            step += 1;
        }
    }
    Ok(params)
}

/// Outcome probability for one window, clamped to the prediction range.
pub fn predict_outcome<R: Real>(params: &MlpParams<R>, window: &[R]) -> Result<R> {
    let parts = forward_parts(params, window)?;
    let lo = R::of(PREDICTION_CLIP.0);
    let hi = R::of(PREDICTION_CLIP.1);
    Ok(parts.outcome_prob.max(lo).min(hi))
}

pub fn predict_many<R: Real>(params: &MlpParams<R>, windows: &[Vec<R>]) -> Result<Vec<R>> {
    windows.iter().map(|w| predict_outcome(params, w)).collect()
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

/// Writes a text checkpoint; floats use the shortest round-trip form.
pub fn save_checkpoint<R: Real, W: Write>(params: &MlpParams<R>, writer: W) -> Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "{CHECKPOINT_MAGIC}")?;
    writeln!(
        out,
        "n_features={} reception_field={} hidden={}",
        params.n_features, params.reception_field, params.hidden
    )?;
    for (name, l) in params.linears() {
        writeln!(out, "tensor {name}.w {} {}", l.w.n_rows(), l.w.n_cols())?;
        for r in 0..l.w.n_rows() {
            let row: Vec<String> = l.w.row(r).iter().map(|v| format!("{}", v.as_f64())).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        writeln!(out, "tensor {name}.b {}", l.b.len())?;
        let row: Vec<String> = l.b.iter().map(|v| format!("{}", v.as_f64())).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

fn parse_kv(field: &str, key: &str) -> Result<usize> {
    field
        .strip_prefix(&format!("{key}="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(format!("checkpoint header: bad `{key}`")))
}

/// Reads a checkpoint produced by [`save_checkpoint`].
pub fn load_checkpoint<R: Real, In: Read>(reader: In) -> Result<MlpParams<R>> {
    let mut lines = BufReader::new(reader).lines();
    let mut next_line = move || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::parse("checkpoint truncated"))?
            .map_err(Error::Io)
    };
    if next_line()?.trim() != CHECKPOINT_MAGIC {
        return Err(Error::parse("not a recognized checkpoint"));
    }
    let header = next_line()?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::parse("checkpoint header: expected 3 fields"));
    }
    let n_features = parse_kv(fields[0], "n_features")?;
    let reception_field = parse_kv(fields[1], "reception_field")?;
    let hidden = parse_kv(fields[2], "hidden")?;
    let mut params = MlpParams::<R>::init(n_features, reception_field, hidden, 0)?;
    let expected: Vec<String> = params.linears().iter().map(|(n, _)| n.clone()).collect();

    let parse_row = |line: String, n: usize, dest: &mut [R]| -> Result<()> {
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != n {
            return Err(Error::parse(format!(
                "tensor row: expected {n} values, found {}",
                values.len()
            )));
        }
        for (slot, v) in dest.iter_mut().zip(values) {
            let parsed: f64 = v
                .parse()
                .map_err(|_| Error::parse(format!("bad float `{v}`")))?;
            *slot = R::of(parsed);
        }
        Ok(())
    };

    for (idx, name) in expected.iter().enumerate() {
        let l = params.linears_mut().swap_remove(idx);
        let (rows, cols) = (l.w.n_rows(), l.w.n_cols());
        let head = next_line()?;
        let want = format!("tensor {name}.w {rows} {cols}");
        if head.trim() != want {
            return Err(Error::parse(format!("expected `{want}`, found `{head}`")));
        }
        for r in 0..rows {
            let line = next_line()?;
            parse_row(line, cols, l.w.row_mut(r))?;
        }
        let head = next_line()?;
        let want = format!("tensor {name}.b {rows}");
        if head.trim() != want {
            return Err(Error::parse(format!("expected `{want}`, found `{head}`")));
        }
        let line = next_line()?;
        parse_row(line, rows, &mut l.b)?;
    }
    if next_line()?.trim() != "end" {
        return Err(Error::parse("missing checkpoint terminator"));
    }
    Ok(params)
}
