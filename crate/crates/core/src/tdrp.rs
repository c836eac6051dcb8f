//! Transition-distance representation learning.
//!
//! For an anchor `s_t` the positive window holds the next `step` states and
//! the negative window the `step` states after that. The encoder is trained
//! so that positives sit close to the anchor and negatives at least `margin`
//! away:
//!
//! ```text
//! loss(t) = sum_{p in S+} |phi(s_t) - phi(p)| + sum_{n in S-} max(margin - |phi(s_t) - phi(n)|, 0)
//! ```
//!
//! Windows never cross trajectory boundaries, and anchors whose negative
//! window is empty are skipped. Training samples `pairs` members of each
//! window per anchor and rescales by `|S| / pairs`, an unbiased estimate of
//! the full-window sum.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::numcore::{adam_step, distance, Activation, AdamConfig, AdamState, DifferentiableLoss, MlpParams};
use crate::{stats, Trajectory, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdrpConfig {
    /// Window size for both the positive and the negative set.
    pub step: usize,
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub margin: f64,
    /// Anchors per gradient step.
    pub anchors: usize,
    /// Gradient steps per training round.
    pub grad_steps: usize,
    /// Samples drawn from each window per anchor.
    pub pairs: usize,
    pub adam: AdamConfig,
}

impl Default for TdrpConfig {
    fn default() -> Self {
        Self {
            step: 50,
            embedding_dim: 16,
            hidden: vec![256, 128, 64],
            margin: 1.0,
            anchors: 64,
            grad_steps: 200,
            pairs: 4,
            adam: AdamConfig::default(),
        }
    }
}

impl TdrpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("tdrp: {m}")));
        if self.step < 1 {
            return bad("step must be at least 1");
        }
        if self.embedding_dim < 1 {
            return bad("embedding_dim must be at least 1");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if self.anchors < 1 || self.pairs < 1 {
            return bad("anchors and pairs must be at least 1");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        self.adam.validate()
    }

    fn layer_sizes(&self, state_dim: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(state_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(self.embedding_dim);
        sizes
    }
}

/// Index ranges of the positive and negative windows of anchor `t` in a
/// sequence of `len` states.
pub fn contrast_ranges(len: usize, t: usize, step: usize) -> Result<(Range<usize>, Range<usize>)> {
    if t >= len {
        return Err(Error::OutOfRange { index: t, len });
    }
    if step == 0 {
        return Err(Error::InvalidConfig("step must be at least 1".into()));
    }
    let pos_end = (t + step + 1).min(len);
    let neg_end = (t + 2 * step + 1).min(len);
    Ok((t + 1..pos_end, pos_end..neg_end))
}

/// Positive and negative state windows of anchor `t`.
pub fn build_contrast_sets(trajectory: &Trajectory, t: usize, step: usize) -> Result<(&[Vector], &[Vector])> {
    let (pos, neg) = contrast_ranges(trajectory.states.len(), t, step)?;
    Ok((&trajectory.states[pos], &trajectory.states[neg]))
}

/// Number of anchors with a non-empty negative window.
pub fn valid_anchor_count(len: usize, step: usize) -> usize {
    len.saturating_sub(step + 1)
}

/// Triplet objective on precomputed embeddings (plain sums, no averaging).
pub fn triplet_loss(anchor: &[f64], positives: &[Vector], negatives: &[Vector], margin: f64) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::Empty("positive set"));
    }
    if negatives.is_empty() {
        return Err(Error::Empty("negative set"));
    }
    let mut loss = 0.0;
    for p in positives {
        ensure_dim("positive embedding", anchor.len(), p.len())?;
        loss += distance(anchor, p);
    }
    for n in negatives {
        ensure_dim("negative embedding", anchor.len(), n.len())?;
        loss += (margin - distance(anchor, n)).max(0.0);
    }
    Ok(loss)
}

/// One anchor with (possibly sub-sampled) windows and the weight applied to
/// each window sum.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastSample {
    pub anchor: Vector,
    pub positives: Vec<Vector>,
    pub negatives: Vec<Vector>,
    pub positive_weight: f64,
    pub negative_weight: f64,
}

/// Anchors with their positive and negative sets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContrastBatch {
    pub samples: Vec<ContrastSample>,
}

impl ContrastBatch {
    /// Every valid anchor of every trajectory with full windows.
    pub fn full(trajectories: &[&Trajectory], step: usize) -> Result<Self> {
        let mut samples = Vec::new();
        for traj in trajectories {
            for t in 0..valid_anchor_count(traj.states.len(), step) {
                let (pos, neg) = build_contrast_sets(traj, t, step)?;
                samples.push(ContrastSample {
                    anchor: traj.states[t].clone(),
                    positives: pos.to_vec(),
                    negatives: neg.to_vec(),
                    positive_weight: 1.0,
                    negative_weight: 1.0,
                });
            }
        }
        Ok(Self { samples })
    }
}

/// Mean over anchors of the weighted triplet objective, as a function of the
/// encoder parameters.
#[derive(Clone, Copy, Debug)]
pub struct TripletObjective {
    pub margin: f64,
}

impl DifferentiableLoss<MlpParams> for TripletObjective {
    type Batch = ContrastBatch;

    fn value(&self, params: &MlpParams, batch: &ContrastBatch) -> Result<f64> {
        if batch.samples.is_empty() {
            return Err(Error::Empty("contrast batch"));
        }
        let mut total = 0.0;
        for s in &batch.samples {
            let a = params.forward(&s.anchor)?;
            let pos: Vec<Vector> = s.positives.iter().map(|p| params.forward(p)).collect::<Result<_>>()?;
            let neg: Vec<Vector> = s.negatives.iter().map(|n| params.forward(n)).collect::<Result<_>>()?;
            let pos_sum: f64 = pos.iter().map(|p| distance(&a, p)).sum();
            let neg_sum: f64 = neg.iter().map(|n| (self.margin - distance(&a, n)).max(0.0)).sum();
            total += s.positive_weight * pos_sum + s.negative_weight * neg_sum;
        }
        Ok(total / batch.samples.len() as f64)
    }

    fn value_and_grad(&self, params: &MlpParams, batch: &ContrastBatch) -> Result<(f64, MlpParams)> {
        if batch.samples.is_empty() {
            return Err(Error::Empty("contrast batch"));
        }
        let scale = 1.0 / batch.samples.len() as f64;
        let mut grad = params.zeros_like();
        let mut total = 0.0;
        for s in &batch.samples {
            let anchor_cache = params.forward_cached(&s.anchor)?;
            let a = anchor_cache.output().to_vec();
            let mut d_anchor = vec![0.0; a.len()];
            for (members, weight, is_positive) in [
                (&s.positives, s.positive_weight, true),
                (&s.negatives, s.negative_weight, false),
            ] {
                for member in members.iter() {
                    let cache = params.forward_cached(member)?;
                    let e = cache.output();
                    let d = distance(&a, e);
                    // d|a-e|/da = (a-e)/|a-e|; zero distance takes the zero subgradient
                    let coeff = if is_positive {
                        total += weight * d;
                        if d > 0.0 {
                            weight * scale / d
                        } else {
                            0.0
                        }
                    } else if d < self.margin {
                        total += weight * (self.margin - d);
                        if d > 0.0 {
                            -weight * scale / d
                        } else {
                            0.0
                        }
                    } else {
                        0.0
                    };
                    if coeff == 0.0 {
                        continue;
                    }
                    let mut d_member = vec![0.0; a.len()];
                    for k in 0..a.len() {
                        let diff = coeff * (a[k] - e[k]);
                        d_anchor[k] += diff;
                        d_member[k] = -diff;
                    }
                    params.backward(&cache, &d_member, &mut grad)?;
                }
            }
            params.backward(&anchor_cache, &d_anchor, &mut grad)?;
        }
        Ok((total * scale, grad))
    }
}

/// Frozen encoder parameters used for reward computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderSnapshot {
    params: MlpParams,
    round: u64,
}

impl EncoderSnapshot {
    pub fn from_params(params: MlpParams, round: u64) -> Self {
        Self { params, round }
    }

    pub fn encode(&self, state: &[f64]) -> Result<Vector> {
        self.params.forward(state)
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn embedding_dim(&self) -> usize {
        self.params.output_dim()
    }

    pub fn embedding_distance(&self, s1: &[f64], s2: &[f64]) -> Result<f64> {
        Ok(distance(&self.encode(s1)?, &self.encode(s2)?))
    }
}

/// The trainable encoder with its optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    params: MlpParams,
    config: TdrpConfig,
    round: u64,
    adam: AdamState,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainStats {
    /// Sampled minibatch loss before each gradient step.
    pub losses: Vec<f64>,
}

impl TrainStats {
    pub fn mean_loss(&self) -> f64 {
        stats::mean(&self.losses)
    }
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, config: TdrpConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let params = MlpParams::init(&config.layer_sizes(state_dim), Activation::Tanh, Activation::Identity, rng)?;
        Ok(Self::from_params(params, config))
    }

    pub fn from_params(params: MlpParams, config: TdrpConfig) -> Self {
        let adam = AdamState::new(params.as_slice().len(), config.adam);
        Self {
            params,
            config,
            round: 0,
            adam,
        }
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn config(&self) -> &TdrpConfig {
        &self.config
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn state_dim(&self) -> usize {
        self.params.input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.params.output_dim()
    }

    pub fn encode(&self, state: &[f64]) -> Result<Vector> {
        self.params.forward(state)
    }

    pub fn embedding_distance(&self, s1: &[f64], s2: &[f64]) -> Result<f64> {
        Ok(distance(&self.encode(s1)?, &self.encode(s2)?))
    }

    pub fn snapshot(&self) -> EncoderSnapshot {
        EncoderSnapshot {
            params: self.params.clone(),
            round: self.round,
        }
    }

    /// One training round: `grad_steps` Adam steps on sampled anchors.
    pub fn train<T, R>(&mut self, buffer: &[T], rng: &mut R) -> Result<TrainStats>
    where
        T: AsRef<Trajectory>,
        R: Rng + ?Sized,
    {
        train_encoder(self, buffer, rng)
    }

    /// Like [`Encoder::train`] but with an explicit number of gradient steps.
    pub fn train_steps<T, R>(&mut self, buffer: &[T], steps: usize, rng: &mut R) -> Result<TrainStats>
    where
        T: AsRef<Trajectory>,
        R: Rng + ?Sized,
    {
        run_round(self, buffer, steps, rng)
    }
}

/// Uniform sampler over all valid `(trajectory, t)` anchors.
struct AnchorIndex {
    /// Cumulative valid-anchor counts, one entry per trajectory.
    cumulative: Vec<usize>,
}

impl AnchorIndex {
    fn new<T: AsRef<Trajectory>>(buffer: &[T], step: usize) -> Self {
        let mut acc = 0;
        let cumulative = buffer
            .iter()
            .map(|t| {
                acc += valid_anchor_count(t.as_ref().states.len(), step);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn total(&self) -> usize {
        self.cumulative.last().copied().unwrap_or(0)
    }

    fn locate(&self, k: usize) -> (usize, usize) {
        let traj = self.cumulative.partition_point(|&c| c <= k);
        let before = if traj == 0 { 0 } else { self.cumulative[traj - 1] };
        (traj, k - before)
    }
}

fn sample_window<R: Rng + ?Sized>(window: &[Vector], pairs: usize, rng: &mut R) -> Vec<Vector> {
    (0..pairs)
        .map(|_| window[rng.random_range(0..window.len())].clone())
        .collect()
}

/// Sample a minibatch of anchors with `pairs` draws from each window.
pub fn sample_contrast_batch<T, R>(buffer: &[T], config: &TdrpConfig, rng: &mut R) -> Result<ContrastBatch>
where
    T: AsRef<Trajectory>,
    R: Rng + ?Sized,
{
    let index = AnchorIndex::new(buffer, config.step);
    sample_from_index(buffer, &index, config, rng)
}

fn sample_from_index<T, R>(buffer: &[T], index: &AnchorIndex, config: &TdrpConfig, rng: &mut R) -> Result<ContrastBatch>
where
    T: AsRef<Trajectory>,
    R: Rng + ?Sized,
{
    if index.total() == 0 {
        return Err(Error::NoValidAnchors { step: config.step });
    }
    let mut samples = Vec::with_capacity(config.anchors);
    for _ in 0..config.anchors {
        let (ti, t) = index.locate(rng.random_range(0..index.total()));
        let traj = buffer[ti].as_ref();
        let (pos, neg) = build_contrast_sets(traj, t, config.step)?;
        samples.push(ContrastSample {
            anchor: traj.states[t].clone(),
            positives: sample_window(pos, config.pairs, rng),
            negatives: sample_window(neg, config.pairs, rng),
            positive_weight: pos.len() as f64 / config.pairs as f64,
            negative_weight: neg.len() as f64 / config.pairs as f64,
        });
    }
    Ok(ContrastBatch { samples })
}

/// Run one training round on `buffer`, updating the encoder in place.
pub fn train_encoder<T, R>(encoder: &mut Encoder, buffer: &[T], rng: &mut R) -> Result<TrainStats>
where
    T: AsRef<Trajectory>,
    R: Rng + ?Sized,
{
    let steps = encoder.config.grad_steps;
    run_round(encoder, buffer, steps, rng)
}

fn run_round<T, R>(encoder: &mut Encoder, buffer: &[T], steps: usize, rng: &mut R) -> Result<TrainStats>
where
    T: AsRef<Trajectory>,
    R: Rng + ?Sized,
{
    let config = encoder.config.clone();
    let index = AnchorIndex::new(buffer, config.step);
    if index.total() == 0 {
        return Err(Error::NoValidAnchors { step: config.step });
    }
    if let Some(t) = buffer.first() {
        ensure_dim("encoder state", encoder.state_dim(), t.as_ref().states[0].len())?;
    }
    let objective = TripletObjective { margin: config.margin };
    let mut stats = TrainStats::default();
    if steps == 0 {
        return Ok(stats);
    }
    for _ in 0..steps {
        let batch = sample_from_index(buffer, &index, &config, rng)?;
        let (loss, grad) = objective.value_and_grad(&encoder.params, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("encoder loss became {loss}")));
        }
        stats.losses.push(loss);
        adam_step(encoder.params.as_mut_slice(), grad.as_slice(), &mut encoder.adam)?;
    }
    encoder.round += 1;
    Ok(stats)
}

/// Exact objective: mean over every valid anchor of the full-window triplet
/// loss.
pub fn full_contrast_loss(encoder_params: &MlpParams, trajectories: &[&Trajectory], step: usize, margin: f64) -> Result<f64> {
    let batch = ContrastBatch::full(trajectories, step)?;
    if batch.samples.is_empty() {
        return Err(Error::NoValidAnchors { step });
    }
    TripletObjective { margin }.value(encoder_params, &batch)
}

/// Spearman correlation between a pairwise distance and the timestep gap,
/// pooled over every within-trajectory pair `i < j`.
pub fn gap_correlation<F>(trajectories: &[&Trajectory], mut dist: F) -> Result<f64>
where
    F: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    let mut gaps = Vec::new();
    let mut dists = Vec::new();
    for traj in trajectories {
        let n = traj.states.len();
        for i in 0..n {
            for j in i + 1..n {
                gaps.push((j - i) as f64);
                dists.push(dist(&traj.states[i], &traj.states[j])?);
            }
        }
    }
    if gaps.is_empty() {
        return Err(Error::Empty("trajectory pairs"));
    }
    Ok(stats::spearman(&dists, &gaps))
}

/// Embedding-distance vs. timestep-gap correlation.
pub fn embedding_gap_correlation(encoder: &Encoder, trajectories: &[&Trajectory]) -> Result<f64> {
    let embedded: Vec<Trajectory> = trajectories
        .iter()
        .map(|t| {
            Ok(Trajectory::from_states(
                t.states.iter().map(|s| encoder.encode(s)).collect::<Result<_>>()?,
            ))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&Trajectory> = embedded.iter().collect();
    gap_correlation(&refs, |a, b| Ok(distance(a, b)))
}

/// Raw-state Euclidean distance vs. timestep-gap correlation.
pub fn raw_gap_correlation(trajectories: &[&Trajectory]) -> Result<f64> {
    gap_correlation(trajectories, |a, b| Ok(distance(a, b)))
}
