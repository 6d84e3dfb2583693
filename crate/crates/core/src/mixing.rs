//! Pairwise mixing of inputs and targets.
//!
//! Inputs are `[B, ...]` arrays whose first axis indexes samples. Mask
//! families need the remaining axes to be the mask grid, optionally behind
//! one leading channel axis (see [`Layout`]), and the mask is broadcast
//! over that axis.

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayD, Axis, IxDyn};
use rand::seq::SliceRandom;

use crate::error::{validate_dims, validate_lambda, Error, Result};
use crate::masks::{BinaryMask, MaskConfig, MaskFamily, DEFAULT_ALPHA, DEFAULT_DELTA};
use crate::sampling::{sample_lambda, RngState};

/// Element types that can be mixed. Mask selection works for any of them;
/// interpolation only for floating-point types.
pub trait Mixable: Copy + PartialEq + fmt::Debug + Send + Sync + 'static {
    /// `lambda * x1 + (1 - lambda) * x2`, or `None` when the type cannot
    /// represent the result.
    fn interpolate(x1: Self, x2: Self, lambda: f64) -> Option<Self>;
}

macro_rules! float_mixable {
    ($($t:ty),*) => {$(
        impl Mixable for $t {
            #[inline]
            fn interpolate(x1: Self, x2: Self, lambda: f64) -> Option<Self> {
                let l = lambda as $t;
                Some(l * x1 + (1.0 - l) * x2)
            }
        }
    )*};
}

float_mixable!(f32, f64);

impl Mixable for u8 {
    fn interpolate(_: Self, _: Self, _: f64) -> Option<Self> {
        None
    }
}

fn check_same_shape<T>(x1: &ArrayD<T>, x2: &ArrayD<T>) -> Result<()> {
    if x1.shape() != x2.shape() {
        return Err(Error::shape(format!(
            "inputs differ in shape: {:?} vs {:?}",
            x1.shape(),
            x2.shape()
        )));
    }
    Ok(())
}

/// Element-wise `lambda * x1 + (1 - lambda) * x2`.
pub fn mix_interpolate<T: Mixable>(x1: &ArrayD<T>, x2: &ArrayD<T>, lambda: f64) -> Result<ArrayD<T>> {
    check_same_shape(x1, x2)?;
    validate_lambda(lambda)?;
    let mut out = x1.clone();
    for (o, &b) in out.iter_mut().zip(x2.iter()) {
        *o = T::interpolate(*o, b, lambda).ok_or_else(|| {
            Error::input(format!(
                "interpolation needs floating-point data, got {}",
                std::any::type_name::<T>()
            ))
        })?;
    }
    Ok(out)
}

/// `m * x1 + (1 - m) * x2` as a selection: each output element is copied
/// from exactly one parent. The mask matches the trailing axes of the
/// inputs and is repeated over any leading ones.
pub fn mix_mask<T: Copy>(x1: &ArrayD<T>, x2: &ArrayD<T>, mask: &BinaryMask) -> Result<ArrayD<T>> {
    check_same_shape(x1, x2)?;
    let shape = x1.shape();
    let mdims = mask.dims();
    if shape.len() < mdims.len() || &shape[shape.len() - mdims.len()..] != mdims {
        return Err(Error::shape(format!(
            "mask {mdims:?} does not match the trailing axes of {shape:?}"
        )));
    }
    let a = x1.as_standard_layout();
    let b = x2.as_standard_layout();
    let a = a.as_slice().expect("standard layout");
    let b = b.as_slice().expect("standard layout");
    let m = mask.as_slice();
    let mut out = Vec::with_capacity(a.len());
    for (ca, cb) in a.chunks_exact(m.len()).zip(b.chunks_exact(m.len())) {
        out.extend(
            m.iter()
                .zip(ca.iter().zip(cb))
                .map(|(&keep, (&u, &v))| if keep == 1 { u } else { v }),
        );
    }
    Ok(ArrayD::from_shape_vec(IxDyn(shape), out).expect("output keeps the input shape"))
}

/// Uniform random permutation of `0..batch_size` (Fisher-Yates).
pub fn pair_batch(rng: &mut RngState, batch_size: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..batch_size).collect();
    perm.shuffle(rng);
    perm
}

fn check_class(y: usize, num_classes: usize) -> Result<()> {
    if y >= num_classes {
        return Err(Error::input(format!(
            "class index {y} out of range for {num_classes} classes"
        )));
    }
    Ok(())
}

/// Dense target `lambda * onehot(y1) + (1 - lambda) * onehot(y2)`.
pub fn mixed_targets(y1: usize, y2: usize, lambda: f64, num_classes: usize) -> Result<Vec<f64>> {
    validate_lambda(lambda)?;
    check_class(y1, num_classes)?;
    check_class(y2, num_classes)?;
    let mut out = vec![0.0; num_classes];
    if y1 == y2 {
        out[y1] = 1.0;
    } else {
        out[y1] = lambda;
        out[y2] = 1.0 - lambda;
    }
    Ok(out)
}

/// Tolerance on `logsumexp(logprobs)` when validating log-probabilities.
const LOGSUMEXP_TOLERANCE: f64 = 1e-6;

/// `-lambda * logprobs[y1] - (1 - lambda) * logprobs[y2]`.
///
/// `logprobs` must be a normalised log-probability vector. Entries may be
/// `-inf`; a term with zero weight is skipped so that `lambda = 1` ignores
/// `y2` entirely.
pub fn mixed_cross_entropy(logprobs: &[f64], y1: usize, y2: usize, lambda: f64) -> Result<f64> {
    validate_lambda(lambda)?;
    check_class(y1, logprobs.len())?;
    check_class(y2, logprobs.len())?;
    if logprobs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::input("log-probabilities contain NaN or +inf"));
    }
    let peak = logprobs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = peak + logprobs.iter().map(|v| (v - peak).exp()).sum::<f64>().ln();
    if !lse.is_finite() || lse.abs() > LOGSUMEXP_TOLERANCE {
        return Err(Error::input(format!(
            "log-probabilities are not normalised (logsumexp = {lse})"
        )));
    }
    let term = |weight: f64, lp: f64| if weight == 0.0 { 0.0 } else { -weight * lp };
    Ok((term(lambda, logprobs[y1]) + term(1.0 - lambda, logprobs[y2])).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    FMix,
    MixUp,
    CutMix,
}

impl Family {
    pub fn mask_family(self) -> Option<MaskFamily> {
        match self {
            Family::FMix => Some(MaskFamily::FMix),
            Family::CutMix => Some(MaskFamily::CutMix),
            Family::MixUp => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::FMix => "fmix",
            Family::MixUp => "mixup",
            Family::CutMix => "cutmix",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fmix" => Ok(Family::FMix),
            "mixup" => Ok(Family::MixUp),
            "cutmix" => Ok(Family::CutMix),
            other => Err(Error::param(format!("unknown mixing family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlternateSchedule {
    /// First family on even calls, second on odd calls.
    #[default]
    RoundRobin,
    /// Fair coin per call, drawn from the step's stream.
    CoinFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Single(Family),
    Alternate {
        first: Family,
        second: Family,
        schedule: AlternateSchedule,
    },
}

impl Policy {
    /// FMix and MixUp in strict turn, FMix first.
    pub fn alternate() -> Self {
        Policy::Alternate {
            first: Family::FMix,
            second: Family::MixUp,
            schedule: AlternateSchedule::RoundRobin,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Single(family) => family.fmt(f),
            Policy::Alternate { first, second, .. } => write!(f, "alternate({first},{second})"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("alternate") {
            Ok(Policy::alternate())
        } else {
            s.parse().map(Policy::Single)
        }
    }
}

/// How many coefficients a step draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaMode {
    #[default]
    PerBatch,
    PerSample,
}

/// Whether each pair gets its own mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    #[default]
    PerSample,
    Shared,
}

/// Interpretation of the per-sample axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    /// Every axis after the batch axis is spatial.
    #[default]
    Spatial,
    /// One channel axis, then spatial axes.
    ChannelsFirst,
}

impl Layout {
    fn spatial_dims<'a>(&self, sample_dims: &'a [usize]) -> Result<&'a [usize]> {
        match self {
            Layout::Spatial => Ok(sample_dims),
            Layout::ChannelsFirst if sample_dims.len() >= 2 => Ok(&sample_dims[1..]),
            Layout::ChannelsFirst => Err(Error::shape(format!(
                "channels-first samples need at least two axes, got {sample_dims:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixConfig {
    pub alpha: f64,
    pub delta: f64,
    /// Overrides Beta sampling when set.
    pub fixed_lambda: Option<f64>,
    pub lambda_mode: LambdaMode,
    pub mask_mode: MaskMode,
    pub layout: Layout,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            delta: DEFAULT_DELTA,
            fixed_lambda: None,
            lambda_mode: LambdaMode::default(),
            mask_mode: MaskMode::default(),
            layout: Layout::default(),
        }
    }
}

/// Inputs with integer class targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    inputs: ArrayD<T>,
    targets: Vec<usize>,
    num_classes: usize,
}

impl<T: Clone> Batch<T> {
    pub fn new(inputs: ArrayD<T>, targets: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.ndim() < 2 || inputs.shape()[0] == 0 {
            return Err(Error::shape(format!(
                "batch inputs need a non-empty leading batch axis and sample axes, got {:?}",
                inputs.shape()
            )));
        }
        if targets.len() != inputs.shape()[0] {
            return Err(Error::input(format!(
                "{} targets for a batch of {}",
                targets.len(),
                inputs.shape()[0]
            )));
        }
        for &y in &targets {
            check_class(y, num_classes)?;
        }
        Ok(Self {
            inputs,
            targets,
            num_classes,
        })
    }

    pub fn inputs(&self) -> &ArrayD<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Result of mixing two pre-paired arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedMix<T> {
    pub inputs: ArrayD<T>,
    pub family: Family,
    /// Weight of the first parent. Per-batch mode draws one value; per-sample
    /// mode reports the mean of `sample_lambdas`. For CutMix this is the
    /// realised mask mean.
    pub lambda: f64,
    pub sample_lambdas: Vec<f64>,
    /// One mask per sample, or a single shared mask; empty for MixUp.
    pub masks: Vec<BinaryMask>,
}

impl<T> PairedMix<T> {
    pub fn mask_for(&self, sample: usize) -> Option<&BinaryMask> {
        match self.masks.len() {
            0 => None,
            1 => self.masks.first(),
            _ => self.masks.get(sample),
        }
    }
}

/// A mixed batch with the `(targets_a, targets_b, lambda)` triple used by
/// the interpolated cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch<T> {
    pub inputs: ArrayD<T>,
    pub targets_a: Vec<usize>,
    pub targets_b: Vec<usize>,
    pub lambda: f64,
    pub sample_lambdas: Vec<f64>,
    pub perm: Vec<usize>,
    pub family: Family,
    pub masks: Vec<BinaryMask>,
    pub num_classes: usize,
}

impl<T> MixedBatch<T> {
    pub fn mask_for(&self, sample: usize) -> Option<&BinaryMask> {
        match self.masks.len() {
            0 => None,
            1 => self.masks.first(),
            _ => self.masks.get(sample),
        }
    }

    /// Dense soft targets, one row per sample.
    pub fn dense_targets(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.targets_a.len())
            .map(|i| {
                mixed_targets(
                    self.targets_a[i],
                    self.targets_b[i],
                    self.sample_lambdas[i],
                    self.num_classes,
                )
            })
            .collect()
    }

    /// Mean mixed cross-entropy over the batch, one log-probability row per
    /// sample.
    pub fn cross_entropy(&self, logprobs: &[Vec<f64>]) -> Result<f64> {
        if logprobs.len() != self.targets_a.len() {
            return Err(Error::input(format!(
                "{} log-probability rows for a batch of {}",
                logprobs.len(),
                self.targets_a.len()
            )));
        }
        let total = logprobs
            .iter()
            .enumerate()
            .map(|(i, row)| {
                mixed_cross_entropy(row, self.targets_a[i], self.targets_b[i], self.sample_lambdas[i])
            })
            .sum::<Result<f64>>()?;
        Ok(total / logprobs.len() as f64)
    }
}

/// Runs a mixing policy batch after batch.
///
/// Each call draws, in order: the family (coin-flip schedules only), the
/// batch coefficient (per-batch mode), the pairing permutation
/// ([`Mixer::step`] only), then per sample the coefficient (per-sample
/// mode) and the mask. The alternation counter is the only state carried
/// between calls.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixer {
    policy: Policy,
    config: MixConfig,
    steps: u64,
}

impl Mixer {
    pub fn new(policy: Policy, config: MixConfig) -> Result<Self> {
        if !config.alpha.is_finite() || config.alpha <= 0.0 {
            return Err(Error::param(format!(
                "alpha must be positive and finite, got {}",
                config.alpha
            )));
        }
        if !config.delta.is_finite() || config.delta < 0.0 {
            return Err(Error::param(format!(
                "decay power must be finite and non-negative, got {}",
                config.delta
            )));
        }
        if let Some(lambda) = config.fixed_lambda {
            validate_lambda(lambda)?;
        }
        Ok(Self {
            policy,
            config,
            steps: 0,
        })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn config(&self) -> &MixConfig {
        &self.config
    }

    /// Number of completed steps.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Family the next step applies under a round-robin schedule.
    pub fn peek_family(&self) -> Option<Family> {
        match self.policy {
            Policy::Single(family) => Some(family),
            Policy::Alternate {
                first,
                second,
                schedule: AlternateSchedule::RoundRobin,
            } => Some(if self.steps.is_multiple_of(2) { first } else { second }),
            Policy::Alternate { .. } => None,
        }
    }

    fn choose_family(&self, rng: &mut RngState) -> Family {
        match self.policy {
            Policy::Alternate {
                first,
                second,
                schedule: AlternateSchedule::CoinFlip,
            } => {
                if rng.uniform() < 0.5 {
                    first
                } else {
                    second
                }
            }
            _ => self.peek_family().expect("deterministic schedule"),
        }
    }

    fn draw_lambda(&self, rng: &mut RngState) -> Result<f64> {
        match self.config.fixed_lambda {
            Some(lambda) => Ok(lambda),
            None => Ok(sample_lambda(rng, self.config.alpha)?.value()),
        }
    }

    fn check_shape<T>(&self, family: Family, inputs: &ArrayD<T>) -> Result<()> {
        if inputs.ndim() < 2 || inputs.shape()[0] == 0 {
            return Err(Error::shape(format!(
                "inputs need a non-empty batch axis and sample axes, got {:?}",
                inputs.shape()
            )));
        }
        if let Some(mask_family) = family.mask_family() {
            let spatial = self.config.layout.spatial_dims(&inputs.shape()[1..])?;
            validate_dims(spatial)?;
            if mask_family == MaskFamily::CutMix && spatial.len() != 2 {
                return Err(Error::shape(format!(
                    "cutmix needs two spatial axes, got {spatial:?}"
                )));
            }
        }
        Ok(())
    }

    fn mask_config(&self, family: MaskFamily, sample_dims: &[usize]) -> Result<MaskConfig> {
        let spatial = self.config.layout.spatial_dims(sample_dims)?;
        Ok(MaskConfig::new(spatial.to_vec())
            .with_family(family)
            .with_alpha(self.config.alpha)
            .with_delta(self.config.delta))
    }

    fn mix_pairs<T: Mixable>(
        &self,
        rng: &mut RngState,
        family: Family,
        batch_lambda: Option<f64>,
        a: &ArrayD<T>,
        b: &ArrayD<T>,
    ) -> Result<PairedMix<T>> {
        let batch_size = a.shape()[0];
        let sample_dims = a.shape()[1..].to_vec();
        let mut sample_lambdas = Vec::with_capacity(batch_size);
        let mut masks = Vec::new();
        let mut out = a.clone();

        let mask_config = family
            .mask_family()
            .map(|f| self.mask_config(f, &sample_dims))
            .transpose()?;

        for i in 0..batch_size {
            let lambda = match batch_lambda {
                Some(l) => l,
                None => self.draw_lambda(rng)?,
            };
            let x1 = a.index_axis(Axis(0), i).to_owned();
            let x2 = b.index_axis(Axis(0), i).to_owned();
            let (mixed, realised) = match &mask_config {
                None => (mix_interpolate(&x1, &x2, lambda)?, lambda),
                Some(config) => {
                    let reuse = self.config.mask_mode == MaskMode::Shared && !masks.is_empty();
                    if !reuse {
                        masks.push(config.generate(rng, lambda)?);
                    }
                    let mask = masks.last().expect("mask generated above");
                    (mix_mask(&x1, &x2, mask)?, mask.lambda_target())
                }
            };
            out.index_axis_mut(Axis(0), i).assign(&mixed);
            sample_lambdas.push(realised);
        }

        let lambda = match (batch_lambda, family) {
            (Some(l), Family::FMix | Family::MixUp) => l,
            // every rectangle of a batch has the same area
            (Some(_), Family::CutMix) => sample_lambdas[0],
            (None, _) => sample_lambdas.iter().sum::<f64>() / batch_size as f64,
        };
        Ok(PairedMix {
            inputs: out,
            family,
            lambda,
            sample_lambdas,
            masks,
        })
    }

    fn batch_lambda(&self, rng: &mut RngState) -> Result<Option<f64>> {
        match self.config.lambda_mode {
            LambdaMode::PerBatch => self.draw_lambda(rng).map(Some),
            LambdaMode::PerSample => Ok(None),
        }
    }

    /// Mixes `a[i]` with `b[i]` for every `i`.
    pub fn step_paired<T: Mixable>(
        &mut self,
        rng: &mut RngState,
        a: &ArrayD<T>,
        b: &ArrayD<T>,
    ) -> Result<PairedMix<T>> {
        check_same_shape(a, b)?;
        let family = self.choose_family(rng);
        self.check_shape(family, a)?;
        let batch_lambda = self.batch_lambda(rng)?;
        let mixed = self.mix_pairs(rng, family, batch_lambda, a, b)?;
        self.steps += 1;
        Ok(mixed)
    }

    /// Pairs every sample with `perm[i]` and mixes the pair, returning the
    /// mixed inputs with `(targets_a, targets_b, lambda)`.
    pub fn step<T: Mixable>(&mut self, rng: &mut RngState, batch: &Batch<T>) -> Result<MixedBatch<T>> {
        let family = self.choose_family(rng);
        self.check_shape(family, batch.inputs())?;
        let batch_lambda = self.batch_lambda(rng)?;
        let perm = pair_batch(rng, batch.len());
        let partner = batch.inputs().select(Axis(0), &perm);
        let mixed = self.mix_pairs(rng, family, batch_lambda, batch.inputs(), &partner)?;
        self.steps += 1;
        Ok(MixedBatch {
            inputs: mixed.inputs,
            targets_a: batch.targets().to_vec(),
            targets_b: perm.iter().map(|&j| batch.targets()[j]).collect(),
            lambda: mixed.lambda,
            sample_lambdas: mixed.sample_lambdas,
            perm,
            family,
            masks: mixed.masks,
            num_classes: batch.num_classes(),
        })
    }
}
