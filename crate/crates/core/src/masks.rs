//! FMix and CutMix binary masks.
//!
//! An FMix mask is built in four steps: sample a complex Gaussian spectrum,
//! attenuate it by `1 / |f|^delta`, take the real part of its inverse
//! transform as a grey-scale field, and set the `round(lambda * N)` largest
//! grey values to one.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayD, IxDyn};

use crate::error::{validate_dims, validate_lambda, Error, Result};
use crate::sampling::{sample_complex_field, sample_lambda, RngState};
use crate::spectral::{apply_low_pass, freq_grid, inverse_transform_real, RealField};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 3.0;

/// A dense `{0, 1}` tensor together with the mixing coefficient it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    data: ArrayD<u8>,
    lambda_target: f64,
}

impl BinaryMask {
    pub fn new(data: ArrayD<u8>, lambda_target: f64) -> Result<Self> {
        validate_dims(data.shape())?;
        validate_lambda(lambda_target)?;
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            return Err(Error::input(format!(
                "mask value at flat index {pos} is not 0 or 1"
            )));
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
            lambda_target,
        })
    }

    /// Wraps stored mask data, taking the realised mean as the target.
    pub fn from_data(data: ArrayD<u8>) -> Result<Self> {
        let n = data.len().max(1) as f64;
        let ones = data.iter().filter(|&&v| v == 1).count() as f64;
        Self::new(data, ones / n)
    }

    pub fn dims(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &ArrayD<u8> {
        &self.data
    }

    pub fn into_data(self) -> ArrayD<u8> {
        self.data
    }

    pub fn as_slice(&self) -> &[u8] {
        self.data
            .as_slice()
            .expect("masks are stored in standard layout")
    }

    /// Requested coefficient for FMix masks; the realised area fraction for
    /// CutMix masks.
    pub fn lambda_target(&self) -> f64 {
        self.lambda_target
    }

    pub fn ones(&self) -> usize {
        self.as_slice().iter().filter(|&&v| v == 1).count()
    }

    pub fn mean(&self) -> f64 {
        self.ones() as f64 / self.len() as f64
    }

    /// The mask `1 - m`, encoding `1 - lambda`.
    pub fn complement(&self) -> Self {
        Self {
            data: self.data.mapv(|v| 1 - v),
            lambda_target: 1.0 - self.lambda_target,
        }
    }
}

/// Number of ones a mask of `n` elements carries for coefficient `lambda`:
/// `floor(lambda * n + 0.5)`.
pub fn ones_for(lambda: f64, n: usize) -> usize {
    ((lambda * n as f64 + 0.5).floor() as usize).min(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskFamily {
    FMix,
    CutMix,
}

impl fmt::Display for MaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskFamily::FMix => "fmix",
            MaskFamily::CutMix => "cutmix",
        })
    }
}

impl FromStr for MaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fmix" => Ok(MaskFamily::FMix),
            "cutmix" => Ok(MaskFamily::CutMix),
            other => Err(Error::param(format!("unknown mask family '{other}'"))),
        }
    }
}

/// Everything needed to draw masks: grid, Beta concentration, decay power
/// and family.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskConfig {
    pub dims: Vec<usize>,
    pub alpha: f64,
    pub delta: f64,
    pub family: MaskFamily,
}

impl MaskConfig {
    pub fn new(dims: impl Into<Vec<usize>>) -> Self {
        Self {
            dims: dims.into(),
            alpha: DEFAULT_ALPHA,
            delta: DEFAULT_DELTA,
            family: MaskFamily::FMix,
        }
    }

    pub fn with_family(mut self, family: MaskFamily) -> Self {
        self.family = family;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_dims(&self.dims)?;
        if self.family == MaskFamily::CutMix && self.dims.len() != 2 {
            return Err(Error::shape(format!(
                "cutmix masks are two-dimensional, got {} axes",
                self.dims.len()
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::param(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::param(format!(
                "decay power must be finite and non-negative, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Mask for a given coefficient.
    pub fn generate(&self, rng: &mut RngState, lambda: f64) -> Result<BinaryMask> {
        self.validate()?;
        match self.family {
            MaskFamily::FMix => fmix_mask(rng, &self.dims, lambda, self.delta),
            MaskFamily::CutMix => cutmix_mask(rng, &self.dims, lambda),
        }
    }

    /// Draws `lambda ~ Beta(alpha, alpha)`, then a mask for it.
    pub fn sample(&self, rng: &mut RngState) -> Result<BinaryMask> {
        self.validate()?;
        let lambda = sample_lambda(rng, self.alpha)?.value();
        self.generate(rng, lambda)
    }
}

/// Low-frequency grey-scale field: the real part of the inverse transform of
/// a filtered complex Gaussian spectrum.
pub fn sample_grey_field(rng: &mut RngState, dims: &[usize], delta: f64) -> Result<RealField> {
    let grid = freq_grid(dims)?;
    let spectrum = sample_complex_field(rng, dims)?;
    let filtered = apply_low_pass(&spectrum, delta, &grid)?;
    Ok(inverse_transform_real(&filtered))
}

/// Sets the `floor(lambda * N + 0.5)` largest grey values to one. Equal
/// values are ranked by ascending flat index.
pub fn binarize_top(grey: &RealField, lambda: f64) -> Result<BinaryMask> {
    validate_lambda(lambda)?;
    let values = grey.as_slice();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("non-finite grey value at flat index {pos}")));
    }
    let n = values.len();
    let k = ones_for(lambda, n);
    let mut data = vec![0u8; n];
    if k == n {
        data.fill(1);
    } else if k > 0 {
        let by_rank = |a: &usize, b: &usize| {
            values[*b]
                .partial_cmp(&values[*a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(b))
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.select_nth_unstable_by(k - 1, by_rank);
        for &i in &order[..k] {
            data[i] = 1;
        }
    }
    let data = ArrayD::from_shape_vec(IxDyn(grey.dims()), data)
        .expect("mask has the grey field's shape");
    Ok(BinaryMask {
        data,
        lambda_target: lambda,
    })
}

pub fn fmix_mask(rng: &mut RngState, dims: &[usize], lambda: f64, delta: f64) -> Result<BinaryMask> {
    validate_lambda(lambda)?;
    let grey = sample_grey_field(rng, dims, delta)?;
    binarize_top(&grey, lambda)
}

/// Side lengths of the CutMix rectangle for a `w x h` grid.
pub fn cutmix_box(w: usize, h: usize, lambda: f64) -> (usize, usize) {
    let cut = (1.0 - lambda).sqrt();
    let side = |n: usize| ((n as f64 * cut).round() as usize).min(n);
    (side(w), side(h))
}

/// A mask of ones with a zero rectangle of `round(w sqrt(1 - lambda)) x
/// round(h sqrt(1 - lambda))` placed uniformly at random, fully inside the
/// grid. The mask's `lambda_target` is its realised mean.
pub fn cutmix_mask(rng: &mut RngState, dims: &[usize], lambda: f64) -> Result<BinaryMask> {
    validate_dims(dims)?;
    if dims.len() != 2 {
        return Err(Error::shape(format!(
            "cutmix masks are two-dimensional, got {} axes",
            dims.len()
        )));
    }
    validate_lambda(lambda)?;
    let (w, h) = (dims[0], dims[1]);
    let (rw, rh) = cutmix_box(w, h, lambda);
    let mut data = ArrayD::<u8>::ones(IxDyn(dims));
    if rw > 0 && rh > 0 {
        let x0 = rng.index_inclusive(w - rw);
        let y0 = rng.index_inclusive(h - rh);
        data.slice_mut(ndarray::s![x0..x0 + rw, y0..y0 + rh])
            .fill(0);
    }
    let lambda_target = (w * h - rw * rh) as f64 / (w * h) as f64;
    Ok(BinaryMask {
        data,
        lambda_target,
    })
}

/// Fraction of axis-adjacent element pairs whose values differ.
pub fn transition_fraction(mask: &BinaryMask) -> f64 {
    let data = mask.data();
    let mut pairs = 0usize;
    let mut changes = 0usize;
    for axis in 0..data.ndim() {
        for lane in data.lanes(ndarray::Axis(axis)) {
            let mut iter = lane.iter();
            if let Some(mut prev) = iter.next() {
                for cur in iter {
                    pairs += 1;
                    changes += usize::from(cur != prev);
                    prev = cur;
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        changes as f64 / pairs as f64
    }
}
