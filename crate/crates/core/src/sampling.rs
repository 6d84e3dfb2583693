//! Seedable random streams and the distributions the mixing pipeline draws
//! from: symmetric Beta mixing coefficients and complex Gaussian spectra.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{validate_dims, Error, Result};

/// A deterministic random stream identified by `(seed, stream_id)`.
///
/// The generator is ChaCha with 8 rounds. The 256-bit key is expanded from
/// `seed` with the PCG32 routine of `rand_core::SeedableRng::seed_from_u64`
/// and `stream_id` selects the ChaCha stream (nonce), so two states that
/// share a seed but differ in stream never overlap.
///
/// A state is single-owner. Parallel callers create one state per worker
/// or per item with distinct stream ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RngState {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh state on another stream of the same seed. The parent is not
    /// advanced.
    pub fn with_stream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    /// Position within the stream, in 32-bit words.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer on `0..=upper`.
    pub fn index_inclusive(&mut self, upper: usize) -> usize {
        self.inner.random_range(0..=upper)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// A mixing coefficient in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MixCoefficient(f64);

impl MixCoefficient {
    pub fn new(lambda: f64) -> Result<Self> {
        crate::error::validate_lambda(lambda)?;
        Ok(Self(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<MixCoefficient> for f64 {
    fn from(value: MixCoefficient) -> Self {
        value.0
    }
}

/// Draws one coefficient from `Beta(alpha, alpha)`.
///
/// The draw is `g1 / (g1 + g2)` for two independent `Gamma(alpha, 1)`
/// variates. The gamma sampler is Marsaglia-Tsang, boosted with
/// `u^(1/alpha)` when `alpha < 1`, so small concentrations such as 0.2 are
/// handled without special casing.
pub fn sample_lambda(rng: &mut RngState, alpha: f64) -> Result<MixCoefficient> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::param(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::param(e.to_string()))?;
    loop {
        let g1: f64 = gamma.sample(rng);
        let g2: f64 = gamma.sample(rng);
        let total = g1 + g2;
        // Both variates can underflow to zero for very small alpha.
        if total > 0.0 && total.is_finite() {
            return Ok(MixCoefficient((g1 / total).clamp(0.0, 1.0)));
        }
    }
}

/// An n-dimensional complex tensor, the random spectrum before filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    values: ArrayD<Complex64>,
}

impl ComplexField {
    pub fn from_array(values: ArrayD<Complex64>) -> Result<Self> {
        validate_dims(values.shape())?;
        Ok(Self {
            values: values.as_standard_layout().into_owned(),
        })
    }

    pub fn from_parts(re: &ArrayD<f64>, im: &ArrayD<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::shape(format!(
                "real part {:?} and imaginary part {:?} differ in shape",
                re.shape(),
                im.shape()
            )));
        }
        let values = ndarray::Zip::from(re)
            .and(im)
            .map_collect(|&r, &i| Complex64::new(r, i));
        Self::from_array(values)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        Ok(Self {
            values: ArrayD::zeros(IxDyn(dims)),
        })
    }

    pub fn dims(&self) -> &[usize] {
        self.values.shape()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &ArrayD<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> ArrayD<Complex64> {
        self.values
    }

    pub fn re(&self) -> ArrayD<f64> {
        self.values.mapv(|c| c.re)
    }

    pub fn im(&self) -> ArrayD<f64> {
        self.values.mapv(|c| c.im)
    }
}

/// Samples a complex field whose real and imaginary parts are independent
/// standard normals. Elements are filled in row-major order, real part
/// first.
pub fn sample_complex_field(rng: &mut RngState, dims: &[usize]) -> Result<ComplexField> {
    validate_dims(dims)?;
    let mut values = ArrayD::<Complex64>::zeros(IxDyn(dims));
    for v in values.iter_mut() {
        let re = rng.standard_normal();
        let im = rng.standard_normal();
        *v = Complex64::new(re, im);
    }
    Ok(ComplexField { values })
}
