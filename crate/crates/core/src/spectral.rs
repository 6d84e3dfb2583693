//! Frequency grids, the power-law low-pass filter, and real inverse
//! transforms over 1-, 2- and 3-dimensional grids.
//!
//! Conventions used throughout:
//!
//! * bin `k` of an axis of length `n` has signed frequency `k / n` for
//!   `k < ceil(n / 2)` and `(k - n) / n` otherwise;
//! * the inverse transform carries the `1 / N` normalisation, `N` being the
//!   total element count, and uses `exp(+2 pi i k x / n)` kernels;
//! * the DC bin is clamped to `1 / max(dims)` before the filter divides by
//!   it.

use std::cell::RefCell;
use std::f64::consts::PI;

use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{validate_dims, Error, Result};
use crate::sampling::ComplexField;

/// Largest input accepted by [`naive_inverse_dft`].
pub const NAIVE_DFT_LIMIT: usize = 4096;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// A finite real field, e.g. the grey-scale image that gets thresholded
/// into a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    data: ArrayD<f64>,
}

impl RealField {
    pub fn new(data: ArrayD<f64>) -> Result<Self> {
        validate_dims(data.shape())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let data = ArrayD::from_shape_vec(IxDyn(dims), data)
            .map_err(|e| Error::shape(e.to_string()))?;
        Self::new(data)
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

    pub fn data(&self) -> &ArrayD<f64> {
        &self.data
    }

    pub fn into_data(self) -> ArrayD<f64> {
        self.data
    }

    /// Row-major view of the values.
    pub fn as_slice(&self) -> &[f64] {
        self.data
            .as_slice()
            .expect("fields are stored in standard layout")
    }
}

/// Magnitudes of the sample frequencies of every bin of a grid, in cycles
/// per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    mag: ArrayD<f64>,
}

impl FreqGrid {
    pub fn dims(&self) -> &[usize] {
        self.mag.shape()
    }

    pub fn magnitudes(&self) -> &ArrayD<f64> {
        &self.mag
    }

    /// Smallest magnitude the low-pass filter divides by.
    pub fn floor(&self) -> f64 {
        let longest = self.dims().iter().copied().max().unwrap_or(1);
        1.0 / longest as f64
    }
}

fn signed_frequency(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

pub fn freq_grid(dims: &[usize]) -> Result<FreqGrid> {
    validate_dims(dims)?;
    let mag = ArrayD::from_shape_fn(IxDyn(dims), |idx| {
        (0..dims.len())
            .map(|axis| signed_frequency(idx[axis], dims[axis]).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    Ok(FreqGrid { mag })
}

/// Divides every bin by `max(|f|, 1 / max(dims))^delta`.
pub fn apply_low_pass(z: &ComplexField, delta: f64, grid: &FreqGrid) -> Result<ComplexField> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::param(format!(
            "decay power must be finite and non-negative, got {delta}"
        )));
    }
    if z.dims() != grid.dims() {
        return Err(Error::shape(format!(
            "spectrum {:?} does not match frequency grid {:?}",
            z.dims(),
            grid.dims()
        )));
    }
    let floor = grid.floor();
    let mut out = z.clone();
    ndarray::Zip::from(out.values_mut())
        .and(grid.magnitudes())
        .for_each(|v, &f| {
            let weight = f.max(floor).powf(delta);
            *v /= weight;
        });
    Ok(out)
}

fn transform_axes(values: &mut ArrayD<Complex64>, direction: FftDirection) {
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        for axis in 0..values.ndim() {
            let n = values.shape()[axis];
            if n == 1 {
                continue;
            }
            let fft = planner.plan_fft(n, direction);
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            let mut buf = vec![Complex64::default(); n];
            for mut lane in values.lanes_mut(Axis(axis)) {
                if let Some(slice) = lane.as_slice_mut() {
                    fft.process_with_scratch(slice, &mut scratch);
                    continue;
                }
                buf.iter_mut().zip(lane.iter()).for_each(|(b, v)| *b = *v);
                fft.process_with_scratch(&mut buf, &mut scratch);
                lane.iter_mut().zip(&buf).for_each(|(v, b)| *v = *b);
            }
        }
    });
}

/// Real part of the normalised inverse DFT, computed with separable FFTs.
pub fn inverse_transform_real(z: &ComplexField) -> RealField {
    let mut values = z.values().clone();
    transform_axes(&mut values, FftDirection::Inverse);
    let scale = 1.0 / values.len() as f64;
    RealField {
        data: values.mapv(|c| c.re * scale),
    }
}

/// Direct-summation inverse DFT with the same conventions as
/// [`inverse_transform_real`]. Quadratic in the element count; inputs above
/// [`NAIVE_DFT_LIMIT`] elements are refused.
pub fn naive_inverse_dft(z: &ComplexField) -> Result<RealField> {
    let len = z.len();
    if len > NAIVE_DFT_LIMIT {
        return Err(Error::SizeLimit {
            len,
            limit: NAIVE_DFT_LIMIT,
        });
    }
    let dims = z.dims().to_vec();
    let spectrum: Vec<(Vec<usize>, Complex64)> = z
        .values()
        .indexed_iter()
        .map(|(k, &v)| (k.slice().to_vec(), v))
        .collect();
    let scale = 1.0 / len as f64;
    let data = ArrayD::from_shape_fn(IxDyn(&dims), |x| {
        let mut acc = Complex64::default();
        for (k, v) in &spectrum {
            let turns: f64 = dims
                .iter()
                .enumerate()
                .map(|(a, &n)| ((k[a] * x[a]) % n) as f64 / n as f64)
                .sum();
            acc += v * Complex64::from_polar(1.0, 2.0 * PI * turns);
        }
        acc.re * scale
    });
    Ok(RealField { data })
}

/// Power averaged over annuli of equal frequency magnitude.
///
/// Bin `r` collects the forward-transform bins whose magnitude rounds to
/// `r / max(dims)`, for `r` from 0 (DC) up to `max(dims) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn radial_power_spectrum(field: &RealField) -> RadialSpectrum {
    let dims = field.dims().to_vec();
    let longest = dims.iter().copied().max().unwrap_or(1);
    let bins = longest / 2 + 1;
    let mut values = field.data().mapv(|v| Complex64::new(v, 0.0));
    transform_axes(&mut values, FftDirection::Forward);

    let n = values.len() as f64;
    let mut power = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (idx, v) in values.indexed_iter() {
        let mag = (0..dims.len())
            .map(|a| signed_frequency(idx[a], dims[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        let r = (mag * longest as f64).round() as usize;
        if r < bins {
            power[r] += v.norm_sqr() / n;
            counts[r] += 1;
        }
    }
    for (p, &c) in power.iter_mut().zip(&counts) {
        if c > 0 {
            *p /= c as f64;
        }
    }
    let freqs = (0..bins).map(|r| r as f64 / longest as f64).collect();
    RadialSpectrum {
        freqs,
        power,
        counts,
    }
}

impl RadialSpectrum {
    /// Element-wise mean of several spectra over the same grid.
    pub fn average<'a>(spectra: impl IntoIterator<Item = &'a RadialSpectrum>) -> Option<Self> {
        let mut iter = spectra.into_iter();
        let mut acc = iter.next()?.clone();
        let mut n = 1.0;
        for s in iter {
            if s.freqs.len() != acc.freqs.len() {
                return None;
            }
            acc.power.iter_mut().zip(&s.power).for_each(|(a, b)| *a += b);
            n += 1.0;
        }
        acc.power.iter_mut().for_each(|p| *p /= n);
        Some(acc)
    }
}

/// Least-squares slope of log power against log frequency, skipping the DC
/// bin and empty bins. `None` when fewer than two bins qualify.
pub fn spectral_slope(spectrum: &RadialSpectrum) -> Option<f64> {
    let points: Vec<(f64, f64)> = spectrum
        .freqs
        .iter()
        .zip(&spectrum.power)
        .zip(&spectrum.counts)
        .skip(1)
        .filter(|((_, &p), &c)| c > 0 && p > 0.0)
        .map(|((&f, &p), _)| (f.ln(), p.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_complex_field, RngState};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn field_from(dims: &[usize], values: Vec<Complex64>) -> ComplexField {
        ComplexField::from_array(ArrayD::from_shape_vec(IxDyn(dims), values).unwrap()).unwrap()
    }

    #[test]
    fn one_dimensional_grid() {
        let g = freq_grid(&[4]).unwrap();
        assert_eq!(g.magnitudes().as_slice().unwrap(), &[0.0, 0.25, 0.5, 0.25]);
    }

    #[test]
    fn two_dimensional_grid() {
        let g = freq_grid(&[2, 2]).unwrap();
        let m = g.magnitudes();
        assert_eq!(m[[0, 0]], 0.0);
        assert_eq!(m[[0, 1]], 0.5);
        assert_eq!(m[[1, 0]], 0.5);
        assert_abs_diff_eq!(m[[1, 1]], 0.5f64.sqrt(), epsilon = 1e-15);

        let g = freq_grid(&[8, 8]).unwrap();
        assert_eq!(g.magnitudes()[[1, 0]], 0.125);
    }

    #[test]
    fn grid_magnitudes_are_bounded() {
        for dims in [vec![5], vec![7, 3], vec![4, 5, 6]] {
            let g = freq_grid(&dims).unwrap();
            let bound = (dims.len() as f64).sqrt() * 0.5;
            assert!(g.magnitudes().iter().all(|&m| (0.0..=bound).contains(&m)));
            assert_eq!(g.magnitudes().first(), Some(&0.0));
        }
    }

    #[test]
    fn grid_rejects_bad_dims() {
        assert!(freq_grid(&[]).is_err());
        assert!(freq_grid(&[4, 0]).is_err());
        assert!(freq_grid(&[2, 2, 2, 2]).is_err());
    }

    #[test]
    fn zero_decay_is_identity() {
        let z = sample_complex_field(&mut RngState::new(1, 0), &[6, 5]).unwrap();
        let out = apply_low_pass(&z, 0.0, &freq_grid(&[6, 5]).unwrap()).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn filter_weights() {
        let z = field_from(&[4], vec![Complex64::new(1.0, -1.0); 4]);
        let grid = freq_grid(&[4]).unwrap();
        let once = apply_low_pass(&z, 1.0, &grid).unwrap();
        // bin 2 sits at |f| = 0.5
        assert_eq!(once.values()[[2]], Complex64::new(2.0, -2.0));
        let cubed = apply_low_pass(&z, 3.0, &grid).unwrap();
        // bin 1 sits at |f| = 0.25; DC is clamped to 1/4 as well
        assert_eq!(cubed.values()[[1]], Complex64::new(64.0, -64.0));
        assert_eq!(cubed.values()[[0]], Complex64::new(64.0, -64.0));
    }

    #[test]
    fn filter_rejects_mismatch_and_bad_delta() {
        let z = ComplexField::zeros(&[4, 4]).unwrap();
        let grid = freq_grid(&[4, 5]).unwrap();
        assert!(matches!(
            apply_low_pass(&z, 1.0, &grid),
            Err(Error::InvalidShape(_))
        ));
        let grid = freq_grid(&[4, 4]).unwrap();
        assert!(apply_low_pass(&z, f64::NAN, &grid).is_err());
        assert!(apply_low_pass(&z, -1.0, &grid).is_err());
    }

    #[test]
    fn inverse_of_zero_and_dc() {
        for dims in [vec![8], vec![4, 6], vec![3, 4, 5]] {
            let zero = ComplexField::zeros(&dims).unwrap();
            assert!(inverse_transform_real(&zero).data().iter().all(|&v| v == 0.0));
            assert!(naive_inverse_dft(&zero)
                .unwrap()
                .data()
                .iter()
                .all(|&v| v == 0.0));

            let n: usize = dims.iter().product();
            let mut dc = ComplexField::zeros(&dims).unwrap();
            *dc.values_mut().first_mut().unwrap() = Complex64::new(n as f64, 0.0);
            for out in [inverse_transform_real(&dc), naive_inverse_dft(&dc).unwrap()] {
                for &v in out.data() {
                    assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn naive_oracle_four_point_by_hand() {
        // x[n] = 1/4 sum_k i^k i^(kn) = 1/4 sum_k i^(k(n+1)), which is 1 for
        // n = 3 and 0 otherwise.
        let z = field_from(
            &[4],
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, -1.0),
            ],
        );
        let out = naive_inverse_dft(&z).unwrap();
        for (got, want) in out.as_slice().iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let fast = inverse_transform_real(&z);
        for (got, want) in fast.as_slice().iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn naive_oracle_size_guard() {
        let z = ComplexField::zeros(&[65, 64]).unwrap();
        assert_eq!(
            naive_inverse_dft(&z),
            Err(Error::SizeLimit {
                len: 4160,
                limit: NAIVE_DFT_LIMIT
            })
        );
        assert!(naive_inverse_dft(&ComplexField::zeros(&[64, 64]).unwrap()).is_ok());
    }

    #[test]
    fn random_eight_by_eight_matches_oracle() {
        let z = sample_complex_field(&mut RngState::new(8, 0), &[8, 8]).unwrap();
        let fast = inverse_transform_real(&z);
        let slow = naive_inverse_dft(&z).unwrap();
        for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn real_field_rejects_non_finite() {
        assert!(matches!(
            RealField::from_vec(&[2], vec![1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn slope_of_a_pure_power_law() {
        let spectrum = RadialSpectrum {
            freqs: (0..9).map(|r| r as f64 / 16.0).collect(),
            power: (0..9)
                .map(|r| if r == 0 { 7.0 } else { (r as f64 / 16.0).powf(-4.0) })
                .collect(),
            counts: vec![1; 9],
        };
        assert_abs_diff_eq!(spectral_slope(&spectrum).unwrap(), -4.0, epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_slope_tracks_decay() {
        for delta in [1.0, 2.0, 3.0] {
            let grid = freq_grid(&[64]).unwrap();
            let spectra: Vec<RadialSpectrum> = (0..100)
                .map(|i| {
                    let z = sample_complex_field(&mut RngState::new(21, i), &[64]).unwrap();
                    let g = inverse_transform_real(&apply_low_pass(&z, delta, &grid).unwrap());
                    radial_power_spectrum(&g)
                })
                .collect();
            let slope = spectral_slope(&RadialSpectrum::average(&spectra).unwrap()).unwrap();
            assert!(
                (slope + 2.0 * delta).abs() <= 0.5,
                "delta {delta}: slope {slope}"
            );
        }
    }

    fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
        prop_oneof![
            (1usize..=64).prop_map(|a| vec![a]),
            (1usize..=16, 1usize..=16).prop_map(|(a, b)| vec![a, b]),
            (1usize..=6, 1usize..=6, 1usize..=6).prop_map(|(a, b, c)| vec![a, b, c]),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fast_inverse_matches_oracle(dims in dims_strategy(), seed in any::<u64>()) {
            let z = sample_complex_field(&mut RngState::new(seed, 0), &dims).unwrap();
            let fast = inverse_transform_real(&z);
            let slow = naive_inverse_dft(&z).unwrap();
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }

        #[test]
        fn inverse_is_linear(
            dims in dims_strategy(),
            seed in any::<u64>(),
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let mut rng = RngState::new(seed, 0);
            let z1 = sample_complex_field(&mut rng, &dims).unwrap();
            let z2 = sample_complex_field(&mut rng, &dims).unwrap();
            let combo = ComplexField::from_array(
                z1.values().mapv(|v| v * a) + z2.values().mapv(|v| v * b),
            ).unwrap();
            let lhs = inverse_transform_real(&combo);
            let t1 = inverse_transform_real(&z1);
            let t2 = inverse_transform_real(&z2);
            let scale = t1.data().iter().chain(t2.data().iter())
                .fold(0.0f64, |m, v| m.max(v.abs())) * (a.abs() + b.abs()) + 1e-300;
            for ((l, x), y) in lhs.as_slice().iter().zip(t1.as_slice()).zip(t2.as_slice()) {
                prop_assert!((l - (a * x + b * y)).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn stronger_decay_never_shrinks_a_bin(
            dims in dims_strategy().prop_filter("longest axis >= 2", |d| d.iter().any(|&n| n >= 2)),
            seed in any::<u64>(),
            d1 in 0.0f64..4.0,
            extra in 0.0f64..4.0,
        ) {
            let z = sample_complex_field(&mut RngState::new(seed, 0), &dims).unwrap();
            let grid = freq_grid(&dims).unwrap();
            let weak = apply_low_pass(&z, d1, &grid).unwrap();
            let strong = apply_low_pass(&z, d1 + extra, &grid).unwrap();
            for (s, w) in strong.values().iter().zip(weak.values()) {
                prop_assert!(s.norm() >= w.norm());
            }
        }
    }
}
