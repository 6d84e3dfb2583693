//! Mixed-sample data augmentation primitives.
//!
//! The crate samples low-frequency grey-scale images in Fourier space and
//! thresholds them into binary masks (FMix), builds CutMix rectangle masks,
//! and mixes paired inputs and their targets either by interpolation
//! (MixUp) or by mask selection. All randomness flows through
//! [`RngState`], so every output is a pure function of `(seed, stream,
//! parameters)`.
//!
//! ```
//! use fmix_core::{fmix_mask, RngState};
//!
//! let mut rng = RngState::new(1, 0);
//! let mask = fmix_mask(&mut rng, &[32, 32], 0.5, 3.0).unwrap();
//! assert_eq!(mask.ones(), 512);
//! ```

pub mod error;
pub mod masks;
pub mod mixing;
pub mod sampling;
pub mod spectral;

pub use error::{validate_dims, Error, Result};
pub use masks::{
    binarize_top, cutmix_box, cutmix_mask, fmix_mask, ones_for, sample_grey_field, transition_fraction,
    BinaryMask, MaskConfig, MaskFamily, DEFAULT_ALPHA, DEFAULT_DELTA,
};
pub use mixing::{
    mix_interpolate, mix_mask, mixed_cross_entropy, mixed_targets, pair_batch, AlternateSchedule,
    Batch, Family, LambdaMode, Layout, MaskMode, MixConfig, Mixable, MixedBatch, Mixer, PairedMix,
    Policy,
};
pub use sampling::{sample_complex_field, sample_lambda, ComplexField, MixCoefficient, RngState};
pub use spectral::{
    apply_low_pass, freq_grid, inverse_transform_real, naive_inverse_dft, radial_power_spectrum,
    spectral_slope, FreqGrid, RadialSpectrum, RealField, NAIVE_DFT_LIMIT,
};
