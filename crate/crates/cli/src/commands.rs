use std::fs;
use std::path::{Path, PathBuf};

use fmix_core::{
    sample_grey_field, sample_lambda, validate_dims, LambdaMode, Layout, MaskConfig, MaskFamily,
    MaskMode, MixConfig, Mixable, Mixer, RngState,
};
use ndarray::{concatenate, ArrayD, ArrayView2, Axis, Ix2};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    Cli, Command, GenMaskArgs, MixArgs, OutputFormat, SamplingArgs, StatsArgs, StatsKind,
    VisualizeArgs,
};
use crate::error::{CliError, Result};
use crate::image::{encode_pgm, encode_png, mask_pixels, scaled_pixels};
use crate::npy::{self, Tensor};
use crate::output::StagedOutputs;
use crate::stats;

pub const TOOL: &str = "fmix";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub stdout: Option<String>,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::GenMask(args) => cmd_gen_mask(args),
        Command::Mix(args) => cmd_mix(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Visualize(args) => cmd_visualize(args),
    }
}

/// Reads an NPY file, distinguishing I/O failures from malformed content.
pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    npy::decode(&bytes).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source,
    })
}

/// `masks.npy` -> `masks.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// Pretty JSON with keys in sorted order and a trailing newline.
fn sidecar_json<T: Serialize>(meta: &T) -> Vec<u8> {
    // Value maps are BTreeMaps, so serialising through Value sorts keys.
    let value = serde_json::to_value(meta).expect("metadata is plain data");
    let mut text = serde_json::to_string_pretty(&value).expect("metadata is plain data");
    text.push('\n');
    text.into_bytes()
}

fn check_sampling(s: &SamplingArgs) -> Result<()> {
    if !s.alpha.is_finite() || s.alpha <= 0.0 {
        return Err(CliError::usage(format!("--alpha must be positive, got {}", s.alpha)));
    }
    if !s.delta.is_finite() || s.delta < 0.0 {
        return Err(CliError::usage(format!(
            "--delta must be non-negative, got {}",
            s.delta
        )));
    }
    if let Some(l) = s.lambda {
        if !(0.0..=1.0).contains(&l) {
            return Err(CliError::usage(format!("--lambda must lie in [0, 1], got {l}")));
        }
    }
    Ok(())
}

fn stack_name(out: &Path, index: usize, count: usize, ext: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let width = count.saturating_sub(1).to_string().len().max(3);
    out.with_file_name(format!("{stem}_{index:0width$}.{ext}"))
}

fn encode_image(pixels: ArrayView2<'_, u8>, format: OutputFormat) -> Result<Vec<u8>> {
    match format {
        OutputFormat::Pgm => Ok(encode_pgm(pixels)),
        OutputFormat::Png => encode_png(pixels),
        other => Err(CliError::usage(format!(
            "{} is not an image format",
            other.extension()
        ))),
    }
}

#[derive(Debug, Serialize)]
struct GenMaskMeta {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    kind: &'static str,
    family: String,
    dims: Vec<usize>,
    count: usize,
    seed: u64,
    alpha: f64,
    delta: f64,
    lambda_fixed: Option<f64>,
    /// Coefficient requested for each item.
    lambdas: Vec<f64>,
    /// Realised mean of each mask (masks only).
    mask_means: Option<Vec<f64>>,
    format: &'static str,
    dtype: String,
    shape: Vec<usize>,
    stream_rule: &'static str,
    files: Vec<String>,
}

enum Item {
    Mask(ArrayD<u8>, f64),
    Grey(ArrayD<f32>),
}

pub fn cmd_gen_mask(args: &GenMaskArgs) -> Result<Outcome> {
    let dims = &args.dims.0;
    validate_dims(dims).map_err(CliError::usage)?;
    check_sampling(&args.sampling)?;
    if args.count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    if args.family == MaskFamily::CutMix && dims.len() != 2 {
        return Err(CliError::usage(format!(
            "cutmix masks are two-dimensional, got --dims {}",
            args.dims
        )));
    }
    if args.grey && args.family != MaskFamily::FMix {
        return Err(CliError::usage("--grey is only available for fmix"));
    }
    let image = match args.format {
        OutputFormat::Npy => false,
        OutputFormat::Pgm | OutputFormat::Png if dims.len() == 2 => true,
        OutputFormat::Pgm | OutputFormat::Png => {
            return Err(CliError::usage("image output needs two-dimensional --dims"))
        }
        OutputFormat::Csv => return Err(CliError::usage("gen-mask does not write csv")),
    };
    let sidecar = sidecar_path(&args.out);
    if sidecar == args.out {
        return Err(CliError::usage("--out must not end in .json"));
    }

    let config = MaskConfig::new(dims.clone())
        .with_family(args.family)
        .with_alpha(args.sampling.alpha)
        .with_delta(args.sampling.delta);
    let s = &args.sampling;
    // item i draws from stream i, so the output does not depend on how the
    // work is scheduled
    let items: Vec<(f64, Item)> = (0..args.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngState::new(s.seed, i as u64);
            let lambda = match s.lambda {
                Some(l) => l,
                None => sample_lambda(&mut rng, s.alpha).map_err(CliError::usage)?.value(),
            };
            let item = if args.grey {
                let g = sample_grey_field(&mut rng, dims, s.delta).map_err(CliError::usage)?;
                Item::Grey(g.data().mapv(|v| v as f32))
            } else {
                let m = config.generate(&mut rng, lambda).map_err(CliError::usage)?;
                let mean = m.mean();
                Item::Mask(m.into_data(), mean)
            };
            Ok((lambda, item))
        })
        .collect::<Result<_>>()?;

    let lambdas: Vec<f64> = items.iter().map(|(l, _)| *l).collect();
    let mut shape = vec![args.count];
    shape.extend_from_slice(dims);
    let (tensor, mask_means) = if args.grey {
        let views: Vec<_> = items
            .iter()
            .map(|(_, it)| match it {
                Item::Grey(g) => g.view().insert_axis(Axis(0)),
                Item::Mask(..) => unreachable!("grey run"),
            })
            .collect();
        (Tensor::F32(concatenate(Axis(0), &views).expect("equal shapes")), None)
    } else {
        let views: Vec<_> = items
            .iter()
            .map(|(_, it)| match it {
                Item::Mask(m, _) => m.view().insert_axis(Axis(0)),
                Item::Grey(_) => unreachable!("mask run"),
            })
            .collect();
        let means = items
            .iter()
            .map(|(_, it)| match it {
                Item::Mask(_, mean) => *mean,
                Item::Grey(_) => unreachable!("mask run"),
            })
            .collect();
        (Tensor::U8(concatenate(Axis(0), &views).expect("equal shapes")), Some(means))
    };

    let mut staged = StagedOutputs::new();
    if image {
        for i in 0..args.count {
            let pixels = match &tensor {
                Tensor::U8(a) => mask_pixels(view2(a, i))?,
                Tensor::F32(a) => scaled_pixels(view2(a, i))?,
            };
            let path = if args.count == 1 {
                args.out.clone()
            } else {
                stack_name(&args.out, i, args.count, args.format.extension())
            };
            staged.stage(&path, &encode_image(pixels.view(), args.format)?)?;
        }
    } else {
        staged.stage(&args.out, &npy::encode(&tensor))?;
    }
    let files = staged
        .paths()
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let meta = GenMaskMeta {
        tool: TOOL,
        version: VERSION,
        command: "gen-mask",
        kind: if args.grey { "grey" } else { "mask" },
        family: args.family.to_string(),
        dims: dims.clone(),
        count: args.count,
        seed: s.seed,
        alpha: s.alpha,
        delta: s.delta,
        lambda_fixed: s.lambda,
        lambdas,
        mask_means,
        format: args.format.extension(),
        dtype: tensor.dtype().to_string(),
        shape,
        stream_rule: "item i is drawn from RngState(seed, i)",
        files,
    };
    staged.stage(&sidecar, &sidecar_json(&meta))?;
    Ok(Outcome {
        written: staged.commit()?,
        stdout: None,
    })
}

fn view2<T>(stack: &ArrayD<T>, index: usize) -> ArrayView2<'_, T> {
    stack
        .index_axis(Axis(0), index)
        .into_dimensionality::<Ix2>()
        .expect("two-dimensional items")
}

#[derive(Debug, Serialize)]
struct BatchRecord {
    index: usize,
    start: usize,
    len: usize,
    family: String,
    lambda: f64,
    sample_lambdas: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct MixMeta {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    input_a: String,
    input_b: String,
    policy: String,
    seed: u64,
    alpha: f64,
    delta: f64,
    lambda_fixed: Option<f64>,
    batch_size: usize,
    channels_first: bool,
    per_sample_lambda: bool,
    shared_mask: bool,
    dtype: String,
    shape: Vec<usize>,
    stream_rule: &'static str,
    batches: Vec<BatchRecord>,
    masks_file: Option<String>,
}

struct MixRun<T> {
    mixed: ArrayD<T>,
    batches: Vec<BatchRecord>,
    masks: Option<ArrayD<u8>>,
}

fn run_mix<T: Mixable>(
    mixer: &mut Mixer,
    seed: u64,
    batch_size: usize,
    a: &ArrayD<T>,
    b: &ArrayD<T>,
) -> Result<MixRun<T>> {
    let total = a.shape()[0];
    let mut pieces = Vec::new();
    let mut mask_rows: Vec<ArrayD<u8>> = Vec::new();
    let mut all_masked = true;
    let mut batches = Vec::new();
    for (index, start) in (0..total).step_by(batch_size).enumerate() {
        let end = (start + batch_size).min(total);
        let sa = a.slice_axis(Axis(0), (start..end).into()).to_owned();
        let sb = b.slice_axis(Axis(0), (start..end).into()).to_owned();
        let mut rng = RngState::new(seed, index as u64);
        let out = mixer
            .step_paired(&mut rng, &sa, &sb)
            .map_err(CliError::invalid)?;
        if out.masks.is_empty() {
            all_masked = false;
        } else {
            for i in 0..end - start {
                let m = out.mask_for(i).expect("mask family");
                mask_rows.push(m.data().clone().insert_axis(Axis(0)));
            }
        }
        batches.push(BatchRecord {
            index,
            start,
            len: end - start,
            family: out.family.to_string(),
            lambda: out.lambda,
            sample_lambdas: out.sample_lambdas,
        });
        pieces.push(out.inputs);
    }
    let views: Vec<_> = pieces.iter().map(|p| p.view()).collect();
    let mixed = concatenate(Axis(0), &views).expect("batches share sample shape");
    let masks = if all_masked {
        let views: Vec<_> = mask_rows.iter().map(|m| m.view()).collect();
        Some(concatenate(Axis(0), &views).expect("masks share shape"))
    } else {
        None
    };
    Ok(MixRun {
        mixed,
        batches,
        masks,
    })
}

pub fn cmd_mix(args: &MixArgs) -> Result<Outcome> {
    check_sampling(&args.sampling)?;
    if args.batch_size == Some(0) {
        return Err(CliError::usage("--batch-size must be at least 1"));
    }
    let sidecar = sidecar_path(&args.out);
    if sidecar == args.out {
        return Err(CliError::usage("--out must not end in .json"));
    }
    let a = read_tensor(&args.a)?;
    let b = read_tensor(&args.b)?;
    if a.dtype() != b.dtype() || a.shape() != b.shape() {
        return Err(CliError::invalid(format!(
            "inputs differ: {} {:?} vs {} {:?}",
            a.dtype(),
            a.shape(),
            b.dtype(),
            b.shape()
        )));
    }
    if a.shape().len() < 2 || a.shape()[0] == 0 {
        return Err(CliError::invalid(format!(
            "inputs need a non-empty sample axis and per-sample axes, got {:?}",
            a.shape()
        )));
    }
    let s = &args.sampling;
    let config = MixConfig {
        alpha: s.alpha,
        delta: s.delta,
        fixed_lambda: s.lambda,
        lambda_mode: if args.per_sample_lambda {
            LambdaMode::PerSample
        } else {
            LambdaMode::PerBatch
        },
        mask_mode: if args.shared_mask {
            MaskMode::Shared
        } else {
            MaskMode::PerSample
        },
        layout: if args.channels_first {
            Layout::ChannelsFirst
        } else {
            Layout::Spatial
        },
    };
    let mut mixer = Mixer::new(args.policy, config).map_err(CliError::usage)?;
    let batch_size = args.batch_size.unwrap_or(a.shape()[0]);

    let (mixed, batches, masks) = match (&a, &b) {
        (Tensor::U8(x), Tensor::U8(y)) => {
            let r = run_mix(&mut mixer, s.seed, batch_size, x, y)?;
            (Tensor::U8(r.mixed), r.batches, r.masks)
        }
        (Tensor::F32(x), Tensor::F32(y)) => {
            let r = run_mix(&mut mixer, s.seed, batch_size, x, y)?;
            (Tensor::F32(r.mixed), r.batches, r.masks)
        }
        _ => unreachable!("dtypes checked above"),
    };

    let mut staged = StagedOutputs::new();
    staged.stage(&args.out, &npy::encode(&mixed))?;
    let masks_file = match masks {
        Some(m) => {
            let path = args
                .masks_out
                .clone()
                .unwrap_or_else(|| args.out.with_extension("masks.npy"));
            staged.stage(&path, &npy::encode(&Tensor::U8(m)))?;
            Some(path.file_name().unwrap_or_default().to_string_lossy().into_owned())
        }
        None => None,
    };
    let meta = MixMeta {
        tool: TOOL,
        version: VERSION,
        command: "mix",
        input_a: args.a.display().to_string(),
        input_b: args.b.display().to_string(),
        policy: args.policy.to_string(),
        seed: s.seed,
        alpha: s.alpha,
        delta: s.delta,
        lambda_fixed: s.lambda,
        batch_size,
        channels_first: args.channels_first,
        per_sample_lambda: args.per_sample_lambda,
        shared_mask: args.shared_mask,
        dtype: mixed.dtype().to_string(),
        shape: mixed.shape().to_vec(),
        stream_rule: "batch k is mixed with RngState(seed, k)",
        batches,
        masks_file,
    };
    staged.stage(&sidecar, &sidecar_json(&meta))?;
    Ok(Outcome {
        written: staged.commit()?,
        stdout: None,
    })
}

pub fn cmd_stats(args: &StatsArgs) -> Result<Outcome> {
    let tensor = read_tensor(&args.input)?;
    let csv = match (&tensor, args.kind) {
        (Tensor::U8(stack), StatsKind::Auto | StatsKind::Mask) => {
            stats::mask_csv(&stats::mask_rows(stack)?)
        }
        (Tensor::F32(stack), StatsKind::Auto | StatsKind::Grey) => {
            stats::grey_csv(&stats::grey_rows(stack)?)
        }
        (Tensor::F32(stack), StatsKind::Mask) => {
            if stack.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(CliError::invalid("float32 file holds non-binary values"));
            }
            stats::mask_csv(&stats::mask_rows(&stack.mapv(|v| v as u8))?)
        }
        (Tensor::U8(_), StatsKind::Grey) => {
            return Err(CliError::invalid("grey-field statistics need a float32 file"))
        }
    };
    match &args.out {
        Some(path) => {
            let mut staged = StagedOutputs::new();
            staged.stage(path, csv.as_bytes())?;
            Ok(Outcome {
                written: staged.commit()?,
                stdout: None,
            })
        }
        None => Ok(Outcome {
            written: Vec::new(),
            stdout: Some(csv),
        }),
    }
}

pub fn cmd_visualize(args: &VisualizeArgs) -> Result<Outcome> {
    let format = match args.format {
        Some(f) => f,
        None => match args.out.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => OutputFormat::Png,
            _ => OutputFormat::Pgm,
        },
    };
    if !matches!(format, OutputFormat::Pgm | OutputFormat::Png) {
        return Err(CliError::usage("visualize writes pgm or png"));
    }
    let tensor = read_tensor(&args.input)?;
    let shape = tensor.shape().to_vec();
    let (count, stacked) = match shape.len() {
        2 => (1, false),
        3 => (shape[0], true),
        _ => {
            return Err(CliError::usage(format!(
                "visualize needs 2D images or a stack of them, got shape {shape:?}"
            )))
        }
    };
    let indices: Vec<usize> = match args.index {
        Some(i) if i < count => vec![i],
        Some(i) => {
            return Err(CliError::usage(format!(
                "--index {i} out of range for {count} items"
            )))
        }
        None => (0..count).collect(),
    };

    let pixels_at = |i: usize| -> Result<ndarray::Array2<u8>> {
        match &tensor {
            Tensor::U8(a) if stacked => mask_pixels(view2(a, i)),
            Tensor::U8(a) => mask_pixels(a.view().into_dimensionality::<Ix2>().expect("2D")),
            Tensor::F32(a) if stacked => scaled_pixels(view2(a, i)),
            Tensor::F32(a) => scaled_pixels(a.view().into_dimensionality::<Ix2>().expect("2D")),
        }
    };

    let mut staged = StagedOutputs::new();
    for &i in &indices {
        let path = if indices.len() == 1 {
            args.out.clone()
        } else {
            stack_name(&args.out, i, count, format.extension())
        };
        staged.stage(&path, &encode_image(pixels_at(i)?.view(), format)?)?;
    }
    Ok(Outcome {
        written: staged.commit()?,
        stdout: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_naming() {
        assert_eq!(sidecar_path(Path::new("out/m.npy")), PathBuf::from("out/m.json"));
        assert_eq!(sidecar_path(Path::new("m")), PathBuf::from("m.json"));
        assert_eq!(
            stack_name(Path::new("d/img.pgm"), 7, 8, "pgm"),
            PathBuf::from("d/img_007.pgm")
        );
        assert_eq!(
            stack_name(Path::new("img.png"), 12, 2000, "png"),
            PathBuf::from("img_0012.png")
        );
    }

    #[test]
    fn sidecar_keys_are_sorted() {
        #[derive(Serialize)]
        struct M {
            zeta: u8,
            alpha: u8,
            mid: u8,
        }
        let text = String::from_utf8(sidecar_json(&M { zeta: 1, alpha: 2, mid: 3 })).unwrap();
        let a = text.find("alpha").unwrap();
        let m = text.find("mid").unwrap();
        let z = text.find("zeta").unwrap();
        assert!(a < m && m < z);
        assert!(text.ends_with("}\n"));
    }
}
