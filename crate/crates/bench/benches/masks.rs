use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use fmix_core::{
    binarize_top, cutmix_mask, fmix_mask, inverse_transform_real, naive_inverse_dft,
    sample_complex_field, sample_grey_field, Batch, MixConfig, Mixer, Policy, RngState,
};
use ndarray::{ArrayD, IxDyn};
use std::hint::black_box;

fn masks(c: &mut Criterion) {
    let mut group = c.benchmark_group("fmix_mask");
    let shapes: [&[usize]; 4] = [&[1024], &[32, 32], &[128, 128], &[16, 16, 16]];
    for dims in shapes {
        let n: usize = dims.iter().product();
        group.throughput(Throughput::Elements(n as u64));
        let label = format!("{dims:?}");
        group.bench_with_input(BenchmarkId::from_parameter(label), dims, |b, dims| {
            let mut rng = RngState::new(1, 0);
            b.iter(|| fmix_mask(&mut rng, black_box(dims), 0.5, 3.0).unwrap());
        });
    }
    group.finish();

    c.bench_function("cutmix_mask/[224, 224]", |b| {
        let mut rng = RngState::new(1, 0);
        b.iter(|| cutmix_mask(&mut rng, black_box(&[224, 224]), 0.5).unwrap());
    });
}

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("inverse_transform");
    let shapes: [&[usize]; 3] = [&[64], &[16, 16], &[8, 8, 8]];
    for dims in shapes {
        let z = sample_complex_field(&mut RngState::new(2, 0), dims).unwrap();
        let label = format!("{dims:?}");
        group.bench_with_input(BenchmarkId::new("fft", &label), &z, |b, z| {
            b.iter(|| inverse_transform_real(black_box(z)));
        });
        group.bench_with_input(BenchmarkId::new("naive", &label), &z, |b, z| {
            b.iter(|| naive_inverse_dft(black_box(z)).unwrap());
        });
    }
    group.finish();
}

fn threshold(c: &mut Criterion) {
    let grey = sample_grey_field(&mut RngState::new(3, 0), &[256, 256], 3.0).unwrap();
    c.bench_function("binarize_top/[256, 256]", |b| {
        b.iter(|| binarize_top(black_box(&grey), 0.3).unwrap());
    });
}

fn mixing(c: &mut Criterion) {
    let inputs = ArrayD::from_shape_fn(IxDyn(&[64, 3, 32, 32]), |i| (i[0] + i[1] + i[2] * i[3]) as f32);
    let targets = (0..64).map(|i| i % 10).collect();
    let batch = Batch::new(inputs, targets, 10).unwrap();
    let mut group = c.benchmark_group("mixer_step");
    for policy in ["fmix", "mixup", "cutmix"] {
        let config = MixConfig {
            layout: fmix_core::Layout::ChannelsFirst,
            ..MixConfig::default()
        };
        let mut mixer = Mixer::new(policy.parse::<Policy>().unwrap(), config).unwrap();
        group.bench_function(policy, |b| {
            let mut k = 0;
            b.iter(|| {
                k += 1;
                mixer.step(&mut RngState::new(4, k), black_box(&batch)).unwrap()
            });
        });
    }
    group.finish();
}

criterion_group!(benches, masks, transforms, threshold, mixing);
criterion_main!(benches);
