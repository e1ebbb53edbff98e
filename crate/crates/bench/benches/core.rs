//! Hot-path benchmarks: graph construction, a single SAGE layer, Delaunay
//! interpolation, the full model forward, and one complete training step.
//! All fixtures are at production scale (256 traces per graph).

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use icelayer_core::dataset::{
    build_samples, delaunay_interpolate, synth_generate, SynthConfig, TemporalSample,
};
use icelayer_core::geo::{EdgeWeightMatrix, EdgeWeightMode, FeatureMask, TraceCoordinates};
use icelayer_core::layers::{sage_forward, GraphLayer, SageCtx, SageLayerParams};
use icelayer_core::model::{Model, ModelConfig, NormStats};
use icelayer_core::nn::{mse_loss_and_grad, stream, DenseMatrix, Neighborhood, RngState};
use icelayer_core::training::AdamState;

fn spread_points(n: usize) -> (Vec<f64>, Vec<f64>) {
    let lat = (0..n).map(|i| 67.0 + 0.002 * i as f64).collect();
    let lon = (0..n).map(|i| -48.0 + 0.003 * ((i * 7) % n) as f64).collect();
    (lat, lon)
}

fn edge_weights(c: &mut Criterion) {
    let (lat, lon) = spread_points(256);
    let points: Vec<(f64, f64)> = lat.iter().copied().zip(lon.iter().copied()).collect();
    c.bench_function("edge_weights_256", |b| {
        b.iter(|| {
            EdgeWeightMatrix::from_points(black_box(&points), EdgeWeightMode::AsWritten, 1e9)
                .unwrap()
        })
    });
}

fn sage_layer(c: &mut Criterion) {
    let mut rng = RngState::with_stream(11, stream::INIT);
    let params = SageLayerParams::init(8, 256, true, &mut rng);
    let x = DenseMatrix::from_fn(256, 8, |r, col| ((r * 8 + col) as f64 * 0.371).sin());
    let hood = Neighborhood::AllExceptSelf;
    c.bench_function("sage_forward_8_to_256", |b| {
        b.iter(|| {
            sage_forward(
                &params,
                black_box(&x),
                SageCtx { neighborhood: &hood, edge_weights: None },
            )
            .unwrap()
        })
    });
}

fn interpolation(c: &mut Criterion) {
    // A 16×16 station grid over the query bounding box, five channels with
    // distinct affine fields — the same shape of work `build_samples` does
    // per record and year.
    let mut points = Vec::new();
    for i in 0..16 {
        for j in 0..16 {
            points.push((66.8 + 0.06 * i as f64, -48.2 + 0.08 * j as f64));
        }
    }
    let values: Vec<Vec<f64>> = points
        .iter()
        .map(|&(la, lo)| (0..5).map(|k| la * (k + 1) as f64 + lo * 0.5 - k as f64).collect())
        .collect();
    let (lat, lon) = spread_points(256);
    let queries = TraceCoordinates::new(lat, lon).unwrap();
    c.bench_function("delaunay_interpolate_256_queries", |b| {
        b.iter(|| delaunay_interpolate(black_box(&points), &values, &queries).unwrap())
    });
}

/// A default-width SAGE model plus one production-scale sample.
fn model_fixture() -> (Model, TemporalSample) {
    let cfg = SynthConfig { seed: 7, n_records: 8, ..SynthConfig::default() };
    let (records, mar) = synth_generate(&cfg).unwrap();
    let model_cfg = ModelConfig { feature_mask: FeatureMask::all(), ..ModelConfig::default() };
    let mut samples = build_samples(
        &records,
        mar.as_ref(),
        model_cfg.feature_mask,
        model_cfg.edge_mode,
        model_cfg.edge_cap,
    )
    .unwrap();
    let sample = samples.swap_remove(0);
    let mut model = Model::init(model_cfg, 9).unwrap();
    model.set_norm(NormStats::compute(&samples).unwrap()).unwrap();
    (model, sample)
}

fn model_passes(c: &mut Criterion) {
    let mut group = c.benchmark_group("model");
    group.sample_size(10);

    let (mut model, sample) = model_fixture();
    let mut rng = RngState::new(0);
    group.bench_function("forward_sage_256", |b| {
        b.iter(|| model.forward(black_box(&sample.inputs), false, &mut rng).unwrap())
    });

    // One full optimizer step: cached forward, loss gradient, backward,
    // Adam. Parameter values drift across iterations (that's real descent);
    // the per-step cost is value-independent.
    let norm = model.norm.clone().unwrap();
    let target = norm.normalize_targets(&sample.targets).unwrap();
    let mut adam = AdamState::new(&mut model, 1e-3, 1e-4, false);
    let mut dropout_rng = RngState::with_stream(5, stream::DROPOUT);
    group.bench_function("train_step_sage_256", |b| {
        b.iter(|| {
            let (pred, cache) =
                model.forward_cached(&sample.inputs, true, &mut dropout_rng).unwrap();
            let (_, grad) = mse_loss_and_grad(&pred, &target).unwrap();
            model.backward(&cache, &grad).unwrap();
            adam.step(&mut model).unwrap();
        })
    });
    group.finish();
}

criterion_group!(benches, edge_weights, sage_layer, interpolation, model_passes);
criterion_main!(benches);
