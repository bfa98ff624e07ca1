//! Quantisation against quadrature on the reference workload, plus the cost
//! of the state construction alone.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mixvix::calibration::ModelKind;
use mixvix::models::ModelParams;
use mixvix::oracle::{
    reference_one_factor, reference_two_factor, QuadratureSpec, Workload, REFERENCE_OPTION_MATURITY,
};
use mixvix::pricing::QuantisedSlice;
use mixvix::quantiser::{default_cache_dir, GridCache};

fn reference(kind: ModelKind) -> ModelParams {
    match kind {
        ModelKind::OneFactor => ModelParams::OneFactor(reference_one_factor()),
        ModelKind::TwoFactor => ModelParams::TwoFactor(reference_two_factor()),
    }
}

fn pricing(c: &mut Criterion) {
    let cache = GridCache::new(default_cache_dir());
    for kind in [ModelKind::OneFactor, ModelKind::TwoFactor] {
        let grid = cache
            .gaussian(kind.factors(), kind.grid_size(), 42)
            .unwrap();
        let workload = Workload::reference(reference(kind)).unwrap();
        let items = workload.timed_items();
        let spec = QuadratureSpec::default();
        let mut group = c.benchmark_group(kind.label());
        group.sample_size(10);
        group.bench_function("quantisation", |b| {
            b.iter(|| workload.quantised_prices(&grid, black_box(&items)).unwrap())
        });
        group.bench_function("quadrature", |b| {
            b.iter(|| {
                workload
                    .quadrature_prices(black_box(&items), &spec)
                    .unwrap()
            })
        });
        group.bench_function("states", |b| {
            b.iter(|| {
                let t = black_box(REFERENCE_OPTION_MATURITY);
                QuantisedSlice::new(&workload.params, &grid, t)
                    .unwrap()
                    .states(&workload.params, 0.03)
                    .unwrap()
            })
        });
        group.finish();
    }
}

criterion_group!(benches, pricing);
criterion_main!(benches);
