use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lowrisk::calibrate::{build_grid, multiplier_maxima};
use lowrisk::conformal::{bh_select, conformal_pvalues, conformity_scores};
use lowrisk::models::fit_cox;
use lowrisk::CoxOptions;
use lowrisk_bench::{dataset, Calibration, T0};

fn cox_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("cox_fit");
    group.sample_size(10);
    for n in [1000, 5000] {
        let data = dataset(n, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| fit_cox(black_box(d), CoxOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn pvalues(c: &mut Criterion) {
    let fx = Calibration::new(2000, 1000);
    let test = dataset(1000, 3);
    let s_cal = fx.s_model.curves_for(&fx.cal).unwrap();
    let s_test = fx.s_model.curves_for(&test).unwrap();
    let (cs, ts) = conformity_scores(&s_cal, &fx.cal, &s_test, T0, 0.0, true).unwrap();
    c.bench_function("conformal_pvalues_1000x1000", |b| {
        b.iter(|| conformal_pvalues(black_box(&cs), &fx.cal, &fx.weights, black_box(&ts), T0).unwrap())
    });
    let p = conformal_pvalues(&cs, &fx.cal, &fx.weights, &ts, T0).unwrap().values;
    c.bench_function("bh_select_1000", |b| b.iter(|| bh_select(black_box(&p), 0.1)));
}

fn multiplier_band(c: &mut Criterion) {
    let fx = Calibration::new(2000, 1000);
    let profile = fx.profile();
    let grid = build_grid(&fx.scores, 200).unwrap();
    let mut group = c.benchmark_group("multiplier_band");
    group.sample_size(10);
    group.bench_function("n1000_k200_b1000", |b| {
        b.iter(|| multiplier_maxima(black_box(&profile), grid.lambdas(), 1000, 11))
    });
    group.finish();
}

criterion_group!(benches, cox_fit, pvalues, multiplier_band);
criterion_main!(benches);
