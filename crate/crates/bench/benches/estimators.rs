use criterion::{criterion_group, criterion_main, Criterion};
use hdselect_bench::{iv_design, plr_design, regression};
use hdselect_core::inference::{chs_estimate, pds_estimate, pds_select, ChsVariant};
use hdselect_core::ivhds::{iv_lasso, FirstStage};
use hdselect_core::solver::PathGrid;
use hdselect_core::tuning::{tune_and_fit, Criterion as Ic, Tuner, TunerConfig};
use hdselect_core::SeMode;

fn tuners(c: &mut Criterion) {
    let (x, y) = regression(200, 200);
    let mut group = c.benchmark_group("tuning");
    group.sample_size(10);
    let configs = [
        ("rigorous", TunerConfig::default()),
        ("bic", TunerConfig { tuner: Tuner::Ic { criterion: Ic::Bic, grid: PathGrid::default() }, ..Default::default() }),
        ("cv10", TunerConfig { tuner: Tuner::Cv { folds: 10, seed: 1, grid: PathGrid::default() }, ..Default::default() }),
    ];
    for (name, cfg) in configs {
        group.bench_function(name, |b| b.iter(|| tune_and_fit(&x, &y, &cfg).unwrap()));
    }
    group.finish();
}

fn pipelines(c: &mut Criterion) {
    let tuner = TunerConfig::default();
    let plr = plr_design(100, 200);
    let iv = iv_design(200, 50);
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(20);
    group.bench_function("pds 100x200", |b| {
        b.iter(|| {
            let sel = pds_select(&plr, &tuner).unwrap();
            pds_estimate(&plr, &sel, &SeMode::Robust).unwrap()
        })
    });
    group.bench_function("chs 100x200", |b| {
        b.iter(|| chs_estimate(&plr, ChsVariant::PostLassoOrthogonalized, &tuner, &SeMode::Robust).unwrap())
    });
    group.bench_function("ivlasso 200x50", |b| {
        b.iter(|| iv_lasso(&iv, &tuner, &SeMode::Robust, FirstStage::PostLasso).unwrap())
    });
    group.finish();
}

criterion_group!(benches, tuners, pipelines);
criterion_main!(benches);
