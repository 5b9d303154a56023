use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use opetope_forge::batanin::{check_operad, generate_k, terminal_operad, KBounds};
use opetope_forge::finbase::FinSet;
use opetope_forge::monadkit::{check_monad_laws_with, MonadInstance};
use opetope_forge::multicat::{check_multicategory_with, terminal_multicategory};
use opetope_forge::opetopia::{check_pd_category, opetopes};
use opetope_forge::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn monad_laws(c: &mut Criterion) {
    let mut g = c.benchmark_group("monad_laws");
    let x = FinSet::numbered("x", 3);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("bd_tree", name), |b| {
            b.iter(|| check_monad_laws_with(exec, MonadInstance::BDTree, black_box(&x), 4))
        });
    }
    g.finish();
}

fn pd_categories(c: &mut Criterion) {
    let mut g = c.benchmark_group("pd_category");
    g.sample_size(10);
    let deltas = opetopes(2, 5);
    let trees = opetopes(3, 4);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("pd_1", name), |b| b.iter(|| check_pd_category(exec, 1, black_box(&deltas), false)));
        g.bench_function(BenchmarkId::new("pd_2", name), |b| b.iter(|| check_pd_category(exec, 2, black_box(&trees), false)));
    }
    g.finish();
}

fn multicategories(c: &mut Criterion) {
    let mut g = c.benchmark_group("multicategory");
    let t = terminal_multicategory(MonadInstance::FreeMonoid, 4);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("terminal_plain_4", name), |b| b.iter(|| check_multicategory_with(exec, black_box(&t))));
    }
    g.finish();
}

fn operads(c: &mut Criterion) {
    let mut g = c.benchmark_group("batanin_operad");
    g.sample_size(10);
    let tr = terminal_operad(2, 3);
    let k = generate_k(&KBounds::new(1, 3, 1)).expect("fragment");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("terminal_2_3", name), |b| b.iter(|| check_operad(exec, black_box(&tr))));
        g.bench_function(BenchmarkId::new("k_1_3_1", name), |b| b.iter(|| check_operad(exec, black_box(&k))));
    }
    g.finish();
}

criterion_group!(benches, monad_laws, pd_categories, multicategories, operads);
criterion_main!(benches);
