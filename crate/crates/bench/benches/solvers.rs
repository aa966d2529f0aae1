use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use w4_bench::{methods_for, start_for};
use w4_core::{
    builtin, run_untraced, step, udl_decompose, w_spectrum_check, Matrix, Preconditioner,
    SolverConfig, SolverState, BUILTIN_NAMES,
};

fn full_solves(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for name in BUILTIN_NAMES {
        let p = builtin(name).unwrap();
        let x0 = start_for(&p);
        for m in methods_for(&p) {
            let cfg = SolverConfig::with_defaults(m).with_max_iter(1000).unwrap();
            g.bench_with_input(BenchmarkId::new(name, m), &x0, |b, x0| {
                b.iter(|| run_untraced(&p, &cfg, black_box(x0)).unwrap())
            });
        }
    }
    g.finish();
}

fn single_steps(c: &mut Criterion) {
    let p = builtin("fproblem0").unwrap();
    let s = SolverState::at_rest(vec![0.7, -1.3]);
    let mut g = c.benchmark_group("step");
    for m in methods_for(&p) {
        let s = if m.has_momentum() {
            s.clone()
        } else {
            SolverState::first_order(s.x.clone())
        };
        let dtau = m.default_dtau();
        g.bench_function(m.as_str(), |b| {
            b.iter(|| step(&p, m, black_box(&s), dtau).unwrap())
        });
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("udl");
    for n in [2usize, 4, 8, 16] {
        // diagonally dominant, so no trailing minor vanishes
        let a = Matrix::from_row_major(
            (0..n * n)
                .map(|k| {
                    if k % (n + 1) == 0 {
                        2.0 * n as f64
                    } else {
                        ((k * 7) % 5) as f64 - 2.0
                    }
                })
                .collect(),
        )
        .unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| udl_decompose(black_box(a)).unwrap())
        });
    }
    g.finish();

    let j = Matrix::from_rows(&[[2.0, 8.0], [8.0, 1.0]]).unwrap();
    c.bench_function("w_spectrum/udl/2x2", |b| {
        b.iter(|| w_spectrum_check(black_box(&j), Preconditioner::Udl, 0.5).unwrap())
    });
}

criterion_group!(benches, full_solves, single_steps, kernels);
criterion_main!(benches);
