use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lapdet::continuum::{rectangle_zeta_det, torus_zeta_det};
use lapdet::lattice::{normalized_builtin, BuiltinLattice};
use lapdet::modeldomains::PlaneKernel;
use lapdet::operator::assemble;
use lapdet::spectral::{logdet_star, Backend};
use lapdet::surface::{builtin, discretize, Bc};

fn logdet(c: &mut Criterion) {
    let lat = normalized_builtin(BuiltinLattice::Square);
    let mut g = c.benchmark_group("logdet_star");
    g.sample_size(10);
    for n in [16usize, 32] {
        let l = assemble(&discretize(&builtin::pillowcase(), &lat, n).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("dense", n), &l, |b, l| {
            b.iter(|| logdet_star(l, Backend::Dense).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sparse", n), &l, |b, l| {
            b.iter(|| logdet_star(l, Backend::Sparse).unwrap())
        });
    }
    let l = assemble(&discretize(&builtin::pillowcase(), &lat, 96).unwrap()).unwrap();
    g.bench_function("sparse/96", |b| {
        b.iter(|| logdet_star(&l, Backend::Sparse).unwrap())
    });
    g.finish();
}

fn continuum(c: &mut Criterion) {
    c.bench_function("torus_zeta_det", |b| {
        b.iter(|| torus_zeta_det(black_box(0.3), black_box(1.2), 1.0, 0.5))
    });
    c.bench_function("rectangle_zeta_det", |b| {
        b.iter(|| rectangle_zeta_det(black_box(1.0), black_box(2.0), Bc::Neumann, 0.5))
    });
}

fn plane_kernel(c: &mut Criterion) {
    for (name, which) in [
        ("square", BuiltinLattice::Square),
        ("hexagonal", BuiltinLattice::Hexagonal),
    ] {
        let k = PlaneKernel::new(&normalized_builtin(which), 0).unwrap();
        c.bench_function(&format!("plane_kernel/{name}"), |b| {
            b.iter(|| k.eval(black_box(37.5)))
        });
    }
}

criterion_group!(benches, logdet, continuum, plane_kernel);
criterion_main!(benches);
