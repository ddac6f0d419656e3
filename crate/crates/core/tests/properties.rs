use std::f64::consts::PI;

use lapdet::asymptotics::{fit, FitOptions, SweepRecord};
use lapdet::continuum::{rectangle_zeta_det, torus_zeta_det};
use lapdet::lattice::{normalized_builtin, BuiltinLattice};
use lapdet::operator::{assemble, gauge_transform};
use lapdet::spectral::{eigensolve, logdet_star, Backend};
use lapdet::surface::{builtin, discretize, Bc};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn phase(theta: f64) -> DMatrix<C64> {
    DMatrix::from_element(1, 1, C64::from_polar(1.0, theta))
}

fn unitary2(a: f64, b: f64, c: f64) -> DMatrix<C64> {
    let (s, co) = a.sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::from_polar(co, b),
            C64::from_polar(-s, c),
            C64::from_polar(s, -c),
            C64::from_polar(co, -b),
        ],
    )
}

fn records(ns: &[usize], f: impl Fn(f64) -> f64) -> Vec<SweepRecord> {
    ns.iter()
        .map(|&n| SweepRecord {
            n,
            logdet: f(n as f64),
            vertices: n * n,
            dirichlet_length: 0.0,
            neumann_length: 0.0,
            volume_weighted: (n * n) as f64,
            k: 1,
            wall_seconds: 0.0,
            cache_key: String::new(),
            cached: false,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_is_gauge_invariant(theta in 0.0..2.0 * PI, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let lat = normalized_builtin(BuiltinLattice::Square);
        let ds = discretize(&builtin::punctured_torus(phase(theta)), &lat, 5).unwrap();
        let l = assemble(&ds).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<_> = (0..l.vertex_count).map(|_| phase(rng.gen_range(0.0..2.0 * PI))).collect();
        let a = eigensolve(&l, false).unwrap();
        let b = eigensolve(&gauge_transform(&l, &g).unwrap(), false).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_two_kernel_tracks_holonomy(a in 0.0..PI, b in 0.0..PI, c in 0.0..PI) {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let m = unitary2(a, b, c);
        let fixed = {
            // dimension of the fixed space of M
            let e = (m.clone() - DMatrix::identity(2, 2)).svd(false, false);
            e.singular_values.iter().filter(|s| **s < 1e-9).count()
        };
        let ds = discretize(&builtin::punctured_torus(m), &lat, 5).unwrap();
        let l = assemble(&ds).unwrap();
        prop_assert_eq!(eigensolve(&l, false).unwrap().kernel_dim, fixed);
        prop_assert!(l.hermitian_defect() < 1e-12);
    }

    #[test]
    fn quadratic_form_is_nonnegative(re in prop::collection::vec(-1.0..1.0f64, 64), im in prop::collection::vec(-1.0..1.0f64, 64)) {
        let lat = normalized_builtin(BuiltinLattice::Square);
        for name in ["torus", "dsquare", "mixed_square"] {
            let l = assemble(&discretize(&builtin::by_name(name).unwrap(), &lat, 8).unwrap()).unwrap();
            let f: Vec<C64> = (0..l.dimension()).map(|i| C64::new(re[i % 64], im[(i * 7) % 64])).collect();
            prop_assert!(l.quadratic_form(&f) >= -1e-12);
        }
    }

    #[test]
    fn theta_is_decreasing_and_counts_dimension(t in 0.01..20.0f64) {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let l = assemble(&discretize(&builtin::pillowcase(), &lat, 4).unwrap()).unwrap();
        let s = eigensolve(&l, false).unwrap();
        prop_assert!((s.theta(0.0) - l.dimension() as f64).abs() < 1e-12);
        prop_assert!(s.theta(t) < s.theta(t * 0.5));
        prop_assert!(s.theta(t) >= s.kernel_dim as f64 - 1e-12);
    }

    #[test]
    fn torus_determinant_is_modular(x in -0.5..0.5f64, y in 0.6..2.5f64, scale in 0.5..3.0f64) {
        let base = torus_zeta_det(x, y, scale, 1.0).logdet;
        let shifted = torus_zeta_det(x + 1.0, y, scale, 1.0).logdet;
        let r2 = x * x + y * y;
        let inverted = torus_zeta_det(-x / r2, y / r2, scale, 1.0).logdet;
        prop_assert!((base - shifted).abs() < 1e-9);
        prop_assert!((base - inverted).abs() < 1e-9);
    }

    #[test]
    fn rectangle_dirichlet_is_symmetric(a in 0.3..3.0f64, b in 0.3..3.0f64) {
        let ab = rectangle_zeta_det(a, b, Bc::Dirichlet, 1.0);
        let ba = rectangle_zeta_det(b, a, Bc::Dirichlet, 1.0);
        prop_assert!((ab.logdet - ba.logdet).abs() < 1e-9);
        prop_assert!(ab.route_gap < 1e-9);
    }

    #[test]
    fn fit_recovers_planted_constants(a in -1.0..1.0f64, c in -3.0..3.0f64, d in -2.0..2.0f64) {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let recs = records(&[8, 12, 16, 24, 32, 48, 64], |n| a * n * n - c * n.ln() + d);
        let f = fit(&recs, &builtin::torus(), &lat, &FitOptions::default()).unwrap();
        prop_assert!((f.c - c).abs() < 1e-8);
        prop_assert!((f.a2 - a).abs() < 1e-10);
        prop_assert!((f.a0 - d).abs() < 1e-7);
    }
}

#[test]
fn dense_and_sparse_backends_agree() {
    let lat = normalized_builtin(BuiltinLattice::Square);
    for name in ["torus", "pillowcase", "dsquare", "nsquare", "mixed_square"] {
        let l = assemble(&discretize(&builtin::by_name(name).unwrap(), &lat, 12).unwrap()).unwrap();
        let dense = logdet_star(&l, Backend::Dense).unwrap();
        let sparse = logdet_star(&l, Backend::Sparse).unwrap();
        assert!(
            (dense - sparse).abs() < 1e-9 * dense.abs().max(1.0),
            "{name}: {dense} vs {sparse}"
        );
    }
}
