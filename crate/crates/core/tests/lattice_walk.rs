use lapdet::lattice::{normalized_builtin, simulate_covariance, BuiltinLattice};

// Displacement covariance after time t is t·Σ w e eᵀ.
#[test]
fn simulated_covariance_matches_second_moments() {
    let t = 4.0;
    for (which, lat) in [
        ("square", BuiltinLattice::Square),
        ("triangular", BuiltinLattice::Triangular),
    ] {
        let spec = normalized_builtin(lat);
        let (cov, err) = simulate_covariance(&spec, 0, t, 40_000, 11);
        let moments = spec.covariances()[0];
        for i in 0..2 {
            for j in 0..2 {
                let want = t * moments[i][j];
                assert!(
                    (cov[i][j] - want).abs() < 5.0 * err[i][j] + 1e-12,
                    "{which} [{i}][{j}]: {} ± {}",
                    cov[i][j],
                    err[i][j]
                );
            }
        }
    }
}

#[test]
fn simulation_is_reproducible() {
    let spec = normalized_builtin(BuiltinLattice::Square);
    assert_eq!(
        simulate_covariance(&spec, 0, 2.0, 500, 3).0,
        simulate_covariance(&spec, 0, 2.0, 500, 3).0
    );
}
