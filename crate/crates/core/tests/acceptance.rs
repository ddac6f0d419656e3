//! One PASS/FAIL line per acceptance criterion.
//!
//! Exits 0 after printing every line; set `LAPDET_ACCEPTANCE_STRICT=1` to exit 1 when any
//! criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use lapdet::asymptotics::{
    compare, fit, sweep, FitOptions, FitReport, Tolerances, CONTINUUM_NORMALIZATION, DEFAULT_GRID,
};
use lapdet::constants::{
    admissible_corner_angles, c_corner, continuum_i, corner_assembly_check, lattice_constant_a,
    ContinuumModel,
};
use lapdet::continuum::torus_zeta_det;
use lapdet::keyformula::{evaluate_report, KeyFormulaParams};
use lapdet::lattice::{normalized_builtin, BuiltinLattice, CellKind, LatticeSpec};
use lapdet::modeldomains::{build_model, i_integral, IntegralOptions, ModelKind, Reference};
use lapdet::operator::{assemble, covariant_constants, gauge_transform};
use lapdet::special::{bessel_i_scaled_seq, catalan};
use lapdet::spectral::{eigensolve, logdet_star, Backend};
use lapdet::surface::{builtin, discretize, Bc, SurfaceSpec};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

const ODD_GRID: [usize; 7] = [9, 13, 17, 25, 33, 49, 65];

fn sq() -> LatticeSpec {
    normalized_builtin(BuiltinLattice::Square)
}

fn scalar(z: f64) -> DMatrix<C64> {
    DMatrix::from_element(1, 1, C64::new(z, 0.0))
}

fn surface(name: &str) -> SurfaceSpec {
    builtin::by_name(name).unwrap_or_else(|| panic!("builtin {name}"))
}

fn fitted(spec: &SurfaceSpec, grid: &[usize], opts: &FitOptions) -> Result<FitReport, String> {
    let lat = sq();
    let recs = sweep(spec, &lat, grid, Backend::Auto, None).map_err(|e| e.to_string())?;
    fit(&recs, spec, &lat, opts).map_err(|e| e.to_string())
}

fn near(label: &str, got: f64, want: f64, tol: f64) -> (bool, String) {
    let ok = (got - want).abs() <= tol;
    (ok, format!("{label} {got:.6} vs {want:.6} (±{tol})"))
}

fn all(parts: Vec<(bool, String)>) -> (bool, String) {
    let ok = parts.iter().all(|p| p.0);
    (
        ok,
        parts
            .into_iter()
            .map(|p| p.1)
            .collect::<Vec<_>>()
            .join("; "),
    )
}

fn torus_oracle() -> Outcome {
    let lat = sq();
    let mut worst: f64 = 0.0;
    for n in [2usize, 4, 8, 16, 32] {
        let ds = discretize(&builtin::torus(), &lat, n).map_err(|e| e.to_string())?;
        let got = logdet_star(&assemble(&ds).map_err(|e| e.to_string())?, Backend::Auto)
            .map_err(|e| e.to_string())?;
        let c = |j: usize| (2.0 * PI * j as f64 / n as f64).cos();
        let mut want = 0.0;
        for j in 0..n {
            for k in 0..n {
                if (j, k) != (0, 0) {
                    want += (2.0 - c(j) - c(k)).ln();
                }
            }
        }
        worst = worst.max((got - want).abs());
    }
    Ok((worst < 1e-9, format!("max |Δ| = {worst:.2e} over N=2..32")))
}

fn key_formula() -> Outcome {
    let lat = sq();
    let mut parts = Vec::new();
    for (name, budget) in [("torus", 1e-6), ("dsquare", 1e-3), ("pillowcase", 1e-3)] {
        let ds = discretize(&surface(name), &lat, 8).map_err(|e| e.to_string())?;
        let s = eigensolve(&assemble(&ds).map_err(|e| e.to_string())?, true)
            .map_err(|e| e.to_string())?;
        let rep =
            evaluate_report(&ds, &s, &KeyFormulaParams::default()).map_err(|e| e.to_string())?;
        parts.push((
            rep.residual.abs() < budget,
            format!("{name} residual {:.2e} (<{budget})", rep.residual.abs()),
        ));
    }
    Ok(all(parts))
}

fn closed_surfaces() -> Outcome {
    let opts = FitOptions::default();
    let t = fitted(&surface("torus"), &DEFAULT_GRID, &opts)?;
    let p = fitted(&surface("pillowcase"), &DEFAULT_GRID, &opts)?;
    Ok(all(vec![
        near("torus C", t.c, -2.0, 0.05),
        near("pillowcase C", p.c, -1.0, 0.05),
    ]))
}

fn boundary() -> Outcome {
    let opts = FitOptions::default();
    let d = fitted(&surface("dsquare"), &DEFAULT_GRID, &opts)?;
    let n = fitted(&surface("nsquare"), &DEFAULT_GRID, &opts)?;
    let m = fitted(&surface("mixed_square"), &DEFAULT_GRID, &opts)?;
    let mut parts = vec![
        near("Dirichlet C", d.c, 0.5, 0.05),
        near("Neumann C", n.c, 0.5, 0.05),
        near("mixed C", m.c, -0.5, 0.05),
    ];
    // not part of the verdict: the Neumann value including the constant-mode term
    let companion = near("Neumann C with kernel term", n.c, 0.5 - 2.0, 0.05);
    parts.push((true, format!("[info] {}", companion.1)));
    Ok(all(parts))
}

fn puncture() -> Outcome {
    let opts = FitOptions::default();
    let odd = fitted(&builtin::punctured_torus(scalar(-1.0)), &ODD_GRID, &opts)?;
    let id = fitted(&builtin::punctured_torus(scalar(1.0)), &ODD_GRID, &opts)?;
    let mut parts = vec![
        near("M=-1 C", odd.c, -0.25, 0.05),
        near("M=Id C", id.c, -2.0, 0.05),
    ];
    let corrected = FitOptions {
        corrections: 2,
        ..FitOptions::default()
    };
    let twice = fitted(
        &builtin::twice_punctured_torus(scalar(-1.0)),
        &ODD_GRID,
        &corrected,
    )?;
    let info = near("two punctures M=-1, 1/N corrections", twice.c, -0.5, 0.05);
    parts.push((true, format!("[info] {}", info.1)));
    Ok(all(parts))
}

fn local_constants() -> Outcome {
    let lat = sq();
    let (n, r) = (16, 30);
    let cases = [
        (
            "HalfPlane(D)",
            ModelKind::HalfPlane(Bc::Dirichlet),
            ContinuumModel::HalfPlane(Bc::Dirichlet),
            PI,
        ),
        (
            "HalfPlane(N)",
            ModelKind::HalfPlane(Bc::Neumann),
            ContinuumModel::HalfPlane(Bc::Neumann),
            PI,
        ),
        (
            "Cone(pi)",
            ModelKind::cone(PI, CellKind::Quadrangulation).map_err(|e| e.to_string())?,
            ContinuumModel::Cone(PI),
            PI,
        ),
        (
            "Cone(3pi/2)",
            ModelKind::cone(1.5 * PI, CellKind::Quadrangulation).map_err(|e| e.to_string())?,
            ContinuumModel::Cone(1.5 * PI),
            1.5 * PI,
        ),
    ];
    let mut parts = Vec::new();
    for (label, kind, cm, alpha) in cases {
        let m = build_model(&kind, &lat, n, r).map_err(|e| e.to_string())?;
        let x = m.basepoint(1.0);
        let rho = m.feature_distance(x);
        let ii = i_integral(&m, x, Reference::Plane, &IntegralOptions::for_angle(alpha))
            .map_err(|e| e.to_string())?;
        let scaled = ii.value * rho * rho * (n as f64 / lat.delta0()).powi(2);
        parts.push(near(label, scaled, continuum_i(&cm), 2e-3));
    }
    Ok(all(parts))
}

fn lattice_constant() -> Outcome {
    let lat = sq();
    let a = lattice_constant_a(&lat).map_err(|e| e.to_string())?;
    let t = fitted(&surface("torus"), &DEFAULT_GRID, &FitOptions::default())?;
    let closed = 4.0 * catalan() / PI - 2f64.ln();
    Ok(all(vec![
        near("A fit", t.a_fit, a, 1e-3),
        (
            (a - closed).abs() < 1e-6,
            format!("A {a:.12} vs 4G/π − log 2 {closed:.12}"),
        ),
    ]))
}

fn corners() -> Outcome {
    let mut count = 0;
    for cell in [CellKind::Quadrangulation, CellKind::Triangulation] {
        for alpha in admissible_corner_angles(cell) {
            for (b, bh) in [
                (Bc::Dirichlet, Bc::Dirichlet),
                (Bc::Neumann, Bc::Neumann),
                (Bc::Dirichlet, Bc::Neumann),
            ] {
                let (_, assembled) = corner_assembly_check(alpha, b, bh)
                    .map_err(|e| format!("α={alpha} {b:?}{bh:?}: {e}"))?;
                let closed = c_corner(alpha, b, bh);
                if (closed - assembled).abs() > 1e-12 {
                    return Ok((
                        false,
                        format!("α={alpha} {b:?}{bh:?}: {closed} vs {assembled}"),
                    ));
                }
                count += 1;
            }
        }
    }
    Ok((true, format!("{count} (angle, bc) pairs agree")))
}

fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let m = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    m.qr().q()
}

fn properties() -> Outcome {
    let lat = sq();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parts = Vec::new();

    // gauge invariance on a rank-2 punctured torus with non-commuting data
    let (c, s) = (0.6f64, 0.8f64);
    let rot = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0),
            C64::new(0.0, -s),
            C64::new(s, 0.0),
            C64::new(0.0, c),
        ],
    );
    let ds = discretize(&builtin::punctured_torus(rot), &lat, 5).map_err(|e| e.to_string())?;
    let l = assemble(&ds).map_err(|e| e.to_string())?;
    let g: Vec<_> = (0..l.vertex_count)
        .map(|_| random_unitary(2, &mut rng))
        .collect();
    let lg = gauge_transform(&l, &g).map_err(|e| e.to_string())?;
    let (a, b) = (
        eigensolve(&l, false).map_err(|e| e.to_string())?,
        eigensolve(&lg, false).map_err(|e| e.to_string())?,
    );
    let gauge = a
        .eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    parts.push((gauge < 1e-10, format!("gauge {gauge:.1e}")));

    // heat trace against the spectral sum, plus the torus image sum of Bessel products
    let mut theta_err: f64 = 0.0;
    for name in ["torus", "pillowcase", "mixed_square"] {
        let ds = discretize(&surface(name), &lat, 6).map_err(|e| e.to_string())?;
        let s = eigensolve(&assemble(&ds).map_err(|e| e.to_string())?, true)
            .map_err(|e| e.to_string())?;
        for t in [0.1, 1.0, 10.0] {
            let trace: f64 = (0..ds.vertices.len())
                .map(|x| s.heat_diag(x, t).unwrap().trace().re)
                .sum();
            theta_err = theta_err.max((trace - s.theta(t)).abs());
            if name == "torus" {
                let n = 6usize;
                let i = bessel_i_scaled_seq(t, 60);
                let per_axis: f64 = i[0] + 2.0 * (1..=60 / n).map(|k| i[k * n]).sum::<f64>();
                theta_err =
                    theta_err.max((s.theta(t) - (n * n) as f64 * per_axis * per_axis).abs());
            }
        }
    }
    parts.push((theta_err < 1e-10, format!("theta {theta_err:.1e}")));

    // half-plane truncations are folded plane truncations
    let plane = build_model(&ModelKind::Plane, &lat, 2, 2).map_err(|e| e.to_string())?;
    let e = plane.operator.to_dmatrix().map(|z| z.re).symmetric_eigen();
    let mut refl: f64 = 0.0;
    for bc in [Bc::Dirichlet, Bc::Neumann] {
        let half = build_model(&ModelKind::HalfPlane(bc), &lat, 2, 2).map_err(|e| e.to_string())?;
        let hs = eigensolve(&half.operator, true).map_err(|e| e.to_string())?;
        for t in [0.3, 2.0, 9.0] {
            let k = &e.eigenvectors
                * DMatrix::from_diagonal(&e.eigenvalues.map(|l| (-l * t).exp()))
                * e.eigenvectors.transpose();
            for v in 0..half.surface.vertices.len() {
                let d = half.developed(v);
                let x = plane
                    .vertex_at_developed(d)
                    .ok_or("vertex outside plane truncation")?;
                let mut want = k[(x, x)];
                if d[1] != 0 {
                    let xm = plane
                        .vertex_at_developed([d[0], -d[1]])
                        .ok_or("mirror outside plane truncation")?;
                    want += bc.sign() * k[(x, xm)];
                }
                refl = refl
                    .max((hs.heat_diag(v, t).map_err(|e| e.to_string())?[(0, 0)].re - want).abs());
            }
        }
    }
    parts.push((refl < 1e-10, format!("reflection {refl:.1e}")));

    // kernel dimension and positivity on the acceptance surfaces
    let mut surfaces: Vec<(String, SurfaceSpec, usize)> =
        ["torus", "pillowcase", "dsquare", "nsquare", "mixed_square"]
            .iter()
            .map(|n| (n.to_string(), surface(n), 8))
            .collect();
    surfaces.push((
        "punctured M=-1".into(),
        builtin::punctured_torus(scalar(-1.0)),
        9,
    ));
    surfaces.push((
        "punctured M=Id".into(),
        builtin::punctured_torus(scalar(1.0)),
        9,
    ));
    surfaces.push((
        "two punctures M=-1".into(),
        builtin::twice_punctured_torus(scalar(-1.0)),
        9,
    ));
    let mut mismatched = Vec::new();
    let mut min_form = f64::INFINITY;
    for (name, spec, n) in &surfaces {
        let ds = discretize(spec, &lat, *n).map_err(|e| e.to_string())?;
        let l = assemble(&ds).map_err(|e| e.to_string())?;
        let k = eigensolve(&l, false).map_err(|e| e.to_string())?.kernel_dim;
        if covariant_constants(&ds, &l).len() != k {
            mismatched.push(name.clone());
        }
        for _ in 0..20 {
            let f: Vec<C64> = (0..l.dimension())
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let norm: f64 = f.iter().map(|z| z.norm_sqr()).sum();
            min_form = min_form.min(l.quadratic_form(&f) / norm);
        }
    }
    parts.push((
        mismatched.is_empty(),
        format!("kernel count mismatches {mismatched:?}"),
    ));
    parts.push((
        min_form > 0.0,
        format!("min Rayleigh quotient {min_form:.3e}"),
    ));
    Ok(all(parts))
}

fn continuum_d() -> Outcome {
    let lat = sq();
    let spec = surface("torus");
    let f = fitted(&spec, &DEFAULT_GRID, &FitOptions::default())?;
    let v = compare(&f, &spec, &lat, &Tolerances::default()).map_err(|e| e.to_string())?;
    let want = torus_zeta_det(0.0, 1.0, 1.0, CONTINUUM_NORMALIZATION).logdet;
    let d = v
        .checks
        .iter()
        .find(|c| c.name == "D")
        .ok_or("no D check")?;
    Ok(near("D", d.fitted, want, 0.05))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("torus exact spectrum", torus_oracle),
        ("key formula identity", key_formula),
        ("log coefficient, closed surfaces", closed_surfaces),
        ("log coefficient, boundary", boundary),
        ("puncture", puncture),
        ("local constants", local_constants),
        ("lattice constant A", lattice_constant),
        ("corner assembly", corners),
        ("property suite", properties),
        ("continuum D", continuum_d),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".into()),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 && std::env::var_os("LAPDET_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
