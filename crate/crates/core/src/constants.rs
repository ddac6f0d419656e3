//! Closed-form singularity constants, the lattice volume constant and the predicted log coefficient.

use std::f64::consts::PI;

use nalgebra::Schur;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::modeldomains::PlaneKernel;
use crate::special::{gauss_legendre, inv_sin2_reg, re_dilog_unit};
use crate::surface::{Bc, CMat, Singularity, SingularityKind};

/// C_p of a cone of total angle α.
pub fn c_cone(alpha: f64) -> f64 {
    alpha / (12.0 * PI) - PI / (3.0 * alpha)
}

/// C_p of a boundary corner of angle α with conditions b, b̂ on its two sides.
pub fn c_corner(alpha: f64, b: Bc, bh: Bc) -> f64 {
    if b == bh {
        alpha / (12.0 * PI) - PI / (12.0 * alpha)
    } else {
        alpha / (12.0 * PI) + PI / (24.0 * alpha)
    }
}

/// Phases θ ∈ [0, 2π) of the eigenvalues of a unitary matrix.
pub fn eigenphases(m: &CMat) -> Vec<f64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)].arg().rem_euclid(2.0 * PI)];
    }
    let ev = Schur::new(m.clone())
        .eigenvalues()
        .expect("complex Schur form is triangular");
    ev.iter().map(|z| z.arg().rem_euclid(2.0 * PI)).collect()
}

/// Σ_{k≥1} Re Tr M^k / k², summed through the eigenphase dilogarithm.
fn trace_dilog(m: &CMat) -> f64 {
    eigenphases(m).into_iter().map(re_dilog_unit).sum()
}

/// C_p of a puncture with monodromy M: π⁻² Σ (1 − Re Tr M^k / d)/k².
pub fn c_puncture(m: &CMat) -> f64 {
    let d = m.nrows() as f64;
    (PI * PI / 6.0 - trace_dilog(m) / d) / (PI * PI)
}

/// Same series summed term by term up to `terms`, for cross-checks.
pub fn c_puncture_series(m: &CMat, terms: usize) -> f64 {
    let d = m.nrows() as f64;
    let mut p = CMat::identity(m.nrows(), m.nrows());
    let mut s = 0.0;
    for k in 1..=terms {
        p = &p * m;
        let kk = (k * k) as f64;
        s += (1.0 - p.trace().re / d) / kk;
    }
    s / (PI * PI)
}

/// Σ_{k∈ℤ} σ^k/(x+k)² − 1/x², for σ = ±1 and |x| < 1.
fn image_sum_reg(sigma: f64, x: f64) -> f64 {
    let u = PI * x;
    let r = inv_sin2_reg(u);
    if sigma > 0.0 {
        PI * PI * r
    } else {
        // cos u / sin² u = 1/sin² u − 1/(2 cos²(u/2))
        PI * PI * (r - 0.5 / (u / 2.0).cos().powi(2))
    }
}

/// Σ_{k≠0} σ^k/k².
fn zeta_sigma(sigma: f64) -> f64 {
    if sigma > 0.0 {
        PI * PI / 3.0
    } else {
        -PI * PI / 6.0
    }
}

fn integrate(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(48);
    let panels = 8;
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(lo + 0.5 * h * (xi + 1.0)) * 0.5 * h;
        }
    }
    s
}

/// ∫₀^{upper} I_{H}^{Υ}(e^{iθ}) dθ for the corner of angle α with sign s0 on the ray at θ = 0 and
/// s1 on the other, relative to the half-plane bounded by the ray at θ = 0.
fn side_piece(alpha: f64, s0: f64, s1: f64, upper: f64) -> f64 {
    let sigma = s0 * s1;
    let rot = (zeta_sigma(sigma) / (4.0 * alpha * alpha) - 1.0 / 12.0) / PI;
    integrate(0.0, upper, |th| {
        let corner = image_sum_reg(sigma, th / alpha) / (alpha * alpha);
        let half = image_sum_reg(1.0, th / PI) / (PI * PI);
        rot + s0 / (4.0 * PI) * (corner - half)
    })
}

/// ∫ I_ℂ^{Υ}(e^{iθ}) dθ over the middle sector [π/2, α − π/2] of a reflex corner.
fn middle_piece(alpha: f64, s0: f64, s1: f64) -> f64 {
    let sigma = s0 * s1;
    let rot = (zeta_sigma(sigma) / (4.0 * alpha * alpha) - 1.0 / 12.0) / PI;
    integrate(PI / 2.0, alpha - PI / 2.0, |th| {
        let x = th / alpha;
        let full = image_sum_reg(sigma, x) + 1.0 / (x * x);
        rot + s0 / (4.0 * PI) * full / (alpha * alpha)
    })
}

/// Assembles the corner constant from the angular integrals of the local contributions and
/// compares it with `c_corner`. Returns (Ĉ, C_p).
pub fn corner_assembly_check(alpha: f64, b: Bc, bh: Bc) -> Result<(f64, f64)> {
    let (s0, s1) = (b.sign(), bh.sign());
    let ah = (alpha / 2.0).min(PI / 2.0);
    let mut hat = side_piece(alpha, s0, s1, ah) + side_piece(alpha, s1, s0, ah);
    if alpha > PI {
        hat += middle_piece(alpha, s0, s1);
    }
    // the angular integrals enter the expansion with the opposite sign of log δ
    let cot = if (ah - PI / 2.0).abs() < 1e-15 {
        0.0
    } else {
        1.0 / ah.tan()
    };
    let cp = -(hat - (s0 + s1) * cot / (4.0 * PI));
    let closed = c_corner(alpha, b, bh);
    if (cp - closed).abs() > 1e-12 {
        return Err(Error::AssemblyMismatch {
            assembled: cp,
            closed,
        });
    }
    Ok((hat, cp))
}

/// Local model whose integral I_ℂ^{Ω}(1) has a closed form.
#[derive(Clone, Debug)]
pub enum ContinuumModel {
    /// ∫ P̃(1, e^{iα}, t) dt/t on the universal cover of the punctured plane.
    UniversalCover(f64),
    Cone(f64),
    /// Basepoint i.
    HalfPlane(Bc),
    Puncture(CMat),
}

pub fn continuum_i(model: &ContinuumModel) -> f64 {
    match model {
        ContinuumModel::UniversalCover(a) => 1.0 / (PI * a * a),
        ContinuumModel::Cone(a) => PI / (3.0 * a * a) - 1.0 / (12.0 * PI),
        ContinuumModel::HalfPlane(b) => b.sign() / (4.0 * PI),
        ContinuumModel::Puncture(m) => {
            let d = m.nrows() as f64;
            (trace_dilog(m) - d * PI * PI / 6.0) / (2.0 * PI.powi(3))
        }
    }
}

/// Per-vertex volume constant A, minus the class average of ∫₀^∞ (P − e^{−w t}) dt/t − log w.
pub fn lattice_constant_a(lat: &LatticeSpec) -> Result<f64> {
    let m = lat.vertices.len();
    let mut s = 0.0;
    for c in 0..m {
        let pk = PlaneKernel::new(lat, c)?;
        let j = pk.j_total();
        if !j.is_finite() {
            return Err(Error::QuadratureFailure(format!("class {c}: J = {j}")));
        }
        s += j - pk.weight.ln();
    }
    Ok(-s / m as f64)
}

/// 4G/π − log 2, the square-lattice value of A.
pub fn square_a_closed_form() -> f64 {
    4.0 * crate::special::catalan() / PI - 2f64.ln()
}

/// C_p of one registered singularity.
pub fn singularity_constant(s: &Singularity) -> f64 {
    match s.kind {
        SingularityKind::Cone => c_cone(s.angle),
        SingularityKind::Corner => {
            let (a, b) = s.bcs.expect("corner has boundary conditions");
            c_corner(s.angle, a, b)
        }
        SingularityKind::Puncture => {
            c_puncture(s.monodromy.as_ref().expect("puncture has monodromy"))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremConstants {
    pub per_singularity: Vec<(String, f64)>,
    pub kernel_dim: usize,
    pub rank: usize,
    pub c: f64,
}

/// C = −2k − d·Σ C_p over the registry.
pub fn theorem_c(singularities: &[Singularity], k: usize, d: usize) -> TheoremConstants {
    let per: Vec<(String, f64)> = singularities
        .iter()
        .map(|s| (s.describe(), singularity_constant(s)))
        .collect();
    let sum: f64 = per.iter().map(|p| p.1).sum();
    TheoremConstants {
        c: -2.0 * k as f64 - d as f64 * sum,
        per_singularity: per,
        kernel_dim: k,
        rank: d,
    }
}

/// Angles among {π/3, π/2, 2π/3, π, 4π/3, 3π/2, 2π, 3π} that the lattice rotation divides.
pub fn admissible_corner_angles(cell: crate::lattice::CellKind) -> Vec<f64> {
    let th = cell.rotation_angle();
    [1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0, 4.0 / 3.0, 1.5, 2.0, 3.0]
        .iter()
        .map(|f| f * PI)
        .filter(|a| ((a / th).round() * th - a).abs() < 1e-12)
        .collect()
}

/// CSV table of the closed-form constants.
pub fn constants_table(cell: crate::lattice::CellKind) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("name,parameter,value\n");
    for a in admissible_corner_angles(cell) {
        let _ = writeln!(s, "cone,{:.16e},{:.16e}", a, c_cone(a));
    }
    for a in admissible_corner_angles(cell) {
        for (b, bh) in [
            (Bc::Dirichlet, Bc::Dirichlet),
            (Bc::Neumann, Bc::Neumann),
            (Bc::Dirichlet, Bc::Neumann),
        ] {
            let _ = writeln!(
                s,
                "corner,{:.16e} {}{},{:.16e}",
                a,
                b.letter(),
                bh.letter(),
                c_corner(a, b, bh)
            );
        }
    }
    let minus = CMat::from_element(1, 1, num_complex::Complex64::new(-1.0, 0.0));
    let _ = writeln!(s, "puncture,M=-1,{:.16e}", c_puncture(&minus));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        builtin_lattice, normalize_weights, normalized_builtin, BuiltinLattice, CellKind,
    };
    use num_complex::Complex64;
    use Bc::{Dirichlet as D, Neumann as N};

    #[test]
    fn closed_forms() {
        assert_eq!(c_cone(2.0 * PI), 0.0);
        assert!((c_cone(PI) + 0.25).abs() < 1e-15);
        assert!((c_cone(1.5 * PI) - (0.125 - 2.0 / 9.0)).abs() < 1e-15);
        assert!((c_corner(PI / 2.0, D, D) + 0.125).abs() < 1e-15);
        assert!(c_corner(PI, D, D).abs() < 1e-15);
        assert!((c_corner(PI, N, D) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn puncture_values() {
        let one = |z: Complex64| CMat::from_element(1, 1, z);
        assert!(c_puncture(&CMat::identity(2, 2)).abs() < 1e-15);
        assert!((c_puncture(&one(Complex64::new(-1.0, 0.0))) - 0.25).abs() < 1e-15);
        let w = one(Complex64::from_polar(1.0, 2.0 * PI / 3.0));
        assert!((c_puncture(&w) - 2.0 / 9.0).abs() < 1e-14);
        // raw series with 2/K tail bound
        assert!((c_puncture_series(&w, 200_000) - 2.0 / 9.0).abs() < 2.0 / 200_000.0 / (PI * PI));
    }

    #[test]
    fn puncture_matrix_phases() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::from_polar(1.0, 0.7),
            Complex64::from_polar(1.0, -2.1),
        ]));
        let u = CMat::from_fn(2, 2, |i, j| {
            Complex64::new(
                if i == j {
                    0.6
                } else if i < j {
                    0.8
                } else {
                    -0.8
                },
                0.0,
            )
        });
        let conj = &u * &m * u.adjoint();
        assert!((c_puncture(&conj) - c_puncture(&m)).abs() < 1e-13);
        assert!((c_puncture(&conj) - c_puncture_series(&conj, 100_000)).abs() < 3e-6);
    }

    #[test]
    fn continuum_values() {
        assert!(
            (continuum_i(&ContinuumModel::UniversalCover(2.0 * PI)) - 1.0 / (4.0 * PI.powi(3)))
                .abs()
                < 1e-16
        );
        assert!(continuum_i(&ContinuumModel::Cone(2.0 * PI)).abs() < 1e-16);
        assert!((continuum_i(&ContinuumModel::HalfPlane(D)) + 0.25 / PI).abs() < 1e-16);
        let minus = CMat::from_element(1, 1, Complex64::new(-1.0, 0.0));
        // d·C_p = −2π·I for a puncture
        assert!(
            (-2.0 * PI * continuum_i(&ContinuumModel::Puncture(minus.clone()))
                - c_puncture(&minus))
            .abs()
                < 1e-15
        );
    }

    #[test]
    fn corner_pieces_match_explicit_integrals() {
        let a = PI / 2.0;
        let cot = 1.0 / (a / 2.0).tan();
        let dd = side_piece(a, -1.0, -1.0, a / 2.0);
        assert!((dd - (PI / (24.0 * a) - a / (24.0 * PI) - cot / (4.0 * PI))).abs() < 1e-13);
        let nn = side_piece(a, 1.0, 1.0, a / 2.0);
        assert!((nn - (PI / (24.0 * a) - a / (24.0 * PI) + cot / (4.0 * PI))).abs() < 1e-13);
        // Neumann side of a mixed corner, and the Dirichlet side
        let n_side = side_piece(a, 1.0, -1.0, a / 2.0);
        assert!(
            (n_side - (-PI / (48.0 * a) - a / (24.0 * PI) - 0.25 / a + cot / (4.0 * PI))).abs()
                < 1e-13
        );
        let d_side = side_piece(a, -1.0, 1.0, a / 2.0);
        assert!(
            (d_side - (-PI / (48.0 * a) - a / (24.0 * PI) + 0.25 / a - cot / (4.0 * PI))).abs()
                < 1e-13
        );
    }

    #[test]
    fn assembly_all_angles() {
        for cell in [CellKind::Quadrangulation, CellKind::Triangulation] {
            for a in admissible_corner_angles(cell) {
                for (b, bh) in [(D, D), (N, N), (D, N), (N, D)] {
                    corner_assembly_check(a, b, bh)
                        .unwrap_or_else(|e| panic!("α={a} {b:?}{bh:?}: {e}"));
                }
            }
        }
    }

    #[test]
    fn a_square_closed_form() {
        let a = lattice_constant_a(&normalized_builtin(BuiltinLattice::Square)).unwrap();
        assert!(
            (a - square_a_closed_form()).abs() < 1e-9,
            "{a} vs {}",
            square_a_closed_form()
        );
        assert!((square_a_closed_form() - 0.473_096_435_563_329_9).abs() < 1e-15);
    }

    #[test]
    fn doubling_weights_adds_log_two() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let mut twice = lat.clone();
        for e in &mut twice.edges {
            e.weight *= 2.0;
        }
        let d = lattice_constant_a(&twice).unwrap() - lattice_constant_a(&lat).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn hexagonal_a_is_finite() {
        let lat = normalize_weights(&builtin_lattice(BuiltinLattice::Hexagonal)).unwrap();
        assert!(lattice_constant_a(&lat).unwrap().is_finite());
    }
}
