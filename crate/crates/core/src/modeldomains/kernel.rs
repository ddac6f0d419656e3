//! Diagonal heat kernels of truncated models and the integrals ∫ (P₂ − P₁) dt/t.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::{PlaneKernel, TruncatedModel};
use crate::error::{Error, Result};
use crate::geom;
use crate::operator::TwistedLaplacian;
use crate::special::{bessel_i_scaled_seq, log_panels, pairwise_sum};
use crate::spectral::{eigensolve, Spectrum};

/// t ↦ Tr P(x, x, t) at a fixed basepoint.
pub trait DiagKernel {
    fn eval(&self, t: f64) -> f64;
}

impl DiagKernel for PlaneKernel {
    fn eval(&self, t: f64) -> f64 {
        PlaneKernel::eval(self, t)
    }
}

/// `d` copies of the plane kernel, the reference for a rank-d bundle.
pub struct ScaledPlane<'a>(pub &'a PlaneKernel, pub f64);

impl DiagKernel for ScaledPlane<'_> {
    fn eval(&self, t: f64) -> f64 {
        self.1 * self.0.eval(t)
    }
}

/// Full eigendecomposition of a truncation; exact for the truncated graph at every t.
pub struct EigenKernel {
    pub spectrum: Spectrum,
    /// Largest macroscopic time covered by the radius certificate R ≥ 6·max(1, √t).
    pub t_max: f64,
    delta: f64,
}

impl EigenKernel {
    pub fn new(m: &TruncatedModel) -> Result<Self> {
        let spectrum = eigensolve(&m.operator, true)?;
        let r = m.radius as f64 / 6.0;
        Ok(EigenKernel {
            spectrum,
            t_max: r * r,
            delta: m.delta(),
        })
    }

    /// Tr P(x, x, t) for walk time t, refusing times beyond the certificate.
    pub fn diag(&self, x: usize, t: f64) -> Result<f64> {
        let macro_t = t * self.delta * self.delta;
        if macro_t > self.t_max * (1.0 + 1e-12) {
            return Err(Error::TruncationBudgetExceeded(format!(
                "macroscopic time {macro_t} > certified {}",
                self.t_max
            )));
        }
        Ok(self.spectrum.heat_diag(x, t)?.trace().re)
    }

    /// Escape estimate e^{−R²/2t} bounding the truncation error at macroscopic time t.
    pub fn certificate(&self, t: f64) -> f64 {
        let r = 6.0 * self.t_max.sqrt();
        let mt = t * self.delta * self.delta;
        if mt <= 0.0 {
            0.0
        } else {
            (-r * r / (2.0 * mt)).exp()
        }
    }
}

/// Chebyshev expansion of e^{−tH} at one basepoint, exact up to `max_time` as long as the
/// truncation contains the ball reached by the recurrence.
#[derive(Clone, Debug)]
pub struct ChebyshevKernel {
    pub bound: f64,
    pub moments: Vec<f64>,
}

/// Number of Chebyshev terms needed at z = t·b/2 for scaled-Bessel weights below 1e−18.
pub fn chebyshev_terms(z: f64) -> usize {
    (2.0 * 42.0 * z).sqrt().ceil() as usize + 16
}

impl ChebyshevKernel {
    /// Moments μ_j = Tr ⟨x| T_j(H̃) |x⟩ for j < `terms`, with H̃ = (2H − b)/b.
    pub fn new(op: &TwistedLaplacian, x: usize, terms: usize) -> Self {
        let b = op.gershgorin_bound().max(1e-300);
        let d = op.rank;
        let n = op.dimension();
        let zero = Complex64::new(0.0, 0.0);
        let half = terms.div_ceil(2) + 1;
        let mut mu = vec![0.0; 2 * half + 2];
        let mut hv = vec![zero; n];
        let apply = |v: &[Complex64], out: &mut Vec<Complex64>, hv: &mut Vec<Complex64>| {
            op.matvec(v, hv);
            for i in 0..n {
                out[i] = hv[i] * (2.0 / b) - v[i];
            }
        };
        let dot = |a: &[Complex64], c: &[Complex64]| -> f64 {
            pairwise_sum(
                &a.iter()
                    .zip(c)
                    .map(|(p, q)| (p.conj() * q).re)
                    .collect::<Vec<_>>(),
            )
        };
        for i in 0..d {
            let mut prev = vec![zero; n];
            prev[x * d + i] = Complex64::new(1.0, 0.0);
            let mut cur = vec![zero; n];
            apply(&prev, &mut cur, &mut hv);
            let m0 = 1.0;
            let m1 = cur[x * d + i].re;
            mu[0] += m0;
            mu[1] += m1;
            // prev = v_{k−1}, cur = v_k
            let mut next = vec![zero; n];
            for k in 1..half {
                mu[2 * k] += 2.0 * dot(&cur, &cur) - m0;
                apply(&cur, &mut next, &mut hv);
                for j in 0..n {
                    next[j] = next[j] * 2.0 - prev[j];
                }
                // next = 2H̃v_k − v_{k−1}; apply() produced H̃v_k
                mu[2 * k + 1] += 2.0 * dot(&next, &cur) - m1;
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        mu.truncate(terms);
        ChebyshevKernel {
            bound: b,
            moments: mu,
        }
    }

    /// Largest walk time for which the expansion is converged.
    pub fn max_time(&self) -> f64 {
        let m = self.moments.len().saturating_sub(16) as f64;
        m * m / (2.0 * 42.0) * 2.0 / self.bound
    }
}

impl DiagKernel for ChebyshevKernel {
    fn eval(&self, t: f64) -> f64 {
        let z = 0.5 * t * self.bound;
        let jmax = self.moments.len() - 1;
        let iv = bessel_i_scaled_seq(z, jmax);
        let mut terms = Vec::with_capacity(jmax + 1);
        terms.push(iv[0] * self.moments[0]);
        for j in 1..=jmax {
            let s = if j % 2 == 0 { 2.0 } else { -2.0 };
            terms.push(s * iv[j] * self.moments[j]);
        }
        pairwise_sum(&terms)
    }
}

#[derive(Clone, Debug)]
pub struct IntegralOptions {
    /// Budget for the dropped small-time window.
    pub drop_budget: f64,
    /// Quadrature panel width in log t.
    pub panel: f64,
    pub order: usize,
    /// Exponents p of the fitted tail Σ c_p t^{−p}.
    pub exponents: Vec<f64>,
    /// Required agreement of the tail estimate between two fitting windows.
    pub tail_tolerance: f64,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        IntegralOptions {
            drop_budget: 1e-14,
            panel: 0.125,
            order: 16,
            exponents: vec![1.0, 2.0, 3.0],
            tail_tolerance: 1e-8,
        }
    }
}

impl IntegralOptions {
    /// Tail exponents {1, 2, 3, 1+ν, 2+ν} with ν = 2π/α, duplicates removed.
    pub fn for_angle(alpha: f64) -> Self {
        let nu = 2.0 * std::f64::consts::PI / alpha;
        let mut e = vec![1.0, 2.0, 3.0, 1.0 + nu, 2.0 + nu];
        e.sort_by(f64::total_cmp);
        e.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        IntegralOptions {
            exponents: e,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IIntegral {
    /// ∫₀^∞ (Tr P₂ − Tr P₁) dt/t in walk time.
    pub value: f64,
    pub t_cut: f64,
    pub t_tail: f64,
    /// Part of `value` contributed by the fitted tail beyond `t_tail`.
    pub tail: f64,
    /// Disagreement between fits on two windows.
    pub tail_uncertainty: f64,
    /// Steps a walk needs before the two graphs differ.
    pub steps: usize,
}

/// log P(Poisson(μ) ≥ g).
fn log_poisson_tail(mu: f64, g: usize) -> f64 {
    if g == 0 {
        return 0.0;
    }
    let mut lg = -mu + g as f64 * mu.ln() - ln_factorial(g);
    let mut acc = 0.0f64;
    let mut term = 1.0f64;
    let mut k = g;
    loop {
        acc += term;
        k += 1;
        term *= mu / k as f64;
        if term < 1e-17 * acc || k > g + 100_000 {
            break;
        }
    }
    lg += acc.ln();
    lg
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Largest t with 2·P(Poisson(w_max t) ≥ g) below `budget`.
pub fn poisson_cut(g: usize, w_max: f64, budget: f64) -> f64 {
    let target = (budget / 2.0).ln();
    if g == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (1e-12f64, g as f64 / w_max);
    if log_poisson_tail(w_max * lo, g) > target {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if log_poisson_tail(w_max * mid, g) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

fn fit_tail(
    k2: &dyn DiagKernel,
    k1: &dyn DiagKernel,
    a: f64,
    b: f64,
    exps: &[f64],
) -> Result<(f64, f64)> {
    let m = 4 * exps.len() + 8;
    let ts: Vec<f64> = (0..m)
        .map(|i| a * (b / a).powf(i as f64 / (m - 1) as f64))
        .collect();
    // scale columns by b^p to keep the design well conditioned
    let x = DMatrix::from_fn(m, exps.len(), |i, j| (ts[i] / b).powf(-exps[j]));
    let y = DVector::from_iterator(m, ts.iter().map(|&t| (k2.eval(t) - k1.eval(t)) * b));
    let c = x
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::QuadratureFailure(e.to_string()))?;
    // ∫_b^∞ Σ c_p (t/b)^{−p} /b dt/t = Σ c_p/(p b)
    let tail: f64 = exps.iter().zip(c.iter()).map(|(p, c)| c / (p * b)).sum();
    let end = (k2.eval(b) - k1.eval(b)) * b;
    Ok((tail, end))
}

/// ∫₀^∞ (k₂ − k₁) dt/t given the dropped window `t_cut` and the tail start `t_tail`.
pub fn i_integral_kernels(
    k2: &dyn DiagKernel,
    k1: &dyn DiagKernel,
    t_cut: f64,
    t_tail: f64,
    steps: usize,
    opts: &IntegralOptions,
) -> Result<IIntegral> {
    let lo = t_cut.max(1e-8);
    let body = |a: f64, b: f64| -> f64 {
        if b <= a {
            return 0.0;
        }
        let nodes = log_panels(a, b, opts.panel, opts.order);
        pairwise_sum(
            &nodes
                .iter()
                .map(|&(t, w)| w * (k2.eval(t) - k1.eval(t)))
                .collect::<Vec<_>>(),
        )
    };
    let main = body(lo, t_tail);
    let (tail, end) = fit_tail(k2, k1, t_tail / 4.0, t_tail, &opts.exponents)?;
    let (tail_b, _) = fit_tail(k2, k1, t_tail / 8.0, t_tail / 2.0, &opts.exponents)?;
    let alt = body(lo, t_tail / 2.0) + tail_b;
    let value = main + tail;
    let quarter = (k2.eval(t_tail / 4.0) - k1.eval(t_tail / 4.0)) * t_tail / 4.0;
    if end.abs() > 2.0 * quarter.abs() + 1e-300 && end.abs() > 1e-13 {
        return Err(Error::TailNotDecaying(format!(
            "t·ΔP grows from {quarter:e} to {end:e}"
        )));
    }
    Ok(IIntegral {
        value,
        t_cut: lo,
        t_tail,
        tail,
        tail_uncertainty: (value - alt).abs(),
        steps,
    })
}

/// Reference model for `i_integral`.
pub enum Reference<'a> {
    /// The infinite plane, through its lattice kernel.
    Plane,
    Model(&'a TruncatedModel, usize),
}

/// ∫₀^∞ (Tr P^{m₂}(x₂) − Tr P^{m₁}(x₁)) dt/t with Chebyshev kernels, Poisson small-time cut and a
/// power-law tail from t_tail = 16 ρ² N²/δ₀², ρ the distance from x₂ to the model's feature.
pub fn i_integral(
    m2: &TruncatedModel,
    x2: usize,
    m1: Reference<'_>,
    opts: &IntegralOptions,
) -> Result<IIntegral> {
    if let Reference::Model(m, x1) = m1 {
        if std::ptr::eq(m, m2) && x1 == x2 {
            return Ok(IIntegral {
                value: 0.0,
                t_cut: 0.0,
                t_tail: 0.0,
                tail: 0.0,
                tail_uncertainty: 0.0,
                steps: 0,
            });
        }
    }
    let lat = &m2.surface.lattice;
    let unit = m2.unit() as f64;
    let step = lat
        .edges
        .iter()
        .map(|e| geom::norm2(lat.cell_kind, lat.displacement(e)).sqrt())
        .fold(0.0, f64::max);
    let mut rho = m2.feature_distance(x2);
    if let Reference::Model(m, x1) = &m1 {
        rho = rho.min(m.feature_distance(*x1));
    }
    if !rho.is_finite() {
        rho = 1.0;
    }
    let steps = ((rho * unit / step).floor() as usize).saturating_sub(1);
    let w_max = lat.max_class_weight();
    let t_cut = poisson_cut(steps, w_max, opts.drop_budget);
    let n = m2.n as f64;
    let d0 = lat.delta0();
    let t_tail = 16.0 * rho * rho * n * n / (d0 * d0);
    let cheb = |m: &TruncatedModel, x: usize| -> Result<ChebyshevKernel> {
        let b = m.operator.gershgorin_bound();
        let terms = chebyshev_terms(0.5 * t_tail * b);
        let reach = m.far_distance(x) * unit / step;
        if reach < (terms / 2 + 2) as f64 {
            return Err(Error::TruncationBudgetExceeded(format!(
                "recurrence needs {} steps, truncation allows {reach:.1}",
                terms / 2 + 2
            )));
        }
        Ok(ChebyshevKernel::new(&m.operator, x, terms))
    };
    let k2 = cheb(m2, x2)?;
    match m1 {
        Reference::Plane => {
            let class = m2.surface.vertices[x2].class;
            let pk = PlaneKernel::new(lat, class)?;
            let scaled = ScaledPlane(&pk, m2.operator.rank as f64);
            i_integral_kernels(&k2, &scaled, t_cut, t_tail, steps, opts)
        }
        Reference::Model(m, x1) => {
            let k1 = cheb(m, x1)?;
            i_integral_kernels(&k2, &k1, t_cut, t_tail, steps, opts)
        }
    }
}

/// CSV table with columns t, value, certificate.
pub fn kernel_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("t,value,certificate\n");
    for (t, v, c) in rows {
        let _ = writeln!(s, "{t:.16e},{v:.16e},{c:.16e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::{build_model, ModelKind};
    use super::*;
    use crate::lattice::{normalized_builtin, BuiltinLattice};
    use crate::surface::Bc;

    #[test]
    fn poisson_cut_bounds_tail() {
        let t = poisson_cut(20, 2.0, 1e-14);
        assert!(2.0 * log_poisson_tail(2.0 * t, 20).exp() <= 1.0001e-14);
        assert!(2.0 * log_poisson_tail(2.0 * t * 1.01, 20).exp() > 1e-14);
    }

    #[test]
    fn chebyshev_matches_eigen() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let m = build_model(&ModelKind::Cone { units: 3 }, &lat, 2, 3).unwrap();
        let x = m.basepoint(1.0);
        let ek = EigenKernel::new(&m).unwrap();
        let ck = ChebyshevKernel::new(
            &m.operator,
            x,
            chebyshev_terms(0.5 * 50.0 * m.operator.gershgorin_bound()),
        );
        for t in [0.0, 0.3, 2.0, 11.0, 50.0] {
            let a = ek.spectrum.heat_diag(x, t).unwrap().trace().re;
            assert!(
                (a - ck.eval(t)).abs() < 1e-12,
                "t={t}: {a} vs {}",
                ck.eval(t)
            );
        }
    }

    #[test]
    fn identical_kernels_give_zero() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let m = build_model(&ModelKind::HalfPlane(Bc::Dirichlet), &lat, 2, 3).unwrap();
        let x = m.basepoint(1.0);
        let r = i_integral(&m, x, Reference::Model(&m, x), &IntegralOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn eigen_certificate() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let m = build_model(&ModelKind::Plane, &lat, 2, 6).unwrap();
        let ek = EigenKernel::new(&m).unwrap();
        let x = m.basepoint(0.0);
        assert!(ek.diag(x, 4.0).is_ok());
        assert!(matches!(
            ek.diag(x, 4.1),
            Err(Error::TruncationBudgetExceeded(_))
        ));
    }
}
