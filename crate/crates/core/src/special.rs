//! Scalar special functions and quadrature rules shared by the solvers.

use std::f64::consts::PI;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral E1(x) = ∫_x^∞ e^{-u}/u du for x > 0.
///
/// Power series below 1, modified Lentz continued fraction above.
pub fn e1(x: f64) -> f64 {
    assert!(x > 0.0, "e1 requires x > 0, got {x}");
    if x < 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else if x > 745.0 {
        0.0
    } else {
        // E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// F_a(λ) = −log λ − E1(λ a), extended continuously to λ = 0 by log a + γ.
///
/// For a measure of total mass m the integral ∫_0^a Σ c_i e^{-λ_i t} dt/t
/// with Σ c_i = 0 equals Σ c_i F_a(λ_i).
pub fn f_cut(lambda: f64, a: f64) -> f64 {
    let x = lambda * a;
    if x < 1e-12 {
        // −log λ − E1(x) = log a + γ − x + O(x²)
        a.ln() + EULER_GAMMA - x
    } else if x < 1.0 {
        // −log λ − (−γ − log x − S(x)) = log a + γ + S(x), S(x) = Σ (−x)^k/(k·k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        a.ln() + EULER_GAMMA + sum
    } else {
        -lambda.ln() - e1(x)
    }
}

/// Scaled modified Bessel values e^{-z} I_j(z) for j = 0..=jmax.
///
/// Miller backward recurrence normalised with I_0 + 2 Σ I_j = e^z.
pub fn bessel_i_scaled_seq(z: f64, jmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; jmax + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    assert!(z > 0.0);
    let start = jmax.max((80.0 * z).sqrt() as usize + 2 * (z as usize).min(40)) + 40;
    let mut next = 0.0f64;
    let mut cur = 1e-280f64;
    let mut sum = 0.0;
    let mut vals = vec![0.0; jmax + 1];
    for j in (1..=start).rev() {
        let prev = next + (2.0 * j as f64 / z) * cur;
        next = cur;
        cur = prev;
        // cur now holds the unnormalised I_{j-1}
        if j - 1 <= jmax {
            vals[j - 1] = cur;
        }
        if j - 1 > 0 {
            sum += 2.0 * cur;
        } else {
            sum += cur;
        }
        if cur > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            sum *= s;
            for v in vals.iter_mut() {
                *v *= s;
            }
        }
    }
    for (o, v) in out.iter_mut().zip(vals) {
        *o = v / sum;
    }
    out
}

/// e^{-z} I_0(z).
pub fn bessel_i0_scaled(z: f64) -> f64 {
    if z > 700.0 {
        // (2πz)^{-1/2} Σ a_k z^{-k}, a_k = ((2k-1)!!)² / (k! 8^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let kk = (2 * k - 1) as f64;
            term *= kk * kk / (8.0 * k as f64 * z);
            sum += term;
            if term < 1e-18 {
                break;
            }
        }
        sum / (2.0 * PI * z).sqrt()
    } else {
        bessel_i_scaled_seq(z, 0)[0]
    }
}

/// Catalan's constant from the rapidly convergent central-binomial series
/// G = (π/8) log(2+√3) + (3/8) Σ_{k≥0} 1/((2k+1)² C(2k,k)).
pub fn catalan() -> f64 {
    let mut sum = 0.0;
    let mut binom = 1.0f64;
    for k in 0..60u32 {
        if k > 0 {
            let kf = k as f64;
            binom *= (2.0 * kf) * (2.0 * kf - 1.0) / (kf * kf);
        }
        let odd = (2 * k + 1) as f64;
        sum += 1.0 / (odd * odd * binom);
    }
    PI / 8.0 * (2.0 + 3f64.sqrt()).ln() + 3.0 / 8.0 * sum
}

/// Re Li₂(e^{iθ}) = Σ cos(kθ)/k² via the Bernoulli closed form, θ reduced to [0, 2π).
pub fn re_dilog_unit(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    PI * PI / 6.0 - PI * t / 2.0 + t * t / 4.0
}

/// Complementary error function, |relative error| ≲ 1e-14.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        // erf series
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * sum
    } else {
        // continued fraction for Γ(1/2, x²)
        let z = x * x;
        let tiny = 1e-300;
        let mut b = z + 0.5;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..300 {
            let an = -(i as f64) * (i as f64 - 0.5);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp() * x / PI.sqrt()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Nodes and weights for ∫_{t0}^{t1} f(t) dt/t, composite Gauss–Legendre in u = log t.
pub fn log_panels(t0: f64, t1: f64, panel_width: f64, order: usize) -> Vec<(f64, f64)> {
    assert!(t0 > 0.0 && t1 > t0);
    let (u0, u1) = (t0.ln(), t1.ln());
    let panels = ((u1 - u0) / panel_width).ceil().max(1.0) as usize;
    let h = (u1 - u0) / panels as f64;
    let (xs, ws) = gauss_legendre(order);
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = u0 + p as f64 * h;
        for (x, w) in xs.iter().zip(&ws) {
            let u = a + 0.5 * h * (x + 1.0);
            out.push((u.exp(), 0.5 * h * w));
        }
    }
    out
}

/// Nodes and weights for ∫_a^b f(x) dx, composite Gauss–Legendre.
pub fn linear_panels(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in xs.iter().zip(&ws) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// log |η(τ)| for Im τ > 0, q-product after reducing Im τ ≥ √3/2 is not attempted;
/// callers pass τ with moderate imaginary part.
pub fn log_abs_dedekind_eta(tau_re: f64, tau_im: f64) -> f64 {
    assert!(tau_im > 0.0);
    // η = q^{1/24} Π (1 − q^n), q = e^{2πiτ}
    let mut acc = -2.0 * PI * tau_im / 24.0;
    let r = (-2.0 * PI * tau_im).exp();
    let th = 2.0 * PI * tau_re;
    let mut rn = 1.0;
    for n in 1..10_000 {
        rn *= r;
        if rn < 1e-18 {
            break;
        }
        let (s, c) = (th * n as f64).sin_cos();
        let re = 1.0 - rn * c;
        let im = -rn * s;
        acc += 0.5 * (re * re + im * im).ln();
    }
    acc
}

/// Pairwise summation, deterministic for a given input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// sin⁻²(x) − x⁻², analytic near 0.
pub fn inv_sin2_reg(x: f64) -> f64 {
    if x.abs() < 0.05 {
        let x2 = x * x;
        1.0 / 3.0 + x2 / 15.0 + 2.0 * x2 * x2 / 189.0 + x2 * x2 * x2 / 675.0
    } else {
        let s = x.sin();
        1.0 / (s * s) - 1.0 / (x * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        assert!((e1(1.0) - 0.219_383_934_395_520_26).abs() < 1e-15);
        assert!((e1(0.1) - 1.822_923_958_419_390_7).abs() < 1e-14);
        assert!((e1(5.0) - 1.148_295_591_275_325_7e-3).abs() < 1e-17);
        assert!((e1(30.0) / 3.021_552_010_688_812_5e-15 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn e1_series_and_fraction_meet() {
        let below = e1(1.0 - 1e-12);
        let above = e1(1.0 + 1e-12);
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn f_cut_limits() {
        let a = 64.0;
        assert!((f_cut(0.0, a) - (a.ln() + EULER_GAMMA)).abs() < 1e-15);
        let l = 0.3;
        assert!((f_cut(l, a) - (-(l as f64).ln() - e1(l * a))).abs() < 1e-13);
        let l = 1e-3;
        assert!((f_cut(l, a) - (-(l as f64).ln() - e1(l * a))).abs() < 1e-12);
    }

    #[test]
    fn bessel_known_values() {
        // I0(1) = 1.2660658777520082, I1(1) = 0.5651591039924851
        let v = bessel_i_scaled_seq(1.0, 3);
        let e = (-1f64).exp();
        assert!((v[0] - 1.266_065_877_752_008_2 * e).abs() < 1e-15);
        assert!((v[1] - 0.565_159_103_992_485_1 * e).abs() < 1e-15);
        let big = bessel_i0_scaled(1000.0);
        let mil = bessel_i_scaled_seq(1000.0, 0)[0];
        assert!((big - mil).abs() < 1e-15);
    }

    #[test]
    fn catalan_value() {
        assert!((catalan() - 0.915_965_594_177_219_0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn erfc_values() {
        assert!((erfc(0.5) - 0.479_500_122_186_953_5).abs() < 1e-15);
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-18);
    }

    #[test]
    fn eta_at_i() {
        // η(i) = Γ(1/4) / (2 π^{3/4})
        let v = log_abs_dedekind_eta(0.0, 1.0).exp();
        assert!((v - 0.768_225_422_326_056_7).abs() < 1e-14);
    }
}
