//! Return probabilities of the walk on the infinite lattice.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::special::{bessel_i0_scaled, e1, linear_panels, log_panels, pairwise_sum};

/// Brillouin grid sizes and the largest walk time each one covers.
const LEVELS: [(usize, f64); 4] = [(64, 10.0), (128, 90.0), (256, 500.0), (512, 2000.0)];

/// Beyond this walk time the kernel is replaced by its fitted power tail.
pub const FOURIER_T_MAX: f64 = 2000.0;

#[derive(Clone, Debug)]
enum Method {
    /// Product of two scaled Bessel factors; `rate` is the per-direction jump rate 2w.
    Square { rate: f64 },
    /// Per grid level: for every k, the symbol's eigenvalues and the class's weights.
    Fourier {
        grids: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    },
}

#[derive(Clone, Debug)]
pub struct PlaneKernel {
    pub class: usize,
    /// w_x of the class.
    pub weight: f64,
    method: Method,
    /// Power-tail coefficients of t^{-1}, t^{-2}, t^{-3} fitted at large t (Fourier path only).
    tail: [f64; 3],
}

/// Single-class lattice whose edges are the four axis steps with a common weight.
fn square_rate(lat: &LatticeSpec) -> Option<f64> {
    if lat.vertices.len() != 1
        || lat.edges.len() != 4
        || lat.cell_kind != crate::lattice::CellKind::Quadrangulation
    {
        return None;
    }
    let w = lat.edges[0].weight;
    let mut dirs: Vec<[i64; 2]> = lat.edges.iter().map(|e| e.offset).collect();
    dirs.sort();
    let ok =
        dirs == vec![[-1, 0], [0, -1], [0, 1], [1, 0]] && lat.edges.iter().all(|e| e.weight == w);
    ok.then_some(2.0 * w)
}

fn symbol(lat: &LatticeSpec, k: [f64; 2]) -> DMatrix<Complex64> {
    let m = lat.vertices.len();
    let w = lat.class_weights();
    let mut s = DMatrix::<Complex64>::zeros(m, m);
    for a in 0..m {
        s[(a, a)] += w[a];
    }
    for e in &lat.edges {
        let phase = k[0] * e.offset[0] as f64 + k[1] * e.offset[1] as f64;
        s[(e.from, e.to)] -= Complex64::from_polar(e.weight, phase);
    }
    s
}

impl PlaneKernel {
    pub fn new(lat: &LatticeSpec, class: usize) -> Result<Self> {
        let weight = lat.class_weights()[class];
        if let Some(rate) = square_rate(lat) {
            return Ok(PlaneKernel {
                class,
                weight,
                method: Method::Square { rate },
                tail: [0.0; 3],
            });
        }
        let m = lat.vertices.len();
        let mut grids = Vec::new();
        for &(n, _) in &LEVELS {
            let mut g = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let k = [
                        2.0 * std::f64::consts::PI * i as f64 / n as f64,
                        2.0 * std::f64::consts::PI * j as f64 / n as f64,
                    ];
                    if m == 1 {
                        g.push((vec![symbol(lat, k)[(0, 0)].re], vec![1.0]));
                    } else {
                        let e = symbol(lat, k).symmetric_eigen();
                        let wts = (0..m)
                            .map(|c| e.eigenvectors[(class, c)].norm_sqr())
                            .collect();
                        g.push((e.eigenvalues.iter().copied().collect(), wts));
                    }
                }
            }
            grids.push(g);
        }
        let mut pk = PlaneKernel {
            class,
            weight,
            method: Method::Fourier { grids },
            tail: [0.0; 3],
        };
        pk.tail = pk.fit_tail()?;
        Ok(pk)
    }

    fn fourier(&self, t: f64) -> f64 {
        let Method::Fourier { grids } = &self.method else {
            unreachable!()
        };
        let lvl = LEVELS
            .iter()
            .position(|&(_, tmax)| t <= tmax)
            .unwrap_or(LEVELS.len() - 1);
        let g = &grids[lvl];
        let terms: Vec<f64> = g
            .iter()
            .map(|(ls, ws)| ls.iter().zip(ws).map(|(l, w)| w * (-t * l).exp()).sum())
            .collect();
        pairwise_sum(&terms) / g.len() as f64
    }

    fn fit_tail(&self) -> Result<[f64; 3]> {
        let ts: [f64; 4] = [800.0, 1100.0, 1500.0, 2000.0];
        // least squares for P ≈ Σ c_p t^{-p}
        let a = DMatrix::from_fn(ts.len(), 3, |i, p| ts[i].powi(-(p as i32 + 1)));
        let b = nalgebra::DVector::from_iterator(ts.len(), ts.iter().map(|&t| self.fourier(t)));
        let svd = a.svd(true, true);
        let c = svd
            .solve(&b, 1e-300)
            .map_err(|e| Error::QuadratureFailure(e.to_string()))?;
        Ok([c[0], c[1], c[2]])
    }

    /// P(x, x, t) on the infinite lattice.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.method {
            Method::Square { rate } => bessel_i0_scaled(rate * t).powi(2),
            Method::Fourier { .. } => {
                if t <= FOURIER_T_MAX {
                    self.fourier(t)
                } else {
                    self.tail[0] / t + self.tail[1] / (t * t) + self.tail[2] / (t * t * t)
                }
            }
        }
    }

    /// ∫_T^∞ P dt/t for T at or beyond the last Fourier level.
    fn tail_integral(&self, t0: f64) -> f64 {
        match &self.method {
            Method::Square { rate } => {
                // (e^{-z} I0(z))² = (1/2πz) (Σ a_k z^{-k})², integrate term by term in z = rate·t
                let z0 = rate * t0;
                let mut a = vec![1.0f64];
                for k in 1..8 {
                    let prev: f64 = a[k - 1];
                    let num = ((2 * k - 1) as f64).powi(2);
                    a.push(prev * num / (8.0 * k as f64));
                }
                let mut sum = 0.0;
                for (i, ai) in a.iter().enumerate() {
                    for (j, aj) in a.iter().enumerate() {
                        let p = (i + j + 1) as f64;
                        sum += ai * aj * z0.powf(-p) / p;
                    }
                }
                sum / (2.0 * std::f64::consts::PI)
            }
            Method::Fourier { .. } => (0..3)
                .map(|p| self.tail[p] * t0.powi(-(p as i32 + 1)) / (p as f64 + 1.0))
                .sum(),
        }
    }

    fn tail_start(&self) -> f64 {
        match &self.method {
            Method::Square { rate } => 4000.0 / rate.max(1e-300),
            Method::Fourier { .. } => FOURIER_T_MAX,
        }
    }

    fn integrate(&self, nodes: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
        pairwise_sum(&nodes.iter().map(|&(t, w)| w * f(t)).collect::<Vec<_>>())
    }

    /// ∫_0^a (P − e^{−w t}) dt/t.
    pub fn k1(&self, a: f64) -> f64 {
        let w = self.weight;
        let head = a.min(1.0);
        let mut s = self.integrate(&linear_panels(0.0, head, 8, 20), |t| {
            (self.eval(t) - (-w * t).exp()) / t
        });
        if a > 1.0 {
            let ts = self.tail_start();
            if a <= ts {
                s += self.integrate(&log_panels(1.0, a, 0.25, 20), |t| {
                    self.eval(t) - (-w * t).exp()
                });
            } else {
                s += self.integrate(&log_panels(1.0, ts, 0.25, 20), |t| {
                    self.eval(t) - (-w * t).exp()
                });
                s += self.tail_integral(ts) - self.tail_integral(a) - (e1(w * ts) - e1(w * a));
            }
        }
        s
    }

    /// ∫_a^∞ P dt/t.
    pub fn k2(&self, a: f64) -> f64 {
        let ts = self.tail_start();
        if a >= ts {
            return self.tail_integral(a);
        }
        let mut s = self.tail_integral(ts);
        if a < 1.0 {
            s += self.integrate(&linear_panels(a, 1.0, 8, 20), |t| self.eval(t) / t);
            s += self.integrate(&log_panels(1.0, ts, 0.25, 20), |t| self.eval(t));
        } else {
            s += self.integrate(&log_panels(a, ts, 0.25, 20), |t| self.eval(t));
        }
        s
    }

    /// ∫_0^∞ (P − e^{−w t}) dt/t, split at t = 1.
    pub fn j_total(&self) -> f64 {
        let w = self.weight;
        let ts = self.tail_start();
        let head = self.integrate(&linear_panels(0.0, 1.0, 8, 20), |t| {
            (self.eval(t) - (-w * t).exp()) / t
        });
        let body = self.integrate(&log_panels(1.0, ts, 0.2, 24), |t| self.eval(t));
        head + body + self.tail_integral(ts) - e1(w)
    }
}
