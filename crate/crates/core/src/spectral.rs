//! Spectra, log-determinants, theta and zeta functions of twisted Laplacians.

use std::collections::VecDeque;
use std::fmt::Write as _;

use faer::complex_native::c64;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::TwistedLaplacian;
use crate::surface::CMat;

type C64 = Complex64;

/// Largest dimension for which eigenvectors are kept.
pub const DENSE_LIMIT: usize = 8192;

/// Above this dimension `Backend::Auto` switches to the sparse factorisation.
pub const AUTO_DENSE_MAX: usize = 2500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Dense,
    Sparse,
    Auto,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" | "eigen" | "A" => Ok(Backend::Dense),
            "sparse" | "cholesky" | "B" => Ok(Backend::Sparse),
            "auto" => Ok(Backend::Auto),
            _ => Err(Error::Schema(format!("unknown backend '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
enum Vectors {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Ascending, walk-time units.
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub rank: usize,
    vectors: Option<Vectors>,
}

pub fn zero_threshold(lmax: f64) -> f64 {
    1e-10 * lmax.max(1.0)
}

fn dense_real(l: &TwistedLaplacian) -> Mat<f64> {
    let n = l.dimension();
    let d = l.rank;
    let mut m = Mat::<f64>::zeros(n, n);
    for (x, y, b) in l.entries() {
        for i in 0..d {
            for j in 0..d {
                let r = x * d + i;
                let c = y * d + j;
                m.write(r, c, m.read(r, c) + b[i * d + j].re);
            }
        }
    }
    m
}

fn dense_complex(l: &TwistedLaplacian) -> Mat<c64> {
    let n = l.dimension();
    let d = l.rank;
    let mut m = Mat::<c64>::zeros(n, n);
    for (x, y, b) in l.entries() {
        for i in 0..d {
            for j in 0..d {
                let r = x * d + i;
                let c = y * d + j;
                let z = m.read(r, c);
                m.write(
                    r,
                    c,
                    c64::new(z.re + b[i * d + j].re, z.im + b[i * d + j].im),
                );
            }
        }
    }
    m
}

fn sort_perm(vals: &[f64]) -> Vec<usize> {
    let mut p: Vec<usize> = (0..vals.len()).collect();
    p.sort_by(|a, b| vals[*a].total_cmp(&vals[*b]));
    p
}

pub fn eigensolve(l: &TwistedLaplacian, want_vectors: bool) -> Result<Spectrum> {
    let n = l.dimension();
    if want_vectors && n > DENSE_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: DENSE_LIMIT,
        });
    }
    let (vals, vectors) = if l.is_real() {
        let m = dense_real(l);
        if want_vectors {
            let e = m.selfadjoint_eigendecomposition(Side::Lower);
            let raw: Vec<f64> = (0..n).map(|i| e.s().column_vector().read(i)).collect();
            let p = sort_perm(&raw);
            let u = e.u();
            let v = Mat::<f64>::from_fn(n, n, |i, j| u.read(i, p[j]));
            (p.iter().map(|&i| raw[i]).collect(), Some(Vectors::Real(v)))
        } else {
            let mut raw = m.selfadjoint_eigenvalues(Side::Lower);
            raw.sort_by(f64::total_cmp);
            (raw, None)
        }
    } else {
        let m = dense_complex(l);
        if want_vectors {
            let e = m.selfadjoint_eigendecomposition(Side::Lower);
            let raw: Vec<f64> = (0..n).map(|i| e.s().column_vector().read(i).re).collect();
            let p = sort_perm(&raw);
            let u = e.u();
            let v = Mat::<c64>::from_fn(n, n, |i, j| u.read(i, p[j]));
            (
                p.iter().map(|&i| raw[i]).collect(),
                Some(Vectors::Complex(v)),
            )
        } else {
            let mut raw = m.selfadjoint_eigenvalues(Side::Lower);
            raw.sort_by(f64::total_cmp);
            (raw, None)
        }
    };
    let lmax = vals.last().copied().unwrap_or(0.0);
    let thr = zero_threshold(lmax);
    let kernel_dim = vals.iter().filter(|&&v| v < thr).count();
    if let Some(&lmin) = vals.first() {
        if lmin < -1e-10 * lmax.max(1.0) {
            return Err(Error::NotHermitian(lmin));
        }
    }
    if kernel_dim != l.kernel_dim_expected {
        return Err(Error::KernelMismatch {
            eigen: kernel_dim,
            constants: l.kernel_dim_expected,
        });
    }
    Ok(Spectrum {
        eigenvalues: vals,
        kernel_dim,
        rank: l.rank,
        vectors,
    })
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn has_vectors(&self) -> bool {
        self.vectors.is_some()
    }

    /// Nonzero eigenvalues.
    pub fn positive(&self) -> &[f64] {
        &self.eigenvalues[self.kernel_dim..]
    }

    pub fn logdet_star(&self) -> f64 {
        crate::special::pairwise_sum(&self.positive().iter().map(|l| l.ln()).collect::<Vec<_>>())
    }

    pub fn theta(&self, t: f64) -> f64 {
        crate::special::pairwise_sum(
            &self
                .eigenvalues
                .iter()
                .map(|l| (-l * t).exp())
                .collect::<Vec<_>>(),
        )
    }

    /// Σ_{λ≠0} λ^{−s}.
    pub fn zeta(&self, s: C64) -> C64 {
        self.positive().iter().map(|&l| (-s * l.ln()).exp()).sum()
    }

    /// −ζ′(0) by the exact formula.
    pub fn zeta_prime_zero(&self) -> f64 {
        -self.logdet_star()
    }

    fn component(&self, row: usize, col: usize) -> C64 {
        match self.vectors.as_ref().unwrap() {
            Vectors::Real(v) => C64::new(v.read(row, col), 0.0),
            Vectors::Complex(v) => {
                let z = v.read(row, col);
                C64::new(z.re, z.im)
            }
        }
    }

    /// Block (x, x) of e^{−tH}.
    pub fn heat_diag(&self, x: usize, t: f64) -> Result<CMat> {
        if self.vectors.is_none() {
            return Err(Error::MissingVectors);
        }
        let d = self.rank;
        let mut out = CMat::zeros(d, d);
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let e = (-l * t).exp();
            for i in 0..d {
                let vi = self.component(x * d + i, k);
                for j in 0..d {
                    out[(i, j)] += vi * self.component(x * d + j, k).conj() * e;
                }
            }
        }
        Ok(out)
    }

    /// Per-vertex Σ_λ g(λ)·Σ_i |v_λ(x, i)|², i.e. ∫ g dμ_x for the trace spectral measure at x.
    pub fn diag_sums(&self, g: &[f64]) -> Result<Vec<f64>> {
        let vectors = self.vectors.as_ref().ok_or(Error::MissingVectors)?;
        let n = self.eigenvalues.len();
        let d = self.rank;
        let mut acc = vec![0.0; n];
        match vectors {
            Vectors::Real(v) => {
                for k in 0..n {
                    let col = v.col(k);
                    for r in 0..n {
                        let z = col.read(r);
                        acc[r] += g[k] * z * z;
                    }
                }
            }
            Vectors::Complex(v) => {
                for k in 0..n {
                    let col = v.col(k);
                    for r in 0..n {
                        let z = col.read(r);
                        acc[r] += g[k] * (z.re * z.re + z.im * z.im);
                    }
                }
            }
        }
        Ok(acc.chunks(d).map(|c| c.iter().sum()).collect())
    }

    /// max |H v − λ v| over eigenpairs.
    pub fn residual(&self, l: &TwistedLaplacian) -> Result<f64> {
        if self.vectors.is_none() {
            return Err(Error::MissingVectors);
        }
        let n = self.len();
        let mut worst: f64 = 0.0;
        let mut hv = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let v: Vec<C64> = (0..n).map(|r| self.component(r, k)).collect();
            l.matvec(&v, &mut hv);
            for r in 0..n {
                worst = worst.max((hv[r] - v[r] * self.eigenvalues[k]).norm());
            }
        }
        Ok(worst)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue\n");
        for (i, l) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(s, "{i},{l:.16e}");
        }
        s
    }
}

pub fn theta(s: &Spectrum, t: f64) -> f64 {
    s.theta(t)
}

pub fn logdet_star(l: &TwistedLaplacian, backend: Backend) -> Result<f64> {
    let dense = match backend {
        Backend::Dense => true,
        Backend::Sparse => false,
        Backend::Auto => l.dimension() <= AUTO_DENSE_MAX,
    };
    if dense {
        Ok(eigensolve(l, false)?.logdet_star())
    } else {
        sparse_logdet_star(l)
    }
}

/// Rows S maximising |det Q_S| greedily (pivoted Gram–Schmidt on the rows of Q).
fn kernel_pivots(q: &[Vec<C64>], n: usize) -> (Vec<usize>, f64) {
    let k = q.len();
    // rows of Q as k-vectors
    let mut rows: Vec<Vec<C64>> = (0..n).map(|r| q.iter().map(|v| v[r]).collect()).collect();
    let mut chosen = Vec::new();
    let mut logabs = 0.0;
    for _ in 0..k {
        let (best, norm) = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .map(|(i, r)| (i, r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
            .fold((usize::MAX, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        chosen.push(best);
        logabs += norm.ln();
        let u: Vec<C64> = rows[best].iter().map(|z| z / norm).collect();
        for r in rows.iter_mut() {
            let p: C64 = u.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
            for (b, a) in r.iter_mut().zip(&u) {
                *b -= p * a;
            }
        }
    }
    (chosen, logabs)
}

/// Reverse Cuthill–McKee ordering of a symmetric pattern.
pub fn rcm(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let bfs_last = |start: usize, seen_mask: &[bool]| -> usize {
        let mut vis = seen_mask.to_vec();
        let mut q = VecDeque::from([start]);
        vis[start] = true;
        let mut last = start;
        while let Some(x) = q.pop_front() {
            last = x;
            for &y in &adj[x] {
                if !vis[y] {
                    vis[y] = true;
                    q.push_back(y);
                }
            }
        }
        last
    };
    loop {
        let Some(seed) = (0..n).filter(|&i| !seen[i]).min_by_key(|&i| adj[i].len()) else {
            break;
        };
        // pseudo-peripheral start
        let a = bfs_last(seed, &seen);
        let start = bfs_last(a, &seen);
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        while let Some(x) = q.pop_front() {
            order.push(x);
            let mut nb: Vec<usize> = adj[x].iter().copied().filter(|&y| !seen[y]).collect();
            nb.sort_by_key(|&y| adj[y].len());
            for y in nb {
                seen[y] = true;
                q.push_back(y);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (skyline) Cholesky factor of a Hermitian positive-definite matrix.
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    rows: Vec<Vec<C64>>,
}

impl EnvelopeCholesky {
    /// `entries(i)` yields (j, A_ij) for j ≤ i in the permuted numbering.
    pub fn factor(n: usize, lower: &[Vec<(usize, C64)>]) -> Result<Self> {
        let first: Vec<usize> = (0..n)
            .map(|i| lower[i].iter().map(|e| e.0).min().unwrap_or(i).min(i))
            .collect();
        let mut rows: Vec<Vec<C64>> = Vec::with_capacity(n);
        for i in 0..n {
            let fi = first[i];
            let mut row = vec![C64::new(0.0, 0.0); i - fi + 1];
            for &(j, a) in &lower[i] {
                row[j - fi] += a;
            }
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let rj = &rows[j];
                let mut s = row[j - fi];
                let (a, b) = (&row[k0 - fi..j - fi], &rj[k0 - fj..j - fj]);
                for (x, y) in a.iter().zip(b) {
                    s -= x * y.conj();
                }
                row[j - fi] = s / rj[j - fj].re;
            }
            let dsum: f64 = row[..i - fi].iter().map(|z| z.norm_sqr()).sum();
            let dd = row[i - fi].re - dsum;
            if !(dd > 0.0) {
                return Err(Error::Factorization(format!("pivot {i} is {dd:e}")));
            }
            row[i - fi] = C64::new(dd.sqrt(), 0.0);
            rows.push(row);
        }
        Ok(EnvelopeCholesky { first, rows })
    }

    pub fn logdet(&self) -> f64 {
        let v: Vec<f64> = self
            .rows
            .iter()
            .zip(&self.first)
            .enumerate()
            .map(|(i, (r, &f))| 2.0 * r[i - f].re.ln())
            .collect();
        crate::special::pairwise_sum(&v)
    }

    pub fn envelope_size(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }
}

/// log det★ via deflation of the kernel rows and an envelope Cholesky of the rest:
/// det★ H = det H_RR / |det Q_S|².
pub fn sparse_logdet_star(l: &TwistedLaplacian) -> Result<f64> {
    let n = l.dimension();
    let d = l.rank;
    let (drop, log_q) = kernel_pivots(&l.kernel, n);
    let mut keep_idx = vec![usize::MAX; n];
    let mut m = 0;
    for (i, slot) in keep_idx.iter_mut().enumerate() {
        if !drop.contains(&i) {
            *slot = m;
            m += 1;
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut ent: Vec<Vec<(usize, C64)>> = vec![Vec::new(); m];
    for (x, y, b) in l.entries() {
        for i in 0..d {
            for j in 0..d {
                let z = b[i * d + j];
                if z == C64::new(0.0, 0.0) {
                    continue;
                }
                let (r, c) = (keep_idx[x * d + i], keep_idx[y * d + j]);
                if r == usize::MAX || c == usize::MAX {
                    continue;
                }
                ent[r].push((c, z));
                if r != c {
                    adj[r].push(c);
                }
            }
        }
    }
    let order = rcm(&adj);
    let mut pos = vec![0usize; m];
    for (new, &old) in order.iter().enumerate() {
        pos[old] = new;
    }
    let mut lower: Vec<Vec<(usize, C64)>> = vec![Vec::new(); m];
    for (r, row) in ent.iter().enumerate() {
        for &(c, z) in row {
            let (pr, pc) = (pos[r], pos[c]);
            if pc <= pr {
                lower[pr].push((pc, z));
            }
        }
    }
    let chol = EnvelopeCholesky::factor(m, &lower)?;
    Ok(chol.logdet() - 2.0 * log_q)
}
