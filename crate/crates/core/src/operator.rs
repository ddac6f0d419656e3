//! Twisted Laplacian assembled from a discrete surface.
//!
//! Reflected boundary edges make the raw operator non-symmetric; it is
//! symmetric with respect to a vertex measure m, and the stored matrix is
//! the conjugate √m·H·√m⁻¹, which is Hermitian.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::surface::{CMat, DiscreteSurface};

type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct TwistedLaplacian {
    pub rank: usize,
    pub vertex_count: usize,
    /// Block-CSR layout over vertices; each block is d×d row-major.
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub blocks: Vec<C64>,
    /// Vertex measure making the raw operator symmetric (max 1).
    pub measure: Vec<f64>,
    pub kernel_dim_expected: usize,
    /// Orthonormal covariant constants in this gauge.
    pub kernel: Vec<Vec<C64>>,
}

impl TwistedLaplacian {
    pub fn dimension(&self) -> usize {
        self.rank * self.vertex_count
    }

    pub fn nnz_blocks(&self) -> usize {
        self.cols.len()
    }

    fn block_slice(&self, k: usize) -> &[C64] {
        let b = self.rank * self.rank;
        &self.blocks[k * b..(k + 1) * b]
    }

    pub fn block(&self, x: usize, y: usize) -> CMat {
        let d = self.rank;
        for k in self.row_ptr[x]..self.row_ptr[x + 1] {
            if self.cols[k] == y {
                return CMat::from_row_slice(d, d, self.block_slice(k));
            }
        }
        CMat::zeros(d, d)
    }

    /// Iterate (row vertex, column vertex, block).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &[C64])> + '_ {
        (0..self.vertex_count).flat_map(move |x| {
            (self.row_ptr[x]..self.row_ptr[x + 1])
                .map(move |k| (x, self.cols[k], self.block_slice(k)))
        })
    }

    pub fn matvec(&self, v: &[C64], out: &mut [C64]) {
        let d = self.rank;
        for x in 0..self.vertex_count {
            let mut acc = [C64::new(0.0, 0.0); 8];
            let acc = &mut acc[..d.min(8)];
            if d > 8 {
                // rare large-rank path
                for i in 0..d {
                    let mut s = C64::new(0.0, 0.0);
                    for k in self.row_ptr[x]..self.row_ptr[x + 1] {
                        let b = self.block_slice(k);
                        let y = self.cols[k];
                        for j in 0..d {
                            s += b[i * d + j] * v[y * d + j];
                        }
                    }
                    out[x * d + i] = s;
                }
                continue;
            }
            for k in self.row_ptr[x]..self.row_ptr[x + 1] {
                let b = self.block_slice(k);
                let y = self.cols[k];
                for i in 0..d {
                    for j in 0..d {
                        acc[i] += b[i * d + j] * v[y * d + j];
                    }
                }
            }
            out[x * d..(x + 1) * d].copy_from_slice(acc);
        }
    }

    /// Real-arithmetic matvec when every block is real (d = 1 untwisted or ±1 twisted operators).
    pub fn is_real(&self) -> bool {
        self.blocks.iter().all(|z| z.im == 0.0)
    }

    /// Re⟨f, H f⟩.
    pub fn quadratic_form(&self, f: &[C64]) -> f64 {
        let mut hf = vec![C64::new(0.0, 0.0); f.len()];
        self.matvec(f, &mut hf);
        f.iter().zip(&hf).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Column-major dense copy.
    pub fn to_dense(&self) -> Vec<C64> {
        let n = self.dimension();
        let d = self.rank;
        let mut m = vec![C64::new(0.0, 0.0); n * n];
        for (x, y, b) in self.entries() {
            for i in 0..d {
                for j in 0..d {
                    m[(y * d + j) * n + x * d + i] += b[i * d + j];
                }
            }
        }
        m
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        let n = self.dimension();
        DMatrix::from_column_slice(n, n, &self.to_dense())
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let d = self.rank;
        for (x, y, b) in self.entries() {
            let bt = self.block(y, x);
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((b[i * d + j] - bt[(j, i)].conj()).norm());
                }
            }
        }
        worst
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn gershgorin_bound(&self) -> f64 {
        let d = self.rank;
        let mut best: f64 = 0.0;
        for x in 0..self.vertex_count {
            for i in 0..d {
                let mut s = 0.0;
                for k in self.row_ptr[x]..self.row_ptr[x + 1] {
                    let b = self.block_slice(k);
                    for j in 0..d {
                        s += b[i * d + j].norm();
                    }
                }
                best = best.max(s);
            }
        }
        best
    }

    pub fn to_coo_csv(&self) -> String {
        let d = self.rank;
        let mut s = String::from("row,col,re,im\n");
        for (x, y, b) in self.entries() {
            for i in 0..d {
                for j in 0..d {
                    let z = b[i * d + j];
                    if z != C64::new(0.0, 0.0) {
                        let _ =
                            writeln!(s, "{},{},{:.16e},{:.16e}", x * d + i, y * d + j, z.re, z.im);
                    }
                }
            }
        }
        s
    }

    /// Vertex adjacency (excluding the diagonal) in CSR form.
    pub fn neighbours(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        (self.row_ptr[x]..self.row_ptr[x + 1])
            .map(move |k| self.cols[k])
            .filter(move |&y| y != x)
    }

    fn from_triplets(rank: usize, nv: usize, mut trip: Vec<(usize, usize, Vec<C64>)>) -> Self {
        trip.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nv + 1];
        let mut cols = Vec::new();
        let mut blocks = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (x, y, b) in trip {
            if last == Some((x, y)) {
                let n = blocks.len();
                let bb = rank * rank;
                for (acc, v) in blocks[n - bb..].iter_mut().zip(&b) {
                    *acc += *v;
                }
            } else {
                cols.push(y);
                blocks.extend_from_slice(&b);
                row_ptr[x + 1] += 1;
                last = Some((x, y));
            }
        }
        for x in 0..nv {
            row_ptr[x + 1] += row_ptr[x];
        }
        TwistedLaplacian {
            rank,
            vertex_count: nv,
            row_ptr,
            cols,
            blocks,
            measure: vec![1.0; nv],
            kernel_dim_expected: 0,
            kernel: Vec::new(),
        }
    }
}

fn block_norm(b: &[C64]) -> f64 {
    b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Raw (possibly non-symmetric) operator rows straight from the half-edges.
pub fn assemble_raw(ds: &DiscreteSurface) -> TwistedLaplacian {
    let d = ds.rank();
    let mut trip: Vec<(usize, usize, Vec<C64>)> =
        Vec::with_capacity(ds.half_edges.len() + ds.vertices.len());
    let id: Vec<C64> = CMat::identity(d, d).transpose().iter().copied().collect();
    for h in &ds.half_edges {
        trip.push((h.from, h.from, id.iter().map(|z| z * h.w).collect()));
        if let Some(y) = h.to {
            let s = h.sign.unwrap_or(1) as f64;
            let phi = &ds.connections[h.conn as usize];
            let mut b = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    b.push(-phi[(i, j)] * (h.w * s));
                }
            }
            trip.push((h.from, y, b));
        }
    }
    TwistedLaplacian::from_triplets(d, ds.vertices.len(), trip)
}

/// Assemble the Hermitian operator in the symmetrised gauge.
pub fn assemble(ds: &DiscreteSurface) -> Result<TwistedLaplacian> {
    let mut h = assemble_raw(ds);
    let nv = h.vertex_count;
    let bb = h.rank * h.rank;
    // measure by propagation of m_x|H_xy| = m_y|H_yx|
    let mut m = vec![0.0f64; nv];
    let mut queue = VecDeque::new();
    for root in 0..nv {
        if m[root] != 0.0 {
            continue;
        }
        m[root] = 1.0;
        let mut comp = vec![root];
        queue.push_back(root);
        while let Some(x) = queue.pop_front() {
            for k in h.row_ptr[x]..h.row_ptr[x + 1] {
                let y = h.cols[k];
                if y == x {
                    continue;
                }
                let hxy = block_norm(&h.blocks[k * bb..(k + 1) * bb]);
                let hyx = block_norm(h.block(y, x).as_slice());
                if hxy == 0.0 && hyx == 0.0 {
                    continue;
                }
                if hxy == 0.0 || hyx == 0.0 {
                    return Err(Error::NotHermitian(hxy.max(hyx)));
                }
                let my = m[x] * hxy / hyx;
                if m[y] == 0.0 {
                    m[y] = my;
                    comp.push(y);
                    queue.push_back(y);
                } else if (m[y] - my).abs() > 1e-12 * my {
                    return Err(Error::NotHermitian((m[y] - my).abs() / my));
                }
            }
        }
        let top = comp.iter().map(|&v| m[v]).fold(0.0, f64::max);
        for v in comp {
            m[v] /= top;
        }
    }
    let scale = h.gershgorin_bound().max(1.0);
    for x in 0..nv {
        for k in h.row_ptr[x]..h.row_ptr[x + 1] {
            let y = h.cols[k];
            if y != x {
                let f = (m[x] / m[y]).sqrt();
                for z in &mut h.blocks[k * bb..(k + 1) * bb] {
                    *z *= f;
                }
            }
        }
    }
    let defect = h.hermitian_defect();
    if defect > 1e-14 * scale * 10.0 {
        return Err(Error::NotHermitian(defect));
    }
    // exact Hermitian symmetrisation of the rounding residue
    let d = h.rank;
    let snapshot = h.clone();
    for x in 0..nv {
        for k in h.row_ptr[x]..h.row_ptr[x + 1] {
            let y = h.cols[k];
            let bt = snapshot.block(y, x);
            for i in 0..d {
                for j in 0..d {
                    let z = &mut h.blocks[k * bb + i * d + j];
                    *z = 0.5 * (*z + bt[(j, i)].conj());
                }
            }
        }
    }
    h.measure = m;
    h.kernel = covariant_constants(ds, &h);
    h.kernel_dim_expected = h.kernel.len();
    Ok(h)
}

/// B'_xy = g_x B_xy g_y†.
pub fn gauge_transform(l: &TwistedLaplacian, g: &[CMat]) -> Result<TwistedLaplacian> {
    let d = l.rank;
    for (x, gx) in g.iter().enumerate() {
        if gx.nrows() != d || crate::surface::unitarity_defect(gx) > 1e-12 {
            return Err(Error::NonUnitaryGauge(x));
        }
    }
    if g.len() != l.vertex_count {
        return Err(Error::NonUnitaryGauge(g.len()));
    }
    let mut out = l.clone();
    let bb = d * d;
    for x in 0..l.vertex_count {
        for k in l.row_ptr[x]..l.row_ptr[x + 1] {
            let y = l.cols[k];
            let b = CMat::from_row_slice(d, d, &l.blocks[k * bb..(k + 1) * bb]);
            let nb = &g[x] * b * g[y].adjoint();
            for i in 0..d {
                for j in 0..d {
                    out.blocks[k * bb + i * d + j] = nb[(i, j)];
                }
            }
        }
    }
    for v in &mut out.kernel {
        for (x, gx) in g.iter().enumerate() {
            let fx = gx * CMat::from_column_slice(d, 1, &v[x * d..(x + 1) * d]);
            v[x * d..(x + 1) * d].copy_from_slice(fx.as_slice());
        }
    }
    Ok(out)
}

/// Covariant constants in the surface's own gauge (before symmetrisation), orthonormal.
fn covariant_constants_raw(ds: &DiscreteSurface) -> Vec<Vec<C64>> {
    let d = ds.rank();
    let nv = ds.vertices.len();
    if ds.spec.has_dirichlet() || ds.half_edges.iter().any(|h| h.to.is_none()) {
        return Vec::new();
    }
    let mut adj: Vec<Vec<(usize, CMat)>> = vec![Vec::new(); nv];
    for h in &ds.half_edges {
        let y = h.to.unwrap();
        let a = &ds.connections[h.conn as usize] * C64::new(h.sign.unwrap_or(1) as f64, 0.0);
        adj[h.from].push((y, a));
    }
    let mut frame: Vec<Option<CMat>> = vec![None; nv];
    let mut out = Vec::new();
    for root in 0..nv {
        if frame[root].is_some() {
            continue;
        }
        frame[root] = Some(CMat::identity(d, d));
        let mut comp = vec![root];
        let mut queue = VecDeque::from([root]);
        let mut gram = CMat::zeros(d, d);
        while let Some(x) = queue.pop_front() {
            let tx = frame[x].clone().unwrap();
            for (y, a) in &adj[x] {
                // f(x) = A f(y) along the half-edge
                match &frame[*y] {
                    None => {
                        frame[*y] = Some(a.adjoint() * &tx);
                        comp.push(*y);
                        queue.push_back(*y);
                    }
                    Some(ty) => {
                        let k = tx.adjoint() * a * ty - CMat::identity(d, d);
                        gram += k.adjoint() * k;
                    }
                }
            }
        }
        let eig = gram.clone().symmetric_eigen();
        for (i, ev) in eig.eigenvalues.iter().enumerate() {
            if ev.max(0.0).sqrt() < 1e-10 {
                let c = eig.eigenvectors.column(i).into_owned();
                let mut v = vec![C64::new(0.0, 0.0); nv * d];
                for &x in &comp {
                    let fx = frame[x].as_ref().unwrap() * &c;
                    for j in 0..d {
                        v[x * d + j] = fx[j];
                    }
                }
                out.push(v);
            }
        }
    }
    out
}

/// Orthonormal basis of ker H in the symmetrised gauge of `l`.
pub fn covariant_constants(ds: &DiscreteSurface, l: &TwistedLaplacian) -> Vec<Vec<C64>> {
    let d = ds.rank();
    let mut basis: Vec<Vec<C64>> = covariant_constants_raw(ds)
        .into_iter()
        .map(|mut v| {
            for (x, &mx) in l.measure.iter().enumerate() {
                let s = mx.sqrt();
                for z in &mut v[x * d..(x + 1) * d] {
                    *z *= s;
                }
            }
            v
        })
        .collect();
    orthonormalise(&mut basis);
    basis
}

pub fn orthonormalise(vs: &mut Vec<Vec<C64>>) {
    let mut kept: Vec<Vec<C64>> = Vec::new();
    for mut v in vs.drain(..) {
        for _ in 0..2 {
            for u in &kept {
                let p: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (b, a) in v.iter_mut().zip(u) {
                    *b -= p * a;
                }
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-12 {
            v.iter_mut().for_each(|z| *z /= n);
            kept.push(v);
        }
    }
    *vs = kept;
}
