//! Bi-periodic weighted lattices with exact rational vertex coordinates.
//!
//! Positions are integer pairs over a common denominator `denom` in the basis
//! {1, i} (quadrangulations) or {1, ω = e^{iπ/3}} (triangulations).

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::geom::{self, Pt};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Quadrangulation,
    Triangulation,
}

impl CellKind {
    /// Cartesian image of the second basis vector.
    pub fn e2(self) -> (f64, f64) {
        match self {
            CellKind::Quadrangulation => (0.0, 1.0),
            CellKind::Triangulation => (0.5, 3f64.sqrt() / 2.0),
        }
    }

    pub fn cell_area(self) -> f64 {
        self.e2().1
    }

    /// Elementary rotation angle of the point group.
    pub fn rotation_angle(self) -> f64 {
        match self {
            CellKind::Quadrangulation => std::f64::consts::FRAC_PI_2,
            CellKind::Triangulation => std::f64::consts::FRAC_PI_3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeEdge {
    pub from: usize,
    pub to: usize,
    pub offset: [i64; 2],
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub name: String,
    pub cell_kind: CellKind,
    /// Common denominator of the vertex coordinates.
    pub denom: i64,
    /// Vertex numerators, each in [0, denom)².
    pub vertices: Vec<[i64; 2]>,
    /// Directed edges; the list contains both orientations of every edge.
    pub edges: Vec<LatticeEdge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinLattice {
    Square,
    ShiftedSquare,
    Triangular,
    Hexagonal,
}

impl std::str::FromStr for BuiltinLattice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Self::Square),
            "shifted_square" => Ok(Self::ShiftedSquare),
            "triangular" => Ok(Self::Triangular),
            "hexagonal" => Ok(Self::Hexagonal),
            _ => Err(Error::Schema(format!("unknown builtin lattice '{s}'"))),
        }
    }
}

fn nn_edges(offsets: &[[i64; 2]]) -> Vec<LatticeEdge> {
    offsets
        .iter()
        .map(|&o| LatticeEdge {
            from: 0,
            to: 0,
            offset: o,
            weight: 1.0,
        })
        .collect()
}

pub fn builtin_lattice(name: BuiltinLattice) -> LatticeSpec {
    let square = [[1, 0], [0, 1], [-1, 0], [0, -1]];
    match name {
        BuiltinLattice::Square => LatticeSpec {
            name: "square".into(),
            cell_kind: CellKind::Quadrangulation,
            denom: 1,
            vertices: vec![[0, 0]],
            edges: nn_edges(&square),
        },
        BuiltinLattice::ShiftedSquare => LatticeSpec {
            name: "shifted_square".into(),
            cell_kind: CellKind::Quadrangulation,
            denom: 2,
            vertices: vec![[1, 1]],
            edges: nn_edges(&square),
        },
        BuiltinLattice::Triangular => LatticeSpec {
            name: "triangular".into(),
            cell_kind: CellKind::Triangulation,
            denom: 1,
            vertices: vec![[0, 0]],
            edges: nn_edges(&[[1, 0], [0, 1], [-1, 1], [-1, 0], [0, -1], [1, -1]]),
        },
        BuiltinLattice::Hexagonal => {
            // A at (1+ω)/3 and B at 2(1+ω)/3; the origin is a hexagon centre.
            let mut edges = Vec::new();
            for o in [[0, 0], [-1, 0], [0, -1]] {
                edges.push(LatticeEdge {
                    from: 0,
                    to: 1,
                    offset: o,
                    weight: 1.0,
                });
                edges.push(LatticeEdge {
                    from: 1,
                    to: 0,
                    offset: [-o[0], -o[1]],
                    weight: 1.0,
                });
            }
            LatticeSpec {
                name: "hexagonal".into(),
                cell_kind: CellKind::Triangulation,
                denom: 3,
                vertices: vec![[1, 1], [2, 2]],
                edges,
            }
        }
    }
}

impl LatticeSpec {
    /// √(cell area / vertices per cell).
    pub fn delta0(&self) -> f64 {
        (self.cell_kind.cell_area() / self.vertices.len() as f64).sqrt()
    }

    /// Displacement of an edge in integer units of 1/denom.
    pub fn displacement(&self, e: &LatticeEdge) -> Pt {
        let d = self.denom;
        let a = self.vertices[e.from];
        let b = self.vertices[e.to];
        [d * e.offset[0] + b[0] - a[0], d * e.offset[1] + b[1] - a[1]]
    }

    pub fn to_cartesian(&self, p: Pt) -> (f64, f64) {
        geom::cartesian(self.cell_kind, p, self.denom)
    }

    /// Vertex class of an absolute lattice point, if it is one.
    pub fn class_of(&self, p: Pt) -> Option<usize> {
        let d = self.denom;
        let r = [p[0].rem_euclid(d), p[1].rem_euclid(d)];
        self.vertices.iter().position(|v| *v == r)
    }

    /// Outgoing edges grouped by source class.
    pub fn out_edges(&self) -> Vec<Vec<(Pt, f64)>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            out[e.from].push((self.displacement(e), e.weight));
        }
        out
    }

    /// Total outgoing weight per class.
    pub fn class_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.vertices.len()];
        for e in &self.edges {
            w[e.from] += e.weight;
        }
        w
    }

    pub fn max_class_weight(&self) -> f64 {
        self.class_weights().into_iter().fold(0.0, f64::max)
    }

    /// Per-class covariance Σ w (y−x)(y−x)ᵀ in Cartesian coordinates at unit cell scale.
    pub fn covariances(&self) -> Vec<[[f64; 2]; 2]> {
        let mut cov = vec![[[0.0; 2]; 2]; self.vertices.len()];
        for e in &self.edges {
            let (x, y) = self.to_cartesian(self.displacement(e));
            let c = &mut cov[e.from];
            c[0][0] += e.weight * x * x;
            c[0][1] += e.weight * x * y;
            c[1][0] += e.weight * y * x;
            c[1][1] += e.weight * y * y;
        }
        cov
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lattice serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: LatticeSpec =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("lattice json: {e}")))?;
        if spec.denom <= 0 {
            return Err(Error::Schema("denom must be positive".into()));
        }
        for v in &spec.vertices {
            if v.iter().any(|c| *c < 0 || *c >= spec.denom) {
                return Err(Error::Schema(format!("vertex {v:?} outside [0, denom)")));
            }
        }
        for e in &spec.edges {
            if e.from >= spec.vertices.len() || e.to >= spec.vertices.len() {
                return Err(Error::Schema("edge endpoint out of range".into()));
            }
        }
        Ok(spec)
    }

    /// Canonical form used for equality up to edge ordering.
    pub fn canonical(&self) -> Vec<(usize, usize, [i64; 2], u64)> {
        let mut v: Vec<_> = self
            .edges
            .iter()
            .map(|e| (e.from, e.to, e.offset, (e.weight * 1e12).round() as u64))
            .collect();
        v.sort();
        v
    }
}

/// Multiply all weights by the common factor making the covariance δ₀²·Id.
pub fn normalize_weights(spec: &LatticeSpec) -> Result<LatticeSpec> {
    let d0sq = spec.delta0().powi(2);
    let covs = spec.covariances();
    let mut factor = None::<f64>;
    for (class, c) in covs.iter().enumerate() {
        let tr = 0.5 * (c[0][0] + c[1][1]);
        let off = c[0][1].abs() + (c[0][0] - c[1][1]).abs();
        if tr <= 0.0 || off > 1e-12 * tr {
            return Err(Error::NonScalarCovariance(format!(
                "class {class}: covariance {c:?} is not a multiple of the identity"
            )));
        }
        let f = d0sq / tr;
        if let Some(prev) = factor {
            if (prev - f).abs() > 1e-12 * f {
                return Err(Error::NonScalarCovariance(format!(
                    "classes need different factors {prev} and {f}"
                )));
            }
        }
        factor.get_or_insert(f);
    }
    let f = factor.ok_or_else(|| Error::Schema("lattice has no vertices".into()))?;
    let mut out = spec.clone();
    if (f - 1.0).abs() > 1e-15 {
        for e in &mut out.edges {
            e.weight *= f;
        }
    }
    Ok(out)
}

/// Empirical covariance of walk displacements (Cartesian, unit cell scale) after walk-time `t`,
/// started from `class`, with the standard error of each entry.
pub fn simulate_covariance(
    spec: &LatticeSpec,
    class: usize,
    t: f64,
    samples: usize,
    seed: u64,
) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let out = spec.out_edges();
    let totals = spec.class_weights();
    let steps: Vec<Vec<((f64, f64), f64, Pt)>> = out
        .iter()
        .map(|es| {
            es.iter()
                .map(|&(d, w)| (spec.to_cartesian(d), w, d))
                .collect()
        })
        .collect();
    let origin = spec.vertices[class];
    let mut sum = [[0.0; 2]; 2];
    let mut sum_sq = [[0.0; 2]; 2];
    for _ in 0..samples {
        let mut pos = origin;
        let (mut x, mut y) = (0.0, 0.0);
        let mut clock = 0.0;
        loop {
            let c = spec.class_of(pos).expect("walk stays on the lattice");
            let u: f64 = rng.gen();
            clock += -(1.0 - u).ln() / totals[c];
            if clock > t {
                break;
            }
            let mut pick = rng.gen::<f64>() * totals[c];
            let mut chosen = steps[c].last().expect("class has edges");
            for s in &steps[c] {
                if pick < s.1 {
                    chosen = s;
                    break;
                }
                pick -= s.1;
            }
            x += chosen.0 .0;
            y += chosen.0 .1;
            pos = [pos[0] + chosen.2[0], pos[1] + chosen.2[1]];
        }
        let v = [x, y];
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += v[i] * v[j];
                sum_sq[i][j] += (v[i] * v[j]).powi(2);
            }
        }
    }
    let n = samples as f64;
    let mut cov = [[0.0; 2]; 2];
    let mut err = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            cov[i][j] = sum[i][j] / n;
            err[i][j] = ((sum_sq[i][j] / n - cov[i][j] * cov[i][j]) / n).sqrt();
        }
    }
    (cov, err)
}

/// Builtin lattice with normalised weights.
pub fn normalized_builtin(name: BuiltinLattice) -> LatticeSpec {
    normalize_weights(&builtin_lattice(name)).expect("builtins are symmetric")
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.failures.is_empty()
    }
    pub(crate) fn push(&mut self, s: impl Into<String>) {
        self.failures.push(s.into());
    }
}

type EdgeKey = (usize, Pt, Pt);

fn edge_map(spec: &LatticeSpec) -> HashMap<EdgeKey, f64> {
    // keyed by (source class, absolute source position in cell 0, absolute displacement)
    let mut m = HashMap::new();
    for e in &spec.edges {
        let key = (e.from, spec.vertices[e.from], spec.displacement(e));
        *m.entry(key).or_insert(0.0) += e.weight;
    }
    m
}

pub fn validate_symmetry(spec: &LatticeSpec) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let m = edge_map(spec);
    for e in &spec.edges {
        if !(e.weight > 0.0) {
            rep.push(format!("non-positive weight {} on edge {e:?}", e.weight));
        }
        let back = LatticeEdge {
            from: e.to,
            to: e.from,
            offset: [-e.offset[0], -e.offset[1]],
            weight: e.weight,
        };
        let key = (
            back.from,
            spec.vertices[back.from],
            spec.displacement(&back),
        );
        match m.get(&key) {
            Some(w)
                if (w - m[&(e.from, spec.vertices[e.from], spec.displacement(e))]).abs()
                    <= 1e-12 => {}
            _ => rep.push(format!(
                "asymmetric weight: reverse of {e:?} missing or different"
            )),
        }
    }
    let group = geom::point_group(spec.cell_kind);
    let gens = [group.rotation, group.reflection];
    for (gi, g) in gens.iter().enumerate() {
        let what = if gi == 0 { "rotation" } else { "reflection" };
        for e in &spec.edges {
            let src = spec.vertices[e.from];
            let img = geom::apply(g, src);
            let Some(cls) = spec.class_of(img) else {
                rep.push(format!("{what} maps vertex {src:?} off the lattice"));
                continue;
            };
            let disp = geom::apply(g, spec.displacement(e));
            let rsrc = [img[0].rem_euclid(spec.denom), img[1].rem_euclid(spec.denom)];
            let w0 = m[&(e.from, src, spec.displacement(e))];
            match m.get(&(cls, rsrc, disp)) {
                Some(w) if (w - w0).abs() <= 1e-12 * w0.abs().max(1.0) => {}
                Some(w) => rep.push(format!(
                    "{what} changes weight of edge {e:?}: {w0} vs {w} (witness)"
                )),
                None => rep.push(format!(
                    "{what} maps edge {e:?} outside the edge set (witness)"
                )),
            }
        }
    }
    // connectivity on the closed unit face with face-crossing edges removed
    let face = geom::unit_face(spec.cell_kind, spec.denom);
    let mut pts = Vec::new();
    for m0 in -1..=2 {
        for n0 in -1..=2 {
            for (c, v) in spec.vertices.iter().enumerate() {
                let p = [spec.denom * m0 + v[0], spec.denom * n0 + v[1]];
                if face.contains(p) {
                    pts.push((p, c));
                }
            }
        }
    }
    if !pts.is_empty() {
        let index: HashMap<Pt, usize> = pts.iter().enumerate().map(|(i, (p, _))| (*p, i)).collect();
        let out = spec.out_edges();
        let mut seen = HashSet::new();
        let mut stack = vec![0usize];
        seen.insert(0usize);
        while let Some(i) = stack.pop() {
            let (p, c) = pts[i];
            for (d, _) in &out[c] {
                let q = [p[0] + d[0], p[1] + d[1]];
                if let Some(&j) = index.get(&q) {
                    if seen.insert(j) {
                        stack.push(j);
                    }
                }
            }
        }
        if seen.len() != pts.len() {
            rep.push(format!(
                "restriction to the closed unit face is disconnected ({} of {} vertices reached)",
                seen.len(),
                pts.len()
            ));
        }
    }
    rep
}

/// Rotate all vertex coordinates by the elementary symmetry angle.
pub fn rotated(spec: &LatticeSpec) -> LatticeSpec {
    let g = geom::point_group(spec.cell_kind).rotation;
    let mut out = spec.clone();
    let d = spec.denom;
    let mut offsets = Vec::new();
    for v in &mut out.vertices {
        let img = geom::apply(&g, *v);
        let r = [img[0].rem_euclid(d), img[1].rem_euclid(d)];
        offsets.push([(img[0] - r[0]) / d, (img[1] - r[1]) / d]);
        *v = r;
    }
    for e in &mut out.edges {
        let o = geom::apply(&g, e.offset);
        let (a, b) = (offsets[e.from], offsets[e.to]);
        e.offset = [o[0] + b[0] - a[0], o[1] + b[1] - a[1]];
    }
    // class order follows the rotated coordinates
    let mut order: Vec<usize> = (0..out.vertices.len()).collect();
    order.sort_by_key(|&i| out.vertices[i]);
    let inv: Vec<usize> = {
        let mut inv = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        inv
    };
    out.vertices = order.iter().map(|&i| out.vertices[i]).collect();
    for e in &mut out.edges {
        e.from = inv[e.from];
        e.to = inv[e.to];
    }
    out
}
