use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{fans, validate_flatness, Bc, CMat, EdgeBc, Fan, SurfaceSpec};
use crate::error::{Error, Result};
use crate::geom::{self, FaceGeom, Pt};
use crate::lattice::{CellKind, LatticeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexTag {
    Interior,
    FaceEdge,
    FaceCorner,
    NeumannBoundary,
    ConeTip,
}

#[derive(Clone, Debug)]
pub struct DVertex {
    /// Every (face, chart point) representing this vertex; the first is primary.
    pub occurrences: Vec<(usize, Pt)>,
    pub class: usize,
    /// Total outgoing lattice weight w_x.
    pub weight: f64,
    pub tag: VertexTag,
    /// Fraction of a lattice cell owned by the vertex (1, 1/2 on edges, 1/4 or 1/6 at corners, summed).
    pub cell_weight: f64,
}

/// Directed edge x → y. `to = None` means the far end is a removed Dirichlet vertex.
#[derive(Clone, Copy, Debug)]
pub struct HalfEdge {
    pub from: usize,
    pub to: Option<usize>,
    pub w: f64,
    /// Index into `DiscreteSurface::connections` of the transport from y's fibre to x's.
    pub conn: u32,
    /// Set for edges reflected across an unglued boundary (+1 Neumann, −1 Dirichlet).
    pub sign: Option<i8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityKind {
    Cone,
    Corner,
    Puncture,
}

#[derive(Clone, Debug)]
pub struct Singularity {
    pub kind: SingularityKind,
    pub angle: f64,
    /// Angle in elementary rotations of the point group.
    pub angle_units: usize,
    /// Boundary conditions on the first and last ray (corners only).
    pub bcs: Option<(Bc, Bc)>,
    /// Holonomy of a cone or monodromy of a puncture.
    pub monodromy: Option<CMat>,
    pub face: usize,
    /// Chart position `pos / den` in lattice units of the face of side `size`.
    pub pos: Pt,
    pub den: i64,
    pub fan: Option<usize>,
    /// Developing map of the face chart into the model chart (corner singularities at split points).
    pub rot: Option<geom::Mat2>,
    pub tip_vertex: Option<usize>,
}

impl Singularity {
    pub fn describe(&self) -> String {
        match self.kind {
            SingularityKind::Cone => format!("cone {:.6}", self.angle),
            SingularityKind::Corner => {
                let (a, b) = self.bcs.unwrap();
                format!("corner {:.6} {}{}", self.angle, a.letter(), b.letter())
            }
            SingularityKind::Puncture => "puncture".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Counts {
    pub vertices: usize,
    pub edges: usize,
    /// Boundary lengths in mesh units (length / δ).
    pub dirichlet_length: f64,
    pub neumann_length: f64,
    pub volume_weighted: f64,
}

#[derive(Clone, Debug)]
pub struct DiscreteSurface {
    pub spec: SurfaceSpec,
    pub lattice: LatticeSpec,
    pub n: usize,
    /// Face side length in lattice coordinate units (N·denom).
    pub size: i64,
    pub delta: f64,
    pub vertices: Vec<DVertex>,
    pub half_edges: Vec<HalfEdge>,
    /// Interned transports; index 0 is the identity.
    pub connections: Vec<CMat>,
    pub fans: Vec<Fan>,
    pub singularities: Vec<Singularity>,
    lookup: HashMap<(usize, Pt), Option<usize>>,
}

impl DiscreteSurface {
    pub fn rank(&self) -> usize {
        self.spec.rank
    }

    pub fn dimension(&self) -> usize {
        self.rank() * self.vertices.len()
    }

    pub fn face(&self) -> FaceGeom {
        self.spec.face_geom(self.size)
    }

    pub fn kind(&self) -> CellKind {
        self.spec.face_kind
    }

    /// Active vertex at a face chart point; `Some(None)` for a removed Dirichlet vertex.
    pub fn vertex_at(&self, face: usize, p: Pt) -> Option<Option<usize>> {
        self.lookup.get(&(face, p)).copied()
    }

    pub fn counts(&self) -> Counts {
        let boundary_length = |want: Bc| -> f64 {
            let mut len = 0.0;
            for (_, _, b) in &self.spec.boundary {
                len += match *b {
                    EdgeBc::Single(bc) => (bc == want) as i32 as f64,
                    EdgeBc::Split {
                        num,
                        den,
                        before,
                        after,
                    } => {
                        let t = num as f64 / den as f64;
                        (before == want) as i32 as f64 * t
                            + (after == want) as i32 as f64 * (1.0 - t)
                    }
                };
            }
            len / self.delta
        };
        let edges = self
            .half_edges
            .iter()
            .filter(|h| h.sign.is_none() && h.to.is_some())
            .count();
        let dangling = self
            .half_edges
            .iter()
            .filter(|h| h.sign.is_none() && h.to.is_none())
            .count();
        Counts {
            vertices: self.vertices.len(),
            edges: (edges + 1) / 2 + dangling,
            dirichlet_length: boundary_length(Bc::Dirichlet),
            neumann_length: boundary_length(Bc::Neumann),
            volume_weighted: self.vertices.iter().map(|v| v.cell_weight).sum(),
        }
    }

    /// Cartesian position (macro units, face chart) of a vertex's primary occurrence.
    pub fn position(&self, v: usize) -> (usize, f64, f64) {
        let (f, p) = self.vertices[v].occurrences[0];
        let (x, y) = geom::cartesian(self.kind(), p, self.size);
        (f, x, y)
    }

    pub fn to_adjacency_csv(&self) -> String {
        let mut s = String::from("from,to,weight,reflection_sign,connection\n");
        for h in &self.half_edges {
            let to = h.to.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
            let sign = h.sign.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{:.16e},{},{}", h.from, to, h.w, sign, h.conn);
        }
        s
    }

    pub fn header_json(&self) -> serde_json::Value {
        let sings: Vec<serde_json::Value> = self
            .singularities
            .iter()
            .map(|s| {
                let (x, y) = geom::cartesian(self.kind(), s.pos, self.size * s.den);
                serde_json::json!({
                    "kind": s.kind,
                    "angle": s.angle,
                    "bcs": s.bcs.map(|(a, b)| format!("{}{}", a.letter(), b.letter())),
                    "face": s.face,
                    "position": [x, y],
                    "tip_vertex": s.tip_vertex,
                })
            })
            .collect();
        let conns: Vec<Vec<[f64; 2]>> = self
            .connections
            .iter()
            .map(|m| m.transpose().iter().map(|z| [z.re, z.im]).collect())
            .collect();
        serde_json::json!({
            "N": self.n,
            "lattice": self.lattice.name,
            "rank": self.rank(),
            "counts": self.counts(),
            "singularities": sings,
            "connections": conns,
        })
    }

    /// Vertex permutation-invariant fingerprint: sorted (tag, degree, weights) multiset.
    pub fn canonical_signature(&self) -> Vec<(usize, u64, u64)> {
        let mut deg = vec![(0usize, 0f64); self.vertices.len()];
        for h in &self.half_edges {
            deg[h.from].0 += 1;
            deg[h.from].1 += h.w * h.sign.unwrap_or(1) as f64;
        }
        let mut v: Vec<_> = deg
            .iter()
            .zip(&self.vertices)
            .map(|(d, x)| {
                (
                    d.0,
                    (d.1 * 1e9).round() as i64 as u64,
                    (x.cell_weight * 1e9).round() as u64,
                )
            })
            .collect();
        v.sort();
        v
    }
}

struct Interner {
    table: Vec<CMat>,
    index: HashMap<Vec<u64>, u32>,
}

impl Interner {
    fn new(d: usize) -> Self {
        let mut s = Interner {
            table: Vec::new(),
            index: HashMap::new(),
        };
        s.get(&CMat::identity(d, d));
        s
    }

    fn get(&mut self, m: &CMat) -> u32 {
        // normalise −0.0 so equal matrices share an entry
        let key: Vec<u64> = m
            .iter()
            .flat_map(|z| [(z.re + 0.0).to_bits(), (z.im + 0.0).to_bits()])
            .collect();
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.table.len() as u32;
        self.table.push(m.clone());
        self.index.insert(key, i);
        i
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Puncture in scaled chart coordinates (everything multiplied by `den`).
struct Cut {
    face: usize,
    c: [i128; 2],
    u: [i128; 2],
    den: i128,
    m: CMat,
    geom: FaceGeom,
}

fn orient128(a: [i128; 2], b: [i128; 2], c: [i128; 2]) -> i128 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

impl Cut {
    fn h(&self, e: usize, p: [i128; 2]) -> i128 {
        let s = self.geom.size as i128;
        match (self.geom.kind, e) {
            (CellKind::Quadrangulation, 0) => p[1],
            (CellKind::Quadrangulation, 1) => s - p[0],
            (CellKind::Quadrangulation, 2) => s - p[1],
            (CellKind::Quadrangulation, _) => p[0],
            (CellKind::Triangulation, 0) => p[1],
            (CellKind::Triangulation, 1) => s - p[0] - p[1],
            (CellKind::Triangulation, _) => p[0],
        }
    }

    /// +1 for a right-to-left crossing of the cut inside the closed face, −1 for left-to-right.
    /// Points on the cut line count as lying on its left.
    fn crossing(&self, a: Pt, b: Pt) -> Result<i32> {
        let a = [a[0] as i128 * self.den, a[1] as i128 * self.den];
        let b = [b[0] as i128 * self.den, b[1] as i128 * self.den];
        let c = self.c;
        let cu = [c[0] + self.u[0], c[1] + self.u[1]];
        let (oa, ob) = (orient128(c, cu, a), orient128(c, cu, b));
        let abc = orient128(a, b, c);
        if abc == 0 {
            // puncture on the segment's line: reject if it lies between the ends
            let dot = (c[0] - a[0]) * (c[0] - b[0]) + (c[1] - a[1]) * (c[1] - b[1]);
            if dot <= 0 {
                return Err(Error::PunctureOnEdge(format!(
                    "segment through puncture in face {}",
                    self.face
                )));
            }
        }
        let dir = if oa < 0 && ob >= 0 {
            1
        } else if oa >= 0 && ob < 0 {
            -1
        } else {
            return Ok(0);
        };
        // ray parameter s = num/den of the intersection with line ab
        let ab = [b[0] - a[0], b[1] - a[1]];
        let mut den = ab[0] * self.u[1] - ab[1] * self.u[0];
        let mut num = -abc;
        if den < 0 {
            den = -den;
            num = -num;
        }
        if num <= 0 {
            return Ok(0);
        }
        let lin = |e: usize| self.h(e, self.u) - self.h(e, [0, 0]);
        let inside = (0..self.geom.edge_count()).all(|e| self.h(e, c) * den + num * lin(e) >= 0);
        Ok(if inside { dir } else { 0 })
    }
}

/// Accumulates the transport along a path as a product of crossings.
fn apply_cuts(cuts: &[Cut], face: usize, a: Pt, b: Pt, acc: &mut Option<CMat>) -> Result<()> {
    for cut in cuts.iter().filter(|c| c.face == face) {
        let m = match cut.crossing(a, b)? {
            0 => continue,
            1 => cut.m.clone(),
            _ => cut.m.adjoint(),
        };
        *acc = Some(match acc.take() {
            None => m,
            Some(p) => m * p,
        });
    }
    Ok(())
}

pub fn discretize(spec: &SurfaceSpec, lat: &LatticeSpec, n: usize) -> Result<DiscreteSurface> {
    if n < 2 {
        return Err(Error::MeshIncompatible {
            n,
            why: "N must be at least 2".into(),
        });
    }
    if lat.cell_kind != spec.face_kind {
        return Err(Error::LatticeIncompatible(format!(
            "{} lattice cannot tile {:?} faces",
            lat.name, spec.face_kind
        )));
    }
    let report = validate_flatness(spec);
    if !report.is_empty() {
        return Err(Error::NotFlat(report.failures.join("; ")));
    }
    for (f, e, b) in &spec.boundary {
        if let EdgeBc::Split { den, .. } = b {
            if n as i64 % den != 0 {
                return Err(Error::MeshIncompatible {
                    n,
                    why: format!("split on edge ({f},{e}) needs {den} | N"),
                });
            }
        }
    }
    let dd = lat.denom;
    let size = n as i64 * dd;
    let face = spec.face_geom(size);
    let ne = face.edge_count();
    let group = geom::point_group(spec.face_kind);
    let d = spec.rank;
    let out_edges = lat.out_edges();
    let class_w = lat.class_weights();

    // occurrences
    let mut occ: Vec<(usize, Pt, usize)> = Vec::new();
    let mut occ_id: HashMap<(usize, Pt), usize> = HashMap::new();
    for f in 0..spec.faces {
        for m1 in -1..=(n as i64 + 1) {
            for m0 in -1..=(n as i64 + 1) {
                for (c, v) in lat.vertices.iter().enumerate() {
                    let p = [dd * m0 + v[0], dd * m1 + v[1]];
                    if face.contains(p) {
                        occ_id.insert((f, p), occ.len());
                        occ.push((f, p, c));
                    }
                }
            }
        }
    }

    // identification across gluings
    let affines: Vec<[geom::Affine; 2]> = (0..spec.gluings.len())
        .map(|g| {
            [0, 1].map(|side| spec.glue_affine(super::GlueRef { gluing: g, side }, size, &group))
        })
        .collect();
    let mut uf = UnionFind((0..occ.len()).collect());
    let mut glued: HashMap<usize, Vec<(usize, CMat)>> = HashMap::new();
    for (i, &(f, p, _)) in occ.iter().enumerate() {
        for e in 0..ne {
            if face.h(e, p) != 0 {
                continue;
            }
            if let Some(r) = spec.glue_ref(f, e) {
                let (g, _) = spec.partner(r);
                let q = affines[r.gluing][r.side].apply(p);
                let j = *occ_id.get(&(g, q)).ok_or_else(|| {
                    Error::LatticeIncompatible(format!(
                        "gluing {} maps a lattice vertex to a non-vertex",
                        r.gluing
                    ))
                })?;
                uf.union(i, j);
                glued.entry(i).or_default().push((j, spec.transport(r)));
            }
        }
    }

    // boundary status per class root
    let mut bc_of_root: HashMap<usize, Bc> = HashMap::new();
    for (i, &(f, p, _)) in occ.iter().enumerate() {
        for e in 0..ne {
            if face.h(e, p) != 0 || spec.glue_ref(f, e).is_some() {
                continue;
            }
            let b = spec
                .edge_bc(f, e)
                .expect("unglued edge has a boundary condition");
            let here = b.at(face.edge_param(e, p) as i128, 1, size);
            let root = uf.find(i);
            let entry = bc_of_root.entry(root).or_insert(here);
            *entry = entry.meet(here);
        }
    }

    // vertex indexing in occurrence order
    let mut root_vertex: HashMap<usize, Option<usize>> = HashMap::new();
    let mut vertices: Vec<DVertex> = Vec::new();
    let mut lookup = HashMap::with_capacity(occ.len());
    let fan_list = fans(spec);
    let corner_weight = match spec.face_kind {
        CellKind::Quadrangulation => 0.25,
        CellKind::Triangulation => 1.0 / 6.0,
    };
    for (i, &(f, p, c)) in occ.iter().enumerate() {
        let root = uf.find(i);
        let idx = *root_vertex.entry(root).or_insert_with(|| {
            if bc_of_root.get(&root) == Some(&Bc::Dirichlet) {
                None
            } else {
                vertices.push(DVertex {
                    occurrences: Vec::new(),
                    class: c,
                    weight: class_w[c],
                    tag: VertexTag::Interior,
                    cell_weight: 0.0,
                });
                Some(vertices.len() - 1)
            }
        });
        lookup.insert((f, p), idx);
        if let Some(v) = idx {
            let on: usize = (0..ne).filter(|&e| face.h(e, p) == 0).count();
            let vx = &mut vertices[v];
            vx.occurrences.push((f, p));
            vx.cell_weight += match on {
                0 => 1.0,
                1 => 0.5,
                _ => corner_weight,
            };
        }
    }
    for v in vertices.iter_mut() {
        let mut tag = VertexTag::Interior;
        for &(f, p) in &v.occurrences {
            let on: Vec<usize> = (0..ne).filter(|&e| face.h(e, p) == 0).collect();
            let t = if let Some(ci) = face.corner_index(p) {
                let fan = fan_list.iter().find(|fan| fan.contains(f, ci)).unwrap();
                if fan.closed && fan.sectors.len() != group.order {
                    VertexTag::ConeTip
                } else if !fan.closed {
                    VertexTag::NeumannBoundary
                } else {
                    VertexTag::FaceCorner
                }
            } else if on.iter().any(|&e| spec.glue_ref(f, e).is_none()) {
                VertexTag::NeumannBoundary
            } else if !on.is_empty() {
                VertexTag::FaceEdge
            } else {
                VertexTag::Interior
            };
            tag = tag.max_priority(t);
        }
        v.tag = tag;
    }

    // fibre frame of each occurrence relative to the vertex's primary chart
    let mut chart: Vec<Option<CMat>> = vec![None; occ.len()];
    let mut framed = vec![false; occ.len()];
    for start in 0..occ.len() {
        if framed[start] || !glued.contains_key(&start) {
            continue;
        }
        framed[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let ti = chart[i].clone().unwrap_or_else(|| CMat::identity(d, d));
            for (j, u) in glued.get(&i).into_iter().flatten() {
                if !framed[*j] {
                    framed[*j] = true;
                    let tj = u * &ti;
                    chart[*j] = if tj == CMat::identity(d, d) {
                        None
                    } else {
                        Some(tj)
                    };
                    queue.push_back(*j);
                }
            }
        }
    }

    let cuts: Vec<Cut> = spec
        .punctures
        .iter()
        .map(|p| Cut {
            face: p.face,
            c: [(size * p.pos[0]) as i128, (size * p.pos[1]) as i128],
            u: [p.cut[0] as i128, p.cut[1] as i128],
            den: p.den as i128,
            m: p.m.clone(),
            geom: FaceGeom {
                kind: spec.face_kind,
                size: size * p.den,
            },
        })
        .collect();

    let mut interner = Interner::new(d);
    let mut half_edges = Vec::new();
    let target = |g: usize, q: Pt| -> Result<usize> {
        if lat.class_of(q).is_none() {
            return Err(Error::LatticeIncompatible(format!(
                "edge image {q:?} is not a lattice vertex"
            )));
        }
        occ_id.get(&(g, q)).copied().ok_or_else(|| {
            Error::LatticeIncompatible(format!("edge image {q:?} lies outside face {g}"))
        })
    };
    for (oi, &(f, p, c)) in occ.iter().enumerate() {
        let Some(x) = lookup[&(f, p)] else { continue };
        for &(disp, w) in &out_edges[c] {
            let q = geom::add(p, disp);
            let neg: Vec<usize> = (0..ne).filter(|&e| face.h(e, q) < 0).collect();
            let mut phi: Option<CMat> = None;
            let (to, sign) = if neg.is_empty() {
                let tangent = (0..ne).find(|&e| face.h(e, p) == 0 && face.h(e, q) == 0);
                if let Some(e) = tangent {
                    if let Some(r) = spec.glue_ref(f, e) {
                        if spec.partner(r) < (f, e) {
                            continue;
                        }
                    }
                }
                apply_cuts(&cuts, f, p, q, &mut phi)?;
                (target(f, q)?, None)
            } else if neg
                .iter()
                .any(|&e| spec.glue_ref(f, e).is_some() && face.h(e, p) == 0)
            {
                continue;
            } else if neg.len() == 1 && spec.glue_ref(f, neg[0]).is_some() {
                let r = spec.glue_ref(f, neg[0]).unwrap();
                let (g, _) = spec.partner(r);
                let aff = affines[r.gluing][r.side];
                let (p2, q2) = (aff.apply(p), aff.apply(q));
                if !face.contains(q2) {
                    return Err(Error::LatticeIncompatible(format!(
                        "edge from face {f} crosses more than one seam"
                    )));
                }
                apply_cuts(&cuts, f, p, q, &mut phi)?;
                let u = spec.transport(r);
                phi = Some(match phi.take() {
                    None => u,
                    Some(m) => u * m,
                });
                apply_cuts(&cuts, g, p2, q2, &mut phi)?;
                (target(g, q2)?, None)
            } else if neg.iter().all(|&e| spec.glue_ref(f, e).is_none()) {
                if !owns_exterior_step(&fan_list, &face, spec.face_kind, f, p, disp) {
                    continue;
                }
                let (mut a, mut b) = (p, q);
                let mut s = 1i8;
                let mut steps = 0;
                apply_cuts(&cuts, f, a, b, &mut phi)?;
                loop {
                    let neg: Vec<usize> = (0..ne).filter(|&e| face.h(e, b) < 0).collect();
                    let Some(&e) = neg.first() else { break };
                    if spec.glue_ref(f, e).is_some() {
                        return Err(Error::UnreflectableEdge(format!(
                            "edge from {p:?} in face {f} leaves through a seam and a boundary"
                        )));
                    }
                    // boundary condition where the unfolded segment meets edge e
                    let (ha, hb) = (face.h(e, a) as i128, face.h(e, b) as i128);
                    let (ta, tb) = (face.edge_param(e, a) as i128, face.edge_param(e, b) as i128);
                    let bc = spec.edge_bc(f, e).unwrap().at(
                        ta * (ha - hb) + ha * (tb - ta),
                        ha - hb,
                        size,
                    );
                    if bc == Bc::Dirichlet {
                        s = -s;
                    }
                    let refl = face.reflection(e, &group);
                    a = refl.apply(a);
                    b = refl.apply(b);
                    apply_cuts(&cuts, f, a, b, &mut phi)?;
                    steps += 1;
                    if steps > 8 {
                        return Err(Error::UnreflectableEdge(format!(
                            "edge from {p:?} does not unfold"
                        )));
                    }
                }
                (target(f, b)?, Some(s))
            } else {
                return Err(Error::UnreflectableEdge(format!(
                    "edge from {p:?} in face {f} crosses a seam and a boundary near a corner"
                )));
            };
            // conjugate chart transports into the primary frames of both ends
            if let Some(tx) = &chart[oi] {
                phi = Some(phi.map_or_else(|| tx.clone(), |m| m * tx));
            }
            if let Some(ty) = &chart[to] {
                phi = Some(ty.adjoint() * phi.unwrap_or_else(|| CMat::identity(d, d)));
            }
            let conn = match phi {
                None => 0,
                Some(m) if m == CMat::identity(d, d) => 0,
                Some(m) => interner.get(&m.adjoint()),
            };
            let to = lookup[&(occ[to].0, occ[to].1)];
            half_edges.push(HalfEdge {
                from: x,
                to,
                w,
                conn,
                sign,
            });
        }
    }

    let singularities = singularities(spec, &fan_list, &face, &lookup, size)?;
    let delta = lat.delta0() / n as f64;
    Ok(DiscreteSurface {
        spec: spec.clone(),
        lattice: lat.clone(),
        n,
        size,
        delta,
        vertices,
        half_edges,
        connections: interner.table,
        fans: fan_list,
        singularities,
        lookup,
    })
}

/// A step leaving a boundary fan's tip through the missing angle is seen by the first and the
/// last sector; the one whose boundary ray is angularly closer reflects it (ties: first).
fn owns_exterior_step(
    fans: &[Fan],
    face: &FaceGeom,
    kind: CellKind,
    f: usize,
    p: Pt,
    disp: Pt,
) -> bool {
    let Some(ci) = face.corner_index(p) else {
        return true;
    };
    let Some(fan) = fans.iter().find(|fan| fan.contains(f, ci)) else {
        return true;
    };
    if fan.closed || fan.sectors.len() == 1 {
        return true;
    }
    let j = fan.sector_of(f, ci).unwrap();
    let v = geom::apply(&fan.sectors[j].rot, disp);
    let (x, y) = geom::cartesian(kind, v, 1);
    let phi = y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI);
    let alpha = fan.angle(kind);
    if phi <= alpha + 1e-9 {
        return true;
    }
    let to_first = 2.0 * std::f64::consts::PI - phi;
    let to_last = phi - alpha;
    let owner = if to_first <= to_last + 1e-9 {
        0
    } else {
        fan.sectors.len() - 1
    };
    owner == j
}

impl VertexTag {
    fn rank(self) -> u8 {
        match self {
            VertexTag::Interior => 0,
            VertexTag::FaceEdge => 1,
            VertexTag::FaceCorner => 2,
            VertexTag::NeumannBoundary => 3,
            VertexTag::ConeTip => 4,
        }
    }

    fn max_priority(self, other: VertexTag) -> VertexTag {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

fn singularities(
    spec: &SurfaceSpec,
    fans: &[Fan],
    face: &FaceGeom,
    lookup: &HashMap<(usize, Pt), Option<usize>>,
    size: i64,
) -> Result<Vec<Singularity>> {
    let group = geom::point_group(spec.face_kind);
    let theta0 = spec.face_kind.rotation_angle();
    let full = group.order;
    let mut out = Vec::new();
    for (i, fan) in fans.iter().enumerate() {
        let k = fan.sectors.len();
        let s0 = &fan.sectors[0];
        let pos = face.corner(s0.corner);
        let tip = lookup.get(&(s0.face, pos)).copied().flatten();
        let base = Singularity {
            kind: SingularityKind::Cone,
            angle: k as f64 * theta0,
            angle_units: k,
            bcs: None,
            monodromy: None,
            face: s0.face,
            pos,
            den: 1,
            fan: Some(i),
            rot: None,
            tip_vertex: tip,
        };
        if fan.closed {
            if k != full {
                out.push(Singularity {
                    monodromy: fan.holonomy.clone(),
                    ..base
                });
            }
        } else {
            let bcs = (fan.bc_first.unwrap(), fan.bc_last.unwrap());
            if 2 * k != full || bcs.0 != bcs.1 {
                out.push(Singularity {
                    kind: SingularityKind::Corner,
                    bcs: Some(bcs),
                    ..base
                });
            }
        }
    }
    for (f, e, b) in &spec.boundary {
        if let EdgeBc::Split {
            num,
            den,
            before,
            after,
        } = *b
        {
            if before == after {
                continue;
            }
            let c0 = face.corner(*e);
            let dir = geom::sub(face.corner(*e + 1), c0);
            let t = size * num / den;
            let pos = geom::add(c0, [dir[0] / size * t, dir[1] / size * t]);
            let rot = group
                .elements
                .iter()
                .copied()
                .find(|m| geom::det(m) == 1 && geom::parallel(geom::apply(m, dir), [1, 0]))
                .unwrap();
            out.push(Singularity {
                kind: SingularityKind::Corner,
                angle: std::f64::consts::PI,
                angle_units: full / 2,
                bcs: Some((after, before)),
                monodromy: None,
                face: *f,
                pos,
                den: 1,
                fan: None,
                rot: Some(rot),
                tip_vertex: lookup.get(&(*f, pos)).copied().flatten(),
            });
        }
    }
    for p in &spec.punctures {
        out.push(Singularity {
            kind: SingularityKind::Puncture,
            angle: 2.0 * std::f64::consts::PI,
            angle_units: full,
            bcs: None,
            monodromy: Some(p.m.clone()),
            face: p.face,
            pos: [size * p.pos[0], size * p.pos[1]],
            den: p.den,
            fan: None,
            rot: None,
            tip_vertex: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{normalized_builtin, BuiltinLattice};
    use crate::surface::builtin;
    use Bc::{Dirichlet as D, Neumann as N};

    fn sq() -> LatticeSpec {
        normalized_builtin(BuiltinLattice::Square)
    }

    #[test]
    fn torus_counts() {
        let ds = discretize(&builtin::torus(), &sq(), 4).unwrap();
        let c = ds.counts();
        assert_eq!(c.vertices, 16);
        assert_eq!(c.edges, 32);
        assert_eq!(ds.half_edges.len(), 64);
        assert!(ds
            .half_edges
            .iter()
            .all(|h| h.conn == 0 && h.sign.is_none()));
        assert!((c.volume_weighted - 16.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_square_removes_boundary() {
        let ds = discretize(&builtin::square([D; 4]), &sq(), 4).unwrap();
        assert_eq!(ds.vertices.len(), 9);
    }

    #[test]
    fn shifted_dirichlet_square() {
        let lat = normalized_builtin(BuiltinLattice::ShiftedSquare);
        let ds = discretize(&builtin::square([D; 4]), &lat, 6).unwrap();
        let c = ds.counts();
        assert_eq!(c.vertices, 36);
        assert!((c.dirichlet_length - 24.0).abs() < 1e-12);
    }

    #[test]
    fn neumann_square_volume() {
        let n = 5;
        let ds = discretize(&builtin::square([N; 4]), &sq(), n).unwrap();
        let c = ds.counts();
        assert_eq!(c.vertices, (n + 1) * (n + 1));
        assert!((c.volume_weighted - (n * n) as f64).abs() < 1e-12);
    }

    #[test]
    fn pillowcase_cone_tips() {
        let ds = discretize(&builtin::pillowcase(), &sq(), 4).unwrap();
        let tips = ds
            .vertices
            .iter()
            .filter(|v| v.tag == VertexTag::ConeTip)
            .count();
        assert_eq!(tips, 4);
        assert_eq!(ds.singularities.len(), 4);
        for s in &ds.singularities {
            assert_eq!(s.kind, SingularityKind::Cone);
            let v = s.tip_vertex.unwrap();
            let faces: std::collections::BTreeSet<usize> =
                ds.vertices[v].occurrences.iter().map(|o| o.0).collect();
            assert_eq!(faces.len(), 2);
        }
        // two squares of 4×4 cells, 2·25 points minus identified boundary (16) = 34
        assert_eq!(ds.vertices.len(), 34);
    }

    #[test]
    fn mixed_square_has_four_corners() {
        let ds = discretize(&builtin::square([D, N, D, N]), &sq(), 4).unwrap();
        assert_eq!(ds.singularities.len(), 4);
        assert!(ds
            .singularities
            .iter()
            .all(|s| s.kind == SingularityKind::Corner));
    }

    #[test]
    fn split_requires_divisibility() {
        let mut s = builtin::square([D; 4]);
        s.boundary[0].2 = EdgeBc::Split {
            num: 1,
            den: 3,
            before: D,
            after: N,
        };
        assert!(matches!(
            discretize(&s, &sq(), 4),
            Err(Error::MeshIncompatible { .. })
        ));
        assert!(discretize(&s, &sq(), 6).is_ok());
    }

    #[test]
    fn punctured_torus_has_twisted_edges() {
        let lat = normalized_builtin(BuiltinLattice::ShiftedSquare);
        let ds = discretize(&builtin::by_name("punctured_torus").unwrap(), &lat, 4).unwrap();
        assert_eq!(ds.connections.len(), 2);
        // the cut from the centre to the right edge crosses N/2 vertical edges, both directions
        assert_eq!(ds.half_edges.iter().filter(|h| h.conn == 1).count(), 4);
    }

    #[test]
    fn puncture_on_edge_rejected() {
        let mut s = builtin::by_name("punctured_torus").unwrap();
        s.punctures[0].pos = [1, 1];
        s.punctures[0].den = 2;
        // square lattice at even N puts a vertex on the centre
        assert!(matches!(
            discretize(&s, &sq(), 4),
            Err(Error::PunctureOnEdge(_))
        ));
    }

    #[test]
    fn triangle_torus_counts() {
        let lat = normalized_builtin(BuiltinLattice::Triangular);
        let ds = discretize(&builtin::triangle_torus(), &lat, 4).unwrap();
        assert_eq!(ds.vertices.len(), 16);
        assert_eq!(ds.half_edges.len(), 16 * 6);
    }

    #[test]
    fn hexagonal_torus_counts() {
        let lat = normalized_builtin(BuiltinLattice::Hexagonal);
        let ds = discretize(&builtin::triangle_torus(), &lat, 4).unwrap();
        assert_eq!(ds.vertices.len(), 32);
        assert_eq!(ds.half_edges.len(), 32 * 3);
    }
}
