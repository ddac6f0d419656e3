//! Flat surfaces glued from unit squares or equilateral triangles.

mod discretize;
mod json;

pub use discretize::{
    discretize, Counts, DVertex, DiscreteSurface, HalfEdge, Singularity, SingularityKind, VertexTag,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{self, FaceGeom, Mat2};
use crate::lattice::{CellKind, ValidationReport};

pub type CMat = DMatrix<Complex64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Bc {
    #[serde(rename = "D")]
    Dirichlet,
    #[serde(rename = "N")]
    Neumann,
}

impl Bc {
    /// s_N = +1, s_D = −1.
    pub fn sign(self) -> f64 {
        match self {
            Bc::Dirichlet => -1.0,
            Bc::Neumann => 1.0,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Bc::Dirichlet => 'D',
            Bc::Neumann => 'N',
        }
    }

    pub fn parse(s: &str) -> Result<Bc> {
        match s {
            "D" | "Dirichlet" | "dirichlet" => Ok(Bc::Dirichlet),
            "N" | "Neumann" | "neumann" => Ok(Bc::Neumann),
            _ => Err(Error::Schema(format!("unknown boundary condition '{s}'"))),
        }
    }

    /// Dirichlet wins where two conditions meet at a point.
    pub fn meet(self, other: Bc) -> Bc {
        if self == Bc::Dirichlet || other == Bc::Dirichlet {
            Bc::Dirichlet
        } else {
            Bc::Neumann
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EdgeBc {
    Single(Bc),
    /// bc `before` on [0, num/den) of the edge (from its start corner), `after` beyond.
    Split {
        num: i64,
        den: i64,
        before: Bc,
        after: Bc,
    },
}

impl EdgeBc {
    /// bc near the start (`at_start`) or end of the edge.
    pub fn at_end(&self, at_start: bool) -> Bc {
        match *self {
            EdgeBc::Single(b) => b,
            EdgeBc::Split { before, after, .. } => {
                if at_start {
                    before
                } else {
                    after
                }
            }
        }
    }

    /// bc at parameter pos/scale along the edge (edge length = scale).
    pub fn at(&self, pos_num: i128, pos_den: i128, scale: i64) -> Bc {
        match *self {
            EdgeBc::Single(b) => b,
            EdgeBc::Split {
                num,
                den,
                before,
                after,
            } => {
                // compare pos_num/pos_den with scale·num/den
                let lhs = pos_num * den as i128;
                let rhs = scale as i128 * num as i128 * pos_den;
                let (lhs, rhs) = if pos_den < 0 {
                    (-lhs, -rhs)
                } else {
                    (lhs, rhs)
                };
                match lhs.cmp(&rhs) {
                    std::cmp::Ordering::Less => before,
                    std::cmp::Ordering::Greater => after,
                    std::cmp::Ordering::Equal => before.meet(after),
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Gluing {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub flip: bool,
    /// Transport from the fibre over face `a` to the fibre over face `b`.
    pub u: CMat,
}

#[derive(Clone, Debug)]
pub struct PunctureSpec {
    pub face: usize,
    /// Position (pos[0]/den, pos[1]/den) in the unit face chart.
    pub pos: [i64; 2],
    pub den: i64,
    /// Counterclockwise monodromy.
    pub m: CMat,
    /// Direction of the cut ray in basis coordinates.
    pub cut: [i64; 2],
}

#[derive(Clone, Debug)]
pub struct SurfaceSpec {
    pub face_kind: CellKind,
    pub faces: usize,
    pub gluings: Vec<Gluing>,
    pub boundary: Vec<(usize, usize, EdgeBc)>,
    pub punctures: Vec<PunctureSpec>,
    pub rank: usize,
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn unitarity_defect(m: &CMat) -> f64 {
    let p = m.adjoint() * m;
    let id = identity(m.nrows());
    (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Location of a gluing on (face, edge): index and side (0 = a, 1 = b).
#[derive(Clone, Copy, Debug)]
pub struct GlueRef {
    pub gluing: usize,
    pub side: usize,
}

impl SurfaceSpec {
    pub fn face_geom(&self, size: i64) -> FaceGeom {
        FaceGeom {
            kind: self.face_kind,
            size,
        }
    }

    pub fn edges_per_face(&self) -> usize {
        self.face_geom(1).edge_count()
    }

    pub fn glue_ref(&self, f: usize, e: usize) -> Option<GlueRef> {
        self.gluings.iter().enumerate().find_map(|(i, g)| {
            if g.a == (f, e) {
                Some(GlueRef { gluing: i, side: 0 })
            } else if g.b == (f, e) {
                Some(GlueRef { gluing: i, side: 1 })
            } else {
                None
            }
        })
    }

    pub fn edge_bc(&self, f: usize, e: usize) -> Option<&EdgeBc> {
        self.boundary
            .iter()
            .find(|(ff, ee, _)| *ff == f && *ee == e)
            .map(|(_, _, b)| b)
    }

    /// Partner (face, edge) across a glued edge.
    pub fn partner(&self, r: GlueRef) -> (usize, usize) {
        let g = &self.gluings[r.gluing];
        if r.side == 0 {
            g.b
        } else {
            g.a
        }
    }

    /// Fibre transport from this side of the gluing to the other.
    pub fn transport(&self, r: GlueRef) -> CMat {
        let g = &self.gluings[r.gluing];
        if r.side == 0 {
            g.u.clone()
        } else {
            g.u.adjoint()
        }
    }

    /// Chart map taking the face on side `r` to the partner face, for face side `size`.
    pub fn glue_affine(&self, r: GlueRef, size: i64, group: &geom::PointGroup) -> Affine2 {
        let g = &self.gluings[r.gluing];
        let ((_, ea), (_, eb)) = if r.side == 0 { (g.a, g.b) } else { (g.b, g.a) };
        let face = self.face_geom(size);
        let (p0, p1) = (face.corner(ea), face.corner(ea + 1));
        let (q0, q1) = (face.corner(eb), face.corner(eb + 1));
        let u = geom::sub(p1, p0);
        let (target, want_det) = if g.flip {
            (geom::sub(q1, q0), -1)
        } else {
            (geom::sub(q0, q1), 1)
        };
        let m = group
            .elements
            .iter()
            .copied()
            .find(|m| geom::det(m) == want_det && geom::apply(m, u) == target)
            .expect("gluing isometry exists");
        let img0 = if g.flip { q0 } else { q1 };
        geom::Affine {
            m,
            t: geom::sub(img0, geom::apply(&m, p0)),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn has_dirichlet(&self) -> bool {
        self.boundary.iter().any(|(_, _, b)| match b {
            EdgeBc::Single(b) => *b == Bc::Dirichlet,
            EdgeBc::Split { before, after, .. } => {
                *before == Bc::Dirichlet || *after == Bc::Dirichlet
            }
        })
    }

    pub fn validate_structure(&self) -> Result<()> {
        let ne = self.edges_per_face();
        let mut seen = vec![vec![0u8; ne]; self.faces];
        let mut mark = |f: usize, e: usize, what: &str| -> Result<()> {
            if f >= self.faces || e >= ne {
                return Err(Error::Schema(format!(
                    "{what} refers to missing edge ({f},{e})"
                )));
            }
            seen[f][e] += 1;
            if seen[f][e] > 1 {
                return Err(Error::Schema(format!(
                    "edge ({f},{e}) is used more than once"
                )));
            }
            Ok(())
        };
        for g in &self.gluings {
            mark(g.a.0, g.a.1, "gluing")?;
            mark(g.b.0, g.b.1, "gluing")?;
        }
        for (f, e, b) in &self.boundary {
            mark(*f, *e, "boundary")?;
            if let EdgeBc::Split { num, den, .. } = b {
                if *den <= 0 || *num <= 0 || num >= den {
                    return Err(Error::Schema(format!(
                        "split fraction {num}/{den} must lie in (0,1)"
                    )));
                }
            }
        }
        for (f, row) in seen.iter().enumerate() {
            for (e, c) in row.iter().enumerate() {
                if *c == 0 {
                    return Err(Error::Schema(format!(
                        "edge ({f},{e}) is neither glued nor given a boundary condition"
                    )));
                }
            }
        }
        let d = self.rank;
        if d == 0 {
            return Err(Error::Schema("rank must be ≥ 1".into()));
        }
        for (i, g) in self.gluings.iter().enumerate() {
            if g.u.nrows() != d || g.u.ncols() != d {
                return Err(Error::Schema(format!("gluing {i}: matrix is not {d}×{d}")));
            }
            let def = unitarity_defect(&g.u);
            if def > 1e-12 {
                return Err(Error::NonUnitaryMatrix(format!(
                    "gluing {i}: defect {def:e}"
                )));
            }
        }
        let unit = self.face_geom(1);
        for (i, p) in self.punctures.iter().enumerate() {
            if p.face >= self.faces {
                return Err(Error::Schema(format!("puncture {i}: face out of range")));
            }
            if p.m.nrows() != d || p.m.ncols() != d {
                return Err(Error::Schema(format!(
                    "puncture {i}: monodromy is not {d}×{d}"
                )));
            }
            let def = unitarity_defect(&p.m);
            if def > 1e-12 {
                return Err(Error::NonUnitaryMatrix(format!(
                    "puncture {i}: defect {def:e}"
                )));
            }
            if p.den <= 0 {
                return Err(Error::Schema(format!(
                    "puncture {i}: denominator must be positive"
                )));
            }
            let scaled = FaceGeom {
                kind: unit.kind,
                size: p.den,
            };
            if (0..unit.edge_count()).any(|e| scaled.h(e, p.pos) <= 0) {
                return Err(Error::Schema(format!(
                    "puncture {i}: position must be strictly inside the face"
                )));
            }
            if p.cut == [0, 0] {
                return Err(Error::Schema(format!("puncture {i}: zero cut direction")));
            }
            for (j, q) in self.punctures.iter().enumerate().take(i) {
                if q.face == p.face
                    && q.pos[0] * p.den == p.pos[0] * q.den
                    && q.pos[1] * p.den == p.pos[1] * q.den
                {
                    return Err(Error::Schema(format!("punctures {j} and {i} coincide")));
                }
            }
        }
        Ok(())
    }
}

pub type Affine2 = geom::Affine;

/// One corner occurrence in the ccw fan around a face-complex vertex.
#[derive(Clone, Debug)]
pub struct FanSector {
    pub face: usize,
    pub corner: usize,
    /// Edge mapped to ray j.
    pub e_in: usize,
    /// Edge mapped to ray j+1.
    pub e_out: usize,
    /// Linear part of the developing map (face chart − corner) → fan chart.
    pub rot: Mat2,
}

#[derive(Clone, Debug)]
pub struct Fan {
    pub sectors: Vec<FanSector>,
    pub closed: bool,
    /// bc on ray 0 and ray k near the vertex (boundary fans only).
    pub bc_first: Option<Bc>,
    pub bc_last: Option<Bc>,
    /// Ordered product of transports around a closed fan.
    pub holonomy: Option<CMat>,
}

impl Fan {
    pub fn angle_units(&self) -> usize {
        self.sectors.len()
    }

    pub fn angle(&self, kind: CellKind) -> f64 {
        self.sectors.len() as f64 * kind.rotation_angle()
    }

    pub fn contains(&self, face: usize, corner: usize) -> bool {
        self.sectors
            .iter()
            .any(|s| s.face == face && s.corner == corner)
    }

    pub fn sector_of(&self, face: usize, corner: usize) -> Option<usize> {
        self.sectors
            .iter()
            .position(|s| s.face == face && s.corner == corner)
    }

    /// Full angle in the lattice's rotation units.
    pub fn is_flat(&self, kind: CellKind) -> bool {
        let full = geom::point_group(kind).order;
        if self.closed {
            self.sectors.len() == full
        } else {
            2 * self.sectors.len() == full && self.bc_first == self.bc_last
        }
    }
}

fn other_edge_at_corner(ne: usize, corner: usize, e: usize) -> usize {
    let a = corner;
    let b = (corner + ne - 1) % ne;
    if e == a {
        b
    } else {
        a
    }
}

fn sector_rot(
    face: &FaceGeom,
    corner: usize,
    e_in: usize,
    e_out: usize,
    j: i64,
    group: &geom::PointGroup,
) -> Mat2 {
    let c = face.corner(corner);
    let far = |e: usize| {
        let (p, q) = (face.corner(e), face.corner(e + 1));
        if p == c {
            geom::sub(q, c)
        } else {
            geom::sub(p, c)
        }
    };
    group
        .find(far(e_in), group.ray(j), far(e_out), group.ray(j + 1))
        .expect("sector developing map exists")
}

/// All face-complex vertices as ccw fans of corner occurrences.
pub fn fans(spec: &SurfaceSpec) -> Vec<Fan> {
    let group = geom::point_group(spec.face_kind);
    let face = spec.face_geom(1);
    let ne = face.edge_count();
    let d = spec.rank;
    let mut visited = vec![vec![false; ne]; spec.faces];
    let mut out = Vec::new();
    // step across edge e of face f at corner c, returning (face, corner, e_in)
    let cross = |f: usize, c: usize, e: usize| -> Option<(usize, usize, usize, CMat)> {
        let r = spec.glue_ref(f, e)?;
        let (g, e2) = spec.partner(r);
        let aff = spec.glue_affine(r, 1, &group);
        let img = aff.apply(face.corner(c));
        let c2 = face
            .corner_index(img)
            .expect("gluing maps corners to corners");
        debug_assert!(c2 == e2 || c2 == (e2 + 1) % ne);
        Some((g, c2, e2, spec.transport(r)))
    };
    for f0 in 0..spec.faces {
        for c0 in 0..ne {
            if visited[f0][c0] {
                continue;
            }
            // forward walk
            let mut chain: Vec<(usize, usize, usize, usize)> =
                vec![(f0, c0, c0, (c0 + ne - 1) % ne)];
            let mut transports: Vec<CMat> = Vec::new();
            let mut closed = false;
            loop {
                let &(f, c, _, eo) = chain.last().unwrap();
                match cross(f, c, eo) {
                    None => break,
                    Some((g, c2, e2, t)) => {
                        if g == f0 && c2 == c0 {
                            transports.push(t);
                            closed = true;
                            break;
                        }
                        transports.push(t);
                        chain.push((g, c2, e2, other_edge_at_corner(ne, c2, e2)));
                        if chain.len() > 4 * spec.faces * ne {
                            break;
                        }
                    }
                }
            }
            if !closed {
                // backward walk from the start across its e_in
                loop {
                    let &(f, c, ei, _) = chain.first().unwrap();
                    match cross(f, c, ei) {
                        None => break,
                        Some((g, c2, e2, _)) => {
                            chain.insert(0, (g, c2, other_edge_at_corner(ne, c2, e2), e2));
                            if chain.len() > 4 * spec.faces * ne {
                                break;
                            }
                        }
                    }
                }
            }
            let sectors: Vec<FanSector> = chain
                .iter()
                .enumerate()
                .map(|(j, &(f, c, ei, eo))| {
                    visited[f][c] = true;
                    FanSector {
                        face: f,
                        corner: c,
                        e_in: ei,
                        e_out: eo,
                        rot: sector_rot(&face, c, ei, eo, j as i64, &group),
                    }
                })
                .collect();
            let (bc_first, bc_last, holonomy) = if closed {
                let mut h = identity(d);
                for t in &transports {
                    h = t * h;
                }
                (None, None, Some(h))
            } else {
                let s0 = &sectors[0];
                let sl = sectors.last().unwrap();
                let bc_end = |f: usize, e: usize, c: usize| {
                    spec.edge_bc(f, e)
                        .map(|b| b.at_end(c == e))
                        .unwrap_or(Bc::Dirichlet)
                };
                (
                    Some(bc_end(s0.face, s0.e_in, s0.corner)),
                    Some(bc_end(sl.face, sl.e_out, sl.corner)),
                    None,
                )
            };
            out.push(Fan {
                sectors,
                closed,
                bc_first,
                bc_last,
                holonomy,
            });
        }
    }
    out
}

/// Holonomy defects and angle audit; punctures are exempt by construction.
pub fn validate_flatness(spec: &SurfaceSpec) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if let Err(e) = spec.validate_structure() {
        rep.push(e.to_string());
        return rep;
    }
    let group = geom::point_group(spec.face_kind);
    for (i, fan) in fans(spec).iter().enumerate() {
        let units = fan.sectors.len();
        if units == 0 || units > 8 * group.order {
            rep.push(format!(
                "vertex {i}: angle {} units outside the allowed set",
                units
            ));
        }
        if let Some(h) = &fan.holonomy {
            let defect = (h - identity(spec.rank)).norm();
            if defect > 1e-10 {
                let s = &fan.sectors[0];
                rep.push(format!(
                    "vertex {i} (face {}, corner {}): holonomy defect {defect:.6} (angle {}·π/{})",
                    s.face,
                    s.corner,
                    units,
                    group.order / 2
                ));
            }
        }
    }
    rep
}

/// Holonomy defect values per closed fan (for reporting).
pub fn holonomy_defects(spec: &SurfaceSpec) -> Vec<f64> {
    fans(spec)
        .iter()
        .filter_map(|f| {
            f.holonomy
                .as_ref()
                .map(|h| (h - identity(spec.rank)).norm())
        })
        .collect()
}

pub use json::{parse_surface_spec, surface_to_json};

/// Built-in surfaces used by tests, benches and the CLI.
pub mod builtin {
    use super::*;

    fn sq(faces: usize) -> SurfaceSpec {
        SurfaceSpec {
            face_kind: CellKind::Quadrangulation,
            faces,
            gluings: vec![],
            boundary: vec![],
            punctures: vec![],
            rank: 1,
        }
    }

    fn glue(a: (usize, usize), b: (usize, usize), flip: bool) -> Gluing {
        Gluing {
            a,
            b,
            flip,
            u: identity(1),
        }
    }

    /// Unit square with opposite edges identified.
    pub fn torus() -> SurfaceSpec {
        let mut s = sq(1);
        s.gluings = vec![glue((0, 0), (0, 2), false), glue((0, 1), (0, 3), false)];
        s
    }

    /// Two unit squares glued along all four edge pairs: a sphere with four π-cones.
    pub fn pillowcase() -> SurfaceSpec {
        let mut s = sq(2);
        // face 1 is the mirror image of face 0; edge e of face 0 meets edge (4 − e) % 4 ... with flips
        s.gluings = (0..4).map(|e| glue((0, e), (1, e), true)).collect();
        s
    }

    /// Unit square with boundary conditions on edges (bottom, right, top, left).
    pub fn square(bcs: [Bc; 4]) -> SurfaceSpec {
        let mut s = sq(1);
        s.boundary = (0..4).map(|e| (0, e, EdgeBc::Single(bcs[e]))).collect();
        s
    }

    /// 1×2 rectangle built from two unit squares.
    pub fn rectangle_1x2(bc: Bc) -> SurfaceSpec {
        let mut s = sq(2);
        s.gluings = vec![glue((0, 1), (1, 3), false)];
        s.boundary = vec![
            (0, 0, EdgeBc::Single(bc)),
            (0, 2, EdgeBc::Single(bc)),
            (0, 3, EdgeBc::Single(bc)),
            (1, 0, EdgeBc::Single(bc)),
            (1, 1, EdgeBc::Single(bc)),
            (1, 2, EdgeBc::Single(bc)),
        ];
        s
    }

    /// Torus with one puncture at the face centre and a cut to the right.
    pub fn punctured_torus(m: CMat) -> SurfaceSpec {
        let mut s = torus();
        s.rank = m.nrows();
        for g in &mut s.gluings {
            g.u = identity(s.rank);
        }
        s.punctures = vec![PunctureSpec {
            face: 0,
            pos: [1, 1],
            den: 2,
            m,
            cut: [1, 0],
        }];
        s
    }

    /// Torus with punctures at (1/4, 1/2) and (3/4, 1/2), cuts pointing away from each other.
    pub fn twice_punctured_torus(m: CMat) -> SurfaceSpec {
        let mut s = torus();
        s.rank = m.nrows();
        for g in &mut s.gluings {
            g.u = identity(s.rank);
        }
        s.punctures = vec![
            PunctureSpec {
                face: 0,
                pos: [1, 2],
                den: 4,
                m: m.clone(),
                cut: [-1, 0],
            },
            PunctureSpec {
                face: 0,
                pos: [3, 2],
                den: 4,
                m,
                cut: [1, 0],
            },
        ];
        s
    }

    /// Single equilateral triangle face, all edges with one bc.
    pub fn triangle(bc: Bc) -> SurfaceSpec {
        SurfaceSpec {
            face_kind: CellKind::Triangulation,
            faces: 1,
            gluings: vec![],
            boundary: (0..3).map(|e| (0, e, EdgeBc::Single(bc))).collect(),
            punctures: vec![],
            rank: 1,
        }
    }

    /// Flat torus from two triangles (a rhombus with opposite sides identified).
    pub fn triangle_torus() -> SurfaceSpec {
        // face 0 = {0, 1, ω}; face 1 = {1, 1+ω, ω} is face 0 rotated by π about (1+ω)/2
        SurfaceSpec {
            face_kind: CellKind::Triangulation,
            faces: 2,
            gluings: vec![
                Gluing {
                    a: (0, 1),
                    b: (1, 1),
                    flip: false,
                    u: identity(1),
                },
                Gluing {
                    a: (0, 0),
                    b: (1, 0),
                    flip: false,
                    u: identity(1),
                },
                Gluing {
                    a: (0, 2),
                    b: (1, 2),
                    flip: false,
                    u: identity(1),
                },
            ],
            boundary: vec![],
            punctures: vec![],
            rank: 1,
        }
    }

    pub fn by_name(name: &str) -> Option<SurfaceSpec> {
        use Bc::{Dirichlet as D, Neumann as N};
        Some(match name {
            "torus" => torus(),
            "pillowcase" => pillowcase(),
            "dsquare" => square([D, D, D, D]),
            "nsquare" => square([N, N, N, N]),
            "mixed_square" => square([D, N, D, N]),
            "drect" => rectangle_1x2(D),
            "nrect" => rectangle_1x2(N),
            "dtriangle" => triangle(D),
            "ntriangle" => triangle(N),
            "triangle_torus" => triangle_torus(),
            "punctured_torus" => {
                punctured_torus(CMat::from_element(1, 1, Complex64::new(-1.0, 0.0)))
            }
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_fans() {
        let f = fans(&builtin::torus());
        assert_eq!(f.len(), 1);
        assert!(f[0].closed);
        assert_eq!(f[0].sectors.len(), 4);
    }

    #[test]
    fn pillowcase_has_four_pi_cones() {
        let f = fans(&builtin::pillowcase());
        assert_eq!(f.len(), 4);
        assert!(f.iter().all(|fan| fan.closed && fan.sectors.len() == 2));
        assert!(validate_flatness(&builtin::pillowcase()).is_empty());
    }

    #[test]
    fn pillowcase_with_sign_flip_reports_two_defects() {
        let mut s = builtin::pillowcase();
        s.gluings[0].u = CMat::from_element(1, 1, Complex64::new(-1.0, 0.0));
        let defects: Vec<f64> = holonomy_defects(&s)
            .into_iter()
            .filter(|d| *d > 1e-10)
            .collect();
        assert_eq!(defects.len(), 2);
        assert!(defects.iter().all(|d| (d - 2.0).abs() < 1e-12));
        assert_eq!(validate_flatness(&s).failures.len(), 2);
    }

    #[test]
    fn square_corners() {
        use Bc::*;
        let f = fans(&builtin::square([Dirichlet, Neumann, Dirichlet, Neumann]));
        assert_eq!(f.len(), 4);
        for fan in &f {
            assert!(!fan.closed);
            assert_eq!(fan.sectors.len(), 1);
            assert_ne!(fan.bc_first, fan.bc_last);
        }
    }

    #[test]
    fn triangle_torus_is_flat() {
        let s = builtin::triangle_torus();
        assert!(validate_flatness(&s).is_empty());
        let f = fans(&s);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].sectors.len(), 6);
    }

    #[test]
    fn punctured_torus_validates() {
        let s = builtin::by_name("punctured_torus").unwrap();
        assert!(validate_flatness(&s).is_empty());
    }
}
