//! Infinite model surfaces (plane, half-plane, cone, wedge, punctured plane) and
//! their truncations to a finite radius with a Dirichlet far boundary.

mod kernel;
mod plane;

pub use kernel::{
    chebyshev_terms, i_integral, i_integral_kernels, kernel_csv, poisson_cut, ChebyshevKernel,
    DiagKernel, EigenKernel, IIntegral, IntegralOptions, Reference, ScaledPlane,
};
pub use plane::{PlaneKernel, FOURIER_T_MAX};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{self, Pt};
use crate::lattice::{CellKind, LatticeSpec};
use crate::operator::{assemble, TwistedLaplacian};
use crate::surface::{
    discretize, identity, Bc, CMat, DiscreteSurface, EdgeBc, Gluing, PunctureSpec, SurfaceSpec,
};

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    Plane,
    HalfPlane(Bc),
    /// Closed cone made of `units` elementary sectors.
    Cone {
        units: usize,
    },
    /// Open wedge; `first` holds on the ray at angle 0, `last` on the ray at angle `units`·θ₀.
    Wedge {
        units: usize,
        first: Bc,
        last: Bc,
    },
    /// Plane with a puncture at chart point `at / den` (lattice units) and monodromy `m`.
    PuncturedPlane {
        m: CMat,
        at: Pt,
        den: i64,
    },
}

fn full_units(kind: CellKind) -> usize {
    geom::point_group(kind).order
}

impl ModelKind {
    /// Cone of angle α, or an error if α is not a multiple of the lattice rotation.
    pub fn cone(alpha: f64, cell: CellKind) -> Result<Self> {
        Ok(ModelKind::Cone {
            units: units_of(alpha, cell)?,
        })
    }

    pub fn wedge(alpha: f64, first: Bc, last: Bc, cell: CellKind) -> Result<Self> {
        Ok(ModelKind::Wedge {
            units: units_of(alpha, cell)?,
            first,
            last,
        })
    }

    /// Puncture at a generic point of the cell next to the tip.
    pub fn punctured(m: CMat, lat: &LatticeSpec) -> Self {
        let dd = lat.denom;
        // denominators 7 and 11 keep the point off every lattice segment in practice
        ModelKind::PuncturedPlane {
            m,
            at: [77 * dd + 33 * dd, 77 * dd + 14 * dd],
            den: 77,
        }
    }

    /// Sectors around the tip and whether they close up.
    pub fn sectors(&self, cell: CellKind) -> (usize, bool) {
        let full = full_units(cell);
        match self {
            ModelKind::Plane | ModelKind::PuncturedPlane { .. } => (full, true),
            ModelKind::HalfPlane(_) => (full / 2, false),
            ModelKind::Cone { units } => (*units, true),
            ModelKind::Wedge { units, .. } => (*units, false),
        }
    }

    pub fn angle(&self, cell: CellKind) -> f64 {
        self.sectors(cell).0 as f64 * cell.rotation_angle()
    }

    pub fn rank(&self) -> usize {
        match self {
            ModelKind::PuncturedPlane { m, .. } => m.nrows(),
            _ => 1,
        }
    }

    /// Boundary conditions on the two rays of an open model.
    pub fn ray_bcs(&self) -> Option<(Bc, Bc)> {
        match *self {
            ModelKind::HalfPlane(b) => Some((b, b)),
            ModelKind::Wedge { first, last, .. } => Some((first, last)),
            _ => None,
        }
    }

    /// Stable text key, used to share one truncation between many basepoints.
    pub fn key(&self) -> String {
        match self {
            ModelKind::Plane => "plane".into(),
            ModelKind::HalfPlane(b) => format!("halfplane-{}", b.letter()),
            ModelKind::Cone { units } => format!("cone-{units}"),
            ModelKind::Wedge { units, first, last } => {
                format!("wedge-{units}-{}{}", first.letter(), last.letter())
            }
            ModelKind::PuncturedPlane { m, at, den } => {
                let entries: Vec<String> = m
                    .iter()
                    .map(|z| format!("{:.15e},{:.15e}", z.re, z.im))
                    .collect();
                format!(
                    "puncture-{}-{}-{}-[{}]",
                    at[0],
                    at[1],
                    den,
                    entries.join(";")
                )
            }
        }
    }

    pub fn describe(&self, cell: CellKind) -> String {
        let a = self.angle(cell) / PI;
        match self {
            ModelKind::Plane => "plane".into(),
            ModelKind::HalfPlane(b) => format!("half-plane {}", b.letter()),
            ModelKind::Cone { .. } => format!("cone {a:.6}π"),
            ModelKind::Wedge { first, last, .. } => {
                format!("wedge {a:.6}π {}{}", first.letter(), last.letter())
            }
            ModelKind::PuncturedPlane { .. } => "punctured plane".into(),
        }
    }
}

pub fn units_of(alpha: f64, cell: CellKind) -> Result<usize> {
    let th = cell.rotation_angle();
    let u = (alpha / th).round();
    if u < 1.0 || (u * th - alpha).abs() > 1e-9 {
        return Err(Error::AngleNotRepresentable(alpha));
    }
    Ok(u as usize)
}

/// Unit-face gluing description of a model of radius one; discretised at N·R it has radius R.
pub fn model_spec(kind: &ModelKind, cell: CellKind) -> SurfaceSpec {
    let (k, closed) = kind.sectors(cell);
    let d = kind.rank();
    let (ray_out, ray_in, far): (usize, usize, Vec<usize>) = match cell {
        CellKind::Quadrangulation => (3, 0, vec![1, 2]),
        CellKind::Triangulation => (2, 0, vec![1]),
    };
    let mut gluings = Vec::new();
    let links = if closed { k } else { k - 1 };
    for j in 0..links {
        gluings.push(Gluing {
            a: (j, ray_out),
            b: ((j + 1) % k, ray_in),
            flip: false,
            u: identity(d),
        });
    }
    let mut boundary = Vec::new();
    for j in 0..k {
        for &e in &far {
            boundary.push((j, e, EdgeBc::Single(Bc::Dirichlet)));
        }
    }
    if let Some((first, last)) = kind.ray_bcs() {
        boundary.push((0, ray_in, EdgeBc::Single(first)));
        boundary.push((k - 1, ray_out, EdgeBc::Single(last)));
    }
    let punctures = match kind {
        ModelKind::PuncturedPlane { m, at, den } => {
            vec![PunctureSpec {
                face: 0,
                pos: *at,
                den: *den,
                m: m.clone(),
                cut: [1, 0],
            }]
        }
        _ => vec![],
    };
    SurfaceSpec {
        face_kind: cell,
        faces: k,
        gluings,
        boundary,
        punctures,
        rank: d,
    }
}

/// A model discretised at mesh N and truncated at radius R (macroscopic units).
#[derive(Clone, Debug)]
pub struct TruncatedModel {
    pub kind: ModelKind,
    pub n: usize,
    pub radius: usize,
    pub surface: DiscreteSurface,
    pub operator: TwistedLaplacian,
}

pub fn build_model(
    kind: &ModelKind,
    lat: &LatticeSpec,
    n: usize,
    radius: usize,
) -> Result<TruncatedModel> {
    if radius < 2 {
        return Err(Error::MeshIncompatible {
            n,
            why: format!("model radius {radius} < 2"),
        });
    }
    let cell = lat.cell_kind;
    if let ModelKind::Cone { units } | ModelKind::Wedge { units, .. } = kind {
        if *units == 0 || *units > 8 * full_units(cell) {
            return Err(Error::AngleNotRepresentable(
                *units as f64 * cell.rotation_angle(),
            ));
        }
    }
    let mut spec = model_spec(kind, cell);
    let scale = (n * radius) as i64;
    if let Some(p) = spec.punctures.first_mut() {
        // `at / den` is given in lattice units; convert to a fraction of the face side
        p.den *= scale * lat.denom;
    }
    let surface = discretize(&spec, lat, n * radius)?;
    let operator = assemble(&surface)?;
    Ok(TruncatedModel {
        kind: kind.clone(),
        n,
        radius,
        surface,
        operator,
    })
}

impl TruncatedModel {
    pub fn cell(&self) -> CellKind {
        self.surface.kind()
    }

    /// Mesh units per macroscopic unit.
    pub fn unit(&self) -> i64 {
        self.n as i64 * self.surface.lattice.denom
    }

    pub fn delta(&self) -> f64 {
        self.surface.lattice.delta0() / self.n as f64
    }

    /// Model vertex at developed coordinates `d` (tip at the origin, ray 0 along +x).
    pub fn vertex_at_developed(&self, d: Pt) -> Option<usize> {
        let group = geom::point_group(self.cell());
        let k = self.surface.spec.faces;
        let face = self.surface.face();
        for j in 0..k {
            let p = geom::apply(&group.rotation_power(-(j as i64)), d);
            if p[0] >= 0 && p[1] >= 0 && face.contains(p) {
                if let Some(v) = self.surface.vertex_at(j, p) {
                    return v;
                }
            }
        }
        None
    }

    /// Developed coordinates of a vertex's primary occurrence.
    pub fn developed(&self, v: usize) -> Pt {
        let group = geom::point_group(self.cell());
        let (j, p) = self.surface.vertices[v].occurrences[0];
        geom::apply(&group.rotation_power(j as i64), p)
    }

    /// Cartesian developed position in macroscopic units.
    pub fn position(&self, v: usize) -> (f64, f64) {
        geom::cartesian(self.cell(), self.developed(v), self.unit())
    }

    /// Vertex closest to the macroscopic point (x, y); ties go to the lower index.
    pub fn nearest_vertex(&self, x: f64, y: f64) -> usize {
        let mut best = (f64::INFINITY, 0);
        for v in 0..self.surface.vertices.len() {
            let (px, py) = self.position(v);
            let d2 = (px - x).powi(2) + (py - y).powi(2);
            if d2 < best.0 - 1e-12 {
                best = (d2, v);
            }
        }
        best.1
    }

    /// Default basepoint at macroscopic distance ρ: height ρ over the boundary for half-planes,
    /// distance ρ from the tip along the bisector of the first sector otherwise.
    pub fn basepoint(&self, rho: f64) -> usize {
        let th = self.cell().rotation_angle();
        let (k, closed) = self.kind.sectors(self.cell());
        let ang = if closed { 0.0 } else { 0.5 * k as f64 * th };
        self.nearest_vertex(rho * ang.cos(), rho * ang.sin())
    }

    /// Macroscopic distance from a vertex to the nearest feature that distinguishes the model
    /// from the plane: tip, boundary rays or puncture.
    pub fn feature_distance(&self, v: usize) -> f64 {
        let (x, y) = self.position(v);
        let r = (x * x + y * y).sqrt();
        let th = self.cell().rotation_angle();
        let (k, closed) = self.kind.sectors(self.cell());
        match &self.kind {
            ModelKind::Plane => f64::INFINITY,
            ModelKind::PuncturedPlane { at, den, .. } => {
                let (px, py) = geom::cartesian(self.cell(), *at, *den * self.unit());
                ((x - px).powi(2) + (y - py).powi(2)).sqrt()
            }
            _ if closed => r,
            _ => {
                let to_ray = |a: f64| {
                    let (ux, uy) = (a.cos(), a.sin());
                    let s = x * ux + y * uy;
                    if s <= 0.0 {
                        r
                    } else {
                        ((x - s * ux).powi(2) + (y - s * uy).powi(2)).sqrt()
                    }
                };
                to_ray(0.0).min(to_ray(k as f64 * th))
            }
        }
    }

    /// Macroscopic distance from a vertex to the Dirichlet far boundary.
    pub fn far_distance(&self, v: usize) -> f64 {
        let (_, p) = self.surface.vertices[v].occurrences[0];
        let u = self.unit() as f64;
        let side = u * self.radius as f64;
        match self.cell() {
            // a union of R×R squares around the tip
            CellKind::Quadrangulation => (side - p[0].max(p[1]) as f64) / u,
            CellKind::Triangulation => (side - (p[0] + p[1]) as f64) * (3f64.sqrt() / 2.0) / u,
        }
    }

    /// True if every vertex within `core` (macro units) of the tip has the same edges, weights,
    /// signs and connections in both models, matched by developed coordinates.
    pub fn core_matches(&self, other: &TruncatedModel, core: f64) -> bool {
        let sig = |m: &TruncatedModel, v: usize| {
            let mut s: Vec<(Pt, i64, i8, Vec<(i64, i64)>)> = m
                .surface
                .half_edges
                .iter()
                .filter(|h| h.from == v)
                .map(|h| {
                    let to = h.to.map(|t| m.developed(t)).unwrap_or([i64::MIN, i64::MIN]);
                    let c = &m.surface.connections[h.conn as usize];
                    let cv = c
                        .iter()
                        .map(|z| ((z.re * 1e12).round() as i64, (z.im * 1e12).round() as i64))
                        .collect();
                    (to, (h.w * 1e12).round() as i64, h.sign.unwrap_or(0), cv)
                })
                .collect();
            s.sort();
            s
        };
        for v in 0..self.surface.vertices.len() {
            let (x, y) = self.position(v);
            if (x * x + y * y).sqrt() > core {
                continue;
            }
            let Some(w) = other.vertex_at_developed(self.developed(v)) else {
                return false;
            };
            if sig(self, v) != sig(other, w) {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{normalized_builtin, BuiltinLattice};
    use Bc::{Dirichlet as D, Neumann as N};

    fn sq() -> LatticeSpec {
        normalized_builtin(BuiltinLattice::Square)
    }

    #[test]
    fn full_cone_is_a_plane_square() {
        let m = build_model(&ModelKind::Plane, &sq(), 2, 2).unwrap();
        // square [−4, 4]² of lattice points with the border removed
        assert_eq!(m.surface.vertices.len(), 7 * 7);
        assert!(m.surface.singularities.iter().all(|s| s.pos != [0, 0]));
        let c = build_model(
            &ModelKind::cone(2.0 * PI, CellKind::Quadrangulation).unwrap(),
            &sq(),
            2,
            2,
        )
        .unwrap();
        assert!(m.core_matches(&c, 1.0));
    }

    #[test]
    fn triangular_full_cone_is_flat() {
        let lat = normalized_builtin(BuiltinLattice::Triangular);
        let m = build_model(&ModelKind::Plane, &lat, 2, 2).unwrap();
        assert!(m.surface.singularities.iter().all(|s| s.pos != [0, 0]));
        assert!(m.surface.half_edges.iter().all(|h| h.sign.is_none()));
    }

    #[test]
    fn neumann_half_plane_doubles_inward_weight() {
        let m = build_model(&ModelKind::HalfPlane(N), &sq(), 2, 2).unwrap();
        let v = m.vertex_at_developed([1, 0]).unwrap();
        let up = m.vertex_at_developed([1, 1]).unwrap();
        let w: f64 = m
            .surface
            .half_edges
            .iter()
            .filter(|h| h.from == v && h.to == Some(up))
            .map(|h| h.w)
            .sum();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_quarter_plane() {
        let m = build_model(
            &ModelKind::wedge(PI / 2.0, D, N, CellKind::Quadrangulation).unwrap(),
            &sq(),
            2,
            2,
        )
        .unwrap();
        // ray 0 is Dirichlet (removed), ray 1 Neumann (kept)
        assert!(m.vertex_at_developed([2, 0]).is_none());
        assert!(m.vertex_at_developed([0, 2]).is_some());
        assert_eq!(
            m.surface
                .singularities
                .iter()
                .filter(|s| s.pos == [0, 0])
                .count(),
            1
        );
    }

    #[test]
    fn bad_angle() {
        assert!(matches!(
            ModelKind::cone(1.0, CellKind::Quadrangulation),
            Err(Error::AngleNotRepresentable(_))
        ));
    }

    #[test]
    fn developed_roundtrip() {
        let m = build_model(&ModelKind::Cone { units: 3 }, &sq(), 2, 2).unwrap();
        for v in 0..m.surface.vertices.len() {
            assert_eq!(m.vertex_at_developed(m.developed(v)), Some(v));
        }
    }

    #[test]
    fn punctured_plane_builds() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let m = ModelKind::punctured(
            CMat::from_element(1, 1, num_complex::Complex64::new(-1.0, 0.0)),
            &lat,
        );
        let t = build_model(&m, &lat, 2, 2).unwrap();
        assert_eq!(
            t.surface
                .singularities
                .iter()
                .filter(|s| s.kind == crate::surface::SingularityKind::Puncture)
                .count(),
            1
        );
        assert!(t.surface.connections.len() == 2);
    }

    /// Method of images: the half-plane truncation folds the plane truncation across the boundary line.
    #[test]
    fn half_plane_is_folded_plane() {
        let plane = build_model(&ModelKind::Plane, &sq(), 2, 2).unwrap();
        let h = plane.operator.to_dmatrix().map(|z| z.re);
        let e = h.symmetric_eigen();
        let kernel = |t: f64| {
            &e.eigenvectors
                * nalgebra::DMatrix::from_diagonal(&e.eigenvalues.map(|l| (-l * t).exp()))
                * e.eigenvectors.transpose()
        };
        for bc in [D, N] {
            let half = build_model(&ModelKind::HalfPlane(bc), &sq(), 2, 2).unwrap();
            let hs = crate::spectral::eigensolve(&half.operator, true).unwrap();
            for t in [0.3, 2.0, 9.0] {
                let k = kernel(t);
                for v in 0..half.surface.vertices.len() {
                    let d = half.developed(v);
                    let x = plane.vertex_at_developed(d).unwrap();
                    let direct = k[(x, x)];
                    let expect = if d[1] == 0 {
                        direct
                    } else {
                        direct
                            + bc.sign() * k[(x, plane.vertex_at_developed([d[0], -d[1]]).unwrap())]
                    };
                    let got = hs.heat_diag(v, t).unwrap()[(0, 0)].re;
                    assert!(
                        (got - expect).abs() < 1e-10,
                        "{bc:?} t={t} d={d:?}: {got} vs {expect}"
                    );
                }
            }
        }
    }
}
