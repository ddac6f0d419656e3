//! Exact integer geometry in lattice-basis coordinates.

use crate::lattice::CellKind;

pub type Pt = [i64; 2];

/// Integer 2×2 matrix acting on basis coordinates.
pub type Mat2 = [[i64; 2]; 2];

pub const IDENTITY: Mat2 = [[1, 0], [0, 1]];

pub fn apply(m: &Mat2, p: Pt) -> Pt {
    [
        m[0][0] * p[0] + m[0][1] * p[1],
        m[1][0] * p[0] + m[1][1] * p[1],
    ]
}

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn det(m: &Mat2) -> i64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inverse(m: &Mat2) -> Mat2 {
    let d = det(m);
    debug_assert!(d == 1 || d == -1);
    [[m[1][1] * d, -m[0][1] * d], [-m[1][0] * d, m[0][0] * d]]
}

pub fn sub(a: Pt, b: Pt) -> Pt {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn add(a: Pt, b: Pt) -> Pt {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn scale(a: Pt, s: i64) -> Pt {
    [a[0] * s, a[1] * s]
}

/// Orientation sign of (b − a) × (c − a); affine maps with positive
/// determinant preserve it, so basis coordinates may be used directly.
pub fn orient(a: Pt, b: Pt, c: Pt) -> i128 {
    let (ux, uy) = ((b[0] - a[0]) as i128, (b[1] - a[1]) as i128);
    let (vx, vy) = ((c[0] - a[0]) as i128, (c[1] - a[1]) as i128);
    ux * vy - uy * vx
}

pub fn cartesian(kind: CellKind, p: Pt, denom: i64) -> (f64, f64) {
    let (ex, ey) = kind.e2();
    let d = denom as f64;
    ((p[0] as f64 + p[1] as f64 * ex) / d, (p[1] as f64 * ey) / d)
}

/// Cartesian length² of a displacement, in units of 1/denom².
pub fn norm2(kind: CellKind, p: Pt) -> f64 {
    let (x, y) = cartesian(kind, p, 1);
    x * x + y * y
}

#[derive(Clone, Debug)]
pub struct PointGroup {
    pub rotation: Mat2,
    pub reflection: Mat2,
    pub elements: Vec<Mat2>,
    /// Number of elementary rotations in a full turn.
    pub order: usize,
}

pub fn point_group(kind: CellKind) -> PointGroup {
    let (rotation, reflection, order) = match kind {
        CellKind::Quadrangulation => ([[0, -1], [1, 0]], [[1, 0], [0, -1]], 4),
        // (a, b) -> (−b, a + b) and (a, b) -> (a + b, −b)
        CellKind::Triangulation => ([[0, -1], [1, 1]], [[1, 1], [0, -1]], 6),
    };
    let mut elements = vec![IDENTITY];
    let mut frontier = vec![IDENTITY];
    while let Some(g) = frontier.pop() {
        for h in [rotation, reflection] {
            let p = mul(&h, &g);
            if !elements.contains(&p) {
                elements.push(p);
                frontier.push(p);
            }
        }
    }
    debug_assert_eq!(elements.len(), 2 * order);
    PointGroup {
        rotation,
        reflection,
        elements,
        order,
    }
}

impl PointGroup {
    pub fn rotation_power(&self, k: i64) -> Mat2 {
        let k = k.rem_euclid(self.order as i64);
        let mut m = IDENTITY;
        for _ in 0..k {
            m = mul(&self.rotation, &m);
        }
        m
    }

    /// Unit direction of the ray at angle j·θ₀ (basis coordinates).
    pub fn ray(&self, j: i64) -> Pt {
        apply(&self.rotation_power(j), [1, 0])
    }

    /// Element mapping direction u to a positive multiple of u2 and v to a positive
    /// multiple of v2 (directions need not be unit).
    pub fn find(&self, u: Pt, u2: Pt, v: Pt, v2: Pt) -> Option<Mat2> {
        self.elements
            .iter()
            .copied()
            .find(|g| parallel(apply(g, u), u2) && parallel(apply(g, v), v2))
    }
}

/// True when a and b point in the same direction.
pub fn parallel(a: Pt, b: Pt) -> bool {
    let cross = a[0] as i128 * b[1] as i128 - a[1] as i128 * b[0] as i128;
    let dot = a[0] as i128 * b[0] as i128 + a[1] as i128 * b[1] as i128;
    cross == 0 && dot > 0
}

/// Affine isometry p ↦ m·p + t.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Affine {
    pub m: Mat2,
    pub t: Pt,
}

impl Affine {
    pub const ID: Affine = Affine {
        m: IDENTITY,
        t: [0, 0],
    };

    pub fn apply(&self, p: Pt) -> Pt {
        add(apply(&self.m, p), self.t)
    }

    /// self ∘ other
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine {
            m: mul(&self.m, &other.m),
            t: add(apply(&self.m, other.t), self.t),
        }
    }

    pub fn inverse(&self) -> Affine {
        let mi = inverse(&self.m);
        let t = apply(&mi, self.t);
        Affine {
            m: mi,
            t: [-t[0], -t[1]],
        }
    }
}

/// A face T of side `size` (integer units) with corners in counterclockwise order.
#[derive(Clone, Copy, Debug)]
pub struct FaceGeom {
    pub kind: CellKind,
    pub size: i64,
}

impl FaceGeom {
    pub fn edge_count(&self) -> usize {
        match self.kind {
            CellKind::Quadrangulation => 4,
            CellKind::Triangulation => 3,
        }
    }

    pub fn corner(&self, i: usize) -> Pt {
        let s = self.size;
        match (self.kind, i % self.edge_count()) {
            (CellKind::Quadrangulation, 0) => [0, 0],
            (CellKind::Quadrangulation, 1) => [s, 0],
            (CellKind::Quadrangulation, 2) => [s, s],
            (CellKind::Quadrangulation, _) => [0, s],
            (CellKind::Triangulation, 0) => [0, 0],
            (CellKind::Triangulation, 1) => [s, 0],
            (CellKind::Triangulation, _) => [0, s],
        }
    }

    /// Signed distance-like functional of edge e, ≥ 0 inside, = 0 on the edge line.
    pub fn h(&self, e: usize, p: Pt) -> i64 {
        let s = self.size;
        match (self.kind, e) {
            (CellKind::Quadrangulation, 0) => p[1],
            (CellKind::Quadrangulation, 1) => s - p[0],
            (CellKind::Quadrangulation, 2) => s - p[1],
            (CellKind::Quadrangulation, 3) => p[0],
            (CellKind::Triangulation, 0) => p[1],
            (CellKind::Triangulation, 1) => s - p[0] - p[1],
            (CellKind::Triangulation, 2) => p[0],
            _ => unreachable!("edge index {e}"),
        }
    }

    pub fn contains(&self, p: Pt) -> bool {
        (0..self.edge_count()).all(|e| self.h(e, p) >= 0)
    }

    pub fn on_edge(&self, e: usize, p: Pt) -> bool {
        self.h(e, p) == 0 && self.contains(p)
    }

    /// Index of the corner equal to p, if any.
    pub fn corner_index(&self, p: Pt) -> Option<usize> {
        (0..self.edge_count()).find(|&i| self.corner(i) == p)
    }

    /// Position along edge e as the fraction num/size from its start corner.
    pub fn edge_param(&self, e: usize, p: Pt) -> i64 {
        let c = self.corner(e);
        let d = sub(p, c);
        let dir = sub(self.corner(e + 1), c);
        // dir is size·(unit lattice direction)
        let unit = [dir[0] / self.size, dir[1] / self.size];
        if unit[0] != 0 {
            d[0] / unit[0]
        } else {
            d[1] / unit[1]
        }
    }

    /// Reflection across the line of edge e.
    pub fn reflection(&self, e: usize, group: &PointGroup) -> Affine {
        let c0 = self.corner(e);
        let dir = sub(self.corner(e + 1), c0);
        let m = group
            .elements
            .iter()
            .copied()
            .find(|g| det(g) == -1 && apply(g, dir) == dir)
            .expect("edge reflection exists in the point group");
        Affine {
            m,
            t: sub(c0, apply(&m, c0)),
        }
    }
}

pub fn unit_face(kind: CellKind, denom: i64) -> FaceGeom {
    FaceGeom { kind, size: denom }
}
