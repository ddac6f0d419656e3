use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Bc, CMat, EdgeBc, Gluing, PunctureSpec, SurfaceSpec};
use crate::error::{Error, Result};
use crate::lattice::CellKind;

#[derive(Serialize, Deserialize)]
struct RawGluing {
    a: [usize; 2],
    b: [usize; 2],
    #[serde(default)]
    flip: bool,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    u: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct RawSplit {
    frac: [i64; 2],
    before: String,
    after: String,
}

#[derive(Serialize, Deserialize)]
struct RawBoundary {
    face: usize,
    edge: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<RawSplit>,
}

#[derive(Serialize, Deserialize)]
struct RawPuncture {
    face: usize,
    pos: [i64; 3],
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    m: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_cut")]
    cut: Value,
}

fn default_cut() -> Value {
    Value::String("right".into())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurface {
    face_kind: String,
    faces: usize,
    #[serde(default)]
    gluings: Vec<RawGluing>,
    #[serde(default)]
    boundary: Vec<RawBoundary>,
    #[serde(default)]
    punctures: Vec<RawPuncture>,
    #[serde(default = "one")]
    rank: usize,
}

fn one() -> usize {
    1
}

fn matrix(raw: &Option<Vec<[f64; 2]>>, d: usize, what: &str) -> Result<CMat> {
    match raw {
        None => Ok(CMat::identity(d, d)),
        Some(v) => {
            if v.len() != d * d {
                return Err(Error::Schema(format!(
                    "{what}: expected {} entries, got {}",
                    d * d,
                    v.len()
                )));
            }
            Ok(CMat::from_row_iterator(
                d,
                d,
                v.iter().map(|z| Complex64::new(z[0], z[1])),
            ))
        }
    }
}

fn raw_matrix(m: &CMat) -> Option<Vec<[f64; 2]>> {
    let d = m.nrows();
    if *m == CMat::identity(d, d) {
        return None;
    }
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            v.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    Some(v)
}

fn cut_direction(kind: CellKind, v: &Value) -> Result<[i64; 2]> {
    let named = |s: &str| -> Option<[i64; 2]> {
        Some(match (kind, s) {
            (_, "right") => [1, 0],
            (_, "left") => [-1, 0],
            (CellKind::Quadrangulation, "up") => [0, 1],
            (CellKind::Quadrangulation, "down") => [0, -1],
            _ => return None,
        })
    };
    match v {
        Value::String(s) => {
            named(s).ok_or_else(|| Error::Schema(format!("unknown cut direction '{s}'")))
        }
        Value::Array(a) if a.len() == 2 => {
            let c: Option<Vec<i64>> = a.iter().map(|x| x.as_i64()).collect();
            c.map(|c| [c[0], c[1]])
                .ok_or_else(|| Error::Schema("cut must be two integers".into()))
        }
        _ => Err(Error::Schema(
            "cut must be a direction name or [a, b]".into(),
        )),
    }
}

/// Parse and validate a surface description.
pub fn parse_surface_spec(text: &str) -> Result<SurfaceSpec> {
    let raw: RawSurface = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let face_kind = match raw.face_kind.as_str() {
        "square" | "quadrangulation" => CellKind::Quadrangulation,
        "triangle" | "triangulation" => CellKind::Triangulation,
        s => return Err(Error::Schema(format!("unknown face_kind '{s}'"))),
    };
    let d = raw.rank;
    let mut gluings = Vec::new();
    for (i, g) in raw.gluings.iter().enumerate() {
        gluings.push(Gluing {
            a: (g.a[0], g.a[1]),
            b: (g.b[0], g.b[1]),
            flip: g.flip,
            u: matrix(&g.u, d, &format!("gluing {i}"))?,
        });
    }
    let mut boundary = Vec::new();
    for b in &raw.boundary {
        let bc = match (&b.bc, &b.split) {
            (Some(s), None) => EdgeBc::Single(Bc::parse(s)?),
            (None, Some(sp)) => EdgeBc::Split {
                num: sp.frac[0],
                den: sp.frac[1],
                before: Bc::parse(&sp.before)?,
                after: Bc::parse(&sp.after)?,
            },
            _ => {
                return Err(Error::Schema(format!(
                    "boundary ({}, {}) needs exactly one of bc, split",
                    b.face, b.edge
                )))
            }
        };
        boundary.push((b.face, b.edge, bc));
    }
    let mut punctures = Vec::new();
    for (i, p) in raw.punctures.iter().enumerate() {
        punctures.push(PunctureSpec {
            face: p.face,
            pos: [p.pos[0], p.pos[1]],
            den: p.pos[2],
            m: matrix(&p.m, d, &format!("puncture {i}"))?,
            cut: cut_direction(face_kind, &p.cut)?,
        });
    }
    let spec = SurfaceSpec {
        face_kind,
        faces: raw.faces,
        gluings,
        boundary,
        punctures,
        rank: d,
    };
    spec.validate_structure()?;
    Ok(spec)
}

pub fn surface_to_json(spec: &SurfaceSpec) -> String {
    let raw = RawSurface {
        face_kind: match spec.face_kind {
            CellKind::Quadrangulation => "square".into(),
            CellKind::Triangulation => "triangle".into(),
        },
        faces: spec.faces,
        gluings: spec
            .gluings
            .iter()
            .map(|g| RawGluing {
                a: [g.a.0, g.a.1],
                b: [g.b.0, g.b.1],
                flip: g.flip,
                u: raw_matrix(&g.u),
            })
            .collect(),
        boundary: spec
            .boundary
            .iter()
            .map(|(f, e, b)| match b {
                EdgeBc::Single(bc) => RawBoundary {
                    face: *f,
                    edge: *e,
                    bc: Some(bc.letter().to_string()),
                    split: None,
                },
                EdgeBc::Split {
                    num,
                    den,
                    before,
                    after,
                } => RawBoundary {
                    face: *f,
                    edge: *e,
                    bc: None,
                    split: Some(RawSplit {
                        frac: [*num, *den],
                        before: before.letter().to_string(),
                        after: after.letter().to_string(),
                    }),
                },
            })
            .collect(),
        punctures: spec
            .punctures
            .iter()
            .map(|p| RawPuncture {
                face: p.face,
                pos: [p.pos[0], p.pos[1], p.den],
                m: raw_matrix(&p.m),
                cut: Value::Array(vec![p.cut[0].into(), p.cut[1].into()]),
            })
            .collect(),
        rank: spec.rank,
    };
    serde_json::to_string_pretty(&raw).expect("surface serialises")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TORUS: &str = r#"{"face_kind":"square","faces":1,
        "gluings":[{"a":[0,0],"b":[0,2],"flip":false},{"a":[0,1],"b":[0,3],"flip":false}],
        "boundary":[],"punctures":[],"rank":1}"#;

    #[test]
    fn parses_torus() {
        let s = parse_surface_spec(TORUS).unwrap();
        assert_eq!(s.faces, 1);
        assert_eq!(s.gluings.len(), 2);
        assert_eq!(s.rank, 1);
    }

    #[test]
    fn roundtrip() {
        let s = crate::surface::builtin::twice_punctured_torus(CMat::from_element(
            1,
            1,
            Complex64::new(-1.0, 0.0),
        ));
        let t = parse_surface_spec(&surface_to_json(&s)).unwrap();
        assert_eq!(t.punctures.len(), 2);
        assert_eq!(t.punctures[0].cut, [-1, 0]);
        assert_eq!(t.punctures[1].m[(0, 0)].re, -1.0);
    }

    #[test]
    fn rejects_non_unitary() {
        let bad = TORUS.replace(r#""flip":false}]"#, r#""flip":false,"U":[[2.0,0.0]]}]"#);
        assert!(matches!(
            parse_surface_spec(&bad),
            Err(Error::NonUnitaryMatrix(_))
        ));
    }

    #[test]
    fn rejects_missing_edge() {
        let bad = TORUS.replace(r#",{"a":[0,1],"b":[0,3],"flip":false}"#, "");
        assert!(matches!(parse_surface_spec(&bad), Err(Error::Schema(_))));
    }

    #[test]
    fn split_boundary() {
        let txt = r#"{"face_kind":"square","faces":1,"boundary":[
            {"face":0,"edge":0,"split":{"frac":[1,2],"before":"D","after":"N"}},
            {"face":0,"edge":1,"bc":"N"},{"face":0,"edge":2,"bc":"N"},{"face":0,"edge":3,"bc":"D"}]}"#;
        let s = parse_surface_spec(txt).unwrap();
        assert!(matches!(
            s.boundary[0].2,
            EdgeBc::Split { num: 1, den: 2, .. }
        ));
    }
}
