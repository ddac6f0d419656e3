//! Mesh sweeps, least-squares fits of the expansion, and verdicts.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{lattice_constant_a, theorem_c, TheoremConstants};
use crate::continuum::{torus_zeta_det, ContinuumDet};
use crate::error::{Error, Result};
use crate::lattice::{CellKind, LatticeSpec};
use crate::operator::assemble;
use crate::spectral::{logdet_star, Backend};
use crate::surface::{discretize, surface_to_json, SurfaceSpec};

pub const DEFAULT_GRID: [usize; 7] = [8, 12, 16, 24, 32, 48, 64];

/// Largest N solved by dense eigendecomposition in `sweep` under `Backend::Auto`.
pub const SWEEP_DENSE_MAX_N: usize = 48;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub logdet: f64,
    pub vertices: usize,
    pub dirichlet_length: f64,
    pub neumann_length: f64,
    pub volume_weighted: f64,
    pub k: usize,
    pub wall_seconds: f64,
    pub cache_key: String,
    /// Served from the cache rather than solved.
    #[serde(skip)]
    pub cached: bool,
}

pub fn face_area(kind: CellKind) -> f64 {
    match kind {
        CellKind::Quadrangulation => 1.0,
        CellKind::Triangulation => 3f64.sqrt() / 4.0,
    }
}

fn backend_for(n: usize, backend: Backend) -> Backend {
    match backend {
        Backend::Auto if n <= SWEEP_DENSE_MAX_N => Backend::Dense,
        Backend::Auto => Backend::Sparse,
        b => b,
    }
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Dense => "dense",
        Backend::Sparse => "sparse",
        Backend::Auto => "auto",
    }
}

/// Content hash of everything that determines a record.
pub fn cache_key(spec: &SurfaceSpec, lat: &LatticeSpec, n: usize, backend: Backend) -> String {
    let mut h = Sha256::new();
    h.update(b"lapdet-sweep\0");
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(b"\0");
    h.update(surface_to_json(spec).as_bytes());
    h.update(b"\0");
    h.update(lat.to_json().as_bytes());
    h.update(format!("\0{n}\0{}", backend_name(backend_for(n, backend))).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// One JSON file per key; writes go through a temporary file and a rename.
#[derive(Clone, Debug)]
pub struct Cache {
    pub dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    /// `$LAPDET_CACHE`, else `.lapdet-cache` in the working directory.
    pub fn from_env() -> Self {
        Cache::new(
            std::env::var_os("LAPDET_CACHE")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(".lapdet-cache")),
        )
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<SweepRecord> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        let rec: SweepRecord = serde_json::from_str(&text).ok()?;
        (rec.cache_key == key).then_some(SweepRecord {
            cached: true,
            ..rec
        })
    }

    pub fn put(&self, rec: &SweepRecord) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = self
            .dir
            .join(format!(".{}.{}.tmp", rec.cache_key, std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(
                serde_json::to_string_pretty(rec)
                    .expect("record serialises")
                    .as_bytes(),
            )?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path(&rec.cache_key))?;
        Ok(())
    }
}

/// Solves one mesh size.
pub fn solve_record(
    spec: &SurfaceSpec,
    lat: &LatticeSpec,
    n: usize,
    backend: Backend,
) -> Result<SweepRecord> {
    let start = Instant::now();
    let ds = discretize(spec, lat, n)?;
    let l = assemble(&ds)?;
    let logdet = logdet_star(&l, backend_for(n, backend))?;
    let counts = ds.counts();
    Ok(SweepRecord {
        n,
        logdet,
        vertices: counts.vertices,
        dirichlet_length: counts.dirichlet_length,
        neumann_length: counts.neumann_length,
        volume_weighted: counts.volume_weighted,
        k: l.kernel.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
        cache_key: cache_key(spec, lat, n, backend),
        cached: false,
    })
}

/// One record per N, solved in parallel; cached records are reused.
pub fn sweep(
    spec: &SurfaceSpec,
    lat: &LatticeSpec,
    ns: &[usize],
    backend: Backend,
    cache: Option<&Cache>,
) -> Result<Vec<SweepRecord>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Schema("N list must be strictly ascending".into()));
    }
    // largest first so the long solves start early
    let mut order: Vec<usize> = ns.to_vec();
    order.reverse();
    let mut out: Vec<SweepRecord> = order
        .par_iter()
        .map(|&n| {
            let key = cache_key(spec, lat, n, backend);
            if let Some(rec) = cache.and_then(|c| c.get(&key)) {
                return Ok(rec);
            }
            let rec = solve_record(spec, lat, n, backend)?;
            if let Some(c) = cache {
                c.put(&rec)?;
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    out.sort_by_key(|r| r.n);
    Ok(out)
}

pub fn records_csv(records: &[SweepRecord]) -> String {
    let mut s =
        String::from("N,logdet,vertices,dirichlet_length,neumann_length,volume_weighted,k\n");
    for r in records {
        s.push_str(&format!(
            "{},{:.16e},{},{:.16e},{:.16e},{:.16e},{}\n",
            r.n, r.logdet, r.vertices, r.dirichlet_length, r.neumann_length, r.volume_weighted, r.k
        ));
    }
    s
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BasisTerm {
    N2,
    N1,
    LogN,
    One,
    /// N^{-j}, a finite-size correction.
    InvPow(u32),
}

impl BasisTerm {
    fn eval(self, n: f64) -> f64 {
        match self {
            BasisTerm::N2 => n * n,
            BasisTerm::N1 => n,
            BasisTerm::LogN => n.ln(),
            BasisTerm::One => 1.0,
            BasisTerm::InvPow(j) => n.powi(-(j as i32)),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FitOptions {
    /// Keep or drop the N term; `None` drops it exactly when no record has boundary.
    pub linear: Option<bool>,
    /// Caller asserts the log coefficient vanishes.
    pub assume_c_zero: bool,
    /// Reject fits whose column-scaled design matrix is worse than this.
    pub max_condition: Option<f64>,
    /// Number of extra terms N⁻¹, N⁻², … appended to the basis.
    pub corrections: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub basis: Vec<BasisTerm>,
    pub a2: f64,
    pub a1: Option<f64>,
    pub c_log: f64,
    pub a0: f64,
    /// −c_log.
    #[serde(rename = "C")]
    pub c: f64,
    /// a₀ − C·log δ₀.
    pub d_convention: f64,
    /// D_convention minus A times the constant part of the vertex count.
    pub d_mapped: f64,
    pub a_fit: f64,
    /// a₁ minus A times the linear part of the vertex count, per unit boundary length.
    pub boundary_per_length: Option<f64>,
    pub vertex_polynomial: [f64; 3],
    pub residuals: Vec<(usize, f64)>,
    pub uncertainty: f64,
    pub condition: f64,
    pub k: usize,
    pub delta0: f64,
    pub tail_decreasing: bool,
}

/// Least squares in a column-scaled basis; returns coefficients, residuals and condition number.
fn lstsq(basis: &[BasisTerm], ns: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let a = DMatrix::from_fn(ns.len(), basis.len(), |i, j| basis[j].eval(ns[i]));
    let scales: Vec<f64> = (0..basis.len()).map(|j| a.column(j).norm()).collect();
    let mut s = a.clone();
    for (j, sc) in scales.iter().enumerate() {
        s.column_mut(j).scale_mut(1.0 / sc);
    }
    let svd = s.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min();
    let b = DVector::from_column_slice(y);
    let x = svd.solve(&b, 0.0).expect("svd with vectors");
    let coef: Vec<f64> = x.iter().zip(&scales).map(|(c, sc)| c / sc).collect();
    let fitted = &a * DVector::from_column_slice(&coef);
    let res = (0..ns.len()).map(|i| y[i] - fitted[i]).collect();
    (coef, res, cond)
}

/// Exact quadratic through the vertex counts (checked against every record).
fn vertex_polynomial(records: &[SweepRecord]) -> Result<[f64; 3]> {
    let ns: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let vs: Vec<f64> = records.iter().map(|r| r.vertices as f64).collect();
    let (c, res, _) = lstsq(&[BasisTerm::N2, BasisTerm::N1, BasisTerm::One], &ns, &vs);
    if res.iter().any(|r| r.abs() > 1e-6) {
        return Err(Error::Schema("vertex count is not quadratic in N".into()));
    }
    Ok([c[0], c[1], c[2]])
}

pub fn fit(
    records: &[SweepRecord],
    spec: &SurfaceSpec,
    lat: &LatticeSpec,
    opts: &FitOptions,
) -> Result<FitReport> {
    if records.len() < 5 {
        return Err(Error::Schema(format!(
            "fit needs at least 5 records, got {}",
            records.len()
        )));
    }
    let k = records[0].k;
    if let Some(r) = records.iter().find(|r| r.k != k) {
        return Err(Error::KernelJump(format!(
            "k = {} at N = {} but k = {} at N = {}",
            k, records[0].n, r.k, r.n
        )));
    }
    let closed = records
        .iter()
        .all(|r| r.dirichlet_length == 0.0 && r.neumann_length == 0.0);
    let linear = opts.linear.unwrap_or(!closed);
    let mut basis = vec![BasisTerm::N2];
    if linear {
        basis.push(BasisTerm::N1);
    }
    if !opts.assume_c_zero {
        basis.push(BasisTerm::LogN);
    }
    basis.push(BasisTerm::One);
    basis.extend((1..=opts.corrections).map(BasisTerm::InvPow));
    if records.len() < basis.len() + 1 {
        return Err(Error::Schema(format!(
            "{} records cannot support {} basis terms",
            records.len(),
            basis.len()
        )));
    }

    let ns: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.logdet).collect();
    let (coef, res, cond) = lstsq(&basis, &ns, &ys);
    if cond > opts.max_condition.unwrap_or(1e12) || !cond.is_finite() {
        return Err(Error::IllConditioned(cond));
    }
    let get = |t: BasisTerm| basis.iter().position(|&b| b == t).map(|i| coef[i]);
    let c_log = get(BasisTerm::LogN).unwrap_or(0.0);
    let c = -c_log;

    let mut uncertainty: f64 = 0.0;
    if !opts.assume_c_zero {
        let li = basis
            .iter()
            .position(|&b| b == BasisTerm::LogN)
            .expect("log term present");
        for skip in 0..records.len() {
            let ns_l: Vec<f64> = ns
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, v)| *v)
                .collect();
            let ys_l: Vec<f64> = ys
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, v)| *v)
                .collect();
            let (cl, _, _) = lstsq(&basis, &ns_l, &ys_l);
            uncertainty = uncertainty.max((cl[li] - c_log).abs());
        }
    }

    let delta0 = lat.delta0();
    let a2 = get(BasisTerm::N2).expect("N² term");
    let a1 = get(BasisTerm::N1);
    let a0 = get(BasisTerm::One).expect("constant term");
    let a_fit = a2 * delta0 * delta0 / (spec.faces as f64 * face_area(spec.face_kind));
    let vp = vertex_polynomial(records)?;
    let d_convention = a0 - c * delta0.ln();
    let last = records.last().expect("non-empty");
    let length_per_n = (last.dirichlet_length + last.neumann_length) / last.n as f64;
    let boundary_per_length = a1
        .filter(|_| length_per_n > 0.0)
        .map(|a1| (a1 - a_fit * vp[1]) / length_per_n);
    let tail = &res[res.len().saturating_sub(3)..];
    let tail_decreasing = tail.windows(2).all(|w| w[1].abs() <= w[0].abs() + 1e-12);

    Ok(FitReport {
        basis,
        a2,
        a1,
        c_log,
        a0,
        c,
        d_convention,
        d_mapped: d_convention - a_fit * vp[2],
        a_fit,
        boundary_per_length,
        vertex_polynomial: vp,
        residuals: records.iter().zip(&res).map(|(r, e)| (r.n, *e)).collect(),
        uncertainty,
        condition: cond,
        k,
        delta0,
        tail_decreasing,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub c: f64,
    pub a: f64,
    pub d: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            c: 0.05,
            a: 1e-3,
            d: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub fitted: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, fitted: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            fitted,
            expected,
            tolerance,
            pass: (fitted - expected).abs() < tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictReport {
    pub theorem: TheoremConstants,
    pub checks: Vec<Check>,
    /// Oracle value of the continuum determinant, when one exists.
    pub continuum: Option<ContinuumDet>,
    pub pass: bool,
}

/// Modulus and area of the flat tori the continuum oracle covers.
pub fn torus_modulus(spec: &SurfaceSpec) -> Option<(f64, f64, f64)> {
    use crate::surface::builtin;
    let trivial = spec.rank == 1 && spec.punctures.is_empty();
    if !trivial {
        return None;
    }
    let same = |other: &SurfaceSpec| surface_to_json(spec) == surface_to_json(other);
    if same(&builtin::torus()) {
        Some((0.0, 1.0, 1.0))
    } else if same(&builtin::triangle_torus()) {
        Some((0.5, 3f64.sqrt() / 2.0, 3f64.sqrt() / 2.0))
    } else {
        None
    }
}

/// The walk generator at mesh δ approximates δ²·(−½∇²), so D is compared with c = 1/2.
pub const CONTINUUM_NORMALIZATION: f64 = 0.5;

pub fn compare(
    fit: &FitReport,
    spec: &SurfaceSpec,
    lat: &LatticeSpec,
    tol: &Tolerances,
) -> Result<VerdictReport> {
    let ds = discretize(spec, lat, fit.residuals.last().map(|r| r.0).unwrap_or(8))?;
    let theorem = theorem_c(&ds.singularities, fit.k, spec.rank);
    let mut checks = vec![Check::new("C", fit.c, theorem.c, tol.c)];
    checks.push(Check::new("A", fit.a_fit, lattice_constant_a(lat)?, tol.a));
    let continuum = torus_modulus(spec)
        .map(|(x, y, area)| torus_zeta_det(x, y, area.sqrt(), CONTINUUM_NORMALIZATION));
    if let Some(cd) = &continuum {
        checks.push(Check::new("D", fit.d_mapped, cd.logdet, tol.d));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerdictReport {
        theorem,
        checks,
        continuum,
        pass,
    })
}

/// Reads a cache directory's records for one key prefix set (used by `report`).
pub fn load_records(dir: &Path) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "json") {
            if let Ok(r) = serde_json::from_str::<SweepRecord>(&fs::read_to_string(&p)?) {
                out.push(r);
            }
        }
    }
    out.sort_by_key(|r| r.n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{normalized_builtin, BuiltinLattice};
    use crate::surface::builtin;

    fn synthetic(ns: &[usize], f: impl Fn(f64) -> f64, boundary: bool) -> Vec<SweepRecord> {
        ns.iter()
            .map(|&n| SweepRecord {
                n,
                logdet: f(n as f64),
                vertices: n * n,
                dirichlet_length: if boundary { 4.0 * n as f64 } else { 0.0 },
                neumann_length: 0.0,
                volume_weighted: (n * n) as f64,
                k: 1,
                wall_seconds: 0.0,
                cache_key: String::new(),
                cached: false,
            })
            .collect()
    }

    #[test]
    fn synthetic_recovery() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let recs = synthetic(
            &DEFAULT_GRID,
            |n| 0.3 * n * n - 1.7 * n + 0.4 * n.ln() + 2.5,
            true,
        );
        let f = fit(
            &recs,
            &builtin::square([crate::surface::Bc::Dirichlet; 4]),
            &lat,
            &FitOptions::default(),
        )
        .unwrap();
        assert!((f.a2 - 0.3).abs() < 1e-10);
        assert!((f.a1.unwrap() + 1.7).abs() < 1e-10);
        assert!((f.c_log - 0.4).abs() < 1e-10);
        assert!((f.a0 - 2.5).abs() < 1e-10);
        assert!(f.uncertainty < 1e-9);
    }

    #[test]
    fn correction_terms_absorb_finite_size_drift() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let truth = |n: f64| 0.47 * n * n + 0.5 * n.ln() - 0.3 + 0.8 / n - 0.2 / (n * n);
        let recs = synthetic(&DEFAULT_GRID, truth, false);
        let plain = fit(&recs, &builtin::torus(), &lat, &FitOptions::default()).unwrap();
        assert!((plain.c + 0.5).abs() > 1e-3);
        let opts = FitOptions {
            corrections: 2,
            ..Default::default()
        };
        let f = fit(&recs, &builtin::torus(), &lat, &opts).unwrap();
        assert!((f.c + 0.5).abs() < 1e-9);
        assert_eq!(f.basis.last(), Some(&BasisTerm::InvPow(2)));
    }

    #[test]
    fn closed_surfaces_drop_linear_term() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let recs = synthetic(&DEFAULT_GRID, |n| n * n + 2.0 * n.ln(), false);
        let f = fit(&recs, &builtin::torus(), &lat, &FitOptions::default()).unwrap();
        assert_eq!(
            f.basis,
            vec![BasisTerm::N2, BasisTerm::LogN, BasisTerm::One]
        );
        assert!((f.c + 2.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_jump_and_short_input() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let mut recs = synthetic(&DEFAULT_GRID, |n| n, false);
        assert!(matches!(
            fit(&recs[..4], &builtin::torus(), &lat, &FitOptions::default()),
            Err(Error::Schema(_))
        ));
        recs[3].k = 0;
        assert!(matches!(
            fit(&recs, &builtin::torus(), &lat, &FitOptions::default()),
            Err(Error::KernelJump(_))
        ));
    }

    #[test]
    fn ill_conditioned_is_reported() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let recs = synthetic(&[100, 101, 102, 103, 104], |n| n, true);
        let opts = FitOptions {
            max_condition: Some(1e3),
            ..Default::default()
        };
        assert!(matches!(
            fit(&recs, &builtin::torus(), &lat, &opts),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn torus_records_match_product_formula() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let recs = sweep(&builtin::torus(), &lat, &[2, 4], Backend::Auto, None).unwrap();
        assert!((recs[0].logdet - 16f64.ln()).abs() < 1e-12);
        let mut want = 0.0;
        for j in 0..4 {
            for k in 0..4 {
                if (j, k) != (0, 0) {
                    let th = |i: usize| (2.0 * std::f64::consts::PI * i as f64 / 4.0).cos();
                    want += (2.0 - th(j) - th(k)).ln();
                }
            }
        }
        assert!((recs[1].logdet - want).abs() < 1e-12);
        assert!(recs.iter().all(|r| r.k == 1));
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("lapdet-cache-test-{}", std::process::id()));
        let cache = Cache::new(&dir);
        let lat = normalized_builtin(BuiltinLattice::Square);
        let first = sweep(
            &builtin::torus(),
            &lat,
            &[3, 5],
            Backend::Auto,
            Some(&cache),
        )
        .unwrap();
        assert!(first.iter().all(|r| !r.cached));
        let second = sweep(
            &builtin::torus(),
            &lat,
            &[3, 5],
            Backend::Auto,
            Some(&cache),
        )
        .unwrap();
        assert!(second.iter().all(|r| r.cached));
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.logdet.to_bits(), b.logdet.to_bits());
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn keys_differ_by_content() {
        let lat = normalized_builtin(BuiltinLattice::Square);
        let a = cache_key(&builtin::torus(), &lat, 8, Backend::Auto);
        assert_ne!(a, cache_key(&builtin::torus(), &lat, 12, Backend::Auto));
        assert_ne!(a, cache_key(&builtin::pillowcase(), &lat, 8, Backend::Auto));
        assert_eq!(a, cache_key(&builtin::torus(), &lat, 8, Backend::Dense));
        assert_ne!(a, cache_key(&builtin::torus(), &lat, 8, Backend::Sparse));
    }
}
