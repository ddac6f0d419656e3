use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use lapdet::asymptotics::{self, Cache, FitOptions, Tolerances, DEFAULT_GRID};
use lapdet::constants::{self, ContinuumModel};
use lapdet::continuum;
use lapdet::keyformula::{self, KeyFormulaParams};
use lapdet::lattice::{self, BuiltinLattice, CellKind, LatticeSpec};
use lapdet::operator::assemble;
use lapdet::spectral::{self, Backend};
use lapdet::surface::{self, builtin, Bc, SurfaceSpec};

mod fmt;
use fmt::g17;

#[derive(Parser)]
#[command(
    name = "lapdet",
    version,
    about = "Determinants of twisted lattice Laplacians on flat surfaces"
)]
struct Cli {
    /// Run configuration (JSON); command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Result cache directory (overrides $LAPDET_CACHE and the config).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate and normalize a lattice; optionally check the walk covariance by simulation.
    Lattice(LatticeArgs),
    /// Discretize a surface and summarise the result.
    Build(BuildArgs),
    /// log det★ of the assembled operator.
    Detstar(MeshArgs),
    /// Θ(t) = Σ e^{−λt} at the given walk times.
    Theta(ThetaArgs),
    /// Evaluate the six-term decomposition of −log det★.
    Keyformula(KeyArgs),
    /// Closed-form singularity constants.
    Constants(ConstArgs),
    /// log det★ over a mesh sweep (cached).
    Sweep(SweepArgs),
    /// Least-squares fit of the expansion over a sweep.
    Fit(SweepArgs),
    /// Fit and compare with the closed-form constants; exit 2 on a failed verdict.
    Compare(SweepArgs),
    /// Compare a list of surfaces and write a summary.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct SurfaceArgs {
    /// Surface: JSON file or builtin name.
    #[arg(long)]
    surface: Option<String>,
    /// Lattice: JSON file or builtin name (square, shifted_square, triangular, hexagonal).
    #[arg(long)]
    lattice: Option<String>,
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long)]
    lattice: Option<String>,
    /// Number of simulated walks for the covariance check (0 = skip).
    #[arg(long, default_value_t = 0)]
    mc_samples: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    s: SurfaceArgs,
    #[arg(long = "N")]
    n: usize,
    /// Write the adjacency list as CSV.
    #[arg(long)]
    adjacency: Option<PathBuf>,
    /// Write the parsed surface back as JSON.
    #[arg(long)]
    emit_spec: Option<PathBuf>,
}

#[derive(Args)]
struct MeshArgs {
    #[command(flatten)]
    s: SurfaceArgs,
    #[arg(long = "N")]
    n: usize,
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Args)]
struct ThetaArgs {
    #[command(flatten)]
    s: SurfaceArgs,
    #[arg(long = "N")]
    n: usize,
    /// Comma-separated walk times.
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    t: Vec<f64>,
    /// Also write the spectrum as CSV.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

#[derive(Args)]
struct KeyArgs {
    #[command(flatten)]
    s: SurfaceArgs,
    #[arg(long = "N")]
    n: usize,
    /// Assignment radius in macroscopic units.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    model_radius: Option<usize>,
}

#[derive(Args)]
struct ConstArgs {
    /// Corner angle and boundary pair, e.g. `--corner pi/2 DD`.
    #[arg(long, num_args = 2, value_names = ["ANGLE", "BC"])]
    corner: Option<Vec<String>>,
    /// Cone angle, e.g. `--cone pi`.
    #[arg(long)]
    cone: Option<String>,
    /// Puncture eigenphases (radians) of a diagonal monodromy.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    puncture: Option<Vec<f64>>,
    /// Full CSV table for a face kind (square or triangle).
    #[arg(long)]
    table: Option<String>,
    /// Theorem C of a surface (needs --surface, --lattice, --N).
    #[command(flatten)]
    s: SurfaceArgs,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Continuum determinant of a torus τ = re,im (c = 1/2, unit area).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    torus: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    s: SurfaceArgs,
    /// Comma-separated mesh sizes.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    backend: Option<String>,
    /// Extra N⁻ʲ correction terms in the fit.
    #[arg(long, default_value_t = 0)]
    corrections: u32,
    /// Keep (true) or drop (false) the N term; default decides from the boundary.
    #[arg(long)]
    linear: Option<bool>,
    /// Skip the cache.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Builtin surfaces or JSON files.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "torus,pillowcase,dsquare,nsquare,mixed_square"
    )]
    surfaces: Vec<String>,
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolConfig {
    trunc: f64,
    quadrature: f64,
    fit_c: f64,
    fit_a: f64,
    fit_d: f64,
}

impl Default for TolConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        let k = KeyFormulaParams::default();
        TolConfig {
            trunc: k.rounding,
            quadrature: k.quadrature_tolerance,
            fit_c: t.c,
            fit_a: t.a,
            fit_d: t.d,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    cache_dir: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    tolerances: TolConfig,
    grid: Option<Vec<usize>>,
    backend: Option<String>,
    surface: Option<String>,
    lattice: Option<String>,
    seed: Option<u64>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => serde_json::from_str(
                &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            )
            .with_context(|| format!("parsing {}", p.display()))?,
        };
        let t = &cfg.tolerances;
        if [t.trunc, t.quadrature, t.fit_c, t.fit_a, t.fit_d]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            bail!("tolerances must be positive");
        }
        Ok(cfg)
    }

    fn cache(&self, cli: &Cli) -> Result<Cache> {
        let cache = match (
            &cli.cache_dir,
            std::env::var_os("LAPDET_CACHE"),
            &self.cache_dir,
        ) {
            (Some(d), _, _) => Cache::new(d),
            (None, Some(_), _) => Cache::from_env(),
            (None, None, Some(d)) => Cache::new(d),
            (None, None, None) => Cache::from_env(),
        };
        fs::create_dir_all(&cache.dir)
            .with_context(|| format!("cache dir {} is not writable", cache.dir.display()))?;
        let probe = cache.dir.join(format!(".probe.{}", std::process::id()));
        fs::write(&probe, b"")
            .with_context(|| format!("cache dir {} is not writable", cache.dir.display()))?;
        let _ = fs::remove_file(probe);
        Ok(cache)
    }

    fn out_dir(&self, cli: &Cli) -> Option<PathBuf> {
        cli.out_dir.clone().or_else(|| self.output_dir.clone())
    }

    fn backend(&self, flag: &Option<String>) -> Result<Backend> {
        Ok(flag
            .as_deref()
            .or(self.backend.as_deref())
            .unwrap_or("auto")
            .parse()?)
    }

    fn grid(&self, flag: &Option<Vec<usize>>) -> Vec<usize> {
        flag.clone()
            .or_else(|| self.grid.clone())
            .unwrap_or_else(|| DEFAULT_GRID.to_vec())
    }

    fn surface(&self, s: &SurfaceArgs) -> Result<(String, SurfaceSpec)> {
        let name = s
            .surface
            .clone()
            .or_else(|| self.surface.clone())
            .ok_or_else(|| anyhow!("--surface is required"))?;
        Ok((name.clone(), load_surface(&name)?))
    }

    /// The named lattice, else the one matching the face kind.
    fn lattice(&self, flag: &Option<String>, kind: CellKind) -> Result<LatticeSpec> {
        let fallback = match kind {
            CellKind::Quadrangulation => "square",
            CellKind::Triangulation => "triangular",
        };
        load_lattice(
            flag.as_deref()
                .or(self.lattice.as_deref())
                .unwrap_or(fallback),
        )
    }
}

fn load_surface(name: &str) -> Result<SurfaceSpec> {
    if let Some(s) = builtin::by_name(name) {
        return Ok(s);
    }
    let text = fs::read_to_string(name)
        .with_context(|| format!("'{name}' is neither a builtin surface nor a readable file"))?;
    Ok(surface::parse_surface_spec(&text)?)
}

fn load_lattice(name: &str) -> Result<LatticeSpec> {
    let raw = match name.parse::<BuiltinLattice>() {
        Ok(b) => lattice::builtin_lattice(b),
        Err(_) => {
            let text = fs::read_to_string(name).with_context(|| {
                format!("'{name}' is neither a builtin lattice nor a readable file")
            })?;
            LatticeSpec::from_json(&text)?
        }
    };
    Ok(lattice::normalize_weights(&raw)?)
}

/// Parses `pi`, `3pi/2`, `2*pi/3`, `pi/2` or a plain number of radians.
fn parse_angle(s: &str) -> Result<f64> {
    let t = s.replace(' ', "").to_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (
            a.to_string(),
            b.parse::<f64>()
                .with_context(|| format!("bad angle '{s}'"))?,
        ),
        None => (t.clone(), 1.0),
    };
    let coef = num
        .strip_suffix("pi")
        .ok_or_else(|| anyhow!("bad angle '{s}'"))?
        .trim_end_matches('*');
    let c = if coef.is_empty() {
        1.0
    } else {
        coef.parse::<f64>()
            .with_context(|| format!("bad angle '{s}'"))?
    };
    Ok(c * PI / den)
}

fn parse_bc_pair(s: &str) -> Result<(Bc, Bc)> {
    let bc = |c: char| match c {
        'D' | 'd' => Ok(Bc::Dirichlet),
        'N' | 'n' => Ok(Bc::Neumann),
        _ => Err(anyhow!("boundary pair must be two of D/N, got '{s}'")),
    };
    let cs: Vec<char> = s.chars().collect();
    if cs.len() != 2 {
        bail!("boundary pair must be two of D/N, got '{s}'");
    }
    Ok((bc(cs[0])?, bc(cs[1])?))
}

fn write_artifact(dir: Option<&Path>, name: &str, body: &str) -> Result<()> {
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
        fs::write(d.join(name), body).with_context(|| format!("writing {name}"))?;
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable")
}

/// Outcome of a subcommand: whether every verdict passed.
type Outcome = Result<bool>;

fn run_lattice(cfg: &RunConfig, a: &LatticeArgs) -> Outcome {
    let lat = cfg.lattice(&a.lattice, CellKind::Quadrangulation)?;
    let report = lattice::validate_symmetry(&lat);
    let mut out = serde_json::json!({
        "lattice": serde_json::from_str::<serde_json::Value>(&lat.to_json())?,
        "delta0": lat.delta0(),
        "covariances": lat.covariances(),
        "validation": report,
    });
    let mut ok = report.is_empty();
    if a.mc_samples > 0 {
        let seed = a.seed.or(cfg.seed).unwrap_or(0);
        let t = lat.delta0().powi(-2);
        let mut classes = Vec::new();
        for c in 0..lat.vertices.len() {
            let (cov, err) =
                lattice::simulate_covariance(&lat, c, t, a.mc_samples, seed + c as u64);
            let within = (0..2).all(|i| {
                (0..2).all(|j| ((cov[i][j] - (i == j) as i32 as f64).abs()) <= 3.0 * err[i][j])
            });
            ok &= within;
            classes.push(serde_json::json!({ "class": c, "covariance": cov, "stderr": err, "within_3_sigma": within }));
        }
        out["simulation"] = serde_json::json!({ "samples": a.mc_samples, "seed": seed, "walk_time": t, "classes": classes });
    }
    println!("{}", json(&out));
    Ok(ok)
}

fn run_build(cfg: &RunConfig, a: &BuildArgs, out: Option<&Path>) -> Outcome {
    let (_, spec) = cfg.surface(&a.s)?;
    let lat = cfg.lattice(&a.s.lattice, spec.face_kind)?;
    let ds = surface::discretize(&spec, &lat, a.n)?;
    let l = assemble(&ds)?;
    let sing: Vec<_> = ds
        .singularities
        .iter()
        .map(|s| serde_json::json!({ "kind": s.kind, "angle": s.angle, "description": s.describe(), "tip_vertex": s.tip_vertex }))
        .collect();
    let summary = serde_json::json!({
        "N": a.n,
        "delta": ds.delta,
        "counts": ds.counts(),
        "dimension": l.dimension(),
        "kernel_dim": l.kernel.len(),
        "singularities": sing,
        "theorem": constants::theorem_c(&ds.singularities, l.kernel.len(), spec.rank),
    });
    println!("{}", json(&summary));
    if let Some(p) = &a.adjacency {
        fs::write(p, ds.to_adjacency_csv())?;
    }
    if let Some(p) = &a.emit_spec {
        fs::write(p, surface::surface_to_json(&spec))?;
    }
    write_artifact(out, "build.json", &json(&summary))?;
    Ok(true)
}

fn run_detstar(cfg: &RunConfig, a: &MeshArgs) -> Outcome {
    let (_, spec) = cfg.surface(&a.s)?;
    let lat = cfg.lattice(&a.s.lattice, spec.face_kind)?;
    let ds = surface::discretize(&spec, &lat, a.n)?;
    let l = assemble(&ds)?;
    println!(
        "{}",
        g17(spectral::logdet_star(&l, cfg.backend(&a.backend)?)?)
    );
    Ok(true)
}

fn run_theta(cfg: &RunConfig, a: &ThetaArgs, out: Option<&Path>) -> Outcome {
    let (_, spec) = cfg.surface(&a.s)?;
    let lat = cfg.lattice(&a.s.lattice, spec.face_kind)?;
    let ds = surface::discretize(&spec, &lat, a.n)?;
    let s = spectral::eigensolve(&assemble(&ds)?, false)?;
    let mut csv = String::from("t,theta\n");
    for &t in &a.t {
        csv.push_str(&format!("{},{}\n", g17(t), g17(s.theta(t))));
    }
    print!("{csv}");
    if let Some(p) = &a.spectrum {
        fs::write(p, s.to_csv())?;
    }
    write_artifact(out, "theta.csv", &csv)?;
    Ok(true)
}

fn run_keyformula(cfg: &RunConfig, a: &KeyArgs, out: Option<&Path>) -> Outcome {
    let (_, spec) = cfg.surface(&a.s)?;
    let lat = cfg.lattice(&a.s.lattice, spec.face_kind)?;
    let ds = surface::discretize(&spec, &lat, a.n)?;
    let s = spectral::eigensolve(&assemble(&ds)?, true)?;
    let mut p = KeyFormulaParams {
        rounding: cfg.tolerances.trunc,
        quadrature_tolerance: cfg.tolerances.quadrature,
        ..KeyFormulaParams::default()
    };
    if let Some(r) = a.r {
        p.r = r;
    }
    if let Some(m) = a.model_radius {
        p.model_radius = m;
    }
    let rep = keyformula::evaluate_report(&ds, &s, &p)?;
    let body = json(&rep);
    println!("{body}");
    write_artifact(out, "keyformula.json", &body)?;
    Ok(rep.residual.abs() <= rep.budget)
}

fn run_constants(cfg: &RunConfig, a: &ConstArgs) -> Outcome {
    let mut printed = false;
    if let Some(c) = &a.corner {
        let alpha = parse_angle(&c[0])?;
        let (b, bh) = parse_bc_pair(&c[1])?;
        // the assembly from image sums must reproduce the closed form before it is printed
        constants::corner_assembly_check(alpha, b, bh)?;
        println!(
            "corner,{},{}{},{}",
            g17(alpha),
            b.letter(),
            bh.letter(),
            g17(constants::c_corner(alpha, b, bh))
        );
        printed = true;
    }
    if let Some(c) = &a.cone {
        let alpha = parse_angle(c)?;
        println!("cone,{},{}", g17(alpha), g17(constants::c_cone(alpha)));
        println!(
            "continuum_i,{},{}",
            g17(alpha),
            g17(constants::continuum_i(&ContinuumModel::Cone(alpha)))
        );
        printed = true;
    }
    if let Some(ph) = &a.puncture {
        let d = ph.len();
        let m = nalgebra::DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                num_complex::Complex64::from_polar(1.0, ph[i])
            } else {
                num_complex::Complex64::new(0.0, 0.0)
            }
        });
        println!(
            "puncture,{},{}",
            ph.iter().map(|x| g17(*x)).collect::<Vec<_>>().join(" "),
            g17(constants::c_puncture(&m))
        );
        printed = true;
    }
    if let Some(t) = &a.table {
        let kind = match t.as_str() {
            "square" | "quadrangulation" => CellKind::Quadrangulation,
            "triangle" | "triangulation" => CellKind::Triangulation,
            _ => bail!("--table takes square or triangle"),
        };
        print!("{}", constants::constants_table(kind));
        printed = true;
    }
    if let Some(tau) = &a.torus {
        if tau.len() != 2 {
            bail!("--torus takes re,im");
        }
        let d =
            continuum::torus_zeta_det(tau[0], tau[1], 1.0, asymptotics::CONTINUUM_NORMALIZATION);
        print!("{}", continuum::continuum_csv(&[d]));
        printed = true;
    }
    if a.s.surface.is_some() || cfg.surface.is_some() && !printed {
        let (_, spec) = cfg.surface(&a.s)?;
        let lat = cfg.lattice(&a.s.lattice, spec.face_kind)?;
        let n =
            a.n.ok_or_else(|| anyhow!("--N is required with --surface"))?;
        let ds = surface::discretize(&spec, &lat, n)?;
        let l = assemble(&ds)?;
        println!(
            "{}",
            json(&constants::theorem_c(
                &ds.singularities,
                l.kernel.len(),
                spec.rank
            ))
        );
        printed = true;
    }
    if !printed {
        bail!("constants needs one of --corner, --cone, --puncture, --table, --torus, --surface");
    }
    Ok(true)
}

struct SweepRun {
    name: String,
    spec: SurfaceSpec,
    lat: LatticeSpec,
    records: Vec<asymptotics::SweepRecord>,
}

fn do_sweep(cli: &Cli, cfg: &RunConfig, a: &SweepArgs) -> Result<SweepRun> {
    let (name, spec) = cfg.surface(&a.s)?;
    let lat = cfg.lattice(&a.s.lattice, spec.face_kind)?;
    let cache = if a.no_cache {
        None
    } else {
        Some(cfg.cache(cli)?)
    };
    let records = asymptotics::sweep(
        &spec,
        &lat,
        &cfg.grid(&a.grid),
        cfg.backend(&a.backend)?,
        cache.as_ref(),
    )?;
    Ok(SweepRun {
        name,
        spec,
        lat,
        records,
    })
}

fn fit_options(a: &SweepArgs) -> FitOptions {
    FitOptions {
        linear: a.linear,
        corrections: a.corrections,
        ..Default::default()
    }
}

fn tolerances(cfg: &RunConfig) -> Tolerances {
    Tolerances {
        c: cfg.tolerances.fit_c,
        a: cfg.tolerances.fit_a,
        d: cfg.tolerances.fit_d,
    }
}

fn stem(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}

fn run_sweep(cli: &Cli, cfg: &RunConfig, a: &SweepArgs, out: Option<&Path>) -> Outcome {
    let run = do_sweep(cli, cfg, a)?;
    let csv = asymptotics::records_csv(&run.records);
    print!("{csv}");
    write_artifact(out, &format!("{}-sweep.csv", stem(&run.name)), &csv)?;
    Ok(true)
}

fn run_fit(cli: &Cli, cfg: &RunConfig, a: &SweepArgs, out: Option<&Path>) -> Outcome {
    let run = do_sweep(cli, cfg, a)?;
    let f = asymptotics::fit(&run.records, &run.spec, &run.lat, &fit_options(a))?;
    let body = json(&f);
    println!("{body}");
    write_artifact(out, &format!("{}-fit.json", stem(&run.name)), &body)?;
    Ok(true)
}

fn run_compare(cli: &Cli, cfg: &RunConfig, a: &SweepArgs, out: Option<&Path>) -> Outcome {
    let run = do_sweep(cli, cfg, a)?;
    let f = asymptotics::fit(&run.records, &run.spec, &run.lat, &fit_options(a))?;
    let v = asymptotics::compare(&f, &run.spec, &run.lat, &tolerances(cfg))?;
    let body = json(&serde_json::json!({ "surface": run.name, "fit": f, "verdict": v }));
    println!("{body}");
    write_artifact(out, &format!("{}-compare.json", stem(&run.name)), &body)?;
    Ok(v.pass)
}

fn run_report(cli: &Cli, cfg: &RunConfig, a: &ReportArgs, out: Option<&Path>) -> Outcome {
    let mut all = true;
    let mut csv = String::from("surface,check,fitted,expected,tolerance,pass\n");
    for name in &a.surfaces {
        let args = SweepArgs {
            s: SurfaceArgs {
                surface: Some(name.clone()),
                lattice: a.lattice.clone(),
            },
            grid: a.grid.clone(),
            backend: a.backend.clone(),
            corrections: 0,
            linear: None,
            no_cache: false,
        };
        let run = do_sweep(cli, cfg, &args)?;
        let f = asymptotics::fit(&run.records, &run.spec, &run.lat, &fit_options(&args))?;
        let v = asymptotics::compare(&f, &run.spec, &run.lat, &tolerances(cfg))?;
        for c in &v.checks {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                stem(name),
                c.name,
                g17(c.fitted),
                g17(c.expected),
                g17(c.tolerance),
                c.pass
            ));
        }
        write_artifact(
            out,
            &format!("{}-sweep.csv", stem(name)),
            &asymptotics::records_csv(&run.records),
        )?;
        write_artifact(out, &format!("{}-fit.json", stem(name)), &json(&f))?;
        all &= v.pass;
    }
    print!("{csv}");
    write_artifact(out, "report.csv", &csv)?;
    Ok(all)
}

fn run(cli: &Cli) -> Outcome {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let out = cfg.out_dir(cli);
    let out = out.as_deref();
    match &cli.cmd {
        Cmd::Lattice(a) => run_lattice(&cfg, a),
        Cmd::Build(a) => run_build(&cfg, a, out),
        Cmd::Detstar(a) => run_detstar(&cfg, a),
        Cmd::Theta(a) => run_theta(&cfg, a, out),
        Cmd::Keyformula(a) => run_keyformula(&cfg, a, out),
        Cmd::Constants(a) => run_constants(&cfg, a),
        Cmd::Sweep(a) => run_sweep(cli, &cfg, a, out),
        Cmd::Fit(a) => run_fit(cli, &cfg, a, out),
        Cmd::Compare(a) => run_compare(cli, &cfg, a, out),
        Cmd::Report(a) => run_report(cli, &cfg, a, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
