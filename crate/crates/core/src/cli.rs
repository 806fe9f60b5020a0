//! Command-line front end: distortion gauges, the closed-form example
//! tables, net measures of dyadic sets, the random Cantor experiment and an
//! invariant suite. Every command writes CSV plus a JSON sidecar.

use crate::asymptotics::{distort_form_detailed, fit_exponents, LogPowerForm};
use crate::convex_calculus::{YoungFunction, YoungSpec};
use crate::distortion::{
    build_distortion, default_cn, measure_bound, DistortionBundle, DEFAULT_KAPPA,
};
use crate::error::{Error, Result};
use crate::fractal_lab::{run_fractal, FractalConfig, FractalReport};
use crate::gauge::{GaugeFunction, GaugeSpec};
use crate::hausdorff_net::{
    apriori_cn, net_premeasure, normalization_check, read_points_csv, sandwich_check, CubeSet,
    CubeSetSpec,
};
use crate::numeric::linreg;
use crate::scaling::{classify_stability, scaling_laws, InverseYoung, Stability, ThetaRegime};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const THREADS_ENV: &str = "ORLICZ_DISTORT_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MALFORMED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "orlicz-distort", version, about = "Hausdorff-gauge distortion under Orlicz-Sobolev maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Poincaré constant used by the bounds.
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Covering constant `c_n`.
    #[arg(long, global = true)]
    pub cn: Option<f64>,
    /// Tolerance for invariant and scaling-law checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Distortion gauge of a Young function and a gauge; writes ψ samples.
    Distort,
    /// Closed-form example tables.
    Examples,
    /// Net pre-measure of a dyadic set.
    Netmeasure,
    /// Random Cantor experiment.
    Fractal,
    /// Invariant suite over the default corpus.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Distort => "distort",
            Command::Examples => "examples",
            Command::Netmeasure => "netmeasure",
            Command::Fractal => "fractal",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub config: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub kappa: f64,
    pub cn: Option<f64>,
    pub tol: f64,
}

pub const DEFAULT_TOL: f64 = 1e-3;

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        if let Some(p) = &cli.config {
            if !p.is_file() {
                return Err(Error::Input(format!("config file {} does not exist", p.display())));
            }
        }
        let tol = cli.tol.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
        }
        let kappa = cli.kappa.unwrap_or(DEFAULT_KAPPA);
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Input(format!("κ must be positive, got {kappa}")));
        }
        if let Some(c) = cli.cn {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Input(format!("c_n must be positive, got {c}")));
            }
        }
        Ok(RunConfig {
            command: cli.command,
            config: cli.config.clone(),
            out: cli.out.clone(),
            seed: cli.seed,
            kappa,
            cn: cli.cn,
            tol,
        })
    }
}

/// Maps an error to the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Spec { .. } | Error::Input(_) => EXIT_MALFORMED,
        Error::Inconclusive(_) => EXIT_INCONCLUSIVE,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub exit: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Parses arguments, sizes the thread pool and runs the command.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return EXIT_MALFORMED;
            }
        }
    }
    let cfg = match RunConfig::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match run(&cfg) {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            o.exit
        }
        Err(e) => {
            match (&e, &cfg.config) {
                (Error::Spec { line, column, msg }, Some(p)) => {
                    eprintln!("error: {}:{line}:{column}: malformed spec: {msg}", p.display())
                }
                _ => eprintln!("error: {e}"),
            }
            exit_code(&e)
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    match cfg.command {
        Command::Distort => run_distort(cfg),
        Command::Examples => run_examples(cfg),
        Command::Netmeasure => run_netmeasure(cfg),
        Command::Fractal => run_fractal_cmd(cfg),
        Command::Verify => run_verify(cfg),
    }
}

fn io_err(p: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", p.display()))
}

fn load_config<T: DeserializeOwned>(cfg: &RunConfig) -> Result<Option<T>> {
    match &cfg.config {
        None => Ok(None),
        Some(p) => {
            let s = fs::read_to_string(p).map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&s).map(Some).map_err(|e| Error::from_json(&e))
        }
    }
}

/// SHA-256 of the canonical JSON of the resolved configuration.
pub fn config_hash<T: Serialize>(run: &RunConfig, body: &T) -> String {
    #[derive(Serialize)]
    struct Hashed<'a, T> {
        run: &'a RunConfig,
        body: &'a T,
    }
    let json = serde_json::to_string(&Hashed { run, body }).unwrap_or_default();
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes `# config_hash=<hex>`, a header row and the records.
pub fn write_csv<T: Serialize>(path: &Path, hash: &str, rows: &[T]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(f, "# config_hash={hash}").map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(f);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, s + "\n").map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortConfig {
    pub n: usize,
    pub young: YoungSpec,
    pub gauge: GaugeSpec,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// `‖∇u‖_{L^A}` and `H^φ(E)` for the measure bound, when given.
    #[serde(default)]
    pub grad_norm: Option<f64>,
    #[serde(default)]
    pub measure: Option<f64>,
}

fn default_r_min() -> f64 {
    1e-9
}

fn default_r_max() -> f64 {
    1e-3
}

fn default_samples() -> usize {
    200
}

impl Default for DistortConfig {
    fn default() -> Self {
        DistortConfig {
            n: 2,
            young: YoungSpec::Power { p: 4.0, head: None },
            gauge: GaugeSpec::Power { alpha: 1.0 },
            r_min: default_r_min(),
            r_max: default_r_max(),
            samples: default_samples(),
            grad_norm: None,
            measure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PsiRow {
    r: f64,
    psi: f64,
    j_inverse: f64,
}

#[derive(Debug, Clone, Serialize)]
struct DistortSidecar<'a> {
    command: &'static str,
    config_hash: &'a str,
    config: &'a DistortConfig,
    kappa: f64,
    c_n: f64,
    tol: f64,
    slope: f64,
    fit: Option<crate::asymptotics::ExponentFit>,
    head_exponent: Option<f64>,
    sobolev: &'a crate::sobolev_conjugate::SobolevReport,
    invariants: crate::distortion::InvariantReport,
    invariants_hold: bool,
    stability: Option<crate::scaling::StabilityReport>,
    bound: Option<crate::distortion::BoundReport>,
}

fn run_distort(cfg: &RunConfig) -> Result<RunOutcome> {
    let dc: DistortConfig = load_config(cfg)?.unwrap_or_default();
    if !(0.0 < dc.r_min && dc.r_min < dc.r_max && dc.r_max < 1.0) {
        return Err(Error::Input("need 0 < r_min < r_max < 1".into()));
    }
    if dc.samples < 2 {
        return Err(Error::Input("need at least two samples".into()));
    }
    let a = YoungFunction::from_spec(&dc.young)?;
    let phi = GaugeFunction::from_spec(&dc.gauge, dc.n)?;
    let bundle = build_distortion(&a, &phi, dc.n)?;
    let (lo, hi) = (dc.r_min.ln(), dc.r_max.ln());
    let rows: Vec<PsiRow> = (0..dc.samples)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (dc.samples - 1) as f64;
            let r = x.exp();
            PsiRow {
                r,
                psi: bundle.psi(r),
                j_inverse: bundle.j_inverse(r),
            }
        })
        .collect();
    let lx: Vec<f64> = rows.iter().map(|p| p.r.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|p| p.psi.ln()).collect();
    let slope = linreg(&lx, &ly)?.0;
    let fit = fit_exponents(&rows.iter().map(|p| (p.r, p.psi)).collect::<Vec<_>>(), false).ok();
    let c_n = cfg.cn.unwrap_or_else(|| default_cn(dc.n));
    let bound = match (dc.grad_norm, dc.measure) {
        (Some(g), Some(h)) => Some(measure_bound(&bundle, g, h, cfg.kappa, c_n)?),
        (None, None) => None,
        _ => return Err(Error::Input("grad_norm and measure must be given together".into())),
    };
    let invariants = bundle.invariants();
    let invariants_hold = invariants.holds(cfg.tol);
    let hash = config_hash(cfg, &dc);
    let csv_path = cfg.out.join("distort.csv");
    let json_path = cfg.out.join("distort.json");
    write_csv(&csv_path, &hash, &rows)?;
    write_json(
        &json_path,
        &DistortSidecar {
            command: "distort",
            config_hash: &hash,
            config: &dc,
            kappa: cfg.kappa,
            c_n,
            tol: cfg.tol,
            slope,
            fit,
            head_exponent: bundle.head_exponent,
            sobolev: &bundle.sobolev,
            invariants,
            invariants_hold,
            stability: classify_stability(bundle.psi_map(), &bundle.b).ok(),
            bound,
        },
    )?;
    Ok(RunOutcome {
        exit: if invariants_hold { EXIT_OK } else { EXIT_FAILURE },
        files: vec![csv_path, json_path],
        summary: format!(
            "distort: slope {slope:.6} over [{:e}, {:e}], invariants {}",
            dc.r_min,
            dc.r_max,
            if invariants_hold { "hold" } else { "FAIL" }
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleRow {
    pub example: u8,
    pub n: usize,
    pub young: &'static str,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub psi_a: f64,
    pub psi_b: f64,
    pub psi_c: f64,
    pub case: String,
    pub flag: String,
}

/// The closed-form tables: power-log Young functions above the critical
/// exponent, at the critical exponent, exponential ones, and logarithmic
/// gauges for which the distortion is trivial.
pub fn example_rows() -> Vec<ExampleRow> {
    let mut out = Vec::new();
    let mut push = |example: u8, n: usize, young: &'static str, af: LogPowerForm, al: f64, be: f64| {
        let (p, q, gamma) = match young {
            "exp" => (None, None, Some(af.a)),
            _ => (Some(af.a), Some(af.b), None),
        };
        let phi = LogPowerForm::near_zero(al, be, 0.0);
        if let Ok(o) = distort_form_detailed(&af, &phi, n) {
            out.push(ExampleRow {
                example,
                n,
                young,
                p,
                q,
                gamma,
                alpha: al,
                beta: be,
                psi_a: o.form.a,
                psi_b: o.form.b,
                psi_c: o.form.c,
                case: o.case,
                flag: o.flag.unwrap_or_default(),
            });
        }
    };
    for n in [2usize, 3] {
        let nf = n as f64;
        let gauges = [(1.0, 0.0), (1.0, 1.0), (nf - 0.5, -1.0), (0.0, -1.0), (nf, 0.0), (nf, 1.0)];
        for p in [nf + 1.0, nf + 2.0] {
            for q in [0.0, 1.0] {
                for &(al, be) in &gauges {
                    push(1, n, "powerlog", LogPowerForm::near_infinity(p, q), al, be);
                }
            }
        }
        for q in [nf - 0.5, nf, nf + 1.0] {
            for &(al, be) in gauges.iter().chain([(0.0, -2.0)].iter()) {
                push(2, n, "powerlog", LogPowerForm::near_infinity(nf, q), al, be);
            }
        }
        for g in [1.0, 2.0] {
            for &(al, be) in &gauges {
                push(3, n, "exp", LogPowerForm::exponential(g), al, be);
            }
        }
        for p in [nf + 1.0, 2.0 * nf] {
            for be in [-1.0, -2.0] {
                push(4, n, "powerlog", LogPowerForm::near_infinity(p, 0.0), 0.0, be);
            }
        }
    }
    out
}

fn run_examples(cfg: &RunConfig) -> Result<RunOutcome> {
    let rows = example_rows();
    let hash = config_hash(cfg, &"examples");
    let csv_path = cfg.out.join("examples.csv");
    let json_path = cfg.out.join("examples.json");
    write_csv(&csv_path, &hash, &rows)?;
    let flagged = rows.iter().filter(|r| !r.flag.is_empty()).count();
    write_json(
        &json_path,
        &serde_json::json!({
            "command": "examples",
            "config_hash": hash,
            "rows": rows.len(),
            "flagged": flagged,
        }),
    )?;
    Ok(RunOutcome {
        exit: EXIT_OK,
        files: vec![csv_path, json_path],
        summary: format!("examples: {} rows, {flagged} flagged", rows.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetmeasureConfig {
    pub gauge: GaugeSpec,
    pub sigma: f64,
    #[serde(default)]
    pub set: Option<CubeSetSpec>,
    /// CSV point cloud, relative to the config file.
    #[serde(default)]
    pub points_csv: Option<PathBuf>,
    #[serde(default)]
    pub level: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CoverRow {
    level: u32,
    coords: String,
    subdivide_to: u32,
    pieces: f64,
    cost: f64,
}

fn run_netmeasure(cfg: &RunConfig) -> Result<RunOutcome> {
    let nc: NetmeasureConfig = load_config(cfg)?
        .ok_or_else(|| Error::Input("netmeasure needs --config".into()))?;
    let e = match (&nc.set, &nc.points_csv) {
        (Some(s), None) => CubeSet::from_spec(s)?,
        (None, Some(p)) => {
            let base = cfg.config.as_ref().and_then(|c| c.parent()).unwrap_or(Path::new("."));
            let path = base.join(p);
            let f = fs::File::open(&path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            let pts = read_points_csv(f)?;
            let n = pts.first().map(|p| p.len()).ok_or_else(|| Error::Input("no points".into()))?;
            let level = nc.level.ok_or_else(|| Error::Input("points_csv needs a level".into()))?;
            CubeSet::from_points(n, &pts, level)?
        }
        _ => return Err(Error::Input("give exactly one of set and points_csv".into())),
    };
    let phi = GaugeFunction::from_spec(&nc.gauge, e.n())?;
    let res = net_premeasure(&e, &phi, nc.sigma)?;
    let c_n = cfg.cn.unwrap_or_else(|| apriori_cn(e.n()));
    let sandwich = sandwich_check(&e, &phi, nc.sigma, c_n)?;
    let norm = normalization_check(&e, &phi, nc.sigma)?;
    let nf = e.n() as f64;
    let rows: Vec<CoverRow> = res
        .cover
        .iter()
        .map(|c| {
            let pieces = 2f64.powf(nf * (c.subdivide_to - c.cube.level) as f64);
            CoverRow {
                level: c.cube.level,
                coords: c.cube.coords.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "),
                subdivide_to: c.subdivide_to,
                pieces,
                cost: pieces * phi.eval(crate::hausdorff_net::ln_diameter(e.n(), c.subdivide_to).exp()),
            }
        })
        .collect();
    let hash = config_hash(cfg, &nc);
    let csv_path = cfg.out.join("netmeasure.csv");
    let json_path = cfg.out.join("netmeasure.json");
    write_csv(&csv_path, &hash, &rows)?;
    let ok = sandwich.lower_holds && sandwich.upper_holds && norm.holds;
    write_json(
        &json_path,
        &serde_json::json!({
            "command": "netmeasure",
            "config_hash": hash,
            "config": nc,
            "cubes": e.len(),
            "value": res.value,
            "sandwich": sandwich,
            "normalization": norm,
        }),
    )?;
    Ok(RunOutcome {
        exit: if ok { EXIT_OK } else { EXIT_FAILURE },
        files: vec![csv_path, json_path],
        summary: format!(
            "netmeasure: Λ = {:e} over {} cubes, {} cover pieces, measured c_n {:.4}",
            res.value,
            e.len(),
            rows.len(),
            sandwich.measured_cn
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FractalCsvRow {
    j: usize,
    cubes: usize,
    support_overlap: usize,
    ln_level_sum: f64,
    single_norm: f64,
    norm_ratio: f64,
    aggregate_norm: f64,
    aggregate_bound: f64,
    level_norm: f64,
    energy: f64,
    energy_stderr: f64,
    energy_normalized: f64,
    image_sum_probe: f64,
    image_sum_psi: f64,
}

/// Resolves the fractal configuration: the file if given, else the preset,
/// with `--seed` taking precedence.
pub fn fractal_config(cfg: &RunConfig) -> Result<FractalConfig> {
    let mut fc: FractalConfig = load_config(cfg)?.unwrap_or_else(FractalConfig::preset);
    if let Some(s) = cfg.seed {
        fc.seed = s;
    }
    Ok(fc)
}

fn run_fractal_cmd(cfg: &RunConfig) -> Result<RunOutcome> {
    let fc = fractal_config(cfg)?;
    let report: FractalReport = run_fractal(&fc)?;
    let rows: Vec<FractalCsvRow> = report
        .rows
        .iter()
        .map(|r| FractalCsvRow {
            j: r.j,
            cubes: r.cubes,
            support_overlap: r.support_overlap,
            ln_level_sum: r.ln_level_sum,
            single_norm: r.single_norm,
            norm_ratio: r.norm_ratio,
            aggregate_norm: r.aggregate_norm,
            aggregate_bound: r.aggregate_bound,
            level_norm: r.level_norm,
            energy: r.energy,
            energy_stderr: r.energy_stderr,
            energy_normalized: r.energy_normalized,
            image_sum_probe: r.image_sum_probe,
            image_sum_psi: r.image_sum_psi,
        })
        .collect();
    let hash = config_hash(cfg, &fc);
    let csv_path = cfg.out.join("fractal.csv");
    let json_path = cfg.out.join("fractal.json");
    write_csv(&csv_path, &hash, &rows)?;
    write_json(
        &json_path,
        &serde_json::json!({
            "command": "fractal",
            "config_hash": hash,
            "report": report,
        }),
    )?;
    Ok(RunOutcome {
        exit: EXIT_OK,
        files: vec![csv_path, json_path],
        summary: format!(
            "fractal: σ = {}, μ = {}, energy {:e} ± {:e}, shape spread {:.3} (shifted {:.3})",
            report.sigma,
            report.mu,
            report.energy_total,
            report.energy_stderr,
            report.energy_shape_spread,
            report.shifted_shape_spread
        ),
    })
}

/// An instance of the default corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub n: usize,
    pub young: YoungSpec,
    pub gauge: GaugeSpec,
    pub expected: Stability,
}

impl CorpusEntry {
    pub fn build(&self) -> Result<DistortionBundle> {
        let a = YoungFunction::from_spec(&self.young)?;
        let phi = GaugeFunction::from_spec(&self.gauge, self.n)?;
        build_distortion(&a, &phi, self.n)
    }
}

pub fn default_corpus() -> Vec<CorpusEntry> {
    let e = std::f64::consts::E;
    let entry = |name: &str, n, young, gauge, expected| CorpusEntry {
        name: name.into(),
        n,
        young,
        gauge,
        expected,
    };
    vec![
        entry(
            "power-kaufman",
            2,
            YoungSpec::Power { p: 4.0, head: None },
            GaugeSpec::Power { alpha: 1.0 },
            Stability::Vanishing,
        ),
        entry(
            "powerlog-critical",
            2,
            YoungSpec::Powerlog { p: 2.0, q: 2.0, shift: e, base: e, head: None },
            GaugeSpec::Power { alpha: 1.0 },
            Stability::Vanishing,
        ),
        entry(
            "exponential",
            2,
            YoungSpec::Exp { gamma: 1.0, head: None },
            GaugeSpec::Power { alpha: 1.0 },
            Stability::Stable,
        ),
        entry(
            "power-loggauge",
            2,
            YoungSpec::Power { p: 4.0, head: None },
            GaugeSpec::Logpower { beta: -1.0, shift: e, base: e },
            Stability::Stable,
        ),
        entry(
            "powerlog-super",
            2,
            YoungSpec::Powerlog { p: 3.0, q: 1.0, shift: e, base: e, head: None },
            GaugeSpec::Powerlog { alpha: 1.5, beta: -0.5, shift: e, base: e },
            Stability::Vanishing,
        ),
        entry(
            "power-line",
            1,
            YoungSpec::Power { p: 3.0, head: None },
            GaugeSpec::Power { alpha: 0.5 },
            Stability::Vanishing,
        ),
        entry(
            "power-space",
            3,
            YoungSpec::Power { p: 5.0, head: None },
            GaugeSpec::Power { alpha: 2.0 },
            Stability::Vanishing,
        ),
    ]
}

/// Young functions paired with `φ = r^n`; the distortion must be `r^n`.
pub fn identity_corpus() -> Vec<CorpusEntry> {
    let e = std::f64::consts::E;
    let knots: Vec<[f64; 2]> = (-120..=120)
        .map(|i| {
            let x = i as f64 * 0.25;
            let (a, b) = (3.0 * x, 5.0 * x);
            [x, a.max(b) + (-(a - b).abs()).exp().ln_1p()]
        })
        .collect();
    let entry = |name: &str, n: usize, young| CorpusEntry {
        name: name.into(),
        n,
        young,
        gauge: GaugeSpec::Power { alpha: n as f64 },
        expected: Stability::Stable,
    };
    vec![
        entry("power", 2, YoungSpec::Power { p: 4.0, head: None }),
        entry("powerlog-super", 2, YoungSpec::Powerlog { p: 3.0, q: 1.0, shift: e, base: e, head: None }),
        entry("powerlog-critical", 2, YoungSpec::Powerlog { p: 2.0, q: 2.0, shift: e, base: e, head: None }),
        entry("exponential", 2, YoungSpec::Exp { gamma: 1.0, head: None }),
        entry("table", 2, YoungSpec::Table { log_knots: knots, head: None }),
        entry("power-line", 1, YoungSpec::Power { p: 3.0, head: None }),
        entry("power-space", 3, YoungSpec::Power { p: 5.0, head: None }),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub instance: String,
    pub passed: bool,
    pub detail: String,
}

pub const KEY_PAIRS: usize = 10_000;
pub const KEY_TOL: f64 = 1e-8;
pub const LAW_POINTS: usize = 1000;

/// Largest relative key-inequality gap over random `(s, t)`.
pub fn key_inequality_scan(b: &DistortionBundle, pairs: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut invalid = 0;
    for _ in 0..pairs {
        let ls: f64 = rng.random_range(-12.0..12.0);
        let lt: f64 = rng.random_range(-25.0..0.0);
        let g = b.key_inequality_relative_gap(ls.exp(), lt.exp());
        if g.is_nan() {
            invalid += 1;
        } else {
            worst = worst.max(g);
        }
    }
    (worst, invalid)
}

/// Fitted slope of `ln ψ` against `ln r` over `[1e-9, 1e-3]`.
pub fn psi_slope(b: &DistortionBundle) -> Result<f64> {
    let xs: Vec<f64> = (0..=120).map(|i| 1e-9f64.ln() + (1e6f64).ln() * i as f64 / 120.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| b.ln_psi(x)).collect();
    Ok(linreg(&xs, &ys)?.0)
}

/// Runs the invariant suites over the default corpus.
pub fn verify_suite(tol: f64, seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |suite: &str, instance: &str, passed: bool, detail: String| {
        checks.push(Check {
            suite: suite.into(),
            instance: instance.into(),
            passed,
            detail,
        })
    };
    for (i, c) in default_corpus().iter().enumerate() {
        let b = match c.build() {
            Ok(b) => b,
            Err(e) => {
                push("build", &c.name, false, e.to_string());
                continue;
            }
        };
        let inv = b.invariants();
        push("invariants", &c.name, inv.holds(tol), format!("{inv:?}"));
        let (worst, invalid) = key_inequality_scan(&b, KEY_PAIRS, seed.wrapping_add(i as u64));
        push(
            "key_inequality",
            &c.name,
            invalid == 0 && worst <= KEY_TOL,
            format!("worst relative gap {worst:e}, {invalid} invalid of {KEY_PAIRS}"),
        );
        for (what, res) in [
            ("scaling_laws_psi", scaling_laws(b.psi_map(), c.n as f64, ThetaRegime::Zero, LAW_POINTS, 3.0, seed)),
            (
                "scaling_laws_b_inverse",
                scaling_laws(&InverseYoung(&b.b), 1.0, ThetaRegime::Infinity, LAW_POINTS, 3.0, seed),
            ),
        ] {
            match res {
                Ok(r) => push(what, &c.name, r.holds(tol), format!("{r:?}")),
                Err(e) => push(what, &c.name, false, e.to_string()),
            }
        }
        match classify_stability(b.psi_map(), &b.b) {
            Ok(s) => push(
                "stability",
                &c.name,
                s.class == c.expected,
                format!("{:?} (expected {:?}): {}", s.class, c.expected, s.note),
            ),
            Err(e) => push("stability", &c.name, false, e.to_string()),
        }
    }
    for c in identity_corpus() {
        let res = c.build().and_then(|b| psi_slope(&b));
        match res {
            Ok(s) => {
                let n = c.n as f64;
                push(
                    "identity",
                    &c.name,
                    (s - n).abs() <= 0.01 * n,
                    format!("slope {s:.6}, n = {n}"),
                );
            }
            Err(e) => push("identity", &c.name, false, e.to_string()),
        }
    }
    checks
}

fn run_verify(cfg: &RunConfig) -> Result<RunOutcome> {
    let seed = cfg.seed.unwrap_or(1);
    let checks = verify_suite(cfg.tol, seed);
    let passed = checks.iter().all(|c| c.passed);
    let failed = checks.iter().filter(|c| !c.passed).count();
    let hash = config_hash(cfg, &"verify");
    let csv_path = cfg.out.join("verify.csv");
    let json_path = cfg.out.join("verify.json");
    write_csv(&csv_path, &hash, &checks)?;
    write_json(
        &json_path,
        &serde_json::json!({
            "command": "verify",
            "config_hash": hash,
            "passed": passed,
            "checks": checks,
        }),
    )?;
    Ok(RunOutcome {
        exit: if passed { EXIT_OK } else { EXIT_FAILURE },
        files: vec![csv_path, json_path],
        summary: format!("verify: {} checks, {failed} failed", checks.len()),
    })
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
