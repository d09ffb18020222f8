//! The `haarmoments` command line.
//!
//! Every subcommand writes its data (JSON or CSV) to `--out` or standard
//! output, and a [`RunManifest`] to `<out>.manifest.json`, or to standard
//! error when writing to standard output. Exit codes: 0 on success, 1 when a
//! check fails or a computation cannot be completed, 2 on usage errors and
//! unreadable input.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::exact::{rational_parts, Rational};
use crate::freegroup::{
    astar_norm_lower, ball_norm_estimate, ball_words, resolvent_entries, rho_k, MatrixPencil,
    ReducedWord, ResolventOptions,
};
use crate::haarmodel::{freeness_experiment, ExperimentOptions, ModelConfig};
use crate::linalg::c;
use crate::linearization::{default_oracle, poly_norm, sqrt_pencil, GroupPolynomial};
use crate::nonbacktracking::{build_companion, build_nb, excluded_set_distance, Side, WeightsFile};
use crate::symcore::CycleType;
use crate::weingarten::{seed_cache, wg_exact, wg_orth_exact, WeingartenTable};
use crate::{Error, Result};

/// Environment variable naming a directory of memoized Weingarten tables.
pub const CACHE_ENV: &str = "HAARMOMENTS_CACHE";

#[derive(Debug, Parser)]
#[command(
    name = "haarmoments",
    version,
    about = "Haar unitary moments, free-group norms and tensor models"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed; a fresh one is drawn and recorded when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Exact Weingarten table as cycle type -> numerator/denominator.
    WgTable {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        orthogonal: bool,
    },
    /// Centered moments via Wg[π] against the direct bracket expansion.
    CenteredCheck {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        alphabet: usize,
    },
    /// Haar moments against shifted Gaussian moments.
    GaussCompare {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        brackets: bool,
        #[arg(long, default_value_t = 2)]
        alphabet: usize,
    },
    /// Weyl lower estimate of the free norm of a pencil and its ρ_k table.
    FreeNorm {
        #[arg(long)]
        pencil: PathBuf,
        #[arg(long)]
        m: usize,
    },
    /// Companion singular values along a real λ grid and the spectrum of B.
    NbSpectrum {
        #[arg(long)]
        weights: PathBuf,
        /// `LO:HI:STEP`.
        #[arg(long)]
        lambda_grid: String,
        #[arg(long, value_enum, default_value = "right")]
        side: SideArg,
    },
    /// Restricted norms of random tensor models against the free norm.
    Freeness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        trials: u64,
        /// Report zero wall times so reruns are byte-identical.
        #[arg(long)]
        deterministic_timing: bool,
    },
    /// Square-root pencil of a self-adjoint polynomial.
    Linearize {
        #[arg(long)]
        poly: PathBuf,
        /// Also compute the norm in the left-regular representation.
        #[arg(long)]
        norm: bool,
    },
    /// Fast subset of the acceptance checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Right,
    Left,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Right => Side::Right,
            SideArg::Left => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: u64,
    pub version: String,
    pub wall_time_ms: f64,
    /// SHA-256 of the data bytes, hex encoded.
    pub output_sha256: String,
}

/// What a subcommand produced.
struct Output {
    bytes: Vec<u8>,
    passed: bool,
}

impl Output {
    fn json(v: &impl Serialize, passed: bool) -> Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(v)?;
        bytes.push(b'\n');
        Ok(Self { bytes, passed })
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::LengthMismatch { .. } | Error::Io(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

/// Runs the command line with process stdout/stderr; returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    if let Some(t) = cli.common.threads {
        // A global pool can only be installed once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let start = Instant::now();
    let (name, seed, output) = match &cli.command {
        Command::Freeness {
            config,
            trials,
            deterministic_timing,
        } => {
            let file = FreenessConfig::load(config)?;
            let seed = cli
                .common
                .seed
                .or(file.seed)
                .unwrap_or_else(crate::rng::fresh_seed);
            let out = run_freeness(&file, config, seed, *trials, *deterministic_timing)?;
            ("freeness", seed, out)
        }
        other => {
            let seed = cli.common.seed.unwrap_or_else(crate::rng::fresh_seed);
            let out = match other {
                Command::WgTable { k, n, orthogonal } => run_wg_table(*k, *n, *orthogonal)?,
                Command::CenteredCheck { k, n, alphabet } => {
                    let report = crate::centered_wg::consistency_suite(*k, *n, *alphabet)?;
                    Output::json(&report, report.passed())?
                }
                Command::GaussCompare {
                    k,
                    n,
                    brackets,
                    alphabet,
                } => {
                    let report = if *brackets {
                        crate::wick::brackets_grid(*k, *n, *alphabet)?
                    } else {
                        crate::wick::warmup_grid(*k, *n, *alphabet)?
                    };
                    Output::json(&report, report.passed())?
                }
                Command::FreeNorm { pencil, m } => run_free_norm(&MatrixPencil::load(pencil)?, *m)?,
                Command::NbSpectrum {
                    weights,
                    lambda_grid,
                    side,
                } => run_nb_spectrum(weights, lambda_grid, (*side).into())?,
                Command::Linearize { poly, norm } => run_linearize(poly, *norm)?,
                Command::Selftest => run_selftest()?,
                Command::Freeness { .. } => unreachable!(),
            };
            (command_name(other), seed, out)
        }
    };
    let digest = hex::encode(Sha256::digest(&output.bytes));
    let manifest = RunManifest {
        command: name.to_string(),
        parameters: json!({ "command": cli.command, "common": cli.common }),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        output_sha256: digest,
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    match &cli.common.out {
        Some(path) => {
            std::fs::write(path, &output.bytes)?;
            std::fs::write(manifest_path(path), &manifest_bytes)?;
        }
        None => {
            out.write_all(&output.bytes)?;
            err.write_all(&manifest_bytes)?;
            writeln!(err)?;
        }
    }
    Ok(if output.passed { 0 } else { 1 })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::WgTable { .. } => "wg-table",
        Command::CenteredCheck { .. } => "centered-check",
        Command::GaussCompare { .. } => "gauss-compare",
        Command::FreeNorm { .. } => "free-norm",
        Command::NbSpectrum { .. } => "nb-spectrum",
        Command::Freeness { .. } => "freeness",
        Command::Linearize { .. } => "linearize",
        Command::Selftest => "selftest",
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RationalEntry {
    pub numerator: String,
    pub denominator: String,
}

impl RationalEntry {
    fn new(r: &Rational) -> Self {
        let (numerator, denominator) = rational_parts(r);
        Self {
            numerator,
            denominator,
        }
    }

    fn to_rational(&self) -> Result<Rational> {
        let parse = |s: &str| {
            s.parse::<num_bigint::BigInt>()
                .map_err(|e| Error::Invalid(format!("bad integer {s}: {e}")))
        };
        let den = parse(&self.denominator)?;
        if num_traits::Zero::is_zero(&den) {
            return Err(Error::Invalid("zero denominator".into()));
        }
        Ok(Rational::new(parse(&self.numerator)?, den))
    }
}

/// Output of `wg-table`, also the format of the cache files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WgTableFile {
    pub k: usize,
    pub n: usize,
    pub orthogonal: bool,
    /// Cycle type `[l1,l2,...]` (block sizes of `p ∨ q` halved for the
    /// orthogonal group) to the exact value.
    pub values: BTreeMap<String, RationalEntry>,
}

fn key_of(parts: &[usize]) -> String {
    let s: Vec<String> = parts.iter().map(usize::to_string).collect();
    format!("[{}]", s.join(","))
}

fn parts_of(key: &str) -> Result<Vec<usize>> {
    let inner = key
        .strip_prefix('[')
        .and_then(|k| k.strip_suffix(']'))
        .ok_or_else(|| Error::Invalid(format!("bad cycle type {key}")))?;
    inner
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| Error::Invalid(format!("bad cycle type {key}: {e}")))
        })
        .collect()
}

pub fn cache_file(dir: &Path, k: usize, n: usize, orthogonal: bool) -> PathBuf {
    let group = if orthogonal { "orthogonal" } else { "unitary" };
    dir.join(format!("wg-{group}-k{k}-n{n}.json"))
}

fn read_cache(dir: &Path, k: usize, n: usize, orthogonal: bool) -> Option<WgTableFile> {
    let text = std::fs::read_to_string(cache_file(dir, k, n, orthogonal)).ok()?;
    let file: WgTableFile = serde_json::from_str(&text).ok()?;
    (file.k == k && file.n == n && file.orthogonal == orthogonal).then_some(file)
}

/// The table for `(k, n, orthogonal)`, read from or written to the
/// `HAARMOMENTS_CACHE` directory when it is set.
pub fn wg_table_file(k: usize, n: usize, orthogonal: bool) -> Result<WgTableFile> {
    let dir = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    if let Some(file) = dir.as_deref().and_then(|d| read_cache(d, k, n, orthogonal)) {
        if !orthogonal {
            let values = file
                .values
                .iter()
                .map(|(key, v)| Ok((CycleType(parts_of(key)?), v.to_rational()?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            seed_cache(WeingartenTable { k, n, values });
        }
        return Ok(file);
    }
    let values = if orthogonal {
        wg_orth_exact(k, n)?
            .values_by_class()
            .iter()
            .map(|(parts, v)| (key_of(parts), RationalEntry::new(v)))
            .collect()
    } else {
        wg_exact(k, n)?
            .values
            .iter()
            .map(|(ct, v)| (key_of(&ct.0), RationalEntry::new(v)))
            .collect()
    };
    let file = WgTableFile {
        k,
        n,
        orthogonal,
        values,
    };
    if let Some(d) = dir {
        std::fs::create_dir_all(&d)?;
        std::fs::write(
            cache_file(&d, k, n, orthogonal),
            serde_json::to_vec_pretty(&file)?,
        )?;
    }
    Ok(file)
}

fn run_wg_table(k: usize, n: usize, orthogonal: bool) -> Result<Output> {
    Output::json(&wg_table_file(k, n, orthogonal)?, true)
}

fn run_free_norm(pencil: &MatrixPencil, m: usize) -> Result<Output> {
    if m == 0 {
        return Err(Error::Invalid("m must be positive".into()));
    }
    let lower = astar_norm_lower(pencil, m)?;
    let ball = ball_norm_estimate(pencil, m);
    let rho: Vec<Value> = (1..=m)
        .map(|k| Ok(json!({ "k": k, "rho_k": rho_k(pencil, k)? })))
        .collect::<Result<_>>()?;
    Output::json(
        &json!({
            "d": pencil.d(),
            "coeff_dim": pencil.coeff_dim(),
            "m": m,
            "astar_norm_lower": lower,
            "ball_estimate": ball,
            "rho_k": rho,
        }),
        true,
    )
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Invalid(format!("grid {spec} is not LO:HI:STEP")));
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Invalid(format!("bad grid value {s}: {e}")))
    };
    let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Invalid(format!(
            "grid {spec} needs LO <= HI and STEP > 0"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(Error::Invalid(format!("grid {spec} has {count} points")));
    }
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

fn run_nb_spectrum(path: &Path, grid: &str, side: Side) -> Result<Output> {
    let file: WeightsFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let weights = file.to_weights()?;
    let lambdas = parse_grid(grid)?;
    let op = build_nb(&weights, side)?;
    let mut eig = op.eigenvalues()?;
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let grid_rows: Vec<Value> = lambdas
        .iter()
        .map(|&l| {
            let lambda = c(l, 0.0);
            match build_companion(&weights, lambda) {
                Ok(comp) => json!({
                    "lambda": l,
                    "min_singular_value": crate::linalg::min_singular_value(&comp.matrix),
                }),
                Err(_) => json!({
                    "lambda": l,
                    "min_singular_value": Value::Null,
                    "excluded_distance": excluded_set_distance(&weights, lambda),
                }),
            }
        })
        .collect();
    Output::json(
        &json!({
            "side": side,
            "dim": op.total_dim(),
            "grid": grid_rows,
            "spectrum": eig.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        }),
        true,
    )
}

/// TOML configuration of `freeness`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreenessConfig {
    pub n: Vec<usize>,
    pub d: usize,
    #[serde(default)]
    pub q_minus: usize,
    #[serde(default = "one")]
    pub q_plus: usize,
    /// Pencil file, relative to the config file; `a_i = 1`, `a_0 = 0` when absent.
    pub pencil: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn one() -> usize {
    1
}

impl FreenessConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn pencil(&self, config_path: &Path) -> Result<MatrixPencil> {
        let pencil = match &self.pencil {
            Some(p) => {
                let base = config_path.parent().unwrap_or(Path::new("."));
                MatrixPencil::load(&base.join(p))?
            }
            None => MatrixPencil::uniform_scalar(self.d, 0.0, 1.0)?,
        };
        if pencil.d() != self.d {
            return Err(Error::Invalid(format!(
                "pencil has d = {} but config says {}",
                pencil.d(),
                self.d
            )));
        }
        Ok(pencil)
    }
}

fn run_freeness(
    cfg: &FreenessConfig,
    path: &Path,
    seed: u64,
    trials: u64,
    deterministic: bool,
) -> Result<Output> {
    let pencil = cfg.pencil(path)?;
    let configs = cfg
        .n
        .iter()
        .map(|&n| ModelConfig::new(n, cfg.q_minus, cfg.q_plus, pencil.clone(), seed))
        .collect::<Result<Vec<_>>>()?;
    let table = freeness_experiment(
        &configs,
        trials,
        &ExperimentOptions {
            deterministic_timing: deterministic,
        },
    )?;
    let mut bytes = Vec::new();
    table.write_csv(&mut bytes)?;
    Ok(Output {
        bytes,
        passed: true,
    })
}

#[derive(Debug, Clone, Serialize)]
struct LinearizeReport {
    c: f64,
    shift: f64,
    residual: f64,
    support: Vec<String>,
    pencil: crate::linearization::PolynomialFile,
    norm: Option<f64>,
}

fn run_linearize(path: &Path, with_norm: bool) -> Result<Output> {
    let q = GroupPolynomial::from_json_str(&std::fs::read_to_string(path)?)?;
    let g = ball_words(q.d(), q.degree().div_ceil(2));
    let s = sqrt_pencil(&q, &g)?;
    let norm = if with_norm {
        Some(poly_norm(&q, &default_oracle)?)
    } else {
        None
    };
    let report = LinearizeReport {
        c: s.c,
        shift: s.shift,
        residual: s.residual,
        support: g.iter().map(ToString::to_string).collect(),
        pencil: (&s.p).into(),
        norm,
    };
    let passed = s.residual <= 1e-8;
    Output::json(&report, passed)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

/// Quick versions of the acceptance checks.
pub fn selftest_checks() -> Vec<(&'static str, Check)> {
    vec![
        ("gram-inverse", check_gram),
        ("known-moments", check_moments),
        ("catalan-identity", check_catalan),
        ("centered-consistency", check_centered),
        ("rho-k-closed-form", check_rho),
        ("integer-resolvent", check_resolvent),
        ("linearization", check_linearization),
        ("orthogonal-moments", check_orthogonal),
    ]
}

pub fn run_selftest_lines() -> Vec<SelftestLine> {
    selftest_checks()
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = match f() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            SelftestLine {
                name: name.to_string(),
                passed,
                detail,
            }
        })
        .collect()
}

fn run_selftest() -> Result<Output> {
    let lines = run_selftest_lines();
    let passed = lines.iter().all(|l| l.passed);
    Output::json(&lines, passed)
}

fn check_gram() -> Result<(bool, String)> {
    let mut count = 0;
    for k in 1..=3 {
        for n in k..=6 {
            if !crate::weingarten::gram_inverse_holds(&*wg_exact(k, n)?)? {
                return Ok((false, format!("k = {k}, n = {n}")));
            }
            count += 1;
        }
    }
    Ok((true, format!("{count} tables")))
}

fn check_moments() -> Result<(bool, String)> {
    use crate::exact::rat;
    use crate::weingarten::haar_moment;
    for n in 2..=8i64 {
        let nu = n as usize;
        let ok = haar_moment(&[1, 1], &[1, 1], &[1, 1], &[1, 1], nu)? == rat(2, n * (n + 1))
            && haar_moment(&[1, 2], &[1, 2], &[1, 2], &[1, 2], nu)? == rat(1, n * n - 1)
            && haar_moment(&[1, 1], &[1, 2], &[1, 1], &[1, 2], nu)? == rat(1, n * (n + 1));
        if !ok {
            return Ok((false, format!("n = {n}")));
        }
    }
    Ok((true, "n = 2..8".into()))
}

fn check_catalan() -> Result<(bool, String)> {
    use crate::weingarten::{catalan, hurwitz_count};
    for k in 1..=5 {
        for sigma in crate::symcore::all_permutations(k)? {
            let expect: u128 = sigma
                .cycle_type()
                .0
                .iter()
                .map(|&m| catalan(m - 1))
                .product();
            if hurwitz_count(&sigma, 0)? != expect {
                return Ok((false, format!("σ = {sigma}")));
            }
        }
    }
    Ok((true, "k <= 5".into()))
}

fn check_centered() -> Result<(bool, String)> {
    let r = crate::centered_wg::consistency_suite(4, 4, 2)?;
    Ok((r.passed(), format!("{} instances", r.checked)))
}

fn check_rho() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        let p = MatrixPencil::uniform_scalar(d, 0.0, 1.0)?;
        let exact = ((2 * d - 1) as f64).sqrt();
        for k in 1..=8 {
            worst = worst.max((rho_k(&p, k)? - exact).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max error {worst:e}")))
}

fn check_resolvent() -> Result<(bool, String)> {
    let p = MatrixPencil::uniform_scalar(1, 0.0, 1.0)?;
    let o = ReducedWord::identity(1);
    let g = resolvent_entries(
        &p,
        3.0,
        std::slice::from_ref(&o),
        &ResolventOptions::default(),
    )?;
    let err = (g[&o][(0, 0)] - c(1.0 / 5f64.sqrt(), 0.0)).norm();
    Ok((err <= 1e-6, format!("|G_oo(3) - 1/√5| = {err:e}")))
}

fn check_linearization() -> Result<(bool, String)> {
    let d = 1;
    let mut q = GroupPolynomial::zero(d, 1, 1);
    for i in 0..2 {
        q.add_term(
            ReducedWord::generator(d, i)?,
            crate::freegroup::scalar(c(1.0, 0.0)),
        )?;
    }
    let s = sqrt_pencil(&q, &ball_words(d, 1))?;
    let v = poly_norm(&q, &default_oracle)?;
    Ok((
        s.residual <= 1e-8 && (v - 2.0).abs() <= 0.05,
        format!("residual {:e}, norm {v}", s.residual),
    ))
}

fn check_orthogonal() -> Result<(bool, String)> {
    use crate::exact::rat;
    use crate::weingarten::haar_moment_orth;
    let ok = haar_moment_orth(&[1, 1, 1, 1], &[1, 1, 1, 1], 4)? == rat(3, 24)
        && haar_moment_orth(&[1, 1, 2, 2], &[1, 1, 2, 2], 4)? == rat(5, 72);
    Ok((ok, "n = 4".into()))
}
