//! Command-line driver: argument parsing, run configuration files, run
//! directories and manifests.
//!
//! Every subcommand resolves its flags (and config file, if any) into a
//! [`Job`], which is what gets stored in the manifest. Replaying a manifest
//! rebuilds the job from that record and compares output checksums.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grammar::{display_symbol, parse_symbol, print_symbol};
use crate::hopf::coproduct;
use crate::kernels::constants::linear_fit;
use crate::kernels::{
    build_truncated_kernel, constants, log_fit, verify_appendix_bounds, Basis, ConstantsRecord, LinearFit,
    Profile, QSpec,
};
use crate::noise::{Field, FieldMeta, FORMAT_VERSION, GENERATOR_ID};
use crate::poly::{Poly, Var};
use crate::renorm::renormalized_nonlinearity;
use crate::solver::{
    epsilon_sweep, run, Counterterms, Formulation, InitSpec, RenormSetting, RunConfig, Snapshot, SystemSpec,
    Termination, CSV_HEADER,
};
use crate::symbols::{enumerate_symbols, homogeneity, xi_count, Homogeneity, Scaling};
use crate::{parse_nonlinearity, CubicPolynomial};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;
/// Environment variable naming the output root.
pub const OUT_ENV: &str = "FHNREG_OUT";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "fhnreg", version, about = "Renormalisation toolkit for FitzHugh-Nagumo type SPDE-ODE systems")]
pub struct Cli {
    /// Output root; defaults to $FHNREG_OUT, then ./out
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the symbols below a homogeneity cutoff, with their coproducts
    Symbols(SymbolsArgs),
    /// Coproduct of one symbol given in the text grammar
    Coproduct(CoproductArgs),
    /// Renormalised equation for a cubic nonlinearity
    RenormEq(RenormEqArgs),
    /// Renormalisation constants C1, C2 and I_ij over a list of scales
    Constants(ConstantsArgs),
    /// Bounds on the Q-convolved kernel and the constants as ε shrinks
    VerifyBounds(BoundsArgs),
    /// One run of the renormalised system from a config file
    Simulate(ConfigArgs),
    /// ε-sweep on common noise from a config file
    Converge(ConfigArgs),
    /// Re-run a stored manifest and compare output checksums
    Replay {
        manifest: PathBuf,
    },
}

/// Accepts decimals, fractions (`1/16`) and powers of two (`2^-4`).
pub fn parse_scale(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = if let Some(e) = s.strip_prefix("2^") {
        2f64.powi(e.parse::<i32>().map_err(|e| e.to_string())?)
    } else if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in {s}"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in {s}"))?;
        a / b
    } else {
        s.parse::<f64>().map_err(|e| e.to_string())?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not finite"))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SymbolsArgs {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Homogeneity cutoff as a rational, e.g. 0 or 3/2 (κ-free part)
    #[arg(long, default_value = "0", allow_negative_numbers = true)]
    pub cutoff: String,
    /// Number of E channels added to the table
    #[arg(long, default_value_t = 0)]
    pub channels: u8,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CoproductArgs {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// e.g. "I(I(Xi)^3)*I(Xi)^2"
    pub symbol: String,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RenormEqArgs {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Cubic nonlinearity in u and v (or v1..vn)
    #[arg(long = "F", default_value = "u - u^3 + v")]
    pub f: String,
    /// Number of gating variables
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Evaluate the constants numerically at this ε (scalar Q with a1 = a2 = -1)
    #[arg(long, value_parser = parse_scale)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisArg {
    G,
    K,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Basis {
        match b {
            BasisArg::G => Basis::G,
            BasisArg::K => Basis::K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ConstantsArgs {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Comma-separated scales, largest first
    #[arg(long, value_delimiter = ',', value_parser = parse_scale, default_values_t = [0.125, 0.0625, 0.03125])]
    pub eps: Vec<f64>,
    #[arg(long, value_enum, default_value_t = BasisArg::G)]
    pub basis: BasisArg,
    /// Q(t) = a1·e^{t·a2} (scalar gating variable)
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub a1: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub a2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Relative error budget; exceeding it gives exit status 2
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_scale, default_values_t = [0.125, 0.0625, 0.03125])]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub theta: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub a1: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub a2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
}

/// Sample points (t, |x|) for the kernel bound; kept off the axis where
/// the unmollified kernel is singular.
pub const BOUND_SAMPLES: [(f64, f64); 9] =
    [(0.01, 0.1), (0.05, 0.1), (0.2, 0.1), (0.01, 0.2), (0.05, 0.2), (0.2, 0.2), (0.02, 0.3), (0.1, 0.3), (0.3, 0.3)];

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides [noise] seed
    #[arg(long)]
    pub seed: Option<u64>,
}

// ---------------------------------------------------------------------------
// run configuration file

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

fn default_f() -> String {
    "u - u^3 + v".into()
}

fn default_formulation() -> Formulation {
    Formulation::Direct
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default = "default_f")]
    pub f: String,
    /// A₁ entries; the number of gating variables is its length
    pub a1: Option<Vec<f64>>,
    /// A₂ rows
    pub a2: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_formulation")]
    pub formulation: Formulation,
    pub u0: Option<InitSpec>,
    pub v0: Option<InitSpec>,
    /// sup-norm cutoff L on u
    pub cutoff: Option<f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            f: default_f(),
            a1: None,
            a2: None,
            formulation: default_formulation(),
            u0: None,
            v0: None,
            cutoff: None,
        }
    }
}

fn default_profile() -> Profile {
    Profile::CompactBump
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub seed: u64,
    pub eps: Option<f64>,
    /// decreasing scales for `converge`
    pub eps_list: Option<Vec<f64>>,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { seed: 0, eps: None, eps_list: None, profile: default_profile(), amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenormMode {
    #[default]
    Auto,
    Off,
    Fixed,
}

/// For `fixed`, the terms added to F are c0 + c1·u + Σ c2ᵢ·vᵢ.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenormSection {
    #[serde(default)]
    pub mode: RenormMode,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<Vec<f64>>,
}

fn default_cadence() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// steps between rows of the norm series
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    /// steps between stored field snapshots (0 = final state only)
    #[serde(default)]
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { cadence: default_cadence(), snapshot_every: 0 }
    }
}

/// The `[grid] [system] [noise] [renorm] [output]` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub grid: GridSection,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub renorm: RenormSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<RunFile, CliError> {
        toml::from_str(text).map_err(|e| usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunFile, CliError> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        RunFile::parse(&text)
    }

    /// Fills every default so the stored config is self-contained.
    pub fn resolve(mut self) -> Result<RunFile, CliError> {
        let d = self.grid.d;
        if d != 2 && d != 3 {
            return Err(usage(format!("[grid] d must be 2 or 3, got {d}")));
        }
        let base = RunConfig::defaults(d);
        let n = *self.grid.n.get_or_insert(base.n);
        self.grid.dt.get_or_insert(base.dt);
        self.grid.t_end.get_or_insert(base.t_end);
        let a1 = self.system.a1.get_or_insert_with(|| vec![-1.0]).clone();
        self.system.a2.get_or_insert_with(|| {
            (0..a1.len()).map(|i| (0..a1.len()).map(|j| if i == j { -1.0 } else { 0.0 }).collect()).collect()
        });
        self.system.u0.get_or_insert(InitSpec::Zero);
        self.system.v0.get_or_insert(InitSpec::Zero);
        self.system.cutoff.get_or_insert(base.cutoff);
        self.noise.eps.get_or_insert(4.0 / n as f64);
        if self.renorm.mode == RenormMode::Fixed {
            if self.renorm.c1.is_none() {
                return Err(usage("[renorm] mode = \"fixed\" needs c1"));
            }
            self.renorm.c0.get_or_insert(0.0);
            self.renorm.c2.get_or_insert_with(|| vec![0.0; a1.len()]);
        }
        self.spec()?;
        self.run_config().validate().map_err(usage)?;
        Ok(self)
    }

    pub fn nonlinearity(&self) -> Result<CubicPolynomial, CliError> {
        let n = self.system.a1.as_ref().map_or(1, Vec::len);
        parse_nonlinearity(&self.system.f, n).map_err(|e| usage(format!("[system] f: {e}")))
    }

    pub fn spec(&self) -> Result<SystemSpec, CliError> {
        let f = self.nonlinearity()?;
        let renorm = match self.renorm.mode {
            RenormMode::Auto => RenormSetting::Auto,
            RenormMode::Off => RenormSetting::Off,
            RenormMode::Fixed => {
                let c1 = self.renorm.c1.unwrap_or(0.0);
                RenormSetting::Fixed(Counterterms {
                    c: c1,
                    c0: self.renorm.c0.unwrap_or(0.0),
                    c1,
                    c2: self.renorm.c2.clone().unwrap_or_else(|| vec![0.0; f.n]),
                })
            }
        };
        SystemSpec::new(
            self.grid.d,
            f,
            self.system.a1.clone().unwrap_or_else(|| vec![-1.0]),
            self.system.a2.clone().unwrap_or_else(|| vec![vec![-1.0]]),
            renorm,
            self.system.formulation,
        )
        .map_err(usage)
    }

    pub fn run_config(&self) -> RunConfig {
        let base = RunConfig::defaults(self.grid.d);
        let n = self.grid.n.unwrap_or(base.n);
        RunConfig {
            n,
            dt: self.grid.dt.unwrap_or(base.dt),
            t_end: self.grid.t_end.unwrap_or(base.t_end),
            eps: self.noise.eps.unwrap_or(4.0 / n as f64),
            profile: self.noise.profile,
            seed: self.noise.seed,
            amplitude: self.noise.amplitude,
            u0: self.system.u0.clone().unwrap_or(InitSpec::Zero),
            v0: self.system.v0.clone().unwrap_or(InitSpec::Zero),
            cutoff: self.system.cutoff.unwrap_or(base.cutoff),
            cadence: self.output.cadence,
            snapshot_every: self.output.snapshot_every,
        }
    }
}

// ---------------------------------------------------------------------------
// jobs

/// A fully resolved subcommand invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Symbols(SymbolsArgs),
    Coproduct(CoproductArgs),
    RenormEq(RenormEqArgs),
    Constants(ConstantsArgs),
    VerifyBounds(BoundsArgs),
    Simulate(RunFile),
    Converge(RunFile),
}

fn to_table<T: Serialize>(x: &T) -> toml::Table {
    toml::Table::try_from(x).expect("configs serialise to tables")
}

fn from_table<T: for<'de> Deserialize<'de>>(t: &toml::Table) -> Result<T, CliError> {
    t.clone().try_into().map_err(|e| usage(format!("manifest config: {e}")))
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Symbols(_) => "symbols",
            Job::Coproduct(_) => "coproduct",
            Job::RenormEq(_) => "renorm-eq",
            Job::Constants(_) => "constants",
            Job::VerifyBounds(_) => "verify-bounds",
            Job::Simulate(_) => "simulate",
            Job::Converge(_) => "converge",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Job::Simulate(r) | Job::Converge(r) => r.noise.seed,
            _ => 0,
        }
    }

    pub fn config(&self) -> toml::Table {
        match self {
            Job::Symbols(a) => to_table(a),
            Job::Coproduct(a) => to_table(a),
            Job::RenormEq(a) => to_table(a),
            Job::Constants(a) => to_table(a),
            Job::VerifyBounds(a) => to_table(a),
            Job::Simulate(r) | Job::Converge(r) => to_table(r),
        }
    }

    pub fn from_record(subcommand: &str, config: &toml::Table) -> Result<Job, CliError> {
        Ok(match subcommand {
            "symbols" => Job::Symbols(from_table(config)?),
            "coproduct" => Job::Coproduct(from_table(config)?),
            "renorm-eq" => Job::RenormEq(from_table(config)?),
            "constants" => Job::Constants(from_table(config)?),
            "verify-bounds" => Job::VerifyBounds(from_table(config)?),
            "simulate" => Job::Simulate(from_table(config)?),
            "converge" => Job::Converge(from_table(config)?),
            other => return Err(usage(format!("unknown subcommand {other} in manifest"))),
        })
    }

    fn from_command(cmd: Command) -> Result<Job, CliError> {
        let with_seed = |a: ConfigArgs| -> Result<RunFile, CliError> {
            let mut r = RunFile::load(&a.config)?;
            if let Some(s) = a.seed {
                r.noise.seed = s;
            }
            r.resolve()
        };
        Ok(match cmd {
            Command::Symbols(a) => Job::Symbols(a),
            Command::Coproduct(a) => Job::Coproduct(a),
            Command::RenormEq(a) => Job::RenormEq(a),
            Command::Constants(a) => Job::Constants(a),
            Command::VerifyBounds(a) => Job::VerifyBounds(a),
            Command::Simulate(a) => Job::Simulate(with_seed(a)?),
            Command::Converge(a) => Job::Converge(with_seed(a)?),
            Command::Replay { .. } => unreachable!("handled by the dispatcher"),
        })
    }

    /// Runs the job, writing its files into `dir`.
    pub fn execute(&self, dir: &mut RunDir) -> Result<Report, CliError> {
        match self {
            Job::Symbols(a) => symbols_job(a, dir),
            Job::Coproduct(a) => coproduct_job(a, dir),
            Job::RenormEq(a) => renorm_eq_job(a, dir),
            Job::Constants(a) => constants_job(a, dir),
            Job::VerifyBounds(a) => bounds_job(a, dir),
            Job::Simulate(r) => simulate_job(r, dir),
            Job::Converge(r) => converge_job(r, dir),
        }
    }
}

/// What a job hands back besides its files.
#[derive(Debug, Clone, Default)]
pub struct Report {
    /// printed to stdout
    pub summary: String,
    /// recorded in the manifest
    pub constants: BTreeMap<String, f64>,
    /// set when the computation finished but missed its tolerance
    pub failure: Option<String>,
}

// ---------------------------------------------------------------------------
// run directories and manifests

pub struct RunDir {
    pub path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    /// `<root>/<subcommand>/<timestamp>-<seed>/`, suffixed if taken.
    pub fn create(root: &Path, subcommand: &str, seed: u64) -> Result<RunDir, CliError> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ");
        let base = root.join(subcommand).join(format!("{stamp}-{seed}"));
        let mut path = base.clone();
        let mut k = 1;
        while path.exists() {
            path = PathBuf::from(format!("{}-{k}", base.display()));
            k += 1;
        }
        fs::create_dir_all(&path).map_err(io)?;
        Ok(RunDir { path, files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        fs::write(self.path.join(name), bytes).map_err(io)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Binary plus sidecar, registered as two files.
    pub fn write_field(&mut self, stem: &str, field: &Field) -> Result<(), CliError> {
        field.write(&self.path.join(stem)).map_err(io)?;
        self.files.push(format!("{stem}.bin"));
        self.files.push(format!("{stem}.toml"));
        Ok(())
    }

    pub fn inventory(&self) -> Result<Vec<FileEntry>, CliError> {
        self.files
            .iter()
            .map(|name| {
                let bytes = fs::read(self.path.join(name)).map_err(io)?;
                Ok(FileEntry { name: name.clone(), bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(&bytes)) })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started: String,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub status: String,
    pub seeds: Vec<u64>,
    pub config: toml::Table,
    pub constants: BTreeMap<String, f64>,
    pub timing: Timing,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest, CliError> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("manifest: {e}")))
    }
}

/// Output root: the flag, then `$FHNREG_OUT`, then `./out`.
pub fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

/// Outcome of one job: its directory, manifest and report.
pub struct Completed {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub report: Report,
}

pub fn run_job(job: &Job, root: &Path) -> Result<Completed, CliError> {
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let mut dir = RunDir::create(root, job.name(), job.seed())?;
    let report = job.execute(&mut dir)?;
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool: "fhnreg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: job.name().into(),
        status: if report.failure.is_some() { "tolerance".into() } else { "ok".into() },
        seeds: vec![job.seed()],
        config: job.config(),
        constants: report.constants.clone(),
        timing: Timing { started: started.to_rfc3339(), elapsed_s: clock.elapsed().as_secs_f64() },
        files: dir.inventory()?,
    };
    let text = toml::to_string(&manifest).map_err(io)?;
    fs::write(dir.path.join("manifest.toml"), text).map_err(io)?;
    Ok(Completed { dir: dir.path, manifest, report })
}

/// Re-runs a manifest; the report fails if any checksum differs.
pub fn replay(manifest: &Path, root: &Path) -> Result<Completed, CliError> {
    let old = Manifest::read(manifest)?;
    let job = Job::from_record(&old.subcommand, &old.config)?;
    let mut done = run_job(&job, root)?;
    let new: BTreeMap<_, _> = done.manifest.files.iter().map(|f| (f.name.clone(), f.sha256.clone())).collect();
    let mut bad = Vec::new();
    for f in &old.files {
        if new.get(&f.name) != Some(&f.sha256) {
            bad.push(f.name.clone());
        }
    }
    if bad.is_empty() {
        let _ = writeln!(done.report.summary, "replay: {} files reproduced", old.files.len());
    } else {
        done.report.failure = Some(format!("replay: checksum mismatch in {}", bad.join(", ")));
    }
    Ok(done)
}

/// Parses `args` (program name first), runs, prints and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let root = output_root(cli.out);
    let result = match cli.command {
        Command::Replay { manifest } => replay(&manifest, &root),
        cmd => Job::from_command(cmd).and_then(|job| run_job(&job, &root)),
    };
    match result {
        Ok(done) => {
            print!("{}", done.report.summary);
            println!("output: {}", done.dir.display());
            match done.report.failure {
                Some(msg) => {
                    eprintln!("tolerance failure: {msg}");
                    EXIT_TOLERANCE
                }
                None => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

// ---------------------------------------------------------------------------
// symbolic subcommands

fn parse_cutoff(s: &str) -> Result<Homogeneity, CliError> {
    let r: Rational64 = s.trim().parse().map_err(|_| usage(format!("cutoff {s} is not a rational number")))?;
    Ok(Homogeneity::new(r, Rational64::from(0)))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn symbols_job(a: &SymbolsArgs, dir: &mut RunDir) -> Result<Report, CliError> {
    let scaling = Scaling::new(a.dim).map_err(usage)?;
    let table = enumerate_symbols(a.dim, parse_cutoff(&a.cutoff)?, a.channels).map_err(usage)?;
    let (s3, s2) = (Scaling::new(3).map_err(usage)?, Scaling::new(2).map_err(usage)?);
    let mut rows = table.sorted();
    // by homogeneity in the requested dimension, as in the published table
    rows.sort_by(|x, y| x.1.cmp(&y.1).then_with(|| x.0.cmp(&y.0)));
    let mut csv = String::from("symbol,name,xi_count,homogeneity_d3,homogeneity_d2,coproduct\n");
    let mut summary = String::new();
    let _ = writeln!(summary, "{} symbols with homogeneity <= {} (d = {})", rows.len(), a.cutoff, a.dim);
    for (s, _) in &rows {
        let (h3, h2) = (homogeneity(s, &s3), homogeneity(s, &s2));
        let delta = coproduct(s, &scaling).to_string();
        let name = display_symbol(s);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            csv_field(&print_symbol(s)),
            csv_field(&name),
            xi_count(s),
            csv_field(&h3.to_string()),
            csv_field(&h2.to_string()),
            csv_field(&delta)
        );
        let _ = writeln!(summary, "{name:<12} {:<14} {:<14} {delta}", h3.to_string(), h2.to_string());
    }
    dir.write("symbols.csv", csv)?;
    Ok(Report { summary, ..Report::default() })
}

fn coproduct_job(a: &CoproductArgs, dir: &mut RunDir) -> Result<Report, CliError> {
    let scaling = Scaling::new(a.dim).map_err(usage)?;
    let summary = match parse_symbol(&a.symbol, &scaling).map_err(usage)? {
        Some(s) => format!(
            "{} = {}\n|tau| = {}\nDelta = {}\n",
            print_symbol(&s),
            display_symbol(&s),
            homogeneity(&s, &scaling),
            coproduct(&s, &scaling)
        ),
        None => format!("{} is zero (I kills polynomials; E acts only on its sector)\nDelta = 0\n", a.symbol),
    };
    dir.write("coproduct.txt", &summary)?;
    Ok(Report { summary, ..Report::default() })
}

fn term(coeff: &Poly, var: &str) -> Option<String> {
    if coeff.is_zero() {
        return None;
    }
    let c = coeff.to_string();
    Some(match (var.is_empty(), c.as_str()) {
        (true, _) => format!("({c})"),
        (false, "1") => var.to_string(),
        _ => format!("({c})*{var}"),
    })
}

fn renorm_eq_job(a: &RenormEqArgs, dir: &mut RunDir) -> Result<Report, CliError> {
    let f = parse_nonlinearity(&a.f, a.n).map_err(usage)?;
    let r = renormalized_nonlinearity(&f, a.dim).map_err(usage)?;
    let (c0, c1, c2) = r.counterterms();
    let vname = |j: usize| if a.n == 1 { "v".to_string() } else { format!("v{j}") };
    let mut added: Vec<String> = Vec::new();
    added.extend(term(&c0, ""));
    added.extend(term(&c1, "u"));
    for (j, c) in c2.iter().enumerate() {
        added.extend(term(c, &vname(j + 1)));
    }
    let mut out = String::new();
    let _ = writeln!(out, "d = {}, F(u, v) = {f}", a.dim);
    let extra = if added.is_empty() { String::new() } else { format!(" + {}", added.join(" + ")) };
    let _ = writeln!(out, "du/dt = Lap u + F(u, v){extra} + xi_eps");
    let _ = writeln!(out, "dv/dt = A1 u + A2 v");
    // [alpha1 + added] u, the form in which the counterterm is usually quoted
    if !c1.is_zero() {
        let lin = f.alpha1() + c1.clone();
        let _ = writeln!(out, "coefficient of u: [{lin}]");
    }
    let mut values = BTreeMap::new();
    if r.is_obstructed() {
        let _ = writeln!(out, "not of the local form: {} obstruction terms", r.obstruction.len());
        for t in &r.obstruction {
            let _ = writeln!(out, "  {t}");
        }
    } else if let Some(eps) = a.eps {
        let q = QSpec::scalar(-1.0, -1.0, 1.0);
        let rec = constants(eps, a.dim, Some(&q), Basis::G, None).map_err(usage)?;
        let lookup = |v: &Var| -> Option<f64> {
            match crate::renorm::constant_name(v) {
                Some("C1") => Some(rec.c1),
                Some("C2") => Some(rec.c2),
                _ => None,
            }
        };
        let _ = writeln!(out, "at eps = {eps}: C1 = {}, C2 = {}", rec.c1, rec.c2);
        values.insert("C1".into(), rec.c1);
        values.insert("C2".into(), rec.c2);
        for (name, p) in std::iter::once(("c0".to_string(), &c0))
            .chain(std::iter::once(("c1".to_string(), &c1)))
            .chain(c2.iter().enumerate().map(|(j, c)| (format!("c2_{}", j + 1), c)))
        {
            match p.eval(&lookup) {
                Some(x) => {
                    let _ = writeln!(out, "  {name} = {x}");
                    values.insert(name, x);
                }
                None => {
                    let _ = writeln!(out, "  {name} has symbolic coefficients");
                }
            }
        }
    }
    dir.write("equation.txt", &out)?;
    Ok(Report { summary: out, constants: values, failure: None })
}

// ---------------------------------------------------------------------------
// numerical subcommands

fn check_scales(eps: &[f64]) -> Result<(), CliError> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(usage("scales must lie in (0, 1]"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(usage("scales must be strictly decreasing"));
    }
    Ok(())
}

fn fit_block(out: &mut String, model: &str, f: &LinearFit) {
    let _ = writeln!(out, "[[fit]]");
    let _ = writeln!(out, "model = \"{model}\"");
    let _ = writeln!(out, "intercept = {}", f.intercept);
    let _ = writeln!(out, "slope = {}", f.slope);
    let _ = writeln!(out, "max_residual = {}", f.max_residual);
    let _ = writeln!(out, "range = {}", f.range);
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn constants_job(a: &ConstantsArgs, dir: &mut RunDir) -> Result<Report, CliError> {
    check_scales(&a.eps)?;
    let q = QSpec::new(vec![a.a1], vec![vec![a.a2]], a.horizon, 0).map_err(usage)?;
    let recs: Vec<ConstantsRecord> = a
        .eps
        .iter()
        .map(|&e| constants(e, a.dim, Some(&q), a.basis.into(), None).map_err(usage))
        .collect::<Result<_, _>>()?;
    let names: Vec<String> = PAIRS.iter().map(|(i, j)| format!("I{i}{j}")).collect();
    let mut csv = format!(
        "eps,C1,C2,{},err_C1,err_C2,{}\n",
        names.join(","),
        names.iter().map(|n| format!("err_{n}")).collect::<Vec<_>>().join(",")
    );
    let mut worst: f64 = 0.0;
    for r in &recs {
        let vals: Vec<String> = PAIRS.iter().map(|&(i, j)| r.i[i][j].to_string()).collect();
        let errs: Vec<String> = PAIRS.iter().map(|&(i, j)| r.err_i[i][j].to_string()).collect();
        let _ = writeln!(csv, "{},{},{},{},{},{},{}", r.eps, r.c1, r.c2, vals.join(","), r.err_c1, r.err_c2, errs.join(","));
        worst = worst.max(r.err_c1 / r.c1.abs().max(1e-300));
        for &(i, j) in &PAIRS {
            worst = worst.max(r.err_i[i][j] / r.i[i][j].abs().max(1e-12));
        }
    }
    dir.write("constants.csv", csv)?;

    let eps = &a.eps;
    let c1: Vec<f64> = recs.iter().map(|r| r.c1).collect();
    let mut fit = String::new();
    let _ = writeln!(fit, "dim = {}\nbasis = \"{:?}\"", a.dim, a.basis);
    if a.dim == 2 {
        fit_block(&mut fit, "C1 = a + b*ln(1/eps)", &log_fit(eps, &c1));
    } else {
        let scaled: Vec<f64> = recs.iter().map(|r| r.eps * r.c1).collect();
        fit_block(&mut fit, "eps*C1 = a + b*eps", &linear_fit(eps, &scaled));
        let i00: Vec<f64> = recs.iter().map(|r| r.i[0][0]).collect();
        fit_block(&mut fit, "I00 = a + b*ln(1/eps)", &log_fit(eps, &i00));
    }
    for (k, &(i, j)) in PAIRS.iter().enumerate().skip(1) {
        let v: Vec<f64> = recs.iter().map(|r| r.i[i][j].abs()).collect();
        let (lo, hi) = v.iter().fold((f64::MAX, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        let _ = writeln!(fit, "[[bounded]]\nname = \"{}\"\nmax_over_min = {}", names[k], hi / lo);
    }
    dir.write("fit.toml", &fit)?;

    let mut summary = String::new();
    for r in &recs {
        let _ = writeln!(summary, "eps = {:<10} C1 = {:<22} C2 = {:<22} I00 = {}", r.eps, r.c1, r.c2, r.i[0][0]);
    }
    summary.push_str(&fit);
    let mut constants = BTreeMap::new();
    for r in &recs {
        constants.insert(format!("C1@{}", r.eps), r.c1);
        constants.insert(format!("C2@{}", r.eps), r.c2);
    }
    let failure = (worst > a.tol).then(|| format!("relative error estimate {worst:e} above {:e}", a.tol));
    Ok(Report { summary, constants, failure })
}

fn bounds_job(a: &BoundsArgs, dir: &mut RunDir) -> Result<Report, CliError> {
    check_scales(&a.eps)?;
    let q = QSpec::new(vec![a.a1], vec![vec![a.a2]], a.horizon, 0).map_err(usage)?;
    let k = build_truncated_kernel(a.dim, 2).map_err(usage)?;
    let rep = verify_appendix_bounds(&a.eps, &BOUND_SAMPLES, a.theta, &q, &k).map_err(usage)?;
    let mut csv = String::from("name,");
    csv.push_str(&a.eps.iter().map(|e| format!("ratio@{e}")).collect::<Vec<_>>().join(","));
    csv.push_str(",slope,pass\n");
    let mut summary = String::new();
    for r in &rep.rows {
        let ratios: Vec<String> = r.ratios.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(csv, "{},{},{},{}", r.name, ratios.join(","), r.slope, r.pass);
        let _ = writeln!(summary, "{:<16} slope {:>9.4} {}", r.name, r.slope, if r.pass { "ok" } else { "GROWS" });
    }
    dir.write("bounds.csv", csv)?;
    let failure = (!rep.pass).then(|| "a bound ratio grows as eps shrinks".to_string());
    Ok(Report { summary, failure, ..Report::default() })
}

fn counterterm_constants(prefix: &str, c: &Counterterms, out: &mut BTreeMap<String, f64>) {
    // + 0.0 turns -0.0 into 0.0
    out.insert(format!("{prefix}C"), c.c + 0.0);
    out.insert(format!("{prefix}c0"), c.c0 + 0.0);
    out.insert(format!("{prefix}c1"), c.c1 + 0.0);
    for (j, x) in c.c2.iter().enumerate() {
        out.insert(format!("{prefix}c2_{}", j + 1), x + 0.0);
    }
}

fn snapshot_field(cfg: &RunConfig, d: usize, snaps: &[&Snapshot], pick: impl Fn(&Snapshot) -> &[f64], comps: usize, dt: f64) -> Field {
    Field {
        meta: FieldMeta {
            format_version: FORMAT_VERSION,
            d,
            n: cfg.n,
            nt: snaps.len(),
            components: comps,
            dt,
            dx: 1.0 / cfg.n as f64,
            seed: Some(cfg.seed),
            eps: Some(cfg.eps),
            generator_id: GENERATOR_ID.into(),
        },
        values: snaps.iter().flat_map(|s| pick(s).iter().copied()).collect(),
    }
}

fn simulate_job(r: &RunFile, dir: &mut RunDir) -> Result<Report, CliError> {
    let spec = r.spec()?;
    let cfg = r.run_config();
    let res = run(&cfg, &spec).map_err(usage)?;
    let mut csv = format!("{CSV_HEADER}\n");
    for row in &res.series {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    dir.write("norms.csv", csv)?;
    let n = spec.n();
    let fin = [&res.final_state];
    dir.write_field("u_final", &snapshot_field(&cfg, spec.d, &fin, |s| &s.u, 1, cfg.dt))?;
    dir.write_field("v_final", &snapshot_field(&cfg, spec.d, &fin, |s| &s.v, n, cfg.dt))?;
    dir.write_field("phi_final", &snapshot_field(&cfg, spec.d, &fin, |s| &s.phi, 1, cfg.dt))?;
    if !res.snapshots.is_empty() {
        let snaps: Vec<&Snapshot> = res.snapshots.iter().collect();
        let dt = cfg.dt * cfg.snapshot_every as f64;
        dir.write_field("u_snapshots", &snapshot_field(&cfg, spec.d, &snaps, |s| &s.u, 1, dt))?;
        dir.write_field("v_snapshots", &snapshot_field(&cfg, spec.d, &snaps, |s| &s.v, n, dt))?;
    }
    let mut constants = BTreeMap::new();
    counterterm_constants("", &res.counterterms, &mut constants);
    if let Some(k) = &res.constants {
        constants.insert("C1".into(), k.c1);
        constants.insert("C2".into(), k.c2);
    }
    let last = res.series.last().expect("initial row");
    let mut summary = format!(
        "t = {}: sup u = {}, L2 u = {}, sup v = {}, sup phi = {}\n",
        last.t, last.sup_u, last.l2_u, last.sup_v, last.sup_phi
    );
    let failure = match res.termination {
        Termination::Completed => None,
        Termination::CutoffHit(t) => {
            let _ = writeln!(summary, "stopped at t = {t}: sup |u| reached the cutoff {}", cfg.cutoff);
            None
        }
        Termination::Nonfinite(t) => Some(format!("non-finite values at t = {t}")),
    };
    Ok(Report { summary, constants, failure })
}

/// Default sweep: up to four scales halving from 1/8, kept above 2Δx.
fn default_scales(n: usize) -> Vec<f64> {
    let guard = 2.0 / n as f64;
    let mut e = 0.125;
    let mut out = Vec::new();
    while out.len() < 4 && e >= guard * (1.0 - 1e-12) {
        out.push(e);
        e /= 2.0;
    }
    out
}

fn converge_job(r: &RunFile, dir: &mut RunDir) -> Result<Report, CliError> {
    let spec = r.spec()?;
    let cfg = r.run_config();
    let eps = r.noise.eps_list.clone().unwrap_or_else(|| default_scales(cfg.n));
    check_scales(&eps)?;
    let rep = epsilon_sweep(&cfg, &spec, &eps).map_err(usage)?;
    let mut csv = String::from("renormalised,eps,eps_half,d_u_sup,d_u_l2,d_v_sup,d_v_l2,d_phi_sup,d_phi_l2,max_d_u_l2\n");
    for w in &rep.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            w.renormalised, w.eps, w.eps_half, w.d_u_sup, w.d_u_l2, w.d_v_sup, w.d_v_l2, w.d_phi_sup, w.d_phi_l2, w.max_d_u_l2
        );
    }
    dir.write("converge.csv", csv)?;
    let mut constants = BTreeMap::new();
    constants.insert("q_l1".into(), rep.q_l1);
    for (e, c) in &rep.counterterms {
        counterterm_constants(&format!("eps={e}:"), c, &mut constants);
    }
    let mut summary = String::new();
    for w in &rep.rows {
        let tag = if w.renormalised { "renormalised" } else { "bare" };
        let _ = writeln!(summary, "{tag:<13} {} -> {}: D_u = {:.6e}, D_v = {:.6e}, D_phi = {:.6e}", w.eps, w.eps_half, w.d_u_l2, w.d_v_l2, w.d_phi_l2);
    }
    let _ = writeln!(summary, "noise sha256 {}", rep.noise_checksum);
    let ren = spec.renorm != RenormSetting::Off;
    let d = rep.d_l2(ren);
    let mut problems = Vec::new();
    if !d.windows(2).all(|w| w[1] < w[0]) {
        problems.push("D(eps) is not strictly decreasing");
    }
    if !rep.contraction_holds(0.1) {
        problems.push("v-channel contraction bound violated");
    }
    if rep.terminations.iter().any(|(_, _, t)| !matches!(t, Termination::Completed)) {
        problems.push("a run stopped early");
    }
    let failure = (!problems.is_empty()).then(|| problems.join("; "));
    Ok(Report { summary, constants, failure })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_in_three_notations() {
        assert_eq!(parse_scale("0.25"), Ok(0.25));
        assert_eq!(parse_scale("1/16"), Ok(0.0625));
        assert_eq!(parse_scale("2^-3"), Ok(0.125));
        assert!(parse_scale("1/0").is_err());
        assert!(parse_scale("x").is_err());
    }

    #[test]
    fn default_scales_respect_the_guard() {
        assert_eq!(default_scales(128), vec![0.125, 0.0625, 0.03125, 0.015625]);
        assert_eq!(default_scales(32), vec![0.125, 0.0625]);
    }

    #[test]
    fn resolved_config_round_trips_through_the_manifest_table() {
        let r = RunFile::parse("[grid]\nd = 3\n[renorm]\nmode = \"off\"\n").unwrap().resolve().unwrap();
        assert_eq!(r.grid.n, Some(32));
        assert_eq!(r.noise.eps, Some(0.125));
        let job = Job::Simulate(r);
        assert_eq!(Job::from_record("simulate", &job.config()).unwrap(), job);
        assert!(Job::from_record("nope", &job.config()).is_err());
    }

    #[test]
    fn fixed_renorm_needs_c1() {
        let text = "[grid]\nd = 2\n[renorm]\nmode = \"fixed\"\n";
        assert!(RunFile::parse(text).unwrap().resolve().is_err());
        let ok = RunFile::parse(&format!("{text}c1 = 2.0\n")).unwrap().resolve().unwrap();
        match ok.spec().unwrap().renorm {
            RenormSetting::Fixed(c) => assert_eq!((c.c0, c.c1, c.c2), (0.0, 2.0, vec![0.0])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cubic_gating_term_is_rejected_in_three_dimensions() {
        let text = "[grid]\nd = 3\n[system]\nf = \"u - u^3 + u^2*v\"\n";
        assert!(RunFile::parse(text).unwrap().resolve().is_err());
    }
}
