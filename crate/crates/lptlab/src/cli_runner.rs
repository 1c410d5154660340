//! Command-line orchestration: TOML experiment configs, parameter sweeps and
//! bundled figure recipes. Every run writes CSV/JSON artifacts plus a
//! `manifest.json` with content hashes.
//!
//! ```text
//! lptlab <task> [--config <path>] [--out <dir>] [--seed <n>] [--threads <n>] [--name <demo|figure>]
//! ```

pub mod recipes;
pub mod tasks;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::Parser;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lindblad_engine::LindbladModel;
use crate::model_zoo::{
    build_ddm, build_kac_chain, build_kerr, build_lmg, build_two_spin, build_xxz, chain_parity, chain_reflection, spin_parity,
    subsystem_swap, DdmParams, IsingParams, KacChainParams, KerrParams, LmgParams, TwoSpinParams, XxzParams,
};
use crate::spin_algebra::{PTOperator, SpinBasis};
use crate::{LabError, Result};

pub use recipes::{DemoName, FigureName};

#[derive(Parser, Debug)]
#[command(name = "lptlab", version, about = "Lindbladian PT phase-transition laboratory")]
struct Cli {
    /// spectrum | steady | meanfield | sweep | squeeze | thirdq | demo | figure | a figure name (fig5 | fig6 | fig7 | figB1 | figC1 | figG1) | a demo name (ising-ssb | kerr-threshold | xxz-crosshairs | ropt-scaling)
    task: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Demo or figure name.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Spectrum,
    Steady,
    Meanfield,
    Sweep,
    Squeeze,
    Thirdq,
    Demo,
    Figure,
}

impl FromStr for Task {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "spectrum" => Task::Spectrum,
            "steady" => Task::Steady,
            "meanfield" => Task::Meanfield,
            "sweep" => Task::Sweep,
            "squeeze" => Task::Squeeze,
            "thirdq" => Task::Thirdq,
            "demo" => Task::Demo,
            "figure" => Task::Figure,
            other => return Err(LabError::Config(format!("unknown task `{other}`"))),
        })
    }
}

/// One of the model_zoo parameter records, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Ddm(DdmParams),
    Lmg(LmgParams),
    TwoSpin(TwoSpinParams),
    KacChain(KacChainParams),
    Kerr(KerrParams),
    Xxz(XxzParams),
    Ising(IsingParams),
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Ddm(_) => "ddm",
            ModelConfig::Lmg(_) => "lmg",
            ModelConfig::TwoSpin(_) => "two_spin",
            ModelConfig::KacChain(_) => "kac_chain",
            ModelConfig::Kerr(_) => "kerr",
            ModelConfig::Xxz(_) => "xxz",
            ModelConfig::Ising(_) => "ising",
        }
    }

    /// Parameter reported in the `param` column when no sweep is given.
    pub fn default_param(&self) -> &'static str {
        match self {
            ModelConfig::Ddm(_) | ModelConfig::Lmg(_) => "kappa",
            ModelConfig::TwoSpin(_) => "gamma_loss",
            ModelConfig::KacChain(_) => "eta",
            ModelConfig::Kerr(_) => "pump",
            ModelConfig::Xxz(_) => "gamma",
            ModelConfig::Ising(_) => "h",
        }
    }

    fn fields(&self) -> serde_json::Map<String, serde_json::Value> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("model records serialize to objects"),
        }
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.fields()
            .get(name)
            .filter(|_| name != "kind")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| LabError::Config(format!("model `{}` has no numeric parameter `{name}`", self.kind())))
    }

    /// Copy with one named parameter replaced. Integer fields accept only integral values.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut m = self.fields();
        let slot = m
            .get_mut(name)
            .filter(|v| v.is_number())
            .ok_or_else(|| LabError::Config(format!("model `{}` has no numeric parameter `{name}`", self.kind())))?;
        *slot = if slot.is_u64() {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(LabError::Config(format!("`{name}` needs a non-negative integer, got {value}")));
            }
            serde_json::json!(value as u64)
        } else {
            serde_json::json!(value)
        };
        serde_json::from_value(serde_json::Value::Object(m)).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<LindbladModel> {
        match self {
            ModelConfig::Ddm(p) => build_ddm(p),
            ModelConfig::Lmg(p) => build_lmg(p),
            ModelConfig::TwoSpin(p) => build_two_spin(p),
            ModelConfig::KacChain(p) => build_kac_chain(p),
            ModelConfig::Kerr(p) => build_kerr(p),
            ModelConfig::Xxz(p) => build_xxz(p),
            ModelConfig::Ising(_) => Err(LabError::Config("ising is a closed-system model; use `demo --name ising-ssb`".into())),
        }
    }

    /// Single collective-spin basis, if the model lives on one.
    pub fn spin_basis(&self) -> Option<SpinBasis> {
        match self {
            ModelConfig::Ddm(p) => SpinBasis::new(p.spin).ok(),
            ModelConfig::Lmg(p) => SpinBasis::new(p.spin).ok(),
            _ => None,
        }
    }

    /// The parity used for the model's PT checks.
    pub fn pt(&self) -> Result<Option<PTOperator>> {
        Ok(match self {
            ModelConfig::Ddm(p) => Some(spin_parity(p.spin)?),
            ModelConfig::Lmg(p) => Some(spin_parity(p.spin)?),
            ModelConfig::TwoSpin(p) => Some(subsystem_swap(p.spin)?),
            ModelConfig::KacChain(p) => Some(chain_parity(p.n_sites)?),
            ModelConfig::Xxz(p) => Some(chain_reflection(p.n_sites)?),
            ModelConfig::Kerr(_) | ModelConfig::Ising(_) => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub log_scale: bool,
}

impl SweepSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.points < 2 {
            return Err(LabError::Config(format!("sweep.points must be ≥ 2, got {}", self.points)));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(LabError::Config("sweep bounds must be finite".into()));
        }
        let n = self.points - 1;
        if self.log_scale {
            if self.start <= 0.0 || self.stop <= 0.0 {
                return Err(LabError::Config("log-scale sweep needs positive bounds".into()));
            }
            let (a, b) = (self.start.ln(), self.stop.ln());
            Ok((0..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect())
        } else {
            Ok((0..=n).map(|i| self.start + (self.stop - self.start) * i as f64 / n as f64).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// |Re λ| threshold for purely imaginary eigenvalues; defaults to 1e−6·max|L|.
    pub pie: Option<f64>,
    pub crosshairs: f64,
    pub npt: f64,
    /// Minimum Im λ for a mode to count as oscillatory.
    pub oscillatory_im: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { pie: None, crosshairs: 1e-8, npt: 1e-12, oscillatory_im: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    /// Largest superoperator dimension d² handled by dense diagonalization.
    pub dense_max_dim_sq: usize,
    /// Height of the imaginary-axis strip covered by the iterative gap.
    pub omega_max: f64,
    pub nev: usize,
    pub include_modes: bool,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self { dense_max_dim_sq: 1700, omega_max: 4.0, nev: 6, include_modes: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanfieldSettings {
    pub initial: Option<Vec<f64>>,
    pub t_end: f64,
    pub samples: usize,
    pub npt_samples: usize,
}

impl Default for MeanfieldSettings {
    fn default() -> Self {
        Self { initial: None, t_end: 20.0, samples: 2000, npt_samples: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThirdqSettings {
    pub phase: String,
    /// Modes forming subsystem B for the negativity.
    pub subsystem_b: Vec<usize>,
}

impl Default for ThirdqSettings {
    fn default() -> Self {
        Self { phase: "am".into(), subsystem_b: vec![1] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSettings {
    pub name: Option<String>,
}

/// One TOML document per experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub spectrum: SpectrumSettings,
    #[serde(default)]
    pub meanfield: MeanfieldSettings,
    #[serde(default)]
    pub thirdq: ThirdqSettings,
    #[serde(default)]
    pub demo: DemoSettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        if let Some(s) = &cfg.sweep {
            s.grid()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn model(&self) -> Result<&ModelConfig> {
        self.model.as_ref().ok_or_else(|| LabError::Config("config has no [model] table".into()))
    }

    /// Sweep grid and parameter name, or the single current value of the default parameter.
    pub fn grid(&self) -> Result<(String, Vec<f64>)> {
        let model = self.model()?;
        match &self.sweep {
            Some(s) => {
                model.param(&s.param)?;
                Ok((s.param.clone(), s.grid()?))
            }
            None => {
                let p = model.default_param();
                Ok((p.to_string(), vec![model.param(p)?]))
            }
        }
    }
}

/// Rows with a fixed header; the header is written even when there are no rows.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub task: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub files: Vec<ManifestEntry>,
}

/// Output directory plus the list of artifacts written so far.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Io(std::io::Error::other(format!("{}: {e}", path.display())))
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn csv<R: CsvRow>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(R::HEADER).map_err(|e| io_err(&path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| io_err(&path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io_err(&path, e))?;
        self.record(name, &bytes)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| io_err(&self.dir.join(name), e))?;
        bytes.push(b'\n');
        self.record(name, &bytes)
    }

    fn manifest_entries(&self) -> Result<Vec<ManifestEntry>> {
        self.files
            .iter()
            .map(|f| {
                let path = self.dir.join(f);
                let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
                Ok(ManifestEntry { path: f.clone(), sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
            })
            .collect()
    }
}

/// Everything a task needs: the resolved config, seed and output sink.
pub struct RunContext {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub config_hash: String,
    pub out: Output,
}

impl RunContext {
    /// Evaluates `f` on every grid point in parallel. Each finished point is
    /// checkpointed under `.checkpoints/`, reused on rerun and removed once the
    /// whole grid succeeds. Results come back in grid order.
    pub fn points<T, F>(&self, tag: &str, grid: &[f64], f: F) -> Result<Vec<T>>
    where
        T: Serialize + DeserializeOwned + Send,
        F: Fn(usize, f64) -> Result<T> + Sync,
    {
        let dir = self.out.dir.join(".checkpoints").join(format!("{tag}-{}", &self.config_hash[..16]));
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let results: Vec<Result<T>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let path = dir.join(format!("{i:05}.json"));
                if let Some(v) = fs::read(&path).ok().and_then(|b| serde_json::from_slice(&b).ok()) {
                    return Ok(v);
                }
                let v = f(i, grid[i])?;
                let tmp = path.with_extension("tmp");
                let bytes = serde_json::to_vec(&v).map_err(|e| io_err(&tmp, e))?;
                fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
                fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
                Ok(v)
            })
            .collect();
        let out = results.into_iter().collect::<Result<Vec<T>>>()?;
        let _ = fs::remove_dir_all(&dir);
        let _ = fs::remove_dir(self.out.dir.join(".checkpoints"));
        Ok(out)
    }
}

/// What a completed run produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub config_sha256: String,
}

/// Task selection as parsed from the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum Job {
    Task(Task),
    Demo(DemoName),
    Figure(FigureName),
}

impl Job {
    pub fn label(&self) -> String {
        match self {
            Job::Task(t) => serde_json::to_value(t).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            Job::Demo(d) => format!("demo:{}", d.as_str()),
            Job::Figure(f) => f.as_str().to_string(),
        }
    }

    /// Resolves `task` (plus `--name` or `[demo].name` for demos and figures).
    pub fn resolve(task: &str, name: Option<&str>, config: &ExperimentConfig) -> Result<Job> {
        if let Ok(f) = task.parse::<FigureName>() {
            return Ok(Job::Figure(f));
        }
        if let Ok(d) = task.parse::<DemoName>() {
            return Ok(Job::Demo(d));
        }
        let t: Task = task.parse()?;
        if let Some(ct) = &config.task {
            if ct != task {
                return Err(LabError::Config(format!("config declares task `{ct}` but `{task}` was requested")));
            }
        }
        let name = name.map(String::from).or_else(|| config.demo.name.clone());
        match t {
            Task::Demo => {
                let n = name.ok_or_else(|| LabError::Config("demo needs --name or [demo].name".into()))?;
                Ok(Job::Demo(n.parse()?))
            }
            Task::Figure => {
                let n = name.ok_or_else(|| LabError::Config("figure needs --name".into()))?;
                Ok(Job::Figure(n.parse()?))
            }
            t => Ok(Job::Task(t)),
        }
    }
}

fn config_hash(job: &Job, cfg: &ExperimentConfig, seed: u64) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    c.seed = Some(seed);
    let doc = serde_json::json!({ "job": job.label(), "config": c });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

/// Runs a job in the current rayon pool and writes its manifest.
pub fn run_job(job: &Job, config: ExperimentConfig, out_dir: &Path, seed: u64) -> Result<RunSummary> {
    let start = Instant::now();
    let hash = config_hash(job, &config, seed);
    let mut ctx = RunContext { config, seed, config_hash: hash.clone(), out: Output::new(out_dir)? };
    match job {
        Job::Task(t) => tasks::run(*t, &mut ctx)?,
        Job::Demo(d) => recipes::demo(*d, &mut ctx)?,
        Job::Figure(f) => recipes::figure(*f, &mut ctx)?,
    }
    let manifest = Manifest {
        tool: "lptlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        task: job.label(),
        config_sha256: hash.clone(),
        seed,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: ctx.out.manifest_entries()?,
    };
    ctx.out.json("manifest.json", &manifest)?;
    Ok(RunSummary { out_dir: out_dir.to_path_buf(), files: ctx.out.files.clone(), config_sha256: hash })
}

/// Exit code for a library error: 2 for configuration problems, 3 for numerical failures.
pub fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Config(_) | LabError::InvalidParameter(_) | LabError::SizeCap(_) | LabError::Io(_) => 2,
        _ => 3,
    }
}

fn threads_from(cli: Option<usize>) -> Result<Option<usize>> {
    if cli.is_some() {
        return Ok(cli);
    }
    match std::env::var("LPTLAB_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| LabError::Config(format!("LPTLAB_THREADS must be a positive integer, got `{v}`"))),
        _ => Ok(None),
    }
}

fn run_cli(cli: Cli) -> Result<RunSummary> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let job = Job::resolve(&cli.task, cli.name.as_deref(), &config)?;
    if matches!(job, Job::Task(_)) && cli.config.is_none() {
        return Err(LabError::Config(format!("task `{}` needs --config", cli.task)));
    }
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("lptlab-out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads_from(cli.threads)? {
        if n == 0 {
            return Err(LabError::Config("thread count must be ≥ 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_job(&job, config, &out_dir, seed))
}

/// Parses arguments, runs the job and returns the process exit code.
pub fn main_with_args<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(cli) {
        Ok(s) => {
            println!("wrote {} files to {}", s.files.len(), s.out_dir.display());
            0
        }
        Err(e) => {
            eprintln!("lptlab: {e}");
            exit_code(&e)
        }
    }
}
