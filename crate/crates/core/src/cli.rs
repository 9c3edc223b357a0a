//! Command-line front end. Every run writes `manifest.json` before any
//! computation and marks it complete once all outputs are on disk. Data goes
//! to files only; diagnostics go to standard error.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{apply_overrides, read_value, Config, Finding, ScanKind, Verb};
use crate::coupling::kappa_from_f;
use crate::dynamics::{PhaseModel, PulseModel, Trajectory};
use crate::equilibria::{find_equilibrium, residual, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::experiments::{
    basin_mc, cluster_destab, meanfield_compare, meanfield_study, sync_probability_sweep, ClusterParams, ClusterRun,
    ExperimentConfig, GaussianFamily, InitialCondition, MeanFieldParams,
};
use crate::graph::EXHAUSTIVE_LIMIT;
use crate::stability::{classify, linearize, min_cut_scan, min_cut_surface, six_node_family, ScanMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Pulse,
    Equilibrium,
    Stability,
    CutScan,
    Surface,
    Basin,
    Meanfield,
    Clusters,
    Sweep,
    /// List problems in a config without running anything.
    Validate,
}

impl Command {
    fn verb(self) -> Option<Verb> {
        Some(match self {
            Command::Simulate => Verb::Simulate,
            Command::Pulse => Verb::Pulse,
            Command::Equilibrium => Verb::Equilibrium,
            Command::Stability => Verb::Stability,
            Command::CutScan => Verb::CutScan,
            Command::Surface => Verb::Surface,
            Command::Basin => Verb::Basin,
            Command::Meanfield => Verb::Meanfield,
            Command::Clusters => Verb::Clusters,
            Command::Sweep => Verb::Sweep,
            Command::Validate => return None,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "oscsync", version, about = "Simulate and analyse networks of weakly coupled oscillators")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for outputs and the manifest (`out` when omitted).
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for experiments and scans.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Surface grid size per axis; shorthand for `--set surface.grid=G`.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Override a config value, e.g. `--set experiment.trials=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Serialize)]
struct OutputRecord {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    status: &'static str,
    seed: Option<u64>,
    threads: usize,
    config_sha256: String,
    config: &'a Value,
    outputs: Vec<OutputRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

struct Output {
    name: String,
    data: Vec<u8>,
}

impl Output {
    fn text(name: impl Into<String>, text: String) -> Self {
        Output { name: name.into(), data: text.into_bytes() }
    }

    fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Result<Self> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        Ok(Output { name: name.into(), data })
    }
}

fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    let _ = e.print();
                    EXIT_INVALID
                }
            };
        }
    };
    execute(&args)
}

pub fn execute(args: &Args) -> i32 {
    let (config, value) = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();

    let Some(verb) = args.command.verb() else {
        let findings = config.findings(None, &base);
        report(&findings);
        if let Some(dir) = &args.output_dir {
            let written = fs::create_dir_all(dir)
                .map_err(Error::from)
                .and_then(|_| Output::json("findings.json", &findings))
                .and_then(|o| Ok(fs::write(dir.join(&o.name), &o.data)?));
            if let Err(e) = written {
                eprintln!("error: {e}");
                return EXIT_INVALID;
            }
        }
        return if findings.is_empty() { EXIT_OK } else { EXIT_INVALID };
    };

    let findings = config.findings(Some(verb), &base);
    if !findings.is_empty() {
        report(&findings);
        return EXIT_INVALID;
    }
    if args.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_INVALID;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_INVALID;
        }
    };

    let dir = args.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut manifest = Manifest {
        tool: "oscsync",
        version: env!("CARGO_PKG_VERSION"),
        command: verb.name(),
        status: "incomplete",
        seed: config.seed,
        threads: args.threads,
        config_sha256: sha256_hex(&serde_json::to_vec(&value).unwrap_or_default()),
        config: &value,
        outputs: Vec::new(),
        error: None,
    };
    if let Err(e) = fs::create_dir_all(&dir).map_err(Error::from).and_then(|_| write_manifest(&dir, &manifest)) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return EXIT_INVALID;
    }

    let result = pool.install(|| compute(verb, &config, &base)).and_then(|outputs| {
        for o in &outputs {
            fs::write(dir.join(&o.name), &o.data)?;
        }
        Ok(outputs)
    });
    match result {
        Ok(outputs) => {
            manifest.outputs = outputs
                .iter()
                .map(|o| OutputRecord { file: o.name.clone(), bytes: o.data.len(), sha256: sha256_hex(&o.data) })
                .collect();
            manifest.status = "complete";
            if let Err(e) = write_manifest(&dir, &manifest) {
                eprintln!("error: {e}");
                return EXIT_INVALID;
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            manifest.status = "failed";
            manifest.error = Some(e.to_string());
            let _ = write_manifest(&dir, &manifest);
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn load(args: &Args) -> Result<(Config, Value)> {
    let mut value = read_value(&args.config)?;
    apply_overrides(&mut value, &args.overrides)?;
    if let Some(g) = args.grid {
        apply_overrides(&mut value, &[format!("surface.grid={g}")])?;
    }
    let config = Config::from_value(value.clone())?;
    Ok((config, value))
}

fn report(findings: &[Finding]) {
    for f in findings {
        eprintln!("finding: {f}");
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> Result<()> {
    let o = Output::json("manifest.json", manifest)?;
    fs::write(dir.join(o.name), o.data)?;
    Ok(())
}

fn compute(verb: Verb, config: &Config, base: &Path) -> Result<Vec<Output>> {
    match verb {
        Verb::Simulate => simulate(config, base),
        Verb::Pulse => pulse(config, base),
        Verb::Equilibrium => equilibrium(config, base),
        Verb::Stability => stability(config, base),
        Verb::CutScan => cut_scan(config, base),
        Verb::Surface => surface(config, base),
        Verb::Basin => basin(config, base),
        Verb::Meanfield => meanfield(config, base),
        Verb::Clusters => clusters(config, base),
        Verb::Sweep => sweep(config, base),
    }
}

/// Phase model from the config plus the generator positioned after lag
/// sampling, for drawing a random start.
fn phase_model(config: &Config, base: &Path) -> Result<(PhaseModel, rand_chacha::ChaCha8Rng)> {
    let graph = config.graph(base)?;
    let f = Arc::new(config.coupling(base)?);
    let mut rng = config.rng()?;
    let lags = config.edge_lags(&graph, &mut rng)?;
    let m = graph.n_edges();
    let model = PhaseModel::with_edges(graph, vec![f; m], lags, config.model.epsilon, config.model.omega)?;
    Ok((model, rng))
}

fn point(config: &Config, model: &PhaseModel, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<f64>> {
    let phi = match &config.state {
        Some(s) => s.resolve(model.n(), rng)?,
        None => crate::config::StateSpec::Random.resolve(model.n(), rng)?,
    };
    if phi.len() != model.n() {
        return Err(Error::LengthMismatch { expected: model.n(), got: phi.len() });
    }
    Ok(phi)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

fn simulate(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let (model, mut rng) = phase_model(config, base)?;
    let phi0 = point(config, &model, &mut rng)?;
    let horizon = positive("horizon", config.run.horizon.unwrap_or(100.0 / model.epsilon()))?;
    let step = positive("step", config.run.step.unwrap_or_else(|| model.default_step()))?;
    let every = config.run.sample_every.map(|s| positive("sample_every", s)).transpose()?;
    let with_v = model.qualifies_for_potential();
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), potential: with_v.then(Vec::new) };
    let mut next = 0.0;
    let mut failure = None;
    model.integrate_with(&phi0, step, horizon, |t, phi| {
        let due = match every {
            None => true,
            Some(e) => t == 0.0 || t >= horizon || t >= next + e - 1e-9 * e,
        };
        if !due {
            return true;
        }
        if let Some(e) = every {
            next = e * (t / e).round();
        }
        traj.times.push(t);
        traj.states.push(phi.to_vec());
        if let Some(v) = traj.potential.as_mut() {
            match model.potential(phi) {
                Ok(x) => v.push(x),
                Err(err) => {
                    failure = Some(err);
                    return false;
                }
            }
        }
        true
    })?;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(vec![Output::text("trajectory.csv", traj.to_csv())])
}

fn pulse(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let graph = config.graph(base)?;
    let f = config.coupling(base)?;
    let omega = config.model.omega;
    let mut rng = config.rng()?;
    let lags = config.edge_lags(&graph, &mut rng)?;
    let delays = lags.iter().map(|l| l / omega).collect();
    let kappa = kappa_from_f(&f, omega)?;
    let n = graph.n_vertices();
    let model = PulseModel::new(graph, &kappa, delays, config.model.epsilon)?;
    let theta0 = match &config.state {
        Some(s) => s.resolve(n, &mut rng)?,
        None => crate::config::StateSpec::Random.resolve(n, &mut rng)?,
    };
    let period = std::f64::consts::TAU / omega;
    let horizon = positive("horizon", config.run.horizon.unwrap_or(100.0 * period))?;
    let every = positive("sample_every", config.run.sample_every.unwrap_or(period))?;
    let run = model.simulate(&theta0, horizon, every)?;
    Ok(vec![
        Output::text("trajectory.csv", run.trajectory.to_csv()),
        Output::text("firings.csv", run.firings_csv()),
    ])
}

fn equilibrium(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let (model, mut rng) = phase_model(config, base)?;
    let guess = point(config, &model, &mut rng)?;
    let report = find_equilibrium(&model, &guess, config.run.tol.unwrap_or(DEFAULT_TOL))?;
    Ok(vec![Output::json("equilibrium.json", &report)?])
}

#[derive(Serialize)]
struct CutReport {
    /// 1-indexed labels of the `+` side.
    plus: Vec<usize>,
    mask: u64,
    cut_value: f64,
}

#[derive(Serialize)]
struct StabilityReport {
    class: crate::stability::StabilityClass,
    max_nonflow_eigenvalue: f64,
    nonflow_eigenvalues: Vec<f64>,
    residual: f64,
    certificate: Option<CutReport>,
}

fn labels(plus: &[usize]) -> Vec<usize> {
    plus.iter().map(|v| v + 1).collect()
}

fn stability(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let (model, mut rng) = phase_model(config, base)?;
    let phi = point(config, &model, &mut rng)?;
    let lin = linearize(&model, &phi)?;
    let verdict = classify(&lin)?;
    let report = StabilityReport {
        class: verdict.class,
        max_nonflow_eigenvalue: verdict.max_nonflow_eigenvalue,
        nonflow_eigenvalues: verdict.nonflow_eigenvalues,
        residual: residual(&model, &phi, 0.0),
        certificate: verdict.certificate.map(|c| CutReport {
            plus: labels(&c.plus),
            mask: c.partition.mask,
            cut_value: c.cut_value,
        }),
    };
    Ok(vec![Output::json("stability.json", &report)?])
}

#[derive(Serialize)]
struct ScanReport {
    mode: &'static str,
    negative: bool,
    #[serde(flatten)]
    cut: CutReport,
}

fn cut_scan(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let (model, mut rng) = phase_model(config, base)?;
    let phi = point(config, &model, &mut rng)?;
    let lin = linearize(&model, &phi)?;
    let heuristic = ScanMode::Heuristic { restarts: config.scan.restarts, seed: config.seed()? };
    let (mode, name) = match config.scan.mode {
        ScanKind::Exhaustive => (ScanMode::Exhaustive, "exhaustive"),
        ScanKind::Heuristic => (heuristic, "heuristic"),
        ScanKind::Auto if model.n() <= EXHAUSTIVE_LIMIT => (ScanMode::Exhaustive, "exhaustive"),
        ScanKind::Auto => (heuristic, "heuristic"),
    };
    let (p, value) = min_cut_scan(&lin, mode)?;
    let report = ScanReport {
        mode: name,
        negative: value < 0.0,
        cut: CutReport { plus: labels(&p.plus()), mask: p.mask, cut_value: value },
    };
    Ok(vec![Output::json("cut_scan.json", &report)?])
}

#[derive(Serialize)]
struct SurfaceSummary {
    grid: usize,
    cells: usize,
    max: f64,
    all_negative: bool,
}

fn surface(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let (model, _) = phase_model(config, base)?;
    let grid = config.surface.grid;
    let s = min_cut_surface(&model, six_node_family, grid)?;
    let summary = SurfaceSummary { grid, cells: grid * grid, max: s.max(), all_negative: s.max() < 0.0 };
    Ok(vec![Output::text("surface.csv", s.to_csv()), Output::json("surface.json", &summary)?])
}

fn experiment_config(config: &Config) -> Result<ExperimentConfig> {
    let e = &config.experiment;
    let cfg = ExperimentConfig {
        seed: config.seed()?,
        trials: e.trials,
        horizon: e.horizon,
        step: e.step,
        sync_threshold: e.sync_threshold,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn basin(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let (model, mut rng) = phase_model(config, base)?;
    let cfg = experiment_config(config)?;
    let init = match &config.state {
        None | Some(crate::config::StateSpec::Random) => InitialCondition::Uniform,
        Some(s) => InitialCondition::Near { phi: s.resolve(model.n(), &mut rng)?, jitter: config.experiment.jitter },
    };
    let result = basin_mc(&model, &cfg, &init)?;
    Ok(vec![Output::text("basin.csv", result.to_csv()), Output::json("basin.json", &result)?])
}

fn meanfield(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let f = config.coupling(base)?;
    let g = config.delay()?;
    let cfg = experiment_config(config)?;
    let params = MeanFieldParams {
        epsilon_bar: positive("epsilon_bar", config.experiment.epsilon_bar.unwrap_or(1.0))?,
        horizon: config.experiment.horizon,
    };
    let n_list = &config.experiment.n_list;
    let study = meanfield_study(&f, &g, n_list, &params, &cfg)?;
    let mut out = vec![Output::text("meanfield.csv", study.to_csv()), Output::json("meanfield.json", &study)?];
    for &n in n_list {
        let series = meanfield_compare(&f, &g, n, &params, &cfg, 0)?;
        out.push(Output::text(format!("meanfield_series_n{n}.csv"), series.to_csv()));
    }
    Ok(out)
}

fn cluster_params(config: &Config, n: usize) -> Result<ClusterParams> {
    let e = &config.experiment;
    Ok(ClusterParams {
        n,
        epsilon_bar: positive("epsilon_bar", e.epsilon_bar.unwrap_or(0.2))?,
        omega: config.model.omega,
        jitter: e.jitter,
        phase_model: e.phase_model,
    })
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    n: usize,
    trials: usize,
    in_phase: usize,
    runs: &'a [ClusterRun],
}

fn clusters(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let f = config.coupling(base)?;
    let g = config.delay()?;
    let cfg = experiment_config(config)?;
    let n = config.experiment.n.ok_or(Error::BadN(0))?;
    let params = cluster_params(config, n)?;
    let runs = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| cluster_destab(&f, &g, &params, &cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("trial,outcome,final_r,phase_model_outcome,phase_model_final_r\n");
    for (t, r) in runs.iter().enumerate() {
        let pm = r.phase_model_outcome.map(|o| format!("{o:?}")).unwrap_or_default();
        let pr = r.phase_model_final_r.map(|v| format!("{v:.16e}")).unwrap_or_default();
        csv.push_str(&format!("{t},{:?},{:.16e},{pm},{pr}\n", r.outcome, r.final_r));
    }
    let summary = ClusterSummary {
        n,
        trials: runs.len(),
        in_phase: runs.iter().filter(|r| r.outcome == crate::experiments::ClusterOutcome::InPhase).count(),
        runs: &runs,
    };
    Ok(vec![Output::text("clusters.csv", csv), Output::json("clusters.json", &summary)?])
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    #[serde(flatten)]
    result: &'a crate::experiments::SweepResult,
    crossings: Vec<Option<f64>>,
    transition_widths: Vec<Option<f64>>,
}

fn sweep(config: &Config, base: &Path) -> Result<Vec<Output>> {
    let f = config.coupling(base)?;
    let mu = match &config.delay {
        Some(crate::config::DelaySpec::Gaussian { mu, .. }) => *mu,
        _ => return Err(Error::InvalidParameter("sweep needs a gaussian delay".into())),
    };
    let cfg = experiment_config(config)?;
    let e = &config.experiment;
    let first = *e.n_list.first().ok_or(Error::BadN(0))?;
    let params = cluster_params(config, first)?;
    let result = sync_probability_sweep(&f, &GaussianFamily { mu }, &e.n_list, &e.sigma_list, &params, &cfg)?;
    let summary = SweepSummary {
        result: &result,
        crossings: e.n_list.iter().map(|&n| result.crossing(n)).collect(),
        transition_widths: e.n_list.iter().map(|&n| result.transition_width(n)).collect(),
    };
    Ok(vec![Output::text("sweep.csv", result.to_csv()), Output::json("sweep.json", &summary)?])
}
