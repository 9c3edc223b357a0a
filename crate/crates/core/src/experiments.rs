//! Seeded Monte Carlo studies: basin of the in-phase state, lagged versus
//! delay-averaged dynamics, cluster destabilisation by delay spread, and the
//! synchronisation-probability sweep.
//!
//! Every trial owns a ChaCha8 stream derived from `(seed, cell, trial)`, so
//! results do not depend on how trials are scheduled across threads.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{convolve_delay, kappa_from_f, CouplingFunction, DelayDistribution};
use crate::dynamics::{order_parameter, PhaseModel, PulseModel};
use crate::equilibria::{full_arc_diameter, symmetric_equilibrium, IsotropySpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::stability::{classify, linearize, StabilityClass};

/// Grid used for delay-averaged couplings.
pub const CONVOLUTION_GRID: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    /// Seconds; each experiment has its own default when absent.
    pub horizon: Option<f64>,
    /// Seconds; defaults to `0.01/(ε·N)`.
    pub step: Option<f64>,
    pub sync_threshold: f64,
}

impl ExperimentConfig {
    pub fn new(seed: u64, trials: usize) -> Self {
        ExperimentConfig { seed, trials, horizon: None, step: None, sync_threshold: 0.99 }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sync_threshold > 0.0 && self.sync_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sync threshold {} outside (0, 1]",
                self.sync_threshold
            )));
        }
        for (name, v) in [("horizon", self.horizon), ("step", self.step)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
                }
            }
        }
        Ok(())
    }

    fn step_for(&self, model: &PhaseModel) -> f64 {
        self.step.unwrap_or_else(|| model.default_step())
    }

    /// Generator for one trial of one cell.
    pub fn trial_rng(&self, cell: u64, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(cell << 32 | trial);
        rng
    }
}

fn uniform_phases<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
}

fn jittered<R: Rng>(rng: &mut R, phi: &[f64], jitter: f64) -> Vec<f64> {
    phi.iter()
        .map(|&p| if jitter > 0.0 { p + rng.random_range(-jitter..=jitter) } else { p })
        .collect()
}

/// Tracks whether the order parameter stayed above the threshold over the
/// final tenth of the horizon.
struct TailWatch {
    from: f64,
    threshold: f64,
    seen: bool,
    ok: bool,
    last_r: f64,
}

impl TailWatch {
    fn new(horizon: f64, threshold: f64) -> Self {
        TailWatch { from: 0.9 * horizon, threshold, seen: false, ok: true, last_r: 0.0 }
    }

    fn observe(&mut self, t: f64, phi: &[f64]) {
        let r = order_parameter(phi).0;
        self.last_r = r;
        if t >= self.from {
            self.seen = true;
            self.ok &= r > self.threshold;
        }
    }

    fn synced(&self) -> bool {
        self.seen && self.ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    Uniform,
    /// `phi` plus independent uniform jitter in `[−jitter, jitter]`.
    Near { phi: Vec<f64>, jitter: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinTrial {
    pub synced: bool,
    pub final_r: f64,
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinResult {
    pub fraction: f64,
    pub synced: usize,
    pub trials: usize,
    /// Positive-slope half-width of the coupling.
    pub b: f64,
    /// Whether `b ≤ π/(N−1)`, the width guaranteeing almost-global sync.
    pub hypothesis_holds: bool,
    pub outcomes: Vec<BasinTrial>,
}

impl BasinResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,synced,final_r,end_time\n");
        for (i, t) in self.outcomes.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{:.16e},{:.16e}", u8::from(t.synced), t.final_r, t.end_time);
        }
        out
    }
}

/// Fraction of initial conditions that reach `r > sync_threshold`.
///
/// For potential models a run stops early once all phases fit in an arc
/// narrower than both the positive-slope half-width and `2·acos(threshold)`:
/// such an arc only shrinks, so `r` stays above the threshold from then on.
/// Other runs count as synced when `r` stays above the threshold over the
/// last tenth of the horizon (default `200/ε`).
pub fn basin_mc(model: &PhaseModel, cfg: &ExperimentConfig, init: &InitialCondition) -> Result<BasinResult> {
    cfg.validate()?;
    if !model.graph().is_connected() {
        return Err(Error::Disconnected);
    }
    let n = model.n();
    if let InitialCondition::Near { phi, .. } = init {
        if phi.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: phi.len() });
        }
    }
    let b = (0..model.graph().n_edges())
        .map(|e| model.coupling(e).positive_slope_halfwidth())
        .fold(PI, f64::min);
    let hypothesis_holds = n < 2 || b <= PI / (n - 1) as f64 + 1e-12;
    let horizon = cfg.horizon.unwrap_or(200.0 / model.epsilon());
    let step = cfg.step_for(model);
    let capture = if model.qualifies_for_potential() {
        b.min(2.0 * cfg.sync_threshold.acos())
    } else {
        0.0
    };
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = cfg.trial_rng(0, trial as u64);
            let phi0 = match init {
                InitialCondition::Uniform => uniform_phases(&mut rng, n),
                InitialCondition::Near { phi, jitter } => jittered(&mut rng, phi, *jitter),
            };
            let mut tail = TailWatch::new(horizon, cfg.sync_threshold);
            let mut captured = false;
            let (end_time, last) = model.integrate_with(&phi0, step, horizon, |t, phi| {
                tail.observe(t, phi);
                captured = full_arc_diameter(phi) < capture;
                !captured
            })?;
            Ok(BasinTrial {
                synced: captured || tail.synced(),
                final_r: order_parameter(&last).0,
                end_time,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let synced = outcomes.iter().filter(|t| t.synced).count();
    Ok(BasinResult {
        fraction: if cfg.trials == 0 { 0.0 } else { synced as f64 / cfg.trials as f64 },
        synced,
        trials: cfg.trials,
        b,
        hypothesis_holds,
        outcomes,
    })
}

/// Per-unordered-pair lags drawn once from `g`, in edge order.
pub fn sample_lags<R: Rng>(rng: &mut R, graph: &Graph, g: &DelayDistribution) -> Vec<f64> {
    (0..graph.n_edges()).map(|_| g.sample(rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldRun {
    pub n: usize,
    pub times: Vec<f64>,
    /// Order parameter of the model with sampled per-pair lags.
    pub r_lagged: Vec<f64>,
    /// Order parameter of the lag-free model with the averaged coupling.
    pub r_averaged: Vec<f64>,
    pub sup_distance: f64,
}

impl MeanFieldRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,r_lagged,r_averaged\n");
        for ((t, a), b) in self.times.iter().zip(&self.r_lagged).zip(&self.r_averaged) {
            let _ = writeln!(out, "{t:.16e},{a:.16e},{b:.16e}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldParams {
    /// Total coupling `ε̄`; each edge gets `ε = ε̄/N`.
    pub epsilon_bar: f64,
    /// Seconds; default `40/ε̄`.
    pub horizon: Option<f64>,
}

/// Runs the lagged model and its delay-averaged counterpart on the complete
/// graph from the same random phases; returns both order-parameter series.
pub fn meanfield_compare(
    f: &CouplingFunction,
    g: &DelayDistribution,
    n: usize,
    params: &MeanFieldParams,
    cfg: &ExperimentConfig,
    trial: u64,
) -> Result<MeanFieldRun> {
    cfg.validate()?;
    let graph = Graph::complete(n)?;
    let eps = params.epsilon_bar / n as f64;
    let h = convolve_delay(f, g, CONVOLUTION_GRID)?;
    meanfield_with(f, &h, g, graph, eps, params, cfg, trial)
}

#[allow(clippy::too_many_arguments)]
fn meanfield_with(
    f: &CouplingFunction,
    h: &CouplingFunction,
    g: &DelayDistribution,
    graph: Graph,
    eps: f64,
    params: &MeanFieldParams,
    cfg: &ExperimentConfig,
    trial: u64,
) -> Result<MeanFieldRun> {
    let n = graph.n_vertices();
    let mut rng = cfg.trial_rng(n as u64, trial);
    let phi0 = uniform_phases(&mut rng, n);
    let lags = sample_lags(&mut rng, &graph, g);
    let lagged = PhaseModel::with_lags(graph.clone(), f.clone(), lags, eps)?;
    let averaged = PhaseModel::new(graph, h.clone(), eps)?;
    let horizon = params.horizon.or(cfg.horizon).unwrap_or(40.0 / params.epsilon_bar);
    let step = cfg.step_for(&averaged);
    let mut times = Vec::new();
    let mut r_lagged = Vec::new();
    lagged.integrate_with(&phi0, step, horizon, |t, phi| {
        times.push(t);
        r_lagged.push(order_parameter(phi).0);
        true
    })?;
    let mut r_averaged = Vec::new();
    averaged.integrate_with(&phi0, step, horizon, |_, phi| {
        r_averaged.push(order_parameter(phi).0);
        true
    })?;
    let sup_distance = r_lagged
        .iter()
        .zip(&r_averaged)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MeanFieldRun { n, times, r_lagged, r_averaged, sup_distance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldStudy {
    pub n_list: Vec<usize>,
    /// `sup_distances[i][s]` for `n_list[i]` and seed index `s`.
    pub sup_distances: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    /// Final order parameters `(lagged, averaged)` per population and seed.
    pub final_r: Vec<Vec<(f64, f64)>>,
}

impl MeanFieldStudy {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,trial,sup_distance,final_r_lagged,final_r_averaged\n");
        for (i, &n) in self.n_list.iter().enumerate() {
            for (s, d) in self.sup_distances[i].iter().enumerate() {
                let (a, b) = self.final_r[i][s];
                let _ = writeln!(out, "{n},{s},{d:.16e},{a:.16e},{b:.16e}");
            }
        }
        out
    }
}

/// `cfg.trials` seeded comparisons for every population size.
pub fn meanfield_study(
    f: &CouplingFunction,
    g: &DelayDistribution,
    n_list: &[usize],
    params: &MeanFieldParams,
    cfg: &ExperimentConfig,
) -> Result<MeanFieldStudy> {
    cfg.validate()?;
    let h = convolve_delay(f, g, CONVOLUTION_GRID)?;
    let mut sup_distances = Vec::new();
    let mut medians = Vec::new();
    let mut final_r = Vec::new();
    for &n in n_list {
        let graph = Graph::complete(n)?;
        let eps = params.epsilon_bar / n as f64;
        let runs = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| meanfield_with(f, &h, g, graph.clone(), eps, params, cfg, trial))
            .collect::<Result<Vec<_>>>()?;
        let d: Vec<f64> = runs.iter().map(|r| r.sup_distance).collect();
        medians.push(median(&d));
        sup_distances.push(d);
        final_r.push(
            runs.iter()
                .map(|r| (*r.r_lagged.last().unwrap_or(&0.0), *r.r_averaged.last().unwrap_or(&0.0)))
                .collect(),
        );
    }
    Ok(MeanFieldStudy { n_list: n_list.to_vec(), sup_distances, medians, final_r })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterOutcome {
    ClustersPersist,
    InPhase,
}

/// Slopes of the delay-averaged coupling at the three-cluster differences and
/// the verdict for the three-cluster state of the averaged system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDiagnostics {
    pub h_slope_0: f64,
    pub h_slope_1: f64,
    pub h_slope_2: f64,
    pub verdict: StabilityClass,
    pub max_nonflow_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub n: usize,
    /// Total coupling `ε̄`; each edge gets `ε = ε̄/N`.
    pub epsilon_bar: f64,
    /// Natural frequency in rad/s; delays are `ψ/ω` seconds.
    pub omega: f64,
    /// Uniform jitter half-width around the cluster phases, radians.
    pub jitter: f64,
    /// Also run the lagged phase model.
    pub phase_model: bool,
}

impl ClusterParams {
    pub fn new(n: usize) -> Self {
        ClusterParams { n, epsilon_bar: 0.2, omega: TAU, jitter: 0.01, phase_model: false }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(3) {
            return Err(Error::BadN(self.n));
        }
        for (name, v) in [("epsilon_bar", self.epsilon_bar), ("omega", self.omega)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidParameter(format!("jitter {} must be non-negative", self.jitter)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRun {
    pub outcome: ClusterOutcome,
    pub final_r: f64,
    pub phase_model_outcome: Option<ClusterOutcome>,
    pub phase_model_final_r: Option<f64>,
    pub diagnostics: ClusterDiagnostics,
}

/// Averaged coupling, its slopes at `0, 2π/3, 4π/3`, and the stability of
/// the three-cluster state on the complete graph of size `n` (the odd part
/// of the averaged coupling is used for the linearization).
pub fn cluster_diagnostics(f: &CouplingFunction, g: &DelayDistribution, n: usize, eps: f64) -> Result<ClusterDiagnostics> {
    if n == 0 || !n.is_multiple_of(3) {
        return Err(Error::BadN(n));
    }
    let h = convolve_delay(f, g, CONVOLUTION_GRID)?;
    let odd = h.odd_part(CONVOLUTION_GRID)?;
    let phi = symmetric_equilibrium(&IsotropySpec::single(3, n / 3)?)?;
    let model = PhaseModel::new(Graph::complete(n)?, odd, eps)?;
    let verdict = classify(&linearize(&model, &phi)?)?;
    Ok(ClusterDiagnostics {
        h_slope_0: h.deriv(0.0),
        h_slope_1: h.deriv(TAU / 3.0),
        h_slope_2: h.deriv(2.0 * TAU / 3.0),
        verdict: verdict.class,
        max_nonflow_eigenvalue: verdict.max_nonflow_eigenvalue,
    })
}

/// Default horizon `500/ε̄` seconds (`500/(ε·N)`).
fn cluster_horizon(params: &ClusterParams, cfg: &ExperimentConfig) -> f64 {
    cfg.horizon.unwrap_or(500.0 / params.epsilon_bar)
}

/// One pulse-coupled run on the complete graph starting from three
/// equidistant clusters plus jitter, with per-pair delays `ψ/ω`, `ψ ~ g`.
pub fn cluster_destab(
    f: &CouplingFunction,
    g: &DelayDistribution,
    params: &ClusterParams,
    cfg: &ExperimentConfig,
    trial: u64,
) -> Result<ClusterRun> {
    cfg.validate()?;
    params.validate()?;
    let eps = params.epsilon_bar / params.n as f64;
    let diagnostics = cluster_diagnostics(f, g, params.n, eps)?;
    cluster_trial(f, g, params, cfg, 0, trial, diagnostics)
}

fn cluster_trial(
    f: &CouplingFunction,
    g: &DelayDistribution,
    params: &ClusterParams,
    cfg: &ExperimentConfig,
    cell: u64,
    trial: u64,
    diagnostics: ClusterDiagnostics,
) -> Result<ClusterRun> {
    let n = params.n;
    let eps = params.epsilon_bar / n as f64;
    let graph = Graph::complete(n)?;
    let mut rng = cfg.trial_rng(cell, trial);
    let clusters = symmetric_equilibrium(&IsotropySpec::single(3, n / 3)?)?;
    let phi0 = jittered(&mut rng, &clusters, params.jitter);
    let lags = sample_lags(&mut rng, &graph, g);
    let horizon = cluster_horizon(params, cfg);
    let period = TAU / params.omega;

    let kappa = kappa_from_f(f, params.omega)?;
    let delays: Vec<f64> = lags.iter().map(|l| l / params.omega).collect();
    let pulse = PulseModel::new(graph.clone(), &kappa, delays, eps)?;
    let mut tail = TailWatch::new(horizon, cfg.sync_threshold);
    pulse.simulate_with(&phi0, horizon, period, |t, s| {
        tail.observe(t, s);
        true
    })?;
    let outcome = if tail.synced() { ClusterOutcome::InPhase } else { ClusterOutcome::ClustersPersist };
    let final_r = tail.last_r;

    let (phase_model_outcome, phase_model_final_r) = if params.phase_model {
        let model = PhaseModel::with_lags(graph, f.clone(), lags, eps)?.with_omega(params.omega)?;
        let mut tail = TailWatch::new(horizon, cfg.sync_threshold);
        model.integrate_with(&phi0, cfg.step_for(&model), horizon, |t, s| {
            tail.observe(t, s);
            true
        })?;
        let o = if tail.synced() { ClusterOutcome::InPhase } else { ClusterOutcome::ClustersPersist };
        (Some(o), Some(tail.last_r))
    } else {
        (None, None)
    };
    Ok(ClusterRun { outcome, final_r, phase_model_outcome, phase_model_final_r, diagnostics })
}

/// Lag law indexed by its spread `σ`: a point mass at `σ = 0`, otherwise a
/// normal law truncated to `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFamily {
    pub mu: f64,
}

impl GaussianFamily {
    pub fn at(&self, sigma: f64) -> Result<DelayDistribution> {
        if sigma == 0.0 {
            DelayDistribution::point(self.mu)
        } else {
            DelayDistribution::gaussian(self.mu, sigma)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    pub sigma: f64,
    pub trials: usize,
    pub in_phase: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub n_list: Vec<usize>,
    pub sigma_list: Vec<f64>,
    pub cells: Vec<SweepCell>,
    /// Smallest spread at which the averaged three-cluster state is
    /// classified Unstable, per population size.
    pub sigma_star: Vec<Option<f64>>,
    pub seed: u64,
}

impl SweepResult {
    pub fn probabilities(&self, n: usize) -> Vec<f64> {
        self.cells.iter().filter(|c| c.n == n).map(|c| c.probability).collect()
    }

    /// First `σ` at which the probability, linearly interpolated between grid
    /// points, reaches 0.5.
    pub fn crossing(&self, n: usize) -> Option<f64> {
        self.crossing_at(n, 0.5)
    }

    /// First `σ` at which the interpolated probability reaches `level`.
    pub fn crossing_at(&self, n: usize, level: f64) -> Option<f64> {
        let p = self.probabilities(n);
        let s = &self.sigma_list;
        if p.first().is_some_and(|&v| v >= level) {
            return s.first().copied();
        }
        (1..p.len()).find(|&i| p[i] >= level).map(|i| {
            let (p0, p1) = (p[i - 1], p[i]);
            s[i - 1] + (s[i] - s[i - 1]) * (level - p0) / (p1 - p0)
        })
    }

    /// Distance in `σ` between the 0.1 and 0.9 crossings.
    pub fn transition_width(&self, n: usize) -> Option<f64> {
        Some(self.crossing_at(n, 0.9)? - self.crossing_at(n, 0.1)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,sigma,trials,in_phase,probability\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{:.16e},{},{},{:.16e}", c.n, c.sigma, c.trials, c.in_phase, c.probability);
        }
        out
    }
}

/// Smallest `σ` in `[lo, hi]` where the averaged three-cluster state turns
/// Unstable, by grid scan then bisection; `None` if it never does.
pub fn critical_spread(f: &CouplingFunction, family: &GaussianFamily, n: usize, eps: f64, grid: &[f64]) -> Result<Option<f64>> {
    let unstable = |s: f64| -> Result<bool> {
        Ok(cluster_diagnostics(f, &family.at(s)?, n, eps)?.verdict == StabilityClass::Unstable)
    };
    let mut prev: Option<f64> = None;
    for &s in grid {
        if unstable(s)? {
            let Some(mut lo) = prev else { return Ok(Some(s)) };
            let mut hi = s;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if unstable(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        prev = Some(s);
    }
    Ok(None)
}

/// Fraction of pulse-coupled cluster runs ending in phase, for every
/// `(N, σ)` cell, plus the predicted critical spread.
pub fn sync_probability_sweep(
    f: &CouplingFunction,
    family: &GaussianFamily,
    n_list: &[usize],
    sigma_list: &[f64],
    params: &ClusterParams,
    cfg: &ExperimentConfig,
) -> Result<SweepResult> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut sigma_star = Vec::new();
    for (ni, &n) in n_list.iter().enumerate() {
        let p = ClusterParams { n, phase_model: false, ..params.clone() };
        p.validate()?;
        let eps = p.epsilon_bar / n as f64;
        sigma_star.push(critical_spread(f, family, n, eps, sigma_list)?);
        for (si, &sigma) in sigma_list.iter().enumerate() {
            let g = family.at(sigma)?;
            let diagnostics = cluster_diagnostics(f, &g, n, eps)?;
            let cell = (ni * sigma_list.len() + si + 1) as u64;
            let runs = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|trial| cluster_trial(f, &g, &p, cfg, cell, trial, diagnostics.clone()))
                .collect::<Result<Vec<_>>>()?;
            let in_phase = runs.iter().filter(|r| r.outcome == ClusterOutcome::InPhase).count();
            cells.push(SweepCell {
                n,
                sigma,
                trials: cfg.trials,
                in_phase,
                probability: if cfg.trials == 0 { 0.0 } else { in_phase as f64 / cfg.trials as f64 },
            });
        }
    }
    Ok(SweepResult {
        n_list: n_list.to_vec(),
        sigma_list: sigma_list.to_vec(),
        cells,
        sigma_star,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster_f() -> CouplingFunction {
        CouplingFunction::sine_series(vec![1.0, 0.0, 0.5])
    }

    #[test]
    fn trial_streams_are_distinct_and_reproducible() {
        let cfg = ExperimentConfig::new(7, 1);
        let a: u64 = cfg.trial_rng(0, 0).random();
        let b: u64 = cfg.trial_rng(0, 1).random();
        let c: u64 = cfg.trial_rng(1, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, cfg.trial_rng(0, 0).random::<u64>());
    }

    #[test]
    fn two_node_basin() {
        let f = CouplingFunction::fb(0.99 * PI, 1.0).unwrap();
        let model = PhaseModel::new(Graph::path(2).unwrap(), f, 1.0).unwrap();
        let r = basin_mc(&model, &ExperimentConfig::new(1, 100), &InitialCondition::Uniform).unwrap();
        assert_eq!(r.fraction, 1.0);
        assert!(r.hypothesis_holds);
    }

    #[test]
    fn disconnected_basin_rejected() {
        let g = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        let model = PhaseModel::new(g, CouplingFunction::sine(1.0), 1.0).unwrap();
        assert!(matches!(
            basin_mc(&model, &ExperimentConfig::new(1, 2), &InitialCondition::Uniform),
            Err(Error::Disconnected)
        ));
    }

    #[test]
    fn ring_splay_is_an_attractor() {
        let model = PhaseModel::new(Graph::ring(6).unwrap(), CouplingFunction::sine(1.0), 1.0).unwrap();
        let splay = symmetric_equilibrium(&IsotropySpec::single(6, 1).unwrap()).unwrap();
        let lin = linearize(&model, &splay).unwrap();
        assert_eq!(classify(&lin).unwrap().class, StabilityClass::Stable);
        let cfg = ExperimentConfig::new(2, 10).with_horizon(60.0);
        let r = basin_mc(&model, &cfg, &InitialCondition::Near { phi: splay, jitter: 0.1 }).unwrap();
        assert!(r.fraction < 1.0);
        assert!(!r.hypothesis_holds);
    }

    #[test]
    fn point_delay_meanfield_is_exact() {
        let f = CouplingFunction::sine(-1.0);
        let g = DelayDistribution::point(0.0).unwrap();
        let params = MeanFieldParams { epsilon_bar: 1.0, horizon: Some(5.0) };
        let run = meanfield_compare(&f, &g, 6, &params, &ExperimentConfig::new(3, 1), 0).unwrap();
        assert!(run.sup_distance < 1e-8, "{}", run.sup_distance);
    }

    #[test]
    fn cluster_diagnostics_follow_closed_form() {
        let f = cluster_f();
        for sigma in [0.2, 0.8] {
            let d = cluster_diagnostics(&f, &DelayDistribution::gaussian(TAU, sigma).unwrap(), 9, 0.02).unwrap();
            let c1 = (-sigma * sigma / 2.0).exp();
            let c3 = (-9.0 * sigma * sigma / 2.0).exp();
            assert!((d.h_slope_0 - (c1 + 1.5 * c3)).abs() < 1e-9);
            assert!((d.h_slope_1 - (-0.5 * c1 + 1.5 * c3)).abs() < 1e-9);
            assert!((d.h_slope_1 - d.h_slope_2).abs() < 1e-9);
            let expected = if d.h_slope_1 < 0.0 { StabilityClass::Unstable } else { StabilityClass::Stable };
            assert_eq!(d.verdict, expected);
        }
    }

    #[test]
    fn critical_spread_matches_closed_form() {
        let grid: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
        let s = critical_spread(&cluster_f(), &GaussianFamily { mu: TAU }, 9, 0.02, &grid).unwrap().unwrap();
        assert!((s - (3.0f64.ln() / 4.0).sqrt()).abs() < 1e-6, "{s}");
    }

    #[test]
    fn exact_clusters_persist_without_delay() {
        let params = ClusterParams { jitter: 0.0, phase_model: true, ..ClusterParams::new(9) };
        let cfg = ExperimentConfig::new(4, 1).with_horizon(200.0);
        let run = cluster_destab(&cluster_f(), &DelayDistribution::point(0.0).unwrap(), &params, &cfg, 0).unwrap();
        assert_eq!(run.outcome, ClusterOutcome::ClustersPersist);
        assert_eq!(run.phase_model_outcome, Some(ClusterOutcome::ClustersPersist));
        // pulses displace clusters within a period by O(ε·N)
        assert!(run.final_r < 0.1, "{run:?}");
        assert!(run.phase_model_final_r.unwrap() < 1e-9, "{run:?}");
    }

    #[test]
    fn cluster_sizes_must_divide() {
        let cfg = ExperimentConfig::new(4, 1);
        let g = DelayDistribution::point(0.0).unwrap();
        assert!(matches!(cluster_destab(&cluster_f(), &g, &ClusterParams::new(10), &cfg, 0), Err(Error::BadN(10))));
    }

    #[test]
    fn sweep_crossing_interpolates() {
        let r = SweepResult {
            n_list: vec![9],
            sigma_list: vec![0.0, 0.5, 1.0],
            cells: [0.0, 0.25, 0.75]
                .iter()
                .zip([0.0, 0.5, 1.0])
                .map(|(&p, s)| SweepCell { n: 9, sigma: s, trials: 4, in_phase: (4.0 * p) as usize, probability: p })
                .collect(),
            sigma_star: vec![None],
            seed: 0,
        };
        assert!((r.crossing(9).unwrap() - 0.75).abs() < 1e-12);
    }
}
