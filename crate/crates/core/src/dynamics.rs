//! Phase-model integration, potential, order parameter and the event-driven
//! pulse-coupled simulator.
//!
//! The phase model is integrated in the frame co-rotating at the natural
//! frequency, so `ω` never appears in the right-hand side. The pulse simulator
//! keeps absolute time because delays are given in seconds.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::coupling::{CouplingFunction, PulseResponse};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::wrap;

#[derive(Debug, Clone)]
pub struct PhaseModel {
    graph: Graph,
    couplings: Vec<Arc<CouplingFunction>>,
    lags: Vec<f64>,
    epsilon: f64,
    omega: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

fn check_lag(v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lag {v} must be finite and non-negative")))
    }
}

/// Collapses a directed map `(i, j) → value` into one value per edge,
/// rejecting pairs whose two directions disagree. Missing entries are zero.
pub fn symmetric_edge_values(graph: &Graph, directed: &HashMap<(usize, usize), f64>) -> Result<Vec<f64>> {
    for &(i, j) in directed.keys() {
        if graph.edge_index(i, j).is_none() {
            return Err(Error::InvalidParameter(format!("no edge between {i} and {j}")));
        }
    }
    graph
        .edges()
        .iter()
        .map(|&(t, h)| {
            let a = directed.get(&(t, h)).copied();
            let b = directed.get(&(h, t)).copied();
            match (a, b) {
                (Some(x), Some(y)) if x != y => Err(Error::AsymmetricLag(t, h, x, y)),
                (Some(x), _) | (None, Some(x)) => Ok(x),
                (None, None) => Ok(0.0),
            }
        })
        .collect()
}

impl PhaseModel {
    /// Same coupling on every edge, no lags.
    pub fn new(graph: Graph, coupling: CouplingFunction, epsilon: f64) -> Result<Self> {
        let m = graph.n_edges();
        let shared = Arc::new(coupling);
        PhaseModel::with_edges(graph, vec![shared; m], vec![0.0; m], epsilon, 1.0)
    }

    /// Same coupling on every edge with one lag per edge (`ψ_ij = ψ_ji`).
    pub fn with_lags(graph: Graph, coupling: CouplingFunction, lags: Vec<f64>, epsilon: f64) -> Result<Self> {
        let m = graph.n_edges();
        let shared = Arc::new(coupling);
        PhaseModel::with_edges(graph, vec![shared; m], lags, epsilon, 1.0)
    }

    pub fn with_edges(
        graph: Graph,
        couplings: Vec<Arc<CouplingFunction>>,
        lags: Vec<f64>,
        epsilon: f64,
        omega: f64,
    ) -> Result<Self> {
        let m = graph.n_edges();
        if couplings.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: couplings.len() });
        }
        if lags.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: lags.len() });
        }
        check_positive("epsilon", epsilon)?;
        check_positive("omega", omega)?;
        for &l in &lags {
            check_lag(l)?;
        }
        Ok(PhaseModel { graph, couplings, lags, epsilon, omega })
    }

    pub fn with_omega(mut self, omega: f64) -> Result<Self> {
        check_positive("omega", omega)?;
        self.omega = omega;
        Ok(self)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n_vertices()
    }

    pub fn coupling(&self, edge: usize) -> &CouplingFunction {
        &self.couplings[edge]
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn is_lagged(&self) -> bool {
        self.lags.iter().any(|&l| l != 0.0)
    }

    /// Zero lags and odd couplings everywhere.
    pub fn qualifies_for_potential(&self) -> bool {
        !self.is_lagged() && self.couplings.iter().all(|f| f.is_odd())
    }

    fn check_len(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.n() {
            return Err(Error::LengthMismatch { expected: self.n(), got: phi.len() });
        }
        Ok(())
    }

    /// `φ̇_i = ε Σ_{j∈N_i} f_ij(φ_j − φ_i − ψ_ij)`, written into `out`.
    pub fn phase_rhs_into(&self, phi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let eps = self.epsilon;
        for (e, &(t, h)) in self.graph.edges().iter().enumerate() {
            let f = &self.couplings[e];
            let d = phi[h] - phi[t];
            let lag = self.lags[e];
            if lag == 0.0 && f.is_odd() {
                let v = eps * f.eval(d);
                out[t] += v;
                out[h] -= v;
            } else {
                out[t] += eps * f.eval(d - lag);
                out[h] += eps * f.eval(-d - lag);
            }
        }
    }

    pub fn phase_rhs(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; phi.len()];
        self.phase_rhs_into(phi, &mut out);
        out
    }

    /// `V(φ) = Σ_e ∫₀^{(Bᵀφ)_e} f_e(s) ds`.
    pub fn potential(&self, phi: &[f64]) -> Result<f64> {
        if !self.qualifies_for_potential() {
            return Err(Error::NotPotentialForm);
        }
        self.check_len(phi)?;
        Ok(self
            .graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(t, h))| self.couplings[e].antiderivative(phi[h] - phi[t]))
            .sum())
    }

    /// Default step `0.01/(ε·N)`.
    pub fn default_step(&self) -> f64 {
        0.01 / (self.epsilon * self.n() as f64)
    }

    /// Fixed-step RK4 from `phi0` over `[0, horizon]`, recording every step.
    pub fn integrate(&self, phi0: &[f64], step: f64, horizon: f64) -> Result<Trajectory> {
        let record_potential = self.qualifies_for_potential();
        let mut traj = Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            potential: record_potential.then(Vec::new),
        };
        self.integrate_with(phi0, step, horizon, |t, phi| {
            traj.times.push(t);
            traj.states.push(phi.to_vec());
            if let Some(v) = traj.potential.as_mut() {
                v.push(self.potential(phi).expect("qualifying model"));
            }
            true
        })?;
        Ok(traj)
    }

    /// Fixed-step RK4 calling `observe(t, φ)` at `t = 0` and after every
    /// step; integration stops early when `observe` returns `false`. Returns
    /// the final time and state.
    pub fn integrate_with<F>(&self, phi0: &[f64], step: f64, horizon: f64, mut observe: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnMut(f64, &[f64]) -> bool,
    {
        self.check_len(phi0)?;
        check_positive("step", step)?;
        if !horizon.is_finite() || horizon < step {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} must be at least the step {step}"
            )));
        }
        let n = phi0.len();
        let mut phi: Vec<f64> = phi0.iter().map(|&p| wrap(p)).collect();
        if let Some(&bad) = phi0.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial phase {bad} is not finite")));
        }
        let mut stage = vec![0.0; n];
        let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let steps = (horizon / step).ceil() as u64;
        let mut t = 0.0;
        if !observe(t, &phi) {
            return Ok((t, phi));
        }
        for s in 1..=steps {
            let t_next = if s == steps { horizon } else { s as f64 * step };
            let h = t_next - t;
            if h <= 0.0 {
                break;
            }
            self.phase_rhs_into(&phi, &mut k[0]);
            for i in 0..n {
                stage[i] = phi[i] + 0.5 * h * k[0][i];
            }
            self.phase_rhs_into(&stage, &mut k[1]);
            for i in 0..n {
                stage[i] = phi[i] + 0.5 * h * k[1][i];
            }
            self.phase_rhs_into(&stage, &mut k[2]);
            for i in 0..n {
                stage[i] = phi[i] + h * k[2][i];
            }
            self.phase_rhs_into(&stage, &mut k[3]);
            for i in 0..n {
                let p = phi[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                if !p.is_finite() {
                    return Err(Error::NonFinite(t_next));
                }
                phi[i] = wrap(p);
            }
            t = t_next;
            if !observe(t, &phi) {
                break;
            }
        }
        Ok((t, phi))
    }
}

/// Modulus and argument of `(1/N) Σ e^{iφ_l}`, the argument in `[0, 2π)`.
pub fn order_parameter(phi: &[f64]) -> (f64, f64) {
    let n = phi.len().max(1) as f64;
    let (s, c) = phi
        .iter()
        .fold((0.0, 0.0), |(s, c), p| (s + p.sin(), c + p.cos()));
    let (s, c) = (s / n, c / n);
    ((s * s + c * c).sqrt().min(1.0), wrap(s.atan2(c)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub potential: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(|s| s.as_slice())
    }

    pub fn order_parameters(&self) -> Vec<f64> {
        self.states.iter().map(|s| order_parameter(s).0).collect()
    }

    /// CSV with header `t,phi_0,…,phi_{N−1}[,V]`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, ",phi_{i}");
        }
        if self.potential.is_some() {
            out.push_str(",V");
        }
        out.push('\n');
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let _ = write!(out, "{t:.16e}");
            for v in s {
                let _ = write!(out, ",{v:.16e}");
            }
            if let Some(p) = &self.potential {
                let _ = write!(out, ",{:.16e}", p[k]);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PulseModel {
    graph: Graph,
    kappa: Vec<Arc<CouplingFunction>>,
    delays: Vec<f64>,
    epsilon: f64,
    omega: f64,
    jump_wrap: bool,
    event_cap: usize,
}

pub const DEFAULT_EVENT_CAP: usize = 50_000_000;

impl PulseModel {
    /// Same response on every edge; `delays` holds `η_e ≥ 0` seconds per edge.
    pub fn new(graph: Graph, response: &PulseResponse, delays: Vec<f64>, epsilon: f64) -> Result<Self> {
        let m = graph.n_edges();
        let shared = Arc::new(response.kappa.clone());
        PulseModel::with_edges(graph, vec![shared; m], delays, epsilon, response.omega)
    }

    pub fn with_edges(
        graph: Graph,
        kappa: Vec<Arc<CouplingFunction>>,
        delays: Vec<f64>,
        epsilon: f64,
        omega: f64,
    ) -> Result<Self> {
        let m = graph.n_edges();
        if kappa.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: kappa.len() });
        }
        if delays.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: delays.len() });
        }
        check_positive("epsilon", epsilon)?;
        check_positive("omega", omega)?;
        for &d in &delays {
            check_lag(d)?;
        }
        let largest = kappa
            .iter()
            .map(|k| PulseResponse { kappa: (**k).clone(), omega }.max_abs())
            .fold(0.0, f64::max);
        if epsilon * largest >= TAU {
            return Err(Error::InvalidParameter(format!(
                "jump size ε·max|κ| = {} must stay below 2π",
                epsilon * largest
            )));
        }
        Ok(PulseModel { graph, kappa, delays, epsilon, omega, jump_wrap: true, event_cap: DEFAULT_EVENT_CAP })
    }

    /// Whether a jump carrying a phase past 2π counts as an immediate firing.
    pub fn jump_wrap(mut self, on: bool) -> Self {
        self.jump_wrap = on;
        self
    }

    pub fn event_cap(mut self, cap: usize) -> Self {
        self.event_cap = cap;
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Event-driven simulation over `[0, horizon]`, sampling phases every
    /// `sample_every` seconds.
    pub fn simulate(&self, theta0: &[f64], horizon: f64, sample_every: f64) -> Result<PulseRun> {
        let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), potential: None };
        let firings = self.simulate_with(theta0, horizon, sample_every, |t, s| {
            traj.times.push(t);
            traj.states.push(s.to_vec());
            true
        })?;
        Ok(PulseRun { trajectory: traj, firings })
    }

    /// Like [`simulate`](Self::simulate) but hands samples to `observe`,
    /// which may stop the run by returning `false`. Returns the firing log.
    pub fn simulate_with<F>(&self, theta0: &[f64], horizon: f64, sample_every: f64, mut observe: F) -> Result<Vec<Firing>>
    where
        F: FnMut(f64, &[f64]) -> bool,
    {
        let n = self.graph.n_vertices();
        if theta0.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: theta0.len() });
        }
        check_positive("horizon", horizon)?;
        check_positive("sample interval", sample_every)?;
        let mut sim = PulseState::new(self, theta0)?;
        let mut firings = Vec::new();
        let mut sample_k: u64 = 0;
        let mut sample_buf = vec![0.0; n];
        let mut processed = 0usize;
        loop {
            let next_event = sim.peek_time();
            // samples strictly before the next event, plus the final time
            loop {
                let ts = sample_k as f64 * sample_every;
                if ts > horizon || !(next_event.is_none_or(|te| ts < te)) {
                    break;
                }
                sim.phases_at(ts, &mut sample_buf);
                sample_k += 1;
                if !observe(ts, &sample_buf) {
                    return Ok(firings);
                }
            }
            let Some(ev) = sim.pop() else { break };
            if ev.time > horizon {
                break;
            }
            processed += 1;
            if processed > self.event_cap {
                return Err(Error::EventOverflow(self.event_cap));
            }
            sim.process(self, ev, &mut firings)?;
        }
        Ok(firings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Firing {
    pub time: f64,
    pub oscillator: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseRun {
    pub trajectory: Trajectory,
    pub firings: Vec<Firing>,
}

impl PulseRun {
    pub fn firing_counts(&self, n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for f in &self.firings {
            c[f.oscillator] += 1;
        }
        c
    }

    /// CSV with header `t,oscillator`.
    pub fn firings_csv(&self) -> String {
        let mut out = String::from("t,oscillator\n");
        for f in &self.firings {
            let _ = writeln!(out, "{:.16e},{}", f.time, f.oscillator);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Arrival,
    Firing,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    target: usize,
    source: usize,
    edge: usize,
    version: u64,
    seq: u64,
}

impl Event {
    fn key(&self) -> (EventKind, usize, usize, u64) {
        (self.kind, self.target, self.source, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.key().cmp(&self.key()))
    }
}

/// Each oscillator's phase is `base + ω(t − since)`; a firing is due when it
/// reaches 2π.
struct PulseState {
    base: Vec<f64>,
    since: Vec<f64>,
    version: Vec<u64>,
    heap: BinaryHeap<Event>,
    seq: u64,
    omega: f64,
}

impl PulseState {
    fn new(model: &PulseModel, theta0: &[f64]) -> Result<Self> {
        if let Some(&bad) = theta0.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial phase {bad} is not finite")));
        }
        let n = theta0.len();
        let mut s = PulseState {
            base: theta0.iter().map(|&p| wrap(p)).collect(),
            since: vec![0.0; n],
            version: vec![0; n],
            heap: BinaryHeap::new(),
            seq: 0,
            omega: model.omega,
        };
        // a phase at exactly 0 has just fired
        for i in 0..n {
            s.schedule_firing(i);
        }
        Ok(s)
    }

    fn phase(&self, i: usize, t: f64) -> f64 {
        self.base[i] + self.omega * (t - self.since[i])
    }

    fn phases_at(&self, t: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = wrap(self.phase(i, t));
        }
    }

    fn push(&mut self, mut ev: Event) {
        ev.seq = self.seq;
        self.seq += 1;
        self.heap.push(ev);
    }

    fn schedule_firing(&mut self, i: usize) {
        let time = self.since[i] + (TAU - self.base[i]).max(0.0) / self.omega;
        self.push(Event {
            time,
            kind: EventKind::Firing,
            target: i,
            source: i,
            edge: usize::MAX,
            version: self.version[i],
            seq: 0,
        });
    }

    fn peek_time(&mut self) -> Option<f64> {
        while let Some(top) = self.heap.peek() {
            if top.kind == EventKind::Firing && top.version != self.version[top.target] {
                self.heap.pop();
            } else {
                return Some(top.time);
            }
        }
        None
    }

    fn pop(&mut self) -> Option<Event> {
        self.peek_time()?;
        self.heap.pop()
    }

    fn fire(&mut self, model: &PulseModel, i: usize, t: f64, firings: &mut Vec<Firing>) {
        firings.push(Firing { time: t, oscillator: i });
        for &(j, e) in model.graph.neighbors(i) {
            self.push(Event {
                time: t + model.delays[e],
                kind: EventKind::Arrival,
                target: j,
                source: i,
                edge: e,
                version: 0,
                seq: 0,
            });
        }
    }

    fn process(&mut self, model: &PulseModel, ev: Event, firings: &mut Vec<Firing>) -> Result<()> {
        let i = ev.target;
        match ev.kind {
            EventKind::Firing => {
                self.base[i] = 0.0;
                self.since[i] = ev.time;
                self.version[i] += 1;
                self.fire(model, i, ev.time, firings);
                self.schedule_firing(i);
            }
            EventKind::Arrival => {
                let theta = self.phase(i, ev.time).clamp(0.0, TAU);
                let jumped = theta + model.epsilon * model.kappa[ev.edge].eval(theta);
                if !jumped.is_finite() {
                    return Err(Error::NonFinite(ev.time));
                }
                self.since[i] = ev.time;
                self.version[i] += 1;
                if jumped >= TAU && model.jump_wrap {
                    self.base[i] = jumped - TAU;
                    self.fire(model, i, ev.time, firings);
                } else if jumped < 0.0 {
                    self.base[i] = jumped + TAU;
                } else {
                    self.base[i] = jumped.min(TAU);
                }
                self.schedule_firing(i);
            }
        }
        Ok(())
    }
}
