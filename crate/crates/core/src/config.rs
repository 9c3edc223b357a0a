//! JSON run configuration: typed sections, `--set` overrides and semantic
//! findings. Vertex labels in configs are 1-indexed; graph files are
//! 0-indexed.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coupling::{CouplingFunction, DelayDistribution, Tabulated};
use crate::dynamics::symmetric_edge_values;
use crate::equilibria::{symmetric_equilibrium, IsotropySpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::stability::six_node_family;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verb {
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
}

impl Verb {
    pub const ALL: [Verb; 10] = [
        Verb::Simulate,
        Verb::Pulse,
        Verb::Equilibrium,
        Verb::Stability,
        Verb::CutScan,
        Verb::Surface,
        Verb::Basin,
        Verb::Meanfield,
        Verb::Clusters,
        Verb::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Simulate => "simulate",
            Verb::Pulse => "pulse",
            Verb::Equilibrium => "equilibrium",
            Verb::Stability => "stability",
            Verb::CutScan => "cut-scan",
            Verb::Surface => "surface",
            Verb::Basin => "basin",
            Verb::Meanfield => "meanfield",
            Verb::Clusters => "clusters",
            Verb::Sweep => "sweep",
        }
    }

    fn needs_graph(self) -> bool {
        !matches!(self, Verb::Meanfield | Verb::Clusters | Verb::Sweep)
    }

    fn needs_delay(self) -> bool {
        matches!(self, Verb::Meanfield | Verb::Clusters | Verb::Sweep)
    }

    fn needs_point(self) -> bool {
        matches!(self, Verb::Equilibrium | Verb::Stability | Verb::CutScan)
    }

    fn needs_connected(self) -> bool {
        matches!(self, Verb::CutScan | Verb::Basin)
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    #[serde(default)]
    pub coupling: Option<CouplingSpec>,
    #[serde(default)]
    pub delay: Option<DelaySpec>,
    /// Directed per-pair lags; a pair given in one direction applies to both.
    #[serde(default)]
    pub lags: Vec<LagEntry>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Complete { n: usize },
    Ring { n: usize },
    Path { n: usize },
    Circulant { n: usize, offsets: Vec<usize> },
    SixNode,
    /// 1-indexed vertex pairs.
    Edges { n: usize, edges: Vec<[usize; 2]> },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CouplingSpec {
    Sine {
        #[serde(rename = "K")]
        k: f64,
    },
    /// `Σ_k coeffs[k−1]·sin(kθ)`.
    Series { coeffs: Vec<f64> },
    Fb {
        b: f64,
        #[serde(default = "one")]
        amp: f64,
    },
    Tabulated { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelaySpec {
    Point { psi0: f64 },
    Uniform { mu: f64, w: f64 },
    Gaussian { mu: f64, sigma: f64 },
    Empirical { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagEntry {
    pub i: usize,
    pub j: usize,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "tau")]
    pub omega: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { epsilon: 1.0, omega: TAU }
    }
}

/// A phase vector or a recipe for one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Random,
    Phases { phi: Vec<f64> },
    Symmetric { m: usize, block_sizes: Vec<usize>, shifts: Vec<f64> },
    SixNode { lambda1: f64, lambda2: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub sample_every: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    Auto,
    Exhaustive,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default = "scan_auto")]
    pub mode: ScanKind,
    #[serde(default = "restarts")]
    pub restarts: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec { mode: ScanKind::Auto, restarts: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    #[serde(default = "surface_grid")]
    pub grid: usize,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        SurfaceSpec { grid: 41 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "trials")]
    pub trials: usize,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "threshold")]
    pub sync_threshold: f64,
    #[serde(default)]
    pub epsilon_bar: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub sigma_list: Vec<f64>,
    #[serde(default = "jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub phase_model: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            trials: trials(),
            horizon: None,
            step: None,
            sync_threshold: threshold(),
            epsilon_bar: None,
            n: None,
            n_list: Vec::new(),
            sigma_list: Vec::new(),
            jitter: jitter(),
            phase_model: false,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn tau() -> f64 {
    TAU
}
fn scan_auto() -> ScanKind {
    ScanKind::Auto
}
fn restarts() -> usize {
    32
}
fn surface_grid() -> usize {
    41
}
fn trials() -> usize {
    100
}
fn threshold() -> f64 {
    0.99
}
fn jitter() -> f64 {
    0.01
}

/// A problem that makes a config unrunnable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub check: String,
    pub message: String,
}

impl Finding {
    fn new(check: &str, message: impl Into<String>) -> Self {
        Finding { check: check.to_string(), message: message.into() }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.check, self.message)
    }
}

pub fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Applies `key.path=value` overrides; the value is parsed as JSON when it
/// can be, otherwise taken as a string. Intermediate objects are created.
pub fn apply_overrides(value: &mut Value, sets: &[String]) -> Result<()> {
    for set in sets {
        let (key, raw) = set
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("override '{set}' is not key=value")))?;
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(Error::Parse(format!("override key '{key}' is malformed")));
        }
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut *value;
        let parts: Vec<&str> = key.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            let Value::Object(map) = node else {
                return Err(Error::Parse(format!("override '{key}' descends into a non-object")));
            };
            if depth + 1 == parts.len() {
                map.insert(part.to_string(), parsed.clone());
                break;
            }
            node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

impl Config {
    pub fn from_value(value: Value) -> Result<Self> {
        Ok(serde_json::from_value(value)?)
    }

    /// Structural and semantic problems for `verb` (all verbs when `None`).
    /// Relative paths resolve against `base`.
    pub fn findings(&self, verb: Option<Verb>, base: &Path) -> Vec<Finding> {
        let mut out = Vec::new();
        if self.version != CONFIG_VERSION {
            out.push(Finding::new("version", format!("version {} is not supported (expected {CONFIG_VERSION})", self.version)));
        }
        if self.seed.is_none() {
            out.push(Finding::new("seed", "missing seed"));
        }
        if let Some(CouplingSpec::Fb { b, amp }) = &self.coupling {
            if !(*b > 0.0 && *b < PI) {
                out.push(Finding::new("coupling", format!("b outside (0,π): b = {b}")));
            }
            if !(*amp > 0.0 && amp.is_finite()) {
                out.push(Finding::new("coupling", format!("amplitude {amp} must be positive")));
            }
        }
        if let Some(CouplingSpec::Tabulated { file }) = &self.coupling {
            if !base.join(file).is_file() {
                out.push(Finding::new("coupling", format!("tabulated file {} not found", file.display())));
            }
        }
        if let Some(d) = &self.delay {
            if let Err(e) = d.build() {
                out.push(Finding::new("delay", e.to_string()));
            }
        }
        for (name, v) in [("epsilon", self.model.epsilon), ("omega", self.model.omega)] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(Finding::new("model", format!("{name} = {v} must be positive")));
            }
        }
        let graph = match &self.graph {
            Some(spec) => match spec.build(base) {
                Ok(g) => Some(g),
                Err(e) => {
                    out.push(Finding::new("graph", e.to_string()));
                    None
                }
            },
            None => None,
        };
        if let Some(g) = &graph {
            self.lag_findings(g, &mut out);
        } else if !self.lags.is_empty() && self.graph.is_some() {
            out.push(Finding::new("lags", "lags given but the graph is invalid"));
        }
        if let Some(verb) = verb {
            self.verb_findings(verb, graph.as_ref(), &mut out);
        } else {
            let e = &self.experiment;
            // n_list is shared with mean-field runs; a sigma_list marks a sweep.
            let swept = if e.sigma_list.is_empty() { &[][..] } else { &e.n_list[..] };
            for n in e.n.iter().chain(swept) {
                if *n == 0 || n % 3 != 0 {
                    out.push(Finding::new("experiment", format!("N not a multiple of 3 for cluster experiments: {n}")));
                }
            }
        }
        out
    }

    fn lag_findings(&self, graph: &Graph, out: &mut Vec<Finding>) {
        let n = graph.n_vertices();
        let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
        for l in &self.lags {
            if l.i == 0 || l.j == 0 || l.i > n || l.j > n {
                out.push(Finding::new("lags", format!("lag label ({}, {}) outside 1..={n}", l.i, l.j)));
                continue;
            }
            if graph.edge_index(l.i - 1, l.j - 1).is_none() {
                out.push(Finding::new("lags", format!("lag on ({}, {}) which is not an edge", l.i, l.j)));
                continue;
            }
            if !(l.psi >= 0.0 && l.psi.is_finite()) {
                out.push(Finding::new("lags", format!("lag {} on ({}, {}) must be non-negative", l.psi, l.i, l.j)));
            }
            if let Some(&other) = seen.get(&(l.j, l.i)) {
                if other != l.psi {
                    out.push(Finding::new(
                        "lags",
                        format!("asymmetric lag on ({}, {}): {} != {}", l.i, l.j, l.psi, other),
                    ));
                }
            }
            seen.insert((l.i, l.j), l.psi);
        }
    }

    fn verb_findings(&self, verb: Verb, graph: Option<&Graph>, out: &mut Vec<Finding>) {
        if verb.needs_graph() && self.graph.is_none() {
            out.push(Finding::new("graph", format!("{verb} needs a graph section")));
        }
        if self.coupling.is_none() {
            out.push(Finding::new("coupling", format!("{verb} needs a coupling section")));
        }
        if verb.needs_delay() && self.delay.is_none() {
            out.push(Finding::new("delay", format!("{verb} needs a delay section")));
        }
        if verb.needs_point() && matches!(self.state, None | Some(StateSpec::Random)) {
            out.push(Finding::new("state", format!("{verb} needs an explicit phase vector")));
        }
        if let (Some(g), Some(state)) = (graph, &self.state) {
            match state.resolve(g.n_vertices(), &mut ChaCha8Rng::seed_from_u64(0)) {
                Ok(phi) if phi.len() != g.n_vertices() => out.push(Finding::new(
                    "state",
                    format!("state has {} phases, graph has {} vertices", phi.len(), g.n_vertices()),
                )),
                Ok(_) => {}
                Err(e) => out.push(Finding::new("state", e.to_string())),
            }
        }
        if let Some(g) = graph {
            if verb.needs_connected() && !g.is_connected() {
                out.push(Finding::new("graph", "graph is not connected"));
            }
            let six = Graph::six_node_example();
            let is_six = g.n_vertices() == 6
                && g.n_edges() == six.n_edges()
                && six.edges().iter().all(|&(a, b)| g.edge_index(a, b).is_some());
            if verb == Verb::Surface && !is_six {
                out.push(Finding::new("surface", "the equilibrium family is defined on the six-node graph only"));
            }
        }
        if matches!(verb, Verb::Surface) && self.surface.grid < 2 {
            out.push(Finding::new("surface", format!("grid {} must be at least 2", self.surface.grid)));
        }
        let e = &self.experiment;
        if !(e.sync_threshold > 0.0 && e.sync_threshold <= 1.0) {
            out.push(Finding::new("experiment", format!("sync threshold {} outside (0, 1]", e.sync_threshold)));
        }
        match verb {
            Verb::Clusters => match e.n {
                None => out.push(Finding::new("experiment", "clusters needs experiment.n")),
                Some(n) if n == 0 || n % 3 != 0 => {
                    out.push(Finding::new("experiment", format!("N not a multiple of 3 for cluster experiments: {n}")))
                }
                _ => {}
            },
            Verb::Sweep => {
                if e.n_list.is_empty() || e.sigma_list.is_empty() {
                    out.push(Finding::new("experiment", "sweep needs experiment.n_list and experiment.sigma_list"));
                }
                for &n in &e.n_list {
                    if n == 0 || n % 3 != 0 {
                        out.push(Finding::new("experiment", format!("N not a multiple of 3 for cluster experiments: {n}")));
                    }
                }
                if e.sigma_list.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || !e.sigma_list.is_sorted() {
                    out.push(Finding::new("experiment", "sigma_list must be non-negative and ascending"));
                }
                if !matches!(self.delay, Some(DelaySpec::Gaussian { .. })) {
                    out.push(Finding::new("delay", "sweep needs a gaussian delay (its mu is kept, sigma is swept)"));
                }
            }
            Verb::Meanfield => {
                if e.n_list.is_empty() {
                    out.push(Finding::new("experiment", "meanfield needs experiment.n_list"));
                }
                if e.n_list.contains(&0) {
                    out.push(Finding::new("experiment", "population sizes must be positive"));
                }
            }
            _ => {}
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::InvalidParameter("missing seed".into()))
    }

    pub fn graph(&self, base: &Path) -> Result<Graph> {
        self.graph
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("missing graph section".into()))?
            .build(base)
    }

    pub fn coupling(&self, base: &Path) -> Result<CouplingFunction> {
        self.coupling
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("missing coupling section".into()))?
            .build(base)
    }

    pub fn delay(&self) -> Result<DelayDistribution> {
        self.delay
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("missing delay section".into()))?
            .build()
    }

    /// Per-edge lags: the explicit list when present, else one draw per edge
    /// from the delay law when present, else zero.
    pub fn edge_lags<R: Rng>(&self, graph: &Graph, rng: &mut R) -> Result<Vec<f64>> {
        if !self.lags.is_empty() {
            let mut directed = HashMap::new();
            for l in &self.lags {
                if l.i == 0 || l.j == 0 {
                    return Err(Error::InvalidParameter("lag labels are 1-indexed".into()));
                }
                directed.insert((l.i - 1, l.j - 1), l.psi);
            }
            return symmetric_edge_values(graph, &directed);
        }
        match &self.delay {
            Some(spec) => {
                let g = spec.build()?;
                Ok((0..graph.n_edges()).map(|_| g.sample(rng)).collect())
            }
            None => Ok(vec![0.0; graph.n_edges()]),
        }
    }

    /// Generator for the single-run verbs.
    pub fn rng(&self) -> Result<ChaCha8Rng> {
        Ok(ChaCha8Rng::seed_from_u64(self.seed()?))
    }
}

impl GraphSpec {
    pub fn build(&self, base: &Path) -> Result<Graph> {
        match self {
            GraphSpec::Complete { n } => Graph::complete(*n),
            GraphSpec::Ring { n } => Graph::ring(*n),
            GraphSpec::Path { n } => Graph::path(*n),
            GraphSpec::Circulant { n, offsets } => Graph::circulant(*n, offsets),
            GraphSpec::SixNode => Ok(Graph::six_node_example()),
            GraphSpec::Edges { n, edges } => {
                let pairs = edges
                    .iter()
                    .map(|&[a, b]| {
                        if a == 0 || b == 0 {
                            Err(Error::InvalidParameter(format!("edge ({a}, {b}): labels are 1-indexed")))
                        } else {
                            Ok((a - 1, b - 1))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Graph::new(*n, &pairs)
            }
            GraphSpec::File { path } => Graph::read(&base.join(path)),
        }
    }
}

impl CouplingSpec {
    pub fn build(&self, base: &Path) -> Result<CouplingFunction> {
        match self {
            CouplingSpec::Sine { k } => Ok(CouplingFunction::sine(*k)),
            CouplingSpec::Series { coeffs } => Ok(CouplingFunction::sine_series(coeffs.clone())),
            CouplingSpec::Fb { b, amp } => CouplingFunction::fb(*b, *amp),
            CouplingSpec::Tabulated { file } => {
                let text = std::fs::read_to_string(base.join(file))?;
                Ok(CouplingFunction::Tabulated(Tabulated::parse(&text)?))
            }
        }
    }
}

impl DelaySpec {
    pub fn build(&self) -> Result<DelayDistribution> {
        match self {
            DelaySpec::Point { psi0 } => DelayDistribution::point(*psi0),
            DelaySpec::Uniform { mu, w } => DelayDistribution::uniform(*mu, *w),
            DelaySpec::Gaussian { mu, sigma } => DelayDistribution::gaussian(*mu, *sigma),
            DelaySpec::Empirical { samples } => DelayDistribution::empirical(samples.clone()),
        }
    }
}

impl StateSpec {
    pub fn resolve<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            StateSpec::Random => Ok((0..n).map(|_| rng.random_range(0.0..TAU)).collect()),
            StateSpec::Phases { phi } => {
                if phi.iter().any(|p| !p.is_finite()) {
                    return Err(Error::InvalidParameter("phases must be finite".into()));
                }
                Ok(phi.clone())
            }
            StateSpec::Symmetric { m, block_sizes, shifts } => {
                symmetric_equilibrium(&IsotropySpec::new(*m, block_sizes.clone(), shifts.clone())?)
            }
            StateSpec::SixNode { lambda1, lambda2 } => Ok(six_node_family(*lambda1, *lambda2)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> PathBuf {
        PathBuf::from(".")
    }

    fn example() -> Value {
        json!({
            "version": 1,
            "seed": 7,
            "graph": {"kind": "six-node"},
            "coupling": {"kind": "sine", "K": 1.0},
            "state": {"kind": "six-node", "lambda1": 0.0, "lambda2": 0.0}
        })
    }

    #[test]
    fn well_formed_config_has_no_findings() {
        let c = Config::from_value(example()).unwrap();
        assert!(c.findings(Some(Verb::Stability), &base()).is_empty());
        assert!(c.findings(None, &base()).is_empty());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = example();
        v["grpah"] = json!({"kind": "ring", "n": 4});
        assert!(Config::from_value(v).is_err());
        let mut v = example();
        v["coupling"] = json!({"kind": "sine", "K": 1.0, "phase": 0.0});
        assert!(Config::from_value(v).is_err());
        let mut v = example();
        v["coupling"] = json!({"kind": "cosine", "K": 1.0});
        assert!(Config::from_value(v).is_err());
    }

    #[test]
    fn missing_seed_is_a_finding() {
        let mut v = example();
        v.as_object_mut().unwrap().remove("seed");
        let c = Config::from_value(v).unwrap();
        let f = c.findings(None, &base());
        assert_eq!(f.len(), 1);
        assert!(f[0].message.contains("missing seed"));
    }

    #[test]
    fn asymmetric_lag_is_a_finding() {
        let mut v = example();
        v["lags"] = json!([{"i": 1, "j": 2, "psi": 0.3}, {"i": 2, "j": 1, "psi": 0.4}]);
        let c = Config::from_value(v).unwrap();
        let f = c.findings(None, &base());
        assert!(f.iter().any(|f| f.message.contains("asymmetric lag")), "{f:?}");

        let mut v = example();
        v["lags"] = json!([{"i": 1, "j": 2, "psi": 0.3}, {"i": 2, "j": 1, "psi": 0.3}]);
        let c = Config::from_value(v).unwrap();
        assert!(c.findings(None, &base()).is_empty());
        let g = c.graph(&base()).unwrap();
        let lags = c.edge_lags(&g, &mut c.rng().unwrap()).unwrap();
        assert_eq!(lags[g.edge_index(0, 1).unwrap()], 0.3);
        assert_eq!(lags.iter().filter(|&&l| l != 0.0).count(), 1);
    }

    #[test]
    fn fb_width_out_of_range_is_a_finding() {
        for b in [PI, 0.0, 4.0] {
            let mut v = example();
            v["coupling"] = json!({"kind": "fb", "b": b});
            let c = Config::from_value(v).unwrap();
            let f = c.findings(None, &base());
            assert!(f.iter().any(|f| f.message.contains("b outside (0,π)")), "{f:?}");
        }
    }

    #[test]
    fn cluster_population_must_be_a_multiple_of_three() {
        let v = json!({
            "version": 1, "seed": 1,
            "coupling": {"kind": "series", "coeffs": [1.0, 0.0, 0.5]},
            "delay": {"kind": "gaussian", "mu": std::f64::consts::TAU, "sigma": 0.3},
            "experiment": {"n": 10}
        });
        let c = Config::from_value(v).unwrap();
        let f = c.findings(Some(Verb::Clusters), &base());
        assert!(f.iter().any(|f| f.message.contains("N not a multiple of 3")), "{f:?}");
        assert!(c.findings(Some(Verb::Meanfield), &base()).iter().any(|f| f.message.contains("n_list")));
    }

    #[test]
    fn disconnected_graph_blocks_cut_scan() {
        let mut v = example();
        v["graph"] = json!({"kind": "edges", "n": 4, "edges": [[1, 2], [3, 4]]});
        v["state"] = json!({"kind": "phases", "phi": [0.0, 1.0, 2.0, 3.0]});
        let c = Config::from_value(v).unwrap();
        let f = c.findings(Some(Verb::CutScan), &base());
        assert!(f.iter().any(|f| f.message.contains("not connected")), "{f:?}");
        assert!(c.findings(Some(Verb::Stability), &base()).is_empty());
    }

    #[test]
    fn overrides_edit_nested_keys() {
        let mut v = example();
        apply_overrides(
            &mut v,
            &["experiment.trials=5".into(), "coupling.K=-2.5".into(), "graph.kind=ring".into(), "graph.n=5".into()],
        )
        .unwrap();
        let c = Config::from_value(v).unwrap();
        assert_eq!(c.experiment.trials, 5);
        assert_eq!(c.coupling, Some(CouplingSpec::Sine { k: -2.5 }));
        assert_eq!(c.graph, Some(GraphSpec::Ring { n: 5 }));

        let mut v = example();
        apply_overrides(&mut v, &["experimnt.trials=5".into()]).unwrap();
        assert!(Config::from_value(v).is_err());
        assert!(apply_overrides(&mut example(), &["seed".into()]).is_err());
        assert!(apply_overrides(&mut example(), &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn states_resolve() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = StateSpec::Symmetric { m: 3, block_sizes: vec![2], shifts: vec![0.0] };
        assert_eq!(s.resolve(6, &mut rng).unwrap().len(), 6);
        let r = StateSpec::Random.resolve(5, &mut rng).unwrap();
        assert!(r.iter().all(|p| (0.0..TAU).contains(p)));
        assert!(StateSpec::Phases { phi: vec![f64::NAN] }.resolve(1, &mut rng).is_err());
    }
}
