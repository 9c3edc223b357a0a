//! Linear stability of phase-locked states: the linearization
//! `A = −ε B diag(f′) Bᵀ`, a Jacobi eigensolver, cut sums as instability
//! certificates, and the analytic checks for symmetric equilibria on
//! complete graphs.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingFunction;
use crate::dynamics::PhaseModel;
use crate::equilibria::{symmetric_equilibrium, IsotropySpec};
use crate::error::{Error, Result};
use crate::graph::{Graph, Partition, EXHAUSTIVE_LIMIT};

#[derive(Debug, Clone)]
pub struct Linearization {
    pub matrix: DMatrix<f64>,
    /// `f′_e` at the (lagged) edge difference `φ_head − φ_tail − ψ_e`.
    pub edge_weights: Vec<f64>,
    graph: Graph,
    epsilon: f64,
    symmetric: bool,
}

pub fn linearize(model: &PhaseModel, phi: &[f64]) -> Result<Linearization> {
    let n = model.n();
    if phi.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: phi.len() });
    }
    let graph = model.graph().clone();
    let weights: Vec<f64> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(t, h))| model.coupling(e).deriv(phi[h] - phi[t] - model.lags()[e]))
        .collect();
    Ok(Linearization::from_weights(graph, weights, model.epsilon(), model.qualifies_for_potential()))
}

impl Linearization {
    fn from_weights(graph: Graph, edge_weights: Vec<f64>, epsilon: f64, symmetric: bool) -> Self {
        let n = graph.n_vertices();
        let mut a = DMatrix::zeros(n, n);
        for (&(t, h), &w) in graph.edges().iter().zip(&edge_weights) {
            let v = epsilon * w;
            a[(t, t)] -= v;
            a[(h, h)] -= v;
            a[(t, h)] += v;
            a[(h, t)] += v;
        }
        Linearization { matrix: a, edge_weights, graph, epsilon, symmetric }
    }

    /// Linearization with the given per-edge weights, treated as a
    /// symmetric zero-lag model.
    pub fn with_weights(graph: Graph, edge_weights: Vec<f64>, epsilon: f64) -> Result<Self> {
        if edge_weights.len() != graph.n_edges() {
            return Err(Error::LengthMismatch { expected: graph.n_edges(), got: edge_weights.len() });
        }
        Ok(Linearization::from_weights(graph, edge_weights, epsilon, true))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_symmetric_model(&self) -> bool {
        self.symmetric
    }

    pub fn n(&self) -> usize {
        self.graph.n_vertices()
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns ascending eigenvalues and the matching eigenvectors as columns.
pub fn symmetric_eigen(m: &DMatrix<f64>, tol: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidParameter(format!("matrix is {}×{}", n, m.ncols())));
    }
    let scale = m.amax().max(1.0);
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let off = |a: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                if s == 0.0 {
                    continue;
                }
                rotated = true;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

pub fn symmetric_eigenvalues(m: &DMatrix<f64>, tol: f64) -> Result<Vec<f64>> {
    symmetric_eigen(m, tol).map(|(values, _)| values)
}

/// Orthonormal basis of the complement of the all-ones vector, as columns.
fn helmert_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutCertificate {
    pub partition: Partition,
    pub plus: Vec<usize>,
    pub cut_value: f64,
}

impl CutCertificate {
    fn new(partition: Partition, cut_value: f64) -> Self {
        CutCertificate { plus: partition.plus(), partition, cut_value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub class: StabilityClass,
    pub max_nonflow_eigenvalue: f64,
    pub nonflow_eigenvalues: Vec<f64>,
    pub certificate: Option<CutCertificate>,
}

/// Eigenvalues of `A` restricted to the complement of the flow direction.
pub fn nonflow_eigenvalues(lin: &Linearization) -> Result<Vec<f64>> {
    if !lin.symmetric {
        return Err(Error::PreconditionFailed(
            "classification needs a zero-lag model with odd couplings".into(),
        ));
    }
    let q = helmert_basis(lin.n());
    let reduced = q.transpose() * &lin.matrix * &q;
    symmetric_eigenvalues(&reduced, 1e-14 * lin.matrix.amax().max(1e-300))
}

/// Default width of the band treated as zero: `1e−9·‖A‖∞`.
pub fn default_band(lin: &Linearization) -> f64 {
    let inf_norm = lin
        .matrix
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    1e-9 * inf_norm
}

pub fn classify(lin: &Linearization) -> Result<StabilityVerdict> {
    classify_with(lin, default_band(lin))
}

/// Stable / Unstable / Marginal from the nonflow spectrum, with `tol` the
/// half-width of the zero band. A negative minimum cut found by the scan is
/// attached as a certificate (graphs of at most 64 vertices).
pub fn classify_with(lin: &Linearization, tol: f64) -> Result<StabilityVerdict> {
    let values = nonflow_eigenvalues(lin)?;
    let max = values.last().copied().unwrap_or(0.0);
    let class = if max > tol {
        StabilityClass::Unstable
    } else if max < -tol {
        StabilityClass::Stable
    } else {
        StabilityClass::Marginal
    };
    let certificate = if lin.n() < 2 || lin.n() > 64 {
        None
    } else {
        let mode = if lin.n() <= 16 { ScanMode::Exhaustive } else { ScanMode::Heuristic { restarts: 32, seed: 0 } };
        let (p, v) = min_cut_scan(lin, mode)?;
        (v < 0.0).then(|| CutCertificate::new(p, v))
    };
    Ok(StabilityVerdict { class, max_nonflow_eigenvalue: max, nonflow_eigenvalues: values, certificate })
}

/// Sum of edge weights over the edges crossing `p`.
pub fn cut_sum(lin: &Linearization, p: &Partition) -> Result<f64> {
    Ok(lin.graph.cut_edges(p)?.into_iter().map(|(e, _)| lin.edge_weights[e]).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Exhaustive,
    Heuristic { restarts: usize, seed: u64 },
}

/// Incident `(neighbour, weight)` lists.
fn weighted_adjacency(lin: &Linearization) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); lin.n()];
    for (&(t, h), &w) in lin.graph.edges().iter().zip(&lin.edge_weights) {
        adj[t].push((h, w));
        adj[h].push((t, w));
    }
    adj
}

fn cut_of_mask(adj: &[Vec<(usize, f64)>], mask: u64) -> f64 {
    let mut s = 0.0;
    for (u, list) in adj.iter().enumerate() {
        if mask >> u & 1 == 1 {
            for &(v, w) in list {
                if mask >> v & 1 == 0 {
                    s += w;
                }
            }
        }
    }
    s
}

/// Change of the cut value when vertex `v` switches side.
fn flip_delta(adj: &[Vec<(usize, f64)>], mask: u64, v: usize) -> f64 {
    let side = mask >> v & 1;
    adj[v]
        .iter()
        .map(|&(u, w)| if mask >> u & 1 == side { w } else { -w })
        .sum()
}

const CHUNK_BITS: u32 = 14;

/// Minimum cut value over vertex bipartitions and a partition attaining it.
/// The exhaustive scan walks the bipartitions (vertex 0 fixed in `V⁻`) in
/// Gray-code order over fixed chunks; the heuristic runs seeded
/// best-improvement single-vertex flips from random starts.
pub fn min_cut_scan(lin: &Linearization, mode: ScanMode) -> Result<(Partition, f64)> {
    let n = lin.n();
    if n < 2 {
        return Err(Error::EmptySide);
    }
    if n > 64 {
        return Err(Error::TooLarge { n, limit: 64 });
    }
    let adj = weighted_adjacency(lin);
    let mask = match mode {
        ScanMode::Exhaustive => {
            if n > EXHAUSTIVE_LIMIT {
                return Err(Error::TooLarge { n, limit: EXHAUSTIVE_LIMIT });
            }
            exhaustive_min(&adj, n)
        }
        ScanMode::Heuristic { restarts, seed } => heuristic_min(&adj, n, restarts.max(1), seed),
    };
    let p = Partition::new(n, mask).normalized();
    Ok((p, cut_of_mask(&adj, p.mask)))
}

fn exhaustive_min(adj: &[Vec<(usize, f64)>], n: usize) -> u64 {
    let total: u64 = 1 << (n - 1);
    let chunk = 1u64 << CHUNK_BITS;
    let chunks = total.div_ceil(chunk);
    let gray = |i: u64| (i ^ (i >> 1)) << 1;
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = (c * chunk).max(1);
            let end = ((c + 1) * chunk).min(total);
            let mut mask = gray(start);
            let mut value = cut_of_mask(adj, mask);
            let mut best = (value, mask);
            for i in start + 1..end {
                let v = i.trailing_zeros() as usize + 1;
                value += flip_delta(adj, mask, v);
                mask ^= 1 << v;
                if value < best.0 || (value == best.0 && mask < best.1) {
                    best = (value, mask);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    best.1
}

fn heuristic_min(adj: &[Vec<(usize, f64)>], n: usize, restarts: usize, seed: u64) -> u64 {
    let full: u64 = if n == 64 { u64::MAX } else { (1 << n) - 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (f64::INFINITY, 0u64);
    for _ in 0..restarts {
        let mut mask = loop {
            let m = rng.random::<u64>() & full;
            if m != 0 && m != full {
                break m;
            }
        };
        let mut value = cut_of_mask(adj, mask);
        loop {
            let mut step = (0.0, usize::MAX);
            for v in 0..n {
                let next = mask ^ (1 << v);
                if next == 0 || next == full {
                    continue;
                }
                let d = flip_delta(adj, mask, v);
                if d < step.0 - 1e-15 * value.abs().max(1.0) {
                    step = (d, v);
                }
            }
            if step.1 == usize::MAX {
                break;
            }
            mask ^= 1 << step.1;
            value += step.0;
        }
        let value = cut_of_mask(adj, mask);
        let norm = if mask & 1 == 1 { full & !mask } else { mask };
        if value < best.0 || (value == best.0 && norm < best.1) {
            best = (value, norm);
        }
    }
    best.1
}

/// A bipartition whose cut edges all carry negative weight, if one exists:
/// one connected component of the subgraph of non-negative edges.
pub fn all_negative_cut(lin: &Linearization) -> Option<Partition> {
    let n = lin.n();
    let mut comp = vec![usize::MAX; n];
    let mut stack = vec![0];
    comp[0] = 0;
    while let Some(u) = stack.pop() {
        for &(v, e) in lin.graph.neighbors(u) {
            if lin.edge_weights[e] >= 0.0 && comp[v] == usize::MAX {
                comp[v] = 0;
                stack.push(v);
            }
        }
    }
    let plus: Vec<usize> = (0..n).filter(|&v| comp[v] == usize::MAX).collect();
    if plus.is_empty() {
        None
    } else {
        Partition::from_plus(n, &plus).ok()
    }
}

/// Phases of the two-parameter equilibrium family of the six-node example,
/// `[0, π/3+λ₁, 2π/3+λ₂, π, 4π/3+λ₁, 5π/3+λ₂]`.
pub fn six_node_family(l1: f64, l2: f64) -> Vec<f64> {
    vec![0.0, PI / 3.0 + l1, 2.0 * PI / 3.0 + l2, PI, 4.0 * PI / 3.0 + l1, 5.0 * PI / 3.0 + l2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub lambdas: Vec<f64>,
    /// `values[i][j]` at `(λ₁, λ₂) = (lambdas[i], lambdas[j])`.
    pub values: Vec<Vec<f64>>,
}

impl Surface {
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV `lambda1,lambda2,value`, one row per grid cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda1,lambda2,value\n");
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", self.lambdas[i], self.lambdas[j], v);
            }
        }
        out
    }
}

/// Exhaustive minimum cut of `model` linearized at `family(λ₁, λ₂)` for
/// `λ_i = −π + 2πi/(G−1)`, `i = 0..G−1`.
pub fn min_cut_surface<F>(model: &PhaseModel, family: F, grid: usize) -> Result<Surface>
where
    F: Fn(f64, f64) -> Vec<f64> + Sync,
{
    if grid < 2 {
        return Err(Error::InvalidParameter(format!("surface grid {grid} must be at least 2")));
    }
    let lambdas: Vec<f64> = (0..grid).map(|i| -PI + TAU * i as f64 / (grid - 1) as f64).collect();
    let values = lambdas
        .par_iter()
        .map(|&l1| {
            lambdas
                .iter()
                .map(|&l2| {
                    let lin = linearize(model, &family(l1, l2))?;
                    Ok(min_cut_scan(&lin, ScanMode::Exhaustive)?.1)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Surface { lambdas, values })
}

/// `g_m(δ) = Σ_{j=0}^{m−1} f(2πj/m + δ)`.
pub fn g_m(f: &CouplingFunction, m: usize, delta: f64) -> f64 {
    (0..m).map(|j| f.eval(TAU * j as f64 / m as f64 + delta)).sum()
}

pub fn g_m_deriv(f: &CouplingFunction, m: usize, delta: f64) -> f64 {
    (0..m).map(|j| f.deriv(TAU * j as f64 / m as f64 + delta)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub odd: bool,
    pub even_about_half_pi: bool,
    pub concave_on_0_pi: bool,
    pub fprime_concave_on_half_band: bool,
    /// `f′(π/m) > ½f′(0)` for every `m ∈ 4..=64`; only evaluated when both
    /// concavity flags hold.
    pub half_slope_bound: Option<bool>,
}

const STRUCTURE_GRID: usize = 512;

/// Grid-based shape checks; concavity from second differences.
pub fn check_structure(f: &CouplingFunction) -> StructureReport {
    let n = STRUCTURE_GRID;
    let scale = (0..=n)
        .map(|i| f.eval(TAU * i as f64 / n as f64).abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let tol = 1e-12 * scale;
    let pts = |a: f64, b: f64| (0..=n).map(move |i| a + (b - a) * i as f64 / n as f64);
    let odd = pts(0.0, PI).all(|t| (f.eval(t) + f.eval(-t)).abs() <= tol);
    let even_about_half_pi = pts(0.0, FRAC_PI_2).all(|x| (f.eval(FRAC_PI_2 + x) - f.eval(FRAC_PI_2 - x)).abs() <= tol);
    let concave = |g: &dyn Fn(f64) -> f64, a: f64, b: f64| {
        let h = (b - a) / n as f64;
        (1..n).all(|i| {
            let x = a + i as f64 * h;
            g(x - h) - 2.0 * g(x) + g(x + h) <= tol
        })
    };
    let concave_on_0_pi = concave(&|x| f.eval(x), 0.0, PI);
    let fprime_concave_on_half_band = concave(&|x| f.deriv(x), -FRAC_PI_2, FRAC_PI_2);
    let half_slope_bound = (concave_on_0_pi && fprime_concave_on_half_band)
        .then(|| (4..=64).all(|m| f.deriv(PI / m as f64) > 0.5 * f.deriv(0.0)));
    StructureReport { odd, even_about_half_pi, concave_on_0_pi, fprime_concave_on_half_band, half_slope_bound }
}

/// Whether `f′ > 0` exactly on `(−π/2, π/2)` mod 2π, to grid resolution.
fn in_half_pi_family(f: &CouplingFunction) -> bool {
    let n = STRUCTURE_GRID;
    (1..n).all(|i| {
        let x = PI * i as f64 / n as f64;
        let d = f.deriv(x);
        if x < FRAC_PI_2 - 1e-9 {
            d > 0.0
        } else if x > FRAC_PI_2 + 1e-9 {
            d < 0.0
        } else {
            true
        }
    })
}

#[derive(Debug, Clone)]
pub struct SymmetricFixture {
    pub phi: Vec<f64>,
    pub linearization: Linearization,
}

fn complete_fixture(spec: &IsotropySpec, f: &CouplingFunction) -> Result<SymmetricFixture> {
    let phi = symmetric_equilibrium(spec)?;
    let model = PhaseModel::new(Graph::complete(spec.n())?, f.clone(), 1.0)?;
    let linearization = linearize(&model, &phi)?;
    Ok(SymmetricFixture { phi, linearization })
}

#[derive(Debug, Clone)]
pub struct EvenCertificate {
    pub partition: Partition,
    pub cut_value: f64,
    /// Size of the isolated block.
    pub k_iso: usize,
    pub fixture: SymmetricFixture,
}

/// Cut isolating block 0 of constellation 0 for an even-`m` symmetric
/// equilibrium on the complete graph (unit coupling strength).
pub fn even_m_certificate(spec: &IsotropySpec, f: &CouplingFunction) -> Result<EvenCertificate> {
    spec.validate()?;
    if !spec.m.is_multiple_of(2) {
        return Err(Error::PreconditionFailed(format!("m = {} is not even", spec.m)));
    }
    let s = check_structure(f);
    if !(s.odd && s.even_about_half_pi) {
        return Err(Error::PreconditionFailed("f must be odd and even about π/2".into()));
    }
    if !in_half_pi_family(f) {
        return Err(Error::PreconditionFailed("f′ must be positive exactly on (−π/2, π/2)".into()));
    }
    let fixture = complete_fixture(spec, f)?;
    let block: Vec<usize> = spec.block(0, 0).collect();
    let n = spec.n();
    if block.len() == n {
        return Err(Error::EmptySide);
    }
    let partition = Partition::from_plus(n, &block)?;
    let cut_value = cut_sum(&fixture.linearization, &partition)?;
    Ok(EvenCertificate { partition, cut_value, k_iso: spec.block_sizes[0], fixture })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBound {
    pub l1: usize,
    pub l2: usize,
    pub delta: f64,
    /// `2g′_m(δ) − f′(δ + 2π/m) − 2f′(δ) − f′(δ − 2π/m)`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddBoundReport {
    pub pairs: Vec<PairBound>,
    /// Largest pair expression over a grid on `δ ∈ [0, 2π/m]`.
    pub grid_max: f64,
    /// `f′(0) − 2f′(π/m)`
    pub terminal_bound: f64,
}

#[derive(Debug, Clone)]
pub struct OddCertificate {
    pub partition: Partition,
    pub cut_value: f64,
    pub bounds: OddBoundReport,
    pub fixture: SymmetricFixture,
}

/// Per-constellation-pair cut expression for odd `m`.
pub fn pair_expression(f: &CouplingFunction, m: usize, delta: f64) -> f64 {
    let step = TAU / m as f64;
    2.0 * g_m_deriv(f, m, delta) - f.deriv(delta + step) - 2.0 * f.deriv(delta) - f.deriv(delta - step)
}

/// Cut separating two consecutive blocks of every constellation from the
/// rest, for an odd-`m` (`m ≥ 7`) symmetric equilibrium on the complete
/// graph, with the per-pair bound report.
pub fn odd_m_certificate(spec: &IsotropySpec, f: &CouplingFunction) -> Result<OddCertificate> {
    spec.validate()?;
    let m = spec.m;
    if m % 2 != 1 || m < 7 {
        return Err(Error::PreconditionFailed(format!("m = {m} must be odd and at least 7")));
    }
    let s = check_structure(f);
    if !(s.odd && s.even_about_half_pi && s.concave_on_0_pi && s.fprime_concave_on_half_band) {
        return Err(Error::PreconditionFailed(
            "f must be odd, even about π/2, concave on [0,π] with f′ concave on [−π/2,π/2]".into(),
        ));
    }
    if !in_half_pi_family(f) {
        return Err(Error::PreconditionFailed("f′ must be positive exactly on (−π/2, π/2)".into()));
    }
    let fixture = complete_fixture(spec, f)?;
    let inside: Vec<usize> = (0..spec.block_sizes.len())
        .flat_map(|l| spec.block(l, 0).chain(spec.block(l, 1)))
        .collect();
    let partition = Partition::from_plus(spec.n(), &inside)?;
    let cut_value = cut_sum(&fixture.linearization, &partition)?;
    let mut pairs = Vec::new();
    for (l1, &d1) in spec.shifts.iter().enumerate() {
        for (l2, &d2) in spec.shifts.iter().enumerate() {
            let delta = d2 - d1;
            pairs.push(PairBound { l1, l2, delta, value: pair_expression(f, m, delta) });
        }
    }
    let grid_max = (0..=256)
        .map(|i| pair_expression(f, m, TAU / m as f64 * i as f64 / 256.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let terminal_bound = f.deriv(0.0) - 2.0 * f.deriv(PI / m as f64);
    Ok(OddCertificate {
        partition,
        cut_value,
        bounds: OddBoundReport { pairs, grid_max, terminal_bound },
        fixture,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_node_fixture() -> (PhaseModel, Vec<f64>) {
        let m = PhaseModel::new(Graph::six_node_example(), CouplingFunction::sine(1.0), 1.0).unwrap();
        (m, six_node_family(0.0, 0.0))
    }

    fn series() -> CouplingFunction {
        CouplingFunction::sine_series(vec![1.0, 0.0, -0.15])
    }

    #[test]
    fn two_node_linearization() {
        let m = PhaseModel::new(Graph::path(2).unwrap(), CouplingFunction::sine(1.0), 1.0).unwrap();
        let lin = linearize(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(lin.matrix, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
        let v = symmetric_eigenvalues(&lin.matrix, 1e-14).unwrap();
        assert!((v[0] + 2.0).abs() < 1e-14 && v[1].abs() < 1e-14);

        let anti = linearize(&m, &[0.0, PI]).unwrap();
        let verdict = classify(&anti).unwrap();
        assert_eq!(verdict.class, StabilityClass::Unstable);
        assert!((verdict.max_nonflow_eigenvalue - 2.0).abs() < 1e-12);
    }

    #[test]
    fn six_node_weights_and_cuts() {
        let (m, phi) = six_node_fixture();
        let lin = linearize(&m, &phi).unwrap();
        for w in &lin.edge_weights {
            assert!((w.abs() - 0.5).abs() < 1e-12);
        }
        for v in 0..6 {
            let p = Partition::from_plus(6, &[v]).unwrap();
            assert!(cut_sum(&lin, &p).unwrap().abs() < 1e-12);
        }
        let c2 = Partition::from_plus(6, &[2, 3, 4]).unwrap();
        assert!((cut_sum(&lin, &c2).unwrap() + 1.0).abs() < 1e-12);
        let (_, best) = min_cut_scan(&lin, ScanMode::Exhaustive).unwrap();
        assert!(best <= -1.0 + 1e-12);
        let row_sums = &lin.matrix * nalgebra::DVector::from_element(6, 1.0);
        assert!(row_sums.amax() < 1e-15);
        let verdict = classify(&lin).unwrap();
        assert_eq!(verdict.class, StabilityClass::Unstable);
        assert!(verdict.certificate.unwrap().cut_value < 0.0);
    }

    #[test]
    fn quadratic_form_identity() {
        let (m, _) = six_node_fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let eps = 0.3;
        let m = PhaseModel::new(m.graph().clone(), CouplingFunction::fb(1.0, 1.0).unwrap(), eps).unwrap();
        for _ in 0..50 {
            let phi: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..TAU)).collect();
            let lin = linearize(&m, &phi).unwrap();
            let mask = rng.random_range(1u64..63);
            let p = Partition::new(6, mask);
            let x = nalgebra::DVector::from_vec(p.indicator());
            let q = (x.transpose() * &lin.matrix * &x)[(0, 0)];
            assert!((cut_sum(&lin, &p).unwrap() + q / eps).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_examples() {
        let v = symmetric_eigenvalues(&DMatrix::identity(3, 3), 1e-14).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        let s = &r + r.transpose();
        let (vals, vecs) = symmetric_eigen(&s, 1e-14).unwrap();
        let rebuilt = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone())) * vecs.transpose();
        assert!((&rebuilt - &s).amax() < 1e-10);
        let again = symmetric_eigenvalues(&rebuilt, 1e-14).unwrap();
        assert!(vals.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-8));
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));

        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(symmetric_eigenvalues(&bad, 1e-12), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn complete_graph_in_phase_is_stable() {
        let eps = 0.5;
        let m = PhaseModel::new(Graph::complete(4).unwrap(), CouplingFunction::sine(1.0), eps).unwrap();
        let lin = linearize(&m, &[0.0; 4]).unwrap();
        let v = classify(&lin).unwrap();
        assert_eq!(v.class, StabilityClass::Stable);
        assert!(v.nonflow_eigenvalues.iter().all(|x| (x + eps * 4.0).abs() < 1e-12));
        assert!(v.certificate.is_none());
    }

    #[test]
    fn lagged_models_are_not_classified() {
        let m = PhaseModel::with_lags(Graph::path(2).unwrap(), CouplingFunction::sine(1.0), vec![0.3], 1.0).unwrap();
        let lin = linearize(&m, &[0.0, 0.0]).unwrap();
        assert!((lin.edge_weights[0] - 0.3f64.cos()).abs() < 1e-15);
        assert!(matches!(classify(&lin), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn in_phase_min_cut_is_edge_connectivity() {
        let m = PhaseModel::new(Graph::ring(7).unwrap(), CouplingFunction::sine(2.0), 1.0).unwrap();
        let lin = linearize(&m, &[0.0; 7]).unwrap();
        let (_, v) = min_cut_scan(&lin, ScanMode::Exhaustive).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scan_errors() {
        let g = Graph::ring(26).unwrap();
        let lin = Linearization::with_weights(g.clone(), vec![1.0; 26], 1.0).unwrap();
        assert!(matches!(min_cut_scan(&lin, ScanMode::Exhaustive), Err(Error::TooLarge { .. })));
        assert!(min_cut_scan(&lin, ScanMode::Heuristic { restarts: 4, seed: 1 }).is_ok());
    }

    #[test]
    fn heuristic_matches_exhaustive_mostly() {
        let g = Graph::complete(8).unwrap();
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let w: Vec<f64> = (0..g.n_edges()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lin = Linearization::with_weights(g.clone(), w, 1.0).unwrap();
            let (_, ex) = min_cut_scan(&lin, ScanMode::Exhaustive).unwrap();
            let (p, he) = min_cut_scan(&lin, ScanMode::Heuristic { restarts: 32, seed }).unwrap();
            assert!(he >= ex - 1e-12);
            assert!((cut_sum(&lin, &p).unwrap() - he).abs() < 1e-12);
            if (he - ex).abs() < 1e-12 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn exhaustive_is_thread_independent() {
        let g = Graph::complete(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let w: Vec<f64> = (0..g.n_edges()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lin = Linearization::with_weights(g, w, 1.0).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| min_cut_scan(&lin, ScanMode::Exhaustive).unwrap());
        let b = four.install(|| min_cut_scan(&lin, ScanMode::Exhaustive).unwrap());
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        // brute-force oracle
        let adj = weighted_adjacency(&lin);
        let brute = (1u64..1 << 15).map(|m| cut_of_mask(&adj, m << 1)).fold(f64::INFINITY, f64::min);
        assert!((a.1 - brute).abs() < 1e-9);
    }

    #[test]
    fn surface_small_grid() {
        let (m, _) = six_node_fixture();
        let s = min_cut_surface(&m, six_node_family, 5).unwrap();
        assert_eq!(s.values.len(), 5);
        assert!(s.max() < 0.0);
        let centre = s.values[2][2];
        assert!(centre <= -1.0 + 1e-12);
        for i in 0..5 {
            assert!((s.values[0][i] - s.values[4][i]).abs() < 1e-10);
            assert!((s.values[i][0] - s.values[i][4]).abs() < 1e-10);
        }
        assert_eq!(s.to_csv().lines().count(), 26);
    }

    #[test]
    fn g_m_identities() {
        let sine = CouplingFunction::sine(1.0);
        for m in 2..10 {
            for d in [0.0, 0.3, 2.0] {
                assert!(g_m(&sine, m, d).abs() < 1e-12);
            }
        }
        let f = series();
        for m in [2, 4, 6, 8] {
            for i in 0..256 {
                let d = TAU * i as f64 / 256.0;
                assert!(g_m(&f, m, d).abs() < 1e-12);
            }
        }
        let max3 = (0..256).map(|i| g_m(&f, 3, TAU * i as f64 / 256.0).abs()).fold(0.0, f64::max);
        assert!((max3 - 0.45).abs() < 1e-3);
    }

    #[test]
    fn structure_flags() {
        let s = check_structure(&CouplingFunction::sine(1.0));
        assert!(s.odd && s.even_about_half_pi && s.concave_on_0_pi && s.fprime_concave_on_half_band);
        assert_eq!(s.half_slope_bound, Some(true));
        assert!(CouplingFunction::sine(1.0).deriv(PI / 4.0) >= 0.5);
        let fb = check_structure(&CouplingFunction::fb(PI / 4.0, 1.0).unwrap());
        assert!(fb.odd && !fb.even_about_half_pi);
        let s = check_structure(&series());
        assert!(s.odd && s.even_about_half_pi);
    }

    #[test]
    fn even_m_examples() {
        let sine = CouplingFunction::sine(1.0);
        let c = even_m_certificate(&IsotropySpec::single(2, 3).unwrap(), &sine).unwrap();
        assert!((c.cut_value + 9.0).abs() < 1e-9);
        let c = even_m_certificate(&IsotropySpec::new(4, vec![1, 1], vec![0.0, PI / 5.0]).unwrap(), &sine).unwrap();
        assert!((c.cut_value + 1.0).abs() < 1e-9);
        assert_eq!(classify(&c.fixture.linearization).unwrap().class, StabilityClass::Unstable);
        assert!(even_m_certificate(&IsotropySpec::single(3, 1).unwrap(), &sine).is_err());
        let fb = CouplingFunction::fb(1.0, 1.0).unwrap();
        assert!(even_m_certificate(&IsotropySpec::single(2, 1).unwrap(), &fb).is_err());
    }

    #[test]
    fn odd_m_examples() {
        let sine = CouplingFunction::sine(1.0);
        let c = odd_m_certificate(&IsotropySpec::single(7, 1).unwrap(), &sine).unwrap();
        assert!(c.cut_value < 0.0);
        assert!(c.bounds.terminal_bound < 0.0);
        assert!((c.bounds.terminal_bound - (1.0 - 2.0 * (PI / 7.0).cos())).abs() < 1e-15);
        assert_eq!(classify(&c.fixture.linearization).unwrap().class, StabilityClass::Unstable);

        let spec = IsotropySpec::new(9, vec![1, 2], vec![0.0, PI / 9.0]).unwrap();
        let c = odd_m_certificate(&spec, &sine).unwrap();
        assert!(c.bounds.grid_max < 0.0);
        assert!(c.bounds.pairs.iter().all(|p| p.value < 0.0));
        let total: f64 = c
            .bounds
            .pairs
            .iter()
            .map(|p| (spec.block_sizes[p.l1] * spec.block_sizes[p.l2]) as f64 * p.value)
            .sum();
        assert!((total - c.cut_value).abs() < 1e-9);
        assert!(odd_m_certificate(&IsotropySpec::single(5, 1).unwrap(), &sine).is_err());
    }

    #[test]
    fn negative_cut_search() {
        let (m, phi) = six_node_fixture();
        let lin = linearize(&m, &phi).unwrap();
        // +½ edges connect the offset-1 pairs into one component
        assert!(all_negative_cut(&lin).is_none());
        let lin = Linearization::with_weights(Graph::path(3).unwrap(), vec![1.0, -0.5], 1.0).unwrap();
        let p = all_negative_cut(&lin).unwrap();
        assert_eq!(p.plus(), vec![2]);
    }
}
