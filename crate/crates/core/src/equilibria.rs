//! Phase-locked states: residual, Newton solver, symmetric constructions on
//! complete graphs, arc diameter and canonical representatives.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::PhaseModel;
use crate::error::{Error, Result};
use crate::numerics::{circular_distance, wrap};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub phi: Vec<f64>,
    pub omega_star: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `max_i |ω* − ε Σ_j f_ij(φ_j − φ_i − ψ_ij)|`.
pub fn residual(model: &PhaseModel, phi: &[f64], omega_star: f64) -> f64 {
    model
        .phase_rhs(phi)
        .iter()
        .map(|r| (omega_star - r).abs())
        .fold(0.0, f64::max)
}

/// Jacobian of the right-hand side with respect to all phases.
pub fn rhs_jacobian(model: &PhaseModel, phi: &[f64]) -> DMatrix<f64> {
    let n = model.n();
    let eps = model.epsilon();
    let mut j = DMatrix::zeros(n, n);
    for (e, &(t, h)) in model.graph().edges().iter().enumerate() {
        let f = model.coupling(e);
        let lag = model.lags()[e];
        let d = phi[h] - phi[t];
        let a = eps * f.deriv(d - lag);
        let b = eps * f.deriv(-d - lag);
        j[(t, h)] += a;
        j[(t, t)] -= a;
        j[(h, t)] += b;
        j[(h, h)] -= b;
    }
    j
}

/// Unknowns are `φ_1..φ_{N−1}` with `φ_0 = 0`, plus `ω*` unless the model is
/// in potential form (then `ω* = 0` and equation 0 is redundant).
struct Chart<'a> {
    model: &'a PhaseModel,
    with_omega: bool,
}

impl Chart<'_> {
    fn phases(&self, x: &DVector<f64>) -> Vec<f64> {
        let n = self.model.n();
        let mut phi = vec![0.0; n];
        phi[1..n].copy_from_slice(&x.as_slice()[..n - 1]);
        phi
    }

    fn omega(&self, x: &DVector<f64>) -> f64 {
        if self.with_omega {
            x[self.model.n() - 1]
        } else {
            0.0
        }
    }

    fn equations(&self, x: &DVector<f64>) -> DVector<f64> {
        let rhs = self.model.phase_rhs(&self.phases(x));
        let w = self.omega(x);
        let skip = usize::from(!self.with_omega);
        DVector::from_iterator(rhs.len() - skip, rhs[skip..].iter().map(|r| r - w))
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.model.n();
        let full = rhs_jacobian(self.model, &self.phases(x));
        let skip = usize::from(!self.with_omega);
        let cols = n - 1 + usize::from(self.with_omega);
        let mut j = DMatrix::zeros(n - skip, cols);
        for r in skip..n {
            for c in 1..n {
                j[(r - skip, c - 1)] = full[(r, c)];
            }
            if self.with_omega {
                j[(r - skip, n - 1)] = -1.0;
            }
        }
        j
    }
}

/// Damped Newton on the phase-locking equations. Steps are least-squares
/// solutions, so non-isolated roots are approached along the normal
/// direction; a gradient step is taken when the line search fails.
pub fn find_equilibrium(model: &PhaseModel, phi0: &[f64], tol: f64) -> Result<EquilibriumReport> {
    find_equilibrium_with(model, phi0, tol, DEFAULT_MAX_ITER)
}

pub fn find_equilibrium_with(model: &PhaseModel, phi0: &[f64], tol: f64, max_iter: usize) -> Result<EquilibriumReport> {
    let n = model.n();
    if phi0.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: phi0.len() });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let chart = Chart { model, with_omega: !model.qualifies_for_potential() };
    let start = canonicalize(phi0);
    let mut x = DVector::from_iterator(
        n - 1 + usize::from(chart.with_omega),
        start[1..].iter().copied().chain(chart.with_omega.then(|| {
            let r = model.phase_rhs(&start);
            r.iter().sum::<f64>() / n as f64
        })),
    );
    let report = |x: &DVector<f64>, iterations: usize| {
        let phi = canonicalize(&chart.phases(x));
        let omega_star = chart.omega(x);
        let res = residual(model, &phi, omega_star);
        EquilibriumReport { phi, omega_star, residual: res, converged: res < tol, iterations }
    };
    if n == 1 {
        return Ok(report(&x, 0));
    }
    for it in 0..max_iter {
        let r = chart.equations(&x);
        let current = report(&x, it);
        if current.converged {
            return Ok(current);
        }
        let norm2 = r.norm_squared();
        let j = chart.jacobian(&x);
        let accepted = match j.clone().svd(true, true).solve(&(-&r), 1e-12 * j.amax().max(1e-300)) {
            Ok(step) if step.iter().all(|v| v.is_finite()) => line_search(&chart, &x, &step, norm2, 1.0),
            _ => None,
        };
        x = match accepted {
            Some(next) => next,
            None => {
                let grad = -(j.transpose() * &r);
                let scale = 1.0 / j.amax().max(1e-300).powi(2);
                match line_search(&chart, &x, &(grad * scale), norm2, 1.0) {
                    Some(next) => next,
                    None => return Ok(report(&x, it + 1)),
                }
            }
        };
    }
    Ok(report(&x, max_iter))
}

fn line_search(chart: &Chart<'_>, x: &DVector<f64>, step: &DVector<f64>, norm2: f64, mut alpha: f64) -> Option<DVector<f64>> {
    for _ in 0..40 {
        let trial = x + step * alpha;
        let r2 = chart.equations(&trial).norm_squared();
        if r2.is_finite() && r2 <= (1.0 - 1e-4 * alpha) * norm2 {
            return Some(trial);
        }
        alpha *= 0.5;
    }
    None
}

/// Symmetry class of an equilibrium on the complete graph: `l_B`
/// constellations of `m` evenly spaced blocks, `k_l` oscillators per block of
/// constellation `l`, constellation `l` shifted by `δ_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropySpec {
    pub m: usize,
    pub block_sizes: Vec<usize>,
    pub shifts: Vec<f64>,
}

impl IsotropySpec {
    pub fn new(m: usize, block_sizes: Vec<usize>, shifts: Vec<f64>) -> Result<Self> {
        let s = IsotropySpec { m, block_sizes, shifts };
        s.validate()?;
        Ok(s)
    }

    pub fn single(m: usize, k: usize) -> Result<Self> {
        IsotropySpec::new(m, vec![k], vec![0.0])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadSpec(msg));
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        if self.block_sizes.is_empty() {
            return bad("at least one constellation is required".into());
        }
        if self.block_sizes.contains(&0) {
            return bad("block sizes must be positive".into());
        }
        if self.shifts.len() != self.block_sizes.len() {
            return bad(format!(
                "{} shifts for {} constellations",
                self.shifts.len(),
                self.block_sizes.len()
            ));
        }
        if self.shifts[0] != 0.0 {
            return bad("the first shift must be 0".into());
        }
        let width = TAU / self.m as f64;
        for (i, &d) in self.shifts.iter().enumerate() {
            if !(0.0..width).contains(&d) {
                return bad(format!("shift {d} outside [0, 2π/m)"));
            }
            if self.shifts[..i].contains(&d) {
                return bad(format!("shift {d} repeated"));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.m * self.block_sizes.iter().sum::<usize>()
    }

    /// First vertex of each constellation in the constellation-major order.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.block_sizes.len());
        let mut acc = 0;
        for &k in &self.block_sizes {
            out.push(acc);
            acc += self.m * k;
        }
        out
    }

    /// Vertices of block `j` in constellation `l`.
    pub fn block(&self, l: usize, j: usize) -> std::ops::Range<usize> {
        let start = self.offsets()[l] + j * self.block_sizes[l];
        start..start + self.block_sizes[l]
    }
}

/// Phases `δ_l + 2πj/m`, each repeated `k_l` times, constellation-major then
/// block-minor.
pub fn symmetric_equilibrium(spec: &IsotropySpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut phi = Vec::with_capacity(spec.n());
    for (&k, &d) in spec.block_sizes.iter().zip(&spec.shifts) {
        for j in 0..spec.m {
            let p = wrap(d + TAU * j as f64 / spec.m as f64);
            phi.extend(std::iter::repeat_n(p, k));
        }
    }
    Ok(phi)
}

/// Length of the shortest closed arc containing `{φ_i : i ∈ S}`.
pub fn arc_diameter(phi: &[f64], subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut pts = Vec::with_capacity(subset.len());
    for &i in subset {
        let p = *phi.get(i).ok_or(Error::IndexOutOfRange { index: i, n: phi.len() })?;
        pts.push(wrap(p));
    }
    pts.sort_by(f64::total_cmp);
    let mut gap = TAU - (pts[pts.len() - 1] - pts[0]);
    for w in pts.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    Ok((TAU - gap).max(0.0))
}

/// Arc diameter of all phases.
pub fn full_arc_diameter(phi: &[f64]) -> f64 {
    let all: Vec<usize> = (0..phi.len()).collect();
    arc_diameter(phi, &all).unwrap_or(0.0)
}

/// Rotates so that vertex 0 sits at phase 0.
pub fn canonicalize(phi: &[f64]) -> Vec<f64> {
    let Some(&first) = phi.first() else { return Vec::new() };
    let mut out: Vec<f64> = phi.iter().map(|&p| wrap(p - first)).collect();
    out[0] = 0.0;
    out
}

/// Whether two phase vectors lie in the same rotation class, comparing
/// canonical forms componentwise on the circle.
pub fn same_class(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && canonicalize(a)
            .iter()
            .zip(canonicalize(b))
            .all(|(x, y)| circular_distance(*x, y) < tol)
}
