//! Coupling functions, pulse response maps, delay distributions and the
//! delay-averaged coupling `H = f ∗ g`.
//!
//! All coupling functions are 2π-periodic scalar functions of a phase
//! difference. Tabulated functions live on the uniform grid `θ_k = 2πk/M` and
//! are evaluated between nodes through their trigonometric interpolant, which
//! also provides the derivative.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numerics::{self, wrap};

/// Grid used when a function has to be sampled and no size is given.
pub const DEFAULT_GRID: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingFunction {
    /// `K·sin(θ)`
    Sine { k: f64 },
    /// `Σ_n c_n·sin(nθ)`, with `coeffs[n − 1] = c_n`.
    SineSeries { coeffs: Vec<f64> },
    /// Member of the `𝓕_b` family, see [`FbCoupling`].
    Fb(FbCoupling),
    Tabulated(Tabulated),
    /// `θ ↦ scale · inner(±θ)`, the sign flipped when `reflect` is set.
    Transformed {
        inner: Arc<CouplingFunction>,
        scale: f64,
        reflect: bool,
    },
}

impl CouplingFunction {
    pub fn sine(k: f64) -> Self {
        CouplingFunction::Sine { k }
    }

    pub fn sine_series(coeffs: Vec<f64>) -> Self {
        CouplingFunction::SineSeries { coeffs }
    }

    pub fn fb(b: f64, amp: f64) -> Result<Self> {
        Ok(CouplingFunction::Fb(FbCoupling::new(b, amp)?))
    }

    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            CouplingFunction::Sine { k } => k * theta.sin(),
            CouplingFunction::SineSeries { coeffs } => sine_series(coeffs, theta).0,
            CouplingFunction::Fb(fb) => fb.eval(theta),
            CouplingFunction::Tabulated(t) => t.eval(theta),
            CouplingFunction::Transformed {
                inner,
                scale,
                reflect,
            } => scale * inner.eval(if *reflect { -theta } else { theta }),
        }
    }

    pub fn deriv(&self, theta: f64) -> f64 {
        match self {
            CouplingFunction::Sine { k } => k * theta.cos(),
            CouplingFunction::SineSeries { coeffs } => sine_series(coeffs, theta).1,
            CouplingFunction::Fb(fb) => fb.deriv(theta),
            CouplingFunction::Tabulated(t) => t.deriv(theta),
            CouplingFunction::Transformed {
                inner,
                scale,
                reflect,
            } => {
                if *reflect {
                    -scale * inner.deriv(-theta)
                } else {
                    scale * inner.deriv(theta)
                }
            }
        }
    }

    /// `∫₀^y f(s) ds`. Only periodic in `y` when the mean of `f` vanishes.
    pub fn antiderivative(&self, y: f64) -> f64 {
        match self {
            CouplingFunction::Sine { k } => k * (1.0 - y.cos()),
            CouplingFunction::SineSeries { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let n = (i + 1) as f64;
                    c * (1.0 - (n * y).cos()) / n
                })
                .sum(),
            CouplingFunction::Fb(fb) => fb.antiderivative(y),
            CouplingFunction::Tabulated(t) => t.antiderivative(y),
            CouplingFunction::Transformed {
                inner,
                scale,
                reflect,
            } => {
                if *reflect {
                    -scale * inner.antiderivative(-y)
                } else {
                    scale * inner.antiderivative(y)
                }
            }
        }
    }

    /// Whether `f(−θ) = −f(θ)` holds. Exact for the analytic kinds, numeric
    /// (cosine coefficients) for tabulated ones.
    pub fn is_odd(&self) -> bool {
        match self {
            CouplingFunction::Sine { .. }
            | CouplingFunction::SineSeries { .. }
            | CouplingFunction::Fb(_) => true,
            CouplingFunction::Tabulated(t) => t.is_odd(),
            CouplingFunction::Transformed { inner, .. } => inner.is_odd(),
        }
    }

    /// `θ ↦ scale · f(±θ)`, collapsing nested transforms and folding the
    /// transform into the analytic kinds where that is exact.
    pub fn transformed(&self, scale: f64, reflect: bool) -> CouplingFunction {
        let sign = if reflect && self.is_odd() { -1.0 } else { 1.0 };
        match self {
            CouplingFunction::Sine { k } => CouplingFunction::Sine { k: sign * scale * k },
            CouplingFunction::SineSeries { coeffs } => CouplingFunction::SineSeries {
                coeffs: coeffs.iter().map(|c| sign * scale * c).collect(),
            },
            CouplingFunction::Transformed {
                inner,
                scale: s0,
                reflect: r0,
            } => {
                let scale = scale * s0;
                let reflect = reflect ^ r0;
                if scale == 1.0 && !reflect {
                    (**inner).clone()
                } else {
                    CouplingFunction::Transformed {
                        inner: inner.clone(),
                        scale,
                        reflect,
                    }
                }
            }
            _ if scale == 1.0 && !reflect => self.clone(),
            _ => CouplingFunction::Transformed {
                inner: Arc::new(self.clone()),
                scale,
                reflect,
            },
        }
    }

    pub fn tabulate(&self, m: usize) -> Result<Tabulated> {
        Tabulated::from_fn(m, |t| self.eval(t))
    }

    /// `(f(θ) − f(−θ))/2`, tabulated on `m` points.
    pub fn odd_part(&self, m: usize) -> Result<CouplingFunction> {
        Ok(CouplingFunction::Tabulated(Tabulated::from_fn(m, |t| {
            0.5 * (self.eval(t) - self.eval(-t))
        })?))
    }

    /// Largest `d` such that `f′ > 0` on `(0, d)`, resolved on a grid of
    /// `DEFAULT_GRID` points over `(0, π]`.
    pub fn positive_slope_halfwidth(&self) -> f64 {
        match self {
            CouplingFunction::Sine { k } if *k > 0.0 => PI / 2.0,
            CouplingFunction::Fb(fb) => fb.b,
            _ => {
                let steps = DEFAULT_GRID / 2;
                let h = PI / steps as f64;
                for i in 1..=steps {
                    if self.deriv(i as f64 * h) <= 0.0 {
                        return (i - 1) as f64 * h;
                    }
                }
                PI
            }
        }
    }
}

/// Evaluates `Σ c_n sin(nθ)` and its derivative with the angle-addition
/// recurrence.
fn sine_series(coeffs: &[f64], theta: f64) -> (f64, f64) {
    let (s1, c1) = theta.sin_cos();
    let (mut s, mut c) = (s1, c1);
    let mut value = 0.0;
    let mut slope = 0.0;
    for (i, &a) in coeffs.iter().enumerate() {
        let n = (i + 1) as f64;
        value += a * s;
        slope += a * n * c;
        let next_s = s * c1 + c * s1;
        c = c * c1 - s * s1;
        s = next_s;
    }
    (value, slope)
}

/// C¹ member of `𝓕_b`:
/// `A·sin(πθ/(2b))` on `[0, b]`, `A·cos(π(θ − b)/(2(π − b)))` on `[b, π]`,
/// extended to the circle as an odd 2π-periodic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbCoupling {
    pub b: f64,
    pub amp: f64,
}

impl FbCoupling {
    pub fn new(b: f64, amp: f64) -> Result<Self> {
        if !(b > 0.0 && b < PI) {
            return Err(Error::BadShape(format!("b = {b} outside (0,π)")));
        }
        if !(amp > 0.0 && amp.is_finite()) {
            return Err(Error::BadShape(format!("amplitude {amp} must be positive")));
        }
        Ok(FbCoupling { b, amp })
    }

    fn half(&self, x: f64) -> f64 {
        if x <= self.b {
            self.amp * (PI * x / (2.0 * self.b)).sin()
        } else {
            self.amp * (PI * (x - self.b) / (2.0 * (PI - self.b))).cos()
        }
    }

    fn half_deriv(&self, x: f64) -> f64 {
        if x <= self.b {
            self.amp * PI / (2.0 * self.b) * (PI * x / (2.0 * self.b)).cos()
        } else {
            let w = PI / (2.0 * (PI - self.b));
            -self.amp * w * (w * (x - self.b)).sin()
        }
    }

    fn half_integral(&self, x: f64) -> f64 {
        let b = self.b;
        let rise = 2.0 * b / PI;
        if x <= b {
            self.amp * rise * (1.0 - (PI * x / (2.0 * b)).cos())
        } else {
            let fall = 2.0 * (PI - b) / PI;
            self.amp * (rise + fall * (PI * (x - b) / (2.0 * (PI - b))).sin())
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let t = wrap(theta);
        if t <= PI {
            self.half(t)
        } else {
            -self.half(TAU - t)
        }
    }

    pub fn deriv(&self, theta: f64) -> f64 {
        let t = wrap(theta);
        self.half_deriv(if t <= PI { t } else { TAU - t })
    }

    pub fn antiderivative(&self, y: f64) -> f64 {
        let t = wrap(y);
        self.half_integral(if t <= PI { t } else { TAU - t })
    }
}

/// Trigonometric interpolant of samples on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    values: Vec<f64>,
    /// `a_0..a_K` multiplying `cos(kθ)`
    cos: Vec<f64>,
    /// `b_0..b_K` multiplying `sin(kθ)`; `b_0 = 0`
    sin: Vec<f64>,
    odd: bool,
}

impl Tabulated {
    /// Builds the interpolant of `values[k] = f(2πk/M)`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m < 4 {
            return Err(Error::InvalidParameter(format!(
                "tabulation needs at least 4 points, got {m}"
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample {v}")));
        }
        let spectrum = fft(values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), false);
        let half = m / 2;
        let mut cos = vec![0.0; half + 1];
        let mut sin = vec![0.0; half + 1];
        let inv = 1.0 / m as f64;
        cos[0] = spectrum[0].re * inv;
        for k in 1..=half {
            let c = spectrum[k] * inv;
            if 2 * k == m {
                // Nyquist term: split evenly between ±M/2, cosine only.
                cos[k] = c.re;
            } else {
                cos[k] = 2.0 * c.re;
                sin[k] = -2.0 * c.im;
            }
        }
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let cutoff = 1e-14 * scale;
        let keep = (0..=half)
            .rev()
            .find(|&k| cos[k].abs() > cutoff || sin[k].abs() > cutoff)
            .unwrap_or(0);
        cos.truncate(keep + 1);
        sin.truncate(keep + 1);
        let odd = cos.iter().all(|a| a.abs() <= 1e-12 * scale);
        Ok(Tabulated {
            values,
            cos,
            sin,
            odd,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(m: usize, f: F) -> Result<Self> {
        Tabulated::from_values(numerics::grid(m).into_iter().map(f).collect())
    }

    /// Parses `theta value` lines; thetas must sit on the uniform grid.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<(f64, f64)> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| {
                let mut it = l.split_whitespace().map(str::parse::<f64>);
                match (it.next(), it.next(), it.next()) {
                    (Some(Ok(t)), Some(Ok(v)), None) => Ok((t, v)),
                    _ => Err(Error::Parse(format!("bad tabulation line `{l}`"))),
                }
            })
            .collect::<Result<_>>()?;
        let m = rows.len();
        for (k, &(t, _)) in rows.iter().enumerate() {
            let expected = TAU * k as f64 / m as f64;
            if (t - expected).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "row {k}: theta {t} is not on the uniform grid (expected {expected})"
                )));
            }
        }
        Tabulated::from_values(rows.into_iter().map(|(_, v)| v).collect())
    }

    pub fn to_text(&self) -> String {
        let m = self.values.len();
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{:.16e} {:.16e}\n", TAU * k as f64 / m as f64, v))
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of harmonics kept in the interpolant.
    pub fn harmonics(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn is_odd(&self) -> bool {
        self.odd
    }

    fn series(&self, theta: f64) -> (f64, f64, f64) {
        let (s1, c1) = theta.sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut value = self.cos[0];
        let mut slope = 0.0;
        let mut integral = self.cos[0] * theta;
        for k in 1..self.cos.len() {
            let kf = k as f64;
            let (a, b) = (self.cos[k], self.sin[k]);
            value += a * c + b * s;
            slope += kf * (b * c - a * s);
            integral += (a * s + b * (1.0 - c)) / kf;
            let next_s = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = next_s;
        }
        (value, slope, integral)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.series(wrap(theta)).0
    }

    pub fn deriv(&self, theta: f64) -> f64 {
        self.series(wrap(theta)).1
    }

    pub fn antiderivative(&self, y: f64) -> f64 {
        if self.cos[0] == 0.0 {
            self.series(wrap(y)).2
        } else {
            self.series(y).2
        }
    }
}

/// Pulse response map `κ` together with the natural frequency it is tied to.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseResponse {
    pub kappa: CouplingFunction,
    pub omega: f64,
}

impl PulseResponse {
    pub fn new(kappa: CouplingFunction, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega = {omega} must be positive")));
        }
        Ok(PulseResponse { kappa, omega })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.kappa.eval(theta)
    }

    /// Largest `|κ|` on a grid, used for the jump-size sanity check.
    pub fn max_abs(&self) -> f64 {
        numerics::grid(1024)
            .into_iter()
            .map(|t| self.kappa.eval(t).abs())
            .fold(0.0, f64::max)
    }
}

/// Phase coupling induced by a pulse response: `f(θ) = (ω/2π)·κ(−θ)`.
pub fn f_from_kappa(k: &PulseResponse) -> CouplingFunction {
    k.kappa.transformed(k.omega / TAU, true)
}

/// Pulse response realising a phase coupling: `κ(θ) = (2π/ω)·f(−θ)`.
pub fn kappa_from_f(f: &CouplingFunction, omega: f64) -> Result<PulseResponse> {
    PulseResponse::new(f.transformed(TAU / omega, true), omega)
}

/// Law of the phase lags `ψ ≥ 0` (radians).
#[derive(Debug, Clone, PartialEq)]
pub enum DelayDistribution {
    Point { psi0: f64 },
    /// Uniform on `[μ − w, μ + w]`.
    Uniform { mu: f64, w: f64 },
    /// Normal law truncated to `[0, ∞)` and renormalised.
    Gaussian { mu: f64, sigma: f64 },
    Empirical { samples: Vec<f64> },
}

impl DelayDistribution {
    pub fn point(psi0: f64) -> Result<Self> {
        let d = DelayDistribution::Point { psi0 };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(mu: f64, w: f64) -> Result<Self> {
        let d = DelayDistribution::Uniform { mu, w };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        let d = DelayDistribution::Gaussian { mu, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        let d = DelayDistribution::Empirical { samples };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadDelay(m));
        match self {
            DelayDistribution::Point { psi0 } => {
                if !(psi0.is_finite() && *psi0 >= 0.0) {
                    return bad(format!("point lag {psi0} must be finite and non-negative"));
                }
            }
            DelayDistribution::Uniform { mu, w } => {
                if !(w.is_finite() && *w > 0.0 && mu.is_finite() && mu - w >= 0.0) {
                    return bad(format!("uniform(mu={mu}, w={w}) needs w > 0 and mu ≥ w"));
                }
            }
            DelayDistribution::Gaussian { mu, sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0 && mu.is_finite() && *mu >= 0.0) {
                    return bad(format!("gaussian(mu={mu}, sigma={sigma}) needs sigma > 0, mu ≥ 0"));
                }
            }
            DelayDistribution::Empirical { samples } => {
                if samples.is_empty() {
                    return bad("empirical distribution has no samples".into());
                }
                if let Some(s) = samples.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
                    return bad(format!("empirical sample {s} must be finite and non-negative"));
                }
            }
        }
        Ok(())
    }

    /// Whether the untruncated normal closed forms are used for a Gaussian.
    fn gaussian_closed_form(mu: f64, sigma: f64) -> bool {
        sigma <= mu / 4.0
    }

    fn gaussian_mass(mu: f64, sigma: f64) -> f64 {
        0.5 * statrs::function::erf::erfc(-mu / (sigma * std::f64::consts::SQRT_2))
    }

    /// Density on `[0, ∞)`; `None` for atomic laws.
    pub fn density(&self, psi: f64) -> Option<f64> {
        match self {
            DelayDistribution::Point { .. } | DelayDistribution::Empirical { .. } => None,
            DelayDistribution::Uniform { mu, w } => {
                Some(if (psi - mu).abs() <= *w { 0.5 / w } else { 0.0 })
            }
            DelayDistribution::Gaussian { mu, sigma } => {
                if psi < 0.0 {
                    return Some(0.0);
                }
                let z = (psi - mu) / sigma;
                Some(
                    (-0.5 * z * z).exp()
                        / (sigma * TAU.sqrt() * Self::gaussian_mass(*mu, *sigma)),
                )
            }
        }
    }

    /// Upper end of the effective support.
    pub fn support_end(&self) -> f64 {
        match self {
            DelayDistribution::Point { psi0 } => *psi0,
            DelayDistribution::Uniform { mu, w } => mu + w,
            DelayDistribution::Gaussian { mu, sigma } => mu + 12.0 * sigma,
            DelayDistribution::Empirical { samples } => samples.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// `E[e^{ikψ}]`.
    pub fn characteristic(&self, k: i64) -> Complex64 {
        let kf = k as f64;
        match self {
            DelayDistribution::Point { psi0 } => Complex64::from_polar(1.0, kf * psi0),
            DelayDistribution::Uniform { mu, w } => {
                let sinc = if k == 0 { 1.0 } else { (kf * w).sin() / (kf * w) };
                Complex64::from_polar(1.0, kf * mu) * sinc
            }
            DelayDistribution::Gaussian { mu, sigma } => {
                if Self::gaussian_closed_form(*mu, *sigma) {
                    Complex64::from_polar((-0.5 * kf * kf * sigma * sigma).exp(), kf * mu)
                } else {
                    let end = self.support_end();
                    let g = |p: f64| self.density(p).unwrap_or(0.0);
                    let re = numerics::integrate(|p| (kf * p).cos() * g(p), 0.0, end, 1e-13);
                    let im = numerics::integrate(|p| (kf * p).sin() * g(p), 0.0, end, 1e-13);
                    Complex64::new(re, im)
                }
            }
            DelayDistribution::Empirical { samples } => {
                samples
                    .iter()
                    .map(|&p| Complex64::from_polar(1.0, kf * p))
                    .sum::<Complex64>()
                    / samples.len() as f64
            }
        }
    }

    /// `C e^{iξ} = E[e^{iψ}]`, returned as `(C, ξ)` with `ξ ∈ [0, 2π)`.
    pub fn order_parameter(&self) -> (f64, f64) {
        let z = self.characteristic(1);
        (z.norm(), wrap(z.arg()))
    }

    /// Discrete Fourier transform `ŵ_k = Σ_l w_l e^{−2πikl/M}` of the wrapped
    /// lag weights on an `M`-point grid.
    fn weight_spectrum(&self, m: usize) -> Vec<Complex64> {
        match self {
            DelayDistribution::Gaussian { mu, sigma }
                if !Self::gaussian_closed_form(*mu, *sigma) =>
            {
                let w = self.sampled_wrapped_weights(m);
                fft(w.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), false)
            }
            _ => {
                let mut spec = vec![Complex64::new(0.0, 0.0); m];
                for k in 0..=m / 2 {
                    let z = self.characteristic(k as i64).conj();
                    if 2 * k == m {
                        spec[k] = Complex64::new(z.re, 0.0);
                    } else {
                        spec[k] = z;
                        if k > 0 {
                            spec[m - k] = z.conj();
                        }
                    }
                }
                spec
            }
        }
    }

    /// Density wrapped onto the circle and sampled at the grid nodes,
    /// normalised to unit sum. The jump at `ψ = 0` is averaged at node 0.
    fn sampled_wrapped_weights(&self, m: usize) -> Vec<f64> {
        let end = self.support_end();
        let laps = (end / TAU).ceil() as usize + 1;
        let mut w: Vec<f64> = numerics::grid(m)
            .into_iter()
            .enumerate()
            .map(|(l, theta)| {
                (0..=laps)
                    .map(|n| {
                        let d = self.density(theta + TAU * n as f64).unwrap_or(0.0);
                        if l == 0 && n == 0 {
                            0.5 * d
                        } else {
                            d
                        }
                    })
                    .sum()
            })
            .collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        w
    }

    /// Lag weights on the grid `θ_l = 2πl/M`; they sum to one.
    pub fn wrapped_weights(&self, m: usize) -> Vec<f64> {
        let spec = self.weight_spectrum(m);
        fft(spec, true).into_iter().map(|z| z.re / m as f64).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DelayDistribution::Point { psi0 } => *psi0,
            DelayDistribution::Uniform { mu, w } => mu + w * (2.0 * rng.random::<f64>() - 1.0),
            DelayDistribution::Gaussian { mu, sigma } => {
                let normal = Normal::new(*mu, *sigma).expect("validated parameters");
                loop {
                    let x = normal.sample(rng);
                    if x >= 0.0 {
                        return x;
                    }
                }
            }
            DelayDistribution::Empirical { samples } => {
                samples[rng.random_range(0..samples.len())]
            }
        }
    }
}

/// Delay-averaged coupling `H(θ) = ∫ f(θ − ψ) g(ψ) dψ`, computed as the
/// circular convolution of `f` on an `M`-point grid with the wrapped lag law.
pub fn convolve_delay(f: &CouplingFunction, g: &DelayDistribution, m: usize) -> Result<CouplingFunction> {
    if m < 256 || !m.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "grid size {m} must be a power of two ≥ 256"
        )));
    }
    g.validate()?;
    let samples: Vec<Complex64> = numerics::grid(m)
        .into_iter()
        .map(|t| Complex64::new(f.eval(t), 0.0))
        .collect();
    let weights = g.weight_spectrum(m);
    let product: Vec<Complex64> = fft(samples, false)
        .into_iter()
        .zip(weights)
        .map(|(a, b)| a * b)
        .collect();
    let values = fft(product, true)
        .into_iter()
        .map(|z| z.re / m as f64)
        .collect();
    Ok(CouplingFunction::Tabulated(Tabulated::from_values(values)?))
}

fn fft(mut data: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(data.len())
    } else {
        planner.plan_fft_forward(data.len())
    };
    plan.process(&mut data);
    data
}
