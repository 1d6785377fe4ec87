//! The Born approximation `q^B` of a radial potential and its three faces:
//! the A-amplitude on the half-line, the ball moments
//! `sigma_k = int_0^1 q^B(r) r^{2k+d-1} dr = lambda_k - k`, and the radial
//! Fourier transform written as a power series in the moments.
//!
//! Recovering `q^B` from the moments is a Hausdorff moment problem. Two
//! solvers are offered: a least-squares fit of the Fourier series onto
//! transforms of ball polynomials, and a ridge-regularized shifted-Legendre
//! expansion.

use crate::forward::{dtn_spectrum, DtNSpectrum, ForwardOptions, KappaIndex};
use crate::interp::Pchip;
use crate::potentials::{thresholds, HalfLinePotential, PotentialError, Profile, RadialPotential, R_MIN};
use crate::quad::{compensated_sum, integrate_adaptive, GaussLegendre};
use crate::special::{bessel_i1, bessel_j1, bessel_j_ladder, gamma_fn, ln_gamma_fn, radial_kernel, sphere_area};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BornError {
    #[error("no closed-form amplitude for {0}")]
    UnsupportedFamily(String),
    #[error("moment sigma_{k} diverges: {reason}")]
    DivergentMoment { k: usize, reason: String },
    #[error("moment inversion is ill-conditioned: residual {residual:e} exceeds tolerance {tolerance:e}")]
    IllConditioned { residual: f64, tolerance: f64 },
    #[error("spectrum holds {available} eigenvalues, {needed} needed")]
    SpectrumTooShort { needed: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// A-amplitude `A(t)` with `M(-kappa^2) = -kappa - int_0^inf A e^{-2 kappa t} dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AAmplitude {
    Zero,
    /// `2 (nu^2 - mu^2) e^{-2 nu t}`.
    Bargmann { mu: f64, nu: f64 },
    /// Amplitude of the constant half-line potential `Q = q0`:
    /// `2 q0 J_1(x)/x` for `q0 > 0` and `2 q0 I_1(x)/x` for `q0 < 0`, `x = 2 sqrt|q0| t`.
    ConstantQ { q0: f64 },
    /// Samples on an increasing grid from `t = 0`; zero beyond the last node.
    Sampled { t: Vec<f64>, values: Vec<f64> },
}

impl AAmplitude {
    pub fn sampled(t: Vec<f64>, values: Vec<f64>) -> Result<Self, BornError> {
        if t.len() < 2 || t.len() != values.len() || t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BornError::InvalidParameter("sampled amplitude needs an increasing grid from 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BornError::InvalidParameter("amplitude samples must be finite".into()));
        }
        Ok(AAmplitude::Sampled { t, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            AAmplitude::Zero => 0.0,
            AAmplitude::Bargmann { mu, nu } => 2.0 * (nu * nu - mu * mu) * (-2.0 * nu * t).exp(),
            AAmplitude::ConstantQ { q0 } => {
                let x = 2.0 * q0.abs().sqrt() * t;
                if x < 1e-6 {
                    // J_1(x)/x = 1/2 - x^2/16 and I_1(x)/x = 1/2 + x^2/16.
                    let corr = if *q0 > 0.0 { -x * x / 16.0 } else { x * x / 16.0 };
                    2.0 * q0 * (0.5 + corr)
                } else if *q0 > 0.0 {
                    2.0 * q0 * bessel_j1(x) / x
                } else {
                    2.0 * q0 * bessel_i1(x) / x
                }
            }
            AAmplitude::Sampled { t: grid, values } => {
                if t > grid[grid.len() - 1] {
                    0.0
                } else {
                    sampled_eval(grid, values, t)
                }
            }
        }
    }

    /// Exponential rate of `|A(t)|` as `t -> inf`; `-inf` when eventually zero.
    pub fn tail_rate(&self) -> f64 {
        match self {
            AAmplitude::Zero => f64::NEG_INFINITY,
            AAmplitude::Bargmann { mu, nu } if mu == nu => f64::NEG_INFINITY,
            AAmplitude::Bargmann { nu, .. } => -2.0 * nu,
            AAmplitude::ConstantQ { q0 } if *q0 == 0.0 => f64::NEG_INFINITY,
            AAmplitude::ConstantQ { q0 } if *q0 > 0.0 => 0.0,
            AAmplitude::ConstantQ { q0 } => 2.0 * (-q0).sqrt(),
            AAmplitude::Sampled { .. } => f64::NEG_INFINITY,
        }
    }

    fn onset(&self) -> f64 {
        match self {
            AAmplitude::Sampled { t, .. } => t[t.len() - 1],
            _ => 0.0,
        }
    }
}

fn sampled_eval(grid: &[f64], values: &[f64], t: f64) -> f64 {
    // Uniform grids are the common case; fall back to a search otherwise.
    let n = grid.len();
    let h = grid[1] - grid[0];
    let guess = (t / h).floor() as usize;
    let i = if guess + 1 < n && (grid[guess] <= t) && (t <= grid[guess + 1]) {
        guess
    } else {
        grid.partition_point(|&x| x <= t).clamp(1, n - 1) - 1
    };
    // Cubic Lagrange through four neighbours when available, else linear.
    if n >= 4 {
        let j = i.saturating_sub(1).min(n - 4);
        let xs = &grid[j..j + 4];
        let ys = &values[j..j + 4];
        let mut acc = 0.0;
        for a in 0..4 {
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (t - xs[b]) / (xs[a] - xs[b]);
                }
            }
            acc += l * ys[a];
        }
        acc
    } else {
        let s = (t - grid[i]) / (grid[i + 1] - grid[i]);
        values[i] * (1.0 - s) + values[i + 1] * s
    }
}

/// Closed-form amplitude of a half-line potential from the explicitly
/// solvable families.
pub fn a_amplitude_closed(q: &HalfLinePotential) -> Result<AAmplitude, BornError> {
    match q {
        HalfLinePotential::Zero => Ok(AAmplitude::Zero),
        HalfLinePotential::Constant { q0 } if *q0 == 0.0 => Ok(AAmplitude::Zero),
        HalfLinePotential::Constant { q0 } => Ok(AAmplitude::ConstantQ { q0: *q0 }),
        HalfLinePotential::Bargmann { mu, nu } if mu == nu => Ok(AAmplitude::Zero),
        HalfLinePotential::Bargmann { mu, nu } => Ok(AAmplitude::Bargmann { mu: *mu, nu: *nu }),
        HalfLinePotential::Translated { base, shift } => match base.translate(*shift) {
            HalfLinePotential::Translated { .. } => Err(BornError::UnsupportedFamily(format!("{q:?}"))),
            other => a_amplitude_closed(&other),
        },
        HalfLinePotential::Scaled { base, factor } => match base.scaled(*factor) {
            HalfLinePotential::Scaled { .. } => Err(BornError::UnsupportedFamily(format!("{q:?}"))),
            other => a_amplitude_closed(&other),
        },
        _ => Err(BornError::UnsupportedFamily(format!("{q:?}"))),
    }
}

/// A function of `r` in `(0, 1]` whose ball moments can be taken.
pub trait RadialFunction {
    fn dimension(&self) -> usize;
    fn value(&self, r: f64) -> f64;
    /// `e^{-2t} value(e^{-t})`.
    fn halfline(&self, t: f64) -> f64 {
        let r = (-t).exp();
        r * r * self.value(r)
    }
    /// Exponential rate of `|halfline(t)|` as `t -> inf`; `-inf` when eventually zero.
    fn tail_rate(&self) -> f64;
    /// Beyond this `t` the half-line values follow the tail description.
    fn tail_onset(&self) -> f64;
    /// Exact moments when the representation allows them.
    fn exact_moment(&self, _k: usize) -> Option<Result<f64, BornError>> {
        None
    }
}

/// Upper end of the half-line used for moment quadrature.
const MOMENT_T_LIMIT: f64 = 2000.0;

/// `sigma_k = int_0^1 F(r) r^{2k+d-1} dr = int_0^inf F_half(t) e^{-2 kappa_k t} dt`.
///
/// The half-line form is used; the integral is truncated where the
/// exponential envelope falls below `1e-15` relative to the amplitude scale.
pub fn moments_of_profile<P: RadialFunction + ?Sized>(p: &P, k: usize) -> Result<f64, BornError> {
    if let Some(m) = p.exact_moment(k) {
        return m;
    }
    let kappa = KappaIndex::new(p.dimension(), k).kappa;
    let rate = 2.0 * kappa;
    let tail = p.tail_rate();
    let onset = p.tail_onset();
    let end = if tail == f64::NEG_INFINITY {
        onset
    } else {
        let excess = tail - rate;
        if excess >= 0.0 {
            return Err(BornError::DivergentMoment {
                k,
                reason: format!("weight e^(-{rate} t) does not dominate the growth rate {tail} of the profile"),
            });
        }
        let scale = (0..=20).map(|i| p.halfline(i as f64 * 0.25).abs()).fold(1.0, f64::max);
        ((1e15 * scale).ln() / -excess).max(onset).min(MOMENT_T_LIMIT)
    };
    if end <= 0.0 {
        return Ok(0.0);
    }
    let panels = end.ceil() as usize;
    let width = end / panels as f64;
    let mut parts = Vec::with_capacity(panels);
    for i in 0..panels {
        let a = i as f64 * width;
        let r = integrate_adaptive(|t| p.halfline(t) * (-rate * t).exp(), a, a + width, 1e-14, 1e-13).map_err(|e| {
            BornError::DivergentMoment { k, reason: e.to_string() }
        })?;
        parts.push(r.value);
    }
    Ok(compensated_sum(parts))
}

impl RadialFunction for RadialPotential {
    fn dimension(&self) -> usize {
        self.d
    }
    fn value(&self, r: f64) -> f64 {
        self.q(r)
    }
    fn tail_rate(&self) -> f64 {
        profile_tail_rate(&self.profile)
    }
    fn tail_onset(&self) -> f64 {
        crate::potentials::to_halfline(self).tail_start().min(crate::potentials::T_MAX)
    }
}

fn profile_tail_rate(p: &Profile) -> f64 {
    match p {
        Profile::Zero => f64::NEG_INFINITY,
        Profile::InverseSquare { q0 } if *q0 == 0.0 => f64::NEG_INFINITY,
        Profile::InverseSquare { .. } => 0.0,
        Profile::Bargmann { mu, nu } if mu == nu => f64::NEG_INFINITY,
        Profile::Bargmann { mu, .. } => -2.0 * mu,
        Profile::ScaledDilate { base, .. } | Profile::Scaled { base, .. } => profile_tail_rate(base),
        Profile::Sampled(s) => match s.tail {
            crate::potentials::TailModel::Zero => f64::NEG_INFINITY,
            crate::potentials::TailModel::Constant(0.0) => f64::NEG_INFINITY,
            crate::potentials::TailModel::Constant(_) => 0.0,
        },
    }
}

/// Where a Born profile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    FromA,
    FromSpectrum(BornMethod),
    ClosedForm,
    Loaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BornMethod {
    FourierHankel,
    LegendreMoments,
}

/// Internal representation used to evaluate a Born profile off its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BornRepr {
    Amplitude(AAmplitude),
    /// `sum_n c_n P_n^{(0, d/2-1)}(2 r^2 - 1)`.
    BallPolynomial { coeffs: Vec<f64> },
    /// `2 g(r^2) r^{-(d-2+2 k0)}` with `g = sum_n b_n P_n(2t - 1)`.
    Legendre { coeffs: Vec<f64>, k0: usize },
    /// Monotone cubic in `-log r` of `r^2 q^B`, zero below the grid.
    Samples(Pchip),
}

/// Born profile `q^B` on a grid over `(r_min, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornProfile {
    pub d: usize,
    pub r: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
    pub repr: BornRepr,
}

/// Increasing radial grid ending at `r = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid(pub Vec<f64>);

impl RadialGrid {
    /// Nodes `r = e^{-j dt}` down to `r_lo`, increasing.
    pub fn log_uniform(r_lo: f64, dt: f64) -> Self {
        let n = (-r_lo.ln() / dt).floor() as usize;
        Self((0..=n).rev().map(|j| (-(j as f64) * dt).exp()).collect())
    }

    /// `n + 1` equally spaced nodes on `[r_lo, 1]`.
    pub fn uniform(r_lo: f64, n: usize) -> Self {
        Self((0..=n).map(|i| r_lo + (1.0 - r_lo) * i as f64 / n as f64).collect())
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self::log_uniform(R_MIN, 0.01)
    }
}

fn jacobi_all(n_max: usize, beta: f64, x: f64) -> Vec<f64> {
    // P_n^{(0, beta)}(x), n = 0..=n_max.
    let mut p = vec![0.0; n_max + 1];
    p[0] = 1.0;
    if n_max == 0 {
        return p;
    }
    p[1] = 1.0 + (beta + 2.0) * (x - 1.0) / 2.0;
    for n in 2..=n_max {
        let nf = n as f64;
        let s = 2.0 * nf + beta;
        let a = 2.0 * nf * (nf + beta) * (s - 2.0);
        let b = (s - 1.0) * (s * (s - 2.0) * x - beta * beta);
        let c = 2.0 * (nf - 1.0) * (nf + beta - 1.0) * s;
        p[n] = (b * p[n - 1] - c * p[n - 2]) / a;
    }
    p
}

fn shifted_legendre_all(n_max: usize, t: f64) -> Vec<f64> {
    let x = 2.0 * t - 1.0;
    let mut p = vec![0.0; n_max + 1];
    p[0] = 1.0;
    if n_max >= 1 {
        p[1] = x;
    }
    for n in 2..=n_max {
        let nf = n as f64;
        p[n] = ((2.0 * nf - 1.0) * x * p[n - 1] - (nf - 1.0) * p[n - 2]) / nf;
    }
    p
}

impl BornRepr {
    fn eval(&self, d: usize, r: f64) -> f64 {
        match self {
            BornRepr::Amplitude(a) => a.eval(-r.ln()) / (r * r),
            BornRepr::BallPolynomial { coeffs } => {
                if coeffs.is_empty() {
                    return 0.0;
                }
                let p = jacobi_all(coeffs.len() - 1, d as f64 / 2.0 - 1.0, 2.0 * r * r - 1.0);
                coeffs.iter().zip(&p).map(|(c, v)| c * v).sum()
            }
            BornRepr::Legendre { coeffs, k0 } => {
                if coeffs.is_empty() {
                    return 0.0;
                }
                let t = r * r;
                let p = shifted_legendre_all(coeffs.len() - 1, t);
                let g: f64 = coeffs.iter().zip(&p).map(|(c, v)| c * v).sum();
                2.0 * g * r.powi(-((d as i32 - 2) + 2 * *k0 as i32))
            }
            BornRepr::Samples(p) => {
                let t = -r.ln();
                if t > p.domain().1 {
                    0.0
                } else {
                    p.eval(t.max(0.0)) / (r * r)
                }
            }
        }
    }
}

impl BornProfile {
    pub fn from_repr(d: usize, repr: BornRepr, grid: &RadialGrid, provenance: Provenance) -> Self {
        let values = grid.0.iter().map(|&r| repr.eval(d, r)).collect();
        Self { d, r: grid.0.clone(), values, provenance, repr }
    }

    /// Profile from grid samples, interpolated in `-log r`.
    pub fn from_samples(d: usize, r: Vec<f64>, values: Vec<f64>) -> Result<Self, BornError> {
        if r.len() < 2 || r.len() != values.len() || r.windows(2).any(|w| w[1] <= w[0]) || r[0] <= 0.0 {
            return Err(BornError::InvalidParameter("grid must be increasing in (0, 1]".into()));
        }
        if (r[r.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(BornError::InvalidParameter("last node must be r = 1".into()));
        }
        let t: Vec<f64> = r.iter().rev().map(|v| (-v.ln()).max(0.0)).collect();
        let a: Vec<f64> = r.iter().zip(&values).rev().map(|(x, q)| x * x * q).collect();
        let repr = BornRepr::Samples(Pchip::new(t, a));
        Ok(Self { d, r, values, provenance: Provenance::Loaded, repr })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.repr.eval(self.d, r)
    }

    /// `A(t) = e^{-2t} q^B(e^{-t})`.
    pub fn amplitude(&self, t: f64) -> f64 {
        match &self.repr {
            BornRepr::Amplitude(a) => a.eval(t),
            _ => {
                let r = (-t).exp();
                r * r * self.eval(r)
            }
        }
    }
}

impl RadialFunction for BornProfile {
    fn dimension(&self) -> usize {
        self.d
    }
    fn value(&self, r: f64) -> f64 {
        self.eval(r)
    }
    fn halfline(&self, t: f64) -> f64 {
        self.amplitude(t)
    }
    fn tail_rate(&self) -> f64 {
        match &self.repr {
            BornRepr::Amplitude(a) => a.tail_rate(),
            // A polynomial in r^2 gives A(t) = O(e^{-2t}).
            BornRepr::BallPolynomial { .. } => -2.0,
            BornRepr::Legendre { k0, .. } => -(self.d as f64 + 2.0 * *k0 as f64),
            BornRepr::Samples(_) => f64::NEG_INFINITY,
        }
    }
    fn tail_onset(&self) -> f64 {
        match &self.repr {
            BornRepr::Amplitude(a) => a.onset(),
            BornRepr::Samples(p) => p.domain().1,
            _ => 0.0,
        }
    }
    fn exact_moment(&self, k: usize) -> Option<Result<f64, BornError>> {
        let d = self.d;
        match &self.repr {
            BornRepr::BallPolynomial { coeffs } => {
                let gl = GaussLegendre::new(coeffs.len() + k + d + 2);
                Some(Ok(gl.integrate(|r| self.repr.eval(d, r) * r.powi((2 * k + d - 1) as i32), 0.0, 1.0)))
            }
            BornRepr::Legendre { coeffs, k0 } => {
                if k < *k0 {
                    return Some(Err(BornError::DivergentMoment {
                        k,
                        reason: format!("the Legendre representation carries the weight t^{k0}"),
                    }));
                }
                let gl = GaussLegendre::new(coeffs.len() + k - k0 + 2);
                let g = |t: f64| -> f64 {
                    let p = shifted_legendre_all(coeffs.len().saturating_sub(1), t);
                    coeffs.iter().zip(&p).map(|(c, v)| c * v).sum()
                };
                Some(Ok(gl.integrate(|t| g(t) * t.powi((k - k0) as i32), 0.0, 1.0)))
            }
            _ => None,
        }
    }
}

/// `q^B(r) = A(-log r) / r^2` on `grid`.
pub fn born_from_a(a: &AAmplitude, d: usize, grid: &RadialGrid) -> BornProfile {
    BornProfile::from_repr(d, BornRepr::Amplitude(a.clone()), grid, Provenance::FromA)
}

/// Closed-form Born profile of a potential from the explicit families.
pub fn born_closed_form(v: &RadialPotential, grid: &RadialGrid) -> Result<BornProfile, BornError> {
    let a = a_amplitude_closed(&crate::potentials::to_halfline(v))?;
    Ok(BornProfile::from_repr(v.d, BornRepr::Amplitude(a), grid, Provenance::ClosedForm))
}

/// Partial sum of the radial Fourier transform of `q^B` written through
/// the moments `sigma_k = lambda_k - k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierValue {
    pub value: f64,
    /// Magnitude of the last retained term.
    pub truncation_estimate: f64,
    /// Set when the last term exceeds `1e-6` of the partial sum.
    pub truncation_dominated: bool,
}

fn fourier_log_prefactor(d: usize, k: usize) -> f64 {
    let h = d as f64 / 2.0;
    (2.0f64).ln() + h * PI.ln() - ln_gamma_fn(k as f64 + 1.0) - ln_gamma_fn(k as f64 + h)
}

/// `2 pi^{d/2} sum_{k <= K} (-1)^k (xi/2)^{2k} / (k! Gamma(k + d/2)) sigma_k`.
pub fn fourier_hat(s: &DtNSpectrum, xi: f64, k_trunc: usize) -> Result<FourierValue, BornError> {
    if k_trunc > s.max_k() {
        return Err(BornError::SpectrumTooShort { needed: k_trunc + 1, available: s.lambdas.len() });
    }
    let sig: Vec<f64> = (0..=k_trunc).map(|k| s.deviation(k)).collect();
    Ok(fourier_series(s.d, &sig, xi))
}

/// Terms of the moment series, built by the ratio recurrence so that each
/// carries only a few rounding errors.
fn fourier_terms(d: usize, sigma: &[f64], xi: f64) -> Vec<f64> {
    let h = d as f64 / 2.0;
    let z = -(xi / 2.0).powi(2);
    let mut c = 2.0 * PI.powf(h) / gamma_fn(h);
    let mut out = Vec::with_capacity(sigma.len());
    for (k, &sg) in sigma.iter().enumerate() {
        if k > 0 {
            c *= z / (k as f64 * (k as f64 - 1.0 + h));
        }
        out.push(c * sg);
    }
    out
}

fn fourier_series(d: usize, sigma: &[f64], xi: f64) -> FourierValue {
    let terms = fourier_terms(d, sigma, xi);
    let last = terms.last().map_or(0.0, |t| t.abs());
    let value = compensated_sum(terms);
    FourierValue { value, truncation_estimate: last, truncation_dominated: last > 1e-6 * value.abs() }
}

/// `sum_k |term_k|`, the amplification of moment errors at `xi`.
fn fourier_absolute_sum(d: usize, sigma: &[f64], xi: f64) -> f64 {
    fourier_terms(d, sigma, xi).iter().map(|t| t.abs()).sum()
}

/// Radial Fourier transform of a profile by direct quadrature,
/// `|S^{d-1}| int_0^1 q(r) r^{d-1} Omega_d(xi r) dr`.
pub fn fourier_direct<P: RadialFunction + ?Sized>(p: &P, xi: f64) -> f64 {
    let d = p.dimension();
    let r = integrate_adaptive(
        |r| p.value(r) * r.powi(d as i32 - 1) * radial_kernel(d, xi * r),
        0.0,
        1.0,
        1e-13,
        1e-13,
    )
    .map(|v| v.value)
    .unwrap_or(f64::NAN);
    sphere_area(d) * r
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierParams {
    /// Upper cap on the frequency band.
    pub xi_max: f64,
    /// Target error of the series, relative to its value at `xi = 0`; fixes the usable band.
    pub truncation_tol: f64,
    /// Number of ball polynomials; chosen from the band when `None`.
    pub basis: Option<usize>,
    /// Expected absolute error of each moment.
    pub moment_noise: f64,
}

impl Default for FourierParams {
    fn default() -> Self {
        Self { xi_max: 60.0, truncation_tol: 1e-10, basis: None, moment_noise: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreParams {
    /// Index shift of the moments; see [`default_k0`].
    pub k0: usize,
    /// Number of moments used.
    pub n_moments: usize,
}

impl Default for LegendreParams {
    fn default() -> Self {
        Self { k0: 0, n_moments: 24 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BornParams {
    pub method: BornMethod,
    /// Highest spectral index used; the whole spectrum when `None`.
    pub k_trunc: Option<usize>,
    /// Relative Tikhonov parameter, multiplied by the largest singular value squared.
    pub ridge: f64,
    /// Relative moment residual above which the inversion is rejected.
    pub residual_tol: f64,
    pub fourier: FourierParams,
    pub legendre: LegendreParams,
    pub grid: RadialGrid,
}

impl Default for BornParams {
    fn default() -> Self {
        Self {
            method: BornMethod::FourierHankel,
            k_trunc: None,
            ridge: 1e-14,
            residual_tol: 1e-2,
            fourier: FourierParams::default(),
            legendre: LegendreParams::default(),
            grid: RadialGrid::default(),
        }
    }
}

/// Output of a moment inversion together with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BornSynthesis {
    pub profile: BornProfile,
    /// `max_k |sigma_k(output) - sigma_k(input)|` over the moments used.
    pub residual: f64,
    /// The residual divided by `max_k |sigma_k|`.
    pub relative_residual: f64,
    /// Indices of the moments used.
    pub moments_used: Vec<usize>,
    /// Ratio of extreme singular values of the linear step.
    pub condition: f64,
    /// Frequency band actually used by the Fourier route.
    pub xi_band: Option<f64>,
    pub basis_size: usize,
}

/// Solves `min |M c - y|^2 + alpha |c|^2` with `alpha = ridge * s_max^2`
/// through the SVD. Returns the coefficients and the condition number.
fn ridge_solve(m: DMatrix<f64>, y: DVector<f64>, ridge: f64) -> (DVector<f64>, f64) {
    let svd = m.svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let u = svd.u.as_ref().expect("U requested");
    let vt = svd.v_t.as_ref().expect("V^T requested");
    let alpha = ridge * s_max * s_max;
    let uty = u.transpose() * y;
    let mut z = DVector::zeros(s.len());
    for i in 0..s.len() {
        let si = s[i];
        if si > 0.0 && (si * si + alpha) > 0.0 {
            z[i] = si / (si * si + alpha) * uty[i];
        }
    }
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    (vt.transpose() * z, cond)
}

fn usable_band(d: usize, sigma: &[f64], params: &FourierParams) -> f64 {
    let k = sigma.len() - 1;
    let scale = fourier_series(d, sigma, 0.0).value.abs().max(1e-300);
    let tail = sigma[k].abs().max(if k > 0 { sigma[k - 1].abs() } else { 0.0 });
    let mut band = params.xi_max;
    if tail > 0.0 && k > 0 {
        let l0 = fourier_log_prefactor(d, k) + tail.ln();
        let xi = 2.0 * (((params.truncation_tol * scale).ln() - l0) / (2.0 * k as f64)).exp();
        band = band.min(xi);
    }
    // Moment errors are amplified by sum_k |term_k|, which grows like e^xi.
    if params.moment_noise > 0.0 {
        let mut xi = 0.25;
        while xi <= band {
            if params.moment_noise * fourier_absolute_sum(d, sigma, xi) > params.truncation_tol * scale {
                band = xi - 0.25;
                break;
            }
            xi += 0.25;
        }
    }
    band.max(0.25)
}

fn synthesize_fourier(d: usize, sigma: &[f64], params: &BornParams) -> Result<(BornRepr, f64, f64, usize), BornError> {
    let band = usable_band(d, sigma, &params.fourier);
    let h = d as f64 / 2.0;
    let n_basis = params
        .fourier
        .basis
        .unwrap_or_else(|| (((band - h - 2.0) / 2.0).floor().max(0.0) as usize + 1).min(30));
    if sigma.iter().all(|&s| s == 0.0) {
        return Ok((BornRepr::BallPolynomial { coeffs: vec![0.0; n_basis] }, 1.0, band, n_basis));
    }
    let panels = band.ceil().max(1.0) as usize;
    let gl = GaussLegendre::new(16);
    let width = band / panels as f64;
    let mut nodes = Vec::new();
    for p in 0..panels {
        let a = p as f64 * width;
        nodes.extend(gl.mapped(a, a + width));
    }
    let frac = if d.is_multiple_of(2) { 0.0 } else { 0.5 };
    let base = d / 2;
    let pref = (2.0 * PI).powf(h);
    let rows = nodes.len();
    let mut m = DMatrix::zeros(rows, n_basis);
    let mut y = DVector::zeros(rows);
    for (i, &(xi, w)) in nodes.iter().enumerate() {
        let sw = (w * xi.powi(d as i32 - 1)).sqrt();
        let ladder = bessel_j_ladder(frac, xi, base + 2 * n_basis);
        for n in 0..n_basis {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            m[(i, n)] = sw * pref * sign * ladder[base + 2 * n] / xi.powf(h);
        }
        y[i] = sw * fourier_series(d, sigma, xi).value;
    }
    let (c, cond) = ridge_solve(m, y, params.ridge);
    Ok((BornRepr::BallPolynomial { coeffs: c.iter().cloned().collect() }, cond, band, n_basis))
}

fn synthesize_legendre(sigma_shifted: &[f64], k0: usize, ridge: f64) -> (BornRepr, f64) {
    let n = sigma_shifted.len();
    let mut h = DMatrix::zeros(n, n);
    for mi in 0..n {
        for ni in 0..=mi {
            let (mf, nf) = (mi as f64, ni as f64);
            let lv = 2.0 * ln_gamma_fn(mf + 1.0) - ln_gamma_fn(mf - nf + 1.0) - ln_gamma_fn(mf + nf + 2.0);
            h[(mi, ni)] = lv.exp();
        }
    }
    let y = DVector::from_column_slice(sigma_shifted);
    let (b, cond) = ridge_solve(h, y, ridge);
    (BornRepr::Legendre { coeffs: b.iter().cloned().collect(), k0 }, cond)
}

/// Recovers `q^B` from the moments `sigma_k = lambda_k - k`.
pub fn born_from_spectrum(s: &DtNSpectrum, params: &BornParams) -> Result<BornSynthesis, BornError> {
    let k_max = params.k_trunc.unwrap_or(s.max_k());
    if k_max > s.max_k() || s.lambdas.is_empty() {
        return Err(BornError::SpectrumTooShort { needed: k_max + 1, available: s.lambdas.len() });
    }
    if !(params.ridge >= 0.0) {
        return Err(BornError::InvalidParameter("ridge must be >= 0".into()));
    }
    let d = s.d;
    let (repr, cond, band, basis, used): (BornRepr, f64, Option<f64>, usize, Vec<usize>) = match params.method {
        BornMethod::FourierHankel => {
            let sigma: Vec<f64> = (0..=k_max).map(|k| s.deviation(k)).collect();
            let (repr, cond, band, n) = synthesize_fourier(d, &sigma, params)?;
            (repr, cond, Some(band), n, (0..=k_max).collect())
        }
        BornMethod::LegendreMoments => {
            let k0 = params.legendre.k0;
            if k0 > k_max {
                return Err(BornError::SpectrumTooShort { needed: k0 + 1, available: k_max + 1 });
            }
            let n = params.legendre.n_moments.min(k_max - k0 + 1);
            if n == 0 {
                return Err(BornError::InvalidParameter("at least one moment is needed".into()));
            }
            let sig: Vec<f64> = (k0..k0 + n).map(|k| s.deviation(k)).collect();
            let (repr, cond) = synthesize_legendre(&sig, k0, params.ridge);
            (repr, cond, None, n, (k0..k0 + n).collect())
        }
    };
    let profile = BornProfile::from_repr(d, repr, &params.grid, Provenance::FromSpectrum(params.method));
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for &k in &used {
        let out = moments_of_profile(&profile, k)?;
        residual = residual.max((out - s.deviation(k)).abs());
        scale = scale.max(s.deviation(k).abs());
    }
    let relative = if scale > 0.0 { residual / scale } else { residual };
    if relative > params.residual_tol {
        return Err(BornError::IllConditioned { residual: relative, tolerance: params.residual_tol });
    }
    Ok(BornSynthesis {
        profile,
        residual,
        relative_residual: relative,
        moments_used: used,
        condition: cond,
        xi_band: band,
        basis_size: basis,
    })
}

/// `floor(k_V) + 1`, the default index shift of the Legendre route.
pub fn default_k0(v: &RadialPotential) -> Result<usize, BornError> {
    let t = thresholds(v)?;
    Ok(t.k_v.max(-1.0).floor() as usize + 1)
}

/// Spectrum of `V` up to `K` followed by [`born_from_spectrum`].
pub fn born_forward(v: &RadialPotential, k_max: usize, params: &BornParams, fwd: &ForwardOptions) -> Result<BornSynthesis, BornError> {
    let s = dtn_spectrum(v, k_max, fwd);
    born_from_spectrum(&s, params)
}
