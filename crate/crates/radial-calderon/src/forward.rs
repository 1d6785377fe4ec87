//! DtN eigenvalues `lambda_k[V]` of a radial potential.
//!
//! Two independent routes are provided. The spectral route integrates the
//! Riccati equation for the Weyl–Titchmarsh function backward along the
//! half-line; the ODE route integrates the regular radial solution outward
//! from near the origin.

use crate::ode::{integrate, OdeError, OdeOptions};
use crate::potentials::{beta_q_of, to_halfline, window_norm, HalfLinePotential, RadialPotential, R_MIN, T_MAX};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForwardError {
    #[error("Riccati integration diverged at t = {t} for kappa = {kappa}")]
    RiccatiBlowup { kappa: f64, t: f64 },
    #[error("outward route unavailable: {0}")]
    SingularOrigin(String),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
}

/// Shifted frequency `kappa_k = k + (d-2)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaIndex {
    pub k: usize,
    pub kappa: f64,
}

impl KappaIndex {
    pub fn new(d: usize, k: usize) -> Self {
        Self { k, kappa: k as f64 + (d as f64 - 2.0) / 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenFlag {
    Computed,
    /// The eigenvalue was set to `k` because the spectral route diverged.
    ConventionK,
}

impl EigenFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EigenFlag::Computed => "Computed",
            EigenFlag::ConventionK => "ConventionK",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtNSpectrum {
    pub d: usize,
    pub lambdas: Vec<f64>,
    pub flags: Vec<EigenFlag>,
}

impl DtNSpectrum {
    /// Highest index `K` held.
    pub fn max_k(&self) -> usize {
        self.lambdas.len().saturating_sub(1)
    }

    /// `lambda_k - k`.
    pub fn deviation(&self, k: usize) -> f64 {
        self.lambdas[k] - k as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    /// End of the backward march; by default the onset of the tail model, capped at `T_MAX`.
    pub t_max: Option<f64>,
    pub ode: OdeOptions,
    /// `|m|` above this value is treated as divergence.
    pub blowup: f64,
    /// Shallowest start of the outward route.
    pub r_min: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self { t_max: None, ode: OdeOptions { rtol: 1e-12, atol: 1e-13, max_steps: 500_000 }, blowup: 1e8, r_min: R_MIN }
    }
}

/// `M(-kappa^2)` together with a flag telling whether `kappa <= beta_Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MValue {
    pub m: f64,
    /// Below the threshold the decaying branch need not be canonical.
    pub below_threshold: bool,
}

fn march_end(q: &HalfLinePotential, opts: &ForwardOptions) -> f64 {
    opts.t_max.unwrap_or_else(|| q.tail_start().min(T_MAX))
}

/// `w = -kappa - m = int_0^inf A e^{-2 kappa t} dt`, obtained by integrating
/// `w' = 2 kappa w + w^2 - Q` backward from the tail seed.
pub(crate) fn riccati_deviation(q: &HalfLinePotential, kappa: f64, opts: &ForwardOptions) -> Result<f64, ForwardError> {
    let c = q.tail_constant();
    let disc = kappa * kappa + c;
    if disc < 0.0 {
        return Err(ForwardError::RiccatiBlowup { kappa, t: f64::INFINITY });
    }
    let root = disc.sqrt();
    let seed = if c == 0.0 { 0.0 } else { c / (kappa + root) };
    let end = march_end(q, opts);
    if end == 0.0 {
        return Ok(seed);
    }
    let limit = opts.blowup;
    let out = integrate(
        |t, w: &[f64; 1]| [2.0 * kappa * w[0] + w[0] * w[0] - q.eval(t)],
        end,
        [seed],
        0.0,
        &opts.ode,
        |_, w| (kappa + w[0]).abs() > limit,
    );
    match out {
        Ok(w) => Ok(w[0]),
        Err(OdeError::Aborted { t }) | Err(OdeError::NonFinite { t }) => Err(ForwardError::RiccatiBlowup { kappa, t }),
        Err(e) => Err(e.into()),
    }
}

/// Weyl–Titchmarsh function `M(-kappa^2)` of the half-line potential.
pub fn m_function(q: &HalfLinePotential, kappa: f64, opts: &ForwardOptions) -> Result<MValue, ForwardError> {
    let beta_q = window_norm(q).map(beta_q_of).unwrap_or(f64::INFINITY);
    m_function_with_threshold(q, kappa, opts, beta_q)
}

fn m_function_with_threshold(q: &HalfLinePotential, kappa: f64, opts: &ForwardOptions, beta_q: f64) -> Result<MValue, ForwardError> {
    let w = riccati_deviation(q, kappa, opts)?;
    Ok(MValue { m: -kappa - w, below_threshold: kappa <= beta_q })
}

fn eigen_from_halfline(q: &HalfLinePotential, d: usize, k: usize, opts: &ForwardOptions) -> (f64, EigenFlag) {
    let kappa = KappaIndex::new(d, k).kappa;
    match riccati_deviation(q, kappa, opts) {
        Ok(w) => (k as f64 + w, EigenFlag::Computed),
        Err(_) => (k as f64, EigenFlag::ConventionK),
    }
}

/// `lambda_k[V] = -(d-2)/2 - M(-kappa_k^2)`, or `(k, ConventionK)` when the
/// spectral route diverges.
pub fn dtn_eigenvalue(v: &RadialPotential, k: usize, opts: &ForwardOptions) -> (f64, EigenFlag) {
    eigen_from_halfline(&to_halfline(v), v.d, k, opts)
}

/// `lambda_0 .. lambda_K`; indices are evaluated in parallel and collected in order.
pub fn dtn_spectrum(v: &RadialPotential, k_max: usize, opts: &ForwardOptions) -> DtNSpectrum {
    let q = to_halfline(v);
    let pairs: Vec<(f64, EigenFlag)> =
        (0..=k_max).into_par_iter().map(|k| eigen_from_halfline(&q, v.d, k, opts)).collect();
    let (lambdas, flags) = pairs.into_iter().unzip();
    DtNSpectrum { d: v.d, lambdas, flags }
}

/// `lambda_k` through the regular solution `b_k = r^k w`. In `x = log r`,
/// `w'' + (2k + d - 2) w' = Q(-x) w`, started from the Frobenius exponent of
/// the tail constant.
pub fn dtn_eigenvalue_ode(v: &RadialPotential, k: usize, opts: &ForwardOptions) -> Result<f64, ForwardError> {
    let q = to_halfline(v);
    let d = v.d as f64;
    let kappa = KappaIndex::new(v.d, k).kappa;
    let c = q.tail_constant();
    if kappa * kappa + c <= 0.0 {
        return Err(ForwardError::SingularOrigin(format!(
            "kappa^2 + Q(inf) = {} <= 0, the regular solution oscillates at the origin",
            kappa * kappa + c
        )));
    }
    let gamma = -(d - 2.0) / 2.0 + (kappa * kappa + c).sqrt();
    let depth = (-opts.r_min.ln()).max(q.tail_start()).min(T_MAX);
    let rate = 2.0 * k as f64 + d - 2.0;
    if !q.eval(depth).is_finite() {
        return Err(ForwardError::SingularOrigin("profile is not finite at the start point".into()));
    }
    let y = integrate(
        |x, y: &[f64; 2]| [y[1], -rate * y[1] + q.eval(-x) * y[0]],
        -depth,
        [1.0, gamma - k as f64],
        0.0,
        &opts.ode,
        |_, _| false,
    )?;
    if y[0] == 0.0 {
        return Err(ForwardError::SingularOrigin("regular solution vanishes at r = 1".into()));
    }
    Ok(k as f64 + y[1] / y[0])
}
