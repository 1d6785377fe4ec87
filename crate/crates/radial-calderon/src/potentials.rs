//! Radial potentials in ball coordinates `q(r)` and half-line coordinates
//! `Q(t) = e^{-2t} q(e^{-t})`, the closed-form families, and the norms that
//! control solvability.

use crate::interp::Pchip;
use crate::quad::{integrate_adaptive, GaussLegendre};
use crate::special::sphere_area;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, LN_2};
use thiserror::Error;

/// Evaluation floor for profiles that are singular at the origin.
pub const R_MIN: f64 = 1e-4;
/// Default end of the half-line integration range.
pub const T_MAX: f64 = 40.0;
/// Step of the window sweep used by [`window_norm`].
pub const WINDOW_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("window integral of |Q| is not finite near y = {y}")]
    NonIntegrableWindow { y: f64 },
}

/// Behaviour of a sampled half-line potential beyond its last node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailModel {
    Zero,
    Constant(f64),
}

impl TailModel {
    pub fn value(&self) -> f64 {
        match self {
            TailModel::Zero => 0.0,
            TailModel::Constant(c) => *c,
        }
    }
}

/// Samples of `Q` on an increasing `t` grid starting at 0, interpolated by
/// monotone cubic Hermite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledHalfLine {
    interp: Pchip,
    pub tail: TailModel,
}

impl SampledHalfLine {
    pub fn new(t: Vec<f64>, values: Vec<f64>, tail: TailModel) -> Result<Self, PotentialError> {
        if t.len() < 2 || t.len() != values.len() {
            return Err(PotentialError::InvalidGrid(
                "need at least two nodes and matching value count".into(),
            ));
        }
        if t[0].abs() > 1e-12 {
            return Err(PotentialError::InvalidGrid("half-line grid must start at t = 0".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PotentialError::InvalidGrid("grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || !tail.value().is_finite() {
            return Err(PotentialError::InvalidGrid("values must be finite".into()));
        }
        Ok(Self { interp: Pchip::new(t, values), tail })
    }

    pub fn t(&self) -> &[f64] {
        self.interp.nodes()
    }

    pub fn values(&self) -> &[f64] {
        self.interp.values()
    }

    pub fn end(&self) -> f64 {
        self.interp.domain().1
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t > self.end() {
            self.tail.value()
        } else {
            self.interp.eval(t.max(0.0))
        }
    }
}

/// Half-line potential `Q` on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HalfLinePotential {
    Zero,
    Constant { q0: f64 },
    Bargmann { mu: f64, nu: f64 },
    /// `t -> base(t + shift)`, `shift >= 0`.
    Translated { base: Box<HalfLinePotential>, shift: f64 },
    /// `t -> factor * base(t)`.
    Scaled { base: Box<HalfLinePotential>, factor: f64 },
    Sampled(SampledHalfLine),
}

/// `c = (mu - nu)/(mu + nu)` for the Bargmann family.
pub fn bargmann_c(mu: f64, nu: f64) -> f64 {
    (mu - nu) / (mu + nu)
}

fn bargmann_q(mu: f64, nu: f64, t: f64) -> f64 {
    let c = bargmann_c(mu, nu);
    let e = (-2.0 * mu * t).exp();
    let den = 1.0 + c * e;
    -8.0 * mu * mu * c * e / (den * den)
}

impl HalfLinePotential {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            HalfLinePotential::Zero => 0.0,
            HalfLinePotential::Constant { q0 } => *q0,
            HalfLinePotential::Bargmann { mu, nu } => bargmann_q(*mu, *nu, t),
            HalfLinePotential::Translated { base, shift } => base.eval(t + shift),
            HalfLinePotential::Scaled { base, factor } => factor * base.eval(t),
            HalfLinePotential::Sampled(s) => s.eval(t),
        }
    }

    /// Limit of `Q(t)` as `t -> inf`; seeds the backward Riccati march.
    pub fn tail_constant(&self) -> f64 {
        match self {
            HalfLinePotential::Zero | HalfLinePotential::Bargmann { .. } => 0.0,
            HalfLinePotential::Constant { q0 } => *q0,
            HalfLinePotential::Translated { base, .. } => base.tail_constant(),
            HalfLinePotential::Scaled { base, factor } => factor * base.tail_constant(),
            HalfLinePotential::Sampled(s) => s.tail.value(),
        }
    }

    /// A point beyond which `Q` equals its tail constant to double precision.
    pub fn tail_start(&self) -> f64 {
        match self {
            HalfLinePotential::Zero | HalfLinePotential::Constant { .. } => 0.0,
            HalfLinePotential::Bargmann { mu, nu } => {
                let amp = 8.0 * mu * mu * bargmann_c(*mu, *nu).abs();
                if amp == 0.0 {
                    0.0
                } else {
                    ((amp / 1e-17).ln() / (2.0 * mu)).max(0.0)
                }
            }
            HalfLinePotential::Translated { base, shift } => (base.tail_start() - shift).max(0.0),
            HalfLinePotential::Scaled { base, .. } => base.tail_start(),
            HalfLinePotential::Sampled(s) => s.end(),
        }
    }

    /// The translate `t -> Q(t + shift)`. Closed forms stay closed: a
    /// translated Bargmann potential is Bargmann with `c' = c e^{-2 mu shift}`.
    pub fn translate(&self, shift: f64) -> HalfLinePotential {
        if shift == 0.0 {
            return self.clone();
        }
        match self {
            HalfLinePotential::Zero | HalfLinePotential::Constant { .. } => self.clone(),
            HalfLinePotential::Bargmann { mu, nu } => {
                let c = bargmann_c(*mu, *nu) * (-2.0 * mu * shift).exp();
                HalfLinePotential::Bargmann { mu: *mu, nu: mu * (1.0 - c) / (1.0 + c) }
            }
            HalfLinePotential::Translated { base, shift: s0 } => {
                HalfLinePotential::Translated { base: base.clone(), shift: s0 + shift }
            }
            HalfLinePotential::Scaled { base, factor } => {
                HalfLinePotential::Scaled { base: Box::new(base.translate(shift)), factor: *factor }
            }
            HalfLinePotential::Sampled(_) => {
                HalfLinePotential::Translated { base: Box::new(self.clone()), shift }
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> HalfLinePotential {
        match self {
            HalfLinePotential::Zero => HalfLinePotential::Zero,
            HalfLinePotential::Constant { q0 } => HalfLinePotential::Constant { q0: factor * q0 },
            HalfLinePotential::Scaled { base, factor: f0 } => {
                HalfLinePotential::Scaled { base: base.clone(), factor: f0 * factor }
            }
            _ => HalfLinePotential::Scaled { base: Box::new(self.clone()), factor },
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            HalfLinePotential::Zero => true,
            HalfLinePotential::Constant { q0 } => *q0 == 0.0,
            HalfLinePotential::Bargmann { mu, nu } => mu == nu,
            HalfLinePotential::Translated { base, .. } => base.is_zero(),
            HalfLinePotential::Scaled { base, factor } => *factor == 0.0 || base.is_zero(),
            HalfLinePotential::Sampled(_) => false,
        }
    }
}

/// Samples of a ball profile on `(0, 1]`. Interpolation is monotone cubic
/// Hermite of `r^2 q(r)` in the variable `-log r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledProfile {
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    /// Model for `Q = r^2 q` below the first node.
    pub tail: TailModel,
    halfline: SampledHalfLine,
}

impl SampledProfile {
    pub fn new(r: Vec<f64>, q: Vec<f64>, tail: TailModel) -> Result<Self, PotentialError> {
        if r.len() < 2 || r.len() != q.len() {
            return Err(PotentialError::InvalidGrid(
                "need at least two nodes and matching value count".into(),
            ));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) || r[0] <= 0.0 {
            return Err(PotentialError::InvalidGrid("grid must be strictly increasing in (0, 1]".into()));
        }
        if (r[r.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(PotentialError::InvalidGrid("last node must be r = 1".into()));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(PotentialError::InvalidGrid("values must be finite".into()));
        }
        let t: Vec<f64> = r.iter().rev().map(|v| -v.ln()).map(|v| if v.abs() < 1e-15 { 0.0 } else { v }).collect();
        let big_q: Vec<f64> = r.iter().zip(&q).rev().map(|(a, b)| a * a * b).collect();
        let halfline = SampledHalfLine::new(t, big_q, tail)?;
        Ok(Self { r, q, tail, halfline })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.halfline.eval(-r.ln()) / (r * r)
    }
}

/// Profile of a radial potential `V(x) = q(|x|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Zero,
    InverseSquare { q0: f64 },
    Bargmann { mu: f64, nu: f64 },
    /// `r -> s^2 base(s r)`.
    ScaledDilate { base: Box<Profile>, s: f64 },
    /// `r -> factor * base(r)`.
    Scaled { base: Box<Profile>, factor: f64 },
    Sampled(SampledProfile),
}

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::InverseSquare { q0 } => q0 / (r * r),
            Profile::Bargmann { mu, nu } => {
                let c = bargmann_c(*mu, *nu);
                let den = 1.0 + c * r.powf(2.0 * mu);
                -8.0 * mu * mu * c * r.powf(2.0 * (mu - 1.0)) / (den * den)
            }
            Profile::ScaledDilate { base, s } => s * s * base.eval(s * r),
            Profile::Scaled { base, factor } => factor * base.eval(r),
            Profile::Sampled(p) => p.eval(r),
        }
    }

    fn validate(&self) -> Result<(), PotentialError> {
        let bad = |m: &str| Err(PotentialError::InvalidParameter(m.to_string()));
        match self {
            Profile::InverseSquare { q0 } if !q0.is_finite() => bad("q0 must be finite"),
            Profile::Bargmann { mu, nu } if !(mu.is_finite() && *mu > 0.0) => bad("mu must be > 0"),
            Profile::Bargmann { nu, .. } if !(nu.is_finite() && *nu >= 0.0) => bad("nu must be >= 0"),
            Profile::ScaledDilate { s, .. } if !(*s > 0.0 && *s <= 1.0) => bad("dilation s must lie in (0, 1]"),
            Profile::ScaledDilate { base, .. } => base.validate(),
            Profile::Scaled { factor, .. } if !factor.is_finite() => bad("factor must be finite"),
            Profile::Scaled { base, .. } => base.validate(),
            _ => Ok(()),
        }
    }
}

/// Radial potential on the unit ball of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialPotential {
    pub d: usize,
    pub profile: Profile,
}

impl RadialPotential {
    pub fn new(d: usize, profile: Profile) -> Result<Self, PotentialError> {
        if d < 2 {
            return Err(PotentialError::InvalidParameter("dimension d must be >= 2".into()));
        }
        profile.validate()?;
        Ok(Self { d, profile })
    }

    pub fn zero(d: usize) -> Self {
        Self { d, profile: Profile::Zero }
    }

    pub fn inverse_square(d: usize, q0: f64) -> Self {
        Self::new(d, Profile::InverseSquare { q0 }).expect("finite q0")
    }

    pub fn bargmann(d: usize, mu: f64, nu: f64) -> Self {
        Self::new(d, Profile::Bargmann { mu, nu }).expect("valid Bargmann parameters")
    }

    pub fn q(&self, r: f64) -> f64 {
        self.profile.eval(r)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let profile = match &self.profile {
            Profile::Zero => Profile::Zero,
            Profile::InverseSquare { q0 } => Profile::InverseSquare { q0: factor * q0 },
            p => Profile::Scaled { base: Box::new(p.clone()), factor },
        };
        Self { d: self.d, profile }
    }

    /// Dilation `V_s(x) = s^2 V(s x)`, `s` in `(0, 1]`.
    pub fn dilate(&self, s: f64) -> Result<Self, PotentialError> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(PotentialError::InvalidParameter(format!("dilation s = {s} not in (0, 1]")));
        }
        if s == 1.0 {
            return Ok(self.clone());
        }
        let profile = dilate_profile(&self.profile, s);
        Ok(Self { d: self.d, profile })
    }
}

fn dilate_profile(p: &Profile, s: f64) -> Profile {
    match p {
        Profile::Zero | Profile::InverseSquare { .. } => p.clone(),
        Profile::ScaledDilate { base, s: s0 } => Profile::ScaledDilate { base: base.clone(), s: s0 * s },
        Profile::Scaled { base, factor } => {
            Profile::Scaled { base: Box::new(dilate_profile(base, s)), factor: *factor }
        }
        _ => Profile::ScaledDilate { base: Box::new(p.clone()), s },
    }
}

fn profile_to_halfline(p: &Profile) -> HalfLinePotential {
    match p {
        Profile::Zero => HalfLinePotential::Zero,
        Profile::InverseSquare { q0 } => HalfLinePotential::Constant { q0: *q0 },
        Profile::Bargmann { mu, nu } => HalfLinePotential::Bargmann { mu: *mu, nu: *nu },
        Profile::ScaledDilate { base, s } => profile_to_halfline(base).translate(-s.ln()),
        Profile::Scaled { base, factor } => profile_to_halfline(base).scaled(*factor),
        Profile::Sampled(sp) => HalfLinePotential::Sampled(sp.halfline.clone()),
    }
}

/// `Q(t) = e^{-2t} q(e^{-t})`.
pub fn to_halfline(v: &RadialPotential) -> HalfLinePotential {
    profile_to_halfline(&v.profile)
}

fn halfline_to_profile(q: &HalfLinePotential) -> Profile {
    match q {
        HalfLinePotential::Zero => Profile::Zero,
        HalfLinePotential::Constant { q0 } => Profile::InverseSquare { q0: *q0 },
        HalfLinePotential::Bargmann { mu, nu } => Profile::Bargmann { mu: *mu, nu: *nu },
        HalfLinePotential::Translated { base, shift } => {
            dilate_profile(&halfline_to_profile(base), (-shift).exp())
        }
        HalfLinePotential::Scaled { base, factor } => {
            Profile::Scaled { base: Box::new(halfline_to_profile(base)), factor: *factor }
        }
        HalfLinePotential::Sampled(s) => {
            let r: Vec<f64> = s.t().iter().rev().map(|t| (-t).exp()).collect();
            let qv: Vec<f64> =
                s.t().iter().zip(s.values()).rev().map(|(t, v)| v * (2.0 * t).exp()).collect();
            Profile::Sampled(SampledProfile { r, q: qv, tail: s.tail, halfline: s.clone() })
        }
    }
}

/// `q(r) = r^{-2} Q(-log r)`.
pub fn from_halfline(q: &HalfLinePotential, d: usize) -> RadialPotential {
    RadialPotential { d, profile: halfline_to_profile(q) }
}

/// Nodes of an 8-point rule per sweep cell.
fn cell_integrals(q: &HalfLinePotential, end: f64) -> Result<Vec<f64>, PotentialError> {
    let gl = GaussLegendre::new(8);
    let cells = (end / WINDOW_STEP).round() as usize;
    let mut out = Vec::with_capacity(cells);
    for i in 0..cells {
        let a = i as f64 * WINDOW_STEP;
        let v = gl.integrate(|t| q.eval(t).abs(), a, a + WINDOW_STEP);
        if !v.is_finite() {
            return Err(PotentialError::NonIntegrableWindow { y: a });
        }
        out.push(v);
    }
    Ok(out)
}

/// `sup_y int_y^{y+1} |Q|`, swept over `y` on a grid of step 0.01 up to
/// `T_MAX`, combined with the tail constant for `y` beyond.
pub fn window_norm(q: &HalfLinePotential) -> Result<f64, PotentialError> {
    match q {
        HalfLinePotential::Zero => return Ok(0.0),
        HalfLinePotential::Constant { q0 } => return Ok(q0.abs()),
        _ if q.is_zero() => return Ok(0.0),
        _ => {}
    }
    let per_window = (1.0 / WINDOW_STEP).round() as usize;
    let cells = cell_integrals(q, T_MAX + 1.0)?;
    let mut cum = vec![0.0; cells.len() + 1];
    for (i, c) in cells.iter().enumerate() {
        cum[i + 1] = cum[i] + c;
    }
    let sweep = (0..=(cells.len() - per_window))
        .map(|j| cum[j + per_window] - cum[j])
        .fold(0.0, f64::max);
    Ok(sweep.max(q.tail_constant().abs()))
}

/// Sup over dyadic windows `[j log 2, (j+1) log 2]` of `int |Q|`.
pub fn dyadic_window_sup(q: &HalfLinePotential) -> Result<f64, PotentialError> {
    match q {
        HalfLinePotential::Zero => return Ok(0.0),
        HalfLinePotential::Constant { q0 } => return Ok(q0.abs() * LN_2),
        _ if q.is_zero() => return Ok(0.0),
        _ => {}
    }
    let windows = (T_MAX / LN_2).ceil() as usize;
    let mut best = q.tail_constant().abs() * LN_2;
    for j in 0..windows {
        let a = j as f64 * LN_2;
        let r = integrate_adaptive(|t| q.eval(t).abs(), a, a + LN_2, 1e-13, 1e-12)
            .map_err(|_| PotentialError::NonIntegrableWindow { y: a })?;
        best = best.max(r.value);
    }
    Ok(best)
}

/// `||V||_{V_d} = |S^{d-1}| sup_j int_{j log 2}^{(j+1) log 2} |Q|`.
pub fn vd_norm(v: &RadialPotential) -> Result<f64, PotentialError> {
    Ok(sphere_area(v.d) * dyadic_window_sup(&to_halfline(v))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub vd_norm: f64,
    pub window_norm: f64,
    pub beta_v: f64,
    pub beta_q: f64,
    pub k_v: f64,
}

pub fn beta_q_of(window: f64) -> f64 {
    2.0 * (2.0 * window).sqrt().max(E * window)
}

pub fn beta_v_of(d: usize, vd: f64) -> f64 {
    let area = sphere_area(d);
    2.0 / area * (6.0 * area * vd).sqrt().max(3.0 * E * vd)
}

pub fn thresholds(v: &RadialPotential) -> Result<NormBundle, PotentialError> {
    let vd = vd_norm(v)?;
    let window = window_norm(&to_halfline(v))?;
    let beta_v = beta_v_of(v.d, vd);
    Ok(NormBundle {
        vd_norm: vd,
        window_norm: window,
        beta_v,
        beta_q: beta_q_of(window),
        k_v: beta_v - (v.d as f64 - 2.0) / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn halfline_of_closed_forms() {
        assert_eq!(to_halfline(&RadialPotential::zero(3)), HalfLinePotential::Zero);
        assert_eq!(
            to_halfline(&RadialPotential::inverse_square(3, 1.0)),
            HalfLinePotential::Constant { q0: 1.0 }
        );
        let b = to_halfline(&RadialPotential::bargmann(3, 1.0, 2.0));
        let c = -1.0 / 3.0;
        let expect = -8.0 * c / ((1.0 + c) * (1.0 + c));
        assert_relative_eq!(b.eval(0.0), expect, max_relative = 1e-15);
        assert_relative_eq!(b.eval(0.0), 6.0, max_relative = 1e-14);
    }

    #[test]
    fn from_halfline_examples() {
        assert_eq!(from_halfline(&HalfLinePotential::Zero, 3).profile, Profile::Zero);
        let v = from_halfline(&HalfLinePotential::Constant { q0: 1.0 }, 3);
        assert_relative_eq!(v.q(0.5), 4.0, max_relative = 1e-15);
        let (mu, nu) = (1.0f64, 2.0f64);
        let v = from_halfline(&HalfLinePotential::Bargmann { mu, nu }, 3);
        let c = (mu - nu) / (mu + nu);
        let r: f64 = 0.5;
        let expect = -8.0 * mu * mu * c * r.powf(2.0 * (mu - 1.0)) / (1.0 + c * r.powf(2.0 * mu)).powi(2);
        assert_relative_eq!(v.q(r), expect, max_relative = 1e-14);
    }

    #[test]
    fn window_norms() {
        assert_eq!(window_norm(&HalfLinePotential::Zero).unwrap(), 0.0);
        assert_eq!(window_norm(&HalfLinePotential::Constant { q0: 1.0 }).unwrap(), 1.0);
        let b = HalfLinePotential::Bargmann { mu: 1.0, nu: 2.0 };
        let oracle = integrate_adaptive(|t| b.eval(t).abs(), 0.0, 1.0, 1e-14, 1e-14).unwrap().value;
        assert_relative_eq!(window_norm(&b).unwrap(), oracle, max_relative = 1e-12);
    }

    #[test]
    fn vd_norm_examples() {
        assert_eq!(vd_norm(&RadialPotential::zero(3)).unwrap(), 0.0);
        let v = vd_norm(&RadialPotential::inverse_square(3, 1.0)).unwrap();
        assert_relative_eq!(v, 4.0 * PI * LN_2, max_relative = 1e-14);
        assert!((v - 8.7103).abs() < 1e-4);
    }

    #[test]
    fn threshold_examples() {
        let z = thresholds(&RadialPotential::zero(3)).unwrap();
        assert_eq!((z.vd_norm, z.window_norm, z.beta_v, z.beta_q), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(z.k_v, -0.5);
        assert_relative_eq!(beta_q_of(1.0), 2.0 * E, max_relative = 1e-15);
        let t = thresholds(&RadialPotential::inverse_square(3, 1.0)).unwrap();
        let vd = 4.0 * PI * LN_2;
        let area = 4.0 * PI;
        let expected = 2.0 / area * (6.0 * area * vd).sqrt().max(3.0 * E * vd);
        assert_relative_eq!(t.beta_v, expected, max_relative = 1e-13);
        assert_relative_eq!(t.k_v, expected - 0.5, max_relative = 1e-13);
        assert!(t.beta_q <= t.beta_v);
    }

    #[test]
    fn dilation_examples() {
        let b = RadialPotential::bargmann(3, 1.0, 2.0);
        assert_eq!(b.dilate(1.0).unwrap(), b);
        let inv = RadialPotential::inverse_square(3, 0.7);
        assert_eq!(inv.dilate(0.3).unwrap(), inv);
        let half = b.dilate(0.5).unwrap();
        let qh = to_halfline(&half);
        let q = to_halfline(&b);
        for i in 0..50 {
            let t = i as f64 * 0.1;
            assert!((qh.eval(t) - q.eval(t + LN_2)).abs() < 1e-12);
        }
        for i in 1..=20 {
            let r = i as f64 / 20.0;
            assert!((half.q(r) - 0.25 * b.q(0.5 * r)).abs() < 1e-12);
        }
        assert!(b.dilate(0.0).is_err());
        assert!(b.dilate(1.5).is_err());
    }

    #[test]
    fn sampled_validation() {
        assert!(SampledProfile::new(vec![0.5, 0.9], vec![1.0, 2.0], TailModel::Zero).is_err());
        assert!(SampledProfile::new(vec![0.5, 0.4, 1.0], vec![1.0, 2.0, 3.0], TailModel::Zero).is_err());
        assert!(SampledProfile::new(vec![0.5, 1.0], vec![1.0, f64::NAN], TailModel::Zero).is_err());
        assert!(SampledProfile::new(vec![0.5, 1.0], vec![1.0, 2.0], TailModel::Zero).is_ok());
    }

    #[test]
    fn sampled_round_trip() {
        let b = HalfLinePotential::Bargmann { mu: 1.0, nu: 1.2 };
        let t: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
        let vals: Vec<f64> = t.iter().map(|&x| b.eval(x)).collect();
        let s = HalfLinePotential::Sampled(SampledHalfLine::new(t.clone(), vals.clone(), TailModel::Zero).unwrap());
        let back = to_halfline(&from_halfline(&s, 3));
        for (x, v) in t.iter().zip(&vals) {
            assert!((back.eval(*x) - v).abs() < 1e-12);
        }
        // Between nodes the interpolant tracks the closed form.
        assert!((back.eval(1.005) - b.eval(1.005)).abs() < 1e-7);
    }

    fn families() -> Vec<RadialPotential> {
        vec![
            RadialPotential::inverse_square(3, 1.0),
            RadialPotential::inverse_square(2, -0.3),
            RadialPotential::bargmann(3, 1.0, 2.0),
            RadialPotential::bargmann(2, 2.0, 1.0),
            RadialPotential::bargmann(4, 1.0, 1.2),
            RadialPotential::bargmann(3, 1.0, 2.0).dilate(0.6).unwrap(),
        ]
    }

    #[test]
    fn sandwich_on_closed_forms() {
        for v in families() {
            let area = sphere_area(v.d);
            let w = window_norm(&to_halfline(&v)).unwrap();
            let n = vd_norm(&v).unwrap();
            assert!(area * w / 3.0 <= n * (1.0 + 1e-12), "{v:?}");
            assert!(n <= area * w * (1.0 + 1e-12), "{v:?}");
        }
    }

    proptest! {
        #[test]
        fn dilation_composes(s1 in 0.05f64..1.0, s2 in 0.05f64..1.0, mu in 0.3f64..3.0, nu in 0.0f64..3.0) {
            let v = RadialPotential::bargmann(3, mu, nu);
            let a = v.dilate(s1).unwrap().dilate(s2).unwrap();
            let b = v.dilate(s1 * s2).unwrap();
            for i in 1..=10 {
                let r = i as f64 / 10.0;
                let (x, y) = (a.q(r), b.q(r));
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn dilation_is_translation(s in 0.05f64..1.0, mu in 0.3f64..3.0, nu in 0.0f64..3.0) {
            let v = RadialPotential::bargmann(3, mu, nu);
            let qd = to_halfline(&v.dilate(s).unwrap());
            let q = to_halfline(&v);
            for i in 0..40 {
                let t = i as f64 * 0.25;
                prop_assert!((qd.eval(t) - q.eval(t - s.ln())).abs() <= 1e-12 * (1.0 + q.eval(t - s.ln()).abs()));
            }
        }
    }
}
