//! Layer stripping in half-line variables.
//!
//! `K(t, s) = A(t - s, s)`, where `A(., s)` is the amplitude of the
//! translate `Q(. + s)`, evolves by
//! `d K(t, s)/ds = int_s^t K(y, s) K(t - y + s, s) dy` from `K(t, 0) = A(t)`,
//! and the potential is read off the diagonal, `Q(s) = K(s, s)`.
//! On a uniform grid the inner integral is a discrete self-convolution of
//! each `s`-level, so no interpolation is needed.

use crate::born::{born_from_spectrum, AAmplitude, BornError, BornParams, BornProfile, BornSynthesis};
use crate::forward::DtNSpectrum;
use crate::potentials::{from_halfline, HalfLinePotential, PotentialError, RadialPotential, SampledHalfLine, TailModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("|K| exceeded {limit:e} at (t, s) = ({t}, {s})")]
    StepBlowup { t: f64, s: f64, limit: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite input amplitude at t = {0}")]
    NonFiniteInput(f64),
    #[error(transparent)]
    Born(#[from] BornError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Amplitude fed into the march.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSource {
    Amplitude(AAmplitude),
    Born(BornProfile),
}

impl LayerSource {
    pub fn amplitude(&self, t: f64) -> f64 {
        match self {
            LayerSource::Amplitude(a) => a.eval(t),
            LayerSource::Born(p) => p.amplitude(t),
        }
    }

    fn label(&self) -> String {
        match self {
            LayerSource::Amplitude(a) => format!("amplitude {a:?}").chars().take(200).collect(),
            LayerSource::Born(p) => format!("Born profile ({:?}, {} nodes)", p.provenance, p.r.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scheme {
    /// Heun predictor-corrector in `s`, trapezoid in the inner variable.
    #[default]
    HeunTrapezoid,
}

/// `K(t_i, s_j)` for `s_j <= t_i` on a uniform grid of step `dt` over `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerField {
    pub dt: f64,
    /// Number of steps, `T = n dt`.
    pub n: usize,
    /// `rows[j][a] = K(t_{j+a}, s_j)`.
    pub rows: Vec<Vec<f64>>,
    pub origin: String,
    /// Largest defect of the integral identity between `s = 0` and the diagonal.
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl LayerField {
    pub fn t_max(&self) -> f64 {
        self.n as f64 * self.dt
    }

    /// Value at grid node `(t_i, s_j)`, `j <= i`.
    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.rows[j][i - j]
    }

    /// Bilinear value in `(t - s, s)`; `None` outside the evolved triangle.
    pub fn at(&self, t: f64, s: f64) -> Option<f64> {
        let x = t - s;
        if s < -1e-12 || x < -1e-12 || t > self.t_max() * (1.0 + 1e-12) {
            return None;
        }
        let fj = (s / self.dt).max(0.0);
        let fa = (x / self.dt).max(0.0);
        let j0 = (fj.round() - fj).abs() < 1e-9;
        let a0 = (fa.round() - fa).abs() < 1e-9;
        let get = |j: usize, a: usize| -> Option<f64> { self.rows.get(j).and_then(|r| r.get(a)).copied() };
        if j0 && a0 {
            return get(fj.round() as usize, fa.round() as usize);
        }
        let (j, a) = (fj.floor() as usize, fa.floor() as usize);
        let (wj, wa) = (fj - j as f64, fa - a as f64);
        let v00 = get(j, a)?;
        let v01 = if wa > 0.0 { get(j, a + 1)? } else { v00 };
        let v10 = if wj > 0.0 { get(j + 1, a)? } else { v00 };
        let v11 = if wa > 0.0 && wj > 0.0 { get(j + 1, a + 1)? } else if wj > 0.0 { v10 } else { v01 };
        Some((1.0 - wj) * ((1.0 - wa) * v00 + wa * v01) + wj * ((1.0 - wa) * v10 + wa * v11))
    }

    /// Half-line amplitude of the translate by `s_j`: `A(x, s_j) = K(s_j + x, s_j)`.
    pub fn level(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }
}

/// `F[a] = dt * (sum_{b<=a} r[b] r[a-b] - r[0] r[a])`, the trapezoid rule
/// for `int_s^t K(y, s) K(t - y + s, s) dy` at `t = s + a dt`.
fn level_rate(row: &[f64], dt: f64) -> Vec<f64> {
    let conv = |a: usize| -> f64 {
        let mut acc = 0.0;
        for b in 0..=a {
            acc += row[b] * row[a - b];
        }
        dt * (acc - row[0] * row[a])
    };
    if row.len() > 256 {
        (0..row.len()).into_par_iter().map(conv).collect()
    } else {
        (0..row.len()).map(conv).collect()
    }
}

pub const BLOWUP_LIMIT: f64 = 1e8;

/// Marches the layer field over `0 <= s <= t <= T`.
pub fn evolve_layer_field(source: &LayerSource, t_max: f64, dt: f64, scheme: Scheme) -> Result<LayerField, ReconstructError> {
    let Scheme::HeunTrapezoid = scheme;
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(ReconstructError::InvalidGrid("T and dt must be positive".into()));
    }
    let steps = t_max / dt;
    let n = steps.round() as usize;
    if (steps - n as f64).abs() > 1e-9 * steps.max(1.0) {
        return Err(ReconstructError::InvalidGrid(format!("dt = {dt} does not divide T = {t_max}")));
    }
    let mut row0 = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 * dt;
        let v = source.amplitude(t);
        if !v.is_finite() {
            return Err(ReconstructError::NonFiniteInput(t));
        }
        row0.push(v);
    }
    let mut warnings = Vec::new();
    // Uniqueness of the march is local in s with step length of order 1/D.
    let d_const = 2.0 * dt * row0.iter().map(|v| v.abs()).sum::<f64>();
    if d_const * dt > 0.1 {
        warnings.push(format!("large amplitude: 2 int|A| = {d_const:.3e}; consider a smaller step"));
    }
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(row0);
    for j in 0..n {
        let cur = &rows[j];
        let f = level_rate(cur, dt);
        let pred: Vec<f64> = (1..cur.len()).map(|a| cur[a] + dt * f[a]).collect();
        let fp = level_rate(&pred, dt);
        let next: Vec<f64> = (1..cur.len()).map(|a| cur[a] + 0.5 * dt * (f[a] + fp[a - 1])).collect();
        if let Some((a, _)) = next.iter().enumerate().find(|(_, v)| !(v.abs() <= BLOWUP_LIMIT)) {
            let s = (j + 1) as f64 * dt;
            return Err(ReconstructError::StepBlowup { t: s + a as f64 * dt, s, limit: BLOWUP_LIMIT });
        }
        rows.push(next);
    }
    let residual = identity_residual(&rows, dt);
    Ok(LayerField { dt, n, rows, origin: source.label(), residual, warnings })
}

/// `max_i |K(t_i, t_i) - K(t_i, 0) - int_0^{t_i} (int K K dy) ds|` with the
/// outer integral taken by the trapezoid rule over the computed levels.
fn identity_residual(rows: &[Vec<f64>], dt: f64) -> f64 {
    let rates: Vec<Vec<f64>> = rows.par_iter().map(|r| level_rate(r, dt)).collect();
    let n = rows.len() - 1;
    let mut worst = 0.0f64;
    for i in 1..=n {
        let mut integral = 0.0;
        for j in 0..=i {
            let w = if j == 0 || j == i { 0.5 } else { 1.0 };
            integral += w * rates[j][i - j];
        }
        integral *= dt;
        let defect = rows[i][0] - rows[0][i] - integral;
        worst = worst.max(defect.abs());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Extraction {
    /// `Q(s) = K(s, s)`.
    #[default]
    Diagonal,
    /// `Q(t) = K(t, t - dt)`; `K(t, s) - Q(t)` vanishes quadratically in `t - s`.
    FirstInterior,
    /// `Q(t) = (4 K(t, t - dt) - K(t, t - 2 dt)) / 3`.
    Richardson,
}

/// Sampled potential on `[0, T]` read off the field. Off-diagonal rules
/// fall back to the diagonal where their nodes are missing.
pub fn extract_potential(field: &LayerField, rule: Extraction) -> Result<HalfLinePotential, ReconstructError> {
    let mut t = Vec::with_capacity(field.n + 1);
    let mut q = Vec::with_capacity(field.n + 1);
    for i in 0..=field.n {
        t.push(i as f64 * field.dt);
        let diag = field.node(i, i);
        q.push(match rule {
            Extraction::Diagonal => diag,
            Extraction::FirstInterior if i >= 1 => field.node(i, i - 1),
            Extraction::Richardson if i >= 2 => (4.0 * field.node(i, i - 1) - field.node(i, i - 2)) / 3.0,
            _ => diag,
        });
    }
    if field.n == 0 {
        return Err(ReconstructError::InvalidGrid("field has a single level".into()));
    }
    Ok(HalfLinePotential::Sampled(SampledHalfLine::new(t, q, TailModel::Zero)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructParams {
    pub dt: f64,
    pub extraction: Extraction,
    pub scheme: Scheme,
    pub born: BornParams,
}

impl Default for ReconstructParams {
    fn default() -> Self {
        Self { dt: 1e-3, extraction: Extraction::Diagonal, scheme: Scheme::HeunTrapezoid, born: BornParams::default() }
    }
}

/// Data accepted by [`reconstruct_potential`].
#[derive(Debug, Clone, Copy)]
pub enum ReconstructInput<'a> {
    Spectrum(&'a DtNSpectrum),
    Born(&'a BornProfile),
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Sampled on `(b, 1]`; zero below the last layer.
    pub potential: RadialPotential,
    pub halfline: HalfLinePotential,
    pub field: LayerField,
    /// Present when the Born profile was synthesized from a spectrum.
    pub synthesis: Option<BornSynthesis>,
    pub b: f64,
}

/// Born profile, march to `S = -log b`, extraction, and back to the ball.
pub fn reconstruct_potential(input: ReconstructInput<'_>, b: f64, params: &ReconstructParams) -> Result<Reconstruction, ReconstructError> {
    if !(b > crate::potentials::R_MIN && b < 1.0) {
        return Err(ReconstructError::InvalidGrid(format!("b = {b} must lie in (r_min, 1)")));
    }
    let (profile, synthesis) = match input {
        ReconstructInput::Spectrum(s) => {
            let syn = born_from_spectrum(s, &params.born)?;
            (syn.profile.clone(), Some(syn))
        }
        ReconstructInput::Born(p) => (p.clone(), None),
    };
    let d = profile.d;
    let steps = (-b.ln() / params.dt - 1e-9).ceil() as usize;
    let field = evolve_layer_field(&LayerSource::Born(profile), steps as f64 * params.dt, params.dt, params.scheme)?;
    let halfline = extract_potential(&field, params.extraction)?;
    let potential = from_halfline(&halfline, d);
    Ok(Reconstruction { potential, halfline, field, synthesis, b })
}

/// Inverse of the march: the amplitude `A = K(., 0)` whose field has
/// diagonal `Q` on the grid `t_i = i dt`, `i <= n`.
///
/// Each node is a scalar linear equation once all earlier `t` columns are
/// known, so the map is computed exactly up to the discretization.
pub fn amplitude_from_potential(q: &HalfLinePotential, t_max: f64, dt: f64) -> Result<Vec<f64>, ReconstructError> {
    let n = (t_max / dt).round() as usize;
    if n == 0 {
        return Err(ReconstructError::InvalidGrid("need at least one step".into()));
    }
    // cols[i][j] = K(t_i, s_j) for j <= i.
    let diag: Vec<f64> = (0..=n).map(|i| q.eval(i as f64 * dt)).collect();
    // rate(i, j) = dt * (sum_{m=j}^{i} K(t_m, s_j) K(t_{i-m+j}, s_j) - K(s_j, s_j) K(t_i, s_j)).
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut col = vec![0.0; i + 1];
        col[i] = diag[i];
        if i == 0 {
            cols.push(col);
            continue;
        }
        // Interior part of the convolution: m = j+1 .. i-1 uses only earlier columns.
        let interior = |j: usize, cols: &Vec<Vec<f64>>| -> f64 {
            let mut acc = 0.0;
            for m in j + 1..i {
                acc += cols[m][j] * cols[i - m + j][j];
            }
            acc
        };
        // The rate vanishes on the diagonal.
        let mut f_next = 0.0;
        for j in (0..i).rev() {
            // K_ij = K_i,j+1 - dt/2 (F_ij + F_i,j+1), with F_ij = dt (I_j + Q_j K_ij).
            let ij = interior(j, &cols);
            let kij = (col[j + 1] - 0.5 * dt * (dt * ij + f_next)) / (1.0 + 0.5 * dt * dt * diag[j]);
            col[j] = kij;
            f_next = dt * (ij + diag[j] * kij);
        }
        cols.push(col);
    }
    Ok(cols.iter().map(|c| c[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::born::{born_closed_form, RadialGrid};
    use crate::potentials::bargmann_c;
    use proptest::prelude::*;

    fn bargmann_a(mu: f64, nu: f64) -> LayerSource {
        LayerSource::Amplitude(AAmplitude::Bargmann { mu, nu })
    }

    fn translated_nu(mu: f64, nu: f64, s: f64) -> f64 {
        let c = bargmann_c(mu, nu) * (-2.0 * mu * s).exp();
        mu * (1.0 - c) / (1.0 + c)
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let f = evolve_layer_field(&LayerSource::Amplitude(AAmplitude::Zero), 0.5, 0.01, Scheme::HeunTrapezoid).unwrap();
        assert!(f.rows.iter().flatten().all(|&v| v == 0.0));
        let q = extract_potential(&f, Extraction::Diagonal).unwrap();
        assert!((0..50).all(|i| q.eval(i as f64 * 0.01) == 0.0));
    }

    #[test]
    fn rejects_non_dividing_step() {
        let r = evolve_layer_field(&bargmann_a(1.0, 2.0), 0.5, 0.3, Scheme::HeunTrapezoid);
        assert!(matches!(r, Err(ReconstructError::InvalidGrid(_))));
    }

    #[test]
    fn bargmann_field_matches_translated_amplitudes() {
        let (mu, nu) = (1.0, 2.0);
        let f = evolve_layer_field(&bargmann_a(mu, nu), 1.0, 1e-3, Scheme::HeunTrapezoid).unwrap();
        for &(t, s) in &[(0.5, 0.5), (1.0, 0.5), (0.8, 0.2), (1.0, 1.0)] {
            let nus = translated_nu(mu, nu, s);
            let expect = 2.0 * (nus * nus - mu * mu) * (-2.0 * nus * (t - s)).exp();
            assert!((f.at(t, s).unwrap() - expect).abs() < 1e-4, "t={t} s={s}");
        }
        assert!(f.residual < 1e-5, "residual {}", f.residual);
    }

    #[test]
    fn bargmann_extraction_matches_potential() {
        let q = HalfLinePotential::Bargmann { mu: 1.0, nu: 2.0 };
        let f = evolve_layer_field(&bargmann_a(1.0, 2.0), 0.72, 1e-3, Scheme::HeunTrapezoid).unwrap();
        for rule in [Extraction::Diagonal, Extraction::FirstInterior, Extraction::Richardson] {
            let rec = extract_potential(&f, rule).unwrap();
            let err = (0..=700).map(|i| i as f64 * 1e-3).map(|s| (rec.eval(s) - q.eval(s)).abs()).fold(0.0, f64::max);
            assert!(err < 1e-2, "{rule:?}: {err}");
        }
    }

    #[test]
    fn small_data_is_linear() {
        let eps = 1e-4;
        let a = AAmplitude::Bargmann { mu: 1.0, nu: 2.0 };
        let scaled = LayerSource::Born(born_closed_form_scaled(&a, eps));
        let f = evolve_layer_field(&scaled, 1.0, 1e-2, Scheme::HeunTrapezoid).unwrap();
        for j in 0..=f.n {
            for (a_idx, v) in f.rows[j].iter().enumerate() {
                let t = (j + a_idx) as f64 * f.dt;
                assert!((v - eps * a.eval(t)).abs() <= 1e-6);
            }
        }
        let q = extract_potential(&f, Extraction::Diagonal).unwrap();
        assert!((0..=100).all(|i| (q.eval(i as f64 * 0.01) - eps * a.eval(i as f64 * 0.01)).abs() <= 1e-6));
    }

    fn born_closed_form_scaled(a: &AAmplitude, eps: f64) -> BornProfile {
        let grid = RadialGrid::log_uniform(1e-3, 1e-3);
        let values: Vec<f64> = grid.0.iter().map(|&r| eps * a.eval(-r.ln()) / (r * r)).collect();
        BornProfile::from_samples(3, grid.0, values).unwrap()
    }

    #[test]
    fn local_dependence() {
        let base = AAmplitude::Bargmann { mu: 1.0, nu: 2.0 };
        let t: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let mut v: Vec<f64> = t.iter().map(|&x| base.eval(x)).collect();
        let f1 = evolve_layer_field(&LayerSource::Amplitude(AAmplitude::sampled(t.clone(), v.clone()).unwrap()), 1.0, 1e-2, Scheme::HeunTrapezoid).unwrap();
        for (x, y) in t.iter().zip(v.iter_mut()) {
            if *x > 0.6 {
                *y += 3.0 * (x - 0.6);
            }
        }
        let f2 = evolve_layer_field(&LayerSource::Amplitude(AAmplitude::sampled(t, v).unwrap()), 1.0, 1e-2, Scheme::HeunTrapezoid).unwrap();
        for j in 0..=f1.n {
            for a in 0..f1.rows[j].len() {
                if (j + a) as f64 * 0.01 <= 0.6 - 1e-12 {
                    assert_eq!(f1.rows[j][a], f2.rows[j][a]);
                }
            }
        }
    }

    #[test]
    fn blowup_is_reported() {
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let big = AAmplitude::sampled(t.clone(), vec![100.0; t.len()]).unwrap();
        let r = evolve_layer_field(&LayerSource::Amplitude(big), 2.0, 0.01, Scheme::HeunTrapezoid);
        assert!(matches!(r, Err(ReconstructError::StepBlowup { .. })), "{r:?}");
    }

    #[test]
    fn inverse_march_round_trip() {
        let q = HalfLinePotential::Bargmann { mu: 1.0, nu: 2.0 };
        let a = amplitude_from_potential(&q, 0.8, 1e-3).unwrap();
        let exact = AAmplitude::Bargmann { mu: 1.0, nu: 2.0 };
        let err = a.iter().enumerate().map(|(i, v)| (v - exact.eval(i as f64 * 1e-3)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "err {err}");
        let t: Vec<f64> = (0..a.len()).map(|i| i as f64 * 1e-3).collect();
        let f = evolve_layer_field(&LayerSource::Amplitude(AAmplitude::sampled(t, a).unwrap()), 0.8, 1e-3, Scheme::HeunTrapezoid).unwrap();
        for j in 0..=f.n {
            assert!((f.rows[j][0] - q.eval(j as f64 * 1e-3)).abs() < 1e-5);
        }
    }

    #[test]
    fn reconstruct_zero_and_bargmann() {
        let zero = DtNSpectrum { d: 3, lambdas: (0..=40).map(|k| k as f64).collect(), flags: vec![crate::forward::EigenFlag::Computed; 41] };
        let rec = reconstruct_potential(ReconstructInput::Spectrum(&zero), 0.5, &ReconstructParams { dt: 1e-2, ..Default::default() }).unwrap();
        assert!((0..=50).all(|i| rec.potential.q(0.5 + 0.01 * i as f64) == 0.0));

        let v = RadialPotential::bargmann(3, 1.0, 1.2);
        let born = born_closed_form(&v, &RadialGrid::default()).unwrap();
        let rec = reconstruct_potential(ReconstructInput::Born(&born), 0.5, &ReconstructParams::default()).unwrap();
        let err = (0..=500).map(|i| 0.5 + 0.001 * i as f64).map(|r| (rec.potential.q(r) - v.q(r)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-2, "err {err}");
        assert!((rec.potential.q(1.0) - born.eval(1.0)).abs() < 1e-6);
    }

    #[test]
    fn reconstruct_inverse_square() {
        let v = RadialPotential::inverse_square(3, 0.1);
        let born = born_closed_form(&v, &RadialGrid::default()).unwrap();
        let rec = reconstruct_potential(ReconstructInput::Born(&born), 0.5, &ReconstructParams::default()).unwrap();
        let err = (0..=500).map(|i| 0.5 + 0.001 * i as f64).map(|r| (rec.potential.q(r) / v.q(r) - 1.0).abs()).fold(0.0, f64::max);
        assert!(err < 2e-2, "err {err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn field_tracks_translated_bargmann(mu in 0.5f64..1.5, nu in 0.6f64..2.5, s in 0.0f64..0.5) {
            let f = evolve_layer_field(&bargmann_a(mu, nu), 1.0, 5e-3, Scheme::HeunTrapezoid).unwrap();
            let s = (s / 5e-3).round() * 5e-3;
            let nus = translated_nu(mu, nu, s);
            for x in [0.0, 0.1, 0.3] {
                let expect = 2.0 * (nus * nus - mu * mu) * (-2.0 * nus * x).exp();
                prop_assert!((f.at(s + x, s).unwrap() - expect).abs() < 2e-3);
            }
        }
    }
}
