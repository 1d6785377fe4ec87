//! The `calderon` command line: configuration, subcommands and artifacts.

use crate::analysis::{
    add_noise, approximation_gap, bargmann_rational_moments, hausdorff_diagnostics, monotonicity_check, stability_ratio_potential,
    uniform_moments, AnalysisError, ArithmeticMode, MomentInput, StabilityMode,
};
use crate::born::{born_from_spectrum, default_k0, BornError, BornMethod, BornParams, BornProfile, LegendreParams};
use crate::forward::{dtn_spectrum, DtNSpectrum, ForwardOptions};
use crate::io::{
    csv_table, fmt17, load_born_profile, load_spectrum, parse_potential, profile_csv, save_born_profile, save_layer_field, save_spectrum,
    spectrum_csv, write_json, write_text, IoError, RunManifest,
};
use crate::potentials::RadialPotential;
use crate::reconstruct::{reconstruct_potential, ReconstructError, ReconstructInput, ReconstructParams, Reconstruction};
use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "calderon", version, about = "Radial Calderón problem: DtN spectra, Born approximations, layer stripping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Fourier,
    Legendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithArg {
    Rational,
    Float,
}

/// Flags shared by every subcommand. Each one overrides the same key of `--config`.
#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Potential, e.g. `bargmann:mu=1,nu=2`, `inverse_square:q0=0.25`, `zero`, `file:path=q.csv`.
    #[arg(long)]
    pub potential: Option<String>,
    /// Second potential for pairwise checks in `verify` (default `zero`).
    #[arg(long)]
    pub potential2: Option<String>,
    /// Spatial dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Highest eigenvalue index.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Layer-stripping step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Inner radius of the annulus.
    #[arg(long)]
    pub b: Option<f64>,
    /// First eigenvalue index of the Legendre moment problem.
    #[arg(long)]
    pub k0: Option<usize>,
    /// Ridge parameter of the linear step.
    #[arg(long)]
    pub reg: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Uniform noise amplitude added to each eigenvalue.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Seed of the ChaCha8 noise stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// End of the backward Riccati march.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Moment count of the Legendre route.
    #[arg(long)]
    pub n_moments: Option<usize>,
    /// Relative residual above which the linear step is rejected.
    #[arg(long)]
    pub residual_tol: Option<f64>,
    /// Exponent p of the stability and characterization checks.
    #[arg(long)]
    pub p: Option<f64>,
    /// Largest order of the Hausdorff tables.
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, value_enum)]
    pub arith: Option<ArithArg>,
    /// Spectrum CSV to use instead of a forward solve.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Born profile CSV (`r,q`) to reconstruct from.
    #[arg(long)]
    pub born: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format printed to standard output.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// JSON file with any of these keys; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => { $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )* };
}

impl RunConfig {
    fn overlay(mut self, file: RunConfig) -> Self {
        merge_fields!(self, file; potential, potential2, d, k, dt, b, k0, reg, method, noise, seed, t_max, n_moments,
            residual_tol, p, k_max, arith, spectrum, born, out, format);
        self
    }

    fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(format!("--{name} must be positive and finite, got {x}")),
            _ => Ok(()),
        };
        positive("dt", self.dt)?;
        positive("t-max", self.t_max)?;
        positive("residual-tol", self.residual_tol)?;
        if let Some(b) = self.b {
            if !(b > 0.0 && b < 1.0) {
                return Err(format!("--b must lie in (0, 1), got {b}"));
            }
        }
        if let Some(d) = self.d {
            if d < 2 {
                return Err(format!("--d must be at least 2, got {d}"));
            }
        }
        for (name, v) in [("reg", self.reg), ("noise", self.noise)] {
            if let Some(x) = v {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(format!("--{name} must be nonnegative and finite, got {x}"));
                }
            }
        }
        if let Some(p) = self.p {
            if !(p > 1.0) {
                return Err(format!("--p must exceed 1, got {p}"));
            }
        }
        if self.k == Some(0) {
            return Err("--K must be positive".into());
        }
        Ok(())
    }

    fn d(&self) -> usize {
        self.d.unwrap_or(3)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// DtN eigenvalues `lambda_0..lambda_K`.
    Forward(RunConfig),
    /// Born profile from a spectrum.
    Born(RunConfig),
    /// Potential on `[b, 1]` from a spectrum or a Born profile.
    Reconstruct(RunConfig),
    /// Approximation, monotonicity and stability reports.
    Verify(RunConfig),
    /// Hausdorff moment tables and the characterization statistic.
    Characterize(RunConfig),
    /// Forward, Born and reconstruction for a Bargmann potential.
    Demo(RunConfig),
}

/// Failure of a subcommand, with the exit code it maps to.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Numeric { stage: String, message: String },
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => Failure::Numeric { stage: "io".into(), message: e.to_string() },
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn numeric(stage: &str) -> impl Fn(&dyn std::fmt::Display) -> Failure + '_ {
    move |e| Failure::Numeric { stage: stage.into(), message: e.to_string() }
}

fn born_failure(e: BornError) -> Failure {
    match e {
        BornError::InvalidParameter(m) => Failure::Validation(m),
        other => numeric("born")(&other),
    }
}

fn reconstruct_failure(e: ReconstructError) -> Failure {
    match e {
        ReconstructError::InvalidGrid(m) => Failure::Validation(m),
        ReconstructError::Born(b) => born_failure(b),
        other => numeric("reconstruct")(&other),
    }
}

fn analysis_failure(stage: &str) -> impl Fn(AnalysisError) -> Failure + '_ {
    move |e| match e {
        AnalysisError::InvalidParameter(m) => Failure::Validation(m),
        other => numeric(stage)(&other),
    }
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    manifest: RunManifest,
    stdout: String,
}

impl Run {
    fn write(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        write_text(&self.out.join(name), text)?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), Failure> {
        write_json(&self.out.join(name), v)?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn potential(&self) -> Result<RadialPotential, Failure> {
        let spec = self.cfg.potential.as_deref().ok_or_else(|| Failure::Validation("--potential is required".into()))?;
        Ok(parse_potential(spec, self.cfg.d())?)
    }

    fn forward_options(&self) -> ForwardOptions {
        ForwardOptions { t_max: self.cfg.t_max, ..Default::default() }
    }

    /// Spectrum from `--spectrum` or a forward solve, with optional noise.
    fn spectrum(&mut self, default_k: usize) -> Result<DtNSpectrum, Failure> {
        let clean = match &self.cfg.spectrum {
            Some(path) => {
                let s = load_spectrum(path)?;
                if let Some(k) = self.cfg.k {
                    if k + 1 > s.lambdas.len() {
                        return Err(Failure::Validation(format!("--K {k} exceeds the {} eigenvalues in the file", s.lambdas.len())));
                    }
                }
                s
            }
            None => {
                let v = self.potential()?;
                dtn_spectrum(&v, self.cfg.k.unwrap_or(default_k), &self.forward_options())
            }
        };
        Ok(match self.cfg.noise {
            Some(n) if n > 0.0 => add_noise(&clean, n, self.cfg.seed.unwrap_or(0)),
            _ => clean,
        })
    }

    fn born_params(&self, k_trunc: usize) -> Result<BornParams, Failure> {
        let method = match self.cfg.method.unwrap_or(MethodArg::Fourier) {
            MethodArg::Fourier => BornMethod::FourierHankel,
            MethodArg::Legendre => BornMethod::LegendreMoments,
        };
        let defaults = BornParams::default();
        let k0 = match (self.cfg.k0, method, &self.cfg.potential) {
            (Some(k0), _, _) => k0,
            (None, BornMethod::LegendreMoments, Some(_)) => default_k0(&self.potential()?).map_err(born_failure)?,
            _ => 0,
        };
        Ok(BornParams {
            method,
            k_trunc: Some(k_trunc),
            ridge: self.cfg.reg.unwrap_or(defaults.ridge),
            residual_tol: self.cfg.residual_tol.unwrap_or(defaults.residual_tol),
            legendre: LegendreParams { k0, n_moments: self.cfg.n_moments.unwrap_or(defaults.legendre.n_moments) },
            ..defaults
        })
    }
}

fn record_synthesis(m: &mut RunManifest, s: &crate::born::BornSynthesis) {
    m.residuals.insert("born_residual".into(), s.residual);
    m.residuals.insert("born_relative_residual".into(), s.relative_residual);
    m.metrics.insert("born_condition".into(), s.condition);
    m.metrics.insert("born_moments_used".into(), s.moments_used.len() as f64);
    if let Some(x) = s.xi_band {
        m.metrics.insert("born_xi_band".into(), x);
    }
    m.metrics.insert("born_basis_size".into(), s.basis_size as f64);
}

fn cmd_forward(run: &mut Run) -> Result<(), Failure> {
    let s = run.spectrum(20)?;
    save_spectrum(&run.out.join("spectrum.csv"), &s)?;
    run.manifest.outputs.push("spectrum.csv".into());
    run.json("spectrum.json", &s)?;
    let conv = s.flags.iter().filter(|f| **f != crate::forward::EigenFlag::Computed).count();
    run.manifest.metrics.insert("convention_flags".into(), conv as f64);
    run.stdout = spectrum_csv(&s);
    Ok(())
}

fn cmd_born(run: &mut Run) -> Result<BornProfile, Failure> {
    let s = run.spectrum(40)?;
    let params = run.born_params(s.max_k())?;
    let syn = born_from_spectrum(&s, &params).map_err(born_failure)?;
    record_synthesis(&mut run.manifest, &syn);
    save_born_profile(&run.out.join("born.csv"), &syn.profile)?;
    run.manifest.outputs.push("born.csv".into());
    let summary = serde_json::json!({
        "d": syn.profile.d,
        "method": format!("{:?}", params.method),
        "residual": syn.residual,
        "relative_residual": syn.relative_residual,
        "condition": syn.condition,
        "moments_used": syn.moments_used,
        "xi_band": syn.xi_band,
        "basis_size": syn.basis_size,
    });
    run.json("born.json", &summary)?;
    run.stdout = profile_csv(&syn.profile.r, &syn.profile.values);
    Ok(syn.profile)
}

fn reconstruction_outputs(run: &mut Run, rec: &Reconstruction, truth: Option<&RadialPotential>) -> Result<(), Failure> {
    let b = rec.b;
    let n = 501;
    let r: Vec<f64> = (0..n).map(|i| b + (1.0 - b) * i as f64 / (n - 1) as f64).collect();
    let q: Vec<f64> = r.iter().map(|&x| rec.potential.q(x)).collect();
    run.write("potential.csv", &profile_csv(&r, &q))?;
    save_layer_field(&run.out.join("field"), &rec.field)?;
    run.manifest.outputs.push("field/field.csv".into());
    run.manifest.outputs.push("field/field.json".into());
    run.manifest.residuals.insert("field_identity_residual".into(), rec.field.residual);
    if let Some(s) = &rec.synthesis {
        record_synthesis(&mut run.manifest, s);
    }
    if let Some(v) = truth {
        let sup = r.iter().zip(&q).map(|(&x, &y)| (y - v.q(x)).abs()).fold(0.0, f64::max);
        run.manifest.metrics.insert("reconstruction_sup_error".into(), sup);
    }
    run.stdout = profile_csv(&r, &q);
    Ok(())
}

fn reconstruct_params(run: &Run, born: BornParams) -> ReconstructParams {
    let d = ReconstructParams::default();
    ReconstructParams { dt: run.cfg.dt.unwrap_or(d.dt), born, ..d }
}

fn cmd_reconstruct(run: &mut Run) -> Result<(), Failure> {
    let b = run.cfg.b.unwrap_or(0.5);
    let truth = if run.cfg.potential.is_some() { Some(run.potential()?) } else { None };
    let rec = if let Some(path) = run.cfg.born.clone() {
        let profile = load_born_profile(&path, run.cfg.d())?;
        let params = reconstruct_params(run, BornParams::default());
        reconstruct_potential(ReconstructInput::Born(&profile), b, &params).map_err(reconstruct_failure)?
    } else {
        let s = run.spectrum(40)?;
        let params = reconstruct_params(run, run.born_params(s.max_k())?);
        reconstruct_potential(ReconstructInput::Spectrum(&s), b, &params).map_err(reconstruct_failure)?
    };
    reconstruction_outputs(run, &rec, truth.as_ref())
}

fn cmd_verify(run: &mut Run) -> Result<(), Failure> {
    let v1 = run.potential()?;
    let v2 = parse_potential(run.cfg.potential2.as_deref().unwrap_or("zero"), run.cfg.d())?;
    let b = run.cfg.b.unwrap_or(0.5);
    let p = run.cfg.p.unwrap_or(2.0);
    let grid: Vec<f64> = (0..=140).map(|i| 0.3 + 0.7 * i as f64 / 140.0).collect();
    let gap = approximation_gap(&v1, &grid).map_err(analysis_failure("approximation"))?;
    run.write(
        "approximation.csv",
        &csv_table(
            &["r", "q", "q_born", "gap", "bound"],
            gap.nodes.iter().map(|n| vec![fmt17(n.r), fmt17(n.q), fmt17(n.q_born), fmt17(n.gap), fmt17(n.bound)]),
        ),
    )?;
    let mono = monotonicity_check(&v1, &v2, b, 200).map_err(analysis_failure("monotonicity"))?;
    let stability = match stability_ratio_potential(&v1, &v2, p, b, StabilityMode::Local) {
        Ok(r) => serde_json::to_value(&r).map_err(IoError::from)?,
        Err(AnalysisError::HypothesisViolated(h)) => serde_json::json!({ "hypothesis_violated": h }),
        Err(e) => return Err(analysis_failure("stability")(e)),
    };
    run.manifest.residuals.insert("gap_at_one".into(), gap.gap_at_one);
    let report = serde_json::json!({
        "approximation": {
            "gap_at_one": gap.gap_at_one,
            "slope_at_one": gap.slope_at_one,
            "beta_v": gap.beta_v,
            "violations": gap.violations,
            "pass": gap.pass(1e-10),
        },
        "monotonicity": mono,
        "stability_local": stability,
    });
    run.json("verify.json", &report)?;
    run.stdout = serde_json::to_string_pretty(&report).map_err(IoError::from)? + "\n";
    Ok(())
}

/// Moments for `characterize`: exact `1/(n+1)` for `uniform`, exact
/// rationals for Bargmann with dyadic parameters, and `lambda_{n+k0} - (n+k0)` otherwise.
fn characterize_moments(run: &mut Run, len: usize) -> Result<MomentInput, Failure> {
    let spec = run.cfg.potential.clone().unwrap_or_else(|| "uniform".into());
    if spec == "uniform" {
        return Ok(MomentInput::Rational(uniform_moments(len)));
    }
    let v = run.potential()?;
    let k0 = run.cfg.k0.unwrap_or(0);
    if let crate::potentials::Profile::Bargmann { mu, nu } = &v.profile {
        if let (Some(m), Some(n)) = (BigRational::from_float(*mu), BigRational::from_float(*nu)) {
            return Ok(MomentInput::Rational(bargmann_rational_moments(&m, &n, v.d, k0, len)));
        }
    }
    let s = dtn_spectrum(&v, len - 1 + k0, &run.forward_options());
    let s = match run.cfg.noise {
        Some(n) if n > 0.0 => add_noise(&s, n, run.cfg.seed.unwrap_or(0)),
        _ => s,
    };
    Ok(MomentInput::Float((0..len).map(|n| s.deviation(n + k0)).collect()))
}

fn cmd_characterize(run: &mut Run) -> Result<(), Failure> {
    let k_max = run.cfg.k_max.unwrap_or(20);
    let p = run.cfg.p.unwrap_or(2.0);
    let mode = match run.cfg.arith.unwrap_or(ArithArg::Rational) {
        ArithArg::Rational => ArithmeticMode::Rational,
        ArithArg::Float => ArithmeticMode::Float,
    };
    let mu = characterize_moments(run, k_max + 1)?;
    let diag = hausdorff_diagnostics(&mu, p, k_max, mode).map_err(analysis_failure("characterize"))?;
    let mut rows = Vec::new();
    for (k, row) in diag.nu.iter().enumerate() {
        for (m, v) in row.iter().enumerate() {
            rows.push(vec![k.to_string(), m.to_string(), fmt17(*v), fmt17(diag.steps[k][m])]);
        }
    }
    let table = csv_table(&["k", "m", "nu", "L_k"], rows);
    run.write("hausdorff.csv", &table)?;
    run.json("hausdorff.json", &diag)?;
    run.manifest.metrics.insert("statistic".into(), diag.statistic);
    run.manifest.metrics.insert("max_cancellation".into(), diag.cancellation.iter().cloned().fold(0.0, f64::max));
    run.stdout = table;
    Ok(())
}

fn cmd_demo(run: &mut Run) -> Result<(), Failure> {
    if run.cfg.potential.is_none() {
        run.cfg.potential = Some("bargmann:mu=1,nu=2".into());
    }
    if run.cfg.k.is_none() {
        run.cfg.k = Some(40);
    }
    let truth = run.potential()?;
    let spectrum = run.spectrum(40)?;
    save_spectrum(&run.out.join("spectrum.csv"), &spectrum)?;
    run.manifest.outputs.push("spectrum.csv".into());
    let born = run.born_params(spectrum.max_k())?;
    let b = run.cfg.b.unwrap_or(0.5);
    let rec = reconstruct_potential(ReconstructInput::Spectrum(&spectrum), b, &reconstruct_params(run, born)).map_err(reconstruct_failure)?;
    if let Some(s) = &rec.synthesis {
        save_born_profile(&run.out.join("born.csv"), &s.profile)?;
        run.manifest.outputs.push("born.csv".into());
    }
    reconstruction_outputs(run, &rec, Some(&truth))
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn load_config(cfg: RunConfig) -> Result<RunConfig, String> {
    let Some(path) = cfg.config.clone() else { return Ok(cfg) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let file: RunConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(cfg.overlay(file))
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (name, cfg) = match cli.command {
        Command::Forward(c) => ("forward", c),
        Command::Born(c) => ("born", c),
        Command::Reconstruct(c) => ("reconstruct", c),
        Command::Verify(c) => ("verify", c),
        Command::Characterize(c) => ("characterize", c),
        Command::Demo(c) => ("demo", c),
    };
    let cfg = match load_config(cfg).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_VALIDATION;
        }
    };
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("calderon-{name}")));
    let format = cfg.format.unwrap_or(FormatArg::Csv);
    let mut r = Run { manifest: RunManifest::new(name, config_json(&cfg)), cfg, out, stdout: String::new() };
    let result = match name {
        "forward" => cmd_forward(&mut r),
        "born" => cmd_born(&mut r).map(|_| ()),
        "reconstruct" => cmd_reconstruct(&mut r),
        "verify" => cmd_verify(&mut r),
        "characterize" => cmd_characterize(&mut r),
        _ => cmd_demo(&mut r),
    };
    let code = match &result {
        Ok(()) => EXIT_OK,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            r.manifest.fail("validation", msg);
            EXIT_VALIDATION
        }
        Err(Failure::Numeric { stage, message }) => {
            eprintln!("error in {stage}: {message}");
            r.manifest.fail(stage, message);
            EXIT_NUMERIC
        }
    };
    if let Err(e) = write_manifest(&r.out, &r.manifest) {
        eprintln!("error: cannot write run.json: {e}");
        return if code == EXIT_OK { EXIT_NUMERIC } else { code };
    }
    if code == EXIT_OK {
        match format {
            FormatArg::Csv => print!("{}", r.stdout),
            FormatArg::Json => println!("{}", serde_json::to_string_pretty(&r.manifest).unwrap_or_default()),
        }
    }
    code
}

fn write_manifest(out: &Path, m: &RunManifest) -> Result<(), IoError> {
    write_json(&out.join("run.json"), m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(args: &[&str]) -> Vec<String> {
        std::iter::once("calderon").chain(args.iter().copied()).map(String::from).collect()
    }

    fn manifest(dir: &Path) -> RunManifest {
        serde_json::from_str(&std::fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
    }

    #[test]
    fn forward_bargmann() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(argv(&["forward", "--potential", "bargmann:mu=1,nu=2", "--d", "3", "--K", "20", "--out", out])), 0);
        let s = load_spectrum(&dir.path().join("spectrum.csv")).unwrap();
        assert!((s.lambdas[1] - 1.8571429).abs() < 1e-7);
        assert_eq!(manifest(dir.path()).status, "ok");
    }

    #[test]
    fn forward_zero() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(argv(&["forward", "--potential", "zero", "--d", "2", "--K", "3", "--out", out])), 0);
        let s = load_spectrum(&dir.path().join("spectrum.csv")).unwrap();
        assert_eq!(s.lambdas, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn validation_errors_exit_2() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(argv(&["forward", "--potential", "cosh", "--out", out])), 2);
        assert_eq!(run(argv(&["reconstruct", "--b", "1.5", "--out", out])), 2);
        assert_eq!(run(argv(&["forward", "--bogus"])), 2);
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"potential": "zero", "colour": 1}"#).unwrap();
        assert_eq!(run(argv(&["forward", "--config", cfg.to_str().unwrap(), "--out", out])), 2);
    }

    #[test]
    fn config_file_with_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"potential": "zero", "d": 2, "K": 5}"#).unwrap();
        let out = dir.path().join("o");
        assert_eq!(run(argv(&["forward", "--config", cfg.to_str().unwrap(), "--K", "2", "--out", out.to_str().unwrap()])), 0);
        assert_eq!(load_spectrum(&out.join("spectrum.csv")).unwrap().lambdas.len(), 3);
    }

    #[test]
    fn numeric_failure_exits_3_with_stage() {
        let dir = tempfile::tempdir().unwrap();
        let r: Vec<f64> = (0..=100).map(|i| 0.4 + 0.6 * i as f64 / 100.0).collect();
        let q = vec![1e4; r.len()];
        let born = dir.path().join("born.csv");
        std::fs::write(&born, profile_csv(&r, &q)).unwrap();
        let out = dir.path().join("o");
        let code = run(argv(&["reconstruct", "--born", born.to_str().unwrap(), "--b", "0.5", "--dt", "1e-2", "--out", out.to_str().unwrap()]));
        assert_eq!(code, 3);
        let m = manifest(&out);
        assert_eq!((m.status.as_str(), m.failing_stage.as_deref()), ("failed", Some("reconstruct")));
    }

    #[test]
    fn characterize_uniform_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(argv(&["characterize", "--k-max", "10", "--out", out])), 0);
        let text = std::fs::read_to_string(dir.path().join("hausdorff.csv")).unwrap();
        assert!(text.lines().skip(1).all(|l| l.ends_with(&fmt17(1.0))));
    }
}
