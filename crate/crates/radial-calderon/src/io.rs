//! Artifact formats: CSV tables with 17 significant digits, JSON reports,
//! spectrum and profile files, layer-field checkpoints, run manifests, and
//! the textual potential grammar used on the command line.

use crate::born::BornProfile;
use crate::forward::{DtNSpectrum, EigenFlag};
use crate::potentials::{Profile, RadialPotential, SampledProfile, TailModel};
use crate::reconstruct::LayerField;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}, field `{field}`: {message}")]
    Schema { path: String, line: usize, field: String, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("potential `{spec}`: {message}")]
    PotentialSpec { spec: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Float with 17 significant digits, enough for an exact round trip.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// CSV text with a header and LF line endings.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut push = |row: &[&str]| w.write_record(row).expect("writing to memory");
    push(header);
    for row in rows {
        push(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 fields")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Rows of a CSV file after checking the header, with 1-based line numbers.
fn csv_rows(path: &Path, text: &str, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>, IoError> {
    let name = path.display().to_string();
    let schema = |line: usize, field: &str, message: String| IoError::Schema { path: name.clone(), line, field: field.into(), message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| schema(1, "header", e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        let found: Vec<&str> = found.iter().collect();
        return Err(schema(1, "header", format!("expected `{}`, found `{}`", header.join(","), found.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| schema(e.position().map_or(0, |p| p.line() as usize), "row", e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != header.len() {
            return Err(schema(
                line,
                header[record.len().min(header.len() - 1)],
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        rows.push((line, record.iter().map(String::from).collect()));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, raw: &str) -> Result<T, IoError> {
    raw.parse().map_err(|_| IoError::Schema {
        path: path.display().to_string(),
        line,
        field: field.into(),
        message: format!("cannot parse `{raw}`"),
    })
}

const SPECTRUM_HEADER: [&str; 4] = ["d", "k", "lambda", "flag"];

pub fn spectrum_csv(s: &DtNSpectrum) -> String {
    csv_table(
        &SPECTRUM_HEADER,
        s.lambdas
            .iter()
            .zip(&s.flags)
            .enumerate()
            .map(|(k, (l, f))| vec![s.d.to_string(), k.to_string(), fmt17(*l), f.as_str().to_string()]),
    )
}

pub fn save_spectrum(path: &Path, s: &DtNSpectrum) -> Result<(), IoError> {
    write_text(path, &spectrum_csv(s))
}

/// Reads a spectrum written by [`save_spectrum`]; rows must list `k = 0, 1, ...`.
pub fn load_spectrum(path: &Path) -> Result<DtNSpectrum, IoError> {
    let text = read_text(path)?;
    let rows = csv_rows(path, &text, &SPECTRUM_HEADER)?;
    let schema = |line: usize, field: &str, message: String| IoError::Schema {
        path: path.display().to_string(),
        line,
        field: field.into(),
        message,
    };
    let mut d = None;
    let mut lambdas = Vec::with_capacity(rows.len());
    let mut flags = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let dim: usize = parse_field(path, line, "d", &f[0])?;
        if dim < 2 {
            return Err(schema(line, "d", format!("dimension {dim} is below 2")));
        }
        if *d.get_or_insert(dim) != dim {
            return Err(schema(line, "d", "dimension changes within the file".into()));
        }
        let k: usize = parse_field(path, line, "k", &f[1])?;
        if k != lambdas.len() {
            return Err(schema(line, "k", format!("expected k = {}, found {k}", lambdas.len())));
        }
        let l: f64 = parse_field(path, line, "lambda", &f[2])?;
        if !l.is_finite() {
            return Err(schema(line, "lambda", "value is not finite".into()));
        }
        let flag = match f[3].as_str() {
            "Computed" => EigenFlag::Computed,
            "ConventionK" => EigenFlag::ConventionK,
            other => return Err(schema(line, "flag", format!("unknown flag `{other}`, expected Computed or ConventionK"))),
        };
        lambdas.push(l);
        flags.push(flag);
    }
    let d = d.ok_or_else(|| schema(1, "k", "no rows".into()))?;
    Ok(DtNSpectrum { d, lambdas, flags })
}

const PROFILE_HEADER: [&str; 2] = ["r", "q"];

pub fn profile_csv(r: &[f64], q: &[f64]) -> String {
    csv_table(&PROFILE_HEADER, r.iter().zip(q).map(|(a, b)| vec![fmt17(*a), fmt17(*b)]))
}

/// `(r, q)` columns of a profile file, `r` increasing with last node 1.
pub fn load_profile_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let text = read_text(path)?;
    let rows = csv_rows(path, &text, &PROFILE_HEADER)?;
    let mut r = Vec::with_capacity(rows.len());
    let mut q = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        r.push(parse_field(path, line, "r", &f[0])?);
        q.push(parse_field(path, line, "q", &f[1])?);
    }
    Ok((r, q))
}

pub fn save_born_profile(path: &Path, p: &BornProfile) -> Result<(), IoError> {
    write_text(path, &profile_csv(&p.r, &p.values))
}

pub fn load_born_profile(path: &Path, d: usize) -> Result<BornProfile, IoError> {
    let (r, q) = load_profile_samples(path)?;
    BornProfile::from_samples(d, r, q).map_err(|e| IoError::Schema {
        path: path.display().to_string(),
        line: 0,
        field: "r".into(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FieldMeta {
    dt: f64,
    n: usize,
    origin: String,
    residual: f64,
    warnings: Vec<String>,
}

/// Writes `field.csv` with columns `t,s,K` and `field.json` with the grid data.
pub fn save_layer_field(dir: &Path, f: &LayerField) -> Result<(), IoError> {
    let rows = f.rows.iter().enumerate().flat_map(|(j, row)| {
        row.iter().enumerate().map(move |(a, v)| vec![fmt17((j + a) as f64 * f.dt), fmt17(j as f64 * f.dt), fmt17(*v)])
    });
    let csv = csv_table(&["t", "s", "K"], rows);
    write_text(&dir.join("field.csv"), &csv)?;
    let meta = FieldMeta { dt: f.dt, n: f.n, origin: f.origin.clone(), residual: f.residual, warnings: f.warnings.clone() };
    write_json(&dir.join("field.json"), &meta)
}

pub fn load_layer_field(dir: &Path) -> Result<LayerField, IoError> {
    let meta_path = dir.join("field.json");
    let meta: FieldMeta = serde_json::from_str(&read_text(&meta_path)?)?;
    let path = dir.join("field.csv");
    let text = read_text(&path)?;
    let rows = csv_rows(&path, &text, &["t", "s", "K"])?;
    let mut out: Vec<Vec<f64>> = (0..=meta.n).map(|j| Vec::with_capacity(meta.n + 1 - j)).collect();
    for (line, f) in rows {
        let t: f64 = parse_field(&path, line, "t", &f[0])?;
        let s: f64 = parse_field(&path, line, "s", &f[1])?;
        let k: f64 = parse_field(&path, line, "K", &f[2])?;
        let j = (s / meta.dt).round() as usize;
        let i = (t / meta.dt).round() as usize;
        if j > meta.n || i < j || i > meta.n || out[j].len() != i - j {
            return Err(IoError::Schema {
                path: path.display().to_string(),
                line,
                field: "t".into(),
                message: format!("node ({t}, {s}) is out of order for dt = {}", meta.dt),
            });
        }
        out[j].push(k);
    }
    if out.iter().enumerate().any(|(j, r)| r.len() != meta.n + 1 - j) {
        return Err(IoError::Schema { path: path.display().to_string(), line: 0, field: "K".into(), message: "field is incomplete".into() });
    }
    Ok(LayerField { dt: meta.dt, n: meta.n, rows: out, origin: meta.origin, residual: meta.residual, warnings: meta.warnings })
}

/// Record of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub version: String,
    pub status: String,
    /// Stage that failed, for runs that did not complete.
    pub failing_stage: Option<String>,
    pub error: Option<String>,
    pub residuals: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.into(),
            config,
            version: env!("CARGO_PKG_VERSION").into(),
            status: "ok".into(),
            failing_stage: None,
            error: None,
            residuals: BTreeMap::new(),
            metrics: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn fail(&mut self, stage: &str, error: &str) {
        self.status = "failed".into();
        self.failing_stage = Some(stage.into());
        self.error = Some(error.into());
    }
}

/// Parses a potential description.
///
/// Grammar: `family[:key=value,...]` with families `zero`,
/// `inverse_square` (`q0`), `bargmann` (`mu`, `nu`), or `file` (`path`, a
/// CSV with columns `r,q`). The optional keys `scale` and `dilate` apply
/// `q -> scale q` and `q(r) -> s^2 q(s r)` afterwards.
pub fn parse_potential(spec: &str, d: usize) -> Result<RadialPotential, IoError> {
    let err = |message: String| IoError::PotentialSpec { spec: spec.into(), message };
    if d < 2 {
        return Err(err(format!("dimension {d} is below 2")));
    }
    let (family, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut keys = BTreeMap::new();
    for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| err(format!("`{kv}` is not key=value")))?;
        if keys.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(err(format!("key `{}` given twice", k.trim())));
        }
    }
    let mut take = |k: &str| keys.remove(k);
    let num = |name: &str, v: Option<String>| -> Result<Option<f64>, IoError> {
        let Some(s) = v else { return Ok(None) };
        match s.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(err(format!("`{name}` = `{s}` is not a finite number"))),
        }
    };
    let required = |name: &str, v: Option<f64>| v.ok_or_else(|| err(format!("missing `{name}`")));
    let mut v = match family.trim() {
        "zero" => RadialPotential::zero(d),
        "inverse_square" => RadialPotential::inverse_square(d, required("q0", num("q0", take("q0"))?)?),
        "bargmann" => {
            let mu = required("mu", num("mu", take("mu"))?)?;
            let nu = required("nu", num("nu", take("nu"))?)?;
            if !(mu > 0.0 && nu > 0.0) {
                return Err(err("mu and nu must be positive".into()));
            }
            RadialPotential::bargmann(d, mu, nu)
        }
        "file" => {
            let path = take("path").ok_or_else(|| err("missing `path`".into()))?;
            let (r, q) = load_profile_samples(Path::new(&path))?;
            let profile = SampledProfile::new(r, q, TailModel::Zero).map_err(|e| err(e.to_string()))?;
            RadialPotential::new(d, Profile::Sampled(profile)).map_err(|e| err(e.to_string()))?
        }
        other => return Err(err(format!("unknown family `{other}`; expected zero, inverse_square, bargmann or file"))),
    };
    if let Some(s) = num("dilate", take("dilate"))? {
        v = v.dilate(s).map_err(|e| err(e.to_string()))?;
    }
    if let Some(f) = num("scale", take("scale"))? {
        v = v.scaled(f);
    }
    if let Some(k) = keys.keys().next() {
        return Err(err(format!("unknown key `{k}`")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{dtn_spectrum, ForwardOptions};

    #[test]
    fn spectrum_round_trip_is_exact() {
        let s = dtn_spectrum(&RadialPotential::bargmann(3, 1.0, 2.0), 12, &ForwardOptions::default());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        save_spectrum(&p, &s).unwrap();
        assert_eq!(load_spectrum(&p).unwrap(), s);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("d,k,lambda,flag\n") && !text.contains('\r'));
    }

    #[test]
    fn convention_flags_survive() {
        let s = DtNSpectrum { d: 2, lambdas: vec![0.0, 1.0, 2.0], flags: vec![EigenFlag::Computed, EigenFlag::ConventionK, EigenFlag::ConventionK] };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        save_spectrum(&p, &s).unwrap();
        assert_eq!(load_spectrum(&p).unwrap().flags, s.flags);
    }

    #[test]
    fn malformed_flag_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "d,k,lambda,flag\n3,0,0.5,Computed\n3,1,1.5,Maybe\n").unwrap();
        match load_spectrum(&p) {
            Err(IoError::Schema { line, field, .. }) => assert_eq!((line, field.as_str()), (3, "flag")),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "k,lambda\n0,1\n").unwrap();
        assert!(matches!(load_spectrum(&p), Err(IoError::Schema { field, .. }) if field == "header"));
    }

    #[test]
    fn fmt17_round_trips() {
        for x in [1.0 / 3.0, -2.0e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn potential_grammar() {
        let v = parse_potential("bargmann:mu=1,nu=2", 3).unwrap();
        assert!(v.q(0.5).is_finite() && v.d == 3);
        assert_eq!(parse_potential("zero", 2).unwrap(), RadialPotential::zero(2));
        let s = parse_potential("inverse_square:q0=0.25,scale=2", 3).unwrap();
        assert!((s.q(0.5) - 2.0).abs() < 1e-12);
        assert!(parse_potential("bargmann:mu=1", 3).is_err());
        assert!(parse_potential("bargmann:mu=1,nu=2,eta=3", 3).is_err());
        assert!(parse_potential("cosh", 3).is_err());
    }

    #[test]
    fn layer_field_checkpoint() {
        use crate::born::AAmplitude;
        use crate::reconstruct::{evolve_layer_field, LayerSource, Scheme};
        let src = LayerSource::Amplitude(AAmplitude::Bargmann { mu: 1.0, nu: 2.0 });
        let f = evolve_layer_field(&src, 0.2, 0.01, Scheme::HeunTrapezoid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_layer_field(dir.path(), &f).unwrap();
        assert_eq!(load_layer_field(dir.path()).unwrap(), f);
    }
}
