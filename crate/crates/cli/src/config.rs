//! Experiment configuration files (TOML).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use qhier::checks::{self, CheckContext, Group};
use qhier::dynamics::HamiltonianSpec;
use qhier::hilbert::{Mat, Statistics, C64, DEFAULT_MAX_DIM, DEFAULT_MAX_PARTICLES};
use qhier::meanfield::DEFAULT_EPSILONS;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    Read { path: PathBuf, message: String },
    Parse { line: Option<usize>, message: String },
    Invalid { field: String, line: Option<usize>, message: String },
    Capacity { field: String, line: Option<usize>, limit: usize, got: usize },
}

fn at(line: &Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, message } => write!(f, "cannot read {}: {message}", path.display()),
            ConfigError::Parse { line, message } => write!(f, "config parse error{}: {message}", at(line)),
            ConfigError::Invalid { field, line, message } => write!(f, "invalid `{field}`{}: {message}", at(line)),
            ConfigError::Capacity { field, line, limit, got } => {
                write!(f, "capacity exceeded for `{field}`{}: {got} > {limit}", at(line))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Verify,
    Bbgky,
    Dual,
    Correlations,
    Kinetic,
    Meanfield,
    Nls,
    All,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Verify,
        Experiment::Bbgky,
        Experiment::Dual,
        Experiment::Correlations,
        Experiment::Kinetic,
        Experiment::Meanfield,
        Experiment::Nls,
        Experiment::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Verify => "verify",
            Experiment::Bbgky => "bbgky",
            Experiment::Dual => "dual",
            Experiment::Correlations => "correlations",
            Experiment::Kinetic => "kinetic",
            Experiment::Meanfield => "meanfield",
            Experiment::Nls => "nls",
            Experiment::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Check groups run by this experiment.
    pub fn groups(self) -> Vec<Group> {
        use Group::*;
        match self {
            Experiment::Verify => vec![Identities, Bbgky, Dual, Correlations],
            Experiment::Bbgky => vec![Bbgky],
            Experiment::Dual => vec![Dual],
            Experiment::Correlations => vec![Correlations],
            Experiment::Kinetic => vec![Kinetic],
            Experiment::Meanfield => vec![Meanfield],
            Experiment::Nls => vec![Nls],
            Experiment::All => vec![Identities, Bbgky, Dual, Correlations, Kinetic, Meanfield, Nls],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub report: String,
    pub tables: String,
}

impl OutputPaths {
    pub fn report_path(&self) -> PathBuf {
        self.dir.join(&self.report)
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.dir.join(&self.tables)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub spec: HamiltonianSpec,
    pub epsilons: Vec<f64>,
    pub study_time: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub output: OutputPaths,
    /// SHA-256 of the configuration text.
    pub hash: String,
}

type Matrix = Vec<Vec<f64>>;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Spanned<String>>,
    seed: Option<u64>,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    truncation: RawTruncation,
    #[serde(default)]
    study: RawStudy,
    #[serde(default)]
    tolerances: BTreeMap<String, Spanned<f64>>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawModel {
    preset: Option<Spanned<String>>,
    lambda: Option<f64>,
    kappa: Option<f64>,
    d: Option<Spanned<i64>>,
    kinetic: Option<Spanned<Matrix>>,
    kinetic_imag: Option<Spanned<Matrix>>,
    phi: Option<Spanned<Matrix>>,
    phi_imag: Option<Spanned<Matrix>>,
    epsilon: Option<Spanned<f64>>,
    statistics: Option<Spanned<String>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTruncation {
    max_particles: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    epsilons: Option<Spanned<Vec<f64>>>,
    time: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    report: Option<String>,
    tables: Option<String>,
}

struct Source<'a>(&'a str);

impl Source<'_> {
    fn line(&self, span: Range<usize>) -> Option<usize> {
        self.0.get(..span.start).map(|s| s.matches('\n').count() + 1)
    }

    fn invalid<T>(&self, field: &str, value: &Spanned<T>, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { field: field.into(), line: self.line(value.span()), message: message.into() }
    }

    fn capacity<T>(&self, field: &str, value: &Spanned<T>, limit: usize, got: usize) -> ConfigError {
        ConfigError::Capacity { field: field.into(), line: self.line(value.span()), limit, got }
    }
}

fn statistics(name: &str) -> Option<Statistics> {
    match name {
        "maxwell-boltzmann" => Some(Statistics::MaxwellBoltzmann),
        "bose" => Some(Statistics::Bose),
        "fermi" => Some(Statistics::Fermi),
        _ => None,
    }
}

fn matrix(
    src: &Source,
    field: &str,
    re: &Spanned<Matrix>,
    im: Option<&Spanned<Matrix>>,
    dim: usize,
) -> Result<Mat, ConfigError> {
    let shape_ok = |m: &Matrix| m.len() == dim && m.iter().all(|r| r.len() == dim);
    if !shape_ok(re.get_ref()) {
        return Err(src.invalid(field, re, format!("expected a {dim} x {dim} array")));
    }
    if let Some(im) = im {
        if !shape_ok(im.get_ref()) {
            return Err(src.invalid(&format!("{field}_imag"), im, format!("expected a {dim} x {dim} array")));
        }
    }
    Ok(Mat::from_fn(dim, dim, |i, j| {
        C64::new(re.get_ref()[i][j], im.map_or(0.0, |m| m.get_ref()[i][j]))
    }))
}

fn model(src: &Source, raw: &RawModel) -> Result<HamiltonianSpec, ConfigError> {
    let mut spec = match (&raw.kinetic, &raw.phi) {
        (Some(k), Some(phi)) => {
            if let Some(p) = &raw.preset {
                return Err(src.invalid("model.preset", p, "cannot be combined with explicit matrices"));
            }
            let d = k.get_ref().len();
            if d > DEFAULT_MAX_DIM {
                return Err(src.capacity("model.kinetic", k, DEFAULT_MAX_DIM, d));
            }
            let km = matrix(src, "model.kinetic", k, raw.kinetic_imag.as_ref(), d)?;
            let pm = matrix(src, "model.phi", phi, raw.phi_imag.as_ref(), d * d)?;
            HamiltonianSpec::new(km, pm, 1.0).map_err(|e| src.invalid("model", k, e.to_string()))?
        }
        (Some(k), None) => return Err(src.invalid("model.kinetic", k, "requires `model.phi`")),
        (None, Some(p)) => return Err(src.invalid("model.phi", p, "requires `model.kinetic`")),
        (None, None) => {
            let lambda = raw.lambda.unwrap_or(0.9);
            match raw.preset.as_ref().map(|p| p.get_ref().as_str()) {
                None | Some("transverse") => HamiltonianSpec::transverse(lambda, raw.kappa.unwrap_or(0.4)),
                Some("reference") => HamiltonianSpec::reference(lambda),
                Some(other) => {
                    let p = raw.preset.as_ref().expect("matched");
                    return Err(src.invalid("model.preset", p, format!("unknown preset `{other}`")));
                }
            }
        }
    };
    if let Some(d) = &raw.d {
        let got = *d.get_ref();
        if got > DEFAULT_MAX_DIM as i64 {
            return Err(src.capacity("model.d", d, DEFAULT_MAX_DIM, got as usize));
        }
        if got != spec.d as i64 {
            return Err(src.invalid("model.d", d, format!("model has d = {}", spec.d)));
        }
    }
    if let Some(e) = &raw.epsilon {
        let eps = *e.get_ref();
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(src.invalid("model.epsilon", e, "must be positive"));
        }
        spec.epsilon = eps;
    }
    if let Some(s) = &raw.statistics {
        spec.statistics = statistics(s.get_ref())
            .ok_or_else(|| src.invalid("model.statistics", s, "expected maxwell-boltzmann, bose or fermi"))?;
    }
    Ok(spec)
}

impl ExperimentConfig {
    /// Parses and validates a configuration, including capacity limits.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let src = Source(text);
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.span().and_then(|s| src.line(s)),
            message: e.message().to_string(),
        })?;

        let experiment = match &raw.experiment {
            None => Experiment::Verify,
            Some(e) => Experiment::from_name(e.get_ref()).ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|x| x.name()).collect();
                src.invalid("experiment", e, format!("expected one of {}", names.join(", ")))
            })?,
        };

        let mut spec = model(&src, &raw.model)?;
        if let Some(m) = &raw.truncation.max_particles {
            let n = *m.get_ref();
            if n < 1 {
                return Err(src.invalid("truncation.max_particles", m, "must be at least 1"));
            }
            if n as usize > DEFAULT_MAX_PARTICLES {
                return Err(src.capacity("truncation.max_particles", m, DEFAULT_MAX_PARTICLES, n as usize));
            }
            spec.max_particles = n as usize;
        }

        let epsilons = match &raw.study.epsilons {
            None => DEFAULT_EPSILONS.to_vec(),
            Some(e) => {
                let v = e.get_ref();
                if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(src.invalid("study.epsilons", e, "must be a non-empty list of positive numbers"));
                }
                if v.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(src.invalid("study.epsilons", e, "must be strictly decreasing"));
                }
                v.clone()
            }
        };
        let study_time = match &raw.study.time {
            None => 0.5,
            Some(t) if *t.get_ref() > 0.0 && t.get_ref().is_finite() => *t.get_ref(),
            Some(t) => return Err(src.invalid("study.time", t, "must be positive")),
        };

        let mut tolerances = BTreeMap::new();
        for (name, tol) in &raw.tolerances {
            let field = format!("tolerances.{name}");
            if checks::find(name).is_none() {
                return Err(src.invalid(&field, tol, "no such check (see `qhier list-checks`)"));
            }
            let v = *tol.get_ref();
            if !(v > 0.0 && v.is_finite()) {
                return Err(src.invalid(&field, tol, "must be positive"));
            }
            tolerances.insert(name.clone(), v);
        }

        let output = OutputPaths {
            dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("qhier-out")),
            report: raw.output.report.unwrap_or_else(|| "report.json".into()),
            tables: raw.output.tables.unwrap_or_else(|| "tables".into()),
        };

        Ok(Self {
            experiment,
            seed: raw.seed.unwrap_or(0),
            spec,
            epsilons,
            study_time,
            tolerances,
            output,
            hash: format!("{:x}", Sha256::digest(text.as_bytes())),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn context(&self) -> CheckContext {
        CheckContext {
            seed: self.seed,
            spec: self.spec.clone(),
            epsilons: self.epsilons.clone(),
            study_time: self.study_time,
            overrides: self.tolerances.clone(),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::parse("").expect("empty configuration is valid")
    }
}
