//! Line-based experiment configuration: `key = value` pairs under `[section]` headers.
//!
//! Keys before the first header belong to the top level. `#` starts a comment.
//! Numbers may be written as products/quotients of literals and `pi`, e.g. `2*pi` or `pi/2`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use mflow_core::entropy::AdjointSign;
use mflow_core::{AmbientModel, FlowCoefficients, Schedule};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("{0}")]
    Range(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Flow,
    Stability,
    Entropy,
    Gradcheck,
    WillmoreCompare,
}

impl Kind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "flow" => Self::Flow,
            "stability" => Self::Stability,
            "entropy" => Self::Entropy,
            "gradcheck" => Self::Gradcheck,
            "willmore-compare" => Self::WillmoreCompare,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Flow => "flow",
            Self::Stability => "stability",
            Self::Entropy => "entropy",
            Self::Gradcheck => "gradcheck",
            Self::WillmoreCompare => "willmore-compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Zero,
    SingleMode { k: i64, component: usize, amplitude: f64 },
    /// Seeded by the top-level `seed`.
    RandomSmooth { cutoff: u32, amplitude: f64 },
    Constant { entries: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropySpec {
    pub horizon: f64,
    pub sign: AdjointSign,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySpec {
    pub amplitude: f64,
    pub mode: i64,
    pub component: usize,
    pub background: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub dim: usize,
    pub n: usize,
    pub period: f64,
    pub ambient: AmbientModel,
    pub coeffs: FlowCoefficients,
    pub schedule: Schedule,
    pub entropy: EntropySpec,
    pub stability: StabilitySpec,
    pub initial: InitialSpec,
    pub eps: Vec<f64>,
    pub sigma: f64,
    pub baseline_dt: f64,
    pub out_dir: PathBuf,
}

const KEYS: &[(&str, &[&str])] = &[
    ("", &["kind", "seed"]),
    ("grid", &["m", "n", "L"]),
    ("ambient", &["c", "trace_adjusted"]),
    ("coefficients", &["theta1", "theta2", "theta3", "theta4", "theta5"]),
    ("schedule", &["t_end", "dt_init", "dt_min", "dt_max", "safety", "diag_every"]),
    ("entropy", &["T", "adjoint_sign", "tol"]),
    ("stability", &["amplitude", "mode", "component", "background"]),
    ("initial", &["preset", "k", "component", "amplitude", "cutoff", "entries"]),
    ("checks", &["eps"]),
    ("willmore", &["sigma", "dt"]),
    ("output", &["dir"]),
];

/// Evaluate `a*b/c` where each factor is a float literal or `pi`.
pub fn parse_number(text: &str) -> Option<f64> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let mut value = 1.0;
    let mut op = '*';
    let mut rest = text;
    loop {
        let cut = rest.find(['*', '/']).unwrap_or(rest.len());
        let token = rest[..cut].trim();
        let factor = match token {
            "pi" => PI,
            "-pi" => -PI,
            t => t.parse::<f64>().ok()?,
        };
        value = if op == '*' { value * factor } else { value / factor };
        if cut == rest.len() {
            break;
        }
        op = rest.as_bytes()[cut] as char;
        rest = &rest[cut + 1..];
    }
    value.is_finite().then_some(value)
}

struct Entry {
    value: String,
    line: usize,
}

struct Table(BTreeMap<String, Entry>);

impl Table {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.0.get(key)
    }

    fn bad(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.0.get(key).map_or(0, |e| e.line);
        ConfigError::BadValue { line, key: key.into(), message: message.into() }
    }

    fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => parse_number(&e.value).map(Some).ok_or_else(|| self.bad(key, format!("`{}` is not a number", e.value))),
        }
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn int(&self, key: &str) -> Result<Option<i64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<i64>().map(Some).map_err(|_| self.bad(key, format!("`{}` is not an integer", e.value))),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<u64>().map(Some).map_err(|_| self.bad(key, format!("`{}` is not a non-negative integer", e.value))),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.raw(key).map(|e| e.value.as_str()) {
            None => Ok(None),
            Some("true" | "on" | "yes") => Ok(Some(true)),
            Some("false" | "off" | "no") => Ok(Some(false)),
            Some(other) => Err(self.bad(key, format!("`{other}` is not a boolean"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|v| parse_number(v).ok_or_else(|| self.bad(key, format!("`{}` is not a number", v.trim()))))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.raw(key).map(|e| e.value.as_str())
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Table>, ConfigError> {
    let mut sections: BTreeMap<String, Table> = BTreeMap::new();
    sections.insert(String::new(), Table(BTreeMap::new()));
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(inner) = body.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, message: "unterminated section header".into() })?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name && !name.is_empty()) {
                return Err(ConfigError::Syntax { line, message: format!("unknown section [{name}]") });
            }
            if sections.contains_key(name) {
                return Err(ConfigError::Syntax { line, message: format!("section [{name}] repeated") });
            }
            sections.insert(name.to_string(), Table(BTreeMap::new()));
            current = name.to_string();
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{body}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line, message: "empty key or value".into() });
        }
        let allowed = KEYS.iter().find(|(s, _)| *s == current).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            let shown = if current.is_empty() { key.to_string() } else { format!("{current}.{key}") };
            return Err(ConfigError::UnknownKey { line, key: shown });
        }
        let table = sections.get_mut(&current).expect("section inserted on header");
        if table.0.contains_key(key) {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
        table.0.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    Ok(sections)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = tokenize(text)?;
    let empty = Table(BTreeMap::new());
    let sec = |name: &str| sections.get(name).unwrap_or(&empty);
    let range = |msg: String| Err(ConfigError::Range(msg));

    let top = sec("");
    let kind_text = top.text("kind").ok_or_else(|| ConfigError::Missing("kind".into()))?;
    let kind = Kind::parse(kind_text).ok_or_else(|| top.bad("kind", format!("unknown experiment kind `{kind_text}`")))?;
    let seed = top.uint("seed")?.unwrap_or(0);

    let grid = sec("grid");
    let dim = grid.uint("m")?.ok_or_else(|| ConfigError::Missing("grid.m".into()))? as usize;
    let n = grid.uint("n")?.ok_or_else(|| ConfigError::Missing("grid.n".into()))? as usize;
    let period = grid.num_or("L", 2.0 * PI)?;
    if !(dim == 1 || dim == 2) {
        return range(format!("m must be 1 or 2, got {dim}"));
    }
    if n < 8 || !n.is_multiple_of(2) {
        return range(format!("n must be even and at least 8, got {n}"));
    }
    if !(period > 0.0) {
        return range(format!("L must be > 0, got {period}"));
    }

    let amb = sec("ambient");
    let c = amb.num_or("c", 0.0)?;
    if c > 0.0 {
        return range("c must be ≤ 0".into());
    }
    let ambient = AmbientModel::new(c, amb.boolean("trace_adjusted")?.unwrap_or(false)).map_err(|e| ConfigError::Range(e.to_string()))?;

    let co = sec("coefficients");
    let mut theta = [1.0; 5];
    for (i, t) in theta.iter_mut().enumerate() {
        *t = co.num_or(&format!("theta{}", i + 1), 1.0)?;
    }
    let coeffs = FlowCoefficients::new(theta).map_err(|e| ConfigError::Range(e.to_string()))?;

    let sc = sec("schedule");
    let needs_schedule = kind != Kind::Gradcheck;
    let t_end = match sc.num("t_end")? {
        Some(t) => t,
        None if needs_schedule => return Err(ConfigError::Missing("schedule.t_end".into())),
        None => 1.0,
    };
    let mut schedule = Schedule::new(t_end, sc.num_or("dt_init", 1e-3)?, sc.num_or("dt_max", 1e-2)?);
    schedule.dt_min = sc.num_or("dt_min", schedule.dt_min)?;
    schedule.safety = sc.num_or("safety", schedule.safety)?;
    schedule.output_every = sc.num_or("diag_every", t_end / 100.0)?;
    schedule.validate().map_err(|e| ConfigError::Range(e.to_string()))?;

    let en = sec("entropy");
    let horizon = en.num_or("T", 2.0 * t_end)?;
    if kind == Kind::Entropy && !(horizon > t_end) {
        return range(format!("T must exceed t_end (T = {horizon}, t_end = {t_end})"));
    }
    let sign = match en.text("adjoint_sign") {
        None | Some("diffusive") => AdjointSign::Diffusive,
        Some("paper_literal") => AdjointSign::PaperLiteral,
        Some(other) => return Err(en.bad("adjoint_sign", format!("expected diffusive or paper_literal, got `{other}`"))),
    };
    let tol = en.num_or("tol", 1e-8)?;
    if !(tol >= 0.0) {
        return range("entropy tol must be ≥ 0".into());
    }

    let comps = if dim == 1 { 1 } else { 3 };
    let st = sec("stability");
    let stability = StabilitySpec {
        amplitude: st.num_or("amplitude", 1e-3)?,
        mode: st.int("mode")?.unwrap_or(1),
        component: st.uint("component")?.unwrap_or(0) as usize,
        background: st.list("background")?.unwrap_or_else(|| vec![0.0; comps]),
    };
    if !(0.0..=mflow_core::stability::LINEAR_AMPLITUDE_CAP).contains(&stability.amplitude) {
        return range(format!("stability amplitude must lie in [0, {}]", mflow_core::stability::LINEAR_AMPLITUDE_CAP));
    }
    if stability.component >= comps {
        return range(format!("stability component must be < {comps}"));
    }
    if stability.background.len() != comps {
        return range(format!("stability background needs {comps} entries"));
    }
    if stability.mode == 0 || stability.mode.unsigned_abs() as usize >= n / 2 {
        return range(format!("stability mode must be nonzero and below n/2 = {}", n / 2));
    }

    let ini = sec("initial");
    let initial = match ini.text("preset").unwrap_or("zero") {
        "zero" => InitialSpec::Zero,
        "single-mode" => {
            let k = ini.int("k")?.unwrap_or(1);
            let component = ini.uint("component")?.unwrap_or(0) as usize;
            if component >= comps {
                return range(format!("initial component must be < {comps}"));
            }
            if k.unsigned_abs() as usize >= n / 2 {
                return range(format!("initial k must be below n/2 = {}", n / 2));
            }
            InitialSpec::SingleMode { k, component, amplitude: ini.num_or("amplitude", 1.0)? }
        }
        "random-smooth" => {
            let cutoff = ini.uint("cutoff")?.unwrap_or(4) as u32;
            if 2 * cutoff as usize >= n {
                return range(format!("initial cutoff must be below n/2 = {}", n / 2));
            }
            let amplitude = ini.num_or("amplitude", 0.1)?;
            if !(amplitude >= 0.0) {
                return range("initial amplitude must be ≥ 0".into());
            }
            InitialSpec::RandomSmooth { cutoff, amplitude }
        }
        "constant" => {
            let entries = ini.list("entries")?.ok_or_else(|| ConfigError::Missing("initial.entries".into()))?;
            if entries.len() != comps {
                return range(format!("initial entries needs {comps} values"));
            }
            InitialSpec::Constant { entries }
        }
        other => return Err(ini.bad("preset", format!("unknown preset `{other}`"))),
    };

    let eps = sec("checks").list("eps")?.unwrap_or_else(|| vec![1e-3, 1e-4, 1e-5]);
    if eps.len() < 3 || eps.iter().any(|e| !(*e > 0.0)) {
        return range("checks.eps needs at least 3 positive values".into());
    }

    let wl = sec("willmore");
    let sigma = wl.num_or("sigma", 0.0)?;
    let baseline_dt = wl.num_or("dt", 1e-4)?;
    if !(sigma >= 0.0) {
        return range("willmore sigma must be ≥ 0".into());
    }
    if !(baseline_dt > 0.0) {
        return range("willmore dt must be > 0".into());
    }

    let out_dir = PathBuf::from(sec("output").text("dir").unwrap_or("out"));

    Ok(ExperimentConfig {
        kind,
        seed,
        dim,
        n,
        period,
        ambient,
        coeffs,
        schedule,
        entropy: EntropySpec { horizon, sign, tol },
        stability,
        initial,
        eps,
        sigma,
        baseline_dt,
        out_dir,
    })
}
