//! Scenario files: one `dotted.key = value` per line, `#` starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bridge::SolverConfig;
use crate::grid::{GridSpec, Potential, Topology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("key `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Mu,
    Nu,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MarginalSpec {
    Gaussian { mean: Vec<f64>, var: f64 },
    Bump { center: Vec<f64>, width: f64 },
    Uniform { a: Vec<f64>, b: Vec<f64> },
    Mixture(Vec<(f64, MarginalSpec)>),
    File(PathBuf),
    /// `P_time` applied to the other marginal; `None` means the horizon.
    HeatOf { source: Side, time: Option<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckSelection {
    Auto,
    Euclidean,
    Weighted,
    CostaReduction,
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub id: String,
    pub grid: GridSpec,
    pub n: usize,
    pub mu: MarginalSpec,
    pub nu: MarginalSpec,
    pub horizon: f64,
    pub solver: SolverConfig,
    pub samples: usize,
    pub tol_margin: Option<f64>,
    pub check: CheckSelection,
    pub output_dir: Option<PathBuf>,
    pub curve_file: String,
    pub verdict_file: String,
    pub sweep_file: String,
    pub t_star: f64,
}

const KEYS: &[&str] = &[
    "scenario.id",
    "geometry.topology",
    "geometry.extent",
    "geometry.points",
    "geometry.potential",
    "geometry.normalize_measure",
    "geometry.n",
    "T",
    "solver.tol",
    "solver.max_iter",
    "curve.samples",
    "curve.tol_margin",
    "check",
    "output.dir",
    "output.curve",
    "output.verdict",
    "output.sweep",
    "sweep.t_star",
];

const MARGINAL_KEYS: &[&str] =
    &["family", "mean", "var", "center", "width", "a", "b", "components", "path", "source", "time"];

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn req(&self, key: &str) -> CResult<&str> {
        self.get(key).ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn f64_or(&self, key: &str, default: Option<f64>) -> CResult<f64> {
        match self.get(key) {
            Some(v) => parse_f64(key, v),
            None => default.ok_or_else(|| ConfigError::Missing(key.into())),
        }
    }

    fn usize_or(&self, key: &str, default: Option<usize>) -> CResult<usize> {
        match self.get(key) {
            Some(v) => v.parse().map_err(|_| value_err(key, format!("`{v}` is not a count"))),
            None => default.ok_or_else(|| ConfigError::Missing(key.into())),
        }
    }
}

fn value_err(key: &str, msg: String) -> ConfigError {
    ConfigError::Value { key: key.into(), msg }
}

fn parse_f64(key: &str, v: &str) -> CResult<f64> {
    let x: f64 = v.trim().parse().map_err(|_| value_err(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(value_err(key, "must be finite".into()));
    }
    Ok(x)
}

fn parse_list(key: &str, v: &str) -> CResult<Vec<f64>> {
    v.split(',').map(|s| parse_f64(key, s)).collect()
}

/// Broadcasts a scalar list to `dim` entries.
fn per_axis(key: &str, v: Vec<f64>, dim: usize) -> CResult<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        l if l == dim => Ok(v),
        l => Err(value_err(key, format!("{l} values for {dim} axes"))),
    }
}

fn parse_lines(text: &str) -> CResult<Entries> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: "expected `key = value`".into() })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, msg: "empty key or value".into() });
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Syntax { line: i + 1, msg: format!("duplicate key `{k}`") });
        }
    }
    for k in map.keys() {
        let known = KEYS.contains(&k.as_str())
            || ["marginal.mu.", "marginal.nu."].iter().any(|p| {
                k.strip_prefix(p).is_some_and(|rest| MARGINAL_KEYS.contains(&rest))
            });
        if !known {
            return Err(ConfigError::Unknown(k.clone()));
        }
    }
    Ok(Entries { map })
}

fn parse_potential(v: &str) -> CResult<Potential> {
    let key = "geometry.potential";
    match v {
        "zero" => Ok(Potential::Zero),
        "neg_cos" => Ok(Potential::NegCos),
        _ => match v.strip_prefix("cos:") {
            Some(list) => Ok(Potential::Cosine(parse_list(key, list)?)),
            None => Err(value_err(key, format!("unknown preset `{v}`"))),
        },
    }
}

fn parse_component(text: &str, dim: usize) -> CResult<MarginalSpec> {
    let key = "components";
    let text = text.trim();
    let open = text.find('(').ok_or_else(|| value_err(key, format!("`{text}` lacks arguments")))?;
    if !text.ends_with(')') {
        return Err(value_err(key, format!("`{text}` lacks a closing parenthesis")));
    }
    let name = text[..open].trim();
    let args: Vec<&str> = text[open + 1..text.len() - 1].split(';').map(str::trim).collect();
    if args.len() != 2 {
        return Err(value_err(key, format!("`{name}` takes two `;`-separated arguments")));
    }
    let vec = |s: &str| parse_list(key, s).and_then(|v| per_axis(key, v, dim));
    match name {
        "gaussian" => Ok(MarginalSpec::Gaussian { mean: vec(args[0])?, var: parse_f64(key, args[1])? }),
        "bump" => Ok(MarginalSpec::Bump { center: vec(args[0])?, width: parse_f64(key, args[1])? }),
        "uniform" => Ok(MarginalSpec::Uniform { a: vec(args[0])?, b: vec(args[1])? }),
        _ => Err(value_err(key, format!("unknown component family `{name}`"))),
    }
}

fn parse_marginal(e: &Entries, side: &str, dim: usize, base: &Path) -> CResult<MarginalSpec> {
    let k = |s: &str| format!("marginal.{side}.{s}");
    let vec = |key: &str| -> CResult<Vec<f64>> {
        let key = k(key);
        per_axis(&key, parse_list(&key, e.req(&key)?)?, dim)
    };
    let family = e.req(&k("family"))?;
    let spec = match family {
        "gaussian" => MarginalSpec::Gaussian { mean: vec("mean")?, var: e.f64_or(&k("var"), None)? },
        "bump" => MarginalSpec::Bump { center: vec("center")?, width: e.f64_or(&k("width"), None)? },
        "uniform" => MarginalSpec::Uniform { a: vec("a")?, b: vec("b")? },
        "mixture" => {
            let key = k("components");
            let mut parts = Vec::new();
            for term in e.req(&key)?.split('+') {
                let (w, body) = match term.split_once('*') {
                    Some((w, body)) => (parse_f64(&key, w)?, body),
                    None => (1.0, term),
                };
                if !(w > 0.0) {
                    return Err(value_err(&key, "weights must be positive".into()));
                }
                parts.push((w, parse_component(body, dim)?));
            }
            MarginalSpec::Mixture(parts)
        }
        "file" => MarginalSpec::File(base.join(e.req(&k("path"))?)),
        "heat_of" => {
            let source = match e.get(&k("source")).unwrap_or(if side == "nu" { "mu" } else { "nu" }) {
                "mu" => Side::Mu,
                "nu" => Side::Nu,
                other => return Err(value_err(&k("source"), format!("unknown marginal `{other}`"))),
            };
            let time = match e.get(&k("time")) {
                Some(v) => Some(parse_f64(&k("time"), v)?),
                None => None,
            };
            MarginalSpec::HeatOf { source, time }
        }
        other => return Err(value_err(&k("family"), format!("unknown family `{other}`"))),
    };
    check_marginal_params(&spec, &k("family"))?;
    Ok(spec)
}

fn check_marginal_params(spec: &MarginalSpec, key: &str) -> CResult<()> {
    match spec {
        MarginalSpec::Gaussian { var, .. } if !(*var > 0.0) => {
            Err(value_err(key, "gaussian variance must be positive".into()))
        }
        MarginalSpec::Bump { width, .. } if !(*width > 0.0) => {
            Err(value_err(key, "bump width must be positive".into()))
        }
        MarginalSpec::Uniform { a, b } if a.iter().zip(b).any(|(x, y)| !(x < y)) => {
            Err(value_err(key, "uniform needs a < b".into()))
        }
        MarginalSpec::Mixture(parts) => {
            parts.iter().try_for_each(|(_, p)| check_marginal_params(p, key))
        }
        MarginalSpec::HeatOf { time: Some(t), .. } if !(*t >= 0.0) => {
            Err(value_err(key, "heat_of time must be >= 0".into()))
        }
        _ => Ok(()),
    }
}

/// Per-axis interval that must contain the marginal's support, if bounded.
fn support_box(spec: &MarginalSpec) -> Option<(Vec<f64>, Vec<f64>)> {
    match spec {
        MarginalSpec::Gaussian { mean, var } => {
            let r = 6.0 * var.sqrt();
            Some((mean.iter().map(|m| m - r).collect(), mean.iter().map(|m| m + r).collect()))
        }
        MarginalSpec::Bump { center, width } => Some((
            center.iter().map(|c| c - width).collect(),
            center.iter().map(|c| c + width).collect(),
        )),
        MarginalSpec::Uniform { a, b } => Some((a.clone(), b.clone())),
        MarginalSpec::Mixture(parts) => {
            let boxes: Vec<_> = parts.iter().filter_map(|(_, p)| support_box(p)).collect();
            let dim = boxes.first()?.0.len();
            let lo = (0..dim).map(|a| boxes.iter().map(|b| b.0[a]).fold(f64::INFINITY, f64::min)).collect();
            let hi = (0..dim).map(|a| boxes.iter().map(|b| b.1[a]).fold(f64::NEG_INFINITY, f64::max)).collect();
            Some((lo, hi))
        }
        MarginalSpec::File(_) | MarginalSpec::HeatOf { .. } => None,
    }
}

pub fn parse_config(text: &str, base: &Path) -> CResult<ScenarioConfig> {
    let e = parse_lines(text)?;
    let topology = match e.req("geometry.topology")? {
        "box" => Topology::TruncatedBox,
        "circle" => Topology::PeriodicCircle,
        other => return Err(value_err("geometry.topology", format!("unknown topology `{other}`"))),
    };
    let extents = parse_list("geometry.extent", e.req("geometry.extent")?)?;
    let dim = extents.len();
    if dim == 0 || dim > 2 {
        return Err(value_err("geometry.extent", "one or two axes supported".into()));
    }
    let points: Vec<usize> = e
        .req("geometry.points")?
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| value_err("geometry.points", format!("`{s}` is not a count"))))
        .collect::<CResult<_>>()?;
    let points = match points.len() {
        1 => vec![points[0]; dim],
        l if l == dim => points,
        l => return Err(value_err("geometry.points", format!("{l} values for {dim} axes"))),
    };
    let potential = parse_potential(e.get("geometry.potential").unwrap_or("zero"))?;
    let normalize_measure = match e.get("geometry.normalize_measure").unwrap_or("false") {
        "true" => true,
        "false" => false,
        other => return Err(value_err("geometry.normalize_measure", format!("`{other}` is not a boolean"))),
    };
    let n = e.usize_or("geometry.n", Some(dim))?;
    let horizon = e.f64_or("T", None)?;
    if !(horizon > 0.0) {
        return Err(value_err("T", "horizon must be positive".into()));
    }
    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        tol: e.f64_or("solver.tol", Some(defaults.tol))?,
        max_iter: e.usize_or("solver.max_iter", Some(defaults.max_iter))?,
        initial_scale: 1.0,
    };
    if !(solver.tol > 0.0) || solver.max_iter == 0 {
        return Err(ConfigError::Invalid("solver.tol and solver.max_iter must be positive".into()));
    }
    let samples = e.usize_or("curve.samples", Some(63))?;
    if samples == 0 {
        return Err(value_err("curve.samples", "at least one sample".into()));
    }
    let tol_margin = match e.get("curve.tol_margin") {
        Some(v) => {
            let x = parse_f64("curve.tol_margin", v)?;
            if !(x > 0.0) {
                return Err(value_err("curve.tol_margin", "must be positive".into()));
            }
            Some(x)
        }
        None => None,
    };
    let check = match e.get("check").unwrap_or("auto") {
        "auto" => CheckSelection::Auto,
        "euclidean" => CheckSelection::Euclidean,
        "weighted" => CheckSelection::Weighted,
        "costa_reduction" => CheckSelection::CostaReduction,
        other => return Err(value_err("check", format!("unknown check `{other}`"))),
    };
    let mu = parse_marginal(&e, "mu", dim, base)?;
    let nu = parse_marginal(&e, "nu", dim, base)?;
    match (&mu, &nu) {
        (MarginalSpec::HeatOf { .. }, MarginalSpec::HeatOf { .. }) => {
            return Err(ConfigError::Invalid("μ and ν cannot both be heat_of".into()))
        }
        (MarginalSpec::HeatOf { source: Side::Mu, .. }, _) | (_, MarginalSpec::HeatOf { source: Side::Nu, .. }) => {
            return Err(ConfigError::Invalid("heat_of must refer to the other marginal".into()))
        }
        _ => {}
    }
    if topology == Topology::TruncatedBox {
        if potential != Potential::Zero {
            return Err(ConfigError::Invalid("box geometry supports only the zero potential".into()));
        }
        if n != dim {
            return Err(ConfigError::Invalid("box geometry requires n equal to the dimension".into()));
        }
        for (side, spec) in [("mu", &mu), ("nu", &nu)] {
            if let Some((lo, hi)) = support_box(spec) {
                for a in 0..dim {
                    let l = extents[a];
                    let room = 0.9 * l;
                    if lo[a] < -room || hi[a] > room {
                        return Err(ConfigError::Invalid(format!(
                            "marginal {side} does not fit in [-{room}, {room}] on axis {a}"
                        )));
                    }
                }
            }
        }
    }
    let id = e.get("scenario.id").unwrap_or("scenario").to_string();
    if id.contains(['/', '\\']) || id.trim().is_empty() {
        return Err(value_err("scenario.id", "must be a plain file stem".into()));
    }
    let t_star = e.f64_or("sweep.t_star", Some(0.5))?;
    if !(t_star > 0.0) {
        return Err(value_err("sweep.t_star", "must be positive".into()));
    }
    Ok(ScenarioConfig {
        curve_file: e.get("output.curve").map(String::from).unwrap_or(format!("{id}.curve.csv")),
        verdict_file: e.get("output.verdict").map(String::from).unwrap_or(format!("{id}.verdict.txt")),
        sweep_file: e.get("output.sweep").map(String::from).unwrap_or(format!("{id}.sweep.csv")),
        output_dir: e.get("output.dir").map(|d| base.join(d)),
        id,
        grid: GridSpec { topology, extents, points, potential, normalize_measure },
        n,
        mu,
        nu,
        horizon,
        solver,
        samples,
        tol_margin,
        check,
        t_star,
    })
}

pub fn load_config(path: &Path) -> CResult<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base)
}
