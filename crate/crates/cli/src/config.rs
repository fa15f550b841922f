//! Resolution of flags and config-file entries into validated settings.
//!
//! Everything is parsed and checked here, before any computation starts.
//! Diagnostics name the flag or the file line a bad value came from.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use cavity_purify::closed_form::FormulaVariant;
use cavity_purify::hilbert::{CompositeSpace, DensityMatrix};
use cavity_purify::states::{make_named_state, StateLabel};
use evalexpr::{
    ContextWithMutableFunctions, ContextWithMutableVariables, DefaultNumericTypes, EvalexprError,
    Function, HashMapContext, Value,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CliError, CliResult};

/// Every key a config file may contain.
pub const KEYS: [&str; 17] = [
    "emitters",
    "kept-photons",
    "gamma-tau",
    "gamma",
    "tau",
    "couplings",
    "steps",
    "initial",
    "target",
    "formula-variant",
    "format",
    "grid",
    "jobs",
    "max-points",
    "seed",
    "trajectories",
    "output",
];

pub const MAX_EMITTERS: usize = 8;
pub const MAX_KEPT_PHOTONS: usize = 16;
pub const MAX_STEPS: usize = 1_000_000;
pub const DEFAULT_STEPS: usize = 20;
pub const DEFAULT_MAX_POINTS: usize = 100_000;

/// Loose tolerances for density matrices typed into a text file.
const FILE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(path, &text)
    }

    /// `key = value` per line; blank lines and `#` comments are skipped.
    pub fn parse(path: &Path, text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::Config(format!("{}:{line_no}: {msg}", path.display()));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key=value, found `{line}`")))?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(at(format!("unknown key `{key}`")));
            }
            if entries.contains_key(&key) {
                return Err(at(format!("duplicate key `{key}`")));
            }
            entries.insert(key, (line_no, value.trim().to_string()));
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Flag(&'static str),
    File { path: PathBuf, line: usize, key: &'static str },
    Default(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag(k) => write!(f, "--{k}"),
            Origin::File { path, line, key } => write!(f, "{}:{line}: {key}", path.display()),
            Origin::Default(k) => write!(f, "default {k}"),
        }
    }
}

/// Merged view of command-line flags over config-file entries.
#[derive(Debug, Clone, Default)]
pub struct Lookup {
    flags: BTreeMap<&'static str, String>,
    file: Option<ConfigFile>,
}

impl Lookup {
    pub fn new(flags: &[(&'static str, Option<&String>)], file: Option<ConfigFile>) -> Self {
        let flags = flags
            .iter()
            .filter_map(|(k, v)| v.map(|v| (*k, v.clone())))
            .collect();
        Self { flags, file }
    }

    pub fn raw(&self, key: &'static str) -> Option<(String, Origin)> {
        if let Some(v) = self.flags.get(key) {
            return Some((v.clone(), Origin::Flag(key)));
        }
        let file = self.file.as_ref()?;
        file.entries.get(key).map(|(line, v)| {
            (
                v.clone(),
                Origin::File {
                    path: file.path.clone(),
                    line: *line,
                    key,
                },
            )
        })
    }

    pub fn get<T>(
        &self,
        key: &'static str,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> CliResult<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, origin)) => parse(&v)
                .map(Some)
                .map_err(|msg| CliError::Config(format!("{origin}: {msg}"))),
        }
    }

    pub fn output(&self) -> Option<PathBuf> {
        self.raw("output").map(|(v, _)| PathBuf::from(v))
    }
}

fn promote_integers(expr: &str) -> String {
    // evalexpr divides integers exactly like Rust does, so `1/2` would be 0.
    let chars: Vec<char> = expr.chars().collect();
    let mut out = String::with_capacity(expr.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let starts_number = c.is_ascii_digit()
            && (i == 0 || !(chars[i - 1].is_alphanumeric() || chars[i - 1] == '_' || chars[i - 1] == '.'));
        if !starts_number {
            out.push(c);
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
            i += 1;
        }
        if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
            i += 1;
            if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                i += 1;
            }
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
        }
        let lit: String = chars[start..i].iter().collect();
        out.push_str(&lit);
        if !lit.contains(['.', 'e', 'E']) {
            out.push_str(".0");
        }
    }
    out
}

fn math_context() -> HashMapContext<DefaultNumericTypes> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    ctx.set_value("pi".into(), Value::from_float(PI)).expect("fresh context");
    let unary: [(&str, fn(f64) -> f64); 8] = [
        ("sqrt", f64::sqrt),
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("abs", f64::abs),
        ("acos", f64::acos),
    ];
    for (name, f) in unary {
        ctx.set_function(
            name.into(),
            Function::new(move |arg: &Value<DefaultNumericTypes>| {
                Ok(Value::from_float(f(arg.as_number()?)))
            }),
        )
        .expect("fresh context");
    }
    ctx
}

/// Evaluates a real-valued expression such as `pi/(2*sqrt(6))`.
pub fn parse_real(expr: &str) -> Result<f64, String> {
    let ctx = math_context();
    let value = evalexpr::eval_number_with_context(&promote_integers(expr.trim()), &ctx)
        .map_err(|e: EvalexprError| format!("cannot evaluate `{expr}`: {e}"))?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{expr}` evaluates to {value}"))
    }
}

pub fn parse_count(s: &str) -> Result<usize, String> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, found `{}`", s.trim()))
}

pub fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().any(|x| x.is_empty()) {
        return Err(format!("malformed list `{s}`"));
    }
    items.into_iter().map(item).collect()
}

/// `min:max:count`, evenly spaced with both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected min:max:count, found `{s}`"));
        }
        let grid = Grid {
            min: parse_real(parts[0])?,
            max: parse_real(parts[1])?,
            count: parse_count(parts[2])?,
        };
        if grid.count > 1 && !(grid.max > grid.min) {
            return Err(format!("grid maximum must exceed its minimum in `{s}`"));
        }
        Ok(grid)
    }

    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => {
                let h = (self.max - self.min) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.max } else { self.min + i as f64 * h })
                    .collect()
            }
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Grid {
            min: self.min * factor,
            max: self.max * factor,
            count: self.count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaTau {
    Single(f64),
    Grid(Grid),
}

impl GammaTau {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s.contains(':') {
            Grid::parse(s).map(GammaTau::Grid)
        } else {
            parse_real(s).map(GammaTau::Single)
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GammaTau::Single(_) => 1,
            GammaTau::Grid(g) => g.count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<f64> {
        match self {
            GammaTau::Single(x) => vec![*x],
            GammaTau::Grid(g) => g.points(),
        }
    }

    fn scaled(self, factor: f64) -> Self {
        match self {
            GammaTau::Single(x) => GammaTau::Single(x * factor),
            GammaTau::Grid(g) => GammaTau::Grid(g.scaled(factor)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Text,
}

impl Format {
    fn parse(s: &str, allow_text: bool) -> Result<Self, String> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "text" if allow_text => Ok(Format::Text),
            other => Err(format!(
                "unknown format `{other}` (expected csv{})",
                if allow_text { ", json or text" } else { " or json" }
            )),
        }
    }
}

/// Emitter count, kept photons, intervals and couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct Physics {
    pub n_emitters: usize,
    pub kept_photons: Vec<usize>,
    pub gamma_tau: GammaTau,
    pub couplings: Vec<f64>,
}

impl Physics {
    pub fn identical_couplings(&self) -> bool {
        self.couplings.iter().all(|&c| c == 1.0)
    }
}

pub fn default_gamma_tau(n_emitters: usize) -> Option<f64> {
    match n_emitters {
        2 => Some(PI / (2.0 * 6f64.sqrt())),
        3 => Some(PI / 10f64.sqrt()),
        _ => None,
    }
}

pub fn resolve_physics(l: &Lookup, allow_lists: bool) -> CliResult<Physics> {
    let n_emitters = l
        .get("emitters", |s| {
            let n = parse_count(s)?;
            if (1..=MAX_EMITTERS).contains(&n) {
                Ok(n)
            } else {
                Err(format!("must be between 1 and {MAX_EMITTERS}"))
            }
        })?
        .unwrap_or(2);

    let kept = |s: &str| {
        let k = parse_count(s)?;
        if k <= MAX_KEPT_PHOTONS {
            Ok(k)
        } else {
            Err(format!("at most {MAX_KEPT_PHOTONS} kept photons are supported"))
        }
    };
    let kept_photons = l
        .get("kept-photons", |s| {
            let list = parse_list(s, kept)?;
            if list.len() > 1 && !allow_lists {
                Err("a single value is required here".into())
            } else {
                Ok(list)
            }
        })?
        .unwrap_or_else(|| vec![1]);

    let gamma_tau = resolve_gamma_tau(l, n_emitters)?;
    if !allow_lists && matches!(gamma_tau, GammaTau::Grid(_)) {
        let (_, origin) = l.raw("gamma-tau").or_else(|| l.raw("tau")).expect("grid came from somewhere");
        return Err(CliError::Config(format!("{origin}: a single value is required here")));
    }

    let couplings = l
        .get("couplings", |s| {
            let list = parse_list(s, parse_real)?;
            if list.len() > n_emitters {
                return Err(format!("{} multipliers given for {n_emitters} emitters", list.len()));
            }
            Ok(list)
        })?
        .unwrap_or_default();
    let couplings = (0..n_emitters)
        .map(|i| couplings.get(i).copied().unwrap_or(1.0))
        .collect();

    Ok(Physics {
        n_emitters,
        kept_photons,
        gamma_tau,
        couplings,
    })
}

fn resolve_gamma_tau(l: &Lookup, n_emitters: usize) -> CliResult<GammaTau> {
    let direct = l.get("gamma-tau", GammaTau::parse)?;
    let grid = l.get("grid", Grid::parse)?;
    let tau = l.get("tau", GammaTau::parse)?;
    let gamma = l.get("gamma", |s| {
        let g = parse_real(s)?;
        if g > 0.0 {
            Ok(g)
        } else {
            Err("must be positive".into())
        }
    })?;

    let given = [direct.is_some(), grid.is_some(), tau.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if given > 1 {
        return Err(CliError::Config(
            "give the interval once: --gamma-tau, --grid or --gamma/--tau".into(),
        ));
    }
    if gamma.is_some() && tau.is_none() {
        return Err(CliError::Config("--gamma needs --tau".into()));
    }
    if let Some(t) = tau {
        return Ok(t.scaled(gamma.unwrap_or(1.0)));
    }
    if let Some(g) = grid {
        return Ok(GammaTau::Grid(g));
    }
    if let Some(d) = direct {
        return Ok(d);
    }
    default_gamma_tau(n_emitters).map(GammaTau::Single).ok_or_else(|| {
        CliError::Config(format!("no default interval for {n_emitters} emitters; pass --gamma-tau"))
    })
}

/// The prepared emitter state and how it was specified.
#[derive(Debug, Clone, PartialEq)]
pub struct Initial {
    pub descriptor: String,
    pub rho: DensityMatrix,
    /// First emitter excited, the rest in the ground state.
    pub is_default: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub steps: usize,
    pub initial: Initial,
    pub target: StateLabel,
    pub target_is_default: bool,
    pub variant: FormulaVariant,
}

pub fn default_initial_config(n_emitters: usize) -> String {
    std::iter::once('e')
        .chain(std::iter::repeat_n('g', n_emitters - 1))
        .collect()
}

pub fn default_target(n_emitters: usize) -> Option<StateLabel> {
    match n_emitters {
        2 => Some(StateLabel::Singlet),
        3 => Some(StateLabel::W),
        _ => None,
    }
}

pub fn resolve_run(l: &Lookup, n_emitters: usize) -> CliResult<RunSettings> {
    let steps = l
        .get("steps", |s| {
            let n = parse_count(s)?;
            if n <= MAX_STEPS {
                Ok(n)
            } else {
                Err(format!("at most {MAX_STEPS} steps are supported"))
            }
        })?
        .unwrap_or(DEFAULT_STEPS);

    let default_cfg = default_initial_config(n_emitters);
    let initial = match l.raw("initial") {
        None => named_initial(&StateLabel::Product(default_cfg.clone()), n_emitters, &default_cfg)
            .map_err(|m| CliError::Config(format!("default initial state: {m}")))?,
        Some((v, origin)) => {
            let result = match v.strip_prefix("file:") {
                Some(path) => read_density_file(Path::new(path), n_emitters).map(|rho| Initial {
                    descriptor: v.clone(),
                    rho,
                    is_default: false,
                }),
                None => v
                    .parse::<StateLabel>()
                    .map_err(|e| e.to_string())
                    .and_then(|label| named_initial(&label, n_emitters, &default_cfg)),
            };
            result.map_err(|m| CliError::Config(format!("{origin}: {m}")))?
        }
    };

    let (target, target_is_default) = match l.raw("target") {
        Some((v, origin)) => {
            let label = v
                .parse::<StateLabel>()
                .and_then(|label| make_named_state(&label, n_emitters).map(|_| label))
                .map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
            let is_default = Some(&label) == default_target(n_emitters).as_ref();
            (label, is_default)
        }
        None => (
            default_target(n_emitters).ok_or_else(|| {
                CliError::Config(format!("no default target for {n_emitters} emitters; pass --target"))
            })?,
            true,
        ),
    };

    let variant = l
        .get("formula-variant", |s| s.parse::<FormulaVariant>().map_err(|e| e.to_string()))?
        .unwrap_or_default();

    Ok(RunSettings {
        steps,
        initial,
        target,
        target_is_default,
        variant,
    })
}

fn named_initial(label: &StateLabel, n_emitters: usize, default_cfg: &str) -> Result<Initial, String> {
    let named = make_named_state(label, n_emitters).map_err(|e| e.to_string())?;
    Ok(Initial {
        descriptor: label.to_string(),
        rho: named.density_matrix(),
        is_default: matches!(label, StateLabel::Product(c) if c == default_cfg),
    })
}

/// Reads a density matrix: a line holding the dimension, then `dim²`
/// entries in row-major order, each written as `re im`. Text after `#` is
/// ignored.
pub fn read_density_file(path: &Path, n_emitters: usize) -> Result<DensityMatrix, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_density_text(&text, n_emitters).map_err(|m| format!("{}: {m}", path.display()))
}

pub fn parse_density_text(text: &str, n_emitters: usize) -> Result<DensityMatrix, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines.next().ok_or("empty density matrix file")?;
    let dim = parse_count(header).map_err(|m| format!("line {header_line}: dimension header: {m}"))?;
    let space = CompositeSpace::emitters_only(n_emitters).map_err(|e| e.to_string())?;
    if dim != space.dim() {
        return Err(format!(
            "line {header_line}: dimension {dim} does not match {n_emitters} emitters (expected {})",
            space.dim()
        ));
    }
    let mut values = Vec::with_capacity(2 * dim * dim);
    for (line_no, line) in lines {
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| format!("line {line_no}: `{tok}` is not a number"))?;
            if !v.is_finite() {
                return Err(format!("line {line_no}: `{tok}` is not finite"));
            }
            values.push(v);
        }
    }
    if values.len() != 2 * dim * dim {
        return Err(format!(
            "expected {} numbers ({dim}x{dim} complex entries as `re im`), found {}",
            2 * dim * dim,
            values.len()
        ));
    }
    let m = DMatrix::from_row_iterator(
        dim,
        dim,
        values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])),
    );
    DensityMatrix::with_tolerance(space, m, FILE_TOL, -FILE_TOL).map_err(|e| e.to_string())
}

pub fn resolve_format(l: &Lookup, allow_text: bool, default: Format) -> CliResult<Format> {
    Ok(l.get("format", |s| Format::parse(s, allow_text))?.unwrap_or(default))
}

pub fn resolve_seed(l: &Lookup) -> CliResult<Option<u64>> {
    l.get("seed", |s| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| format!("expected an unsigned 64-bit integer, found `{}`", s.trim()))
    })
}
