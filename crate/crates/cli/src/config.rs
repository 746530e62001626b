//! Flat `key = value` run configuration.
//!
//! Layers are merged with precedence `--set` > config file > preset >
//! defaults. Unknown keys are always errors: a silently ignored typo in a
//! coupling name would run the wrong experiment.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use qswitch_core::dynamics::{max_stable_dt, Segment, SweepSchedule};
use qswitch_core::spectra::{default_window, DEFAULT_GRID_POINTS};
use qswitch_core::SystemParams;
use thiserror::Error;

pub const REQUIRED_KEYS: [&str; 7] = ["command", "omega_c", "omega_q", "rabi_c", "rabi_q", "kappa_cq", "kappa_qw"];

pub const OPTIONAL_KEYS: [&str; 19] = [
    "delta_c",
    "n_max",
    "grid_start",
    "grid_end",
    "grid_points",
    "t_max",
    "scan_limit",
    "sweep_start",
    "sweep_end",
    "sweep_time",
    "hold_time",
    "quiescent_time",
    "quiescent_delta_q",
    "dipole_moment",
    "transition_frequency",
    "mode_volume",
    "dt",
    "samples",
    "output",
];

/// Nominal NV-centre device inputs (SI).
pub const TABLE1_DIPOLE_MOMENT: f64 = 1e-29;
/// (638 nm)³.
pub const TABLE1_MODE_VOLUME: f64 = 2.59694072e-19;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{source_name}:{line}: expected `key = value`, got `{text}`")]
    Syntax { source_name: String, line: usize, text: String },
    #[error("{source_name}:{line}: unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { source_name: String, line: usize, key: String, suggestion: Option<String> },
    #[error("{source_name}:{line}: key `{key}` given twice")]
    Duplicate { source_name: String, line: usize, key: String },
    #[error("{source_name}:{line}: `{key}` expects {expected}, got `{value}`")]
    BadValue { source_name: String, line: usize, key: String, value: String, expected: &'static str },
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("unknown preset `{0}` (available: fig2, fig3, fig5, table1)")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectra,
    Transient,
    Switch,
    Quiescent,
    Estimate,
    Validate,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Spectra, Command::Transient, Command::Switch, Command::Quiescent, Command::Estimate, Command::Validate];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectra => "spectra",
            Command::Transient => "transient",
            Command::Switch => "switch",
            Command::Quiescent => "quiescent",
            Command::Estimate => "estimate",
            Command::Validate => "validate",
        }
    }
}

impl FromStr for Command {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or(())
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TMax {
    /// Pick the span by the saturation scan up to `scan_limit`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
}

/// Fully resolved run description; every field is materialised.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub params: SystemParams,
    pub delta_c: f64,
    pub n_max: u32,
    pub grid_start: f64,
    pub grid_end: f64,
    pub grid_points: usize,
    pub t_max: TMax,
    pub scan_limit: f64,
    pub sweep_start: f64,
    pub sweep_end: f64,
    pub sweep_time: f64,
    pub hold_time: f64,
    pub quiescent_time: f64,
    pub quiescent_delta_q: f64,
    pub dipole_moment: f64,
    pub transition_frequency: f64,
    pub mode_volume: f64,
    pub dt: f64,
    pub samples: usize,
    pub output: OutputFormat,
}

impl RunSpec {
    /// Gate-detuning schedule of a `switch` run: optional hold at the start
    /// value, then a linear sweep.
    pub fn switch_schedule(&self) -> Result<SweepSchedule, ConfigError> {
        let mut segments = Vec::new();
        if self.hold_time > 0.0 {
            segments.push(Segment::hold(self.hold_time, self.sweep_start));
        }
        segments.push(Segment::ramp(self.sweep_time, self.sweep_start, self.sweep_end));
        SweepSchedule::new(self.delta_c, segments).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn quiescent_schedule(&self) -> Result<SweepSchedule, ConfigError> {
        SweepSchedule::constant(self.delta_c, self.quiescent_delta_q, self.quiescent_time)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// `key = value` lines in canonical order; parses back to an equal spec.
    pub fn to_config_text(&self) -> String {
        let p = &self.params;
        let t_max = match self.t_max {
            TMax::Auto => "auto".to_string(),
            TMax::Fixed(t) => t.to_string(),
        };
        let lines: Vec<(&str, String)> = vec![
            ("command", self.command.to_string()),
            ("omega_c", p.omega_c.to_string()),
            ("omega_q", p.omega_q.to_string()),
            ("rabi_c", p.rabi_c.to_string()),
            ("rabi_q", p.rabi_q.to_string()),
            ("kappa_cq", p.kappa_cq.to_string()),
            ("kappa_qw", p.kappa_qw.to_string()),
            ("delta_c", self.delta_c.to_string()),
            ("n_max", self.n_max.to_string()),
            ("grid_start", self.grid_start.to_string()),
            ("grid_end", self.grid_end.to_string()),
            ("grid_points", self.grid_points.to_string()),
            ("t_max", t_max),
            ("scan_limit", self.scan_limit.to_string()),
            ("sweep_start", self.sweep_start.to_string()),
            ("sweep_end", self.sweep_end.to_string()),
            ("sweep_time", self.sweep_time.to_string()),
            ("hold_time", self.hold_time.to_string()),
            ("quiescent_time", self.quiescent_time.to_string()),
            ("quiescent_delta_q", self.quiescent_delta_q.to_string()),
            ("dipole_moment", self.dipole_moment.to_string()),
            ("transition_frequency", self.transition_frequency.to_string()),
            ("mode_volume", self.mode_volume.to_string()),
            ("dt", self.dt.to_string()),
            ("samples", self.samples.to_string()),
            ("output", "csv".to_string()),
        ];
        lines.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// One parsed value with the place it came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    source_name: String,
    line: usize,
}

/// Key/value layers merged in increasing precedence.
#[derive(Debug, Clone, Default)]
pub struct ConfigLayers {
    entries: BTreeMap<String, Entry>,
}

fn suggest(key: &str) -> Option<String> {
    REQUIRED_KEYS
        .iter()
        .chain(OPTIONAL_KEYS.iter())
        .map(|k| (strsim::levenshtein(key, k), *k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 4))
        .min()
        .map(|(_, k)| k.to_string())
}

fn is_known(key: &str) -> bool {
    REQUIRED_KEYS.contains(&key) || OPTIONAL_KEYS.contains(&key)
}

impl ConfigLayers {
    pub fn new() -> Self {
        ConfigLayers::default()
    }

    /// Overlay a whole document; later layers win.
    pub fn apply_text(&mut self, source_name: &str, text: &str) -> Result<(), ConfigError> {
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                source_name: source_name.to_string(),
                line,
                text: content.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { source_name: source_name.to_string(), line, text: content.to_string() });
            }
            if seen.insert(key.to_string(), line).is_some() {
                return Err(ConfigError::Duplicate { source_name: source_name.to_string(), line, key: key.to_string() });
            }
            self.set(source_name, line, key, value)?;
        }
        Ok(())
    }

    /// A single `key=value` override as given to `--set`.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            source_name: "--set".into(),
            line: 0,
            text: assignment.to_string(),
        })?;
        self.set("--set", 0, key.trim(), value.trim())
    }

    pub fn set(&mut self, source_name: &str, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        if !is_known(key) {
            return Err(ConfigError::UnknownKey {
                source_name: source_name.to_string(),
                line,
                key: key.to_string(),
                suggestion: suggest(key),
            });
        }
        self.entries.insert(
            key.to_string(),
            Entry { value: value.to_string(), source_name: source_name.to_string(), line },
        );
        Ok(())
    }

    fn bad(&self, key: &str, expected: &'static str) -> ConfigError {
        let e = &self.entries[key];
        ConfigError::BadValue {
            source_name: e.source_name.clone(),
            line: e.line,
            key: key.to_string(),
            value: e.value.clone(),
            expected,
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => match e.value.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(self.bad(key, "a finite number")),
            },
        }
    }

    fn integer<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| self.bad(key, "a non-negative integer")),
        }
    }

    /// Validate the merged layers and fill every default.
    pub fn resolve(&self) -> Result<RunSpec, ConfigError> {
        // value errors carry a line number, so report them first
        for key in &REQUIRED_KEYS[1..] {
            self.float(key)?;
        }
        let missing: Vec<String> =
            REQUIRED_KEYS.iter().filter(|k| !self.entries.contains_key(**k)).map(|k| k.to_string()).collect();
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }
        let command: Command = self.entries["command"]
            .value
            .parse()
            .map_err(|_| self.bad("command", "one of spectra, transient, switch, quiescent, estimate, validate"))?;
        let req = |k: &str| -> Result<f64, ConfigError> { Ok(self.float(k)?.expect("required key present")) };
        let params = SystemParams {
            omega_c: req("omega_c")?,
            omega_q: req("omega_q")?,
            rabi_c: req("rabi_c")?,
            rabi_q: req("rabi_q")?,
            kappa_cq: req("kappa_cq")?,
            kappa_qw: req("kappa_qw")?,
        };
        let delta = params.delta();
        let rabi = params.rabi_c;

        let (grid_lo, grid_hi, grid_n) = match command {
            Command::Transient => (-delta - 2.0 * rabi, -delta + 2.0 * rabi, 401),
            _ => {
                let (lo, hi) = default_window(&params);
                (lo, hi, DEFAULT_GRID_POINTS)
            }
        };
        let t_max = match self.entries.get("t_max") {
            None => TMax::Auto,
            Some(e) if e.value == "auto" => TMax::Auto,
            Some(_) => TMax::Fixed(self.float("t_max").map_err(|_| self.bad("t_max", "a number or `auto`"))?.unwrap()),
        };
        let output = match self.entries.get("output").map(|e| e.value.as_str()) {
            None | Some("csv") => OutputFormat::Csv,
            Some(_) => return Err(self.bad("output", "`csv`")),
        };
        let default_samples = match command {
            Command::Switch => 20_000,
            Command::Transient => 200,
            _ => 2000,
        };

        let mut spec = RunSpec {
            command,
            params,
            delta_c: self.float("delta_c")?.unwrap_or(0.0),
            n_max: self.integer("n_max")?.unwrap_or(2),
            grid_start: self.float("grid_start")?.unwrap_or(grid_lo),
            grid_end: self.float("grid_end")?.unwrap_or(grid_hi),
            grid_points: self.integer("grid_points")?.unwrap_or(grid_n),
            t_max,
            scan_limit: self.float("scan_limit")?.unwrap_or(150.0 / rabi),
            sweep_start: self.float("sweep_start")?.unwrap_or(-delta + 0.8 * rabi),
            sweep_end: self.float("sweep_end")?.unwrap_or(-delta + 1.8 * rabi),
            sweep_time: self.float("sweep_time")?.unwrap_or(2e4 * PI / rabi),
            hold_time: self.float("hold_time")?.unwrap_or(0.0),
            quiescent_time: self.float("quiescent_time")?.unwrap_or(2e4 * PI / rabi),
            quiescent_delta_q: self.float("quiescent_delta_q")?.unwrap_or(-delta),
            dipole_moment: self.float("dipole_moment")?.unwrap_or(TABLE1_DIPOLE_MOMENT),
            transition_frequency: self.float("transition_frequency")?.unwrap_or(params.omega_c),
            mode_volume: self.float("mode_volume")?.unwrap_or(TABLE1_MODE_VOLUME),
            dt: 0.0,
            samples: self.integer("samples")?.unwrap_or(default_samples),
            output,
        };
        check_ranges(&spec)?;
        spec.dt = match self.float("dt")? {
            Some(dt) => dt,
            None => default_dt(&spec)?,
        };
        if !(spec.dt > 0.0) {
            return Err(self.bad("dt", "a positive number"));
        }
        Ok(spec)
    }
}

fn check_ranges(spec: &RunSpec) -> Result<(), ConfigError> {
    let invalid = |m: String| Err(ConfigError::Invalid(m));
    if spec.n_max == 0 {
        return invalid("n_max must be at least 1".into());
    }
    if spec.grid_points < 3 {
        return invalid("grid_points must be at least 3".into());
    }
    if !(spec.grid_end > spec.grid_start) {
        return invalid("grid_end must exceed grid_start".into());
    }
    if spec.samples == 0 {
        return invalid("samples must be at least 1".into());
    }
    for (name, v) in [
        ("sweep_time", spec.sweep_time),
        ("quiescent_time", spec.quiescent_time),
        ("scan_limit", spec.scan_limit),
    ] {
        if !(v > 0.0) {
            return invalid(format!("{name} must be positive"));
        }
    }
    if spec.hold_time < 0.0 {
        return invalid("hold_time must not be negative".into());
    }
    if let TMax::Fixed(t) = spec.t_max {
        if !(t > 0.0) {
            return invalid("t_max must be positive".into());
        }
    }
    Ok(())
}

/// Largest step the integrator accepts for the detunings this command visits.
fn default_dt(spec: &RunSpec) -> Result<f64, ConfigError> {
    let schedule = match spec.command {
        Command::Switch => spec.switch_schedule()?,
        Command::Quiescent => spec.quiescent_schedule()?,
        _ => SweepSchedule::new(spec.delta_c, vec![Segment::ramp(1.0, spec.grid_start, spec.grid_end)])
            .map_err(|e| ConfigError::Invalid(e.to_string()))?,
    };
    Ok(max_stable_dt(&spec.params, &schedule))
}

/// Parse a single self-contained document.
pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    let mut layers = ConfigLayers::new();
    layers.apply_text("config", text)?;
    layers.resolve()
}

pub fn preset_text(name: &str) -> Result<&'static str, ConfigError> {
    match name {
        "fig2" => Ok(include_str!("../presets/fig2.conf")),
        "fig3" => Ok(include_str!("../presets/fig3.conf")),
        "fig5" => Ok(include_str!("../presets/fig5.conf")),
        "table1" => Ok(include_str!("../presets/table1.conf")),
        other => Err(ConfigError::UnknownPreset(other.to_string())),
    }
}
