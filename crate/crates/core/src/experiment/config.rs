use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

use crate::error::SqzError;
use crate::gaussian::{GaussianState, SymplecticTransform};
use crate::squeezer::{ImperfectionModel, ProtocolConfig};
use crate::tomography::MIN_SCAN_PHASES;
use crate::units::{db_to_nepers, SHOT_NOISE_VARIANCE};

/// What a run computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ReproducePaper,
    Sweep,
    Tomography,
    Trajectory,
    Compile,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::ReproducePaper,
        Mode::Sweep,
        Mode::Tomography,
        Mode::Trajectory,
        Mode::Compile,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::ReproducePaper => "reproduce-paper",
            Mode::Sweep => "sweep",
            Mode::Tomography => "tomography",
            Mode::Trajectory => "trajectory",
            Mode::Compile => "compile",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// Amplitude of the default coherent input: 15 dB above shot noise in
/// total quadrature power, split equally between `x` and `p`.
pub fn default_input_amplitude() -> f64 {
    (SHOT_NOISE_VARIANCE * 10f64.powf(1.5) / 2.0).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub transmittance: f64,
    /// Ancilla squeezing in dB below shot noise.
    pub ancilla_db: f64,
    /// Feedforward gain; the nominal `-sqrt((1-T)/T)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    pub squeeze_angle: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            transmittance: 0.25,
            ancilla_db: 5.1,
            gain: None,
            squeeze_angle: 0.0,
        }
    }
}

impl ProtocolSection {
    pub fn to_config(&self) -> Result<ProtocolConfig, SqzError> {
        let cfg = ProtocolConfig {
            transmittance: self.transmittance,
            ancilla_squeezing: db_to_nepers(self.ancilla_db),
            gain: self.gain,
            squeeze_angle: self.squeeze_angle,
        };
        if !(self.ancilla_db >= 0.0) || !self.ancilla_db.is_finite() {
            return Err(SqzError::InvalidParameter {
                name: "ancilla_db",
                value: self.ancilla_db,
                reason: "must be finite and non-negative",
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A named [`ImperfectionModel`] preset with optional per-field overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImperfectionSection {
    pub preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homodyne_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagation_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electronic_noise_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_jitter_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo_phase_jitter_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub displacement_coupler: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_error: Option<f64>,
}

impl Default for ImperfectionSection {
    fn default() -> Self {
        Self {
            preset: "default".into(),
            homodyne_efficiency: None,
            detector_efficiency: None,
            propagation_efficiency: None,
            electronic_noise_db: None,
            phase_jitter_rad: None,
            lo_phase_jitter_rad: None,
            displacement_coupler: None,
            gain_error: None,
        }
    }
}

impl ImperfectionSection {
    pub fn to_model(&self) -> Result<ImperfectionModel, SqzError> {
        let mut m = ImperfectionModel::preset(&self.preset).ok_or_else(|| {
            SqzError::Unsupported(format!(
                "unknown preset `{}` (expected none, ideal, default or degraded-feedforward)",
                self.preset
            ))
        })?;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut m.homodyne_efficiency, self.homodyne_efficiency);
        set(&mut m.detector_efficiency, self.detector_efficiency);
        set(&mut m.propagation_efficiency, self.propagation_efficiency);
        set(&mut m.phase_jitter_rad, self.phase_jitter_rad);
        set(&mut m.displacement_coupler, self.displacement_coupler);
        set(&mut m.gain_error, self.gain_error);
        if self.electronic_noise_db.is_some() {
            m.electronic_noise_db = self.electronic_noise_db;
        }
        if self.lo_phase_jitter_rad.is_some() {
            m.lo_phase_jitter_rad = self.lo_phase_jitter_rad;
        }
        m.validate()?;
        Ok(m)
    }
}

/// Coherent input state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub mean_x: f64,
    pub mean_p: f64,
}

impl Default for InputSection {
    fn default() -> Self {
        let a = default_input_amplitude();
        Self { mean_x: a, mean_p: a }
    }
}

impl InputSection {
    pub fn state(&self) -> GaussianState {
        GaussianState::coherent(self.mean_x, self.mean_p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub n_shots: usize,
    pub n_phases: usize,
    pub samples_per_phase: usize,
    pub seed: u64,
    pub bootstrap_resamples: usize,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            n_shots: 100_000,
            n_phases: 25,
            samples_per_phase: 4000,
            seed: 1,
            bootstrap_resamples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write the raw record (phase scan or per-shot trajectory).
    pub record: bool,
    /// Write the reconstructed Wigner grid.
    pub wigner: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            record: true,
            wigner: true,
        }
    }
}

/// Knob scanned by `sweep`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Transmittance,
    AncillaDb,
    Gain,
    GainError,
    HomodyneEfficiency,
    DetectorEfficiency,
    PropagationEfficiency,
    DisplacementCoupler,
    PhaseJitterRad,
    LoPhaseJitterRad,
    ElectronicNoiseDb,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::Transmittance => "transmittance",
            SweepParameter::AncillaDb => "ancilla_db",
            SweepParameter::Gain => "gain",
            SweepParameter::GainError => "gain_error",
            SweepParameter::HomodyneEfficiency => "homodyne_efficiency",
            SweepParameter::DetectorEfficiency => "detector_efficiency",
            SweepParameter::PropagationEfficiency => "propagation_efficiency",
            SweepParameter::DisplacementCoupler => "displacement_coupler",
            SweepParameter::PhaseJitterRad => "phase_jitter_rad",
            SweepParameter::LoPhaseJitterRad => "lo_phase_jitter_rad",
            SweepParameter::ElectronicNoiseDb => "electronic_noise_db",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Explicit values; overrides `start`/`stop`/`steps` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::Transmittance,
            start: 0.05,
            stop: 1.0,
            steps: 20,
            values: None,
        }
    }
}

impl SweepSection {
    pub fn grid(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        if self.steps == 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|k| self.start + (self.stop - self.start) * k as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

/// Which state the tomography run scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomographyTarget {
    /// Squeezer output for the configured protocol and imperfections.
    Output,
    /// The coherent input.
    Input,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographySection {
    pub state: TomographyTarget,
    pub filter_cutoff: f64,
    pub grid_points: usize,
    /// Half-width of the grid in marginal standard deviations.
    pub grid_sigmas: f64,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self {
            state: TomographyTarget::Output,
            filter_cutoff: crate::tomography::DEFAULT_FILTER_CUTOFF,
            grid_points: 121,
            grid_sigmas: 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileSection {
    /// Row-major 2x2 symplectic matrix.
    pub matrix: [[f64; 2]; 2],
    pub displacement: [f64; 2],
    /// Ancilla squeezing for the finite-resource simulation; the protocol's
    /// `ancilla_db` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ancilla_db: Option<f64>,
}

impl Default for CompileSection {
    fn default() -> Self {
        Self {
            matrix: [[0.5, 0.0], [0.0, 2.0]],
            displacement: [0.0, 0.0],
            ancilla_db: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproduceSection {
    pub transmittances: Vec<f64>,
    /// Extra imperfection presets tabulated next to the configured model.
    pub compare_presets: Vec<String>,
}

impl Default for ReproduceSection {
    fn default() -> Self {
        Self {
            transmittances: vec![0.75, 0.5, 0.25],
            compare_presets: vec!["degraded-feedforward".into()],
        }
    }
}

/// Everything a run needs. Every section and key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub protocol: ProtocolSection,
    pub imperfections: ImperfectionSection,
    pub input: InputSection,
    pub sampling: SamplingSection,
    pub output: OutputSection,
    pub reproduce: ReproduceSection,
    pub sweep: SweepSection,
    pub tomography: TomographySection,
    pub compile: CompileSection,
}

/// A configuration problem, located in the file or on the command line.
#[derive(Debug, Error)]
#[error("{location}: {message}")]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            message: message.into(),
        }
    }
}

/// A validated configuration and where it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Hex SHA-256 of the effective configuration (output directory
    /// excluded).
    pub hash: String,
}

impl ExperimentConfig {
    /// Canonical JSON of the configuration, used for hashing. The output
    /// directory is left out so that moving a run does not change it.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let mut v = serde_json::to_value(&c).expect("configuration serializes");
        crate::format::round_json(&mut v);
        serde_json::to_string(&v).expect("JSON value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Checks every embedded invariant; each problem is reported against
    /// the dotted key that caused it.
    pub fn check(&self) -> Vec<(String, String)> {
        let mut issues = Vec::new();
        let mut push = |key: &str, msg: String| issues.push((key.to_string(), msg));
        let param_key = |section: &str, e: &SqzError| match e {
            SqzError::InvalidParameter { name, .. } => format!("{section}.{name}"),
            _ => section.to_string(),
        };
        if let Err(e) = self.protocol.to_config() {
            push(&param_key("protocol", &e), e.to_string());
        }
        if let Err(e) = self.imperfections.to_model() {
            let key = match &e {
                SqzError::Unsupported(_) => "imperfections.preset".to_string(),
                other => param_key("imperfections", other),
            };
            push(&key, e.to_string());
        }
        if !(self.input.mean_x.is_finite() && self.input.mean_p.is_finite()) {
            push("input", "input mean must be finite".into());
        }
        let s = &self.sampling;
        if s.n_shots == 0 {
            push("sampling.n_shots", "must be at least 1".into());
        }
        if s.n_phases < MIN_SCAN_PHASES {
            push(
                "sampling.n_phases",
                format!("must be at least {MIN_SCAN_PHASES}"),
            );
        }
        if s.samples_per_phase == 0 {
            push("sampling.samples_per_phase", "must be at least 1".into());
        }
        if s.bootstrap_resamples < 2 {
            push("sampling.bootstrap_resamples", "must be at least 2".into());
        }
        if self.reproduce.transmittances.is_empty() {
            push("reproduce.transmittances", "needs at least one value".into());
        }
        for &t in &self.reproduce.transmittances {
            if !(t > 0.0 && t <= 1.0) {
                push("reproduce.transmittances", format!("transmittance {t} outside (0, 1]"));
            }
        }
        for p in &self.reproduce.compare_presets {
            if ImperfectionModel::preset(p).is_none() {
                push("reproduce.compare_presets", format!("unknown preset `{p}`"));
            }
        }
        let sw = &self.sweep;
        match &sw.values {
            Some(v) if v.is_empty() => push("sweep.values", "needs at least one value".into()),
            Some(v) if v.iter().any(|x| !x.is_finite()) => push("sweep.values", "values must be finite".into()),
            Some(_) => {}
            None => {
                if sw.steps == 0 {
                    push("sweep.steps", "must be at least 1".into());
                }
                if !(sw.start.is_finite() && sw.stop.is_finite()) {
                    push("sweep.start", "sweep bounds must be finite".into());
                }
            }
        }
        let t = &self.tomography;
        if !(t.filter_cutoff > 0.0) || !t.filter_cutoff.is_finite() {
            push("tomography.filter_cutoff", "must be positive and finite".into());
        }
        if t.grid_points < 2 {
            push("tomography.grid_points", "must be at least 2".into());
        }
        if !(t.grid_sigmas > 0.0) || !t.grid_sigmas.is_finite() {
            push("tomography.grid_sigmas", "must be positive and finite".into());
        }
        let c = &self.compile;
        if c.matrix.iter().flatten().chain(&c.displacement).any(|v| !v.is_finite()) {
            push("compile.matrix", "matrix and displacement must be finite".into());
        } else {
            let [[a, b], [cc, d]] = c.matrix;
            let m = nalgebra::Matrix2::new(a, b, cc, d);
            if let Err(e) = SymplecticTransform::from_single_mode(m, nalgebra::Vector2::zeros()) {
                push("compile.matrix", format!("{e} (a single-mode symplectic matrix has determinant 1)"));
            }
        }
        if let Some(db) = c.ancilla_db {
            if !(db >= 0.0) {
                push("compile.ancilla_db", "must be non-negative".into());
            }
        }
        issues
    }
}

/// Reads a configuration file, applies `key=value` overrides and a seed
/// override, and validates the result.
pub fn load_config(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<LoadedConfig, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at(&shown, format!("cannot read: {e}")))?;
    parse_config(&text, &shown, overrides, seed)
}

/// [`load_config`] on an in-memory document; `source` names it in errors.
pub fn parse_config(
    text: &str,
    source: &str,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<LoadedConfig, ConfigError> {
    let mut config: ExperimentConfig =
        toml::from_str(text).map_err(|e| toml_error(text, source, &e))?;
    let lines = key_lines(text);

    let mut overridden = Vec::new();
    if !overrides.is_empty() {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, source, &e))?;
        for o in overrides {
            let (key, value) = parse_override(o)?;
            insert_dotted(&mut table, &key, value).map_err(|m| ConfigError::at(format!("--set {key}"), m))?;
            overridden.push(key);
        }
        config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::at("--set", e.message().to_string()))?;
    }
    if let Some(seed) = seed {
        config.sampling.seed = seed;
    }

    if let Some((key, message)) = config.check().into_iter().next() {
        let location = if overridden.iter().any(|k| key == *k || key.starts_with(&format!("{k}."))) {
            format!("--set {key}")
        } else {
            match lookup_line(&lines, &key) {
                Some(line) => format!("{source}:{line}"),
                None => format!("{source} ({key}, default value)"),
            }
        };
        return Err(ConfigError::at(location, format!("`{key}`: {message}")));
    }
    let hash = config.hash();
    Ok(LoadedConfig { config, hash })
}

fn toml_error(text: &str, source: &str, e: &toml::de::Error) -> ConfigError {
    match e.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            ConfigError::at(format!("{source}:{line}:{col}"), e.message().trim().to_string())
        }
        None => ConfigError::at(source, e.message().trim().to_string()),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Line of every dotted key defined in the document.
fn key_lines(text: &str) -> BTreeMap<String, usize> {
    fn walk(text: &str, prefix: &str, table: &toml::de::DeTable<'_>, out: &mut BTreeMap<String, usize>) {
        for (k, v) in table.iter() {
            let key = if prefix.is_empty() {
                k.get_ref().to_string()
            } else {
                format!("{prefix}.{}", k.get_ref())
            };
            out.insert(key.clone(), line_col(text, k.span().start).0);
            if let toml::de::DeValue::Table(t) = v.get_ref() {
                walk(text, &key, t, out);
            }
        }
    }
    let mut out = BTreeMap::new();
    if let Ok(doc) = toml::de::DeTable::parse(text) {
        walk(text, "", doc.get_ref(), &mut out);
    }
    out
}

/// Line of `key`, or of its closest enclosing table.
fn lookup_line(lines: &BTreeMap<String, usize>, key: &str) -> Option<usize> {
    let mut k = key;
    loop {
        if let Some(&l) = lines.get(k) {
            return Some(l);
        }
        k = &k[..k.rfind('.')?];
    }
}

fn parse_override(o: &str) -> Result<(String, toml::Value), ConfigError> {
    let (key, raw) = o
        .split_once('=')
        .ok_or_else(|| ConfigError::at(format!("--set {o}"), "expected key=value"))?;
    let key = key.trim().to_string();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::at(format!("--set {o}"), "empty key"));
    }
    let raw = raw.trim();
    // a bare word that is not valid TOML is taken as a string
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

fn insert_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut t = table;
    for p in parts {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| format!("`{p}` is not a table"))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}
