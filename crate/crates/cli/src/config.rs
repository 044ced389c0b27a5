//! TOML run configuration. Sections `grid`, `coefficients`, `boundary`,
//! `noise`, `output`, plus one optional section per subcommand. Every field
//! outside `grid` has a default; see `configs/default.toml` for the full schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stefan_spde::lob::InputFormat;
use stefan_spde::spde::SpdeConfig;
use stefan_spde::{BoundaryFunctional, Domain, GridSpec, ModelCoefficients};

use crate::CliError;

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

const REQUIRED: &[(&str, &str)] = &[("grid", "nx"), ("grid", "nt"), ("grid", "horizon")];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Compact,
    HalfLine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "compact")]
    pub domain: DomainKind,
    pub nx: usize,
    pub nt: usize,
    pub horizon: f64,
    /// Truncation length `L` (half-line only).
    #[serde(default = "one")]
    pub length: f64,
    /// Exponential weight `r` of the half-line norm.
    #[serde(default)]
    pub weight: f64,
}

impl GridSection {
    pub fn spec(&self) -> stefan_spde::Result<GridSpec> {
        let domain = match self.domain {
            DomainKind::Compact => Domain::CompactUnit,
            DomainKind::HalfLine => Domain::HalfLine { length: self.length, weight: self.weight },
        };
        GridSpec::new(domain, self.nx, self.horizon, self.nt)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Keep every `record_stride`-th step in the trajectory CSV.
    #[serde(default = "one_usize")]
    pub record_stride: usize,
    /// Also dump `profiles.csv` every `profile_stride` steps.
    #[serde(default)]
    pub profile_stride: Option<usize>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out(), record_stride: 1, profile_stride: None }
    }
}

/// Truncation and diffusion settings shared by the time-stepping commands.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default = "default_m_max")]
    pub m_max: f64,
    #[serde(default = "one")]
    pub lap_scale: f64,
    /// Initial boundary position.
    #[serde(default)]
    pub p0: f64,
    /// Initial profiles `a sin(pi x / L)` on both sides.
    #[serde(default)]
    pub initial_amplitude: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { m: default_m(), m_max: default_m_max(), lap_scale: 1.0, p0: 0.0, initial_amplitude: 0.0 }
    }
}

impl RunSection {
    pub fn spde(&self) -> SpdeConfig {
        SpdeConfig { m: self.m, m_max: self.m_max, lap_scale: self.lap_scale }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleShape {
    Sine,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleMethod {
    Projected,
    Penalized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    #[serde(default = "sine")]
    pub shape: ObstacleShape,
    #[serde(default = "projected")]
    pub method: ObstacleMethod,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub lap_scale: f64,
}

impl Default for ObstacleSection {
    fn default() -> Self {
        Self { shape: ObstacleShape::Sine, method: ObstacleMethod::Projected, epsilon: default_eps(), lap_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default = "default_iters")]
    pub n_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_picard_m")]
    pub m: f64,
    #[serde(default = "one")]
    pub lap_scale: f64,
    #[serde(default = "yes")]
    pub compare_direct: bool,
}

impl Default for PicardSection {
    fn default() -> Self {
        Self { n_iters: default_iters(), tol: default_tol(), m: default_picard_m(), lap_scale: 1.0, compare_direct: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSection {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "two")]
    pub q: f64,
    /// Inclusive dyadic lag ranges, in steps / nodes.
    #[serde(default = "time_lags")]
    pub time_lags: [usize; 2],
    #[serde(default = "space_lags")]
    pub space_lags: [usize; 2],
    #[serde(default)]
    pub boundary_lags: Option<[usize; 2]>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub run: RunSection,
}

impl Default for HolderSection {
    fn default() -> Self {
        Self {
            n_paths: default_paths(),
            q: 2.0,
            time_lags: time_lags(),
            space_lags: space_lags(),
            boundary_lags: None,
            margin: default_margin(),
            run: RunSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_n_t")]
    pub n_t: usize,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_n_x")]
    pub n_x: usize,
    #[serde(default = "one")]
    pub r: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            t_min: default_t_min(),
            t_max: default_t_max(),
            n_t: default_n_t(),
            x_max: default_x_max(),
            n_x: default_n_x(),
            r: 1.0,
        }
    }
}

/// Poisson stream used by `fit-lob` when no input file is given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    /// `(f, sigma)` per price bin.
    pub bins: Vec<(f64, f64)>,
    pub horizon: f64,
    #[serde(default = "one")]
    pub size: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitLobSection {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "normalized")]
    pub format: InputFormat,
    /// Touch-price CSV, required for LOBSTER message files.
    #[serde(default)]
    pub touch: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    #[serde(default = "yes")]
    pub pool_sides: bool,
    #[serde(default = "one")]
    pub interval: f64,
    #[serde(default = "default_min_events")]
    pub min_events: usize,
    #[serde(default = "default_max_malformed")]
    pub max_malformed: usize,
    #[serde(default)]
    pub horizon: Option<(f64, f64)>,
}

impl Default for FitLobSection {
    fn default() -> Self {
        Self {
            input: None,
            format: InputFormat::Normalized,
            touch: None,
            synthetic: None,
            n_bins: default_bins(),
            pool_sides: true,
            interval: 1.0,
            min_events: default_min_events(),
            max_malformed: default_max_malformed(),
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatePriceSection {
    /// Fitted table; defaults to `fit_lob.csv` in the output directory.
    #[serde(default)]
    pub fit: Option<PathBuf>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    #[serde(default)]
    pub coefficients: ModelCoefficients,
    #[serde(default = "BoundaryFunctional::zero")]
    pub boundary: BoundaryFunctional,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub simulate: RunSection,
    #[serde(default)]
    pub obstacle: ObstacleSection,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub holder: HolderSection,
    #[serde(default)]
    pub kernel_check: KernelSection,
    #[serde(default)]
    pub fit_lob: FitLobSection,
    #[serde(default)]
    pub simulate_price: SimulatePriceSection,
}

/// Command-line overrides, applied on top of the file before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// `section.key=value` pairs; values are TOML literals, bare words are strings.
    pub set: Vec<String>,
}

impl Config {
    /// Parses `text`, applies `overrides` and resolves relative paths against `base`.
    pub fn load(text: &str, base: &Path, overrides: &Overrides) -> Result<Config, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Validation(e.to_string()))?;
        let edited = !overrides.set.is_empty() || overrides.seed.is_some();
        for item in &overrides.set {
            apply_set(&mut table, item)?;
        }
        if let Some(seed) = overrides.seed {
            let seed = i64::try_from(seed).map_err(|_| CliError::Validation(format!("seed {seed} out of range")))?;
            section(&mut table, "noise")?.insert("seed".into(), toml::Value::Integer(seed));
        }
        for (sec, key) in REQUIRED {
            let present = table.get(*sec).and_then(|s| s.as_table()).is_some_and(|s| s.contains_key(*key));
            if !present {
                return Err(CliError::Validation(format!("missing required field `{sec}.{key}`")));
            }
        }
        // parse the original text when possible so diagnostics point at the user's lines
        let parsed = if edited {
            toml::Value::Table(table).try_into::<Config>()
        } else {
            toml::from_str::<Config>(text)
        };
        let mut cfg = parsed.map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.output.dir = match &overrides.out_dir {
            Some(d) => d.clone(),
            None => base.join(&cfg.output.dir),
        };
        for p in [&mut cfg.fit_lob.input, &mut cfg.fit_lob.touch, &mut cfg.simulate_price.fit].into_iter().flatten() {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    /// SHA-256 of the resolved configuration. The output directory is left
    /// out so identical runs written to different places carry the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        self.noise.seed
    }
}

fn section<'a>(table: &'a mut toml::Table, name: &str) -> Result<&'a mut toml::Table, CliError> {
    table
        .entry(name.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| CliError::Validation(format!("`{name}` must be a table")))
}

fn apply_set(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{item}` is not KEY=VALUE")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("just inserted"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut keys: Vec<&str> = path.trim().split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::Validation(format!("empty key in `{item}`")))?;
    let mut cur = table;
    for k in keys {
        cur = section(cur, k)?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn compact() -> DomainKind {
    DomainKind::Compact
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_m() -> f64 {
    1e3
}
fn default_m_max() -> f64 {
    1e6
}
fn sine() -> ObstacleShape {
    ObstacleShape::Sine
}
fn projected() -> ObstacleMethod {
    ObstacleMethod::Projected
}
fn default_eps() -> f64 {
    1e-6
}
fn default_iters() -> usize {
    12
}
fn default_tol() -> f64 {
    1e-4
}
fn default_picard_m() -> f64 {
    5.0
}
fn default_paths() -> usize {
    8
}
fn time_lags() -> [usize; 2] {
    [16, 512]
}
fn space_lags() -> [usize; 2] {
    [1, 8]
}
fn default_margin() -> f64 {
    0.1
}
fn default_t_min() -> f64 {
    1e-4
}
fn default_t_max() -> f64 {
    0.1
}
fn default_n_t() -> usize {
    7
}
fn default_x_max() -> f64 {
    3.0
}
fn default_n_x() -> usize {
    11
}
fn normalized() -> InputFormat {
    InputFormat::Normalized
}
fn default_bins() -> usize {
    10
}
fn default_min_events() -> usize {
    10
}
fn default_max_malformed() -> usize {
    10
}
