//! Run configuration: a TOML file with unknown keys rejected and complex
//! numbers written as `[re, im]`.

use std::path::{Path, PathBuf};

use qmelab_core::bath::{BathSpec, SpectralDensity};
use qmelab_core::consistency::{linspace, Tolerances};
use qmelab_core::generators::{Generators, Scheme};
use qmelab_core::models::{random_matrix_density, ThreeLevelModel};
use qmelab_core::operator::{matrix_from_pairs, Operator, C64};
use qmelab_core::system::{gibbs_state, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baths: Option<Vec<BathConfig>>,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub counting: CountingConfig,
    #[serde(default)]
    pub times: TimeGrid,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Ground state plus a near-degenerate excited doublet.
    ThreeLevelDoublet,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub energies: Vec<f64>,
    /// `couplings[m][n]` is the amplitude of `|E_n><E_m|`.
    pub couplings: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub allow_diagonal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub beta: f64,
    pub gamma: f64,
    pub spectral_density: DensityConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    OhmicExpCutoff {
        eta: f64,
        omega_c: f64,
        cutoff: f64,
    },
    FlatSmoothCutoff {
        eta: f64,
        width: f64,
        cutoff: f64,
    },
    LorentzianPeak {
        eta: f64,
        center: f64,
        width: f64,
        cutoff: f64,
    },
    Tabulated {
        omegas: Vec<f64>,
        values: Vec<f64>,
    },
    /// Two-column CSV `omega, J`, relative to the config file.
    TabulatedCsv {
        path: PathBuf,
    },
    /// Mean density of the random-matrix bath at the bath temperature.
    RandomMatrixMean {
        cutoff: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Redfield,
    Secular,
    Symmetrized,
    CoarseGrained,
}

impl SchemeName {
    pub const ALL: [SchemeName; 4] = [Self::Redfield, Self::Secular, Self::Symmetrized, Self::CoarseGrained];
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub name: SchemeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default = "yes")]
    pub lamb_shift: bool,
}

fn yes() -> bool {
    true
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self { name: SchemeName::Symmetrized, epsilon: None, delta0: None, lamb_shift: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `(|1> + √3|2>)(<1| + √3<2|)/4`.
    #[default]
    DoubletSuperposition,
    Gibbs {
        beta: f64,
    },
    MaximallyMixed,
    Pure {
        amplitudes: Vec<[f64; 2]>,
    },
    Density {
        matrix: Vec<Vec<[f64; 2]>>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CountingConfig {
    /// System field for the MGF scan; a single zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_s: Option<Range>,
    /// One range per bath for the MGF scan; `[−β, 0]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_b: Option<Vec<Range>>,
    /// Inverse temperature of the Gibbs start in fluctuation-theorem runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_s: Option<f64>,
    /// Points per axis of the detailed-balance and strict-balance grids.
    #[serde(default = "eleven")]
    pub grid_points: usize,
    /// Points of the fluctuation-theorem scan over `[−β, 0]`.
    #[serde(default = "eleven")]
    pub ft_points: usize,
    /// Time of the fluctuation-theorem scan; the last grid time when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ft_time: Option<f64>,
    #[serde(default = "ten")]
    pub first_law_samples: usize,
    #[serde(default = "one")]
    pub sample_seed: u64,
}

fn eleven() -> usize {
    11
}
fn ten() -> usize {
    10
}
fn one() -> u64 {
    1
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self {
            lambda_s: None,
            lambda_b: None,
            beta_s: None,
            grid_points: 11,
            ft_points: 11,
            ft_time: None,
            first_law_samples: 10,
            sample_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { start: 0.0, stop: 60.0, points: 31 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Bath level count.
    #[serde(default = "default_levels")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Consecutive seeds starting at `seed`.
    #[serde(default = "one_usize")]
    pub seeds: usize,
    /// Gaussian kernel width of the calibrated spectral density.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default = "default_table_points")]
    pub table_points: usize,
    /// Largest composite dimension `d·N`.
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_levels() -> usize {
    300
}
fn one_usize() -> usize {
    1
}
fn default_bandwidth() -> f64 {
    0.02
}
fn default_table_points() -> usize {
    201
}
fn default_cap() -> usize {
    qmelab_core::exact::DEFAULT_DIMENSION_CAP
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            n: default_levels(),
            seed: 0,
            seeds: 1,
            bandwidth: default_bandwidth(),
            table_points: default_table_points(),
            cap: default_cap(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, formats: default_formats() }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    /// Three-level doublet preset with default settings.
    pub fn doublet() -> Self {
        Self {
            preset: Some(Preset::ThreeLevelDoublet),
            system: None,
            baths: None,
            scheme: SchemeConfig::default(),
            initial_state: InitialState::default(),
            counting: CountingConfig::default(),
            times: TimeGrid::default(),
            oracle: OracleConfig::default(),
            output: OutputConfig::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Reads a two-column `omega, J` table; a non-numeric first row is a header.
pub fn load_density_csv(path: &Path) -> Result<SpectralDensity, AppError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    let (mut omegas, mut values) = (Vec::new(), Vec::new());
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        if row.len() != 2 {
            return Err(AppError::Config(format!("{}: row {} needs 2 columns", path.display(), i + 1)));
        }
        match (row[0].parse::<f64>(), row[1].parse::<f64>()) {
            (Ok(w), Ok(j)) => {
                omegas.push(w);
                values.push(j);
            }
            _ if i == 0 => continue,
            _ => return Err(AppError::Config(format!("{}: row {} is not numeric", path.display(), i + 1))),
        }
    }
    let density = SpectralDensity::Tabulated { omegas, values };
    density.validate().map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    Ok(density)
}

/// Validated, numeric form of a configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub system: SystemSpec,
    pub baths: Vec<BathSpec>,
    /// Coarse-graining time of the preset model.
    pub delta0: Option<f64>,
    pub rho0: Operator,
    pub times: Vec<f64>,
}

fn config_err(e: qmelab_core::Error) -> AppError {
    AppError::Config(e.to_string())
}

fn square(rows: &[Vec<[f64; 2]>], what: &str) -> Result<(usize, Vec<[f64; 2]>), AppError> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(AppError::Config(format!("{what} must be square")));
    }
    Ok((d, rows.iter().flatten().copied().collect()))
}

impl Resolved {
    pub fn new(config: RunConfig, base: &Path) -> Result<Self, AppError> {
        let (system, baths, delta0) = match (&config.preset, &config.system, &config.baths) {
            (Some(Preset::ThreeLevelDoublet), None, None) => {
                let m = ThreeLevelModel::doublet().map_err(config_err)?;
                (m.system, vec![m.bath], Some(m.delta0))
            }
            (Some(_), _, _) => return Err(AppError::Config("a preset excludes [system] and [[baths]]".into())),
            (None, Some(s), Some(b)) => {
                let (d, pairs) = square(&s.couplings, "system.couplings")?;
                if d != s.energies.len() {
                    return Err(AppError::Config("system.couplings must be d×d with d energies".into()));
                }
                let g = matrix_from_pairs(d, &pairs).map_err(config_err)?;
                let system = if s.allow_diagonal {
                    SystemSpec::with_diagonal_couplings(s.energies.clone(), g)
                } else {
                    SystemSpec::new(s.energies.clone(), g)
                }
                .map_err(config_err)?;
                let baths = b.iter().map(|b| resolve_bath(b, base)).collect::<Result<Vec<_>, _>>()?;
                if baths.is_empty() {
                    return Err(AppError::Config("at least one bath is required".into()));
                }
                (system, baths, None)
            }
            (None, None, _) => return Err(AppError::Config("missing [system] (or set preset)".into())),
            (None, _, None) => return Err(AppError::Config("missing [[baths]] (or set preset)".into())),
        };
        let d = system.dim();
        let rho0 = match &config.initial_state {
            InitialState::DoubletSuperposition if d == 3 => ThreeLevelModel::initial_state(),
            InitialState::DoubletSuperposition => {
                return Err(AppError::Config("doublet_superposition needs a three-level system".into()))
            }
            InitialState::Gibbs { beta } => gibbs_state(&system, *beta).map_err(config_err)?,
            InitialState::MaximallyMixed => Operator::identity(d).scale(C64::new(1.0 / d as f64, 0.0)),
            InitialState::Pure { amplitudes } => {
                let psi: Vec<C64> = amplitudes.iter().map(|p| C64::new(p[0], p[1])).collect();
                if psi.len() != d {
                    return Err(AppError::Config(format!("initial_state.amplitudes needs {d} entries")));
                }
                Operator::pure_state(&psi).map_err(config_err)?
            }
            InitialState::Density { matrix } => {
                let (n, pairs) = square(matrix, "initial_state.matrix")?;
                if n != d {
                    return Err(AppError::Config(format!("initial_state.matrix must be {d}×{d}")));
                }
                let rho =
                    Operator::from_matrix(matrix_from_pairs(n, &pairs).map_err(config_err)?).map_err(config_err)?;
                if !rho.is_hermitian(1e-12) || (rho.trace().re - 1.0).abs() > 1e-10 || !rho.is_positive(1e-12) {
                    return Err(AppError::Config("initial_state.matrix is not a density matrix".into()));
                }
                rho
            }
        };
        let t = config.times;
        if !(t.start.is_finite() && t.stop.is_finite()) || t.stop < t.start {
            return Err(AppError::Config("times needs finite start <= stop".into()));
        }
        if let Some(lb) = &config.counting.lambda_b {
            if lb.len() != baths.len() {
                return Err(AppError::Config(format!("counting.lambda_b needs {} ranges", baths.len())));
            }
        }
        let tol = &config.tolerances;
        let all = [
            tol.gqdb,
            tol.strict_energy,
            tol.first_law,
            tol.gibbs,
            tol.steady_state,
            tol.heat,
            tol.ft,
            tol.entropy_ft,
            tol.sinc,
        ];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(AppError::Config("tolerances must be positive".into()));
        }
        if config.counting.grid_points < 1 || config.counting.ft_points < 1 {
            return Err(AppError::Config("grid sizes must be at least 1".into()));
        }
        let times = linspace(t.start, t.stop, t.points);
        Ok(Self { config, system, baths, delta0, rho0, times })
    }

    pub fn generators(&self) -> Result<Generators, AppError> {
        Generators::new(self.system.clone(), self.baths.clone()).map_err(config_err)
    }

    pub fn betas(&self) -> Vec<f64> {
        self.baths.iter().map(|b| b.beta).collect()
    }

    pub fn beta_s(&self) -> f64 {
        self.config.counting.beta_s.unwrap_or(self.baths[0].beta)
    }

    pub fn ft_time(&self) -> f64 {
        self.config.counting.ft_time.unwrap_or(self.config.times.stop)
    }

    /// The configured scheme.
    pub fn scheme(&self, gens: &Generators) -> Result<Scheme, AppError> {
        self.scheme_named(self.config.scheme.name, gens)
    }

    /// Scheme `name` with parameters from the config, the preset, or defaults.
    pub fn scheme_named(&self, name: SchemeName, gens: &Generators) -> Result<Scheme, AppError> {
        let c = &self.config.scheme;
        let scheme = match name {
            SchemeName::Redfield => Scheme::redfield(),
            SchemeName::Secular => Scheme::secular(),
            SchemeName::Symmetrized => {
                let eps = match (c.epsilon, self.delta0) {
                    (Some(e), _) => e,
                    (None, Some(d0)) => 2.0 / d0,
                    (None, None) => gens.default_epsilon(c.lamb_shift).map_err(config_err)?,
                };
                Scheme::symmetrized(eps)
            }
            SchemeName::CoarseGrained => match (c.delta0, self.delta0) {
                (Some(d), _) => Scheme::coarse_grained(d),
                (None, Some(d0)) => Scheme::coarse_grained(d0 / 2.0),
                (None, None) => return Err(AppError::Config("scheme.delta0 is required for coarse_grained".into())),
            },
        }
        .with_lamb_shift(c.lamb_shift);
        scheme.validate().map_err(config_err)?;
        Ok(scheme)
    }
}

fn resolve_bath(b: &BathConfig, base: &Path) -> Result<BathSpec, AppError> {
    let density = match &b.spectral_density {
        DensityConfig::OhmicExpCutoff { eta, omega_c, cutoff } => {
            SpectralDensity::OhmicExpCutoff { eta: *eta, omega_c: *omega_c, cutoff: *cutoff }
        }
        DensityConfig::FlatSmoothCutoff { eta, width, cutoff } => {
            SpectralDensity::FlatSmoothCutoff { eta: *eta, width: *width, cutoff: *cutoff }
        }
        DensityConfig::LorentzianPeak { eta, center, width, cutoff } => {
            SpectralDensity::LorentzianPeak { eta: *eta, center: *center, width: *width, cutoff: *cutoff }
        }
        DensityConfig::Tabulated { omegas, values } => {
            SpectralDensity::Tabulated { omegas: omegas.clone(), values: values.clone() }
        }
        DensityConfig::TabulatedCsv { path } => load_density_csv(&base.join(path))?,
        DensityConfig::RandomMatrixMean { cutoff } => random_matrix_density(b.beta, *cutoff),
    };
    BathSpec::new(b.beta, density, b.gamma).map_err(config_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doublet_preset_resolves() {
        let r = Resolved::new(RunConfig::doublet(), Path::new(".")).unwrap();
        assert_eq!(r.system.dim(), 3);
        assert_eq!(r.times.len(), 31);
        let g = r.generators().unwrap();
        let s = r.scheme(&g).unwrap();
        assert_eq!(s.name(), "symmetrized");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::parse("preset = \"three_level_doublet\"\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, AppError::Config(_)));
        let e = RunConfig::parse("[scheme]\nname = \"secular\"\nfoo = 2\n").unwrap_err();
        assert!(e.to_string().contains("foo"));
    }

    #[test]
    fn missing_beta_is_a_schema_error() {
        let text = r#"
[system]
energies = [0.0, 1.0]
couplings = [[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]
[[baths]]
gamma = 0.1
spectral_density = { kind = "ohmic_exp_cutoff", eta = 1.0, omega_c = 1.0, cutoff = 10.0 }
"#;
        let e = RunConfig::parse(text).unwrap_err();
        assert!(e.to_string().contains("beta"), "{e}");
    }

    #[test]
    fn explicit_system_round_trips() {
        let text = r#"
[system]
energies = [0.0, 1.0]
couplings = [[[0.0, 0.0], [0.0, 0.0]], [[0.5, 0.25], [0.0, 0.0]]]
[[baths]]
beta = 2.0
gamma = 0.1
spectral_density = { kind = "ohmic_exp_cutoff", eta = 1.0, omega_c = 1.0, cutoff = 10.0 }
[scheme]
name = "coarse_grained"
delta0 = 3.0
[initial_state]
kind = "gibbs"
beta = 2.0
"#;
        let cfg = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
        let r = Resolved::new(cfg, Path::new(".")).unwrap();
        assert_eq!(r.system.couplings()[(1, 0)], C64::new(0.5, 0.25));
        let g = r.generators().unwrap();
        assert_eq!(r.scheme(&g).unwrap().name(), "coarse_grained");
    }

    #[test]
    fn coarse_grained_needs_delta0_without_preset() {
        let text = r#"
[system]
energies = [0.0, 1.0]
couplings = [[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]
[[baths]]
beta = 2.0
gamma = 0.1
spectral_density = { kind = "ohmic_exp_cutoff", eta = 1.0, omega_c = 1.0, cutoff = 10.0 }
[scheme]
name = "coarse_grained"
[initial_state]
kind = "maximally_mixed"
"#;
        let r = Resolved::new(RunConfig::parse(text).unwrap(), Path::new(".")).unwrap();
        let g = r.generators().unwrap();
        assert!(matches!(r.scheme(&g), Err(AppError::Config(_))));
    }

    #[test]
    fn tabulated_csv_loader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.csv");
        std::fs::write(&p, "omega,J\n0,0\n0.5,0.1\n1.0,0.05\n").unwrap();
        let d = load_density_csv(&p).unwrap();
        assert_eq!(d.eval(0.25), 0.05);
        std::fs::write(&p, "0,0\n0.5\n").unwrap();
        assert!(load_density_csv(&p).is_err());
        std::fs::write(&p, "0,0\n0.5,x\n").unwrap();
        assert!(load_density_csv(&p).is_err());
    }

    #[test]
    fn preset_conflicts_with_system() {
        let text = r#"
preset = "three_level_doublet"
[system]
energies = [0.0, 1.0]
couplings = [[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert!(Resolved::new(cfg, Path::new(".")).is_err());
    }
}
