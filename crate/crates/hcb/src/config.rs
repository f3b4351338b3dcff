//! Versioned TOML experiment configuration. Unknown keys are rejected at
//! every level; omitted blocks take the defaults documented in the README.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hcb_core::lattice::SubsetPolicy;
use hcb_core::planner::{ReadoutParams, ReadoutThresholds};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    SpectrumFigure,
    EigenstateObservables,
    DisorderSweep,
    StatePrep,
    PrepObservables,
    Circuit,
    Planner,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::SpectrumFigure => "spectrum-figure",
            ExperimentKind::EigenstateObservables => "eigenstate-observables",
            ExperimentKind::DisorderSweep => "disorder-sweep",
            ExperimentKind::StatePrep => "state-prep",
            ExperimentKind::PrepObservables => "prep-observables",
            ExperimentKind::Circuit => "circuit",
            ExperimentKind::Planner => "planner",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    /// Overridden by `--out`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub lattice: LatticeConfig,
    /// `J`; energies in every output are divided by it.
    #[serde(default = "one")]
    pub hopping: f64,
    /// `Δω / J`, the RMS of the on-site detunings.
    #[serde(default)]
    pub disorder: f64,
    /// Rescale each draw to the exact RMS.
    #[serde(default)]
    pub exact_rms: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Excitation sectors; all of `0..=N` when omitted.
    #[serde(default)]
    pub sectors: Option<Vec<usize>>,
    #[serde(default)]
    pub subsets: SubsetConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub presentation: Presentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub rows: usize,
    pub cols: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { rows: 4, cols: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetPolicyName {
    Rectangles,
    BlockPowerset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetConfig {
    pub policy: SubsetPolicyName,
    /// Block side and top-left corner for `block-powerset`.
    #[serde(default = "two")]
    pub block: usize,
    #[serde(default)]
    pub row: usize,
    #[serde(default)]
    pub col: usize,
    #[serde(default = "default_max_subset")]
    pub max_sites: usize,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        Self { policy: SubsetPolicyName::Rectangles, block: 2, row: 0, col: 0, max_sites: default_max_subset() }
    }
}

impl SubsetConfig {
    pub fn policy(&self) -> SubsetPolicy {
        match self.policy {
            SubsetPolicyName::Rectangles => SubsetPolicy::Rectangles,
            SubsetPolicyName::BlockPowerset => SubsetPolicy::BlockPowerset { k: self.block, row: self.row, col: self.col },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMode {
    Full,
    Values,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub mode: SpectrumMode,
    /// Window center in units of `J`.
    #[serde(default)]
    pub target: f64,
    #[serde(default = "default_window_count")]
    pub count: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { mode: SpectrumMode::Full, target: 0.0, count: default_window_count() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveSourceName {
    Derived,
    RandomPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    /// `δ / J` scan points.
    #[serde(default = "default_detunings")]
    pub detunings: Vec<f64>,
    /// `g̃ / J` values.
    #[serde(default = "default_strengths")]
    pub strengths: Vec<f64>,
    /// Preparation time in units of `1/J`; `8 J / g̃²` when omitted.
    #[serde(default)]
    pub duration: Option<f64>,
    /// Checkpoints for the time panel of `state-prep`, as fractions of the duration.
    #[serde(default = "default_time_fractions")]
    pub time_fractions: Vec<f64>,
    #[serde(default = "default_sources")]
    pub sources: Vec<DriveSourceName>,
    #[serde(default = "one_u64")]
    pub random_seed: u64,
    #[serde(default)]
    pub resonators: ResonatorLine,
    /// Sector windows span this many standard deviations of `ε - nδ`.
    #[serde(default = "two_f64")]
    pub window_sigmas: f64,
    /// Half-width of the selectivity band in units of `g̃`.
    #[serde(default = "five")]
    pub selectivity_width: f64,
    /// Overlap records below this weight are left out of the tables.
    #[serde(default = "default_weight_floor")]
    pub weight_floor: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            detunings: default_detunings(),
            strengths: default_strengths(),
            duration: None,
            time_fractions: default_time_fractions(),
            sources: default_sources(),
            random_seed: 1,
            resonators: ResonatorLine::default(),
            window_sigmas: 2.0,
            selectivity_width: 5.0,
            weight_floor: default_weight_floor(),
        }
    }
}

/// One resonator per site along a single drive line. Energies in units of
/// `J`; the standing-wave phase at site `i` is `2π f_d (τ_0 + i Δτ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonatorLine {
    pub detuning: f64,
    pub coupling: f64,
    pub linewidth: f64,
    pub drive_frequency_ghz: f64,
    pub first_delay_ns: f64,
    pub delay_spacing_ns: f64,
    /// Per-site overrides.
    #[serde(default)]
    pub sites: Vec<ResonatorOverride>,
}

impl Default for ResonatorLine {
    fn default() -> Self {
        Self {
            detuning: 100.0,
            coupling: 10.0,
            linewidth: 1.0,
            drive_frequency_ghz: 5.0,
            first_delay_ns: 0.0,
            delay_spacing_ns: 0.13,
            sites: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorOverride {
    pub site: usize,
    pub detuning: Option<f64>,
    pub coupling: Option<f64>,
    pub linewidth: Option<f64>,
    pub delay_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `Δω / J` values.
    #[serde(default = "default_sweep_disorders")]
    pub disorders: Vec<f64>,
    #[serde(default = "eight")]
    pub sector: usize,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "ten")]
    pub edge: f64,
    /// Eigenstates averaged around each target; 1 is the nearest-state rule.
    #[serde(default = "one_usize")]
    pub window_count: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { disorders: default_sweep_disorders(), sector: 8, center: 0.0, edge: 10.0, window_count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    pub c_p: f64,
    pub c_p_prime: Vec<f64>,
    pub c_g: Vec<f64>,
    /// Shunt and parasitic-node capacitances for the numeric cross-check.
    pub c_sh: f64,
    pub c_node: f64,
    pub network: NetworkConfig,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            c_p: 10.0,
            c_p_prime: (1..=20).map(|k| 0.5 * k as f64).collect(),
            c_g: vec![5.0, 20.0, 50.0, 200.0],
            c_sh: 50.0,
            c_node: 100.0,
            network: NetworkConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub c1: f64,
    pub c2: f64,
    pub c_sh: f64,
    pub c_r: f64,
    pub c_g1: f64,
    pub c_g2: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { c1: 10.0, c2: 10.0, c_sh: 50.0, c_r: 400.0, c_g1: 5.0, c_g2: 1.0 }
    }
}

/// Readout parameters in MHz (angular factors cancel in every ratio).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub kappa: f64,
    pub chi: f64,
    pub photons: f64,
    pub anharmonicity: f64,
    pub hopping: f64,
    pub hop_distance: f64,
    pub purcell_factor: f64,
    pub photon_budget: f64,
    pub purcell_budget: f64,
    pub decoherence: f64,
    pub spread: f64,
    pub qubit_frequency: f64,
    pub fast_constant: f64,
    pub weak_factor: f64,
    pub scale_separation: f64,
    /// `J / |A|` values of the regime sweep table.
    pub sweep_j_over_a: Vec<f64>,
    /// Hop distances of the regime sweep table.
    pub sweep_hop_distance: Vec<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            chi: 5.0,
            photons: 5.0,
            anharmonicity: -250.0,
            hopping: 3.0,
            hop_distance: 20.0,
            purcell_factor: 0.01,
            photon_budget: 0.2,
            purcell_budget: 0.2,
            decoherence: 0.01,
            spread: 0.6,
            qubit_frequency: 5000.0,
            fast_constant: 0.03,
            weak_factor: 1.0,
            scale_separation: hcb_core::planner::DEFAULT_SCALE_SEPARATION,
            sweep_j_over_a: vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.2, 0.3],
            sweep_hop_distance: vec![4.0, 10.0, 20.0, 40.0],
        }
    }
}

impl PlannerConfig {
    pub fn params(&self) -> ReadoutParams {
        ReadoutParams {
            kappa: self.kappa,
            chi: self.chi,
            photons: self.photons,
            anharmonicity: self.anharmonicity,
            hopping: self.hopping,
            hop_distance: self.hop_distance,
            purcell_factor: self.purcell_factor,
            photon_budget: self.photon_budget,
            purcell_budget: self.purcell_budget,
            decoherence: self.decoherence,
            spread: self.spread,
            qubit_frequency: self.qubit_frequency,
        }
    }

    pub fn thresholds(&self) -> ReadoutThresholds {
        ReadoutThresholds { fast_constant: self.fast_constant, weak_factor: self.weak_factor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub residual: f64,
    pub dense_limit: usize,
    pub krylov: f64,
    pub correlation_floor: f64,
    pub xi_cap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: hcb_core::spectra::RESIDUAL_TOLERANCE,
            dense_limit: hcb_core::spectra::DENSE_LIMIT,
            krylov: 1e-10,
            correlation_floor: hcb_core::observables::CORRELATION_FLOOR,
            xi_cap: hcb_core::observables::DEFAULT_XI_CAP,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Presentation {
    /// `J / 2π` in MHz; adds `*_mhz` energy columns when set.
    pub hopping_mhz: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn two_f64() -> f64 {
    2.0
}
fn five() -> f64 {
    5.0
}
fn eight() -> usize {
    8
}
fn ten() -> f64 {
    10.0
}
fn one_u64() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_max_subset() -> usize {
    hcb_core::observables::DEFAULT_MAX_SUBSET_SITES
}
fn default_window_count() -> usize {
    20
}
fn default_detunings() -> Vec<f64> {
    vec![-1.0]
}
fn default_strengths() -> Vec<f64> {
    vec![0.5]
}
fn default_time_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}
fn default_sources() -> Vec<DriveSourceName> {
    vec![DriveSourceName::Derived]
}
fn default_weight_floor() -> f64 {
    1e-8
}
fn default_sweep_disorders() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Minimal config of the given kind with every block at its default.
    pub fn template(kind: ExperimentKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            output_dir: None,
            lattice: LatticeConfig::default(),
            hopping: 1.0,
            disorder: 0.0,
            exact_rms: false,
            seeds: default_seeds(),
            sectors: None,
            subsets: SubsetConfig::default(),
            spectrum: SpectrumConfig::default(),
            drive: DriveConfig::default(),
            sweep: SweepConfig::default(),
            circuit: CircuitConfig::default(),
            planner: PlannerConfig::default(),
            tolerances: Tolerances::default(),
            presentation: Presentation::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.rows * self.lattice.cols
    }

    pub fn sector_list(&self) -> Vec<usize> {
        match &self.sectors {
            Some(s) => s.clone(),
            None => (0..=self.num_sites()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version);
        }
        if self.lattice.rows == 0 || self.lattice.cols == 0 {
            bail!("lattice dimensions must be positive");
        }
        if !(self.hopping > 0.0 && self.hopping.is_finite()) {
            bail!("hopping must be positive");
        }
        if !(self.disorder >= 0.0 && self.disorder.is_finite()) {
            bail!("disorder must be finite and nonnegative");
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if let Some(s) = &self.sectors {
            if let Some(n) = s.iter().find(|&&n| n > self.num_sites()) {
                bail!("sector {n} exceeds the {} lattice sites", self.num_sites());
            }
        }
        if self.drive.strengths.iter().any(|g| !(*g >= 0.0)) {
            bail!("drive strengths must be nonnegative");
        }
        if self.drive.time_fractions.iter().any(|t| !(*t >= 0.0)) {
            bail!("time fractions must be nonnegative");
        }
        if self.spectrum.mode == SpectrumMode::Window && self.spectrum.count == 0 {
            bail!("window count must be positive");
        }
        if self.sweep.window_count == 0 {
            bail!("sweep window_count must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("schema_version = 1\nkind = \"spectrum\"\n[lattice]\nrows = 1\ncols = 2\n").unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Spectrum);
        assert_eq!(cfg.sector_list(), vec![0, 1, 2]);
        assert_eq!(cfg.hopping, 1.0);
        assert_eq!(cfg.drive.detunings, vec![-1.0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("schema_version = 1\nkind = \"spectrum\"\nbogus = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 1\nkind = \"spectrum\"\n[drive]\nstrength = 3\n").is_err());
    }

    #[test]
    fn schema_version_checked() {
        let err = ExperimentConfig::from_toml("schema_version = 2\nkind = \"planner\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("schema_version"));
    }

    #[test]
    fn template_round_trips() {
        for kind in [ExperimentKind::DisorderSweep, ExperimentKind::Circuit, ExperimentKind::PrepObservables] {
            let cfg = ExperimentConfig::template(kind);
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn sector_range_checked() {
        let text = "schema_version = 1\nkind = \"spectrum\"\nsectors = [3]\n[lattice]\nrows = 1\ncols = 2\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
    }
}
