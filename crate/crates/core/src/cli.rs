//! Run configuration and the command implementations behind the binary.
//!
//! A run is described by one JSON file. Lengths carry their unit in the key
//! name (`_nm`, `_um`, `_mm`) and are converted to meters on load; powers
//! are given in milliwatts. Relative paths are resolved against the
//! directory containing the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{propagate_to_focal, OpticalSystem};
use crate::io;
use crate::loading::{load_sim, LoadingModel, OccupancyStats};
use crate::physics::{evaluate, TrapReport};
use crate::slm::{
    add_lens_phase, apply_device, export_hologram, import_hologram, BeamProfile, DeviceModel, DeviceRecord,
    DriveSettings,
};
use crate::solver::{solve, PhaseMask, SolverConfig};
use crate::target::TrapSpec;

pub const HOLOGRAM_FILE: &str = "hologram.pgm";
pub const INTENSITY_PGM_FILE: &str = "intensity.pgm";
pub const INTENSITY_CSV_FILE: &str = "intensity.csv";
pub const CONVERGENCE_JSON_FILE: &str = "convergence.json";
pub const CONVERGENCE_CSV_FILE: &str = "convergence.csv";
pub const REPORT_FILE: &str = "report.json";
pub const OCCUPANCY_FILE: &str = "occupancy.json";
pub const DEVICE_FILE: &str = "device.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsRecord {
    pub wavelength_nm: f64,
    pub focal_length_mm: f64,
    pub pupil_diameter_mm: f64,
    pub numerical_aperture: f64,
    pub beam_waist_at_slm_mm: f64,
    pub grid_size: usize,
    pub slm_pitch_um: f64,
}

impl Default for OpticsRecord {
    fn default() -> Self {
        Self::from(&OpticalSystem::<f64>::reference_setup())
    }
}

impl From<&OpticalSystem<f64>> for OpticsRecord {
    fn from(s: &OpticalSystem<f64>) -> Self {
        Self {
            wavelength_nm: s.wavelength * 1e9,
            focal_length_mm: s.focal_length * 1e3,
            pupil_diameter_mm: s.pupil_diameter * 1e3,
            numerical_aperture: s.numerical_aperture,
            beam_waist_at_slm_mm: s.beam_waist_at_slm * 1e3,
            grid_size: s.grid_size,
            slm_pitch_um: s.slm_pitch * 1e6,
        }
    }
}

impl OpticsRecord {
    pub fn to_system(&self) -> OpticalSystem<f64> {
        OpticalSystem {
            wavelength: self.wavelength_nm * 1e-9,
            focal_length: self.focal_length_mm * 1e-3,
            pupil_diameter: self.pupil_diameter_mm * 1e-3,
            numerical_aperture: self.numerical_aperture,
            beam_waist_at_slm: self.beam_waist_at_slm_mm * 1e-3,
            grid_size: self.grid_size,
            slm_pitch: self.slm_pitch_um * 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamRecord {
    /// Read-out power on the SLM; checked against the damage limit.
    pub power_mw: f64,
    pub polarization_ok: bool,
}

impl Default for BeamRecord {
    fn default() -> Self {
        Self {
            power_mw: 10.0,
            polarization_ok: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveRecord {
    pub gain: f64,
    pub modulated_diameter_mm: Option<f64>,
}

impl Default for DriveRecord {
    fn default() -> Self {
        Self {
            gain: 1.0,
            modulated_diameter_mm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingRecord {
    pub p_single: f64,
    pub per_trap_p: Option<Vec<f64>>,
    pub threshold_power_per_trap_mw: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for LoadingRecord {
    fn default() -> Self {
        let m = LoadingModel::default();
        Self {
            p_single: m.p_single,
            per_trap_p: m.per_trap_p,
            threshold_power_per_trap_mw: m.threshold_power_per_trap_w * 1e3,
            trials: m.trials,
            seed: m.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationRecord {
    /// Trapping-laser power delivered to the focal plane.
    pub total_power_mw: f64,
}

impl Default for EvaluationRecord {
    fn default() -> Self {
        Self { total_power_mw: 40.0 }
    }
}

/// The JSON run configuration as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub optics: OpticsRecord,
    #[serde(default)]
    pub device: DeviceRecord,
    #[serde(default)]
    pub beam: BeamRecord,
    #[serde(default)]
    pub drive: DriveRecord,
    #[serde(default)]
    pub solver: SolverConfig,
    pub traps_path: PathBuf,
    #[serde(default)]
    pub loading: LoadingRecord,
    #[serde(default)]
    pub evaluation: EvaluationRecord,
    #[serde(default)]
    pub lens_focal_length_mm: Option<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A loaded and validated run configuration in SI units.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: OpticalSystem<f64>,
    pub device: DeviceModel<f64>,
    pub beam: BeamProfile<f64>,
    pub drive: DriveSettings<f64>,
    pub solver: SolverConfig,
    pub traps_path: PathBuf,
    pub spec: TrapSpec<f64>,
    pub loading: LoadingModel,
    pub total_power: f64,
    pub lens_focal_length: Option<f64>,
    pub output_dir: PathBuf,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>, overrides: &Overrides) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: RunConfigFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::from_file(file, base, overrides)
    }

    /// Builds a config from its on-disk form, resolving relative paths
    /// against `base`.
    pub fn from_file(file: RunConfigFile, base: &Path, overrides: &Overrides) -> Result<Self> {
        let system = file.optics.to_system();
        system.validate()?;
        let device = DeviceModel::from(file.device);
        device.validate()?;
        let beam = BeamProfile {
            waist_at_slm: system.beam_waist_at_slm,
            power: file.beam.power_mw * 1e-3,
            polarization_ok: file.beam.polarization_ok,
        };
        beam.validate()?;
        let drive = DriveSettings {
            gain: file.drive.gain,
            modulated_diameter: file.drive.modulated_diameter_mm.map(|d| d * 1e-3),
        };
        if !(drive.gain > 0.0) || matches!(drive.modulated_diameter, Some(d) if !(d > 0.0)) {
            return Err(Error::Config("drive gain and modulated diameter must be positive".into()));
        }

        let mut solver = file.solver;
        let mut loading = LoadingModel {
            p_single: file.loading.p_single,
            per_trap_p: file.loading.per_trap_p,
            threshold_power_per_trap_w: file.loading.threshold_power_per_trap_mw * 1e-3,
            trials: file.loading.trials,
            seed: file.loading.seed,
        };
        if let Some(seed) = overrides.seed {
            solver.seed = Some(seed);
            loading.seed = seed;
        }
        if let Some(it) = overrides.iterations {
            solver.iterations = it;
        }
        solver.validate()?;
        loading.validate()?;

        let total_power = file.evaluation.total_power_mw * 1e-3;
        if !(total_power > 0.0) {
            return Err(Error::Config("evaluation.total_power_mw must be positive".into()));
        }
        let lens_focal_length = file.lens_focal_length_mm.map(|f| f * 1e-3);

        let traps_path = base.join(&file.traps_path);
        if !traps_path.is_file() {
            return Err(Error::Config(format!("trap file not found: {}", traps_path.display())));
        }
        let spec = TrapSpec::load(&traps_path)?;
        spec.validate(&system)?;

        let output_dir = overrides.out.clone().unwrap_or_else(|| base.join(&file.output_dir));
        Ok(Self {
            system,
            device,
            beam,
            drive,
            solver,
            traps_path,
            spec,
            loading,
            total_power,
            lens_focal_length,
            output_dir,
        })
    }

    fn ensure_output_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Simulated focal intensity of a mask shown on the configured device.
pub fn simulate_focal_intensity(cfg: &RunConfig, mask: &PhaseMask<f64>) -> Result<ndarray::Array2<f64>> {
    let field = apply_device(mask, &cfg.device, &cfg.beam, &cfg.system, &cfg.drive)?;
    Ok(propagate_to_focal(&field, &cfg.system)?.intensity())
}

/// Paths written by [`cmd_design`].
#[derive(Debug, Clone)]
pub struct DesignOutputs {
    pub hologram: PathBuf,
    pub intensity_pgm: PathBuf,
    pub intensity_csv: PathBuf,
    pub convergence_json: PathBuf,
    pub convergence_csv: PathBuf,
}

/// Designs the hologram and writes it with the simulated focal intensity and
/// the convergence history.
///
/// The intensity is computed from the exported 8-bit hologram, so it matches
/// what `evaluate` reproduces from the file.
pub fn cmd_design(cfg: &RunConfig) -> Result<DesignOutputs> {
    cfg.ensure_output_dir()?;
    let (mask, report) = solve(&cfg.spec, &cfg.system, &cfg.solver)?;
    let mask = add_lens_phase(&mask, cfg.lens_focal_length, &cfg.system)?;

    let outputs = DesignOutputs {
        hologram: cfg.out(HOLOGRAM_FILE),
        intensity_pgm: cfg.out(INTENSITY_PGM_FILE),
        intensity_csv: cfg.out(INTENSITY_CSV_FILE),
        convergence_json: cfg.out(CONVERGENCE_JSON_FILE),
        convergence_csv: cfg.out(CONVERGENCE_CSV_FILE),
    };
    export_hologram(&mask, &cfg.device, &outputs.hologram)?;
    let shown = import_hologram(&outputs.hologram, &cfg.system)?;
    let intensity = simulate_focal_intensity(cfg, &shown)?;
    io::write_pgm(&outputs.intensity_pgm, &io::intensity_image(&intensity))?;
    io::write_csv(&outputs.intensity_csv, &intensity)?;
    write_text(&outputs.convergence_json, &report.to_json())?;
    write_text(&outputs.convergence_csv, &report.to_csv())?;
    Ok(outputs)
}

/// Input accepted by [`cmd_evaluate`].
#[derive(Debug, Clone)]
pub enum EvaluateInput {
    /// Hologram PGM; the device and focal propagation are simulated.
    Hologram(PathBuf),
    /// Focal intensity map as CSV.
    Intensity(PathBuf),
}

/// Evaluates a hologram or an intensity map and writes the trap report.
pub fn cmd_evaluate(cfg: &RunConfig, input: &EvaluateInput) -> Result<(TrapReport<f64>, PathBuf)> {
    let intensity = match input {
        EvaluateInput::Hologram(path) => {
            let mask = import_hologram(path, &cfg.system)?;
            simulate_focal_intensity(cfg, &mask)?
        }
        EvaluateInput::Intensity(path) => io::read_csv(path)?,
    };
    let report = evaluate(&intensity, &cfg.spec, &cfg.system, &cfg.loading, cfg.total_power)?;
    cfg.ensure_output_dir()?;
    let path = cfg.out(REPORT_FILE);
    write_text(&path, &report.to_json())?;
    Ok((report, path))
}

/// Runs the loading Monte Carlo on a trap report and writes the statistics.
pub fn cmd_loadsim(cfg: &RunConfig, report_path: &Path) -> Result<(OccupancyStats, PathBuf)> {
    let text = fs::read_to_string(report_path).map_err(|e| Error::io(report_path, e))?;
    let report =
        TrapReport::<f64>::from_json(&text).map_err(|e| Error::parse(report_path, e.to_string()))?;
    let stats = load_sim(&report, &cfg.loading)?;
    cfg.ensure_output_dir()?;
    let path = cfg.out(OCCUPANCY_FILE);
    write_text(&path, &stats.to_json())?;
    Ok((stats, path))
}

/// Re-exports a hologram with the configured lens term added, plus the device
/// description next to it.
pub fn cmd_export(cfg: &RunConfig, hologram: &Path, out: &Path) -> Result<PathBuf> {
    let mask = import_hologram(hologram, &cfg.system)?;
    let mask = add_lens_phase(&mask, cfg.lens_focal_length, &cfg.system)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    export_hologram(&mask, &cfg.device, out)?;
    let device_path = out.with_file_name(DEVICE_FILE);
    write_text(&device_path, &cfg.device.to_json())?;
    Ok(device_path)
}

/// Process exit code for an error: 2 for usage and configuration problems,
/// 1 for failures while running.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Range(_) | Error::InvalidTarget(_) => 2,
        Error::DeviceDamage { .. } => 2,
        _ => 1,
    }
}
