//! Phase-only hologram design for arrays of optical dipole traps.
//!
//! The pipeline runs from a list of requested trap positions to a phase mask
//! for a liquid-crystal spatial light modulator, simulates the device and the
//! focusing objective, and evaluates the resulting traps:
//!
//! * [`field`]: sampled complex fields and propagation between planes
//! * [`target`]: focal-plane target amplitudes built from trap lists
//! * [`solver`]: iterative Fourier-transform (Gerchberg–Saxton) phase design
//! * [`slm`]: the physical modulator, lens terms and hologram images
//! * [`physics`] and [`loading`]: trap metrics and atom-loading statistics
//! * [`cli`]: run configuration and the commands of the `holotrap` binary
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
mod fft;
pub mod field;
pub mod io;
pub mod loading;
pub mod physics;
pub mod scalar;
pub mod slm;
pub mod solver;
pub mod target;

pub use error::{Error, Result};
pub use field::{
    fresnel_max_distance, fresnel_propagate, propagate_to_focal, propagate_to_slm, ComplexField, OpticalSystem, Plane,
};
pub use loading::{load_sim, LoadingModel, OccupancyStats};
pub use physics::{
    estimate_waist, evaluate, peak_intensity, position_precision, trap_spacing, waist_ratio_from_thresholds,
    TrapMetrics, TrapReport,
};
pub use scalar::{wrap_phase, Scalar};
pub use slm::{
    add_lens_phase, apply_device, export_hologram, import_hologram, lens_for_focal_shift, max_phase, BeamProfile,
    DeviceModel, DriveSettings,
};
pub use solver::{
    gs_step, init_phase, solve, solve_from, ConvergenceReport, InitMode, IterationStats, PhaseMask, SolverConfig,
    UpdateRule,
};
pub use target::{build_target, snap_traps, TargetAmplitude, Trap, TrapSpec};

pub type ComplexField64 = ComplexField<f64>;
pub type ComplexField32 = ComplexField<f32>;
pub type OpticalSystem64 = OpticalSystem<f64>;
pub type OpticalSystem32 = OpticalSystem<f32>;
pub type PhaseMask64 = PhaseMask<f64>;
pub type PhaseMask32 = PhaseMask<f32>;
pub type TrapSpec64 = TrapSpec<f64>;
pub type TrapSpec32 = TrapSpec<f32>;
pub type TargetAmplitude64 = TargetAmplitude<f64>;
pub type TargetAmplitude32 = TargetAmplitude<f32>;
pub type DeviceModel64 = DeviceModel<f64>;
pub type DeviceModel32 = DeviceModel<f32>;
pub type TrapReport64 = TrapReport<f64>;
pub type TrapReport32 = TrapReport<f32>;
