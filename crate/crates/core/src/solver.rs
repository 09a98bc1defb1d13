//! Iterative Fourier-transform (Gerchberg–Saxton type) design of phase-only
//! holograms.
//!
//! The SLM-plane field used by the solver has unit amplitude over the
//! objective pupil and zero outside it; only the phase is free. Each step
//! propagates to the focal plane, imposes the target amplitude while keeping
//! the focal phase, propagates back and keeps the phase.

use ndarray::Array2;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::CenteredFft2;
use crate::field::{ComplexField, OpticalSystem, Plane};
use crate::scalar::{from_isize, from_usize, wrap_phase, Scalar};
use crate::target::{build_target, TargetAmplitude, TrapSite, TrapSpec};

/// Phase pattern for the SLM, radians in `(-π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask<T: Scalar> {
    phase: Array2<T>,
    pitch: T,
    wavelength: T,
}

impl<T: Scalar> PhaseMask<T> {
    /// Validates that every sample already lies in `(-π, π]`.
    pub fn new(phase: Array2<T>, pitch: T, wavelength: T) -> Result<Self> {
        let (r, c) = phase.dim();
        if r != c || r < 2 || r % 2 != 0 {
            return Err(Error::Config(format!("phase mask must be square and even, got {r}x{c}")));
        }
        if !(pitch > T::zero()) || !(wavelength > T::zero()) {
            return Err(Error::Config("phase mask pitch and wavelength must be positive".into()));
        }
        if let Some(bad) = phase.iter().find(|&&p| !(p > -T::PI() && p <= T::PI())) {
            return Err(Error::Config(format!("phase sample {bad} outside (-pi, pi]")));
        }
        Ok(Self {
            phase,
            pitch,
            wavelength,
        })
    }

    /// Wraps arbitrary real phases into `(-π, π]`.
    pub fn from_unwrapped(phase: Array2<T>, pitch: T, wavelength: T) -> Result<Self> {
        Self::new(phase.mapv(wrap_phase), pitch, wavelength)
    }

    pub fn zeros(sys: &OpticalSystem<T>) -> Self {
        Self {
            phase: Array2::zeros((sys.grid_size, sys.grid_size)),
            pitch: sys.slm_pitch,
            wavelength: sys.wavelength,
        }
    }

    pub fn phase(&self) -> &Array2<T> {
        &self.phase
    }

    pub fn pitch(&self) -> T {
        self.pitch
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    pub fn size(&self) -> usize {
        self.phase.nrows()
    }

    pub(crate) fn check_system(&self, sys: &OpticalSystem<T>) -> Result<()> {
        let close = |a: T, b: T| (a - b).abs() <= T::lit(1e-9) * a.abs().max(b.abs());
        if self.size() != sys.grid_size || !close(self.pitch, sys.slm_pitch) {
            return Err(Error::Config(format!(
                "phase mask ({} px, pitch {}) does not match the optical system ({} px, pitch {})",
                self.size(),
                self.pitch,
                sys.grid_size,
                sys.slm_pitch
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    #[default]
    SeededRandom,
    Flat,
    Quadratic,
}

/// How the focal amplitude is constrained each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Amplitude becomes `k·E₀^f·|E_n^f|`: the achieved amplitude multiplied
    /// by the target.
    AmplitudeMultiply,
    /// Amplitude becomes `k·E₀^f` (textbook Gerchberg–Saxton).
    #[default]
    ClassicReplace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub iterations: usize,
    #[serde(default)]
    pub init_mode: InitMode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub update_rule: UpdateRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 4,
            init_mode: InitMode::SeededRandom,
            seed: Some(1),
            update_rule: UpdateRule::ClassicReplace,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.init_mode == InitMode::SeededRandom && self.seed.is_none() {
            return Err(Error::Config("seeded_random initialization requires a seed".into()));
        }
        Ok(())
    }
}

/// Focal-plane diagnostics for one phase pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IterationStats<T: Scalar> {
    /// Σ|E|² inside each trap window, in target-site order.
    pub trap_intensities: Vec<T>,
    /// max_i |I_i/w_i − mean| / mean over weight-normalized trap intensities.
    pub uniformity_deviation: T,
    /// Fraction of focal energy inside the union of trap windows.
    pub efficiency: T,
    /// RMS of (scaled |E| − E₀^f) over the trap windows.
    pub focal_error: T,
}

/// Per-iteration diagnostics of a solver run.
///
/// Entry `n` describes the focal field of the phase pattern that entered
/// iteration `n + 1`; `final_stats` describes the returned pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConvergenceReport<T: Scalar> {
    pub label: String,
    pub update_rule: UpdateRule,
    pub iterations: Vec<IterationStats<T>>,
    pub final_stats: IterationStats<T>,
}

impl<T: Scalar> ConvergenceReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per iteration; trap intensities joined with `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,uniformity_deviation,efficiency,focal_error,trap_intensities\n");
        for (i, s) in self.iterations.iter().enumerate() {
            let traps: Vec<String> = s.trap_intensities.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                s.uniformity_deviation,
                s.efficiency,
                s.focal_error,
                traps.join(";")
            ));
        }
        out
    }
}

/// Initial phase guess.
pub fn init_phase<T: Scalar>(cfg: &SolverConfig, sys: &OpticalSystem<T>) -> Result<PhaseMask<T>> {
    cfg.validate()?;
    sys.validate()?;
    let n = sys.grid_size;
    let phase = match cfg.init_mode {
        InitMode::Flat => Array2::zeros((n, n)),
        InitMode::Quadratic => {
            // -π at the center rising to +π at the grid edge along the axes
            let h = (n / 2) as isize;
            let edge2 = from_usize::<T>(n / 2).powi(2);
            Array2::from_shape_fn((n, n), |(r, c)| {
                let y = from_isize::<T>(r as isize - h);
                let x = from_isize::<T>(c as isize - h);
                wrap_phase(-T::PI() + T::two_pi() * (x * x + y * y) / edge2)
            })
        }
        InitMode::SeededRandom => {
            let seed = cfg.seed.expect("validated above");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Array2::from_shape_simple_fn((n, n), || {
                let u: f64 = rng.random();
                // u ∈ [0, 1) maps onto (-π, π]
                T::lit(std::f64::consts::PI - std::f64::consts::TAU * u)
            })
        }
    };
    PhaseMask::new(phase, sys.slm_pitch, sys.wavelength)
}

/// Unit amplitude over the pupil, zero elsewhere.
pub fn solver_amplitude<T: Scalar>(sys: &OpticalSystem<T>) -> Array2<T> {
    sys.pupil_mask()
        .mapv(|inside| if inside { T::one() } else { T::zero() })
}

/// SLM-plane field `A·e^{iφ}` with the solver's pupil amplitude.
pub fn solver_input_field<T: Scalar>(mask: &PhaseMask<T>, sys: &OpticalSystem<T>) -> Result<ComplexField<T>> {
    mask.check_system(sys)?;
    let amp = solver_amplitude(sys);
    let samples = ndarray::Zip::from(&amp)
        .and(mask.phase())
        .map_collect(|&a, &p| Complex::from_polar(a, p));
    ComplexField::new(samples, sys.slm_pitch, sys.wavelength, Plane::Slm)
}

/// Pixels within `radius` of a site, clipped to the grid.
pub(crate) fn disk_pixels<T: Scalar>(
    n: usize,
    pitch: T,
    row: usize,
    col: usize,
    radius: T,
) -> Vec<(usize, usize)> {
    let reach = (radius / pitch).floor().to_f64_lossy() as isize + 1;
    let r2 = radius * radius;
    let mut out = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let (r, c) = (row as isize + dr, col as isize + dc);
            if r < 0 || c < 0 || r >= n as isize || c >= n as isize {
                continue;
            }
            let dy = from_isize::<T>(dr) * pitch;
            let dx = from_isize::<T>(dc) * pitch;
            if dx * dx + dy * dy <= r2 {
                out.push((r as usize, c as usize));
            }
        }
    }
    out
}

/// Trap-window bookkeeping shared by the solver and the evaluator.
pub(crate) struct TrapWindows {
    pub windows: Vec<Vec<(usize, usize)>>,
    pub union: Vec<(usize, usize)>,
}

impl TrapWindows {
    pub(crate) fn new<T: Scalar>(sites: &[TrapSite<T>], n: usize, pitch: T, radius: T) -> Self {
        let windows: Vec<_> = sites
            .iter()
            .map(|s| disk_pixels(n, pitch, s.row, s.col, radius))
            .collect();
        let mut seen = Array2::from_elem((n, n), false);
        let mut union = Vec::new();
        for &(r, c) in windows.iter().flatten() {
            if !seen[[r, c]] {
                seen[[r, c]] = true;
                union.push((r, c));
            }
        }
        union.sort_unstable();
        Self { windows, union }
    }

    pub(crate) fn sums<T: Scalar>(&self, intensity: &Array2<T>) -> Vec<T> {
        self.windows
            .iter()
            .map(|w| w.iter().fold(T::zero(), |acc, &p| acc + intensity[p]))
            .collect()
    }
}

/// max_i |x_i − x̄| / x̄ for weight-normalized values; zero when the mean vanishes.
pub(crate) fn uniformity_deviation<T: Scalar>(values: &[T], weights: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let normalized: Vec<T> = values.iter().zip(weights).map(|(&v, &w)| v / w).collect();
    let mean = normalized.iter().fold(T::zero(), |a, &v| a + v) / from_usize::<T>(normalized.len());
    if !(mean > T::zero()) {
        return T::zero();
    }
    normalized
        .iter()
        .fold(T::zero(), |m, &v| m.max((v - mean).abs()))
        / mean
}

pub(crate) fn focal_stats<T: Scalar>(
    field: &Array2<Complex<T>>,
    target: &TargetAmplitude<T>,
    windows: &TrapWindows,
) -> IterationStats<T> {
    let intensity = field.mapv(|v| v.norm_sqr());
    let total = intensity.iter().fold(T::zero(), |a, &v| a + v);
    let trap_intensities = windows.sums(&intensity);
    let weights: Vec<T> = target.sites.iter().map(|s| s.weight).collect();
    let inside = windows.union.iter().fold(T::zero(), |a, &p| a + intensity[p]);
    let efficiency = if total > T::zero() { inside / total } else { T::zero() };

    let target_energy = windows
        .union
        .iter()
        .fold(T::zero(), |a, &p| a + target.grid[p] * target.grid[p]);
    let scale = if inside > T::zero() {
        (target_energy / inside).sqrt()
    } else {
        T::zero()
    };
    let sq = windows.union.iter().fold(T::zero(), |a, &p| {
        let d = scale * intensity[p].sqrt() - target.grid[p];
        a + d * d
    });
    let focal_error = if windows.union.is_empty() {
        T::zero()
    } else {
        (sq / from_usize::<T>(windows.union.len())).sqrt()
    };

    IterationStats {
        uniformity_deviation: uniformity_deviation(&trap_intensities, &weights),
        trap_intensities,
        efficiency,
        focal_error,
    }
}

struct Engine<T: Scalar> {
    plan: CenteredFft2<T>,
    amplitude: Array2<T>,
    input_energy: T,
    windows: TrapWindows,
}

impl<T: Scalar> Engine<T> {
    fn new(sys: &OpticalSystem<T>, target: &TargetAmplitude<T>) -> Result<Self> {
        sys.validate()?;
        if target.grid.dim() != (sys.grid_size, sys.grid_size) {
            return Err(Error::Config(format!(
                "target grid {:?} does not match system grid {}",
                target.grid.dim(),
                sys.grid_size
            )));
        }
        if !target.grid.iter().any(|&v| v > T::zero()) {
            return Err(Error::InvalidTarget("target amplitude is identically zero".into()));
        }
        let amplitude = solver_amplitude(sys);
        let input_energy = amplitude.iter().fold(T::zero(), |a, &v| a + v * v);
        let windows = TrapWindows::new(
            &target.sites,
            sys.grid_size,
            sys.focal_pitch(),
            sys.airy_zero_radius(),
        );
        Ok(Self {
            plan: CenteredFft2::new(sys.grid_size),
            amplitude,
            input_energy,
            windows,
        })
    }

    fn focal(&self, phase: &Array2<T>) -> Array2<Complex<T>> {
        // phase-only: the amplitude is the fixed pupil indicator
        let input = ndarray::Zip::from(&self.amplitude)
            .and(phase)
            .map_collect(|&a, &p| Complex::from_polar(a, p));
        self.plan.forward(&input)
    }

    fn step(
        &self,
        phase: &Array2<T>,
        target: &TargetAmplitude<T>,
        rule: UpdateRule,
    ) -> Result<(Array2<T>, IterationStats<T>)> {
        let focal = self.focal(phase);
        let stats = focal_stats(&focal, target, &self.windows);

        let constrained_amp = match rule {
            UpdateRule::ClassicReplace => target.grid.clone(),
            UpdateRule::AmplitudeMultiply => ndarray::Zip::from(&target.grid)
                .and(&focal)
                .map_collect(|&t, e| t * e.norm()),
        };
        let energy = constrained_amp.iter().fold(T::zero(), |a, &v| a + v * v);
        if !(energy > T::zero()) {
            return Err(Error::InvalidTarget(
                "constrained focal field vanished; the current pattern puts no light on the target".into(),
            ));
        }
        let k = (self.input_energy / energy).sqrt();
        let constrained = ndarray::Zip::from(&constrained_amp)
            .and(&focal)
            .map_collect(|&a, e| Complex::from_polar(k * a, e.arg()));

        let back = self.plan.inverse(&constrained);
        let next = ndarray::Zip::from(&back)
            .and(&self.amplitude)
            .map_collect(|v, &a| if a > T::zero() { wrap_phase(v.arg()) } else { T::zero() });
        Ok((next, stats))
    }
}

/// One solver iteration. The returned statistics describe the focal field of
/// the input `phase`.
pub fn gs_step<T: Scalar>(
    phase: &PhaseMask<T>,
    target: &TargetAmplitude<T>,
    sys: &OpticalSystem<T>,
    rule: UpdateRule,
) -> Result<(PhaseMask<T>, IterationStats<T>)> {
    phase.check_system(sys)?;
    let engine = Engine::new(sys, target)?;
    let (next, stats) = engine.step(phase.phase(), target, rule)?;
    Ok((PhaseMask::new(next, sys.slm_pitch, sys.wavelength)?, stats))
}

/// Focal diagnostics of a phase pattern against a target, without updating it.
pub fn mask_stats<T: Scalar>(
    phase: &PhaseMask<T>,
    target: &TargetAmplitude<T>,
    sys: &OpticalSystem<T>,
) -> Result<IterationStats<T>> {
    phase.check_system(sys)?;
    let engine = Engine::new(sys, target)?;
    Ok(focal_stats(&engine.focal(phase.phase()), target, &engine.windows))
}

/// Builds the target for `spec` and runs `cfg.iterations` solver steps.
pub fn solve<T: Scalar>(
    spec: &TrapSpec<T>,
    sys: &OpticalSystem<T>,
    cfg: &SolverConfig,
) -> Result<(PhaseMask<T>, ConvergenceReport<T>)> {
    let target = build_target(spec, sys)?;
    let init = init_phase(cfg, sys)?;
    solve_from(&init, &target, sys, cfg, &spec.label)
}

/// Runs the solver from an explicit starting pattern.
pub fn solve_from<T: Scalar>(
    init: &PhaseMask<T>,
    target: &TargetAmplitude<T>,
    sys: &OpticalSystem<T>,
    cfg: &SolverConfig,
    label: &str,
) -> Result<(PhaseMask<T>, ConvergenceReport<T>)> {
    if cfg.iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    init.check_system(sys)?;
    let engine = Engine::new(sys, target)?;
    let mut phase = init.phase().clone();
    let mut iterations = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let (next, stats) = engine.step(&phase, target, cfg.update_rule)?;
        iterations.push(stats);
        phase = next;
    }
    let final_stats = focal_stats(&engine.focal(&phase), target, &engine.windows);
    let mask = PhaseMask::new(phase, sys.slm_pitch, sys.wavelength)?;
    Ok((
        mask,
        ConvergenceReport {
            label: label.to_string(),
            update_rule: cfg.update_rule,
            iterations,
            final_stats,
        },
    ))
}
