//! Physical figures of merit for a focal-plane trap array.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::OpticalSystem;
use crate::loading::LoadingModel;
use crate::scalar::{from_isize, Scalar};
use crate::solver::{disk_pixels, uniformity_deviation, TrapWindows};
use crate::target::{trap_sites, TrapSpec};

/// Trap separation δ = λf/p produced by a phase grating of period `period`.
pub fn trap_spacing<T: Scalar>(wavelength: T, focal_length: T, period: T) -> T {
    wavelength * focal_length / period
}

/// Smallest step in trap separation reachable by lengthening the grating
/// period by one SLM pixel: |λf/p − λf/(p + pixel)| with p = λf/δ.
pub fn position_precision<T: Scalar>(spacing: T, wavelength: T, focal_length: T, slm_pixel: T) -> Result<T> {
    for (name, v) in [
        ("spacing", spacing),
        ("wavelength", wavelength),
        ("focal_length", focal_length),
        ("slm_pixel", slm_pixel),
    ] {
        if !(v > T::zero() && v.is_finite()) {
            return Err(Error::Range(format!("{name} must be positive, got {v}")));
        }
    }
    let lf = wavelength * focal_length;
    if !(spacing < lf / slm_pixel) {
        return Err(Error::Range(format!(
            "spacing {spacing} m needs a grating period below one SLM pixel ({slm_pixel} m)"
        )));
    }
    let period = lf / spacing;
    Ok((lf / period - lf / (period + slm_pixel)).abs())
}

/// Gaussian peak intensity 2P/(πw²), W/m².
pub fn peak_intensity<T: Scalar>(power: T, waist: T) -> T {
    T::lit(2.0) * power / (T::PI() * waist * waist)
}

/// Waist ratio implied by two capture-threshold powers, assuming trap depth
/// ∝ P/w²: √(P_test / P_ref).
pub fn waist_ratio_from_thresholds<T: Scalar>(threshold_test: T, threshold_ref: T) -> T {
    (threshold_test / threshold_ref).sqrt()
}

/// Mean of d² under a Gaussian of 1/e² radius `waist`, restricted to the
/// sampled squared distances `d2`.
fn sampled_gaussian_moment(waist: f64, d2: &[f64]) -> f64 {
    let k = 2.0 / (waist * waist);
    let (num, den) = d2.iter().fold((0.0, 0.0), |(n, d), &r2| {
        let g = (-k * r2).exp();
        (n + r2 * g, d + g)
    });
    num / den
}

/// 1/e² radius of the spot nearest `center`.
///
/// The brightest pixel within `window_radius` must be a local maximum. The
/// second moment is then taken over a core disk of half that radius centered
/// on the intensity centroid, and inverted under a Gaussian profile sampled
/// on the same pixels, so a Gaussian spot is recovered for any window size.
pub fn estimate_waist<T: Scalar>(
    intensity: &Array2<T>,
    pitch: T,
    center: (usize, usize),
    window_radius: T,
) -> Result<T> {
    let n = intensity.nrows();
    let window = disk_pixels(n, pitch, center.0, center.1, window_radius);
    let (peak_px, peak) = window
        .iter()
        .map(|&p| (p, intensity[p]))
        .fold(((0, 0), T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
    if window.is_empty() || !(peak > T::zero()) {
        return Err(Error::Detection(format!(
            "no intensity inside the window around pixel {center:?}"
        )));
    }
    let (pr, pc) = peak_px;
    let is_local_max = (-1isize..=1).all(|dr| {
        (-1isize..=1).all(|dc| {
            let (r, c) = (pr as isize + dr, pc as isize + dc);
            r < 0 || c < 0 || r >= n as isize || c >= n as isize || intensity[[r as usize, c as usize]] <= peak
        })
    });
    let dy = from_isize::<T>(pr as isize - center.0 as isize) * pitch;
    let dx = from_isize::<T>(pc as isize - center.1 as isize) * pitch;
    let edge = window_radius - pitch;
    if !is_local_max || dx * dx + dy * dy >= edge * edge {
        return Err(Error::Detection(format!(
            "no local maximum inside the window around pixel {center:?}"
        )));
    }

    let coords = |(r, c): (usize, usize)| {
        (
            from_isize::<T>(c as isize - pc as isize) * pitch,
            from_isize::<T>(r as isize - pr as isize) * pitch,
        )
    };
    let around_peak = disk_pixels(n, pitch, pr, pc, window_radius);
    let (mut sum, mut sx, mut sy) = (T::zero(), T::zero(), T::zero());
    for &p in &around_peak {
        let (x, y) = coords(p);
        sum = sum + intensity[p];
        sx = sx + x * intensity[p];
        sy = sy + y * intensity[p];
    }
    let (cx, cy) = (sx / sum, sy / sum);

    // second pass: core window centered on the centroid
    let core = window_radius / T::lit(2.0);
    let reach = (core / pitch).floor().to_f64_lossy() as isize + 2;
    let r2max = core * core;
    let (mut sum, mut m2) = (T::zero(), T::zero());
    let mut d2s = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let (r, c) = (pr as isize + dr, pc as isize + dc);
            if r < 0 || c < 0 || r >= n as isize || c >= n as isize {
                continue;
            }
            let (x, y) = coords((r as usize, c as usize));
            let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if d2 <= r2max {
                let v = intensity[[r as usize, c as usize]];
                sum = sum + v;
                m2 = m2 + d2 * v;
                d2s.push(d2.to_f64_lossy());
            }
        }
    }
    let moment = (m2 / sum).to_f64_lossy();
    let flat = d2s.iter().sum::<f64>() / d2s.len() as f64;
    if !(moment > 0.0) || moment >= 0.999 * flat {
        return Err(Error::Detection("spot fills the measurement window".into()));
    }
    let radius = core.to_f64_lossy();
    let (mut lo, mut hi) = (1e-3 * radius, 1e3 * radius);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sampled_gaussian_moment(mid, &d2s) < moment {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::lit(0.5 * (lo + hi)))
}

/// Metrics for one lit site of the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrapMetrics<T: Scalar> {
    /// Index into the trap list; `None` for the zeroth-order site.
    pub trap_index: Option<usize>,
    pub zeroth_order: bool,
    pub requested_position_m: [T; 2],
    /// Intensity centroid inside the trap window.
    pub position_m: [T; 2],
    /// Peak pixel intensity as a fraction of the total focal energy.
    pub peak_intensity: T,
    /// Trap-window energy as a fraction of the total focal energy.
    pub power_fraction: T,
    pub power_w: T,
    pub waist_m: Option<T>,
    /// Peak intensity relative to the brightest site.
    pub depth_relative: T,
    pub above_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrapReport<T: Scalar> {
    pub label: String,
    pub traps: Vec<TrapMetrics<T>>,
    /// Energy fraction in the window around the optical axis.
    pub zeroth_order_intensity: T,
    pub zeroth_order_power_w: T,
    pub zeroth_order_above_threshold: bool,
    pub efficiency: T,
    pub uniformity_deviation: T,
    pub total_power_w: T,
    pub threshold_power_per_trap_w: T,
}

impl<T: Scalar> TrapReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Evaluates a focal intensity map against the design it was made for.
///
/// Each site gets a window of one Airy radius; its power is `total_power`
/// times the window's share of the focal energy, and it counts as trapping
/// when that power reaches the loading model's per-trap threshold.
pub fn evaluate<T: Scalar>(
    focal_intensity: &Array2<T>,
    spec: &TrapSpec<T>,
    sys: &OpticalSystem<T>,
    loading: &LoadingModel,
    total_power: T,
) -> Result<TrapReport<T>> {
    sys.validate()?;
    let n = sys.grid_size;
    if focal_intensity.dim() != (n, n) {
        return Err(Error::Config(format!(
            "intensity map is {:?}, expected {n}x{n}",
            focal_intensity.dim()
        )));
    }
    let pitch = sys.focal_pitch();
    let airy = sys.airy_zero_radius();
    let threshold = T::lit(loading.threshold_power_per_trap_w);
    let sites = trap_sites(spec, sys)?;
    let windows = TrapWindows::new(&sites, n, pitch, airy);

    let total = focal_intensity.iter().fold(T::zero(), |a, &v| a + v);
    let frac = |e: T| if total > T::zero() { e / total } else { T::zero() };
    let h = (n / 2) as isize;
    let coord = |i: usize| from_isize::<T>(i as isize - h) * pitch;

    let energies = windows.sums(focal_intensity);
    let mut traps = Vec::with_capacity(sites.len());
    for ((site, window), &energy) in sites.iter().zip(&windows.windows).zip(&energies) {
        let (mut sx, mut sy, mut peak) = (T::zero(), T::zero(), T::zero());
        for &(r, c) in window {
            let v = focal_intensity[[r, c]];
            sx = sx + coord(c) * v;
            sy = sy + coord(r) * v;
            peak = peak.max(v);
        }
        let position_m = if energy > T::zero() {
            [sx / energy, sy / energy]
        } else {
            [coord(site.col), coord(site.row)]
        };
        let requested_position_m = match site.trap_index {
            Some(i) => [spec.traps[i].x, spec.traps[i].y],
            None => [T::zero(), T::zero()],
        };
        let power_fraction = frac(energy);
        let power_w = total_power * power_fraction;
        let waist_m = estimate_waist(focal_intensity, pitch, (site.row, site.col), T::lit(2.0) * airy).ok();
        traps.push(TrapMetrics {
            trap_index: site.trap_index,
            zeroth_order: site.is_zeroth_order(),
            requested_position_m,
            position_m,
            peak_intensity: frac(peak),
            power_fraction,
            power_w,
            waist_m,
            depth_relative: T::zero(),
            above_threshold: total > T::zero() && power_w >= threshold,
        });
    }
    let max_peak = traps.iter().fold(T::zero(), |m, t| m.max(t.peak_intensity));
    if max_peak > T::zero() {
        for t in &mut traps {
            t.depth_relative = t.peak_intensity / max_peak;
        }
    }

    let center = disk_pixels(n, pitch, n / 2, n / 2, airy);
    let zeroth = frac(center.iter().fold(T::zero(), |a, &p| a + focal_intensity[p]));
    let zeroth_power = total_power * zeroth;
    let inside = windows.union.iter().fold(T::zero(), |a, &p| a + focal_intensity[p]);
    let weights: Vec<T> = sites.iter().map(|s| s.weight).collect();

    Ok(TrapReport {
        label: spec.label.clone(),
        traps,
        zeroth_order_intensity: zeroth,
        zeroth_order_power_w: zeroth_power,
        zeroth_order_above_threshold: total > T::zero() && zeroth_power >= threshold,
        efficiency: frac(inside),
        uniformity_deviation: uniformity_deviation(&energies, &weights),
        total_power_w: total_power,
        threshold_power_per_trap_w: threshold,
    })
}
