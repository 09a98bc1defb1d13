//! Physical model of the liquid-crystal SLM: wavelength-dependent phase
//! range, saturation, gray-level quantization, illumination and image export.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, OpticalSystem, Plane};
use crate::io::{self, GrayImage};
use crate::scalar::{from_isize, from_usize, wrap_phase, Scalar};
use crate::solver::PhaseMask;

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel<T: Scalar> {
    pub pixels_per_side: usize,
    /// Side of the square active area, meters.
    pub active_side: T,
    /// Largest phase shift at `reference_wavelength`, radians.
    pub max_phase_at_reference: T,
    pub reference_wavelength: T,
    /// Number of addressable levels; `None` means continuous.
    pub gray_levels: Option<u32>,
    /// Damage threshold, W/m²; `None` means unlimited.
    pub max_intensity: Option<T>,
}

impl<T: Scalar> DeviceModel<T> {
    /// 480×480 px over 20×20 mm, 2.1π at 633 nm, 8-bit, 200 mW/cm².
    pub fn pal_slm() -> Self {
        Self {
            pixels_per_side: 480,
            active_side: T::lit(20e-3),
            max_phase_at_reference: T::lit(2.1) * T::PI(),
            reference_wavelength: T::lit(633e-9),
            gray_levels: Some(256),
            max_intensity: Some(T::lit(200e-3 / 1e-4)),
        }
    }

    /// Full 2π range at `wavelength`, continuous levels, no damage limit.
    pub fn ideal(wavelength: T) -> Self {
        Self {
            pixels_per_side: 480,
            active_side: T::lit(20e-3),
            max_phase_at_reference: T::two_pi(),
            reference_wavelength: wavelength,
            gray_levels: None,
            max_intensity: None,
        }
    }

    pub fn pixel_pitch(&self) -> T {
        self.active_side / from_usize::<T>(self.pixels_per_side)
    }

    /// Phase range scales inversely with wavelength at fixed optical path.
    pub fn max_phase(&self, wavelength: T) -> T {
        self.max_phase_at_reference * self.reference_wavelength / wavelength
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels_per_side == 0
            || !(self.active_side > T::zero())
            || !(self.max_phase_at_reference > T::zero())
            || !(self.reference_wavelength > T::zero())
        {
            return Err(Error::Config("device model parameters must be positive".into()));
        }
        if matches!(self.gray_levels, Some(l) if l < 2) {
            return Err(Error::Config("gray_levels must be at least 2".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let r: DeviceRecord = serde_json::from_str(text)?;
        Ok(r.into())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DeviceRecord::from(self)).expect("device serializes")
    }
}

/// Free-function form of [`DeviceModel::max_phase`].
pub fn max_phase<T: Scalar>(dev: &DeviceModel<T>, wavelength: T) -> T {
    dev.max_phase(wavelength)
}

/// On-disk device description; units are carried in the key names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub pixels_per_side: usize,
    pub active_side_mm: f64,
    /// In units of π.
    pub max_phase_at_reference_pi: f64,
    pub reference_wavelength_nm: f64,
    pub gray_levels: Option<u32>,
    pub max_intensity_mw_per_cm2: Option<f64>,
}

impl Default for DeviceRecord {
    fn default() -> Self {
        Self::from(&DeviceModel::<f64>::pal_slm())
    }
}

impl<T: Scalar> From<DeviceRecord> for DeviceModel<T> {
    fn from(r: DeviceRecord) -> Self {
        Self {
            pixels_per_side: r.pixels_per_side,
            active_side: T::lit(r.active_side_mm * 1e-3),
            max_phase_at_reference: T::lit(r.max_phase_at_reference_pi) * T::PI(),
            reference_wavelength: T::lit(r.reference_wavelength_nm * 1e-9),
            gray_levels: r.gray_levels,
            // 1 mW/cm² = 10 W/m²
            max_intensity: r.max_intensity_mw_per_cm2.map(|v| T::lit(v * 10.0)),
        }
    }
}

impl<T: Scalar> From<&DeviceModel<T>> for DeviceRecord {
    fn from(d: &DeviceModel<T>) -> Self {
        Self {
            pixels_per_side: d.pixels_per_side,
            active_side_mm: d.active_side.to_f64_lossy() * 1e3,
            max_phase_at_reference_pi: d.max_phase_at_reference.to_f64_lossy() / std::f64::consts::PI,
            reference_wavelength_nm: d.reference_wavelength.to_f64_lossy() * 1e9,
            gray_levels: d.gray_levels,
            max_intensity_mw_per_cm2: d.max_intensity.map(|v| v.to_f64_lossy() / 10.0),
        }
    }
}

/// Gaussian read-out beam incident on the SLM.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamProfile<T: Scalar> {
    /// 1/e² intensity radius, meters.
    pub waist_at_slm: T,
    pub power: T,
    /// Linear polarization along the liquid-crystal axis.
    pub polarization_ok: bool,
}

impl<T: Scalar> BeamProfile<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.waist_at_slm > T::zero()) || !(self.power > T::zero()) {
            return Err(Error::Config("beam waist and power must be positive".into()));
        }
        Ok(())
    }

    /// Peak intensity 2P/(πw²).
    pub fn peak_intensity(&self) -> T {
        T::lit(2.0) * self.power / (T::PI() * self.waist_at_slm * self.waist_at_slm)
    }
}

/// Drive options applied between the computed mask and the liquid crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSettings<T: Scalar> {
    /// Multiplies the requested phase (after shifting it into `[0, 2π)`)
    /// before saturation; `max_phase/2π` rescales instead of clipping.
    pub gain: T,
    /// Diameter of the disk where the mask is written; phase is 0 outside.
    /// `None` uses the objective pupil diameter.
    pub modulated_diameter: Option<T>,
}

impl<T: Scalar> Default for DriveSettings<T> {
    fn default() -> Self {
        Self {
            gain: T::one(),
            modulated_diameter: None,
        }
    }
}

/// Phase actually written by the device for a requested phase.
pub fn device_phase<T: Scalar>(requested: T, max_phase: T, gray_levels: Option<u32>, gain: T) -> T {
    let tau = T::two_pi();
    let shifted = requested - tau * (requested / tau).floor();
    let clipped = (gain * shifted).min(max_phase).max(T::zero());
    match gray_levels {
        None => clipped,
        Some(levels) => {
            let step = max_phase / from_usize::<T>(levels as usize - 1);
            // round half up
            (clipped / step + T::lit(0.5)).floor() * step
        }
    }
}

/// Realistic SLM-plane field: truncated Gaussian beam times the device phase.
///
/// The amplitude is `exp(-r²/w²)` inside both the active square and the
/// objective pupil. Inside the modulated disk the phase is the requested
/// mask after gain, saturation at `max_phase(λ)` and quantization.
pub fn apply_device<T: Scalar>(
    mask: &PhaseMask<T>,
    dev: &DeviceModel<T>,
    beam: &BeamProfile<T>,
    sys: &OpticalSystem<T>,
    drive: &DriveSettings<T>,
) -> Result<ComplexField<T>> {
    mask.check_system(sys)?;
    dev.validate()?;
    beam.validate()?;
    if !beam.polarization_ok {
        return Err(Error::Config(
            "read-out beam must be polarized along the liquid-crystal axis for pure phase modulation".into(),
        ));
    }
    if let Some(limit) = dev.max_intensity {
        let intensity = beam.peak_intensity();
        if intensity > limit {
            return Err(Error::DeviceDamage {
                intensity: intensity.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
            });
        }
    }

    let n = sys.grid_size;
    let h = (n / 2) as isize;
    let pitch = sys.slm_pitch;
    let half_side = dev.active_side / T::lit(2.0);
    let pupil_r2 = (sys.pupil_diameter / T::lit(2.0)).powi(2);
    let mod_r2 = (drive.modulated_diameter.unwrap_or(sys.pupil_diameter) / T::lit(2.0)).powi(2);
    let w2 = beam.waist_at_slm * beam.waist_at_slm;
    let max_phase = dev.max_phase(sys.wavelength);

    let samples = Array2::from_shape_fn((n, n), |(r, c)| {
        let y = from_isize::<T>(r as isize - h) * pitch;
        let x = from_isize::<T>(c as isize - h) * pitch;
        let r2 = x * x + y * y;
        if x.abs() > half_side || y.abs() > half_side || r2 > pupil_r2 {
            return Complex::new(T::zero(), T::zero());
        }
        let amp = (-r2 / w2).exp();
        let phase = if r2 <= mod_r2 {
            device_phase(mask.phase()[[r, c]], max_phase, dev.gray_levels, drive.gain)
        } else {
            T::zero()
        };
        Complex::from_polar(amp, phase)
    });
    ComplexField::new(samples, pitch, sys.wavelength, Plane::Slm)
}

/// Adds the quadratic phase of a thin lens, `-π r²/(λ f)`, wrapped to `(-π, π]`.
/// `None` means no lens.
pub fn add_lens_phase<T: Scalar>(
    mask: &PhaseMask<T>,
    f_lens: Option<T>,
    sys: &OpticalSystem<T>,
) -> Result<PhaseMask<T>> {
    mask.check_system(sys)?;
    let Some(f) = f_lens else {
        return Ok(mask.clone());
    };
    if f == T::zero() || !f.is_finite() {
        return Err(Error::Config(format!("lens focal length must be nonzero and finite, got {f}")));
    }
    let n = mask.size();
    let h = (n / 2) as isize;
    let coef = -T::PI() / (sys.wavelength * f);
    let phase = Array2::from_shape_fn((n, n), |(r, c)| {
        let y = from_isize::<T>(r as isize - h) * mask.pitch();
        let x = from_isize::<T>(c as isize - h) * mask.pitch();
        wrap_phase(mask.phase()[[r, c]] + coef * (x * x + y * y))
    });
    PhaseMask::new(phase, mask.pitch(), mask.wavelength())
}

/// Thin lens in contact with the objective that moves its focus by `shift`
/// along the axis (positive = away from the objective).
pub fn lens_for_focal_shift<T: Scalar>(shift: T, sys: &OpticalSystem<T>) -> T {
    let f = sys.focal_length;
    -f * (f + shift) / shift
}

/// Side length, in grid samples, of the exported device region.
fn device_crop<T: Scalar>(n: usize, pitch: T, dev: &DeviceModel<T>) -> usize {
    let px = (dev.active_side / pitch + T::lit(0.5)).floor().to_f64_lossy() as usize;
    px.clamp(1, n)
}

/// Gray value for a phase: −π ↦ 0, +π ↦ 255, linear, round half up.
pub fn phase_to_gray<T: Scalar>(phase: T) -> u8 {
    let g = ((phase + T::PI()) / T::two_pi() * T::lit(255.0) + T::lit(0.5)).floor();
    g.max(T::zero()).min(T::lit(255.0)).to_f64_lossy() as u8
}

/// Inverse of [`phase_to_gray`], wrapped to `(-π, π]` (gray 0 reads as +π).
pub fn gray_to_phase<T: Scalar>(gray: u8) -> T {
    wrap_phase(T::lit(gray as f64) / T::lit(255.0) * T::two_pi() - T::PI())
}

/// 8-bit image of the central device region of a mask.
pub fn hologram_image<T: Scalar>(mask: &PhaseMask<T>, dev: &DeviceModel<T>) -> GrayImage {
    let n = mask.size();
    let side = device_crop(n, mask.pitch(), dev);
    let start = (n - side) / 2;
    let px = Array2::from_shape_fn((side, side), |(r, c)| {
        phase_to_gray(mask.phase()[[start + r, start + c]])
    });
    GrayImage::from_array(&px)
}

/// Writes the device region of `mask` as a binary PGM.
pub fn export_hologram<T: Scalar>(
    mask: &PhaseMask<T>,
    dev: &DeviceModel<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    io::write_pgm(path, &hologram_image(mask, dev))
}

/// Reads a hologram PGM and embeds it at the center of the simulation grid.
pub fn import_hologram<T: Scalar>(path: impl AsRef<Path>, sys: &OpticalSystem<T>) -> Result<PhaseMask<T>> {
    let path = path.as_ref();
    let img = io::read_pgm(path)?;
    hologram_from_image(&img, sys).map_err(|e| match e {
        Error::Config(m) => Error::parse(path, m),
        other => other,
    })
}

pub fn hologram_from_image<T: Scalar>(img: &GrayImage, sys: &OpticalSystem<T>) -> Result<PhaseMask<T>> {
    let n = sys.grid_size;
    if img.width != img.height || img.width > n {
        return Err(Error::Config(format!(
            "hologram image is {}x{}; expected a square of at most {n} px",
            img.width, img.height
        )));
    }
    let side = img.width;
    let start = (n - side) / 2;
    let pixels = img.to_array();
    let mut phase = Array2::zeros((n, n));
    for ((r, c), &g) in pixels.indexed_iter() {
        phase[[start + r, start + c]] = gray_to_phase(g);
    }
    PhaseMask::new(phase, sys.slm_pitch, sys.wavelength)
}

/// Saves a device description as JSON.
pub fn save_device<T: Scalar>(dev: &DeviceModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dev.to_json()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phase_range_scales_inversely() {
        let d = DeviceModel::<f64>::pal_slm();
        assert_eq!(d.max_phase(633e-9), 2.1 * PI);
        assert!((d.max_phase(2.0 * 633e-9) - 1.05 * PI).abs() < 1e-15);
        let at810 = d.max_phase(810e-9) / PI;
        // 2.1·633/810 = 1.6411; the measured value is quoted as 1.65
        assert!((at810 - 1.641_111_111).abs() < 1e-9);
        assert!((at810 - 1.65).abs() / 1.65 < 0.006);
    }

    #[test]
    fn pitch_is_side_over_pixels() {
        let d = DeviceModel::<f64>::pal_slm();
        assert!((d.pixel_pitch() - 41.666_666e-6).abs() < 1e-11);
    }

    #[test]
    fn gray_mapping_endpoints() {
        assert_eq!(phase_to_gray(0.0f64), 128);
        assert_eq!(phase_to_gray(PI), 255);
        assert_eq!(phase_to_gray(-PI), 0);
        assert_eq!(gray_to_phase::<f64>(255), PI);
        assert_eq!(gray_to_phase::<f64>(0), PI);
    }

    #[test]
    fn device_phase_saturates_and_quantizes() {
        let max = 1.6 * PI;
        assert_eq!(device_phase(1.9 * PI - 2.0 * PI, max, None, 1.0), max);
        assert!((device_phase(-0.5 * PI, 2.0 * PI, None, 1.0) - 1.5 * PI).abs() < 1e-15);
        let q = device_phase(0.3, 2.0 * PI, Some(256), 1.0);
        let step = 2.0 * PI / 255.0;
        assert!((q / step - (q / step).round()).abs() < 1e-9);
        assert!((q - 0.3).abs() <= step / 2.0);
        // gain rescales instead of clipping
        let g = device_phase(-1e-9, max, None, max / (2.0 * PI));
        assert!(g < max);
    }

    #[test]
    fn device_record_units() {
        let rec = DeviceRecord::default();
        assert_eq!(rec.pixels_per_side, 480);
        assert!((rec.active_side_mm - 20.0).abs() < 1e-12);
        assert!((rec.max_phase_at_reference_pi - 2.1).abs() < 1e-12);
        assert!((rec.reference_wavelength_nm - 633.0).abs() < 1e-9);
        assert!((rec.max_intensity_mw_per_cm2.unwrap() - 200.0).abs() < 1e-9);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("active_side_mm"));
        let back = DeviceModel::<f64>::from_json(&json).unwrap();
        assert_eq!(back.pixels_per_side, 480);
        assert!((back.max_intensity.unwrap() - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn damage_threshold_enforced() {
        let sys = OpticalSystem::<f64>::reference_setup();
        let dev = DeviceModel::pal_slm();
        let mask = PhaseMask::zeros(&sys);
        let hot = BeamProfile {
            waist_at_slm: 2.3e-3,
            power: 40e-3,
            polarization_ok: true,
        };
        match apply_device(&mask, &dev, &hot, &sys, &DriveSettings::default()) {
            Err(Error::DeviceDamage { intensity, limit }) => {
                assert!(intensity > limit);
                assert!((limit - 2000.0).abs() < 1e-9);
            }
            other => panic!("expected damage error, got {other:?}"),
        }
        let ok = BeamProfile { power: 10e-3, ..hot };
        assert!(apply_device(&mask, &dev, &ok, &sys, &DriveSettings::default()).is_ok());
    }

    #[test]
    fn zero_lens_rejected_and_none_is_identity() {
        let sys = OpticalSystem::<f64>::reference_setup();
        let mask = PhaseMask::zeros(&sys);
        assert!(add_lens_phase(&mask, Some(0.0), &sys).is_err());
        assert_eq!(add_lens_phase(&mask, None, &sys).unwrap(), mask);
    }

    #[test]
    fn lens_for_shift_matches_thin_lens_sum() {
        let sys = OpticalSystem::<f64>::reference_setup();
        let fl = lens_for_focal_shift(50e-6, &sys);
        let f_eff = 1.0 / (1.0 / sys.focal_length + 1.0 / fl);
        assert!((f_eff - sys.focal_length - 50e-6).abs() < 1e-15);
    }
}
