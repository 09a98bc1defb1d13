//! Sampled complex fields and their propagation between the SLM plane and
//! the focal plane of the objective.

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft::CenteredFft2;
use crate::io;
use crate::scalar::{from_isize, from_usize, Scalar};

/// Which plane a field is sampled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plane {
    Slm,
    Focal,
    Intermediate,
}

/// Optical layout: laser, objective and the simulation grid at the SLM.
///
/// The focal-plane sample pitch is always derived from the other fields,
/// see [`OpticalSystem::focal_pitch`].
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalSystem<T: Scalar> {
    pub wavelength: T,
    pub focal_length: T,
    pub pupil_diameter: T,
    pub numerical_aperture: T,
    pub beam_waist_at_slm: T,
    pub grid_size: usize,
    pub slm_pitch: T,
}

impl<T: Scalar> OpticalSystem<T> {
    /// 810 nm trapping laser, 3.55 mm objective (NA 0.7), 5 mm pupil, 2.3 mm
    /// beam waist, 480 px over 20 mm embedded in a 512 grid.
    pub fn reference_setup() -> Self {
        Self {
            wavelength: T::lit(810e-9),
            focal_length: T::lit(3.55e-3),
            pupil_diameter: T::lit(5e-3),
            numerical_aperture: T::lit(0.7),
            beam_waist_at_slm: T::lit(2.3e-3),
            grid_size: 512,
            slm_pitch: T::lit(20e-3 / 480.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("focal_length", self.focal_length),
            ("pupil_diameter", self.pupil_diameter),
            ("beam_waist_at_slm", self.beam_waist_at_slm),
            ("slm_pitch", self.slm_pitch),
        ];
        for (name, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.numerical_aperture > T::zero() && self.numerical_aperture < T::one()) {
            return Err(Error::Config(format!(
                "numerical_aperture must lie in (0, 1), got {}",
                self.numerical_aperture
            )));
        }
        if self.grid_size < 2 || !self.grid_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "grid_size must be even and at least 2, got {}",
                self.grid_size
            )));
        }
        Ok(())
    }

    /// Δρ = λf / (N · slm_pitch).
    pub fn focal_pitch(&self) -> T {
        self.wavelength * self.focal_length / (from_usize::<T>(self.grid_size) * self.slm_pitch)
    }

    /// Side of the square focal field of view, N·Δρ.
    pub fn focal_field_of_view(&self) -> T {
        from_usize::<T>(self.grid_size) * self.focal_pitch()
    }

    /// First zero of the Airy pattern of the pupil, 1.22 λf/D.
    pub fn airy_zero_radius(&self) -> T {
        T::lit(1.22) * self.wavelength * self.focal_length / self.pupil_diameter
    }

    /// Physical coordinate of grid index `i` for a plane with pitch `pitch`.
    pub fn coordinate(&self, i: usize, pitch: T) -> T {
        from_isize::<T>(i as isize - (self.grid_size / 2) as isize) * pitch
    }

    /// Indicator of the objective pupil (disk of diameter D) on the SLM grid.
    pub fn pupil_mask(&self) -> Array2<bool> {
        disk_mask(self.grid_size, self.slm_pitch, self.pupil_diameter / T::lit(2.0))
    }
}

/// Boolean disk of radius `radius` centered at index `n/2` on a grid of pitch `pitch`.
pub fn disk_mask<T: Scalar>(n: usize, pitch: T, radius: T) -> Array2<bool> {
    let h = (n / 2) as isize;
    let r2 = radius * radius;
    Array2::from_shape_fn((n, n), |(r, c)| {
        let y = from_isize::<T>(r as isize - h) * pitch;
        let x = from_isize::<T>(c as isize - h) * pitch;
        x * x + y * y <= r2
    })
}

/// A sampled N×N complex optical field.
///
/// Rows index `y`, columns index `x`; the origin sits at index `(N/2, N/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField<T: Scalar> {
    samples: Array2<Complex<T>>,
    pitch: T,
    wavelength: T,
    plane: Plane,
}

impl<T: Scalar> ComplexField<T> {
    pub fn new(samples: Array2<Complex<T>>, pitch: T, wavelength: T, plane: Plane) -> Result<Self> {
        let (rows, cols) = samples.dim();
        if rows != cols || rows < 2 {
            return Err(Error::Config(format!(
                "field must be square with N >= 2, got {rows}x{cols}"
            )));
        }
        if rows % 2 != 0 {
            return Err(Error::Config(format!("field size must be even, got {rows}")));
        }
        if !(pitch > T::zero() && pitch.is_finite()) {
            return Err(Error::Config(format!("pitch must be positive, got {pitch}")));
        }
        if !(wavelength > T::zero() && wavelength.is_finite()) {
            return Err(Error::Config(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(Self {
            samples,
            pitch,
            wavelength,
            plane,
        })
    }

    /// Builds a field by evaluating `f(x, y)` at every sample position.
    pub fn from_fn(
        n: usize,
        pitch: T,
        wavelength: T,
        plane: Plane,
        mut f: impl FnMut(T, T) -> Complex<T>,
    ) -> Result<Self> {
        let h = (n / 2) as isize;
        let samples = Array2::from_shape_fn((n, n), |(r, c)| {
            f(
                from_isize::<T>(c as isize - h) * pitch,
                from_isize::<T>(r as isize - h) * pitch,
            )
        });
        Self::new(samples, pitch, wavelength, plane)
    }

    pub fn samples(&self) -> &Array2<Complex<T>> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<Complex<T>> {
        self.samples
    }

    pub fn size(&self) -> usize {
        self.samples.nrows()
    }

    pub fn pitch(&self) -> T {
        self.pitch
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    /// Σ|E|².
    pub fn energy(&self) -> T {
        self.samples.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr())
    }

    /// |E|² per sample.
    pub fn intensity(&self) -> Array2<T> {
        self.samples.mapv(|v| v.norm_sqr())
    }

    /// Writes |E|² as row-major comma-separated text.
    pub fn write_intensity_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_csv(path, &self.intensity())
    }
}

fn same_length<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::lit(1e-9) * a.abs().max(b.abs())
}

fn check_grid<T: Scalar>(field: &ComplexField<T>, sys: &OpticalSystem<T>, pitch: T) -> Result<()> {
    sys.validate()?;
    if field.size() != sys.grid_size {
        return Err(Error::Config(format!(
            "field is {}x{} but the optical system grid is {}",
            field.size(),
            field.size(),
            sys.grid_size
        )));
    }
    if !same_length(field.pitch, pitch) {
        return Err(Error::Config(format!(
            "field pitch {} does not match expected {}",
            field.pitch, pitch
        )));
    }
    if !same_length(field.wavelength, sys.wavelength) {
        return Err(Error::Config(format!(
            "field wavelength {} does not match system wavelength {}",
            field.wavelength, sys.wavelength
        )));
    }
    Ok(())
}

/// Field in the back focal plane of the objective for a given SLM-plane field.
pub fn propagate_to_focal<T: Scalar>(
    field: &ComplexField<T>,
    sys: &OpticalSystem<T>,
) -> Result<ComplexField<T>> {
    if field.plane != Plane::Slm {
        return Err(Error::Config(format!(
            "propagate_to_focal expects an SLM-plane field, got {:?}",
            field.plane
        )));
    }
    check_grid(field, sys, sys.slm_pitch)?;
    let out = CenteredFft2::new(sys.grid_size).forward(&field.samples);
    ComplexField::new(out, sys.focal_pitch(), sys.wavelength, Plane::Focal)
}

/// Inverse of [`propagate_to_focal`].
pub fn propagate_to_slm<T: Scalar>(
    field: &ComplexField<T>,
    sys: &OpticalSystem<T>,
) -> Result<ComplexField<T>> {
    if field.plane != Plane::Focal {
        return Err(Error::Config(format!(
            "propagate_to_slm expects a focal-plane field, got {:?}",
            field.plane
        )));
    }
    check_grid(field, sys, sys.focal_pitch())?;
    let out = CenteredFft2::new(sys.grid_size).inverse(&field.samples);
    ComplexField::new(out, sys.slm_pitch, sys.wavelength, Plane::Slm)
}

/// Spectral samples with |S|² below this fraction of the peak are ignored when
/// measuring the band edge.
const BAND_EDGE_THRESHOLD: f64 = 1e-12;

/// Largest spatial frequency carrying non-negligible power, in cycles/m.
fn band_edge<T: Scalar>(spectrum: &Array2<Complex<T>>, pitch: T) -> T {
    let n = spectrum.nrows();
    let h = (n / 2) as isize;
    let df = T::one() / (from_usize::<T>(n) * pitch);
    let peak = spectrum.iter().fold(T::zero(), |m, v| m.max(v.norm_sqr()));
    if peak <= T::zero() {
        return T::zero();
    }
    let floor = peak * T::lit(BAND_EDGE_THRESHOLD);
    let mut edge2 = T::zero();
    for ((r, c), v) in spectrum.indexed_iter() {
        if v.norm_sqr() > floor {
            let fy = from_isize::<T>(r as isize - h) * df;
            let fx = from_isize::<T>(c as isize - h) * df;
            edge2 = edge2.max(fx * fx + fy * fy);
        }
    }
    edge2.sqrt()
}

/// Largest |distance| for which [`fresnel_propagate`] stays unaliased.
///
/// The transfer function `exp(-iπλz f²)` has local chirp rate `λ z f` across
/// the spectral grid spacing `Δf = 1/(N·dx)`. Keeping it Nyquist-sampled up to
/// the field's band edge `f_b` requires `λ |z| f_b Δf ≤ 1/2`, i.e.
/// `|z| ≤ N·dx / (2 λ f_b)`. Geometrically this is the distance at which the
/// widest ray cone of the field reaches the edge of the periodic window.
pub fn fresnel_max_distance<T: Scalar>(field: &ComplexField<T>) -> T {
    let n = field.size();
    let spectrum = CenteredFft2::new(n).forward(&field.samples);
    max_distance_for(&spectrum, field)
}

fn max_distance_for<T: Scalar>(spectrum: &Array2<Complex<T>>, field: &ComplexField<T>) -> T {
    let edge = band_edge(spectrum, field.pitch);
    if edge <= T::zero() {
        return T::infinity();
    }
    from_usize::<T>(field.size()) * field.pitch / (T::lit(2.0) * field.wavelength * edge)
}

/// Propagates a field by `distance` along the optical axis with the paraxial
/// (Fresnel) transfer function applied to its angular spectrum.
///
/// The constant phase `exp(ikz)` is omitted. The transfer function has unit
/// modulus, so energy is conserved up to rounding.
pub fn fresnel_propagate<T: Scalar>(field: &ComplexField<T>, distance: T) -> Result<ComplexField<T>> {
    if distance == T::zero() {
        return Ok(field.clone());
    }
    let n = field.size();
    let plan = CenteredFft2::new(n);
    let mut spectrum = plan.forward(&field.samples);

    let max_distance = max_distance_for(&spectrum, field);
    if !(distance.abs() < max_distance) {
        return Err(Error::Sampling {
            distance: distance.to_f64_lossy(),
            max_distance: max_distance.to_f64_lossy(),
        });
    }

    let h = (n / 2) as isize;
    let df = T::one() / (from_usize::<T>(n) * field.pitch);
    let chirp = -T::PI() * field.wavelength * distance;
    for ((r, c), v) in spectrum.indexed_iter_mut() {
        let fy = from_isize::<T>(r as isize - h) * df;
        let fx = from_isize::<T>(c as isize - h) * df;
        *v = *v * Complex::from_polar(T::one(), chirp * (fx * fx + fy * fy));
    }

    ComplexField::new(plan.inverse(&spectrum), field.pitch, field.wavelength, Plane::Intermediate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_system(n: usize) -> OpticalSystem<f64> {
        OpticalSystem {
            grid_size: n,
            ..OpticalSystem::reference_setup()
        }
    }

    #[test]
    fn focal_pitch_at_defaults() {
        let sys = OpticalSystem::<f64>::reference_setup();
        // 810e-9 * 3.55e-3 / (512 * 20e-3 / 480)
        assert!((sys.focal_pitch() - 810e-9 * 3.55e-3 * 480.0 / (512.0 * 20e-3)).abs() < 1e-20);
        assert!((sys.focal_pitch() - 1.347_89e-7).abs() < 1e-12);
        assert!((sys.airy_zero_radius() - 7.016_22e-7).abs() < 1e-15);
    }

    #[test]
    fn rejects_odd_and_bad_parameters() {
        let mut sys = small_system(7);
        assert!(matches!(sys.validate(), Err(Error::Config(_))));
        sys.grid_size = 8;
        sys.numerical_aperture = 1.2;
        assert!(sys.validate().is_err());
        sys.numerical_aperture = 0.7;
        sys.focal_length = -1.0;
        assert!(sys.validate().is_err());
    }

    #[test]
    fn field_construction_checks() {
        let bad = Array2::<Complex<f64>>::zeros((4, 6));
        assert!(ComplexField::new(bad, 1.0, 1.0, Plane::Slm).is_err());
        let odd = Array2::<Complex<f64>>::zeros((5, 5));
        assert!(ComplexField::new(odd, 1.0, 1.0, Plane::Slm).is_err());
        let ok = Array2::<Complex<f64>>::zeros((4, 4));
        assert!(ComplexField::new(ok.clone(), 0.0, 1.0, Plane::Slm).is_err());
        assert!(ComplexField::new(ok, 1.0, 1.0, Plane::Slm).is_ok());
    }

    #[test]
    fn mismatched_pitch_is_a_config_error() {
        let sys = small_system(16);
        let f = ComplexField::from_fn(16, sys.slm_pitch * 2.0, sys.wavelength, Plane::Slm, |_, _| {
            Complex::new(1.0, 0.0)
        })
        .unwrap();
        assert!(matches!(propagate_to_focal(&f, &sys), Err(Error::Config(_))));
        let wrong_plane =
            ComplexField::from_fn(16, sys.slm_pitch, sys.wavelength, Plane::Focal, |_, _| {
                Complex::new(1.0, 0.0)
            })
            .unwrap();
        assert!(propagate_to_focal(&wrong_plane, &sys).is_err());
        let wrong_grid = ComplexField::from_fn(8, sys.slm_pitch, sys.wavelength, Plane::Slm, |_, _| {
            Complex::new(1.0, 0.0)
        })
        .unwrap();
        assert!(propagate_to_focal(&wrong_grid, &sys).is_err());
    }

    #[test]
    fn delta_at_slm_gives_flat_focal_magnitude() {
        let sys = small_system(32);
        let mut s = Array2::zeros((32, 32));
        s[[5, 9]] = Complex::new(2.0, 0.0);
        let f = ComplexField::new(s, sys.slm_pitch, sys.wavelength, Plane::Slm).unwrap();
        let focal = propagate_to_focal(&f, &sys).unwrap();
        for v in focal.samples().iter() {
            assert!((v.norm() - 2.0 / 32.0).abs() < 1e-14);
        }
    }

    #[test]
    fn centered_focal_delta_gives_constant_slm_field() {
        let sys = small_system(32);
        let mut s = Array2::zeros((32, 32));
        s[[16, 16]] = Complex::new(1.0, 0.0);
        let f = ComplexField::new(s, sys.focal_pitch(), sys.wavelength, Plane::Focal).unwrap();
        let slm = propagate_to_slm(&f, &sys).unwrap();
        for v in slm.samples().iter() {
            assert!((v - Complex::new(1.0 / 32.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn fresnel_zero_distance_is_identity() {
        let sys = small_system(16);
        let f = ComplexField::from_fn(16, sys.focal_pitch(), sys.wavelength, Plane::Focal, |x, y| {
            Complex::new((x * 1e6).cos(), (y * 1e6).sin())
        })
        .unwrap();
        let g = fresnel_propagate(&f, 0.0).unwrap();
        assert_eq!(f.samples(), g.samples());
    }

    #[test]
    fn fresnel_rejects_aliased_distance() {
        let sys = small_system(64);
        let w0 = 0.9e-6;
        let f = ComplexField::from_fn(64, sys.focal_pitch(), sys.wavelength, Plane::Focal, |x, y| {
            Complex::new((-(x * x + y * y) / (w0 * w0)).exp(), 0.0)
        })
        .unwrap();
        let zmax = fresnel_max_distance(&f);
        assert!(zmax.is_finite() && zmax > 0.0);
        match fresnel_propagate(&f, 2.0 * zmax) {
            Err(Error::Sampling { max_distance, .. }) => {
                assert!((max_distance - zmax).abs() <= 1e-12 * zmax)
            }
            other => panic!("expected sampling error, got {other:?}"),
        }
        assert!(fresnel_propagate(&f, 0.5 * zmax).is_ok());
    }
}
