//! Trap-array geometry and the focal-plane target amplitude fed to the solver.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{propagate_to_focal, ComplexField, OpticalSystem, Plane};
use crate::scalar::{from_isize, Scalar};

/// One requested trap: focal-plane position in meters and relative intensity weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trap<T: Scalar> {
    pub x: T,
    pub y: T,
    pub weight: T,
}

/// Requested trap array.
///
/// Weights are relative intensities (trap depths); the solver normalizes
/// them internally. `zeroth_order_weight > 0` requests a trap on the optical
/// axis made of undiffracted light.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapSpec<T: Scalar> {
    pub traps: Vec<Trap<T>>,
    pub zeroth_order_weight: T,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrapRecord {
    x_um: f64,
    y_um: f64,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrapSpecRecord {
    traps: Vec<TrapRecord>,
    #[serde(default)]
    zeroth_order_weight: f64,
    #[serde(default)]
    label: String,
}

impl<T: Scalar> TrapSpec<T> {
    pub fn new(traps: Vec<Trap<T>>) -> Self {
        Self {
            traps,
            zeroth_order_weight: T::zero(),
            label: String::new(),
        }
    }

    /// Parses the JSON trap file format (distances in micrometers).
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let rec: TrapSpecRecord = serde_json::from_str(text)?;
        Ok(Self {
            traps: rec
                .traps
                .iter()
                .map(|t| Trap {
                    x: T::lit(t.x_um * 1e-6),
                    y: T::lit(t.y_um * 1e-6),
                    weight: T::lit(t.weight),
                })
                .collect(),
            zeroth_order_weight: T::lit(rec.zeroth_order_weight),
            label: rec.label,
        })
    }

    pub fn to_json(&self) -> String {
        let rec = TrapSpecRecord {
            traps: self
                .traps
                .iter()
                .map(|t| TrapRecord {
                    x_um: t.x.to_f64_lossy() * 1e6,
                    y_um: t.y.to_f64_lossy() * 1e6,
                    weight: t.weight.to_f64_lossy(),
                })
                .collect(),
            zeroth_order_weight: self.zeroth_order_weight.to_f64_lossy(),
            label: self.label.clone(),
        };
        serde_json::to_string_pretty(&rec).expect("trap spec serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Checks weights and that every trap is inside the focal field of view.
    pub fn validate(&self, sys: &OpticalSystem<T>) -> Result<()> {
        let ok_weight = |w: T| w >= T::zero() && w.is_finite();
        if !ok_weight(self.zeroth_order_weight) {
            return Err(Error::Config(format!(
                "zeroth_order_weight must be finite and >= 0, got {}",
                self.zeroth_order_weight
            )));
        }
        for (i, t) in self.traps.iter().enumerate() {
            if !ok_weight(t.weight) {
                return Err(Error::Config(format!(
                    "trap {i} weight must be finite and >= 0, got {}",
                    t.weight
                )));
            }
        }
        let any_light = self.zeroth_order_weight > T::zero()
            || self.traps.iter().any(|t| t.weight > T::zero());
        if !any_light {
            return Err(Error::InvalidTarget(
                "at least one trap (or the zeroth order) needs a positive weight".into(),
            ));
        }
        snap_traps(self, sys).map(|_| ())
    }
}

/// A trap moved onto the nearest focal-plane sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnappedTrap<T: Scalar> {
    pub row: usize,
    pub col: usize,
    /// Distance between requested and snapped position, meters.
    pub residual: T,
}

/// Nearest integer, halves going toward negative infinity.
fn snap_offset<T: Scalar>(u: T) -> isize {
    (u - T::lit(0.5)).ceil().to_f64_lossy() as isize
}

/// Maps each trap onto the focal grid. `residual ≤ Δρ/√2` always holds.
pub fn snap_traps<T: Scalar>(spec: &TrapSpec<T>, sys: &OpticalSystem<T>) -> Result<Vec<SnappedTrap<T>>> {
    sys.validate()?;
    let dr = sys.focal_pitch();
    let half_fov = sys.focal_field_of_view() / T::lit(2.0);
    let n = sys.grid_size as isize;
    let h = n / 2;
    spec.traps
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let inside = t.x.abs() < half_fov && t.y.abs() < half_fov;
            let kx = snap_offset(t.x / dr);
            let ky = snap_offset(t.y / dr);
            let (col, row) = (h + kx, h + ky);
            if !inside || col < 0 || col >= n || row < 0 || row >= n {
                return Err(Error::Range(format!(
                    "trap {i} at ({:.4} um, {:.4} um) lies outside the focal field of view ±{:.4} um",
                    t.x.to_f64_lossy() * 1e6,
                    t.y.to_f64_lossy() * 1e6,
                    half_fov.to_f64_lossy() * 1e6,
                )));
            }
            let dx = t.x - from_isize::<T>(kx) * dr;
            let dy = t.y - from_isize::<T>(ky) * dr;
            Ok(SnappedTrap {
                row: row as usize,
                col: col as usize,
                residual: (dx * dx + dy * dy).sqrt(),
            })
        })
        .collect()
}

/// A lit site of the target: snapped trap or the zeroth order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSite<T: Scalar> {
    pub row: usize,
    pub col: usize,
    pub weight: T,
    /// Index into `TrapSpec::traps`, or `None` for the zeroth-order site.
    pub trap_index: Option<usize>,
}

impl<T: Scalar> TrapSite<T> {
    pub fn is_zeroth_order(&self) -> bool {
        self.trap_index.is_none()
    }
}

/// Target focal amplitude E₀^f, normalized to a peak of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetAmplitude<T: Scalar> {
    pub grid: Array2<T>,
    pub pitch: T,
    pub sites: Vec<TrapSite<T>>,
    /// Set when two sites are closer than one Airy radius.
    pub overlap_warning: bool,
}

/// Lit sites of a spec in trap order, zeroth order last. Zero-weight traps are skipped.
pub fn trap_sites<T: Scalar>(spec: &TrapSpec<T>, sys: &OpticalSystem<T>) -> Result<Vec<TrapSite<T>>> {
    let snapped = snap_traps(spec, sys)?;
    let mut sites: Vec<TrapSite<T>> = spec
        .traps
        .iter()
        .zip(&snapped)
        .enumerate()
        .filter(|(_, (t, _))| t.weight > T::zero())
        .map(|(i, (t, s))| TrapSite {
            row: s.row,
            col: s.col,
            weight: t.weight,
            trap_index: Some(i),
        })
        .collect();
    if spec.zeroth_order_weight > T::zero() {
        let h = sys.grid_size / 2;
        sites.push(TrapSite {
            row: h,
            col: h,
            weight: spec.zeroth_order_weight,
            trap_index: None,
        });
    }
    Ok(sites)
}

/// Complex point-spread amplitude of the pupil, centered at `(N/2, N/2)`.
pub(crate) fn pupil_psf<T: Scalar>(sys: &OpticalSystem<T>) -> Result<Array2<Complex<T>>> {
    let pupil = sys.pupil_mask().mapv(|inside| {
        if inside {
            Complex::new(T::one(), T::zero())
        } else {
            Complex::new(T::zero(), T::zero())
        }
    });
    let field = ComplexField::new(pupil, sys.slm_pitch, sys.wavelength, Plane::Slm)?;
    let psf = propagate_to_focal(&field, sys)?.into_samples();
    // a point-symmetric pupil has a real, point-symmetric PSF
    let n = sys.grid_size;
    Ok(Array2::from_shape_fn((n, n), |(r, c)| {
        let mirror = psf[[(n - r) % n, (n - c) % n]];
        Complex::new((psf[[r, c]].re + mirror.re) / T::lit(2.0), T::zero())
    }))
}

/// Builds E₀^f: the snapped Dirac array (amplitude √weight per site)
/// convolved with the Airy amplitude of the pupil, peak-normalized.
///
/// The convolution is a cyclic superposition of the pupil PSF, which equals
/// multiplying the SLM-plane spectrum by the pupil indicator. Sites are summed
/// in raster order of the grid, so the result does not depend on the order of
/// `spec.traps`.
pub fn build_target<T: Scalar>(spec: &TrapSpec<T>, sys: &OpticalSystem<T>) -> Result<TargetAmplitude<T>> {
    spec.validate(sys)?;
    let sites = trap_sites(spec, sys)?;
    let n = sys.grid_size;
    let h = n / 2;

    let mut deltas = Array2::<T>::zeros((n, n));
    for s in &sites {
        deltas[[s.row, s.col]] = deltas[[s.row, s.col]] + s.weight.sqrt();
    }

    let psf = pupil_psf(sys)?;
    let mut field = Array2::from_elem((n, n), Complex::new(T::zero(), T::zero()));
    for ((r0, c0), &a) in deltas.indexed_iter() {
        if a == T::zero() {
            continue;
        }
        for ((r, c), v) in field.indexed_iter_mut() {
            let kr = (r + n + h - r0) % n;
            let kc = (c + n + h - c0) % n;
            *v = *v + psf[[kr, kc]] * a;
        }
    }

    let mut grid = field.mapv(|v| v.norm());
    let peak = grid.iter().fold(T::zero(), |m, &v| m.max(v));
    if !(peak > T::zero()) {
        return Err(Error::InvalidTarget("target amplitude is identically zero".into()));
    }
    grid.mapv_inplace(|v| v / peak);

    let dr = sys.focal_pitch();
    let airy = sys.airy_zero_radius();
    let mut overlap_warning = false;
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            let dy = from_isize::<T>(a.row as isize - b.row as isize) * dr;
            let dx = from_isize::<T>(a.col as isize - b.col as isize) * dr;
            if (dx * dx + dy * dy).sqrt() < airy {
                overlap_warning = true;
            }
        }
    }

    Ok(TargetAmplitude {
        grid,
        pitch: dr,
        sites,
        overlap_warning,
    })
}
