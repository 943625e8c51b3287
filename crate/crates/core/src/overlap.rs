//! Gaussian-mode overlap model for relative SPDC brightness under pump
//! walk-off.
//!
//! The extraordinary pump centroid walks across the fixed collection modes as
//! it propagates, which punishes tight focusing along the walk-off direction
//! but not perpendicular to it — the opening an elliptical pump exploits.
//! Brightness is modeled as the squared magnitude of the three-mode overlap
//!
//! ```text
//! A = ∫dz ∬dxdy E_p(r − Δ(z) û) u_s*(r) u_i*(r)
//! ```
//!
//! with the pump power fixed (field amplitude ∝ 1/√(w_major w_minor)), both
//! collection modes identical circular Gaussians, and every beam treated as
//! collimated across the crystal (Rayleigh ranges exceed the crystal length
//! at these waists). The transverse integral is closed-form per z slice; only
//! z is discretized (Simpson). The walk-off displacement is measured from the
//! crystal mid-plane: the collection is aligned to the center of the walk-off
//! pattern, which is also what reproduces the observed optimum circular pump
//! waist. Absolute units are arbitrary; only ratios between configurations
//! are meaningful.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of z samples (Simpson; kept odd).
pub const DEFAULT_Z_SLICES: usize = 101;

/// Refinement threshold: if doubling the z resolution moves the result by
/// more than this relative amount, the integral is reported as not converged.
const CONVERGENCE_REL_TOL: f64 = 5e-3;

/// Elliptical pump beam. `orientation_rad` is the angle of the major axis
/// measured from the walk-off direction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussianBeam {
    pub waist_major_um: f64,
    pub waist_minor_um: f64,
    pub orientation_rad: f64,
    pub wavelength_nm: f64,
    /// Waist location along the crystal; unused by the collimated model but
    /// kept as part of the beam description.
    pub waist_position_mm: f64,
}

impl GaussianBeam {
    pub fn circular(waist_um: f64, wavelength_nm: f64) -> Self {
        GaussianBeam {
            waist_major_um: waist_um,
            waist_minor_um: waist_um,
            orientation_rad: 0.0,
            wavelength_nm,
            waist_position_mm: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.waist_minor_um > 0.0 && self.waist_major_um >= self.waist_minor_um) {
            return Err(Error::Domain(format!(
                "pump waists must satisfy major >= minor > 0, got ({}, {})",
                self.waist_major_um, self.waist_minor_um
            )));
        }
        Ok(())
    }
}

/// Circular collection mode (signal and idler assumed identical and
/// co-centered: both couple into the same fiber before splitting).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CollectionMode {
    pub waist_um: f64,
    pub wavelength_nm: f64,
}

impl CollectionMode {
    fn validate(&self) -> Result<()> {
        if self.waist_um > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain("collection waist must be > 0".into()))
        }
    }
}

/// Crystal length and pump walk-off.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OverlapGeometry {
    pub crystal_length_mm: f64,
    pub walkoff_angle_rad: f64,
    /// Lab angle of the walk-off direction; only the pump orientation
    /// relative to it matters.
    pub walkoff_direction_rad: f64,
}

impl OverlapGeometry {
    fn validate(&self) -> Result<()> {
        if self.crystal_length_mm > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain("crystal length must be > 0".into()))
        }
    }
}

/// Lateral pump displacement after propagating a distance z: z·tan ρ, µm.
/// Zero at the entry face, linear in z.
pub fn walkoff_displacement_um(walkoff_angle_rad: f64, z_mm: f64) -> f64 {
    z_mm * 1e3 * walkoff_angle_rad.tan()
}

/// |A|² for one configuration, `z_slices` Simpson samples (rounded up to
/// odd). Errors if doubling the z resolution still moves the result.
pub fn relative_brightness(
    pump: &GaussianBeam,
    collection: &CollectionMode,
    geometry: &OverlapGeometry,
    z_slices: usize,
) -> Result<f64> {
    pump.validate()?;
    collection.validate()?;
    geometry.validate()?;
    let n = if z_slices % 2 == 0 { z_slices + 1 } else { z_slices.max(3) };
    let coarse = overlap_amplitude(pump, collection, geometry, n);
    let fine = overlap_amplitude(pump, collection, geometry, 2 * n - 1);
    let rel = if fine == 0.0 {
        0.0
    } else {
        ((coarse - fine) / fine).abs()
    };
    if rel > CONVERGENCE_REL_TOL {
        return Err(Error::Discretization {
            rel_change: rel,
            suggested_slices: 4 * n,
        });
    }
    Ok(fine * fine)
}

/// Transverse overlap, closed form per slice. The pump quadratic form is
/// M = R diag(1/w_maj², 1/w_min²) Rᵀ in (walk-off, perpendicular) coordinates;
/// the two collection modes contribute a·I with a = 2/w_c². Each slice is
///
///   ∬ e^{−(r−d)ᵀ M (r−d) − a rᵀ r} d²r = π/√det(M + aI) · e^{−dᵀ Q d},
///   Q = M − M (M + aI)⁻¹ M,
///
/// with d the walk-off displacement measured from the crystal mid-plane.
fn overlap_amplitude(
    pump: &GaussianBeam,
    collection: &CollectionMode,
    geometry: &OverlapGeometry,
    z_slices: usize,
) -> f64 {
    // pump orientation relative to walk-off is all that matters
    let (s, c) = pump.orientation_rad.sin_cos();
    let inv_maj = 1.0 / (pump.waist_major_um * pump.waist_major_um);
    let inv_min = 1.0 / (pump.waist_minor_um * pump.waist_minor_um);
    // M = R diag R^T
    let mxx = c * c * inv_maj + s * s * inv_min;
    let myy = s * s * inv_maj + c * c * inv_min;
    let mxy = c * s * (inv_maj - inv_min);

    let a = 2.0 / (collection.waist_um * collection.waist_um);

    // (M + aI)⁻¹
    let det = (mxx + a) * (myy + a) - mxy * mxy;
    let ixx = (myy + a) / det;
    let iyy = (mxx + a) / det;
    let ixy = -mxy / det;

    // Q = M − M (M+aI)⁻¹ M; displacement is along the x axis of this frame,
    // so only Q_xx enters
    let mi_xx = mxx * ixx + mxy * ixy;
    let mi_xy = mxx * ixy + mxy * iyy;
    let q_xx = mxx - (mi_xx * mxx + mi_xy * mxy);

    let prefactor = std::f64::consts::PI / det.sqrt()
        / (pump.waist_major_um * pump.waist_minor_um).sqrt()
        * (2.0 / (std::f64::consts::PI * collection.waist_um * collection.waist_um));

    let length_um = geometry.crystal_length_mm * 1e3;
    let tan_rho = geometry.walkoff_angle_rad.tan();
    let h = length_um / (z_slices - 1) as f64;
    let mut sum = 0.0;
    for k in 0..z_slices {
        let z = k as f64 * h;
        // displacement relative to the mid-plane alignment
        let d = (z - 0.5 * length_um) * tan_rho;
        let val = (-q_xx * d * d).exp();
        let w = if k == 0 || k == z_slices - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * val;
    }
    prefactor * sum * h / 3.0
}

/// Brightness per pump orientation, each normalized to a circular pump of
/// the same major waist (the circular reference).
pub fn orientation_scan(
    aspect_ratio: f64,
    major_waist_um: f64,
    orientations_rad: &[f64],
    collection: &CollectionMode,
    geometry: &OverlapGeometry,
    z_slices: usize,
) -> Result<Vec<(f64, f64)>> {
    if aspect_ratio < 1.0 {
        return Err(Error::Domain(format!(
            "aspect ratio must be >= 1, got {aspect_ratio}"
        )));
    }
    let reference = relative_brightness(
        &GaussianBeam::circular(major_waist_um, 405.0),
        collection,
        geometry,
        z_slices,
    )?;
    orientations_rad
        .iter()
        .map(|&orientation_rad| {
            let pump = GaussianBeam {
                waist_major_um: major_waist_um,
                waist_minor_um: major_waist_um / aspect_ratio,
                orientation_rad,
                wavelength_nm: 405.0,
                waist_position_mm: 0.5 * geometry.crystal_length_mm,
            };
            let b = relative_brightness(&pump, collection, geometry, z_slices)?;
            Ok((orientation_rad, b / reference))
        })
        .collect()
}
