//! The ordered birefringent element stack and its phase budget.
//!
//! The source is a pair of parallel-axis downconversion crystals separated by
//! an achromatic half-wave plate, followed by a temporal compensator whose
//! optic axis is rotated 90° about the beam with respect to the crystal axes.
//! Pairs born in crystal 1 exit vertically polarized after the rotation;
//! pairs born in crystal 2 exit horizontally polarized. The phase difference
//! between the two generation amplitudes,
//!
//! ```text
//! Δφ = Σ φ(V branch) − Σ φ(H branch),     φ = 2π L n / λ  per element,
//! ```
//!
//! is evaluated per photon with the axis each branch sees in each element:
//! a pair born in crystal 1 is ordinary in its birth crystal, extraordinary
//! in crystal 2, and ordinary in the 90°-rotated compensator; a pair born in
//! crystal 2 is ordinary there and extraordinary in the compensator (the
//! rotation swaps e and o). The pump contribution to the H branch is a
//! wavelength-independent constant for a narrowband pump and is dropped by
//! default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{Axis, MaterialDb, MaterialId, Wavelength};

const TAU: f64 = std::f64::consts::TAU;

/// Orientation of an element's optic axis relative to the downconversion
/// crystals: in their plane (vertical), or rotated 90° about the beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisOrientation {
    ParallelToBbo,
    Rotated90,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementRole {
    Downconverter,
    Compensator,
}

/// One bulk birefringent element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackElement {
    pub material: MaterialId,
    pub length_mm: f64,
    pub orientation: AxisOrientation,
    /// Angle between optic axis and beam axis, radians.
    pub cut_angle_rad: f64,
    pub role: ElementRole,
}

impl StackElement {
    fn validate(&self) -> Result<()> {
        if !(self.length_mm >= 0.0 && self.length_mm.is_finite()) {
            return Err(Error::Domain(format!(
                "element length must be >= 0 mm, got {}",
                self.length_mm
            )));
        }
        if self.role == ElementRole::Compensator && self.orientation != AxisOrientation::Rotated90 {
            return Err(Error::Domain(
                "a compensator must be rotated 90° with respect to the crystal axes".into(),
            ));
        }
        Ok(())
    }

    /// Unit optic-axis direction in beam coordinates
    /// (x: horizontal, y: vertical, z: propagation).
    fn axis_direction(&self) -> [f64; 3] {
        let (s, c) = self.cut_angle_rad.sin_cos();
        match self.orientation {
            AxisOrientation::ParallelToBbo => [0.0, s, c],
            AxisOrientation::Rotated90 => [s, 0.0, c],
        }
    }
}

/// Achromatic half-wave plate: crossed quartz and MgF₂ plates with axes at
/// ±45° to the crystal plane.
///
/// A photon rotated by the plate is in an equal superposition of each plate's
/// eigenaxes, so it acquires the mean of the ordinary and extraordinary phase
/// per plate (the retarder's global phase; the residual ±π/2 from the rotation
/// itself is wavelength-independent and absorbed into the constant offset).
///
/// The default lengths come from a two-condition solve, reproduced by
/// [`crate::compensator::calibrate_hwp`]: net retardance of −λ/2 at the
/// degenerate wavelength 810 nm, and a compensator intercept (the YVO₄ length
/// that flattens the half-wave plate dispersion alone) of 0.52 mm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HwpModel {
    pub quartz_mm: f64,
    pub mgf2_mm: f64,
}

impl Default for HwpModel {
    fn default() -> Self {
        HwpModel {
            quartz_mm: DEFAULT_HWP_QUARTZ_MM,
            mgf2_mm: DEFAULT_HWP_MGF2_MM,
        }
    }
}

/// Calibrated achromat plate lengths (see [`HwpModel`] docs).
pub const DEFAULT_HWP_QUARTZ_MM: f64 = 1.156811;
pub const DEFAULT_HWP_MGF2_MM: f64 = 0.914760;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const HWP_QUARTZ_AXIS: [f64; 3] = [INV_SQRT2, INV_SQRT2, 0.0];
const HWP_MGF2_AXIS: [f64; 3] = [INV_SQRT2, -INV_SQRT2, 0.0];

impl HwpModel {
    fn validate(&self) -> Result<()> {
        if self.quartz_mm < 0.0 || self.mgf2_mm < 0.0 {
            return Err(Error::Domain("half-wave plate lengths must be >= 0".into()));
        }
        Ok(())
    }

    /// Net retardance in waves at λ: (Δn_quartz L_q − Δn_MgF₂ L_m)/λ.
    /// Negative values mean the MgF₂ plate dominates.
    pub fn retardance_waves(&self, db: &MaterialDb, lambda: Wavelength) -> Result<f64> {
        let dq = db.refractive_index(MaterialId::Quartz, Axis::Extraordinary, lambda)?
            - db.refractive_index(MaterialId::Quartz, Axis::Ordinary, lambda)?;
        let dm = db.refractive_index(MaterialId::Mgf2, Axis::Extraordinary, lambda)?
            - db.refractive_index(MaterialId::Mgf2, Axis::Ordinary, lambda)?;
        Ok((dq * self.quartz_mm - dm * self.mgf2_mm) * 1e6 / lambda.nm())
    }

    /// Check |retardance| is an odd multiple of λ/2 at both wavelengths,
    /// within `tol_waves`.
    pub fn validate_half_wave(
        &self,
        db: &MaterialDb,
        signal: Wavelength,
        idler: Wavelength,
        tol_waves: f64,
    ) -> Result<()> {
        for lambda in [signal, idler] {
            let r = self.retardance_waves(db, lambda)?;
            // distance from |r| to the nearest odd multiple of a half wave
            let dist_half = (r.abs() - (r.abs() - 0.5).round() - 0.5).abs();
            if dist_half > tol_waves {
                return Err(Error::Domain(format!(
                    "half-wave plate retardance at {} nm is {r:.4} waves, \
                     {dist_half:.4} waves away from half-wave (tolerance {tol_waves})",
                    lambda.nm()
                )));
            }
        }
        Ok(())
    }

    /// Mean o/e phase across both plates for a photon traversing along `ray`.
    fn phase_along(&self, db: &MaterialDb, lambda: Wavelength, ray: Ray) -> Result<f64> {
        let mut phase = 0.0;
        for (length_mm, material, axis_dir) in [
            (self.quartz_mm, MaterialId::Quartz, HWP_QUARTZ_AXIS),
            (self.mgf2_mm, MaterialId::Mgf2, HWP_MGF2_AXIS),
        ] {
            let po = bulk_phase(db, material, length_mm, lambda, Axis::Ordinary, axis_dir, ray)?;
            let pe = bulk_phase(
                db,
                material,
                length_mm,
                lambda,
                Axis::Extraordinary,
                axis_dir,
                ray,
            )?;
            phase += 0.5 * (po + pe);
        }
        Ok(phase)
    }
}

/// Free-space emission direction of the signal photon; the idler leaves with
/// the opposite transverse wavevector (k⊥ conservation for a collinear pump),
/// so its transverse sines are −(λ_i/λ_s) times the signal's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionAngles {
    pub azimuthal_rad: f64,
    pub polar_rad: f64,
}

impl EmissionAngles {
    pub const COLLINEAR: EmissionAngles = EmissionAngles {
        azimuthal_rad: 0.0,
        polar_rad: 0.0,
    };
}

/// External propagation direction as transverse sines (sx, sy) plus the
/// longitudinal component.
#[derive(Debug, Clone, Copy)]
struct Ray {
    sx: f64,
    sy: f64,
}

impl Ray {
    fn from_angles(a: EmissionAngles) -> Result<Ray> {
        let (sx, sy) = (a.azimuthal_rad.sin(), a.polar_rad.sin());
        if sx * sx + sy * sy >= 1.0 {
            return Err(Error::Domain(format!(
                "emission angles ({}, {}) rad exceed the forward hemisphere",
                a.azimuthal_rad, a.polar_rad
            )));
        }
        Ok(Ray { sx, sy })
    }

    fn conjugate(self, scale: f64) -> Result<Ray> {
        let ray = Ray {
            sx: -scale * self.sx,
            sy: -scale * self.sy,
        };
        if ray.sx * ray.sx + ray.sy * ray.sy >= 1.0 {
            return Err(Error::Domain(
                "conjugate emission direction exceeds the forward hemisphere".into(),
            ));
        }
        Ok(ray)
    }

    fn sin_external(self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy).sqrt()
    }

    /// Direction cosines of the refracted ray for internal sine s_int,
    /// keeping the transverse orientation.
    fn internal_direction(self, sin_int: f64) -> [f64; 3] {
        let s_ext = self.sin_external();
        if s_ext == 0.0 {
            return [0.0, 0.0, 1.0];
        }
        let scale = sin_int / s_ext;
        let (dx, dy) = (self.sx * scale, self.sy * scale);
        [dx, dy, (1.0 - dx * dx - dy * dy).sqrt()]
    }
}

/// Phase through one bulk element along a refracted ray:
/// φ = 2π n L / (λ cos θ_int), with the extraordinary index evaluated at the
/// angle between the refracted ray and the optic axis (self-consistently,
/// since that angle itself depends on the index).
fn bulk_phase(
    db: &MaterialDb,
    material: MaterialId,
    length_mm: f64,
    lambda: Wavelength,
    axis: Axis,
    axis_dir: [f64; 3],
    ray: Ray,
) -> Result<f64> {
    if length_mm == 0.0 {
        return Ok(0.0);
    }
    let s_ext = ray.sin_external();
    let n = match axis {
        Axis::Ordinary => db.refractive_index(material, Axis::Ordinary, lambda)?,
        Axis::Extraordinary => {
            // fixed point n ↦ n_e(angle(n)); converges in a few steps because
            // the index varies weakly over refraction-scale angle changes
            let mut n = db.refractive_index(material, Axis::Ordinary, lambda)?;
            for _ in 0..64 {
                let d = ray.internal_direction(s_ext / n);
                let cos_axis = d[0] * axis_dir[0] + d[1] * axis_dir[1] + d[2] * axis_dir[2];
                let theta = cos_axis.clamp(-1.0, 1.0).acos();
                let next = db.extraordinary_index_at_angle(material, theta, lambda)?;
                if (next - n).abs() < 1e-14 {
                    n = next;
                    break;
                }
                n = next;
            }
            n
        }
    };
    let sin_int = s_ext / n;
    let cos_int = (1.0 - sin_int * sin_int).sqrt();
    Ok(TAU * n * length_mm * 1e6 / (lambda.nm() * cos_int))
}

/// Phase through an element for a ray tilted by `internal_angle` in the plane
/// of the element's optic axis. The path length grows as L/cos θ and the
/// extraordinary index follows the ray-to-axis angle.
pub fn element_phase(
    db: &MaterialDb,
    element: &StackElement,
    lambda: Wavelength,
    axis: Axis,
    internal_angle: f64,
) -> Result<f64> {
    if internal_angle.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::Domain(format!(
            "internal angle {internal_angle} rad must lie in (-π/2, π/2)"
        )));
    }
    let n = match axis {
        Axis::Ordinary => db.refractive_index(element.material, Axis::Ordinary, lambda)?,
        Axis::Extraordinary => {
            let theta = match element.orientation {
                // ray in the axis plane: tilting by +θ closes on the axis
                AxisOrientation::ParallelToBbo | AxisOrientation::Rotated90 => {
                    element.cut_angle_rad - internal_angle
                }
            };
            db.extraordinary_index_at_angle(element.material, theta, lambda)?
        }
    };
    Ok(TAU * n * element.length_mm * 1e6 / (lambda.nm() * internal_angle.cos()))
}

/// Which pair-generation amplitude a path belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Pair born in crystal 1; exits vertically polarized.
    Vertical,
    /// Pair born in crystal 2; exits horizontally polarized.
    Horizontal,
}

/// One traversal segment of a branch: a bulk element seen on a definite axis,
/// or the half-wave plate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSegment {
    Element { index: usize, axis: Axis },
    Hwp,
}

/// Ordered segments one pair (or the pump) traverses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchPath {
    pub segments: Vec<PathSegment>,
}

/// Stack state for the Δφ evaluation: elements in beam order, plus the
/// per-branch axis assignments.
#[derive(Debug, Clone)]
pub struct CrystalStack {
    pub elements: Vec<StackElement>,
    pub hwp: HwpModel,
    pub v_branch: BranchPath,
    pub h_branch: BranchPath,
    /// Pump segments belonging to the H amplitude (pair born in crystal 2:
    /// its pump traversed crystal 1 and the half-wave plate first).
    pub pump_path: BranchPath,
    /// Include the pump phase in the H branch. Off by default: a narrowband
    /// pump contributes a constant, not dispersion.
    pub include_pump_terms: bool,
    pub pump: Wavelength,
}

impl CrystalStack {
    /// The parallel-crystal source: crystal 1 → HWP → crystal 2 → compensator,
    /// with the e/o assignments described in the module docs.
    pub fn parallel_source(
        pump: Wavelength,
        bbo_length_mm: f64,
        cut_angle_rad: f64,
        yvo_length_mm: f64,
        hwp: HwpModel,
    ) -> Result<CrystalStack> {
        let bbo = |length_mm: f64| StackElement {
            material: MaterialId::Bbo,
            length_mm,
            orientation: AxisOrientation::ParallelToBbo,
            cut_angle_rad,
            role: ElementRole::Downconverter,
        };
        let compensator = StackElement {
            material: MaterialId::Yvo4,
            length_mm: yvo_length_mm,
            orientation: AxisOrientation::Rotated90,
            cut_angle_rad: std::f64::consts::FRAC_PI_2,
            role: ElementRole::Compensator,
        };
        let stack = CrystalStack {
            elements: vec![bbo(bbo_length_mm), bbo(bbo_length_mm), compensator],
            hwp,
            v_branch: BranchPath {
                segments: vec![
                    PathSegment::Element { index: 0, axis: Axis::Ordinary },
                    PathSegment::Hwp,
                    PathSegment::Element { index: 1, axis: Axis::Extraordinary },
                    PathSegment::Element { index: 2, axis: Axis::Ordinary },
                ],
            },
            h_branch: BranchPath {
                segments: vec![
                    PathSegment::Element { index: 1, axis: Axis::Ordinary },
                    PathSegment::Element { index: 2, axis: Axis::Extraordinary },
                ],
            },
            pump_path: BranchPath {
                segments: vec![
                    PathSegment::Element { index: 0, axis: Axis::Extraordinary },
                    PathSegment::Hwp,
                ],
            },
            include_pump_terms: false,
            pump,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        for el in &self.elements {
            el.validate()?;
        }
        self.hwp.validate()?;
        for path in [&self.v_branch, &self.h_branch, &self.pump_path] {
            for seg in &path.segments {
                if let PathSegment::Element { index, .. } = seg {
                    if *index >= self.elements.len() {
                        return Err(Error::Domain(format!(
                            "branch path references element {index}, stack has {}",
                            self.elements.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Compensator length, when the stack has one.
    pub fn compensator_length_mm(&self) -> Option<f64> {
        self.elements
            .iter()
            .find(|e| e.role == ElementRole::Compensator)
            .map(|e| e.length_mm)
    }

    pub fn set_compensator_length_mm(&mut self, length_mm: f64) {
        for el in &mut self.elements {
            if el.role == ElementRole::Compensator {
                el.length_mm = length_mm;
            }
        }
    }

    /// Swap the roles of the two branches (pump terms keep their side).
    /// Negates Δφ when pump terms are off.
    pub fn with_swapped_branches(mut self) -> CrystalStack {
        std::mem::swap(&mut self.v_branch, &mut self.h_branch);
        self
    }

    /// Accumulated phase of one photon of wavelength λ along a branch path,
    /// for the external ray direction.
    fn branch_photon_phase(
        &self,
        db: &MaterialDb,
        path: &BranchPath,
        lambda: Wavelength,
        ray: Ray,
    ) -> Result<f64> {
        let mut phase = 0.0;
        for seg in &path.segments {
            phase += match *seg {
                PathSegment::Hwp => self.hwp.phase_along(db, lambda, ray)?,
                PathSegment::Element { index, axis } => {
                    let el = &self.elements[index];
                    bulk_phase(
                        db,
                        el.material,
                        el.length_mm,
                        lambda,
                        axis,
                        el.axis_direction(),
                        ray,
                    )?
                }
            };
        }
        Ok(phase)
    }

    /// Contribution of a single element to Δφ (V-branch sum minus H-branch
    /// sum), collinear. Exposes the sign structure of the stack.
    pub fn element_contribution(
        &self,
        db: &MaterialDb,
        index: usize,
        signal: Wavelength,
        idler: Wavelength,
    ) -> Result<f64> {
        let ray = Ray { sx: 0.0, sy: 0.0 };
        let el = &self.elements[index];
        let mut total = 0.0;
        for (path, sign) in [(&self.v_branch, 1.0), (&self.h_branch, -1.0)] {
            for seg in &path.segments {
                if let PathSegment::Element { index: i, axis } = *seg {
                    if i == index {
                        for lambda in [signal, idler] {
                            total += sign
                                * bulk_phase(
                                    db,
                                    el.material,
                                    el.length_mm,
                                    lambda,
                                    axis,
                                    el.axis_direction(),
                                    ray,
                                )?;
                        }
                    }
                }
            }
        }
        Ok(total)
    }
}

/// Unwrapped phase difference between the two generation amplitudes, radians
/// on the real line (not reduced mod 2π).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseDifference(pub f64);

impl PhaseDifference {
    pub fn rad(self) -> f64 {
        self.0
    }
}

/// Add a constant offset (crystal tilt): dials the target Bell state without
/// touching the dispersion.
pub fn with_phase_offset(delta_phi: PhaseDifference, offset_rad: f64) -> PhaseDifference {
    PhaseDifference(delta_phi.0 + offset_rad)
}

/// Total phase difference Δφ between the V and H generation amplitudes for a
/// signal/idler pair, optionally at non-collinear emission angles (the signal
/// direction; the idler takes the conjugate transverse direction).
pub fn total_phase_difference(
    db: &MaterialDb,
    stack: &CrystalStack,
    signal: Wavelength,
    idler: Wavelength,
    angles: Option<EmissionAngles>,
) -> Result<PhaseDifference> {
    let signal_ray = Ray::from_angles(angles.unwrap_or(EmissionAngles::COLLINEAR))?;
    let idler_ray = signal_ray.conjugate(idler.nm() / signal.nm())?;

    let mut delta = 0.0;
    for (lambda, ray) in [(signal, signal_ray), (idler, idler_ray)] {
        delta += stack.branch_photon_phase(db, &stack.v_branch, lambda, ray)?;
        delta -= stack.branch_photon_phase(db, &stack.h_branch, lambda, ray)?;
    }
    if stack.include_pump_terms {
        let pump_ray = Ray { sx: 0.0, sy: 0.0 };
        delta -= stack.branch_photon_phase(db, &stack.pump_path, stack.pump, pump_ray)?;
    }
    Ok(PhaseDifference(delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::idler_wavelength;

    fn db() -> &'static MaterialDb {
        MaterialDb::builtin()
    }

    fn nm(x: f64) -> Wavelength {
        Wavelength::new(x).unwrap()
    }

    fn default_stack(bbo_mm: f64, yvo_mm: f64) -> CrystalStack {
        let pump = nm(405.0);
        let signal = nm(760.0);
        let idler = idler_wavelength(pump, signal).unwrap();
        let cut = db()
            .type_one_cut_angle(MaterialId::Bbo, pump, signal, idler)
            .unwrap();
        CrystalStack::parallel_source(pump, bbo_mm, cut, yvo_mm, HwpModel::default()).unwrap()
    }

    fn pair() -> (Wavelength, Wavelength) {
        let signal = nm(760.0);
        (signal, idler_wavelength(nm(405.0), signal).unwrap())
    }

    #[test]
    fn element_phase_zero_length_is_zero() {
        let mut el = default_stack(6.0, 3.6).elements[0].clone();
        el.length_mm = 0.0;
        let p = element_phase(db(), &el, nm(810.0), Axis::Ordinary, 0.0).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn element_phase_matches_direct_arithmetic_at_normal_incidence() {
        let el = default_stack(6.0, 3.6).elements[0].clone();
        let lambda = nm(810.0);
        let n_o = db()
            .refractive_index(MaterialId::Bbo, Axis::Ordinary, lambda)
            .unwrap();
        let expected = std::f64::consts::TAU * 6.0e6 * n_o / 810.0;
        let p = element_phase(db(), &el, lambda, Axis::Ordinary, 0.0).unwrap();
        assert!((p - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn tilting_lengthens_the_ordinary_path() {
        let el = default_stack(6.0, 3.6).elements[0].clone();
        let straight = element_phase(db(), &el, nm(810.0), Axis::Ordinary, 0.0).unwrap();
        let tilted = element_phase(db(), &el, nm(810.0), Axis::Ordinary, 0.1).unwrap();
        assert!(tilted > straight);
    }

    #[test]
    fn zero_length_stack_has_zero_phase_difference() {
        let mut stack = default_stack(0.0, 0.0);
        stack.hwp = HwpModel { quartz_mm: 0.0, mgf2_mm: 0.0 };
        let (s, i) = pair();
        let d = total_phase_difference(db(), &stack, s, i, None).unwrap();
        assert_eq!(d.rad(), 0.0);
    }

    #[test]
    fn swapping_branches_negates_delta_phi() {
        let stack = default_stack(6.0, 3.6);
        let (s, i) = pair();
        let d = total_phase_difference(db(), &stack, s, i, None).unwrap();
        let swapped = stack.with_swapped_branches();
        let d_neg = total_phase_difference(db(), &swapped, s, i, None).unwrap();
        assert!((d.rad() + d_neg.rad()).abs() < 1e-9 * d.rad().abs());
    }

    #[test]
    fn delta_phi_additive_in_lengths() {
        let stack1 = default_stack(3.0, 1.8);
        let mut stack2 = default_stack(6.0, 3.6);
        stack2.hwp = HwpModel {
            quartz_mm: 2.0 * stack1.hwp.quartz_mm,
            mgf2_mm: 2.0 * stack1.hwp.mgf2_mm,
        };
        let (s, i) = pair();
        let d1 = total_phase_difference(db(), &stack1, s, i, None).unwrap();
        let d2 = total_phase_difference(db(), &stack2, s, i, None).unwrap();
        assert!((d2.rad() - 2.0 * d1.rad()).abs() < 1e-8 * d2.rad().abs());
    }

    #[test]
    fn signal_idler_exchange_symmetric_at_degeneracy() {
        let stack = default_stack(6.0, 3.6);
        let degenerate = nm(810.0);
        let a = total_phase_difference(db(), &stack, degenerate, degenerate, None).unwrap();
        // non-degenerate: swap roles, same value (every element acts on both photons)
        let (s, i) = pair();
        let fwd = total_phase_difference(db(), &stack, s, i, None).unwrap();
        let rev = total_phase_difference(db(), &stack, i, s, None).unwrap();
        assert!((fwd.rad() - rev.rad()).abs() < 1e-9 * fwd.rad().abs());
        assert!(a.rad().is_finite());
    }

    #[test]
    fn compensator_signs_oppose_between_branches() {
        let stack = default_stack(6.0, 3.6);
        let (s, i) = pair();
        // V branch sees the compensator as ordinary (+), H branch as
        // extraordinary (−); YVO₄ is positive uniaxial so the net is negative
        let contrib = stack.element_contribution(db(), 2, s, i).unwrap();
        assert!(contrib < 0.0);

        // partial sums per branch have opposite sign in Δφ by construction
        let mut v_only = stack.clone();
        v_only.h_branch = BranchPath { segments: vec![] };
        let mut h_only = stack.clone();
        h_only.v_branch = BranchPath { segments: vec![] };
        let v = v_only.element_contribution(db(), 2, s, i).unwrap();
        let h = h_only.element_contribution(db(), 2, s, i).unwrap();
        assert!(v > 0.0 && h < 0.0);
    }

    #[test]
    fn phase_offset_is_additive() {
        let x = PhaseDifference(1.25);
        assert_eq!(with_phase_offset(x, 0.0).rad(), 1.25);
        assert_eq!(with_phase_offset(x, TAU).rad(), 1.25 + TAU);
        assert_eq!(with_phase_offset(PhaseDifference(0.0), std::f64::consts::PI).rad(),
                   std::f64::consts::PI);
    }

    #[test]
    fn default_hwp_is_half_wave_at_both_photon_wavelengths() {
        let (s, i) = pair();
        let hwp = HwpModel::default();
        hwp.validate_half_wave(db(), s, i, 0.05).unwrap();
        // and clearly not half-wave if one plate is removed
        let broken = HwpModel { quartz_mm: hwp.quartz_mm, mgf2_mm: 0.0 };
        assert!(broken.validate_half_wave(db(), s, i, 0.05).is_err());
    }

    #[test]
    fn compensator_must_be_rotated() {
        let pump = nm(405.0);
        let mut stack = default_stack(6.0, 3.6);
        stack.elements[2].orientation = AxisOrientation::ParallelToBbo;
        assert!(stack.validate().is_err());
        let _ = pump;
    }

    #[test]
    fn collinear_angles_equal_none() {
        let stack = default_stack(6.0, 3.6);
        let (s, i) = pair();
        let a = total_phase_difference(db(), &stack, s, i, None).unwrap();
        let b = total_phase_difference(db(), &stack, s, i, Some(EmissionAngles::COLLINEAR)).unwrap();
        assert_eq!(a.rad(), b.rad());
    }
}
