//! Angle-resolved phase maps and angular acceptance filtering.
//!
//! Pairs emitted off-axis traverse more material and see angle-shifted
//! extraordinary indices, so Δφ grows away from the collinear direction.
//! The map samples Δφ over a grid of azimuthal × polar free-space signal
//! angles (idler slaved to the conjugate direction). A disc of approximately
//! constant phase — the flat region — bounds how far the collection can be
//! opened before angular dephasing mixes the state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaterialDb, Wavelength};
use crate::stack::{total_phase_difference, CrystalStack, EmissionAngles};
use crate::state::PhasorEnsemble;

/// Default flat-region tolerance, rad. Keeps the disc coherence
/// |⟨e^{iΔφ}⟩| above ~0.99.
pub const DEFAULT_FLAT_TOLERANCE_RAD: f64 = std::f64::consts::PI / 10.0;

/// Symmetric grid of free-space emission angles, `resolution` samples per
/// axis spanning ±max extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub max_azimuthal_rad: f64,
    pub max_polar_rad: f64,
    pub resolution: usize,
}

impl AngularGrid {
    pub fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(self.max_azimuthal_rad > 0.0 && self.max_azimuthal_rad < half_pi)
            || !(self.max_polar_rad > 0.0 && self.max_polar_rad < half_pi)
        {
            return Err(Error::Domain(
                "grid extents must lie in (0, π/2)".into(),
            ));
        }
        if self.resolution < 2 {
            return Err(Error::Domain("grid resolution must be >= 2".into()));
        }
        Ok(())
    }

    pub fn azimuth_at(&self, j: usize) -> f64 {
        lerp_axis(self.max_azimuthal_rad, self.resolution, j)
    }

    pub fn polar_at(&self, i: usize) -> f64 {
        lerp_axis(self.max_polar_rad, self.resolution, i)
    }

    pub fn azimuth_step(&self) -> f64 {
        2.0 * self.max_azimuthal_rad / (self.resolution - 1) as f64
    }

    pub fn polar_step(&self) -> f64 {
        2.0 * self.max_polar_rad / (self.resolution - 1) as f64
    }
}

fn lerp_axis(max: f64, resolution: usize, k: usize) -> f64 {
    -max + 2.0 * max * k as f64 / (resolution - 1) as f64
}

/// Δφ sampled over an [`AngularGrid`]. Row-major: `values[i * res + j]` is
/// polar index `i`, azimuth index `j`. Phases are unwrapped.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    pub grid: AngularGrid,
    pub values: Vec<f64>,
    /// Collinear Δφ; equals the central sample on odd-resolution grids.
    pub center_value: f64,
}

impl PhaseMap {
    pub fn value(&self, polar_idx: usize, azimuth_idx: usize) -> f64 {
        self.values[polar_idx * self.grid.resolution + azimuth_idx]
    }
}

/// Largest disc around `center` over which |Δφ − Δφ_center| stays within
/// `tolerance_rad` at every grid point inside the disc.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlatRegion {
    /// (azimuthal, polar), rad.
    pub center: (f64, f64),
    pub radius_rad: f64,
    pub tolerance_rad: f64,
    /// Δφ at the disc center.
    pub center_phase: f64,
}

/// Angular acceptance of the collection system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcceptanceSpec {
    /// Every grid point is collected.
    Full,
    /// Free-space aperture of the given angular radius.
    Aperture { radius_rad: f64 },
    /// Multimode fiber behind a coupling lens; accepted angular radius is
    /// min(NA, core_radius / focal_length) — the geometric coupling bound.
    Fiber {
        core_diameter_um: f64,
        numerical_aperture: f64,
        focal_length_mm: f64,
    },
}

impl AcceptanceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AcceptanceSpec::Full => Ok(()),
            AcceptanceSpec::Aperture { radius_rad } => {
                if radius_rad > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Domain("aperture radius must be > 0".into()))
                }
            }
            AcceptanceSpec::Fiber {
                core_diameter_um,
                numerical_aperture,
                focal_length_mm,
            } => {
                if core_diameter_um <= 0.0 || focal_length_mm <= 0.0 {
                    Err(Error::Domain("fiber core and focal length must be > 0".into()))
                } else if !(numerical_aperture > 0.0 && numerical_aperture < 1.0) {
                    Err(Error::Domain("fiber NA must lie in (0, 1)".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Accepted angular radius, rad; `None` for full acceptance.
    pub fn angular_radius(&self) -> Option<f64> {
        match *self {
            AcceptanceSpec::Full => None,
            AcceptanceSpec::Aperture { radius_rad } => Some(radius_rad),
            AcceptanceSpec::Fiber {
                core_diameter_um,
                numerical_aperture,
                focal_length_mm,
            } => {
                let core_radius_mm = 0.5 * core_diameter_um * 1e-3;
                Some(numerical_aperture.min(core_radius_mm / focal_length_mm))
            }
        }
    }
}

/// Internal propagation angle after refraction at a crystal face:
/// arcsin(sin θ_ext / n).
pub fn internal_angle(n: f64, theta_external: f64) -> f64 {
    (theta_external.sin() / n).asin()
}

/// Evaluate Δφ over the grid. Grid points are independent and evaluated in
/// parallel; the result is deterministic (row-major order, no reductions).
pub fn phase_map(
    db: &MaterialDb,
    stack: &CrystalStack,
    signal: Wavelength,
    idler: Wavelength,
    grid: AngularGrid,
) -> Result<PhaseMap> {
    grid.validate()?;
    let res = grid.resolution;
    let values: Vec<f64> = (0..res)
        .into_par_iter()
        .flat_map_iter(|i| (0..res).map(move |j| (i, j)))
        .map(|(i, j)| {
            let angles = EmissionAngles {
                azimuthal_rad: grid.azimuth_at(j),
                polar_rad: grid.polar_at(i),
            };
            total_phase_difference(db, stack, signal, idler, Some(angles)).map(|p| p.rad())
        })
        .collect::<Result<_>>()?;
    let center_value = total_phase_difference(db, stack, signal, idler, None)?.rad();
    Ok(PhaseMap {
        grid,
        values,
        center_value,
    })
}

/// Largest flat disc in the map: for every grid point as candidate center,
/// the radius is the distance to the nearest out-of-tolerance point, capped
/// so the disc stays inside the sampled rectangle; the best candidate wins.
/// Ties break toward the lower (polar, azimuth) index, so the result is
/// deterministic. Radius 0 means no disc exists beyond the center itself.
pub fn find_flat_region(map: &PhaseMap, tolerance_rad: f64) -> FlatRegion {
    let res = map.grid.resolution;
    let da = map.grid.azimuth_step();
    let dp = map.grid.polar_step();

    let best = (0..res)
        .into_par_iter()
        .map(|ic| {
            let mut local_best = (f64::NEG_INFINITY, 0usize, 0usize);
            for jc in 0..res {
                let center = map.value(ic, jc);
                // disc must fit inside the sampled rectangle
                let cap_polar = (ic.min(res - 1 - ic)) as f64 * dp;
                let cap_azimuth = (jc.min(res - 1 - jc)) as f64 * da;
                let cap = cap_polar.min(cap_azimuth);
                let mut radius = cap;
                'scan: for i in 0..res {
                    let dy = (i as f64 - ic as f64) * dp;
                    if dy.abs() >= radius {
                        continue;
                    }
                    for j in 0..res {
                        let dx = (j as f64 - jc as f64) * da;
                        let dist = (dx * dx + dy * dy).sqrt();
                        if dist < radius && (map.value(i, j) - center).abs() > tolerance_rad {
                            radius = dist;
                            if radius == 0.0 {
                                break 'scan;
                            }
                        }
                    }
                }
                if radius > local_best.0 {
                    local_best = (radius, ic, jc);
                }
            }
            local_best
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                    b
                } else {
                    a
                }
            },
        );

    let (radius, ic, jc) = best;
    // the binding violator sits exactly at `radius`; shave so the open disc
    // stays violator-free under any equivalent distance arithmetic
    let radius = (radius * (1.0 - 1e-12)).max(0.0);
    FlatRegion {
        center: (map.grid.azimuth_at(jc), map.grid.polar_at(ic)),
        radius_rad: radius,
        tolerance_rad,
        center_phase: map.value(ic, jc),
    }
}

/// Grid indices accepted by `spec`. Aperture-like acceptances are centered on
/// the flat region found at `flat_tolerance_rad` (the aligned operating
/// point); full acceptance keeps everything.
pub fn acceptance_indices(
    map: &PhaseMap,
    spec: &AcceptanceSpec,
    flat_tolerance_rad: f64,
) -> Result<Vec<(usize, usize)>> {
    spec.validate()?;
    let res = map.grid.resolution;
    match spec.angular_radius() {
        None => Ok((0..res).flat_map(|i| (0..res).map(move |j| (i, j))).collect()),
        Some(radius) => {
            let flat = find_flat_region(map, flat_tolerance_rad);
            let (ca, cp) = flat.center;
            let mut out = Vec::new();
            for i in 0..res {
                let dy = map.grid.polar_at(i) - cp;
                for j in 0..res {
                    let dx = map.grid.azimuth_at(j) - ca;
                    if (dx * dx + dy * dy).sqrt() <= radius {
                        out.push((i, j));
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Collapse the accepted part of the map into a phasor ensemble: uniform
/// weight inside the accepted region, zero outside.
pub fn acceptance_weights(
    map: &PhaseMap,
    spec: &AcceptanceSpec,
    flat_tolerance_rad: f64,
) -> Result<PhasorEnsemble> {
    let accepted = acceptance_indices(map, spec, flat_tolerance_rad)?;
    PhasorEnsemble::new(
        accepted
            .into_iter()
            .map(|(i, j)| (map.value(i, j), 1.0))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{idler_wavelength, MaterialDb, MaterialId};
    use crate::stack::HwpModel;

    fn db() -> &'static MaterialDb {
        MaterialDb::builtin()
    }

    fn nm(x: f64) -> Wavelength {
        Wavelength::new(x).unwrap()
    }

    fn source() -> (CrystalStack, Wavelength, Wavelength) {
        let pump = nm(405.0);
        let signal = nm(760.0);
        let idler = idler_wavelength(pump, signal).unwrap();
        let cut = db()
            .type_one_cut_angle(MaterialId::Bbo, pump, signal, idler)
            .unwrap();
        let stack =
            CrystalStack::parallel_source(pump, 6.0, cut, 3.6521, HwpModel::default()).unwrap();
        (stack, signal, idler)
    }

    fn small_grid(res: usize) -> AngularGrid {
        AngularGrid {
            max_azimuthal_rad: 2.0_f64.to_radians(),
            max_polar_rad: 2.0_f64.to_radians(),
            resolution: res,
        }
    }

    fn constant_map(res: usize, value: f64) -> PhaseMap {
        let grid = small_grid(res);
        PhaseMap {
            grid,
            values: vec![value; res * res],
            center_value: value,
        }
    }

    #[test]
    fn internal_angle_examples() {
        assert_eq!(internal_angle(1.66, 0.0), 0.0);
        let expected = (0.2_f64.sin() / 1.66).asin();
        assert!((internal_angle(1.66, 0.2) - expected).abs() < 1e-15);
        // monotone
        assert!(internal_angle(1.66, 0.3) > internal_angle(1.66, 0.2));
    }

    #[test]
    fn map_center_equals_collinear_exactly() {
        let (stack, s, i) = source();
        let map = phase_map(db(), &stack, s, i, small_grid(5)).unwrap();
        assert_eq!(map.value(2, 2), map.center_value);
    }

    #[test]
    fn off_axis_phase_exceeds_center_in_phase_matching_plane() {
        let (stack, s, i) = source();
        let map = phase_map(db(), &stack, s, i, small_grid(9)).unwrap();
        for idx in 0..9 {
            if idx != 4 {
                assert!(
                    map.value(idx, 4) > map.center_value,
                    "polar idx {idx}: {} <= center {}",
                    map.value(idx, 4),
                    map.center_value
                );
            }
        }
    }

    #[test]
    fn constant_map_reaches_grid_extent() {
        let map = constant_map(21, 1.0);
        let flat = find_flat_region(&map, 0.1);
        assert!((flat.radius_rad - map.grid.max_azimuthal_rad).abs() < 1e-12);
        assert_eq!(flat.center, (0.0, 0.0));
    }

    #[test]
    fn violating_point_limits_the_radius() {
        let mut map = constant_map(21, 0.0);
        // poison a point one step right of center
        let res = map.grid.resolution;
        map.values[10 * res + 11] = 10.0;
        let flat = find_flat_region(&map, 0.1);
        if flat.center == (0.0, 0.0) {
            assert!(flat.radius_rad < map.grid.azimuth_step() + 1e-15);
        }
        // wherever the best center lands, the invariant must hold
        assert_flat_invariant(&map, &flat);
    }

    fn assert_flat_invariant(map: &PhaseMap, flat: &FlatRegion) {
        let res = map.grid.resolution;
        for i in 0..res {
            for j in 0..res {
                let dx = map.grid.azimuth_at(j) - flat.center.0;
                let dy = map.grid.polar_at(i) - flat.center.1;
                if (dx * dx + dy * dy).sqrt() < flat.radius_rad {
                    assert!(
                        (map.value(i, j) - flat.center_phase).abs() <= flat.tolerance_rad,
                        "flat-region invariant violated at ({i}, {j})"
                    );
                }
            }
        }
    }

    #[test]
    fn flat_region_self_check_on_real_map() {
        let (stack, s, i) = source();
        let map = phase_map(db(), &stack, s, i, small_grid(61)).unwrap();
        let flat = find_flat_region(&map, DEFAULT_FLAT_TOLERANCE_RAD);
        assert!(flat.radius_rad > 0.0);
        assert_flat_invariant(&map, &flat);
    }

    /// Brute-force disc search (independent oracle for find_flat_region).
    fn brute_force_flat(map: &PhaseMap, tol: f64) -> (f64, usize, usize) {
        let res = map.grid.resolution;
        let da = map.grid.azimuth_step();
        let dp = map.grid.polar_step();
        let mut best = (-1.0, 0, 0);
        for ic in 0..res {
            for jc in 0..res {
                let c = map.value(ic, jc);
                let cap = ((ic.min(res - 1 - ic)) as f64 * dp)
                    .min((jc.min(res - 1 - jc)) as f64 * da);
                let mut r = cap;
                for i in 0..res {
                    for j in 0..res {
                        let dx = (j as f64 - jc as f64) * da;
                        let dy = (i as f64 - ic as f64) * dp;
                        let d = (dx * dx + dy * dy).sqrt();
                        if d < r && (map.value(i, j) - c).abs() > tol {
                            r = d;
                        }
                    }
                }
                if r > best.0 {
                    best = (r, ic, jc);
                }
            }
        }
        best
    }

    #[test]
    fn production_search_matches_brute_force() {
        let (stack, s, i) = source();
        let map = phase_map(db(), &stack, s, i, small_grid(41)).unwrap();
        let flat = find_flat_region(&map, DEFAULT_FLAT_TOLERANCE_RAD);
        let (r, ic, jc) = brute_force_flat(&map, DEFAULT_FLAT_TOLERANCE_RAD);
        assert!((flat.radius_rad - r).abs() < 1e-12);
        assert_eq!(flat.center, (map.grid.azimuth_at(jc), map.grid.polar_at(ic)));
    }

    #[test]
    fn azimuthal_mirror_symmetry_when_axes_lie_in_polar_plane() {
        // strip the ±45° waveplate and use a polar-plane compensator so every
        // optic axis lies in the polar plane
        let pump = nm(405.0);
        let signal = nm(760.0);
        let idler = idler_wavelength(pump, signal).unwrap();
        let cut = db()
            .type_one_cut_angle(MaterialId::Bbo, pump, signal, idler)
            .unwrap();
        let mut stack = CrystalStack::parallel_source(
            pump,
            6.0,
            cut,
            0.0,
            HwpModel { quartz_mm: 0.0, mgf2_mm: 0.0 },
        )
        .unwrap();
        stack.elements[1].cut_angle_rad = cut;
        let map = phase_map(db(), &stack, signal, idler, small_grid(21)).unwrap();
        let res = map.grid.resolution;
        for i in 0..res {
            for j in 0..res {
                let a = map.value(i, j);
                let b = map.value(i, res - 1 - j);
                assert!(
                    (a - b).abs() < 1e-9,
                    "mirror asymmetry {:.3e} at ({i},{j})",
                    (a - b).abs()
                );
            }
        }
    }

    #[test]
    fn shrinking_acceptance_never_increases_spread() {
        let (stack, s, i) = source();
        let map = phase_map(db(), &stack, s, i, small_grid(41)).unwrap();
        let mut prev_spread = f64::INFINITY;
        for radius_deg in [1.5, 1.0, 0.5, 0.25, 0.1] {
            let spec = AcceptanceSpec::Aperture {
                radius_rad: (radius_deg as f64).to_radians(),
            };
            let idx = acceptance_indices(&map, &spec, DEFAULT_FLAT_TOLERANCE_RAD).unwrap();
            let vals: Vec<f64> = idx.iter().map(|&(i, j)| map.value(i, j)).collect();
            let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
                - vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= prev_spread + 1e-12);
            prev_spread = spread;
        }
    }

    #[test]
    fn full_acceptance_weights_every_point() {
        let map = constant_map(11, 2.0);
        let ens = acceptance_weights(&map, &AcceptanceSpec::Full, 0.1).unwrap();
        assert_eq!(ens.len(), 121);
    }

    #[test]
    fn fiber_maps_to_geometric_angular_radius() {
        let spec = AcceptanceSpec::Fiber {
            core_diameter_um: 62.5,
            numerical_aperture: 0.22,
            focal_length_mm: 4.0,
        };
        let r = spec.angular_radius().unwrap();
        assert!((r - 0.5 * 62.5e-3 / 4.0).abs() < 1e-15);
        // a very short focal length is NA-limited instead
        let na_limited = AcceptanceSpec::Fiber {
            core_diameter_um: 62.5,
            numerical_aperture: 0.22,
            focal_length_mm: 0.05,
        };
        assert_eq!(na_limited.angular_radius().unwrap(), 0.22);
    }

    #[test]
    fn grid_refinement_moves_flat_radius_by_less_than_a_coarse_cell() {
        let (stack, s, i) = source();
        let coarse_grid = small_grid(51);
        let coarse = phase_map(db(), &stack, s, i, coarse_grid).unwrap();
        let fine = phase_map(db(), &stack, s, i, small_grid(101)).unwrap();
        let r_c = find_flat_region(&coarse, DEFAULT_FLAT_TOLERANCE_RAD).radius_rad;
        let r_f = find_flat_region(&fine, DEFAULT_FLAT_TOLERANCE_RAD).radius_rad;
        assert!(
            (r_c - r_f).abs() < coarse_grid.azimuth_step(),
            "coarse {r_c}, fine {r_f}, cell {}",
            coarse_grid.azimuth_step()
        );
    }
}
