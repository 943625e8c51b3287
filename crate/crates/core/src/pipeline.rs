//! Glue from the stack model to state quality: combine angular acceptance
//! with the spectral spread into one phasor ensemble, align its mean phase
//! to the target Bell state, and collapse to the density matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anglemap::{acceptance_indices, AcceptanceSpec, PhaseMap};
use crate::error::Result;
use crate::material::{idler_wavelength, MaterialDb, Wavelength};
use crate::stack::{total_phase_difference, CrystalStack, EmissionAngles};
use crate::state::{BellTarget, PhasorEnsemble};

/// Gaussian spectral weight around the signal center wavelength, sampled on
/// a uniform grid spanning ±3σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSpec {
    pub fwhm_nm: f64,
    pub samples: usize,
}

impl Default for SpectralSpec {
    fn default() -> Self {
        SpectralSpec {
            fwhm_nm: 5.0,
            samples: 41,
        }
    }
}

impl SpectralSpec {
    pub fn sigma_nm(&self) -> f64 {
        self.fwhm_nm / (8.0 * std::f64::consts::LN_2).sqrt()
    }

    /// (offset_nm, weight) samples; a single unit sample when the width or
    /// sample count degenerates.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        if self.samples < 2 || self.fwhm_nm <= 0.0 {
            return vec![(0.0, 1.0)];
        }
        let sigma = self.sigma_nm();
        let half_span = 3.0 * sigma;
        (0..self.samples)
            .map(|k| {
                let x = -half_span
                    + 2.0 * half_span * k as f64 / (self.samples - 1) as f64;
                (x, (-0.5 * x * x / (sigma * sigma)).exp())
            })
            .collect()
    }
}

/// Combined spectral × angular ensemble over the accepted grid points. For
/// each spectral offset the signal wavelength shifts, the idler follows by
/// energy conservation, and every accepted emission direction is re-evaluated
/// at the shifted pair; weights are the product of the Gaussian spectral
/// weight and the uniform angular weight.
pub fn spectral_angular_ensemble(
    db: &MaterialDb,
    stack: &CrystalStack,
    signal: Wavelength,
    map: &PhaseMap,
    acceptance: &AcceptanceSpec,
    flat_tolerance_rad: f64,
    spectral: &SpectralSpec,
) -> Result<PhasorEnsemble> {
    let accepted = acceptance_indices(map, acceptance, flat_tolerance_rad)?;
    let angles: Vec<EmissionAngles> = accepted
        .iter()
        .map(|&(i, j)| EmissionAngles {
            azimuthal_rad: map.grid.azimuth_at(j),
            polar_rad: map.grid.polar_at(i),
        })
        .collect();

    let samples: Vec<(f64, f64)> = spectral
        .offsets()
        .into_par_iter()
        .map(|(offset_nm, weight)| -> Result<Vec<(f64, f64)>> {
            let shifted_signal = Wavelength::new(signal.nm() + offset_nm)?;
            let shifted_idler = idler_wavelength(stack.pump, shifted_signal)?;
            angles
                .iter()
                .map(|&a| {
                    let phase = total_phase_difference(
                        db,
                        stack,
                        shifted_signal,
                        shifted_idler,
                        Some(a),
                    )?
                    .rad();
                    Ok((phase, weight))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    PhasorEnsemble::new(samples)
}

/// Rotate the ensemble's mean phase onto the target Bell state: the constant
/// offset an experimenter dials with a crystal tilt. Returns the shifted
/// ensemble and the applied offset in [0, 2π).
pub fn align_to_target(
    ensemble: &PhasorEnsemble,
    target: BellTarget,
) -> (PhasorEnsemble, f64) {
    let kappa = ensemble.coherence();
    let offset = (target.phase_rad() - kappa.arg()).rem_euclid(std::f64::consts::TAU);
    (ensemble.shifted(offset), offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anglemap::{phase_map, AngularGrid, DEFAULT_FLAT_TOLERANCE_RAD};
    use crate::material::MaterialId;
    use crate::stack::HwpModel;
    use crate::state::mixed_state;

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

    #[test]
    fn spectral_offsets_are_symmetric_and_normalizable() {
        let spec = SpectralSpec::default();
        let offsets = spec.offsets();
        assert_eq!(offsets.len(), 41);
        let n = offsets.len();
        for k in 0..n {
            assert!((offsets[k].0 + offsets[n - 1 - k].0).abs() < 1e-12);
            assert!((offsets[k].1 - offsets[n - 1 - k].1).abs() < 1e-15);
        }
        assert!((offsets[n / 2].1 - 1.0).abs() < 1e-15, "peak weight at center");
    }

    #[test]
    fn alignment_puts_the_coherence_on_the_target() {
        let ens = PhasorEnsemble::new(vec![(1.0, 1.0), (1.4, 1.0)]).unwrap();
        let (aligned, offset) = align_to_target(&ens, BellTarget::PhiMinus);
        let kappa = aligned.coherence();
        assert!((kappa.arg().abs() - std::f64::consts::PI).abs() < 1e-12);
        assert!((0.0..std::f64::consts::TAU).contains(&offset));
        let (aligned_plus, _) = align_to_target(&ens, BellTarget::PhiPlus);
        assert!(aligned_plus.coherence().arg().abs() < 1e-12);
    }

    #[test]
    fn shrinking_acceptance_never_decreases_phi_minus_fidelity() {
        let (stack, signal, idler) = source();
        let grid = AngularGrid {
            max_azimuthal_rad: 2.0_f64.to_radians(),
            max_polar_rad: 2.0_f64.to_radians(),
            resolution: 41,
        };
        let map = phase_map(db(), &stack, signal, idler, grid).unwrap();
        let spectral = SpectralSpec { fwhm_nm: 5.0, samples: 11 };
        let mut prev = -1.0;
        for radius_deg in [1.5_f64, 0.8, 0.4, 0.2, 0.1] {
            let spec = AcceptanceSpec::Aperture {
                radius_rad: radius_deg.to_radians(),
            };
            let ens = spectral_angular_ensemble(
                db(),
                &stack,
                signal,
                &map,
                &spec,
                DEFAULT_FLAT_TOLERANCE_RAD,
                &spectral,
            )
            .unwrap();
            let (aligned, _) = align_to_target(&ens, BellTarget::PhiMinus);
            let f = mixed_state(&aligned).unwrap().fidelity(BellTarget::PhiMinus);
            assert!(
                f >= prev - 1e-9,
                "fidelity dropped from {prev} to {f} at {radius_deg} deg"
            );
            prev = f;
        }
    }
}
