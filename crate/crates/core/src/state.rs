//! Two-qubit polarization state, polarizer sweeps, and quality metrics.
//!
//! The source populates only |HH⟩ and |VV⟩; spectral and angular spread of
//! the phase difference Δφ dephases the superposition. A weighted ensemble
//! of phases collapses to the coherence κ = ⟨e^{iΔφ}⟩, the off-diagonal
//! element of the density matrix in the {HH, HV, VH, VV} basis.

use nalgebra::{Complex, Matrix4};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

/// Weighted samples of the phase difference; weights need not be normalized.
#[derive(Debug, Clone)]
pub struct PhasorEnsemble {
    samples: Vec<(f64, f64)>,
}

impl PhasorEnsemble {
    /// Build from (phase_rad, weight) samples. Weights must be non-negative
    /// with a positive total.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.iter().any(|&(p, w)| !p.is_finite() || !(w >= 0.0)) {
            return Err(Error::Domain(
                "ensemble samples must be finite with non-negative weights".into(),
            ));
        }
        let total: f64 = samples.iter().map(|&(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::EmptyEnsemble);
        }
        Ok(PhasorEnsemble { samples })
    }

    pub fn single(phase_rad: f64) -> Self {
        PhasorEnsemble {
            samples: vec![(phase_rad, 1.0)],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Normalized weighted mean of e^{iΔφ}. |κ| ≤ 1 by the triangle
    /// inequality.
    pub fn coherence(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut total = 0.0;
        for &(phase, w) in &self.samples {
            acc += w * Complex64::from_polar(1.0, phase);
            total += w;
        }
        acc / total
    }

    /// Same ensemble with every phase shifted by a constant (crystal tilt).
    pub fn shifted(&self, offset_rad: f64) -> Self {
        PhasorEnsemble {
            samples: self
                .samples
                .iter()
                .map(|&(p, w)| (p + offset_rad, w))
                .collect(),
        }
    }
}

/// Maximally entangled target states (|HH⟩ ± |VV⟩)/√2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BellTarget {
    PhiPlus,
    PhiMinus,
}

impl BellTarget {
    /// Center phase that realizes the target: 0 for Φ⁺, π for Φ⁻.
    pub fn phase_rad(self) -> f64 {
        match self {
            BellTarget::PhiPlus => 0.0,
            BellTarget::PhiMinus => std::f64::consts::PI,
        }
    }
}

impl std::fmt::Display for BellTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BellTarget::PhiPlus => f.write_str("phi_plus"),
            BellTarget::PhiMinus => f.write_str("phi_minus"),
        }
    }
}

/// 4×4 polarization density matrix in the {HH, HV, VH, VV} basis.
/// Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    matrix: [[Complex64; 4]; 4],
}

impl TwoQubitState {
    pub fn from_matrix(matrix: [[Complex64; 4]; 4]) -> Result<Self> {
        let state = TwoQubitState { matrix };
        state.validate()?;
        Ok(state)
    }

    pub fn matrix(&self) -> &[[Complex64; 4]; 4] {
        &self.matrix
    }

    fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        for r in 0..4 {
            for c in 0..4 {
                let d = (m[r][c] - m[c][r].conj()).norm();
                if d > HERMITICITY_TOL {
                    return Err(Error::Domain(format!(
                        "density matrix not Hermitian: |ρ[{r}][{c}] − ρ[{c}][{r}]*| = {d:.3e}"
                    )));
                }
            }
        }
        let trace: Complex64 = (0..4).map(|k| m[k][k]).sum();
        if (trace - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Domain(format!(
                "density matrix trace {} ≠ 1",
                trace.re
            )));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < PSD_TOL {
            return Err(Error::Domain(format!(
                "density matrix not positive semidefinite: min eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the Hermitian matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = Matrix4::from_fn(|r, c| Complex::new(self.matrix[r][c].re, self.matrix[r][c].im));
        let eig = m.symmetric_eigen();
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        let m = &self.matrix;
        let mut tr = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                tr += (m[r][c] * m[c][r]).re;
            }
        }
        tr
    }

    /// Off-diagonal ⟨VV|ρ|HH⟩ — the coherence κ for HH/VV-populated states.
    pub fn coherence(&self) -> Complex64 {
        2.0 * self.matrix[3][0]
    }

    /// ⟨target|ρ|target⟩ for a Bell target.
    pub fn fidelity(&self, target: BellTarget) -> f64 {
        let m = &self.matrix;
        let sign = match target {
            BellTarget::PhiPlus => 1.0,
            BellTarget::PhiMinus => -1.0,
        };
        0.5 * (m[0][0].re + m[3][3].re + 2.0 * sign * m[3][0].re)
    }
}

/// Density matrix of the pure state (|HH⟩ + e^{iΔφ}|VV⟩)/√2.
pub fn pure_state(delta_phi_rad: f64) -> TwoQubitState {
    mixed_state(&PhasorEnsemble::single(delta_phi_rad)).expect("single sample is a valid ensemble")
}

/// Density matrix of the dephased state:
/// ρ = ½(|HH⟩⟨HH| + |VV⟩⟨VV| + κ|VV⟩⟨HH| + κ*|HH⟩⟨VV|), κ = ⟨e^{iΔφ}⟩.
pub fn mixed_state(ensemble: &PhasorEnsemble) -> Result<TwoQubitState> {
    let kappa = ensemble.coherence();
    let z = Complex64::new(0.0, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let m = [
        [half, z, z, 0.5 * kappa.conj()],
        [z, z, z, z],
        [z, z, z, z],
        [0.5 * kappa, z, z, half],
    ];
    TwoQubitState::from_matrix(m)
}

/// Rates of a single polarizer at angle α acting on both photons,
/// rate(α) = ⟨αα|ρ|αα⟩ with |α⟩ = cos α|H⟩ + sin α|V⟩.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub angles_rad: Vec<f64>,
    pub rates: Vec<f64>,
    pub b_max: f64,
    pub b_min: f64,
}

pub fn polarizer_sweep(state: &TwoQubitState, angles_rad: &[f64]) -> SweepResult {
    let rates: Vec<f64> = angles_rad
        .iter()
        .map(|&alpha| projection_rate(state, alpha, alpha))
        .collect();
    let b_max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let b_min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    SweepResult {
        angles_rad: angles_rad.to_vec(),
        rates,
        b_max,
        b_min,
    }
}

/// ⟨αβ|ρ|αβ⟩ for separate polarizer angles on the two photons.
pub fn projection_rate(state: &TwoQubitState, alpha: f64, beta: f64) -> f64 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let v = [ca * cb, ca * sb, sa * cb, sa * sb];
    let m = state.matrix();
    let mut rate = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            rate += (m[r][c] * v[r] * v[c]).re;
        }
    }
    // clamp away the negative dust from rounding
    rate.max(0.0)
}

/// V = (B_max − B_min)/(B_max + B_min).
pub fn visibility(sweep: &SweepResult) -> Result<f64> {
    let denom = sweep.b_max + sweep.b_min;
    if denom <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok((sweep.b_max - sweep.b_min) / denom)
}

/// Total pair generation rate inferred from the coincidence rate and the two
/// heralding efficiencies: R = R_cc/(η_s η_i).
pub fn infer_generation_rate(
    coincidence_rate: f64,
    eta_signal: f64,
    eta_idler: f64,
) -> Result<f64> {
    for (name, eta) in [("signal", eta_signal), ("idler", eta_idler)] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Domain(format!(
                "{name} efficiency must lie in (0, 1], got {eta}"
            )));
        }
    }
    if coincidence_rate < 0.0 {
        return Err(Error::Domain("coincidence rate must be >= 0".into()));
    }
    Ok(coincidence_rate / (eta_signal * eta_idler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn pure_states_are_projectors_with_unit_purity() {
        for phase in [0.0, PI, 1.234, -2.5] {
            let rho = pure_state(phase);
            assert!((rho.purity() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_minus_and_phi_plus_fidelities() {
        let minus = pure_state(PI);
        assert!((minus.fidelity(BellTarget::PhiMinus) - 1.0).abs() < 1e-12);
        assert!(minus.fidelity(BellTarget::PhiPlus).abs() < 1e-12);
        let plus = pure_state(0.0);
        assert!((plus.fidelity(BellTarget::PhiPlus) - 1.0).abs() < 1e-12);
        assert!(plus.fidelity(BellTarget::PhiMinus).abs() < 1e-12);
    }

    #[test]
    fn single_sample_matches_pure_state() {
        let a = mixed_state(&PhasorEnsemble::single(PI)).unwrap();
        let b = pure_state(PI);
        for r in 0..4 {
            for c in 0..4 {
                assert!((a.matrix()[r][c] - b.matrix()[r][c]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn opposite_phases_dephase_completely() {
        let ens = PhasorEnsemble::new(vec![(0.0, 1.0), (PI, 1.0)]).unwrap();
        let rho = mixed_state(&ens).unwrap();
        assert!(rho.coherence().norm() < 1e-15);
        // visibility of the dephased state: (1/2 − 1/4)/(1/2 + 1/4) = 1/3
        let angles: Vec<f64> = (0..=180).map(|d| (d as f64).to_radians()).collect();
        let sweep = polarizer_sweep(&rho, &angles);
        assert!((visibility(&sweep).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_interval_coherence_is_sinc() {
        // uniform phases over [π − δ, π + δ] → |κ| = sin(δ)/δ, arg κ = π
        let delta = FRAC_PI_2;
        let n = 20_001;
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                // midpoint rule
                let x = PI - delta + delta * (2.0 * k as f64 + 1.0) / n as f64;
                (x, 1.0)
            })
            .collect();
        let kappa = PhasorEnsemble::new(samples).unwrap().coherence();
        let expected = delta.sin() / delta; // = 2/π for δ = π/2
        assert!((kappa.norm() - expected).abs() < 1e-6);
        assert!((expected - 2.0 / PI).abs() < 1e-15);
        assert!((kappa.arg().abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn fidelity_from_half_plus_half_kappa() {
        // two samples at π ± acos(0.99) give κ = −0.99 exactly
        let d = 0.99_f64.acos();
        let ens = PhasorEnsemble::new(vec![(PI - d, 1.0), (PI + d, 1.0)]).unwrap();
        let rho = mixed_state(&ens).unwrap();
        assert!((rho.coherence().re + 0.99).abs() < 1e-12);
        assert!((rho.fidelity(BellTarget::PhiMinus) - 0.995).abs() < 1e-12);
    }

    #[test]
    fn ideal_phi_minus_sweep() {
        let rho = pure_state(PI);
        let angles = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];
        let sweep = polarizer_sweep(&rho, &angles);
        let expected = [0.5, 0.0, 0.5, 0.0];
        for (r, e) in sweep.rates.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12, "rate {r} vs {e}");
        }
        assert!((visibility(&sweep).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dephased_sweep_rate_formula() {
        let ens = PhasorEnsemble::new(vec![(0.0, 1.0), (PI, 1.0)]).unwrap();
        let rho = mixed_state(&ens).unwrap();
        for deg in [0.0_f64, 17.0, 45.0, 60.0, 90.0] {
            let a = deg.to_radians();
            let expected = 0.5 * (a.cos().powi(4) + a.sin().powi(4));
            let rate = projection_rate(&rho, a, a);
            assert!((rate - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn near_ideal_rate_at_forty_five_degrees() {
        // κ = −0.98: rate(45°) = (1 − 0.98)/4 = 0.005
        let d = 0.98_f64.acos();
        let ens = PhasorEnsemble::new(vec![(PI - d, 1.0), (PI + d, 1.0)]).unwrap();
        let rho = mixed_state(&ens).unwrap();
        let rate = projection_rate(&rho, FRAC_PI_4, FRAC_PI_4);
        assert!((rate - 0.005).abs() < 1e-12);
    }

    #[test]
    fn ad_basis_visibility_equals_coherence_magnitude() {
        // two-polarizer A/D correlation visibility = |κ| for real κ
        for target_kappa in [0.3_f64, 0.7, 0.95] {
            let d = target_kappa.acos();
            let ens = PhasorEnsemble::new(vec![(PI - d, 1.0), (PI + d, 1.0)]).unwrap();
            let rho = mixed_state(&ens).unwrap();
            let a = FRAC_PI_4;
            let dd = 3.0 * FRAC_PI_4;
            let p_aa = projection_rate(&rho, a, a);
            let p_dd = projection_rate(&rho, dd, dd);
            let p_ad = projection_rate(&rho, a, dd);
            let p_da = projection_rate(&rho, dd, a);
            let v_ad = ((p_aa + p_dd) - (p_ad + p_da)) / (p_aa + p_dd + p_ad + p_da);
            assert!(
                (v_ad.abs() - rho.coherence().norm()).abs() < 1e-9,
                "V_AD {v_ad} vs |κ| {}",
                rho.coherence().norm()
            );
        }
    }

    #[test]
    fn generation_rate_inference() {
        let r = infer_generation_rate(65_000.0, 0.27, 0.22).unwrap();
        assert!((r - 65_000.0 / (0.27 * 0.22)).abs() < 1e-6);
        assert!((r - 1.0943e6).abs() < 1e3);
        assert_eq!(infer_generation_rate(123.0, 1.0, 1.0).unwrap(), 123.0);
        assert_eq!(infer_generation_rate(0.0, 0.5, 0.5).unwrap(), 0.0);
        assert!(infer_generation_rate(1.0, 0.0, 0.5).is_err());
        assert!(infer_generation_rate(1.0, 0.5, 1.5).is_err());
    }

    #[test]
    fn empty_or_zero_weight_ensembles_are_rejected() {
        assert!(PhasorEnsemble::new(vec![]).is_err());
        assert!(PhasorEnsemble::new(vec![(1.0, 0.0), (2.0, 0.0)]).is_err());
        assert!(PhasorEnsemble::new(vec![(1.0, -0.5)]).is_err());
    }

    #[test]
    fn visibility_undefined_for_all_zero_rates() {
        let sweep = SweepResult {
            angles_rad: vec![0.0, 1.0],
            rates: vec![0.0, 0.0],
            b_max: 0.0,
            b_min: 0.0,
        };
        assert!(matches!(visibility(&sweep), Err(Error::UndefinedVisibility)));
    }

    #[test]
    fn fidelities_to_both_targets_sum_below_one() {
        for (phases, weights) in [
            (vec![PI], vec![1.0]),
            (vec![PI - 0.3, PI + 0.3], vec![1.0, 1.0]),
            (vec![0.0, 1.0, 2.0, 3.0], vec![0.2, 0.3, 0.1, 0.4]),
        ] {
            let ens = PhasorEnsemble::new(
                phases.into_iter().zip(weights).collect(),
            )
            .unwrap();
            let rho = mixed_state(&ens).unwrap();
            let total = rho.fidelity(BellTarget::PhiPlus) + rho.fidelity(BellTarget::PhiMinus);
            assert!(total <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn non_hermitian_matrix_rejected() {
        let z = Complex64::new(0.0, 0.0);
        let half = Complex64::new(0.5, 0.0);
        let m = [
            [half, Complex64::new(0.1, 0.0), z, z],
            [z, z, z, z],
            [z, z, z, z],
            [z, z, z, half],
        ];
        assert!(TwoQubitState::from_matrix(m).is_err());
    }
}
