//! Temporal-compensator optimization.
//!
//! The compensator length is chosen so that the phase difference Δφ is
//! stationary in wavelength, ∂(Δφ)/∂λ = 0, killing the first-order spectral
//! distinguishability between the two generation amplitudes. The derivative
//! is taken with respect to the signal wavelength with the idler slaved
//! through energy conservation at fixed pump, and is nulled at the signal
//! center wavelength. (At exact degeneracy that derivative vanishes
//! identically for any compensator length — the pair sum of any element's
//! phase is stationary there — so the non-degenerate signal wavelength is
//! the meaningful operating point.)
//!
//! The optimal length scales linearly with the downconverter length; the
//! intercept is the contribution of the half-wave plate alone.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::material::{idler_wavelength, MaterialDb, Wavelength};
use crate::stack::{total_phase_difference, CrystalStack, HwpModel};

/// Central-difference step for d(Δφ)/dλ, nm. Validated in tests against a
/// five-point stencil to 1e-4 relative; much smaller steps lose digits to
/// cancellation in the ~1e5 rad phase totals.
pub const DERIVATIVE_STEP_NM: f64 = 0.1;

/// Length tolerance of the compensator root find, mm (1 µm).
pub const LENGTH_TOL_MM: f64 = 1e-3;

/// Default search bracket for the compensator length, mm.
pub const DEFAULT_BRACKET_MM: (f64, f64) = (0.01, 20.0);

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompensatorSolution {
    pub yvo_length_mm: f64,
    /// d(Δφ)/dλ at the solution, rad/nm.
    pub residual_derivative: f64,
    /// Signal wavelength at which the derivative is nulled, nm.
    pub center_wavelength_nm: f64,
    /// Residual curvature d²(Δφ)/dλ², rad/nm². Only first order is
    /// compensated; this stays finite.
    pub second_derivative: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearLawFit {
    pub slope: f64,
    pub intercept_mm: f64,
    pub r_squared: f64,
}

/// d(Δφ)/dλ_signal at `center`, rad/nm, idler slaved via 1/λ_i = 1/λ_p − 1/λ_s.
pub fn dphase_dlambda(
    db: &MaterialDb,
    stack: &CrystalStack,
    center: Wavelength,
) -> Result<f64> {
    derivative(db, stack, center, DERIVATIVE_STEP_NM)
}

fn delta_phi_at(db: &MaterialDb, stack: &CrystalStack, signal_nm: f64) -> Result<f64> {
    let signal = Wavelength::new(signal_nm)?;
    let idler = idler_wavelength(stack.pump, signal)?;
    Ok(total_phase_difference(db, stack, signal, idler, None)?.rad())
}

fn derivative(db: &MaterialDb, stack: &CrystalStack, center: Wavelength, h: f64) -> Result<f64> {
    let hi = delta_phi_at(db, stack, center.nm() + h)?;
    let lo = delta_phi_at(db, stack, center.nm() - h)?;
    Ok((hi - lo) / (2.0 * h))
}

/// Five-point stencil, used as the derivative oracle in tests.
pub fn dphase_dlambda_five_point(
    db: &MaterialDb,
    stack: &CrystalStack,
    center: Wavelength,
) -> Result<f64> {
    let h = DERIVATIVE_STEP_NM;
    let f = |x: f64| delta_phi_at(db, stack, x);
    let c = center.nm();
    Ok((f(c - 2.0 * h)? - 8.0 * f(c - h)? + 8.0 * f(c + h)? - f(c + 2.0 * h)?) / (12.0 * h))
}

fn second_derivative(db: &MaterialDb, stack: &CrystalStack, center: Wavelength) -> Result<f64> {
    let h = 1.0; // nm; curvature is gentle, a wide step keeps the digits
    let c = center.nm();
    Ok((delta_phi_at(db, stack, c + h)? - 2.0 * delta_phi_at(db, stack, c)?
        + delta_phi_at(db, stack, c - h)?)
        / (h * h))
}

/// Solve d(Δφ)/dλ = 0 for the compensator length by bracketed bisection with
/// secant acceleration. The derivative is monotone in the length (Δφ is
/// additive in element lengths), so any sign-changing bracket contains the
/// single root.
pub fn optimal_compensator_length(
    db: &MaterialDb,
    stack_without_compensator: &CrystalStack,
    center: Wavelength,
    bracket_mm: (f64, f64),
) -> Result<CompensatorSolution> {
    let eval = |length_mm: f64| -> Result<f64> {
        let mut stack = stack_without_compensator.clone();
        stack.set_compensator_length_mm(length_mm);
        dphase_dlambda(db, &stack, center)
    };

    let (mut lo, mut hi) = bracket_mm;
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    if f_lo == 0.0 {
        hi = lo;
    } else if f_hi == 0.0 {
        lo = hi;
    } else if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket {
            lo_mm: lo,
            hi_mm: hi,
            f_lo,
            f_hi,
        });
    }

    let mut iterations = 0usize;
    while hi - lo > LENGTH_TOL_MM {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NoConvergence { max_iter: 200 });
        }
        // secant proposal, clamped into the middle 90% of the bracket;
        // fall back to bisection when it degenerates
        let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        let mid = if secant.is_finite()
            && secant > lo + 0.05 * (hi - lo)
            && secant < hi - 0.05 * (hi - lo)
        {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let f_mid = eval(mid)?;
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }

    let root = 0.5 * (lo + hi);
    let mut stack = stack_without_compensator.clone();
    stack.set_compensator_length_mm(root);
    Ok(CompensatorSolution {
        yvo_length_mm: root,
        residual_derivative: dphase_dlambda(db, &stack, center)?,
        center_wavelength_nm: center.nm(),
        second_derivative: second_derivative(db, &stack, center)?,
    })
}

/// Solve the compensator for each downconverter length and fit the linear law
/// L_compensator = slope · L_downconverter + intercept.
pub fn fit_linear_law(
    db: &MaterialDb,
    template: &CrystalStack,
    bbo_lengths_mm: &[f64],
    center: Wavelength,
) -> Result<(Vec<(f64, CompensatorSolution)>, LinearLawFit)> {
    if bbo_lengths_mm.len() < 3 {
        return Err(Error::Domain(
            "linear-law fit needs at least 3 downconverter lengths".into(),
        ));
    }
    let points: Vec<(f64, CompensatorSolution)> = bbo_lengths_mm
        .par_iter()
        .map(|&l_bbo| -> Result<(f64, CompensatorSolution)> {
            let mut stack = template.clone();
            for el in &mut stack.elements {
                if el.role == crate::stack::ElementRole::Downconverter {
                    el.length_mm = l_bbo;
                }
            }
            let sol = optimal_compensator_length(db, &stack, center, DEFAULT_BRACKET_MM)?;
            Ok((l_bbo, sol))
        })
        .collect::<Result<_>>()?;

    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, s)| s.yvo_length_mm).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, s)| x * s.yvo_length_mm).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;

    let mean_y = sy / n;
    let ss_res: f64 = points
        .iter()
        .map(|(x, s)| {
            let r = s.yvo_length_mm - (slope * x + intercept);
            r * r
        })
        .sum();
    let ss_tot: f64 = points
        .iter()
        .map(|(_, s)| {
            let d = s.yvo_length_mm - mean_y;
            d * d
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };

    Ok((
        points,
        LinearLawFit {
            slope,
            intercept_mm: intercept,
            r_squared,
        },
    ))
}

/// Calibrate the achromat plate lengths (the documented solve behind
/// [`HwpModel::default`]): quartz and MgF₂ lengths such that
///
/// 1. net retardance is −λ/2 at the degenerate wavelength 2λ_pump, and
/// 2. the compensator intercept — the length that flattens the plate's own
///    dispersion with zero-length downconverters — equals `target_intercept_mm`.
///
/// Condition 1 leaves a one-parameter family (longer quartz, longer MgF₂);
/// the intercept grows monotonically along it, so condition 2 picks a unique
/// member by bisection.
pub fn calibrate_hwp(
    db: &MaterialDb,
    pump: Wavelength,
    signal: Wavelength,
    cut_angle_rad: f64,
    target_intercept_mm: f64,
) -> Result<HwpModel> {
    use crate::material::{Axis, MaterialId};

    let center = Wavelength::new(2.0 * pump.nm())?;
    let dq = db.refractive_index(MaterialId::Quartz, Axis::Extraordinary, center)?
        - db.refractive_index(MaterialId::Quartz, Axis::Ordinary, center)?;
    let dm = db.refractive_index(MaterialId::Mgf2, Axis::Extraordinary, center)?
        - db.refractive_index(MaterialId::Mgf2, Axis::Ordinary, center)?;
    // MgF₂ length closing retardance −λ/2 at the center, for a given quartz length
    let mgf2_for = |quartz_mm: f64| (dq * quartz_mm + 0.5 * center.nm() * 1e-6) / dm;

    let intercept_for = |quartz_mm: f64| -> Result<f64> {
        let hwp = HwpModel {
            quartz_mm,
            mgf2_mm: mgf2_for(quartz_mm),
        };
        let stack = CrystalStack::parallel_source(pump, 0.0, cut_angle_rad, 0.0, hwp)?;
        // thin plates need only micrometres of compensation; open the
        // bracket well below the standard one
        Ok(optimal_compensator_length(db, &stack, signal, (1e-6, 20.0))?.yvo_length_mm)
    };

    let (mut lo, mut hi) = (0.01_f64, 3.0_f64);
    let f_lo = intercept_for(lo)? - target_intercept_mm;
    let f_hi = intercept_for(hi)? - target_intercept_mm;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket {
            lo_mm: lo,
            hi_mm: hi,
            f_lo,
            f_hi,
        });
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if (intercept_for(mid)? - target_intercept_mm).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let quartz_mm = 0.5 * (lo + hi);
    Ok(HwpModel {
        quartz_mm,
        mgf2_mm: mgf2_for(quartz_mm),
    })
}
