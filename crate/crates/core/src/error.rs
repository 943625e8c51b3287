//! Crate-wide error type.

use thiserror::Error;

use crate::material::{Axis, MaterialId};

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "{material} ({axis}): wavelength {wavelength_nm} nm outside fit range \
         [{min_nm}, {max_nm}] nm"
    )]
    WavelengthOutOfRange {
        material: MaterialId,
        axis: Axis,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("no dispersion model registered for {material} ({axis})")]
    MissingMaterial { material: MaterialId, axis: Axis },

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error(
        "no sign change of d(phase)/d(lambda) over bracket [{lo_mm}, {hi_mm}] mm: \
         f(lo) = {f_lo:.6e}, f(hi) = {f_hi:.6e} rad/nm"
    )]
    Bracket {
        lo_mm: f64,
        hi_mm: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("root finder did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },

    #[error(
        "overlap integral not converged: relative change {rel_change:.3e} on step refinement; \
         retry with at least {suggested_slices} z-slices"
    )]
    Discretization {
        rel_change: f64,
        suggested_slices: usize,
    },

    #[error("phasor ensemble has no weight (empty or all weights zero)")]
    EmptyEnsemble,

    #[error("visibility undefined: all sweep rates are zero")]
    UndefinedVisibility,

    #[error("config: {0}")]
    Config(String),

    #[error("material data: {0}")]
    MaterialData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
