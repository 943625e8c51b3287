//! Numerical model of a parallel-crystal type-I SPDC entangled photon
//! source: Sellmeier dispersion, wavelength- and angle-resolved phase
//! differences through the birefringent stack, temporal-compensator
//! optimization, entanglement-quality prediction, and pump/collection mode
//! overlap under spatial walk-off.

pub mod anglemap;
pub mod compensator;
pub mod config;
pub mod error;
pub mod material;
pub mod overlap;
pub mod pipeline;
pub mod stack;
pub mod state;

pub use error::{Error, Result};
