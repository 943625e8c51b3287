//! Material dispersion engine.
//!
//! Refractive indices come from Sellmeier fits with explicit validity ranges
//! and literature citations; the coefficient sets live in a versioned data
//! file (`data/materials.toml`, overridable at load time). On top of the
//! plain ordinary/extraordinary indices this module provides the uniaxial
//! index ellipsoid n(θ), the Poynting walk-off angle, and energy-conservation
//! wavelength arithmetic.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Birefringent materials of the source: the downconversion crystals (BBO),
/// the temporal compensator (YVO₄), and the achromatic half-wave plate
/// components (quartz + MgF₂).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaterialId {
    #[serde(rename = "BBO")]
    Bbo,
    #[serde(rename = "YVO4")]
    Yvo4,
    Quartz,
    #[serde(rename = "MgF2")]
    Mgf2,
}

impl MaterialId {
    pub const ALL: [MaterialId; 4] = [
        MaterialId::Bbo,
        MaterialId::Yvo4,
        MaterialId::Quartz,
        MaterialId::Mgf2,
    ];
}

impl fmt::Display for MaterialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MaterialId::Bbo => "BBO",
            MaterialId::Yvo4 => "YVO4",
            MaterialId::Quartz => "Quartz",
            MaterialId::Mgf2 => "MgF2",
        };
        f.write_str(s)
    }
}

impl FromStr for MaterialId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "BBO" => Ok(MaterialId::Bbo),
            "YVO4" => Ok(MaterialId::Yvo4),
            "Quartz" => Ok(MaterialId::Quartz),
            "MgF2" => Ok(MaterialId::Mgf2),
            other => Err(Error::MaterialData(format!("unknown material `{other}`"))),
        }
    }
}

/// Principal axis of a uniaxial crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Ordinary,
    Extraordinary,
}

impl Axis {
    pub fn flipped(self) -> Axis {
        match self {
            Axis::Ordinary => Axis::Extraordinary,
            Axis::Extraordinary => Axis::Ordinary,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Ordinary => f.write_str("ordinary"),
            Axis::Extraordinary => f.write_str("extraordinary"),
        }
    }
}

/// Vacuum wavelength in nanometres. Always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Wavelength(f64);

impl Wavelength {
    pub fn new(nm: f64) -> Result<Self> {
        if nm.is_finite() && nm > 0.0 {
            Ok(Wavelength(nm))
        } else {
            Err(Error::Domain(format!("wavelength must be positive, got {nm} nm")))
        }
    }

    pub fn nm(self) -> f64 {
        self.0
    }

    pub fn um(self) -> f64 {
        self.0 * 1e-3
    }
}

/// Idler wavelength from energy conservation, 1/λ_p = 1/λ_s + 1/λ_i.
///
/// Requires λ_s > λ_p (the signal must carry less than the full pump energy).
pub fn idler_wavelength(pump: Wavelength, signal: Wavelength) -> Result<Wavelength> {
    if signal.nm() <= pump.nm() {
        return Err(Error::Domain(format!(
            "signal wavelength ({} nm) must exceed pump wavelength ({} nm)",
            signal.nm(),
            pump.nm()
        )));
    }
    Wavelength::new(1.0 / (1.0 / pump.nm() - 1.0 / signal.nm()))
}

/// Functional form of a dispersion fit. All forms take λ in µm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SellmeierForm {
    /// n² = c₀ + Σᵢ c₂ᵢ₊₁ λ² / (λ² − c₂ᵢ₊₂), poles pre-squared (µm²).
    Sellmeier,
    /// n² = c₀ + c₁ / (λ² − c₂) − c₃ λ².
    Rational,
}

/// One dispersion fit: form, coefficients, validity range, provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SellmeierModel {
    pub form: SellmeierForm,
    pub coefficients: Vec<f64>,
    /// Inclusive validity interval in nm.
    pub range_nm: (f64, f64),
    pub citation: String,
}

impl SellmeierModel {
    fn check_range(&self, material: MaterialId, axis: Axis, lambda: Wavelength) -> Result<()> {
        let nm = lambda.nm();
        if nm < self.range_nm.0 || nm > self.range_nm.1 {
            return Err(Error::WavelengthOutOfRange {
                material,
                axis,
                wavelength_nm: nm,
                min_nm: self.range_nm.0,
                max_nm: self.range_nm.1,
            });
        }
        Ok(())
    }

    fn n_squared(&self, lambda: Wavelength) -> f64 {
        let l2 = lambda.um() * lambda.um();
        let c = &self.coefficients;
        match self.form {
            SellmeierForm::Sellmeier => {
                let mut n2 = c[0];
                for pair in c[1..].chunks_exact(2) {
                    n2 += pair[0] * l2 / (l2 - pair[1]);
                }
                n2
            }
            SellmeierForm::Rational => c[0] + c[1] / (l2 - c[2]) - c[3] * l2,
        }
    }

    fn validate(&self, material: MaterialId, axis: Axis) -> Result<()> {
        let ok_len = match self.form {
            SellmeierForm::Sellmeier => self.coefficients.len() >= 3 && self.coefficients.len() % 2 == 1,
            SellmeierForm::Rational => self.coefficients.len() == 4,
        };
        if !ok_len {
            return Err(Error::MaterialData(format!(
                "{material} ({axis}): coefficient count {} does not fit form {:?}",
                self.coefficients.len(),
                self.form
            )));
        }
        if !(self.range_nm.0 > 0.0 && self.range_nm.1 > self.range_nm.0) {
            return Err(Error::MaterialData(format!(
                "{material} ({axis}): invalid range {:?}",
                self.range_nm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct MaterialRecord {
    id: MaterialId,
    axis: Axis,
    form: SellmeierForm,
    coefficients: Vec<f64>,
    range_nm: (f64, f64),
    citation: String,
}

#[derive(Debug, Deserialize)]
struct MaterialFile {
    version: String,
    material: Vec<MaterialRecord>,
}

/// Registry of dispersion models, one per (material, axis).
#[derive(Debug, Clone)]
pub struct MaterialDb {
    version: String,
    models: Vec<((MaterialId, Axis), SellmeierModel)>,
}

static BUILTIN: OnceLock<MaterialDb> = OnceLock::new();

impl MaterialDb {
    /// The data set compiled into the crate (`data/materials.toml`).
    pub fn builtin() -> &'static MaterialDb {
        BUILTIN.get_or_init(|| {
            MaterialDb::from_toml_str(include_str!("../data/materials.toml"))
                .expect("built-in material data must parse")
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: MaterialFile =
            toml::from_str(text).map_err(|e| Error::MaterialData(e.to_string()))?;
        let mut models = Vec::new();
        for rec in file.material {
            let model = SellmeierModel {
                form: rec.form,
                coefficients: rec.coefficients,
                range_nm: rec.range_nm,
                citation: rec.citation,
            };
            model.validate(rec.id, rec.axis)?;
            if models.iter().any(|((m, a), _)| *m == rec.id && *a == rec.axis) {
                return Err(Error::MaterialData(format!(
                    "duplicate entry for {} ({})",
                    rec.id, rec.axis
                )));
            }
            models.push(((rec.id, rec.axis), model));
        }
        let db = MaterialDb {
            version: file.version,
            models,
        };
        // every material must carry both principal axes
        for id in MaterialId::ALL {
            for axis in [Axis::Ordinary, Axis::Extraordinary] {
                db.model(id, axis)?;
            }
        }
        Ok(db)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::MaterialData(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn model(&self, material: MaterialId, axis: Axis) -> Result<&SellmeierModel> {
        self.models
            .iter()
            .find(|((m, a), _)| *m == material && *a == axis)
            .map(|(_, model)| model)
            .ok_or(Error::MissingMaterial { material, axis })
    }

    /// Principal refractive index n(λ) for the given axis.
    pub fn refractive_index(
        &self,
        material: MaterialId,
        axis: Axis,
        lambda: Wavelength,
    ) -> Result<f64> {
        let model = self.model(material, axis)?;
        model.check_range(material, axis, lambda)?;
        let n2 = model.n_squared(lambda);
        if n2 <= 1.0 || !n2.is_finite() {
            return Err(Error::MaterialData(format!(
                "{material} ({axis}) at {} nm: n² = {n2} is unphysical",
                lambda.nm()
            )));
        }
        Ok(n2.sqrt())
    }

    /// Extraordinary-wave index at angle θ between wavevector and optic axis:
    /// 1/n(θ)² = cos²θ/n_o² + sin²θ/n_e².
    ///
    /// θ = 0 gives exactly n_o, θ = π/2 exactly the principal n_e.
    pub fn extraordinary_index_at_angle(
        &self,
        material: MaterialId,
        theta: f64,
        lambda: Wavelength,
    ) -> Result<f64> {
        let n_o = self.refractive_index(material, Axis::Ordinary, lambda)?;
        let n_e = self.refractive_index(material, Axis::Extraordinary, lambda)?;
        Ok(index_ellipsoid(n_o, n_e, theta))
    }

    /// Poynting walk-off of an extraordinary wave propagating at θ_cut to the
    /// optic axis: tan ρ = (n(θ)²/2)(1/n_e² − 1/n_o²) sin 2θ.
    ///
    /// Sign convention: positive tilts toward the optic-axis projection.
    pub fn walkoff_angle(
        &self,
        material: MaterialId,
        theta_cut: f64,
        lambda: Wavelength,
    ) -> Result<f64> {
        let n_o = self.refractive_index(material, Axis::Ordinary, lambda)?;
        let n_e = self.refractive_index(material, Axis::Extraordinary, lambda)?;
        let n_th = index_ellipsoid(n_o, n_e, theta_cut);
        let tan_rho =
            0.5 * n_th * n_th * (1.0 / (n_e * n_e) - 1.0 / (n_o * n_o)) * (2.0 * theta_cut).sin();
        Ok(tan_rho.atan())
    }

    /// Cut angle closing collinear type-I phase matching
    /// n_e(θ; λ_p)/λ_p = n_o(λ_s)/λ_s + n_o(λ_i)/λ_i for the given trio.
    ///
    /// Used to derive the default crystal cut from the configured wavelengths.
    pub fn type_one_cut_angle(
        &self,
        material: MaterialId,
        pump: Wavelength,
        signal: Wavelength,
        idler: Wavelength,
    ) -> Result<f64> {
        let target = self.refractive_index(material, Axis::Ordinary, signal)? / signal.nm()
            + self.refractive_index(material, Axis::Ordinary, idler)? / idler.nm();
        let n_o = self.refractive_index(material, Axis::Ordinary, pump)?;
        let n_e = self.refractive_index(material, Axis::Extraordinary, pump)?;
        let f = |theta: f64| index_ellipsoid(n_o, n_e, theta) / pump.nm() - target;
        // n(θ) is monotone on [0, π/2]; plain bisection
        let (mut lo, mut hi) = (0.0_f64, std::f64::consts::FRAC_PI_2);
        let (f_lo, f_hi) = (f(lo), f(hi));
        if f_lo * f_hi > 0.0 {
            return Err(Error::Domain(format!(
                "type-I phase matching not reachable in {material} for pump {} nm",
                pump.nm()
            )));
        }
        let rising = f_lo < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn index_ellipsoid(n_o: f64, n_e: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    // exact principal values on-axis and on the equator
    if s == 0.0 {
        return n_o;
    }
    if c == 0.0 {
        return n_e;
    }
    1.0 / ((c * c) / (n_o * n_o) + (s * s) / (n_e * n_e)).sqrt()
}
