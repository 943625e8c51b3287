//! Source configuration: flat `key = value` text with dotted sections,
//! parsed as TOML. Every field has a default; an empty file yields the
//! default 6 mm source. Defaults that are assumptions rather than measured
//! values (the wavelengths) are flagged in reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anglemap::{AcceptanceSpec, AngularGrid, DEFAULT_FLAT_TOLERANCE_RAD};
use crate::error::{Error, Result};
use crate::material::{idler_wavelength, MaterialDb, MaterialId, Wavelength};
use crate::overlap::{CollectionMode, GaussianBeam, OverlapGeometry, DEFAULT_Z_SLICES};
use crate::pipeline::SpectralSpec;
use crate::stack::{CrystalStack, HwpModel, DEFAULT_HWP_MGF2_MM, DEFAULT_HWP_QUARTZ_MM};
use crate::state::BellTarget;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    /// Assumed default: 405 nm pump.
    pub pump_wavelength_nm: f64,
    /// Assumed default: 760 nm signal; idler follows by energy conservation.
    pub signal_wavelength_nm: f64,
    pub spectral_fwhm_nm: f64,
    pub spectral_samples: usize,
    pub stack: StackConfig,
    pub grid: GridConfig,
    pub acceptance: AcceptanceConfig,
    pub pump: PumpConfig,
    pub collection: CollectionConfig,
    pub sweep: SweepConfig,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            pump_wavelength_nm: 405.0,
            signal_wavelength_nm: 760.0,
            spectral_fwhm_nm: 5.0,
            spectral_samples: 41,
            stack: StackConfig::default(),
            grid: GridConfig::default(),
            acceptance: AcceptanceConfig::default(),
            pump: PumpConfig::default(),
            collection: CollectionConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct StackConfig {
    pub bbo_length_mm: f64,
    /// Crystal cut angle, degrees. Omitted → solved from collinear type-I
    /// phase matching at the configured wavelengths.
    pub bbo_cut_angle_deg: Option<f64>,
    pub yvo_length_mm: f64,
    /// Ignore `yvo_length_mm` and solve ∂(Δφ)/∂λ = 0 for it instead.
    pub auto_compensator: bool,
    pub hwp_quartz_mm: f64,
    pub hwp_mgf2_mm: f64,
    /// Which Bell state the constant phase offset dials in.
    pub target_state: TargetState,
    /// Re-enable the narrowband pump's constant phase terms (sensitivity
    /// studies only).
    pub include_pump_terms: bool,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            bbo_length_mm: 6.0,
            bbo_cut_angle_deg: None,
            yvo_length_mm: 3.6,
            auto_compensator: false,
            hwp_quartz_mm: DEFAULT_HWP_QUARTZ_MM,
            hwp_mgf2_mm: DEFAULT_HWP_MGF2_MM,
            target_state: TargetState::PhiMinus,
            include_pump_terms: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetState {
    PhiPlus,
    PhiMinus,
}

impl From<TargetState> for BellTarget {
    fn from(t: TargetState) -> BellTarget {
        match t {
            TargetState::PhiPlus => BellTarget::PhiPlus,
            TargetState::PhiMinus => BellTarget::PhiMinus,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub max_azimuthal_deg: f64,
    pub max_polar_deg: f64,
    pub resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            max_azimuthal_deg: 2.0,
            max_polar_deg: 2.0,
            resolution: 201,
        }
    }
}

impl GridConfig {
    pub fn to_grid(&self) -> AngularGrid {
        AngularGrid {
            max_azimuthal_rad: self.max_azimuthal_deg.to_radians(),
            max_polar_rad: self.max_polar_deg.to_radians(),
            resolution: self.resolution,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceConfig {
    pub kind: AcceptanceKind,
    /// Aperture radius, degrees. Omitted → the flat-region radius found at
    /// `flat_tolerance_rad`.
    pub aperture_radius_deg: Option<f64>,
    pub fiber_core_diameter_um: f64,
    pub fiber_na: f64,
    pub fiber_focal_length_mm: f64,
    pub flat_tolerance_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceKind {
    Full,
    Aperture,
    Fiber,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            kind: AcceptanceKind::Aperture,
            aperture_radius_deg: None,
            fiber_core_diameter_um: 62.5,
            fiber_na: 0.22,
            fiber_focal_length_mm: 4.0,
            flat_tolerance_rad: DEFAULT_FLAT_TOLERANCE_RAD,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpConfig {
    pub waist_major_um: f64,
    pub waist_minor_um: f64,
    pub orientation_deg: f64,
    pub z_slices: usize,
}

impl Default for PumpConfig {
    fn default() -> Self {
        PumpConfig {
            waist_major_um: 100.0,
            waist_minor_um: 100.0,
            orientation_deg: 0.0,
            z_slices: DEFAULT_Z_SLICES,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectionConfig {
    pub waist_um: f64,
}

impl Default for CollectionConfig {
    fn default() -> Self {
        CollectionConfig { waist_um: 45.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub step_deg: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { step_deg: 1.0 }
    }
}

impl SourceConfig {
    /// Parse and validate. Empty text yields the full default configuration;
    /// unknown keys and type mismatches carry line/field diagnostics from the
    /// parser.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SourceConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let pump = Wavelength::new(self.pump_wavelength_nm)
            .map_err(|e| Error::Config(format!("pump_wavelength_nm: {e}")))?;
        let signal = Wavelength::new(self.signal_wavelength_nm)
            .map_err(|e| Error::Config(format!("signal_wavelength_nm: {e}")))?;
        idler_wavelength(pump, signal)
            .map_err(|e| Error::Config(format!("signal_wavelength_nm: {e}")))?;
        if self.spectral_fwhm_nm < 0.0 {
            return Err(Error::Config("spectral_fwhm_nm must be >= 0".into()));
        }
        if self.stack.bbo_length_mm < 0.0 {
            return Err(Error::Config("stack.bbo_length_mm must be >= 0".into()));
        }
        if self.stack.yvo_length_mm < 0.0 {
            return Err(Error::Config("stack.yvo_length_mm must be >= 0".into()));
        }
        self.grid.to_grid().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.pump.waist_major_um < self.pump.waist_minor_um {
            return Err(Error::Config(
                "pump.waist_major_um must be >= pump.waist_minor_um".into(),
            ));
        }
        if self.sweep.step_deg <= 0.0 {
            return Err(Error::Config("sweep.step_deg must be > 0".into()));
        }
        self.acceptance_spec(None).validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn pump_wavelength(&self) -> Wavelength {
        Wavelength::new(self.pump_wavelength_nm).expect("validated")
    }

    pub fn signal_wavelength(&self) -> Wavelength {
        Wavelength::new(self.signal_wavelength_nm).expect("validated")
    }

    pub fn idler_wavelength(&self) -> Wavelength {
        idler_wavelength(self.pump_wavelength(), self.signal_wavelength()).expect("validated")
    }

    /// Crystal cut angle in radians: configured, or the collinear type-I
    /// phase-matching solution at the configured wavelengths.
    pub fn cut_angle_rad(&self, db: &MaterialDb) -> Result<f64> {
        match self.stack.bbo_cut_angle_deg {
            Some(deg) => Ok(deg.to_radians()),
            None => db.type_one_cut_angle(
                MaterialId::Bbo,
                self.pump_wavelength(),
                self.signal_wavelength(),
                self.idler_wavelength(),
            ),
        }
    }

    /// Build the stack. With `auto_compensator` set, `solved_yvo_mm`
    /// installs the solved length (0 mm when not provided, e.g. for the
    /// pre-solve stack).
    pub fn build_stack(&self, db: &MaterialDb, solved_yvo_mm: Option<f64>) -> Result<CrystalStack> {
        let yvo = if self.stack.auto_compensator {
            solved_yvo_mm.unwrap_or(0.0)
        } else {
            self.stack.yvo_length_mm
        };
        let mut stack = CrystalStack::parallel_source(
            self.pump_wavelength(),
            self.stack.bbo_length_mm,
            self.cut_angle_rad(db)?,
            yvo,
            HwpModel {
                quartz_mm: self.stack.hwp_quartz_mm,
                mgf2_mm: self.stack.hwp_mgf2_mm,
            },
        )?;
        stack.include_pump_terms = self.stack.include_pump_terms;
        Ok(stack)
    }

    /// Acceptance specification; `flat_radius_rad` fills an omitted aperture
    /// radius (the flat-region operating point).
    pub fn acceptance_spec(&self, flat_radius_rad: Option<f64>) -> AcceptanceSpec {
        match self.acceptance.kind {
            AcceptanceKind::Full => AcceptanceSpec::Full,
            AcceptanceKind::Aperture => AcceptanceSpec::Aperture {
                radius_rad: self
                    .acceptance
                    .aperture_radius_deg
                    .map(|d| d.to_radians())
                    .or(flat_radius_rad)
                    .unwrap_or(DEFAULT_FLAT_TOLERANCE_RAD / 2.0),
            },
            AcceptanceKind::Fiber => AcceptanceSpec::Fiber {
                core_diameter_um: self.acceptance.fiber_core_diameter_um,
                numerical_aperture: self.acceptance.fiber_na,
                focal_length_mm: self.acceptance.fiber_focal_length_mm,
            },
        }
    }

    pub fn spectral_spec(&self) -> SpectralSpec {
        SpectralSpec {
            fwhm_nm: self.spectral_fwhm_nm,
            samples: self.spectral_samples,
        }
    }

    pub fn bell_target(&self) -> BellTarget {
        self.stack.target_state.into()
    }

    pub fn pump_beam(&self) -> GaussianBeam {
        GaussianBeam {
            waist_major_um: self.pump.waist_major_um,
            waist_minor_um: self.pump.waist_minor_um,
            orientation_rad: self.pump.orientation_deg.to_radians(),
            wavelength_nm: self.pump_wavelength_nm,
            waist_position_mm: 0.5 * self.stack.bbo_length_mm,
        }
    }

    pub fn collection_mode(&self) -> CollectionMode {
        CollectionMode {
            waist_um: self.collection.waist_um,
            wavelength_nm: 2.0 * self.pump_wavelength_nm,
        }
    }

    pub fn overlap_geometry(&self, db: &MaterialDb) -> Result<OverlapGeometry> {
        Ok(OverlapGeometry {
            crystal_length_mm: self.stack.bbo_length_mm,
            walkoff_angle_rad: db.walkoff_angle(
                MaterialId::Bbo,
                self.cut_angle_rad(db)?,
                self.pump_wavelength(),
            )?,
            walkoff_direction_rad: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_config() {
        let cfg = SourceConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.pump_wavelength_nm, 405.0);
        assert_eq!(cfg.signal_wavelength_nm, 760.0);
        assert_eq!(cfg.stack.bbo_length_mm, 6.0);
        assert_eq!(cfg.stack.yvo_length_mm, 3.6);
        assert!(!cfg.stack.auto_compensator);
        assert_eq!(cfg.grid.resolution, 201);
        assert_eq!(cfg.acceptance.kind, AcceptanceKind::Aperture);
    }

    #[test]
    fn dotted_keys_parse() {
        let cfg = SourceConfig::from_toml_str(
            "stack.bbo_length_mm = 5.0\nstack.yvo_length_mm = 3.12\ngrid.resolution = 51\n",
        )
        .unwrap();
        assert_eq!(cfg.stack.bbo_length_mm, 5.0);
        assert_eq!(cfg.stack.yvo_length_mm, 3.12);
        assert_eq!(cfg.grid.resolution, 51);
    }

    #[test]
    fn auto_compensator_overrides_the_configured_length() {
        let cfg = SourceConfig::from_toml_str(
            "stack.bbo_length_mm = 5.0\nstack.auto_compensator = true\n",
        )
        .unwrap();
        let db = MaterialDb::builtin();
        let pre_solve = cfg.build_stack(db, None).unwrap();
        assert_eq!(pre_solve.compensator_length_mm(), Some(0.0));
        let solved = cfg.build_stack(db, Some(3.12)).unwrap();
        assert_eq!(solved.compensator_length_mm(), Some(3.12));
        // without the flag the configured length wins
        let fixed = SourceConfig::default().build_stack(db, Some(9.9)).unwrap();
        assert_eq!(fixed.compensator_length_mm(), Some(3.6));
    }

    #[test]
    fn signal_not_above_pump_is_a_config_error() {
        let err = SourceConfig::from_toml_str("signal_wavelength_nm = 400.0\n").unwrap_err();
        assert!(err.to_string().contains("signal_wavelength"), "{err}");
    }

    #[test]
    fn unknown_keys_are_diagnosed() {
        let err = SourceConfig::from_toml_str("stack.bbo_lenght_mm = 6.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bbo_lenght_mm") || msg.contains("unknown"), "{msg}");
    }

    #[test]
    fn default_cut_angle_comes_from_phase_matching() {
        let cfg = SourceConfig::default();
        let cut = cfg.cut_angle_rad(MaterialDb::builtin()).unwrap();
        assert!((cut.to_degrees() - 28.6).abs() < 0.5);
        let pinned = SourceConfig::from_toml_str("stack.bbo_cut_angle_deg = 29.2\n").unwrap();
        let cut = pinned.cut_angle_rad(MaterialDb::builtin()).unwrap();
        assert!((cut.to_degrees() - 29.2).abs() < 1e-12);
    }
}
