//! `spdc` — design calculator for a parallel-crystal type-I SPDC entangled
//! photon source. Subcommands cover refractive indices, temporal-compensator
//! optimization, angle-resolved phase maps, polarizer sweeps, entanglement
//! quality, and elliptical-pump brightness. Outputs are CSV artifacts plus a
//! deterministic text report.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spdc_core::anglemap::{find_flat_region, phase_map};
use spdc_core::compensator::{fit_linear_law, optimal_compensator_length, DEFAULT_BRACKET_MM};
use spdc_core::config::{AcceptanceKind, SourceConfig};
use spdc_core::material::{Axis, MaterialDb, MaterialId};
use spdc_core::overlap::orientation_scan;
use spdc_core::pipeline::{align_to_target, spectral_angular_ensemble};
use spdc_core::state::{mixed_state, polarizer_sweep, visibility};

use report::{sig9, Artifacts, Report};

#[derive(Parser)]
#[command(name = "spdc", version, about)]
struct Cli {
    /// Source configuration file (TOML; empty or absent = defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Material dispersion data file overriding the built-in set.
    #[arg(long, global = true)]
    materials: Option<PathBuf>,

    /// Output directory for CSV artifacts and reports.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Reserved. All computations are deterministic; the value is only
    /// echoed into reports.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refractive indices of every registered material at the configured
    /// wavelengths.
    Index,
    /// Solve the temporal-compensator length and fit the linear scaling law.
    Compensate,
    /// Angle-resolved phase-difference map and its flat region.
    Phasemap,
    /// Single-polarizer sweep of the modeled state.
    Sweep,
    /// Coherence, visibility, and fidelity for the configured acceptance.
    Quality,
    /// Relative brightness of the configured pump ellipse versus orientation.
    Brightness,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<spdc_core::Error>()
                .map(exit_code)
                .unwrap_or(1);
            ExitCode::from(code)
        }
    }
}

fn exit_code(err: &spdc_core::Error) -> u8 {
    use spdc_core::Error::*;
    match err {
        Config(_) | Domain(_) => 2,
        WavelengthOutOfRange { .. } | MissingMaterial { .. } | MaterialData(_) => 3,
        Bracket { .. } | NoConvergence { .. } => 4,
        Discretization { .. } => 5,
        EmptyEnsemble | UndefinedVisibility => 6,
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let db = match &cli.materials {
        Some(path) => MaterialDb::from_path(path)?,
        None => MaterialDb::builtin().clone(),
    };
    let cfg = match &cli.config {
        Some(path) => SourceConfig::from_path(path)?,
        None => SourceConfig::default(),
    };
    let mut artifacts = Artifacts::new(&cli.out)?;

    match cli.command {
        Command::Index => cmd_index(&db, &cfg, cli, &mut artifacts),
        Command::Compensate => cmd_compensate(&db, &cfg, cli, &mut artifacts),
        Command::Phasemap => cmd_phasemap(&db, &cfg, cli, &mut artifacts),
        Command::Sweep => cmd_sweep(&db, &cfg, cli, &mut artifacts),
        Command::Quality => cmd_quality(&db, &cfg, cli, &mut artifacts),
        Command::Brightness => cmd_brightness(&db, &cfg, cli, &mut artifacts),
    }
}

fn cmd_index(
    db: &MaterialDb,
    cfg: &SourceConfig,
    cli: &Cli,
    artifacts: &mut Artifacts,
) -> anyhow::Result<()> {
    let mut report = Report::new("index", db.version(), cli.seed, cfg);
    let wavelengths = [
        cfg.pump_wavelength(),
        cfg.signal_wavelength(),
        cfg.idler_wavelength(),
    ];
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut lines = Vec::new();
    for material in MaterialId::ALL {
        for axis in [Axis::Ordinary, Axis::Extraordinary] {
            for lambda in wavelengths {
                // wavelengths outside a fit's validity are omitted, not extrapolated
                if let Ok(n) = db.refractive_index(material, axis, lambda) {
                    rows.push(vec![
                        material_code(material),
                        axis_code(axis),
                        lambda.nm(),
                        n,
                    ]);
                    lines.push(format!("{material} {axis} @ {:.3} nm: n = {n:.6}", lambda.nm()));
                }
            }
        }
    }
    let cut = cfg.cut_angle_rad(db)?;
    artifacts.write_csv("index.csv", "material_code,axis_code,wavelength_nm,n", rows)?;
    report.section("indices (material codes 0..3 = BBO,YVO4,Quartz,MgF2; axis 0=o, 1=e)");
    for l in lines {
        report.line(l);
    }
    report.section("phase matching");
    report.kv("bbo_cut_angle_deg", format!("{:.4}", cut.to_degrees()));
    report.kv(
        "pump_walkoff_rad",
        format!("{:.6}", db.walkoff_angle(MaterialId::Bbo, cut, cfg.pump_wavelength())?),
    );
    report.finish(artifacts, "index_report.txt")
}

fn material_code(m: MaterialId) -> f64 {
    MaterialId::ALL.iter().position(|&x| x == m).unwrap() as f64
}

fn axis_code(a: Axis) -> f64 {
    match a {
        Axis::Ordinary => 0.0,
        Axis::Extraordinary => 1.0,
    }
}

fn cmd_compensate(
    db: &MaterialDb,
    cfg: &SourceConfig,
    cli: &Cli,
    artifacts: &mut Artifacts,
) -> anyhow::Result<()> {
    let mut report = Report::new("compensate", db.version(), cli.seed, cfg);
    let signal = cfg.signal_wavelength();
    let template = cfg.build_stack(db, None)?;

    let own = optimal_compensator_length(db, &template, signal, DEFAULT_BRACKET_MM)?;
    report.section("configured source");
    report.kv("bbo_length_mm", cfg.stack.bbo_length_mm);
    report.kv("solved_yvo_length_mm", format!("{:.4}", own.yvo_length_mm));
    report.kv(
        "residual_derivative_rad_per_nm",
        format!("{:.3e}", own.residual_derivative),
    );
    report.kv(
        "second_derivative_rad_per_nm2",
        format!("{:.6e}", own.second_derivative),
    );
    report.kv(
        "derivative_nulled_at_nm",
        format!(
            "{} (signal wavelength; idler slaved at fixed pump)",
            own.center_wavelength_nm
        ),
    );

    let lengths = [4.0, 5.0, 6.0, 7.0];
    let (points, fit) = fit_linear_law(db, &template, &lengths, signal)?;
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|(l, sol)| {
            vec![
                *l,
                sol.yvo_length_mm,
                sol.residual_derivative,
                sol.second_derivative,
            ]
        })
        .collect();
    artifacts.write_csv(
        "compensate.csv",
        "bbo_length_mm,yvo_length_mm,residual_rad_per_nm,second_derivative_rad_per_nm2",
        rows,
    )?;

    report.section("linear law");
    for (l, sol) in &points {
        report.line(format!(
            "L_BBO = {l} mm -> L_YVO = {:.4} mm (residual {:.2e} rad/nm)",
            sol.yvo_length_mm, sol.residual_derivative
        ));
    }
    report.kv("slope", format!("{:.4}", fit.slope));
    report.kv("intercept_mm", format!("{:.4}", fit.intercept_mm));
    report.kv("r_squared", format!("{:.8}", fit.r_squared));
    report.finish(artifacts, "compensate_report.txt")
}

/// Resolve the compensator length: configured, or solved when
/// `auto_compensator` is set.
fn resolved_stack(
    db: &MaterialDb,
    cfg: &SourceConfig,
    report: &mut Report,
) -> anyhow::Result<spdc_core::stack::CrystalStack> {
    if cfg.stack.auto_compensator {
        let pre = cfg.build_stack(db, None)?;
        let sol =
            optimal_compensator_length(db, &pre, cfg.signal_wavelength(), DEFAULT_BRACKET_MM)?;
        report.kv("solved_yvo_length_mm", format!("{:.4}", sol.yvo_length_mm));
        Ok(cfg.build_stack(db, Some(sol.yvo_length_mm))?)
    } else {
        Ok(cfg.build_stack(db, None)?)
    }
}

fn cmd_phasemap(
    db: &MaterialDb,
    cfg: &SourceConfig,
    cli: &Cli,
    artifacts: &mut Artifacts,
) -> anyhow::Result<()> {
    let mut report = Report::new("phasemap", db.version(), cli.seed, cfg);
    let stack = resolved_stack(db, cfg, &mut report)?;
    let grid = cfg.grid.to_grid();
    let map = phase_map(db, &stack, cfg.signal_wavelength(), cfg.idler_wavelength(), grid)?;
    let flat = find_flat_region(&map, cfg.acceptance.flat_tolerance_rad);

    let mut rows = Vec::with_capacity(grid.resolution * grid.resolution);
    for i in 0..grid.resolution {
        for j in 0..grid.resolution {
            rows.push(vec![grid.azimuth_at(j), grid.polar_at(i), map.value(i, j)]);
        }
    }
    artifacts.write_csv("phasemap.csv", "azimuth_rad,polar_rad,delta_phi_rad", rows)?;

    let summary = format!(
        "flat_center_azimuth_rad,{}\nflat_center_polar_rad,{}\nflat_radius_rad,{}\n\
         flat_tolerance_rad,{}\ncenter_delta_phi_rad,{}\n",
        sig9(flat.center.0),
        sig9(flat.center.1),
        sig9(flat.radius_rad),
        sig9(flat.tolerance_rad),
        sig9(map.center_value),
    );
    artifacts.write_text("phasemap_summary.txt", &summary)?;

    report.section("map");
    report.kv("grid_resolution", grid.resolution);
    report.kv("center_delta_phi_rad", format!("{:.6}", map.center_value));
    report.section("flat region");
    report.kv(
        "center_deg",
        format!(
            "({:.4}, {:.4})",
            flat.center.0.to_degrees(),
            flat.center.1.to_degrees()
        ),
    );
    report.kv("radius_deg", format!("{:.4}", flat.radius_rad.to_degrees()));
    report.kv("tolerance_rad", format!("{:.6}", flat.tolerance_rad));
    report.finish(artifacts, "phasemap_report.txt")
}

struct QualityNumbers {
    kappa_abs: f64,
    visibility: f64,
    fidelity: f64,
    applied_offset_rad: f64,
    accepted_points: usize,
    state: spdc_core::state::TwoQubitState,
}

fn quality_numbers(
    db: &MaterialDb,
    cfg: &SourceConfig,
    stack: &spdc_core::stack::CrystalStack,
) -> anyhow::Result<QualityNumbers> {
    let grid = cfg.grid.to_grid();
    let signal = cfg.signal_wavelength();
    let map = phase_map(db, stack, signal, cfg.idler_wavelength(), grid)?;
    let flat = find_flat_region(&map, cfg.acceptance.flat_tolerance_rad);
    let acceptance = cfg.acceptance_spec(Some(flat.radius_rad));
    let ensemble = spectral_angular_ensemble(
        db,
        stack,
        signal,
        &map,
        &acceptance,
        cfg.acceptance.flat_tolerance_rad,
        &cfg.spectral_spec(),
    )?;
    let accepted_points = ensemble.len() / cfg.spectral_spec().offsets().len().max(1);
    let (aligned, applied_offset_rad) = align_to_target(&ensemble, cfg.bell_target());
    let state = mixed_state(&aligned)?;
    let angles: Vec<f64> = sweep_angles(cfg);
    let sweep = polarizer_sweep(&state, &angles);
    Ok(QualityNumbers {
        kappa_abs: state.coherence().norm(),
        visibility: visibility(&sweep)?,
        fidelity: state.fidelity(cfg.bell_target()),
        applied_offset_rad,
        accepted_points,
        state,
    })
}

fn sweep_angles(cfg: &SourceConfig) -> Vec<f64> {
    let step = cfg.sweep.step_deg;
    let n = (180.0 / step).round() as usize;
    (0..=n).map(|k| (k as f64 * step).to_radians()).collect()
}

fn acceptance_description(cfg: &SourceConfig) -> String {
    match cfg.acceptance.kind {
        AcceptanceKind::Full => "full (every grid point)".into(),
        AcceptanceKind::Aperture => match cfg.acceptance.aperture_radius_deg {
            Some(d) => format!("aperture, radius {d} deg"),
            None => "aperture at the flat-region radius".into(),
        },
        AcceptanceKind::Fiber => format!(
            "fiber {} um core, NA {}, f = {} mm",
            cfg.acceptance.fiber_core_diameter_um,
            cfg.acceptance.fiber_na,
            cfg.acceptance.fiber_focal_length_mm
        ),
    }
}

fn cmd_sweep(
    db: &MaterialDb,
    cfg: &SourceConfig,
    cli: &Cli,
    artifacts: &mut Artifacts,
) -> anyhow::Result<()> {
    let mut report = Report::new("sweep", db.version(), cli.seed, cfg);
    let stack = resolved_stack(db, cfg, &mut report)?;
    let q = quality_numbers(db, cfg, &stack)?;
    let angles = sweep_angles(cfg);
    let sweep = polarizer_sweep(&q.state, &angles);
    let rows: Vec<Vec<f64>> = angles
        .iter()
        .zip(&sweep.rates)
        .map(|(a, r)| vec![a.to_degrees(), *r])
        .collect();
    artifacts.write_csv("sweep.csv", "angle_deg,rate", rows)?;

    report.section("sweep");
    report.kv("acceptance", acceptance_description(cfg));
    report.kv("target_state", cfg.bell_target());
    report.kv("b_max", format!("{:.6}", sweep.b_max));
    report.kv("b_min", format!("{:.6}", sweep.b_min));
    report.kv("visibility", format!("{:.6}", q.visibility));
    report.kv("fidelity", format!("{:.6}", q.fidelity));
    report.finish(artifacts, "sweep_report.txt")
}

fn cmd_quality(
    db: &MaterialDb,
    cfg: &SourceConfig,
    cli: &Cli,
    artifacts: &mut Artifacts,
) -> anyhow::Result<()> {
    let mut report = Report::new("quality", db.version(), cli.seed, cfg);
    let stack = resolved_stack(db, cfg, &mut report)?;
    let q = quality_numbers(db, cfg, &stack)?;
    artifacts.write_csv(
        "quality.csv",
        "kappa_abs,visibility,fidelity,applied_offset_rad,accepted_points",
        [vec![
            q.kappa_abs,
            q.visibility,
            q.fidelity,
            q.applied_offset_rad,
            q.accepted_points as f64,
        ]],
    )?;
    report.section("quality");
    report.kv("acceptance", acceptance_description(cfg));
    report.kv("accepted_grid_points", q.accepted_points);
    report.kv("kappa_abs", format!("{:.6}", q.kappa_abs));
    report.kv("visibility", format!("{:.6}", q.visibility));
    report.kv("target_state", cfg.bell_target());
    report.kv("fidelity", format!("{:.6}", q.fidelity));
    report.kv(
        "applied_phase_offset_rad",
        format!("{:.6} (constant tilt dialing the target state)", q.applied_offset_rad),
    );
    report.finish(artifacts, "quality_report.txt")
}

fn cmd_brightness(
    db: &MaterialDb,
    cfg: &SourceConfig,
    cli: &Cli,
    artifacts: &mut Artifacts,
) -> anyhow::Result<()> {
    let mut report = Report::new("brightness", db.version(), cli.seed, cfg);
    let geometry = cfg.overlap_geometry(db)?;
    let collection = cfg.collection_mode();
    let aspect = cfg.pump.waist_major_um / cfg.pump.waist_minor_um;
    let orientations: Vec<f64> = (0..=6).map(|k| (k as f64 * 15.0).to_radians()).collect();
    let scan = orientation_scan(
        aspect,
        cfg.pump.waist_major_um,
        &orientations,
        &collection,
        &geometry,
        cfg.pump.z_slices,
    )?;
    let rows: Vec<Vec<f64>> = scan
        .iter()
        .map(|(o, b)| vec![o.to_degrees(), *b])
        .collect();
    artifacts.write_csv("brightness.csv", "orientation_deg,relative_brightness", rows)?;

    report.section("brightness");
    report.kv("pump_aspect_ratio", format!("{aspect:.4}"));
    report.kv("pump_major_waist_um", cfg.pump.waist_major_um);
    report.kv("collection_waist_um", collection.waist_um);
    report.kv("walkoff_angle_rad", format!("{:.6}", geometry.walkoff_angle_rad));
    report.kv(
        "circular_reference",
        "1.0 (circular pump at the major waist)",
    );
    for (o, b) in &scan {
        report.line(format!(
            "orientation {:>5.1} deg -> relative brightness {:.4}",
            o.to_degrees(),
            b
        ));
    }
    report.finish(artifacts, "brightness_report.txt")
}
