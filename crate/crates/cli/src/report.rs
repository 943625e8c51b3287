//! Deterministic report and CSV rendering. Identical inputs and versions
//! must produce byte-identical artifacts, so everything funnels through
//! fixed-precision formatting and no timestamps or paths are echoed.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use spdc_core::config::SourceConfig;

/// 9 significant digits, the CSV number contract.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub struct Artifacts {
    out_dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(out_dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Artifacts {
            out_dir: out_dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Write a CSV artifact: one header row, comma separation, LF endings,
    /// UTF-8, values at 9 significant digits.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(name);
        let mut text = String::new();
        text.push_str(header);
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|&v| sig9(v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let mut file = fs::File::create(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        file.write_all(text.as_bytes())?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// Human-readable run summary; also echoed to stdout.
pub struct Report {
    text: String,
}

impl Report {
    pub fn new(subcommand: &str, material_version: &str, seed: Option<u64>, cfg: &SourceConfig) -> Report {
        let mut text = String::new();
        let _ = writeln!(text, "# spdc {subcommand} report");
        let _ = writeln!(text, "tool_version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "material_data_version = {material_version}");
        match seed {
            Some(s) => {
                let _ = writeln!(text, "seed = {s} (reserved; all computations deterministic)");
            }
            None => {
                let _ = writeln!(text, "seed = none (all computations deterministic)");
            }
        }
        let _ = writeln!(text, "[inputs]");
        let _ = writeln!(
            text,
            "pump_wavelength_nm = {} (assumed default, not a measured value)",
            cfg.pump_wavelength_nm
        );
        let _ = writeln!(
            text,
            "signal_wavelength_nm = {} (assumed default, not a measured value)",
            cfg.signal_wavelength_nm
        );
        let _ = writeln!(
            text,
            "idler_wavelength_nm = {:.6} (energy conservation)",
            cfg.idler_wavelength().nm()
        );
        let _ = writeln!(text, "bbo_length_mm = {}", cfg.stack.bbo_length_mm);
        let _ = writeln!(
            text,
            "yvo_length_mm = {}",
            if cfg.stack.auto_compensator {
                "auto (solved below)".to_string()
            } else {
                format!("{}", cfg.stack.yvo_length_mm)
            }
        );
        let _ = writeln!(
            text,
            "hwp = quartz {} mm + MgF2 {} mm",
            cfg.stack.hwp_quartz_mm, cfg.stack.hwp_mgf2_mm
        );
        Report { text }
    }

    pub fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    pub fn section(&mut self, name: &str) {
        let _ = writeln!(self.text, "[{name}]");
    }

    pub fn finish(self, artifacts: &mut Artifacts, name: &str) -> anyhow::Result<()> {
        artifacts.write_text(name, &self.text)?;
        print!("{}", self.text);
        Ok(())
    }
}
