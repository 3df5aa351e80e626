use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Effective analysis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub degree: usize,
    pub piecewise: bool,
    pub alpha_step: f64,
    pub grid_points: usize,
    pub singular_delta: f64,
    pub spike_k: f64,
    /// Bin width of the inter-spike voltage histogram, volts.
    pub interval_bin_width: f64,
    #[serde(skip)]
    pub lattice_file: Option<PathBuf>,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            degree: 30,
            piecewise: false,
            alpha_step: 0.01,
            grid_points: 2001,
            singular_delta: 1e-9,
            spike_k: 4.0,
            interval_bin_width: 0.01,
            lattice_file: None,
            output_dir: PathBuf::from("memfract-report"),
        }
    }
}

/// Any subset of the settings, as read from a config file or flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub degree: Option<usize>,
    pub piecewise: Option<bool>,
    pub alpha_step: Option<f64>,
    pub grid_points: Option<usize>,
    pub singular_delta: Option<f64>,
    pub spike_k: Option<f64>,
    pub interval_bin_width: Option<f64>,
    pub lattice_file: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    fn apply(self, cfg: &mut AnalysisConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        take!(
            degree,
            piecewise,
            alpha_step,
            grid_points,
            singular_delta,
            spike_k,
            interval_bin_width,
            output_dir
        );
        if self.lattice_file.is_some() {
            cfg.lattice_file = self.lattice_file;
        }
    }
}

impl AnalysisConfig {
    /// Defaults, overridden by the file, overridden by flags.
    pub fn resolve(file: Option<PartialConfig>, flags: PartialConfig) -> Result<Self, CliError> {
        let mut cfg = AnalysisConfig::default();
        if let Some(file) = file {
            file.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::input(m));
        if !(1..=40).contains(&self.degree) {
            return fail(format!("degree {} must lie in [1, 40]", self.degree));
        }
        if !(self.alpha_step > 0.0 && self.alpha_step <= 0.1) {
            return fail(format!("alpha step {} must lie in (0, 0.1]", self.alpha_step));
        }
        if self.grid_points < 101 {
            return fail(format!("grid of {} points; need at least 101", self.grid_points));
        }
        if !(self.singular_delta >= 0.0 && self.singular_delta < 1.0) {
            return fail(format!("singular delta {} must lie in [0, 1)", self.singular_delta));
        }
        if !(self.spike_k >= 0.0) {
            return fail(format!("spike k {} must be >= 0", self.spike_k));
        }
        if !(self.interval_bin_width > 0.0) {
            return fail(format!("bin width {} must be > 0", self.interval_bin_width));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = PartialConfig {
            degree: Some(12),
            alpha_step: Some(0.05),
            ..PartialConfig::default()
        };
        let flags = PartialConfig {
            degree: Some(20),
            ..PartialConfig::default()
        };
        let cfg = AnalysisConfig::resolve(Some(file), flags).unwrap();
        assert_eq!(cfg.degree, 20);
        assert_eq!(cfg.alpha_step, 0.05);
        assert_eq!(cfg.grid_points, 2001);
    }

    #[test]
    fn out_of_range_settings() {
        for flags in [
            PartialConfig { degree: Some(41), ..Default::default() },
            PartialConfig { alpha_step: Some(0.2), ..Default::default() },
            PartialConfig { grid_points: Some(100), ..Default::default() },
        ] {
            assert_eq!(AnalysisConfig::resolve(None, flags).unwrap_err().code, 2);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PartialConfig>(r#"{"degre": 3}"#).is_err());
    }
}
