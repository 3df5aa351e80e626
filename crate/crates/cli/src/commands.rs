//! Subcommand bodies. `main` parses flags and prints; these do the work.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use memfract::cv_data::{parse_cv_csv, CvRun};
use memfract::memfract::Lattice;
use memfract::synth::{
    simulate_linear_element, simulate_memristor, tent_sweep, triangular_sweep, ElementKind,
    MemristorParams, Sweep,
};

use crate::config::AnalysisConfig;
use crate::report::{analyze, fit_models, spike_report, FitReport, Report, SpikeReport};
use crate::svg;
use crate::CliError;

pub fn load_run(path: &Path) -> Result<CvRun, CliError> {
    let file = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_cv_csv(file, &label).map_err(|e| {
        let inner = CliError::from(e);
        CliError {
            message: format!("{}: {}", path.display(), inner.message),
            ..inner
        }
    })
}

pub fn load_lattice(path: Option<&Path>) -> Result<Lattice, CliError> {
    match path {
        None => Ok(Lattice::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            Lattice::from_json(&text)
                .map_err(|e| CliError::input(format!("{}: {e}", p.display())))
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::internal(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_fit(input: &Path, cfg: &AnalysisConfig) -> Result<FitReport, CliError> {
    let run = load_run(input)?;
    Ok(fit_models(&run, cfg.degree, cfg.piecewise)?)
}

pub fn write_fit(fit: &FitReport, dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    write_text(&dir.join("model.json"), &to_json(fit)?)
}

pub fn cmd_analyze(input: &Path, cfg: &AnalysisConfig) -> Result<Report, CliError> {
    let run = load_run(input)?;
    let lattice = load_lattice(cfg.lattice_file.as_deref())?;
    Ok(analyze(&run, &input.display().to_string(), cfg, lattice)?)
}

/// `report.json` plus every figure, into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    write_text(&dir.join("report.json"), &to_json(report)?)?;
    for (name, body) in svg::render_all(report) {
        write_text(&dir.join(name), &body)?;
    }
    Ok(())
}

pub fn summary(report: &Report) -> String {
    let o = &report.optimum;
    let nearest = report
        .classification
        .nearest()
        .unwrap_or("-");
    let triangle = report
        .classification
        .containing_triangle
        .as_ref()
        .map(|h| h.name.as_str())
        .unwrap_or("-");
    let score = match (&report.score.value, &report.score.error) {
        (Some(s), _) => format!("{:.4}", s.value),
        (None, Some(e)) => format!("n/a ({e})"),
        (None, None) => "n/a".into(),
    };
    let spikes = report
        .spikes
        .value
        .as_ref()
        .map(|s| s.train.spike_indices.len().to_string())
        .unwrap_or_else(|| "n/a".into());
    let rel = o
        .relative_range
        .map(|r| format!("{r:.3e}"))
        .unwrap_or_else(|| "n/a".into());
    format!(
        "orders        ({:.3}, {:.3})\nrange         {:.6e} (relative {rel})\nadmissible    {} couples\ntriangle      {triangle}\nnearest       {nearest}{}\nmemristance   {score}\nspikes        {spikes}\n",
        o.orders.alpha1,
        o.orders.alpha2,
        o.range,
        report.search.admissible_count,
        if report.classification.memoryless { " (memoryless)" } else { "" },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Voltage sweep only, zero current.
    Sweep,
    Memristor,
    Resistor,
    Capacitor,
    Inductor,
}

impl FromStr for SynthKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "sweep" => SynthKind::Sweep,
            "memristor" => SynthKind::Memristor,
            "resistor" => SynthKind::Resistor,
            "capacitor" => SynthKind::Capacitor,
            "inductor" => SynthKind::Inductor,
            other => return Err(CliError::input(format!("unknown synth kind '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Triangle,
    Tent,
}

impl FromStr for Shape {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "triangle" => Ok(Shape::Triangle),
            "tent" => Ok(Shape::Tent),
            other => Err(CliError::input(format!("unknown sweep shape '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub kind: SynthKind,
    /// Peak-to-peak voltage; defaults to 2 V for the memristor and 1 V otherwise.
    pub vpp: Option<f64>,
    pub samples: usize,
    /// Seconds per sample; defaults to 0.002 s for the memristor and 0.01 s otherwise.
    pub delay: Option<f64>,
    pub shape: Shape,
    /// Ohms, farads or henries for the linear elements.
    pub value: Option<f64>,
    pub memristor: MemristorParams,
}

impl SynthOptions {
    pub fn new(kind: SynthKind) -> Self {
        SynthOptions {
            kind,
            vpp: None,
            samples: 401,
            delay: None,
            shape: Shape::Triangle,
            value: None,
            memristor: MemristorParams::default(),
        }
    }
}

pub fn cmd_synth(opts: &SynthOptions) -> Result<CvRun, CliError> {
    let memristor = opts.kind == SynthKind::Memristor;
    let vpp = opts.vpp.unwrap_or(if memristor { 2.0 } else { 1.0 });
    let delay = opts.delay.unwrap_or(if memristor { 0.002 } else { 0.01 });
    let sweep: Sweep = match opts.shape {
        Shape::Triangle => triangular_sweep(vpp / 2.0, opts.samples, delay)?,
        Shape::Tent => tent_sweep(vpp / 2.0, opts.samples, delay)?,
    };
    let linear = |kind: ElementKind, default: f64| -> Result<CvRun, CliError> {
        Ok(simulate_linear_element(kind, opts.value.unwrap_or(default), &sweep)?)
    };
    match opts.kind {
        SynthKind::Sweep => {
            let zeros = vec![0.0; sweep.voltage.len()];
            let range = (-sweep.v_peak, sweep.v_peak);
            Ok(CvRun::new(sweep.time, sweep.voltage, zeros, range, sweep.step_delay, "sweep")?)
        }
        SynthKind::Memristor => Ok(simulate_memristor(&opts.memristor, &sweep)?),
        SynthKind::Resistor => linear(ElementKind::Resistor, 1e3),
        SynthKind::Capacitor => linear(ElementKind::Capacitor, 1e-6),
        SynthKind::Inductor => linear(ElementKind::Inductor, 1e-3),
    }
}

pub fn write_run(run: &CvRun, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    run.write_csv(BufWriter::new(file))?;
    Ok(())
}

pub fn cmd_spikes(input: &Path, cfg: &AnalysisConfig) -> Result<(CvRun, SpikeReport), CliError> {
    let run = load_run(input)?;
    let report = spike_report(&run, cfg.spike_k, cfg.interval_bin_width)?;
    Ok((run, report))
}

/// `spikes.csv`, `intervals.csv` and `spike_intervals.svg` into `dir`.
pub fn write_spikes(report: &SpikeReport, dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    let spikes = dir.join("spikes.csv");
    report
        .train
        .write_csv(BufWriter::new(File::create(&spikes).map_err(|e| io_error(&spikes, e))?))?;
    let intervals = dir.join("intervals.csv");
    report
        .intervals
        .write_csv(BufWriter::new(File::create(&intervals).map_err(|e| io_error(&intervals, e))?))?;
    write_text(
        &dir.join("spike_intervals.svg"),
        &svg::bars(
            "Voltage interval between spikes",
            "|dv| (V)",
            &report.intervals.bin_edges,
            &report.intervals.counts,
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_defaults_per_kind() {
        let m = cmd_synth(&SynthOptions::new(SynthKind::Memristor)).unwrap();
        assert_eq!(m.len(), 401);
        assert!((m.step_delay - 0.002).abs() < 1e-15);
        assert!((m.sweep_range.1 - 1.0).abs() < 1e-12);
        let s = cmd_synth(&SynthOptions::new(SynthKind::Sweep)).unwrap();
        assert!(s.current.iter().all(|&i| i == 0.0));
        assert!((s.sweep_range.1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_kind_is_input_error() {
        assert_eq!("diode".parse::<SynthKind>().unwrap_err().code, 2);
        assert_eq!("square".parse::<Shape>().unwrap_err().code, 2);
    }

    #[test]
    fn bad_parameters_exit_two() {
        let mut opts = SynthOptions::new(SynthKind::Resistor);
        opts.samples = 2;
        assert_eq!(cmd_synth(&opts).unwrap_err().code, 2);
        let mut opts = SynthOptions::new(SynthKind::Memristor);
        opts.memristor.r_on = -1.0;
        assert_eq!(cmd_synth(&opts).unwrap_err().code, 2);
    }

    #[test]
    fn missing_file_names_path() {
        let e = load_run(Path::new("/nonexistent/run.csv")).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("/nonexistent/run.csv"));
    }
}
