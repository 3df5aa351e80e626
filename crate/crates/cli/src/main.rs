use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memfract::synth::MemristorParams;
use memfract_cli::commands::{self, Shape, SynthKind, SynthOptions};
use memfract_cli::config::{AnalysisConfig, PartialConfig};
use memfract_cli::{CliError, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "memfract", version, about = "Memfractance analysis of cyclic-voltammetry records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit polynomial models to v(t) and i(t); prints the model JSON.
    Fit {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Full pipeline; writes report.json and SVG figures.
    Analyze {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Synthetic CSV record: sweep, memristor, resistor, capacitor or inductor.
    Synth(SynthArgs),
    /// Current spikes and their voltage intervals.
    Spikes {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON file with any subset of the analysis settings
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    degree: Option<usize>,
    /// Fit the two sweep branches separately, split at the vertex
    #[arg(long)]
    piecewise: bool,
    #[arg(long)]
    alpha_step: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    singular_delta: Option<f64>,
    /// Spike prominence threshold in robust sigmas
    #[arg(long)]
    spike_k: Option<f64>,
    /// Bin width of the inter-spike voltage histogram, volts
    #[arg(long)]
    interval_bin_width: Option<f64>,
    /// Lattice JSON replacing the built-in plane
    #[arg(long = "lattice")]
    lattice_file: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<AnalysisConfig, CliError> {
        let file = self.config.as_deref().map(PartialConfig::from_file).transpose()?;
        let flags = PartialConfig {
            degree: self.degree,
            piecewise: self.piecewise.then_some(true),
            alpha_step: self.alpha_step,
            grid_points: self.grid_points,
            singular_delta: self.singular_delta,
            spike_k: self.spike_k,
            interval_bin_width: self.interval_bin_width,
            lattice_file: self.lattice_file.clone(),
            output_dir: self.output_dir.clone(),
        };
        AnalysisConfig::resolve(file, flags)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// sweep | memristor | resistor | capacitor | inductor
    kind: String,
    /// Peak-to-peak voltage [default: 2 for memristor, 1 otherwise]
    #[arg(long)]
    vpp: Option<f64>,
    #[arg(long, default_value_t = 401)]
    n: usize,
    /// Seconds per sample [default: 0.002 for memristor, 0.01 otherwise]
    #[arg(long)]
    delay: Option<f64>,
    /// triangle (0 -> +V -> -V -> 0) or tent (0 -> +V -> 0)
    #[arg(long, default_value = "triangle")]
    shape: String,
    /// Resistance, ohms
    #[arg(long)]
    r: Option<f64>,
    /// Capacitance, farads
    #[arg(long)]
    c: Option<f64>,
    /// Inductance, henries
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    r_on: Option<f64>,
    #[arg(long)]
    r_off: Option<f64>,
    /// Film thickness, m
    #[arg(long)]
    thickness: Option<f64>,
    /// Dopant mobility, m^2/(V s)
    #[arg(long)]
    mobility: Option<f64>,
    /// Initial doped width, m
    #[arg(long)]
    w0: Option<f64>,
    /// Joglekar window exponent, 0 for none
    #[arg(long)]
    window: Option<u32>,
    /// CSV destination; stdout when absent
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl SynthArgs {
    fn options(&self) -> Result<SynthOptions, CliError> {
        let kind: SynthKind = self.kind.parse()?;
        let value = match kind {
            SynthKind::Resistor => self.r,
            SynthKind::Capacitor => self.c,
            SynthKind::Inductor => self.l,
            _ => None,
        };
        let d = MemristorParams::default();
        Ok(SynthOptions {
            kind,
            vpp: self.vpp,
            samples: self.n,
            delay: self.delay,
            shape: self.shape.parse::<Shape>()?,
            value,
            memristor: MemristorParams {
                r_on: self.r_on.unwrap_or(d.r_on),
                r_off: self.r_off.unwrap_or(d.r_off),
                thickness: self.thickness.unwrap_or(d.thickness),
                mobility: self.mobility.unwrap_or(d.mobility),
                w0: self.w0.unwrap_or(d.w0),
                window_exponent: self.window.unwrap_or(d.window_exponent),
            },
        })
    }
}

fn print(text: &str) -> Result<(), CliError> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| CliError::internal(format!("stdout: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { input, config } => {
            let cfg = config.resolve()?;
            let fit = commands::cmd_fit(&input, &cfg)?;
            if let Some(dir) = &config.output_dir {
                commands::write_fit(&fit, dir)?;
            }
            print(&commands::to_json(&fit)?)
        }
        Command::Analyze { input, config } => {
            let cfg = config.resolve()?;
            let report = commands::cmd_analyze(&input, &cfg)?;
            commands::write_report(&report, &cfg.output_dir)?;
            print(&commands::summary(&report))?;
            print(&format!("report        {}\n", cfg.output_dir.join("report.json").display()))
        }
        Command::Synth(args) => {
            let run = commands::cmd_synth(&args.options()?)?;
            match &args.output {
                Some(path) => commands::write_run(&run, path),
                None => {
                    let mut buf = Vec::new();
                    run.write_csv(&mut buf)?;
                    print(&String::from_utf8_lossy(&buf))
                }
            }
        }
        Command::Spikes { input, config } => {
            let cfg = config.resolve()?;
            let (_, report) = commands::cmd_spikes(&input, &cfg)?;
            if let Some(dir) = &config.output_dir {
                commands::write_spikes(&report, dir)?;
            }
            print(&commands::to_json(&report)?)
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var("MEMFRACT_THREADS") {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::input(format!("MEMFRACT_THREADS={value}: expected a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_pool().and_then(|pool| pool.install(|| run(cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("memfract: {e}");
            ExitCode::from(u8::try_from(e.code).unwrap_or(EXIT_INPUT as u8))
        }
    }
}
