use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quadobs::harness::{
    analyze, emit_pe_csv, emit_trace_csv, pe_csv_string, run_pe_suite, simulate, trace_csv_string,
    vehicle_scenario,
};
use quadobs::{Error, IntegrationGrid, Result, Scenario};

#[derive(Parser)]
#[command(
    name = "quadobs",
    version,
    about = "Immersion, excitation checks and observers for quadratic-output systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print dimensions, C-sequence norms, zero-input rank and the nilpotency verdict.
    Analyze(Common),
    /// Run the excitation checks and write the report CSV.
    CheckPe(Common),
    /// Co-simulate plant and observer and write the trace CSV.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file, or `builtin:vehicle[:N]`.
    scenario: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration step in seconds.
    #[arg(long)]
    step: Option<f64>,
    /// End of the time horizon in seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Forgetting factor of the Riccati equation.
    #[arg(long)]
    theta: Option<f64>,
    /// Excitation window length in seconds.
    #[arg(long)]
    window: Option<f64>,
    /// Excitation threshold.
    #[arg(long)]
    mu: Option<f64>,
    /// Highest r_i index in the determinant condition.
    #[arg(long)]
    kappa: Option<usize>,
}

fn load_scenario(spec: &str) -> Result<Scenario> {
    let Some(rest) = spec.strip_prefix("builtin:") else {
        return Scenario::load(spec);
    };
    let mut parts = rest.splitn(2, ':');
    match (parts.next(), parts.next()) {
        (Some("vehicle"), None) => Ok(vehicle_scenario(3)),
        (Some("vehicle"), Some(n)) => match n.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(vehicle_scenario(n)),
            _ => Err(Error::Config(format!("invalid vehicle dimension `{n}`"))),
        },
        _ => Err(Error::Config(format!("unknown builtin scenario `{rest}`"))),
    }
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let mut sc = load_scenario(&self.scenario)?;
        if self.step.is_some() || self.horizon.is_some() {
            sc.grid = IntegrationGrid::new(
                sc.grid.t_start(),
                self.horizon.unwrap_or(sc.grid.t_end()),
                self.step.unwrap_or(sc.grid.step()),
            )?;
        }
        if let Some(theta) = self.theta {
            sc.observer.theta = theta;
        }
        if let Some(window) = self.window {
            sc.pe.window = window;
        }
        if let Some(mu) = self.mu {
            sc.pe.threshold = mu;
        }
        if let Some(kappa) = self.kappa {
            sc.pe.kappa = Some(kappa);
        }
        Ok(sc)
    }

    fn write(&self, bytes: &[u8]) -> Result<()> {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(bytes)
            .and_then(|_| stdout.flush())
            .map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze(args) => {
            let summary = analyze(&args.scenario()?);
            let text = summary.to_string();
            match &args.out {
                Some(path) => std::fs::write(path, &text).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?,
                None => args.write(text.as_bytes())?,
            }
            Ok(if summary.assumption_holds() { 0 } else { 2 })
        }
        Command::CheckPe(args) => {
            let reports = run_pe_suite(&args.scenario()?)?;
            match &args.out {
                Some(path) => emit_pe_csv(&reports, path)?,
                None => args.write(&pe_csv_string(&reports))?,
            }
            Ok(0)
        }
        Command::Simulate(args) => {
            let trace = simulate(&args.scenario()?)?;
            match &args.out {
                Some(path) => emit_trace_csv(&trace, path)?,
                None => args.write(&trace_csv_string(&trace))?,
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
