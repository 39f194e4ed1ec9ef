mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mrl_core::inference::attach_inference;
use mrl_core::km::product_limit;
use mrl_core::mrl_smooth::{default_grid, lambda_sweep, smooth_mrl_curve, DEFAULT_GRID_POINTS, DEFAULT_T_MAX_FRAC};
use mrl_core::sim::{self, Scenario};
use mrl_core::{CensoredSample, PoissonSmoother};

use error::CliError;
use output::{rows, Meta, Table};

#[derive(Debug, Parser)]
#[command(name = "mrl", version, about = "Smoothed mean residual life estimation for right-censored data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the MRL curve of a `time,event` CSV.
    Estimate {
        #[command(flatten)]
        curve: CurveArgs,
        /// Smoothing parameter; defaults to n / max(time).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// One curve per smoothing parameter, stacked with a `lambda` column.
    Sweep {
        #[command(flatten)]
        curve: CurveArgs,
        /// Comma-separated smoothing parameters.
        #[arg(long, value_delimiter = ',', num_args = 0.., required = true)]
        lambda: Vec<f64>,
    },
    /// Run a Monte Carlo scenario described by a JSON document.
    Simulate {
        #[command(flatten)]
        io: IoArgs,
        /// Seed for every random stream; replaces the scenario's `seed`.
        #[arg(long)]
        seed: u64,
        /// Output format [default: json].
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Debug, Args)]
struct IoArgs {
    #[arg(long)]
    input: PathBuf,
    /// Destination file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Grid runs from 0 to this fraction of the last failure time.
    #[arg(long, default_value_t = DEFAULT_T_MAX_FRAC)]
    t_max_frac: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output format [default: csv].
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl CurveArgs {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.grid_points == 0 {
            return Err(CliError::Usage("--grid-points must be at least 1".into()));
        }
        if !(self.t_max_frac > 0.0 && self.t_max_frac <= 1.0) {
            return Err(CliError::Usage(format!("--t-max-frac must lie in (0, 1], got {}", self.t_max_frac)));
        }
        Ok(())
    }
}

fn curve_table(args: &CurveArgs, lambdas: Option<&[f64]>, with_lambda: bool) -> Result<Table, CliError> {
    args.validate()?;
    let sample = CensoredSample::from_csv_path(&args.io.input)?;
    let step = product_limit(&sample, true)?;
    let grid = default_grid(&step, args.grid_points, args.t_max_frac);
    let curves = match lambdas {
        None => vec![smooth_mrl_curve(&step, PoissonSmoother::plug_in(&sample)?, &grid)?],
        Some(ls) => lambda_sweep(&step, &grid, ls)?,
    };
    let mut points = Vec::new();
    let mut lambda_used = Vec::new();
    for mut c in curves {
        attach_inference(&mut c, &sample, args.alpha)?;
        points.extend(rows(&c, &step, with_lambda)?);
        lambda_used.push(c.lambda_used);
    }
    Ok(Table {
        meta: Meta {
            n: sample.len(),
            lambda_used,
            censoring_rate: sample.censoring_rate(),
            tie_rule: sample.tie_rule().as_str(),
            alpha: args.alpha,
            grid_points: args.grid_points,
            t_max_frac: args.t_max_frac,
            version: env!("CARGO_PKG_VERSION"),
        },
        points,
    })
}

fn render(table: &Table, format: Option<Format>) -> String {
    match format.unwrap_or(Format::Csv) {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    }
}

/// Reads a scenario, reporting schema violations with a JSON pointer.
fn read_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let sc: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let mut pointer: String = e
            .path()
            .iter()
            .filter_map(|seg| match seg {
                serde_path_to_error::Segment::Seq { index } => Some(format!("/{index}")),
                serde_path_to_error::Segment::Map { key } => Some(format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
                serde_path_to_error::Segment::Enum { variant } => Some(format!("/{variant}")),
                serde_path_to_error::Segment::Unknown => None,
            })
            .collect();
        let message = e.inner().to_string();
        // A missing field is reported at its parent; point at the field itself.
        if let Some(field) = message.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            pointer.push('/');
            pointer.push_str(field);
        }
        CliError::Data { message, pointer: Some(if pointer.is_empty() { "/".into() } else { pointer }) }
    })?;
    de.end().map_err(|e| CliError::data(e.to_string()))?;
    Ok(sc)
}

fn simulate(io: &IoArgs, seed: u64, format: Option<Format>) -> Result<String, CliError> {
    let mut sc = read_scenario(&io.input)?;
    sc.seed = seed;
    let report = sim::run(&sc)?;
    Ok(match format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).map_err(|e| CliError::numeric(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf).map_err(|e| CliError::data(e.to_string()))?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (text, out) = match &cli.command {
        Command::Estimate { curve, lambda } => {
            let table = curve_table(curve, lambda.as_ref().map(std::slice::from_ref), false)?;
            (render(&table, curve.format), &curve.io.output)
        }
        Command::Sweep { curve, lambda } => {
            if lambda.is_empty() {
                return Err(CliError::Usage("--lambda needs at least one value".into()));
            }
            (render(&curve_table(curve, Some(lambda), true)?, curve.format), &curve.io.output)
        }
        Command::Simulate { io, seed, format } => (simulate(io, *seed, *format)?, &io.output),
    };
    // Everything is computed before anything is written, so a failure leaves no file.
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write as _;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                // A closed reader (`| head`) is not our failure.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::data(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let message = rendered
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            eprintln!("{}", CliError::Usage(message.trim_start_matches("error: ").to_string()).to_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
