//! `dcqe` command-line front end.
//!
//! Exit status: 0 success, 1 validation failure, 2 parse or config error.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dcqe::analytics::{classify_regime, power_analysis, threshold_test, ExecutionMode, DEFAULT_ALPHA};
use dcqe::harness::{
    load_config, render_plan, render_report, render_verdict, run_campaign, CampaignSpec, HarnessError,
    ReportFormat, DEFAULT_UNITS,
};
use dcqe::planner::{derive_plan, ExperimentConfig};
use dcqe::simkernel::{DelayedChoice, HypothesisModel};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "dcqe", version, about = "Plan, simulate and classify delayed-choice quantum eraser campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derive the unit plan and run the validation checks.
    Plan(Common),
    /// Simulate a campaign and classify its aggregate count.
    Simulate(SimulateArgs),
    /// Classify an externally supplied monitored-port total.
    Analyze(AnalyzeArgs),
    /// Units needed to separate the two hypotheses.
    Power(PowerArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Key-value config file; omitted keys take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Model::Causal)]
    model: Model,
    #[arg(long, value_enum, default_value_t = Choice::Erase)]
    choice: Choice,
    #[arg(long, default_value_t = DEFAULT_UNITS)]
    units: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Parallel)]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Write every unit's pair events as CSV.
    #[arg(long)]
    dump_traces: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Total monitored-port count over all units.
    #[arg(long)]
    observed: u64,
    #[arg(long, default_value_t = 1)]
    units: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args, Debug)]
struct PowerArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    beta: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Human,
    Machine,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Model {
    Causal,
    Ic,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Choice {
    Erase,
    Preserve,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Parallel,
    Sequential,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Human => ReportFormat::Human,
            Format::Machine => ReportFormat::Machine,
        }
    }
}

fn read_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => load_config(&fs::read_to_string(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn write_out(text: &str, path: Option<&PathBuf>) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn run(cli: Cli) -> Result<u8, HarnessError> {
    match cli.command {
        Command::Plan(common) => {
            let config = read_config(&common.config)?;
            let plan = derive_plan(&config)?;
            write_out(&render_plan(&plan, &config), None)?;
            Ok(if plan.is_valid() { 0 } else { EXIT_VALIDATION })
        }
        Command::Simulate(args) => {
            let config = read_config(&args.common.config)?;
            let spec = CampaignSpec {
                config,
                model: match args.model {
                    Model::Causal => HypothesisModel::CausalityPreserving,
                    Model::Ic => HypothesisModel::InformationalCoherence,
                },
                choice: match args.choice {
                    Choice::Erase => DelayedChoice::Erase,
                    Choice::Preserve => DelayedChoice::Preserve,
                },
                units: args.units,
                master_seed: args.seed,
                mode: match args.mode {
                    Mode::Parallel => ExecutionMode::Parallel,
                    Mode::Sequential => ExecutionMode::Sequential,
                },
                alpha: args.alpha,
                output_path: args.output.clone(),
                trace_path: args.dump_traces.clone(),
            };
            let format = ReportFormat::from(args.common.format);
            match run_campaign(&spec) {
                Ok(report) => {
                    log::info!("simulated {} units in {:?}", spec.units, report.elapsed);
                    write_out(&render_report(&report, format), spec.output_path.as_ref())?;
                    Ok(0)
                }
                Err(HarnessError::ValidationFailed(report)) => {
                    write_out(&render_report(&report, format), spec.output_path.as_ref())?;
                    Ok(EXIT_VALIDATION)
                }
                Err(e) => Err(e),
            }
        }
        Command::Analyze(args) => {
            let config = read_config(&args.common.config)?;
            let plan = derive_plan(&config)?;
            let verdict = classify_regime(args.observed, args.units, &plan, &config, args.alpha)?;
            write_out(&render_verdict(&verdict, args.common.format.into()), None)?;
            Ok(0)
        }
        Command::Power(args) => {
            let config = read_config(&args.common.config)?;
            let plan = derive_plan(&config)?;
            let units = power_analysis(&plan, &config, args.alpha, args.beta)?;
            let (causal, ic) = dcqe::analytics::model_means(&plan, &config)?;
            let (threshold, type_i, type_ii) = threshold_test(causal, ic, units, args.alpha.max(args.beta));
            let text = match args.common.format {
                Format::Machine => format!(
                    "units_required={units} threshold={threshold} type_i={type_i:.6e} type_ii={type_ii:.6e}\n"
                ),
                Format::Human => format!(
                    "{:<24} = {units}\n{:<24} = {threshold}\n{:<24} = {type_i:.6e}\n{:<24} = {type_ii:.6e}\n",
                    "units_required", "threshold", "type_i_error", "type_ii_error"
                ),
            };
            write_out(&text, None)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
