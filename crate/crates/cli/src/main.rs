use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tracksim_cli::commands::{
    cmd_bench, cmd_dump_lcp, cmd_optimize, cmd_run, init_workers, parse_models, CliError, RunOptions,
};
use tracksim_cli::config::Config;

#[derive(Parser)]
#[command(
    name = "tracksim",
    version,
    about = "Tracked-vehicle simulator with contact surface motion tracks"
)]
struct Cli {
    /// TOML config files, merged in order.
    #[arg(long, global = true)]
    config: Vec<PathBuf>,
    /// Override a config field by dotted path, e.g. `vehicle.params.mu1=1.2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario names (comma separated or repeated); `all` for every one.
    #[arg(long)]
    scenario: Vec<String>,
    /// Seeds (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Time step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios for one model and write trajectories and metrics.
    Run {
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        common: Common,
        /// Write reference trajectories instead of evaluating metrics.
        #[arg(long)]
        emit_reference: bool,
        /// Use the fine settings of the golden references.
        #[arg(long)]
        fine: bool,
        /// Also record the pose at every step.
        #[arg(long)]
        every_step: bool,
    },
    /// Run the model × scenario × seed cross product and report mean ± std.
    Bench {
        /// Models (comma separated or repeated).
        #[arg(long)]
        model: Vec<String>,
        #[command(flatten)]
        common: Common,
        /// Use seeds 0..N.
        #[arg(long, conflicts_with = "seed")]
        seeds: Option<u64>,
    },
    /// Identify model parameters by random search.
    Optimize {
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Dump the constraint problem of one step as JSON.
    DumpLcp {
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        common: Common,
        /// Simulated time of the dumped step (s).
        #[arg(long, default_value_t = 1.0)]
        time: f64,
    },
}

fn quote(s: &str) -> String {
    format!("{s:?}")
}

fn list(items: &[String]) -> String {
    format!("[{}]", items.iter().map(|s| quote(s)).collect::<Vec<_>>().join(", "))
}

fn scenario_names(raw: &[String]) -> Vec<String> {
    let names: Vec<String> = raw
        .iter()
        .flat_map(|s| s.split(','))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.iter().any(|n| n == "all") {
        Vec::new()
    } else {
        names
    }
}

fn common_overrides(c: &Common, scenario_key: &str, o: &mut Vec<String>) {
    if !c.scenario.is_empty() {
        o.push(format!("{scenario_key}={}", list(&scenario_names(&c.scenario))));
    }
    if !c.seed.is_empty() {
        let seeds: Vec<String> = c.seed.iter().map(u64::to_string).collect();
        o.push(format!("run.seeds=[{}]", seeds.join(", ")));
    }
    if let Some(dt) = c.dt {
        o.push(format!("sim.dt={dt:?}"));
    }
    if let Some(out) = &c.out {
        o.push(format!("run.output={}", quote(&out.display().to_string())));
    }
}

fn model_override(model: &Option<String>, o: &mut Vec<String>) -> Result<(), CliError> {
    if let Some(m) = model {
        let m = parse_models(std::slice::from_ref(m))?;
        if m.len() != 1 {
            return Err(CliError::Setup("expected exactly one model".into()));
        }
        o.push(format!("vehicle.model={}", quote(m[0].name())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_workers()?;
    let mut o = cli.overrides.clone();
    let mut stdout = std::io::stdout();
    match &cli.command {
        Command::Run {
            model,
            common,
            emit_reference,
            fine,
            every_step,
        } => {
            model_override(model, &mut o)?;
            common_overrides(common, "run.scenarios", &mut o);
            if *every_step {
                o.push("sim.record_every_step=true".into());
            }
            // one seed unless a config file or flag says otherwise
            let cfg = Config::load_with_defaults(&["run.seeds=[0]".into()], &cli.config, &o)?;
            let opts = RunOptions {
                emit_reference: *emit_reference,
                fine: *fine,
            };
            cmd_run(&cfg, &opts, &mut stdout)?;
        }
        Command::Bench { model, common, seeds } => {
            if !model.is_empty() {
                let models: Vec<String> = parse_models(model)?.iter().map(|m| m.name().to_string()).collect();
                o.push(format!("run.models={}", list(&models)));
            }
            common_overrides(common, "run.scenarios", &mut o);
            if let Some(n) = seeds {
                let s: Vec<String> = (0..*n).map(|i| i.to_string()).collect();
                o.push(format!("run.seeds=[{}]", s.join(", ")));
            }
            let cfg = Config::load(&cli.config, &o)?;
            let report = cmd_bench(&cfg, &mut stdout)?;
            if report.any_failure() {
                return Err(CliError::Simulation("some runs failed; see the marked cells".into()));
            }
        }
        Command::Optimize {
            model,
            common,
            iterations,
            samples,
            trials,
        } => {
            model_override(model, &mut o)?;
            common_overrides(common, "search.scenarios", &mut o);
            if let Some(&s) = common.seed.first() {
                o.push(format!("search.seed={s}"));
            }
            for (k, v) in [("iterations", iterations), ("samples", samples), ("trials", trials)] {
                if let Some(v) = v {
                    o.push(format!("search.{k}={v}"));
                }
            }
            let cfg = Config::load(&cli.config, &o)?;
            cmd_optimize(&cfg, &mut stdout)?;
        }
        Command::DumpLcp { model, common, time } => {
            model_override(model, &mut o)?;
            common_overrides(common, "run.scenarios", &mut o);
            let cfg = Config::load(&cli.config, &o)?;
            let scenario = match cfg.run.scenarios.as_slice() {
                [one] => one.clone(),
                _ => return Err(CliError::Setup("dump-lcp needs exactly one --scenario".into())),
            };
            let json = cmd_dump_lcp(&cfg, &scenario, *time)?;
            match &common.out {
                Some(path) => tracksim_cli::output::write_file(path, &json).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?,
                None => {
                    use std::io::Write;
                    // a closed pipe (e.g. `| head`) is not an error
                    let _ = writeln!(stdout, "{json}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
