use clap::{Parser, Subcommand};
use groupoid_conn::scenario_cli::{emit_report, list_scenarios, replay, run_all, run_scenario, Format, RunConfig};
use groupoid_conn::Tolerances;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "groupoid-conn", version, about = "Run the registered connection scenarios and report their verdicts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed for every sampler.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// `key = value` file overriding tolerances and budgets (e.g. `transport.drift_tol = 1e-7`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `json` or `text`.
    #[arg(long, global = true, default_value = "text")]
    format: Format,
    /// Multiplies every sample and path budget.
    #[arg(long, global = true, default_value_t = 1.0)]
    budget_scale: f64,
    /// Directory for trajectory dumps (`t x1 x2 ...` lines).
    #[arg(long, global = true)]
    dump_dir: Option<PathBuf>,
    /// Include wall times in reports (JSON output is then no longer reproducible).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// List scenario names with descriptions.
    List,
    /// Run one scenario.
    Run { name: String },
    /// Run every scenario (concurrently).
    All,
    /// Re-run the scenario recorded in a JSON report and compare its witnesses.
    Replay { report: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    let tol = match &cli.config {
        Some(p) => Tolerances::load(p)?,
        None => Tolerances::default(),
    };
    if !(cli.budget_scale > 0.0 && cli.budget_scale.is_finite()) {
        return Err(format!("--budget-scale must be positive, got {}", cli.budget_scale).into());
    }
    let cfg = RunConfig { seed: cli.seed, tol, budget_scale: cli.budget_scale, dump_dir: cli.dump_dir.clone(), timings: cli.timings };
    match cli.command {
        Command::List => {
            for (name, description, anchor) in list_scenarios() {
                println!("{name:<28} {description}");
                println!("{:<28} ({anchor})", "");
            }
            Ok(true)
        }
        Command::Run { name } => {
            let doc = run_scenario(&name, &cfg)?;
            println!("{}", emit_report(&doc, cli.format));
            Ok(doc.passed)
        }
        Command::All => {
            let docs = run_all(&cfg);
            match cli.format {
                Format::Json => {
                    let parts: Vec<String> = docs.iter().map(|d| emit_report(d, Format::Json)).collect();
                    println!("[\n{}\n]", parts.join(",\n"));
                }
                Format::Text => {
                    for d in &docs {
                        print!("{}", emit_report(d, Format::Text));
                    }
                    let failed: Vec<&str> = docs.iter().filter(|d| !d.passed).map(|d| d.scenario.as_str()).collect();
                    println!("{} of {} scenarios match expectations{}", docs.len() - failed.len(), docs.len(), if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) });
                }
            }
            Ok(docs.iter().all(|d| d.passed))
        }
        Command::Replay { report } => {
            let text = std::fs::read_to_string(&report).map_err(|e| format!("{}: {e}", report.display()))?;
            let out = replay(&text, cli.dump_dir.clone())?;
            for (check, ok) in &out.witnesses {
                println!("{}: witness {}", check, if *ok { "reproduced" } else { "NOT reproduced" });
            }
            println!("verdicts {}", if out.verdicts_match { "match" } else { "differ" });
            print!("{}", emit_report(&out.report, cli.format));
            Ok(out.reproduced())
        }
    }
}
