use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gppopf::acopf::{solve_opf, OracleConfig};
use gppopf::case_io::load_case;
use gppopf::popf::SampleDistribution;
use gppopf_cli::{predict_only, run_experiment, with_jobs, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gppopf", version = gppopf_cli::BUILD_ID, about = "GP-surrogate probabilistic optimal power flow")]
struct Cli {
    /// Worker threads for OPF sampling and model fits.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Artifact directory; defaults to the config's output_dir, then results/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate a distribution through saved models without solving any OPF.
    Predict {
        /// The models/ directory of a finished run.
        #[arg(long)]
        models: PathBuf,
        /// Distribution as inline JSON, a JSON file, or a kind name
        /// (uniform_box, latin_hypercube); defaults to the run's test distribution.
        #[arg(long)]
        distribution: Option<String>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for predict_summary.json; the summary goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a MATPOWER case.
    ValidateCase { case: String },
    /// Solve one OPF and print the solution as JSON.
    SolveOpf {
        case: String,
        /// Use the DC formulation.
        #[arg(long)]
        dc: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_distribution(arg: &str) -> Result<SampleDistribution> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else if Path::new(arg).is_file() {
        std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    } else {
        format!("{{\"kind\": {}}}", serde_json::to_string(arg)?)
    };
    serde_json::from_str(&text).with_context(|| format!("parsing distribution {arg:?}"))
}

fn write_json<T: serde::Serialize>(out: Option<&Path>, file: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(file), text).with_context(|| format!("writing {file}"))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs == Some(0) {
        anyhow::bail!("--jobs must be at least 1");
    }
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
            let outcome = with_jobs(cli.jobs, || run_experiment(&cfg, &out))??;
            let r = &outcome.report.popf;
            println!("wrote {}", out.display());
            println!(
                "cost: mean error {:.3e}%  std error {:.3e}%",
                r.cost.mean_error_pct, r.cost.std_error_pct
            );
            println!("mean L1 error: pg {:.4}%  vm {:.5}%", r.l1_pg.mean, r.l1_vm.mean);
            if let Some(s) = &outcome.report.sensitivity {
                println!(
                    "spearman(gamma, delta pg) = {:.3} over {} generators ({:.3} with gamma in output units)",
                    s.spearman, s.n, s.spearman_output_units
                );
            }
            println!("speedup over MCS: {:.2}x", outcome.timings.speedup);
            Ok(())
        }
        Command::Predict {
            models,
            distribution,
            n_test,
            seed,
            out,
        } => {
            let dist = distribution.as_deref().map(parse_distribution).transpose()?;
            let outcome = with_jobs(cli.jobs, || predict_only(&models, dist, n_test, seed))??;
            write_json(out.as_deref(), "predict_summary.json", &outcome)
        }
        Command::ValidateCase { case } => {
            let c = load_case(&case)?;
            c.validate()?;
            let summary = serde_json::json!({
                "name": c.name,
                "base_mva": c.base_mva,
                "buses": c.buses.len(),
                "generators": c.generators.len(),
                "branches": c.branches.len(),
                "total_load_mw": c.total_load_mw(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::SolveOpf { case, dc, out } => {
            let c = load_case(&case)?;
            c.validate()?;
            let cfg = if dc {
                OracleConfig::dc()
            } else {
                OracleConfig::default()
            };
            let sol = solve_opf(&c, &cfg)?;
            write_json(out.as_deref(), "opf_solution.json", &sol)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("{}", serde_json::json!({ "error": chain[0], "causes": &chain[1..] }));
            ExitCode::FAILURE
        }
    }
}
