use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use inot_core::datasets::{load_with, split_tasks, write_jsonl, Adapter, LoadMode, LoadOptions, SplitSpec};
use inot_core::harness::{cmd_report, cmd_run, validate_goldens, RunOptions, DEFAULT_GOLDEN_DIR};

#[derive(Parser)]
#[command(name = "inot", version, about = "Run and report reasoning-strategy benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every (dataset, strategy) pair of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Repeat with derived seeds and report mean ± spread.
        #[arg(long, default_value_t = 1)]
        repeats: u32,
        /// Also write report.md and pareto.csv.
        #[arg(long)]
        report: bool,
    },
    /// Write report.md and pareto.csv for a finished run.
    Report { run_dir: PathBuf },
    /// Re-render prompt goldens and compare byte-for-byte.
    ValidateGoldens {
        #[arg(long, default_value = DEFAULT_GOLDEN_DIR)]
        dir: PathBuf,
        /// Rewrite goldens that differ.
        #[arg(long)]
        bless: bool,
    },
    /// Show (or write) the validation/test split of a dataset.
    Split {
        #[arg(long)]
        adapter: String,
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        lenient: bool,
        /// Write validation.jsonl and test.jsonl here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { config, repeats, report } => {
            let summary = cmd_run(&config, &RunOptions { repeats })?;
            for r in &summary.reports {
                println!(
                    "{:<16} {:<24} {:>6.1}  {:>10.1} tokens/task",
                    r.dataset,
                    r.strategy_label,
                    r.headline() * 100.0,
                    r.mean_total_tokens()
                );
            }
            let u = summary.manifest.usage;
            println!(
                "billed calls {} ({} tokens), cache hits {}",
                u.total_calls,
                u.total_tokens(),
                u.cache_hits
            );
            if report {
                let files = cmd_report(&summary.run_dir)?;
                println!("wrote {}", files.markdown.display());
            }
            println!("{}", summary.run_dir.display());
            Ok(true)
        }
        Command::Report { run_dir } => {
            let files = cmd_report(&run_dir)?;
            print!("{}", std::fs::read_to_string(&files.markdown)?);
            println!("wrote {} and {}", files.markdown.display(), files.pareto_csv.display());
            Ok(true)
        }
        Command::ValidateGoldens { dir, bless } => {
            let checks = validate_goldens(&dir, bless)?;
            let mut all_ok = true;
            for c in &checks {
                let status = match (c.ok(), bless) {
                    (true, _) => "OK",
                    (false, true) => "BLESSED",
                    (false, false) => "MISMATCH",
                };
                all_ok &= c.ok() || bless;
                println!("{status:<9} {} {} {}", c.task_id, c.variant.as_str(), c.path.display());
            }
            Ok(all_ok)
        }
        Command::Split {
            adapter,
            path,
            seed,
            lenient,
            out_dir,
        } => {
            let adapter: Adapter = adapter.parse()?;
            let mode = if lenient { LoadMode::Lenient } else { LoadMode::Strict };
            let loaded = load_with(&path, adapter, &LoadOptions { mode, root: None })?;
            for issue in &loaded.skipped {
                eprintln!("skipped {}: {}", issue.location, issue.message);
            }
            let (validation, test) = split_tasks(&loaded.tasks, SplitSpec::new(seed));
            println!("validation {} / test {}", validation.len(), test.len());
            match out_dir {
                Some(dir) => {
                    write_jsonl(&validation, &dir.join("validation.jsonl"))?;
                    write_jsonl(&test, &dir.join("test.jsonl"))?;
                }
                None => {
                    for t in &validation {
                        println!("validation\t{}", t.id);
                    }
                    for t in &test {
                        println!("test\t{}", t.id);
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
