use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use segmin::harness::{self, PERCEIVE_BUDGET_MS};
use segmin::sim::world::Crop;

#[derive(Parser)]
#[command(name = "segmin", version, about = "Segmentation-histogram row following in simulated crop rows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every episode of an experiment spec and write logs, metrics and a summary.
    Run {
        spec: PathBuf,
        /// Dump PGM mask and depth frames for each episode.
        #[arg(long)]
        debug_frames: bool,
    },
    /// Check the perception pipeline against the brute-force oracle on PGM fixtures.
    Oracle {
        dir: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Report per-stage latency percentiles as CSV.
    Bench {
        #[arg(long, default_value_t = 200)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print a generated world as JSON.
    GenWorld {
        crop: Crop,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        curvature: f64,
    },
}

fn fail(e: harness::HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec, debug_frames } => match harness::cmd_run(&spec, debug_frames) {
            Ok(report) => {
                for r in &report.records {
                    let status = match r.outcome.clearance_time() {
                        Some(t) => format!("completed in {t:.3} s"),
                        None => format!("{:?}", r.outcome),
                    };
                    println!("{}: {status}, mae {:.4} m", r.id, r.metrics.mae);
                }
                println!("summary: {}", report.output_dir.join("summary.csv").display());
                if !report.all_completed() {
                    eprintln!("error: some episodes did not complete");
                }
                ExitCode::from(report.exit_code() as u8)
            }
            Err(e) => fail(e),
        },
        Command::Oracle { dir, tolerance } => match harness::cmd_oracle(&dir, tolerance) {
            Ok(report) => match report.mismatch {
                None => {
                    println!("{} fixtures, {} checks, all stages match", report.fixtures, report.checks);
                    ExitCode::SUCCESS
                }
                Some((label, m)) => {
                    eprintln!("mismatch in {label}: {m}");
                    ExitCode::from(1)
                }
            },
            Err(e) => fail(e),
        },
        Command::Bench { frames, seed } => {
            if frames == 0 {
                eprintln!("error: --frames must be positive");
                return ExitCode::from(2);
            }
            match harness::cmd_bench(frames, seed) {
                Ok(rows) => {
                    harness::write_bench_csv(std::io::stdout().lock(), &rows).expect("stdout");
                    let perceive = rows.iter().find(|r| r.stage == "perceive").expect("perceive row");
                    if perceive.p99_ms > PERCEIVE_BUDGET_MS {
                        eprintln!("perceive p99 {:.2} ms exceeds {PERCEIVE_BUDGET_MS} ms", perceive.p99_ms);
                        return ExitCode::from(1);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::GenWorld { crop, seed, curvature } => match harness::cmd_gen_world(crop, seed, curvature) {
            Ok(json) => {
                println!("{json}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
