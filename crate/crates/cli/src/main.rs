//! leafmatch: match partially occluded open contours against a database of
//! full closed contours.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/processing error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use leafmatch_cli::commands::{self, EvaluateArgs};

#[derive(Parser)]
#[command(name = "leafmatch", version, about)]
struct Cli {
    /// Worker thread cap (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest contours (and binary PGM masks) into a database directory.
    BuildDb {
        /// Directory of .contour / .pgm files.
        #[arg(long)]
        input: PathBuf,
        /// CSV mapping id,species.
        #[arg(long)]
        labels: PathBuf,
        /// Output database directory.
        #[arg(long)]
        out: PathBuf,
        /// JSON RunConfig overriding the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Remove a contiguous fraction of a closed contour.
    Occlude {
        #[arg(long)]
        input: PathBuf,
        /// Fraction of the perimeter to remove (0.20..0.50 without --force).
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Allow fractions outside the standard range (up to 0.95).
        #[arg(long)]
        force: bool,
    },
    /// Rank database curves against one occluded query curve.
    Query {
        #[arg(long)]
        db: PathBuf,
        /// Query curve file (open; closed files are taken as unoccluded).
        #[arg(long)]
        query: PathBuf,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Occlude and query a directory of full contours; write a PR table.
    Evaluate {
        #[arg(long)]
        db: PathBuf,
        /// Directory of full (closed) query contours.
        #[arg(long)]
        queries: PathBuf,
        /// CSV mapping id,species for the queries.
        #[arg(long)]
        truth: PathBuf,
        /// lo:hi occlusion range; lo=hi pins the level, otherwise each query
        /// draws uniformly from the range.
        #[arg(long, value_parser = parse_range, default_value = "0.20:0.50")]
        occlusion_range: (f64, f64),
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic benchmark corpus of closed contours.
    GenSynthetic {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s}"))?;
    let lo: f64 = lo.parse().map_err(|_| format!("bad lower bound {lo}"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad upper bound {hi}"))?;
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }

    let outcome = match cli.command {
        Command::BuildDb {
            input,
            labels,
            out,
            config,
        } => commands::cmd_build_db(&input, &labels, &out, config.as_deref()),
        Command::Occlude {
            input,
            fraction,
            seed,
            out,
            force,
        } => commands::cmd_occlude(&input, fraction, seed, &out, force),
        Command::Query { db, query, out } => commands::cmd_query(&db, &query, &out),
        Command::Evaluate {
            db,
            queries,
            truth,
            occlusion_range,
            out,
            seed,
        } => commands::cmd_evaluate(EvaluateArgs {
            db_dir: &db,
            queries_dir: &queries,
            truth_path: &truth,
            occlusion_lo: occlusion_range.0,
            occlusion_hi: occlusion_range.1,
            out: &out,
            seed,
        }),
        Command::GenSynthetic {
            classes,
            per_class,
            seed,
            out,
        } => commands::cmd_gen_synthetic(classes, per_class, seed, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
