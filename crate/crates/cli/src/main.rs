//! `odp`: score model outputs, evaluate the scores, and render leaderboards.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use odp_core::harness::{
    aggregate_dg, emit_scatter_data, evaluate, ground_truth, load_manifest, read_eval_tables, read_reports,
    render_leaderboard, run_matrix, write_eval_table, write_family, write_reports, Format, HarnessError, ScoreCache,
};
use odp_core::scoring::{ConfidenceFn, Method, NiMode, ScoreConfig};
use odp_core::synth::{generate_family, SynthSpec};

const EXIT_VALIDATION: u8 = 2;
const EXIT_SKIPPED: u8 = 3;

#[derive(Parser)]
#[command(name = "odp", version, about = "Out-of-distribution performance prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every model of a manifest with the chosen methods.
    Score {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated method names; all ten when omitted.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        mano_p: u32,
        #[arg(long, default_value_t = 1.0)]
        mde_temp: f64,
        #[arg(long, default_value_t = 2000)]
        cot_max_points: usize,
        #[arg(long, default_value_t = 1e-4)]
        agreement_eps: f64,
        #[arg(long, default_value = "max-confidence")]
        atc_confidence: ConfidenceFn,
        /// Count the unaugmented prediction as an extra NI view.
        #[arg(long)]
        ni_with_original: bool,
        /// Exit with status 3 when any method was skipped.
        #[arg(long)]
        strict: bool,
        /// Neither read nor write the score cache.
        #[arg(long)]
        no_cache: bool,
    },
    /// Compare scores with ground-truth test accuracy.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write score/accuracy pairs for plotting.
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Average per-split tables of a domain-generalization dataset.
    Aggregate {
        #[arg(long, value_delimiter = ',', required = true)]
        tables: Vec<PathBuf>,
        #[arg(long)]
        dataset_id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render evaluation tables as a leaderboard.
    Leaderboard {
        #[arg(long, value_delimiter = ',', required = true)]
        tables: Vec<PathBuf>,
        #[arg(long, default_value = "markdown")]
        format: Format,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic model family as tensor files plus a manifest.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "synthetic")]
        dataset_id: String,
    },
}

enum Failure {
    Validation(String),
    Io(String),
    Skipped(usize),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn score(cmd: Command) -> Result<(), Failure> {
    let Command::Score {
        manifest,
        methods,
        out,
        seed,
        mano_p,
        mde_temp,
        cot_max_points,
        agreement_eps,
        atc_confidence,
        ni_with_original,
        strict,
        no_cache,
    } = cmd
    else {
        unreachable!()
    };
    let manifest = load_manifest(&manifest)?;
    let config = ScoreConfig {
        atc_confidence,
        mano_p,
        mde_temperature: mde_temp,
        agreement_eps,
        cot_max_points,
        ni_mode: if ni_with_original {
            NiMode::WithOriginal
        } else {
            NiMode::Pairwise
        },
        seed,
    };
    let methods = methods.unwrap_or_else(|| Method::ALL.to_vec());
    let cache = (!no_cache).then(|| ScoreCache::for_manifest(&manifest));
    let outcome = run_matrix(&manifest, &methods, &config, cache.as_ref())?;
    write_reports(&outcome.reports, &out)?;
    for s in &outcome.skips {
        match &s.model_id {
            Some(id) => eprintln!("skipped {} for {id}: {}", s.method.name(), s.reason),
            None => eprintln!("skipped {}: {}", s.method.name(), s.reason),
        }
    }
    eprintln!(
        "{} reports ({} computed, {} cached) written to {}",
        outcome.reports.len(),
        outcome.computed,
        outcome.cache_hits,
        out.display()
    );
    if strict && !outcome.skips.is_empty() {
        return Err(Failure::Skipped(outcome.skips.len()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        cmd @ Command::Score { .. } => score(cmd),
        Command::Eval {
            manifest,
            reports,
            out,
            scatter,
        } => {
            let manifest = load_manifest(&manifest)?;
            let records: Vec<_> = manifest.load_all()?.into_iter().map(|m| m.record).collect();
            let truth = ground_truth(&records)?;
            let reports = read_reports(&reports)?;
            let table = evaluate(&manifest.dataset_id, &reports, &truth)?;
            write_eval_table(std::slice::from_ref(&table), &out)?;
            if let Some(path) = scatter {
                emit_scatter_data(&reports, &truth, &path)?;
            }
            Ok(())
        }
        Command::Aggregate {
            tables,
            dataset_id,
            out,
        } => {
            let mut splits = Vec::new();
            for t in &tables {
                splits.extend(read_eval_tables(t)?);
            }
            let table = aggregate_dg(&dataset_id, &splits)?;
            write_eval_table(&[table], &out)?;
            Ok(())
        }
        Command::Leaderboard { tables, format, out } => {
            let mut all = Vec::new();
            for t in &tables {
                all.extend(read_eval_tables(t)?);
            }
            if all.is_empty() {
                return Err(Failure::Validation("no evaluation rows in the given tables".into()));
            }
            let text = render_leaderboard(&all, format);
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Synth {
            spec,
            out_dir,
            dataset_id,
        } => {
            let text =
                std::fs::read_to_string(&spec).map_err(|e| Failure::Io(format!("{}: {e}", spec.display())))?;
            let spec: SynthSpec = serde_json::from_str(&text)
                .map_err(|e| Failure::Validation(format!("{}: {e}", spec.display())))?;
            let family = generate_family(&spec).map_err(|e| Failure::Validation(e.to_string()))?;
            let path = write_family(&family, &dataset_id, Some("synthetic"), &out_dir)?;
            eprintln!("wrote {} models to {}", family.records.len(), path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
        Err(Failure::Skipped(n)) => {
            eprintln!("error: {n} method skip(s) with --strict");
            ExitCode::from(EXIT_SKIPPED)
        }
    }
}
