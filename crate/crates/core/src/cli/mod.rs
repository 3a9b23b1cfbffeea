//! Command-line front end: run configuration, stage commands, reports and plots.

pub mod audit;
pub mod commands;
pub mod report;
pub mod run_config;
pub mod stage;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_build_vocab, cmd_compare, cmd_evaluate, cmd_finetune, cmd_gen_corpus, cmd_pretrain, EvalRow,
    ItemOutcome,
};
pub use report::{parse_report_rows, MetricReport, ReportRow};
pub use run_config::{FrozenEncoder, RunConfig};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "sciscore", version, about = "Pre-train, fine-tune and compare response-scoring encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key=value configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for this stage
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override a configuration key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic pre-training corpora and fine-tuning items
    GenCorpus(Common),
    /// Build the subword vocabulary
    BuildVocab(Common),
    /// Masked-language-model pre-training (pretrain.variant=baseline|adapted)
    Pretrain(Common),
    /// Cross-validated per-item fine-tuning
    Finetune(Common),
    /// Recompute agreement from predictions files
    Evaluate(Common),
    /// Fine-tune from the baseline and adapted checkpoints and report the difference
    Compare(Common),
}

fn dispatch(command: Command) -> Result<()> {
    let (name, common) = match &command {
        Command::GenCorpus(c) => ("gen-corpus", c),
        Command::BuildVocab(c) => ("build-vocab", c),
        Command::Pretrain(c) => ("pretrain", c),
        Command::Finetune(c) => ("finetune", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Compare(c) => ("compare", c),
    };
    let cfg = RunConfig::build(common.config.as_deref(), common.seed, &common.set)?;
    match name {
        "gen-corpus" => println!("corpus written to {}", cmd_gen_corpus(&cfg)?.display()),
        "build-vocab" => println!("vocabulary written to {}", cmd_build_vocab(&cfg)?.display()),
        "pretrain" => println!("checkpoints written to {}", cmd_pretrain(&cfg)?.display()),
        "finetune" => {
            for o in cmd_finetune(&cfg)? {
                match o.qwk {
                    Some(q) => println!("{}\tqwk={q:.4}", o.item_id),
                    None => println!("{}\tskipped", o.item_id),
                }
            }
        }
        "evaluate" => {
            for r in cmd_evaluate(&cfg)? {
                println!("{}\t{}\tqwk={:.4}", r.source, r.item_id, r.qwk);
            }
        }
        _ => {
            let rep = cmd_compare(&cfg)?;
            println!(
                "mean qwk baseline={:.4} adapted={:.4}",
                rep.mean_qwk_baseline, rep.mean_qwk_adapted
            );
            if let Ok(t) = &rep.paired {
                println!("paired t={:.4} df={} p={:.4}", t.t, t.df, t.p_value);
            }
        }
    }
    Ok(())
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
