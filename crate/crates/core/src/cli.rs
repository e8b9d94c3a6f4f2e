//! Command-line front end. `cli_main` returns the process exit code:
//! 0 success, 1 usage or configuration, 2 data, 3 numeric failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, load_report, predictions_csv, render_csv, render_curve_csv, render_markdown, save_report, train_heads,
    EncoderInit, EvalProtocol, ProtocolMode, SubsetAmount,
};
use crate::rng::RngStream;
use crate::roomsim::{build_dataset_with, load_manifest, Split};
use crate::ssl::pretrain;

pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const HEADS_FILE: &str = "eval.ckpt";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Parser)]
#[command(name = "mcsimclr", version, about = "Multi-channel contrastive pre-training for spatial audio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config with dataset/features/augment/pretrain/eval tables.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set pretrain.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Pretraining checkpoint; omit with `--random`.
    #[arg(long, required_unless_present = "random", conflicts_with = "random")]
    checkpoint: Option<PathBuf>,
    /// Use a randomly initialized encoder.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Row label in rendered tables; defaults to the encoder and protocol.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate labeled scenes into `<out>/<split>.jsonl` and WAV files.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// One split; all three when omitted.
        #[arg(long)]
        split: Option<Split>,
        /// Scene count, overriding the config size of each generated split.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Contrastive pretraining on a manifest.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Continue from `<out>/pretrain.ckpt`.
        #[arg(long)]
        resume: bool,
    },
    /// Train linear heads on a frozen encoder and score the test split.
    Probe(EvalArgs),
    /// Train heads and encoder jointly and score the test split.
    Finetune {
        #[command(flatten)]
        eval: EvalArgs,
        /// Train on a class-stratified subset of this many labeled hours.
        #[arg(long, conflicts_with = "subset_fraction")]
        subset_hours: Option<f64>,
        /// Train on this fraction of the labeled set.
        #[arg(long)]
        subset_fraction: Option<f64>,
    },
    /// Render reports as CSV and Markdown tables plus a data-efficiency curve.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Write table.csv, table.md and curve.csv here; print Markdown only when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { common, out, seed, split, n } => {
            let cfg = Config::load(common.config.as_deref(), &common.overrides)?;
            let d = &cfg.dataset;
            let splits = match split {
                Some(s) => vec![s],
                None => vec![Split::Pretrain, Split::Train, Split::Test],
            };
            let rng = RngStream::new(seed);
            for s in splits {
                let count = n.unwrap_or(match s {
                    Split::Pretrain => d.n_pretrain,
                    Split::Train => d.n_train,
                    Split::Test => d.n_test,
                });
                let path = build_dataset_with(count, s, &d.provider(), &rng, &out, &d.options())?;
                println!("{}: {count} scenes -> {}", s.tag(), path.display());
            }
            Ok(())
        }
        Command::Pretrain { common, data, out, seed, resume } => {
            let cfg = Config::load(common.config.as_deref(), &common.overrides)?;
            let manifest = load_manifest(&data)?;
            let pc = crate::ssl::PretrainConfig {
                verbose: common.verbose,
                ..cfg.pretrain_config(seed)
            };
            let summary = pretrain(&manifest, &pc, &out, resume)?;
            if let Some(l) = summary.epoch_losses.last() {
                println!("final epoch loss {l:.4}");
            }
            println!("checkpoint -> {}", summary.checkpoint.display());
            Ok(())
        }
        Command::Probe(args) => run_eval(args, ProtocolMode::LinearProbe),
        Command::Finetune { eval, subset_hours, subset_fraction } => {
            let mode = match (subset_hours, subset_fraction) {
                (Some(h), _) => ProtocolMode::SubsetFineTune(SubsetAmount::Hours(h)),
                (None, Some(f)) => ProtocolMode::SubsetFineTune(SubsetAmount::Fraction(f)),
                (None, None) => ProtocolMode::FineTune,
            };
            run_eval(eval, mode)
        }
        Command::Report { reports, out } => {
            let loaded = reports.iter().map(load_report).collect::<Result<Vec<_>>>()?;
            let md = render_markdown(&loaded);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                write(&dir.join("table.csv"), &render_csv(&loaded))?;
                write(&dir.join("table.md"), &md)?;
                write(&dir.join("curve.csv"), &render_curve_csv(&loaded))?;
            }
            print!("{md}");
            Ok(())
        }
    }
}

fn run_eval(args: EvalArgs, mode: ProtocolMode) -> Result<()> {
    let cfg = Config::load(args.common.config.as_deref(), &args.common.overrides)?;
    let train = load_manifest(&args.train)?;
    let test = load_manifest(&args.test)?;
    let init = match args.checkpoint {
        Some(p) => EncoderInit::Pretrained(p),
        None => EncoderInit::Random,
    };
    let protocol = EvalProtocol {
        mode,
        init,
        config: cfg.eval_config(),
        seed: args.seed,
    };
    let n_classes = train.n_classes().max(test.n_classes());
    let outcome = train_heads(&protocol, &train, n_classes)?;
    if args.common.verbose {
        for r in &outcome.history {
            eprintln!(
                "epoch {:4}  lr {:.5}  loss {:.4}  val acc {:?}  val err {:?}",
                r.epoch, r.lr, r.train_loss, r.val_accuracy, r.val_error
            );
        }
    }
    let name = args.name.unwrap_or_else(|| {
        let enc = match protocol.init {
            EncoderInit::Pretrained(_) => "pretrained",
            EncoderInit::Random => "random",
        };
        format!("{enc} {}", mode.label())
    });
    let (report, preds) = evaluate(&outcome.model, &test, &name, &protocol, outcome.labeled_hours)?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    save_report(&report, args.out.join(REPORT_FILE))?;
    write(&args.out.join(PREDICTIONS_FILE), &predictions_csv(&preds))?;
    write(&args.out.join(HISTORY_FILE), &history_csv(&outcome.history))?;
    outcome.model.to_checkpoint(mode.label(), args.seed).save(args.out.join(HEADS_FILE))?;
    println!(
        "{name}: accuracy {:.1}%  azimuth error {:.1}°  ({} test clips)",
        report.accuracy_percent, report.azimuth_error_deg, report.n_test
    );
    Ok(())
}

fn history_csv(history: &[crate::eval::EpochRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut s = String::from("epoch,lr,train_loss,val_accuracy,val_error\n");
    for r in history {
        s.push_str(&format!("{},{:.8},{:.6},{},{}\n", r.epoch, r.lr, r.train_loss, opt(r.val_accuracy), opt(r.val_error)));
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
