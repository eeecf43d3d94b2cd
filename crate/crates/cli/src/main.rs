use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use signcnn::data::{self, decode_gray_image};
use signcnn::metrics::{self, evaluate};
use signcnn::model::{self, build_model};
use signcnn::pipeline::{self, classify_stream, DirectoryFrames, SpeakHook, SpeakMode, StreamFrames, StreamOptions};
use signcnn::train::{train_with, AdamConfig, TrainConfig};
use signcnn::{Error, ErrorClass};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_FORMAT: u8 = 4;
const EXIT_NUMERIC: u8 = 5;

/// Sign-language letter classifier: train, evaluate and run a small CNN.
///
/// Exit status: 0 success, 2 usage, 3 I/O, 4 malformed input, 5 numeric failure.
#[derive(Parser, Debug)]
#[command(name = "signcnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on a labelled CSV and write the model and its history.
    Train(TrainArgs),
    /// Evaluate a model on a labelled CSV.
    Eval(EvalArgs),
    /// Classify one PGM image.
    Predict(PredictArgs),
    /// Classify a sequence of PGM frames.
    Stream(StreamArgs),
    /// Render a history file as a two-panel SVG chart.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training CSV: header line, then `label,pixel1,...,pixel784` rows.
    #[arg(long)]
    train_csv: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    out_model: PathBuf,
    /// Where to write the training history [default: <out-model>.history.tsv].
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    max_epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    validation_fraction: f64,
    /// Epochs without validation-loss improvement before stopping.
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Keep the last epoch's weights instead of the best epoch's.
    #[arg(long)]
    no_restore_best: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Adam step size.
    #[arg(long, default_value_t = 0.001)]
    learning_rate: f64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    test_csv: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Also print the confusion matrix (rows are true classes).
    #[arg(long)]
    confusion: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Binary PGM (P5, maxval 255) of any size.
    #[arg(long)]
    image: PathBuf,
}

#[derive(Args, Debug)]
struct StreamArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory of `.pgm` frames, read in file-name order.
    #[arg(long, conflicts_with = "stdin", required_unless_present = "stdin")]
    dir: Option<PathBuf>,
    /// Read back-to-back PGM images from standard input.
    #[arg(long)]
    stdin: bool,
    /// Shell command run for confident predictions; `{letter}` is replaced.
    #[arg(long, conflicts_with = "speak_events")]
    speak_cmd: Option<String>,
    /// Emit `SPEAK <letter> <confidence>` lines for confident predictions.
    #[arg(long)]
    speak_events: bool,
    /// Write SPEAK lines to stdout among the predictions instead of stderr.
    #[arg(long, requires = "speak_events")]
    inline_events: bool,
    /// Minimum seconds between two announcements of the same letter.
    #[arg(long, default_value_t = 1.0, conflicts_with = "no_debounce")]
    debounce_secs: f64,
    /// Announce every confident frame.
    #[arg(long)]
    no_debounce: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    history: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Stream(a) => cmd_stream(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => EXIT_USAGE,
                ErrorClass::Io => EXIT_IO,
                ErrorClass::Format => EXIT_FORMAT,
                ErrorClass::Numeric => EXIT_NUMERIC,
            })
        }
    }
}

fn stdout_error(e: io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn default_history_path(model: &Path) -> PathBuf {
    let mut name = model.file_stem().unwrap_or_default().to_os_string();
    name.push(".history.tsv");
    model.with_file_name(name)
}

fn cmd_train(a: TrainArgs) -> Result<(), Error> {
    let config = TrainConfig {
        max_epochs: a.max_epochs,
        batch_size: a.batch_size,
        validation_fraction: a.validation_fraction,
        patience: a.patience,
        restore_best: !a.no_restore_best,
        seed: a.seed,
        adam: AdamConfig {
            learning_rate: a.learning_rate,
            ..AdamConfig::default()
        },
    };
    config.validate()?;
    let history_path = a.history.unwrap_or_else(|| default_history_path(&a.out_model));

    let raw = data::load_csv(&a.train_csv)?;
    let prepared = data::prepare(&raw);
    if prepared.dropped > 0 {
        log::warn!(
            "dropped {} of {} rows with labels outside 0..=23",
            prepared.dropped,
            raw.len()
        );
    }
    println!("loaded {} samples from {}", prepared.dataset.len(), a.train_csv.display());

    let mut net = build_model(a.seed);
    let history = train_with(&mut net, &prepared.dataset, &config, |r| {
        println!(
            "epoch {}/{}  train_loss {:.5}  train_accuracy {:.5}  val_loss {:.5}  val_accuracy {:.5}",
            r.epoch, config.max_epochs, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
        );
    })?;

    model::save(&net, &a.out_model)?;
    println!("model written to {}", a.out_model.display());
    match (history.best_epoch, history.records.last()) {
        (Some(best), Some(last)) => {
            metrics::write_history(&history, &history_path)?;
            let b = &history.records[best - 1];
            println!(
                "best epoch {best} (val_loss {:.5}, val_accuracy {:.5}){}",
                b.val_loss,
                b.val_accuracy,
                if history.stopped_early { ", stopped early" } else { "" }
            );
            let restored = if config.restore_best { b } else { last };
            println!("final validation accuracy {:.5}", restored.val_accuracy);
            println!("history written to {}", history_path.display());
        }
        _ => println!("no epochs run; model is untrained and no history was written"),
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Error> {
    let net = model::load(&a.model)?;
    let raw = data::load_csv(&a.test_csv)?;
    let prepared = data::prepare(&raw);
    if prepared.dropped > 0 {
        log::warn!("dropped {} rows with labels outside 0..=23", prepared.dropped);
    }
    let report = evaluate(&net, &prepared.dataset)?;
    let mut out = io::stdout().lock();
    write!(out, "{report}").map_err(stdout_error)?;
    if a.confusion {
        writeln!(out, "\nconfusion matrix (rows: true class, columns: predicted)\n{}", report.confusion)
            .map_err(stdout_error)?;
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), Error> {
    let net = model::load(&a.model)?;
    let bytes = std::fs::read(&a.image).map_err(|e| Error::Io {
        path: a.image.clone(),
        source: e,
    })?;
    let image = decode_gray_image(&bytes)?;
    let p = pipeline::predict(&net, &image)?;
    println!("{}\t{:.5}\t{}", p.letter, p.confidence, p.class_index);
    Ok(())
}

fn cmd_stream(a: StreamArgs) -> Result<(), Error> {
    if !a.no_debounce && !(a.debounce_secs >= 0.0 && a.debounce_secs.is_finite()) {
        return Err(Error::InvalidConfig(format!("debounce must be a non-negative number of seconds, got {}", a.debounce_secs)));
    }
    let net = model::load(&a.model)?;
    let mode = match (a.speak_cmd, a.speak_events) {
        (Some(cmd), _) => SpeakMode::ExternalCommand(cmd),
        (None, true) => SpeakMode::StdoutEvent,
        (None, false) => SpeakMode::Silent,
    };
    let debounce = (!a.no_debounce).then(|| Duration::from_secs_f64(a.debounce_secs));
    let mut hook = SpeakHook::new(mode, debounce);

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        // a second interrupt exits even if a read is blocked
        let handler = move || {
            if stop.swap(true, Ordering::SeqCst) {
                std::process::exit(130);
            }
        };
        if let Err(e) = ctrlc::set_handler(handler) {
            log::warn!("interrupt handler not installed: {e}");
        }
    }

    let options = StreamOptions {
        inline_events: a.inline_events,
    };
    let mut out = BufWriter::new(io::stdout().lock());
    let mut diag = io::stderr().lock();
    let summary = match a.dir {
        Some(dir) => classify_stream(&net, DirectoryFrames::open(dir)?, &mut hook, options, &mut out, &mut diag, &stop)?,
        None => classify_stream(&net, StreamFrames::new(io::stdin().lock()), &mut hook, options, &mut out, &mut diag, &stop)?,
    };
    out.flush().map_err(stdout_error)?;
    log::info!(
        "{} frames, {} classified, {} undecodable, {} announced",
        summary.frames,
        summary.classified,
        summary.failed,
        summary.spoken
    );
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<(), Error> {
    let history = metrics::read_history(&a.history)?;
    metrics::write_history_svg(&history, &a.out)?;
    println!("chart of {} epochs written to {}", history.records.len(), a.out.display());
    Ok(())
}
