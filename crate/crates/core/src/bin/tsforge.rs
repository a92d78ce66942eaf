//! Command-line entry point: run experiments from a config file, generate
//! synthetic fixtures, and dump prompts, token streams, and metrics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tsforge::backbone::{Checkpoint, TokenizerKind};
use tsforge::error::{Error, Result};
use tsforge::evalkit::RowKey;
use tsforge::prompt::{extract_features, fit_standardizer, standardize_versioned, FeatureCatalog};
use tsforge::series::{load_csv, CsvOptions};
use tsforge::synth::{gen_synth, PatternFamily, SynthSpec};
use tsforge::tokenizer::{
    fit_quantizer, left_pad, linear_embed, patchify, LinearTokenizer, PatchConfig,
};
use tsforge::trainer::mse_loss;

#[derive(Parser)]
#[command(
    name = "tsforge",
    about = "train and benchmark small time-series forecasters",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent training runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Generate a deterministic synthetic CSV fixture.
    GenSynth {
        /// sine_mixture | trend_seasonal | ar1
        #[arg(long, default_value = "sine_mixture")]
        family: String,
        #[arg(long, default_value_t = 2000)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0.8)]
        ar_coeff: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute and dump the standardized prompt matrix of a dataset.
    Features {
        #[arg(long)]
        data: PathBuf,
        /// Pad the catalog to this many slots.
        #[arg(long)]
        slots: Option<usize>,
        /// Output JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tokenize a dataset and dump the token stream.
    Tokenize {
        #[arg(long)]
        data: PathBuf,
        /// linear | quantized
        #[arg(long, default_value = "linear")]
        kind: String,
        #[arg(long, default_value_t = 16)]
        patch_len: usize,
        #[arg(long, default_value_t = 8)]
        stride: usize,
        /// Embedding dimension for a fresh seeded linear tokenizer.
        #[arg(long, default_value_t = 32)]
        dim: usize,
        /// Read linear tokenizer weights from this checkpoint instead.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        num_bins: usize,
        #[arg(long, default_value_t = 0.01)]
        clip_q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// MSE/MAE between a prediction CSV and a truth CSV of the same shape.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn emit(out: Option<PathBuf>, text: String) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            jobs,
        } => {
            let summary = tsforge::runner::run_from_path(&config, seed, out, jobs)?;
            println!("method: {}", summary.method_label);
            for dataset in summary.table.datasets() {
                for method in summary.table.methods() {
                    if let Some((mse, mae)) = summary.table.get(dataset, RowKey::Avg, method) {
                        println!("{dataset} avg [{method}] mse={mse:.6} mae={mae:.6}");
                    }
                }
            }
            println!("artifacts in {}", summary.out_dir.display());
            Ok(())
        }
        Command::GenSynth {
            family,
            length,
            channels,
            seed,
            scale,
            noise,
            ar_coeff,
            out,
        } => {
            let spec = SynthSpec {
                family: family.parse::<PatternFamily>()?,
                length,
                channels,
                seed,
                scale,
                noise_std: noise,
                ar_coeff,
            };
            let ts = gen_synth(&spec, &out)?;
            println!(
                "wrote {} ({} rows x {} channels)",
                out.display(),
                ts.len(),
                ts.dims()
            );
            Ok(())
        }
        Command::Features { data, slots, out } => {
            let ts = load_csv(&data, &CsvOptions::default())?;
            let catalog = match slots {
                Some(s) => FeatureCatalog::padded(s)?,
                None => FeatureCatalog::standard(),
            };
            let raw = extract_features(&ts, &catalog)?;
            let stats = fit_standardizer(&[&raw])?;
            let prompt = standardize_versioned(&raw, &stats, catalog.version())?;
            let doc = serde_json::json!({
                "catalog_version": catalog.version(),
                "features": catalog.names(),
                "variates": ts.variate_names(),
                "stats": stats,
                "raw": raw,
                "standardized": prompt.features,
            });
            emit(out, serde_json::to_string_pretty(&doc).expect("json"))
        }
        Command::Tokenize {
            data,
            kind,
            patch_len,
            stride,
            dim,
            checkpoint,
            num_bins,
            clip_q,
            seed,
            out,
        } => {
            let ts = load_csv(&data, &CsvOptions::default())?;
            match kind.as_str() {
                "linear" => {
                    let patch = PatchConfig::new(patch_len, stride)?;
                    let tok = match checkpoint {
                        Some(path) => linear_tokenizer_from_checkpoint(&path)?,
                        None => LinearTokenizer::init(dim, patch_len, seed),
                    };
                    if tok.patch_len() != patch.patch_len {
                        return Err(Error::Shape {
                            expected: format!("patch_len {}", tok.patch_len()),
                            got: format!("{}", patch.patch_len),
                        });
                    }
                    let mut channels = Vec::new();
                    for j in 0..ts.dims() {
                        let padded = left_pad(&ts.values().column(j), &patch);
                        let tokens = linear_embed(&patchify(&padded, &patch)?, &tok)?;
                        channels.push(tokens);
                    }
                    let doc = serde_json::json!({
                        "kind": "linear",
                        "patch_len": patch.patch_len,
                        "stride": patch.stride,
                        "dim": tok.dim(),
                        "tokens": channels,
                    });
                    emit(out, serde_json::to_string_pretty(&doc).expect("json"))
                }
                "quantized" => {
                    let quantizer = fit_quantizer(ts.values().data(), num_bins, clip_q)?;
                    let ids: Vec<Vec<usize>> = (0..ts.dims())
                        .map(|j| quantizer.quantize(&ts.values().column(j)))
                        .collect();
                    let doc = serde_json::json!({
                        "kind": "quantized",
                        "quantizer": quantizer,
                        "ids": ids,
                    });
                    emit(out, serde_json::to_string_pretty(&doc).expect("json"))
                }
                other => Err(Error::InvalidArgument(format!(
                    "unknown tokenizer kind `{other}`"
                ))),
            }
        }
        Command::Eval { pred, truth } => {
            let p = load_csv(&pred, &CsvOptions::default())?;
            let t = load_csv(&truth, &CsvOptions::default())?;
            let mse = mse_loss(p.values(), t.values())?;
            let mae = tsforge::evalkit::mae(p.values(), t.values())?;
            println!("mse={mse}");
            println!("mae={mae}");
            Ok(())
        }
    }
}

fn linear_tokenizer_from_checkpoint(path: &PathBuf) -> Result<LinearTokenizer> {
    let ckpt = Checkpoint::read(path)?;
    if !matches!(ckpt.manifest.config.tokenizer, TokenizerKind::Linear { .. }) {
        return Err(Error::InvalidArgument(
            "checkpoint does not use the linear tokenizer".into(),
        ));
    }
    let model = tsforge::backbone::Backbone::load(&ckpt)?;
    let weight = model
        .param("embed.weight")
        .ok_or_else(|| Error::CorruptCheckpoint("missing embed.weight".into()))?
        .clone();
    let bias = model
        .param("embed.bias")
        .ok_or_else(|| Error::CorruptCheckpoint("missing embed.bias".into()))?
        .data()
        .to_vec();
    LinearTokenizer::new(weight, bias)
}
