//! Config-driven orchestration: load datasets, wire prompts, tokenization,
//! training and evaluation together, and emit every artifact reproducibly.
//! Identical (config, seed) pairs produce byte-identical `results.csv`; the
//! only non-deterministic bytes live in `report.json` timing fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::backbone::Checkpoint;
use crate::config::{
    ExperimentModeName, ParadigmName, PromptModeName, RunConfig, TokenizerKindName,
};
use crate::error::{Error, Result};
use crate::evalkit::{
    render_report, run_experiment, CheckpointSet, DatasetSource, ExperimentMode, ExperimentSpec,
    MetricTable, ModelSettings, ParadigmChoice, PromptMode, ProtocolOutput, TokenizerChoice,
    TrainRecipe,
};
use crate::prompt::FeatureCatalog;
use crate::series::{load_csv, CsvOptions};
use crate::tokenizer::PatchConfig;
use crate::trainer::{AdamParams, TrainConfig, TrainReport};

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub results_csv: PathBuf,
    pub report_md: PathBuf,
    pub report_json: PathBuf,
    pub manifest_json: PathBuf,
    pub method_label: String,
    pub table: MetricTable,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Resolved checkpoint paths, substituting a literal `{horizon}` per
/// experiment horizon so one pretraining run can seed a multi-horizon
/// fine-tune. Returns (horizon, path) pairs; horizon None means one
/// checkpoint serves every horizon.
fn checkpoint_paths(cfg: &RunConfig, base: &Path) -> Vec<(Option<usize>, PathBuf)> {
    let Some(raw) = cfg.paradigm.checkpoint.as_ref() else {
        return Vec::new();
    };
    let raw_str = raw.to_string_lossy();
    if raw_str.contains("{horizon}") {
        cfg.experiment
            .horizons
            .iter()
            .map(|&h| {
                (
                    Some(h),
                    resolve(
                        base,
                        Path::new(&raw_str.replace("{horizon}", &h.to_string())),
                    ),
                )
            })
            .collect()
    } else {
        vec![(None, resolve(base, raw))]
    }
}

fn load_checkpoints(cfg: &RunConfig, base: &Path) -> Result<CheckpointSet> {
    let mut set = CheckpointSet::default();
    for (horizon, path) in checkpoint_paths(cfg, base) {
        let ckpt = Checkpoint::read(&path)?;
        match horizon {
            Some(h) => set.insert(h, ckpt),
            None => set = CheckpointSet::single(ckpt),
        }
    }
    Ok(set)
}

/// Build the training recipe from a validated config, loading any referenced
/// checkpoint or prefix file.
fn build_recipe(cfg: &RunConfig, base: &Path) -> Result<TrainRecipe> {
    let prompt = match cfg.prompt.mode {
        PromptModeName::None => PromptMode::None,
        PromptModeName::TsPrompt => {
            let catalog = match cfg.prompt.slots {
                Some(slots) => FeatureCatalog::padded(slots)?,
                None => FeatureCatalog::standard(),
            };
            PromptMode::TsPrompt { catalog }
        }
        PromptModeName::TextPrompt => {
            let path = resolve(base, cfg.prompt.prefix_file.as_ref().expect("validated"));
            let text = fs::read_to_string(&path)?;
            let prefix: Vec<f64> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    l.trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!("prefix file `{}`: bad value `{l}`", path.display()))
                    })
                })
                .collect::<Result<_>>()?;
            if prefix.is_empty() {
                return Err(Error::Config("prefix file holds no values".into()));
            }
            PromptMode::TextPrompt { prefix }
        }
    };

    let tokenizer = match cfg.tokenizer.kind {
        TokenizerKindName::Linear => TokenizerChoice::Linear {
            patch: PatchConfig::new(cfg.tokenizer.patch_len, cfg.tokenizer.stride)?,
        },
        TokenizerKindName::Quantized => TokenizerChoice::Quantized {
            num_bins: cfg.tokenizer.num_bins,
            clip_q: cfg.tokenizer.clip_q,
        },
    };

    let paradigm = match cfg.paradigm.kind {
        ParadigmName::FromScratch => ParadigmChoice::FromScratch,
        ParadigmName::FullFinetune => ParadigmChoice::FullFinetune {
            checkpoints: load_checkpoints(cfg, base)?,
        },
        ParadigmName::Lora => ParadigmChoice::Lora {
            checkpoints: load_checkpoints(cfg, base)?,
            rank: cfg.paradigm.rank,
            alpha: cfg.paradigm.alpha,
        },
    };

    Ok(TrainRecipe {
        method_label: cfg.method_label(),
        prompt,
        model: ModelSettings {
            lookback: cfg.backbone.lookback,
            tokenizer,
            num_layers: cfg.backbone.num_layers,
            model_dim: cfg.backbone.model_dim,
            num_heads: cfg.backbone.num_heads,
            ff_dim: cfg.backbone.ff_dim,
            instance_norm: cfg.backbone.instance_norm,
        },
        paradigm,
        train: TrainConfig {
            learning_rate: cfg.train.learning_rate,
            lr_min: cfg.train.lr_min,
            epochs: cfg.train.epochs,
            grad_accum_steps: cfg.train.grad_accum_steps,
            batch_size: cfg.train.batch_size,
            seed: 0, // overwritten per training run from the recipe seed
            adam: AdamParams::default(),
        },
        window_stride: cfg.train.window_stride,
        seed: cfg.seed,
    })
}

fn experiment_spec(cfg: &RunConfig) -> ExperimentSpec {
    let mode = match cfg.experiment.mode {
        ExperimentModeName::Standard => ExperimentMode::Standard,
        ExperimentModeName::FewShot => ExperimentMode::FewShot {
            rate: cfg.experiment.rate,
        },
        ExperimentModeName::ZeroShot => ExperimentMode::ZeroShot {
            source: cfg.experiment.source.clone().expect("validated"),
            target: cfg.experiment.target.clone().expect("validated"),
        },
        ExperimentModeName::Diversity => ExperimentMode::Diversity {
            first_m: cfg.experiment.first_m.clone().expect("validated"),
        },
    };
    ExperimentSpec {
        mode,
        horizons: cfg.experiment.horizons.clone(),
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    id: String,
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    config_sha256: String,
    seed: u64,
    datasets: Vec<ManifestEntry>,
    base_checkpoints: Vec<ManifestEntry>,
    prefix_sha256: Option<String>,
}

#[derive(Serialize)]
struct CheckpointRecord {
    label: String,
    path: String,
    payload_sha256: String,
}

#[derive(Serialize)]
struct Report {
    method: String,
    seed: u64,
    experiment: ExperimentSpec,
    datasets: Vec<DatasetRecord>,
    audits: Vec<crate::evalkit::AuditEntry>,
    checkpoints: Vec<CheckpointRecord>,
    train_reports: Vec<(String, TrainReport)>,
    timing_secs: f64,
}

#[derive(Serialize)]
struct DatasetRecord {
    id: String,
    rows: usize,
    dims: usize,
}

/// Execute a run end to end. Nothing is written unless validation, loading,
/// and the whole experiment succeed.
pub fn run(cfg: &RunConfig, base: &Path, config_bytes: &[u8], jobs: usize) -> Result<RunSummary> {
    cfg.validate_semantics()?;
    cfg.validate_files(base)?;

    let started = std::time::Instant::now();
    let mut sources = Vec::new();
    let mut manifest_entries = Vec::new();
    for d in &cfg.datasets {
        let path = resolve(base, &d.path);
        let series = load_csv(
            &path,
            &CsvOptions {
                name: Some(d.id.clone()),
                frequency: d.frequency.clone(),
            },
        )?;
        manifest_entries.push(ManifestEntry {
            id: d.id.clone(),
            path: path.display().to_string(),
            sha256: file_sha256(&path)?,
        });
        sources.push(DatasetSource {
            id: d.id.clone(),
            series,
        });
    }

    let recipe = build_recipe(cfg, base)?;
    let spec = experiment_spec(cfg);
    let output: ProtocolOutput = run_experiment(
        &sources,
        &cfg.split,
        &recipe,
        &spec,
        cfg.include_baselines,
        jobs,
    )?;
    output.table.check_avg_law(1e-9)?;

    // All compute succeeded; now touch the filesystem.
    let out_dir = resolve(base, &cfg.output_dir);
    fs::create_dir_all(&out_dir)?;
    let ckpt_dir = out_dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;

    let title = format!("{} [{:?}]", recipe.method_label, cfg.experiment.mode);
    let (md, csv) = render_report(&[(title, output.table.clone())]);
    let results_csv = out_dir.join("results.csv");
    fs::write(&results_csv, &csv)?;
    let report_md = out_dir.join("report.md");
    fs::write(&report_md, &md)?;

    let mut checkpoint_records = Vec::new();
    let mut train_reports = Vec::new();
    for artifact in &output.artifacts {
        let path = ckpt_dir.join(format!("{}.ckpt", artifact.label));
        artifact.checkpoint.write(&path)?;
        checkpoint_records.push(CheckpointRecord {
            label: artifact.label.clone(),
            path: path.display().to_string(),
            payload_sha256: artifact.checkpoint.payload_hash(),
        });
        fs::write(
            out_dir.join(format!("train_{}.csv", artifact.label)),
            artifact.report.to_csv(),
        )?;
        train_reports.push((artifact.label.clone(), artifact.report.clone()));
    }

    let manifest = Manifest {
        config_sha256: sha256_hex(config_bytes),
        seed: cfg.seed,
        datasets: manifest_entries,
        base_checkpoints: checkpoint_paths(cfg, base)
            .into_iter()
            .map(|(h, p)| {
                Ok(ManifestEntry {
                    id: h
                        .map(|h| format!("h{h}"))
                        .unwrap_or_else(|| "shared".into()),
                    path: p.display().to_string(),
                    sha256: file_sha256(&p)?,
                })
            })
            .collect::<Result<_>>()?,
        prefix_sha256: cfg
            .prompt
            .prefix_file
            .as_ref()
            .map(|p| file_sha256(&resolve(base, p)))
            .transpose()?,
    };
    let manifest_json = out_dir.join("manifest.json");
    fs::write(
        &manifest_json,
        serde_json::to_string_pretty(&manifest).expect("manifest"),
    )?;

    let report = Report {
        method: recipe.method_label.clone(),
        seed: cfg.seed,
        experiment: spec,
        datasets: sources
            .iter()
            .map(|s| DatasetRecord {
                id: s.id.clone(),
                rows: s.series.len(),
                dims: s.series.dims(),
            })
            .collect(),
        audits: output.audits,
        checkpoints: checkpoint_records,
        train_reports,
        timing_secs: started.elapsed().as_secs_f64(),
    };
    let report_json = out_dir.join("report.json");
    fs::write(
        &report_json,
        serde_json::to_string_pretty(&report).expect("report"),
    )?;

    Ok(RunSummary {
        out_dir,
        results_csv,
        report_md,
        report_json,
        manifest_json,
        method_label: recipe.method_label,
        table: output.table,
    })
}

/// Parse a config file, apply CLI overrides, and run it.
pub fn run_from_path(
    config_path: &Path,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
    jobs: usize,
) -> Result<RunSummary> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", config_path.display())))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    if let Some(out) = out_override {
        cfg.output_dir = out;
    }
    let base = config_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    run(&cfg, &base, text.as_bytes(), jobs)
}
