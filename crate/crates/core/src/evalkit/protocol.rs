//! Experiment protocols: standard joint training, few-shot (downsampled
//! training split), zero-shot transfer, and the dataset-diversity sweep.
//!
//! All of them share one pipeline: split each dataset chronologically,
//! optionally downsample the training split, compute prompts from training
//! data only, build window corpora, train one model per horizon on the mixed
//! corpus, and score MSE/MAE over every test window. Independent
//! (horizon, training-subset) runs may execute on worker threads; results
//! are merged in a fixed order so the output never depends on `jobs`.

use serde::{Deserialize, Serialize};

use crate::backbone::{Backbone, BackboneConfig, Checkpoint, Paradigm, TokenizerKind};
use crate::error::{Error, Result};
use crate::par::parallel_map;
use crate::prompt::{
    extract_features, fit_standardizer, standardize_versioned, FeatureCatalog, PromptMatrix,
    PromptStore,
};
use crate::rng::derive_seed;
use crate::series::{
    chronological_split, downsample, make_windows, mix_corpus, Corpus, SplitSpec, TimeSeries,
};
use crate::tokenizer::{fit_quantizer, PatchConfig};
use crate::trainer::{train, TrainConfig, TrainReport};

use super::predictor::{evaluate_series, BackbonePredictor, DirectLinear, Persistence};
use super::table::{MetricTable, RowKey};

/// A named raw dataset, before any splitting.
#[derive(Debug, Clone)]
pub struct DatasetSource {
    pub id: String,
    pub series: TimeSeries,
}

/// A dataset after chronological splitting (and optional training-split
/// downsampling; validation and test splits are never downsampled).
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub id: String,
    pub train: TimeSeries,
    pub val: TimeSeries,
    pub test: TimeSeries,
}

/// Split first, then downsample the training split.
pub fn prepare(
    source: &DatasetSource,
    split: &SplitSpec,
    train_rate: usize,
) -> Result<PreparedDataset> {
    let (train, val, test) = chronological_split(&source.series, split)?;
    let train = downsample(&train, train_rate)?;
    Ok(PreparedDataset {
        id: source.id.clone(),
        train,
        val,
        test,
    })
}

/// Which prompt block is prepended to every window.
#[derive(Debug, Clone, PartialEq)]
pub enum PromptMode {
    None,
    TsPrompt {
        catalog: FeatureCatalog,
    },
    /// Fixed configuration-supplied prefix vector, replicated per variate.
    TextPrompt {
        prefix: Vec<f64>,
    },
}

impl PromptMode {
    pub fn prompt_rows(&self) -> usize {
        match self {
            PromptMode::None => 0,
            PromptMode::TsPrompt { catalog } => catalog.len(),
            PromptMode::TextPrompt { prefix } => prefix.len(),
        }
    }
}

/// Prompts for a set of datasets, computed from their training splits only.
/// Standardization statistics are pooled across every variate of every
/// listed dataset.
pub fn build_prompt_store(datasets: &[&PreparedDataset], mode: &PromptMode) -> Result<PromptStore> {
    match mode {
        PromptMode::None => Ok(PromptStore::empty()),
        PromptMode::TextPrompt { prefix } => {
            let mut store = PromptStore::new(prefix.len());
            for ds in datasets {
                store.insert(
                    ds.id.clone(),
                    PromptMatrix::constant(prefix, ds.train.dims()),
                )?;
            }
            Ok(store)
        }
        PromptMode::TsPrompt { catalog } => {
            let raw: Vec<_> = datasets
                .iter()
                .map(|ds| extract_features(&ds.train, catalog))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<_> = raw.iter().collect();
            let stats = fit_standardizer(&refs)?;
            let mut store = PromptStore::new(catalog.len());
            for (ds, features) in datasets.iter().zip(&raw) {
                store.insert(
                    ds.id.clone(),
                    standardize_versioned(features, &stats, catalog.version())?,
                )?;
            }
            Ok(store)
        }
    }
}

/// Tokenization choice plus its fitting knobs.
#[derive(Debug, Clone, PartialEq)]
pub enum TokenizerChoice {
    Linear { patch: PatchConfig },
    Quantized { num_bins: usize, clip_q: f64 },
}

/// Architecture knobs shared across horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub lookback: usize,
    pub tokenizer: TokenizerChoice,
    pub num_layers: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    pub instance_norm: bool,
}

/// Base checkpoints for the fine-tuning paradigms. Because the prediction
/// head is sized by the horizon, a multi-horizon run needs one matching
/// checkpoint per horizon; a single checkpoint serves runs whose horizon it
/// matches.
#[derive(Debug, Clone, Default)]
pub struct CheckpointSet {
    per_horizon: std::collections::BTreeMap<usize, Checkpoint>,
    fallback: Option<Checkpoint>,
}

impl CheckpointSet {
    pub fn single(checkpoint: Checkpoint) -> CheckpointSet {
        CheckpointSet {
            per_horizon: Default::default(),
            fallback: Some(checkpoint),
        }
    }

    pub fn insert(&mut self, horizon: usize, checkpoint: Checkpoint) {
        self.per_horizon.insert(horizon, checkpoint);
    }

    pub fn for_horizon(&self, horizon: usize) -> Result<&Checkpoint> {
        self.per_horizon
            .get(&horizon)
            .or(self.fallback.as_ref())
            .ok_or_else(|| {
                Error::CheckpointMismatch(format!("no base checkpoint for horizon {horizon}"))
            })
    }
}

/// Where initial weights come from.
#[derive(Debug, Clone)]
pub enum ParadigmChoice {
    FromScratch,
    FullFinetune {
        checkpoints: CheckpointSet,
    },
    Lora {
        checkpoints: CheckpointSet,
        rank: usize,
        alpha: f64,
    },
}

impl ParadigmChoice {
    pub fn label(&self) -> &'static str {
        match self {
            ParadigmChoice::FromScratch => "from_scratch",
            ParadigmChoice::FullFinetune { .. } => "full_finetune",
            ParadigmChoice::Lora { .. } => "lora",
        }
    }
}

/// Everything needed to train and score one method column.
#[derive(Debug, Clone)]
pub struct TrainRecipe {
    pub method_label: String,
    pub prompt: PromptMode,
    pub model: ModelSettings,
    pub paradigm: ParadigmChoice,
    pub train: TrainConfig,
    pub window_stride: usize,
    pub seed: u64,
}

impl TrainRecipe {
    fn backbone_config(&self, prompt_rows: usize, horizon: usize) -> BackboneConfig {
        BackboneConfig {
            prompt_rows,
            lookback: self.model.lookback,
            tokenizer: match &self.model.tokenizer {
                TokenizerChoice::Linear { patch } => TokenizerKind::Linear { patch: *patch },
                TokenizerChoice::Quantized { num_bins, .. } => TokenizerKind::Quantized {
                    num_bins: *num_bins,
                },
            },
            num_layers: self.model.num_layers,
            model_dim: self.model.model_dim,
            num_heads: self.model.num_heads,
            ff_dim: self.model.ff_dim,
            horizon,
            instance_norm: self.model.instance_norm,
        }
    }
}

/// One trained model plus its provenance, ready to be written out.
#[derive(Debug, Clone)]
pub struct TrainArtifact {
    pub label: String,
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    pub corpus_windows: usize,
}

/// Free-form provenance recorded by the protocols (hashes, corpus sizes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditEntry {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutput {
    pub table: MetricTable,
    pub artifacts: Vec<TrainArtifact>,
    pub audits: Vec<AuditEntry>,
}

/// The experiment axis of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExperimentMode {
    Standard,
    FewShot { rate: usize },
    ZeroShot { source: String, target: String },
    Diversity { first_m: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub mode: ExperimentMode,
    pub horizons: Vec<usize>,
}

impl ExperimentSpec {
    pub fn validate(&self, dataset_ids: &[String]) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one horizon is required".into(),
            ));
        }
        match &self.mode {
            ExperimentMode::Standard => Ok(()),
            ExperimentMode::FewShot { rate } => {
                if *rate == 0 {
                    return Err(Error::InvalidRate);
                }
                Ok(())
            }
            ExperimentMode::ZeroShot { source, target } => {
                if source == target {
                    return Err(Error::InvalidArgument(
                        "zero-shot source and target must differ".into(),
                    ));
                }
                for id in [source, target] {
                    if !dataset_ids.iter().any(|d| d == id) {
                        return Err(Error::Config(format!("unknown dataset `{id}`")));
                    }
                }
                Ok(())
            }
            ExperimentMode::Diversity { first_m } => {
                if first_m.is_empty() {
                    return Err(Error::InvalidArgument(
                        "diversity sweep needs at least one m".into(),
                    ));
                }
                for &m in first_m {
                    if m == 0 || m > dataset_ids.len() {
                        return Err(Error::InvalidArgument(format!(
                            "diversity m={m} outside 1..={}",
                            dataset_ids.len()
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Train one model for one horizon on the union of the given datasets'
/// training windows.
pub fn train_for_horizon(
    train_sets: &[&PreparedDataset],
    prompts: &PromptStore,
    recipe: &TrainRecipe,
    horizon: usize,
    label: &str,
) -> Result<(Backbone, TrainReport, usize)> {
    let corpus = build_corpus(
        train_sets,
        recipe.model.lookback,
        horizon,
        recipe.window_stride,
        derive_seed(recipe.seed, &format!("{label}/mix")),
    )?;
    let val = build_val_corpus(train_sets, recipe.model.lookback, horizon);

    let config = recipe.backbone_config(prompts.prompt_rows(), horizon);
    let mut model = match &recipe.paradigm {
        ParadigmChoice::FromScratch => Backbone::build(
            config,
            Paradigm::FromScratch {
                seed: derive_seed(recipe.seed, &format!("{label}/init")),
            },
        )?,
        ParadigmChoice::FullFinetune { checkpoints } => Backbone::build(
            config,
            Paradigm::FullFinetune {
                checkpoint: checkpoints.for_horizon(horizon)?.clone(),
            },
        )?,
        ParadigmChoice::Lora {
            checkpoints,
            rank,
            alpha,
        } => Backbone::build(
            config,
            Paradigm::Lora {
                checkpoint: checkpoints.for_horizon(horizon)?.clone(),
                rank: *rank,
                alpha: *alpha,
                seed: derive_seed(recipe.seed, &format!("{label}/lora")),
            },
        )?,
    };

    if let TokenizerChoice::Quantized { num_bins, clip_q } = &recipe.model.tokenizer {
        if model.quantizer().is_none() {
            let mut values = Vec::new();
            for ds in train_sets {
                values.extend_from_slice(ds.train.values().data());
                let prompt = prompts.get(&ds.id)?;
                values.extend_from_slice(prompt.features.data());
            }
            model.set_quantizer(fit_quantizer(&values, *num_bins, *clip_q)?)?;
        }
    }

    let train_cfg = TrainConfig {
        seed: derive_seed(recipe.seed, &format!("{label}/train")),
        ..recipe.train.clone()
    };
    let report = train(&mut model, &corpus, prompts, val.as_ref(), &train_cfg)?;
    Ok((model, report, corpus.len()))
}

fn build_corpus(
    sets: &[&PreparedDataset],
    lookback: usize,
    horizon: usize,
    stride: usize,
    seed: u64,
) -> Result<Corpus> {
    let mut per_dataset = Vec::new();
    for ds in sets {
        let windows = make_windows(&ds.train, lookback, horizon, stride)?;
        per_dataset.push((ds.id.clone(), windows));
    }
    mix_corpus(per_dataset, seed)
}

/// Validation corpus over whatever validation splits are long enough; None
/// when every split is shorter than one window.
fn build_val_corpus(sets: &[&PreparedDataset], lookback: usize, horizon: usize) -> Option<Corpus> {
    let mut per_dataset = Vec::new();
    for ds in sets {
        if let Ok(windows) = make_windows(&ds.val, lookback, horizon, 1) {
            per_dataset.push((ds.id.clone(), windows));
        }
    }
    mix_corpus(per_dataset, 0).ok()
}

/// Score one trained model on one dataset's test split.
pub fn evaluate_backbone(
    model: &Backbone,
    prompt: &PromptMatrix,
    test: &TimeSeries,
    horizon: usize,
) -> Result<(f64, f64)> {
    if model.config().horizon != horizon {
        return Err(Error::HorizonMismatch {
            model: model.config().horizon,
            requested: horizon,
        });
    }
    evaluate_series(
        &BackbonePredictor {
            model,
            prompt: prompt.clone(),
        },
        test,
    )
}

struct HorizonOutcome {
    rows: Vec<(String, String, f64, f64)>,
    artifact: TrainArtifact,
}

/// Standard protocol: joint training over all datasets; equivalent to
/// few-shot at rate 1.
pub fn run_standard(
    sources: &[DatasetSource],
    split: &SplitSpec,
    recipe: &TrainRecipe,
    horizons: &[usize],
    include_baselines: bool,
    jobs: usize,
) -> Result<ProtocolOutput> {
    run_few_shot(sources, split, recipe, horizons, 1, include_baselines, jobs)
}

/// Few-shot protocol: split, then periodically downsample every training
/// split at `rate`; validation and test untouched.
pub fn run_few_shot(
    sources: &[DatasetSource],
    split: &SplitSpec,
    recipe: &TrainRecipe,
    horizons: &[usize],
    rate: usize,
    include_baselines: bool,
    jobs: usize,
) -> Result<ProtocolOutput> {
    if sources.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let prepared: Vec<PreparedDataset> = sources
        .iter()
        .map(|s| prepare(s, split, rate))
        .collect::<Result<_>>()?;
    let refs: Vec<&PreparedDataset> = prepared.iter().collect();
    let prompts = build_prompt_store(&refs, &recipe.prompt)?;

    let outcomes = parallel_map(jobs, horizons, |_, &horizon| -> Result<HorizonOutcome> {
        let label = format!("h{horizon}");
        let (model, report, corpus_windows) =
            train_for_horizon(&refs, &prompts, recipe, horizon, &label)?;
        let mut rows = Vec::new();
        for ds in &prepared {
            let prompt = prompts.get(&ds.id)?;
            let (mse, mae) = evaluate_backbone(&model, &prompt, &ds.test, horizon)?;
            rows.push((ds.id.clone(), recipe.method_label.clone(), mse, mae));
        }
        if include_baselines {
            baseline_rows(&refs, recipe, horizon, &mut rows)?;
        }
        Ok(HorizonOutcome {
            rows,
            artifact: TrainArtifact {
                label,
                checkpoint: model.save(),
                report,
                corpus_windows,
            },
        })
    });

    let mut table = MetricTable::new(horizons.to_vec());
    let mut artifacts = Vec::new();
    let mut audits = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        for (dataset, method, mse, mae) in &outcome.rows {
            table.set(dataset, RowKey::Horizon(horizons[i]), method, *mse, *mae)?;
        }
        audits.push(AuditEntry {
            key: format!("corpus_windows/{}", outcome.artifact.label),
            value: outcome.artifact.corpus_windows.to_string(),
        });
        artifacts.push(outcome.artifact);
    }
    table.finalize_avg()?;
    Ok(ProtocolOutput {
        table,
        artifacts,
        audits,
    })
}

fn baseline_rows(
    prepared: &[&PreparedDataset],
    recipe: &TrainRecipe,
    horizon: usize,
    rows: &mut Vec<(String, String, f64, f64)>,
) -> Result<()> {
    let lookback = recipe.model.lookback;
    let corpus = build_corpus(
        prepared,
        lookback,
        horizon,
        recipe.window_stride,
        derive_seed(recipe.seed, "baseline/mix"),
    )?;
    let linear = DirectLinear::fit(&corpus, lookback, horizon)?;
    let persistence = Persistence {
        lookback_len: lookback,
        horizon,
    };
    for ds in prepared {
        let (mse, mae) = evaluate_series(&persistence, &ds.test)?;
        rows.push((ds.id.clone(), "persistence".into(), mse, mae));
        let (mse, mae) = evaluate_series(&linear, &ds.test)?;
        rows.push((ds.id.clone(), "direct_linear".into(), mse, mae));
    }
    Ok(())
}

/// Zero-shot outcome: the metric table plus the parameter payload hashes
/// taken before and after evaluation (they must match; evaluation never
/// adapts the model).
#[derive(Debug, Clone)]
pub struct ZeroShotOutcome {
    pub table: MetricTable,
    pub hash_before: String,
    pub hash_after: String,
}

/// Evaluate source-trained models on an unseen target dataset. Target
/// prompts are computed from the target's training split only.
pub fn run_zero_shot(
    models: &[(usize, &Backbone)],
    target: &PreparedDataset,
    prompt_mode: &PromptMode,
    method_label: &str,
) -> Result<ZeroShotOutcome> {
    if models.is_empty() {
        return Err(Error::InvalidArgument(
            "zero-shot needs at least one trained model".into(),
        ));
    }
    let target_prompts = build_prompt_store(&[target], prompt_mode)?;
    let prompt = target_prompts.get(&target.id)?;

    let hash_before = joint_hash(models);
    let horizons: Vec<usize> = models.iter().map(|(h, _)| *h).collect();
    let mut table = MetricTable::new(horizons);
    for (horizon, model) in models {
        let (mse, mae) = evaluate_backbone(model, &prompt, &target.test, *horizon)?;
        table.set(
            &target.id,
            RowKey::Horizon(*horizon),
            method_label,
            mse,
            mae,
        )?;
    }
    table.finalize_avg()?;
    let hash_after = joint_hash(models);
    Ok(ZeroShotOutcome {
        table,
        hash_before,
        hash_after,
    })
}

fn joint_hash(models: &[(usize, &Backbone)]) -> String {
    models
        .iter()
        .map(|(h, m)| format!("{h}:{};", m.payload_hash()))
        .collect()
}

/// Full zero-shot protocol: train on the source dataset per horizon, then
/// transfer to the target without adaptation.
pub fn run_zero_shot_protocol(
    sources: &[DatasetSource],
    split: &SplitSpec,
    recipe: &TrainRecipe,
    horizons: &[usize],
    source_id: &str,
    target_id: &str,
    jobs: usize,
) -> Result<ProtocolOutput> {
    if source_id == target_id {
        return Err(Error::InvalidArgument(
            "zero-shot source and target must differ".into(),
        ));
    }
    let find = |id: &str| {
        sources
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Config(format!("unknown dataset `{id}`")))
    };
    let source = prepare(find(source_id)?, split, 1)?;
    let target = prepare(find(target_id)?, split, 1)?;
    let source_prompts = build_prompt_store(&[&source], &recipe.prompt)?;

    let trained = parallel_map(jobs, horizons, |_, &horizon| {
        let label = format!("h{horizon}");
        train_for_horizon(&[&source], &source_prompts, recipe, horizon, &label)
            .map(|(model, report, n)| (horizon, label, model, report, n))
    });

    let mut artifacts = Vec::new();
    let mut audits = Vec::new();
    let mut models = Vec::new();
    for t in trained {
        let (horizon, label, model, report, corpus_windows) = t?;
        artifacts.push(TrainArtifact {
            label,
            checkpoint: model.save(),
            report,
            corpus_windows,
        });
        models.push((horizon, model));
    }
    let model_refs: Vec<(usize, &Backbone)> = models.iter().map(|(h, m)| (*h, m)).collect();
    let method = format!("{}@{source_id}->{target_id}", recipe.method_label);
    let outcome = run_zero_shot(&model_refs, &target, &recipe.prompt, &method)?;
    audits.push(AuditEntry {
        key: "zero_shot/hash_before".into(),
        value: outcome.hash_before.clone(),
    });
    audits.push(AuditEntry {
        key: "zero_shot/hash_after".into(),
        value: outcome.hash_after.clone(),
    });
    if outcome.hash_before != outcome.hash_after {
        return Err(Error::Numerical {
            context: "zero-shot evaluation mutated parameters".into(),
        });
    }
    Ok(ProtocolOutput {
        table: outcome.table,
        artifacts,
        audits,
    })
}

/// Diversity sweep: for each m, train on the union of the first m datasets
/// and evaluate on every dataset's test split. Columns are labeled by m.
/// Datasets outside the training subset are scored with prompts fitted on
/// their own training split (zero-shot provenance).
pub fn run_diversity_sweep(
    sources: &[DatasetSource],
    split: &SplitSpec,
    recipe: &TrainRecipe,
    horizons: &[usize],
    first_m: &[usize],
    jobs: usize,
) -> Result<ProtocolOutput> {
    if sources.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let prepared: Vec<PreparedDataset> = sources
        .iter()
        .map(|s| prepare(s, split, 1))
        .collect::<Result<_>>()?;
    for &m in first_m {
        if m == 0 || m > prepared.len() {
            return Err(Error::InvalidArgument(format!(
                "diversity m={m} outside 1..={}",
                prepared.len()
            )));
        }
    }

    let pairs: Vec<(usize, usize)> = first_m
        .iter()
        .flat_map(|&m| horizons.iter().map(move |&h| (m, h)))
        .collect();
    let outcomes = parallel_map(jobs, &pairs, |_, &(m, horizon)| -> Result<HorizonOutcome> {
        let train_refs: Vec<&PreparedDataset> = prepared[..m].iter().collect();
        let prompts = build_prompt_store(&train_refs, &recipe.prompt)?;
        // Seeds derive from the horizon alone, so the m = N sweep point is
        // bit-identical to the standard joint run at the same seed.
        let (model, report, corpus_windows) = train_for_horizon(
            &train_refs,
            &prompts,
            recipe,
            horizon,
            &format!("h{horizon}"),
        )?;
        let label = format!("m{m}_h{horizon}");
        let column = format!("m={m}");
        let mut rows = Vec::new();
        for ds in &prepared {
            let prompt = if train_refs.iter().any(|t| t.id == ds.id) {
                prompts.get(&ds.id)?
            } else {
                build_prompt_store(&[ds], &recipe.prompt)?.get(&ds.id)?
            };
            let (mse, mae) = evaluate_backbone(&model, &prompt, &ds.test, horizon)?;
            rows.push((ds.id.clone(), column.clone(), mse, mae));
        }
        Ok(HorizonOutcome {
            rows,
            artifact: TrainArtifact {
                label,
                checkpoint: model.save(),
                report,
                corpus_windows,
            },
        })
    });

    let mut table = MetricTable::new(horizons.to_vec());
    let mut artifacts = Vec::new();
    let mut audits = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        let (_, horizon) = pairs[i];
        for (dataset, method, mse, mae) in &outcome.rows {
            table.set(dataset, RowKey::Horizon(horizon), method, *mse, *mae)?;
        }
        audits.push(AuditEntry {
            key: format!("corpus_windows/{}", outcome.artifact.label),
            value: outcome.artifact.corpus_windows.to_string(),
        });
        artifacts.push(outcome.artifact);
    }
    table.finalize_avg()?;
    Ok(ProtocolOutput {
        table,
        artifacts,
        audits,
    })
}

/// Dispatch an experiment spec to its protocol.
pub fn run_experiment(
    sources: &[DatasetSource],
    split: &SplitSpec,
    recipe: &TrainRecipe,
    spec: &ExperimentSpec,
    include_baselines: bool,
    jobs: usize,
) -> Result<ProtocolOutput> {
    let ids: Vec<String> = sources.iter().map(|s| s.id.clone()).collect();
    spec.validate(&ids)?;
    match &spec.mode {
        ExperimentMode::Standard => run_standard(
            sources,
            split,
            recipe,
            &spec.horizons,
            include_baselines,
            jobs,
        ),
        ExperimentMode::FewShot { rate } => run_few_shot(
            sources,
            split,
            recipe,
            &spec.horizons,
            *rate,
            include_baselines,
            jobs,
        ),
        ExperimentMode::ZeroShot { source, target } => {
            run_zero_shot_protocol(sources, split, recipe, &spec.horizons, source, target, jobs)
        }
        ExperimentMode::Diversity { first_m } => {
            run_diversity_sweep(sources, split, recipe, &spec.horizons, first_m, jobs)
        }
    }
}
