//! Run configuration: a strict TOML file that pins every benchmarking axis
//! (datasets, split, prompt mode, tokenizer, backbone, paradigm, training
//! hyperparameters, experiment protocol, output directory, global seed).
//! Unknown keys are rejected by name; a parsed config round-trips through
//! serialization losslessly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SplitSpec;
use crate::tokenizer::PatchConfig;

fn d_true() -> bool {
    true
}
fn d_patch_len() -> usize {
    16
}
fn d_stride() -> usize {
    8
}
fn d_num_bins() -> usize {
    256
}
fn d_clip_q() -> f64 {
    0.01
}
fn d_layers() -> usize {
    3
}
fn d_model_dim() -> usize {
    32
}
fn d_heads() -> usize {
    4
}
fn d_ff() -> usize {
    64
}
fn d_lookback() -> usize {
    336
}
fn d_lr() -> f64 {
    1e-3
}
fn d_epochs() -> usize {
    10
}
fn d_accum() -> usize {
    64
}
fn d_batch() -> usize {
    8
}
fn d_window_stride() -> usize {
    1
}
fn d_horizons() -> Vec<usize> {
    vec![96, 192, 336, 720]
}
fn d_rate() -> usize {
    20
}
fn d_rank() -> usize {
    4
}
fn d_alpha() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub frequency: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptModeName {
    None,
    TsPrompt,
    TextPrompt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    pub mode: PromptModeName,
    /// Pad the feature catalog to this many slots (e.g. 133).
    #[serde(default)]
    pub slots: Option<usize>,
    /// Fixed prefix vector for text_prompt mode, one value per line.
    #[serde(default)]
    pub prefix_file: Option<PathBuf>,
}

impl Default for PromptSection {
    fn default() -> Self {
        PromptSection {
            mode: PromptModeName::TsPrompt,
            slots: None,
            prefix_file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKindName {
    Linear,
    Quantized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerSection {
    pub kind: TokenizerKindName,
    #[serde(default = "d_patch_len")]
    pub patch_len: usize,
    #[serde(default = "d_stride")]
    pub stride: usize,
    #[serde(default = "d_num_bins")]
    pub num_bins: usize,
    #[serde(default = "d_clip_q")]
    pub clip_q: f64,
}

impl Default for TokenizerSection {
    fn default() -> Self {
        TokenizerSection {
            kind: TokenizerKindName::Linear,
            patch_len: d_patch_len(),
            stride: d_stride(),
            num_bins: d_num_bins(),
            clip_q: d_clip_q(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneSection {
    #[serde(default = "d_layers")]
    pub num_layers: usize,
    #[serde(default = "d_model_dim")]
    pub model_dim: usize,
    #[serde(default = "d_heads")]
    pub num_heads: usize,
    #[serde(default = "d_ff")]
    pub ff_dim: usize,
    #[serde(default = "d_lookback")]
    pub lookback: usize,
    #[serde(default = "d_true")]
    pub instance_norm: bool,
}

impl Default for BackboneSection {
    fn default() -> Self {
        BackboneSection {
            num_layers: d_layers(),
            model_dim: d_model_dim(),
            num_heads: d_heads(),
            ff_dim: d_ff(),
            lookback: d_lookback(),
            instance_norm: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParadigmName {
    FromScratch,
    FullFinetune,
    Lora,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParadigmSection {
    pub kind: ParadigmName,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default = "d_rank")]
    pub rank: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
}

impl Default for ParadigmSection {
    fn default() -> Self {
        ParadigmSection {
            kind: ParadigmName::FromScratch,
            checkpoint: None,
            rank: d_rank(),
            alpha: d_alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub lr_min: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_accum")]
    pub grad_accum_steps: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_window_stride")]
    pub window_stride: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: d_lr(),
            lr_min: 0.0,
            epochs: d_epochs(),
            grad_accum_steps: d_accum(),
            batch_size: d_batch(),
            window_stride: d_window_stride(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentModeName {
    Standard,
    FewShot,
    ZeroShot,
    Diversity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: ExperimentModeName,
    #[serde(default = "d_horizons")]
    pub horizons: Vec<usize>,
    /// Few-shot training-split downsampling rate (20 keeps 5% of the data).
    #[serde(default = "d_rate")]
    pub rate: usize,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub first_m: Option<Vec<usize>>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            mode: ExperimentModeName::Standard,
            horizons: d_horizons(),
            rate: d_rate(),
            source: None,
            target: None,
            first_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(rename = "dataset")]
    pub datasets: Vec<DatasetEntry>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub prompt: PromptSection,
    #[serde(default)]
    pub tokenizer: TokenizerSection,
    #[serde(default)]
    pub backbone: BackboneSection,
    #[serde(default)]
    pub paradigm: ParadigmSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default = "d_true")]
    pub include_baselines: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate_semantics()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Internal consistency only; file existence is checked separately so
    /// serialization round trips do not touch the filesystem.
    pub fn validate_semantics(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one [[dataset]] is required".into()));
        }
        for (i, a) in self.datasets.iter().enumerate() {
            if a.id.is_empty() {
                return Err(Error::Config("dataset id must be non-empty".into()));
            }
            for b in self.datasets.iter().skip(i + 1) {
                if a.id == b.id {
                    return Err(Error::Config(format!("duplicate dataset id `{}`", a.id)));
                }
            }
        }
        self.split
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        PatchConfig::new(self.tokenizer.patch_len, self.tokenizer.stride)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.tokenizer.num_bins < 2 {
            return Err(Error::Config(
                "tokenizer.num_bins must be at least 2".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.tokenizer.clip_q) {
            return Err(Error::Config(
                "tokenizer.clip_q must lie in [0, 0.5)".into(),
            ));
        }
        if self.backbone.model_dim == 0
            || self.backbone.num_heads == 0
            || !self
                .backbone
                .model_dim
                .is_multiple_of(self.backbone.num_heads)
        {
            return Err(Error::Config(
                "backbone.model_dim must be a positive multiple of num_heads".into(),
            ));
        }
        if matches!(
            self.paradigm.kind,
            ParadigmName::FullFinetune | ParadigmName::Lora
        ) && self.paradigm.checkpoint.is_none()
        {
            return Err(Error::Config(format!(
                "paradigm `{:?}` requires a checkpoint path",
                self.paradigm.kind
            )));
        }
        if self.prompt.mode == PromptModeName::TextPrompt && self.prompt.prefix_file.is_none() {
            return Err(Error::Config(
                "text_prompt mode requires prompt.prefix_file".into(),
            ));
        }
        if let Some(slots) = self.prompt.slots {
            if slots == 0 {
                return Err(Error::Config("prompt.slots must be positive".into()));
            }
        }
        if self.experiment.horizons.is_empty() {
            return Err(Error::Config(
                "experiment.horizons must be non-empty".into(),
            ));
        }
        match self.experiment.mode {
            ExperimentModeName::ZeroShot => {
                let (Some(src), Some(tgt)) = (&self.experiment.source, &self.experiment.target)
                else {
                    return Err(Error::Config(
                        "zero_shot mode requires source and target".into(),
                    ));
                };
                if src == tgt {
                    return Err(Error::Config(
                        "zero_shot source and target must differ".into(),
                    ));
                }
                for id in [src, tgt] {
                    if !self.datasets.iter().any(|d| &d.id == id) {
                        return Err(Error::Config(format!("unknown dataset `{id}`")));
                    }
                }
            }
            ExperimentModeName::FewShot => {
                if self.experiment.rate == 0 {
                    return Err(Error::Config("few_shot rate must be at least 1".into()));
                }
            }
            ExperimentModeName::Diversity => {
                let Some(first_m) = &self.experiment.first_m else {
                    return Err(Error::Config("diversity mode requires first_m".into()));
                };
                for &m in first_m {
                    if m == 0 || m > self.datasets.len() {
                        return Err(Error::Config(format!(
                            "first_m entry {m} outside 1..={}",
                            self.datasets.len()
                        )));
                    }
                }
            }
            ExperimentModeName::Standard => {}
        }
        Ok(())
    }

    /// Check every referenced file exists.
    pub fn validate_files(&self, base: &Path) -> Result<()> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        for d in &self.datasets {
            let p = resolve(&d.path);
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "dataset file `{}` not found",
                    p.display()
                )));
            }
        }
        if let Some(ckpt) = &self.paradigm.checkpoint {
            // a literal {horizon} is substituted per experiment horizon
            let raw = ckpt.to_string_lossy();
            if raw.contains("{horizon}") {
                for &h in &self.experiment.horizons {
                    let p = resolve(Path::new(&raw.replace("{horizon}", &h.to_string())));
                    if !p.is_file() {
                        return Err(Error::Config(format!(
                            "checkpoint `{}` not found",
                            p.display()
                        )));
                    }
                }
                return self.validate_prefix_file(base);
            }
            let p = resolve(ckpt);
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "checkpoint `{}` not found",
                    p.display()
                )));
            }
        }
        self.validate_prefix_file(base)
    }

    fn validate_prefix_file(&self, base: &Path) -> Result<()> {
        if let Some(prefix) = &self.prompt.prefix_file {
            let p = if prefix.is_absolute() {
                prefix.clone()
            } else {
                base.join(prefix)
            };
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "prefix file `{}` not found",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// Label used as the method column in result tables.
    pub fn method_label(&self) -> String {
        let prompt = match self.prompt.mode {
            PromptModeName::None => "no_prompt",
            PromptModeName::TsPrompt => "ts_prompt",
            PromptModeName::TextPrompt => "text_prompt",
        };
        let tok = match self.tokenizer.kind {
            TokenizerKindName::Linear => "linear",
            TokenizerKindName::Quantized => "quantized",
        };
        let paradigm = match self.paradigm.kind {
            ParadigmName::FromScratch => "from_scratch",
            ParadigmName::FullFinetune => "full_finetune",
            ParadigmName::Lora => "lora",
        };
        format!("{prompt}+{tok}+{paradigm}")
    }
}

/// Parse and fully validate a config file (including referenced paths,
/// resolved relative to the config file's directory).
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
    let cfg = RunConfig::from_toml(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    cfg.validate_files(base)?;
    Ok(cfg)
}
