//! Decoder-style transformer forecaster.
//!
//! The model is channel-independent: every variate of a window runs through
//! the same weights, and the head maps the flattened final token states to
//! all `horizon` future values at once. Three build paradigms are supported:
//! seeded random init, full fine-tuning from a checkpoint, and LoRA adapters
//! on a frozen checkpoint.

mod net;

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::Rng;
use crate::tokenizer::{PatchConfig, Quantizer};

pub use net::{ChannelCache, GradStore};

/// How raw channel values become tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenizerKind {
    /// Trainable linear patch embedding; one token per patch.
    Linear { patch: PatchConfig },
    /// Scale-and-bin ids looked up in a trainable embedding table; one token
    /// per time step. The fitted [`Quantizer`] travels with the model.
    Quantized { num_bins: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    /// Prompt rows (M) prepended to each look-back block.
    pub prompt_rows: usize,
    /// Look-back length (E).
    pub lookback: usize,
    pub tokenizer: TokenizerKind,
    pub num_layers: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    /// Prediction length (Q).
    pub horizon: usize,
    /// Normalize each look-back channel by its own mean/std and re-apply the
    /// stats to the prediction. Ignored by the quantized tokenizer, which
    /// carries its own corpus-level scale.
    pub instance_norm: bool,
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::InvalidArgument(
                "num_layers must be at least 1".into(),
            ));
        }
        if self.model_dim == 0
            || self.num_heads == 0
            || !self.model_dim.is_multiple_of(self.num_heads)
        {
            return Err(Error::InvalidArgument(format!(
                "model_dim {} must be a positive multiple of num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        if self.ff_dim == 0 || self.horizon == 0 || self.lookback == 0 {
            return Err(Error::InvalidArgument(
                "ff_dim, horizon and lookback must be positive".into(),
            ));
        }
        match &self.tokenizer {
            TokenizerKind::Linear { patch } => patch.validate()?,
            TokenizerKind::Quantized { num_bins } => {
                if *num_bins < 2 {
                    return Err(Error::InvalidArgument("need at least 2 token bins".into()));
                }
            }
        }
        Ok(())
    }

    /// Rows the model expects per input channel: prompt + look-back.
    pub fn input_rows(&self) -> usize {
        self.prompt_rows + self.lookback
    }

    /// Tokens per channel after padding/patching (linear) or per time step
    /// (quantized).
    pub fn num_tokens(&self) -> usize {
        match &self.tokenizer {
            TokenizerKind::Linear { patch } => {
                let padded = patch.padded_len(self.input_rows());
                (padded - patch.patch_len) / patch.stride + 1
            }
            TokenizerKind::Quantized { .. } => self.input_rows(),
        }
    }

    /// Ordered parameter layout. Checkpoints store tensors in exactly this
    /// order; LoRA targets and Adam slots reference it by name.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let k = self.model_dim;
        let n = self.num_tokens();
        let mut specs = Vec::new();
        let mut push = |name: String, rows: usize, cols: usize, init: InitKind| {
            specs.push(ParamSpec {
                name,
                rows,
                cols,
                init,
            });
        };
        match &self.tokenizer {
            TokenizerKind::Linear { patch } => {
                push(
                    "embed.weight".into(),
                    k,
                    patch.patch_len,
                    InitKind::Gaussian,
                );
                push("embed.bias".into(), k, 1, InitKind::Zero);
            }
            TokenizerKind::Quantized { num_bins } => {
                push("embed.table".into(), *num_bins, k, InitKind::Gaussian);
            }
        }
        push("pos.weight".into(), n, k, InitKind::Gaussian);
        for l in 0..self.num_layers {
            push(format!("layer{l}.ln1.gain"), k, 1, InitKind::One);
            push(format!("layer{l}.ln1.bias"), k, 1, InitKind::Zero);
            for proj in ["wq", "wk", "wv", "wo"] {
                push(format!("layer{l}.attn.{proj}"), k, k, InitKind::Gaussian);
                push(
                    format!("layer{l}.attn.{}", proj.replace('w', "b")),
                    k,
                    1,
                    InitKind::Zero,
                );
            }
            push(format!("layer{l}.ln2.gain"), k, 1, InitKind::One);
            push(format!("layer{l}.ln2.bias"), k, 1, InitKind::Zero);
            push(
                format!("layer{l}.ff.w1"),
                self.ff_dim,
                k,
                InitKind::Gaussian,
            );
            push(format!("layer{l}.ff.b1"), self.ff_dim, 1, InitKind::Zero);
            push(
                format!("layer{l}.ff.w2"),
                k,
                self.ff_dim,
                InitKind::Gaussian,
            );
            push(format!("layer{l}.ff.b2"), k, 1, InitKind::Zero);
        }
        push("final_norm.gain".into(), k, 1, InitKind::One);
        push("final_norm.bias".into(), k, 1, InitKind::Zero);
        push(
            "head.weight".into(),
            self.horizon,
            n * k,
            InitKind::Gaussian,
        );
        push("head.bias".into(), self.horizon, 1, InitKind::Zero);
        specs
    }

    /// Total scalar parameter count (base model, adapters excluded).
    pub fn param_count(&self) -> usize {
        self.param_specs().iter().map(|s| s.rows * s.cols).sum()
    }

    /// FNV-1a hash of the canonical JSON encoding, used to pair checkpoints
    /// with configurations.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Gaussian,
    Zero,
    One,
}

#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub init: InitKind,
}

/// One low-rank adapter pair: effective update (alpha/rank) * b . a applied
/// to the named base matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    pub target: String,
    /// rank x in.
    pub a: Mat,
    /// out x rank.
    pub b: Mat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraSet {
    pub rank: usize,
    pub alpha: f64,
    pub adapters: Vec<LoraAdapter>,
}

impl LoraSet {
    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank as f64
    }
}

/// Build paradigm: where the initial weights come from and what trains.
#[derive(Debug, Clone)]
pub enum Paradigm {
    /// Seeded random init; every parameter trains.
    FromScratch { seed: u64 },
    /// Checkpoint weights; every parameter trains.
    FullFinetune { checkpoint: Checkpoint },
    /// Checkpoint weights frozen; only adapters (B zero-initialized) train.
    Lora {
        checkpoint: Checkpoint,
        rank: usize,
        alpha: f64,
        seed: u64,
    },
}

/// Identifies one trainable tensor for the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotId {
    Base(usize),
    LoraA(usize),
    LoraB(usize),
}

#[derive(Debug, Clone)]
pub struct Backbone {
    config: BackboneConfig,
    names: Vec<String>,
    params: Vec<Mat>,
    index: HashMap<String, usize>,
    base_trainable: bool,
    lora: Option<LoraSet>,
    quantizer: Option<Quantizer>,
}

impl Backbone {
    pub fn build(config: BackboneConfig, paradigm: Paradigm) -> Result<Backbone> {
        config.validate()?;
        match paradigm {
            Paradigm::FromScratch { seed } => Ok(Self::init_random(config, seed)),
            Paradigm::FullFinetune { checkpoint } => {
                let model = Self::load(&checkpoint)?;
                if model.config != config {
                    return Err(Error::CheckpointMismatch(format!(
                        "checkpoint hash {} does not match requested config hash {}",
                        checkpoint.manifest.config_hash,
                        config.config_hash()
                    )));
                }
                if model.lora.is_some() {
                    return Err(Error::CheckpointMismatch(
                        "checkpoint carries adapters; merge them before full fine-tuning".into(),
                    ));
                }
                Ok(model)
            }
            Paradigm::Lora {
                checkpoint,
                rank,
                alpha,
                seed,
            } => {
                let mut model = Self::load(&checkpoint)?;
                if model.config != config {
                    return Err(Error::CheckpointMismatch(format!(
                        "checkpoint hash {} does not match requested config hash {}",
                        checkpoint.manifest.config_hash,
                        config.config_hash()
                    )));
                }
                if model.lora.is_some() {
                    return Err(Error::CheckpointMismatch(
                        "checkpoint already carries adapters".into(),
                    ));
                }
                model.attach_lora(rank, alpha, seed)?;
                Ok(model)
            }
        }
    }

    fn init_random(config: BackboneConfig, seed: u64) -> Backbone {
        let specs = config.param_specs();
        let mut rng = Rng::new(seed);
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for spec in &specs {
            let data: Vec<f64> = match spec.init {
                InitKind::Gaussian => (0..spec.rows * spec.cols)
                    .map(|_| rng.gaussian() * 0.02)
                    .collect(),
                InitKind::Zero => vec![0.0; spec.rows * spec.cols],
                InitKind::One => vec![1.0; spec.rows * spec.cols],
            };
            names.push(spec.name.clone());
            params.push(Mat::from_vec(spec.rows, spec.cols, data).expect("sized init"));
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Backbone {
            config,
            names,
            params,
            index,
            base_trainable: true,
            lora: None,
            quantizer: None,
        }
    }

    /// Attach fresh adapters to the attention projections of every layer and
    /// freeze the base weights. A is Gaussian, B zero: the adapted model's
    /// first forward pass is identical to the base model.
    fn attach_lora(&mut self, rank: usize, alpha: f64, seed: u64) -> Result<()> {
        if rank == 0 {
            return Err(Error::InvalidRank {
                rank,
                max: self.config.model_dim,
            });
        }
        let mut rng = Rng::new(seed);
        let mut adapters = Vec::new();
        for l in 0..self.config.num_layers {
            for proj in ["wq", "wk", "wv", "wo"] {
                let target = format!("layer{l}.attn.{proj}");
                let w = &self.params[self.index[&target]];
                let max_rank = w.rows().min(w.cols());
                if rank > max_rank {
                    return Err(Error::InvalidRank {
                        rank,
                        max: max_rank,
                    });
                }
                let a_data: Vec<f64> = (0..rank * w.cols())
                    .map(|_| rng.gaussian() * 0.02)
                    .collect();
                adapters.push(LoraAdapter {
                    target,
                    a: Mat::from_vec(rank, w.cols(), a_data)?,
                    b: Mat::zeros(w.rows(), rank),
                });
            }
        }
        self.lora = Some(LoraSet {
            rank,
            alpha,
            adapters,
        });
        self.base_trainable = false;
        Ok(())
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn lora(&self) -> Option<&LoraSet> {
        self.lora.as_ref()
    }

    pub fn quantizer(&self) -> Option<&Quantizer> {
        self.quantizer.as_ref()
    }

    /// Install the fitted quantizer a quantized-tokenizer model reads ids
    /// from. Rejected for linear-tokenizer models.
    pub fn set_quantizer(&mut self, q: Quantizer) -> Result<()> {
        match self.config.tokenizer {
            TokenizerKind::Quantized { num_bins } => {
                if q.num_bins != num_bins {
                    return Err(Error::Shape {
                        expected: format!("{num_bins} bins"),
                        got: format!("{}", q.num_bins),
                    });
                }
                self.quantizer = Some(q);
                Ok(())
            }
            TokenizerKind::Linear { .. } => Err(Error::InvalidArgument(
                "linear-tokenizer models do not take a quantizer".into(),
            )),
        }
    }

    pub fn param(&self, name: &str) -> Option<&Mat> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn base_trainable(&self) -> bool {
        self.base_trainable
    }

    /// Scalar count over base params plus adapters.
    pub fn total_param_count(&self) -> usize {
        let base: usize = self.params.iter().map(|p| p.len()).sum();
        let lora: usize = self
            .lora
            .as_ref()
            .map(|l| l.adapters.iter().map(|a| a.a.len() + a.b.len()).sum())
            .unwrap_or(0);
        base + lora
    }

    /// Trainable tensors in optimizer order.
    pub fn trainable_slots(&self) -> Vec<SlotId> {
        let mut slots = Vec::new();
        if self.base_trainable {
            for i in 0..self.params.len() {
                slots.push(SlotId::Base(i));
            }
        }
        if let Some(lora) = &self.lora {
            for i in 0..lora.adapters.len() {
                slots.push(SlotId::LoraA(i));
                slots.push(SlotId::LoraB(i));
            }
        }
        slots
    }

    pub fn slot_data(&self, slot: SlotId) -> &[f64] {
        match slot {
            SlotId::Base(i) => self.params[i].data(),
            SlotId::LoraA(i) => self.lora.as_ref().expect("lora slot").adapters[i].a.data(),
            SlotId::LoraB(i) => self.lora.as_ref().expect("lora slot").adapters[i].b.data(),
        }
    }

    pub fn slot_data_mut(&mut self, slot: SlotId) -> &mut [f64] {
        match slot {
            SlotId::Base(i) => self.params[i].data_mut(),
            SlotId::LoraA(i) => self.lora.as_mut().expect("lora slot").adapters[i]
                .a
                .data_mut(),
            SlotId::LoraB(i) => self.lora.as_mut().expect("lora slot").adapters[i]
                .b
                .data_mut(),
        }
    }

    /// Per-target effective weights W + (alpha/r) B.A; None means the base
    /// tensor is used unchanged.
    pub(crate) fn effective_overrides(&self) -> Vec<Option<Mat>> {
        let mut eff: Vec<Option<Mat>> = vec![None; self.params.len()];
        if let Some(lora) = &self.lora {
            let s = lora.scaling();
            for ad in &lora.adapters {
                let ti = self.index[&ad.target];
                let w = &self.params[ti];
                let mut out = w.clone();
                let rank = ad.a.rows();
                for o in 0..w.rows() {
                    for i in 0..w.cols() {
                        let mut acc = 0.0;
                        for r in 0..rank {
                            acc += ad.b.get(o, r) * ad.a.get(r, i);
                        }
                        out.set(o, i, w.get(o, i) + s * acc);
                    }
                }
                eff[ti] = Some(out);
            }
        }
        eff
    }

    /// Fold the adapters into the base weights. The merged model has no
    /// adapters and trains fully; its forward pass equals the adapted one.
    pub fn merge_lora(&self) -> Result<Backbone> {
        let lora = self
            .lora
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("model has no adapters to merge".into()))?;
        for ad in &lora.adapters {
            let ti = *self.index.get(&ad.target).ok_or_else(|| Error::Shape {
                expected: "existing target matrix".into(),
                got: ad.target.clone(),
            })?;
            let w = &self.params[ti];
            if ad.b.rows() != w.rows() || ad.a.cols() != w.cols() || ad.a.rows() != ad.b.cols() {
                return Err(Error::Shape {
                    expected: format!("adapter factors for {}", w.shape_string()),
                    got: format!("a {} b {}", ad.a.shape_string(), ad.b.shape_string()),
                });
            }
        }
        let mut merged = self.clone();
        let overrides = self.effective_overrides();
        for (i, o) in overrides.into_iter().enumerate() {
            if let Some(m) = o {
                merged.params[i] = m;
            }
        }
        merged.lora = None;
        merged.base_trainable = true;
        Ok(merged)
    }

    /// Flat parameter payload in manifest order: base tensors, then adapter
    /// (a, b) pairs.
    pub fn payload(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_param_count());
        for p in &self.params {
            out.extend_from_slice(p.data());
        }
        if let Some(lora) = &self.lora {
            for ad in &lora.adapters {
                out.extend_from_slice(ad.a.data());
                out.extend_from_slice(ad.b.data());
            }
        }
        out
    }

    /// Base-weight payload only (frozen under LoRA).
    pub fn base_payload_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.params.iter().map(|p| p.len()).sum::<usize>() * 8);
        for p in &self.params {
            for v in p.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    /// SHA-256 of the full parameter payload, little-endian f64 bytes.
    pub fn payload_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for v in self.payload() {
            hasher.update(v.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn save(&self) -> Checkpoint {
        let mut entries: Vec<ParamEntry> = self
            .names
            .iter()
            .zip(&self.params)
            .map(|(n, p)| ParamEntry {
                name: n.clone(),
                rows: p.rows(),
                cols: p.cols(),
            })
            .collect();
        if let Some(lora) = &self.lora {
            for ad in &lora.adapters {
                entries.push(ParamEntry {
                    name: format!("lora.{}.a", ad.target),
                    rows: ad.a.rows(),
                    cols: ad.a.cols(),
                });
                entries.push(ParamEntry {
                    name: format!("lora.{}.b", ad.target),
                    rows: ad.b.rows(),
                    cols: ad.b.cols(),
                });
            }
        }
        Checkpoint {
            manifest: CheckpointManifest {
                format: CHECKPOINT_FORMAT.into(),
                endianness: "little".into(),
                config: self.config.clone(),
                config_hash: self.config.config_hash(),
                lora: self.lora.as_ref().map(|l| LoraMeta {
                    rank: l.rank,
                    alpha: l.alpha,
                    targets: l.adapters.iter().map(|a| a.target.clone()).collect(),
                }),
                quantizer: self.quantizer.clone(),
                params: entries,
            },
            payload: self.payload(),
        }
    }

    /// Rebuild a model from a checkpoint. The manifest is validated against
    /// the configuration's expected layout before any parameter is read.
    pub fn load(ckpt: &Checkpoint) -> Result<Backbone> {
        let config = ckpt.manifest.config.clone();
        config.validate()?;
        if ckpt.manifest.config_hash != config.config_hash() {
            return Err(Error::CheckpointMismatch(
                "manifest hash does not match its config".into(),
            ));
        }
        let specs = config.param_specs();
        let mut expected: Vec<(String, usize, usize)> = specs
            .iter()
            .map(|s| (s.name.clone(), s.rows, s.cols))
            .collect();
        if let Some(meta) = &ckpt.manifest.lora {
            if meta.rank == 0 {
                return Err(Error::InvalidRank {
                    rank: 0,
                    max: config.model_dim,
                });
            }
            for t in &meta.targets {
                let spec = specs.iter().find(|s| &s.name == t).ok_or_else(|| {
                    Error::CheckpointMismatch(format!("unknown LoRA target `{t}`"))
                })?;
                expected.push((format!("lora.{t}.a"), meta.rank, spec.cols));
                expected.push((format!("lora.{t}.b"), spec.rows, meta.rank));
            }
        }
        if ckpt.manifest.params.len() != expected.len() {
            return Err(Error::CheckpointMismatch(format!(
                "manifest lists {} tensors, config needs {}",
                ckpt.manifest.params.len(),
                expected.len()
            )));
        }
        for (entry, (name, rows, cols)) in ckpt.manifest.params.iter().zip(&expected) {
            if &entry.name != name || entry.rows != *rows || entry.cols != *cols {
                return Err(Error::CheckpointMismatch(format!(
                    "tensor `{}` is {}x{}, expected `{}` {}x{}",
                    entry.name, entry.rows, entry.cols, name, rows, cols
                )));
            }
        }
        let total: usize = expected.iter().map(|(_, r, c)| r * c).sum();
        if ckpt.payload.len() != total {
            return Err(Error::CorruptCheckpoint(format!(
                "payload holds {} values, manifest needs {total}",
                ckpt.payload.len()
            )));
        }

        let mut offset = 0;
        let mut take = |rows: usize, cols: usize| {
            let data = ckpt.payload[offset..offset + rows * cols].to_vec();
            offset += rows * cols;
            Mat::from_vec(rows, cols, data).expect("sized payload")
        };
        let mut names = Vec::new();
        let mut params = Vec::new();
        for spec in &specs {
            names.push(spec.name.clone());
            params.push(take(spec.rows, spec.cols));
        }
        let lora = ckpt.manifest.lora.as_ref().map(|meta| {
            let adapters = meta
                .targets
                .iter()
                .map(|t| {
                    let spec = specs
                        .iter()
                        .find(|s| &s.name == t)
                        .expect("validated above");
                    LoraAdapter {
                        target: t.clone(),
                        a: take(meta.rank, spec.cols),
                        b: take(spec.rows, meta.rank),
                    }
                })
                .collect();
            LoraSet {
                rank: meta.rank,
                alpha: meta.alpha,
                adapters,
            }
        });
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(Backbone {
            base_trainable: lora.is_none(),
            quantizer: ckpt.manifest.quantizer.clone(),
            config,
            names,
            params,
            index,
            lora,
        })
    }
}

const CHECKPOINT_FORMAT: &str = "tsforge-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraMeta {
    pub rank: usize,
    pub alpha: f64,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub endianness: String,
    pub config: BackboneConfig,
    pub config_hash: String,
    pub lora: Option<LoraMeta>,
    pub quantizer: Option<Quantizer>,
    pub params: Vec<ParamEntry>,
}

/// On disk: one line of manifest JSON, a newline, then the flat parameter
/// payload as little-endian f64 in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub payload: Vec<f64>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_string(&self.manifest).expect("manifest serializes");
        let mut bytes = Vec::with_capacity(manifest.len() + 1 + self.payload.len() * 8);
        bytes.extend_from_slice(manifest.as_bytes());
        bytes.push(b'\n');
        for v in &self.payload {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::CorruptCheckpoint("missing manifest delimiter".into()))?;
        let manifest: CheckpointManifest = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| Error::CorruptCheckpoint(format!("manifest: {e}")))?;
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(Error::CorruptCheckpoint(format!(
                "unknown format `{}`",
                manifest.format
            )));
        }
        if manifest.endianness != "little" {
            return Err(Error::CorruptCheckpoint(format!(
                "unsupported endianness `{}`",
                manifest.endianness
            )));
        }
        let body = &bytes[newline + 1..];
        if !body.len().is_multiple_of(8) {
            return Err(Error::CorruptCheckpoint(
                "payload is not a whole number of f64".into(),
            ));
        }
        let expected: usize = manifest.params.iter().map(|p| p.rows * p.cols).sum();
        if body.len() / 8 != expected {
            return Err(Error::CorruptCheckpoint(format!(
                "payload holds {} values, manifest lists {expected}",
                body.len() / 8
            )));
        }
        let payload = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Checkpoint { manifest, payload })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 over the payload bytes.
    pub fn payload_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.payload {
            hasher.update(v.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
