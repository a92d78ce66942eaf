//! Deterministic gradient-based optimization: MSE objective, Adam with bias
//! correction, a cosine-annealed learning rate stepped per optimizer step,
//! gradient accumulation over micro-batches, and the epoch loop.
//!
//! Micro-batch gradients are averaged (each micro-batch contributes the mean
//! gradient of its windows, and the accumulated sum is divided by the number
//! of micro-batches), so `(accum k, micro-batch m)` follows the same
//! trajectory as `(accum 1, batch k*m)`. Trailing windows that do not fill a
//! whole accumulation group are dropped.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backbone::{Backbone, GradStore};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::prompt::{assemble_input, PromptMatrix, PromptStore};
use crate::rng::{derive_seed, Rng};
use crate::series::{Corpus, Window};

/// Mean squared error over all entries of two equally-shaped matrices.
pub fn mse_loss(pred: &Mat, target: &Mat) -> Result<f64> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::Shape {
            expected: target.shape_string(),
            got: pred.shape_string(),
        });
    }
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// lr_min + 0.5 (base - lr_min)(1 + cos(pi t / T)).
pub fn cosine_lr(step: usize, total_steps: usize, base: f64, floor: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::InvalidArgument(
            "total_steps must be at least 1".into(),
        ));
    }
    if step > total_steps {
        return Err(Error::InvalidStep {
            step,
            total: total_steps,
        });
    }
    let cos = (std::f64::consts::PI * step as f64 / total_steps as f64).cos();
    Ok(floor + 0.5 * (base - floor) * (1.0 + cos))
}

/// Adam moment hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-tensor first/second moment estimates plus the step counter used for
/// bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn zeros(len: usize) -> AdamState {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update over a flat parameter tensor.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    hyper: &AdamParams,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape {
            expected: format!("{} values", params.len()),
            got: format!("{} grads / {} state", grads.len(), state.m.len()),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical {
            context: "gradient".into(),
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for i in 0..params.len() {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lr_min: f64,
    pub epochs: usize,
    pub grad_accum_steps: usize,
    /// Windows per micro-batch.
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            lr_min: 0.0,
            epochs: 10,
            grad_accum_steps: 64,
            batch_size: 8,
            seed: 0,
            adam: AdamParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument(
                "learning_rate must be non-negative".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.grad_accum_steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "grad_accum_steps and batch_size must be at least 1".into(),
            ));
        }
        if self.lr_min < 0.0 || self.lr_min > self.learning_rate {
            return Err(Error::InvalidArgument(
                "lr_min must lie in [0, learning_rate]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean window MSE per epoch over the windows actually consumed.
    pub train_loss: Vec<f64>,
    /// Mean window MSE over the validation corpus per epoch; empty when no
    /// validation corpus was supplied.
    pub val_loss: Vec<f64>,
    /// Learning rate of the last optimizer step in each epoch.
    pub lr_trace: Vec<f64>,
    pub optimizer_steps: usize,
    pub wall_time_secs: f64,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV rows: epoch, train_mse, val_mse, lr.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse,lr\n");
        for e in 0..self.train_loss.len() {
            let val = self
                .val_loss
                .get(e)
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                e, self.train_loss[e], val, self.lr_trace[e]
            ));
        }
        out
    }
}

fn assemble_window(prompts: &PromptStore, dataset: &str, window: &Window) -> Result<Mat> {
    let prompt = prompts.get(dataset)?;
    assemble_input(&prompt, &window.lookback)
}

/// Mean window MSE of a model over a corpus (no parameter updates).
pub fn corpus_loss(model: &Backbone, corpus: &Corpus, prompts: &PromptStore) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total = 0.0;
    for (dataset, window) in corpus.entries() {
        let input = assemble_window(prompts, dataset, window)?;
        let pred = model.forward(&input)?;
        total += mse_loss(&pred, &window.target)?;
    }
    Ok(total / corpus.len() as f64)
}

/// Train in place. Gradients are averaged over `grad_accum_steps`
/// micro-batches of `batch_size` windows before each Adam step; data order is
/// reshuffled per epoch from the config seed; the learning rate follows
/// [`cosine_lr`] over the total number of optimizer steps. Only trainable
/// tensors change: under the LoRA paradigm the base weights stay bit-exact.
pub fn train(
    model: &mut Backbone,
    corpus: &Corpus,
    prompts: &PromptStore,
    val: Option<&Corpus>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let group = cfg.grad_accum_steps * cfg.batch_size;
    let steps_per_epoch = corpus.len() / group;
    if steps_per_epoch == 0 {
        return Err(Error::InvalidArgument(format!(
            "corpus of {} windows cannot fill one accumulation group of {group}",
            corpus.len()
        )));
    }
    let total_steps = steps_per_epoch * cfg.epochs;

    // Assemble every model input once; windows are then addressed by index.
    let mut inputs = Vec::with_capacity(corpus.len());
    for (dataset, window) in corpus.entries() {
        inputs.push(assemble_window(prompts, dataset, window)?);
    }

    let slots = model.trainable_slots();
    let mut adam_states: Vec<AdamState> = slots
        .iter()
        .map(|&s| AdamState::zeros(model.slot_data(s).len()))
        .collect();
    let mut grads = GradStore::zeros_like(model);

    let start = Instant::now();
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::new();
    let mut lr_trace = Vec::with_capacity(cfg.epochs);
    let mut step_idx = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        let mut rng = Rng::new(derive_seed(cfg.seed, &format!("shuffle/epoch{epoch}")));
        rng.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        let mut epoch_windows = 0usize;
        let mut epoch_last_lr = 0.0;
        for step in 0..steps_per_epoch {
            grads.zero();
            let overrides = model.effective_overrides();
            let group_slice = &order[step * group..(step + 1) * group];
            for micro in group_slice.chunks(cfg.batch_size) {
                for &wi in micro {
                    let (dataset_window, input) = (&corpus.entries()[wi], &inputs[wi]);
                    let target = &dataset_window.1.target;
                    let (pred, caches) = model.forward_internal(&overrides, input, true)?;
                    let loss = mse_loss(&pred, target)?;
                    epoch_loss += loss;
                    epoch_windows += 1;
                    // d pred of the micro-batch mean loss
                    let scale = 2.0 / (pred.len() as f64 * micro.len() as f64);
                    let mut d_pred = Mat::zeros(pred.rows(), pred.cols());
                    for i in 0..pred.len() {
                        d_pred.data_mut()[i] = scale * (pred.data()[i] - target.data()[i]);
                    }
                    model.backward_internal(&overrides, &caches, &d_pred, &mut grads);
                }
            }
            grads.scale(1.0 / cfg.grad_accum_steps as f64);
            grads.finalize_lora(model);
            if !grads.all_finite() {
                return Err(Error::Numerical {
                    context: format!("optimizer step {step_idx}"),
                });
            }
            let lr = cosine_lr(step_idx, total_steps, cfg.learning_rate, cfg.lr_min)?;
            for (si, &slot) in slots.iter().enumerate() {
                let g = grads.slot_data(slot).to_vec();
                adam_step(
                    model.slot_data_mut(slot),
                    &g,
                    &mut adam_states[si],
                    lr,
                    &cfg.adam,
                )
                .map_err(|_| Error::Numerical {
                    context: format!("optimizer step {step_idx}"),
                })?;
            }
            epoch_last_lr = lr;
            step_idx += 1;
        }

        train_loss.push(epoch_loss / epoch_windows as f64);
        lr_trace.push(epoch_last_lr);
        if let Some(val_corpus) = val {
            val_loss.push(corpus_loss(model, val_corpus, prompts)?);
        }
    }

    Ok(TrainReport {
        train_loss,
        val_loss,
        lr_trace,
        optimizer_steps: step_idx,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Compare analytic gradients of the window MSE against central finite
/// differences for every trainable scalar. Returns the maximum relative
/// error, with |a - n| / max(|a|, |n|, 1e-5) as the metric.
pub fn grad_check(
    model: &mut Backbone,
    prompt: &PromptMatrix,
    window: &Window,
    eps: f64,
) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let input = assemble_input(prompt, &window.lookback)?;
    let target = window.target.clone();

    // Analytic pass.
    let overrides = model.effective_overrides();
    let (pred, caches) = model.forward_internal(&overrides, &input, true)?;
    let mut grads = GradStore::zeros_like(model);
    let scale = 2.0 / pred.len() as f64;
    let mut d_pred = Mat::zeros(pred.rows(), pred.cols());
    for i in 0..pred.len() {
        d_pred.data_mut()[i] = scale * (pred.data()[i] - target.data()[i]);
    }
    model.backward_internal(&overrides, &caches, &d_pred, &mut grads);
    grads.finalize_lora(model);

    // Numeric pass, slot by slot. forward() resolves LoRA overrides fresh on
    // every call, so perturbing adapter factors is reflected.
    let mut max_rel: f64 = 0.0;
    let slots = model.trainable_slots();
    for slot in slots {
        for i in 0..model.slot_data(slot).len() {
            let saved = model.slot_data(slot)[i];
            model.slot_data_mut(slot)[i] = saved + eps;
            let up = mse_loss(&model.forward(&input)?, &target)?;
            model.slot_data_mut(slot)[i] = saved - eps;
            let down = mse_loss(&model.forward(&input)?, &target)?;
            model.slot_data_mut(slot)[i] = saved;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.slot_data(slot)[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}
