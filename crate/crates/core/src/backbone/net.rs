//! Forward and backward passes. Activations are plain `Vec<f64>` buffers in
//! token-major layout ([token * dim + feature]); the backward pass walks the
//! cached activations in reverse and accumulates gradients per named tensor.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::tokenizer::{left_pad, patchify};

use super::{Backbone, SlotId, TokenizerKind};

const LN_EPS: f64 = 1e-5;
const IN_EPS: f64 = 1e-8;

/// Gradients aligned with a model's base tensors and adapters.
#[derive(Debug, Clone)]
pub struct GradStore {
    pub base: Vec<Mat>,
    pub lora: Vec<(Mat, Mat)>,
}

impl GradStore {
    pub fn zeros_like(model: &Backbone) -> GradStore {
        let base = model
            .params
            .iter()
            .map(|p| Mat::zeros(p.rows(), p.cols()))
            .collect();
        let lora = model
            .lora
            .as_ref()
            .map(|l| {
                l.adapters
                    .iter()
                    .map(|a| {
                        (
                            Mat::zeros(a.a.rows(), a.a.cols()),
                            Mat::zeros(a.b.rows(), a.b.cols()),
                        )
                    })
                    .collect()
            })
            .unwrap_or_default();
        GradStore { base, lora }
    }

    pub fn zero(&mut self) {
        for m in &mut self.base {
            m.data_mut().fill(0.0);
        }
        for (a, b) in &mut self.lora {
            a.data_mut().fill(0.0);
            b.data_mut().fill(0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for m in &mut self.base {
            for v in m.data_mut() {
                *v *= s;
            }
        }
        for (a, b) in &mut self.lora {
            for v in a.data_mut() {
                *v *= s;
            }
            for v in b.data_mut() {
                *v *= s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.base.iter().all(|m| m.all_finite())
            && self
                .lora
                .iter()
                .all(|(a, b)| a.all_finite() && b.all_finite())
    }

    /// Project accumulated effective-weight gradients into adapter factors:
    /// dA = s * B^T G, dB = s * G A^T with s = alpha/rank. Call once per
    /// optimizer step, after all backward passes.
    pub fn finalize_lora(&mut self, model: &Backbone) {
        let Some(lora) = &model.lora else { return };
        let s = lora.scaling();
        for (i, ad) in lora.adapters.iter().enumerate() {
            let g = &self.base[model.index[&ad.target]];
            let (rank, in_dim, out_dim) = (ad.a.rows(), ad.a.cols(), ad.b.rows());
            let (da, db) = &mut self.lora[i];
            for r in 0..rank {
                for c in 0..in_dim {
                    let mut acc = 0.0;
                    for o in 0..out_dim {
                        acc += ad.b.get(o, r) * g.get(o, c);
                    }
                    da.set(r, c, s * acc);
                }
            }
            for o in 0..out_dim {
                for r in 0..rank {
                    let mut acc = 0.0;
                    for c in 0..in_dim {
                        acc += g.get(o, c) * ad.a.get(r, c);
                    }
                    db.set(o, r, s * acc);
                }
            }
        }
    }

    pub fn slot_data(&self, slot: SlotId) -> &[f64] {
        match slot {
            SlotId::Base(i) => self.base[i].data(),
            SlotId::LoraA(i) => self.lora[i].0.data(),
            SlotId::LoraB(i) => self.lora[i].1.data(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LnCache {
    xhat: Vec<f64>,
    rstd: Vec<f64>,
    out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    ln1: LnCache,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Per head: n x n softmax probabilities, causal lower triangle.
    att: Vec<Vec<f64>>,
    ctx: Vec<f64>,
    ln2: LnCache,
    ff_pre: Vec<f64>,
    ff_act: Vec<f64>,
}

/// Everything the backward pass needs about one channel's forward run.
#[derive(Debug, Clone)]
pub struct ChannelCache {
    mu: f64,
    sd: f64,
    patches: Option<Vec<Vec<f64>>>,
    ids: Option<Vec<usize>>,
    layers: Vec<LayerCache>,
    final_ln: LnCache,
    y_norm: Vec<f64>,
}

/// Resolved tensor indices for one forward pass.
struct Wires {
    embed_w: usize,
    embed_b: Option<usize>,
    pos: usize,
    layers: Vec<[usize; 16]>,
    fin_g: usize,
    fin_b: usize,
    head_w: usize,
    head_b: usize,
}

impl Backbone {
    fn wires(&self) -> Wires {
        let idx = |name: String| self.index[&name];
        let (embed_w, embed_b) = match self.config.tokenizer {
            TokenizerKind::Linear { .. } => {
                (idx("embed.weight".into()), Some(idx("embed.bias".into())))
            }
            TokenizerKind::Quantized { .. } => (idx("embed.table".into()), None),
        };
        let layers = (0..self.config.num_layers)
            .map(|l| {
                [
                    idx(format!("layer{l}.ln1.gain")),
                    idx(format!("layer{l}.ln1.bias")),
                    idx(format!("layer{l}.attn.wq")),
                    idx(format!("layer{l}.attn.bq")),
                    idx(format!("layer{l}.attn.wk")),
                    idx(format!("layer{l}.attn.bk")),
                    idx(format!("layer{l}.attn.wv")),
                    idx(format!("layer{l}.attn.bv")),
                    idx(format!("layer{l}.attn.wo")),
                    idx(format!("layer{l}.attn.bo")),
                    idx(format!("layer{l}.ln2.gain")),
                    idx(format!("layer{l}.ln2.bias")),
                    idx(format!("layer{l}.ff.w1")),
                    idx(format!("layer{l}.ff.b1")),
                    idx(format!("layer{l}.ff.w2")),
                    idx(format!("layer{l}.ff.b2")),
                ]
            })
            .collect();
        Wires {
            embed_w,
            embed_b,
            pos: idx("pos.weight".into()),
            layers,
            fin_g: idx("final_norm.gain".into()),
            fin_b: idx("final_norm.bias".into()),
            head_w: idx("head.weight".into()),
            head_b: idx("head.bias".into()),
        }
    }

    /// Predict Q x d future values from an (M+E) x d augmented input.
    pub fn forward(&self, input: &Mat) -> Result<Mat> {
        let overrides = self.effective_overrides();
        Ok(self.forward_internal(&overrides, input, false)?.0)
    }

    pub(crate) fn forward_internal(
        &self,
        overrides: &[Option<Mat>],
        input: &Mat,
        want_cache: bool,
    ) -> Result<(Mat, Vec<ChannelCache>)> {
        if input.rows() != self.config.input_rows() {
            return Err(Error::Shape {
                expected: format!("{} input rows", self.config.input_rows()),
                got: input.shape_string(),
            });
        }
        if input.cols() == 0 {
            return Err(Error::Shape {
                expected: "at least one channel".into(),
                got: "0".into(),
            });
        }
        let wires = self.wires();
        let mut pred = Mat::zeros(self.config.horizon, input.cols());
        let mut caches = Vec::new();
        for j in 0..input.cols() {
            let channel = input.column(j);
            let cache = self.channel_forward(overrides, &wires, &channel)?;
            for (i, &y) in cache.y_norm.iter().enumerate() {
                pred.set(i, j, y * cache.sd + cache.mu);
            }
            if want_cache {
                caches.push(cache);
            }
        }
        if !pred.all_finite() {
            return Err(Error::Numerical {
                context: "prediction head output".into(),
            });
        }
        Ok((pred, caches))
    }

    fn channel_forward(
        &self,
        overrides: &[Option<Mat>],
        wires: &Wires,
        channel: &[f64],
    ) -> Result<ChannelCache> {
        let cfg = &self.config;
        let k = cfg.model_dim;
        let n = cfg.num_tokens();
        let w = |i: usize| overrides[i].as_ref().unwrap_or(&self.params[i]);

        // Instance normalization of the look-back block; prompt rows are
        // already standardized and pass through.
        let m_rows = cfg.prompt_rows;
        let lookback = &channel[m_rows..];
        let (mu, sd) = match cfg.tokenizer {
            TokenizerKind::Linear { .. } if cfg.instance_norm => {
                let mu = lookback.iter().sum::<f64>() / lookback.len() as f64;
                let var = lookback.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
                    / lookback.len() as f64;
                (mu, (var + IN_EPS).sqrt())
            }
            _ => (0.0, 1.0),
        };
        let mut full = Vec::with_capacity(channel.len());
        full.extend_from_slice(&channel[..m_rows]);
        full.extend(lookback.iter().map(|v| (v - mu) / sd));

        // Tokenize.
        let mut h = vec![0.0; n * k];
        let mut patches_cache = None;
        let mut ids_cache = None;
        match &cfg.tokenizer {
            TokenizerKind::Linear { patch } => {
                let padded = left_pad(&full, patch);
                let patches = patchify(&padded, patch)?;
                debug_assert_eq!(patches.len(), n);
                let we = w(wires.embed_w);
                let be = w(wires.embed_b.expect("linear mode has a bias"));
                for (t, p) in patches.iter().enumerate() {
                    for o in 0..k {
                        let row = we.row(o);
                        h[t * k + o] =
                            be.data()[o] + row.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                patches_cache = Some(patches);
            }
            TokenizerKind::Quantized { .. } => {
                let q = self.quantizer.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("quantized model has no fitted quantizer".into())
                })?;
                let ids = q.quantize(&full);
                let table = w(wires.embed_w);
                for (t, &id) in ids.iter().enumerate() {
                    h[t * k..(t + 1) * k].copy_from_slice(table.row(id));
                }
                ids_cache = Some(ids);
            }
        }
        let pos = w(wires.pos);
        for t in 0..n {
            for o in 0..k {
                h[t * k + o] += pos.get(t, o);
            }
        }
        if !h.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical {
                context: "token embedding".into(),
            });
        }

        // Transformer blocks, pre-LN with causal attention.
        let heads = cfg.num_heads;
        let hd = k / heads;
        let inv_sqrt = 1.0 / (hd as f64).sqrt();
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for (l, wl) in wires.layers.iter().enumerate() {
            let ln1 = layer_norm(&h, n, k, w(wl[0]).data(), w(wl[1]).data());
            let q = lin_fwd(&ln1.out, n, k, w(wl[2]), w(wl[3]).data());
            let key = lin_fwd(&ln1.out, n, k, w(wl[4]), w(wl[5]).data());
            let v = lin_fwd(&ln1.out, n, k, w(wl[6]), w(wl[7]).data());

            let mut att = vec![vec![0.0; n * n]; heads];
            let mut ctx = vec![0.0; n * k];
            for hh in 0..heads {
                let base = hh * hd;
                for i in 0..n {
                    let mut scores = Vec::with_capacity(i + 1);
                    for j in 0..=i {
                        let mut s = 0.0;
                        for c in 0..hd {
                            s += q[i * k + base + c] * key[j * k + base + c];
                        }
                        scores.push(s * inv_sqrt);
                    }
                    let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut denom = 0.0;
                    for s in scores.iter_mut() {
                        *s = (*s - mx).exp();
                        denom += *s;
                    }
                    for (j, s) in scores.iter().enumerate() {
                        let p = s / denom;
                        att[hh][i * n + j] = p;
                        for c in 0..hd {
                            ctx[i * k + base + c] += p * v[j * k + base + c];
                        }
                    }
                }
            }

            let attn_out = lin_fwd(&ctx, n, k, w(wl[8]), w(wl[9]).data());
            let mut x_res1 = h.clone();
            for (x, a) in x_res1.iter_mut().zip(&attn_out) {
                *x += a;
            }

            let ln2 = layer_norm(&x_res1, n, k, w(wl[10]).data(), w(wl[11]).data());
            let ff_pre = lin_fwd(&ln2.out, n, k, w(wl[12]), w(wl[13]).data());
            let ff_act: Vec<f64> = ff_pre.iter().map(|&x| gelu(x)).collect();
            let ff_out = lin_fwd(&ff_act, n, cfg.ff_dim, w(wl[14]), w(wl[15]).data());
            let mut x_out = x_res1.clone();
            for (x, f) in x_out.iter_mut().zip(&ff_out) {
                *x += f;
            }
            if !x_out.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical {
                    context: format!("layer {l}"),
                });
            }
            h = x_out;
            layers.push(LayerCache {
                ln1,
                q,
                k: key,
                v,
                att,
                ctx,
                ln2,
                ff_pre,
                ff_act,
            });
        }

        let final_ln = layer_norm(&h, n, k, w(wires.fin_g).data(), w(wires.fin_b).data());
        let y_norm = lin_fwd(
            &final_ln.out,
            1,
            n * k,
            w(wires.head_w),
            w(wires.head_b).data(),
        );
        Ok(ChannelCache {
            mu,
            sd,
            patches: patches_cache,
            ids: ids_cache,
            layers,
            final_ln,
            y_norm,
        })
    }

    /// Accumulate dLoss/dparams for every channel of one window.
    /// `d_pred` is the loss gradient w.r.t. the denormalized prediction.
    pub(crate) fn backward_internal(
        &self,
        overrides: &[Option<Mat>],
        caches: &[ChannelCache],
        d_pred: &Mat,
        grads: &mut GradStore,
    ) {
        let wires = self.wires();
        for (j, cache) in caches.iter().enumerate() {
            let d_yhat: Vec<f64> = (0..d_pred.rows()).map(|i| d_pred.get(i, j)).collect();
            self.channel_backward(overrides, &wires, cache, &d_yhat, grads);
        }
    }

    fn channel_backward(
        &self,
        overrides: &[Option<Mat>],
        wires: &Wires,
        cache: &ChannelCache,
        d_yhat: &[f64],
        grads: &mut GradStore,
    ) {
        let cfg = &self.config;
        let k = cfg.model_dim;
        let n = cfg.num_tokens();
        let heads = cfg.num_heads;
        let hd = k / heads;
        let inv_sqrt = 1.0 / (hd as f64).sqrt();
        let w = |i: usize| overrides[i].as_ref().unwrap_or(&self.params[i]);

        // Denormalization: yhat = y_norm * sd + mu with sd, mu constant
        // w.r.t. parameters.
        let d_y: Vec<f64> = d_yhat.iter().map(|d| d * cache.sd).collect();

        // Head.
        let head_w = w(wires.head_w);
        let mut d_flat = vec![0.0; n * k];
        {
            let (dw, db) = two_muts(&mut grads.base, wires.head_w, wires.head_b);
            for o in 0..cfg.horizon {
                let dyo = d_y[o];
                db.data_mut()[o] += dyo;
                for f in 0..n * k {
                    dw.data_mut()[o * n * k + f] += dyo * cache.final_ln.out[f];
                }
            }
        }
        for f in 0..n * k {
            let mut acc = 0.0;
            for o in 0..cfg.horizon {
                acc += d_y[o] * head_w.get(o, f);
            }
            d_flat[f] = acc;
        }

        // Final layer norm.
        let mut d_x = vec![0.0; n * k];
        {
            let (dg, db) = two_muts(&mut grads.base, wires.fin_g, wires.fin_b);
            layer_norm_bwd(
                &d_flat,
                &cache.final_ln,
                n,
                k,
                w(wires.fin_g).data(),
                dg.data_mut(),
                db.data_mut(),
                &mut d_x,
            );
        }

        // Blocks in reverse.
        for (l, wl) in wires.layers.iter().enumerate().rev() {
            let lc = &cache.layers[l];

            // x_out = x_res1 + ff_out
            let d_ff_out = d_x.clone();
            let mut d_x_res1 = d_x.clone();

            // ff_out = W2 ff_act + b2
            let mut d_ff_act = vec![0.0; n * cfg.ff_dim];
            {
                let (dw, db) = two_muts(&mut grads.base, wl[14], wl[15]);
                lin_bwd(
                    &d_ff_out,
                    &lc.ff_act,
                    n,
                    cfg.ff_dim,
                    k,
                    w(wl[14]),
                    dw.data_mut(),
                    db.data_mut(),
                    Some(&mut d_ff_act),
                );
            }
            // GELU
            let d_ff_pre: Vec<f64> = d_ff_act
                .iter()
                .zip(&lc.ff_pre)
                .map(|(d, &x)| d * gelu_prime(x))
                .collect();
            // ff_pre = W1 ln2.out + b1
            let mut d_ln2_out = vec![0.0; n * k];
            {
                let (dw, db) = two_muts(&mut grads.base, wl[12], wl[13]);
                lin_bwd(
                    &d_ff_pre,
                    &lc.ln2.out,
                    n,
                    k,
                    cfg.ff_dim,
                    w(wl[12]),
                    dw.data_mut(),
                    db.data_mut(),
                    Some(&mut d_ln2_out),
                );
            }
            // ln2 over x_res1
            let mut d_from_ln2 = vec![0.0; n * k];
            {
                let (dg, db) = two_muts(&mut grads.base, wl[10], wl[11]);
                layer_norm_bwd(
                    &d_ln2_out,
                    &lc.ln2,
                    n,
                    k,
                    w(wl[10]).data(),
                    dg.data_mut(),
                    db.data_mut(),
                    &mut d_from_ln2,
                );
            }
            for (a, b) in d_x_res1.iter_mut().zip(&d_from_ln2) {
                *a += b;
            }

            // x_res1 = x_in + Wo ctx + bo
            let d_attn_out = &d_x_res1;
            let mut d_ctx = vec![0.0; n * k];
            {
                let (dw, db) = two_muts(&mut grads.base, wl[8], wl[9]);
                lin_bwd(
                    d_attn_out,
                    &lc.ctx,
                    n,
                    k,
                    k,
                    w(wl[8]),
                    dw.data_mut(),
                    db.data_mut(),
                    Some(&mut d_ctx),
                );
            }

            // Attention.
            let mut d_q = vec![0.0; n * k];
            let mut d_k = vec![0.0; n * k];
            let mut d_v = vec![0.0; n * k];
            for hh in 0..heads {
                let base = hh * hd;
                let att = &lc.att[hh];
                for i in 0..n {
                    // d_att over the causal row, then softmax backward.
                    let mut d_att_row = vec![0.0; i + 1];
                    for (j, da) in d_att_row.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for c in 0..hd {
                            acc += d_ctx[i * k + base + c] * lc.v[j * k + base + c];
                        }
                        *da = acc;
                    }
                    for j in 0..=i {
                        let p = att[i * n + j];
                        for c in 0..hd {
                            d_v[j * k + base + c] += p * d_ctx[i * k + base + c];
                        }
                    }
                    let dot: f64 = d_att_row
                        .iter()
                        .enumerate()
                        .map(|(j, d)| d * att[i * n + j])
                        .sum();
                    for j in 0..=i {
                        let d_score = att[i * n + j] * (d_att_row[j] - dot) * inv_sqrt;
                        for c in 0..hd {
                            d_q[i * k + base + c] += d_score * lc.k[j * k + base + c];
                            d_k[j * k + base + c] += d_score * lc.q[i * k + base + c];
                        }
                    }
                }
            }

            // Projections back to ln1 output.
            let mut d_a = vec![0.0; n * k];
            for (dproj, wi) in [(&d_q, 2), (&d_k, 4), (&d_v, 6)] {
                let (dw, db) = two_muts(&mut grads.base, wl[wi], wl[wi + 1]);
                lin_bwd(
                    dproj,
                    &lc.ln1.out,
                    n,
                    k,
                    k,
                    w(wl[wi]),
                    dw.data_mut(),
                    db.data_mut(),
                    Some(&mut d_a),
                );
            }

            // ln1 over x_in, plus the residual path.
            let mut d_x_in = vec![0.0; n * k];
            {
                let (dg, db) = two_muts(&mut grads.base, wl[0], wl[1]);
                layer_norm_bwd(
                    &d_a,
                    &lc.ln1,
                    n,
                    k,
                    w(wl[0]).data(),
                    dg.data_mut(),
                    db.data_mut(),
                    &mut d_x_in,
                );
            }
            for (a, b) in d_x_in.iter_mut().zip(&d_x_res1) {
                *a += b;
            }
            d_x = d_x_in;
        }

        // Positional embeddings.
        {
            let dpos = grads.base[wires.pos].data_mut();
            for t in 0..n {
                for o in 0..k {
                    dpos[t * k + o] += d_x[t * k + o];
                }
            }
        }

        // Token embedding.
        match &cfg.tokenizer {
            TokenizerKind::Linear { patch } => {
                let patches = cache.patches.as_ref().expect("linear cache");
                let dwe = grads.base[wires.embed_w].data_mut();
                for (t, p) in patches.iter().enumerate() {
                    for o in 0..k {
                        let d = d_x[t * k + o];
                        for (i, pv) in p.iter().enumerate() {
                            dwe[o * patch.patch_len + i] += d * pv;
                        }
                    }
                }
                let dbe = grads.base[wires.embed_b.expect("linear mode")].data_mut();
                for t in 0..n {
                    for o in 0..k {
                        dbe[o] += d_x[t * k + o];
                    }
                }
            }
            TokenizerKind::Quantized { .. } => {
                let ids = cache.ids.as_ref().expect("quantized cache");
                let dtable = grads.base[wires.embed_w].data_mut();
                for (t, &id) in ids.iter().enumerate() {
                    for o in 0..k {
                        dtable[id * k + o] += d_x[t * k + o];
                    }
                }
            }
        }
    }
}

/// Two distinct mutable elements of one slice.
fn two_muts(v: &mut [Mat], i: usize, j: usize) -> (&mut Mat, &mut Mat) {
    assert_ne!(i, j, "parameter indices must differ");
    if i < j {
        let (a, b) = v.split_at_mut(j);
        (&mut a[i], &mut b[0])
    } else {
        let (a, b) = v.split_at_mut(i);
        (&mut b[0], &mut a[j])
    }
}

/// y[t] = W x[t] + b for n tokens of width in_dim -> out rows of W.
fn lin_fwd(x: &[f64], n: usize, in_dim: usize, w: &Mat, b: &[f64]) -> Vec<f64> {
    let out_dim = w.rows();
    let mut y = vec![0.0; n * out_dim];
    for t in 0..n {
        let xt = &x[t * in_dim..(t + 1) * in_dim];
        let yt = &mut y[t * out_dim..(t + 1) * out_dim];
        for o in 0..out_dim {
            let row = w.row(o);
            yt[o] = b[o] + row.iter().zip(xt).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    y
}

/// Backward of `lin_fwd`: accumulates dW, db, and optionally dx.
#[allow(clippy::too_many_arguments)]
fn lin_bwd(
    dy: &[f64],
    x: &[f64],
    n: usize,
    in_dim: usize,
    out_dim: usize,
    w: &Mat,
    dw: &mut [f64],
    db: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    for t in 0..n {
        let xt = &x[t * in_dim..(t + 1) * in_dim];
        let dyt = &dy[t * out_dim..(t + 1) * out_dim];
        for o in 0..out_dim {
            let d = dyt[o];
            db[o] += d;
            let dwr = &mut dw[o * in_dim..(o + 1) * in_dim];
            for (i, xv) in xt.iter().enumerate() {
                dwr[i] += d * xv;
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            let dxt = &mut dx[t * in_dim..(t + 1) * in_dim];
            for o in 0..out_dim {
                let d = dyt[o];
                let row = w.row(o);
                for (i, wv) in row.iter().enumerate() {
                    dxt[i] += d * wv;
                }
            }
        }
    }
}

fn layer_norm(x: &[f64], n: usize, k: usize, gain: &[f64], bias: &[f64]) -> LnCache {
    let mut xhat = vec![0.0; n * k];
    let mut rstd = vec![0.0; n];
    let mut out = vec![0.0; n * k];
    for t in 0..n {
        let xt = &x[t * k..(t + 1) * k];
        let mu = xt.iter().sum::<f64>() / k as f64;
        let var = xt.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / k as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[t] = r;
        for i in 0..k {
            let xh = (xt[i] - mu) * r;
            xhat[t * k + i] = xh;
            out[t * k + i] = gain[i] * xh + bias[i];
        }
    }
    LnCache { xhat, rstd, out }
}

#[allow(clippy::too_many_arguments)]
fn layer_norm_bwd(
    dy: &[f64],
    cache: &LnCache,
    n: usize,
    k: usize,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
    dx: &mut [f64],
) {
    for t in 0..n {
        let dyt = &dy[t * k..(t + 1) * k];
        let xh = &cache.xhat[t * k..(t + 1) * k];
        let r = cache.rstd[t];
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for i in 0..k {
            dgain[i] += dyt[i] * xh[i];
            dbias[i] += dyt[i];
            let dxh = dyt[i] * gain[i];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[i];
        }
        mean_dxhat /= k as f64;
        mean_dxhat_xhat /= k as f64;
        for i in 0..k {
            let dxh = dyt[i] * gain[i];
            dx[t * k + i] += r * (dxh - mean_dxhat - xh[i] * mean_dxhat_xhat);
        }
    }
}

/// Tanh-approximation GELU; the derivative below matches this exact form.
fn gelu(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_prime(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654;
    let u = C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}
