//! Two routes from an augmented input channel to model-consumable tokens:
//! a trainable linear patch embedding, and mean-absolute scaling followed by
//! uniform binning (with an exact inverse back to bin centers).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::Rng;

/// Patch geometry: `patch_len` time steps per token, patches spaced `stride`
/// apart. Stride may not exceed the patch length, so consecutive patches
/// overlap or abut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub patch_len: usize,
    pub stride: usize,
}

impl PatchConfig {
    pub fn new(patch_len: usize, stride: usize) -> Result<Self> {
        let cfg = PatchConfig { patch_len, stride };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_len == 0 {
            return Err(Error::InvalidArgument(
                "patch_len must be at least 1".into(),
            ));
        }
        if self.stride == 0 || self.stride > self.patch_len {
            return Err(Error::InvalidArgument(format!(
                "stride must be in 1..={} (got {})",
                self.patch_len, self.stride
            )));
        }
        Ok(())
    }

    /// Number of patches produced from a channel of length `len`.
    pub fn patch_count(&self, len: usize) -> Result<usize> {
        if len < self.patch_len {
            return Err(Error::InputTooShort {
                needed: self.patch_len,
                have: len,
            });
        }
        Ok((len - self.patch_len) / self.stride + 1)
    }

    /// Smallest length >= `len` that the patch grid covers exactly.
    pub fn padded_len(&self, len: usize) -> usize {
        let len = len.max(self.patch_len);
        let rem = (len - self.patch_len) % self.stride;
        if rem == 0 {
            len
        } else {
            len + self.stride - rem
        }
    }
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            patch_len: 16,
            stride: 8,
        }
    }
}

/// Left-pad a channel by repeating its first value until the patch grid
/// covers the full length. Keeps the most recent values right-aligned.
pub fn left_pad(channel: &[f64], cfg: &PatchConfig) -> Vec<f64> {
    let target = cfg.padded_len(channel.len());
    let pad = target - channel.len();
    if pad == 0 {
        return channel.to_vec();
    }
    let first = channel.first().copied().unwrap_or(0.0);
    let mut out = vec![first; pad];
    out.extend_from_slice(channel);
    out
}

/// Contiguous patches at offsets 0, stride, 2*stride, ...
pub fn patchify(channel: &[f64], cfg: &PatchConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let count = cfg.patch_count(channel.len())?;
    Ok((0..count)
        .map(|k| channel[k * cfg.stride..k * cfg.stride + cfg.patch_len].to_vec())
        .collect())
}

/// The trainable affine map from a patch to a model-dimension embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTokenizer {
    /// K x patch_len.
    pub weight: Mat,
    /// Length K.
    pub bias: Vec<f64>,
    pub trainable: bool,
}

impl LinearTokenizer {
    pub fn new(weight: Mat, bias: Vec<f64>) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::Shape {
                expected: format!("bias of length {}", weight.rows()),
                got: format!("{}", bias.len()),
            });
        }
        if weight.rows() == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be at least 1".into(),
            ));
        }
        if !weight.all_finite() || !bias.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "tokenizer weights must be finite".into(),
            ));
        }
        Ok(LinearTokenizer {
            weight,
            bias,
            trainable: true,
        })
    }

    /// Seeded Gaussian init, std 0.02, zero bias.
    pub fn init(dim: usize, patch_len: usize, seed: u64) -> LinearTokenizer {
        let mut rng = Rng::new(seed);
        let data = (0..dim * patch_len)
            .map(|_| rng.gaussian() * 0.02)
            .collect();
        LinearTokenizer {
            weight: Mat::from_vec(dim, patch_len, data).expect("sized data"),
            bias: vec![0.0; dim],
            trainable: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn patch_len(&self) -> usize {
        self.weight.cols()
    }
}

/// token_i = W . patch_i + b for every patch.
pub fn linear_embed(patches: &[Vec<f64>], tok: &LinearTokenizer) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(patches.len());
    for patch in patches {
        if patch.len() != tok.patch_len() {
            return Err(Error::Shape {
                expected: format!("patch of length {}", tok.patch_len()),
                got: format!("{}", patch.len()),
            });
        }
        let mut token = tok.bias.clone();
        for (o, t) in token.iter_mut().enumerate() {
            let row = tok.weight.row(o);
            *t += row.iter().zip(patch).map(|(w, p)| w * p).sum::<f64>();
        }
        out.push(token);
    }
    Ok(out)
}

/// Scale-then-bin tokenizer: values are divided by the fitting corpus's mean
/// absolute value and assigned to uniform bins over a clipped quantile range
/// of the scaled data. Detokenization returns bin centers times the scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub num_bins: usize,
    /// num_bins + 1 strictly increasing edges, in scaled space.
    pub bin_edges: Vec<f64>,
    /// Mean absolute value of the fitting corpus.
    pub scale: f64,
}

/// Fit bin edges over the [clip_q, 1 - clip_q] quantile range of the scaled
/// training values.
pub fn fit_quantizer(values: &[f64], num_bins: usize, clip_q: f64) -> Result<Quantizer> {
    if num_bins < 2 {
        return Err(Error::InvalidArgument("need at least 2 bins".into()));
    }
    if !(0.0..0.5).contains(&clip_q) {
        return Err(Error::InvalidArgument(format!(
            "clip quantile {clip_q} outside [0, 0.5)"
        )));
    }
    if values.len() < 2 {
        return Err(Error::InputTooShort {
            needed: 2,
            have: values.len(),
        });
    }
    let scale = values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64;
    if scale == 0.0 {
        return Err(Error::DegenerateRange);
    }
    let mut scaled: Vec<f64> = values.iter().map(|v| v / scale).collect();
    scaled.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let lo = quantile_sorted(&scaled, clip_q);
    let hi = quantile_sorted(&scaled, 1.0 - clip_q);
    if hi <= lo {
        return Err(Error::DegenerateRange);
    }
    let bin_edges = (0..=num_bins)
        .map(|i| lo + (hi - lo) * i as f64 / num_bins as f64)
        .collect::<Vec<_>>();
    Ok(Quantizer {
        num_bins,
        bin_edges,
        scale,
    })
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

impl Quantizer {
    /// Bin id of one raw value: half-open bins [e_i, e_(i+1)), terminal bin
    /// closed, out-of-range values clamped to the end bins.
    pub fn quantize_one(&self, value: f64) -> usize {
        let x = value / self.scale;
        if x < self.bin_edges[0] {
            return 0;
        }
        if x >= self.bin_edges[self.num_bins] {
            return self.num_bins - 1;
        }
        // binary search for the containing half-open bin
        let mut lo = 0;
        let mut hi = self.num_bins;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x >= self.bin_edges[mid] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn quantize(&self, values: &[f64]) -> Vec<usize> {
        values.iter().map(|&v| self.quantize_one(v)).collect()
    }

    pub fn dequantize_one(&self, id: usize) -> Result<f64> {
        if id >= self.num_bins {
            return Err(Error::InvalidToken {
                id,
                bins: self.num_bins,
            });
        }
        Ok((self.bin_edges[id] + self.bin_edges[id + 1]) / 2.0 * self.scale)
    }

    pub fn dequantize(&self, ids: &[usize]) -> Result<Vec<f64>> {
        ids.iter().map(|&id| self.dequantize_one(id)).collect()
    }

    pub fn half_bin_width(&self) -> f64 {
        (self.bin_edges[1] - self.bin_edges[0]) / 2.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("quantizer serializes")
    }

    pub fn from_json(json: &str) -> Result<Quantizer> {
        let q: Quantizer =
            serde_json::from_str(json).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        if q.bin_edges.len() != q.num_bins + 1 {
            return Err(Error::InvalidArgument(
                "edge count must be num_bins + 1".into(),
            ));
        }
        if !q.bin_edges.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "bin edges must be strictly increasing".into(),
            ));
        }
        Ok(q)
    }
}
