//! Statistical prompts: global per-variate features, cross-corpus
//! standardization, and assembly of the prompt block that is prepended to
//! every look-back window.
//!
//! The feature catalog is positional: a prompt matrix only makes sense
//! together with the catalog (name + parameters, in order) that produced it,
//! so catalogs carry a version string and serialize to JSON alongside the
//! fitted standardization statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::series::TimeSeries;

/// Relative tolerance under which a population's spread counts as zero.
/// Summing a constant population in floating point can leave residuals of
/// order 1e-16 * |value|; treating those as real spread would turn a
/// constant feature into +-1 noise after standardization.
const DEGENERATE_REL_TOL: f64 = 1e-12;

/// One global feature of a single variate. Time stamps enter the formulas as
/// unit-spaced sample indices t_i = i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    /// Sum of s_i * s_(i-lag) over valid pairs.
    Autocorrelation {
        lag: usize,
    },
    /// Energy-weighted center of time: sum(t_i * s_i^2) / sum(s_i^2); 0 when
    /// the series has no energy.
    Centroid,
    MaxDifference,
    MeanDifference,
    MedianDifference,
    MaxAbsDifference,
    MeanAbsDifference,
    MedianAbsDifference,
    /// Arc length of the polyline: sum of sqrt(1 + diff^2).
    Distance,
    SumAbsDifference,
    /// Absolute energy scaled by the time span t_(T-1) - t_0.
    TotalEnergy,
    /// Shannon entropy (bits) of an equal-width histogram of the values.
    Entropy {
        bins: usize,
    },
    PeakToPeak,
    /// Trapezoid rule over unit-spaced samples.
    AreaUnderCurve,
    AbsoluteEnergy,
    /// Q3 - Q1 with linearly interpolated quartiles.
    InterquartileRange,
    MeanAbsDeviation,
    MedianAbsDeviation,
    RootMeanSquare,
    /// Population standard deviation (divide by T).
    StdDev,
    /// Population variance (divide by T).
    Variance,
    /// |mean| of single-level Haar detail coefficients.
    WaveletAbsMean,
    /// Population std of single-level Haar detail coefficients.
    WaveletStd,
    /// Population variance of single-level Haar detail coefficients.
    WaveletVar,
    /// Third standardized moment with population std; 0 for constant input.
    Skewness,
}

/// Optional parameters accepted by [`feature_value`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureParams {
    pub lag: Option<usize>,
    pub bins: Option<usize>,
}

impl Feature {
    /// Look up a feature by its catalog name.
    pub fn parse(name: &str, params: &FeatureParams) -> Result<Feature> {
        let lag = params.lag.unwrap_or(1);
        let bins = params.bins.unwrap_or(10);
        Ok(match name {
            "autocorrelation" => Feature::Autocorrelation { lag },
            "centroid" => Feature::Centroid,
            "max_difference" => Feature::MaxDifference,
            "mean_difference" => Feature::MeanDifference,
            "median_difference" => Feature::MedianDifference,
            "max_abs_difference" => Feature::MaxAbsDifference,
            "mean_abs_difference" => Feature::MeanAbsDifference,
            "median_abs_difference" => Feature::MedianAbsDifference,
            "distance" => Feature::Distance,
            "sum_abs_difference" => Feature::SumAbsDifference,
            "total_energy" => Feature::TotalEnergy,
            "entropy" => Feature::Entropy { bins },
            "peak_to_peak" => Feature::PeakToPeak,
            "area_under_curve" => Feature::AreaUnderCurve,
            "absolute_energy" => Feature::AbsoluteEnergy,
            "interquartile_range" => Feature::InterquartileRange,
            "mean_abs_deviation" => Feature::MeanAbsDeviation,
            "median_abs_deviation" => Feature::MedianAbsDeviation,
            "root_mean_square" => Feature::RootMeanSquare,
            "std_dev" => Feature::StdDev,
            "variance" => Feature::Variance,
            "wavelet_abs_mean" => Feature::WaveletAbsMean,
            "wavelet_std" => Feature::WaveletStd,
            "wavelet_var" => Feature::WaveletVar,
            "skewness" => Feature::Skewness,
            other => return Err(Error::UnknownFeature(other.to_string())),
        })
    }

    /// Minimum series length the formula is defined for.
    pub fn min_len(&self) -> usize {
        match self {
            Feature::Autocorrelation { lag } => lag + 1,
            Feature::MaxDifference
            | Feature::MeanDifference
            | Feature::MedianDifference
            | Feature::MaxAbsDifference
            | Feature::MeanAbsDifference
            | Feature::MedianAbsDifference
            | Feature::Distance
            | Feature::SumAbsDifference
            | Feature::WaveletAbsMean
            | Feature::WaveletStd
            | Feature::WaveletVar => 2,
            _ => 1,
        }
    }

    pub fn compute(&self, s: &[f64]) -> Result<f64> {
        if s.len() < self.min_len() {
            return Err(Error::SeriesTooShort {
                needed: self.min_len(),
                have: s.len(),
            });
        }
        let t = s.len();
        Ok(match self {
            Feature::Autocorrelation { lag } => (*lag..t).map(|i| s[i] * s[i - lag]).sum(),
            Feature::Centroid => {
                let energy: f64 = s.iter().map(|v| v * v).sum();
                if energy == 0.0 {
                    0.0
                } else {
                    s.iter()
                        .enumerate()
                        .map(|(i, v)| i as f64 * v * v)
                        .sum::<f64>()
                        / energy
                }
            }
            Feature::MaxDifference => fold_diffs(s, f64::NEG_INFINITY, f64::max),
            Feature::MeanDifference => diffs(s).iter().sum::<f64>() / (t - 1) as f64,
            Feature::MedianDifference => median(&diffs(s)),
            Feature::MaxAbsDifference => fold_diffs(s, f64::NEG_INFINITY, |a, b| a.max(b.abs())),
            Feature::MeanAbsDifference => {
                diffs(s).iter().map(|d| d.abs()).sum::<f64>() / (t - 1) as f64
            }
            Feature::MedianAbsDifference => {
                median(&diffs(s).iter().map(|d| d.abs()).collect::<Vec<_>>())
            }
            Feature::Distance => diffs(s).iter().map(|d| (1.0 + d * d).sqrt()).sum(),
            Feature::SumAbsDifference => diffs(s).iter().map(|d| d.abs()).sum(),
            Feature::TotalEnergy => s.iter().map(|v| v * v).sum::<f64>() * (t - 1) as f64,
            Feature::Entropy { bins } => histogram_entropy(s, *bins),
            Feature::PeakToPeak => {
                let (mn, mx) = min_max(s);
                (mx - mn).abs()
            }
            Feature::AreaUnderCurve => (0..t.saturating_sub(1))
                .map(|i| (s[i + 1] + s[i]) / 2.0)
                .sum(),
            Feature::AbsoluteEnergy => s.iter().map(|v| v * v).sum(),
            Feature::InterquartileRange => {
                let sorted = sorted_copy(s);
                quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
            }
            Feature::MeanAbsDeviation => {
                let m = mean(s);
                s.iter().map(|v| (v - m).abs()).sum::<f64>() / t as f64
            }
            Feature::MedianAbsDeviation => {
                let med = median(s);
                median(&s.iter().map(|v| (v - med).abs()).collect::<Vec<_>>())
            }
            Feature::RootMeanSquare => (s.iter().map(|v| v * v).sum::<f64>() / t as f64).sqrt(),
            Feature::StdDev => pop_var(s).sqrt(),
            Feature::Variance => pop_var(s),
            Feature::WaveletAbsMean => mean(&haar_detail(s)).abs(),
            Feature::WaveletStd => pop_var(&haar_detail(s)).sqrt(),
            Feature::WaveletVar => pop_var(&haar_detail(s)),
            Feature::Skewness => {
                let m = mean(s);
                let sd = pop_var(s).sqrt();
                if sd == 0.0 {
                    0.0
                } else {
                    s.iter().map(|v| (v - m).powi(3)).sum::<f64>() / (t as f64 * sd.powi(3))
                }
            }
        })
    }
}

/// Compute a single feature by name.
pub fn feature_value(name: &str, s: &[f64], params: &FeatureParams) -> Result<f64> {
    Feature::parse(name, params)?.compute(s)
}

fn mean(s: &[f64]) -> f64 {
    s.iter().sum::<f64>() / s.len() as f64
}

fn pop_var(s: &[f64]) -> f64 {
    let m = mean(s);
    s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / s.len() as f64
}

fn diffs(s: &[f64]) -> Vec<f64> {
    s.windows(2).map(|w| w[1] - w[0]).collect()
}

fn fold_diffs(s: &[f64], init: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    s.windows(2).map(|w| w[1] - w[0]).fold(init, f)
}

fn min_max(s: &[f64]) -> (f64, f64) {
    s.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), &v| {
            (mn.min(v), mx.max(v))
        })
}

fn sorted_copy(s: &[f64]) -> Vec<f64> {
    let mut v = s.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    v
}

fn median(s: &[f64]) -> f64 {
    let sorted = sorted_copy(s);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Linear-interpolation quantile over pre-sorted data (the inclusive method:
/// rank h = p * (n - 1)).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Shannon entropy in bits of an equal-width histogram over [min, max].
/// The top edge is closed; a constant series carries zero entropy.
fn histogram_entropy(s: &[f64], bins: usize) -> f64 {
    let (mn, mx) = min_max(s);
    if mx == mn {
        return 0.0;
    }
    let width = (mx - mn) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in s {
        let idx = (((v - mn) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = s.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Single-level Haar detail coefficients: (s_2k - s_(2k+1)) / sqrt(2).
/// A trailing odd sample is dropped.
fn haar_detail(s: &[f64]) -> Vec<f64> {
    (0..s.len() / 2)
        .map(|k| (s[2 * k] - s[2 * k + 1]) / std::f64::consts::SQRT_2)
        .collect()
}

/// A named, ordered feature list. Prompt layout is positional, so the order
/// is fixed per catalog version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    version: String,
    features: Vec<(String, Feature)>,
}

impl FeatureCatalog {
    /// The default catalog: the full formula table in a fixed documented
    /// order, 25 slots, version "v1".
    pub fn standard() -> FeatureCatalog {
        let features = vec![
            (
                "autocorrelation".to_string(),
                Feature::Autocorrelation { lag: 1 },
            ),
            ("centroid".to_string(), Feature::Centroid),
            ("max_difference".to_string(), Feature::MaxDifference),
            ("mean_difference".to_string(), Feature::MeanDifference),
            ("median_difference".to_string(), Feature::MedianDifference),
            ("max_abs_difference".to_string(), Feature::MaxAbsDifference),
            (
                "mean_abs_difference".to_string(),
                Feature::MeanAbsDifference,
            ),
            (
                "median_abs_difference".to_string(),
                Feature::MedianAbsDifference,
            ),
            ("distance".to_string(), Feature::Distance),
            ("sum_abs_difference".to_string(), Feature::SumAbsDifference),
            ("total_energy".to_string(), Feature::TotalEnergy),
            ("entropy".to_string(), Feature::Entropy { bins: 10 }),
            ("peak_to_peak".to_string(), Feature::PeakToPeak),
            ("area_under_curve".to_string(), Feature::AreaUnderCurve),
            ("absolute_energy".to_string(), Feature::AbsoluteEnergy),
            (
                "interquartile_range".to_string(),
                Feature::InterquartileRange,
            ),
            ("mean_abs_deviation".to_string(), Feature::MeanAbsDeviation),
            (
                "median_abs_deviation".to_string(),
                Feature::MedianAbsDeviation,
            ),
            ("root_mean_square".to_string(), Feature::RootMeanSquare),
            ("std_dev".to_string(), Feature::StdDev),
            ("variance".to_string(), Feature::Variance),
            ("wavelet_abs_mean".to_string(), Feature::WaveletAbsMean),
            ("wavelet_std".to_string(), Feature::WaveletStd),
            ("wavelet_var".to_string(), Feature::WaveletVar),
            ("skewness".to_string(), Feature::Skewness),
        ];
        FeatureCatalog {
            version: "v1".into(),
            features,
        }
    }

    /// Extend the standard catalog to exactly `slots` entries by appending
    /// autocorrelations at increasing lags (lag 2, 3, ...). Useful for
    /// layout-compatibility runs that need a specific prompt dimension such
    /// as 133.
    pub fn padded(slots: usize) -> Result<FeatureCatalog> {
        let mut cat = FeatureCatalog::standard();
        if slots < cat.len() {
            return Err(Error::InvalidArgument(format!(
                "padded catalog needs at least {} slots, asked for {slots}",
                cat.len()
            )));
        }
        let mut lag = 2;
        while cat.features.len() < slots {
            cat.features.push((
                format!("autocorrelation_lag{lag}"),
                Feature::Autocorrelation { lag },
            ));
            lag += 1;
        }
        cat.version = format!("v1-pad{slots}");
        Ok(cat)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn entries(&self) -> &[(String, Feature)] {
        &self.features
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|(n, _)| n.as_str()).collect()
    }
}

/// Raw (unstandardized) M x d feature matrix: column j holds all catalog
/// features of variate j, in catalog order.
pub fn extract_features(ts: &TimeSeries, catalog: &FeatureCatalog) -> Result<Mat> {
    let mut out = Mat::zeros(catalog.len(), ts.dims());
    for j in 0..ts.dims() {
        let s = ts.values().column(j);
        for (i, (name, feature)) in catalog.entries().iter().enumerate() {
            let v = feature
                .compute(&s)
                .map_err(|e| e.in_feature(name, &ts.variate_names()[j]))?;
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Per-feature mean/std pooled over every variate of every training dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// A slot is degenerate when its population spread is zero (up to
    /// floating-point residue); such slots standardize to exactly 0.
    pub fn is_degenerate(&self, slot: usize) -> bool {
        self.std[slot] <= DEGENERATE_REL_TOL * self.mean[slot].abs().max(1.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

/// Fit per-feature standardization over the pooled population of all
/// training variates. Raw matrices must share the same feature count.
pub fn fit_standardizer(raw: &[&Mat]) -> Result<StandardizationStats> {
    let first = raw.first().ok_or(Error::EmptyCorpus)?;
    let m = first.rows();
    let total: usize = raw.iter().map(|r| r.cols()).sum();
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    for r in raw {
        if r.rows() != m {
            return Err(Error::Shape {
                expected: format!("{m} features"),
                got: format!("{}", r.rows()),
            });
        }
    }
    let mut mean = vec![0.0; m];
    let mut std = vec![0.0; m];
    for i in 0..m {
        let mut sum = 0.0;
        for r in raw {
            for j in 0..r.cols() {
                sum += r.get(i, j);
            }
        }
        let mu = sum / total as f64;
        let mut sq = 0.0;
        for r in raw {
            for j in 0..r.cols() {
                let dev = r.get(i, j) - mu;
                sq += dev * dev;
            }
        }
        mean[i] = mu;
        std[i] = (sq / total as f64).sqrt();
    }
    Ok(StandardizationStats { mean, std })
}

/// The standardized prompt block prepended to look-back windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMatrix {
    pub features: Mat,
    pub catalog_version: String,
}

impl PromptMatrix {
    /// A zero-row prompt for no-prompt runs; any variate count is accepted
    /// downstream.
    pub fn empty() -> PromptMatrix {
        PromptMatrix {
            features: Mat::zeros(0, 1),
            catalog_version: "none".into(),
        }
    }

    /// A constant prefix (the text-prompt stand-in): one fixed vector
    /// replicated across `dims` variate columns.
    pub fn constant(prefix: &[f64], dims: usize) -> PromptMatrix {
        let mut m = Mat::zeros(prefix.len(), dims);
        for (i, &v) in prefix.iter().enumerate() {
            for j in 0..dims {
                m.set(i, j, v);
            }
        }
        PromptMatrix {
            features: m,
            catalog_version: "text-prefix".into(),
        }
    }

    pub fn rows(&self) -> usize {
        self.features.rows()
    }
}

/// Apply (x - mean) / std per feature slot; degenerate slots map to 0.
pub fn standardize(raw: &Mat, stats: &StandardizationStats) -> Result<PromptMatrix> {
    standardize_versioned(raw, stats, "v1")
}

pub fn standardize_versioned(
    raw: &Mat,
    stats: &StandardizationStats,
    version: &str,
) -> Result<PromptMatrix> {
    if raw.rows() != stats.mean.len() {
        return Err(Error::Shape {
            expected: format!("{} feature rows", stats.mean.len()),
            got: raw.shape_string(),
        });
    }
    let mut out = Mat::zeros(raw.rows(), raw.cols());
    for i in 0..raw.rows() {
        let degenerate = stats.is_degenerate(i);
        for j in 0..raw.cols() {
            let v = if degenerate {
                0.0
            } else {
                (raw.get(i, j) - stats.mean[i]) / stats.std[i]
            };
            out.set(i, j, v);
        }
    }
    Ok(PromptMatrix {
        features: out,
        catalog_version: version.to_string(),
    })
}

/// Prepend the prompt rows to a look-back block. The look-back values pass
/// through untouched.
pub fn assemble_input(prompt: &PromptMatrix, lookback: &Mat) -> Result<Mat> {
    if prompt.rows() == 0 {
        return Ok(lookback.clone());
    }
    if prompt.features.cols() != lookback.cols() {
        return Err(Error::Shape {
            expected: format!("{} variates", lookback.cols()),
            got: format!("{} prompt columns", prompt.features.cols()),
        });
    }
    prompt.features.vstack(lookback)
}

/// Prompts keyed by dataset id. A zero-row store serves no-prompt runs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PromptStore {
    prompts: BTreeMap<String, PromptMatrix>,
    prompt_rows: usize,
}

impl PromptStore {
    pub fn empty() -> PromptStore {
        PromptStore {
            prompts: BTreeMap::new(),
            prompt_rows: 0,
        }
    }

    pub fn new(prompt_rows: usize) -> PromptStore {
        PromptStore {
            prompts: BTreeMap::new(),
            prompt_rows,
        }
    }

    pub fn prompt_rows(&self) -> usize {
        self.prompt_rows
    }

    pub fn insert(&mut self, dataset: impl Into<String>, prompt: PromptMatrix) -> Result<()> {
        let dataset = dataset.into();
        if prompt.rows() != self.prompt_rows {
            return Err(Error::Shape {
                expected: format!("{} prompt rows", self.prompt_rows),
                got: format!("{} rows for `{dataset}`", prompt.rows()),
            });
        }
        self.prompts.insert(dataset, prompt);
        Ok(())
    }

    pub fn get(&self, dataset: &str) -> Result<PromptMatrix> {
        if self.prompt_rows == 0 {
            return Ok(PromptMatrix::empty());
        }
        self.prompts
            .get(dataset)
            .cloned()
            .ok_or_else(|| Error::MissingPrompt(dataset.to_string()))
    }

    pub fn dataset_ids(&self) -> Vec<&str> {
        self.prompts.keys().map(|s| s.as_str()).collect()
    }
}
