//! Time-series data model: CSV ingestion, chronological splitting, periodic
//! downsampling, sliding-window construction, and multi-dataset corpus mixing.
//!
//! Values are immutable once a [`TimeSeries`] is constructed, and every
//! operation here is pure, so the types can be shared freely across threads.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::Rng;

/// A named multivariate series: a T x d matrix of finite reals plus metadata.
/// Timestamps, when present in the source file, are carried as strings and
/// never participate in modeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    pub frequency: String,
    values: Mat,
    variate_names: Vec<String>,
    timestamps: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(
        name: impl Into<String>,
        frequency: impl Into<String>,
        values: Mat,
        variate_names: Vec<String>,
    ) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if variate_names.len() != values.cols() {
            return Err(Error::Shape {
                expected: format!("{} variate names", values.cols()),
                got: format!("{}", variate_names.len()),
            });
        }
        for (i, a) in variate_names.iter().enumerate() {
            for b in variate_names.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate variate name `{a}`"
                    )));
                }
            }
        }
        if !values.all_finite() {
            return Err(Error::InvalidArgument(
                "series contains non-finite values".into(),
            ));
        }
        Ok(TimeSeries {
            name: name.into(),
            frequency: frequency.into(),
            values,
            variate_names,
            timestamps: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn dims(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn variate_names(&self) -> &[String] {
        &self.variate_names
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    fn with_timestamps(mut self, ts: Option<Vec<String>>) -> Self {
        self.timestamps = ts;
        self
    }

    /// Same metadata, new values (used by split/downsample).
    fn derived(&self, suffix: &str, values: Mat, timestamps: Option<Vec<String>>) -> TimeSeries {
        TimeSeries {
            name: format!("{}{}", self.name, suffix),
            frequency: self.frequency.clone(),
            values,
            variate_names: self.variate_names.clone(),
            timestamps,
        }
    }
}

/// Ingestion options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Series name; defaults to the file stem.
    pub name: Option<String>,
    /// Frequency tag; defaults to "unknown".
    pub frequency: Option<String>,
}

/// Load a comma-separated file with a mandatory header row. A leading
/// timestamp column is detected by a header named "date" (case-insensitive)
/// or by a non-numeric first data cell, and is retained as metadata only.
///
/// Reported positions are 1-based: rows count data rows (the header is row 0),
/// columns count all file columns including any timestamp column.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or(Error::EmptyDataset)?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect::<Vec<_>>();
    if header.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let first_cells: Vec<&str> = rows[0].split(',').collect();
    let header_says_date = header[0].eq_ignore_ascii_case("date");
    let first_cell_non_numeric = first_cells
        .first()
        .map(|c| c.trim().parse::<f64>().is_err())
        .unwrap_or(false);
    let has_timestamp = header_says_date || first_cell_non_numeric;
    let first_value_col = usize::from(has_timestamp);

    if header.len() <= first_value_col {
        return Err(Error::EmptyDataset);
    }
    let variate_names: Vec<String> = header[first_value_col..].to_vec();
    let d = variate_names.len();

    let mut timestamps = has_timestamp.then(|| Vec::with_capacity(rows.len()));
    let mut data = Vec::with_capacity(rows.len() * d);
    for (i, line) in rows.iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Parse {
                row: i + 1,
                col: cells.len().min(header.len()) + 1,
                detail: format!("expected {} cells, found {}", header.len(), cells.len()),
            });
        }
        if let Some(ts) = timestamps.as_mut() {
            ts.push(cells[0].trim().to_string());
        }
        for (j, cell) in cells[first_value_col..].iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: i + 1,
                col: first_value_col + j + 1,
                detail: format!("cannot parse `{}` as a number", cell.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: i + 1,
                    col: first_value_col + j + 1,
                    detail: "non-finite value".into(),
                });
            }
            data.push(v);
        }
    }

    let values = Mat::from_vec(rows.len(), d, data)?;
    let name = opts.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "series".into())
    });
    let frequency = opts.frequency.clone().unwrap_or_else(|| "unknown".into());
    Ok(TimeSeries::new(name, frequency, values, variate_names)?.with_timestamps(timestamps))
}

/// Chronological split fractions. Each must lie in (0,1) and they must sum
/// to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self> {
        let spec = SplitSpec {
            train_frac,
            val_frac,
            test_frac,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for f in [self.train_frac, self.val_frac, self.test_frac] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "split fraction {f} outside (0,1)"
                )));
            }
        }
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.7,
            val_frac: 0.1,
            test_frac: 0.2,
        }
    }
}

/// Floor with a small epsilon so that exactly-representable products like
/// 0.3 * 10 do not land one row short of their mathematical value.
fn floor_count(frac: f64, len: usize) -> usize {
    (frac * len as f64 + 1e-9).floor() as usize
}

/// Split chronologically: the first floor(train_frac * T) rows train, the
/// next floor(val_frac * T) validate, the remainder tests. The three parts
/// concatenate back to the input exactly.
pub fn chronological_split(
    ts: &TimeSeries,
    spec: &SplitSpec,
) -> Result<(TimeSeries, TimeSeries, TimeSeries)> {
    spec.validate()?;
    let t = ts.len();
    let n_train = floor_count(spec.train_frac, t);
    let n_val = floor_count(spec.val_frac, t);
    if n_train == 0 || n_val == 0 || n_train + n_val >= t {
        return Err(Error::SplitTooSmall {
            len: t,
            train: spec.train_frac,
            val: spec.val_frac,
            test: spec.test_frac,
        });
    }
    let slice_ts = |a: usize, b: usize| ts.timestamps().map(|t| t[a..b].to_vec());
    let train = ts.derived(
        "/train",
        ts.values().slice_rows(0, n_train),
        slice_ts(0, n_train),
    );
    let val = ts.derived(
        "/val",
        ts.values().slice_rows(n_train, n_train + n_val),
        slice_ts(n_train, n_train + n_val),
    );
    let test = ts.derived(
        "/test",
        ts.values().slice_rows(n_train + n_val, t),
        slice_ts(n_train + n_val, t),
    );
    Ok((train, val, test))
}

/// Keep rows at indices 0, rate, 2*rate, ... The output has ceil(T/rate) rows.
pub fn downsample(ts: &TimeSeries, rate: usize) -> Result<TimeSeries> {
    if rate == 0 {
        return Err(Error::InvalidRate);
    }
    if rate == 1 {
        return Ok(ts.clone());
    }
    let kept: Vec<usize> = (0..ts.len()).step_by(rate).collect();
    let mut values = Mat::zeros(kept.len(), ts.dims());
    for (new_r, &old_r) in kept.iter().enumerate() {
        for c in 0..ts.dims() {
            values.set(new_r, c, ts.values().get(old_r, c));
        }
    }
    let timestamps = ts
        .timestamps()
        .map(|t| kept.iter().map(|&i| t[i].clone()).collect());
    Ok(ts.derived("", values, timestamps))
}

/// One supervised example: `lookback` is the model input block, `target` the
/// horizon to predict; the two are adjacent slices of the source series
/// starting at `source_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lookback: Mat,
    pub target: Mat,
    pub source_offset: usize,
}

/// Dense sliding windows: offsets 0, stride, 2*stride, ... while
/// offset + lookback_len + horizon <= T.
pub fn make_windows(
    ts: &TimeSeries,
    lookback_len: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    if stride == 0 {
        return Err(Error::InvalidArgument(
            "window stride must be at least 1".into(),
        ));
    }
    if lookback_len == 0 || horizon == 0 {
        return Err(Error::InvalidArgument(
            "lookback and horizon must be at least 1".into(),
        ));
    }
    let needed = lookback_len + horizon;
    if ts.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            have: ts.len(),
        });
    }
    let count = (ts.len() - needed) / stride + 1;
    let mut windows = Vec::with_capacity(count);
    for k in 0..count {
        let off = k * stride;
        windows.push(Window {
            lookback: ts.values().slice_rows(off, off + lookback_len),
            target: ts.values().slice_rows(off + lookback_len, off + needed),
            source_offset: off,
        });
    }
    Ok(windows)
}

/// A shuffled multi-dataset pool of training windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    entries: Vec<(String, Window)>,
    counts: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, Window)] {
        &self.entries
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("corpus serializes")
    }
}

/// Interleave windows from several datasets into one deterministic order.
/// The same seed always produces the same order; per-dataset window counts
/// are preserved.
pub fn mix_corpus(datasets: Vec<(String, Vec<Window>)>, seed: u64) -> Result<Corpus> {
    let mut entries = Vec::new();
    let mut counts = BTreeMap::new();
    for (id, windows) in datasets {
        *counts.entry(id.clone()).or_insert(0) += windows.len();
        for w in windows {
            entries.push((id.clone(), w));
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut entries);
    Ok(Corpus { entries, counts })
}
