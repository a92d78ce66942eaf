//! MSE/MAE tables keyed by (dataset, horizon) with an average row per
//! dataset, plus markdown/CSV rendering with best and second-best marking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Mean absolute error over all entries of two equally-shaped matrices.
pub fn mae(pred: &Mat, target: &Mat) -> Result<f64> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::Shape {
            expected: target.shape_string(),
            got: pred.shape_string(),
        });
    }
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKey {
    Horizon(usize),
    Avg,
}

/// (mse, mae) cells addressed by dataset row group, horizon row, and method
/// column. Row and column order follow first insertion.
/// (mse, mae), or None while a cell is still unset.
type Cell = Option<(f64, f64)>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricTable {
    horizons: Vec<usize>,
    datasets: Vec<String>,
    methods: Vec<String>,
    /// cells[dataset][horizon position, avg last][method]
    cells: Vec<Vec<Vec<Cell>>>,
}

impl MetricTable {
    pub fn new(horizons: Vec<usize>) -> MetricTable {
        MetricTable {
            horizons,
            datasets: Vec::new(),
            methods: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn horizons(&self) -> &[usize] {
        &self.horizons
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    fn dataset_idx(&mut self, dataset: &str) -> usize {
        if let Some(i) = self.datasets.iter().position(|d| d == dataset) {
            return i;
        }
        self.datasets.push(dataset.to_string());
        self.cells.push(vec![
            vec![None; self.methods.len()];
            self.horizons.len() + 1
        ]);
        self.datasets.len() - 1
    }

    fn method_idx(&mut self, method: &str) -> usize {
        if let Some(i) = self.methods.iter().position(|m| m == method) {
            return i;
        }
        self.methods.push(method.to_string());
        for ds in &mut self.cells {
            for row in ds.iter_mut() {
                row.push(None);
            }
        }
        self.methods.len() - 1
    }

    fn row_idx(&self, key: RowKey) -> Result<usize> {
        match key {
            RowKey::Avg => Ok(self.horizons.len()),
            RowKey::Horizon(h) => {
                self.horizons
                    .iter()
                    .position(|&x| x == h)
                    .ok_or(Error::HorizonMismatch {
                        model: h,
                        requested: h,
                    })
            }
        }
    }

    pub fn set(
        &mut self,
        dataset: &str,
        key: RowKey,
        method: &str,
        mse: f64,
        mae: f64,
    ) -> Result<()> {
        if !(mse.is_finite() && mae.is_finite() && mse >= 0.0 && mae >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "metric cells must be finite and non-negative, got ({mse}, {mae})"
            )));
        }
        let d = self.dataset_idx(dataset);
        let m = self.method_idx(method);
        let r = self.row_idx(key)?;
        self.cells[d][r][m] = Some((mse, mae));
        Ok(())
    }

    pub fn get(&self, dataset: &str, key: RowKey, method: &str) -> Option<(f64, f64)> {
        let d = self.datasets.iter().position(|x| x == dataset)?;
        let m = self.methods.iter().position(|x| x == method)?;
        let r = self.row_idx(key).ok()?;
        self.cells[d][r][m]
    }

    /// Fill every (dataset, method) average row with the arithmetic mean of
    /// its horizon rows. All horizon cells must be present.
    pub fn finalize_avg(&mut self) -> Result<()> {
        let hn = self.horizons.len();
        for d in 0..self.datasets.len() {
            for m in 0..self.methods.len() {
                let mut acc = (0.0, 0.0);
                let mut present = 0usize;
                for r in 0..hn {
                    if let Some((mse, mae)) = self.cells[d][r][m] {
                        acc.0 += mse;
                        acc.1 += mae;
                        present += 1;
                    }
                }
                if present == 0 {
                    continue;
                }
                if present != hn {
                    return Err(Error::InvalidArgument(format!(
                        "dataset `{}` method `{}` has {present}/{hn} horizon cells",
                        self.datasets[d], self.methods[m]
                    )));
                }
                self.cells[d][hn][m] = Some((acc.0 / hn as f64, acc.1 / hn as f64));
            }
        }
        Ok(())
    }

    /// Verify the average-row law to the given tolerance.
    pub fn check_avg_law(&self, tol: f64) -> Result<()> {
        let hn = self.horizons.len();
        for d in 0..self.datasets.len() {
            for m in 0..self.methods.len() {
                let Some((avg_mse, avg_mae)) = self.cells[d][hn][m] else {
                    continue;
                };
                let mut acc = (0.0, 0.0);
                for r in 0..hn {
                    let (mse, mae) = self.cells[d][r][m].ok_or_else(|| {
                        Error::InvalidArgument("avg row present without full horizon rows".into())
                    })?;
                    acc.0 += mse;
                    acc.1 += mae;
                }
                if (avg_mse - acc.0 / hn as f64).abs() > tol
                    || (avg_mae - acc.1 / hn as f64).abs() > tol
                {
                    return Err(Error::InvalidArgument(format!(
                        "avg row violates the mean law for `{}`/`{}`",
                        self.datasets[d], self.methods[m]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Raw rows: dataset,horizon,method,mse,mae (avg row included).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,horizon,method,mse,mae\n");
        for (d, dataset) in self.datasets.iter().enumerate() {
            for r in 0..=self.horizons.len() {
                let label = if r == self.horizons.len() {
                    "avg".to_string()
                } else {
                    self.horizons[r].to_string()
                };
                for (m, method) in self.methods.iter().enumerate() {
                    if let Some((mse, mae)) = self.cells[d][r][m] {
                        out.push_str(&format!("{dataset},{label},{method},{mse},{mae}\n"));
                    }
                }
            }
        }
        out
    }

    /// One markdown table per metric, lowest cell per row in bold, second
    /// lowest in italics (ties share the better mark), and a closing
    /// first-place count row.
    pub fn to_markdown(&self, title: &str) -> String {
        let mut out = format!("## {title}\n");
        for (metric_idx, metric_name) in ["MSE", "MAE"].iter().enumerate() {
            out.push_str(&format!("\n### {metric_name}\n\n"));
            out.push_str("| dataset | horizon |");
            for m in &self.methods {
                out.push_str(&format!(" {m} |"));
            }
            out.push('\n');
            out.push_str("|---|---|");
            out.push_str(&"---|".repeat(self.methods.len()));
            out.push('\n');

            let mut first_counts = vec![0usize; self.methods.len()];
            for (d, dataset) in self.datasets.iter().enumerate() {
                for r in 0..=self.horizons.len() {
                    let values: Vec<Option<f64>> = (0..self.methods.len())
                        .map(|m| {
                            self.cells[d][r][m].map(|c| if metric_idx == 0 { c.0 } else { c.1 })
                        })
                        .collect();
                    if values.iter().all(|v| v.is_none()) {
                        continue;
                    }
                    let label = if r == self.horizons.len() {
                        "avg".to_string()
                    } else {
                        self.horizons[r].to_string()
                    };
                    let marks = rank_marks(&values);
                    out.push_str(&format!("| {dataset} | {label} |"));
                    for (m, v) in values.iter().enumerate() {
                        match v {
                            None => out.push_str(" - |"),
                            Some(x) => {
                                let cell = format!("{x:.4}");
                                match marks[m] {
                                    Mark::Best => {
                                        first_counts[m] += 1;
                                        out.push_str(&format!(" **{cell}** |"));
                                    }
                                    Mark::Second => out.push_str(&format!(" *{cell}* |")),
                                    Mark::None => out.push_str(&format!(" {cell} |")),
                                }
                            }
                        }
                    }
                    out.push('\n');
                }
            }
            out.push_str("| 1st count | |");
            for c in &first_counts {
                out.push_str(&format!(" {c} |"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Best,
    Second,
    None,
}

/// Best = every cell equal to the minimum; second = every cell equal to the
/// second distinct value.
fn rank_marks(values: &[Option<f64>]) -> Vec<Mark> {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    present.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    present.dedup();
    let best = present.first().copied();
    let second = present.get(1).copied();
    values
        .iter()
        .map(|v| match (v, best, second) {
            (Some(x), Some(b), _) if *x == b => Mark::Best,
            (Some(x), _, Some(s)) if *x == s => Mark::Second,
            _ => Mark::None,
        })
        .collect()
}

/// Render one markdown document and one CSV covering every table.
pub fn render_report(tables: &[(String, MetricTable)]) -> (String, String) {
    let mut md = String::from("# Results\n\n");
    let mut csv = String::new();
    for (i, (title, table)) in tables.iter().enumerate() {
        md.push_str(&table.to_markdown(title));
        md.push('\n');
        let body = table.to_csv();
        if i == 0 {
            csv.push_str(&body);
        } else {
            // skip the repeated header
            if let Some(pos) = body.find('\n') {
                csv.push_str(&body[pos + 1..]);
            }
        }
    }
    (md, csv)
}
