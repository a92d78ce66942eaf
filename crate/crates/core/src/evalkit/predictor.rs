//! Forecasters the evaluation harness can score: the transformer wrapped
//! with its prompt, plus two built-in references (persistence and a direct
//! linear map fitted by ridge least squares).

#![allow(clippy::needless_range_loop)]

use crate::backbone::Backbone;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::prompt::{assemble_input, PromptMatrix};
use crate::series::{make_windows, Corpus, TimeSeries, Window};

/// Anything that maps a window's look-back block to a Q x d prediction.
/// Implementations read only the look-back; the full window is passed so
/// test fixtures can build reference oracles.
pub trait Predictor {
    fn lookback_len(&self) -> usize;
    fn horizon(&self) -> usize;
    fn predict(&self, window: &Window) -> Result<Mat>;
}

/// Repeat the last observed value across the horizon.
pub struct Persistence {
    pub lookback_len: usize,
    pub horizon: usize,
}

impl Predictor for Persistence {
    fn lookback_len(&self) -> usize {
        self.lookback_len
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, window: &Window) -> Result<Mat> {
        let last = window.lookback.rows() - 1;
        let mut out = Mat::zeros(self.horizon, window.lookback.cols());
        for j in 0..window.lookback.cols() {
            let v = window.lookback.get(last, j);
            for q in 0..self.horizon {
                out.set(q, j, v);
            }
        }
        Ok(out)
    }
}

/// One shared linear map per channel from the normalized look-back to all
/// horizon steps, fitted in closed form by ridge-regularized least squares
/// over every (window, channel) pair of a corpus.
#[derive(Debug, Clone)]
pub struct DirectLinear {
    weight: Mat,
    bias: Vec<f64>,
    lookback_len: usize,
    horizon: usize,
}

impl DirectLinear {
    pub fn fit(corpus: &Corpus, lookback_len: usize, horizon: usize) -> Result<DirectLinear> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let e = lookback_len;
        let dim = e + 1; // affine term
        let mut a = vec![0.0; dim * dim];
        let mut b = vec![0.0; dim * horizon];
        let mut z = vec![0.0; dim];
        for (_, window) in corpus.entries() {
            if window.lookback.rows() != e || window.target.rows() != horizon {
                return Err(Error::Shape {
                    expected: format!("{e} look-back / {horizon} target rows"),
                    got: format!("{} / {}", window.lookback.rows(), window.target.rows()),
                });
            }
            for j in 0..window.lookback.cols() {
                let x = window.lookback.column(j);
                let (mu, sd) = norm_stats(&x);
                for i in 0..e {
                    z[i] = (x[i] - mu) / sd;
                }
                z[e] = 1.0;
                for r in 0..dim {
                    for c in r..dim {
                        a[r * dim + c] += z[r] * z[c];
                    }
                }
                for q in 0..horizon {
                    let y = (window.target.get(q, j) - mu) / sd;
                    for r in 0..dim {
                        b[r * horizon + q] += z[r] * y;
                    }
                }
            }
        }
        // mirror the upper triangle and add the ridge term
        for r in 0..dim {
            for c in 0..r {
                a[r * dim + c] = a[c * dim + r];
            }
            a[r * dim + r] += 1e-6;
        }
        let coef = cholesky_solve(&a, &b, dim, horizon)?;
        let mut weight = Mat::zeros(horizon, e);
        let mut bias = vec![0.0; horizon];
        for q in 0..horizon {
            for i in 0..e {
                weight.set(q, i, coef[i * horizon + q]);
            }
            bias[q] = coef[e * horizon + q];
        }
        Ok(DirectLinear {
            weight,
            bias,
            lookback_len,
            horizon,
        })
    }
}

fn norm_stats(x: &[f64]) -> (f64, f64) {
    let mu = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / x.len() as f64;
    (mu, (var + 1e-8).sqrt())
}

/// Solve A X = B for symmetric positive-definite A via Cholesky.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize, cols: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numerical {
                        context: "Cholesky factorization".into(),
                    });
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut x = b.to_vec();
    // forward: L y = b
    for c in 0..cols {
        for i in 0..n {
            let mut sum = x[i * cols + c];
            for k in 0..i {
                sum -= l[i * n + k] * x[k * cols + c];
            }
            x[i * cols + c] = sum / l[i * n + i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut sum = x[i * cols + c];
            for k in i + 1..n {
                sum -= l[k * n + i] * x[k * cols + c];
            }
            x[i * cols + c] = sum / l[i * n + i];
        }
    }
    Ok(x)
}

impl Predictor for DirectLinear {
    fn lookback_len(&self) -> usize {
        self.lookback_len
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, window: &Window) -> Result<Mat> {
        if window.lookback.rows() != self.lookback_len {
            return Err(Error::Shape {
                expected: format!("{} look-back rows", self.lookback_len),
                got: format!("{}", window.lookback.rows()),
            });
        }
        let mut out = Mat::zeros(self.horizon, window.lookback.cols());
        for j in 0..window.lookback.cols() {
            let x = window.lookback.column(j);
            let (mu, sd) = norm_stats(&x);
            for q in 0..self.horizon {
                let mut acc = self.bias[q];
                for i in 0..self.lookback_len {
                    acc += self.weight.get(q, i) * (x[i] - mu) / sd;
                }
                out.set(q, j, acc * sd + mu);
            }
        }
        Ok(out)
    }
}

/// The transformer plus the prompt block its inputs are assembled with.
pub struct BackbonePredictor<'a> {
    pub model: &'a Backbone,
    pub prompt: PromptMatrix,
}

impl Predictor for BackbonePredictor<'_> {
    fn lookback_len(&self) -> usize {
        self.model.config().lookback
    }

    fn horizon(&self) -> usize {
        self.model.config().horizon
    }

    fn predict(&self, window: &Window) -> Result<Mat> {
        let input = assemble_input(&self.prompt, &window.lookback)?;
        self.model.forward(&input)
    }
}

/// Score a predictor over every dense test window: flat mean of squared and
/// absolute errors over (windows x horizon x channels).
pub fn evaluate_series(pred: &dyn Predictor, test: &TimeSeries) -> Result<(f64, f64)> {
    let windows = make_windows(test, pred.lookback_len(), pred.horizon(), 1)?;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut count = 0usize;
    for window in &windows {
        let p = pred.predict(window)?;
        if p.rows() != window.target.rows() || p.cols() != window.target.cols() {
            return Err(Error::Shape {
                expected: window.target.shape_string(),
                got: p.shape_string(),
            });
        }
        for (a, b) in p.data().iter().zip(window.target.data()) {
            let d = a - b;
            sq += d * d;
            abs += d.abs();
            count += 1;
        }
    }
    Ok((sq / count as f64, abs / count as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::mix_corpus;

    fn series_1d(values: Vec<f64>) -> TimeSeries {
        let m = Mat::from_vec(values.len(), 1, values).unwrap();
        TimeSeries::new("t", "1h", m, vec!["v".into()]).unwrap()
    }

    /// Test-only stub that returns the true target.
    struct PerfectOracle {
        lookback_len: usize,
        horizon: usize,
    }

    impl Predictor for PerfectOracle {
        fn lookback_len(&self) -> usize {
            self.lookback_len
        }
        fn horizon(&self) -> usize {
            self.horizon
        }
        fn predict(&self, window: &Window) -> Result<Mat> {
            Ok(window.target.clone())
        }
    }

    #[test]
    fn perfect_oracle_scores_zero() {
        let ts = series_1d((0..40).map(|i| (i as f64 * 0.4).sin()).collect());
        let (mse, mae) = evaluate_series(
            &PerfectOracle {
                lookback_len: 8,
                horizon: 4,
            },
            &ts,
        )
        .unwrap();
        assert_eq!((mse, mae), (0.0, 0.0));
    }

    #[test]
    fn persistence_is_exact_on_constant_series() {
        let ts = series_1d(vec![2.5; 30]);
        let (mse, mae) = evaluate_series(
            &Persistence {
                lookback_len: 8,
                horizon: 4,
            },
            &ts,
        )
        .unwrap();
        assert_eq!((mse, mae), (0.0, 0.0));
    }

    #[test]
    fn persistence_matches_window_loop_oracle_on_sine() {
        let ts = series_1d((0..60).map(|i| (i as f64 * 0.37).sin()).collect());
        let (e, q) = (10, 5);
        let (mse, mae) = evaluate_series(
            &Persistence {
                lookback_len: e,
                horizon: q,
            },
            &ts,
        )
        .unwrap();

        // Direct enumeration over offsets and horizon steps.
        let vals = ts.values().column(0);
        let mut sq = 0.0;
        let mut abs = 0.0;
        let mut n = 0;
        for off in 0..=(vals.len() - e - q) {
            let last = vals[off + e - 1];
            for s in 0..q {
                let d = last - vals[off + e + s];
                sq += d * d;
                abs += d.abs();
                n += 1;
            }
        }
        assert!((mse - sq / n as f64).abs() < 1e-12);
        assert!((mae - abs / n as f64).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_short_test_split() {
        let ts = series_1d(vec![1.0; 10]);
        assert!(matches!(
            evaluate_series(
                &Persistence {
                    lookback_len: 8,
                    horizon: 4
                },
                &ts
            ),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn direct_linear_learns_an_exact_linear_rule() {
        // Next values of a pure ramp are a linear function of the look-back,
        // so the ridge fit should drive the error to ~0.
        let ts = series_1d((0..200).map(|i| 0.5 * i as f64 + 3.0).collect());
        let windows = make_windows(&ts, 12, 4, 1).unwrap();
        let corpus = mix_corpus(vec![("r".into(), windows)], 1).unwrap();
        let model = DirectLinear::fit(&corpus, 12, 4).unwrap();
        let (mse, _) = evaluate_series(&model, &ts).unwrap();
        assert!(
            mse < 1e-6,
            "ramp should be nearly exactly predictable, mse={mse}"
        );
    }
}
