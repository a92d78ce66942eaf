//! Shared test helpers: an independent brute-force implementation of every
//! catalog feature, plus random-series generation. Everything here is
//! written as plain index loops so it shares no code path with the library.

#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use tsforge::rng::Rng;

fn naive_sorted(s: &[f64]) -> Vec<f64> {
    // insertion sort, deliberately independent of std's sort
    let mut v: Vec<f64> = Vec::with_capacity(s.len());
    for &x in s {
        let mut i = 0;
        while i < v.len() && v[i] < x {
            i += 1;
        }
        v.insert(i, x);
    }
    v
}

fn naive_median(s: &[f64]) -> f64 {
    let v = naive_sorted(s);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn naive_quantile(s: &[f64], p: f64) -> f64 {
    let v = naive_sorted(s);
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let h = p * (n as f64 - 1.0);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        v[n - 1]
    } else {
        v[lo] * (1.0 - frac) + v[lo + 1] * frac
    }
}

fn naive_mean(s: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in s {
        acc += x;
    }
    acc / s.len() as f64
}

fn naive_pop_std(s: &[f64]) -> f64 {
    let m = naive_mean(s);
    let mut acc = 0.0;
    for &x in s {
        acc += (x - m) * (x - m);
    }
    (acc / s.len() as f64).sqrt()
}

fn naive_haar(s: &[f64]) -> Vec<f64> {
    let mut d = Vec::new();
    let mut k = 0;
    while 2 * k + 1 < s.len() {
        d.push((s[2 * k] - s[2 * k + 1]) / 2.0_f64.sqrt());
        k += 1;
    }
    d
}

/// Brute-force value of one standard-catalog feature.
pub fn oracle_feature(name: &str, s: &[f64]) -> f64 {
    let t = s.len();
    match name {
        "autocorrelation" => {
            let mut acc = 0.0;
            for i in 1..t {
                acc += s[i] * s[i - 1];
            }
            acc
        }
        "centroid" => {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..t {
                num += i as f64 * s[i] * s[i];
                den += s[i] * s[i];
            }
            if den == 0.0 {
                0.0
            } else {
                num / den
            }
        }
        "max_difference" => {
            let mut best = f64::NEG_INFINITY;
            for i in 0..t - 1 {
                best = best.max(s[i + 1] - s[i]);
            }
            best
        }
        "mean_difference" => {
            let mut acc = 0.0;
            for i in 0..t - 1 {
                acc += s[i + 1] - s[i];
            }
            acc / (t - 1) as f64
        }
        "median_difference" => {
            let d: Vec<f64> = (0..t - 1).map(|i| s[i + 1] - s[i]).collect();
            naive_median(&d)
        }
        "max_abs_difference" => {
            let mut best = f64::NEG_INFINITY;
            for i in 0..t - 1 {
                best = best.max((s[i + 1] - s[i]).abs());
            }
            best
        }
        "mean_abs_difference" => {
            let mut acc = 0.0;
            for i in 0..t - 1 {
                acc += (s[i + 1] - s[i]).abs();
            }
            acc / (t - 1) as f64
        }
        "median_abs_difference" => {
            let d: Vec<f64> = (0..t - 1).map(|i| (s[i + 1] - s[i]).abs()).collect();
            naive_median(&d)
        }
        "distance" => {
            let mut acc = 0.0;
            for i in 0..t - 1 {
                let d = s[i + 1] - s[i];
                acc += (1.0 + d * d).sqrt();
            }
            acc
        }
        "sum_abs_difference" => {
            let mut acc = 0.0;
            for i in 0..t - 1 {
                acc += (s[i + 1] - s[i]).abs();
            }
            acc
        }
        "total_energy" => {
            let mut acc = 0.0;
            for &x in s {
                acc += x * x;
            }
            acc * (t - 1) as f64
        }
        "entropy" => {
            let mut mn = f64::INFINITY;
            let mut mx = f64::NEG_INFINITY;
            for &x in s {
                mn = mn.min(x);
                mx = mx.max(x);
            }
            if mx == mn {
                return 0.0;
            }
            let bins = 10usize;
            let width = (mx - mn) / bins as f64;
            let mut counts = [0usize; 10];
            for &x in s {
                let mut idx = ((x - mn) / width) as usize;
                if idx >= bins {
                    idx = bins - 1;
                }
                counts[idx] += 1;
            }
            let mut h = 0.0;
            for &c in &counts {
                if c > 0 {
                    let p = c as f64 / t as f64;
                    h -= p * p.log2();
                }
            }
            h
        }
        "peak_to_peak" => {
            let mut mn = f64::INFINITY;
            let mut mx = f64::NEG_INFINITY;
            for &x in s {
                mn = mn.min(x);
                mx = mx.max(x);
            }
            (mx - mn).abs()
        }
        "area_under_curve" => {
            let mut acc = 0.0;
            for i in 0..t - 1 {
                acc += (s[i + 1] + s[i]) / 2.0;
            }
            acc
        }
        "absolute_energy" => {
            let mut acc = 0.0;
            for &x in s {
                acc += x * x;
            }
            acc
        }
        "interquartile_range" => naive_quantile(s, 0.75) - naive_quantile(s, 0.25),
        "mean_abs_deviation" => {
            let m = naive_mean(s);
            let mut acc = 0.0;
            for &x in s {
                acc += (x - m).abs();
            }
            acc / t as f64
        }
        "median_abs_deviation" => {
            let med = naive_median(s);
            let d: Vec<f64> = s.iter().map(|&x| (x - med).abs()).collect();
            naive_median(&d)
        }
        "root_mean_square" => {
            let mut acc = 0.0;
            for &x in s {
                acc += x * x;
            }
            (acc / t as f64).sqrt()
        }
        "std_dev" => naive_pop_std(s),
        "variance" => {
            let m = naive_mean(s);
            let mut acc = 0.0;
            for &x in s {
                acc += (x - m) * (x - m);
            }
            acc / t as f64
        }
        "wavelet_abs_mean" => naive_mean(&naive_haar(s)).abs(),
        "wavelet_std" => naive_pop_std(&naive_haar(s)),
        "wavelet_var" => {
            let d = naive_haar(s);
            let m = naive_mean(&d);
            let mut acc = 0.0;
            for &x in &d {
                acc += (x - m) * (x - m);
            }
            acc / d.len() as f64
        }
        "skewness" => {
            let m = naive_mean(s);
            let sd = naive_pop_std(s);
            if sd == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for &x in s {
                acc += (x - m) * (x - m) * (x - m);
            }
            acc / (t as f64 * sd * sd * sd)
        }
        other => panic!("oracle has no formula for `{other}`"),
    }
}

/// Lag-l autocorrelation oracle for padded-catalog slots.
pub fn oracle_autocorr_lag(s: &[f64], lag: usize) -> f64 {
    let mut acc = 0.0;
    for i in lag..s.len() {
        acc += s[i] * s[i - lag];
    }
    acc
}

/// Random series of the given length with seed-dependent scale and offset.
pub fn random_series(rng: &mut Rng, len: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.uniform() * 4.0 - 2.0); // 1e-2 .. 1e2
    let offset = rng.gaussian() * scale;
    (0..len).map(|_| offset + scale * rng.gaussian()).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
