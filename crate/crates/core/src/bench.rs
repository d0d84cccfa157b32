//! Runtime scaling of UST matching against the DTW baseline.

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::matching::{self, Method};
use crate::synth;

pub const DEFAULT_UST_SIZES: [usize; 4] = [1_000, 10_000, 100_000, 1_000_000];
pub const DEFAULT_DTW_SIZES: [usize; 4] = [100, 1_000, 3_000, 10_000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub n: usize,
    pub median_seconds: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub repeat: usize,
    pub rows: Vec<BenchRow>,
    pub ust_slope: Option<f64>,
    pub dtw_slope: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Median wall time of `repeat` runs after one untimed warm-up run.
pub fn median_seconds<T>(repeat: usize, mut f: impl FnMut() -> T) -> f64 {
    std::hint::black_box(f());
    let mut times: Vec<f64> = (0..repeat.max(1))
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(f());
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let m = times.len();
    if m % 2 == 1 {
        times[m / 2]
    } else {
        0.5 * (times[m / 2 - 1] + times[m / 2])
    }
}

/// Times one method over a list of sizes on seeded smooth scalar pairs.
pub fn time_method(method: Method, sizes: &[usize], repeat: usize, seed: u64) -> Result<Vec<BenchRow>> {
    sizes
        .iter()
        .map(|&n| {
            if n < 2 {
                return Err(Error::SignalTooShort(n));
            }
            let a = synth::smooth_scalar(seed, n, 5);
            let b = synth::smooth_scalar(seed.wrapping_add(1), n, 5);
            let distance = matching::compare(&a, &b, method)?.distance;
            let median_seconds = median_seconds(repeat, || matching::compare(&a, &b, method));
            Ok(BenchRow {
                method,
                n,
                median_seconds,
                distance,
            })
        })
        .collect()
}

/// Both timing sweeps plus their fitted log-log slopes.
pub fn run(ust_sizes: &[usize], dtw_sizes: &[usize], repeat: usize, seed: u64) -> Result<BenchReport> {
    let mut rows = time_method(Method::Ust, ust_sizes, repeat, seed)?;
    rows.extend(time_method(Method::Dtw, dtw_sizes, repeat, seed)?);
    let slope = |m: Method| {
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.method == m)
            .map(|r| (r.n as f64, r.median_seconds))
            .unzip();
        loglog_slope(&x, &y)
    };
    Ok(BenchReport {
        seed,
        repeat,
        ust_slope: slope(Method::Ust),
        dtw_slope: slope(Method::Dtw),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn sizes_must_allow_a_signal() {
        assert!(matches!(
            time_method(Method::Ust, &[1], 1, 0),
            Err(Error::SignalTooShort(1))
        ));
    }

    #[test]
    fn same_seed_same_inputs() {
        let a = time_method(Method::Dtw, &[20, 40], 1, 9).unwrap();
        let b = time_method(Method::Dtw, &[20, 40], 1, 9).unwrap();
        assert_eq!(a[0].distance, b[0].distance);
        assert_eq!(a[1].distance, b[1].distance);
    }
}
