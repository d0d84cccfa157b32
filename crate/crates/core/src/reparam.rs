//! Reparameterization to the universal standard timescale.
//!
//! For a signal `X` the cost of a warp `y` is `J(y) = int g(y) y'^2 dt` with
//! `g(tau) = |X'(tau)|^2`. Its global minimizer is `tau* = F^{-1}` where `F` is
//! the cumulative integral of `g^{1/2}` normalized by the total length `c`,
//! and the minimum is `c^2`. On sampled signals `g^{1/2}` is estimated by chord
//! lengths, so `F` is the normalized cumulative chord length and the whole
//! pipeline is a single O(N) sweep.

use crate::error::{Error, Result};
use crate::metric_spaces::{Signal, TimeGrid, Warp};

/// Relative size of the per-segment regularization floor.
pub const FLOOR_FRACTION: f64 = 1e-9;

/// Chordal speed estimate and its normalized cumulative integral.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedTable {
    sqrt_g: Vec<f64>,
    cumulative: Vec<f64>,
    total_length: f64,
    floor: f64,
}

impl SpeedTable {
    /// Builds the table from per-segment values of `g^{1/2}` on a uniform
    /// grid with `sqrt_g.len() + 1` nodes.
    ///
    /// Each segment gets `floor = 1e-9 * c / N` added to its length so that
    /// `F` stays strictly increasing across plateaus. With `strict` set, a
    /// zero total length is an error instead.
    pub fn from_sqrt_g(sqrt_g: Vec<f64>, strict: bool) -> Result<Self> {
        let segments = sqrt_g.len();
        if segments == 0 {
            return Err(Error::SignalTooShort(segments + 1));
        }
        if let Some(bad) = sqrt_g.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "speed values must be finite and nonnegative, got {bad}"
            )));
        }
        let n = segments + 1;
        let h = 1.0 / segments as f64;
        let total_length: f64 = sqrt_g.iter().map(|s| s * h).sum();
        if total_length == 0.0 {
            if strict {
                return Err(Error::DegenerateSignal);
            }
            // Pure floor: F is the identity.
            let grid = TimeGrid::new(n)?;
            return Ok(Self {
                sqrt_g,
                cumulative: grid.times(),
                total_length,
                floor: 0.0,
            });
        }
        let floor = FLOOR_FRACTION * total_length / n as f64;
        let regularized = total_length + segments as f64 * floor;
        let mut cumulative = Vec::with_capacity(n);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for s in &sqrt_g {
            acc += s * h + floor;
            cumulative.push(acc / regularized);
        }
        cumulative[n - 1] = 1.0;
        Ok(Self {
            sqrt_g,
            cumulative,
            total_length,
            floor,
        })
    }

    /// Per-segment `g^{1/2}` estimates (unregularized).
    pub fn sqrt_g(&self) -> &[f64] {
        &self.sqrt_g
    }

    /// Normalized cumulative `F_k`, from 0 to 1.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// The constant `c`: total length before regularization.
    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Floor added to each segment length.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// `c` including the regularization floor.
    pub fn regularized_length(&self) -> f64 {
        if self.total_length == 0.0 {
            return 1.0;
        }
        self.total_length + self.sqrt_g.len() as f64 * self.floor
    }

    /// Regularized speed of segment `k`.
    pub fn regularized_speed(&self, k: usize) -> f64 {
        if self.total_length == 0.0 {
            return 1.0;
        }
        self.sqrt_g[k] + self.floor * self.sqrt_g.len() as f64
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Regularized speed interpolated linearly between segment midpoints.
    pub fn speed_at(&self, x: f64) -> f64 {
        let segs = self.sqrt_g.len();
        let pos = x.clamp(0.0, 1.0) * segs as f64 - 0.5;
        if pos <= 0.0 {
            return self.regularized_speed(0);
        }
        let k = pos.floor() as usize;
        if k + 1 >= segs {
            return self.regularized_speed(segs - 1);
        }
        let frac = pos - k as f64;
        (1.0 - frac) * self.regularized_speed(k) + frac * self.regularized_speed(k + 1)
    }

    /// Evaluates the piecewise-linear `F` at `x`.
    pub fn eval_cumulative(&self, x: f64) -> f64 {
        let segs = self.sqrt_g.len();
        let pos = x.clamp(0.0, 1.0) * segs as f64;
        let k = (pos.floor() as usize).min(segs - 1);
        let frac = pos - k as f64;
        self.cumulative[k] + frac * (self.cumulative[k + 1] - self.cumulative[k])
    }
}

/// Result of reparameterizing one signal.
#[derive(Clone, Debug, PartialEq)]
pub struct UstResult {
    /// `tau*` with `Y(t) = X(tau*(t))`.
    pub warp_star: Warp,
    /// `Y` on the output grid.
    pub resampled: Signal,
    /// The constant `c` (total length of the signal).
    pub total_length: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UstOptions {
    /// Output sample count; defaults to the input length.
    pub samples: Option<usize>,
    /// Reject zero-length signals instead of regularizing.
    pub strict: bool,
}

/// Chordal speeds `s_k = d(X_k, X_{k+1}) (N - 1)` and the normalized cumulative length.
pub fn speed_table(signal: &Signal, strict: bool) -> Result<SpeedTable> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::SignalTooShort(n));
    }
    let scale = (n - 1) as f64;
    let sqrt_g = signal
        .segment_lengths()?
        .into_iter()
        .map(|d| d * scale)
        .collect();
    SpeedTable::from_sqrt_g(sqrt_g, strict)
}

/// `tau*_j = F^{-1}(t_j)` by one monotone sweep over the cumulative table.
pub fn optimal_warp(table: &SpeedTable, out_grid: TimeGrid) -> Result<Warp> {
    let f = table.cumulative();
    let segs = f.len() - 1;
    let h = 1.0 / segs as f64;
    let m = out_grid.len();
    let mut values = Vec::with_capacity(m);
    values.push(0.0);
    let mut k = 0usize;
    for j in 1..m - 1 {
        let t = out_grid.t(j);
        while k + 1 < segs && f[k + 1] <= t {
            k += 1;
        }
        let frac = (t - f[k]) / (f[k + 1] - f[k]);
        let x = if k + 1 == segs {
            k as f64 * h + frac * (1.0 - k as f64 * h)
        } else {
            (k as f64 + frac) * h
        };
        values.push(x);
    }
    values.push(1.0);
    Warp::new(values)
}

/// `Y_j = X(w_j)`, interpolating within the bracketing segment.
pub fn apply_warp(signal: &Signal, w: &Warp) -> Result<Signal> {
    let mut data = Vec::with_capacity(w.len() * signal.space().width());
    for &x in w.values() {
        signal.sample_at(x, &mut data)?;
    }
    Signal::new(signal.space(), data)
}

/// Full pipeline: speed table, optimal warp, resampling.
pub fn ust(signal: &Signal, opts: UstOptions) -> Result<UstResult> {
    let table = speed_table(signal, opts.strict)?;
    let out_grid = TimeGrid::new(opts.samples.unwrap_or(signal.len()))?;
    let warp_star = optimal_warp(&table, out_grid)?;
    let resampled = apply_warp(signal, &warp_star)?;
    Ok(UstResult {
        warp_star,
        resampled,
        total_length: table.total_length(),
    })
}

/// Discrete `J(y) = sum_k (d(Y_k, Y_{k+1}) (M - 1))^2 / (M - 1)` with `Y = X o y`.
pub fn functional_cost(signal: &Signal, candidate: &Warp) -> Result<f64> {
    let y = apply_warp(signal, candidate)?;
    let scale = (y.len() - 1) as f64;
    Ok(y.segment_lengths()?.iter().map(|d| d * d * scale).sum())
}

/// Largest relative violation of the closed-form rate `tau*' = c / g^{1/2}(tau*)`.
///
/// Evaluated on each output segment with a forward difference for `tau*'`
/// and `g^{1/2}` interpolated at the segment midpoint; returns
/// `max |g^{1/2} tau*' / c - 1|`.
pub fn closed_form_speed_check(result: &UstResult, table: &SpeedTable) -> f64 {
    let w = result.warp_star.values();
    let m = w.len();
    let c = table.regularized_length();
    let scale = (m - 1) as f64;
    let mut worst: f64 = 0.0;
    for j in 0..m - 1 {
        let rate = (w[j + 1] - w[j]) * scale;
        let mid = 0.5 * (w[j] + w[j + 1]);
        let r = (table.speed_at(mid) * rate / c - 1.0).abs();
        worst = worst.max(r);
    }
    worst
}

/// Optimal warp for an analytically known `g^{1/2}` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileWarp {
    pub warp: Warp,
    /// Closed-form rate `tau*'(t_j) = c / g^{1/2}(tau*_j)`.
    pub rate: Vec<f64>,
    /// `c = int_0^1 g^{1/2}`, including the regularization floor.
    pub total_length: f64,
}

pub(crate) const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
pub(crate) const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Solves `F(tau) = t` for a smooth speed profile: cumulative integral by
/// 5-point Gauss-Legendre on `cells` cells, then safeguarded Newton inside
/// the bracketing cell. Unlike [`optimal_warp`] the result is smooth in `t`,
/// which finite-difference residual studies need.
pub fn optimal_warp_from_profile(
    sqrt_g: impl Fn(f64) -> f64,
    out_grid: TimeGrid,
    cells: usize,
) -> Result<ProfileWarp> {
    let cells = cells.max(1);
    let raw_cum = {
        let mut cum = Vec::with_capacity(cells + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = i as f64 / cells as f64;
            let b = (i + 1) as f64 / cells as f64;
            acc += gauss_legendre(&sqrt_g, a, b);
            cum.push(acc);
        }
        cum
    };
    let raw_total = raw_cum[cells];
    if !(raw_total.is_finite() && raw_total > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    let floor = FLOOR_FRACTION * raw_total;
    let speed = |x: f64| sqrt_g(x).max(0.0) + floor;
    let edge = |i: usize| i as f64 / cells as f64;
    let cum: Vec<f64> = raw_cum
        .iter()
        .enumerate()
        .map(|(i, v)| v + floor * edge(i))
        .collect();
    let total = cum[cells];

    let m = out_grid.len();
    let mut values = Vec::with_capacity(m);
    values.push(0.0);
    let mut i = 0usize;
    for j in 1..m - 1 {
        let target = out_grid.t(j) * total;
        while i + 1 < cells && cum[i + 1] <= target {
            i += 1;
        }
        let (a, b) = (edge(i), edge(i + 1));
        let (mut lo, mut hi) = (a, b);
        let span = cum[i + 1] - cum[i];
        let mut x = a + (b - a) * ((target - cum[i]) / span).clamp(0.0, 1.0);
        for _ in 0..60 {
            let g = cum[i] + gauss_legendre(&speed, a, x) - target;
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = speed(x);
            let mut next = x - g / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step <= 1e-16 * x.max(1e-3) {
                break;
            }
        }
        values.push(x);
    }
    values.push(1.0);
    let rate = values.iter().map(|&x| total / speed(x)).collect();
    Ok(ProfileWarp {
        warp: Warp::new(values)?,
        rate,
        total_length: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_spaces::{random_warp, warp_identity, warp_inverse, Space};
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(n).unwrap()
    }

    fn sqrt_warp(n: usize) -> Warp {
        let g = grid(n);
        Warp::new((0..n).map(|k| g.t(k).sqrt()).collect()).unwrap()
    }

    #[test]
    fn constant_speed_table() {
        let x = Signal::from_fn(101, |t| t).unwrap();
        let table = speed_table(&x, true).unwrap();
        assert!(table.sqrt_g().iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert_abs_diff_eq!(table.total_length(), 1.0, epsilon = 1e-14);
        let g = grid(101);
        for (k, f) in table.cumulative().iter().enumerate() {
            assert_abs_diff_eq!(*f, g.t(k), epsilon = 1e-14);
        }
    }

    #[test]
    fn square_signal_table() {
        let x = Signal::from_fn(1001, |t| t * t).unwrap();
        let table = speed_table(&x, true).unwrap();
        assert_abs_diff_eq!(table.total_length(), 1.0, epsilon = 1e-5);
        let g = grid(1001);
        for (k, f) in table.cumulative().iter().enumerate() {
            assert_abs_diff_eq!(*f, g.t(k).powi(2), epsilon = 1e-8);
        }
    }

    #[test]
    fn degenerate_signal() {
        let x = Signal::from_fn(20, |_| 3.0).unwrap();
        assert!(matches!(speed_table(&x, true), Err(Error::DegenerateSignal)));
        let table = speed_table(&x, false).unwrap();
        let w = optimal_warp(&table, grid(20)).unwrap();
        assert!(w.deviation_from_identity() < 1e-15);
    }

    #[test]
    fn too_short() {
        assert!(Signal::from_scalars(vec![1.0]).is_err());
        assert!(matches!(
            SpeedTable::from_sqrt_g(vec![], false),
            Err(Error::SignalTooShort(1))
        ));
    }

    #[test]
    fn plateau_keeps_warp_valid() {
        // Flat middle third.
        let x = Signal::from_fn(301, |t| t.min(1.0 / 3.0) + (t - 2.0 / 3.0).max(0.0)).unwrap();
        let table = speed_table(&x, true).unwrap();
        let r = ust(&x, UstOptions::default()).unwrap();
        assert!(Warp::new(r.warp_star.values().to_vec()).is_ok());
        assert!(closed_form_speed_check(&r, &table).is_finite());
    }

    #[test]
    fn optimal_warp_examples() {
        let id = Signal::from_fn(257, |t| 2.0 * t).unwrap();
        let w = optimal_warp(&speed_table(&id, true).unwrap(), grid(257)).unwrap();
        assert!(w.deviation_from_identity() < 1e-12);

        let sq = Signal::from_fn(1001, |t| t * t).unwrap();
        let table = speed_table(&sq, true).unwrap();
        let w = optimal_warp(&table, grid(1001)).unwrap();
        assert!(w.sup_distance(&sqrt_warp(1001)).unwrap() < 1e-3);
        let g = grid(1001);
        for j in 1..1000 {
            assert_abs_diff_eq!(table.eval_cumulative(w.values()[j]), g.t(j), epsilon = 1e-12);
        }
    }

    #[test]
    fn inversion_contract_on_random_tables() {
        for seed in 0..20 {
            let x = crate::synth::smooth_scalar(seed, 513, 3);
            let table = speed_table(&x, false).unwrap();
            let g = grid(700);
            let w = optimal_warp(&table, g).unwrap();
            for j in 1..699 {
                assert!((table.eval_cumulative(w.values()[j]) - g.t(j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_warp_examples() {
        let x = Signal::from_fn(1001, |t| (2.0 * t).sin()).unwrap();
        let same = apply_warp(&x, &warp_identity(grid(1001))).unwrap();
        assert_eq!(same, x);

        let w = random_warp(grid(1001), 3, 0.5).unwrap();
        let there = apply_warp(&x, &w).unwrap();
        let back = apply_warp(&there, &warp_inverse(&w)).unwrap();
        assert!(back.sup_distance(&x).unwrap() < 1e-3);

        let sq = Signal::from_fn(1001, |t| t * t).unwrap();
        let y = apply_warp(&sq, &sqrt_warp(1001)).unwrap();
        let lin = Signal::from_fn(1001, |t| t).unwrap();
        assert!(y.sup_distance(&lin).unwrap() < 1e-3);
    }

    #[test]
    fn ust_total_length_of_sine() {
        let x = Signal::from_fn(1001, |t| (std::f64::consts::PI * t).sin()).unwrap();
        let r = ust(&x, UstOptions::default()).unwrap();
        assert_abs_diff_eq!(r.total_length, 2.0, epsilon = 1e-4);
        assert_eq!(r.resampled.point(0), x.point(0));
        assert_eq!(r.resampled.point(1000), x.point(1000));
    }

    #[test]
    fn ust_resamples_to_requested_size() {
        let x = Signal::from_fn(101, |t| t * t * t).unwrap();
        let r = ust(
            &x,
            UstOptions {
                samples: Some(37),
                strict: false,
            },
        )
        .unwrap();
        assert_eq!(r.resampled.len(), 37);
        assert_eq!(r.warp_star.len(), 37);
    }

    #[test]
    fn ust_is_idempotent() {
        let x = Signal::from_fn(1001, |t| t * t).unwrap();
        let y = ust(&x, UstOptions::default()).unwrap().resampled;
        let again = ust(&y, UstOptions::default()).unwrap();
        assert!(again.warp_star.deviation_from_identity() < 1e-6);
    }

    #[test]
    fn ust_output_has_uniform_speed_for_curves() {
        let x = crate::synth::smooth_curve(11, 2001, 3);
        let r = ust(&x, UstOptions::default()).unwrap();
        let seg = r.resampled.segment_lengths().unwrap();
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        let (lo, hi) = seg
            .iter()
            .fold((f64::MAX, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
        assert!((hi - lo) / mean < 0.02, "spread {}", (hi - lo) / mean);
    }

    #[test]
    fn functional_cost_examples() {
        let lin = Signal::from_fn(1001, |t| t).unwrap();
        let j = functional_cost(&lin, &warp_identity(grid(1001))).unwrap();
        assert_abs_diff_eq!(j, 1.0, epsilon = 1e-12);

        let sq = Signal::from_fn(1001, |t| t * t).unwrap();
        let j_id = functional_cost(&sq, &warp_identity(grid(1001))).unwrap();
        assert_abs_diff_eq!(j_id, 4.0 / 3.0, epsilon = 1e-3);
        let j_opt = functional_cost(&sq, &sqrt_warp(1001)).unwrap();
        assert_abs_diff_eq!(j_opt, 1.0, epsilon = 1e-3);
        assert!(j_opt <= j_id);
    }

    #[test]
    fn closed_form_check_constant_speed() {
        let lin = Signal::from_fn(501, |t| 3.0 * t - 1.0).unwrap();
        let table = speed_table(&lin, true).unwrap();
        let r = ust(&lin, UstOptions::default()).unwrap();
        assert!(closed_form_speed_check(&r, &table) < 1e-10);
    }

    #[test]
    fn closed_form_check_converges_first_order() {
        let residual = |n: usize| {
            let x = Signal::from_fn(n, |t| t * t).unwrap();
            let table = speed_table(&x, true).unwrap();
            let r = ust(&x, UstOptions::default()).unwrap();
            closed_form_speed_check(&r, &table)
        };
        let coarse = residual(1001);
        let fine = residual(2001);
        assert!(coarse < 5e-3 && coarse > 1e-5, "{coarse}");
        assert!(coarse / fine > 1.8, "{coarse} {fine}");
    }

    #[test]
    fn profile_route_matches_sqrt() {
        let pw = optimal_warp_from_profile(|x| 2.0 * x, grid(1001), 200).unwrap();
        assert!(pw.warp.sup_distance(&sqrt_warp(1001)).unwrap() < 1e-8);
        assert_abs_diff_eq!(pw.total_length, 1.0, epsilon = 1e-8);
        // Rate is 1 / (2 sqrt t).
        assert_abs_diff_eq!(pw.rate[250], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn profile_route_rejects_zero_profile() {
        assert!(matches!(
            optimal_warp_from_profile(|_| 0.0, grid(10), 10),
            Err(Error::DegenerateSignal)
        ));
    }

    #[test]
    fn se3_signal_pipeline() {
        let x = crate::synth::smooth_se3(5, 801);
        let r = ust(&x, UstOptions::default()).unwrap();
        assert_eq!(r.resampled.space(), Space::Se3);
        assert!(r.total_length > 0.0);
        assert_eq!(r.resampled.point(800), x.point(800));
    }
}
