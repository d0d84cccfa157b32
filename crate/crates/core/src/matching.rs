//! Signal comparison: pointwise and UST distances, a DTW baseline,
//! nearest-template classification and SE(3) nuisance quotients.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lie_se3::{self, Se3};
use crate::metric_spaces::{Signal, Space};
use crate::reparam::{self, UstOptions};

/// How two signals are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Raw,
    Ust,
    Dtw,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Raw => "raw",
            Method::Ust => "ust",
            Method::Dtw => "dtw",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Method::Raw),
            "ust" => Ok(Method::Ust),
            "dtw" => Ok(Method::Dtw),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Outcome of one comparison.
///
/// For `raw` and `ust` the distance is the trapezoid estimate of
/// `int_0^1 d(Y1, Y2)^2 dt` and `profile[k]` is `d(Y1_k, Y2_k)`.
/// For `dtw` the profile is empty and the distance is the accumulated
/// squared cost divided by the path length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub method: Method,
    pub distance: f64,
    pub profile: Vec<f64>,
}

/// Trapezoid weights of a uniform grid on `[0, 1]` applied to `values`.
pub fn trapezoid(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
}

fn check_compatible(a: &Signal, b: &Signal) -> Result<()> {
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch {
            left: a.space().to_string(),
            right: b.space().to_string(),
        });
    }
    Ok(())
}

/// Trapezoid estimate of `int_0^1 d(Y1(t), Y2(t))^2 dt` on a shared grid.
pub fn pointwise_distance(y1: &Signal, y2: &Signal) -> Result<MatchReport> {
    check_compatible(y1, y2)?;
    if y1.len() != y2.len() {
        return Err(Error::GridMismatch {
            left: y1.len(),
            right: y2.len(),
        });
    }
    let space = y1.space();
    let profile = (0..y1.len())
        .map(|k| space.distance(y1.point(k), y2.point(k)))
        .collect::<Result<Vec<f64>>>()?;
    let squared: Vec<f64> = profile.iter().map(|d| d * d).collect();
    Ok(MatchReport {
        method: Method::Raw,
        distance: trapezoid(&squared),
        profile,
    })
}

/// Pointwise distance after putting both signals on their universal standard
/// timescale. Both are resampled to the longer of the two lengths.
pub fn ust_distance(x1: &Signal, x2: &Signal) -> Result<MatchReport> {
    ust_distance_with(x1, x2, false)
}

/// [`ust_distance`] with an explicit strictness flag for zero-length signals.
pub fn ust_distance_with(x1: &Signal, x2: &Signal, strict: bool) -> Result<MatchReport> {
    check_compatible(x1, x2)?;
    let opts = UstOptions {
        samples: Some(x1.len().max(x2.len())),
        strict,
    };
    let y1 = reparam::ust(x1, opts)?.resampled;
    let y2 = reparam::ust(x2, opts)?.resampled;
    let mut report = pointwise_distance(&y1, &y2)?;
    report.method = Method::Ust;
    Ok(report)
}

/// Dynamic time warping with squared local cost and symmetric steps,
/// anchored at both ends.
///
/// The path minimizing total cost is selected (ties go to the shorter path)
/// and the reported distance is its cost divided by its length. Uses two
/// rolling rows, so memory is `O(min)` in the second signal's length.
pub fn dtw_distance(x1: &Signal, x2: &Signal) -> Result<MatchReport> {
    check_compatible(x1, x2)?;
    let space = x1.space();
    let (n, m) = (x1.len(), x2.len());
    let mut prev_cost = vec![f64::INFINITY; m];
    let mut prev_len = vec![0u64; m];
    let mut cost = vec![f64::INFINITY; m];
    let mut len = vec![0u64; m];
    for i in 0..n {
        let a = x1.point(i);
        for j in 0..m {
            let d = space.distance(a, x2.point(j))?;
            let local = d * d;
            if i == 0 && j == 0 {
                cost[0] = local;
                len[0] = 1;
                continue;
            }
            let mut best = (f64::INFINITY, u64::MAX);
            let mut consider = |c: f64, l: u64| {
                if c.is_finite() {
                    let cand = (c + local, l + 1);
                    if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                        best = cand;
                    }
                }
            };
            if i > 0 && j > 0 {
                consider(prev_cost[j - 1], prev_len[j - 1]);
            }
            if i > 0 {
                consider(prev_cost[j], prev_len[j]);
            }
            if j > 0 {
                consider(cost[j - 1], len[j - 1]);
            }
            cost[j] = best.0;
            len[j] = best.1;
        }
        std::mem::swap(&mut cost, &mut prev_cost);
        std::mem::swap(&mut len, &mut prev_len);
    }
    Ok(MatchReport {
        method: Method::Dtw,
        distance: prev_cost[m - 1] / prev_len[m - 1] as f64,
        profile: Vec::new(),
    })
}

/// Dispatches on `method`.
pub fn compare(x1: &Signal, x2: &Signal, method: Method) -> Result<MatchReport> {
    match method {
        Method::Raw => pointwise_distance(x1, x2),
        Method::Ust => ust_distance(x1, x2),
        Method::Dtw => dtw_distance(x1, x2),
    }
}

/// Result of nearest-template classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    pub index: usize,
    pub score: f64,
    /// One `(label, score)` per template, in template order.
    pub scores: Vec<(String, f64)>,
}

/// Label of the closest template; ties go to the lowest template index.
pub fn classify_nearest(
    query: &Signal,
    templates: &[(String, Signal)],
    method: Method,
) -> Result<Classification> {
    if templates.is_empty() {
        return Err(Error::EmptyTemplateSet);
    }
    let scores = templates
        .iter()
        .map(|(label, t)| Ok((label.clone(), compare(query, t, method)?.distance)))
        .collect::<Result<Vec<_>>>()?;
    let (index, score) = nearest(&scores);
    Ok(Classification {
        label: scores[index].0.clone(),
        index,
        score,
        scores,
    })
}

fn nearest(scores: &[(String, f64)]) -> (usize, f64) {
    let mut best = (0, scores[0].1);
    for (i, (_, s)) in scores.iter().enumerate().skip(1) {
        if *s < best.1 {
            best = (i, *s);
        }
    }
    best
}

/// Shoulder, elbow and hand poses on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyTrajectory {
    shoulder: Signal,
    elbow: Signal,
    hand: Signal,
}

impl BodyTrajectory {
    pub fn new(shoulder: Signal, elbow: Signal, hand: Signal) -> Result<Self> {
        for s in [&shoulder, &elbow, &hand] {
            if s.space() != Space::Se3 {
                return Err(Error::UnsupportedSpace(s.space().to_string()));
            }
        }
        for s in [&elbow, &hand] {
            if s.len() != shoulder.len() {
                return Err(Error::GridMismatch {
                    left: shoulder.len(),
                    right: s.len(),
                });
            }
        }
        Ok(Self {
            shoulder,
            elbow,
            hand,
        })
    }

    pub fn shoulder(&self) -> &Signal {
        &self.shoulder
    }

    pub fn elbow(&self) -> &Signal {
        &self.elbow
    }

    pub fn hand(&self) -> &Signal {
        &self.hand
    }

    pub fn len(&self) -> usize {
        self.shoulder.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shoulder.is_empty()
    }

    /// Applies `f` to each of the three signals.
    pub fn map(&self, mut f: impl FnMut(&Signal) -> Result<Signal>) -> Result<Self> {
        Self::new(f(&self.shoulder)?, f(&self.elbow)?, f(&self.hand)?)
    }

    /// Left action `g(t) (S, E, H) = (g S, g E, g H)`; `g` is sampled per index.
    pub fn left_act(&self, g: impl Fn(usize) -> Se3) -> Result<Self> {
        self.map(|s| {
            let poses: Vec<Se3> = (0..s.len())
                .map(|k| lie_se3::compose(&g(k), &s.se3_at(k)))
                .collect();
            Signal::from_se3(&poses)
        })
    }
}

/// The absolute poses `(S, E, H)` per sample, a signal on `SE(3)^3`.
pub fn stacked_signal(traj: &BodyTrajectory) -> Signal {
    let n = traj.len();
    let mut data = Vec::with_capacity(n * 3 * lie_se3::FLAT_LEN);
    for k in 0..n {
        for part in [&traj.shoulder, &traj.elbow, &traj.hand] {
            data.extend_from_slice(part.point(k));
        }
    }
    Signal::new(Space::Se3Product(3), data).expect("three factors per sample")
}

/// `(S^-1 E, S^-1 H, E^-1 H)` per sample, a signal on `SE(3)^3`.
pub fn relative_motion_signal(traj: &BodyTrajectory) -> Signal {
    let n = traj.len();
    let mut data = Vec::with_capacity(n * 3 * lie_se3::FLAT_LEN);
    for k in 0..n {
        let s = traj.shoulder.se3_at(k);
        let e = traj.elbow.se3_at(k);
        let h = traj.hand.se3_at(k);
        let s_inv = s.inverse();
        s_inv.compose(&e).write_flat(&mut data);
        s_inv.compose(&h).write_flat(&mut data);
        e.inverse().compose(&h).write_flat(&mut data);
    }
    Signal::new(Space::Se3Product(3), data).expect("three factors per sample")
}

/// `X_k^-1 X_{k+step}` for `k = 0..N-step`, factorwise on products.
pub fn delta_signal(x: &Signal, step: usize) -> Result<Signal> {
    let factors = x.space().se3_factors();
    if factors == 0 {
        return Err(Error::UnsupportedSpace(x.space().to_string()));
    }
    let n = x.len();
    if step == 0 || step + 2 > n {
        return Err(Error::StepTooLarge { step, len: n });
    }
    let mut data = Vec::with_capacity((n - step) * x.space().width());
    for k in 0..n - step {
        for j in 0..factors {
            let a = x.se3_factor(k, j);
            let b = x.se3_factor(k + step, j);
            a.inverse().compose(&b).write_flat(&mut data);
        }
    }
    Signal::new(x.space(), data)
}

/// Screw angle and pitch-distance signals of the deltas of an SE(3) signal.
pub fn screw_signal(x: &Signal, step: usize) -> Result<(Signal, Signal)> {
    if x.space() != Space::Se3 {
        return Err(Error::UnsupportedSpace(x.space().to_string()));
    }
    let deltas = delta_signal(x, step)?;
    let (theta, d): (Vec<f64>, Vec<f64>) = (0..deltas.len())
        .map(|k| {
            let s = lie_se3::screw_invariants(&deltas.se3_at(k));
            (s.theta, s.d)
        })
        .unzip();
    Ok((Signal::from_scalars(theta)?, Signal::from_scalars(d)?))
}

/// Pointwise screw invariants `(theta, d)` of every factor, as a vector signal.
pub fn screw_invariant_signal(x: &Signal) -> Result<Signal> {
    let factors = x.space().se3_factors();
    if factors == 0 {
        return Err(Error::UnsupportedSpace(x.space().to_string()));
    }
    let mut data = Vec::with_capacity(x.len() * 2 * factors);
    for k in 0..x.len() {
        for j in 0..factors {
            let s = lie_se3::screw_invariants(&x.se3_factor(k, j));
            data.push(s.theta);
            data.push(s.d);
        }
    }
    Signal::new(Space::Vector(2 * factors), data)
}

/// Which invariant removes the common SE(3) nuisance motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quotient {
    /// Relative poses `(S^-1 E, S^-1 H, E^-1 H)`.
    Relative,
    /// Screw invariants of the relative poses.
    Screw,
}

impl fmt::Display for Quotient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quotient::Relative => "relative",
            Quotient::Screw => "screw",
        })
    }
}

impl FromStr for Quotient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(Quotient::Relative),
            "screw" => Ok(Quotient::Screw),
            other => Err(Error::InvalidArgument(format!("unknown quotient `{other}`"))),
        }
    }
}

/// The invariant signal used to compare body trajectories.
pub fn quotient_signal(traj: &BodyTrajectory, quotient: Quotient) -> Result<Signal> {
    let rel = relative_motion_signal(traj);
    match quotient {
        Quotient::Relative => Ok(rel),
        Quotient::Screw => screw_invariant_signal(&rel),
    }
}

/// UST distance between the invariant signals of two body trajectories.
pub fn quotient_distance(
    x1: &BodyTrajectory,
    x2: &BodyTrajectory,
    quotient: Quotient,
) -> Result<MatchReport> {
    ust_distance(&quotient_signal(x1, quotient)?, &quotient_signal(x2, quotient)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_spaces::{random_warp, TimeGrid};
    use crate::synth;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Every monotone anchored path, enumerated recursively; returns the
    /// lexicographically smallest `(cost, length)`.
    fn dtw_exhaustive(a: &Signal, b: &Signal) -> f64 {
        fn walk(
            a: &Signal,
            b: &Signal,
            i: usize,
            j: usize,
            acc: f64,
            len: u64,
            best: &mut (f64, u64),
        ) {
            let d = a.space().distance(a.point(i), b.point(j)).unwrap();
            let acc = if len == 0 { d * d } else { acc + d * d };
            let len = len + 1;
            if i + 1 == a.len() && j + 1 == b.len() {
                if acc < best.0 || (acc == best.0 && len < best.1) {
                    *best = (acc, len);
                }
                return;
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, acc, len, best);
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, acc, len, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, acc, len, best);
            }
        }
        let mut best = (f64::INFINITY, u64::MAX);
        walk(a, b, 0, 0, 0.0, 0, &mut best);
        best.0 / best.1 as f64
    }

    #[test]
    fn pointwise_examples() {
        let x = Signal::from_fn(101, |t| t.sin()).unwrap();
        assert_eq!(pointwise_distance(&x, &x).unwrap().distance, 0.0);
        let zero = Signal::from_fn(1001, |_| 0.0).unwrap();
        let one = Signal::from_fn(1001, |_| 1.0).unwrap();
        let ramp = Signal::from_fn(1001, |t| t).unwrap();
        assert!((pointwise_distance(&zero, &one).unwrap().distance - 1.0).abs() < 1e-12);
        let r = pointwise_distance(&zero, &ramp).unwrap();
        assert!((r.distance - 1.0 / 3.0).abs() < 1e-4);
        assert_eq!(r.profile.len(), 1001);
        let sq: Vec<f64> = r.profile.iter().map(|d| d * d).collect();
        assert_eq!(trapezoid(&sq), r.distance);
    }

    #[test]
    fn pointwise_rejects_mismatch() {
        let a = Signal::from_fn(10, |t| t).unwrap();
        let b = Signal::from_fn(11, |t| t).unwrap();
        assert!(matches!(
            pointwise_distance(&a, &b),
            Err(Error::GridMismatch { .. })
        ));
        let c = synth::smooth_curve(1, 10, 2);
        assert!(matches!(
            pointwise_distance(&a, &c),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn ust_distance_absorbs_warps() {
        let grid = TimeGrid::new(2001).unwrap();
        for seed in 0..5 {
            let x = synth::smooth_curve(seed, 2001, 2);
            let w = random_warp(grid, 100 + seed, 0.6).unwrap();
            let xw = reparam::apply_warp(&x, &w).unwrap();
            let ust = ust_distance(&x, &xw).unwrap().distance;
            assert!(ust < 1e-3, "seed {seed}: {ust}");
        }
    }

    #[test]
    fn ust_distance_examples() {
        let x = Signal::from_fn(1001, |t| (PI * t).sin()).unwrap();
        let y = Signal::from_fn(1001, |t| (PI * t).cos()).unwrap();
        assert!(ust_distance(&x, &y).unwrap().distance > 0.05);
        assert!(ust_distance(&x, &x).unwrap().distance <= 1e-12);
    }

    #[test]
    fn ust_distance_symmetric() {
        for seed in 0..10 {
            let a = synth::smooth_scalar(seed, 300, 4);
            let b = synth::smooth_scalar(seed + 50, 500, 4);
            let ab = ust_distance(&a, &b).unwrap().distance;
            let ba = ust_distance(&b, &a).unwrap().distance;
            assert!((ab - ba).abs() <= 1e-12);
        }
    }

    #[test]
    fn dtw_examples() {
        let x = synth::smooth_scalar(3, 60, 3);
        assert_eq!(dtw_distance(&x, &x).unwrap().distance, 0.0);

        // One-sample shift: the path that pairs x_k with x_{k+1} pays only at
        // the two anchored corners.
        let v = x.scalars().unwrap();
        let mut shifted = vec![v[0]];
        shifted.extend_from_slice(&v[..v.len() - 1]);
        let y = Signal::from_scalars(shifted).unwrap();
        let bound = (v[1] - v[0]).powi(2);
        assert!(dtw_distance(&x, &y).unwrap().distance <= bound);
    }

    #[test]
    fn dtw_absorbs_monotone_warp() {
        let grid = TimeGrid::new(50).unwrap();
        let x = Signal::from_fn(50, |t| (2.0 * PI * t).sin()).unwrap();
        let w = random_warp(grid, 9, 0.5).unwrap();
        let xw = reparam::apply_warp(&x, &w).unwrap();
        let dtw = dtw_distance(&x, &xw).unwrap().distance;
        let raw = pointwise_distance(&x, &xw).unwrap().distance;
        assert!(dtw < 0.1 * raw, "dtw {dtw} raw {raw}");
    }

    #[test]
    fn dtw_matches_exhaustive_paths() {
        for seed in 0..40u64 {
            let n = 2 + (seed % 7) as usize;
            let m = 2 + ((seed / 7) % 7) as usize;
            let a = synth::smooth_scalar(seed, n, 3);
            let b = synth::smooth_scalar(seed + 1000, m, 3);
            assert_eq!(dtw_distance(&a, &b).unwrap().distance, dtw_exhaustive(&a, &b));
        }
        let a = synth::smooth_se3(1, 6);
        let b = synth::smooth_se3(2, 8);
        assert_eq!(dtw_distance(&a, &b).unwrap().distance, dtw_exhaustive(&a, &b));
    }

    #[test]
    fn dtw_below_diagonal_cost() {
        for seed in 0..20 {
            let a = synth::smooth_scalar(seed, 80, 4);
            let b = synth::smooth_scalar(seed + 7, 80, 4);
            let diag: f64 = (0..80)
                .map(|k| (a.point(k)[0] - b.point(k)[0]).powi(2))
                .sum::<f64>()
                / 80.0;
            assert!(dtw_distance(&a, &b).unwrap().distance <= diag);
        }
    }

    #[test]
    fn classify_examples() {
        let t0 = synth::smooth_scalar(1, 400, 4);
        let t1 = synth::smooth_scalar(2, 400, 4);
        let t2 = synth::smooth_scalar(3, 400, 4);
        let templates = vec![
            ("a".to_string(), t0.clone()),
            ("b".to_string(), t1.clone()),
            ("c".to_string(), t2),
        ];
        let c = classify_nearest(&t1, &templates, Method::Ust).unwrap();
        assert_eq!((c.label.as_str(), c.index, c.score), ("b", 1, 0.0));
        assert_eq!(c.scores.len(), 3);

        let w = random_warp(TimeGrid::new(400).unwrap(), 5, 0.5).unwrap();
        let q = reparam::apply_warp(&t0, &w).unwrap();
        assert_eq!(classify_nearest(&q, &templates, Method::Ust).unwrap().label, "a");

        let single = vec![("only".to_string(), t0)];
        assert_eq!(classify_nearest(&t1, &single, Method::Dtw).unwrap().label, "only");
        assert!(matches!(
            classify_nearest(&t1, &[], Method::Raw),
            Err(Error::EmptyTemplateSet)
        ));
    }

    #[test]
    fn classify_tie_goes_to_first() {
        let t = synth::smooth_scalar(1, 50, 3);
        let templates = vec![("x".to_string(), t.clone()), ("y".to_string(), t.clone())];
        assert_eq!(classify_nearest(&t, &templates, Method::Raw).unwrap().index, 0);
    }

    fn body(seed: u64, n: usize) -> BodyTrajectory {
        BodyTrajectory::new(
            synth::smooth_se3(seed, n),
            synth::smooth_se3(seed + 1, n),
            synth::smooth_se3(seed + 2, n),
        )
        .unwrap()
    }

    #[test]
    fn relative_motion_removes_static_and_moving_pose() {
        let traj = body(10, 200);
        let rel = relative_motion_signal(&traj);
        let g0 = lie_se3::random_se3(4, 2.0);
        let moved = traj.left_act(|_| g0).unwrap();
        assert!(rel.sup_distance(&relative_motion_signal(&moved)).unwrap() < 1e-12);

        let gt = synth::smooth_se3(77, 200);
        let moving = traj.left_act(|k| gt.se3_at(k)).unwrap();
        let diff = rel
            .data()
            .iter()
            .zip(relative_motion_signal(&moving).data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn relative_motion_of_coincident_parts_is_identity() {
        let s = synth::smooth_se3(3, 20);
        let traj = BodyTrajectory::new(s.clone(), s.clone(), s).unwrap();
        let rel = relative_motion_signal(&traj);
        let id = Se3::identity();
        for k in 0..rel.len() {
            for j in 0..3 {
                assert!(lie_se3::metric_se3(&rel.se3_factor(k, j), &id).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_examples() {
        let c = Signal::from_se3(&vec![lie_se3::random_se3(1, 1.0); 10]).unwrap();
        let d = delta_signal(&c, 2).unwrap();
        assert_eq!(d.len(), 8);
        for k in 0..d.len() {
            assert!(lie_se3::metric_se3(&d.se3_at(k), &Se3::identity()).unwrap() < 1e-12);
        }

        let x = synth::smooth_se3(5, 100);
        let g0 = lie_se3::random_se3(6, 2.0);
        let gx = synth::left_multiply(&x, &g0);
        let a = delta_signal(&x, 3).unwrap();
        let b = delta_signal(&gx, 3).unwrap();
        assert!(a.sup_distance(&b).unwrap() < 1e-12);

        let xi = lie_se3::Twist::new(Vector3::new(0.1, -0.2, 0.05), Vector3::new(0.3, 0.0, -0.1));
        let poses: Vec<Se3> = (0..40).map(|k| lie_se3::exp_se3(&xi.scale(k as f64))).collect();
        let d = delta_signal(&Signal::from_se3(&poses).unwrap(), 4).unwrap();
        let expected = lie_se3::exp_se3(&xi.scale(4.0));
        for k in 0..d.len() {
            assert!(lie_se3::metric_se3(&d.se3_at(k), &expected).unwrap() < 1e-12);
        }
        assert!(matches!(
            delta_signal(&x, 99),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn screw_examples() {
        let c = Signal::from_se3(&vec![lie_se3::random_se3(2, 1.0); 6]).unwrap();
        let (theta, d) = screw_signal(&c, 1).unwrap();
        assert!(theta.scalars().unwrap().iter().all(|&x| x.abs() < 1e-12));
        assert!(d.scalars().unwrap().iter().all(|&x| x.abs() < 1e-12));

        let poses: Vec<Se3> = (0..12)
            .map(|k| Se3::from_axis_angle(Vector3::z(), k as f64 * PI / 4.0))
            .collect();
        let (theta, d) = screw_signal(&Signal::from_se3(&poses).unwrap(), 1).unwrap();
        assert!(theta.scalars().unwrap().iter().all(|&x| (x - PI / 4.0).abs() < 1e-12));
        assert!(d.scalars().unwrap().iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn screw_signal_conjugation_invariant() {
        let x = synth::smooth_se3(8, 60);
        for seed in 0..20 {
            let a = lie_se3::random_se3(seed, 2.0);
            let a_inv = a.inverse();
            let conj: Vec<Se3> = (0..x.len())
                .map(|k| a.compose(&x.se3_at(k)).compose(&a_inv))
                .collect();
            let (t1, d1) = screw_signal(&x, 2).unwrap();
            let (t2, d2) = screw_signal(&Signal::from_se3(&conj).unwrap(), 2).unwrap();
            assert!(t1.sup_distance(&t2).unwrap() < 1e-9);
            assert!(d1.sup_distance(&d2).unwrap() < 1e-9);
        }
    }

    #[test]
    fn quotient_distance_ignores_pose_and_warp() {
        let n = 2001;
        let traj = body(20, n);
        let w = random_warp(TimeGrid::new(n).unwrap(), 3, 0.5).unwrap();
        let g0 = lie_se3::random_se3(11, 2.0);
        let other = traj
            .map(|s| reparam::apply_warp(s, &w))
            .unwrap()
            .left_act(|_| g0)
            .unwrap();
        for q in [Quotient::Relative, Quotient::Screw] {
            assert_eq!(quotient_distance(&traj, &traj, q).unwrap().distance, 0.0);
            let d = quotient_distance(&traj, &other, q).unwrap().distance;
            assert!(d < 1e-2, "{q}: {d}");
        }
    }

    #[test]
    fn method_and_quotient_tags_round_trip() {
        for m in [Method::Raw, Method::Ust, Method::Dtw] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        for q in [Quotient::Relative, Quotient::Screw] {
            assert_eq!(q.to_string().parse::<Quotient>().unwrap(), q);
        }
        assert!("euclid".parse::<Method>().is_err());
    }

    proptest! {
        #[test]
        fn dtw_small_instances_match_oracle(seed in 0u64..5000, n in 2usize..7, m in 2usize..7) {
            let a = synth::smooth_scalar(seed, n, 2);
            let b = synth::smooth_scalar(seed ^ 0xabc, m, 2);
            prop_assert_eq!(dtw_distance(&a, &b).unwrap().distance, dtw_exhaustive(&a, &b));
        }
    }
}
