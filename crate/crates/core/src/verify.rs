//! Invariant battery for the three optimality results, run on a chosen grid.
//!
//! Absolute tolerances are pinned at `N = 2001` and relaxed on coarser grids
//! by `(2000 / (N - 1))^p`, where `p` is the convergence order of the
//! quantity. Order checks compare the grid against one about half as fine.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric_spaces::{random_warp_with, Signal, TimeGrid, Warp};
use crate::reparam::{functional_cost, ust, UstOptions};
use crate::synth;
use crate::varglobal::{
    assemble_m_b_c, bootstrap_cost, bootstrap_solution, c2_cost, completed_square_identity,
    coupled_residuals, el_residual, el_residual_window, ep_free_residual, ep_free_solution,
    g2_profile, theorem3_pipeline, BootstrapProblem, Group, Profile, SpeedLagrangian, SyntheticImage,
};

pub const DEFAULT_GRID: usize = 2001;
const REFERENCE_GRID: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Theorem {
    One,
    Two,
    Three,
}

impl Theorem {
    pub const ALL: [Theorem; 3] = [Theorem::One, Theorem::Two, Theorem::Three];
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Theorem::One => 1,
            Theorem::Two => 2,
            Theorem::Three => 3,
        };
        write!(f, "theorem{n}")
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "t1" | "theorem1" => Ok(Theorem::One),
            "2" | "t2" | "theorem2" => Ok(Theorem::Two),
            "3" | "t3" | "theorem3" => Ok(Theorem::Three),
            other => Err(Error::InvalidArgument(format!(
                "unknown theorem '{other}' (expected theorem1, theorem2 or theorem3)"
            ))),
        }
    }
}

/// How a measured value is compared with its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Bound {
    /// Pass when `value <= threshold`.
    AtMost,
    /// Pass when `value >= threshold`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub theorem: Theorem,
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn new(theorem: Theorem, name: impl Into<String>, value: f64, bound: Bound, threshold: f64) -> Self {
        let passed = match bound {
            Bound::AtMost => value <= threshold,
            Bound::AtLeast => value >= threshold,
        };
        Self {
            theorem,
            name: name.into(),
            value,
            bound,
            threshold,
            passed: passed && !value.is_nan(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        write!(
            f,
            "{} {:<9} {:<40} {:>12.4e} {op} {:.4e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.theorem.to_string(),
            self.name,
            self.value,
            self.threshold
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub grid: usize,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Tolerance pinned at the reference grid, relaxed on coarser grids at the given order.
pub fn scaled_tolerance(base: f64, grid: usize, order: i32) -> f64 {
    let ratio = (REFERENCE_GRID - 1) as f64 / (grid.max(2) - 1) as f64;
    base * ratio.max(1.0).powi(order)
}

fn coarse(grid: usize) -> usize {
    (grid - 1) / 2 + 1
}

pub fn run(theorems: &[Theorem], grid: usize) -> Result<VerifyReport> {
    if grid < 11 {
        return Err(Error::InvalidArgument(format!("grid must have at least 11 samples, got {grid}")));
    }
    let mut checks = Vec::new();
    for th in theorems {
        checks.extend(match th {
            Theorem::One => theorem1(grid)?,
            Theorem::Two => theorem2(grid)?,
            Theorem::Three => theorem3(grid)?,
        });
    }
    Ok(VerifyReport { grid, checks })
}

fn sqrt_error(n: usize) -> Result<(f64, f64)> {
    let x = Signal::from_fn(n, |t| t * t)?;
    let r = ust(&x, UstOptions::default())?;
    let grid = TimeGrid::new(n)?;
    let err = (0..n)
        .map(|k| (r.warp_star.values()[k] - grid.t(k).sqrt()).abs())
        .fold(0.0, f64::max);
    Ok((err, r.total_length))
}

fn theorem1(grid: usize) -> Result<Vec<Check>> {
    let th = Theorem::One;
    let mut out = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..20u64 {
        let x = if i % 2 == 0 {
            synth::smooth_scalar(100 + i, grid, 5)
        } else {
            synth::smooth_se3(100 + i, grid)
        };
        let star = ust(&x, UstOptions::default())?;
        let j_star = functional_cost(&x, &star.warp_star)?;
        let y = random_warp_with(&mut rng, x.grid(), 0.6)?;
        let j_y = functional_cost(&x, &y)?;
        worst = worst.max(j_star - (j_y * (1.0 + 1e-6) + 1e-9));
    }
    out.push(Check::new(th, "J(tau*) - J(y) slack, 20 random pairs", worst, Bound::AtMost, 0.0));

    let (err, c) = sqrt_error(grid)?;
    let (err_coarse, _) = sqrt_error(coarse(grid))?;
    out.push(Check::new(th, "t^2 oracle: sup |tau* - sqrt t|", err, Bound::AtMost, scaled_tolerance(1e-3, grid, 1)));
    out.push(Check::new(th, "t^2 oracle: |c - 1|", (c - 1.0).abs(), Bound::AtMost, 1e-4));
    out.push(Check::new(th, "t^2 oracle: refinement ratio", err_coarse / err, Bound::AtLeast, 1.8));

    let lag = SpeedLagrangian {
        g: Profile::new(|x| 4.0 * x * x, |x| 8.0 * x),
    };
    let residual = |n: usize| -> Result<f64> {
        let x: Vec<f64> = TimeGrid::new(n)?.times().iter().map(|t| t.sqrt()).collect();
        el_residual_window(&lag, &x, 0.1, 1.0)
    };
    let (r, r_coarse) = (residual(grid)?, residual(coarse(grid))?);
    out.push(Check::new(th, "EL residual of sqrt t on [0.1, 1]", r, Bound::AtMost, scaled_tolerance(1e-6, grid, 4)));
    out.push(Check::new(th, "EL residual refinement ratio", r_coarse / r, Bound::AtLeast, 3.5));
    let line = SpeedLagrangian { g: Profile::constant(1.0) };
    let r_line = el_residual(&line, &TimeGrid::new(129)?.times())?;
    out.push(Check::new(th, "EL residual of straight line", r_line, Bound::AtMost, 1e-12));
    Ok(out)
}

/// Adds `amp sin(j pi t)` bumps to every coordinate, keeping the endpoints.
fn perturb(values: &[f64], width: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = values.len() / width;
    let mut out = values.to_vec();
    for i in 0..width {
        let j = rng.random_range(1..5) as f64;
        let amp = rng.random_range(-0.1..0.1);
        for k in 1..n - 1 {
            let t = k as f64 / (n - 1) as f64;
            out[k * width + i] += amp * (j * std::f64::consts::PI * t).sin();
        }
    }
    out
}

fn theorem2(grid: usize) -> Result<Vec<Check>> {
    let th = Theorem::Two;
    let mut residual: f64 = 0.0;
    let mut decrease: f64 = f64::NEG_INFINITY;
    let mut identity: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..6 {
        let p = BootstrapProblem::random_scalar(seed);
        let sol = bootstrap_solution(&p, grid)?;
        residual = residual.max(el_residual(&p, &sol.q())?);
        let best = bootstrap_cost(&p, &sol.x, &sol.s)?;
        let w = p.weight.eval(0.0)[(0, 0)];
        identity = identity.max((best.coupling - 0.5 * sol.a[0] * sol.a[0] / w).abs());
        for _ in 0..5 {
            let x = perturb(&sol.x, 1, &mut rng);
            let s = perturb(&sol.s, 1, &mut rng);
            let c = bootstrap_cost(&p, &x, &s)?;
            decrease = decrease.max(best.total() - c.total());
        }
    }
    Ok(vec![
        Check::new(th, "composite EL residual along (x*, s*)", residual, Bound::AtMost, scaled_tolerance(1e-6, grid, 4)),
        Check::new(th, "cost decrease under 30 perturbations", decrease, Bound::AtMost, 1e-9),
        Check::new(th, "|coupling cost - a^2 / (2w)|", identity, Bound::AtMost, 1e-8),
    ])
}

/// Random admissible pair: a random warp and `M^-1 b tau'` plus a smooth bump.
fn candidate(img: &SyntheticImage, group: Group, grid: TimeGrid, rng: &mut ChaCha8Rng) -> Result<(Vec<DVector<f64>>, Warp)> {
    let tau = random_warp_with(rng, grid, 0.6)?;
    let lag = assemble_m_b_c(img, group, tau.values())?;
    let xi = ep_free_solution(&lag)?;
    let rate = crate::varglobal::fd_derivative(tau.values(), grid.step());
    let amp: f64 = if rng.random::<bool>() { 0.0 } else { rng.random_range(0.05..0.5) };
    let freq = rng.random_range(1..4) as f64;
    let out = xi
        .iter()
        .zip(&rate)
        .enumerate()
        .map(|(k, (x, r))| {
            let bump = amp * (freq * std::f64::consts::PI * grid.t(k)).sin();
            x * *r + DVector::from_element(x.len(), bump)
        })
        .collect();
    Ok((out, tau))
}

/// Result of the free-boundary and sequential checks on one scene.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SceneStudy {
    pub seed: u64,
    pub ep_residual: f64,
    pub g2_min: f64,
    pub r1: (f64, f64),
    pub r2: (f64, f64),
    pub completed_square: f64,
    pub sequential_cost: f64,
    pub best_candidate_cost: f64,
}

/// Runs the sequential construction on `SyntheticImage::seeded(seed)` at
/// `n` and `2n - 1` samples and compares against `candidates` random pairs.
pub fn scene_study(seed: u64, group: Group, n: usize, candidates: usize) -> Result<SceneStudy> {
    let img = SyntheticImage::seeded(seed);
    let coarse_sol = theorem3_pipeline(&img, group, n)?;
    let fine_sol = theorem3_pipeline(&img, group, 2 * n - 1)?;
    let (a1, a2) = coupled_residuals(&coarse_sol.lag_at_tau2, &coarse_sol.xi_combined, &coarse_sol.tau2)?;
    let (b1, b2) = coupled_residuals(&fine_sol.lag_at_tau2, &fine_sol.xi_combined, &fine_sol.tau2)?;
    let lag = &coarse_sol.lag;
    let ep_residual = ep_free_residual(lag, &coarse_sol.xi1_star)?;
    let g2_min = g2_profile(lag)?.raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let probe_xi: Vec<DVector<f64>> = (0..lag.len())
        .map(|_| DVector::from_fn(group.dim(), |_, _| rng.random_range(-2.0..2.0)))
        .collect();
    let probe_rate: Vec<f64> = (0..lag.len()).map(|_| rng.random_range(0.1..3.0)).collect();
    let completed_square = completed_square_identity(lag, &probe_xi, &probe_rate)?;
    let sequential_cost = c2_cost(&img, group, &coarse_sol.xi_combined, &coarse_sol.tau2)?;
    let mut best_candidate_cost = f64::INFINITY;
    for _ in 0..candidates {
        let (xi, tau) = candidate(&img, group, coarse_sol.grid, &mut rng)?;
        best_candidate_cost = best_candidate_cost.min(c2_cost(&img, group, &xi, &tau)?);
    }
    Ok(SceneStudy {
        seed,
        ep_residual,
        g2_min,
        r1: (a1, b1),
        r2: (a2, b2),
        completed_square,
        sequential_cost,
        best_candidate_cost,
    })
}

/// Refinement ratio of a residual pair, treating residuals below `floor` at
/// both resolutions as converged.
pub fn refinement_ratio(pair: (f64, f64), floor: f64) -> f64 {
    if pair.0 < floor && pair.1 < floor {
        f64::INFINITY
    } else {
        pair.0 / pair.1
    }
}

fn theorem3(grid: usize) -> Result<Vec<Check>> {
    let th = Theorem::Three;
    let n = (grid / 4).clamp(50, 500);
    let mut out = Vec::new();
    for seed in 1..=2u64 {
        let s = scene_study(seed, Group::Se2, n, 10)?;
        let tag = |what: &str| format!("scene {seed}: {what}");
        out.push(Check::new(th, tag("free-boundary EP residual"), s.ep_residual, Bound::AtMost, 1e-12));
        out.push(Check::new(th, tag("min g2"), s.g2_min, Bound::AtLeast, -1e-12));
        out.push(Check::new(th, tag("r1 refinement ratio"), refinement_ratio(s.r1, 1e-10), Bound::AtLeast, 1.8));
        out.push(Check::new(th, tag("r2 refinement ratio"), refinement_ratio(s.r2, 1e-10), Bound::AtLeast, 1.8));
        out.push(Check::new(th, tag("completed-square identity"), s.completed_square, Bound::AtMost, 1e-12));
        out.push(Check::new(
            th,
            tag("C2 sequential - best of 10"),
            s.sequential_cost - s.best_candidate_cost,
            Bound::AtMost,
            0.0,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem_names() {
        assert_eq!("theorem2".parse::<Theorem>().unwrap(), Theorem::Two);
        assert_eq!("3".parse::<Theorem>().unwrap(), Theorem::Three);
        assert!(matches!("theorem4".parse::<Theorem>(), Err(Error::InvalidArgument(_))));
        for t in Theorem::ALL {
            assert_eq!(t.to_string().parse::<Theorem>().unwrap(), t);
        }
    }

    #[test]
    fn tolerance_scaling() {
        assert_eq!(scaled_tolerance(1e-6, 2001, 2), 1e-6);
        assert_eq!(scaled_tolerance(1e-6, 4001, 2), 1e-6);
        assert!((scaled_tolerance(1.0, 1001, 2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_battery_passes() {
        let report = run(&Theorem::ALL, 50).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(run(&[Theorem::One], 5).is_err());
    }
}
