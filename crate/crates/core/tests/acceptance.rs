//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ust_core::bench;
use ust_core::demo::{self, DemoConfig};
use ust_core::lie_se3::{
    self, exp_se3, log_se3, metric_se3, random_se3_with, random_twist_with, screw_invariants, Se3, Twist,
};
use ust_core::matching::{dtw_distance, pointwise_distance, ust_distance, Quotient};
use ust_core::metric_spaces::{random_warp_with, Signal, TimeGrid, Warp};
use ust_core::reparam::{apply_warp, functional_cost, ust, UstOptions};
use ust_core::synth;
use ust_core::varglobal::{bootstrap_cost, bootstrap_solution, el_residual, BootstrapProblem, Group};
use ust_core::verify::{refinement_ratio, scene_study};
use ust_core::Result;

type Criterion = (&'static str, fn() -> Result<Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn global_optimality() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..200u64 {
        let x = if i % 2 == 0 {
            synth::smooth_scalar(1000 + i, 2001, 5)
        } else {
            synth::smooth_se3(1000 + i, 2001)
        };
        let star = ust(&x, UstOptions::default())?;
        let j_star = functional_cost(&x, &star.warp_star)?;
        let roughness = rng.random_range(0.05..0.9);
        let y = random_warp_with(&mut rng, x.grid(), roughness)?;
        let j_y = functional_cost(&x, &y)?;
        worst = worst.max(j_star - (j_y * (1.0 + 1e-6) + 1e-9));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 0.0 && secs < 60.0,
        format!("200 pairs, max J(tau*) - bound = {worst:.3e}, {secs:.1} s"),
    )
}

/// Sup error against `sqrt t`, the inverse of the closed-form `F(x) = x^2`.
fn sqrt_oracle(n: usize) -> Result<(f64, f64)> {
    let r = ust(&Signal::from_fn(n, |t| t * t)?, UstOptions::default())?;
    let grid = TimeGrid::new(n)?;
    let err = r
        .warp_star
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| (v - grid.t(k).sqrt()).abs())
        .fold(0.0, f64::max);
    Ok((err, r.total_length))
}

fn analytic_oracle() -> Result<Outcome> {
    let (err, c) = sqrt_oracle(1001)?;
    let (err_fine, _) = sqrt_oracle(2001)?;
    let ratio = err / err_fine;
    outcome(
        err < 1e-3 && (c - 1.0).abs() <= 1e-4 && ratio >= 1.8,
        format!("sup err {err:.3e}, c = {c:.10}, refinement ratio {ratio:.3}"),
    )
}

fn random_smooth(i: u64, n: usize) -> Signal {
    match i % 3 {
        0 => synth::smooth_scalar(500 + i, n, 5),
        1 => synth::smooth_curve(500 + i, n, 3),
        _ => synth::smooth_se3(500 + i, n),
    }
}

fn matching_soundness() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst_ust, mut min_raw): (f64, f64) = (0.0, f64::INFINITY);
    for i in 0..50u64 {
        let x = random_smooth(i, 2001);
        // Redraw the warp until the raw distance clears the floor.
        let mut fixture = None;
        for _ in 0..50 {
            let w: Warp = random_warp_with(&mut rng, x.grid(), 0.9)?;
            let xw = apply_warp(&x, &w)?;
            let raw = pointwise_distance(&x, &xw)?.distance;
            if raw > 0.05 {
                fixture = Some((xw, raw));
                break;
            }
        }
        let Some((xw, raw)) = fixture else {
            return outcome(false, format!("signal {i}: no warp reached raw distance 0.05"));
        };
        worst_ust = worst_ust.max(ust_distance(&x, &xw)?.distance);
        min_raw = min_raw.min(raw);
    }
    let report = demo::run(&DemoConfig::default(), Quotient::Relative)?;
    outcome(
        worst_ust < 1e-3 && min_raw > 0.05 && report.ust_accuracy >= 0.95,
        format!(
            "max ust {worst_ust:.3e}, min raw {min_raw:.3e}; demo accuracy ust {:.3}, dtw {:.3}",
            report.ust_accuracy, report.dtw_accuracy
        ),
    )
}

fn complexity() -> Result<Outcome> {
    let start = Instant::now();
    let report = bench::run(&bench::DEFAULT_UST_SIZES, &bench::DEFAULT_DTW_SIZES, 5, 7)?;
    let secs = start.elapsed().as_secs_f64();
    let (u, d) = (report.ust_slope.unwrap_or(f64::NAN), report.dtw_slope.unwrap_or(f64::NAN));
    outcome(
        (0.8..=1.3).contains(&u) && (1.7..=2.3).contains(&d) && secs < 600.0,
        format!("slope ust {u:.3}, slope dtw {d:.3}, {secs:.1} s"),
    )
}

/// Every monotone anchored path; smallest `(cost, length)`, cost over length.
fn dtw_enumerated(a: &[Se3], b: &[Se3]) -> f64 {
    fn walk(a: &[Se3], b: &[Se3], i: usize, j: usize, acc: f64, len: u64, best: &mut (f64, u64)) {
        let d = metric_se3(&a[i], &b[j]).unwrap();
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

fn twist_error(a: &Twist, b: &Twist) -> f64 {
    (a.omega - b.omega).norm().max((a.v - b.v).norm())
}

fn se3_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(505);

    let mut roundtrip: f64 = 0.0;
    for _ in 0..10_000 {
        let axis = lie_se3::random_unit_vector(&mut rng);
        let theta = rng.random_range(0.0..=3.0);
        let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..=2.0));
        let xi = Twist::new(axis * theta, v);
        roundtrip = roundtrip.max(twist_error(&log_se3(&exp_se3(&xi))?, &xi));
    }

    let mut invariance: f64 = 0.0;
    for _ in 0..10_000 {
        let g = random_se3_with(&mut rng, 2.0);
        let x = random_se3_with(&mut rng, 1.0);
        let y = lie_se3::compose(&x, &exp_se3(&random_twist_with(&mut rng, 2.5, 1.0)));
        let d = metric_se3(&x, &y)?;
        let dg = metric_se3(&g.compose(&x), &g.compose(&y))?;
        invariance = invariance.max((d - dg).abs());
    }

    let mut conjugation: f64 = 0.0;
    for _ in 0..1_000 {
        let g = random_se3_with(&mut rng, 2.0);
        let x = exp_se3(&random_twist_with(&mut rng, 3.0, 1.5));
        let s = screw_invariants(&x);
        let c = screw_invariants(&g.compose(&x).compose(&g.inverse()));
        conjugation = conjugation.max((s.theta - c.theta).abs().max((s.d - c.d).abs()));
    }

    let mut dtw_mismatches = 0;
    for _ in 0..200 {
        let (n, m) = (rng.random_range(2..=8), rng.random_range(2..=8));
        let a: Vec<Se3> = (0..n).map(|_| random_se3_with(&mut rng, 1.0)).collect();
        let b: Vec<Se3> = (0..m).map(|_| random_se3_with(&mut rng, 1.0)).collect();
        let got = dtw_distance(&Signal::from_se3(&a)?, &Signal::from_se3(&b)?)?.distance;
        if got != dtw_enumerated(&a, &b) {
            dtw_mismatches += 1;
        }
    }

    outcome(
        roundtrip < 1e-9 && invariance < 1e-10 && conjugation < 1e-9 && dtw_mismatches == 0,
        format!(
            "roundtrip {roundtrip:.2e}, left invariance {invariance:.2e}, screw {conjugation:.2e}, \
             dtw mismatches {dtw_mismatches}/200"
        ),
    )
}

/// Endpoint-preserving bump `amp sin(j pi t)`.
fn perturb(values: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = values.len();
    let j = rng.random_range(1..6) as f64;
    let amp = rng.random_range(-0.2..0.2);
    values
        .iter()
        .enumerate()
        .map(|(k, v)| v + amp * (j * PI * k as f64 / (n - 1) as f64).sin())
        .collect()
}

fn bootstrap_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut residual, mut decrease, mut identity): (f64, f64, f64) = (0.0, f64::NEG_INFINITY, 0.0);
    for seed in 0..10 {
        let p = BootstrapProblem::random_scalar(seed);
        let sol = bootstrap_solution(&p, 2001)?;
        residual = residual.max(el_residual(&p, &sol.q())?);
        let best = bootstrap_cost(&p, &sol.x, &sol.s)?;
        let w = p.weight.eval(0.0)[(0, 0)];
        identity = identity.max((best.coupling - 0.5 * sol.a[0] * sol.a[0] / w).abs());
        for i in 0..10 {
            let (x, s) = match i % 3 {
                0 => (perturb(&sol.x, &mut rng), sol.s.clone()),
                1 => (sol.x.clone(), perturb(&sol.s, &mut rng)),
                _ => (perturb(&sol.x, &mut rng), perturb(&sol.s, &mut rng)),
            };
            decrease = decrease.max(best.total() - bootstrap_cost(&p, &x, &s)?.total());
        }
    }
    outcome(
        residual < 1e-6 && decrease <= 1e-9 && identity <= 1e-8,
        format!("EL residual {residual:.2e}, max decrease {decrease:.2e} over 100, identity {identity:.2e}"),
    )
}

fn group_suite() -> Result<Outcome> {
    let mut passed = true;
    let mut lines = Vec::new();
    for (seed, group) in [(1, Group::Se2), (2, Group::Se2), (3, Group::Translation2)] {
        let s = scene_study(seed, group, 200, 50)?;
        let r1 = refinement_ratio(s.r1, 1e-10);
        let r2 = refinement_ratio(s.r2, 1e-10);
        passed &= s.ep_residual < 1e-12
            && s.g2_min >= -1e-12
            && r1 >= 1.8
            && r2 >= 1.8
            && s.sequential_cost <= s.best_candidate_cost
            && s.completed_square < 1e-12;
        lines.push(format!(
            "scene {seed}: ep {:.1e} g2min {:.1e} r1x {r1:.2} r2x {r2:.2} C2 {:.4e}<={:.4e} sq {:.1e}",
            s.ep_residual, s.g2_min, s.sequential_cost, s.best_candidate_cost, s.completed_square
        ));
    }
    outcome(passed, lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("global optimality fuzz", global_optimality),
        ("analytic t^2 oracle", analytic_oracle),
        ("matching soundness and demo", matching_soundness),
        ("complexity slopes", complexity),
        ("SE(3) suite", se3_suite),
        ("bootstrap suite", bootstrap_suite),
        ("group-flow suite", group_suite),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!passed);
        println!("{} criterion {}: {name}: {detail}", if passed { "PASS" } else { "FAIL" }, i + 1);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
