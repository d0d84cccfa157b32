//! Deterministic smooth random signals for tests, benchmarks and demos.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::lie_se3::{self, Se3, Twist};
use crate::metric_spaces::{Signal, Space, TimeGrid};

/// Random trigonometric polynomial `sum_m a_m sin(m pi t + phi_m) / m`.
#[derive(Clone, Debug)]
pub struct SmoothField {
    terms: Vec<(f64, f64)>,
}

impl SmoothField {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, modes: usize) -> Self {
        let terms = (0..modes)
            .map(|_| (rng.random_range(-1.0..=1.0), rng.random::<f64>() * 2.0 * PI))
            .collect();
        Self { terms }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(m, (a, phi))| {
                let k = (m + 1) as f64;
                a * (k * PI * t + phi).sin() / k
            })
            .sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(m, (a, phi))| {
                let k = (m + 1) as f64;
                a * PI * (k * PI * t + phi).cos()
            })
            .sum()
    }
}

/// Smooth scalar signal with `modes` random Fourier modes plus a random linear trend.
pub fn smooth_scalar(seed: u64, n: usize, modes: usize) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = SmoothField::random(&mut rng, modes.max(1));
    let trend: f64 = rng.random_range(-1.0..=1.0);
    let grid = TimeGrid::new(n).expect("n >= 2");
    let values = (0..n)
        .map(|k| {
            let t = grid.t(k);
            field.eval(t) + trend * t
        })
        .collect();
    Signal::from_scalars(values).expect("valid")
}

/// Smooth curve in `R^dim` whose speed stays bounded away from zero.
///
/// The velocity is a fixed random direction of norm 1 plus a smooth
/// perturbation of norm at most 0.5, integrated with the trapezoid rule.
pub fn smooth_curve(seed: u64, n: usize, dim: usize) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = dim.max(1);
    let base: Vec<f64> = {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
        v.iter().map(|x| x / norm).collect()
    };
    let fields: Vec<SmoothField> = (0..dim).map(|_| SmoothField::random(&mut rng, 3)).collect();
    // |derivative| <= pi * (1 + 1 + 1) per component.
    let limit = 0.5 / (3.0 * PI * (dim as f64).sqrt());
    let velocity = |t: f64| -> Vec<f64> {
        (0..dim)
            .map(|i| base[i] + limit * fields[i].derivative(t))
            .collect()
    };
    let grid = TimeGrid::new(n).expect("n >= 2");
    let h = grid.step();
    let mut data = Vec::with_capacity(n * dim);
    let mut x = vec![0.0; dim];
    let mut prev = velocity(0.0);
    data.extend_from_slice(&x);
    for k in 1..n {
        let v = velocity(grid.t(k));
        for i in 0..dim {
            x[i] += 0.5 * h * (prev[i] + v[i]);
        }
        data.extend_from_slice(&x);
        prev = v;
    }
    Signal::new(Space::Vector(dim), data).expect("valid")
}

/// Smooth SE(3) trajectory integrated from a body velocity that never vanishes.
pub fn smooth_se3(seed: u64, n: usize) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = lie_se3::random_se3_with(&mut rng, 1.0);
    let base = lie_se3::random_twist_with(&mut rng, 1.5, 1.0);
    let base = if base.frobenius_norm() < 0.5 {
        Twist::new(base.omega, base.v + Vector3::new(0.5, 0.0, 0.0))
    } else {
        base
    };
    let fields: Vec<SmoothField> = (0..6).map(|_| SmoothField::random(&mut rng, 3)).collect();
    let amp = 0.25 * base.frobenius_norm() / (3.0 * 6f64.sqrt());
    let twist_at = |t: f64| {
        let b = base.to_array();
        let mut xi = [0.0; 6];
        for i in 0..6 {
            xi[i] = b[i] + amp * fields[i].eval(t) * 3.0;
        }
        Twist::from_array(xi)
    };
    let grid = TimeGrid::new(n).expect("n >= 2");
    let h = grid.step();
    let mut poses = Vec::with_capacity(n);
    let mut x = start;
    poses.push(x);
    for k in 1..n {
        let xi = twist_at(grid.t(k) - 0.5 * h).scale(h);
        x = lie_se3::compose(&x, &lie_se3::exp_se3(&xi));
        poses.push(x);
    }
    Signal::from_se3(&poses).expect("valid")
}

/// Left-multiplies every sample of an SE(3) signal by `g`.
pub fn left_multiply(signal: &Signal, g: &Se3) -> Signal {
    let poses: Vec<Se3> = (0..signal.len())
        .map(|k| lie_se3::compose(g, &signal.se3_at(k)))
        .collect();
    Signal::from_se3(&poses).expect("valid")
}
