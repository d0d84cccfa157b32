//! Numerical verification of the bootstrapped optimality results: the
//! coupled `(x, s)` problem, Euler-Lagrange residuals, and the joint
//! nuisance-group / time-warp problem on synthetic image flows.

mod bootstrap;
mod euler_lagrange;
mod group_flow;
mod image;

pub use bootstrap::*;
pub use euler_lagrange::*;
pub use group_flow::*;
pub use image::*;

use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function of one variable together with its derivative.
#[derive(Clone)]
pub struct Profile {
    f: ScalarFn,
    df: ScalarFn,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Profile")
    }
}

impl Profile {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(move |_| v, |_| 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        (self.df)(x)
    }
}

/// First derivative of uniformly sampled values: central differences inside,
/// second-order one-sided differences at the two ends.
pub fn fd_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3, "need three samples");
    let mut d = Vec::with_capacity(n);
    d.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h));
    for k in 1..n - 1 {
        d.push((values[k + 1] - values[k - 1]) / (2.0 * h));
    }
    d.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h));
    d
}

/// Chebyshev interpolant on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates `f` at `n` Chebyshev points of the first kind.
    pub fn fit(n: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        let n = n.max(1);
        let pi = std::f64::consts::PI;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let u = ((2 * k + 1) as f64 * pi / (2 * n) as f64).cos();
                f(0.5 * (u + 1.0))
            })
            .collect();
        let coeffs = (0..n)
            .map(|j| {
                let s: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (j as f64 * (2 * k + 1) as f64 * pi / (2 * n) as f64).cos())
                    .sum();
                if j == 0 {
                    s / n as f64
                } else {
                    2.0 * s / n as f64
                }
            })
            .collect();
        Self { coeffs }
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let u = 2.0 * x - 1.0;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * u * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        u * b1 - b2 + self.coeffs[0]
    }

    /// Magnitude of the last few coefficients, a proxy for truncation error.
    pub fn tail(&self) -> f64 {
        self.coeffs.iter().rev().take(4).map(|c| c.abs()).fold(0.0, f64::max)
    }
}
