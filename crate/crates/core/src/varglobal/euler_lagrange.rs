use super::Profile;
use crate::error::{Error, Result};
use crate::metric_spaces::TimeGrid;
use crate::reparam;

/// A Lagrangian `L(q, q', t)` on `R^dim` with analytic partial derivatives.
pub trait Lagrangian {
    fn dim(&self) -> usize;
    fn value(&self, q: &[f64], qd: &[f64], t: f64) -> f64;
    /// `dL/dq` written into `out`.
    fn grad_q(&self, q: &[f64], qd: &[f64], t: f64, out: &mut [f64]);
    /// `dL/dq'` written into `out`.
    fn grad_qd(&self, q: &[f64], qd: &[f64], t: f64, out: &mut [f64]);
}

/// `L = g(x) x'^2` on the line.
#[derive(Clone, Debug)]
pub struct SpeedLagrangian {
    pub g: Profile,
}

impl Lagrangian for SpeedLagrangian {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, q: &[f64], qd: &[f64], _t: f64) -> f64 {
        self.g.eval(q[0]) * qd[0] * qd[0]
    }

    fn grad_q(&self, q: &[f64], qd: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = self.g.deriv(q[0]) * qd[0] * qd[0];
    }

    fn grad_qd(&self, q: &[f64], qd: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = 2.0 * self.g.eval(q[0]) * qd[0];
    }
}

/// Discrete action `sum_k h L(q_mid, dq/h, t_mid)` of a sampled trajectory
/// (`traj` is row-major, one row of `dim` values per sample).
pub fn action(lag: &impl Lagrangian, traj: &[f64]) -> Result<f64> {
    let (n, dim) = shape(lag, traj)?;
    let h = 1.0 / (n - 1) as f64;
    let mut q = vec![0.0; dim];
    let mut qd = vec![0.0; dim];
    let mut total = 0.0;
    for k in 0..n - 1 {
        midpoint_state(traj, dim, k, h, &mut q, &mut qd);
        total += h * lag.value(&q, &qd, (k as f64 + 0.5) * h);
    }
    Ok(total)
}

fn shape(lag: &impl Lagrangian, traj: &[f64]) -> Result<(usize, usize)> {
    let dim = lag.dim();
    if dim == 0 || !traj.len().is_multiple_of(dim) {
        return Err(Error::ShapeMismatch {
            expected: dim,
            got: traj.len(),
        });
    }
    let n = traj.len() / dim;
    if n < 5 {
        return Err(Error::GridTooSmall(n));
    }
    Ok((n, dim))
}

fn midpoint_state(traj: &[f64], dim: usize, k: usize, h: f64, q: &mut [f64], qd: &mut [f64]) {
    for i in 0..dim {
        let a = traj[k * dim + i];
        let b = traj[(k + 1) * dim + i];
        q[i] = 0.5 * (a + b);
        qd[i] = (b - a) / h;
    }
}

/// Sup-norm of the discrete Euler-Lagrange residual over interior samples.
pub fn el_residual(lag: &impl Lagrangian, traj: &[f64]) -> Result<f64> {
    el_residual_window(lag, traj, 0.0, 1.0)
}

/// Fourth-order first derivative of uniformly sampled values: five-point
/// central stencils inside, five-point one-sided stencils at the two ends.
fn derivative4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let f = values;
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    for k in 2..n - 2 {
        d[k] = (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * h);
    }
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * h);
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / (12.0 * h);
    d
}

/// As [`el_residual`], restricted to samples with `t` in `[t_min, t_max]`.
///
/// Velocities and the time derivative of the momentum `dL/dq'` use
/// fourth-order central differences, so the residual of a smooth exact
/// solution vanishes at fourth order. The residual is
/// `dL/dq - d/dt dL/dq'` at samples `2..n-3`; the two samples nearest each
/// end are excluded.
pub fn el_residual_window(lag: &impl Lagrangian, traj: &[f64], t_min: f64, t_max: f64) -> Result<f64> {
    let (n, dim) = shape(lag, traj)?;
    let h = 1.0 / (n - 1) as f64;
    let mut qd = vec![0.0; n * dim];
    let mut column = vec![0.0; n];
    for i in 0..dim {
        for k in 0..n {
            column[k] = traj[k * dim + i];
        }
        for (k, v) in derivative4(&column, h).into_iter().enumerate() {
            qd[k * dim + i] = v;
        }
    }
    let mut p = vec![0.0; n * dim];
    for k in 0..n {
        let t = k as f64 * h;
        lag.grad_qd(
            &traj[k * dim..(k + 1) * dim],
            &qd[k * dim..(k + 1) * dim],
            t,
            &mut p[k * dim..(k + 1) * dim],
        );
    }
    let mut force = vec![0.0; dim];
    let mut worst: f64 = 0.0;
    for k in 2..n - 2 {
        let t = k as f64 * h;
        if t < t_min || t > t_max {
            continue;
        }
        lag.grad_q(&traj[k * dim..(k + 1) * dim], &qd[k * dim..(k + 1) * dim], t, &mut force);
        for i in 0..dim {
            let at = |j: usize| p[j * dim + i];
            let dp = (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) / (12.0 * h);
            worst = worst.max((force[i] - dp).abs());
        }
    }
    Ok(worst)
}

/// Minimizer of `int g(x) x'^2 dt` with `x(0) = x0`, `x(1) = x1`, sampled on `grid`.
///
/// Maps the interval to `[0, 1]` and inverts the normalized cumulative
/// integral of `g^{1/2}` with [`reparam::optimal_warp_from_profile`].
pub fn speed_minimizer(g: &Profile, x0: f64, x1: f64, grid: TimeGrid, cells: usize) -> Result<Vec<f64>> {
    if x0 == x1 {
        return Ok(vec![x0; grid.len()]);
    }
    let span = x1 - x0;
    let sol = reparam::optimal_warp_from_profile(
        |u| g.eval(x0 + span * u).max(0.0).sqrt(),
        grid,
        cells,
    )?;
    let mut x: Vec<f64> = sol.warp.values().iter().map(|u| x0 + span * u).collect();
    x[0] = x0;
    *x.last_mut().expect("nonempty") = x1;
    Ok(x)
}
