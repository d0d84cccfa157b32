use nalgebra::{DMatrix, DVector};

use super::image::{Group, SyntheticImage};
use super::{fd_derivative, Chebyshev};
use crate::error::{Error, Result};
use crate::metric_spaces::{TimeGrid, Warp};
use crate::reparam;

/// Largest accepted condition number of `M`.
pub const MAX_CONDITION: f64 = 1e10;
/// Chebyshev points used to interpolate the residual profile in `tau`.
pub const PROFILE_NODES: usize = 129;
/// Quadrature cells used when inverting the cumulative profile.
pub const PROFILE_CELLS: usize = 256;

/// Samples of `M(tau)`, `b(tau)` and `c(tau)` defining
/// `f = 1/2 (xi^T M xi - 2 xi^T b tau' + c tau'^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGroupLagrangian {
    pub group: Group,
    pub tau: Vec<f64>,
    pub m: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
    pub c: Vec<f64>,
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

impl QuadraticGroupLagrangian {
    /// Checks shapes, symmetry and conditioning of every `M`, and `c >= 0`.
    pub fn new(
        group: Group,
        tau: Vec<f64>,
        m: Vec<DMatrix<f64>>,
        b: Vec<DVector<f64>>,
        c: Vec<f64>,
    ) -> Result<Self> {
        let n = tau.len();
        for len in [m.len(), b.len(), c.len()] {
            if len != n {
                return Err(Error::GridMismatch { left: n, right: len });
            }
        }
        let d = group.dim();
        for k in 0..n {
            if m[k].shape() != (d, d) || b[k].len() != d {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    got: b[k].len(),
                });
            }
            let scale = m[k].abs().max().max(f64::MIN_POSITIVE);
            if (&m[k] - m[k].transpose()).abs().max() > 1e-12 * scale {
                return Err(Error::NotPositiveDefinite(format!("M not symmetric at sample {k}")));
            }
            let cond = condition_number(&m[k]);
            if cond > MAX_CONDITION {
                return Err(Error::IllConditioned(cond));
            }
            if !(c[k] >= 0.0) {
                return Err(Error::InvalidArgument(format!("c < 0 at sample {k}")));
            }
        }
        Ok(Self { group, tau, m, b, c })
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Integrand in braces, `xi^T M xi - 2 tau' xi^T b + c tau'^2`, at sample `k`.
    pub fn quadratic_form(&self, k: usize, xi: &DVector<f64>, tau_dot: f64) -> f64 {
        xi.dot(&(&self.m[k] * xi)) - 2.0 * tau_dot * xi.dot(&self.b[k]) + self.c[k] * tau_dot * tau_dot
    }
}

/// `M`, `b` and `c` at one `tau` by midpoint quadrature over the image cells.
pub fn assemble_at(img: &SyntheticImage, group: Group, tau: f64) -> (DMatrix<f64>, DVector<f64>, f64) {
    let d = group.dim();
    let mut m = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    let mut c = 0.0;
    let mut g = [0.0; 3];
    img.for_each_cell(tau, |y, s| {
        for (i, gi) in g.iter_mut().enumerate().take(d) {
            let e = group.generator_action(i, y);
            *gi = s.grad[0] * e[0] + s.grad[1] * e[1];
        }
        for i in 0..d {
            for j in i..d {
                m[(i, j)] += g[i] * g[j];
            }
            b[i] += g[i] * s.dtau;
        }
        c += s.dtau * s.dtau;
    });
    let area = img.cell_area();
    for i in 0..d {
        for j in i..d {
            m[(i, j)] *= area;
            m[(j, i)] = m[(i, j)];
        }
    }
    (m, b * area, c * area)
}

/// Assembles the Lagrangian at every value of `tau`.
pub fn assemble_m_b_c(img: &SyntheticImage, group: Group, tau: &[f64]) -> Result<QuadraticGroupLagrangian> {
    img.validate()?;
    let mut ms = Vec::with_capacity(tau.len());
    let mut bs = Vec::with_capacity(tau.len());
    let mut cs = Vec::with_capacity(tau.len());
    for &t in tau {
        let (m, b, c) = assemble_at(img, group, t);
        ms.push(m);
        bs.push(b);
        cs.push(c);
    }
    QuadraticGroupLagrangian::new(group, tau.to_vec(), ms, bs, cs)
}

/// `M^-1 b` with one step of iterative refinement.
fn solve_refined(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::IllConditioned(condition_number(m)))?;
    let mut x = chol.solve(b);
    let r = b - m * &x;
    x += chol.solve(&r);
    Ok(x)
}

/// Free-boundary minimizer `xi*(t) = M(t)^-1 b(t)` at every sample.
pub fn ep_free_solution(lag: &QuadraticGroupLagrangian) -> Result<Vec<DVector<f64>>> {
    (0..lag.len()).map(|k| solve_refined(&lag.m[k], &lag.b[k])).collect()
}

/// Sup over interior samples of
/// `d/dt (M xi - b)_i + sum_jk (M xi - b)_k C_ij^k xi_j`, with `t = tau`.
pub fn ep_free_residual(lag: &QuadraticGroupLagrangian, xi: &[DVector<f64>]) -> Result<f64> {
    let n = lag.len();
    if xi.len() != n {
        return Err(Error::GridMismatch { left: n, right: xi.len() });
    }
    if n < 3 {
        return Err(Error::GridTooSmall(n));
    }
    let p: Vec<DVector<f64>> = (0..n).map(|k| &lag.m[k] * &xi[k] - &lag.b[k]).collect();
    let c = lag.group.structure_constants();
    let d = lag.group.dim();
    let mut worst: f64 = 0.0;
    for k in 1..n - 1 {
        let dt = lag.tau[k + 1] - lag.tau[k - 1];
        for i in 0..d {
            let mut r = (p[k + 1][i] - p[k - 1][i]) / dt;
            for j in 0..d {
                for l in 0..d {
                    r += p[k][l] * c[i][j][l] * xi[k][j];
                }
            }
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// Pointwise `g2 = 1/2 (c - b^T M^-1 b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct G2Profile {
    /// Values after clamping at zero.
    pub values: Vec<f64>,
    /// Unclamped values.
    pub raw: Vec<f64>,
    /// Samples where the raw value was negative and got clamped.
    pub clamped: Vec<usize>,
}

fn schur(m: &DMatrix<f64>, b: &DVector<f64>, c: f64) -> Result<f64> {
    let xi = solve_refined(m, b)?;
    Ok(0.5 * (c - b.dot(&xi)))
}

pub fn g2_profile(lag: &QuadraticGroupLagrangian) -> Result<G2Profile> {
    let raw = (0..lag.len())
        .map(|k| schur(&lag.m[k], &lag.b[k], lag.c[k]))
        .collect::<Result<Vec<f64>>>()?;
    let clamped = raw
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .map(|(k, _)| k)
        .collect();
    let values = raw.iter().map(|v| v.max(0.0)).collect();
    Ok(G2Profile { values, raw, clamped })
}

/// Output of the sequential construction: group velocity first, then the warp.
#[derive(Clone, Debug)]
pub struct Theorem3Solution {
    pub grid: TimeGrid,
    /// Lagrangian on the uniform `tau` grid.
    pub lag: QuadraticGroupLagrangian,
    /// `xi1*(tau) = M^-1 b` on the uniform grid.
    pub xi1_star: Vec<DVector<f64>>,
    pub g2: G2Profile,
    /// Optimal warp for the profile `g2`.
    pub tau2: Warp,
    /// Finite-difference `tau2'`.
    pub tau2_rate: Vec<f64>,
    /// Lagrangian sampled at `tau2(t_k)`.
    pub lag_at_tau2: QuadraticGroupLagrangian,
    /// `xi(t) = xi1*(tau2(t)) tau2'(t)`.
    pub xi_combined: Vec<DVector<f64>>,
    /// Truncation proxy of the interpolated profile.
    pub profile_tail: f64,
}

/// Free minimizer in `xi`, then the time warp minimizing `int g2(tau) tau'^2`,
/// then `xi = xi1*(tau2) tau2'`.
///
/// The profile `g2` is interpolated on Chebyshev points in `tau` so the warp
/// is smooth in `t`. A profile that vanishes everywhere (motion fully
/// explained by the group) makes every warp optimal; the identity is returned.
pub fn theorem3_pipeline(img: &SyntheticImage, group: Group, samples: usize) -> Result<Theorem3Solution> {
    let grid = TimeGrid::new(samples)?;
    if samples < 3 {
        return Err(Error::GridTooSmall(samples));
    }
    let lag = assemble_m_b_c(img, group, &grid.times())?;
    let xi1_star = ep_free_solution(&lag)?;
    let g2 = g2_profile(&lag)?;

    let profile_at = |tau: f64| {
        let (m, b, c) = assemble_at(img, group, tau);
        schur(&m, &b, c).map(|v| v.max(0.0))
    };
    let mut nodes_err = None;
    let cheb = Chebyshev::fit(PROFILE_NODES, |tau| match profile_at(tau) {
        Ok(v) => v,
        Err(e) => {
            nodes_err.get_or_insert(e);
            0.0
        }
    });
    if let Some(e) = nodes_err {
        return Err(e);
    }
    let c_scale = lag.c.iter().fold(0.0_f64, |a, v| a.max(*v));
    let g2_max = g2.values.iter().fold(0.0_f64, |a, v| a.max(*v));
    let tau2 = if g2_max <= 1e-13 * (1.0 + c_scale) {
        Warp::identity(grid)
    } else {
        reparam::optimal_warp_from_profile(|tau| cheb.eval(tau).max(0.0).sqrt(), grid, PROFILE_CELLS)?.warp
    };
    let tau2_rate = fd_derivative(tau2.values(), grid.step());
    let lag_at_tau2 = assemble_m_b_c(img, group, tau2.values())?;
    let xi_at = ep_free_solution(&lag_at_tau2)?;
    let xi_combined = xi_at.iter().zip(&tau2_rate).map(|(x, r)| x * *r).collect();
    Ok(Theorem3Solution {
        grid,
        lag,
        xi1_star,
        g2,
        tau2,
        tau2_rate,
        lag_at_tau2,
        xi_combined,
        profile_tail: cheb.tail(),
    })
}

/// Sup-norm residuals `(r1, r2)` of the joint stationarity equations along
/// `(xi(t), tau(t))`; `lag` must be sampled at `tau(t_k)`.
///
/// `r1` checks `d/dt (M xi - b tau')_i + sum_jk (M xi - b tau')_k C_ij^k xi_j = 0`
/// and `r2` checks
/// `d/dt (c tau' - xi^T b) = 1/2 xi^T M_tau xi - xi^T b_tau tau' + 1/2 c_tau tau'^2`. Time derivatives are central differences on the
/// uniform `t` grid; `tau`-derivatives are central differences in `tau`.
/// The sup skips the two samples nearest each end, whose stencils would
/// reach the one-sided endpoint rates.
pub fn coupled_residuals(lag: &QuadraticGroupLagrangian, xi: &[DVector<f64>], tau: &Warp) -> Result<(f64, f64)> {
    let n = lag.len();
    if tau.len() != n || xi.len() != n {
        return Err(Error::GridMismatch {
            left: n,
            right: if tau.len() != n { tau.len() } else { xi.len() },
        });
    }
    if n < 5 {
        return Err(Error::GridTooSmall(n));
    }
    let off = lag
        .tau
        .iter()
        .zip(tau.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if off > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "Lagrangian is not sampled at the warp values (off by {off:e})"
        )));
    }
    let h = 1.0 / (n - 1) as f64;
    let rate = fd_derivative(tau.values(), h);
    let d = lag.group.dim();
    let c = lag.group.structure_constants();
    let p: Vec<DVector<f64>> = (0..n).map(|k| &lag.m[k] * &xi[k] - &lag.b[k] * rate[k]).collect();
    let q: Vec<f64> = (0..n).map(|k| lag.c[k] * rate[k] - xi[k].dot(&lag.b[k])).collect();
    let (mut r1, mut r2): (f64, f64) = (0.0, 0.0);
    for k in 2..n - 2 {
        for i in 0..d {
            let mut r = (p[k + 1][i] - p[k - 1][i]) / (2.0 * h);
            for j in 0..d {
                for l in 0..d {
                    r += p[k][l] * c[i][j][l] * xi[k][j];
                }
            }
            r1 = r1.max(r.abs());
        }
        let dtau = lag.tau[k + 1] - lag.tau[k - 1];
        let dm = (&lag.m[k + 1] - &lag.m[k - 1]) / dtau;
        let db = (&lag.b[k + 1] - &lag.b[k - 1]) / dtau;
        let dc = (lag.c[k + 1] - lag.c[k - 1]) / dtau;
        let lhs = (q[k + 1] - q[k - 1]) / (2.0 * h);
        let rhs = 0.5 * xi[k].dot(&(&dm * &xi[k])) - xi[k].dot(&db) * rate[k] + 0.5 * dc * rate[k] * rate[k];
        r2 = r2.max((lhs - rhs).abs());
    }
    Ok((r1, r2))
}

/// Sup over samples of the gap between the quadratic form and its completed-square form
/// `xi^T (M - b b^T / c) xi + c (tau' - xi^T b / c)^2`.
pub fn completed_square_identity(lag: &QuadraticGroupLagrangian, xi: &[DVector<f64>], tau_dot: &[f64]) -> Result<f64> {
    let n = lag.len();
    if xi.len() != n || tau_dot.len() != n {
        return Err(Error::GridMismatch {
            left: n,
            right: xi.len().min(tau_dot.len()),
        });
    }
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let c = lag.c[k];
        if c == 0.0 {
            return Err(Error::ZeroQuadraticCoefficient(k));
        }
        let x = &xi[k];
        let xb = x.dot(&lag.b[k]);
        let direct = lag.quadratic_form(k, x, tau_dot[k]);
        let shifted = x.dot(&(&lag.m[k] * x)) - xb * xb / c + c * (tau_dot[k] - xb / c).powi(2);
        worst = worst.max((direct - shifted).abs());
    }
    Ok(worst)
}

/// Midpoint-rule `C2 = 1/2 int (xi^T M xi - 2 xi^T b tau' + c tau'^2) dt` along
/// sampled `(xi, tau)`, assembling the image terms at segment midpoints.
pub fn c2_cost(img: &SyntheticImage, group: Group, xi: &[DVector<f64>], tau: &Warp) -> Result<f64> {
    let n = tau.len();
    if xi.len() != n {
        return Err(Error::GridMismatch { left: n, right: xi.len() });
    }
    let h = 1.0 / (n - 1) as f64;
    let t = tau.values();
    let mut total = 0.0;
    for k in 0..n - 1 {
        let mid = 0.5 * (t[k] + t[k + 1]);
        let rate = (t[k + 1] - t[k]) / h;
        let x = (&xi[k] + &xi[k + 1]) * 0.5;
        let (m, b, c) = assemble_at(img, group, mid);
        total += 0.5 * h * (x.dot(&(&m * &x)) - 2.0 * rate * x.dot(&b) + c * rate * rate);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varglobal::image::{Blob, Poly};

    fn uniform_tau(n: usize) -> Vec<f64> {
        TimeGrid::new(n).unwrap().times()
    }

    #[test]
    fn static_image_has_no_drive() {
        let mut img = SyntheticImage::seeded(1);
        for b in &mut img.blobs {
            b.center_x.0.truncate(1);
            b.center_y.0.truncate(1);
            b.amplitude.0.truncate(1);
            b.width.0.truncate(1);
        }
        img.background = Poly::constant(0.1);
        let lag = assemble_m_b_c(&img, Group::Se2, &uniform_tau(5)).unwrap();
        for k in 0..5 {
            assert_eq!(lag.b[k].amax(), 0.0);
            assert_eq!(lag.c[k], 0.0);
        }
    }

    #[test]
    fn recovers_translation_velocity() {
        // Content moving at v gives xi* = -v: the group motion that undoes it.
        for v in [[1.0, 0.0], [-1.0, 0.0], [0.4, -0.7]] {
            let img = SyntheticImage::translating_blob(v);
            let lag = assemble_m_b_c(&img, Group::Translation2, &uniform_tau(11)).unwrap();
            for xi in ep_free_solution(&lag).unwrap() {
                assert!((xi[0] + v[0]).abs() < 1e-3 && (xi[1] + v[1]).abs() < 1e-3, "{xi}");
            }
        }
    }

    #[test]
    fn explained_motion_has_zero_profile() {
        let img = SyntheticImage::translating_blob([0.5, 0.2]);
        let lag = assemble_m_b_c(&img, Group::Translation2, &uniform_tau(21)).unwrap();
        let g2 = g2_profile(&lag).unwrap();
        let scale = lag.c.iter().cloned().fold(0.0, f64::max);
        assert!(g2.raw.iter().all(|v| v.abs() < 1e-12 * scale.max(1.0)), "{:?}", g2.raw);
    }

    #[test]
    fn identity_and_zero_drive_cases() {
        let n = 6;
        let tau = uniform_tau(n);
        let m = vec![DMatrix::identity(2, 2); n];
        let b = vec![DVector::from_vec(vec![0.3, -1.2]); n];
        let lag = QuadraticGroupLagrangian::new(Group::Translation2, tau.clone(), m.clone(), b.clone(), vec![2.0; n]).unwrap();
        for xi in ep_free_solution(&lag).unwrap() {
            assert_eq!(xi, b[0]);
        }
        let g2 = g2_profile(&lag).unwrap();
        let expected = 0.5 * (2.0 - b[0].norm_squared());
        assert!(g2.values.iter().all(|v| (v - expected).abs() < 1e-15));

        let zero = QuadraticGroupLagrangian::new(Group::Translation2, tau, m, vec![DVector::zeros(2); n], vec![3.0; n]).unwrap();
        assert!(ep_free_solution(&zero).unwrap().iter().all(|x| x.amax() == 0.0));
        assert!(g2_profile(&zero).unwrap().values.iter().all(|v| *v == 1.5));
    }

    #[test]
    fn rejects_ill_conditioned_m() {
        let m = vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12]); 3];
        let r = QuadraticGroupLagrangian::new(Group::Translation2, uniform_tau(3), m, vec![DVector::zeros(2); 3], vec![1.0; 3]);
        assert!(matches!(r, Err(Error::IllConditioned(_))));
    }

    #[test]
    fn free_solution_is_stationary() {
        for (seed, group) in [(1, Group::Se2), (2, Group::Translation2), (3, Group::Se2)] {
            let img = SyntheticImage::seeded(seed);
            let lag = assemble_m_b_c(&img, group, &uniform_tau(200)).unwrap();
            let xi = ep_free_solution(&lag).unwrap();
            let r = ep_free_residual(&lag, &xi).unwrap();
            assert!(r < 1e-12, "seed {seed}: {r}");
            let g2 = g2_profile(&lag).unwrap();
            assert!(g2.raw.iter().all(|v| *v >= -1e-12));
        }
    }

    #[test]
    fn uniform_scene_keeps_identity_warp() {
        let img = SyntheticImage::uniform_scene();
        let sol = theorem3_pipeline(&img, Group::Translation2, 101).unwrap();
        assert!(sol.tau2.deviation_from_identity() < 1e-6, "{}", sol.tau2.deviation_from_identity());
        for (a, b) in sol.xi_combined.iter().zip(&sol.xi1_star) {
            assert!((a - b).amax() < 1e-5);
        }
    }

    #[test]
    fn fully_explained_scene_keeps_identity_warp() {
        let img = SyntheticImage::translating_blob([0.5, 0.0]);
        let sol = theorem3_pipeline(&img, Group::Translation2, 41).unwrap();
        assert_eq!(sol.tau2, Warp::identity(sol.grid));
    }

    #[test]
    fn front_loaded_scene_slows_down_early() {
        let img = SyntheticImage::front_loaded_scene();
        let sol = theorem3_pipeline(&img, Group::Se2, 201).unwrap();
        assert!(sol.tau2.eval(0.5) < 0.5);
        let seq = c2_cost(&img, Group::Se2, &sol.xi_combined, &sol.tau2).unwrap();
        let plain = c2_cost(&img, Group::Se2, &sol.xi1_star, &Warp::identity(sol.grid)).unwrap();
        assert!(seq <= plain, "{seq} vs {plain}");
    }

    #[test]
    fn coupled_residuals_trivial_constant_case() {
        let n = 21;
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 1.0]);
        let b = DVector::from_vec(vec![0.4, -0.3, 0.8]);
        let lag = QuadraticGroupLagrangian::new(Group::Se2, uniform_tau(n), vec![m.clone(); n], vec![b.clone(); n], vec![2.0; n]).unwrap();
        let xi = vec![m.cholesky().unwrap().solve(&b); n];
        let (r1, r2) = coupled_residuals(&lag, &xi, &Warp::identity(TimeGrid::new(n).unwrap())).unwrap();
        assert!(r1 < 1e-10 && r2 < 1e-10, "{r1} {r2}");
    }

    #[test]
    fn coupled_residuals_converge() {
        let img = SyntheticImage::seeded(4);
        let res = |n| {
            let sol = theorem3_pipeline(&img, Group::Se2, n).unwrap();
            coupled_residuals(&sol.lag_at_tau2, &sol.xi_combined, &sol.tau2).unwrap()
        };
        let (a1, a2) = res(250);
        let (b1, b2) = res(500);
        assert!(a1 < 1e-10 && b1 < 1e-10, "{a1} {b1}");
        assert!(a2 / b2 >= 1.8, "{a2} {b2}");
    }

    #[test]
    fn completed_square_examples() {
        let img = SyntheticImage::seeded(2);
        let lag = assemble_m_b_c(&img, Group::Se2, &uniform_tau(30)).unwrap();
        let xi: Vec<DVector<f64>> = (0..30).map(|k| DVector::from_vec(vec![0.1 * k as f64, -0.3, 0.7])).collect();
        let rate: Vec<f64> = (0..30).map(|k| 0.5 + 0.05 * k as f64).collect();
        assert!(completed_square_identity(&lag, &xi, &rate).unwrap() < 1e-12);

        let zero = vec![DVector::zeros(3); 30];
        for k in 0..30 {
            assert_eq!(lag.quadratic_form(k, &zero[k], rate[k]), lag.c[k] * rate[k] * rate[k]);
        }
        let aligned: Vec<f64> = (0..30).map(|k| xi[k].dot(&lag.b[k]) / lag.c[k]).collect();
        for k in 0..30 {
            let x = &xi[k];
            let xb = x.dot(&lag.b[k]);
            let second = lag.c[k] * (aligned[k] - xb / lag.c[k]).powi(2);
            assert_eq!(second, 0.0);
        }

        let mut still = SyntheticImage::translating_blob([0.0, 0.0]);
        still.blobs.push(Blob {
            center_x: Poly::constant(1.0),
            center_y: Poly::constant(0.0),
            amplitude: Poly::constant(1.0),
            width: Poly::constant(0.5),
        });
        let lag = assemble_m_b_c(&still, Group::Translation2, &uniform_tau(3)).unwrap();
        assert!(matches!(
            completed_square_identity(&lag, &vec![DVector::zeros(2); 3], &[1.0; 3]),
            Err(Error::ZeroQuadraticCoefficient(0))
        ));
    }
}
