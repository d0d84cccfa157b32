use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

use super::euler_lagrange::{speed_minimizer, Lagrangian};
use super::Profile;
use crate::error::{Error, Result};
use crate::metric_spaces::TimeGrid;
use crate::reparam::{GL5_NODES, GL5_WEIGHTS};

/// Cells used by the base-problem quadrature.
pub const BASE_CELLS: usize = 256;
/// Tolerance of the numerical check `dA_ji/dx_k = dA_jk/dx_i`.
pub const COUPLING_SYMMETRY_TOL: f64 = 1e-6;

type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type PartialFn = Arc<dyn Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync>;

/// The `m x n` coupling matrix `A(x)` with its partial derivatives.
#[derive(Clone)]
pub struct Coupling {
    n: usize,
    m: usize,
    value: MatFn,
    partial: PartialFn,
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coupling({}x{})", self.m, self.n)
    }
}

impl Coupling {
    pub fn new(
        n: usize,
        m: usize,
        value: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        partial: impl Fn(&[f64], usize) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            m,
            value: Arc::new(value),
            partial: Arc::new(partial),
        }
    }

    pub fn constant(a: DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let zero = DMatrix::zeros(m, n);
        Self::new(n, m, move |_| a.clone(), move |_, _| zero.clone())
    }

    /// `1 x 1` coupling `A(x) = a(x)`.
    pub fn scalar(a: Profile) -> Self {
        let da = a.clone();
        Self::new(
            1,
            1,
            move |x| DMatrix::from_element(1, 1, a.eval(x[0])),
            move |x, _| DMatrix::from_element(1, 1, da.deriv(x[0])),
        )
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        (self.value)(x)
    }

    /// `dA / dx_k`.
    pub fn partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        (self.partial)(x, k)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }
}

/// Largest violation of `dA_ji/dx_k = dA_jk/dx_i` over `probes` seeded points
/// in the box `[lo, hi]`, using central differences of `A`.
pub fn coupling_asymmetry(a: &Coupling, lo: &[f64], hi: &[f64], probes: usize, seed: u64) -> f64 {
    let (m, n) = a.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x: Vec<f64> = (0..n)
            .map(|i| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>())
            .collect();
        let d: Vec<DMatrix<f64>> = (0..n)
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += step;
                xm[k] -= step;
                (a.eval(&xp) - a.eval(&xm)) / (2.0 * step)
            })
            .collect();
        for j in 0..m {
            for i in 0..n {
                for k in 0..n {
                    worst = worst.max((d[k][(j, i)] - d[i][(j, k)]).abs());
                }
            }
        }
    }
    worst
}

type WeightFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// Symmetric positive definite `m x m` weight `W(t)`.
#[derive(Clone)]
pub struct Weight(WeightFn);

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Weight")
    }
}

impl Weight {
    pub fn new(w: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self(Arc::new(w))
    }

    pub fn constant(w: DMatrix<f64>) -> Self {
        Self::new(move |_| w.clone())
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        (self.0)(t)
    }
}

/// `phi = sum_i g_i(x_i) x_i'^2 + 1/2 |s' - A(x) x'|_W^2` with fixed endpoints.
#[derive(Clone, Debug)]
pub struct BootstrapProblem {
    pub base: Vec<Profile>,
    pub coupling: Coupling,
    pub weight: Weight,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub s0: Vec<f64>,
    pub s1: Vec<f64>,
}

impl BootstrapProblem {
    /// Checks dimensions, positive definiteness of `W` on 101 sample times and
    /// the coupling symmetry condition at 100 probe points.
    pub fn new(
        base: Vec<Profile>,
        coupling: Coupling,
        weight: Weight,
        (x0, x1): (Vec<f64>, Vec<f64>),
        (s0, s1): (Vec<f64>, Vec<f64>),
    ) -> Result<Self> {
        let n = base.len();
        let (m, an) = coupling.shape();
        for (expected, got) in [(n, an), (n, x0.len()), (n, x1.len()), (m, s0.len()), (m, s1.len())] {
            if expected != got {
                return Err(Error::ShapeMismatch { expected, got });
            }
        }
        for k in 0..=100 {
            let w = weight.eval(k as f64 / 100.0);
            if w.shape() != (m, m) {
                return Err(Error::ShapeMismatch {
                    expected: m * m,
                    got: w.len(),
                });
            }
            let asym = (&w - w.transpose()).abs().max();
            if asym > 1e-12 * w.abs().max().max(1.0) || w.clone().cholesky().is_none() {
                return Err(Error::NotPositiveDefinite(format!("W(t) at t = {}", k as f64 / 100.0)));
            }
        }
        let lo: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| a.min(*b)).collect();
        let hi: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| a.max(*b)).collect();
        let asym = coupling_asymmetry(&coupling, &lo, &hi, 100, 0x5eed);
        if asym > COUPLING_SYMMETRY_TOL {
            return Err(Error::AsymmetricCoupling(asym));
        }
        Ok(Self {
            base,
            coupling,
            weight,
            x0,
            x1,
            s0,
            s1,
        })
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn m(&self) -> usize {
        self.s0.len()
    }

    /// Random scalar problem (`n = m = 1`): smooth positive `g`, smooth `A`,
    /// constant `W`, random endpoints.
    pub fn random_scalar(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gf = crate::synth::SmoothField::random(&mut rng, 3);
        let af = crate::synth::SmoothField::random(&mut rng, 3);
        let a_scale: f64 = rng.random_range(0.2..2.0);
        let w: f64 = rng.random_range(0.3..3.0);
        let x0: f64 = rng.random_range(-0.5..0.5);
        let x1: f64 = x0 + rng.random_range(0.3..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let s0: f64 = rng.random_range(-1.0..1.0);
        let s1: f64 = rng.random_range(-2.0..2.0);
        let (g1, g2) = (gf.clone(), gf);
        let g = Profile::new(
            move |x| (0.8 * g1.eval(x)).exp(),
            move |x| 0.8 * g2.derivative(x) * (0.8 * g2.eval(x)).exp(),
        );
        let a1 = af.clone();
        let a = Profile::new(move |x| a_scale * a1.eval(x), move |x| a_scale * af.derivative(x));
        Self::new(
            vec![g],
            Coupling::scalar(a),
            Weight::constant(DMatrix::from_element(1, 1, w)),
            (vec![x0], vec![x1]),
            (vec![s0], vec![s1]),
        )
        .expect("random scalar problem is valid")
    }

    fn split<'a>(&self, q: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        q.split_at(self.n())
    }

    /// `int A dx` along the straight segment from `xa` to `xb`.
    fn line_integral(&self, xa: &[f64], xb: &[f64]) -> DVector<f64> {
        let n = xa.len();
        let dx = DVector::from_iterator(n, xa.iter().zip(xb).map(|(a, b)| b - a));
        let mut y = vec![0.0; n];
        let mut total = DVector::zeros(self.m());
        for (node, weight) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            let u = 0.5 * (1.0 + node);
            for i in 0..n {
                y[i] = xa[i] + u * dx[i];
            }
            total += self.coupling.eval(&y) * &dx * (0.5 * weight);
        }
        total
    }

    /// `s' - A(x) x'`.
    fn slip(&self, x: &[f64], xd: &[f64], sd: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let a = self.coupling.eval(x);
        let r = DVector::from_column_slice(sd) - &a * DVector::from_column_slice(xd);
        (a, r)
    }
}

impl Lagrangian for BootstrapProblem {
    fn dim(&self) -> usize {
        self.n() + self.m()
    }

    fn value(&self, q: &[f64], qd: &[f64], t: f64) -> f64 {
        let (x, _) = self.split(q);
        let (xd, sd) = self.split(qd);
        let base: f64 = (0..self.n()).map(|i| self.base[i].eval(x[i]) * xd[i] * xd[i]).sum();
        let (_, r) = self.slip(x, xd, sd);
        base + 0.5 * r.dot(&(self.weight.eval(t) * &r))
    }

    fn grad_q(&self, q: &[f64], qd: &[f64], t: f64, out: &mut [f64]) {
        let n = self.n();
        let (x, _) = self.split(q);
        let (xd, sd) = self.split(qd);
        let (_, r) = self.slip(x, xd, sd);
        let wr = self.weight.eval(t) * r;
        let xdv = DVector::from_column_slice(xd);
        for i in 0..n {
            let da = self.coupling.partial(x, i);
            out[i] = self.base[i].deriv(x[i]) * xd[i] * xd[i] - (da * &xdv).dot(&wr);
        }
        for o in &mut out[n..] {
            *o = 0.0;
        }
    }

    fn grad_qd(&self, q: &[f64], qd: &[f64], t: f64, out: &mut [f64]) {
        let n = self.n();
        let (x, _) = self.split(q);
        let (xd, sd) = self.split(qd);
        let (a, r) = self.slip(x, xd, sd);
        let wr = self.weight.eval(t) * r;
        let atwr = a.transpose() * &wr;
        for i in 0..n {
            out[i] = 2.0 * self.base[i].eval(x[i]) * xd[i] - atwr[i];
        }
        out[n..].copy_from_slice(wr.as_slice());
    }
}

/// Optimal trajectories of a [`BootstrapProblem`] and the constant `a`.
#[derive(Clone, Debug)]
pub struct BootstrapSolution {
    pub grid: TimeGrid,
    /// Row-major `N x n`.
    pub x: Vec<f64>,
    /// Row-major `N x m`.
    pub s: Vec<f64>,
    /// `W (s' - A x')`, constant along the optimum.
    pub a: DVector<f64>,
}

impl BootstrapSolution {
    /// Row-major `N x (n + m)` trajectory of `q = (x, s)`.
    pub fn q(&self) -> Vec<f64> {
        let n = self.x.len() / self.grid.len();
        let m = self.s.len() / self.grid.len();
        let mut q = Vec::with_capacity(self.x.len() + self.s.len());
        for k in 0..self.grid.len() {
            q.extend_from_slice(&self.x[k * n..(k + 1) * n]);
            q.extend_from_slice(&self.s[k * m..(k + 1) * m]);
        }
        q
    }
}

fn row(v: &[f64], width: usize, k: usize) -> &[f64] {
    &v[k * width..(k + 1) * width]
}

/// Solves the base problem coordinate by coordinate, then
/// `s*(t) = s(0) + (int_0^t W^-1) a + int_0^t A(x*) x*' dt'` with `a` fixed by `s(1)`.
///
/// Both integrals use 5-point Gauss-Legendre on each segment. The line
/// integral of `A` is taken along the polygon through the samples, which is
/// exact because the symmetry condition makes it path independent.
pub fn bootstrap_solution(p: &BootstrapProblem, samples: usize) -> Result<BootstrapSolution> {
    let grid = TimeGrid::new(samples)?;
    let (n, m) = (p.n(), p.m());
    let h = grid.step();
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|i| speed_minimizer(&p.base[i], p.x0[i], p.x1[i], grid, BASE_CELLS))
        .collect::<Result<_>>()?;
    let mut x = Vec::with_capacity(samples * n);
    for k in 0..samples {
        x.extend(coords.iter().map(|c| c[k]));
    }

    let mut w_inv_sum = DMatrix::<f64>::zeros(m, m);
    let mut coupled = DVector::<f64>::zeros(m);
    let mut steps = Vec::with_capacity(samples - 1);
    for k in 0..samples - 1 {
        let (xa, xb) = (row(&x, n, k), row(&x, n, k + 1));
        let mut w_int = DMatrix::<f64>::zeros(m, m);
        for (node, weight) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            let u = 0.5 * (1.0 + node);
            let w_inv = p
                .weight
                .eval((k as f64 + u) * h)
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("W(t)".into()))?
                .inverse();
            w_int += w_inv * (0.5 * weight * h);
        }
        let a_dx = p.line_integral(xa, xb);
        w_inv_sum += &w_int;
        coupled += &a_dx;
        steps.push((w_int, a_dx));
    }
    let ds = DVector::from_iterator(m, p.s1.iter().zip(&p.s0).map(|(b, a)| b - a));
    let rhs = ds - coupled;
    let a = solve_spd(&w_inv_sum, &rhs).ok_or(Error::SingularWeightIntegral)?;

    let mut s = Vec::with_capacity(samples * m);
    let mut cur = DVector::from_column_slice(&p.s0);
    s.extend_from_slice(cur.as_slice());
    for (w_int, a_dx) in &steps {
        cur += w_int * &a + a_dx;
        s.extend_from_slice(cur.as_slice());
    }
    // Pin the far end to the prescribed value; the sweep lands there up to roundoff.
    let last = s.len() - m;
    s[last..].copy_from_slice(&p.s1);
    Ok(BootstrapSolution { grid, x, s, a })
}

fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 1e-12 * max.abs().max(f64::MIN_POSITIVE)) {
        return None;
    }
    m.clone().cholesky().map(|c| c.solve(b))
}

/// The two parts of the bootstrapped cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapCost {
    /// `int sum_i g_i(x_i) x_i'^2 dt`.
    pub base: f64,
    /// `int 1/2 |s' - A(x) x'|_W^2 dt`.
    pub coupling: f64,
}

impl BootstrapCost {
    pub fn total(&self) -> f64 {
        self.base + self.coupling
    }
}

/// Cost of `phi` along sampled trajectories (row-major).
///
/// The base part uses the midpoint rule. The coupling part uses the slip
/// averaged over each segment, `(ds - int A dx) / h`, with the line integral
/// along the segment by Gauss-Legendre; for a gradient coupling `A = dPhi/dx`
/// this is the midpoint rule in `sigma = s - Phi(x)`.
pub fn bootstrap_cost(p: &BootstrapProblem, x: &[f64], s: &[f64]) -> Result<BootstrapCost> {
    let (n, m) = (p.n(), p.m());
    if !x.len().is_multiple_of(n) || !s.len().is_multiple_of(m) || x.len() / n != s.len() / m {
        return Err(Error::ShapeMismatch {
            expected: x.len() / n.max(1),
            got: s.len() / m.max(1),
        });
    }
    let samples = x.len() / n;
    if samples < 2 {
        return Err(Error::GridTooSmall(samples));
    }
    let ends = [
        ("x(0)", row(x, n, 0), p.x0.as_slice()),
        ("x(1)", row(x, n, samples - 1), p.x1.as_slice()),
        ("s(0)", row(s, m, 0), p.s0.as_slice()),
        ("s(1)", row(s, m, samples - 1), p.s1.as_slice()),
    ];
    for (name, got, want) in ends {
        let off = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if off > 1e-12 * (1.0 + want.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            return Err(Error::BoundaryMismatch(format!("{name} off by {off:e}")));
        }
    }
    let h = 1.0 / (samples - 1) as f64;
    let mut base = 0.0;
    let mut coupling = 0.0;
    for k in 0..samples - 1 {
        let (xa, xb) = (row(x, n, k), row(x, n, k + 1));
        let (sa, sb) = (row(s, m, k), row(s, m, k + 1));
        let mid: Vec<f64> = xa.iter().zip(xb).map(|(a, b)| 0.5 * (a + b)).collect();
        let xd: Vec<f64> = xa.iter().zip(xb).map(|(a, b)| (b - a) / h).collect();
        let sd: Vec<f64> = sa.iter().zip(sb).map(|(a, b)| (b - a) / h).collect();
        base += h * (0..n).map(|i| p.base[i].eval(mid[i]) * xd[i] * xd[i]).sum::<f64>();
        let r = DVector::from_column_slice(&sd) - p.line_integral(xa, xb) / h;
        coupling += h * 0.5 * r.dot(&(p.weight.eval((k as f64 + 0.5) * h) * &r));
    }
    Ok(BootstrapCost { base, coupling })
}

/// The matrix `G(x, t)` with `phi = 1/2 [x'; s']^T G [x'; s']`.
///
/// With `f = 1/2 x'^T Gb x'`, `Gb = 2 diag(g_i)`, the blocks are
/// `Gb + A^T W A`, `-A^T W`, `-W A` and `W`.
pub fn block_metric(p: &BootstrapProblem, x: &[f64], t: f64) -> DMatrix<f64> {
    let (n, m) = (p.n(), p.m());
    let a = p.coupling.eval(x);
    let w = p.weight.eval(t);
    let at_w = a.transpose() * &w;
    let mut g = DMatrix::zeros(n + m, n + m);
    let mut top = &at_w * &a;
    for i in 0..n {
        top[(i, i)] += 2.0 * p.base[i].eval(x[i]);
    }
    g.view_mut((0, 0), (n, n)).copy_from(&top);
    g.view_mut((0, n), (n, m)).copy_from(&(-&at_w));
    g.view_mut((n, 0), (m, n)).copy_from(&(-at_w.transpose()));
    g.view_mut((n, n), (m, m)).copy_from(&w);
    g
}
