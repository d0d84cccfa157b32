//! Time grids, warps of `[0, 1]`, and signals over pluggable metric spaces.
//!
//! A [`Signal`] stores its samples as a flat `f64` buffer; the [`Space`]
//! tag fixes how many floats make up one point and supplies the distance
//! and interpolation used everywhere else. Warps are strictly increasing
//! tables sampled on a uniform grid and evaluated by linear interpolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lie_se3::{self, Se3};

/// Minimum warp increment, as a fraction of the grid spacing `1/N`.
pub const MIN_WARP_INCREMENT: f64 = 1e-12;

/// Uniform grid `t_k = k / (n - 1)` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimeGrid {
    n: usize,
}

impl TimeGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall(n));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            1.0
        } else {
            k as f64 / (self.n - 1) as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.t(k)).collect()
    }
}

/// A sampled element of the reparameterization group: strictly increasing,
/// `tau(0) = 0`, `tau(1) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Warp {
    values: Vec<f64>,
}

impl Warp {
    /// Validates endpoints and strict increase.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::GridTooSmall(n));
        }
        if values[0] != 0.0 || values[n - 1] != 1.0 {
            return Err(Error::InvalidWarp(format!(
                "endpoints must be exactly 0 and 1, got {} and {}",
                values[0],
                values[n - 1]
            )));
        }
        let min_inc = MIN_WARP_INCREMENT / n as f64;
        for (k, w) in values.windows(2).enumerate() {
            if !(w[1] - w[0] > min_inc) {
                return Err(Error::InvalidWarp(format!(
                    "increment {} at sample {} is not strictly positive",
                    w[1] - w[0],
                    k
                )));
            }
        }
        Ok(Self { values })
    }

    /// Snaps endpoints that are within `1e-12` of 0 and 1, then validates.
    pub fn from_values_snapped(mut values: Vec<f64>) -> Result<Self> {
        if let Some(first) = values.first_mut() {
            if first.abs() <= 1e-12 {
                *first = 0.0;
            }
        }
        if let Some(last) = values.last_mut() {
            if (*last - 1.0).abs() <= 1e-12 {
                *last = 1.0;
            }
        }
        Self::new(values)
    }

    pub fn identity(grid: TimeGrid) -> Self {
        Self {
            values: grid.times(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid { n: self.values.len() }
    }

    /// Evaluates the piecewise-linear warp at `x` (clamped to `[0, 1]`).
    ///
    /// The table sits on a uniform grid, so the bracketing segment is found
    /// by index arithmetic.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let m = (self.values.len() - 1) as f64;
        let pos = x * m;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - k as f64;
        if frac == 0.0 {
            return self.values[k];
        }
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    /// Sup-norm distance to another warp on the same grid.
    pub fn sup_distance(&self, other: &Warp) -> Result<f64> {
        check_same_len(self.len(), other.len())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Sup-norm deviation from the identity warp.
    pub fn deviation_from_identity(&self) -> f64 {
        let g = self.grid();
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| (v - g.t(k)).abs())
            .fold(0.0, f64::max)
    }
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch { left: a, right: b });
    }
    Ok(())
}

pub fn warp_identity(grid: TimeGrid) -> Warp {
    Warp::identity(grid)
}

/// `(outer o inner)(t_k) = outer(inner(t_k))`.
pub fn warp_compose(outer: &Warp, inner: &Warp) -> Result<Warp> {
    check_same_len(outer.len(), inner.len())?;
    let mut values: Vec<f64> = inner.values.iter().map(|&x| outer.eval(x)).collect();
    let n = values.len();
    values[0] = 0.0;
    values[n - 1] = 1.0;
    Warp::new(values)
}

/// Inverse by a single monotone sweep over the table.
pub fn warp_inverse(w: &Warp) -> Warp {
    let grid = w.grid();
    let n = grid.len();
    let v = &w.values;
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    let mut k = 0usize;
    for j in 1..n - 1 {
        let t = grid.t(j);
        while k + 2 < n && v[k + 1] <= t {
            k += 1;
        }
        let frac = (t - v[k]) / (v[k + 1] - v[k]);
        out.push(grid.t(k) + frac * grid.step());
    }
    out.push(1.0);
    // Strictly increasing input gives strictly increasing output.
    Warp { values: out }
}

/// Random warp: cumulative sum of positive increments drawn from a smooth
/// random log-density, normalized to end at 1.
///
/// `roughness` scales the log-density amplitude; as it goes to zero the
/// result approaches the identity.
pub fn random_warp(grid: TimeGrid, seed: u64, roughness: f64) -> Result<Warp> {
    if !(roughness > 0.0 && roughness < 1.0) {
        return Err(Error::RoughnessOutOfRange(roughness));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_warp_with(&mut rng, grid, roughness)
}

pub fn random_warp_with<R: Rng + ?Sized>(rng: &mut R, grid: TimeGrid, roughness: f64) -> Result<Warp> {
    if !(roughness > 0.0 && roughness < 1.0) {
        return Err(Error::RoughnessOutOfRange(roughness));
    }
    const MODES: usize = 4;
    const AMPLITUDE: f64 = 2.5;
    let coeffs: Vec<(f64, f64)> = (0..MODES)
        .map(|_| (rng.random_range(-1.0..=1.0), rng.random::<f64>() * 2.0 * PI))
        .collect();
    let n = grid.len();
    let h = grid.step();
    let mut cum = Vec::with_capacity(n);
    cum.push(0.0);
    let mut acc = 0.0;
    for k in 0..n - 1 {
        let t = (k as f64 + 0.5) * h;
        let log_density: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(m, (a, phi))| a * ((m + 1) as f64 * PI * t + phi).sin() / (m + 1) as f64)
            .sum();
        acc += (AMPLITUDE * roughness * log_density).exp();
        cum.push(acc);
    }
    let total = acc;
    let mut values: Vec<f64> = cum.iter().map(|c| c / total).collect();
    values[n - 1] = 1.0;
    Warp::new(values)
}

/// Which metric space the points of a signal live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    Scalar,
    /// Euclidean vectors of the given dimension.
    Vector(usize),
    /// Real matrices (rows, cols), stored row-major, Frobenius distance.
    Matrix(usize, usize),
    Se3,
    /// Product of `k` copies of SE(3) with the root-sum-of-squares distance.
    Se3Product(usize),
}

impl Space {
    /// Floats per point.
    pub fn width(&self) -> usize {
        match *self {
            Space::Scalar => 1,
            Space::Vector(n) => n,
            Space::Matrix(r, c) => r * c,
            Space::Se3 => lie_se3::FLAT_LEN,
            Space::Se3Product(k) => k * lie_se3::FLAT_LEN,
        }
    }

    pub fn is_group(&self) -> bool {
        matches!(self, Space::Se3 | Space::Se3Product(_))
    }

    /// Number of SE(3) factors, 0 for linear spaces.
    pub fn se3_factors(&self) -> usize {
        match *self {
            Space::Se3 => 1,
            Space::Se3Product(k) => k,
            _ => 0,
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.width() {
            return Err(Error::ShapeMismatch {
                expected: self.width(),
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Distance between two points of this space.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_point(a)?;
        self.check_point(b)?;
        Ok(match *self {
            Space::Scalar => (a[0] - b[0]).abs(),
            Space::Vector(_) | Space::Matrix(_, _) => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Space::Se3 => lie_se3::metric_se3(&Se3::from_flat(a), &Se3::from_flat(b))?,
            Space::Se3Product(_) => {
                let mut sum = 0.0;
                for (pa, pb) in a
                    .chunks_exact(lie_se3::FLAT_LEN)
                    .zip(b.chunks_exact(lie_se3::FLAT_LEN))
                {
                    let d = lie_se3::metric_se3(&Se3::from_flat(pa), &Se3::from_flat(pb))?;
                    sum += d * d;
                }
                sum.sqrt()
            }
        })
    }

    /// Appends the interpolated point to `out`: linear for vector spaces,
    /// geodesic for SE(3). `alpha = 0` and `alpha = 1` copy the endpoint exactly.
    pub fn interpolate_into(&self, a: &[f64], b: &[f64], alpha: f64, out: &mut Vec<f64>) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        self.check_point(a)?;
        self.check_point(b)?;
        if alpha == 0.0 {
            out.extend_from_slice(a);
            return Ok(());
        }
        if alpha == 1.0 {
            out.extend_from_slice(b);
            return Ok(());
        }
        match *self {
            Space::Scalar | Space::Vector(_) | Space::Matrix(_, _) => {
                out.extend(a.iter().zip(b).map(|(x, y)| (1.0 - alpha) * x + alpha * y));
            }
            Space::Se3 | Space::Se3Product(_) => {
                for (pa, pb) in a
                    .chunks_exact(lie_se3::FLAT_LEN)
                    .zip(b.chunks_exact(lie_se3::FLAT_LEN))
                {
                    let m = lie_se3::interpolate_se3(&Se3::from_flat(pa), &Se3::from_flat(pb), alpha)?;
                    m.write_flat(out);
                }
            }
        }
        Ok(())
    }

    pub fn interpolate(&self, a: &[f64], b: &[f64], alpha: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.width());
        self.interpolate_into(a, b, alpha, &mut out)?;
        Ok(out)
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Space::Scalar => write!(f, "scalar"),
            Space::Vector(n) => write!(f, "vector:{n}"),
            Space::Matrix(r, c) => write!(f, "matrix:{r}x{c}"),
            Space::Se3 => write!(f, "se3"),
            Space::Se3Product(k) => write!(f, "se3^{k}"),
        }
    }
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::SchemaMismatch(format!("unknown space tag '{s}'"));
        let positive = |x: &str| -> Result<usize> {
            match x.trim().parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(bad()),
            }
        };
        let s = s.trim();
        if s == "scalar" {
            Ok(Space::Scalar)
        } else if s == "se3" {
            Ok(Space::Se3)
        } else if let Some(k) = s.strip_prefix("se3^") {
            Ok(Space::Se3Product(positive(k)?))
        } else if let Some(n) = s.strip_prefix("vector:") {
            Ok(Space::Vector(positive(n)?))
        } else if let Some(rc) = s.strip_prefix("matrix:") {
            let (r, c) = rc.split_once('x').ok_or_else(bad)?;
            Ok(Space::Matrix(positive(r)?, positive(c)?))
        } else {
            Err(bad())
        }
    }
}

/// Distance between two points of `space`.
pub fn distance(space: Space, a: &[f64], b: &[f64]) -> Result<f64> {
    space.distance(a, b)
}

/// Interpolated point `(1 - alpha) a + alpha b` (geodesic for SE(3)).
pub fn interpolate(space: Space, a: &[f64], b: &[f64], alpha: f64) -> Result<Vec<f64>> {
    space.interpolate(a, b, alpha)
}

/// Samples of one metric space on a uniform grid over `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    space: Space,
    data: Vec<f64>,
}

impl Signal {
    pub fn new(space: Space, data: Vec<f64>) -> Result<Self> {
        let w = space.width();
        if w == 0 || !data.len().is_multiple_of(w) {
            return Err(Error::ShapeMismatch {
                expected: w,
                got: data.len(),
            });
        }
        let n = data.len() / w;
        if n < 2 {
            return Err(Error::SignalTooShort(n));
        }
        Ok(Self { space, data })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(Space::Scalar, values)
    }

    /// Samples `f(t_k)` on a grid of `n` points.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = TimeGrid::new(n)?;
        Self::from_scalars((0..n).map(|k| f(grid.t(k))).collect())
    }

    pub fn from_points<P: AsRef<[f64]>>(space: Space, points: &[P]) -> Result<Self> {
        let mut data = Vec::with_capacity(points.len() * space.width());
        for p in points {
            let p = p.as_ref();
            if p.len() != space.width() {
                return Err(Error::ShapeMismatch {
                    expected: space.width(),
                    got: p.len(),
                });
            }
            data.extend_from_slice(p);
        }
        Self::new(space, data)
    }

    pub fn from_se3(poses: &[Se3]) -> Result<Self> {
        let mut data = Vec::with_capacity(poses.len() * lie_se3::FLAT_LEN);
        for p in poses {
            p.write_flat(&mut data);
        }
        Self::new(Space::Se3, data)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.space.width()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid { n: self.len() }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        let w = self.space.width();
        &self.data[k * w..(k + 1) * w]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.space.width())
    }

    /// The `k`-th sample as an SE(3) element (first factor for products).
    pub fn se3_at(&self, k: usize) -> Se3 {
        Se3::from_flat(self.point(k))
    }

    /// Factor `j` of sample `k` of an SE(3) or SE(3)-product signal.
    pub fn se3_factor(&self, k: usize, j: usize) -> Se3 {
        let p = self.point(k);
        Se3::from_flat(&p[j * lie_se3::FLAT_LEN..(j + 1) * lie_se3::FLAT_LEN])
    }

    pub fn to_se3_vec(&self) -> Result<Vec<Se3>> {
        if self.space != Space::Se3 {
            return Err(Error::UnsupportedSpace(self.space.to_string()));
        }
        Ok((0..self.len()).map(|k| self.se3_at(k)).collect())
    }

    /// Scalar samples; errors for non-scalar spaces.
    pub fn scalars(&self) -> Result<&[f64]> {
        if self.space != Space::Scalar {
            return Err(Error::UnsupportedSpace(self.space.to_string()));
        }
        Ok(&self.data)
    }

    /// Distances between consecutive samples.
    pub fn segment_lengths(&self) -> Result<Vec<f64>> {
        (0..self.len() - 1)
            .map(|k| self.space.distance(self.point(k), self.point(k + 1)))
            .collect()
    }

    /// Interpolates at normalized time `x` within the piecewise-geodesic signal.
    pub fn sample_at(&self, x: f64, out: &mut Vec<f64>) -> Result<()> {
        let n = self.len();
        let pos = x.clamp(0.0, 1.0) * (n - 1) as f64;
        let nearest = pos.round();
        if (pos - nearest).abs() <= 8.0 * f64::EPSILON * pos.max(1.0) {
            out.extend_from_slice(self.point(nearest as usize));
            return Ok(());
        }
        let k = (pos.floor() as usize).min(n - 2);
        let alpha = (pos - k as f64).clamp(0.0, 1.0);
        self.space
            .interpolate_into(self.point(k), self.point(k + 1), alpha, out)
    }

    /// Multiplies every translation (or every coordinate, for linear spaces) by `factor`.
    /// Used for body-size normalization.
    pub fn scale_translation(&self, factor: f64) -> Signal {
        let mut data = self.data.clone();
        match self.space {
            Space::Se3 | Space::Se3Product(_) => {
                for chunk in data.chunks_exact_mut(lie_se3::FLAT_LEN) {
                    for x in &mut chunk[9..12] {
                        *x *= factor;
                    }
                }
            }
            _ => data.iter_mut().for_each(|x| *x *= factor),
        }
        Signal {
            space: self.space,
            data,
        }
    }

    /// Largest sample-wise distance to another signal on the same grid.
    pub fn sup_distance(&self, other: &Signal) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch {
                left: self.space.to_string(),
                right: other.space.to_string(),
            });
        }
        check_same_len(self.len(), other.len())?;
        let mut m: f64 = 0.0;
        for k in 0..self.len() {
            m = m.max(self.space.distance(self.point(k), other.point(k))?);
        }
        Ok(m)
    }
}
