use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Polynomial in `tau` with coefficients in increasing degree.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }
}

/// Gaussian blob `a(tau) exp(-|y - mu(tau)|^2 / (2 sigma(tau)^2))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center_x: Poly,
    pub center_y: Poly,
    pub amplitude: Poly,
    pub width: Poly,
}

/// Intensity `h(y, tau)`: a uniform background plus Gaussian blobs, sampled
/// on the square `[-half_width, half_width]^2` with `resolution^2` midpoint cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticImage {
    pub blobs: Vec<Blob>,
    #[serde(default)]
    pub background: Poly,
    pub half_width: f64,
    pub resolution: usize,
}

/// `h`, `grad h` and `dh/dtau` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelSample {
    pub h: f64,
    pub grad: [f64; 2],
    pub dtau: f64,
}

/// Blob parameters and their tau-derivatives at a fixed tau.
#[derive(Clone, Copy, Debug)]
struct BlobState {
    mu: [f64; 2],
    dmu: [f64; 2],
    a: f64,
    da: f64,
    inv_s2: f64,
    ds_over_s3: f64,
}

impl SyntheticImage {
    fn states(&self, tau: f64) -> Vec<BlobState> {
        self.blobs
            .iter()
            .map(|b| {
                let s = b.width.eval(tau);
                BlobState {
                    mu: [b.center_x.eval(tau), b.center_y.eval(tau)],
                    dmu: [b.center_x.deriv(tau), b.center_y.deriv(tau)],
                    a: b.amplitude.eval(tau),
                    da: b.amplitude.deriv(tau),
                    inv_s2: 1.0 / (s * s),
                    ds_over_s3: b.width.deriv(tau) / (s * s * s),
                }
            })
            .collect()
    }

    fn sample_with(&self, states: &[BlobState], bg: (f64, f64), y: [f64; 2]) -> PixelSample {
        let mut out = PixelSample {
            h: bg.0,
            grad: [0.0, 0.0],
            dtau: bg.1,
        };
        for s in states {
            let dx = y[0] - s.mu[0];
            let dy = y[1] - s.mu[1];
            let r2 = dx * dx + dy * dy;
            let e = (-0.5 * r2 * s.inv_s2).exp();
            out.h += s.a * e;
            out.grad[0] -= s.a * e * dx * s.inv_s2;
            out.grad[1] -= s.a * e * dy * s.inv_s2;
            out.dtau += e
                * (s.da + s.a * ((dx * s.dmu[0] + dy * s.dmu[1]) * s.inv_s2 + r2 * s.ds_over_s3));
        }
        out
    }

    /// Analytic values at one point.
    pub fn sample(&self, y: [f64; 2], tau: f64) -> PixelSample {
        let bg = (self.background.eval(tau), self.background.deriv(tau));
        self.sample_with(&self.states(tau), bg, y)
    }

    /// Calls `f(y, sample)` for every quadrature cell center in a fixed order.
    pub fn for_each_cell(&self, tau: f64, mut f: impl FnMut([f64; 2], PixelSample)) {
        let states = self.states(tau);
        let bg = (self.background.eval(tau), self.background.deriv(tau));
        let r = self.resolution;
        let cell = 2.0 * self.half_width / r as f64;
        for i in 0..r {
            let y0 = -self.half_width + (i as f64 + 0.5) * cell;
            for j in 0..r {
                let y1 = -self.half_width + (j as f64 + 0.5) * cell;
                let y = [y0, y1];
                f(y, self.sample_with(&states, bg, y));
            }
        }
    }

    pub fn cell_area(&self) -> f64 {
        let cell = 2.0 * self.half_width / self.resolution as f64;
        cell * cell
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || self.resolution < 2 {
            return Err(Error::InvalidArgument(
                "image needs half_width > 0 and resolution >= 2".into(),
            ));
        }
        for k in 0..=64 {
            let tau = k as f64 / 64.0;
            for (i, b) in self.blobs.iter().enumerate() {
                if !(b.width.eval(tau) > 0.0) || b.amplitude.eval(tau) < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "blob {i} needs positive width and nonnegative amplitude on [0, 1]"
                    )));
                }
            }
            if self.background.eval(tau) < 0.0 {
                return Err(Error::InvalidArgument("background must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// One blob moving at constant velocity `v` with a fixed shape.
    pub fn translating_blob(v: [f64; 2]) -> Self {
        Self {
            blobs: vec![Blob {
                center_x: Poly(vec![-0.5 * v[0], v[0]]),
                center_y: Poly(vec![-0.5 * v[1], v[1]]),
                amplitude: Poly::constant(1.0),
                width: Poly::constant(0.5),
            }],
            background: Poly::default(),
            half_width: 4.0,
            resolution: 96,
        }
    }

    /// Rigidly translating blobs over a background that brightens at a constant rate.
    /// `M`, `b` and `c` do not depend on `tau`.
    pub fn uniform_scene() -> Self {
        let v = [0.3, -0.2];
        let blob = |x: f64, y: f64, s: f64, a: f64| Blob {
            center_x: Poly(vec![x, v[0]]),
            center_y: Poly(vec![y, v[1]]),
            amplitude: Poly::constant(a),
            width: Poly::constant(s),
        };
        Self {
            blobs: vec![blob(-0.6, 0.3, 0.45, 1.0), blob(0.7, -0.2, 0.35, 0.8)],
            background: Poly(vec![0.1, 0.2]),
            half_width: 4.0,
            resolution: 96,
        }
    }

    /// Blob whose appearance changes mostly during the first half of `tau`,
    /// on top of a slowly brightening background.
    pub fn front_loaded_scene() -> Self {
        // 1 - (1 - tau)^3 rises steeply early and flattens out.
        let early = Poly(vec![0.0, 3.0, -3.0, 1.0]);
        let scaled = |k: f64, c: f64| Poly(early.0.iter().enumerate().map(|(i, e)| if i == 0 { c } else { k * e }).collect());
        Self {
            blobs: vec![
                Blob {
                    center_x: scaled(0.6, -0.4),
                    center_y: Poly::constant(0.2),
                    amplitude: scaled(0.8, 0.6),
                    width: scaled(0.2, 0.35),
                },
                Blob {
                    center_x: Poly::constant(0.8),
                    center_y: Poly::constant(-0.5),
                    amplitude: Poly::constant(0.7),
                    width: Poly::constant(0.4),
                },
            ],
            background: Poly(vec![0.05, 0.05]),
            half_width: 3.5,
            resolution: 72,
        }
    }

    /// Random scene: three blobs with quadratic center paths, amplitudes and
    /// widths, over a slowly brightening background.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut quad = |base: f64, spread: f64| {
            Poly(vec![
                base,
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
            ])
        };
        let mut blobs = Vec::with_capacity(3);
        for _ in 0..3 {
            blobs.push(Blob {
                center_x: quad(0.0, 0.6),
                center_y: quad(0.0, 0.6),
                amplitude: quad(1.0, 0.3),
                width: quad(0.45, 0.08),
            });
        }
        for b in &mut blobs {
            b.center_x.0[0] = rng.random_range(-1.2..1.2);
            b.center_y.0[0] = rng.random_range(-1.2..1.2);
        }
        Self {
            blobs,
            background: Poly(vec![0.05, rng.random_range(0.04..0.08)]),
            half_width: 3.5,
            resolution: 64,
        }
    }
}

/// Nuisance groups acting on the image plane with unit Jacobian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    /// Planar translations; basis `E_x`, `E_y`.
    Translation2,
    /// Planar rigid motions; basis rotation, `E_x`, `E_y`.
    Se2,
}

impl Group {
    pub fn dim(self) -> usize {
        match self {
            Group::Translation2 => 2,
            Group::Se2 => 3,
        }
    }

    /// `E_i y` for the homogeneous point `(y, 1)`.
    #[inline]
    pub fn generator_action(self, i: usize, y: [f64; 2]) -> [f64; 2] {
        match (self, i) {
            (Group::Se2, 0) => [-y[1], y[0]],
            (Group::Se2, 1) | (Group::Translation2, 0) => [1.0, 0.0],
            _ => [0.0, 1.0],
        }
    }

    /// Basis of the Lie algebra as `3 x 3` homogeneous matrices.
    pub fn basis(self) -> Vec<Matrix3<f64>> {
        let rot = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let ex = Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let ey = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        match self {
            Group::Translation2 => vec![ex, ey],
            Group::Se2 => vec![rot, ex, ey],
        }
    }

    /// `C_ij^k` with `[E_i, E_j] = sum_k C_ij^k E_k`, indexed `[i][j][k]`.
    pub fn structure_constants(self) -> Vec<Vec<Vec<f64>>> {
        let d = self.dim();
        let mut c = vec![vec![vec![0.0; d]; d]; d];
        if self == Group::Se2 {
            // [R, E_x] = E_y, [R, E_y] = -E_x, translations commute.
            c[0][1][2] = 1.0;
            c[1][0][2] = -1.0;
            c[0][2][1] = -1.0;
            c[2][0][1] = 1.0;
        }
        c
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Translation2 => "translation2",
            Group::Se2 => "se2",
        })
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translation2" => Ok(Group::Translation2),
            "se2" => Ok(Group::Se2),
            other => Err(Error::InvalidArgument(format!("unknown group `{other}`"))),
        }
    }
}

/// A scene file: image, nuisance group and time-grid size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub group: Group,
    pub samples: usize,
    pub image: SyntheticImage,
}

impl SceneFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scene: SceneFile =
            toml::from_str(text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        scene.image.validate()?;
        Ok(scene)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::SchemaMismatch(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_eval_and_derivative() {
        let p = Poly(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0), 9.0);
        assert_eq!(p.deriv(2.0), 10.0);
        assert_eq!(Poly::default().eval(3.0), 0.0);
        assert_eq!(Poly::constant(4.0).deriv(1.0), 0.0);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let img = SyntheticImage::seeded(5);
        let (y, tau, e) = ([0.3, -0.4], 0.37, 1e-6);
        let s = img.sample(y, tau);
        let fd_x = (img.sample([y[0] + e, y[1]], tau).h - img.sample([y[0] - e, y[1]], tau).h) / (2.0 * e);
        let fd_y = (img.sample([y[0], y[1] + e], tau).h - img.sample([y[0], y[1] - e], tau).h) / (2.0 * e);
        let fd_t = (img.sample(y, tau + e).h - img.sample(y, tau - e).h) / (2.0 * e);
        assert!((s.grad[0] - fd_x).abs() < 1e-8);
        assert!((s.grad[1] - fd_y).abs() < 1e-8);
        assert!((s.dtau - fd_t).abs() < 1e-8);
    }

    #[test]
    fn structure_constants_match_commutators() {
        for g in [Group::Translation2, Group::Se2] {
            let basis = g.basis();
            let c = g.structure_constants();
            for i in 0..g.dim() {
                for j in 0..g.dim() {
                    let bracket = basis[i] * basis[j] - basis[j] * basis[i];
                    let expansion = (0..g.dim()).fold(Matrix3::zeros(), |acc, k| acc + basis[k] * c[i][j][k]);
                    assert_eq!(bracket, expansion, "{g} [{i},{j}]");
                }
            }
        }
    }

    #[test]
    fn generator_action_matches_basis() {
        for g in [Group::Translation2, Group::Se2] {
            let y = [0.7, -1.3];
            for (i, e) in g.basis().iter().enumerate() {
                let v = e * nalgebra::Vector3::new(y[0], y[1], 1.0);
                assert_eq!(g.generator_action(i, y), [v[0], v[1]]);
            }
        }
    }

    #[test]
    fn scene_file_round_trip() {
        let scene = SceneFile {
            group: Group::Se2,
            samples: 200,
            image: SyntheticImage::seeded(3),
        };
        let text = scene.to_toml().unwrap();
        assert_eq!(SceneFile::from_toml(&text).unwrap(), scene);
        assert!(SceneFile::from_toml("group = \"sl3\"").is_err());
    }

    #[test]
    fn seeded_scenes_are_valid() {
        for seed in 0..20 {
            SyntheticImage::seeded(seed).validate().unwrap();
        }
    }
}
