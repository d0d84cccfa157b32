//! Rigid-body displacements SE(3).
//!
//! Elements are stored as a rotation matrix and a translation vector, the
//! homogeneous 4x4 form being
//!
//! ```text
//! | R  t |
//! | 0  1 |
//! ```
//!
//! Twists are ordered `(omega, v)`: angular part first, linear part second.
//! The distance between two elements is the Frobenius norm of the 4x4
//! matrix logarithm of the relative displacement, so the rotational part
//! enters as `sqrt(2) * |omega|` (each skew entry appears twice).

use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Below this rotation angle the exponential and logarithm use series expansions.
pub const SMALL_ANGLE: f64 = 1e-8;

/// The logarithm refuses rotation angles at or above `PI - ANGLE_NEAR_PI_MARGIN`.
pub const ANGLE_NEAR_PI_MARGIN: f64 = 1e-6;

/// Number of floats in the flat representation: 9 row-major rotation entries, 3 translation entries.
pub const FLAT_LEN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Body-fixed velocity, an element of se(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

/// Rotation angle about, and translation along, the screw axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScrewInvariants {
    pub theta: f64,
    pub d: f64,
}

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

impl Twist {
    pub fn new(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { omega, v }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_array(xi: [f64; 6]) -> Self {
        Self::new(
            Vector3::new(xi[0], xi[1], xi[2]),
            Vector3::new(xi[3], xi[4], xi[5]),
        )
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.v.x,
            self.v.y,
            self.v.z,
        ]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.omega * s, self.v * s)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// The 4x4 matrix form.
    pub fn hat(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&self.omega));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v);
        m
    }

    /// Frobenius norm of the 4x4 matrix form.
    pub fn frobenius_norm(&self) -> f64 {
        (2.0 * self.omega.norm_squared() + self.v.norm_squared()).sqrt()
    }
}

impl Default for Se3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Se3 {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// Rotation about a (not necessarily unit) axis by `angle`, no translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.normalize();
        exp_se3(&Twist::new(n * angle, Vector3::zeros()))
    }

    /// Reads the row-major 12-float layout used by signals and files.
    pub fn from_flat(flat: &[f64]) -> Self {
        debug_assert!(flat.len() >= FLAT_LEN);
        Self::new(
            Matrix3::new(
                flat[0], flat[1], flat[2], flat[3], flat[4], flat[5], flat[6], flat[7], flat[8],
            ),
            Vector3::new(flat[9], flat[10], flat[11]),
        )
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        let r = &self.rotation;
        out.extend_from_slice(&[
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]);
        out.extend_from_slice(self.translation.as_slice());
    }

    pub fn to_flat(&self) -> [f64; FLAT_LEN] {
        let mut v = Vec::with_capacity(FLAT_LEN);
        self.write_flat(&mut v);
        v.try_into().expect("flat length")
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn compose(&self, other: &Se3) -> Se3 {
        compose(self, other)
    }

    pub fn inverse(&self) -> Se3 {
        inverse(self)
    }

    /// Largest deviation from orthonormality `|R^T R - I|_F` and `|det R - 1|`.
    pub fn rotation_defect(&self) -> f64 {
        let r = &self.rotation;
        let orth = (r.transpose() * r - Matrix3::identity()).norm();
        orth.max((r.determinant() - 1.0).abs())
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.rotation.iter().all(|x| x.is_finite())
            && self.translation.iter().all(|x| x.is_finite())
            && self.rotation_defect() <= tol
    }

    /// Rotation angle in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let (theta, _) = angle_and_sine_axis(&self.rotation);
        theta
    }
}

pub fn compose(a: &Se3, b: &Se3) -> Se3 {
    Se3::new(
        a.rotation * b.rotation,
        a.rotation * b.translation + a.translation,
    )
}

pub fn inverse(x: &Se3) -> Se3 {
    let rt = x.rotation.transpose();
    Se3::new(rt, -(rt * x.translation))
}

// sin(theta)/theta, (1 - cos theta)/theta^2 and (theta - sin theta)/theta^3,
// all cancellation-free.
fn exp_coefficients(theta: f64) -> (f64, f64, f64) {
    let t2 = theta * theta;
    let a = if theta < 1e-4 {
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    };
    let b = if theta < 1e-4 {
        0.5 - t2 / 24.0 + t2 * t2 / 720.0
    } else {
        let s = (0.5 * theta).sin();
        2.0 * s * s / t2
    };
    let c = if theta < 1e-3 {
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    } else {
        (theta - theta.sin()) / (t2 * theta)
    };
    (a, b, c)
}

/// Exponential map se(3) -> SE(3), Rodrigues for the rotation and the
/// V-matrix for the translation.
pub fn exp_se3(xi: &Twist) -> Se3 {
    let theta = xi.omega.norm();
    let w = hat(&xi.omega);
    let w2 = w * w;
    let i = Matrix3::identity();
    let (r, v) = if theta < SMALL_ANGLE {
        (i + w + 0.5 * w2, i + 0.5 * w + w2 / 6.0)
    } else {
        let (a, b, c) = exp_coefficients(theta);
        (i + a * w + b * w2, i + b * w + c * w2)
    };
    Se3::new(r, v * xi.v)
}

/// Returns `(theta, sin(theta) * n)` for a rotation matrix.
fn angle_and_sine_axis(r: &Matrix3<f64>) -> (f64, Vector3<f64>) {
    let w = 0.5 * vee(&(r - r.transpose()));
    let cos = 0.5 * (r.trace() - 1.0);
    (w.norm().atan2(cos), w)
}

/// Unit rotation axis, robust near `theta = pi` where the skew part vanishes.
fn rotation_axis(r: &Matrix3<f64>, theta: f64, sine_axis: &Vector3<f64>) -> Vector3<f64> {
    let s = sine_axis.norm();
    if s > 1e-4 {
        return sine_axis / s;
    }
    // Symmetric part: cos I + (1 - cos) n n^T.
    let sym = 0.5 * (r + r.transpose());
    let nn = (sym - theta.cos() * Matrix3::identity()) / (1.0 - theta.cos());
    let k = (0..3)
        .max_by(|&i, &j| nn[(i, i)].total_cmp(&nn[(j, j)]))
        .unwrap_or(0);
    let mut n: Vector3<f64> = nn.column(k).into();
    n /= n.norm();
    if n.dot(sine_axis) < 0.0 {
        n = -n;
    }
    n
}

/// Logarithm SE(3) -> se(3). Fails within `ANGLE_NEAR_PI_MARGIN` of a half turn.
pub fn log_se3(x: &Se3) -> Result<Twist> {
    let (theta, w) = angle_and_sine_axis(&x.rotation);
    if theta >= PI - ANGLE_NEAR_PI_MARGIN {
        return Err(Error::AngleNearPi { theta });
    }
    let omega = if theta < SMALL_ANGLE {
        w * (1.0 + theta * theta / 6.0)
    } else {
        w * (theta / theta.sin())
    };
    let wh = hat(&omega);
    // V^{-1} = I - W/2 + D W^2 with D = (1 - (theta/2) cot(theta/2)) / theta^2.
    let d = if theta < 1e-3 {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half / half.tan()) / (theta * theta)
    };
    let v_inv = Matrix3::identity() - 0.5 * wh + d * wh * wh;
    Ok(Twist::new(omega, v_inv * x.translation))
}

/// Left-invariant distance `|log(x1^{-1} x2)|_F` over the 4x4 twist matrix.
///
/// The pair is put in a canonical order first so that the result is
/// bitwise symmetric.
pub fn metric_se3(x1: &Se3, x2: &Se3) -> Result<f64> {
    let (a, b) = if canonical_le(x1, x2) { (x1, x2) } else { (x2, x1) };
    let rel = compose(&inverse(a), b);
    Ok(log_se3(&rel)?.frobenius_norm())
}

fn canonical_le(a: &Se3, b: &Se3) -> bool {
    let fa = a.to_flat();
    let fb = b.to_flat();
    for (x, y) in fa.iter().zip(fb.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    true
}

/// Point on the one-parameter subgroup through `a` and `b`; endpoints are returned exactly.
pub fn interpolate_se3(a: &Se3, b: &Se3, alpha: f64) -> Result<Se3> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if alpha == 0.0 {
        return Ok(*a);
    }
    if alpha == 1.0 {
        return Ok(*b);
    }
    let xi = log_se3(&compose(&inverse(a), b))?;
    Ok(compose(a, &exp_se3(&xi.scale(alpha))))
}

/// Screw angle `theta` and axial translation `d = n . t`.
///
/// Invariant under conjugation. For rotations below `SMALL_ANGLE` the axis
/// is undefined and the pure-translation limit `(0, |t|)` is reported.
pub fn screw_invariants(x: &Se3) -> ScrewInvariants {
    let (theta, w) = angle_and_sine_axis(&x.rotation);
    if theta < SMALL_ANGLE {
        return ScrewInvariants {
            theta: 0.0,
            d: x.translation.norm(),
        };
    }
    let n = rotation_axis(&x.rotation, theta, &w);
    ScrewInvariants {
        theta,
        d: n.dot(&x.translation),
    }
}

pub fn random_se3(seed: u64, scale: f64) -> Se3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_se3_with(&mut rng, scale)
}

/// Random displacement: uniform axis, angle uniform in `[0, min(scale, pi - 0.01)]`,
/// translation components uniform in `[-scale, scale]`.
pub fn random_se3_with<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Se3 {
    if scale <= 0.0 {
        return Se3::identity();
    }
    let axis = random_unit_vector(rng);
    let angle = rng.random::<f64>() * scale.min(PI - 0.01);
    let t = Vector3::new(
        rng.random_range(-scale..=scale),
        rng.random_range(-scale..=scale),
        rng.random_range(-scale..=scale),
    );
    Se3::new(exp_se3(&Twist::new(axis * angle, Vector3::zeros())).rotation, t)
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random::<f64>() * 2.0 * PI;
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Random twist with `|omega| <= max_angle` and linear components in `[-max_linear, max_linear]`.
pub fn random_twist_with<R: Rng + ?Sized>(rng: &mut R, max_angle: f64, max_linear: f64) -> Twist {
    let axis = random_unit_vector(rng);
    let angle = rng.random::<f64>() * max_angle;
    let v = Vector3::new(
        rng.random_range(-max_linear..=max_linear),
        rng.random_range(-max_linear..=max_linear),
        rng.random_range(-max_linear..=max_linear),
    );
    Twist::new(axis * angle, v)
}
