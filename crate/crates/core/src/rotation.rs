//! Rotation conversions between unit quaternions, rotation matrices and the
//! continuous 6D representation.
//!
//! Conventions, fixed crate-wide:
//! * quaternions are `(w, x, y, z)` with the Hamilton product;
//! * [`RotMat`] is stored row-major;
//! * [`SixD`] is the first two matrix *columns* concatenated:
//!   `[r00, r10, r20, r01, r11, r21]`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-6;
const DEGENERATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_wxyz(q: [f64; 4]) -> Self {
        Self::new(q[0], q[1], q[2], q[3])
    }

    pub fn to_wxyz(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOL
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = norm3(axis);
        let (s, c) = (libm::sin(angle / 2.0), libm::cos(angle / 2.0));
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }
}

impl core::ops::Neg for Quat {
    type Output = Quat;

    fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
impl core::ops::Mul for Quat {
    type Output = Quat;

    fn mul(self, b: Quat) -> Quat {
        let a = self;
        Quat::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

/// Proper rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotMat(pub [[f64; 3]; 3]);

impl RotMat {
    pub const IDENTITY: RotMat = RotMat([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Validating constructor: orthonormal columns and det +1, both to 1e-6.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        let r = RotMat(m);
        let (orthonormality, det) = (r.orthonormality_residual(), r.det());
        if orthonormality > UNIT_TOL || (det - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotARotation { orthonormality, det });
        }
        Ok(r)
    }

    pub fn from_cols(c0: [f64; 3], c1: [f64; 3], c2: [f64; 3]) -> Self {
        RotMat([[c0[0], c1[0], c2[0]], [c0[1], c1[1], c2[1]], [c0[2], c1[2], c2[2]]])
    }

    pub fn col(&self, j: usize) -> [f64; 3] {
        [self.0[0][j], self.0[1][j], self.0[2][j]]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max-abs entry of `R^T R - I`.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d = dot3(self.col(i), self.col(j)) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &RotMat) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        worst
    }
}

/// First two rotation-matrix columns, column-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixD(pub [f64; 6]);

impl SixD {
    pub fn scaled(self, alpha: f64) -> SixD {
        SixD(self.0.map(|v| v * alpha))
    }
}

pub fn quat_to_rotmat(q: Quat) -> Result<RotMat> {
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitQuaternion { norm });
    }
    // Renormalize so that a quaternion 1e-7 off unit still yields det 1 to
    // machine precision.
    let (w, x, y, z) = (q.w / norm, q.x / norm, q.y / norm, q.z / norm);
    Ok(RotMat([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]))
}

pub fn rotmat_to_sixd(r: &RotMat) -> SixD {
    let (a, b) = (r.col(0), r.col(1));
    SixD([a[0], a[1], a[2], b[0], b[1], b[2]])
}

/// Gram-Schmidt decoding. Accepts any non-degenerate 6-vector, orthogonal or
/// not, of any positive scale.
pub fn sixd_to_rotmat(v: &SixD) -> Result<RotMat> {
    let v = &v.0;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateSixD);
    }
    let a = [v[0], v[1], v[2]];
    let b = [v[3], v[4], v[5]];
    let na = norm3(a);
    let nb = norm3(b);
    if na <= DEGENERATE_TOL || nb <= DEGENERATE_TOL {
        return Err(Error::DegenerateSixD);
    }
    let c1 = scale3(a, 1.0 / na);
    let b_unit = scale3(b, 1.0 / nb);
    let resid = sub3(b_unit, scale3(c1, dot3(b_unit, c1)));
    let nr = norm3(resid);
    if nr <= DEGENERATE_TOL {
        return Err(Error::DegenerateSixD);
    }
    let c2 = scale3(resid, 1.0 / nr);
    let c3 = cross3(c1, c2);
    Ok(RotMat::from_cols(c1, c2, c3))
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    libm::sqrt(dot3(a, a))
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
