//! Scalar quaternion algebra.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// A quaternion `r + x i + y j + z k` with finite components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    r: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Quaternion {
    pub const ZERO: Self = Self::from_parts(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Self = Self::from_parts(1.0, 0.0, 0.0, 0.0);
    pub const I: Self = Self::from_parts(0.0, 1.0, 0.0, 0.0);
    pub const J: Self = Self::from_parts(0.0, 0.0, 1.0, 0.0);
    pub const K: Self = Self::from_parts(0.0, 0.0, 0.0, 1.0);

    /// Builds a quaternion, rejecting NaN and infinite components.
    pub fn new(r: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        if [r, x, y, z].iter().all(|c| c.is_finite()) {
            Ok(Self { r, x, y, z })
        } else {
            Err(Error::NonFinite("quaternion component"))
        }
    }

    pub fn from_array(c: [f64; 4]) -> Result<Self> {
        Self::new(c[0], c[1], c[2], c[3])
    }

    /// Unchecked constructor for values computed from finite operands.
    pub(crate) const fn from_parts(r: f64, x: f64, y: f64, z: f64) -> Self {
        Self { r, x, y, z }
    }

    #[inline]
    pub fn r(&self) -> f64 {
        self.r
    }
    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }
    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }
    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.r, self.x, self.y, self.z]
    }

    pub fn conjugate(self) -> Self {
        Self::from_parts(self.r, -self.x, -self.y, -self.z)
    }

    pub fn norm_squared(self) -> f64 {
        self.r * self.r + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `q / |q|`. The zero quaternion has no direction and is rejected.
    pub fn normalize(self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Degenerate("cannot normalize the zero quaternion"));
        }
        Ok(Self::from_parts(self.r / n, self.x / n, self.y / n, self.z / n))
    }

    pub fn scale(self, s: f64) -> Self {
        Self::from_parts(self.r * s, self.x * s, self.y * s, self.z * s)
    }

    /// Component-wise product, used by the LSTM gates.
    pub fn componentwise(self, other: Self) -> Self {
        Self::from_parts(
            self.r * other.r,
            self.x * other.x,
            self.y * other.y,
            self.z * other.z,
        )
    }

    /// Left-multiplication matrix: `to_real_matrix(q) * vec(p) == vec(q ⊗ p)`.
    pub fn to_real_matrix(self) -> RealMat4 {
        let Self { r, x, y, z } = self;
        RealMat4([
            [r, -x, -y, -z],
            [x, r, -z, y],
            [y, z, r, -x],
            [z, -y, x, r],
        ])
    }
}

/// Hamilton product `q1 ⊗ q2`.
pub fn hamilton_product(q1: Quaternion, q2: Quaternion) -> Quaternion {
    let (r1, x1, y1, z1) = (q1.r, q1.x, q1.y, q1.z);
    let (r2, x2, y2, z2) = (q2.r, q2.x, q2.y, q2.z);
    Quaternion::from_parts(
        r1 * r2 - x1 * x2 - y1 * y2 - z1 * z2,
        r1 * x2 + x1 * r2 + y1 * z2 - z1 * y2,
        r1 * y2 - x1 * z2 + y1 * r2 + z1 * x2,
        r1 * z2 + x1 * y2 - y1 * x2 + z1 * r2,
    )
}

pub fn conjugate(q: Quaternion) -> Quaternion {
    q.conjugate()
}

pub fn norm(q: Quaternion) -> f64 {
    q.norm()
}

pub fn normalize(q: Quaternion) -> Result<Quaternion> {
    q.normalize()
}

pub fn to_real_matrix(q: Quaternion) -> RealMat4 {
    q.to_real_matrix()
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Self) -> Self {
        hamilton_product(self, rhs)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, rhs: Self) -> Self {
        Self::from_parts(self.r + rhs.r, self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, rhs: Self) -> Self {
        Self::from_parts(self.r - rhs.r, self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Self {
        Self::from_parts(-self.r, -self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}i, {}j, {}k)", self.r, self.x, self.y, self.z)
    }
}

/// Row-major 4×4 real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealMat4(pub [[f64; 4]; 4]);

impl RealMat4 {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self(m)
    }

    pub fn mul_vec(&self, v: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(&self.0) {
            *o = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Self(out)
    }

    pub fn transpose(&self) -> Self {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[j][i] = self.0[i][j];
            }
        }
        Self(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
