//! Minimal 3-vector / 3x3-matrix types used by the pose and camera math.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> Vec3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self {
            x: S::zero(),
            y: S::zero(),
            z: S::zero(),
        }
    }

    pub fn dot(self, other: Self) -> S {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(self) -> S {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self / self.norm()
    }

    pub fn xy_norm(self) -> S {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<S: Scalar> Add for Vec3<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<S: Scalar> AddAssign for Vec3<S> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<S: Scalar> Sub for Vec3<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<S: Scalar> Mul<S> for Vec3<S> {
    type Output = Self;
    fn mul(self, rhs: S) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl<S: Scalar> Div<S> for Vec3<S> {
    type Output = Self;
    fn div(self, rhs: S) -> Self {
        Self::new(self.x / rhs, self.y / rhs, self.z / rhs)
    }
}

impl<S: Scalar> Neg for Vec3<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<S> {
    m: [[S; 3]; 3],
}

impl<S: Scalar> Mat3<S> {
    pub fn identity() -> Self {
        let mut m = [[S::zero(); 3]; 3];
        m[0][0] = S::one();
        m[1][1] = S::one();
        m[2][2] = S::one();
        Self { m }
    }

    pub fn from_rows(rows: [[S; 3]; 3]) -> Self {
        Self { m: rows }
    }

    pub fn from_columns(c0: Vec3<S>, c1: Vec3<S>, c2: Vec3<S>) -> Self {
        Self {
            m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> S {
        self.m[row][col]
    }

    /// Rotation about the x axis by `angle` (right-handed).
    pub fn rotation_x(angle: S) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        Self::from_rows([
            [S::one(), S::zero(), S::zero()],
            [S::zero(), c, -s],
            [S::zero(), s, c],
        ])
    }

    /// Rotation about the z axis by `angle` (right-handed, counterclockwise
    /// looking down -z).
    pub fn rotation_z(angle: S) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        Self::from_rows([
            [c, -s, S::zero()],
            [s, c, S::zero()],
            [S::zero(), S::zero(), S::one()],
        ])
    }

    pub fn transposed(&self) -> Self {
        let mut out = [[S::zero(); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                out[c][r] = self.m[r][c];
            }
        }
        Self { m: out }
    }

    pub fn mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        Vec3::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        let mut out = [[S::zero(); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = S::zero();
                for k in 0..3 {
                    acc = acc + self.m[r][k] * other.m[k][c];
                }
                out[r][c] = acc;
            }
        }
        Self { m: out }
    }

    pub fn determinant(&self) -> S {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}
