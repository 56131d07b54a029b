//! Closed-form 2×2 real linear algebra.
//!
//! Everything here is a pure function on `Copy` values. Eigen- and singular
//! values come from the trace/determinant quadratic, never from an iterative
//! solver.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on `det` and the discriminant used by
/// [`classify_membership`].
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("matrix entry {index} is not finite ({value})")]
pub struct NonFiniteEntry {
    pub index: usize,
    pub value: f64,
}

/// A 2×2 real matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Matrix2 {
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
}

impl TryFrom<[f64; 4]> for Matrix2 {
    type Error = NonFiniteEntry;

    fn try_from(e: [f64; 4]) -> Result<Self, Self::Error> {
        Matrix2::new(e[0], e[1], e[2], e[3])
    }
}

impl From<Matrix2> for [f64; 4] {
    fn from(m: Matrix2) -> Self {
        m.entries()
    }
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2 {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
    };
    pub const ZERO: Matrix2 = Matrix2 {
        a11: 0.0,
        a12: 0.0,
        a21: 0.0,
        a22: 0.0,
    };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Result<Self, NonFiniteEntry> {
        for (index, value) in [a11, a12, a21, a22].into_iter().enumerate() {
            if !value.is_finite() {
                return Err(NonFiniteEntry { index, value });
            }
        }
        Ok(Matrix2 { a11, a12, a21, a22 })
    }

    /// Builds a matrix from rows, panicking on non-finite input. Intended for
    /// literals in tests and examples.
    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
            .expect("matrix literal must be finite")
    }

    #[inline]
    pub(crate) const fn raw(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Matrix2 { a11, a12, a21, a22 }
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        match (row, col) {
            (0, 0) => self.a11,
            (0, 1) => self.a12,
            (1, 0) => self.a21,
            (1, 1) => self.a22,
            _ => panic!("index ({row}, {col}) out of range for a 2x2 matrix"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|x| x.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// `tr² − 4·det`; negative exactly when the eigenvalues are non-real.
    pub fn discriminant(&self) -> f64 {
        let t = self.trace();
        t * t - 4.0 * self.det()
    }

    pub fn transpose(&self) -> Matrix2 {
        Matrix2::raw(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn scale(&self, c: f64) -> Matrix2 {
        Matrix2::raw(c * self.a11, c * self.a12, c * self.a21, c * self.a22)
    }

    pub fn inverse(&self) -> Option<Matrix2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Matrix2::raw(
            self.a22 / d,
            -self.a12 / d,
            -self.a21 / d,
            self.a11 / d,
        ))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entry; used for scale-aware comparisons.
    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(self)
    }

    pub fn op_norm(&self) -> f64 {
        op_norm(self)
    }

    /// `self^k` by repeated squaring.
    pub fn pow(&self, mut k: u64) -> Matrix2 {
        let mut base = *self;
        let mut acc = Matrix2::IDENTITY;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    /// Both singular values, largest first.
    pub fn singular_values(&self) -> (f64, f64) {
        // σ1,2 = (s ± t)/2 with s, t the norms of the conformal and
        // anti-conformal parts.
        let s = (self.a11 + self.a22).hypot(self.a21 - self.a12);
        let t = (self.a11 - self.a22).hypot(self.a21 + self.a12);
        ((s + t) / 2.0, (s - t).abs() / 2.0)
    }

    /// 2-norm condition number; `f64::INFINITY` for singular input.
    pub fn condition_number(&self) -> f64 {
        let (hi, lo) = self.singular_values();
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Max absolute entrywise difference, relative to the larger of the two
    /// matrices' scale (floored at 1).
    pub fn relative_distance(&self, other: &Matrix2) -> f64 {
        let diff = (*self - *other).max_abs();
        diff / self.max_abs().max(other.max_abs()).max(1.0)
    }
}

impl fmt::Display for Matrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.a11, self.a12, self.a21, self.a22
        )
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;

    fn mul(self, o: Matrix2) -> Matrix2 {
        Matrix2::raw(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;

    fn add(self, o: Matrix2) -> Matrix2 {
        Matrix2::raw(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;

    fn sub(self, o: Matrix2) -> Matrix2 {
        Matrix2::raw(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }
}

impl Neg for Matrix2 {
    type Output = Matrix2;

    fn neg(self) -> Matrix2 {
        self.scale(-1.0)
    }
}

/// Max modulus of the roots of `x² − tr·x + det`.
pub fn spectral_radius(m: &Matrix2) -> f64 {
    let t = m.trace();
    let d = m.det();
    let disc = t * t - 4.0 * d;
    if disc < 0.0 {
        // Complex pair: |z|² = det.
        d.max(0.0).sqrt()
    } else {
        // Avoid cancellation: the larger root is (|t| + √disc)/2.
        (t.abs() + disc.sqrt()) / 2.0
    }
}

/// Largest singular value.
pub fn op_norm(m: &Matrix2) -> f64 {
    m.singular_values().0
}

pub fn rotation(theta: f64) -> Matrix2 {
    let (s, c) = theta.sin_cos();
    Matrix2::raw(c, -s, s, c)
}

/// Rotation by `π·p/q`, exact at multiples of `π/2`.
pub fn rotation_pi_fraction(p: i64, q: u64) -> Matrix2 {
    assert!(q > 0, "denominator must be positive");
    let period = 2 * q as i128;
    let r = (p as i128).rem_euclid(period);
    // r/q ∈ [0, 2); quarter turns are exact.
    if (2 * r) % q as i128 == 0 {
        let quarter = (2 * r / q as i128) as u8;
        let (c, s) = match quarter {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        return Matrix2::raw(c, -s, s, c);
    }
    rotation(std::f64::consts::PI * r as f64 / q as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembershipClass {
    /// Rank one, not nilpotent.
    InP,
    /// Non-real eigenvalues.
    InE,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub class: MembershipClass,
    /// Set when `det` or the discriminant sits inside the tolerance band and
    /// the decision could flip under perturbation.
    pub borderline: bool,
}

pub fn classify_membership(m: &Matrix2) -> Membership {
    classify_membership_with_tol(m, DEFAULT_MEMBERSHIP_TOL)
}

pub fn classify_membership_with_tol(m: &Matrix2, tol: f64) -> Membership {
    let det = m.det();
    let tr = m.trace();
    let disc = m.discriminant();
    if det.abs() <= tol {
        if tr.abs() > tol {
            return Membership {
                class: MembershipClass::InP,
                borderline: false,
            };
        }
        return Membership {
            class: MembershipClass::Neither,
            borderline: true,
        };
    }
    if disc < -tol {
        return Membership {
            class: MembershipClass::InE,
            borderline: false,
        };
    }
    Membership {
        class: MembershipClass::Neither,
        borderline: disc.abs() <= tol,
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn matrix() -> impl Strategy<Value = Matrix2> {
        prop::array::uniform4(-10.0f64..10.0)
            .prop_map(|e| Matrix2::new(e[0], e[1], e[2], e[3]).unwrap())
    }

    proptest! {
        #[test]
        fn rho_ab_equals_rho_ba(a in matrix(), b in matrix()) {
            let lhs = spectral_radius(&(a * b));
            let rhs = spectral_radius(&(b * a));
            let scale = op_norm(&a) * op_norm(&b);
            let disc = (a * b).discriminant().abs();
            if disc > 1e-4 * scale * scale {
                prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(rhs).max(1e-3 * scale));
            } else {
                // Near a double root the radius is only √ε-accurate.
                prop_assert!((lhs - rhs).abs() <= 1e-7 * scale.max(1.0));
            }
        }

        #[test]
        fn op_norm_submultiplicative(a in matrix(), b in matrix()) {
            prop_assert!(op_norm(&(a * b)) <= op_norm(&a) * op_norm(&b) * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn rho_below_norm(a in matrix()) {
            prop_assert!(spectral_radius(&a) <= op_norm(&a) * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn rotations_are_isometries(theta in -100.0f64..100.0) {
            let r = rotation(theta);
            prop_assert!((spectral_radius(&r) - 1.0).abs() < 1e-12);
            prop_assert!((op_norm(&r) - 1.0).abs() < 1e-12);
        }
    }
}
