//! Simultaneous normal form for pairs `(H, R)` with `H` rank one and not
//! nilpotent and `R` elliptic.
//!
//! After dividing by `γ = √det R` there is a basis `A` in which
//!
//! ```text
//! H = γ·A·[[λ, α], [0, 0]]·A⁻¹,    R = γ·A·rot(θ)·A⁻¹.
//! ```
//!
//! The scalars are read off trace identities; `A` is only needed to map back.
//! Conjugating by a reflection sends `(α, θ)` to `(−α, −θ)`, so the
//! representative with `sin θ > 0` is the one returned.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat2::{
    classify_membership_with_tol, rotation, Matrix2, MembershipClass, DEFAULT_MEMBERSHIP_TOL,
};

/// Eigenvector matrices with a larger 2-norm condition number are rejected.
pub const MAX_BASIS_CONDITION: f64 = 1e8;

const SIN_THETA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CanonicalError {
    #[error("pair is not in P×E: H is {h:?}, R is {r:?}")]
    NotInDomain {
        h: MembershipClass,
        r: MembershipClass,
    },
    #[error("R is (numerically) a multiple of ±identity: sin θ = {sin_theta:e}")]
    Degenerate { sin_theta: f64 },
    #[error("change of basis is ill-conditioned (cond = {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("invalid canonical parameters: {0}")]
    InvalidParameters(String),
}

/// `(γ, λ, α, θ)` plus the change of basis that realises them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "CanonicalPairJson", try_from = "CanonicalPairJson")]
pub struct CanonicalPair {
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub theta: f64,
    pub basis: Matrix2,
    pub basis_inv: Matrix2,
}

/// Wire form: `{gamma, lambda, alpha, theta, basis: [4]}`.
#[derive(Serialize, Deserialize)]
struct CanonicalPairJson {
    gamma: f64,
    lambda: f64,
    alpha: f64,
    theta: f64,
    basis: [f64; 4],
}

impl From<CanonicalPair> for CanonicalPairJson {
    fn from(c: CanonicalPair) -> Self {
        CanonicalPairJson {
            gamma: c.gamma,
            lambda: c.lambda,
            alpha: c.alpha,
            theta: c.theta,
            basis: c.basis.entries(),
        }
    }
}

impl TryFrom<CanonicalPairJson> for CanonicalPair {
    type Error = CanonicalError;

    fn try_from(j: CanonicalPairJson) -> Result<Self, Self::Error> {
        let basis = Matrix2::try_from(j.basis)
            .map_err(|e| CanonicalError::InvalidParameters(e.to_string()))?;
        CanonicalPair::new(j.gamma, j.lambda, j.alpha, j.theta, basis)
    }
}

impl CanonicalPair {
    /// Canonical pair with a given basis; fails if parameters violate the
    /// invariants (`γ > 0`, `λ ≠ 0`, `sin θ > 0`, invertible basis).
    pub fn new(
        gamma: f64,
        lambda: f64,
        alpha: f64,
        theta: f64,
        basis: Matrix2,
    ) -> Result<Self, CanonicalError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(CanonicalError::InvalidParameters(format!(
                "gamma = {gamma}"
            )));
        }
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(CanonicalError::InvalidParameters(format!(
                "lambda = {lambda}"
            )));
        }
        if !alpha.is_finite() || !theta.is_finite() || theta.sin() <= 0.0 {
            return Err(CanonicalError::InvalidParameters(format!(
                "alpha = {alpha}, theta = {theta}"
            )));
        }
        let basis_inv = basis
            .inverse()
            .ok_or_else(|| CanonicalError::InvalidParameters("singular basis".into()))?;
        Ok(CanonicalPair {
            gamma,
            lambda,
            alpha,
            theta,
            basis,
            basis_inv,
        })
    }

    /// Canonical pair expressed in the standard basis.
    pub fn standard(
        gamma: f64,
        lambda: f64,
        alpha: f64,
        theta: f64,
    ) -> Result<Self, CanonicalError> {
        CanonicalPair::new(gamma, lambda, alpha, theta, Matrix2::IDENTITY)
    }

    /// The normal-form `H` (unscaled): `[[λ, α], [0, 0]]`.
    pub fn normal_h(&self) -> Matrix2 {
        Matrix2::raw(self.lambda, self.alpha, 0.0, 0.0)
    }

    /// The normal-form `R` (unscaled): `rot(θ)`.
    pub fn normal_r(&self) -> Matrix2 {
        rotation(self.theta)
    }
}

/// Reduces `(h, r)` to canonical form using the default membership tolerance.
pub fn reduce(h: &Matrix2, r: &Matrix2) -> Result<CanonicalPair, CanonicalError> {
    reduce_with_tol(h, r, DEFAULT_MEMBERSHIP_TOL)
}

pub fn reduce_with_tol(
    h: &Matrix2,
    r: &Matrix2,
    tol: f64,
) -> Result<CanonicalPair, CanonicalError> {
    let mh = classify_membership_with_tol(h, tol);
    let mr = classify_membership_with_tol(r, tol);
    if mh.class != MembershipClass::InP || mr.class != MembershipClass::InE {
        return Err(CanonicalError::NotInDomain {
            h: mh.class,
            r: mr.class,
        });
    }

    // det r > 0 is forced by a negative discriminant.
    let gamma = r.det().sqrt();
    let h1 = h.scale(1.0 / gamma);
    let r1 = r.scale(1.0 / gamma);

    let lambda = h1.trace();
    let cos_theta = (r1.trace() / 2.0).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let sin_theta = theta.sin();
    if sin_theta < SIN_THETA_TOL {
        return Err(CanonicalError::Degenerate { sin_theta });
    }
    let alpha = ((h1 * r1).trace() - lambda * cos_theta) / sin_theta;

    // Columns u, v of A come from the eigenvector w = u − i·v of r1 for
    // e^{iθ}, which gives r1·A = A·rot(θ). Use whichever row of (r1 − e^{iθ})
    // yields the better-scaled null vector.
    let [p, q, s, t] = r1.entries();
    let a = if q.abs() >= s.abs() {
        // Row (p − e^{iθ}, q): w = (q, e^{iθ} − p).
        Matrix2::raw(q, 0.0, cos_theta - p, -sin_theta)
    } else {
        // Row (s, t − e^{iθ}): w = (e^{iθ} − t, s).
        Matrix2::raw(cos_theta - t, -sin_theta, s, 0.0)
    };
    let condition = a.condition_number();
    if condition.is_nan() || condition > MAX_BASIS_CONDITION {
        return Err(CanonicalError::IllConditioned { condition });
    }
    let a_inv = a.inverse().ok_or(CanonicalError::IllConditioned {
        condition: f64::INFINITY,
    })?;

    // In the rotation frame, turn the λ-eigenline of H onto the horizontal
    // axis. Rotations commute, so R stays put.
    let h_prime = a_inv * h1 * a;
    let c0 = (h_prime.get(0, 0), h_prime.get(1, 0));
    let c1 = (h_prime.get(0, 1), h_prime.get(1, 1));
    let col = if c0.0.hypot(c0.1) >= c1.0.hypot(c1.1) {
        c0
    } else {
        c1
    };
    let phi = col.1.atan2(col.0);
    let mut basis = a * rotation(phi);

    // Remaining freedom is a nonzero scalar: fix |det| = 1 and a positive
    // leading entry.
    basis = basis.scale(1.0 / basis.det().abs().sqrt());
    let lead = if basis.get(0, 0).abs() > 1e-14 {
        basis.get(0, 0)
    } else {
        basis.get(1, 0)
    };
    if lead < 0.0 {
        basis = -basis;
    }

    CanonicalPair::new(gamma, lambda, alpha, theta, basis)
}

/// Maps canonical parameters back to a pair in `P × E`.
pub fn reconstruct(c: &CanonicalPair) -> (Matrix2, Matrix2) {
    let h = (c.basis * c.normal_h() * c.basis_inv).scale(c.gamma);
    let r = (c.basis * c.normal_r() * c.basis_inv).scale(c.gamma);
    (h, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn reduces_scaled_rotation_pair() {
        let h = Matrix2::from_rows([[1.0, 1.0], [0.0, 0.0]]);
        let r = rotation(PI / 3.0).scale(2.0);
        let c = reduce(&h, &r).unwrap();
        assert!(close(c.gamma, 2.0, 1e-14));
        assert!(close(c.lambda, 0.5, 1e-14));
        assert!(close(c.theta, PI / 3.0, 1e-14));
        assert!(close(c.alpha, 0.5, 1e-14));
        assert!(c.basis.relative_distance(&Matrix2::IDENTITY) < 1e-14);
    }

    #[test]
    fn already_canonical_pair() {
        let h = Matrix2::from_rows([[1.0, 0.0], [0.0, 0.0]]);
        let c = reduce(&h, &rotation(PI / 4.0)).unwrap();
        assert!(close(c.gamma, 1.0, 1e-15));
        assert!(close(c.lambda, 1.0, 1e-15));
        assert!(close(c.alpha, 0.0, 1e-15));
        assert!(close(c.theta, PI / 4.0, 1e-15));
    }

    #[test]
    fn reconstruct_examples() {
        let c = CanonicalPair::standard(1.0, 1.0, 0.0, PI / 2.0).unwrap();
        let (h, r) = reconstruct(&c);
        assert!(h.relative_distance(&Matrix2::from_rows([[1.0, 0.0], [0.0, 0.0]])) < 1e-15);
        assert!(r.relative_distance(&Matrix2::from_rows([[0.0, -1.0], [1.0, 0.0]])) < 1e-15);

        let c = CanonicalPair::standard(2.0, 0.5, 0.5, PI / 3.0).unwrap();
        let (h, r) = reconstruct(&c);
        assert!(h.relative_distance(&Matrix2::from_rows([[1.0, 1.0], [0.0, 0.0]])) < 1e-15);
        assert!(r.relative_distance(&rotation(PI / 3.0).scale(2.0)) < 1e-15);
    }

    #[test]
    fn negative_theta_is_folded_with_alpha_sign() {
        // rot(−θ) with α is conjugate (by a reflection) to rot(θ) with −α.
        let h = Matrix2::from_rows([[1.3, 0.4], [0.0, 0.0]]);
        let c = reduce(&h, &rotation(-0.8)).unwrap();
        assert!(close(c.theta, 0.8, 1e-14));
        assert!(close(c.alpha, -0.4, 1e-13));
        let (h2, r2) = reconstruct(&c);
        assert!(h2.relative_distance(&h) < 1e-13);
        assert!(r2.relative_distance(&rotation(-0.8)) < 1e-13);
    }

    #[test]
    fn random_conjugates_recover_parameters() {
        // seed recorded for reproducibility
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        for _ in 0..500 {
            let gamma = rng.random_range(0.2..5.0);
            let lambda = rng.random_range(0.3..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let alpha = rng.random_range(-3.0..3.0);
            let theta = rng.random_range(0.05..PI - 0.05);
            let a = loop {
                let m = Matrix2::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
                .unwrap();
                if m.condition_number() < 50.0 {
                    break m;
                }
            };
            let ai = a.inverse().unwrap();
            let h = (a * Matrix2::from_rows([[lambda, alpha], [0.0, 0.0]]) * ai).scale(gamma);
            let r = (a * rotation(theta) * ai).scale(gamma);
            let c = reduce(&h, &r).unwrap();
            assert!(close(c.gamma, gamma, 1e-8 * gamma));
            assert!(close(c.lambda, lambda, 1e-8));
            assert!(close(c.alpha, alpha, 1e-8));
            assert!(close(c.theta, theta, 1e-8));
        }
    }

    #[test]
    fn rejects_out_of_domain() {
        let nil = Matrix2::from_rows([[0.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(
            reduce(&nil, &rotation(1.0)),
            Err(CanonicalError::NotInDomain { .. })
        ));
        let h = Matrix2::from_rows([[1.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(
            reduce(&h, &Matrix2::IDENTITY),
            Err(CanonicalError::NotInDomain { .. })
        ));
        assert!(matches!(
            reduce(&h, &h),
            Err(CanonicalError::NotInDomain { .. })
        ));
    }

    #[test]
    fn rejects_ill_conditioned_basis() {
        // Extremely eccentric elliptic matrix: [[0, −ε], [1/ε, 0]].
        let r = Matrix2::from_rows([[0.0, -1e-9], [1e9, 0.0]]);
        let h = Matrix2::from_rows([[1.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(
            reduce(&h, &r),
            Err(CanonicalError::IllConditioned { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let c = CanonicalPair::standard(2.0, 0.5, 0.5, PI / 3.0).unwrap();
        let v = serde_json::to_value(c).unwrap();
        assert_eq!(v["basis"].as_array().unwrap().len(), 4);
        assert!(v.get("basis_inv").is_none());
        let back: CanonicalPair = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
        let bad = serde_json::json!({"gamma": -1.0, "lambda": 1.0, "alpha": 0.0, "theta": 1.0, "basis": [1.0, 0.0, 0.0, 1.0]});
        assert!(serde_json::from_value::<CanonicalPair>(bad).is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pair() -> impl Strategy<Value = (Matrix2, Matrix2)> {
        (
            0.3f64..3.0,
            prop::bool::ANY,
            -3.0f64..3.0,
            0.05f64..(PI - 0.05),
            prop::array::uniform4(-2.0f64..2.0),
            0.2f64..5.0,
        )
            .prop_filter_map(
                "well-conditioned basis",
                |(l, neg, alpha, theta, e, gamma)| {
                    let a = Matrix2::new(e[0], e[1], e[2], e[3]).ok()?;
                    if a.condition_number() > 30.0 {
                        return None;
                    }
                    let lambda = if neg { -l } else { l };
                    let c = CanonicalPair::new(gamma, lambda, alpha, theta, a).ok()?;
                    Some(reconstruct(&c))
                },
            )
    }

    proptest! {
        #[test]
        fn scale_equivariance((h, r) in pair(), c in 0.1f64..10.0) {
            let base = reduce(&h, &r).unwrap();
            let scaled = reduce(&h.scale(c), &r.scale(c)).unwrap();
            prop_assert!((scaled.gamma - c * base.gamma).abs() <= 1e-9 * c * base.gamma);
            prop_assert!((scaled.lambda - base.lambda).abs() <= 1e-9);
            prop_assert!((scaled.alpha - base.alpha).abs() <= 1e-9);
            prop_assert!((scaled.theta - base.theta).abs() <= 1e-9);
        }

        #[test]
        fn similarity_invariance((h, r) in pair(), e in prop::array::uniform4(-2.0f64..2.0)) {
            let a = Matrix2::new(e[0], e[1], e[2], e[3]).unwrap();
            prop_assume!(a.condition_number() < 30.0);
            let ai = a.inverse().unwrap();
            let base = reduce(&h, &r).unwrap();
            let moved = reduce(&(a * h * ai), &(a * r * ai)).unwrap();
            prop_assert!((moved.gamma - base.gamma).abs() <= 1e-8 * base.gamma);
            prop_assert!((moved.lambda - base.lambda).abs() <= 1e-8);
            prop_assert!((moved.alpha - base.alpha).abs() <= 1e-8);
            prop_assert!((moved.theta - base.theta).abs() <= 1e-8);
        }

        #[test]
        fn round_trip_preserves_traces((h, r) in pair()) {
            let c = reduce(&h, &r).unwrap();
            let (h2, r2) = reconstruct(&c);
            let rel = |x: f64, y: f64, s: f64| (x - y).abs() <= 1e-10 * s.max(1.0);
            prop_assert!(rel(h2.trace(), h.trace(), h.max_abs()));
            prop_assert!(rel(r2.trace(), r.trace(), r.max_abs()));
            prop_assert!(rel(r2.det(), r.det(), r.max_abs().powi(2)));
            prop_assert!(rel(h2.det(), h.det(), h.max_abs().powi(2)));
            prop_assert!(h2.relative_distance(&h) <= 1e-9);
            prop_assert!(r2.relative_distance(&r) <= 1e-9);
            prop_assert!((c.basis * c.basis_inv).relative_distance(&Matrix2::IDENTITY) <= 1e-10);
        }
    }
}
