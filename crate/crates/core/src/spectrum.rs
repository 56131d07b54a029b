//! Closed-form spectral quantities of a canonical pair
//! `H = [[λ, α], [0, 0]]`, `R = rot(θ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat2::{op_norm, rotation, Matrix2};
use crate::words::{Word, WordError};

/// Default number of terms scanned by [`lsr_estimate`].
pub const DEFAULT_TRUNCATION: u64 = 10_000;
/// Default absolute tolerance on `|λ cos nθ + α sin nθ|` and on `‖H Rⁿ H‖`.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;
/// Multiplicative margin applied to the grid estimate of `C₀`.
pub const RATIO_MARGIN: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("invalid word: {0}")]
    InvalidWord(#[from] WordError),
    #[error("lambda must be finite and nonzero, got {0}")]
    ZeroLambda(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn check_lambda(lambda: f64) -> Result<(), SpectrumError> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(SpectrumError::ZeroLambda(lambda));
    }
    Ok(())
}

/// `λ cos nθ + α sin nθ`, the nonzero eigenvalue of `H Rⁿ`.
#[inline]
pub fn xi(lambda: f64, alpha: f64, theta: f64, n: u64) -> f64 {
    let (s, c) = (n as f64 * theta).sin_cos();
    lambda * c + alpha * s
}

/// `ρ(H Rⁿ)^{1/(n+1)}`.
#[inline]
pub fn normalized_term(lambda: f64, alpha: f64, theta: f64, n: u64) -> f64 {
    let x = xi(lambda, alpha, theta, n).abs();
    if n == 0 {
        x
    } else {
        x.powf(1.0 / (n as f64 + 1.0))
    }
}

/// Trace of the word `H^{n_k} R^{m_k} ··· H^{n_1} R^{m_1}` in the canonical pair:
/// `λ^{Σn_i} Π (cos m_iθ + α λ⁻¹ sin m_iθ)`.
pub fn trace_word(lambda: f64, alpha: f64, theta: f64, w: &Word) -> Result<f64, SpectrumError> {
    check_lambda(lambda)?;
    w.require_positive_exponents()?;
    let ratio = alpha / lambda;
    let mut t = lambda.powi(i32::try_from(w.h_count()).unwrap_or(i32::MAX));
    for &(_, m) in w.blocks() {
        let (s, c) = (f64::from(m) * theta).sin_cos();
        t *= c + ratio * s;
    }
    Ok(t)
}

/// Spectral radius of the word; equals `|trace_word|` since the product has
/// rank at most one.
pub fn rho_word(lambda: f64, alpha: f64, theta: f64, w: &Word) -> Result<f64, SpectrumError> {
    trace_word(lambda, alpha, theta, w).map(f64::abs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttainmentStatus {
    /// A product `H Rᵐ H` vanishes, so the lower spectral radius is zero.
    ZeroCertified,
    /// The minimizer sits in the first half of the scan and every later term
    /// is strictly larger. Evidence of attainment, not a proof.
    AttainedHeuristic,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsrEstimate {
    /// Canonical-scale value; multiply by `γ` for the original pair.
    pub value: f64,
    pub argmin: Option<u64>,
    pub truncation: u64,
    pub status: AttainmentStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_n: Option<Vec<(u64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsrOptions {
    pub zero_tol: f64,
    pub keep_per_n: bool,
}

impl Default for LsrOptions {
    fn default() -> Self {
        LsrOptions {
            zero_tol: DEFAULT_ZERO_TOL,
            keep_per_n: false,
        }
    }
}

/// Smaller value wins; ties go to the smaller `n`.
fn min_by_value_then_index(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// `min_{0≤n≤N} |λ cos nθ + α sin nθ|^{1/(n+1)}` with attainment bookkeeping.
pub fn lsr_estimate(lambda: f64, alpha: f64, theta: f64, truncation: u64) -> LsrEstimate {
    lsr_estimate_with(lambda, alpha, theta, truncation, LsrOptions::default())
}

pub fn lsr_estimate_with(
    lambda: f64,
    alpha: f64,
    theta: f64,
    truncation: u64,
    opts: LsrOptions,
) -> LsrEstimate {
    let n_max = truncation.max(1);
    let (value, argmin) = (0..=n_max)
        .into_par_iter()
        .map(|n| (normalized_term(lambda, alpha, theta, n), n))
        .reduce(|| (f64::INFINITY, u64::MAX), min_by_value_then_index);

    let per_n = opts.keep_per_n.then(|| {
        (0..=n_max)
            .map(|n| (n, normalized_term(lambda, alpha, theta, n)))
            .collect()
    });

    if let Some(cert) = zero_product_in_range(lambda, alpha, theta, n_max, opts.zero_tol) {
        return LsrEstimate {
            value: 0.0,
            argmin: Some(cert.m),
            truncation: n_max,
            status: AttainmentStatus::ZeroCertified,
            per_n,
        };
    }

    let later_strictly_larger = (argmin + 1..=n_max)
        .into_par_iter()
        .all(|n| normalized_term(lambda, alpha, theta, n) > value);
    let status = if value > 0.0 && 2 * argmin <= n_max && later_strictly_larger {
        AttainmentStatus::AttainedHeuristic
    } else {
        AttainmentStatus::Undetermined
    };
    LsrEstimate {
        value,
        argmin: Some(argmin),
        truncation: n_max,
        status,
        per_n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBound {
    /// Zero of `φ ↦ λ cos φ + α sin φ` in `(−π/2, π/2]`.
    pub theta0: f64,
    pub c0: f64,
    pub grid_points: u64,
}

impl RatioBound {
    /// `dist(φ, θ₀ + πℤ)`.
    pub fn dist(&self, phi: f64) -> f64 {
        dist_mod_pi(phi, self.theta0)
    }

    /// Checks `c0⁻¹·dist ≤ |λ cos φ + α sin φ| ≤ c0·dist` at `phi`.
    pub fn holds_at(&self, lambda: f64, alpha: f64, phi: f64) -> bool {
        let f = (lambda * phi.cos() + alpha * phi.sin()).abs();
        let d = self.dist(phi);
        d / self.c0 <= f && f <= self.c0 * d
    }
}

/// Distance from `phi` to `center + πℤ`.
pub fn dist_mod_pi(phi: f64, center: f64) -> f64 {
    let r = (phi - center).rem_euclid(PI);
    r.min(PI - r)
}

/// Zero of `λ cos φ + α sin φ` in `(−π/2, π/2]`.
pub fn theta_zero(lambda: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        FRAC_PI_2
    } else {
        (-lambda / alpha).atan()
    }
}

/// Grid estimate of the two-sided ratio constant, inflated by [`RATIO_MARGIN`].
pub fn ratio_bound(lambda: f64, alpha: f64, grid: u64) -> Result<RatioBound, SpectrumError> {
    check_lambda(lambda)?;
    if grid < 1000 {
        return Err(SpectrumError::InvalidArgument(format!(
            "grid = {grid} < 1000"
        )));
    }
    let theta0 = theta_zero(lambda, alpha);
    let exclusion = 1e-6;
    let (mut sup, mut inf) = (0.0f64, f64::INFINITY);
    let uniform = (0..=grid).map(|i| -FRAC_PI_2 + PI * i as f64 / grid as f64);
    // The extremes sit next to θ₀ and a quarter turn away from it.
    let extra = [
        theta0 + 2.0 * exclusion,
        theta0 - 2.0 * exclusion,
        theta0 + FRAC_PI_2,
        theta0 - FRAC_PI_2,
    ];
    for phi in uniform.chain(extra) {
        let d = dist_mod_pi(phi, theta0);
        if d < exclusion {
            continue;
        }
        let ratio = (lambda * phi.cos() + alpha * phi.sin()).abs() / d;
        sup = sup.max(ratio);
        inf = inf.min(ratio);
    }
    let c0 = sup.max(1.0 / inf).max(1.0) * RATIO_MARGIN;
    Ok(RatioBound {
        theta0,
        c0,
        grid_points: grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroProductCert {
    pub m: u64,
    /// `|λ cos mθ + α sin mθ|`.
    pub residual_trace: f64,
    /// `‖H Rᵐ H‖` from an explicit product.
    pub residual_product: f64,
}

/// `H · rot(mθ) · H` in the canonical pair.
pub fn sandwich(lambda: f64, alpha: f64, theta: f64, m: u64) -> Matrix2 {
    let h = Matrix2::from_rows([[lambda, alpha], [0.0, 0.0]]);
    h * rotation(m as f64 * theta) * h
}

fn zero_product_in_range(
    lambda: f64,
    alpha: f64,
    theta: f64,
    m_max: u64,
    tol: f64,
) -> Option<ZeroProductCert> {
    (0..=m_max).find_map(|m| {
        let residual_trace = xi(lambda, alpha, theta, m).abs();
        if residual_trace > tol {
            return None;
        }
        let residual_product = op_norm(&sandwich(lambda, alpha, theta, m));
        (residual_product <= tol).then_some(ZeroProductCert {
            m,
            residual_trace,
            residual_product,
        })
    })
}

/// Smallest `m ≤ M` with `H Rᵐ H = 0` to within [`DEFAULT_ZERO_TOL`].
pub fn find_zero_product(
    lambda: f64,
    alpha: f64,
    theta: f64,
    m_max: u64,
) -> Option<ZeroProductCert> {
    find_zero_product_with_tol(lambda, alpha, theta, m_max, DEFAULT_ZERO_TOL)
}

pub fn find_zero_product_with_tol(
    lambda: f64,
    alpha: f64,
    theta: f64,
    m_max: u64,
    tol: f64,
) -> Option<ZeroProductCert> {
    if lambda == 0.0 || m_max == 0 {
        return None;
    }
    zero_product_in_range(lambda, alpha, theta, m_max, tol)
}

/// Nearest `θ′` to `θ` with `λ cos mθ′ + α sin mθ′ = 0`, namely `(θ₀ + jπ)/m`.
pub fn perturb_to_zero(lambda: f64, alpha: f64, theta: f64, m: u64) -> Result<f64, SpectrumError> {
    check_lambda(lambda)?;
    if m == 0 {
        return Err(SpectrumError::InvalidArgument(
            "m must be at least 1".into(),
        ));
    }
    let theta0 = theta_zero(lambda, alpha);
    let mf = m as f64;
    let j = ((mf * theta - theta0) / PI).round();
    // Rounding of the quotient can land one zero off; pick the closer neighbour.
    [j - 1.0, j, j + 1.0]
        .into_iter()
        .map(|j| (theta0 + j * PI) / mf)
        .min_by(|x, y| (x - theta).abs().total_cmp(&(y - theta).abs()))
        .ok_or_else(|| SpectrumError::InvalidArgument("no candidate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::word_matrix;

    fn canonical(l: f64, a: f64, t: f64) -> (Matrix2, Matrix2) {
        (Matrix2::from_rows([[l, a], [0.0, 0.0]]), rotation(t))
    }

    #[test]
    fn trace_word_examples() {
        let t = PI / 3.0;
        let w11 = Word::block(1, 1).unwrap();
        assert!((trace_word(1.0, 0.0, t, &w11).unwrap() - 0.5).abs() < 1e-15);
        let w = Word::new(vec![(1, 1), (1, 1)]).unwrap();
        assert!((trace_word(1.0, 0.0, t, &w).unwrap() - 0.25).abs() < 1e-15);
        let w = Word::block(2, 1).unwrap();
        assert!((trace_word(2.0, 0.0, t, &w).unwrap() - 2.0).abs() < 1e-14);
        for (l, a, w) in [(1.0, 0.0, w11.clone()), (2.0, 0.0, w)] {
            let (h, r) = canonical(l, a, t);
            let m = word_matrix(&h, &r, &w);
            assert!(
                (rho_word(l, a, t, &w).unwrap() - crate::mat2::spectral_radius(&m)).abs() < 1e-14
            );
        }
    }

    #[test]
    fn trace_word_rejects_zero_exponent() {
        let w = Word::new(vec![(1, 0), (1, 1)]).unwrap();
        assert!(matches!(
            trace_word(1.0, 0.0, 1.0, &w),
            Err(SpectrumError::InvalidWord(_))
        ));
        assert!(trace_word(0.0, 1.0, 1.0, &Word::block(1, 1).unwrap()).is_err());
    }

    #[test]
    fn lsr_quarter_turn_is_zero() {
        let e = lsr_estimate(1.0, 0.0, FRAC_PI_2, 10);
        assert_eq!(e.status, AttainmentStatus::ZeroCertified);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.argmin, Some(1));
    }

    #[test]
    fn lsr_sixth_turn() {
        let e = lsr_estimate(1.0, 0.0, PI / 3.0, 50);
        assert!((e.value - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(e.argmin, Some(1));
        assert_eq!(e.status, AttainmentStatus::AttainedHeuristic);
    }

    #[test]
    fn lsr_fifth_turn() {
        let e = lsr_estimate(1.0, 0.0, 2.0 * PI / 5.0, 50);
        assert!((e.value - 0.55590).abs() < 1e-5, "{}", e.value);
        assert_eq!(e.argmin, Some(1));
    }

    #[test]
    fn lsr_per_n_table() {
        let e = lsr_estimate_with(
            1.0,
            0.0,
            PI / 3.0,
            5,
            LsrOptions {
                keep_per_n: true,
                ..LsrOptions::default()
            },
        );
        let table = e.per_n.unwrap();
        assert_eq!(table.len(), 6);
        assert_eq!(table[0], (0, 1.0));
        let v = serde_json::to_value(lsr_estimate(1.0, 0.0, 1.0, 5)).unwrap();
        assert!(v.get("per_n").is_none());
        assert!(v.get("status").is_some());
    }

    #[test]
    fn lsr_late_minimum_is_undetermined() {
        // Minimum at the very end of the scan.
        let e = lsr_estimate(1.0, 0.0, PI / 3.0 + 1e-3, 3);
        assert_ne!(e.status, AttainmentStatus::ZeroCertified);
        let e = lsr_estimate(1.0, 0.0, 1.0, 1);
        assert_eq!(e.truncation, 1);
    }

    #[test]
    fn lsr_independent_of_thread_count() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        for theta in [0.3, 1.7, 2.9] {
            let a = lsr_estimate(0.8, -0.4, theta, 5000);
            let b = pool.install(|| lsr_estimate(0.8, -0.4, theta, 5000));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ratio_bound_examples() {
        let rb = ratio_bound(1.0, 0.0, 10_000).unwrap();
        assert_eq!(rb.theta0, FRAC_PI_2);
        assert!((rb.c0 - FRAC_PI_2 * 1.05).abs() < 1e-6, "{}", rb.c0);
        let rb = ratio_bound(1.0, 1.0, 10_000).unwrap();
        assert!((rb.theta0 + PI / 4.0).abs() < 1e-15);
        assert!(ratio_bound(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn ratio_bound_closed_form() {
        // |λcosφ + αsinφ| = ρ|sin(φ−θ₀)| gives C₀ = max(ρ, π/(2ρ)).
        for (l, a) in [(1.0, 0.0), (3.0, 4.0), (0.1, -0.2), (-2.0, 0.5)] {
            let rb = ratio_bound(l, a, 20_000).unwrap();
            let rho = f64::hypot(l, a);
            let exact = rho.max(FRAC_PI_2 / rho) * RATIO_MARGIN;
            assert!(
                (rb.c0 - exact).abs() < 1e-6 * exact,
                "{l} {a}: {} vs {exact}",
                rb.c0
            );
        }
    }

    #[test]
    fn ratio_bound_holds_on_fine_scan() {
        let rb = ratio_bound(0.7, -1.3, 1000).unwrap();
        for i in 0..100_000 {
            let phi = -10.0 + 20.0 * i as f64 / 100_000.0;
            assert!(rb.holds_at(0.7, -1.3, phi), "{phi}");
        }
    }

    #[test]
    fn zero_product_examples() {
        let c = find_zero_product(1.0, 0.0, FRAC_PI_2, 10).unwrap();
        assert_eq!(c.m, 1);
        assert!(find_zero_product(1.0, 0.0, PI / 3.0, 100).is_none());
        let c = find_zero_product(1.0, 1.0, 3.0 * PI / 4.0, 10).unwrap();
        assert_eq!(c.m, 1);
        assert!(c.residual_product <= DEFAULT_ZERO_TOL);
    }

    #[test]
    fn sandwich_is_xi_times_h() {
        let (l, a, t) = (0.9, 0.3, 1.1);
        for m in 0..20 {
            let expected = Matrix2::from_rows([[l, a], [0.0, 0.0]]).scale(xi(l, a, t, m));
            assert!(sandwich(l, a, t, m).relative_distance(&expected) < 1e-14);
        }
    }

    #[test]
    fn perturb_examples() {
        let t = perturb_to_zero(1.0, 0.0, 1.0, 5).unwrap();
        assert!((t - 3.0 * PI / 10.0).abs() < 1e-15);
        assert!(((t - 1.0).abs() - 0.0575).abs() < 1e-4);
        let t = perturb_to_zero(1.0, 0.0, FRAC_PI_2, 1).unwrap();
        assert!((t - FRAC_PI_2).abs() < 1e-15);
        for theta in [0.1, 1.0, 2.5, 3.1] {
            let t = perturb_to_zero(0.4, -2.0, theta, 10_000).unwrap();
            assert!((t - theta).abs() <= 1.6e-4);
            assert!(xi(0.4, -2.0, t, 10_000).abs() < 1e-11);
        }
    }
}
