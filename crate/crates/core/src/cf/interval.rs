use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::fraction::ContinuedFraction;
use super::{serde_big, CfError};

/// Closed interval `[lo, hi]` with exact rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalInterval {
    #[serde(with = "serde_big::rational")]
    pub lo: BigRational,
    #[serde(with = "serde_big::rational")]
    pub hi: BigRational,
}

impl RationalInterval {
    /// Interval spanned by two points in either order.
    pub fn spanning(x: BigRational, y: BigRational) -> Self {
        if x <= y {
            RationalInterval { lo: x, hi: y }
        } else {
            RationalInterval { lo: y, hi: x }
        }
    }

    pub fn point(x: BigRational) -> Self {
        RationalInterval {
            lo: x.clone(),
            hi: x,
        }
    }

    /// `[c − r, c + r]`.
    pub fn around(center: &BigRational, radius: &BigRational) -> Self {
        RationalInterval {
            lo: center - radius,
            hi: center + radius,
        }
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &RationalInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// `k·[lo, hi]` for `k ≥ 0`.
    pub fn scale(&self, k: &BigInt) -> RationalInterval {
        let k = BigRational::from_integer(k.clone());
        RationalInterval::spanning(&self.lo * &k, &self.hi * &k)
    }

    pub fn midpoint_f64(&self) -> f64 {
        ((&self.lo + &self.hi) / BigRational::from_integer(2.into()))
            .to_f64()
            .unwrap_or(f64::NAN)
    }
}

/// Enclosure of every number whose expansion begins with the first `depth`
/// quotients of `cf`: the interval between `p_{depth−1}/q_{depth−1}` and
/// `p_depth/q_depth`. Its width is `1/(q_{depth−1} q_depth)`.
pub fn eval_enclosure(cf: &ContinuedFraction, depth: usize) -> Result<RationalInterval, CfError> {
    if depth == 0 || depth > cf.depth() {
        return Err(CfError::DepthExceeded {
            requested: depth,
            available: cf.depth(),
        });
    }
    Ok(RationalInterval::spanning(
        cf.convergent(depth - 1),
        cf.convergent(depth),
    ))
}

/// Nearest point of `a + bℤ` to `x` (ties resolved downward).
fn nearest_coset_point(x: &BigRational, a: &BigRational, b: &BigRational) -> BigRational {
    let t = (x - a) / b;
    let k = (t + BigRational::new(1.into(), 2.into())).ceil() - BigRational::one();
    a + b * k
}

/// Interval enclosing `dist(x, a + bℤ)` over `x ∈ xs`. Fails if the nearest
/// coset point is not the same across the whole interval.
pub fn coset_distance(xs: &RationalInterval, a: i64, b: u64) -> Result<RationalInterval, CfError> {
    let (ar, br) = coset_params(a, b);
    let c_lo = nearest_coset_point(&xs.lo, &ar, &br);
    let c_hi = nearest_coset_point(&xs.hi, &ar, &br);
    if c_lo != c_hi {
        return Err(CfError::AmbiguousCoset {
            width: xs.width().to_f64().unwrap_or(f64::INFINITY),
        });
    }
    let d_lo = (&xs.lo - &c_lo).abs();
    let d_hi = (&xs.hi - &c_lo).abs();
    if xs.contains(&c_lo) {
        Ok(RationalInterval {
            lo: BigRational::zero(),
            hi: d_lo.max(d_hi),
        })
    } else {
        Ok(RationalInterval::spanning(d_lo, d_hi))
    }
}

/// Exact lower bound for `dist(x, a + bℤ)` over `x ∈ xs`; zero if `xs`
/// contains a coset point. Never ambiguous.
pub fn coset_distance_lower(xs: &RationalInterval, a: i64, b: u64) -> BigRational {
    let (ar, br) = coset_params(a, b);
    let k = ((&xs.lo - &ar) / &br).floor();
    let left = &ar + &br * k;
    let right = &left + &br;
    if left == xs.lo || xs.hi >= right {
        return BigRational::zero();
    }
    (&xs.lo - &left).min(&right - &xs.hi)
}

fn coset_params(a: i64, b: u64) -> (BigRational, BigRational) {
    (
        BigRational::from_integer(a.into()),
        BigRational::from_integer(b.into()),
    )
}

/// Enclosure of `dist(n·ϑ, a + bℤ)` using the depth-`depth` enclosure of `ϑ`.
pub fn dist_coset(
    n: u64,
    cf: &ContinuedFraction,
    a: i64,
    b: u64,
    depth: usize,
) -> Result<RationalInterval, CfError> {
    let theta = eval_enclosure(cf, depth)?;
    coset_distance(&theta.scale(&BigInt::from(n)), a, b)
}

/// Enclosure of every extension of `cf` centred at `p_{M−1}/q_{M−1}` with
/// radius `1/(q_{M−1}·2^s)`, `M = depth`. Valid while `2^s ≤ q_M`.
pub fn dyadic_enclosure(cf: &ContinuedFraction, s: u64) -> Option<RationalInterval> {
    let m = cf.depth() as isize;
    if m < 1 || cf.q(m).bits() <= s {
        return None;
    }
    let center = cf.convergent(m as usize - 1);
    let radius = BigRational::new(BigInt::one(), cf.q(m - 1) << s);
    Some(RationalInterval::around(&center, &radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::fraction::convergents;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn golden_enclosure() {
        let cf = ContinuedFraction::from_i64(0, &[1, 1, 1, 1]).unwrap();
        let e = eval_enclosure(&cf, 4).unwrap();
        assert_eq!(e.lo, r(3, 5));
        assert_eq!(e.hi, r(2, 3));
        // (√5 − 1)/2 = 0.6180339887…
        let phi = BigRational::new(6_180_339_887i64.into(), 10_000_000_000i64.into());
        assert!(e.contains(&phi));
        assert!(eval_enclosure(&cf, 5).is_err());
        assert!(eval_enclosure(&cf, 0).is_err());
    }

    #[test]
    fn enclosure_width_is_reciprocal_product() {
        let cf = ContinuedFraction::from_i64(1, &[2, 2, 2, 2]).unwrap();
        let e = eval_enclosure(&cf, 4).unwrap();
        assert_eq!(cf.q(4), &BigInt::from(29));
        assert_eq!(e.width(), r(1, 12 * 29));
        assert!(e.width() < r(1, 12 * 12));
        // √2 = 1.41421356237…
        let s2 = BigRational::new(141_421_356_237i64.into(), 100_000_000_000i64.into());
        assert!(e.contains(&s2));
    }

    #[test]
    fn coset_distance_exact_point() {
        // ϑ = 2/3, n = 3: dist(2, 1 + 5ℤ) = 1.
        let xs = RationalInterval::point(r(2, 3)).scale(&BigInt::from(3));
        let d = coset_distance(&xs, 1, 5).unwrap();
        assert_eq!(d, RationalInterval::point(r(1, 1)));
        assert_eq!(coset_distance_lower(&xs, 1, 5), r(1, 1));
    }

    #[test]
    fn coset_distance_at_zero() {
        let cf = ContinuedFraction::from_i64(0, &[1, 1, 1, 1]).unwrap();
        for (a, b) in [(1, 5), (-2, 5), (6, 13), (-6, 13)] {
            let d = dist_coset(0, &cf, a, b, 3).unwrap();
            let want = r(a.abs().min(b as i64 - a.abs()), 1);
            assert_eq!(d, RationalInterval::point(want.clone()));
            assert!(want >= r(1, 1));
        }
    }

    #[test]
    fn coset_ambiguity_is_reported() {
        // Interval [0, 5] around the midpoint 3.5 between 1 and 6.
        let xs = RationalInterval {
            lo: r(0, 1),
            hi: r(5, 1),
        };
        assert!(matches!(
            coset_distance(&xs, 1, 5),
            Err(CfError::AmbiguousCoset { .. })
        ));
        assert_eq!(coset_distance_lower(&xs, 1, 5), r(0, 1));
        let xs = RationalInterval {
            lo: r(2, 1),
            hi: r(3, 1),
        };
        assert_eq!(coset_distance_lower(&xs, 1, 5), r(1, 1));
    }

    #[test]
    fn golden_distance_shrinks_at_denominators() {
        let cf = ContinuedFraction::from_i64(0, &[1; 24]).unwrap();
        for k in 2..18usize {
            let q = cf.q(k as isize).clone();
            let d = coset_distance(&eval_enclosure(&cf, 24).unwrap().scale(&q), 0, 1).unwrap();
            let upper = r(1, 1) / BigRational::from_integer(cf.q(k as isize + 1).clone());
            let lower =
                r(1, 1) / BigRational::from_integer(cf.q(k as isize + 1) + cf.q(k as isize));
            assert!(d.hi < upper && d.lo > lower, "k = {k}");
        }
    }

    #[test]
    fn dyadic_enclosure_contains_convergent_enclosure_tail() {
        let cf = ContinuedFraction::from_i64(2, &[1, 5, 3, 200, 7]).unwrap();
        let exact = eval_enclosure(&cf, 5).unwrap();
        for s in 0..cf.q(5).bits() {
            let e = dyadic_enclosure(&cf, s).unwrap();
            assert!(e.contains_interval(&exact), "s = {s}");
        }
        assert!(dyadic_enclosure(&cf, cf.q(5).bits()).is_none());
    }

    #[test]
    fn nested_enclosures_give_nested_distances() {
        let cf = convergents(
            BigInt::from(4),
            [7, 4, 1, 3, 2, 9, 1, 1, 5]
                .iter()
                .map(|&x| BigInt::from(x))
                .collect(),
        )
        .unwrap();
        for n in [1u64, 3, 7, 30] {
            let mut prev: Option<RationalInterval> = None;
            for depth in 4..=cf.depth() {
                let Ok(d) = dist_coset(n, &cf, 6, 13, depth) else {
                    continue;
                };
                if let Some(p) = &prev {
                    assert!(p.contains_interval(&d), "n = {n}, depth = {depth}");
                }
                prev = Some(d);
            }
        }
    }
}
