use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{serde_big, CfError};

/// Simple continued fraction `[a₀; a₁, a₂, …]` with its convergents.
///
/// Convergents are kept in full form: `p_k/q_k` is the value of
/// `[a₀; a₁, …, a_k]`, seeded by `(p₋₁, q₋₁) = (1, 0)` and `(p₀, q₀) = (a₀, 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawQuotients", into = "RawQuotients")]
pub struct ContinuedFraction {
    a0: BigInt,
    quotients: Vec<BigInt>,
    /// `convergents[k + 1] = (p_k, q_k)` for `k ≥ −1`.
    convergents: Vec<(BigInt, BigInt)>,
}

/// Partial quotients only; convergents are always recomputed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawQuotients {
    #[serde(with = "serde_big::int")]
    pub a0: BigInt,
    #[serde(with = "serde_big::int_vec")]
    pub quotients: Vec<BigInt>,
}

impl TryFrom<RawQuotients> for ContinuedFraction {
    type Error = CfError;

    fn try_from(raw: RawQuotients) -> Result<Self, CfError> {
        convergents(raw.a0, raw.quotients)
    }
}

impl From<ContinuedFraction> for RawQuotients {
    fn from(cf: ContinuedFraction) -> Self {
        RawQuotients {
            a0: cf.a0,
            quotients: cf.quotients,
        }
    }
}

/// Builds the continued fraction and its convergents by the standard recurrence.
pub fn convergents(a0: BigInt, quotients: Vec<BigInt>) -> Result<ContinuedFraction, CfError> {
    let mut cf = ContinuedFraction::from_a0(a0);
    for q in quotients {
        cf.push(q)?;
    }
    Ok(cf)
}

impl ContinuedFraction {
    pub fn from_a0(a0: BigInt) -> Self {
        let seed = vec![(BigInt::one(), BigInt::zero()), (a0.clone(), BigInt::one())];
        ContinuedFraction {
            a0,
            quotients: Vec::new(),
            convergents: seed,
        }
    }

    /// Convenience constructor from machine integers.
    pub fn from_i64(a0: i64, quotients: &[i64]) -> Result<Self, CfError> {
        convergents(
            BigInt::from(a0),
            quotients.iter().map(|&q| BigInt::from(q)).collect(),
        )
    }

    /// Appends `a_{k+1}` and its convergent.
    pub fn push(&mut self, a: BigInt) -> Result<(), CfError> {
        if a < BigInt::one() {
            return Err(CfError::InvalidQuotient {
                index: self.quotients.len() + 1,
                value: a.to_string(),
            });
        }
        let len = self.convergents.len();
        let (p1, q1) = &self.convergents[len - 1];
        let (p0, q0) = &self.convergents[len - 2];
        let next = (&a * p1 + p0, &a * q1 + q0);
        self.convergents.push(next);
        self.quotients.push(a);
        Ok(())
    }

    pub fn a0(&self) -> &BigInt {
        &self.a0
    }

    /// `a₁, a₂, …`.
    pub fn quotients(&self) -> &[BigInt] {
        &self.quotients
    }

    /// `a_k` for `k ≥ 0`.
    pub fn quotient(&self, k: usize) -> &BigInt {
        if k == 0 {
            &self.a0
        } else {
            &self.quotients[k - 1]
        }
    }

    /// Index of the last convergent.
    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    /// `p_k` for `−1 ≤ k ≤ depth`.
    pub fn p(&self, k: isize) -> &BigInt {
        &self.convergents[(k + 1) as usize].0
    }

    /// `q_k` for `−1 ≤ k ≤ depth`.
    pub fn q(&self, k: isize) -> &BigInt {
        &self.convergents[(k + 1) as usize].1
    }

    /// `(p_k, q_k)` for `k = −1, 0, …, depth`.
    pub fn convergent_pairs(&self) -> &[(BigInt, BigInt)] {
        &self.convergents
    }

    pub fn convergent(&self, k: usize) -> BigRational {
        BigRational::new(self.p(k as isize).clone(), self.q(k as isize).clone())
    }

    /// Prefix `[a₀; a₁, …, a_k]`.
    pub fn truncated(&self, k: usize) -> ContinuedFraction {
        let mut cf = self.clone();
        cf.quotients.truncate(k);
        cf.convergents.truncate(k + 2);
        cf
    }

    /// Largest `j ≥ −1` with `q_j ≤ n`, or `None` if `n ≥ q_depth`.
    pub fn bracket(&self, n: &BigInt) -> Option<isize> {
        let qs = &self.convergents;
        let idx = qs.partition_point(|(_, q)| q <= n);
        if idx == qs.len() {
            None
        } else {
            Some(idx as isize - 2)
        }
    }
}

/// Expansion `[a₀; a₁, …]` of a rational, with the last quotient ≥ 2 when
/// there is more than one term.
pub fn expand_rational(x: &BigRational) -> (BigInt, Vec<BigInt>) {
    let mut num = x.numer().clone();
    let mut den = x.denom().clone();
    let (a0, r) = num.div_mod_floor(&den);
    let mut quotients = Vec::new();
    num = den;
    den = r;
    while !den.is_zero() {
        let (a, r) = num.div_mod_floor(&den);
        quotients.push(a);
        num = den;
        den = r;
    }
    (a0, quotients)
}

/// Exact `⌈x^{p/q}⌉`.
pub fn ceil_rational_power(x: &BigUint, p: u32, q: u32) -> Result<BigUint, CfError> {
    if x.is_zero() || q == 0 {
        return Err(CfError::InvalidInput(format!(
            "ceil_rational_power needs x ≥ 1 and q ≥ 1, got x = {x}, q = {q}"
        )));
    }
    Ok(ceil_root_ratio(&x.pow(p), &BigUint::one(), q))
}

/// Smallest `z ≥ 0` with `z^e · den ≥ num`.
pub fn ceil_root_ratio(num: &BigUint, den: &BigUint, e: u32) -> BigUint {
    let mut z = (num / den).nth_root(e);
    while &z.pow(e) * den < *num {
        z += 1u32;
    }
    z
}

/// Trial-division primality test for small moduli.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// `x mod b` in `[0, b)`.
pub fn residue(x: &BigInt, b: u64) -> u64 {
    x.mod_floor(&BigInt::from(b))
        .to_u64()
        .expect("residue fits in u64")
}

/// Modular inverse of `x` modulo the prime `b`.
pub fn inverse_mod(x: u64, b: u64) -> Option<u64> {
    let e = num_integer::Integer::extended_gcd(&(x as i128), &(b as i128));
    (e.gcd == 1).then(|| e.x.rem_euclid(b as i128) as u64)
}

/// Approximate number of decimal digits of `x`.
pub fn decimal_digits(x: &BigInt) -> f64 {
    x.bits() as f64 * std::f64::consts::LOG10_2
}

pub(crate) fn to_biguint(x: &BigInt) -> BigUint {
    match x.sign() {
        Sign::Minus => panic!("negative value where a natural number was expected"),
        _ => x.magnitude().clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn fibonacci_convergents() {
        let cf = ContinuedFraction::from_i64(0, &[1, 1, 1, 1, 1]).unwrap();
        let got: Vec<BigRational> = (0..=5).map(|k| cf.convergent(k)).collect();
        let want = [r(0, 1), r(1, 1), r(1, 2), r(2, 3), r(3, 5), r(5, 8)];
        assert_eq!(got, want);
        assert_eq!(cf.p(-1), &BigInt::one());
        assert_eq!(cf.q(-1), &BigInt::zero());
    }

    #[test]
    fn sqrt2_convergents() {
        let cf = ContinuedFraction::from_i64(1, &[2, 2, 2]).unwrap();
        let got: Vec<BigRational> = (0..=3).map(|k| cf.convergent(k)).collect();
        assert_eq!(got, [r(1, 1), r(3, 2), r(7, 5), r(17, 12)]);
    }

    #[test]
    fn rejects_non_positive_quotients() {
        assert!(matches!(
            ContinuedFraction::from_i64(0, &[1, 0, 2]),
            Err(CfError::InvalidQuotient { index: 2, .. })
        ));
        assert!(ContinuedFraction::from_i64(-3, &[1]).is_ok());
    }

    #[test]
    fn recurrence_and_coprimality() {
        let cf = ContinuedFraction::from_i64(-2, &[3, 1, 4, 1, 5, 9, 2, 6]).unwrap();
        for k in 1..=cf.depth() as isize {
            let a = cf.quotient(k as usize);
            assert_eq!(cf.p(k), &(a * cf.p(k - 1) + cf.p(k - 2)));
            assert_eq!(cf.q(k), &(a * cf.q(k - 1) + cf.q(k - 2)));
            assert!(cf.p(k).gcd(cf.q(k)).is_one());
            // p_k q_{k−1} − p_{k−1} q_k = (−1)^{k−1}
            let det = cf.p(k) * cf.q(k - 1) - cf.p(k - 1) * cf.q(k);
            assert_eq!(det.abs(), BigInt::one());
        }
    }

    #[test]
    fn denominators_grow_exponentially() {
        let cf = ContinuedFraction::from_i64(0, &[1; 30]).unwrap();
        for n in 1..=30usize {
            let q = cf.q(n as isize).to_f64().unwrap();
            assert!(q >= 2f64.powf((n as f64 - 1.0) / 2.0));
        }
    }

    #[test]
    fn expansion_round_trip() {
        for x in [r(355, 113), r(-7, 3), r(5, 1), r(1, 7)] {
            let (a0, qs) = expand_rational(&x);
            let cf = convergents(a0, qs).unwrap();
            assert_eq!(cf.convergent(cf.depth()), x);
        }
        let (a0, qs) = expand_rational(&r(-7, 3));
        assert_eq!(a0, BigInt::from(-3));
        assert_eq!(qs, vec![BigInt::from(1), BigInt::from(2)]);
    }

    #[test]
    fn ceil_power_examples() {
        let c = |x: u32, p, q| ceil_rational_power(&BigUint::from(x), p, q).unwrap();
        assert_eq!(c(20, 6, 3), BigUint::from(400u32));
        assert_eq!(c(2, 3, 2), BigUint::from(3u32));
        // 10^{7/3} = 215.44…
        assert_eq!(c(10, 7, 3), BigUint::from(216u32));
        // 10^{10/3} = 2154.43…; 2154³ < 10¹⁰ ≤ 2155³.
        assert_eq!(c(10, 10, 3), BigUint::from(2155u32));
        assert_eq!(c(1, 0, 5), BigUint::one());
        assert!(ceil_rational_power(&BigUint::zero(), 1, 1).is_err());
    }

    #[test]
    fn bracket_locates_interval() {
        // q: −1→0, 0→1, 1→2, 2→5, 3→12
        let cf = ContinuedFraction::from_i64(1, &[2, 2, 2]).unwrap();
        assert_eq!(cf.bracket(&BigInt::from(0)), Some(-1));
        assert_eq!(cf.bracket(&BigInt::from(1)), Some(0));
        assert_eq!(cf.bracket(&BigInt::from(4)), Some(1));
        assert_eq!(cf.bracket(&BigInt::from(11)), Some(2));
        assert_eq!(cf.bracket(&BigInt::from(12)), None);
        // q₀ = q₁ = 1: the larger index wins.
        let cf = ContinuedFraction::from_i64(0, &[1, 3]).unwrap();
        assert_eq!(cf.bracket(&BigInt::from(1)), Some(1));
    }

    #[test]
    fn residues_and_inverses() {
        assert_eq!(residue(&BigInt::from(-1), 5), 4);
        assert_eq!(inverse_mod(3, 7), Some(5));
        assert_eq!(inverse_mod(0, 7), None);
        assert!(is_prime(13) && !is_prime(1) && !is_prime(49));
    }

    #[test]
    fn serde_uses_decimal_strings() {
        let cf = ContinuedFraction::from_i64(-4, &[7, 123456789012]).unwrap();
        let v = serde_json::to_value(&cf).unwrap();
        assert_eq!(v["a0"], "-4");
        assert_eq!(v["quotients"][1], "123456789012");
        let back: ContinuedFraction = serde_json::from_value(v).unwrap();
        assert_eq!(back, cf);
        let bad = serde_json::json!({"a0": "0", "quotients": ["0"]});
        assert!(serde_json::from_value::<ContinuedFraction>(bad).is_err());
    }
}
