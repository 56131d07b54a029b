//! Construction of continued fractions whose coset distances
//! `dist(nϑ, a + bℤ)^{1/(n+1)}` keep improving without bound in `n`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::fraction::{
    ceil_root_ratio, expand_rational, inverse_mod, is_prime, residue, to_biguint, ContinuedFraction,
};
use super::interval::RationalInterval;
use super::CfError;

/// Largest number of decimal digits any constructed integer may have.
pub const DIGIT_BUDGET: f64 = 1e5;
/// Largest intermediate power formed while checking an inequality.
pub const CHECK_DIGIT_BUDGET: f64 = 1e6;

/// Growth constant `K > 1` as a reduced fraction `num/den`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthConstant {
    pub num: BigUint,
    pub den: BigUint,
}

impl GrowthConstant {
    pub fn new(k: &BigRational) -> Result<Self, CfError> {
        if *k <= BigRational::one() {
            return Err(CfError::InvalidInput(format!("K must exceed 1, got {k}")));
        }
        Ok(GrowthConstant {
            num: to_biguint(k.numer()),
            den: to_biguint(k.denom()),
        })
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone().into(), self.den.clone().into())
    }

    fn log10(&self) -> f64 {
        log10_big(&self.num) - log10_big(&self.den)
    }
}

fn log10_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(60);
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Validates `b` prime, `a ≢ 0 (mod b)` and returns `a mod b`.
pub(crate) fn check_modulus(a: i64, b: u64) -> Result<u64, CfError> {
    if !is_prime(b) {
        return Err(CfError::InvalidInput(format!("b = {b} is not prime")));
    }
    let ar = a.rem_euclid(b as i64) as u64;
    if ar == 0 {
        return Err(CfError::InvalidInput(format!(
            "a = {a} is divisible by b = {b}"
        )));
    }
    Ok(ar)
}

/// `p_k ≡ a (mod b)`.
pub fn congruent(cf: &ContinuedFraction, k: usize, a: i64, b: u64) -> bool {
    residue(cf.p(k as isize), b) == a.rem_euclid(b as i64) as u64
}

/// `p_N ≡ p_{N−1} ≡ a (mod b)` for full numerators `p_k`.
pub fn prefix_congruences_hold(cf: &ContinuedFraction, n: usize, a: i64, b: u64) -> bool {
    n >= 1 && congruent(cf, n, a, b) && congruent(cf, n - 1, a, b)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CongruentPrefix {
    pub cf: ContinuedFraction,
    /// Depth of the approximation prefix before steering.
    pub n0: usize,
    /// Whether `p_{n₀} ≡ 0 (mod b)` forced the extra quotient `1`.
    pub divisible_branch: bool,
    /// Whether a point enclosure ran out of quotients and was padded.
    pub padded: bool,
}

impl CongruentPrefix {
    /// Index `N` of the last convergent.
    pub fn tip(&self) -> usize {
        self.cf.depth()
    }
}

/// Appends quotients after depth `n0` so that the last two full numerators are
/// `≡ a (mod b)`.
pub fn steer(
    prefix: &ContinuedFraction,
    a: i64,
    b: u64,
) -> Result<(ContinuedFraction, bool), CfError> {
    let ar = check_modulus(a, b)?;
    let mut cf = prefix.clone();
    let mut divisible = false;
    if residue(cf.p(cf.depth() as isize), b) == 0 {
        cf.push(BigInt::one())?;
        divisible = true;
    }
    let n = cf.depth() as isize;
    let pn = residue(cf.p(n), b);
    let pm = residue(cf.p(n - 1), b);
    let inv =
        inverse_mod(pn, b).ok_or_else(|| CfError::InvalidInput("p_n has no inverse".into()))?;
    // k·p_n + p_{n−1} ≡ a
    let k = ((ar + b - pm) % b * inv) % b;
    cf.push(BigInt::from(if k == 0 { b } else { k }))?;
    // c·a + p_n ≡ a, given p_{n+1} ≡ a
    let inv_a = inverse_mod(ar, b).expect("b prime and a ≢ 0");
    let c = ((ar + b - pn) % b * inv_a) % b;
    cf.push(BigInt::from(if c == 0 { b } else { c }))?;
    debug_assert!(prefix_congruences_hold(&cf, cf.depth(), a, b));
    Ok((cf, divisible))
}

/// Congruence-steered prefix whose every infinite extension stays within `ε`
/// of the enclosed target. Steering starts at the first depth `n₀` with
/// `2/q_{n₀}² < ε`.
pub fn seed_congruent_prefix(
    enclosure: &RationalInterval,
    a: i64,
    b: u64,
    eps: &BigRational,
) -> Result<CongruentPrefix, CfError> {
    let base = approximation_prefix(enclosure, a, b, eps)?;
    match base.first_admissible {
        Some(n0) => {
            let cf = base.cf.truncated(n0);
            let (steered, divisible) = steer(&cf, a, b)?;
            finish(steered, n0, divisible, false, b)
        }
        None => pad_point(base.cf, a, b, eps, &BigInt::zero()),
    }
}

/// Congruence-steered prefix with `q_N > min_q_tip` and every extension within
/// `ε` of the target. Candidates are the steered prefixes at each admissible
/// depth `n₀` along the target's expansion, with or without one extra quotient
/// `t`; the one with the smallest `q_N` is returned.
pub fn seed_congruent_prefix_above(
    enclosure: &RationalInterval,
    a: i64,
    b: u64,
    eps: &BigRational,
    min_q_tip: &BigInt,
) -> Result<CongruentPrefix, CfError> {
    let base = approximation_prefix(enclosure, a, b, eps)?;
    let Some(first) = base.first_admissible else {
        return pad_point(base.cf, a, b, eps, min_q_tip);
    };
    let mut best: Option<CongruentPrefix> = None;
    let mut offer = |cf: ContinuedFraction, n0: usize, padded: bool| -> Result<(), CfError> {
        let (steered, divisible) = steer(&cf, a, b)?;
        let q = steered.q(steered.depth() as isize);
        if q > min_q_tip && best.as_ref().is_none_or(|p| q < p.cf.q(p.tip() as isize)) {
            if let Ok(p) = finish(steered, n0, divisible, padded, b) {
                best = Some(p);
            }
        }
        Ok(())
    };
    for n0 in first..=base.cf.depth() {
        let cf = base.cf.truncated(n0);
        let q_n0 = cf.q(n0 as isize).clone();
        offer(cf.clone(), n0, false)?;
        let reach: BigInt = (min_q_tip + 1u32).div_ceil(&q_n0);
        let t_max = reach.to_u64().unwrap_or(u64::MAX).saturating_add(b);
        for t in 1..=t_max {
            let mut padded = cf.clone();
            padded.push(BigInt::from(t))?;
            offer(padded, n0, true)?;
        }
        if &q_n0 > min_q_tip {
            break;
        }
    }
    best.ok_or_else(|| CfError::InvalidInput("no steered prefix stays inside (-b/2, b/2)".into()))
}

struct ApproximationPrefix {
    /// Longest usable prefix of the target's expansion.
    cf: ContinuedFraction,
    /// First depth `n₀ ≥ 1` with `2/q_{n₀}² < ε`.
    first_admissible: Option<usize>,
}

fn approximation_prefix(
    enclosure: &RationalInterval,
    a: i64,
    b: u64,
    eps: &BigRational,
) -> Result<ApproximationPrefix, CfError> {
    check_modulus(a, b)?;
    if !eps.is_positive() {
        return Err(CfError::InvalidInput("epsilon must be positive".into()));
    }
    let half_b = BigRational::new(BigInt::from(b), BigInt::from(2));
    if enclosure.lo <= -&half_b || enclosure.hi >= half_b {
        return Err(CfError::InvalidInput(format!(
            "target enclosure is not inside (-{b}/2, {b}/2)"
        )));
    }

    let (lo0, lo_q) = expand_rational(&enclosure.lo);
    let (hi0, hi_q) = expand_rational(&enclosure.hi);
    let lo_terms: Vec<BigInt> = std::iter::once(lo0).chain(lo_q).collect();
    let hi_terms: Vec<BigInt> = std::iter::once(hi0).chain(hi_q).collect();
    let point = enclosure.is_point();
    let usable = if point {
        lo_terms.len()
    } else {
        (0..lo_terms.len().min(hi_terms.len()))
            .take_while(|&i| {
                i + 1 < lo_terms.len() && i + 1 < hi_terms.len() && lo_terms[i] == hi_terms[i]
            })
            .count()
    };
    if usable == 0 {
        return Err(CfError::EnclosureTooWide {
            common_terms: 0,
            detail: "endpoints differ in their integer part".into(),
        });
    }

    let two = BigRational::from_integer(2.into());
    let mut cf = ContinuedFraction::from_a0(lo_terms[0].clone());
    let mut first_admissible = None;
    for (n0, term) in lo_terms.iter().enumerate().take(usable).skip(1) {
        cf.push(term.clone())?;
        let q = BigRational::from_integer(cf.q(n0 as isize).clone());
        if first_admissible.is_none() && &q * &q * eps > two {
            first_admissible = Some(n0);
        }
    }
    if first_admissible.is_none() && !point {
        return Err(CfError::EnclosureTooWide {
            common_terms: usable,
            detail: "common expansion of the endpoints is too short for the requested epsilon"
                .into(),
        });
    }
    Ok(ApproximationPrefix {
        cf,
        first_admissible,
    })
}

/// Exact rational target whose expansion is too short: pad with one large
/// quotient so that the padded convergent is still within `ε/2` of it.
fn pad_point(
    mut cf: ContinuedFraction,
    a: i64,
    b: u64,
    eps: &BigRational,
    min_q_tip: &BigInt,
) -> Result<CongruentPrefix, CfError> {
    let two = BigRational::from_integer(2.into());
    let l = cf.depth() as isize;
    let ql = BigRational::from_integer(cf.q(l).clone());
    let t1 = (&two / (eps * &ql)).ceil().to_integer();
    let t2 = (&two / eps).ceil().to_integer().sqrt() + 1;
    let t = t1.max(t2).max(min_q_tip.clone()) + 1;
    cf.push(t)?;
    let n0 = cf.depth();
    let (steered, divisible) = steer(&cf, a, b)?;
    finish(steered, n0, divisible, true, b)
}

fn finish(
    cf: ContinuedFraction,
    n0: usize,
    divisible_branch: bool,
    padded: bool,
    b: u64,
) -> Result<CongruentPrefix, CfError> {
    let n = cf.depth();
    let ext = RationalInterval::spanning(cf.convergent(n - 1), cf.convergent(n));
    let half_b = BigRational::new(BigInt::from(b), BigInt::from(2));
    if ext.lo <= -&half_b || ext.hi >= half_b {
        return Err(CfError::InvalidInput(format!(
            "extensions of the prefix leave (-{b}/2, {b}/2)"
        )));
    }
    Ok(CongruentPrefix {
        cf,
        n0,
        divisible_branch,
        padded,
    })
}

fn exponent(x: &BigInt, what: &str) -> Result<u32, CfError> {
    (x + 1u32).to_u32().ok_or_else(|| CfError::DigitBudget {
        stage: what.to_string(),
        estimated_digits: f64::INFINITY,
        budget: DIGIT_BUDGET,
    })
}

fn guard(stage: &str, digits: f64, budget: f64) -> Result<(), CfError> {
    if digits.is_finite() && digits <= budget {
        Ok(())
    } else {
        Err(CfError::DigitBudget {
            stage: stage.to_string(),
            estimated_digits: digits,
            budget,
        })
    }
}

/// Estimated decimal digits of `(c·K·q)^{e}` with `e = 1 + q_exp`.
fn power_digits(c: u32, k: &GrowthConstant, q: &BigInt, q_exp: &BigInt) -> f64 {
    let base = (c as f64).log10() + k.log10().max(0.0) + log10_big(q.magnitude());
    let e = q_exp.to_f64().unwrap_or(f64::INFINITY) + 1.0;
    base * e
}

/// `(c·K·q)^{e} ` as `(num, den)` over the naturals.
fn scaled_power(c: u32, k: &GrowthConstant, q: &BigInt, e: u32) -> (BigUint, BigUint) {
    let base = &k.num * to_biguint(q) * c;
    (base.pow(e), k.den.pow(e))
}

/// Exact check of `q_{N+1}^{1/(1+q_N)} > 2K q_N > (2K q_N)^{1/(1+q_{N−1})}`.
pub fn check_first_growth(
    cf: &ContinuedFraction,
    n: usize,
    k: &GrowthConstant,
) -> Result<(), CfError> {
    let qn = cf.q(n as isize);
    guard(
        "first growth quotient check",
        power_digits(2, k, qn, qn),
        CHECK_DIGIT_BUDGET,
    )?;
    let e = exponent(qn, "first growth quotient")?;
    let (x, d) = scaled_power(2, k, qn, e);
    if to_biguint(cf.q(n as isize + 1)) * d <= x {
        return Err(failed(
            "first growth quotient",
            format!("q_(N+1)^(1/(1+q_N)) <= 2 K q_N at N = {n}"),
        ));
    }
    // 2Kq_N > 1 and q_{N−1} ≥ 1 give the second inequality.
    if &k.num * to_biguint(qn) * 2u32 <= k.den || cf.q(n as isize - 1).is_zero() {
        return Err(failed(
            "first growth quotient",
            format!("2 K q_N <= (2 K q_N)^(1/(1+q_(N-1))) at N = {n}"),
        ));
    }
    Ok(())
}

/// Exact check, for `n = m + 1`, of the left side of the growth condition
/// `(2Kq_{n−1})^{1/(1+q_{n−2})} < q_n^{1/(1+q_{n−1})}` and of the step bound
/// `q_n^{1/(1+q_{n−1})} < (4Kb q_{n−1})^{1/(1+q_{n−2})}`, which together with
/// `q_{N+1} ≤ C^{1+q_N}` yields the right side by induction.
pub fn check_growth_step(
    cf: &ContinuedFraction,
    n: usize,
    k: &GrowthConstant,
    b: u64,
) -> Result<(), CfError> {
    let idx = n as isize;
    let (qn, q1, q2) = (cf.q(idx), cf.q(idx - 1), cf.q(idx - 2));
    let e1 = q1 + 1u32;
    let e0 = q2 + 1u32;
    let g = e1.gcd(&e0);
    let (e1, e0) = (&e1 / &g, &e0 / &g);
    let digits = (log10_big(&(&k.num * to_biguint(q1) * (4 * b))) + log10_big(&k.den))
        * e1.to_f64().unwrap_or(f64::INFINITY);
    guard(
        &format!("growth bound check at n = {n}"),
        digits,
        CHECK_DIGIT_BUDGET,
    )?;
    let (e1, e0) = (
        e1.to_u32().unwrap_or(u32::MAX),
        e0.to_u32().unwrap_or(u32::MAX),
    );
    let lhs = (&k.num * to_biguint(q1) * 2u32).pow(e1);
    let mid = to_biguint(qn).pow(e0) * k.den.pow(e1);
    if lhs >= mid {
        return Err(failed(
            "growth bound",
            format!("left inequality fails at n = {n}"),
        ));
    }
    let rhs = (&k.num * to_biguint(q1) * (4 * b)).pow(e1);
    if mid >= rhs {
        return Err(failed(
            "growth bound",
            format!("q_n^(1/(1+q_(n-1))) < (4Kb q_(n-1))^(1/(1+q_(n-2))) fails at n = {n}"),
        ));
    }
    Ok(())
}

/// Appends the smallest multiple `a_{N+1}` of `b` with
/// `q_{N+1}^{1/(1+q_N)} > 2Kq_N`.
pub fn append_first_growth_quotient(
    cf: &mut ContinuedFraction,
    b: u64,
    k: &GrowthConstant,
    budget: f64,
) -> Result<(), CfError> {
    let n = cf.depth() as isize;
    let qn = cf.q(n).clone();
    guard("a_(N+1)", power_digits(2, k, &qn, &qn), budget)?;
    let e = exponent(&qn, "a_(N+1)")?;
    let (x, d) = scaled_power(2, k, &qn, e);
    // q_{N+1} = b·t·q_N + q_{N−1} ≥ ⌊x/d⌋ + 1
    let target: BigInt = BigInt::from(&x / &d + 1u32) - cf.q(n - 1);
    let step = BigInt::from(b) * &qn;
    let t = if target.is_positive() {
        target.div_ceil(&step).max(BigInt::one())
    } else {
        BigInt::one()
    };
    cf.push(&t * b)?;
    Ok(())
}

/// `a_{m+1} := b·⌈q_m⁻¹ (2K q_m)^{(1+q_m)/(1+q_{m−1})}⌉` from the last two
/// denominators `q_{m−1}`, `q_m`.
pub fn growth_quotient(
    q_prev: &BigInt,
    q_cur: &BigInt,
    k: &GrowthConstant,
    b: u64,
    budget: f64,
) -> Result<BigInt, CfError> {
    let pow_digits = power_digits(2, k, q_cur, q_cur);
    let ratio = q_prev.to_f64().map_or(f64::INFINITY, |x| x + 1.0);
    guard("a_(m+1)", pow_digits / ratio, budget)?;
    guard("a_(m+1) intermediate power", pow_digits, CHECK_DIGIT_BUDGET)?;
    let e1 = exponent(q_cur, "a_(m+1)")?;
    let e0 = exponent(q_prev, "a_(m+1)")?;
    let g = e1.gcd(&e0);
    let (a_num, a_den) = scaled_power(2, k, q_cur, e1 / g);
    let z = ceil_root_ratio(&a_num, &a_den, e0 / g);
    let y = z.div_ceil(&to_biguint(q_cur));
    Ok(BigInt::from(y) * b)
}

#[derive(Debug, Clone)]
pub struct Extension {
    pub cf: ContinuedFraction,
    /// Index `N` at which the congruence prefix ends.
    pub prefix_tip: usize,
    pub steps_requested: usize,
    pub steps_completed: usize,
    /// Why the extension stopped early, if it did.
    pub stopped: Option<CfError>,
}

/// Appends `a_{N+1}` and then up to `steps` growth quotients, stopping at the
/// first one that would exceed the digit budget.
pub fn extend_within_budget(
    prefix: &ContinuedFraction,
    a: i64,
    b: u64,
    k: &BigRational,
    steps: usize,
    budget: f64,
) -> Result<Extension, CfError> {
    check_modulus(a, b)?;
    let kc = GrowthConstant::new(k)?;
    let n = prefix.depth();
    if !prefix_congruences_hold(prefix, n, a, b) {
        return Err(CfError::InvalidInput(format!(
            "prefix tip N = {n} does not satisfy p_N ≡ p_(N-1) ≡ a (mod b)"
        )));
    }
    let mut cf = prefix.clone();
    append_first_growth_quotient(&mut cf, b, &kc, budget)?;
    check_first_growth(&cf, n, &kc)?;
    if !congruent(&cf, n + 1, a, b) {
        return Err(failed(
            "growth congruences",
            format!("p_(N+1) ≢ a at N = {n}"),
        ));
    }

    let mut completed = 0;
    let mut stopped = None;
    while completed < steps {
        let m = cf.depth() as isize;
        let next = match growth_quotient(cf.q(m - 1), cf.q(m), &kc, b, budget) {
            Ok(x) => x,
            Err(e) => {
                stopped = Some(e);
                break;
            }
        };
        let mut trial = cf.clone();
        trial.push(next)?;
        let idx = trial.depth();
        if !(congruent(&trial, idx, a, b) && congruent(&trial, idx - 1, a, b)) {
            return Err(failed(
                "growth congruences",
                format!("congruence lost at n = {idx}"),
            ));
        }
        match check_growth_step(&trial, idx, &kc, b) {
            Ok(()) => {}
            Err(e @ CfError::DigitBudget { .. }) => {
                stopped = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
        cf = trial;
        completed += 1;
    }
    Ok(Extension {
        cf,
        prefix_tip: n,
        steps_requested: steps,
        steps_completed: completed,
        stopped,
    })
}

pub(crate) fn failed(check: &str, detail: String) -> CfError {
    CfError::VerificationFailed {
        check: check.to_string(),
        n: None,
        detail,
    }
}

/// Appends `a_{N+1}` and exactly `steps` further growth quotients; fails if
/// any of them would exceed [`DIGIT_BUDGET`].
pub fn extend_nonfinite(
    cf: &ContinuedFraction,
    a: i64,
    b: u64,
    k: &BigRational,
    steps: usize,
) -> Result<ContinuedFraction, CfError> {
    let ext = extend_within_budget(cf, a, b, k, steps, DIGIT_BUDGET)?;
    match ext.stopped {
        Some(e) => Err(e),
        None => Ok(ext.cf),
    }
}
