//! Non-finiteness certificates: a forged `ϑ` with its exact inequality ledger,
//! and the pair `(λ, α, θ = πϑ/b)` it induces.
//!
//! For `q_j ≤ n < q_{j+1}` the witness is `q_N` when `j < N` and `q_{j+1}`
//! otherwise. Per `n` the verifier checks exactly
//!
//! * `dist(nϑ, a + bℤ) > 1/(2q_{j+1})`,
//! * `d·(2Kq_N)^{n+1} > K` (below the tip), or
//!   `d^{1+q_j}·(2Kq_{j+1})^{n+1} > K^{1+q_j}` (past the tip),
//!
//! where `d` is an exact lower bound for the distance. Combined with the
//! checked growth inequalities these give
//! `dist(nϑ)^{1/(n+1)} > K^{1/(n+1)} dist(qϑ)^{1/(q+1)}` for the witness `q`.

use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forge::{
    append_first_growth_quotient, check_first_growth, check_growth_step, check_modulus, congruent,
    extend_within_budget, failed, growth_quotient, prefix_congruences_hold,
    seed_congruent_prefix_above, GrowthConstant, CHECK_DIGIT_BUDGET, DIGIT_BUDGET,
};
use super::fraction::{decimal_digits, is_prime, residue, ContinuedFraction};
use super::interval::{coset_distance_lower, dyadic_enclosure, eval_enclosure, RationalInterval};
use super::{serde_big, CfError};
use crate::spectrum::ratio_bound;

pub const CERTIFICATE_FORMAT: u32 = 1;
const FIRST_DYADIC_BITS: u64 = 256;
const DELTA_GUARD_BITS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `n < q_N`, witness `q_N`.
    BelowTip,
    /// `q_j ≤ n < q_{j+1}` with `j ≥ N`, witness `q_{j+1}`.
    Growth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub n: u64,
    /// Largest `j` with `q_j ≤ n`.
    pub j: i64,
    #[serde(with = "serde_big::int")]
    pub q: BigInt,
    pub branch: Branch,
    /// `2 q_{j+1} · d − 1`, informational.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    #[serde(with = "serde_big::rational")]
    pub lambda: BigRational,
    pub alpha: f64,
    pub alpha_exact: String,
    /// `θ = πϑ/b + kπ`; the shift does not change `|ξ_n|`.
    pub theta_shift: i64,
    pub theta: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub vartheta: f64,
    pub ratio_grid: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonFinitenessCertificate {
    pub format: u32,
    #[serde(with = "serde_big::int")]
    pub a0: BigInt,
    #[serde(with = "serde_big::int_vec")]
    pub quotients: Vec<BigInt>,
    pub a: i64,
    pub b: u64,
    #[serde(with = "serde_big::rational")]
    pub k: BigRational,
    pub prefix_tip: usize,
    pub steps_requested: usize,
    pub steps_completed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<String>,
    pub checked_to: u64,
    /// `C = 2^c` with `q_{N+1} ≤ C^{1+q_N}`.
    pub c_exponent: u64,
    #[serde(with = "serde_big::int")]
    pub q_tip: BigInt,
    pub witness_table: Vec<WitnessRow>,
    #[serde(with = "serde_big::rational")]
    pub delta_lower: BigRational,
    #[serde(with = "serde_big::rational")]
    pub delta_tail: BigRational,
    pub pair_params: PairParams,
    pub c0: f64,
    pub positivity_floor: f64,
}

impl NonFinitenessCertificate {
    pub fn continued_fraction(&self) -> Result<ContinuedFraction, CfError> {
        super::fraction::convergents(self.a0.clone(), self.quotients.clone())
    }

    /// `min(delta_lower, delta_tail)`.
    pub fn delta(&self) -> BigRational {
        self.delta_lower.clone().min(self.delta_tail.clone())
    }

    /// Distinct witness denominators in table order.
    pub fn witness_denominators(&self) -> Vec<BigInt> {
        let mut out: Vec<BigInt> = Vec::new();
        for row in &self.witness_table {
            if out.last() != Some(&row.q) {
                out.push(row.q.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MakePairOptions {
    pub checked_to: u64,
    pub b_max: u64,
    pub digit_budget: f64,
    pub ratio_grid: u64,
}

impl Default for MakePairOptions {
    fn default() -> Self {
        MakePairOptions {
            checked_to: 1000,
            b_max: 50,
            digit_budget: DIGIT_BUDGET,
            ratio_grid: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n_max: u64,
    pub checks: Vec<String>,
    pub below_tip_rows: u64,
    pub growth_rows: u64,
    #[serde(with = "serde_big::rational")]
    pub delta_lower: BigRational,
    #[serde(with = "serde_big::rational")]
    pub delta_tail: BigRational,
    pub positivity_floor: f64,
    pub steps_requested: usize,
    pub steps_completed: usize,
}

/// Closest `α = −λ cot(πa/b)` to `alpha_target` over primes `5 ≤ b ≤ b_max`
/// and `0 < 2|a| < b`. Returns `(a, b, α, error)`.
pub fn select_angle(lambda: f64, alpha_target: f64, b_max: u64) -> Option<(i64, u64, f64, f64)> {
    let mut best: Option<(i64, u64, f64, f64)> = None;
    for b in (5..=b_max).filter(|&b| is_prime(b)) {
        let half = (b as i64 - 1) / 2;
        for a in (-half..=half).filter(|&a| a != 0) {
            let alpha = -lambda / (PI * a as f64 / b as f64).tan();
            let err = (alpha - alpha_target).abs();
            if best.is_none_or(|(_, _, _, e)| err < e) {
                best = Some((a, b, alpha, err));
            }
        }
    }
    best
}

/// [`make_pair_with`] under default options.
pub fn make_pair(
    lambda: &BigRational,
    alpha_target: f64,
    theta_target: f64,
    k: &BigRational,
    eps: f64,
    steps: usize,
) -> Result<NonFinitenessCertificate, CfError> {
    make_pair_with(
        lambda,
        alpha_target,
        theta_target,
        k,
        eps,
        steps,
        &MakePairOptions::default(),
    )
}

/// Forges `ϑ` near `b·θ̃/π`, extends it by up to `steps` growth quotients and
/// records the verified ledger for `n ≤ checked_to`.
pub fn make_pair_with(
    lambda: &BigRational,
    alpha_target: f64,
    theta_target: f64,
    k: &BigRational,
    eps: f64,
    steps: usize,
    opts: &MakePairOptions,
) -> Result<NonFinitenessCertificate, CfError> {
    let lam = lambda.to_f64().unwrap_or(f64::NAN);
    if lambda.is_zero() || !lam.is_finite() {
        return Err(CfError::InvalidInput(
            "lambda must be a finite nonzero rational".into(),
        ));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CfError::InvalidInput(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    if !alpha_target.is_finite() || !theta_target.is_finite() {
        return Err(CfError::InvalidInput("targets must be finite".into()));
    }
    let kc = GrowthConstant::new(k)?;

    let (a, b, alpha, err) =
        select_angle(lam, alpha_target, opts.b_max).ok_or(CfError::NoRationalAngle {
            b_max: opts.b_max,
            epsilon: eps,
            best_error: f64::INFINITY,
        })?;
    if err >= eps {
        return Err(CfError::NoRationalAngle {
            b_max: opts.b_max,
            epsilon: eps,
            best_error: err,
        });
    }

    let shift = ((theta_target - PI / 2.0) / PI).ceil() as i64;
    let reduced = theta_target - shift as f64 * PI;
    let vartheta_target = b as f64 * reduced / PI;
    let target = BigRational::from_float(vartheta_target)
        .ok_or_else(|| CfError::InvalidInput("theta target is not representable".into()))?;
    let eps_vartheta = BigRational::from_float(0.5 * eps * b as f64 / PI)
        .filter(|e| e.is_positive())
        .ok_or_else(|| CfError::InvalidInput("epsilon underflows".into()))?;

    let prefix = seed_congruent_prefix_above(
        &RationalInterval::point(target),
        a,
        b,
        &eps_vartheta,
        &BigInt::from(opts.checked_to),
    )?;
    let ext = extend_within_budget(&prefix.cf, a, b, k, steps, opts.digit_budget)?;
    let cf = ext.cf;
    let n_tip = ext.prefix_tip;

    let c_exponent = c_exponent(&cf, n_tip)?;
    let delta_tail = delta_tail(&kc, b, c_exponent);
    let budget = n_budget(&cf)?;
    if opts.checked_to > budget {
        return Err(CfError::CheckBudget {
            n_max: opts.checked_to,
            budget: budget.to_string(),
        });
    }
    let (witness_table, delta_lower) = evaluate_range(&cf, a, b, &kc, n_tip, opts.checked_to)?;

    let pair_params = pair_params(lambda, a, b, alpha, shift, &cf, opts.ratio_grid);
    let c0 = ratio_bound(lam, alpha, opts.ratio_grid)
        .map_err(|e| CfError::InvalidInput(e.to_string()))?
        .c0;
    let delta = delta_lower.clone().min(delta_tail.clone());
    let positivity_floor = floor_value(&delta, c0, b);

    Ok(NonFinitenessCertificate {
        format: CERTIFICATE_FORMAT,
        a0: cf.a0().clone(),
        quotients: cf.quotients().to_vec(),
        a,
        b,
        k: k.clone(),
        prefix_tip: n_tip,
        steps_requested: ext.steps_requested,
        steps_completed: ext.steps_completed,
        stop_reason: ext.stopped.map(|e| e.to_string()),
        checked_to: opts.checked_to,
        c_exponent,
        q_tip: cf.q(n_tip as isize).clone(),
        witness_table,
        delta_lower,
        delta_tail,
        pair_params,
        c0,
        positivity_floor,
    })
}

fn floor_value(delta: &BigRational, c0: f64, b: u64) -> f64 {
    PI * delta.to_f64().unwrap_or(0.0) / (c0 * b as f64)
}

fn pair_params(
    lambda: &BigRational,
    a: i64,
    b: u64,
    alpha: f64,
    shift: i64,
    cf: &ContinuedFraction,
    ratio_grid: u64,
) -> PairParams {
    let m = cf.depth();
    let vartheta = cf.convergent(m).to_f64().unwrap_or(f64::NAN);
    let (lo, hi) = match eval_enclosure(cf, m) {
        Ok(e) => (
            e.lo.to_f64().unwrap_or(f64::NAN),
            e.hi.to_f64().unwrap_or(f64::NAN),
        ),
        Err(_) => (vartheta, vartheta),
    };
    let to_theta = |v: f64| PI * v / b as f64 + shift as f64 * PI;
    PairParams {
        lambda: lambda.clone(),
        alpha,
        alpha_exact: format!("-({})*cot({a}*pi/{b})", serde_big::format_rational(lambda)),
        theta_shift: shift,
        theta: to_theta(vartheta),
        theta_lo: to_theta(lo),
        theta_hi: to_theta(hi),
        vartheta,
        ratio_grid,
    }
}

/// Smallest `c ≥ 1` with `q_{N+1} ≤ 2^{c(1+q_N)}`.
fn c_exponent(cf: &ContinuedFraction, n_tip: usize) -> Result<u64, CfError> {
    let e = (cf.q(n_tip as isize) + 1u32)
        .to_u64()
        .ok_or_else(|| CfError::InvalidInput("q_N does not fit in 64 bits".into()))?;
    let bits = (cf.q(n_tip as isize + 1) - 1u32).bits();
    Ok(bits.div_ceil(e).max(1))
}

/// `δ_tail = 1 / (2C (4Kb)^4)`.
fn delta_tail(k: &GrowthConstant, b: u64, c: u64) -> BigRational {
    let num = BigInt::from(k.den.pow(4));
    let den = BigInt::from((&k.num * (4 * b)).pow(4)) << (c + 1);
    BigRational::new(num, den)
}

/// Largest `n` the certificate supports: `q_{M−1} − 1`.
fn n_budget(cf: &ContinuedFraction) -> Result<u64, CfError> {
    let m = cf.depth() as isize;
    if m < 1 {
        return Err(failed(
            "structure",
            "continued fraction has no quotients".into(),
        ));
    }
    Ok((cf.q(m - 1) - 1u32).to_u64().unwrap_or(u64::MAX))
}

struct RowResult {
    row: WitnessRow,
    distance: BigRational,
}

fn evaluate_range(
    cf: &ContinuedFraction,
    a: i64,
    b: u64,
    k: &GrowthConstant,
    n_tip: usize,
    n_max: u64,
) -> Result<(Vec<WitnessRow>, BigRational), CfError> {
    let results: Vec<Result<RowResult, CfError>> = (0..=n_max)
        .into_par_iter()
        .map(|n| evaluate_n(cf, a, b, k, n_tip, n))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut distances = Vec::with_capacity(results.len());
    for r in results {
        let r = r?;
        distances.push((r.row.n, r.distance));
        rows.push(r.row);
    }
    Ok((rows, min_root_lower(&distances)))
}

fn log2_big(x: &BigInt) -> f64 {
    let x = x.magnitude();
    let shift = x.bits().saturating_sub(60);
    (x >> shift).to_f64().unwrap_or(f64::INFINITY).log2() + shift as f64
}

/// Dyadic `δ ≤ min_n d_n^{1/(n+1)}`, with one exact root and one exact power per row.
fn min_root_lower(distances: &[(u64, BigRational)]) -> BigRational {
    let estimate =
        |(n, d): &(u64, BigRational)| (log2_big(d.numer()) - log2_big(d.denom())) / (n + 1) as f64;
    let start = distances
        .iter()
        .min_by(|x, y| estimate(x).total_cmp(&estimate(y)))
        .expect("range is nonempty");
    let mut delta = root_lower(&start.1, start.0);
    loop {
        let violated = distances
            .par_iter()
            .find_first(|(n, d)| !power_at_most(&delta, *n + 1, d));
        match violated {
            None => return delta,
            Some((n, d)) => delta = delta.min(root_lower(d, *n)),
        }
    }
}

/// `y^e ≤ d` for a dyadic `y`.
fn power_at_most(y: &BigRational, e: u64, d: &BigRational) -> bool {
    let e = e as u32;
    y.numer().pow(e) * d.denom() <= d.numer() * y.denom().pow(e)
}

fn at(n: u64, e: CfError) -> CfError {
    match e {
        CfError::VerificationFailed { check, detail, .. } => CfError::VerificationFailed {
            check,
            n: Some(n),
            detail,
        },
        other => other,
    }
}

fn evaluate_n(
    cf: &ContinuedFraction,
    a: i64,
    b: u64,
    k: &GrowthConstant,
    n_tip: usize,
    n: u64,
) -> Result<RowResult, CfError> {
    let m = cf.depth() as isize;
    let nb = BigInt::from(n);
    let j = cf.bracket(&nb).filter(|&j| j < m).ok_or_else(|| {
        at(
            n,
            failed("budget", "n lies beyond the last convergent".into()),
        )
    })?;
    let (branch, witness) = if j < n_tip as isize {
        (Branch::BelowTip, n_tip as isize)
    } else if j + 2 <= m {
        (Branch::Growth, j + 1)
    } else {
        return Err(at(
            n,
            failed("budget", format!("witness q_{} needs q_{}", j + 1, j + 2)),
        ));
    };

    let bound = BigRational::new(BigInt::one(), cf.q(j + 1) * 2u32);
    let d = distance_beyond(cf, a, b, n, &bound).ok_or_else(|| {
        at(
            n,
            failed(
                "coset distance",
                format!("dist(n·vartheta, a+bZ) > 1/(2 q_{}) not established", j + 1),
            ),
        )
    })?;

    match branch {
        Branch::BelowTip => witness_below_tip(&d, k, cf.q(n_tip as isize), n),
        Branch::Growth => witness_growth(&d, k, cf.q(j), cf.q(j + 1), n),
    }
    .map_err(|e| at(n, e))?;

    let margin = (&d / &bound).to_f64().unwrap_or(f64::INFINITY) - 1.0;
    Ok(RowResult {
        row: WitnessRow {
            n,
            j: j as i64,
            q: cf.q(witness).clone(),
            branch,
            margin,
        },
        distance: d,
    })
}

/// Exact lower bound `d > bound` for `dist(nϑ, a + bℤ)`, tightening the
/// enclosure of `ϑ` until the bound is established.
fn distance_beyond(
    cf: &ContinuedFraction,
    a: i64,
    b: u64,
    n: u64,
    bound: &BigRational,
) -> Option<BigRational> {
    let nb = BigInt::from(n);
    let mut s = FIRST_DYADIC_BITS;
    while let Some(enc) = dyadic_enclosure(cf, s) {
        let d = coset_distance_lower(&enc.scale(&nb), a, b);
        if &d > bound {
            return Some(d);
        }
        s *= 2;
    }
    let enc = eval_enclosure(cf, cf.depth()).ok()?;
    let d = coset_distance_lower(&enc.scale(&nb), a, b);
    (&d > bound).then_some(d)
}

fn guard(stage: &str, digits: f64) -> Result<(), CfError> {
    if digits.is_finite() && digits <= CHECK_DIGIT_BUDGET {
        Ok(())
    } else {
        Err(CfError::DigitBudget {
            stage: stage.to_string(),
            estimated_digits: digits,
            budget: CHECK_DIGIT_BUDGET,
        })
    }
}

fn big(x: &BigUint) -> BigInt {
    BigInt::from(x.clone())
}

/// `d·(2Kq_N)^{n+1} > K`.
fn witness_below_tip(
    d: &BigRational,
    k: &GrowthConstant,
    q_tip: &BigInt,
    n: u64,
) -> Result<(), CfError> {
    let base = big(&k.num) * q_tip * 2u32;
    guard(
        "witness check",
        (n + 1) as f64 * (decimal_digits(&base) + decimal_digits(&big(&k.den))),
    )?;
    let e = u32::try_from(n + 1).map_err(|_| CfError::InvalidInput("n too large".into()))?;
    let lhs = d.numer() * base.pow(e) * big(&k.den);
    let rhs = big(&k.num) * d.denom() * big(&k.den).pow(e);
    if lhs > rhs {
        Ok(())
    } else {
        Err(failed(
            "witness inequality",
            "d (2 K q_N)^(n+1) <= K".into(),
        ))
    }
}

/// `d^{1+q_j}·(2Kq_{j+1})^{n+1} > K^{1+q_j}`.
fn witness_growth(
    d: &BigRational,
    k: &GrowthConstant,
    q_j: &BigInt,
    q_next: &BigInt,
    n: u64,
) -> Result<(), CfError> {
    let base = big(&k.num) * q_next * 2u32;
    let e0f = q_j.to_f64().unwrap_or(f64::INFINITY) + 1.0;
    let digits = e0f
        * (decimal_digits(d.numer()) + decimal_digits(d.denom()) + decimal_digits(&big(&k.num)))
        + (n + 1) as f64 * (decimal_digits(&base) + decimal_digits(&big(&k.den)));
    guard("witness check", digits)?;
    let e0 = (q_j + 1u32).to_u32().expect("guarded");
    let e1 = u32::try_from(n + 1).map_err(|_| CfError::InvalidInput("n too large".into()))?;
    let lhs = d.numer().pow(e0) * base.pow(e1) * big(&k.den).pow(e0);
    let rhs = big(&k.num).pow(e0) * d.denom().pow(e0) * big(&k.den).pow(e1);
    if lhs > rhs {
        Ok(())
    } else {
        Err(failed(
            "witness inequality",
            "d^(1+q_j) (2 K q_(j+1))^(n+1) <= K^(1+q_j)".into(),
        ))
    }
}

/// Dyadic rational `y/2^S ≤ d^{1/(n+1)}`.
fn root_lower(d: &BigRational, n: u64) -> BigRational {
    let (num, den) = (d.numer().magnitude(), d.denom().magnitude());
    let s = (DELTA_GUARD_BITS + den.bits() + 1).saturating_sub(num.bits());
    let scaled: BigUint = (num << s) / den;
    let radicand = scaled << (s * n);
    let y = radicand.nth_root((n + 1) as u32);
    BigRational::new(BigInt::from(y), BigInt::one() << s)
}

fn mismatch(check: &str, detail: String) -> CfError {
    failed(check, detail)
}

/// Re-derives every recorded quantity of `cert` exactly and checks the
/// ledger for `n ≤ n_max`.
pub fn verify_certificate(
    cert: &NonFinitenessCertificate,
    n_max: u64,
) -> Result<VerifyReport, CfError> {
    let mut checks = Vec::new();
    let cf = cert
        .continued_fraction()
        .map_err(|e| mismatch("structure", e.to_string()))?;
    if cert.format != CERTIFICATE_FORMAT {
        return Err(mismatch(
            "structure",
            format!("unknown format {}", cert.format),
        ));
    }
    let (a, b) = (cert.a, cert.b);
    check_modulus(a, b).map_err(|e| mismatch("structure", e.to_string()))?;
    if b < 5 || 2 * a.unsigned_abs() >= b {
        return Err(mismatch(
            "structure",
            format!("a/b = {a}/{b} outside (-1/2, 1/2) or b < 5"),
        ));
    }
    let kc = GrowthConstant::new(&cert.k).map_err(|e| mismatch("structure", e.to_string()))?;
    let n_tip = cert.prefix_tip;
    let m = cf.depth();
    if n_tip < 1
        || m != n_tip + 1 + cert.steps_completed
        || cert.steps_completed > cert.steps_requested
    {
        return Err(mismatch(
            "structure",
            format!(
                "depth {m} does not match tip {n_tip} + 1 + {} completed steps",
                cert.steps_completed
            ),
        ));
    }
    checks.push("structure".to_string());

    if cf.q(n_tip as isize) != &cert.q_tip {
        return Err(mismatch(
            "q_tip",
            format!("q_N = {} but {} recorded", cf.q(n_tip as isize), cert.q_tip),
        ));
    }
    if !prefix_congruences_hold(&cf, n_tip, a, b) {
        return Err(mismatch(
            "prefix congruences",
            format!("p_N or p_(N-1) not ≡ {a} (mod {b}) at N = {n_tip}"),
        ));
    }
    checks.push("prefix congruences".to_string());

    let mut minimal = cf.truncated(n_tip);
    append_first_growth_quotient(&mut minimal, b, &kc, CHECK_DIGIT_BUDGET)?;
    if minimal.quotient(n_tip + 1) != cf.quotient(n_tip + 1) {
        return Err(mismatch(
            "first growth quotient",
            format!(
                "a_(N+1) = {} is not the minimal admissible multiple of b",
                cf.quotient(n_tip + 1)
            ),
        ));
    }
    check_first_growth(&cf, n_tip, &kc)?;
    checks.push("first growth quotient".to_string());

    for idx in n_tip + 1..=m {
        if residue(cf.quotient(idx), b) != 0 {
            return Err(mismatch(
                "growth congruences",
                format!("a_{idx} not divisible by b"),
            ));
        }
        if !congruent(&cf, idx, a, b) {
            return Err(mismatch(
                "growth congruences",
                format!("p_{idx} not ≡ a (mod b)"),
            ));
        }
    }
    checks.push("growth congruences".to_string());

    for idx in n_tip + 2..=m {
        let i = idx as isize;
        let want = growth_quotient(cf.q(i - 2), cf.q(i - 1), &kc, b, CHECK_DIGIT_BUDGET)?;
        if &want != cf.quotient(idx) {
            return Err(mismatch(
                "growth bound",
                format!("a_{idx} differs from the growth formula"),
            ));
        }
        check_growth_step(&cf, idx, &kc, b)?;
    }
    checks.push("growth bound".to_string());

    let c = c_exponent(&cf, n_tip)?;
    if c != cert.c_exponent {
        return Err(mismatch(
            "constant C",
            format!("c = {c} but {} recorded", cert.c_exponent),
        ));
    }
    let tail = delta_tail(&kc, b, c);
    if tail != cert.delta_tail {
        return Err(mismatch("delta bound", "delta_tail does not match".into()));
    }
    checks.push("constant C".to_string());

    let budget = n_budget(&cf)?;
    if n_max > budget || cert.checked_to > budget {
        return Err(CfError::CheckBudget {
            n_max: n_max.max(cert.checked_to),
            budget: budget.to_string(),
        });
    }
    let (rows, delta_lower) = evaluate_range(&cf, a, b, &kc, n_tip, n_max)?;
    if cert.witness_table.len() as u64 != cert.checked_to + 1 {
        return Err(mismatch(
            "witness table",
            "table does not cover 0..=checked_to".into(),
        ));
    }
    for (got, rec) in rows.iter().zip(&cert.witness_table) {
        if got.n != rec.n || got.j != rec.j || got.q != rec.q || got.branch != rec.branch {
            return Err(CfError::VerificationFailed {
                check: "witness table".into(),
                n: Some(got.n),
                detail: "recorded witness differs from the recomputed one".into(),
            });
        }
    }
    checks.push("witness inequality".to_string());

    let delta_ok = match n_max.cmp(&cert.checked_to) {
        std::cmp::Ordering::Equal => delta_lower == cert.delta_lower,
        std::cmp::Ordering::Less => delta_lower >= cert.delta_lower,
        std::cmp::Ordering::Greater => true,
    };
    if !delta_ok || !delta_lower.is_positive() {
        return Err(mismatch("delta bound", "delta_lower does not match".into()));
    }
    checks.push("delta bound".to_string());

    check_pair_params(cert, &cf)?;
    checks.push("pair parameters".to_string());

    let (below, growth) = rows.iter().fold((0, 0), |(x, y), r| match r.branch {
        Branch::BelowTip => (x + 1, y),
        Branch::Growth => (x, y + 1),
    });
    let delta = delta_lower.clone().min(tail.clone());
    Ok(VerifyReport {
        n_max,
        checks,
        below_tip_rows: below,
        growth_rows: growth,
        positivity_floor: floor_value(&delta, cert.c0, b),
        delta_lower,
        delta_tail: tail,
        steps_requested: cert.steps_requested,
        steps_completed: cert.steps_completed,
    })
}

fn close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs()).max(1.0)
}

fn check_pair_params(
    cert: &NonFinitenessCertificate,
    cf: &ContinuedFraction,
) -> Result<(), CfError> {
    let p = &cert.pair_params;
    let lam = p.lambda.to_f64().unwrap_or(f64::NAN);
    let alpha = -lam / (PI * cert.a as f64 / cert.b as f64).tan();
    let expect = pair_params(
        &p.lambda,
        cert.a,
        cert.b,
        alpha,
        p.theta_shift,
        cf,
        p.ratio_grid,
    );
    let ok = close(p.alpha, expect.alpha, 1e-12)
        && close(p.vartheta, expect.vartheta, 1e-12)
        && close(p.theta, expect.theta, 1e-12)
        && p.alpha_exact == expect.alpha_exact;
    if !ok {
        return Err(mismatch(
            "pair parameters",
            "alpha or theta does not match the fraction".into(),
        ));
    }
    let c0 = ratio_bound(lam, alpha, p.ratio_grid)
        .map_err(|e| mismatch("pair parameters", e.to_string()))?
        .c0;
    if !close(c0, cert.c0, 1e-12) {
        return Err(mismatch("pair parameters", "C0 does not match".into()));
    }
    let floor = floor_value(&cert.delta(), c0, cert.b);
    if !close(floor, cert.positivity_floor, 1e-9) || floor.is_nan() || floor <= 0.0 {
        return Err(mismatch(
            "pair parameters",
            "positivity floor does not match".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn quick_opts() -> MakePairOptions {
        MakePairOptions {
            checked_to: 200,
            ..MakePairOptions::default()
        }
    }

    #[test]
    fn angle_search_oracle() {
        let (a, b, alpha, _) = select_angle(1.0, -0.12, 50).unwrap();
        assert_eq!((a, b), (6, 13));
        assert!((alpha + 1.0 / (6.0 * PI / 13.0).tan()).abs() < 1e-15);
        assert!((alpha + 0.1214).abs() < 1e-3);
    }

    #[test]
    fn no_rational_angle_for_huge_alpha() {
        let e = make_pair(&r(1, 1), 1e9, 1.0, &r(2, 1), 1e-6, 1).unwrap_err();
        assert!(matches!(e, CfError::NoRationalAngle { .. }), "{e}");
    }

    #[test]
    fn min_root_lower_bounds_every_row() {
        let rows = vec![
            (0u64, r(1, 2)),
            (3, r(1, 7)),
            (10, r(1, 1000)),
            (50, r(3, 1)),
        ];
        let delta = min_root_lower(&rows);
        for (n, d) in &rows {
            assert!(power_at_most(&delta, n + 1, d));
        }
        let want = 0.5;
        assert!((delta.to_f64().unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn root_lower_is_a_lower_bound() {
        for (d, n) in [
            (r(1, 3), 5u64),
            (r(7, 1), 2),
            (r(1, 100_003), 40),
            (r(5, 1), 0),
        ] {
            let y = root_lower(&d, n);
            let mut p = BigRational::one();
            for _ in 0..=n {
                p *= &y;
            }
            assert!(p <= d);
            let yf = y.to_f64().unwrap();
            let want = d.to_f64().unwrap().powf(1.0 / (n + 1) as f64);
            assert!((yf - want).abs() < 1e-12 * want.max(1.0), "{yf} vs {want}");
        }
    }

    #[test]
    fn forged_pair_verifies_and_serializes() {
        let cert = make_pair_with(&r(1, 1), -0.12, 1.0, &r(2, 1), 0.05, 3, &quick_opts()).unwrap();
        assert_eq!((cert.a, cert.b), (6, 13));
        assert!(cert.q_tip > BigInt::from(200));
        assert!(cert.steps_completed < cert.steps_requested);
        assert!(cert.stop_reason.is_some());
        assert!((cert.pair_params.theta - 1.0).abs() < 0.025);
        let report = verify_certificate(&cert, 200).unwrap();
        assert_eq!(report.below_tip_rows, 201);
        assert!(report.positivity_floor > 0.0);
        let json = serde_json::to_string(&cert).unwrap();
        let back: NonFinitenessCertificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cert);
        verify_certificate(&back, 120).unwrap();
    }

    #[test]
    fn tampered_quotients_fail() {
        let cert = make_pair_with(&r(1, 1), -0.12, 1.0, &r(2, 1), 0.05, 1, &quick_opts()).unwrap();
        for i in 0..=cert.quotients.len() {
            let mut bad = cert.clone();
            if i == 0 {
                bad.a0 -= 1;
            } else {
                bad.quotients[i - 1] -= 1;
            }
            assert!(
                matches!(
                    verify_certificate(&bad, 200),
                    Err(CfError::VerificationFailed { .. })
                ),
                "index {i}"
            );
        }
    }

    /// Small hand-built certificate whose range reaches past the tip, so the
    /// growth branch is exercised.
    #[test]
    fn growth_branch_is_checked_past_the_tip() {
        let prefix = ContinuedFraction::from_i64(2, &[1, 2]).unwrap();
        let ext = extend_within_budget(&prefix, 3, 5, &r(2, 1), 1, DIGIT_BUDGET).unwrap();
        assert_eq!(ext.steps_completed, 1);
        let kc = GrowthConstant::new(&r(2, 1)).unwrap();
        let (rows, delta) = evaluate_range(&ext.cf, 3, 5, &kc, ext.prefix_tip, 60).unwrap();
        assert!(rows.iter().any(|r| r.branch == Branch::BelowTip));
        let growth: Vec<_> = rows.iter().filter(|r| r.branch == Branch::Growth).collect();
        assert!(!growth.is_empty());
        assert!(growth
            .iter()
            .all(|r| &r.q == ext.cf.q(ext.prefix_tip as isize + 1)));
        assert!(delta.is_positive());
        assert!(rows.iter().all(|r| r.margin > 0.0));
    }

    #[test]
    fn below_tip_rows_use_q_tip() {
        let cert = make_pair_with(&r(1, 1), -0.12, 1.0, &r(2, 1), 0.05, 1, &quick_opts()).unwrap();
        assert!(cert
            .witness_table
            .iter()
            .all(|w| w.branch == Branch::BelowTip && w.q == cert.q_tip));
        assert_eq!(cert.witness_denominators(), vec![cert.q_tip.clone()]);
    }

    #[test]
    fn budget_is_enforced() {
        let cert = make_pair_with(&r(1, 1), -0.12, 1.0, &r(2, 1), 0.05, 1, &quick_opts()).unwrap();
        let beyond = cert.q_tip.to_u64().unwrap() + 5;
        assert!(matches!(
            verify_certificate(&cert, beyond),
            Err(CfError::CheckBudget { .. })
        ));
    }
}
