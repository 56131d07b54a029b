//! Seeded Monte-Carlo sampling of attainment and the evidence-based
//! classifier into the four sets `U1`–`U4`.
//!
//! Random stream contract: sample `i` is drawn from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i / 256`, as the
//! `(i mod 256)`-th `f64` in `[0, 1)` of that stream, mapped to `θ = 2π·u`
//! (`u = 0` is redrawn so that `θ ∈ (0, 2π)`).

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{reduce, CanonicalError, CanonicalPair};
use crate::cf::{verify_certificate, CfError, NonFinitenessCertificate};
use crate::mat2::Matrix2;
use crate::spectrum::{
    find_zero_product, lsr_estimate, AttainmentStatus, LsrEstimate, ZeroProductCert,
};

pub const SAMPLE_BATCH: u64 = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
    #[error("certificate rejected: {0}")]
    Certificate(#[from] CfError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOutcome {
    AttainedPositive,
    Zero,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u64,
    pub theta: f64,
    pub value: f64,
    pub argmin: Option<u64>,
    pub outcome: SampleOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureStats {
    pub lambda: f64,
    pub alpha: f64,
    pub samples: u64,
    pub truncation: u64,
    pub seed: u64,
    pub attained_positive_fraction: f64,
    pub zero_fraction: f64,
    pub undetermined_fraction: f64,
    /// Count of samples per minimizing index.
    pub argmin_histogram: BTreeMap<u64, u64>,
}

/// `θ` for sample `index` under the stream contract above.
pub fn sample_theta(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index / SAMPLE_BATCH);
    let mut theta = 0.0;
    for _ in 0..=index % SAMPLE_BATCH {
        theta = draw(&mut rng);
    }
    theta
}

fn draw(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return TAU * u;
        }
    }
}

fn record(lambda: f64, alpha: f64, theta: f64, truncation: u64, index: u64) -> SampleRecord {
    let est = lsr_estimate(lambda, alpha, theta, truncation);
    let outcome = match est.status {
        AttainmentStatus::ZeroCertified => SampleOutcome::Zero,
        AttainmentStatus::AttainedHeuristic if est.value > 0.0 => SampleOutcome::AttainedPositive,
        _ => SampleOutcome::Undetermined,
    };
    SampleRecord {
        index,
        theta,
        value: est.value,
        argmin: est.argmin,
        outcome,
    }
}

/// Per-sample records in index order.
pub fn sample_records(
    lambda: f64,
    alpha: f64,
    samples: u64,
    truncation: u64,
    seed: u64,
) -> Vec<SampleRecord> {
    let batches = samples.div_ceil(SAMPLE_BATCH);
    (0..batches)
        .into_par_iter()
        .flat_map_iter(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch);
            let start = batch * SAMPLE_BATCH;
            let end = (start + SAMPLE_BATCH).min(samples);
            (start..end)
                .map(|i| {
                    let theta = draw(&mut rng);
                    record(lambda, alpha, theta, truncation, i)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn summarize(
    lambda: f64,
    alpha: f64,
    truncation: u64,
    seed: u64,
    records: &[SampleRecord],
) -> MeasureStats {
    let total = records.len() as u64;
    let count = |o: SampleOutcome| records.iter().filter(|r| r.outcome == o).count() as u64;
    let (pos, zero) = (
        count(SampleOutcome::AttainedPositive),
        count(SampleOutcome::Zero),
    );
    let undetermined = total - pos - zero;
    let mut argmin_histogram = BTreeMap::new();
    for r in records {
        if let Some(m) = r.argmin {
            *argmin_histogram.entry(m).or_insert(0) += 1;
        }
    }
    let frac = |c: u64| {
        if total == 0 {
            0.0
        } else {
            c as f64 / total as f64
        }
    };
    MeasureStats {
        lambda,
        alpha,
        samples: total,
        truncation,
        seed,
        attained_positive_fraction: frac(pos),
        zero_fraction: frac(zero),
        undetermined_fraction: frac(undetermined),
        argmin_histogram,
    }
}

/// Draws `samples` angles and aggregates attainment statuses of
/// `lsr_estimate(λ, α, θ, N)`.
pub fn sample_measure(
    lambda: f64,
    alpha: f64,
    samples: u64,
    truncation: u64,
    seed: u64,
) -> Result<MeasureStats, ExperimentError> {
    let (stats, _) = sample_measure_detailed(lambda, alpha, samples, truncation, seed)?;
    Ok(stats)
}

pub fn sample_measure_detailed(
    lambda: f64,
    alpha: f64,
    samples: u64,
    truncation: u64,
    seed: u64,
) -> Result<(MeasureStats, Vec<SampleRecord>), ExperimentError> {
    if samples == 0 {
        return Err(ExperimentError::InvalidArgument(
            "samples must be at least 1".into(),
        ));
    }
    if lambda == 0.0 || !lambda.is_finite() || !alpha.is_finite() {
        return Err(ExperimentError::InvalidArgument(format!(
            "need finite lambda != 0 and finite alpha, got ({lambda}, {alpha})"
        )));
    }
    let records = sample_records(lambda, alpha, samples, truncation, seed);
    Ok((
        summarize(lambda, alpha, truncation, seed, &records),
        records,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairLabel {
    U1,
    U2,
    U3,
    U4,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRef {
    pub a: i64,
    pub b: u64,
    pub q_tip: String,
    pub checked_to: u64,
    pub positivity_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub canonical: CanonicalPair,
    pub lsr: LsrEstimate,
    pub zero_product: Option<ZeroProductCert>,
    pub certificate: Option<CertificateRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClass {
    pub label: PairLabel,
    pub heuristic: bool,
    /// Lower spectral radius estimate of the input pair (`γ` times the
    /// canonical value).
    pub value: f64,
    pub evidence: Evidence,
}

impl PairClass {
    /// Whether the label agrees with the evidence it carries.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let e = &self.evidence;
        match self.label {
            PairLabel::U2 => e.zero_product.is_some() && !self.heuristic,
            PairLabel::U3 => e.certificate.is_some() && !self.heuristic,
            PairLabel::U4 => {
                e.lsr.status == AttainmentStatus::AttainedHeuristic
                    && self.value > 0.0
                    && self.heuristic
            }
            PairLabel::U1 => e.zero_product.is_none() && self.value < tol && self.heuristic,
            PairLabel::Unresolved => self.heuristic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub truncation: u64,
    pub zero_search: u64,
    pub tol: f64,
}

/// [`classify_with`] without a certificate.
pub fn classify(
    h: &Matrix2,
    r: &Matrix2,
    truncation: u64,
    zero_search: u64,
    tol: f64,
) -> Result<PairClass, ExperimentError> {
    classify_with(
        h,
        r,
        ClassifyOptions {
            truncation,
            zero_search,
            tol,
        },
        None,
    )
}

/// Labels `(h, r)`. Order: a re-verified certificate matching the pair gives
/// `U3` (its exact bound rules out zero products, which floating point cannot
/// near `m = q_N`); a zero product gives `U2`; heuristic attainment with a
/// positive value gives `U4`; a value below `tol` gives `U1`; otherwise
/// `Unresolved`.
pub fn classify_with(
    h: &Matrix2,
    r: &Matrix2,
    opts: ClassifyOptions,
    certificate: Option<&NonFinitenessCertificate>,
) -> Result<PairClass, ExperimentError> {
    let c = reduce(h, r)?;
    let lsr = lsr_estimate(c.lambda, c.alpha, c.theta, opts.truncation);
    let search = match lsr.status {
        AttainmentStatus::ZeroCertified => opts.zero_search.max(lsr.truncation),
        _ => opts.zero_search,
    };
    let zero_product = find_zero_product(c.lambda, c.alpha, c.theta, search);
    let value = c.gamma * lsr.value;

    let cert_ref = match certificate {
        Some(cert) => {
            if !matches_pair(cert, &c) {
                return Err(ExperimentError::InvalidArgument(
                    "certificate does not describe this pair".into(),
                ));
            }
            verify_certificate(cert, cert.checked_to)?;
            Some(CertificateRef {
                a: cert.a,
                b: cert.b,
                q_tip: cert.q_tip.to_string(),
                checked_to: cert.checked_to,
                positivity_floor: cert.positivity_floor,
            })
        }
        None => None,
    };

    let (label, heuristic) = if cert_ref.is_some() {
        (PairLabel::U3, false)
    } else if zero_product.is_some() {
        (PairLabel::U2, false)
    } else if lsr.status == AttainmentStatus::AttainedHeuristic && value > 0.0 {
        (PairLabel::U4, true)
    } else if value < opts.tol {
        (PairLabel::U1, true)
    } else {
        (PairLabel::Unresolved, true)
    };
    Ok(PairClass {
        label,
        heuristic,
        value,
        evidence: Evidence {
            canonical: c,
            lsr,
            zero_product,
            certificate: cert_ref,
        },
    })
}

/// The certificate's `(λ, α, θ)` agrees with the canonical pair up to
/// `(θ, α) ↦ (−θ, −α)` and `θ ↦ θ + π`, which leave every `|ξ_n|` unchanged.
pub fn matches_pair(cert: &NonFinitenessCertificate, c: &CanonicalPair) -> bool {
    use num_traits::ToPrimitive;
    let p = &cert.pair_params;
    let lam = p.lambda.to_f64().unwrap_or(f64::NAN);
    let tol = 1e-9;
    let near = |x: f64, y: f64| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0);
    let in_enclosure = |theta: f64| {
        let (lo, hi) = (p.theta_lo.min(p.theta_hi), p.theta_lo.max(p.theta_hi));
        let mid = 0.5 * (lo + hi);
        let shifted = theta + PI * ((mid - theta) / PI).round();
        shifted >= lo - tol && shifted <= hi + tol
    };
    // Normalise the sign of λ through (H, R) ↦ (−H, R).
    let (cl, ca) = if (c.lambda > 0.0) == (lam > 0.0) {
        (c.lambda, c.alpha)
    } else {
        (-c.lambda, -c.alpha)
    };
    near(cl, lam)
        && ((near(ca, p.alpha) && in_enclosure(c.theta))
            || (near(-ca, p.alpha) && in_enclosure(-c.theta)))
}
