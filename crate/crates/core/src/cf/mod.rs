//! Exact continued fractions and the non-finiteness forge.
//!
//! Everything that decides a certificate runs on big integers and rationals.
//! Floating point appears only in informational fields (the pair parameters
//! and the positivity floor).

pub mod certificate;
pub mod forge;
pub mod fraction;
pub mod interval;
pub mod serde_big;

use thiserror::Error;

pub use certificate::{
    make_pair, make_pair_with, verify_certificate, Branch, MakePairOptions,
    NonFinitenessCertificate, PairParams, VerifyReport, WitnessRow,
};
pub use forge::{
    extend_nonfinite, extend_within_budget, seed_congruent_prefix, seed_congruent_prefix_above,
    CongruentPrefix, Extension, GrowthConstant, DIGIT_BUDGET,
};
pub use fraction::{ceil_rational_power, convergents, ContinuedFraction};
pub use interval::{coset_distance, dist_coset, eval_enclosure, RationalInterval};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CfError {
    #[error("partial quotient a_{index} = {value} is not a positive integer")]
    InvalidQuotient { index: usize, value: String },
    #[error("depth {requested} requested but only {available} quotients are available")]
    DepthExceeded { requested: usize, available: usize },
    #[error("enclosure of width {width:e} straddles a midpoint between coset points; deepen the enclosure")]
    AmbiguousCoset { width: f64 },
    #[error("enclosure too wide ({common_terms} common quotients): {detail}")]
    EnclosureTooWide { common_terms: usize, detail: String },
    #[error("digit budget exceeded at {stage}: {} against a budget of {budget:e}", describe_digits(.estimated_digits))]
    DigitBudget {
        stage: String,
        estimated_digits: f64,
        budget: f64,
    },
    #[error("no prime b <= {b_max} gives |alpha - target| < {epsilon}; best error {best_error}")]
    NoRationalAngle {
        b_max: u64,
        epsilon: f64,
        best_error: f64,
    },
    #[error("n_max = {n_max} exceeds what the certificate can support ({budget})")]
    CheckBudget { n_max: u64, budget: String },
    #[error("verification failed in {check}{}: {detail}", .n.map(|n| format!(" at n = {n}")).unwrap_or_default())]
    VerificationFailed {
        check: String,
        n: Option<u64>,
        detail: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn describe_digits(digits: &f64) -> String {
    if digits.is_finite() {
        format!("about {digits:e} digits")
    } else {
        "more than 1e308 digits".to_string()
    }
}
