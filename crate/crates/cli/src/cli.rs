//! Argument definitions. Numeric flags keep the text the user typed so it can
//! be echoed back verbatim in the run metadata.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Serialize, Serializer};

/// A parsed value together with its original spelling.
#[derive(Debug, Clone)]
pub struct Arg<T> {
    pub raw: String,
    pub value: T,
}

impl<T> FromStr for Arg<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = s.trim().to_string();
        let value = raw
            .parse::<T>()
            .map_err(|e| format!("cannot parse {raw:?}: {e}"))?;
        Ok(Arg { raw, value })
    }
}

impl<T> Serialize for Arg<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.raw)
    }
}

/// Four row-major entries `a11,a12,a21,a22`.
#[derive(Debug, Clone, Copy)]
pub struct Entries(pub [f64; 4]);

impl FromStr for Entries {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!(
                "expected 4 comma-separated entries, got {}",
                parts.len()
            ));
        }
        let mut out = [0.0; 4];
        for (slot, p) in out.iter_mut().zip(&parts) {
            *slot = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
            if !slot.is_finite() {
                return Err(format!("{p:?} is not finite"));
            }
        }
        Ok(Entries(out))
    }
}

/// `p/q`, meaning the angle `πp/q`.
#[derive(Debug, Clone, Copy)]
pub struct PiFraction {
    pub p: i64,
    pub q: u64,
}

impl PiFraction {
    pub fn radians(&self) -> f64 {
        std::f64::consts::PI * self.p as f64 / self.q as f64
    }
}

impl FromStr for PiFraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (p, q) = s.split_once('/').unwrap_or((s, "1"));
        let p = p
            .trim()
            .parse::<i64>()
            .map_err(|e| format!("numerator: {e}"))?;
        let q = q
            .trim()
            .parse::<u64>()
            .map_err(|e| format!("denominator: {e}"))?;
        if q == 0 {
            return Err("denominator must be positive".into());
        }
        Ok(PiFraction { p, q })
    }
}

/// Exact rational from `p/q`, an integer, or a finite decimal such as `-0.125`.
#[derive(Debug, Clone)]
pub struct Exact(pub BigRational);

impl FromStr for Exact {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains('/') {
            return s
                .parse::<BigRational>()
                .map(Exact)
                .map_err(|e| e.to_string());
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty()
            || !(int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()))
        {
            return Err(format!("{s:?} is not a decimal or p/q"));
        }
        let digits: BigInt = format!("{int}{frac}").parse().map_err(|e| format!("{e}"))?;
        let value = BigRational::new(digits, BigInt::from(10u32).pow(frac.len() as u32));
        Ok(Exact(if neg { -value } else { value }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "lsr",
    version,
    about = "Lower spectral radius of rank-one/rotation matrix pairs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Maximum worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

/// A pair given either as matrices or as canonical parameters.
#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PairArgs {
    /// H as row-major entries `h11,h12,h21,h22`.
    #[arg(long, allow_hyphen_values = true, requires = "r", conflicts_with_all = ["lambda", "alpha", "theta", "theta_pi", "gamma"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Arg<Entries>>,

    /// R as row-major entries `r11,r12,r21,r22`.
    #[arg(long, allow_hyphen_values = true, requires = "h")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Arg<Entries>>,

    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Arg<f64>>,

    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Arg<f64>>,

    /// Rotation angle in radians.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "theta_pi")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Arg<f64>>,

    /// Rotation angle as `p/q`, meaning `πp/q`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_pi: Option<Arg<PiFraction>>,

    /// Scale of the canonical pair.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Arg<f64>>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged, rename_all_fields = "kebab-case")]
pub enum Command {
    /// Reduce (H, R) to canonical parameters.
    Reduce {
        #[command(flatten)]
        #[serde(flatten)]
        pair: PairArgs,
    },
    /// Truncated lower spectral radius estimate.
    Lsr {
        #[command(flatten)]
        #[serde(flatten)]
        pair: PairArgs,
        /// Truncation N.
        #[arg(long = "N", alias = "truncation", default_value = "10000")]
        #[serde(rename = "N")]
        n: Arg<u64>,
        /// Include every term of the scan.
        #[arg(long)]
        per_n: bool,
    },
    /// Search for a vanishing product H R^m H, or move θ onto one.
    Zeros {
        #[command(flatten)]
        #[serde(flatten)]
        pair: PairArgs,
        /// Largest m searched.
        #[arg(long = "M", alias = "m-max", default_value = "1000")]
        #[serde(rename = "M")]
        m_max: Arg<u64>,
        /// Also report the nearest angle with H R^m H = 0 for this m.
        #[arg(long)]
        #[serde(skip_serializing_if = "Option::is_none")]
        perturb: Option<Arg<u64>>,
    },
    /// Brute-force minimum growth over all words up to length L.
    Enumerate {
        #[command(flatten)]
        #[serde(flatten)]
        pair: PairArgs,
        #[arg(long = "L", alias = "l-max", default_value = "10")]
        #[serde(rename = "L")]
        l_max: Arg<usize>,
    },
    /// Check the single-block lower bound on every word up to length L.
    VerifyNewformula {
        #[command(flatten)]
        #[serde(flatten)]
        pair: PairArgs,
        #[arg(long = "L", alias = "l-max", default_value = "10")]
        #[serde(rename = "L")]
        l_max: Arg<usize>,
    },
    /// Construct a certified pair without the lower finiteness property.
    Forge {
        /// Exact nonzero λ (`p/q` or decimal).
        #[arg(long, allow_hyphen_values = true, default_value = "1")]
        lambda: Arg<Exact>,
        #[arg(long, allow_hyphen_values = true)]
        alpha_target: Arg<f64>,
        #[arg(long, allow_hyphen_values = true)]
        theta_target: Arg<f64>,
        /// Growth constant K > 1 (`p/q` or decimal).
        #[arg(long = "K", default_value = "2")]
        #[serde(rename = "K")]
        k: Arg<Exact>,
        #[arg(long, default_value = "0.05")]
        epsilon: Arg<f64>,
        #[arg(long, default_value = "3")]
        steps: Arg<usize>,
        /// Range of n recorded in the witness table.
        #[arg(long, default_value = "1000")]
        checked_to: Arg<u64>,
        #[arg(long, default_value = "50")]
        b_max: Arg<u64>,
        #[arg(long, default_value = "10000")]
        ratio_grid: Arg<u64>,
    },
    /// Re-check a certificate file exactly.
    VerifyCert {
        file: PathBuf,
        #[arg(long, default_value = "1000")]
        n_max: Arg<u64>,
    },
    /// Monte-Carlo statistics over uniformly random θ.
    Sample {
        #[arg(long, allow_hyphen_values = true)]
        lambda: Arg<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Arg<f64>,
        #[arg(long, default_value = "1000")]
        samples: Arg<u64>,
        #[arg(long = "N", alias = "truncation", default_value = "2000")]
        #[serde(rename = "N")]
        n: Arg<u64>,
        #[arg(long, default_value = "42")]
        seed: Arg<u64>,
    },
    /// Evidence-based label U1..U4.
    Classify {
        #[command(flatten)]
        #[serde(flatten)]
        pair: PairArgs,
        #[arg(long = "N", alias = "truncation", default_value = "10000")]
        #[serde(rename = "N")]
        n: Arg<u64>,
        /// Largest m searched for a zero product.
        #[arg(long = "M", alias = "m-max", default_value = "1000")]
        #[serde(rename = "M")]
        m_max: Arg<u64>,
        #[arg(long, default_value = "1e-6")]
        tol: Arg<f64>,
        /// Certificate file describing this pair.
        #[arg(long)]
        #[serde(skip_serializing_if = "Option::is_none")]
        certificate: Option<PathBuf>,
    },
}

impl Command {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Sample { seed, .. } => Some(seed.value),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Reduce { .. } => "reduce",
            Command::Lsr { .. } => "lsr",
            Command::Zeros { .. } => "zeros",
            Command::Enumerate { .. } => "enumerate",
            Command::VerifyNewformula { .. } => "verify-newformula",
            Command::Forge { .. } => "forge",
            Command::VerifyCert { .. } => "verify-cert",
            Command::Sample { .. } => "sample",
            Command::Classify { .. } => "classify",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_decimals() {
        let x: Exact = "-0.125".parse().unwrap();
        assert_eq!(x.0, BigRational::new((-1).into(), 8.into()));
        let y: Exact = "3/6".parse().unwrap();
        assert_eq!(y.0, BigRational::new(1.into(), 2.into()));
        assert!("1e3".parse::<Exact>().is_err());
        assert!(".".parse::<Exact>().is_err());
    }

    #[test]
    fn pi_fraction_and_entries() {
        let t: PiFraction = "1/2".parse().unwrap();
        assert_eq!((t.p, t.q), (1, 2));
        assert!("1/0".parse::<PiFraction>().is_err());
        let e: Entries = "1, 2,-3,4.5".parse().unwrap();
        assert_eq!(e.0, [1.0, 2.0, -3.0, 4.5]);
        assert!("1,2,3".parse::<Entries>().is_err());
    }
}
