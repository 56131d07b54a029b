use std::fs;
use std::path::Path;

use lsr_core::canonical::{reduce, CanonicalPair};
use lsr_core::cf::{
    make_pair_with, verify_certificate, CfError, MakePairOptions, NonFinitenessCertificate,
};
use lsr_core::experiments::{
    classify_with, sample_measure_detailed, ClassifyOptions, ExperimentError,
};
use lsr_core::mat2::{rotation, rotation_pi_fraction, Matrix2};
use lsr_core::spectrum::{find_zero_product, lsr_estimate_with, perturb_to_zero, LsrOptions};
use lsr_core::words::{compact, enumerate_min_growth, verify_newformula};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::{Command, PairArgs, PiFraction};
use crate::output::{label, opt, Failure, Outcome, Table, EXIT_DOMAIN, EXIT_VERIFICATION};

/// A pair in whichever form the user supplied it.
enum Pair {
    Matrices {
        h: Matrix2,
        r: Matrix2,
    },
    Canonical {
        gamma: f64,
        lambda: f64,
        alpha: f64,
        theta: f64,
        pi: Option<PiFraction>,
    },
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Params {
    gamma: f64,
    lambda: f64,
    alpha: f64,
    theta: f64,
}

impl Pair {
    fn from_args(p: &PairArgs) -> Result<Pair, Failure> {
        if let (Some(h), Some(r)) = (&p.h, &p.r) {
            return Ok(Pair::Matrices {
                h: Matrix2::from_rows([[h.value.0[0], h.value.0[1]], [h.value.0[2], h.value.0[3]]]),
                r: Matrix2::from_rows([[r.value.0[0], r.value.0[1]], [r.value.0[2], r.value.0[3]]]),
            });
        }
        let (Some(lambda), Some(alpha)) = (&p.lambda, &p.alpha) else {
            return Err(Failure::usage(
                "give --h and --r, or --lambda, --alpha and an angle",
            ));
        };
        let (theta, pi) = match (&p.theta, &p.theta_pi) {
            (Some(t), _) => (t.value, None),
            (None, Some(f)) => (f.value.radians(), Some(f.value)),
            (None, None) => return Err(Failure::usage("give --theta or --theta-pi")),
        };
        let gamma = p.gamma.as_ref().map_or(1.0, |g| g.value);
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Failure::domain(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if lambda.value == 0.0
            || !lambda.value.is_finite()
            || !alpha.value.is_finite()
            || !theta.is_finite()
        {
            return Err(Failure::domain(
                "lambda must be nonzero and all parameters finite",
            ));
        }
        Ok(Pair::Canonical {
            gamma,
            lambda: lambda.value,
            alpha: alpha.value,
            theta,
            pi,
        })
    }

    fn params(&self) -> Result<Params, Failure> {
        match *self {
            Pair::Matrices { h, r } => {
                let c = reduce(&h, &r).map_err(Failure::domain)?;
                Ok(Params {
                    gamma: c.gamma,
                    lambda: c.lambda,
                    alpha: c.alpha,
                    theta: c.theta,
                })
            }
            Pair::Canonical {
                gamma,
                lambda,
                alpha,
                theta,
                ..
            } => Ok(Params {
                gamma,
                lambda,
                alpha,
                theta,
            }),
        }
    }

    fn matrices(&self) -> (Matrix2, Matrix2) {
        match *self {
            Pair::Matrices { h, r } => (h, r),
            Pair::Canonical {
                gamma,
                lambda,
                alpha,
                theta,
                pi,
            } => {
                let rot = match pi {
                    Some(f) => rotation_pi_fraction(f.p, f.q),
                    None => rotation(theta),
                };
                (
                    Matrix2::from_rows([[lambda, alpha], [0.0, 0.0]]).scale(gamma),
                    rot.scale(gamma),
                )
            }
        }
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

pub fn run(command: &Command) -> Result<Outcome, Failure> {
    match command {
        Command::Reduce { pair } => reduce_cmd(pair),
        Command::Lsr { pair, n, per_n } => lsr_cmd(pair, n.value, *per_n),
        Command::Zeros {
            pair,
            m_max,
            perturb,
        } => zeros_cmd(pair, m_max.value, perturb.as_ref().map(|p| p.value)),
        Command::Enumerate { pair, l_max } => enumerate_cmd(pair, l_max.value),
        Command::VerifyNewformula { pair, l_max } => newformula_cmd(pair, l_max.value),
        Command::Forge {
            lambda,
            alpha_target,
            theta_target,
            k,
            epsilon,
            steps,
            checked_to,
            b_max,
            ratio_grid,
        } => {
            let opts = MakePairOptions {
                checked_to: checked_to.value,
                b_max: b_max.value,
                ratio_grid: ratio_grid.value,
                ..MakePairOptions::default()
            };
            let cert = make_pair_with(
                &lambda.value.0,
                alpha_target.value,
                theta_target.value,
                &k.value.0,
                epsilon.value,
                steps.value,
                &opts,
            )
            .map_err(Failure::domain)?;
            forge_outcome(&cert)
        }
        Command::VerifyCert { file, n_max } => verify_cmd(file, n_max.value),
        Command::Sample {
            lambda,
            alpha,
            samples,
            n,
            seed,
        } => sample_cmd(
            lambda.value,
            alpha.value,
            samples.value,
            n.value,
            seed.value,
        ),
        Command::Classify {
            pair,
            n,
            m_max,
            tol,
            certificate,
        } => classify_cmd(
            pair,
            n.value,
            m_max.value,
            tol.value,
            certificate.as_deref(),
        ),
    }
}

fn reduce_cmd(args: &PairArgs) -> Result<Outcome, Failure> {
    let (h, r) = Pair::from_args(args)?.matrices();
    let c: CanonicalPair = reduce(&h, &r).map_err(Failure::domain)?;
    let mut table = Table::new(&[
        "gamma", "lambda", "alpha", "theta", "b11", "b12", "b21", "b22",
    ]);
    let mut row = vec![num(c.gamma), num(c.lambda), num(c.alpha), num(c.theta)];
    row.extend(c.basis.entries().iter().map(|&x| num(x)));
    table.push(row);
    Outcome::new("canonical_pair.v1", &c, table)
}

fn lsr_cmd(args: &PairArgs, truncation: u64, per_n: bool) -> Result<Outcome, Failure> {
    let p = Pair::from_args(args)?.params()?;
    let est = lsr_estimate_with(
        p.lambda,
        p.alpha,
        p.theta,
        truncation,
        LsrOptions {
            keep_per_n: per_n,
            ..LsrOptions::default()
        },
    );
    let value = p.gamma * est.value;
    let table = match &est.per_n {
        Some(terms) => {
            let mut t = Table::new(&["n", "term"]);
            for &(n, v) in terms {
                t.push(vec![n.to_string(), num(p.gamma * v)]);
            }
            t
        }
        None => {
            let mut t = Table::new(&["value", "argmin", "truncation", "status"]);
            t.push(vec![
                num(value),
                opt(est.argmin),
                est.truncation.to_string(),
                label(&est.status),
            ]);
            t
        }
    };
    Outcome::new(
        "lsr_estimate.v1",
        &json!({ "params": p, "value": value, "estimate": est }),
        table,
    )
}

fn zeros_cmd(args: &PairArgs, m_max: u64, perturb: Option<u64>) -> Result<Outcome, Failure> {
    let p = Pair::from_args(args)?.params()?;
    let zero = find_zero_product(p.lambda, p.alpha, p.theta, m_max);
    let perturbed = match perturb {
        Some(m) => Some(perturb_to_zero(p.lambda, p.alpha, p.theta, m).map_err(Failure::domain)?),
        None => None,
    };
    let mut table = Table::new(&[
        "m",
        "residual_trace",
        "residual_product",
        "perturb_m",
        "perturbed_theta",
    ]);
    table.push(vec![
        opt(zero.map(|z| z.m)),
        opt(zero.map(|z| z.residual_trace)),
        opt(zero.map(|z| z.residual_product)),
        opt(perturb),
        opt(perturbed),
    ]);
    let result = json!({
        "params": p,
        "m_max": m_max,
        "zero_product": zero,
        "perturb": perturb.map(|m| json!({ "m": m, "theta": perturbed })),
    });
    Outcome::new("zeros.v1", &result, table)
}

fn enumerate_cmd(args: &PairArgs, l_max: usize) -> Result<Outcome, Failure> {
    let (h, r) = Pair::from_args(args)?.matrices();
    let growth = enumerate_min_growth(&h, &r, l_max).map_err(Failure::domain)?;
    let mut table = Table::new(&["length", "min_rho", "min_norm", "argmin_rho", "argmin_norm"]);
    for row in &growth.rows {
        table.push(vec![
            row.length.to_string(),
            num(row.min_rho),
            num(row.min_norm),
            compact(&row.argmin_rho),
            compact(&row.argmin_norm),
        ]);
    }
    Outcome::new("growth_table.v1", &growth, table)
}

fn newformula_cmd(args: &PairArgs, l_max: usize) -> Result<Outcome, Failure> {
    let (h, r) = Pair::from_args(args)?.matrices();
    let report = verify_newformula(&h, &r, l_max).map_err(Failure::domain)?;
    let mut table = Table::new(&["word", "lhs", "rhs"]);
    for v in &report.violations {
        table.push(vec![v.word.clone(), num(v.lhs), num(v.rhs)]);
    }
    let mut out = Outcome::new("newformula_report.v1", &report, table)?;
    out.notes.push((
        "summary".into(),
        json!({
            "l_max": report.l_max,
            "words_checked": report.words_checked,
            "violations": report.violations.len(),
            "min_gap": report.min_gap,
        }),
    ));
    if !report.violations.is_empty() {
        out.code = EXIT_VERIFICATION;
    }
    Ok(out)
}

fn forge_outcome(cert: &NonFinitenessCertificate) -> Result<Outcome, Failure> {
    let mut table = Table::new(&["n", "j", "q", "branch", "margin"]);
    for w in &cert.witness_table {
        table.push(vec![
            w.n.to_string(),
            w.j.to_string(),
            w.q.to_string(),
            label(&w.branch),
            num(w.margin),
        ]);
    }
    let mut out = Outcome::new("certificate.v1", cert, table)?;
    out.notes.push((
        "summary".into(),
        json!({
            "a": cert.a,
            "b": cert.b,
            "q_tip": cert.q_tip.to_string(),
            "steps_requested": cert.steps_requested,
            "steps_completed": cert.steps_completed,
            "stop_reason": cert.stop_reason,
            "positivity_floor": cert.positivity_floor,
        }),
    ));
    Ok(out)
}

/// Accepts a bare certificate or a `forge` output document.
pub fn read_certificate(path: &Path) -> Result<NonFinitenessCertificate, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure {
        code: EXIT_VERIFICATION,
        message: format!("{}: not JSON: {e}", path.display()),
    })?;
    let body = match value.get("result") {
        Some(inner) if value.get("schema").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(body).map_err(|e| Failure {
        code: EXIT_VERIFICATION,
        message: format!("{}: malformed certificate: {e}", path.display()),
    })
}

fn verify_cmd(file: &Path, n_max: u64) -> Result<Outcome, Failure> {
    let cert = read_certificate(file)?;
    let mut table = Table::new(&[
        "ok",
        "n_max",
        "below_tip_rows",
        "growth_rows",
        "positivity_floor",
        "error",
    ]);
    match verify_certificate(&cert, n_max) {
        Ok(report) => {
            table.push(vec![
                "true".into(),
                n_max.to_string(),
                report.below_tip_rows.to_string(),
                report.growth_rows.to_string(),
                num(report.positivity_floor),
                String::new(),
            ]);
            Outcome::new(
                "verify_report.v1",
                &json!({ "ok": true, "report": report }),
                table,
            )
        }
        Err(e) => {
            let code = match e {
                CfError::CheckBudget { .. }
                | CfError::DigitBudget { .. }
                | CfError::InvalidInput(_) => EXIT_DOMAIN,
                _ => EXIT_VERIFICATION,
            };
            table.push(vec![
                "false".into(),
                n_max.to_string(),
                String::new(),
                String::new(),
                String::new(),
                e.to_string(),
            ]);
            let mut out = Outcome::new(
                "verify_report.v1",
                &json!({ "ok": false, "error": e.to_string() }),
                table,
            )?;
            out.code = code;
            Ok(out)
        }
    }
}

fn sample_cmd(
    lambda: f64,
    alpha: f64,
    samples: u64,
    truncation: u64,
    seed: u64,
) -> Result<Outcome, Failure> {
    let (stats, records) = sample_measure_detailed(lambda, alpha, samples, truncation, seed)
        .map_err(Failure::domain)?;
    let mut table = Table::new(&["index", "theta", "value", "argmin", "outcome"]);
    for r in &records {
        table.push(vec![
            r.index.to_string(),
            num(r.theta),
            num(r.value),
            opt(r.argmin),
            label(&r.outcome),
        ]);
    }
    let mut out = Outcome::new("measure_stats.v1", &stats, table)?;
    out.notes.push((
        "summary".into(),
        serde_json::to_value(&stats).map_err(Failure::domain)?,
    ));
    Ok(out)
}

fn classify_cmd(
    args: &PairArgs,
    truncation: u64,
    zero_search: u64,
    tol: f64,
    certificate: Option<&Path>,
) -> Result<Outcome, Failure> {
    let (h, r) = Pair::from_args(args)?.matrices();
    let cert = certificate.map(read_certificate).transpose()?;
    let opts = ClassifyOptions {
        truncation,
        zero_search,
        tol,
    };
    let class = classify_with(&h, &r, opts, cert.as_ref()).map_err(|e| match e {
        ExperimentError::Certificate(CfError::VerificationFailed { .. }) => Failure {
            code: EXIT_VERIFICATION,
            message: e.to_string(),
        },
        other => Failure::domain(other),
    })?;
    let e = &class.evidence;
    let mut table = Table::new(&[
        "label",
        "heuristic",
        "value",
        "status",
        "argmin",
        "zero_m",
        "certified",
    ]);
    table.push(vec![
        label(&class.label),
        class.heuristic.to_string(),
        num(class.value),
        label(&e.lsr.status),
        opt(e.lsr.argmin),
        opt(e.zero_product.map(|z| z.m)),
        e.certificate.is_some().to_string(),
    ]);
    Outcome::new("pair_class.v1", &class, table)
}
