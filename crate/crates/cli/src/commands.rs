//! The analysis behind each subcommand and the replay of emitted certificates.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use illiquid::analysis::{
    check_arbitrage, check_marginal_arbitrage, check_scalable_arbitrage, derive_model, find_deflator, membership_scaled,
    sigma_dual, sigma_primal, verify_deflator, AnalysisOptions, ArbitrageVerdict, DeflatorKind, DeflatorOutcome, Method,
    ModelKind,
};
use illiquid::lp::Arithmetic;
use illiquid::market::{AdaptedProcess, MarketInstance};
use illiquid::num::{parse_rat, ExtReal, Rat};

use crate::file::Loaded;
use crate::report::{self, ext, rat};
use crate::CliError;

pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const UNDECIDED: i32 = 3;
    pub const ARBITRAGE: i32 = 10;
    pub const NO_DEFLATOR: i32 = 11;
    pub const NOT_SUPERHEDGEABLE: i32 = 12;
    pub const SIGMA_INFINITE: i32 = 13;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    Plain,
    Marginal,
    Scalable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Market,
    Marginal,
}

impl Kind {
    fn core(self) -> DeflatorKind {
        match self {
            Kind::Market => DeflatorKind::MarketPrice,
            Kind::Marginal => DeflatorKind::MarginalPrice,
        }
    }
}

/// A subcommand with its arguments, echoed in every report so that `verify`
/// can rerun it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Check { mode: CheckMode },
    Deflator {
        kind: Kind,
        /// Empty means the default schedule.
        epsilons: Vec<String>,
    },
    Superhedge { claim: String, alpha: String },
    Sigma { deflator: String },
}

pub struct Outcome {
    pub code: i32,
    pub report: Value,
}

pub fn options(arithmetic: Arithmetic) -> AnalysisOptions {
    let mut o = AnalysisOptions::default();
    o.solver.arithmetic = arithmetic;
    o
}

struct Body {
    verdict: &'static str,
    code: i32,
    certificate: Value,
    residuals: Value,
    lp: Value,
    flags: Value,
}

fn parse_arg(text: &str, what: &str) -> Result<Rat, CliError> {
    parse_rat(text).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

fn claim<'a>(loaded: &'a Loaded, name: &str) -> Result<&'a AdaptedProcess<Rat>, CliError> {
    loaded.claims.get(name).ok_or_else(|| {
        let known: Vec<&str> = loaded.claims.keys().map(String::as_str).collect();
        CliError::Input(format!("unknown claim {name:?}; the file defines {known:?}"))
    })
}

fn deflator_weights<'a>(loaded: &'a Loaded, name: &str) -> Result<&'a AdaptedProcess<Rat>, CliError> {
    loaded.deflators.get(name).map(|(y, _)| y).ok_or_else(|| {
        let known: Vec<&str> = loaded.deflators.keys().map(String::as_str).collect();
        CliError::Input(format!("unknown deflator {name:?}; the file defines {known:?}"))
    })
}

/// Instance a `check` certificate refers to.
fn check_model(m: &MarketInstance, mode: CheckMode) -> Result<MarketInstance, CliError> {
    Ok(match mode {
        CheckMode::Plain => m.clone(),
        CheckMode::Marginal => derive_model(m, ModelKind::Marginal)?.instance,
        CheckMode::Scalable => derive_model(m, ModelKind::Scalable)?.instance,
    })
}

fn check(loaded: &Loaded, mode: CheckMode, o: &AnalysisOptions) -> Result<Body, CliError> {
    let m = &loaded.instance;
    let v: ArbitrageVerdict = match mode {
        CheckMode::Plain => check_arbitrage(m, o)?,
        CheckMode::Marginal => check_marginal_arbitrage(m, o)?,
        CheckMode::Scalable => check_scalable_arbitrage(m, o)?,
    };
    let (verdict, code) = match v.exists {
        Some(false) => ("no_arbitrage", exit::OK),
        Some(true) => ("arbitrage", exit::ARBITRAGE),
        None => ("undecided", exit::UNDECIDED),
    };
    let tree = &m.tree;
    let (certificate, residuals) = match &v.certificate {
        Some(cert) => {
            let model = check_model(m, mode)?;
            let r = model.budget_check(&cert.x, &cert.c)?;
            (
                json!({"x": report::vectors(tree, &cert.x), "c": report::scalars(tree, &cert.c)}),
                report::budget(tree, &r),
            )
        }
        None => (Value::Null, Value::Null),
    };
    let gap = v.flags.sandwich_gap.as_ref();
    Ok(Body {
        verdict,
        code,
        certificate,
        residuals,
        lp: json!({"value": rat(&v.lp_value), "iterations": v.iterations, "method": format!("{:?}", v.method).to_lowercase()}),
        flags: json!({
            "derivative_finite": v.flags.derivative_finite,
            "closure_sensitive": v.flags.closure_sensitive,
            "hypotheses_verified": v.flags.hypotheses_verified,
            "sandwich_gap": gap.map(rat),
            "sandwich_verified": gap.map(|_| v.method != Method::Inconclusive),
        }),
    })
}

fn deflator(loaded: &Loaded, kind: Kind, epsilons: &[String], o: &AnalysisOptions) -> Result<Body, CliError> {
    let m = &loaded.instance;
    let mut o = o.clone();
    if !epsilons.is_empty() {
        o.epsilons = epsilons.iter().map(|e| parse_arg(e, "--epsilon")).collect::<Result<_, _>>()?;
    }
    let tried: Vec<Value> = o.epsilons.iter().map(rat).collect();
    Ok(match find_deflator(m, kind.core(), &o)? {
        DeflatorOutcome::Found(cert) => Body {
            verdict: "deflator_found",
            code: exit::OK,
            certificate: json!({
                "epsilon": rat(&cert.epsilon),
                "y": report::scalars(&m.tree, &cert.y),
                "s": report::vectors(&m.tree, &cert.s),
            }),
            residuals: report::deflator_residuals(&m.tree, &cert.residuals),
            lp: json!({"epsilons": tried}),
            flags: json!({"derivative_finite": m.costs.values().iter().all(|c| c.subderivative_origin().is_finite_valued())}),
        },
        DeflatorOutcome::NotFound { .. } => Body {
            verdict: "no_deflator",
            code: exit::NO_DEFLATOR,
            certificate: Value::Null,
            residuals: Value::Null,
            lp: json!({"epsilons": tried}),
            flags: json!({"derivative_finite": m.costs.values().iter().all(|c| c.subderivative_origin().is_finite_valued())}),
        },
    })
}

fn superhedge(loaded: &Loaded, name: &str, alpha: &str, o: &AnalysisOptions) -> Result<Body, CliError> {
    let m = &loaded.instance;
    let c = claim(loaded, name)?;
    let alpha = parse_arg(alpha, "--alpha")?;
    if !alpha.is_positive() {
        return Err(CliError::Input(format!("--alpha must be positive, got {alpha}")));
    }
    let r = membership_scaled(m, c, &alpha, o)?;
    let (verdict, code) = match r.member {
        Some(true) => ("superhedgeable", exit::OK),
        Some(false) => ("not_superhedgeable", exit::NOT_SUPERHEDGEABLE),
        None => ("undecided", exit::UNDECIDED),
    };
    let (certificate, residuals) = match &r.portfolio {
        Some(x) => {
            let check = m.scaled(&alpha)?.budget_check(x, c)?;
            (json!({"x": report::vectors(&m.tree, x)}), report::budget(&m.tree, &check))
        }
        None => (Value::Null, Value::Null),
    };
    Ok(Body {
        verdict,
        code,
        certificate,
        residuals,
        lp: json!({"iterations": r.iterations, "rounds": r.rounds}),
        flags: json!({"exact": m.is_polyhedral()}),
    })
}

fn sigma(loaded: &Loaded, name: &str, o: &AnalysisOptions) -> Result<Body, CliError> {
    let m = &loaded.instance;
    let tree = &m.tree;
    let y = deflator_weights(loaded, name)?;
    let p = sigma_primal(m, y, o)?;
    let d = sigma_dual(m, y, o)?;
    let (verdict, code, gap) = match (&p.value, &d.value) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) if a == b => ("finite", exit::OK, Some(Rat::zero())),
        (ExtReal::PosInf, ExtReal::PosInf) => ("infinite", exit::SIGMA_INFINITE, None),
        (ExtReal::Finite(a), ExtReal::Finite(b)) => ("mismatch", exit::INTERNAL, Some(a - b)),
        _ => ("mismatch", exit::INTERNAL, None),
    };
    let certificate = json!({
        "x": p.x.as_ref().map(|x| report::vectors(tree, x)),
        "c": p.c.as_ref().map(|c| report::scalars(tree, c)),
        "v": d.v.as_ref().map(|v| report::vectors(tree, v)),
        "ray": p.ray.as_ref().map(|(x, c)| json!({"x": report::vectors(tree, x), "c": report::scalars(tree, c)})),
    });
    Ok(Body {
        verdict,
        code,
        certificate,
        residuals: json!({"primal": ext(&p.value), "dual": ext(&d.value), "gap": gap.as_ref().map(rat)}),
        lp: json!({"primal_iterations": p.iterations, "dual_iterations": d.iterations, "cap": p.cap.as_ref().map(rat)}),
        flags: json!({}),
    })
}

fn body(task: &Task, loaded: &Loaded, o: &AnalysisOptions) -> Result<Body, CliError> {
    match task {
        Task::Check { mode } => check(loaded, *mode, o),
        Task::Deflator { kind, epsilons } => deflator(loaded, *kind, epsilons, o),
        Task::Superhedge { claim, alpha } => superhedge(loaded, claim, alpha, o),
        Task::Sigma { deflator } => sigma(loaded, deflator, o),
    }
}

/// Runs a task on a loaded file and assembles its report.
pub fn run(task: &Task, loaded: &Loaded, file: &str, arithmetic: Arithmetic, replay_certificate: bool) -> Result<Outcome, CliError> {
    let o = options(arithmetic);
    let b = body(task, loaded, &o)?;
    let mut report = json!({
        "task": task,
        "file": file,
        "digest": loaded.digest,
        "mode": arithmetic.to_string(),
        "verdict": b.verdict,
        "exit_code": b.code,
        "certificate": b.certificate,
        "residuals": b.residuals,
        "lp": b.lp,
        "flags": b.flags,
    });
    if replay_certificate {
        let r = replay(task, loaded, &report)?;
        report["replay"] = r;
    }
    Ok(Outcome { code: b.code, report })
}

pub fn error_report(file: &str, task: Option<&Task>, code: i32, err: &CliError) -> Value {
    json!({
        "task": task,
        "file": file,
        "verdict": if code == exit::INPUT { "input_error" } else { "internal_error" },
        "exit_code": code,
        "error": err.to_string(),
    })
}

fn is_arbitrage_claim(c: &AdaptedProcess<Rat>) -> bool {
    c.values().iter().all(|v| !v.is_negative()) && c.values().iter().any(Signed::is_positive)
}

/// Checks the certificate embedded in a report with the independent
/// checkers, without rerunning any optimization.
pub fn replay(task: &Task, loaded: &Loaded, report: &Value) -> Result<Value, CliError> {
    let m = &loaded.instance;
    let tree = &m.tree;
    let Some(cert) = report::certificate(report)? else {
        return Ok(json!({"certificate": false, "valid": Value::Null}));
    };
    let valid = match task {
        Task::Check { mode } => {
            let x = report::read_vectors(tree, report::object_field(cert, "x")?, "certificate.x")?;
            let c = report::read_scalars(tree, report::object_field(cert, "c")?, "certificate.c")?;
            check_model(m, *mode)?.budget_check(&x, &c)?.is_feasible() && is_arbitrage_claim(&c)
        }
        Task::Deflator { kind, .. } => {
            let y = report::read_scalars(tree, report::object_field(cert, "y")?, "certificate.y")?;
            let s = report::read_vectors(tree, report::object_field(cert, "s")?, "certificate.s")?;
            let eps = report::read_rat(report::object_field(cert, "epsilon")?, "certificate.epsilon")?;
            let r = verify_deflator(m, kind.core(), &y, &s)?;
            r.is_valid() && r.max() == ExtReal::zero() && y.values().iter().all(|v| v >= &eps)
        }
        Task::Superhedge { claim: name, alpha } => {
            let x = report::read_vectors(tree, report::object_field(cert, "x")?, "certificate.x")?;
            let alpha = parse_arg(alpha, "alpha")?;
            m.scaled(&alpha)?.budget_check(&x, claim(loaded, name)?)?.is_feasible()
        }
        Task::Sigma { deflator: name } => {
            let y = deflator_weights(loaded, name)?;
            let weight = |c: &AdaptedProcess<Rat>| -> Rat { tree.ids().map(|n| tree.probability(n) * &y[n] * &c[n]).sum() };
            let primal = report::read_ext(report::object_field(report::object_field(report, "residuals")?, "primal")?, "primal")?;
            let ray = report::object_field(cert, "ray")?;
            match primal {
                ExtReal::Finite(value) => {
                    let x = report::read_vectors(tree, report::object_field(cert, "x")?, "certificate.x")?;
                    let c = report::read_scalars(tree, report::object_field(cert, "c")?, "certificate.c")?;
                    m.budget_check(&x, &c)?.is_feasible() && weight(&c) == value
                }
                ExtReal::PosInf if !ray.is_null() => {
                    let x = report::read_vectors(tree, report::object_field(ray, "x")?, "certificate.ray.x")?;
                    let c = report::read_scalars(tree, report::object_field(ray, "c")?, "certificate.ray.c")?;
                    let horizon = derive_model(m, ModelKind::Scalable)?.instance;
                    horizon.budget_check(&x, &c)?.is_feasible() && weight(&c).is_positive()
                }
                _ => false,
            }
        }
    };
    Ok(json!({"certificate": true, "valid": valid}))
}

/// Replays a stored report: the certificate is rechecked and the task is
/// rerun, and the verdicts must agree.
pub fn verify(loaded: &Loaded, report: &Value, arithmetic: Arithmetic) -> Result<Outcome, CliError> {
    let task: Task = serde_json::from_value(report::object_field(report, "task")?.clone())
        .map_err(|e| CliError::Input(format!("report task: {e}")))?;
    let digest = report::string_field(report, "digest")?;
    if digest != loaded.digest {
        return Err(CliError::Input(format!("report was produced for digest {digest}, the file has {}", loaded.digest)));
    }
    let stored = report::string_field(report, "verdict")?.to_string();
    let replayed = replay(&task, loaded, report)?;
    let rerun = body(&task, loaded, &options(arithmetic))?;
    let certificate_ok = replayed["valid"].as_bool().unwrap_or(true);
    let reproduced = certificate_ok && rerun.verdict == stored;
    let code = if reproduced { exit::OK } else { exit::INTERNAL };
    Ok(Outcome {
        code,
        report: json!({
            "task": task,
            "digest": loaded.digest,
            "mode": arithmetic.to_string(),
            "verdict": if reproduced { "reproduced" } else { "not_reproduced" },
            "exit_code": code,
            "stored_verdict": stored,
            "rerun_verdict": rerun.verdict,
            "replay": replayed,
        }),
    })
}
