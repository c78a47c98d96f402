//! Subcommand implementations. Each returns the report text; nothing here depends on
//! wall-clock time, so identical configs give identical bytes.

use std::collections::BTreeMap;

use binq4_core::correlation::{xn_to_sn_check, CorrelationInstance};
use binq4_core::curvecount::{
    count_fiber_curve, count_points_bruteforce_with_budget, default_ell, detmethod_with, DetMethodOptions, PlanarCurve, DEFAULT_BRUTE_BUDGET,
};
use binq4_core::forms::{BinaryForm, QuaternaryForm};
use binq4_core::genus::{
    closure_for, default_neighbor_prime, family_scan, spin_closure, theorem13_report_with, Theorem13Params, DEFAULT_CLASS_BUDGET,
    R_SPIN_NORMALIZATION,
};
use binq4_core::reps::{enumerate_representations, is_primitive_rep};
use binq4_core::svariety::{
    enumerate_sn_with_budget, fiber_curve, fiber_violations, fibers, sn_statistics, FiberData, FiberParams, SnPoint, DEFAULT_NODE_BUDGET,
};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::config::Config;
use crate::parse::{format_curve, parse_curve};
use crate::suite::{run_suite, Scale, SuiteOptions};
use crate::CliError;

/// Report text and whether it records a failed check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub failed: bool,
}

impl Outcome {
    fn json(v: &Value) -> Self {
        Outcome { text: pretty(v), failed: false }
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// One reported quantity with the formula it evaluates.
pub fn metric(name: &str, value: Value, definition: &str) -> Value {
    json!({ "name": name, "value": value, "definition": definition })
}

fn q_json(q: &BinaryForm) -> Value {
    json!([q.a(), q.b(), q.c()])
}

pub fn run_command(name: &str, cfg: &Config) -> Result<Outcome, CliError> {
    match name {
        "reps" => reps(cfg),
        "xn" => xn(cfg),
        "sn" => sn(cfg),
        "fibers" => fibers_cmd(cfg),
        "curve" => curve(cfg),
        "genus" => genus(cfg),
        "thm13" => thm13(cfg),
        "suite" => suite(cfg),
        other => Err(CliError::Config(format!("unknown subcommand {other}"))),
    }
}

fn instance(cfg: &Config) -> Result<CorrelationInstance, CliError> {
    let q = cfg.binary_form()?;
    let form = cfg.quaternary_form()?;
    let p: u64 = cfg.required("p")?;
    let n = cfg.level(q.four_d(), p)?;
    let inst = CorrelationInstance::new(q, form, p, n)?;
    if !inst.planar_test_exact() {
        eprintln!("warning: p divides 2*disc(q)*disc(Q); the planar congruence test may differ from the rotation condition");
    }
    Ok(inst)
}

fn fiber_params(cfg: &Config) -> Result<FiberParams, CliError> {
    let d = FiberParams::default();
    Ok(FiberParams { removal_threshold: cfg.or("removal_threshold", d.removal_threshold)?, short_delta: cfg.fraction("short_delta", d.short_delta)? })
}

fn reps(cfg: &Config) -> Result<Outcome, CliError> {
    let q = cfg.binary_form()?;
    let form = cfg.quaternary_form()?;
    let all = enumerate_representations(&q, &form, false)?;
    let flags: Vec<bool> = all.iter().map(is_primitive_rep).collect::<Result<_, _>>()?;
    let primitive = flags.iter().filter(|&&b| b).count();
    let mut out = json!({
        "command": "reps",
        "q": q_json(&q),
        "gram2": form.entries(),
        "det2": form.det2().to_string(),
        "metrics": [
            metric("representations", json!(all.len()), "#{X in M_{4x2}(Z) : X^T G X = gram(q)}"),
            metric("primitive_representations", json!(primitive), "representations whose image is saturated in Z^4"),
        ],
    });
    if cfg.flag("list")? {
        out["representations"] = all.iter().zip(&flags).map(|(r, p)| json!({ "first": r.first(), "second": r.second(), "primitive": p })).collect();
    }
    Ok(Outcome::json(&out))
}

fn xn(cfg: &Config) -> Result<Outcome, CliError> {
    let inst = instance(cfg)?;
    let epsilon = cfg.fraction("epsilon", 0.05)?;
    let report = xn_to_sn_check(&inst, epsilon, cfg.delta()?)?;
    let out = json!({
        "command": "xn",
        "metrics": [
            metric("ordered_pairs", json!(report.ordered_pairs), "#X(n): ordered pairs of primitive representations congruent mod p^(2n) up to a planar rotation"),
            metric("unordered_pairs", json!(report.unordered_pairs), "#X(n) counted as unordered pairs"),
            metric("target_ratio", json!(report.target_ratio), "D^(1+epsilon) / p^((4+2*delta)n), D = fourD/4"),
            metric("sn_violations", json!(report.violations.len()), "pairs whose Gram tuple fails the S(n) constraints"),
        ],
        "report": report,
    });
    Ok(Outcome::json(&out))
}

fn points_and_fibers(cfg: &Config, inst: &CorrelationInstance) -> Result<(Vec<SnPoint>, Vec<FiberData>), CliError> {
    let budget = cfg.positive("node_budget", DEFAULT_NODE_BUDGET)?;
    let points = enumerate_sn_with_budget(inst, budget)?;
    let fs = fibers(inst, &points, fiber_params(cfg)?)?;
    Ok((points, fs))
}

fn sn(cfg: &Config) -> Result<Outcome, CliError> {
    let inst = instance(cfg)?;
    let (points, fs) = points_and_fibers(cfg, &inst)?;
    match cfg.get("format").unwrap_or("tsv") {
        "tsv" => {
            let mut ids: BTreeMap<SnPoint, usize> = BTreeMap::new();
            for f in &fs {
                for m in &f.members {
                    ids.insert(*m, f.id);
                }
            }
            let mut text = String::from("x0\tX1\tX2\tX3\tX4\tfiber_id\n");
            for pt in &points {
                text.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\n", pt.x0, pt.x[0], pt.x[1], pt.x[2], pt.x[3], ids[pt]));
            }
            Ok(Outcome { text, failed: false })
        }
        "json" => {
            let stats = sn_statistics(&inst, &points, &fs)?;
            let out = json!({
                "command": "sn",
                "metrics": [
                    metric("count", json!(stats.count), "#S(n)"),
                    metric("ratio_sqrt_d", json!(stats.ratio_sqrt_d), "#S(n) / sqrt(D), D = fourD/4"),
                    metric("ratio_trivial", json!(stats.ratio_trivial), "#S(n) * p^(12n) / D^2"),
                ],
                "statistics": stats,
            });
            Ok(Outcome::json(&out))
        }
        other => Err(CliError::Config(format!("invalid format \"{other}\" for sn: expected tsv or json"))),
    }
}

fn big_strings(v: &[BigInt]) -> Vec<String> {
    v.iter().map(BigInt::to_string).collect()
}

fn fibers_cmd(cfg: &Config) -> Result<Outcome, CliError> {
    let inst = instance(cfg)?;
    let (points, fs) = points_and_fibers(cfg, &inst)?;
    let with_curves = cfg.flag("fiber_curves")?;
    let mut total_violations = 0;
    let mut rows = Vec::new();
    for f in &fs {
        let violations = fiber_violations(f, &inst)?;
        total_violations += violations.len();
        let mut row = json!({
            "id": f.id,
            "w": f.w,
            "base": { "x0": f.base.x0, "x": f.base.x },
            "members": f.members.len(),
            "nu": f.nu,
            "index": f.index.to_string(),
            "reduced_basis": f.reduced.vectors().iter().map(|v| big_strings(v)).collect::<Vec<_>>(),
            "boxes": big_strings(&f.boxes),
            "removed": f.removed,
            "short": f.short,
            "violations": violations,
        });
        if with_curves {
            let zero = BigInt::zero();
            let fc = fiber_curve(f, &zero, &zero, &zero, &inst)?;
            let b1 = f.boxes[0].to_u64().unwrap_or(u64::MAX);
            row["curve_at_origin"] = serde_json::to_value(count_fiber_curve(&fc, b1)).expect("serializable");
        }
        rows.push(row);
    }
    let out = json!({
        "command": "fibers",
        "q": q_json(&inst.q),
        "p": inst.p,
        "n": inst.n,
        "metrics": [
            metric("points", json!(points.len()), "#S(n)"),
            metric("fibers", json!(fs.len()), "residue classes of S(n) modulo p^(2n)"),
            metric("violations", json!(total_violations), "fiber invariant failures: index(Lambda_w) >= p^(6n-nu), |v4| <= p^(2n), and structural checks"),
        ],
        "fibers": rows,
    });
    Ok(Outcome { text: pretty(&out), failed: total_violations > 0 })
}

fn curve(cfg: &Config) -> Result<Outcome, CliError> {
    let text = cfg.get("curve").ok_or_else(|| CliError::Config("missing required key curve".into()))?;
    let f = parse_curve(text)?;
    let bx: i64 = cfg.required("bx")?;
    let by: i64 = cfg.or("by", bx)?;
    let c = PlanarCurve::new(f, bx, by)?;
    let method = cfg.get("method").unwrap_or("detmethod");
    let list = cfg.flag("list")?;
    let mut out = json!({ "command": "curve", "curve": format_curve(&c.f), "bx": bx, "by": by, "method": method });
    let mut det_points = None;
    let mut brute_points = None;
    if matches!(method, "detmethod" | "both") {
        let ell = match cfg.get("ell") {
            None | Some("auto") => default_ell(&c),
            Some(_) => cfg.required("ell")?,
        };
        let opts = DetMethodOptions { degree_cap: cfg.opt("degree_cap")?, ..Default::default() };
        let report = detmethod_with(&c, ell, &opts)?;
        let mut v = serde_json::to_value(&report).expect("serializable");
        v.as_object_mut().expect("object").remove("points");
        out["detmethod"] = v;
        det_points = Some(report.points);
    }
    if matches!(method, "bruteforce" | "both") {
        brute_points = Some(count_points_bruteforce_with_budget(&c, cfg.positive("brute_budget", DEFAULT_BRUTE_BUDGET)?)?);
    }
    if det_points.is_none() && brute_points.is_none() {
        return Err(CliError::Config(format!("invalid method \"{method}\": expected detmethod, bruteforce or both")));
    }
    let points = det_points.clone().or_else(|| brute_points.clone()).expect("one counter ran");
    out["points"] = json!(points.len());
    let mut failed = false;
    if let (Some(d), Some(b)) = (&det_points, &brute_points) {
        failed = d != b;
        out["agree"] = json!(!failed);
    }
    if list {
        out["point_list"] = json!(points);
    }
    Ok(Outcome { text: pretty(&out), failed })
}

fn genus(cfg: &Config) -> Result<Outcome, CliError> {
    let form = cfg.quaternary_form()?;
    let p = match cfg.get("p") {
        Some(_) => cfg.required("p")?,
        None => default_neighbor_prime(&form),
    };
    let sg = spin_closure(&form, p, cfg.positive("class_budget", DEFAULT_CLASS_BUDGET as u64)? as usize)?;
    let out = json!({
        "command": "genus",
        "gram2": form.entries(),
        "p": p,
        "metrics": [
            metric("classes", json!(sg.classes.len()), "classes in the p-neighbor closure"),
            metric("mass", json!(crate::suite::rational_string(&sg.mass)), "sum_j 1/|Aut(Q_j)|"),
        ],
        "classes": sg.to_json(),
        "normalization": R_SPIN_NORMALIZATION,
    });
    Ok(Outcome::json(&out))
}

fn thm13(cfg: &Config) -> Result<Outcome, CliError> {
    let q = cfg.binary_form()?;
    let form: QuaternaryForm = cfg.quaternary_form()?;
    let p1: u64 = cfg.required("p1")?;
    let p2: u64 = cfg.required("p2")?;
    let params = Theorem13Params {
        neighbor_prime: cfg.opt("neighbor_prime")?,
        class_budget: cfg.positive("class_budget", DEFAULT_CLASS_BUDGET as u64)? as usize,
    };
    let sg = closure_for(&form, &params)?;
    let report = theorem13_report_with(&q, &form, p1, p2, &sg)?;
    let mut out = serde_json::to_value(&report).expect("serializable");
    let obj = out.as_object_mut().expect("object");
    obj.insert("command".into(), json!("thm13"));
    obj.insert(
        "metrics".into(),
        json!([
            metric("r_q_form", json!(report.r_q_form), "primitive representations of q by Q"),
            metric("r_spin", json!(report.r_spin), R_SPIN_NORMALIZATION),
            metric("ratio", json!(report.ratio), "r(q,Q) / r(q,spin(Q))"),
        ]),
    );
    if let Some(max) = cfg.opt::<i64>("max_four_d")? {
        let scan = family_scan(&form, p1, p2, max, &sg)?;
        obj.insert("family_scan".into(), serde_json::to_value(scan).expect("serializable"));
    }
    Ok(Outcome::json(&out))
}

fn suite(cfg: &Config) -> Result<Outcome, CliError> {
    let scale = match cfg.get("scale").unwrap_or("full") {
        "full" => Scale::Full,
        "quick" => Scale::Quick,
        other => return Err(CliError::Config(format!("invalid scale \"{other}\": expected full or quick"))),
    };
    let opts = SuiteOptions { scale, seed: cfg.or("seed", 1u64)? };
    let report = run_suite(&opts, |check: &crate::suite::CheckResult, elapsed: std::time::Duration, note: Option<&str>| match note {
        Some(n) => eprintln!("{} ({:.1} s; {n})", check.line(), elapsed.as_secs_f64()),
        None => eprintln!("{} ({:.1} s)", check.line(), elapsed.as_secs_f64()),
    });
    let failed = report.failed > 0;
    Ok(Outcome { text: pretty(&serde_json::to_value(&report).expect("serializable")), failed })
}
