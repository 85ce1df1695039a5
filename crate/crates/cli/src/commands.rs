use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nullkirch_core::harness::{
    build_rung, measure_rung, run_case, ConvergenceReport, Metric, Rung, Status, TestCase,
};
use nullkirch_core::parametrix::ParametrixBreakdown;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Resolved;
use crate::error::CliError;

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn log_rung(case: &TestCase, index: usize, rung: &Rung, seconds: f64) {
    eprintln!(
        "{} rung {index} ({}x{}x{}): {seconds:.2} s",
        case.name, rung.n_theta, rung.n_phi, rung.n_v
    );
}

const CONE_HEADER: &[&str] = &[
    "iv", "j", "f", "theta", "phi", "valid", "s", "x0", "x1", "x2", "x3", "lapse", "density",
];
const SCALAR_HEADER: &[&str] = &[
    "iv",
    "j",
    "tr_chi",
    "chi_hat_11",
    "chi_hat_12",
    "tr_chib",
    "chib_hat_11",
    "chib_hat_12",
    "zeta_1",
    "zeta_2",
    "etab_1",
    "etab_2",
    "mu",
];
const KERNEL_HEADER: &[&str] = &["iv", "j", "component", "b"];

/// Writes `cone.csv` and `scalars.csv`, and `kernel.csv` when `with_kernel`.
pub fn cmd_cone(cfg: &Resolved, with_kernel: bool) -> Result<String, CliError> {
    let (case, index) = cfg.selected()?;
    let rung = case.ladder[index];
    let start = Instant::now();
    let art = build_rung(case, &rung, with_kernel).map_err(numeric)?;
    log_rung(case, index, &rung, start.elapsed().as_secs_f64());
    fs::create_dir_all(&cfg.out)?;
    write_csv(&cfg.out.join("cone.csv"), CONE_HEADER, &art.grid.rows())?;
    write_csv(
        &cfg.out.join("scalars.csv"),
        SCALAR_HEADER,
        &art.scalars.rows(),
    )?;
    let mut summary = format!(
        "case {}\nrung {index}: {} x {} x {}\nvertex lapse {}\nnodes {}\n",
        case.name,
        rung.n_theta,
        rung.n_phi,
        rung.n_v,
        art.grid.lapse0,
        art.grid.f_nodes.len() * art.grid.n_angles()
    );
    if let Some(k) = &art.kernel {
        write_csv(&cfg.out.join("kernel.csv"), KERNEL_HEADER, &k.rows())?;
        writeln!(summary, "kernel dimension {}", k.dim).expect("write to string");
    }
    fs::write(cfg.out.join("summary.txt"), &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct EvaluateRow<'a> {
    case: &'a str,
    n_theta: usize,
    n_phi: usize,
    n_v: usize,
    f: f64,
    e1: f64,
    e1_alt: f64,
    e2: f64,
    i: f64,
    lhs: f64,
    residual: f64,
    budget: f64,
    e2_mass: f64,
    e2_curvature: f64,
    e2_coupling_gradient: f64,
    e2_nu: f64,
    error_f: f64,
    error_e1: f64,
    error_e1_alt: f64,
    error_e2: f64,
    error_i: f64,
}

const EVALUATE_HEADER: &[&str] = &[
    "case",
    "n_theta",
    "n_phi",
    "n_v",
    "f",
    "e1",
    "e1_alt",
    "e2",
    "i",
    "lhs",
    "residual",
    "budget",
    "e2_mass",
    "e2_curvature",
    "e2_coupling_gradient",
    "e2_nu",
    "error_f",
    "error_e1",
    "error_e1_alt",
    "error_e2",
    "error_i",
];

fn evaluate_row<'a>(case: &'a str, rung: &Rung, b: &ParametrixBreakdown) -> EvaluateRow<'a> {
    EvaluateRow {
        case,
        n_theta: rung.n_theta,
        n_phi: rung.n_phi,
        n_v: rung.n_v,
        f: b.f,
        e1: b.e1,
        e1_alt: b.e1_alt,
        e2: b.e2,
        i: b.i,
        lhs: b.lhs,
        residual: b.residual,
        budget: b.budget(),
        e2_mass: b.e2_parts.mass,
        e2_curvature: b.e2_parts.curvature,
        e2_coupling_gradient: b.e2_parts.coupling_gradient,
        e2_nu: b.e2_parts.nu,
        error_f: b.errors.f,
        error_e1: b.errors.e1,
        error_e1_alt: b.errors.e1_alt,
        error_e2: b.errors.e2,
        error_i: b.errors.i,
    }
}

/// Full breakdown of one case at one rung, written to `breakdown.csv`.
pub fn cmd_evaluate(cfg: &Resolved) -> Result<String, CliError> {
    let (case, index) = cfg.selected()?;
    let rung = case.ladder[index];
    let start = Instant::now();
    let art = measure_rung(case, &rung, &[Metric::Residual]).map_err(numeric)?;
    log_rung(case, index, &rung, start.elapsed().as_secs_f64());
    let b = art.breakdown.expect("residual needs the breakdown");
    fs::create_dir_all(&cfg.out)?;
    write_csv(
        &cfg.out.join("breakdown.csv"),
        EVALUATE_HEADER,
        &[evaluate_row(&case.name, &rung, &b)],
    )?;
    let mut s = format!(
        "case {}\nrung {index}: {} x {} x {}\n",
        case.name, rung.n_theta, rung.n_phi, rung.n_v
    );
    for (name, v, e) in [
        ("F", b.f, Some(b.errors.f)),
        ("E1", b.e1, Some(b.errors.e1)),
        ("E1_alt", b.e1_alt, Some(b.errors.e1_alt)),
        ("E2", b.e2, Some(b.errors.e2)),
        ("I", b.i, Some(b.errors.i)),
        ("lhs", b.lhs, None),
        ("residual", b.residual, Some(b.budget())),
    ] {
        match e {
            Some(e) => writeln!(s, "{name:<9} {v:>24.16e}  +- {e:.2e}"),
            None => writeln!(s, "{name:<9} {v:>24.16e}"),
        }
        .expect("write to string");
    }
    writeln!(s, "relative residual {:.3e}", (b.residual / b.lhs).abs()).expect("write to string");
    fs::write(cfg.out.join("summary.txt"), &s)?;
    Ok(s)
}

#[derive(Serialize)]
struct MetricRow<'a> {
    case: &'a str,
    rung: usize,
    n_theta: usize,
    n_phi: usize,
    n_v: usize,
    metric: &'a str,
    value: Option<f64>,
    floor: Option<f64>,
    failure: &'a str,
}

#[derive(Serialize)]
struct ClaimRow<'a> {
    case: &'a str,
    claim: String,
    metric: &'a str,
    status: &'a str,
    value: Option<f64>,
    detail: &'a str,
}

#[derive(Serialize)]
struct OrderRow<'a> {
    case: &'a str,
    metric: &'a str,
    order: f64,
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::AtFloor => "at_floor",
        Status::Fail => "fail",
    }
}

/// Runs the ladder of every case and writes `metrics.csv`, `claims.csv`, `orders.csv`,
/// `breakdown.csv` and `summary.txt`.
pub fn cmd_verify(cfg: &Resolved) -> Result<String, CliError> {
    let start = Instant::now();
    let reports: Vec<ConvergenceReport> = cfg
        .cases
        .par_iter()
        .map(|case| {
            let r = run_case(case, &[]).map_err(numeric)?;
            for rung in &r.rungs {
                log_rung(case, rung.index, &rung.rung, rung.seconds);
            }
            Ok(r)
        })
        .collect::<Result<_, CliError>>()?;
    eprintln!("verify: {:.1} s", start.elapsed().as_secs_f64());

    fs::create_dir_all(&cfg.out)?;
    let mut metrics = Vec::new();
    let mut claims = Vec::new();
    let mut orders = Vec::new();
    let mut breakdowns = Vec::new();
    for r in &reports {
        for rung in &r.rungs {
            let base = |metric, value, floor, failure| MetricRow {
                case: &r.case,
                rung: rung.index,
                n_theta: rung.rung.n_theta,
                n_phi: rung.rung.n_phi,
                n_v: rung.rung.n_v,
                metric,
                value,
                floor,
                failure,
            };
            if let Some(why) = &rung.failure {
                metrics.push(base("", None, None, why.as_str()));
            }
            for (m, v) in &rung.values {
                metrics.push(base(m.name(), Some(v.value), Some(v.floor), ""));
            }
            if let Some(b) = &rung.breakdown {
                breakdowns.push(evaluate_row(&r.case, &rung.rung, b));
            }
        }
        for c in &r.claims {
            claims.push(ClaimRow {
                case: &r.case,
                claim: c.claim.describe(),
                metric: c.claim.metric().name(),
                status: status_name(c.status),
                value: c.value,
                detail: &c.detail,
            });
        }
        for (m, p) in &r.orders {
            orders.push(OrderRow {
                case: &r.case,
                metric: m.name(),
                order: *p,
            });
        }
    }
    write_csv(
        &cfg.out.join("metrics.csv"),
        &[
            "case", "rung", "n_theta", "n_phi", "n_v", "metric", "value", "floor", "failure",
        ],
        &metrics,
    )?;
    write_csv(
        &cfg.out.join("claims.csv"),
        &["case", "claim", "metric", "status", "value", "detail"],
        &claims,
    )?;
    write_csv(
        &cfg.out.join("orders.csv"),
        &["case", "metric", "order"],
        &orders,
    )?;
    write_csv(&cfg.out.join("breakdown.csv"), EVALUATE_HEADER, &breakdowns)?;

    let summary = summary_table(&reports);
    fs::write(cfg.out.join("summary.txt"), &summary)?;
    if reports.iter().all(ConvergenceReport::passed) {
        Ok(summary)
    } else {
        Err(CliError::Verification(summary))
    }
}

fn summary_table(reports: &[ConvergenceReport]) -> String {
    let mut s = String::new();
    let (mut total, mut failed) = (0, 0);
    for r in reports {
        writeln!(s, "{}", r.case).expect("write to string");
        for rung in &r.rungs {
            if let Some(why) = &rung.failure {
                writeln!(s, "  rung {} FAILED: {why}", rung.index).expect("write to string");
            }
        }
        for c in &r.claims {
            total += 1;
            if !c.status.passed() {
                failed += 1;
            }
            let value = c
                .value
                .map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
            writeln!(
                s,
                "  {:<9} {:<48} {:>10}  {}",
                status_name(c.status),
                c.claim.describe(),
                value,
                c.detail
            )
            .expect("write to string");
        }
    }
    writeln!(
        s,
        "{} cases, {total} claims, {failed} failed",
        reports.len()
    )
    .expect("write to string");
    s
}
