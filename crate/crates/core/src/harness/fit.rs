use serde::{Deserialize, Serialize};

use super::{Measurement, Metric, RungReport};

/// A statement a case makes about one metric across its ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Claim {
    /// Fitted convergence order in `N_v` at least `min`.
    Order { metric: Metric, min: f64 },
    /// Value at most `max` on the listed rungs, or on all of them.
    Bound {
        metric: Metric,
        max: f64,
        #[serde(default)]
        rungs: Option<Vec<usize>>,
    },
}

impl Claim {
    pub fn metric(&self) -> Metric {
        match self {
            Claim::Order { metric, .. } | Claim::Bound { metric, .. } => *metric,
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Claim::Order { min, .. } => *min,
            Claim::Bound { max, .. } => *max,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Claim::Order { metric, min } => format!("order({}) >= {min}", metric.name()),
            Claim::Bound {
                metric,
                max,
                rungs: None,
            } => format!("{} <= {max:e}", metric.name()),
            Claim::Bound {
                metric,
                max,
                rungs: Some(r),
            } => format!("{} <= {max:e} on rungs {r:?}", metric.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// Every rung already sits at the roundoff floor, so there is no order to fit.
    AtFloor,
    Fail,
}

impl Status {
    pub fn passed(self) -> bool {
        self != Status::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimOutcome {
    pub claim: Claim,
    pub status: Status,
    /// The fitted order, or the worst value of a bound.
    pub value: Option<f64>,
    pub detail: String,
}

/// Least-squares slope of `log value` against `log N_v`, negated; needs three or more points.
pub fn fit_order(n_v: &[usize], values: &[f64]) -> Option<f64> {
    if n_v.len() < 3
        || n_v.len() != values.len()
        || values.iter().any(|v| !(v.is_finite() && *v > 0.0))
    {
        return None;
    }
    let x: Vec<f64> = n_v.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Some(-sxy / sxx)
}

/// Order of a measured sequence against `min`.
///
/// Rungs at or below their floor count as converged: the fit sees the floor in place of the
/// value, and a sequence that decreases into the floor on its finest rung passes.
pub fn judge_order(n_v: &[usize], samples: &[Measurement], min: f64) -> (Status, Option<f64>) {
    if samples.iter().all(|s| s.at_floor()) {
        return (Status::AtFloor, None);
    }
    let clamped: Vec<f64> = samples.iter().map(|s| s.value.abs().max(s.floor)).collect();
    let order = fit_order(n_v, &clamped);
    let monotone = clamped.windows(2).all(|w| w[1] <= w[0]);
    let status = match order {
        Some(p) if p >= min => Status::Pass,
        Some(_) if monotone && samples.last().is_some_and(|s| s.at_floor()) => Status::Pass,
        _ => Status::Fail,
    };
    (status, order)
}

pub fn evaluate_claim(claim: &Claim, rungs: &[RungReport]) -> ClaimOutcome {
    let metric = claim.metric();
    let selected: Vec<usize> = match claim {
        Claim::Bound { rungs: Some(r), .. } => r.clone(),
        _ => (0..rungs.len()).collect(),
    };
    let mut samples = Vec::with_capacity(selected.len());
    for &i in &selected {
        let Some(rung) = rungs.get(i) else {
            return ClaimOutcome {
                claim: claim.clone(),
                status: Status::Fail,
                value: None,
                detail: format!("rung {i} missing"),
            };
        };
        match (&rung.failure, rung.values.get(&metric)) {
            (Some(why), _) => {
                return ClaimOutcome {
                    claim: claim.clone(),
                    status: Status::Fail,
                    value: None,
                    detail: format!("rung {i} failed: {why}"),
                };
            }
            (None, None) => {
                return ClaimOutcome {
                    claim: claim.clone(),
                    status: Status::Fail,
                    value: None,
                    detail: format!("rung {i} did not measure {}", metric.name()),
                };
            }
            (None, Some(m)) => samples.push(*m),
        }
    }
    let values: Vec<String> = samples.iter().map(|s| format!("{:.3e}", s.value)).collect();
    let detail = format!("[{}]", values.join(", "));
    match claim {
        Claim::Order { min, .. } => {
            let n_v: Vec<usize> = selected.iter().map(|&i| rungs[i].rung.n_v).collect();
            let (status, order) = judge_order(&n_v, &samples, *min);
            ClaimOutcome {
                claim: claim.clone(),
                status,
                value: order,
                detail,
            }
        }
        Claim::Bound { max, .. } => {
            let worst = samples.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
            let ok = samples.iter().all(|s| s.value.abs() <= *max);
            ClaimOutcome {
                claim: claim.clone(),
                status: if ok { Status::Pass } else { Status::Fail },
                value: Some(worst),
                detail,
            }
        }
    }
}
