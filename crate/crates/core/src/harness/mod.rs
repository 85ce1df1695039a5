//! Manufactured-solution cases, the convergence driver over a grid ladder, and the claims each
//! case makes about its measured residuals.

mod case;
pub mod catalog;
mod fit;
mod limits;

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::horizontal::{
    max_beyond, torsion_residual, trchib_transport_residual, HorizontalError, OpticalScalars,
};
use crate::nullcone::{build_cone, ConeError, ConeGrid};
use crate::parametrix::{
    box_decomposition_residual, evaluate_parametrix, ibp_residuals, ParametrixBreakdown,
    ParametrixError, WaveSystem,
};
use crate::transport::{solve_transport, transport_residual, TransportError, TransportKernel};

pub use case::{reference_ladder, ConeSpec, FiberPath, Rung, SystemSpec, TestCase};
pub use fit::{evaluate_claim, fit_order, judge_order, Claim, ClaimOutcome, Status};
pub use limits::{vertex_limit_suite, VertexLimitReport};

/// Relative floor of the spectrally evaluated sphere identities.
pub const SPECTRAL_FLOOR: f64 = 1e-9;
/// Relative roundoff floor of the representation residual.
pub const RESIDUAL_FLOOR: f64 = 1e-12;
/// Pointwise residuals are compared on `f ≥ INTERIOR · v₀`, a region fixed across rungs.
pub const INTERIOR: f64 = 0.125;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("case {case}: {reason}")]
    InvalidCase { case: String, reason: String },
    #[error("{masked} of {total} generators are masked")]
    IncompleteCone { masked: usize, total: usize },
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Horizontal(#[from] HorizontalError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Parametrix(#[from] ParametrixError),
}

/// Quantities a rung can measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `|lhs − (F + E¹ + E² + I)|`.
    Residual,
    /// `|lhs − F − I| / |lhs|`.
    KirchhoffDefect,
    /// `max(|E¹|, |E²|)` over the quadrature error budget.
    ErrorTermsOverBudget,
    /// `|E¹ − E¹_alt|` over the sum of their error estimates.
    E1AltOverBudget,
    /// `max |trχ − 2/s| s` on the regular slices.
    TrChiExactness,
    /// `max(|χ̂|, |ζ|, |η̄|, |μ|)` on the regular slices.
    FlatScalars,
    Torsion,
    TrChibTransport,
    KernelTransport,
    /// Largest `|B − exp(½ f K(L)†) J|`.
    KernelOracle,
    IbpHorizontal,
    IbpLaplacian,
    IbpNull,
    BoxDecomposition,
    VertexSOverF,
    VertexFTrChib,
    VertexLapseTrChi,
    VertexArea,
    /// `ϑ trχ − 2/f` at the vertex against `L(ϑ)` there.
    VertexLapseTrChiRate,
    VertexKernel,
    /// Largest relative difference of the breakdown between the tensor and the bundle path.
    BundlePathDeviation,
}

impl Metric {
    pub const ALL: [Metric; 21] = [
        Metric::Residual,
        Metric::KirchhoffDefect,
        Metric::ErrorTermsOverBudget,
        Metric::E1AltOverBudget,
        Metric::TrChiExactness,
        Metric::FlatScalars,
        Metric::Torsion,
        Metric::TrChibTransport,
        Metric::KernelTransport,
        Metric::KernelOracle,
        Metric::IbpHorizontal,
        Metric::IbpLaplacian,
        Metric::IbpNull,
        Metric::BoxDecomposition,
        Metric::VertexSOverF,
        Metric::VertexFTrChib,
        Metric::VertexLapseTrChi,
        Metric::VertexArea,
        Metric::VertexLapseTrChiRate,
        Metric::VertexKernel,
        Metric::BundlePathDeviation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Residual => "residual",
            Metric::KirchhoffDefect => "kirchhoff_defect",
            Metric::ErrorTermsOverBudget => "error_terms_over_budget",
            Metric::E1AltOverBudget => "e1_alt_over_budget",
            Metric::TrChiExactness => "tr_chi_exactness",
            Metric::FlatScalars => "flat_scalars",
            Metric::Torsion => "torsion",
            Metric::TrChibTransport => "tr_chib_transport",
            Metric::KernelTransport => "kernel_transport",
            Metric::KernelOracle => "kernel_oracle",
            Metric::IbpHorizontal => "ibp_horizontal",
            Metric::IbpLaplacian => "ibp_laplacian",
            Metric::IbpNull => "ibp_null",
            Metric::BoxDecomposition => "box_decomposition",
            Metric::VertexSOverF => "vertex_s_over_f",
            Metric::VertexFTrChib => "vertex_f_tr_chib",
            Metric::VertexLapseTrChi => "vertex_lapse_tr_chi",
            Metric::VertexArea => "vertex_area",
            Metric::VertexLapseTrChiRate => "vertex_lapse_tr_chi_rate",
            Metric::VertexKernel => "vertex_kernel",
            Metric::BundlePathDeviation => "bundle_path_deviation",
        }
    }

    fn needs_breakdown(self) -> bool {
        matches!(
            self,
            Metric::Residual
                | Metric::KirchhoffDefect
                | Metric::ErrorTermsOverBudget
                | Metric::E1AltOverBudget
                | Metric::BundlePathDeviation
        )
    }

    fn needs_kernel(self) -> bool {
        self.needs_breakdown()
            || matches!(
                self,
                Metric::KernelTransport | Metric::KernelOracle | Metric::VertexKernel
            )
    }

    fn is_vertex_limit(self) -> bool {
        matches!(
            self,
            Metric::VertexSOverF
                | Metric::VertexFTrChib
                | Metric::VertexLapseTrChi
                | Metric::VertexArea
                | Metric::VertexLapseTrChiRate
                | Metric::VertexKernel
        )
    }
}

/// A measured value with the level below which it counts as converged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Measurement {
    pub value: f64,
    pub floor: f64,
}

impl Measurement {
    pub fn exact(value: f64) -> Self {
        Measurement { value, floor: 0.0 }
    }

    pub fn at_floor(&self) -> bool {
        self.value.abs() <= self.floor
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RungReport {
    pub index: usize,
    pub rung: Rung,
    pub values: BTreeMap<Metric, Measurement>,
    pub breakdown: Option<ParametrixBreakdown>,
    /// Diagnostic of the module error that stopped this rung.
    pub failure: Option<String>,
    /// Wall-clock time; kept out of every dump so reruns are byte-identical.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub case: String,
    pub rungs: Vec<RungReport>,
    /// Fitted order of every measured metric, where three or more rungs allow one.
    pub orders: BTreeMap<Metric, f64>,
    pub claims: Vec<ClaimOutcome>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.rungs.iter().all(|r| r.failure.is_none())
            && self.claims.iter().all(|c| c.status.passed())
    }
}

/// Runs every rung of `case`, measuring the metrics its claims name plus `extra`.
pub fn run_case(case: &TestCase, extra: &[Metric]) -> Result<ConvergenceReport, HarnessError> {
    case.validate()?;
    let metrics = case_metrics(case, extra);
    let rungs: Vec<RungReport> = case
        .ladder
        .iter()
        .enumerate()
        .map(|(index, rung)| {
            let start = Instant::now();
            let (values, breakdown, failure) = match measure_rung(case, rung, &metrics) {
                Ok(m) => (m.values, m.breakdown, None),
                Err(e) => (BTreeMap::new(), None, Some(e.to_string())),
            };
            RungReport {
                index,
                rung: *rung,
                values,
                breakdown,
                failure,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    let mut orders = BTreeMap::new();
    if rungs.len() >= 3 && rungs.iter().all(|r| r.failure.is_none()) {
        let n_v: Vec<usize> = rungs.iter().map(|r| r.rung.n_v).collect();
        for m in &metrics {
            let v: Option<Vec<f64>> = rungs
                .iter()
                .map(|r| r.values.get(m).map(|x| x.value.abs()))
                .collect();
            if let Some(p) = v.and_then(|v| fit_order(&n_v, &v)) {
                orders.insert(*m, p);
            }
        }
    }
    let claims = case
        .claims
        .iter()
        .map(|c| evaluate_claim(c, &rungs))
        .collect();
    Ok(ConvergenceReport {
        case: case.name.clone(),
        rungs,
        orders,
        claims,
    })
}

fn case_metrics(case: &TestCase, extra: &[Metric]) -> Vec<Metric> {
    let mut m: Vec<Metric> = case
        .claims
        .iter()
        .map(Claim::metric)
        .chain(extra.iter().copied())
        .collect();
    m.sort();
    m.dedup();
    m
}

/// Everything one rung produced.
pub struct RungArtifacts {
    pub grid: ConeGrid,
    pub scalars: OpticalScalars,
    pub system: WaveSystem,
    pub kernel: Option<TransportKernel>,
    pub breakdown: Option<ParametrixBreakdown>,
    pub values: BTreeMap<Metric, Measurement>,
}

/// Cone, optical scalars and, when asked, the transport kernel of one rung.
pub fn build_rung(
    case: &TestCase,
    rung: &Rung,
    with_kernel: bool,
) -> Result<RungArtifacts, HarnessError> {
    case.validate()?;
    let grid = build_cone(case.metric.build(), &case.cone_config(rung))?;
    let masked = grid.failures.iter().filter(|f| f.is_some()).count();
    if masked > 0 || !grid.is_complete() {
        return Err(HarnessError::IncompleteCone {
            masked,
            total: grid.n_angles(),
        });
    }
    let scalars = OpticalScalars::compute(&grid)?;
    let system = case.wave_system(case.system.path)?;
    let kernel = if with_kernel {
        Some(solve_transport(
            &grid,
            system.fiber.as_ref(),
            system.coupling.as_ref(),
            &system.seed,
        )?)
    } else {
        None
    };
    Ok(RungArtifacts {
        grid,
        scalars,
        system,
        kernel,
        breakdown: None,
        values: BTreeMap::new(),
    })
}

/// Builds one rung and measures `metrics` on it.
pub fn measure_rung(
    case: &TestCase,
    rung: &Rung,
    metrics: &[Metric],
) -> Result<RungArtifacts, HarnessError> {
    let with_kernel = metrics.iter().any(|m| m.needs_kernel());
    let mut art = build_rung(case, rung, with_kernel)?;
    let grid = &art.grid;
    let scalars = &art.scalars;
    let system = &art.system;
    let regular = grid.f_nodes[1];
    let interior = INTERIOR * case.cone.v0;
    let mut values = BTreeMap::new();

    if metrics.iter().any(|m| m.needs_breakdown()) {
        let kernel = art.kernel.as_ref().expect("kernel requested");
        let b = evaluate_parametrix(system, grid, scalars, kernel)?;
        let scale = b.f.abs() + b.e1.abs() + b.e2.abs() + b.i.abs() + b.lhs.abs();
        values.insert(
            Metric::Residual,
            Measurement {
                value: b.residual.abs(),
                floor: RESIDUAL_FLOOR * scale,
            },
        );
        values.insert(
            Metric::KirchhoffDefect,
            Measurement::exact((b.lhs - b.f - b.i).abs() / b.lhs.abs()),
        );
        values.insert(
            Metric::ErrorTermsOverBudget,
            Measurement::exact(b.e1.abs().max(b.e2.abs()) / b.budget()),
        );
        values.insert(
            Metric::E1AltOverBudget,
            Measurement::exact((b.e1 - b.e1_alt).abs() / (b.errors.e1 + b.errors.e1_alt)),
        );
        if metrics.contains(&Metric::BundlePathDeviation) {
            let other_path = match case.system.path {
                FiberPath::Tensor => FiberPath::Bundle,
                FiberPath::Bundle => FiberPath::Tensor,
            };
            let other = case.wave_system(other_path)?;
            let k = solve_transport(
                grid,
                other.fiber.as_ref(),
                other.coupling.as_ref(),
                &other.seed,
            )?;
            let o = evaluate_parametrix(&other, grid, scalars, &k)?;
            values.insert(
                Metric::BundlePathDeviation,
                Measurement::exact(breakdown_deviation(&b, &o)),
            );
        }
        art.breakdown = Some(b);
    }
    if metrics.contains(&Metric::TrChiExactness) || metrics.contains(&Metric::FlatScalars) {
        let (tr, flat) = flat_exactness(grid, scalars, regular);
        values.insert(Metric::TrChiExactness, Measurement::exact(tr));
        values.insert(Metric::FlatScalars, Measurement::exact(flat));
    }
    if metrics.contains(&Metric::Torsion) {
        values.insert(
            Metric::Torsion,
            Measurement::exact(max_beyond(
                grid,
                &torsion_residual(grid, scalars)?,
                interior,
            )),
        );
    }
    if metrics.contains(&Metric::TrChibTransport) {
        let r = trchib_transport_residual(grid, scalars)?;
        values.insert(
            Metric::TrChibTransport,
            Measurement::exact(max_beyond(grid, &r, interior)),
        );
    }
    if let Some(kernel) = art.kernel.as_ref() {
        if metrics.contains(&Metric::KernelTransport) {
            let r = transport_residual(
                grid,
                scalars,
                kernel,
                system.fiber.as_ref(),
                system.coupling.as_ref(),
            );
            values.insert(
                Metric::KernelTransport,
                Measurement::exact(max_beyond(grid, &r, interior)),
            );
        }
        if metrics.contains(&Metric::KernelOracle) {
            values.insert(
                Metric::KernelOracle,
                Measurement::exact(exponential_kernel_error(grid, system, kernel)),
            );
        }
    }
    if metrics.iter().any(|m| {
        matches!(
            m,
            Metric::IbpHorizontal | Metric::IbpLaplacian | Metric::IbpNull
        )
    }) {
        let companion = case.system.companion.as_ref().unwrap_or(&case.system.field);
        let r = ibp_residuals(
            system.fiber.as_ref(),
            grid,
            scalars,
            companion,
            &system.field,
        )?;
        values.insert(
            Metric::IbpHorizontal,
            Measurement {
                value: r.horizontal.abs(),
                floor: SPECTRAL_FLOOR * r.scales[0],
            },
        );
        values.insert(
            Metric::IbpLaplacian,
            Measurement {
                value: r.laplacian.abs(),
                floor: SPECTRAL_FLOOR * r.scales[1],
            },
        );
        values.insert(
            Metric::IbpNull,
            Measurement {
                value: r.null.abs(),
                floor: RESIDUAL_FLOOR * r.scales[2],
            },
        );
    }
    if metrics.contains(&Metric::BoxDecomposition) {
        let r = box_decomposition_residual(system.fiber.as_ref(), &system.field, grid, scalars)?;
        values.insert(
            Metric::BoxDecomposition,
            Measurement::exact(max_beyond(grid, &r, interior)),
        );
    }
    if metrics.iter().any(|m| m.is_vertex_limit()) {
        let v = vertex_limit_suite(grid, scalars, art.kernel.as_ref())?;
        for (m, x) in [
            (Metric::VertexSOverF, v.s_over_f),
            (Metric::VertexFTrChib, v.f_tr_chib),
            (Metric::VertexLapseTrChi, v.lapse_tr_chi),
            (Metric::VertexArea, v.area),
            (Metric::VertexLapseTrChiRate, v.lapse_tr_chi_rate),
            (Metric::VertexKernel, v.kernel),
        ] {
            values.insert(m, Measurement::exact(x));
        }
    }
    values.retain(|m, _| metrics.contains(m));
    art.values = values;
    Ok(art)
}

/// Largest per-term relative difference of two breakdowns.
fn breakdown_deviation(a: &ParametrixBreakdown, b: &ParametrixBreakdown) -> f64 {
    [
        (a.f, b.f),
        (a.e1, b.e1),
        (a.e1_alt, b.e1_alt),
        (a.e2, b.e2),
        (a.i, b.i),
        (a.lhs, b.lhs),
    ]
    .iter()
    .map(|&(x, y)| {
        let scale = x.abs().max(y.abs());
        if scale == 0.0 {
            0.0
        } else {
            (x - y).abs() / scale
        }
    })
    .fold(0.0, f64::max)
}

/// `(max |trχ − 2/s| s, max(|χ̂|, |ζ|, |η̄|, |μ|))` over slices with `f ≥ f_min`.
fn flat_exactness(grid: &ConeGrid, scalars: &OpticalScalars, f_min: f64) -> (f64, f64) {
    let mut tr = 0.0f64;
    let mut flat = 0.0f64;
    for (iv, &f) in grid.f_nodes.iter().enumerate() {
        if f < f_min {
            continue;
        }
        for j in 0..grid.n_angles() {
            let s = grid.node(iv, j).map_or(f64::NAN, |n| n.s);
            let q = scalars.at(iv, j);
            tr = tr.max((q.tr_chi - 2.0 / s).abs() * s);
            let chi_hat = q
                .chi_hat
                .iter()
                .flatten()
                .map(|c| c * c)
                .sum::<f64>()
                .sqrt();
            let zeta = q.zeta.iter().map(|c| c * c).sum::<f64>().sqrt();
            let etab = q.etab.iter().map(|c| c * c).sum::<f64>().sqrt();
            flat = flat.max(chi_hat).max(zeta).max(etab).max(q.mu.abs());
        }
    }
    (tr, flat)
}

/// Largest deviation of `B` from `exp(½ f K(L)†) J`, exact for a constant coupling along the
/// straight generators of the geodesic Minkowski cone.
fn exponential_kernel_error(grid: &ConeGrid, system: &WaveSystem, kernel: &TransportKernel) -> f64 {
    let dim = system.dim();
    let mut worst = 0.0f64;
    for j in 0..grid.n_angles() {
        let Some(first) = grid.node(0, j) else {
            return f64::NAN;
        };
        let Ok(geo) = crate::geometry::LocalGeometry::at(grid.provider.as_ref(), &first.x) else {
            return f64::NAN;
        };
        // K(L)† column by column.
        let adj = DMatrix::from_fn(dim, dim, |r, c| {
            let mut e = vec![0.0; dim];
            e[c] = 1.0;
            let w =
                system
                    .coupling
                    .apply_transpose(&first.x, &first.l, &system.fiber.lower(&geo, &e));
            system.fiber.raise(&geo, &w)[r]
        });
        let seed = DVector::from_column_slice(&system.seed);
        for (iv, &f) in grid.f_nodes.iter().enumerate() {
            let want = (&adj * (0.5 * f)).exp() * &seed;
            let Some(b) = kernel.b(iv, j) else {
                return f64::NAN;
            };
            let err = b
                .iter()
                .zip(want.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(err);
        }
    }
    worst
}
