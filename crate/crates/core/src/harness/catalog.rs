//! The shipped verification suite.

use crate::bundle::CouplingSpec;
use crate::geometry::MetricSpec;
use crate::nullcone::Foliation;
use crate::parametrix::{SectionField, Source};
use crate::profile::Profile;

use super::{reference_ladder, Claim, ConeSpec, FiberPath, Metric, Rung, SystemSpec, TestCase};

pub const MIN_ORDER: f64 = 1.8;
pub const VERTEX_TOLERANCE: f64 = 1e-3;

fn quadratic(entries: &[(usize, usize, f64)]) -> [[f64; 4]; 4] {
    let mut q = [[0.0; 4]; 4];
    for &(a, b, c) in entries {
        q[a][b] = c;
    }
    q
}

fn trig(amplitude: f64, wave: [f64; 4], phase: f64) -> Profile {
    Profile::DampedTrig {
        amplitude,
        wave,
        phase,
        decay: 0.05,
        center: [0.0; 4],
    }
}

/// `0.2 + 0.1 t x + sin(0.7t + 0.4x − 0.9y + 0.5z + 0.3) e^{−0.1|x|²}`.
pub fn kirchhoff_profile() -> Profile {
    Profile::Sum {
        terms: vec![
            Profile::Polynomial {
                constant: 0.2,
                linear: [0.0; 4],
                quadratic: quadratic(&[(0, 1, 0.1)]),
            },
            Profile::DampedTrig {
                amplitude: 1.0,
                wave: [0.7, 0.4, -0.9, 0.5],
                phase: 0.3,
                decay: 0.1,
                center: [0.0; 4],
            },
        ],
    }
}

fn vector_field() -> SectionField {
    SectionField::new(vec![
        trig(1.0, [0.3, 0.5, -0.2, 0.4], 0.1),
        trig(0.7, [-0.4, 0.2, 0.6, 0.1], 0.5),
        Profile::Polynomial {
            constant: 0.3,
            linear: [0.1, 0.0, 0.2, -0.1],
            quadratic: quadratic(&[(1, 2, 0.2)]),
        },
        trig(0.5, [0.2, -0.3, 0.1, 0.7], -0.4),
    ])
}

/// The constant coupling of the two-scalar case, as `K_μ[row][col]`.
pub fn pair_coupling() -> CouplingSpec {
    CouplingSpec::Constant {
        matrices: vec![
            vec![vec![0.3, -0.2], vec![0.1, 0.4]],
            vec![vec![0.2, 0.0], vec![-0.1, 0.1]],
            vec![vec![0.0, 0.1], vec![0.2, 0.0]],
            vec![vec![-0.3, 0.2], vec![0.1, -0.2]],
        ],
    }
}

fn modulated_coupling() -> CouplingSpec {
    let profile = Profile::DampedTrig {
        amplitude: 1.0,
        wave: [0.4, 1.1, -0.7, 0.5],
        phase: 0.3,
        decay: 0.2,
        center: [0.0; 4],
    };
    CouplingSpec::Modulated {
        base: Box::new(CouplingSpec::Patterned {
            scale: 0.3,
            phase: 0.0,
        }),
        profile,
    }
}

fn order(metric: Metric) -> Claim {
    Claim::Order {
        metric,
        min: MIN_ORDER,
    }
}

fn bound(metric: Metric, max: f64) -> Claim {
    Claim::Bound {
        metric,
        max,
        rungs: None,
    }
}

fn vertex_claims(stationary_lapse: bool, kernel: bool) -> Vec<Claim> {
    let lapse = if stationary_lapse {
        Metric::VertexLapseTrChi
    } else {
        Metric::VertexLapseTrChiRate
    };
    let mut c: Vec<Claim> = [
        Metric::VertexSOverF,
        Metric::VertexFTrChib,
        Metric::VertexArea,
        lapse,
    ]
    .map(|m| bound(m, VERTEX_TOLERANCE))
    .into();
    if kernel {
        c.push(bound(Metric::VertexKernel, VERTEX_TOLERANCE));
    }
    c
}

fn linear_confflat() -> MetricSpec {
    MetricSpec::conformally_flat_linear(0.1)
}

/// Scalar Kirchhoff reduction in Minkowski space.
pub fn mink_scalar_kirchhoff() -> TestCase {
    let mut claims = vec![
        Claim::Bound {
            metric: Metric::KirchhoffDefect,
            max: 1e-6,
            rungs: Some(vec![1]),
        },
        Claim::Bound {
            metric: Metric::ErrorTermsOverBudget,
            max: 1.0,
            rungs: Some(vec![1]),
        },
        order(Metric::Residual),
        bound(Metric::TrChiExactness, 1e-9),
        bound(Metric::FlatScalars, 1e-8),
        order(Metric::IbpHorizontal),
        order(Metric::IbpLaplacian),
        order(Metric::IbpNull),
    ];
    claims.extend(vertex_claims(true, true));
    TestCase {
        name: "mink-scalar-kirchhoff".into(),
        metric: MetricSpec::Minkowski,
        cone: ConeSpec {
            vertex: [0.1, 0.2, -0.3, 0.4],
            v0: 1.0,
            foliation: Foliation::Geodesic,
        },
        system: SystemSpec {
            ranks: vec![0],
            path: FiberPath::Tensor,
            field: SectionField::new(vec![kirchhoff_profile()]),
            source: Source::Manufactured,
            coupling: CouplingSpec::Zero,
            seed: vec![1.0],
            companion: Some(SectionField::new(vec![trig(
                0.8,
                [0.2, -0.5, 0.3, 0.6],
                0.2,
            )])),
        },
        ladder: reference_ladder(),
        claims,
    }
}

/// Two scalars in Minkowski space with a constant first-order coupling.
pub fn mink_coupled_n2() -> TestCase {
    let mut claims = vec![order(Metric::Residual), bound(Metric::KernelOracle, 1e-8)];
    claims.extend(vertex_claims(true, true));
    TestCase {
        name: "mink-coupled-n2".into(),
        metric: MetricSpec::Minkowski,
        cone: ConeSpec {
            vertex: [0.1, 0.2, -0.3, 0.4],
            v0: 1.0,
            foliation: Foliation::Geodesic,
        },
        system: SystemSpec {
            ranks: vec![0, 0],
            path: FiberPath::Tensor,
            field: SectionField::new(vec![
                kirchhoff_profile(),
                trig(0.8, [0.2, -0.5, 0.3, 0.6], 0.2),
            ]),
            source: Source::Manufactured,
            coupling: pair_coupling(),
            seed: vec![1.0, -0.5],
            companion: None,
        },
        ladder: reference_ladder(),
        claims,
    }
}

/// A vector field on the conformally flat metric with a smooth, position-dependent coupling.
pub fn confflat_tensor_r1() -> TestCase {
    let mut claims = vec![
        order(Metric::Residual),
        bound(Metric::E1AltOverBudget, 1.0),
        order(Metric::IbpHorizontal),
        order(Metric::IbpLaplacian),
        order(Metric::IbpNull),
        order(Metric::BoxDecomposition),
    ];
    claims.extend(vertex_claims(false, true));
    TestCase {
        name: "confflat-tensor-r1".into(),
        metric: linear_confflat(),
        cone: ConeSpec {
            vertex: [0.0, 0.2, 0.0, 0.0],
            v0: 1.0,
            foliation: Foliation::TimeFunction,
        },
        system: SystemSpec {
            ranks: vec![1],
            path: FiberPath::Tensor,
            field: vector_field(),
            source: Source::Manufactured,
            coupling: modulated_coupling(),
            seed: vec![0.7, -0.2, 0.4, 0.1],
            companion: Some(SectionField::new(
                vector_field().components.into_iter().rev().collect(),
            )),
        },
        ladder: reference_ladder(),
        claims,
    }
}

/// Structure identities and the scalar wave decomposition on the geodesic foliation of the
/// conformally flat metric.
pub fn confflat_geodesic_scalar() -> TestCase {
    let mut claims = vec![
        order(Metric::Torsion),
        order(Metric::TrChibTransport),
        order(Metric::BoxDecomposition),
    ];
    claims.extend(vertex_claims(true, false));
    TestCase {
        name: "confflat-geodesic-scalar".into(),
        metric: linear_confflat(),
        cone: ConeSpec {
            vertex: [0.0, 0.2, 0.0, 0.0],
            v0: 1.0,
            foliation: Foliation::Geodesic,
        },
        system: SystemSpec {
            ranks: vec![0],
            path: FiberPath::Tensor,
            field: SectionField::new(vec![Profile::Sum {
                terms: vec![
                    trig(1.0, [0.3, 0.5, -0.2, 0.4], 0.1),
                    trig(0.6, [-0.4, 0.2, 0.6, 0.1], 0.5),
                ],
            }]),
            source: Source::Manufactured,
            coupling: CouplingSpec::Zero,
            seed: vec![1.0],
            companion: None,
        },
        ladder: reference_ladder(),
        claims,
    }
}

/// A scalar and a vector coupled on a conformally flat metric whose factor is stationary at the
/// vertex, run through the dense direct-sum bundle and compared with the tensor path.
pub fn confflat_bundle_r01() -> TestCase {
    let factor = Profile::Polynomial {
        constant: 1.2,
        linear: [0.0; 4],
        quadratic: quadratic(&[(1, 1, 0.1), (2, 2, 0.05), (1, 3, 0.04)]),
    };
    let mut field = vec![kirchhoff_profile()];
    field.extend(vector_field().components);
    let mut claims = vec![bound(Metric::BundlePathDeviation, 1e-12)];
    claims.extend(vertex_claims(true, true));
    TestCase {
        name: "confflat-bundle-r01".into(),
        metric: MetricSpec::ConformallyFlat { factor },
        cone: ConeSpec {
            vertex: [0.0; 4],
            v0: 1.0,
            foliation: Foliation::TimeFunction,
        },
        system: SystemSpec {
            ranks: vec![0, 1],
            path: FiberPath::Bundle,
            field: SectionField::new(field),
            source: Source::Manufactured,
            coupling: modulated_coupling(),
            seed: vec![0.5, 1.0, 0.2, -0.3, 0.4],
            companion: None,
        },
        ladder: vec![Rung::new(8, 16, 64), Rung::new(16, 32, 128)],
        claims,
    }
}

pub fn builtin_suite() -> Vec<TestCase> {
    vec![
        mink_scalar_kirchhoff(),
        mink_coupled_n2(),
        confflat_tensor_r1(),
        confflat_geodesic_scalar(),
        confflat_bundle_r01(),
    ]
}
