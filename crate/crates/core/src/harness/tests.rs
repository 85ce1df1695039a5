use super::catalog::{builtin_suite, mink_coupled_n2, mink_scalar_kirchhoff};
use super::*;
use crate::geometry::MetricSpec;

fn small_ladder() -> Vec<Rung> {
    vec![
        Rung::new(4, 8, 8),
        Rung::new(6, 12, 16),
        Rung::new(8, 16, 32),
    ]
}

fn invalid(case: &TestCase) -> String {
    match case.validate() {
        Err(HarnessError::InvalidCase { reason, .. }) => reason,
        other => panic!("expected an invalid case, got {other:?}"),
    }
}

#[test]
fn builtin_cases_are_valid_and_distinct() {
    let suite = builtin_suite();
    for case in &suite {
        case.validate().unwrap();
    }
    let mut names: Vec<&str> = suite.iter().map(|c| c.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), suite.len());
}

#[test]
fn validation_rejects_malformed_cases() {
    let mut c = mink_scalar_kirchhoff();
    c.ladder = vec![Rung::new(8, 16, 64), Rung::new(8, 16, 64)];
    assert!(invalid(&c).contains("strictly refining"));

    let mut c = mink_scalar_kirchhoff();
    c.ladder.truncate(2);
    assert!(invalid(&c).contains("three rungs"));

    let mut c = mink_scalar_kirchhoff();
    c.system.seed = vec![1.0, 2.0];
    assert!(invalid(&c).contains("seed"));

    let mut c = mink_scalar_kirchhoff();
    c.claims = vec![Claim::Bound {
        metric: Metric::Residual,
        max: -1.0,
        rungs: None,
    }];
    assert!(invalid(&c).contains("positive"));

    let mut c = mink_coupled_n2();
    c.metric = MetricSpec::conformally_flat_linear(0.1);
    assert!(invalid(&c).contains("kernel oracle"));
}

#[test]
fn kirchhoff_case_converges_on_a_small_ladder() {
    let mut case = mink_scalar_kirchhoff();
    case.ladder = small_ladder();
    case.claims = vec![
        Claim::Order {
            metric: Metric::Residual,
            min: 1.8,
        },
        Claim::Bound {
            metric: Metric::TrChiExactness,
            max: 1e-9,
            rungs: None,
        },
    ];
    let report = run_case(&case, &[Metric::KirchhoffDefect]).unwrap();
    assert!(report.passed(), "{report:#?}");
    assert_eq!(report.rungs.len(), 3);
    assert!(report.rungs.iter().all(|r| r.breakdown.is_some()));
    assert!(report.orders[&Metric::Residual] >= 1.8);
    assert!(report.rungs[2]
        .values
        .contains_key(&Metric::KirchhoffDefect));
}

#[test]
fn coupled_kernel_matches_the_matrix_exponential() {
    let mut case = mink_coupled_n2();
    case.ladder = vec![Rung::new(4, 8, 16)];
    case.claims = vec![Claim::Bound {
        metric: Metric::KernelOracle,
        max: 1e-8,
        rungs: None,
    }];
    let report = run_case(&case, &[]).unwrap();
    assert!(report.passed(), "{report:#?}");
}

#[test]
fn module_errors_become_rung_failures() {
    let mut case = mink_scalar_kirchhoff();
    case.ladder = vec![Rung {
        eps0: Some(0.9),
        ..Rung::new(4, 8, 8)
    }];
    case.claims = vec![Claim::Bound {
        metric: Metric::TrChiExactness,
        max: 1e-9,
        rungs: None,
    }];
    let report = run_case(&case, &[]).unwrap();
    assert!(!report.passed());
    assert!(report.rungs[0].failure.as_deref().unwrap().contains("eps0"));
    assert_eq!(report.claims[0].status, Status::Fail);
}

#[test]
fn reruns_are_identical() {
    let mut case = mink_coupled_n2();
    case.ladder = vec![Rung::new(4, 8, 8)];
    case.claims = vec![Claim::Bound {
        metric: Metric::Residual,
        max: 1.0,
        rungs: None,
    }];
    let a = run_case(&case, &[Metric::VertexKernel]).unwrap();
    let b = run_case(&case, &[Metric::VertexKernel]).unwrap();
    assert_eq!(a.rungs[0].values, b.rungs[0].values);
    assert_eq!(a.rungs[0].breakdown, b.rungs[0].breakdown);
}
