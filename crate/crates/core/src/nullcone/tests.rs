use std::sync::Arc;

use super::*;
use crate::geometry::catalog::{ConformallyFlat, Minkowski, Schwarzschild};
use crate::geometry::scaled;

fn minkowski() -> Arc<dyn SpacetimeProvider> {
    Arc::new(Minkowski)
}

#[test]
fn minkowski_generators_are_straight_lines() {
    let p = [0.3, -0.2, 0.1, 0.5];
    let grid = build_cone(minkowski(), &ConeConfig::new(p, 1.0, 6, 8, 8)).unwrap();
    assert!(grid.is_complete());
    for iv in 0..grid.f_nodes.len() {
        for j in 0..grid.n_angles() {
            let n = grid.node(iv, j).unwrap();
            let l0 = grid.seeds[j].l0;
            let s = grid.f_nodes[iv];
            assert!((n.s - s).abs() < 1e-14);
            assert_eq!(n.lapse, 1.0);
            for m in 0..4 {
                assert!((n.x[m] - (p[m] + s * l0[m])).abs() < 1e-12);
                assert!((n.lb[m] - if m == 0 { -1.0 } else { -l0[m] }).abs() < 1e-12);
            }
            let theta = grid.sphere.angles(j).0;
            assert!((n.density - s * s * theta.sin()).abs() < 1e-12 * s * s);
        }
    }
}

#[test]
fn minkowski_time_foliation_matches_affine() {
    let grid = build_cone(
        minkowski(),
        &ConeConfig::new([0.0; 4], 1.0, 4, 8, 4).with_foliation(Foliation::TimeFunction),
    )
    .unwrap();
    assert!((grid.lapse0 - 1.0).abs() < 1e-15);
    for iv in 0..grid.f_nodes.len() {
        let n = grid.node(iv, 3).unwrap();
        assert!((n.s - grid.f_nodes[iv]).abs() < 1e-13);
        assert!((n.x[0] + grid.f_nodes[iv]).abs() < 1e-13);
    }
}

#[test]
fn conformally_flat_frames_hold_and_lapse_starts_at_factor() {
    let provider: Arc<dyn SpacetimeProvider> = Arc::new(ConformallyFlat::linear_in_x1(0.1));
    let p = [0.0, 0.2, 0.0, 0.0];
    let cfg = ConeConfig::new(p, 1.0, 8, 16, 16).with_foliation(Foliation::TimeFunction);
    let grid = build_cone(provider.clone(), &cfg).unwrap();
    assert!((grid.lapse0 - 1.02).abs() < 1e-14);
    let mut worst = 0.0f64;
    for iv in 0..grid.f_nodes.len() {
        for j in 0..grid.n_angles() {
            let n = grid.node(iv, j).unwrap();
            let geo = LocalGeometry::at(provider.as_ref(), &n.x).unwrap();
            worst = worst.max(frame_defect(&geo, &n.l, &n.lb, &n.e));
            // every node sits on the slice t = t(p) − f
            assert!((n.x[0] + grid.f_nodes[iv]).abs() < 1e-9);
        }
    }
    assert!(worst < 1e-9, "frame defect {worst:e}");
}

#[test]
fn geodesic_foliation_lapse_is_one() {
    let provider: Arc<dyn SpacetimeProvider> = Arc::new(Schwarzschild { mass: 1.0 });
    let grid = build_cone(
        provider,
        &ConeConfig::new([0.0, 8.0, 1.0, 0.5], 2.0, 4, 8, 4),
    )
    .unwrap();
    for iv in 0..grid.f_nodes.len() {
        for n in grid.slice(iv).unwrap() {
            assert_eq!(n.lapse, 1.0);
        }
    }
}

#[test]
fn schwarzschild_seed_directions_are_null() {
    let provider = Schwarzschild { mass: 1.0 };
    let p = [0.0, 5.0, -2.0, 3.0];
    let geo = LocalGeometry::at(&provider, &p).unwrap();
    let frame = vertex_frame(&provider, &geo, None).unwrap();
    for seed in seed_directions(&frame, &SphereGrid::new(6, 12)) {
        assert!(geo.dot(&seed.l0, &seed.l0).abs() < 1e-14);
        assert!((geo.dot(&seed.l0, &frame[0]) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn schwarzschild_outgoing_radial_generator_is_straight() {
    // Kerr–Schild principal null rays x(s) = p + s k with k = c(−1, n̂) are affine geodesics.
    let provider = Schwarzschild { mass: 1.0 };
    let p = [0.0, 3.0, 4.0, 0.0];
    let k = scaled(0.7, &[-1.0, 0.6, 0.8, 0.0]);
    let s_nodes: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
    let path = integrate_generator(&provider, &p, &k, &s_nodes, &OdeTolerances::default()).unwrap();
    for (s, (x, u)) in s_nodes.iter().zip(&path) {
        for m in 0..4 {
            assert!((x[m] - (p[m] + s * k[m])).abs() < 1e-10);
            assert!((u[m] - k[m]).abs() < 1e-10);
        }
    }
}

#[test]
fn boosted_observer_breaks_time_foliation() {
    let gamma = 1.0 / (1.0f64 - 0.25).sqrt();
    let mut cfg = ConeConfig::new([0.0; 4], 1.0, 4, 8, 4).with_foliation(Foliation::TimeFunction);
    cfg.observer = Some([gamma, 0.5 * gamma, 0.0, 0.0]);
    assert!(matches!(
        build_cone(minkowski(), &cfg),
        Err(ConeError::FoliationDegenerate(_))
    ));
    cfg.foliation = Foliation::Geodesic;
    assert!(build_cone(minkowski(), &cfg).is_ok());
}

#[test]
fn non_unit_observer_is_rejected() {
    let mut cfg = ConeConfig::new([0.0; 4], 1.0, 4, 8, 4);
    cfg.observer = Some([2.0, 0.0, 0.0, 0.0]);
    assert!(matches!(
        build_cone(minkowski(), &cfg),
        Err(ConeError::FrameConstructionFailure(_))
    ));
}

#[test]
fn generators_leaving_the_chart_mask_the_cone() {
    let provider: Arc<dyn SpacetimeProvider> = Arc::new(Schwarzschild { mass: 1.0 });
    let mut cfg = ConeConfig::new([0.0, 0.5, 0.0, 0.0], 2.0, 4, 8, 4);
    cfg.ode.max_steps = 5000;
    let grid = build_cone(provider, &cfg).unwrap();
    assert!(!grid.is_complete());
    assert!(grid
        .failures
        .iter()
        .any(|f| matches!(f, Some(GeneratorFailure::Escaped(_)))));
    assert!(grid.slice(0).is_some());
}

#[test]
fn invalid_grids_are_rejected() {
    for cfg in [
        ConeConfig::new([0.0; 4], 1.0, 4, 8, 3),
        ConeConfig::new([0.0; 4], 1.0, 4, 7, 4),
        ConeConfig::new([0.0; 4], -1.0, 4, 8, 4),
    ] {
        assert!(matches!(
            build_cone(minkowski(), &cfg),
            Err(ConeError::InvalidConfig(_))
        ));
    }
}

#[test]
fn dump_has_one_row_per_node() {
    let grid = build_cone(minkowski(), &ConeConfig::new([0.0; 4], 1.0, 4, 8, 4)).unwrap();
    let rows = grid.rows();
    assert_eq!(rows.len(), 5 * 32);
    assert!(rows.iter().all(|r| r.valid));
}
