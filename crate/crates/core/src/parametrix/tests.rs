use std::f64::consts::PI;
use std::sync::Arc;

use super::*;
use crate::bundle::{Coupling, CouplingOps, CouplingSpec, FiberOps, TensorSystem};
use crate::geometry::catalog::{ConformallyFlat, Minkowski};
use crate::geometry::{LocalGeometry, SpacetimeProvider};
use crate::horizontal::{max_beyond, OpticalScalars};
use crate::nullcone::{build_cone, ConeConfig, ConeGrid, Foliation};
use crate::profile::Profile;
use crate::transport::solve_transport;

const VERTEX: [f64; 4] = [0.1, 0.2, -0.3, 0.4];

fn minkowski(n: (usize, usize, usize)) -> ConeGrid {
    build_cone(
        Arc::new(Minkowski),
        &ConeConfig::new(VERTEX, 1.0, n.0, n.1, n.2),
    )
    .unwrap()
}

fn confflat(n: (usize, usize, usize), fol: Foliation) -> ConeGrid {
    let provider: Arc<dyn SpacetimeProvider> = Arc::new(ConformallyFlat::linear_in_x1(0.1));
    build_cone(
        provider,
        &ConeConfig::new([0.0, 0.2, 0.0, 0.0], 1.0, n.0, n.1, n.2).with_foliation(fol),
    )
    .unwrap()
}

fn quadratic(entries: &[(usize, usize, f64)]) -> [[f64; 4]; 4] {
    let mut q = [[0.0; 4]; 4];
    for &(a, b, c) in entries {
        q[a][b] = c;
    }
    q
}

/// `0.2 + 0.1 t x + sin(0.7t + 0.4x − 0.9y + 0.5z + 0.3) e^{−0.1|x|²}`.
fn kirchhoff_profile() -> Profile {
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

fn trig(amplitude: f64, wave: [f64; 4], phase: f64) -> Profile {
    Profile::DampedTrig {
        amplitude,
        wave,
        phase,
        decay: 0.05,
        center: [0.0; 4],
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

fn pair_coupling() -> Coupling {
    let m = vec![
        vec![vec![0.3, -0.2], vec![0.1, 0.4]],
        vec![vec![0.2, 0.0], vec![-0.1, 0.1]],
        vec![vec![0.0, 0.1], vec![0.2, 0.0]],
        vec![vec![-0.3, 0.2], vec![0.1, -0.2]],
    ];
    CouplingSpec::Constant { matrices: m }.build(2).unwrap()
}

fn curved_coupling(dim: usize) -> Coupling {
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
    .build(dim)
    .unwrap()
}

fn breakdown(grid: &ConeGrid, system: &WaveSystem) -> ParametrixBreakdown {
    let scalars = OpticalScalars::compute(grid).unwrap();
    let kernel = solve_transport(
        grid,
        system.fiber.as_ref(),
        system.coupling.as_ref(),
        &system.seed,
    )
    .unwrap();
    evaluate_parametrix(system, grid, &scalars, &kernel).unwrap()
}

fn scalar_system(profile: Profile, seed: f64) -> WaveSystem {
    WaveSystem::manufactured(
        Arc::new(TensorSystem::new(vec![0])),
        Arc::new(Coupling::zero(1)),
        SectionField::new(vec![profile]),
        vec![seed],
    )
    .unwrap()
}

fn coupled_pair() -> WaveSystem {
    let field = SectionField::new(vec![
        kirchhoff_profile(),
        trig(0.8, [0.2, -0.5, 0.3, 0.6], 0.2),
    ]);
    WaveSystem::manufactured(
        Arc::new(TensorSystem::new(vec![0, 0])),
        Arc::new(pair_coupling()),
        field,
        vec![1.0, -0.5],
    )
    .unwrap()
}

fn curved_vector() -> WaveSystem {
    WaveSystem::manufactured(
        Arc::new(TensorSystem::new(vec![1])),
        Arc::new(curved_coupling(4)),
        vector_field(),
        vec![0.7, -0.2, 0.4, 0.1],
    )
    .unwrap()
}

#[test]
fn kirchhoff_terms_match_oracle() {
    // Frozen from an independent tensor Gauss–Legendre evaluation of F and I.
    let (f_ref, i_ref, lhs_ref) = (3.925024788025086, 8.315726516643027, 12.240751304668116);
    let grid = minkowski((16, 32, 128));
    let b = breakdown(&grid, &scalar_system(kirchhoff_profile(), 1.0));
    assert!((b.lhs - lhs_ref).abs() < 1e-12);
    assert!((b.f - f_ref).abs() < 1e-7, "F = {}", b.f);
    assert!((b.i - i_ref).abs() < 1e-8, "I = {}", b.i);
    assert!((b.lhs - b.f - b.i).abs() <= 1e-6 * b.lhs.abs());
    assert!(b.residual.abs() <= 1e-6 * b.lhs.abs());
    assert!(
        b.e1.abs() <= b.budget() && b.e2.abs() <= b.budget(),
        "{b:?}"
    );
}

#[test]
fn zero_seed_gives_zero_terms() {
    let grid = minkowski((4, 8, 8));
    let b = breakdown(&grid, &scalar_system(kirchhoff_profile(), 0.0));
    for v in [b.f, b.e1, b.e1_alt, b.e2, b.i, b.lhs, b.residual] {
        assert_eq!(v, 0.0);
    }
}

#[test]
fn uncoupled_systems_have_no_coupling_integrals() {
    let grid = confflat((8, 16, 8), Foliation::TimeFunction);
    let sys = WaveSystem::manufactured(
        Arc::new(TensorSystem::new(vec![1])),
        Arc::new(Coupling::zero(4)),
        vector_field(),
        vec![0.7, -0.2, 0.4, 0.1],
    )
    .unwrap();
    let b = breakdown(&grid, &sys);
    assert_eq!(b.e2_parts.coupling_gradient, 0.0);
    assert_eq!(b.e2_parts.nu, 0.0);
    assert!(b.e2_parts.curvature != 0.0);
}

#[test]
fn alternate_first_error_term_agrees() {
    let grid = confflat((8, 16, 32), Foliation::TimeFunction);
    let b = breakdown(&grid, &curved_vector());
    assert!(
        (b.e1 - b.e1_alt).abs() <= b.errors.e1 + b.errors.e1_alt,
        "{b:?}"
    );
    assert!(b.e1.abs() > 1e3 * (b.e1 - b.e1_alt).abs());
}

#[test]
fn curved_residual_converges() {
    let sys = curved_vector();
    let r: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&nv| {
            breakdown(&confflat((8, 16, nv), Foliation::TimeFunction), &sys)
                .residual
                .abs()
        })
        .collect();
    assert!(r[1] < r[0] / 3.0 && r[2] < r[1] / 3.0, "{r:?}");
}

#[test]
fn coupled_residual_converges() {
    let sys = coupled_pair();
    let r: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&nv| breakdown(&minkowski((16, 32, nv)), &sys).residual.abs())
        .collect();
    assert!(r[1] < r[0] / 3.0 && r[2] < r[1] / 3.0, "{r:?}");
}

#[test]
fn formula_is_linear_in_the_field() {
    let grid = confflat((8, 16, 8), Foliation::TimeFunction);
    let mut sys = curved_vector();
    let b1 = breakdown(&grid, &sys);
    let second = SectionField::new(vec![trig(0.3, [0.1, 0.2, 0.3, 0.4], 0.0); 4]);
    sys.field = second.clone();
    let b2 = breakdown(&grid, &sys);
    sys.field = SectionField::new(
        vector_field()
            .components
            .into_iter()
            .zip(second.components)
            .map(|(a, b)| Profile::Sum { terms: vec![a, b] })
            .collect(),
    );
    let b = breakdown(&grid, &sys);
    for (s, (x, y)) in [
        (b.f, (b1.f, b2.f)),
        (b.e1, (b1.e1, b2.e1)),
        (b.e2, (b1.e2, b2.e2)),
        (b.i, (b1.i, b2.i)),
    ] {
        assert!((s - x - y).abs() <= 1e-10 * (x.abs() + y.abs()));
    }
}

#[test]
fn nu_reduces_for_constant_coupling_in_flat_space() {
    let grid = minkowski((16, 32, 16));
    let scalars = OpticalScalars::compute(&grid).unwrap();
    let fiber = TensorSystem::new(vec![0, 0]);
    let k = pair_coupling();
    let n = grid.n_angles();
    let u: Vec<Vec<f64>> = (0..grid.f_nodes.len() * n)
        .map(|i| {
            let x = grid.node(i / n, i % n).unwrap().x;
            vec![x[1].sin() + 1.0, x[0] * x[2]]
        })
        .collect();
    let nu = nu_action(&fiber, &k, &grid, &scalars, &u).unwrap();
    for iv in 1..grid.f_nodes.len() {
        for j in 0..n {
            let (nd, sc, idx) = (grid.node(iv, j).unwrap(), scalars.at(iv, j), iv * n + j);
            let k4 = k.apply(&nd.x, &nd.l, &u[idx]);
            let k3 = k.apply(&nd.x, &nd.lb, &u[idx]);
            let k43 = k.apply(&nd.x, &nd.l, &k3);
            for c in 0..2 {
                let want = -0.25 * sc.tr_chib * k4[c] - 0.25 * sc.tr_chi * k3[c] + 0.25 * k43[c];
                assert!(
                    (nu[idx][c] - want).abs() < 1e-9 * (1.0 + want.abs()),
                    "{} vs {want}",
                    nu[idx][c]
                );
            }
        }
    }
    let zero = nu_action(&fiber, &Coupling::zero(2), &grid, &scalars, &u).unwrap();
    assert!(zero.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn cone_integral_of_one_is_the_cone_volume() {
    let grid = minkowski((8, 16, 16));
    let one = cone_integral(&grid, |_, _| 1.0).unwrap();
    assert!((one.value - 4.0 * PI / 3.0).abs() < 1e-8);
    assert!(one.error < 1e-10);
    let odd = cone_integral(&grid, |iv, j| {
        let nd = grid.node(iv, j).unwrap();
        nd.x[3] - VERTEX[3]
    })
    .unwrap();
    assert!(odd.value.abs() < 1e-12);
}

#[test]
fn cone_integral_converges_in_curved_space() {
    let vals: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&nv| {
            let g = confflat((8, 16, nv), Foliation::TimeFunction);
            cone_integral(&g, |iv, j| g.node(iv, j).unwrap().x[1].cos())
                .unwrap()
                .value
        })
        .collect();
    let e: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(e[1] < e[0] / 4.0 && e[2] < e[1] / 4.0, "{vals:?}");
}

#[test]
fn curvature_action_matches_commutator_of_jets() {
    let provider = ConformallyFlat::linear_in_x1(0.1);
    let geo = LocalGeometry::at(&provider, &[0.3, 0.5, -0.2, 0.1]).unwrap();
    let fiber = TensorSystem::new(vec![1]);
    let jet = covariant_jet(&fiber, &vector_field(), &geo);
    let (x, y) = ([0.3, 1.0, -0.4, 0.2], [-1.0, 0.1, 0.5, 0.7]);
    let comm: Vec<f64> = jet
        .hessian(&x, &y)
        .iter()
        .zip(jet.hessian(&y, &x))
        .map(|(a, b)| a - b)
        .collect();
    let alg = fiber.curvature(&geo, &geo.curvature(), &x, &y, &jet.value);
    for (a, b) in comm.iter().zip(&alg) {
        assert!((a - b).abs() < 1e-12, "{comm:?} vs {alg:?}");
    }
}

#[test]
fn manufactured_source_solves_the_system() {
    let sys = coupled_pair();
    let geo = LocalGeometry::at(&Minkowski, &[0.2, -0.1, 0.3, 0.05]).unwrap();
    let jet = sys.jet(&geo);
    let psi = sys.source_at(&geo, &jet);
    let h = 1e-4;
    // □φ in flat space by central differences of the first component.
    let p = &sys.field.components[0];
    let x = geo.x;
    let second = |m: usize| {
        let (mut a, mut b) = (x, x);
        a[m] += h;
        b[m] -= h;
        (p.value(&a) - 2.0 * p.value(&x) + p.value(&b)) / (h * h)
    };
    let wave = -second(0) + second(1) + second(2) + second(3);
    let coupling = sys.coupling_term(&geo, &jet);
    assert!((psi[0] - wave - coupling[0]).abs() < 1e-6);
}

#[test]
fn null_identity_is_exact_for_constants_in_flat_space() {
    let grid = minkowski((8, 16, 16));
    let scalars = OpticalScalars::compute(&grid).unwrap();
    let one = SectionField::new(vec![Profile::Constant { value: 1.0 }]);
    let r = ibp_residuals(&TensorSystem::new(vec![0]), &grid, &scalars, &one, &one).unwrap();
    assert!(r.null.abs() <= 1e-8, "{r:?}");
    assert!(r.horizontal.abs() <= 1e-12 && r.laplacian.abs() <= 1e-12);
}

#[test]
fn ibp_residuals_are_small_in_curved_space() {
    let fiber = TensorSystem::new(vec![1]);
    let s = SectionField::new(vector_field().components.into_iter().rev().collect());
    let rs: Vec<IbpResiduals> = [(8, 16, 32), (16, 32, 64)]
        .iter()
        .map(|&n| {
            let grid = confflat(n, Foliation::TimeFunction);
            let scalars = OpticalScalars::compute(&grid).unwrap();
            ibp_residuals(&fiber, &grid, &scalars, &s, &vector_field()).unwrap()
        })
        .collect();
    for (k, pick) in [
        |r: &IbpResiduals| r.horizontal,
        |r: &IbpResiduals| r.laplacian,
    ]
    .iter()
    .enumerate()
    {
        let (coarse, fine) = (pick(&rs[0]).abs(), pick(&rs[1]).abs());
        assert!(
            fine <= 1e-9 * rs[1].scales[k] || fine < coarse / 10.0,
            "{rs:?}"
        );
    }
    assert!(rs[1].null.abs() < rs[0].null.abs() / 3.0, "{rs:?}");
    assert!(rs[1].null.abs() <= 1e-5 * rs[1].scales[2], "{rs:?}");
}

#[test]
fn box_decomposition_is_exact_for_flat_monomials() {
    let grid = minkowski((8, 16, 16));
    let scalars = OpticalScalars::compute(&grid).unwrap();
    let t = SectionField::new(vec![Profile::Polynomial {
        constant: 0.5,
        linear: [0.2, -0.1, 0.3, 0.4],
        quadratic: quadratic(&[(1, 1, 1.0), (0, 2, 0.5)]),
    }]);
    let r = box_decomposition_residual(&TensorSystem::new(vec![0]), &t, &grid, &scalars).unwrap();
    let m = max_beyond(&grid, &r, grid.f_nodes[1]);
    assert!(m <= 1e-8, "{m:e}");
}

#[test]
fn box_decomposition_converges_in_curved_space() {
    let fiber = TensorSystem::new(vec![1]);
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&nv| {
            let grid = confflat((8, 16, nv), Foliation::Geodesic);
            let scalars = OpticalScalars::compute(&grid).unwrap();
            max_beyond(
                &grid,
                &box_decomposition_residual(&fiber, &vector_field(), &grid, &scalars).unwrap(),
                0.125,
            )
        })
        .collect();
    assert!(
        errs[1] < errs[0] / 3.0 && errs[2] < errs[1] / 3.0,
        "{errs:?}"
    );
}

#[test]
fn vertex_terms_tend_to_their_limits() {
    let grid = confflat((8, 16, 16), Foliation::TimeFunction);
    let scalars = OpticalScalars::compute(&grid).unwrap();
    let sys = curved_vector();
    let kernel =
        solve_transport(&grid, sys.fiber.as_ref(), sys.coupling.as_ref(), &sys.seed).unwrap();
    let b = evaluate_parametrix(&sys, &grid, &scalars, &kernel).unwrap();
    let v = vertex_terms(&sys, &grid, &scalars, &kernel, 0).unwrap();
    assert!(
        (v.l0 + b.lhs).abs() < 1e-4 * b.lhs.abs(),
        "{v:?} vs {}",
        b.lhs
    );
    assert!(v.l1.abs() < 1e-4 && v.l2.abs() < 1e-4, "{v:?}");
}

#[test]
fn mismatches_are_rejected() {
    let fiber: Arc<dyn FiberOps> = Arc::new(TensorSystem::new(vec![1]));
    let bad = WaveSystem::manufactured(
        fiber.clone(),
        Arc::new(Coupling::zero(4)),
        vector_field(),
        vec![1.0],
    );
    assert!(matches!(
        bad,
        Err(ParametrixError::SpecMismatch { what: "seed", .. })
    ));
    let grid = minkowski((4, 8, 4));
    let scalars = OpticalScalars::compute(&grid).unwrap();
    let sys = curved_vector();
    let kernel = solve_transport(
        &grid,
        fiber.as_ref(),
        &Coupling::zero(4),
        &[1.0, 0.0, 0.0, 0.0],
    )
    .unwrap();
    assert_eq!(
        evaluate_parametrix(&sys, &grid, &scalars, &kernel),
        Err(ParametrixError::SeedMismatch)
    );
}
