use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::geometry::{
    ConformallyFlat, LocalGeometry, Minkowski, Schwarzschild, SpacetimeProvider,
};
use crate::numerics::ode::{integrate_to, OdeSystem, OdeTolerances};

fn confflat() -> ConformallyFlat {
    ConformallyFlat::linear_in_x1(0.1)
}

fn geo(p: &dyn SpacetimeProvider, x: Vec4) -> LocalGeometry {
    LocalGeometry::at(p, &x).unwrap()
}

#[test]
fn scalar_bundle_is_trivial() {
    let b = tensor_bundle(0);
    let g = geo(&confflat(), [0.1, 0.2, 0.3, 0.4]);
    assert_eq!(b.dim(), 1);
    assert_eq!(b.metric(&g), DMatrix::identity(1, 1));
    for mu in 0..4 {
        assert_eq!(b.connection(&g, mu), DMatrix::zeros(1, 1));
    }
}

#[test]
fn vector_bundle_on_minkowski() {
    let b = tensor_bundle(1);
    let g = geo(&Minkowski, [0.0; 4]);
    assert_eq!(
        b.metric(&g),
        DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0, 1.0]))
    );
    for mu in 0..4 {
        assert!(b.connection(&g, mu).iter().all(|&c| c == 0.0));
    }
}

#[test]
fn connection_is_metric_compatible() {
    let x = [0.3, 4.0, -2.0, 1.0];
    let h = 1e-5;
    for rank in [1, 2] {
        let b = tensor_bundle(rank);
        let s = Schwarzschild { mass: 1.0 };
        let g0 = geo(&s, x);
        let hm = b.metric(&g0);
        for mu in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[mu] += h;
            xm[mu] -= h;
            let dh = (b.metric(&geo(&s, xp)) - b.metric(&geo(&s, xm))) / (2.0 * h);
            let w = b.connection(&g0, mu);
            let expected = w.transpose() * &hm + &hm * &w;
            assert!((dh - expected).amax() < 1e-8, "rank {rank}, μ = {mu}");
        }
    }
}

struct PairTransport<'a> {
    bundle: &'a dyn FiberBundle,
    provider: &'a dyn SpacetimeProvider,
    start: Vec4,
    velocity: Vec4,
}

impl OdeSystem for PairTransport<'_> {
    fn dim(&self) -> usize {
        2 * self.bundle.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        let x = crate::geometry::axpy(t, &self.velocity, &self.start);
        let g = LocalGeometry::at(self.provider, &x).map_err(|e| e.to_string())?;
        let n = self.bundle.dim();
        let mut w = DMatrix::zeros(n, n);
        for mu in 0..4 {
            w += self.bundle.connection(&g, mu) * self.velocity[mu];
        }
        for half in 0..2 {
            let v = DVector::from_column_slice(&y[half * n..(half + 1) * n]);
            let d = -(&w * v);
            dy[half * n..(half + 1) * n].copy_from_slice(d.as_slice());
        }
        Ok(())
    }
}

#[test]
fn parallel_transport_preserves_rank_two_pairing() {
    let provider = confflat();
    let bundle = TensorBundle { rank: 2 };
    let start = [0.0, 0.2, -0.1, 0.3];
    let velocity = [0.8, -0.5, 0.9, 0.4];
    let sys = PairTransport {
        bundle: &bundle,
        provider: &provider,
        start,
        velocity,
    };
    let y0: Vec<f64> = (0..32).map(|i| (0.37 * i as f64 + 0.1).sin()).collect();
    let tol = OdeTolerances {
        rtol: 1e-12,
        atol: 1e-14,
        max_steps: 100_000,
    };
    let ys = integrate_to(&sys, 0.0, &y0, &[0.5, 1.0, 2.0], &tol, 1e-3).unwrap();
    let pairing = |t: f64, y: &[f64]| {
        let g = geo(&provider, crate::geometry::axpy(t, &velocity, &start));
        pairings::inner(
            &bundle.metric(&g),
            &DVector::from_column_slice(&y[..16]),
            &DVector::from_column_slice(&y[16..]),
        )
    };
    let p0 = pairing(0.0, &y0);
    for (t, y) in [0.5, 1.0, 2.0].iter().zip(&ys) {
        assert!(
            (pairing(*t, y) - p0).abs() < 1e-9 * p0.abs().max(1.0),
            "t = {t}"
        );
    }
}

#[test]
fn direct_sum_constructions() {
    let single = direct_sum(vec![tensor_bundle(1)]);
    let g = geo(&confflat(), [0.1, 0.2, 0.3, 0.4]);
    assert_eq!(single.metric(&g), tensor_bundle(1).metric(&g));
    assert_eq!(single.connection(&g, 2), tensor_bundle(1).connection(&g, 2));

    let ss = direct_sum(vec![tensor_bundle(0), tensor_bundle(0)]);
    assert_eq!(ss.dim(), 2);
    assert_eq!(ss.metric(&g), DMatrix::identity(2, 2));

    let big = direct_sum(vec![tensor_bundle(4), tensor_bundle(2)]);
    assert_eq!(big.block_dims(), vec![256, 16]);
    for mu in 0..4 {
        let w = big.connection(&g, mu);
        assert!(w.view((0, 256), (256, 16)).iter().all(|&c| c == 0.0));
        assert!(w.view((256, 0), (16, 256)).iter().all(|&c| c == 0.0));
    }
}

#[test]
fn flat_and_scalar_curvature_actions_vanish() {
    let x = [1.0, 0.0, 0.0, 0.0];
    let y = [0.0, 1.0, 0.5, 0.0];
    let flat = geo(&Minkowski, [0.0; 4]);
    let t = FiberElement {
        components: vec![1.0, 2.0, 3.0, 4.0],
        point: crate::geometry::SpacetimePoint::new([0.0; 4]),
    };
    let r = curvature_action_commutator(&TensorBundle { rank: 1 }, &flat, &x, &y, &t);
    assert!(r.components.iter().all(|&c| c == 0.0));
    let curved = geo(&confflat(), [0.1, 0.2, 0.3, 0.4]);
    let s = FiberElement {
        components: vec![2.5],
        point: t.point,
    };
    let r = curvature_action_commutator(&TensorBundle { rank: 0 }, &curved, &x, &y, &s);
    assert_eq!(r.components, vec![0.0]);
}

/// `D_ν T^ρ` of the vector field `T^ρ(x) = sin(ρ + x·k)` in components `[ν][ρ]`.
fn covariant_gradient(provider: &dyn SpacetimeProvider, x: &Vec4) -> [[f64; 4]; 4] {
    let k = [0.3, -0.7, 0.5, 0.9];
    let phase: f64 = (0..4).map(|i| k[i] * x[i]).sum();
    let t: Vec4 = std::array::from_fn(|r| (r as f64 + phase).sin());
    let g = geo(provider, *x);
    std::array::from_fn(|nu| {
        let mut e = [0.0; 4];
        e[nu] = 1.0;
        let partial: Vec4 = std::array::from_fn(|r| k[nu] * (r as f64 + phase).cos());
        g.covariant_along(&e, &t, &partial)
    })
}

#[test]
fn vector_curvature_action_matches_nested_derivatives() {
    let provider = confflat();
    let x = [0.2, 0.4, -0.3, 0.1];
    let g = geo(&provider, x);
    let k = [0.3, -0.7, 0.5, 0.9];
    let phase: f64 = (0..4).map(|i| k[i] * x[i]).sum();
    let t: Vec<f64> = (0..4).map(|r| (r as f64 + phase).sin()).collect();
    let (a, b) = (1usize, 2usize);
    let mut ea = [0.0; 4];
    let mut eb = [0.0; 4];
    ea[a] = 1.0;
    eb[b] = 1.0;
    let elem = FiberElement {
        components: t.clone(),
        point: crate::geometry::SpacetimePoint::new(x),
    };
    let exact =
        curvature_action_commutator(&TensorBundle { rank: 1 }, &g, &ea, &eb, &elem).components;
    let errors: Vec<f64> = [1e-2, 5e-3]
        .iter()
        .map(|&h| {
            // D_a (D_b T) − D_b (D_a T); the Γ^σ_{ab} terms cancel in the commutator.
            let second = |m: usize, n: usize| -> Vec4 {
                let mut xp = x;
                let mut xm = x;
                xp[m] += h;
                xm[m] -= h;
                let dp = covariant_gradient(&provider, &xp)[n];
                let dm = covariant_gradient(&provider, &xm)[n];
                let partial: Vec4 = std::array::from_fn(|r| (dp[r] - dm[r]) / (2.0 * h));
                let mut e = [0.0; 4];
                e[m] = 1.0;
                g.covariant_along(&e, &covariant_gradient(&provider, &x)[n], &partial)
            };
            let ab = second(a, b);
            let ba = second(b, a);
            (0..4)
                .map(|r| (ab[r] - ba[r] - exact[r]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(errors[0] < 1e-4, "{errors:?}");
    assert!(errors[0] / errors[1] > 3.5, "{errors:?}");
}

#[test]
fn pairings_with_identity_metric() {
    let h = DMatrix::identity(2, 2);
    let a = DVector::from_vec(vec![1.0, -2.0]);
    let t = DVector::from_vec(vec![0.5, 3.0]);
    let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
    assert_eq!(
        pairings::sandwich(&h, &a, &k, &t),
        (a.transpose() * &k * &t)[(0, 0)]
    );
    assert_eq!(pairings::bra(&h, &a, &k), k.transpose() * &a);
    assert_eq!(pairings::ket(&k, &t), &k * &t);
    assert_eq!(pairings::compose(&k, &k), &k * &k);
}

#[test]
fn vector_inner_product_on_minkowski() {
    let g = geo(&Minkowski, [0.0; 4]);
    let h = tensor_bundle(1).metric(&g);
    let a = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
    let b = DVector::from_vec(vec![-1.0, 0.5, 2.0, 1.0]);
    assert_eq!(pairings::inner(&h, &a, &b), 1.0 + 1.0 + 6.0 + 4.0);
}

#[test]
fn sandwich_matches_index_contraction_in_curved_metric() {
    let g = geo(&Schwarzschild { mass: 1.0 }, [0.3, 4.0, 2.0, -1.0]);
    // A^{IJ} as a bilinear form on covectors; the stored endomorphism is K = A g.
    let a_up = DMatrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.37).sin());
    let gm = DMatrix::from_fn(4, 4, |i, j| g.g[i][j]);
    let k = &a_up * &gm;
    let s = DVector::from_fn(4, |i, _| (i as f64 + 0.3).cos());
    let t = DVector::from_fn(4, |i, _| (2.0 * i as f64 - 0.7).sin());
    let s_low = &gm * &s;
    let t_low = &gm * &t;
    let mut index = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            index += s_low[i] * a_up[(i, j)] * t_low[j];
        }
    }
    let h = tensor_bundle(1).metric(&g);
    assert!((pairings::sandwich(&h, &s, &k, &t) - index).abs() < 1e-12);
    let bra = pairings::bra(&h, &s, &k);
    assert!((pairings::inner(&h, &bra, &t) - index).abs() < 1e-12);
}

fn arb_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn direct_sum_pairing_is_sum_of_blocks(a in arb_vec(21), b in arb_vec(21)) {
        let g = geo(&confflat(), [0.1, 0.3, -0.2, 0.5]);
        let sum = direct_sum(vec![tensor_bundle(0), tensor_bundle(1), tensor_bundle(2)]);
        let whole = pairings::inner(&sum.metric(&g), &DVector::from_vec(a.clone()), &DVector::from_vec(b.clone()));
        let mut parts = 0.0;
        let mut off = 0;
        for r in 0..3 {
            let bundle = tensor_bundle(r);
            let n = bundle.dim();
            parts += pairings::inner(
                &bundle.metric(&g),
                &DVector::from_column_slice(&a[off..off + n]),
                &DVector::from_column_slice(&b[off..off + n]),
            );
            off += n;
        }
        prop_assert!((whole - parts).abs() <= 1e-13 * (1.0 + whole.abs()));
    }

    #[test]
    fn dense_and_tensor_paths_agree(v in arb_vec(21), dir in arb_vec(4), other in arb_vec(4)) {
        let provider = Schwarzschild { mass: 1.0 };
        let g = geo(&provider, [0.2, 3.0, -1.5, 2.0]);
        let curv = g.curvature();
        let dense = DenseFiber::new(direct_sum(vec![tensor_bundle(0), tensor_bundle(1), tensor_bundle(2)]));
        let tensor = TensorSystem::new(vec![0, 1, 2]);
        let d: Vec4 = [dir[0], dir[1], dir[2], dir[3]];
        let o: Vec4 = [other[0], other[1], other[2], other[3]];
        let close = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        prop_assert!(close(dense.lower(&g, &v), tensor.lower(&g, &v)));
        prop_assert!(close(dense.raise(&g, &v), tensor.raise(&g, &v)));
        prop_assert!(close(dense.connect(&g, &d, &v), tensor.connect(&g, &d, &v)));
        prop_assert!(close(dense.connect_partial(&g, 2, &d, &v), tensor.connect_partial(&g, 2, &d, &v)));
        prop_assert!(close(dense.curvature(&g, &curv, &d, &o, &v), tensor.curvature(&g, &curv, &d, &o, &v)));
    }

    #[test]
    fn dense_and_block_couplings_agree(v in arb_vec(9), dir in arb_vec(4)) {
        let spec = CouplingSpec::Modulated {
            base: Box::new(CouplingSpec::Patterned { scale: 0.3, phase: 0.1 }),
            profile: crate::profile::Profile::Polynomial { constant: 1.0, linear: [0.1, 0.2, 0.0, -0.1], quadratic: [[0.0; 4]; 4] },
        };
        let dense = spec.build(9).unwrap();
        let block = BlockCoupling::new(&dense, &[1, 4, 4]);
        let x = [0.1, 0.2, 0.3, 0.4];
        let d: Vec4 = [dir[0], dir[1], dir[2], dir[3]];
        for (a, b) in dense.apply(&x, &d, &v).iter().zip(block.apply(&x, &d, &v)) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
        for (a, b) in dense.apply_transpose(&x, &d, &v).iter().zip(block.apply_transpose(&x, &d, &v)) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
    }
}

#[test]
fn coupling_derivative_follows_modulation() {
    let spec = CouplingSpec::Modulated {
        base: Box::new(CouplingSpec::Patterned {
            scale: 1.0,
            phase: 0.0,
        }),
        profile: crate::profile::Profile::Polynomial {
            constant: 0.0,
            linear: [0.0, 2.0, 0.0, 0.0],
            quadratic: [[0.0; 4]; 4],
        },
    };
    let c = spec.build(2).unwrap();
    let x = [0.0, 0.5, 0.0, 0.0];
    assert_eq!(c.matrix(&x, 3), c.base(3) * 1.0);
    assert_eq!(c.derivative(&x, 1, 3), c.base(3) * 2.0);
    assert!(CouplingSpec::Constant {
        matrices: vec![vec![vec![0.0]]; 3]
    }
    .build(1)
    .is_err());
    assert!(Coupling::zero(3).is_zero());
}
