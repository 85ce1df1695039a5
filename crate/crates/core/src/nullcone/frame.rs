use crate::geometry::{axpy, scaled, LocalGeometry, SpacetimeProvider, Vec4};

use super::ConeError;

/// Orthonormal frame `e₀ … e₃` at the vertex with `e₀ = 𝔱` future-directed.
pub fn vertex_frame(
    provider: &dyn SpacetimeProvider,
    geo: &LocalGeometry,
    t_norm: Option<Vec4>,
) -> Result<[Vec4; 4], ConeError> {
    let e0 = match t_norm {
        Some(t) => {
            let n = geo.dot(&t, &t);
            if (n + 1.0).abs() > 1e-9 {
                return Err(ConeError::FrameConstructionFailure(format!(
                    "g(𝔱, 𝔱) = {n}, expected −1"
                )));
            }
            t
        }
        None => default_observer(provider, geo)?,
    };
    let mut frame = [e0, [0.0; 4], [0.0; 4], [0.0; 4]];
    for k in 1..4 {
        let mut v = [0.0; 4];
        v[k] = 1.0;
        let mut w = axpy(geo.dot(&v, &e0), &e0, &v);
        for e in frame.iter().take(k).skip(1) {
            w = axpy(-geo.dot(&v, e), e, &w);
        }
        let n2 = geo.dot(&w, &w);
        if !(n2 > 1e-12) {
            return Err(ConeError::FrameConstructionFailure(format!(
                "coordinate axis {k} is not spacelike after projection"
            )));
        }
        frame[k] = scaled(1.0 / n2.sqrt(), &w);
    }
    Ok(frame)
}

/// Future unit normal to the time slices, or normalized `∂₀` without a time function.
fn default_observer(
    provider: &dyn SpacetimeProvider,
    geo: &LocalGeometry,
) -> Result<Vec4, ConeError> {
    let v = match provider.time_function(&geo.x) {
        Some(t) => scaled(-1.0, &geo.raise(&t.grad)),
        None => [1.0, 0.0, 0.0, 0.0],
    };
    let n2 = geo.dot(&v, &v);
    if !(n2 < 0.0) {
        return Err(ConeError::FrameConstructionFailure(
            "default observer is not timelike".into(),
        ));
    }
    Ok(scaled(1.0 / (-n2).sqrt(), &v))
}

/// Past-directed timelike reference used to fix the conjugate null direction.
pub fn past_reference(provider: &dyn SpacetimeProvider, geo: &LocalGeometry) -> Vec4 {
    match provider.time_function(&geo.x) {
        Some(t) => geo.raise(&t.grad),
        None => [-1.0, 0.0, 0.0, 0.0],
    }
}

/// Adapted null frame `(L̲, e₁, e₂)` for the null vector `l` and sphere tangents `xa`.
///
/// `e_a` come from Gram–Schmidt on the tangents; `L̲` is the null vector orthogonal to the
/// `e_a` with `g(L, L̲) = −2`. Two projection passes remove integrator drift.
pub fn adapted_frame(
    geo: &LocalGeometry,
    l: &Vec4,
    xa: &[Vec4; 2],
    reference: &Vec4,
) -> (Vec4, [Vec4; 2]) {
    let mut e = gram_schmidt(geo, xa);
    let mut lb = conjugate_null(geo, l, &e, reference);
    for _ in 0..2 {
        for ea in e.iter_mut() {
            let c_l = 0.5 * geo.dot(ea, &lb);
            let c_lb = 0.5 * geo.dot(ea, l);
            *ea = axpy(c_l, l, &axpy(c_lb, &lb, ea));
        }
        e = gram_schmidt(geo, &e);
        lb = conjugate_null(geo, l, &e, reference);
    }
    (lb, e)
}

fn gram_schmidt(geo: &LocalGeometry, xa: &[Vec4; 2]) -> [Vec4; 2] {
    let e1 = scaled(1.0 / geo.dot(&xa[0], &xa[0]).sqrt(), &xa[0]);
    let w = axpy(-geo.dot(&xa[1], &e1), &e1, &xa[1]);
    let e2 = scaled(1.0 / geo.dot(&w, &w).sqrt(), &w);
    [e1, e2]
}

fn conjugate_null(geo: &LocalGeometry, l: &Vec4, e: &[Vec4; 2], reference: &Vec4) -> Vec4 {
    let mut w = *reference;
    for ea in e {
        w = axpy(-geo.dot(&w, ea), ea, &w);
    }
    let wl = geo.dot(&w, l);
    let k = -geo.dot(&w, &w) / (2.0 * wl);
    let n = axpy(k, l, &w);
    scaled(-2.0 / geo.dot(&n, l), &n)
}

/// Largest violation among the null-frame relations.
pub fn frame_defect(geo: &LocalGeometry, l: &Vec4, lb: &Vec4, e: &[Vec4; 2]) -> f64 {
    let mut worst = geo
        .dot(l, l)
        .abs()
        .max(geo.dot(lb, lb).abs())
        .max((geo.dot(l, lb) + 2.0).abs());
    for (a, ea) in e.iter().enumerate() {
        worst = worst.max(geo.dot(l, ea).abs()).max(geo.dot(lb, ea).abs());
        for (b, eb) in e.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((geo.dot(ea, eb) - target).abs());
        }
    }
    worst
}
