//! Deterministic summation, Fejér sphere weights and vertex-aware Simpson integration.

use std::f64::consts::PI;

/// Pairwise (tree) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Fejér's first rule on `n` interior Chebyshev angles `θ_j = (j + ½)π/n`.
///
/// Returns `(θ_j, w_j)` with `Σ w_j g(cos θ_j) ≈ ∫_{-1}^{1} g(μ) dμ`.
pub fn fejer_first(n: usize) -> (Vec<f64>, Vec<f64>) {
    let theta: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * PI / n as f64).collect();
    let weights = theta
        .iter()
        .map(|&t| {
            let mut acc = 0.0;
            for k in 1..=(n / 2) {
                let k = k as f64;
                acc += (2.0 * k * t).cos() / (4.0 * k * k - 1.0);
            }
            2.0 / n as f64 * (1.0 - 2.0 * acc)
        })
        .collect();
    (theta, weights)
}

/// Quadratic extrapolation to `f = 0` through the first three samples.
pub fn vertex_value(nodes: &[f64], values: &[f64]) -> f64 {
    (0..3)
        .map(|i| {
            let w: f64 = (0..3)
                .filter(|&k| k != i)
                .map(|k| nodes[k] / (nodes[k] - nodes[i]))
                .product();
            w * values[i]
        })
        .sum()
}

/// Composite Simpson over `[0, v0]` on the uniform nodes `0, Δ, …, v0`, where the first sample
/// was taken at `f0 ≪ Δ` instead of 0 and is extrapolated to the vertex.
///
/// `nodes[0] = f0`, `nodes[i] = iΔ` for `i ≥ 1`; the number of intervals must be even.
pub fn vertex_simpson(nodes: &[f64], values: &[f64]) -> f64 {
    let n = nodes.len() - 1;
    assert!(
        n >= 2 && n.is_multiple_of(2),
        "Simpson needs an even number of intervals"
    );
    let delta = nodes[n] / n as f64;
    let at_vertex = vertex_value(nodes, values);
    let mut terms = Vec::with_capacity(n + 1);
    terms.push(at_vertex);
    for (i, &v) in values.iter().enumerate().skip(1) {
        let w = if i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        terms.push(w * v);
    }
    pairwise_sum(&terms) * delta / 3.0
}

/// The same rule on every second node (spacing 2Δ); needs the interval count divisible by 4.
pub fn vertex_simpson_coarse(nodes: &[f64], values: &[f64]) -> Option<f64> {
    let n = nodes.len() - 1;
    if !n.is_multiple_of(4) {
        return None;
    }
    let at_vertex = vertex_value(nodes, values);
    let mut nodes_c = vec![nodes[0]];
    let mut values_c = vec![at_vertex];
    for i in (2..=n).step_by(2) {
        nodes_c.push(nodes[i]);
        values_c.push(values[i]);
    }
    nodes_c[0] = 0.0;
    Some(vertex_simpson(&nodes_c, &values_c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fejer_weights_sum_to_two_and_integrate_polynomials() {
        for n in [4, 8, 16, 33] {
            let (theta, w) = fejer_first(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..n {
                let q: f64 = theta
                    .iter()
                    .zip(&w)
                    .map(|(t, w)| w * t.cos().powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn simpson_integrates_cubics_with_vertex_offset() {
        let n = 16;
        let v0 = 1.5;
        let mut nodes: Vec<f64> = (0..=n).map(|i| v0 * i as f64 / n as f64).collect();
        nodes[0] = 1e-9;
        let f = |v: f64| 1.0 + 2.0 * v - v * v * v;
        let values: Vec<f64> = nodes.iter().map(|&v| f(v)).collect();
        let exact = v0 + v0 * v0 - v0.powi(4) / 4.0;
        assert!((vertex_simpson(&nodes, &values) - exact).abs() < 1e-8);
        assert!((vertex_simpson_coarse(&nodes, &values).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let v: Vec<f64> = (0..10_000).map(|i| 0.1 + (i as f64) * 1e-3).collect();
        let exact = 10_000.0 * 0.1 + 1e-3 * (9_999.0 * 10_000.0 / 2.0);
        assert!((pairwise_sum(&v) - exact).abs() < 1e-9);
    }
}
