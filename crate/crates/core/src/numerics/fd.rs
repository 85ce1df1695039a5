//! Finite-difference weights on arbitrary nodes.

/// Weights for the first derivative at `x0` from samples at `nodes` (Fornberg's recursion).
pub fn first_derivative_weights(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Derivative of samples along a line with a `width`-point stencil, centered where possible.
pub fn derivative_along(nodes: &[f64], values: &[f64], width: usize) -> Vec<f64> {
    let n = nodes.len();
    let width = width.min(n);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(n - width);
            let w = first_derivative_weights(nodes[i], &nodes[start..start + width]);
            w.iter()
                .zip(&values[start..start + width])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Stencil `(start, weights)` used by [`derivative_along`] at node `i`.
pub fn stencil(nodes: &[f64], i: usize, width: usize) -> (usize, Vec<f64>) {
    let n = nodes.len();
    let width = width.min(n);
    let start = i.saturating_sub(width / 2).min(n - width);
    (
        start,
        first_derivative_weights(nodes[i], &nodes[start..start + width]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_weights_on_uniform_grid() {
        let w = first_derivative_weights(0.0, &[-1.0, 0.0, 1.0]);
        assert!((w[0] + 0.5).abs() < 1e-15 && w[1].abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_for_polynomials_of_stencil_degree() {
        let nodes = [1e-6, 0.1, 0.2, 0.3, 0.4];
        let f = |x: f64| 3.0 - x + 2.0 * x * x - x.powi(3) + 0.5 * x.powi(4);
        let df = |x: f64| -1.0 + 4.0 * x - 3.0 * x * x + 2.0 * x.powi(3);
        let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        for (d, &x) in derivative_along(&nodes, &values, 5).iter().zip(&nodes) {
            assert!((d - df(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn second_order_convergence_of_three_point_stencil() {
        let err = |n: usize| {
            let nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let values: Vec<f64> = nodes.iter().map(|x| x.sin()).collect();
            derivative_along(&nodes, &values, 3)
                .iter()
                .zip(&nodes)
                .map(|(d, x)| (d - x.cos()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(32) / err(64)).log2();
        assert!(order > 1.9, "{order}");
    }
}
