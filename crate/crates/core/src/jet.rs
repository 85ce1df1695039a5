//! Second-order jets in the four chart coordinates.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian, so closed-form
//! metrics and fields get exact first and second partials through ordinary arithmetic.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 4],
    pub hess: [[f64; 4]; 4],
}

impl Jet {
    pub const fn constant(value: f64) -> Self {
        Jet {
            value,
            grad: [0.0; 4],
            hess: [[0.0; 4]; 4],
        }
    }

    /// The coordinate function `x^index` evaluated at `value`.
    pub fn coordinate(index: usize, value: f64) -> Self {
        let mut j = Jet::constant(value);
        j.grad[index] = 1.0;
        j
    }

    pub fn coordinates(x: &[f64; 4]) -> [Jet; 4] {
        [0, 1, 2, 3].map(|i| Jet::coordinate(i, x[i]))
    }

    /// Chain rule for a scalar function with value `f0`, first derivative `f1` and second `f2`
    /// evaluated at `self.value`.
    pub fn compose(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Jet::constant(f0);
        for i in 0..4 {
            out.grad[i] = f1 * self.grad[i];
            for j in 0..4 {
                out.hess[i][j] = f2 * self.grad[i] * self.grad[j] + f1 * self.hess[i][j];
            }
        }
        out
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.compose(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.value;
        self.compose(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.value;
        let nf = f64::from(n);
        let f1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        let f2 = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * v.powi(n - 2)
        };
        self.compose(v.powi(n), f1, f2)
    }

    pub fn scale(self, k: f64) -> Self {
        let mut out = self;
        out.value *= k;
        for i in 0..4 {
            out.grad[i] *= k;
            for j in 0..4 {
                out.hess[i][j] *= k;
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.value += rhs.value;
        for i in 0..4 {
            self.grad[i] += rhs.grad[i];
            for j in 0..4 {
                self.hess[i][j] += rhs.hess[i][j];
            }
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::constant(self.value * rhs.value);
        for i in 0..4 {
            out.grad[i] = self.grad[i] * rhs.value + self.value * rhs.grad[i];
            for j in 0..4 {
                out.hess[i][j] = self.hess[i][j] * rhs.value
                    + self.value * rhs.hess[i][j]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&[Jet; 4]) -> Jet, x: [f64; 4]) {
        let j = f(&Jet::coordinates(&x));
        let h = 1e-4;
        for i in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fp = f(&Jet::coordinates(&xp));
            let fm = f(&Jet::coordinates(&xm));
            let d = (fp.value - fm.value) / (2.0 * h);
            assert!(
                (d - j.grad[i]).abs() < 1e-7,
                "grad {i}: {d} vs {}",
                j.grad[i]
            );
            for k in 0..4 {
                let dd = (fp.grad[k] - fm.grad[k]) / (2.0 * h);
                assert!((dd - j.hess[i][k]).abs() < 1e-6, "hess {i}{k}");
            }
        }
    }

    #[test]
    fn chain_and_product_rules_match_differences() {
        fd_check(
            |x| (x[0] * x[1]).sin() + (x[2] * x[2] + 1.0).sqrt() * x[3].exp() / (x[1] + 3.0),
            [0.3, -0.7, 1.1, 0.2],
        );
        fd_check(
            |x| x[0].cos().powi(3) - x[2].recip() * x[1].powi(2),
            [0.4, 0.9, 1.7, -0.3],
        );
    }

    #[test]
    fn hessian_is_symmetric() {
        let x = Jet::coordinates(&[0.1, 0.2, 0.3, 0.4]);
        let f = (x[0] * x[1] * x[2]).exp() / (x[3] + 2.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(f.hess[i][j], f.hess[j][i]);
            }
        }
    }
}
