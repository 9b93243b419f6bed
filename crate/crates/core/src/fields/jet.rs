//! First-order jets: a value together with its coordinate gradient.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value and coordinate gradient of a scalar at a point. Arithmetic follows
/// the usual forward-mode rules, so composite quantities such as products of
/// fields carry exact gradients when their inputs do.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Jet {
    pub fn new(value: f64, grad: Vec<f64>) -> Self {
        Jet { value, grad }
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        Jet {
            value,
            grad: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Derivative along the coordinate vector `v`.
    pub fn along(&self, v: &[f64]) -> f64 {
        self.grad.iter().zip(v).map(|(g, c)| g * c).sum()
    }

    /// Pad the gradient with zeros up to `dim` coordinates (used to lift
    /// base-manifold jets to the full chart).
    pub fn embed(&self, dim: usize) -> Jet {
        let mut grad = self.grad.clone();
        grad.resize(dim, 0.0);
        Jet {
            value: self.value,
            grad,
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            value: c * self.value,
            grad: self.grad.iter().map(|g| c * g).collect(),
        }
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a Jet>>(dim: usize, items: I) -> Jet {
        items
            .into_iter()
            .fold(Jet::constant(0.0, dim), |acc, j| &acc + j)
    }
}

fn zip_with(a: &Jet, b: &Jet, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    debug_assert_eq!(a.grad.len(), b.grad.len());
    a.grad.iter().zip(&b.grad).map(|(x, y)| f(*x, *y)).collect()
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet {
            value: self.value + rhs.value,
            grad: zip_with(self, rhs, |x, y| x + y),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet {
            value: self.value - rhs.value,
            grad: zip_with(self, rhs, |x, y| x - y),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let (u, v) = (self.value, rhs.value);
        Jet {
            value: u * v,
            grad: zip_with(self, rhs, |du, dv| du * v + u * dv),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        let (u, v) = (self.value, rhs.value);
        Jet {
            value: u / v,
            grad: zip_with(self, rhs, |du, dv| (du * v - u * dv) / (v * v)),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let u = Jet::new(2.0, vec![1.0, 0.0]);
        let v = Jet::new(3.0, vec![0.0, 2.0]);
        let p = &u * &v;
        assert_eq!(p.value, 6.0);
        assert_eq!(p.grad, vec![3.0, 4.0]);
        let q = &u / &v;
        assert!((q.grad[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((q.grad[1] + 2.0 * 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn embed_pads_with_zeros() {
        let j = Jet::new(1.0, vec![4.0]).embed(3);
        assert_eq!(j.grad, vec![4.0, 0.0, 0.0]);
        assert_eq!(j.along(&[1.0, 5.0, 5.0]), 4.0);
    }
}
