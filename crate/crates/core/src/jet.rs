//! Truncated multivariate Taylor polynomials in three variables with complex coefficients.

use std::ops::{Add, Mul, Neg, Sub};

use crate::linalg::{CM3, CV3, C64, V3};

pub const MAX_ORDER: usize = 6;

/// Number of monomials of total degree ≤ `order`.
pub const fn monomial_count(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) / 6
}

/// Position of r₁^a r₂^b r₃^c in the graded coefficient vector.
pub const fn monomial_index(a: usize, b: usize, c: usize) -> usize {
    let d = a + b + c;
    let first = d - a;
    d * (d + 1) * (d + 2) / 6 + first * (first + 1) / 2 + (first - b)
}

fn exponents(order: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(monomial_count(order));
    for d in 0..=order {
        for a in (0..=d).rev() {
            for b in (0..=d - a).rev() {
                out.push([a, b, d - a - b]);
            }
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn alpha_of(indices: &[usize]) -> [usize; 3] {
    let mut a = [0usize; 3];
    for &i in indices {
        a[i] += 1;
    }
    a
}

/// f(center + r) ≈ Σ_{|α| ≤ order} coeffs[α] r^α.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorJet3 {
    pub center: V3,
    pub order: usize,
    coeffs: Vec<C64>,
}

impl TaylorJet3 {
    pub fn zero(center: V3, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        TaylorJet3 { center, order, coeffs: vec![C64::new(0.0, 0.0); monomial_count(order)] }
    }

    pub fn constant(center: V3, order: usize, v: C64) -> Self {
        let mut j = Self::zero(center, order);
        j.coeffs[0] = v;
        j
    }

    /// The displacement r_i = x_i − center_i.
    pub fn displacement(center: V3, order: usize, i: usize) -> Self {
        let mut j = Self::zero(center, order);
        if order >= 1 {
            let mut a = [0; 3];
            a[i] = 1;
            j.coeffs[monomial_index(a[0], a[1], a[2])] = C64::new(1.0, 0.0);
        }
        j
    }

    /// Builds a jet from derivative tensors at the center; missing tensors are zero.
    pub fn from_derivatives(
        center: V3,
        order: usize,
        value: C64,
        grad: Option<&CV3>,
        hess: Option<&CM3>,
        third: Option<&[[[C64; 3]; 3]; 3]>,
        fourth: Option<&[[[[C64; 3]; 3]; 3]; 3]>,
    ) -> Self {
        let mut j = Self::constant(center, order, value);
        for (idx, a) in exponents(order).into_iter().enumerate().skip(1) {
            let mut ind = Vec::new();
            for (v, &m) in a.iter().enumerate() {
                ind.extend(std::iter::repeat_n(v, m));
            }
            let d = match ind.len() {
                1 => grad.map(|g| g[ind[0]]),
                2 => hess.map(|h| h[(ind[0], ind[1])]),
                3 => third.map(|t| t[ind[0]][ind[1]][ind[2]]),
                4 => fourth.map(|t| t[ind[0]][ind[1]][ind[2]][ind[3]]),
                _ => None,
            };
            if let Some(d) = d {
                let af = factorial(a[0]) * factorial(a[1]) * factorial(a[2]);
                j.coeffs[idx] = d / af;
            }
        }
        j
    }

    pub fn coeff(&self, a: usize, b: usize, c: usize) -> C64 {
        if a + b + c > self.order {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[monomial_index(a, b, c)]
    }

    pub fn set_coeff(&mut self, a: usize, b: usize, c: usize, v: C64) {
        assert!(a + b + c <= self.order);
        self.coeffs[monomial_index(a, b, c)] = v;
    }

    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    /// ∂^α f at the center for a multi-index given as a list of axes.
    pub fn derivative(&self, indices: &[usize]) -> C64 {
        let a = alpha_of(indices);
        self.coeff(a[0], a[1], a[2]) * (factorial(a[0]) * factorial(a[1]) * factorial(a[2]))
    }

    pub fn grad(&self) -> CV3 {
        CV3::from_fn(|i, _| self.derivative(&[i]))
    }

    pub fn hess(&self) -> CM3 {
        CM3::from_fn(|i, j| self.derivative(&[i, j]))
    }

    pub fn third(&self) -> [[[C64; 3]; 3]; 3] {
        let mut t = [[[C64::new(0.0, 0.0); 3]; 3]; 3];
        for (i, ti) in t.iter_mut().enumerate() {
            for (j, tij) in ti.iter_mut().enumerate() {
                for (k, v) in tij.iter_mut().enumerate() {
                    *v = self.derivative(&[i, j, k]);
                }
            }
        }
        t
    }

    pub fn fourth(&self) -> [[[[C64; 3]; 3]; 3]; 3] {
        let mut t = [[[[C64::new(0.0, 0.0); 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        t[i][j][k][l] = self.derivative(&[i, j, k, l]);
                    }
                }
            }
        }
        t
    }

    /// Evaluates the polynomial at the absolute point `x`.
    pub fn eval(&self, x: &V3) -> C64 {
        let r = x - self.center;
        let mut pw = [[1.0; MAX_ORDER + 1]; 3];
        for v in 0..3 {
            for k in 1..=self.order {
                pw[v][k] = pw[v][k - 1] * r[v];
            }
        }
        exponents(self.order)
            .iter()
            .zip(&self.coeffs)
            .map(|(a, c)| c * (pw[0][a[0]] * pw[1][a[1]] * pw[2][a[2]]))
            .sum()
    }

    /// ∂f/∂x_i, one order lower.
    pub fn partial(&self, i: usize) -> Self {
        let order = self.order.saturating_sub(1);
        let mut out = Self::zero(self.center, order);
        if self.order == 0 {
            return out;
        }
        for (idx, a) in exponents(order).into_iter().enumerate() {
            let mut up = a;
            up[i] += 1;
            out.coeffs[idx] = self.coeff(up[0], up[1], up[2]) * up[i] as f64;
        }
        out
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        TaylorJet3 { center: self.center, order, coeffs: self.coeffs[..monomial_count(order)].to_vec() }
    }

    pub fn scale(&self, s: C64) -> Self {
        TaylorJet3 { center: self.center, order: self.order, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn conj(&self) -> Self {
        TaylorJet3 { center: self.center, order: self.order, coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    pub fn add_constant(&self, v: C64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += v;
        out
    }

    /// F(f) for a univariate F given its derivatives F^(k)(f(center)), k = 0..=order.
    pub fn compose(&self, derivs: &[C64]) -> Self {
        assert!(derivs.len() > self.order, "need {} derivatives", self.order + 1);
        let mut delta = self.clone();
        delta.coeffs[0] = C64::new(0.0, 0.0);
        let mut out = Self::constant(self.center, self.order, derivs[0]);
        let mut pow = Self::constant(self.center, self.order, C64::new(1.0, 0.0));
        for (k, d) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            pow = &pow * &delta;
            out = &out + &pow.scale(d / factorial(k));
        }
        out
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        let u = self.value();
        let root = u.sqrt();
        // d^k/du^k u^{1/2} = (1/2)(1/2 - 1)...(1/2 - k + 1) u^{1/2} / u^k
        let mut coef = 1.0;
        let mut d = Vec::with_capacity(self.order + 1);
        for k in 0..=self.order {
            d.push(root / u.powi(k as i32) * coef);
            coef *= 0.5 - k as f64;
        }
        self.compose(&d)
    }

    pub fn recip(&self) -> Self {
        let u = self.value();
        let d: Vec<C64> = (0..=self.order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                C64::new(sign * factorial(k), 0.0) / u.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&d)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.order + 1])
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        let u = self.value();
        let mut d = vec![u.ln()];
        for k in 1..=self.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(C64::new(sign * factorial(k - 1), 0.0) / u.powi(k as i32));
        }
        self.compose(&d)
    }
}

impl Add for &TaylorJet3 {
    type Output = TaylorJet3;
    fn add(self, o: &TaylorJet3) -> TaylorJet3 {
        let order = self.order.min(o.order);
        let n = monomial_count(order);
        TaylorJet3 { center: self.center, order, coeffs: (0..n).map(|i| self.coeffs[i] + o.coeffs[i]).collect() }
    }
}

impl Sub for &TaylorJet3 {
    type Output = TaylorJet3;
    fn sub(self, o: &TaylorJet3) -> TaylorJet3 {
        self + &(-o)
    }
}

impl Neg for &TaylorJet3 {
    type Output = TaylorJet3;
    fn neg(self) -> TaylorJet3 {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &TaylorJet3 {
    type Output = TaylorJet3;
    fn mul(self, o: &TaylorJet3) -> TaylorJet3 {
        let order = self.order.min(o.order);
        let mut out = TaylorJet3::zero(self.center, order);
        let ex = exponents(order);
        for (i, a) in ex.iter().enumerate() {
            let ca = self.coeffs[i];
            if ca == C64::new(0.0, 0.0) {
                continue;
            }
            let da = a[0] + a[1] + a[2];
            for (j, b) in ex.iter().enumerate() {
                if da + b[0] + b[1] + b[2] > order {
                    break;
                }
                out.coeffs[monomial_index(a[0] + b[0], a[1] + b[1], a[2] + b[2])] += ca * o.coeffs[j];
            }
        }
        out
    }
}

/// Vector-valued jet.
pub type VecJet = [TaylorJet3; 3];

pub fn vec_jet_constant(center: V3, order: usize, v: &CV3) -> VecJet {
    [0, 1, 2].map(|i| TaylorJet3::constant(center, order, v[i]))
}

pub fn dot_jets(a: &VecJet, b: &VecJet) -> TaylorJet3 {
    let mut s = &a[0] * &b[0];
    s = &s + &(&a[1] * &b[1]);
    &s + &(&a[2] * &b[2])
}

pub fn cross_jets(a: &VecJet, b: &VecJet) -> VecJet {
    [
        &(&a[1] * &b[2]) - &(&a[2] * &b[1]),
        &(&a[2] * &b[0]) - &(&a[0] * &b[2]),
        &(&a[0] * &b[1]) - &(&a[1] * &b[0]),
    ]
}

pub fn conj_jets(a: &VecJet) -> VecJet {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

pub fn scale_jets(a: &VecJet, s: &TaylorJet3) -> VecJet {
    [&a[0] * s, &a[1] * s, &a[2] * s]
}

/// Jet gradient as a vector of jets, one order lower.
pub fn grad_jet(f: &TaylorJet3) -> VecJet {
    [f.partial(0), f.partial(1), f.partial(2)]
}

pub fn value_vec(a: &VecJet) -> CV3 {
    CV3::new(a[0].value(), a[1].value(), a[2].value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn poly_jet(center: V3) -> TaylorJet3 {
        // 1 + 2 r1 - r2 r3 + 0.5 r1^2 r2 + i r3^4
        let mut j = TaylorJet3::zero(center, 4);
        j.set_coeff(0, 0, 0, c(1.0, 0.0));
        j.set_coeff(1, 0, 0, c(2.0, 0.0));
        j.set_coeff(0, 1, 1, c(-1.0, 0.0));
        j.set_coeff(2, 1, 0, c(0.5, 0.0));
        j.set_coeff(0, 0, 4, c(0.0, 1.0));
        j
    }

    #[test]
    fn index_is_a_bijection() {
        for (i, a) in exponents(MAX_ORDER).iter().enumerate() {
            assert_eq!(monomial_index(a[0], a[1], a[2]), i);
        }
        assert_eq!(exponents(MAX_ORDER).len(), monomial_count(MAX_ORDER));
    }

    #[test]
    fn derivatives_and_eval() {
        let j = poly_jet(V3::new(0.1, 0.2, 0.3));
        assert_eq!(j.derivative(&[0]), c(2.0, 0.0));
        assert_eq!(j.derivative(&[1, 2]), c(-1.0, 0.0));
        assert_eq!(j.derivative(&[0, 1, 0]), c(1.0, 0.0));
        assert_eq!(j.derivative(&[2, 2, 2, 2]), c(0.0, 24.0));
        let x = V3::new(0.4, -0.1, 0.5);
        let r = x - j.center;
        let exact = c(1.0 + 2.0 * r[0] - r[1] * r[2] + 0.5 * r[0] * r[0] * r[1], r[2].powi(4));
        assert!((j.eval(&x) - exact).norm() < 1e-15);
        let rebuilt = TaylorJet3::from_derivatives(
            j.center,
            4,
            j.value(),
            Some(&j.grad()),
            Some(&j.hess()),
            Some(&j.third()),
            Some(&j.fourth()),
        );
        assert_eq!(rebuilt, j);
        let p = j.partial(0);
        assert_eq!(p.value(), c(2.0, 0.0));
        assert_eq!(p.coeff(1, 1, 0), c(1.0, 0.0));
    }

    #[test]
    fn product_and_composition() {
        let ctr = V3::zeros();
        let x = TaylorJet3::displacement(ctr, 6, 0);
        let y = TaylorJet3::displacement(ctr, 6, 1);
        let s = &x + &y;
        // exp(x + y) coefficients r1^a r2^b / (a! b!)
        let e = s.exp();
        assert!((e.coeff(2, 3, 0) - c(1.0 / 12.0, 0.0)).norm() < 1e-15);
        // (1 + x)^{1/2} squared is 1 + x
        let one_x = x.add_constant(c(1.0, 0.0));
        let r = one_x.sqrt();
        let sq = &r * &r;
        assert!((&sq - &one_x).coeffs.iter().all(|z| z.norm() < 1e-14));
        let inv = one_x.recip();
        let prod = &inv * &one_x;
        assert!((prod.value() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(prod.coeffs[1..].iter().all(|z| z.norm() < 1e-14));
        let back = e.ln();
        assert!((&back - &s).coeffs.iter().all(|z| z.norm() < 1e-13));
        // sqrt of a negative real value uses the principal branch
        let neg = TaylorJet3::constant(ctr, 2, c(-4.0, 0.0));
        assert!((neg.sqrt().value() - c(0.0, 2.0)).norm() < 1e-15);
    }
}
