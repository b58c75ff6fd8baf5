//! Truncated Taylor expansions `f(r0 + h) = sum_k c_k h^k` with complex
//! coefficients, used to differentiate the remote profiles exactly.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

type C = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Taylor {
    pub c: Vec<C>,
}

fn zero() -> C {
    C::new(0.0, 0.0)
}

impl Taylor {
    pub fn constant(v: C, order: usize) -> Self {
        let mut c = vec![zero(); order + 1];
        c[0] = v;
        Taylor { c }
    }

    pub fn zeros(order: usize) -> Self {
        Taylor { c: vec![zero(); order + 1] }
    }

    /// The independent variable `r0 + h`.
    pub fn var(r0: f64, order: usize) -> Self {
        let mut t = Taylor::constant(C::new(r0, 0.0), order);
        if order > 0 {
            t.c[1] = C::new(1.0, 0.0);
        }
        t
    }

    /// From derivatives `f, f', f'', ...`.
    pub fn from_derivs(d: &[C]) -> Self {
        let mut fact = 1.0;
        let c = d
            .iter()
            .enumerate()
            .map(|(k, v)| {
                if k > 0 {
                    fact *= k as f64;
                }
                v / fact
            })
            .collect();
        Taylor { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> C {
        self.c[0]
    }

    /// `k`-th derivative at the expansion point.
    pub fn deriv_at(&self, k: usize) -> C {
        if k > self.order() {
            return zero();
        }
        let f: f64 = (1..=k).map(|i| i as f64).product();
        self.c[k] * f
    }

    pub fn truncate(&self, order: usize) -> Self {
        Taylor { c: self.c[..=order.min(self.order())].to_vec() }
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| *v == zero())
    }

    /// Derivative; the order drops by one (an order-0 input gives order 0 zero).
    pub fn deriv(&self) -> Self {
        if self.order() == 0 {
            return Taylor::zeros(0);
        }
        Taylor { c: (1..self.c.len()).map(|k| self.c[k] * k as f64).collect() }
    }

    pub fn scale(&self, a: C) -> Self {
        Taylor { c: self.c.iter().map(|v| v * a).collect() }
    }

    pub fn scale_re(&self, a: f64) -> Self {
        Taylor { c: self.c.iter().map(|v| v * a).collect() }
    }

    pub fn conj(&self) -> Self {
        Taylor { c: self.c.iter().map(|v| v.conj()).collect() }
    }

    pub fn re(&self) -> Self {
        Taylor { c: self.c.iter().map(|v| C::new(v.re, 0.0)).collect() }
    }

    pub fn im(&self) -> Self {
        Taylor { c: self.c.iter().map(|v| C::new(v.im, 0.0)).collect() }
    }

    pub fn add_const(&self, a: C) -> Self {
        let mut t = self.clone();
        t.c[0] += a;
        t
    }

    pub fn recip(&self) -> Self {
        Taylor::constant(C::new(1.0, 0.0), self.order()).div(self)
    }

    pub fn div(&self, b: &Taylor) -> Self {
        let n = self.order().min(b.order());
        let mut q = vec![zero(); n + 1];
        for k in 0..=n {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= b.c[j] * q[k - j];
            }
            q[k] = acc / b.c[0];
        }
        Taylor { c: q }
    }

    pub fn exp(&self) -> Self {
        let n = self.order();
        let mut g = vec![zero(); n + 1];
        g[0] = self.c[0].exp();
        for k in 1..=n {
            let mut acc = zero();
            for j in 1..=k {
                acc += self.c[j] * g[k - j] * j as f64;
            }
            g[k] = acc / k as f64;
        }
        Taylor { c: g }
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        let n = self.order();
        let f = &self.c;
        let mut g = vec![zero(); n + 1];
        g[0] = f[0].ln();
        for k in 1..=n {
            let mut acc = f[k] * k as f64;
            for j in 1..k {
                acc -= g[j] * f[k - j] * j as f64;
            }
            g[k] = acc / (f[0] * k as f64);
        }
        Taylor { c: g }
    }

    /// `exp(p ln f)` on the principal branch.
    pub fn powc(&self, p: C) -> Self {
        self.ln().scale(p).exp()
    }

    pub fn powi(&self, k: usize) -> Self {
        let mut out = Taylor::constant(C::new(1.0, 0.0), self.order());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn abs2(&self) -> Self {
        (self * &self.conj()).re()
    }
}

impl Add for &Taylor {
    type Output = Taylor;
    fn add(self, o: &Taylor) -> Taylor {
        let n = self.order().min(o.order());
        Taylor { c: (0..=n).map(|k| self.c[k] + o.c[k]).collect() }
    }
}

impl Sub for &Taylor {
    type Output = Taylor;
    fn sub(self, o: &Taylor) -> Taylor {
        let n = self.order().min(o.order());
        Taylor { c: (0..=n).map(|k| self.c[k] - o.c[k]).collect() }
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale_re(-1.0)
    }
}

impl Mul for &Taylor {
    type Output = Taylor;
    fn mul(self, o: &Taylor) -> Taylor {
        let n = self.order().min(o.order());
        let mut c = vec![zero(); n + 1];
        for (i, a) in self.c.iter().enumerate().take(n + 1) {
            if *a == zero() {
                continue;
            }
            for j in 0..=n - i {
                c[i + j] += a * o.c[j];
            }
        }
        Taylor { c }
    }
}

fn psi(x: &Taylor) -> Taylor {
    if x.value().re <= 0.0 {
        return Taylor::zeros(x.order());
    }
    (-&x.recip()).exp()
}

/// Even C-infinity cutoff: 1 on `|xi| <= 1`, 0 on `|xi| >= 2`, built from
/// `psi(x) = exp(-1/x)` as `psi(2-|xi|) / (psi(2-|xi|) + psi(|xi|-1))`.
pub fn cutoff_theta(xi: f64) -> f64 {
    cutoff_theta_jet(&Taylor::var(xi, 0)).value().re
}

/// The cutoff composed with a real jet `xi`.
pub fn cutoff_theta_jet(xi: &Taylor) -> Taylor {
    let n = xi.order();
    let x0 = xi.value().re;
    let a = x0.abs();
    if a >= 2.0 {
        return Taylor::zeros(n);
    }
    if a <= 1.0 {
        return Taylor::constant(C::new(1.0, 0.0), n);
    }
    let abs = xi.scale_re(x0.signum());
    let p = psi(&(-&abs).add_const(C::new(2.0, 0.0)));
    let q = psi(&abs.add_const(C::new(-1.0, 0.0)));
    p.div(&(&p + &q))
}

/// Derivatives `theta^(k)(xi)` for `k = 0..=order`.
pub fn cutoff_theta_derivs(xi: f64, order: usize) -> Vec<f64> {
    let t = cutoff_theta_jet(&Taylor::var(xi, order));
    (0..=order).map(|k| t.deriv_at(k).re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let r = Taylor::var(0.7, 5);
        let s = C::new(2.5, 0.3);
        let p = r.powc(s);
        for k in 0..=5 {
            let mut falling = c(1.0);
            for i in 0..k {
                falling *= s - i as f64;
            }
            let want = falling * c(0.7).powc(s - k as f64);
            assert!((p.deriv_at(k) - want).norm() < 1e-12 * want.norm().max(1.0), "k {k}");
        }
        let l = r.ln();
        assert!((l.deriv_at(3) - c(2.0 / 0.7f64.powi(3))).norm() < 1e-12);
        let q = r.exp().div(&r);
        // (e^r / r)'' = e^r (1/r - 2/r^2 + 2/r^3)
        let want = 0.7f64.exp() * (1.0 / 0.7 - 2.0 / 0.49 + 2.0 / 0.343);
        assert!((q.deriv_at(2).re - want).abs() < 1e-12);
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_theta(0.5), 1.0);
        assert_eq!(cutoff_theta(3.0), 0.0);
        let v = cutoff_theta(1.5);
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(cutoff_theta(-1.5), v);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cutoff_is_monotone_with_consistent_derivatives() {
        let mut prev = 1.0;
        for i in 0..=200 {
            let x = 1.0 + i as f64 / 200.0;
            let v = cutoff_theta(x);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        let h = 1e-5;
        for &x in &[1.2, 1.5, 1.8] {
            let d = cutoff_theta_derivs(x, 5);
            let e = cutoff_theta_derivs(x + h, 5);
            let f = cutoff_theta_derivs(x - h, 5);
            for k in 0..5 {
                let fd = (e[k] - f[k]) / (2.0 * h);
                assert!((fd - d[k + 1]).abs() < 1e-5 * d[k + 1].abs().max(1.0), "x {x} k {k}");
            }
        }
    }
}
