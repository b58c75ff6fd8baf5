//! Second-order jets (value, first and second derivative) with Leibniz products.

use crate::geometry::Vec3;
use num_complex::Complex64;

pub type RJet = [f64; 3];
pub type CJet = [Complex64; 3];
pub type VJet = [Vec3; 3];

pub const RZERO: RJet = [0.0; 3];

pub fn czero() -> CJet {
    [Complex64::new(0.0, 0.0); 3]
}

pub fn vzero() -> VJet {
    [Vec3::zeros(); 3]
}

pub fn mul_rr(a: RJet, b: RJet) -> RJet {
    [a[0] * b[0], a[1] * b[0] + a[0] * b[1], a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2]]
}

pub fn mul_cc(a: CJet, b: CJet) -> CJet {
    [a[0] * b[0], a[1] * b[0] + a[0] * b[1], a[2] * b[0] + a[1] * b[1] * 2.0 + a[0] * b[2]]
}

pub fn mul_rv(s: RJet, v: VJet) -> VJet {
    [v[0] * s[0], v[1] * s[0] + v[0] * s[1], v[2] * s[0] + v[1] * (2.0 * s[1]) + v[0] * s[2]]
}

pub fn add_r(a: RJet, b: RJet) -> RJet {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn add_v(a: VJet, b: VJet) -> VJet {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale_r(a: RJet, s: f64) -> RJet {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn conj(a: CJet) -> CJet {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

pub fn re(a: CJet) -> RJet {
    [a[0].re, a[1].re, a[2].re]
}

pub fn im(a: CJet) -> RJet {
    [a[0].im, a[1].im, a[2].im]
}

/// Composition `g(s)` given `g(s0), g'(s0), g''(s0)` and the jet of `s`.
pub fn compose(g: [f64; 3], s: RJet) -> RJet {
    [g[0], g[1] * s[1], g[2] * s[1] * s[1] + g[1] * s[2]]
}

pub fn compose_c(g: [Complex64; 3], s: CJet) -> CJet {
    [g[0], g[1] * s[1], g[2] * s[1] * s[1] + g[1] * s[2]]
}

/// Quotient `a / b` of complex jets.
pub fn div_cc(a: CJet, b: CJet) -> CJet {
    let inv = b[0].inv();
    let g = [inv, -inv * inv, inv * inv * inv * 2.0];
    mul_cc(a, compose_c(g, b))
}

/// `R v = (-v2, v1, 0)`, the generator of rotations about the vertical axis.
pub fn rot(v: &Vec3) -> Vec3 {
    Vec3::new(-v[1], v[0], 0.0)
}

/// `Delta v + R^2 v / r^2` in the radial representation (value only).
pub fn map_laplacian(v: &VJet, r: f64) -> Vec3 {
    v[2] + v[1] / r - Vec3::new(v[0][0], v[0][1], 0.0) / (r * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leibniz_products() {
        let x = 0.7f64;
        let a = [x.sin(), x.cos(), -x.sin()];
        let b = [x.exp(), x.exp(), x.exp()];
        let p = mul_rr(a, b);
        let f = |x: f64| x.sin() * x.exp();
        let h = 1e-4;
        assert!((p[1] - (f(x + h) - f(x - h)) / (2.0 * h)).abs() < 1e-7);
        assert!((p[2] - (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)).abs() < 1e-5);
    }

    #[test]
    fn quotient() {
        let x = 0.3f64;
        let a = [Complex64::new(x * x, x), Complex64::new(2.0 * x, 1.0), Complex64::new(2.0, 0.0)];
        let b = [Complex64::new(1.0 + x, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let q = div_cc(a, b);
        let f = |x: f64| Complex64::new(x * x, x) / (1.0 + x);
        let h = 1e-4;
        assert!((q[0] - f(x)).norm() < 1e-14);
        assert!((q[1] - (f(x + h) - f(x - h)) / (2.0 * h)).norm() < 1e-7);
        assert!((q[2] - (f(x + h) - f(x) * 2.0 + f(x - h)) / (h * h)).norm() < 1e-5);
    }
}
