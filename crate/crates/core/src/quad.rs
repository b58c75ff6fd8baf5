//! Adaptive Simpson quadrature for pairs of complex integrands.

use crate::error::{Error, Result};
use num_complex::Complex64;
use num_traits::Zero;
use std::ops::{Add, Mul, Sub};

/// Two complex values integrated together.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct C2(pub Complex64, pub Complex64);

impl Add for C2 {
    type Output = C2;
    fn add(self, o: C2) -> C2 {
        C2(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for C2 {
    type Output = C2;
    fn sub(self, o: C2) -> C2 {
        C2(self.0 - o.0, self.1 - o.1)
    }
}

impl Mul<f64> for C2 {
    type Output = C2;
    fn mul(self, s: f64) -> C2 {
        C2(self.0 * s, self.1 * s)
    }
}

impl Zero for C2 {
    fn zero() -> Self {
        C2::default()
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero() && self.1.is_zero()
    }
}

impl C2 {
    pub fn norm(&self) -> f64 {
        self.0.norm().max(self.1.norm())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimpsonOptions {
    /// Absolute tolerance per unit length of the interval.
    pub abs_tol: f64,
    /// Relative tolerance, applied to each component separately.
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Budget of integrand evaluations for one panel.
    pub max_evals: usize,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        SimpsonOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_depth: 60, max_evals: 200_000 }
    }
}

struct State<'a, F> {
    f: &'a F,
    opts: SimpsonOptions,
    evals: usize,
    /// Mean absolute density of each component over the whole interval.
    density: [f64; 2],
}

impl<F: Fn(f64) -> C2> State<'_, F> {
    fn accept(&self, both: C2, whole: C2, width: f64) -> bool {
        let floor = |k: usize| width * self.opts.abs_tol.max(self.opts.rel_tol * self.density[k]);
        let ok = |x: Complex64, y: Complex64, k: usize| {
            (x - y).norm() <= 15.0 * floor(k).max(self.opts.rel_tol * x.norm())
        };
        ok(both.0, whole.0, 0) && ok(both.1, whole.1, 1)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: f64, b: f64, fa: C2, fm: C2, fb: C2, whole: C2, depth: u32) -> Result<C2> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = ((self.f)(lm), (self.f)(rm));
        self.evals += 2;
        let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
        let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
        let both = left + right;
        if self.accept(both, whole, b - a) {
            return Ok(both + (both - whole) * (1.0 / 15.0));
        }
        if depth >= self.opts.max_depth || self.evals > self.opts.max_evals {
            return Err(Error::QuadratureFailure { a, b });
        }
        let l = self.recurse(a, m, fa, flm, fm, left, depth + 1)?;
        let r = self.recurse(m, b, fm, frm, fb, right, depth + 1)?;
        Ok(l + r)
    }
}

/// Integrates `f` over `[a, b]`. Each component is converged to the relative
/// tolerance, with an absolute floor proportional to the subinterval width.
pub fn simpson<F: Fn(f64) -> C2>(f: &F, a: f64, b: f64, opts: SimpsonOptions) -> Result<C2> {
    if a == b {
        return Ok(C2::default());
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    let density = [whole.0.norm() / (b - a).abs(), whole.1.norm() / (b - a).abs()];
    let mut st = State { f, opts, evals: 3, density };
    st.recurse(a, b, fa, fm, fb, whole, 0)
}

const GL5_X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL5_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss5<T, F>(f: F, a: f64, b: f64) -> T
where
    T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    F: Fn(f64) -> T,
{
    let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
    GL5_X.iter().zip(GL5_W.iter()).fold(T::zero(), |acc, (x, w)| acc + f(c + h * x) * (w * h))
}

/// Five-point Gauss-Legendre rule for a vector-valued integrand of length `n`.
pub fn gauss5_many<F>(f: F, a: f64, b: f64, n: usize) -> Vec<Complex64>
where
    F: Fn(f64) -> Vec<Complex64>,
{
    let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for (x, w) in GL5_X.iter().zip(GL5_W.iter()) {
        for (s, v) in acc.iter_mut().zip(f(c + h * x)) {
            *s += v * (w * h);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_singular_integrand() {
        let f = |s: f64| {
            let v = if s > 0.0 { s * s.ln() } else { 0.0 };
            C2(Complex64::new(v, 0.0), Complex64::new(0.0, s * s * v))
        };
        let r = simpson(&f, 0.0, 1.0, SimpsonOptions::default()).unwrap();
        assert!((r.0.re + 0.25).abs() < 1e-10);
        assert!((r.1.im + 1.0 / 16.0).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let f = |s: f64| C2(Complex64::new((1.0 / (s - 0.5)).sin() / (s - 0.5).abs().powf(0.9), 0.0), Complex64::zero());
        let opts = SimpsonOptions { max_evals: 100, ..Default::default() };
        assert!(matches!(simpson(&f, 0.0, 1.0, opts), Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn gauss_is_exact_for_degree_nine() {
        let v: f64 = gauss5(|x: f64| x.powi(9) + x.powi(4), 0.0, 2.0);
        assert!((v - (2f64.powi(10) / 10.0 + 2f64.powi(5) / 5.0)).abs() < 1e-11);
    }
}
