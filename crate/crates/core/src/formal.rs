//! Formal sums `sum t^(n + 2 nu q) e^(-i m Phi) (ln r - ln t)^s g(r)` with
//! `Phi = r^2/(4t) + 2 alpha0 ln t + phi(r)` and Taylor-jet coefficients at a
//! fixed radius. Used to assemble the remote-layer sources order by order.

use crate::taylor::Taylor;
use num_complex::Complex64;
use std::collections::BTreeMap;

type C = Complex64;

/// `(n, q, m, s)`: integer t-power, `t^(2 nu)`-power, phase index, log power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key {
    pub n: i32,
    pub q: u32,
    pub m: i32,
    pub s: u32,
}

impl Key {
    pub const fn new(n: i32, q: u32, m: i32, s: u32) -> Self {
        Key { n, q, m, s }
    }

    pub const ZERO: Key = Key::new(0, 0, 0, 0);
}

/// Data fixed at the expansion radius.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub nu: f64,
    pub alpha0: f64,
    /// `r` as a jet.
    pub r: Taylor,
    /// `phi'(r)` as a jet.
    pub dphi: Taylor,
    /// Terms with `n > n_max` are dropped from products.
    pub n_max: i32,
}

#[derive(Debug, Clone, Default)]
pub struct Formal {
    pub terms: BTreeMap<Key, Taylor>,
}

impl Formal {
    pub fn new() -> Self {
        Formal { terms: BTreeMap::new() }
    }

    pub fn single(k: Key, g: Taylor) -> Self {
        let mut f = Formal::new();
        f.push(k, g);
        f
    }

    pub fn get(&self, k: &Key) -> Option<&Taylor> {
        self.terms.get(k)
    }

    /// Adds `g` to the coefficient of `k`.
    pub fn push(&mut self, k: Key, g: Taylor) {
        match self.terms.get_mut(&k) {
            Some(v) => *v = &*v + &g,
            None => {
                self.terms.insert(k, g);
            }
        }
    }

    pub fn add(&self, o: &Formal) -> Formal {
        let mut out = self.clone();
        for (k, g) in &o.terms {
            out.push(*k, g.clone());
        }
        out
    }

    pub fn sub(&self, o: &Formal) -> Formal {
        self.add(&o.scale(C::new(-1.0, 0.0)))
    }

    pub fn scale(&self, a: C) -> Formal {
        Formal { terms: self.terms.iter().map(|(k, g)| (*k, g.scale(a))).collect() }
    }

    /// Multiplication by a function of `r` alone.
    pub fn times(&self, a: &Taylor) -> Formal {
        Formal { terms: self.terms.iter().map(|(k, g)| (*k, g * a)).collect() }
    }

    pub fn conj(&self) -> Formal {
        Formal { terms: self.terms.iter().map(|(k, g)| (Key { m: -k.m, ..*k }, g.conj())).collect() }
    }

    pub fn mul(&self, o: &Formal, n_max: i32) -> Formal {
        let mut out = Formal::new();
        for (a, ga) in &self.terms {
            for (b, gb) in &o.terms {
                let n = a.n + b.n;
                if n > n_max {
                    continue;
                }
                out.push(Key::new(n, a.q + b.q, a.m + b.m, a.s + b.s), ga * gb);
            }
        }
        out
    }

    pub fn truncate(&self, n_max: i32) -> Formal {
        Formal { terms: self.terms.iter().filter(|(k, _)| k.n <= n_max).map(|(k, g)| (*k, g.clone())).collect() }
    }

    pub fn order(&self) -> usize {
        self.terms.values().map(|g| g.order()).min().unwrap_or(0)
    }

    /// `d/dr`.
    pub fn dr(&self, ctx: &Ctx) -> Formal {
        let mut out = Formal::new();
        let half_r = ctx.r.scale_re(0.5);
        let inv_r = ctx.r.recip();
        for (k, g) in &self.terms {
            let im = C::new(0.0, k.m as f64);
            let mut d = g.deriv();
            if k.m != 0 {
                d = &d - &(&ctx.dphi * g).scale(im);
                out.push(Key { n: k.n - 1, ..*k }, (g * &half_r).scale(-im));
            }
            out.push(*k, d);
            if k.s > 0 {
                out.push(Key { s: k.s - 1, ..*k }, (g * &inv_r).scale_re(k.s as f64));
            }
        }
        out
    }

    /// `d/dt`.
    pub fn dt(&self, ctx: &Ctx) -> Formal {
        let mut out = Formal::new();
        let r2 = &ctx.r * &ctx.r;
        for (k, g) in &self.terms {
            let rate = C::new(k.n as f64 + 2.0 * ctx.nu * k.q as f64, -2.0 * k.m as f64 * ctx.alpha0);
            out.push(Key { n: k.n - 1, ..*k }, g.scale(rate));
            if k.m != 0 {
                out.push(Key { n: k.n - 2, ..*k }, (g * &r2).scale(C::new(0.0, k.m as f64 / 4.0)));
            }
            if k.s > 0 {
                out.push(Key { n: k.n - 1, s: k.s - 1, ..*k }, g.scale_re(-(k.s as f64)));
            }
        }
        out
    }

    /// `1 / (1 + self)` when `self` is the `Key::ZERO` term plus terms with `n >= 1`.
    pub fn one_plus_recip(&self, n_max: i32) -> Formal {
        let order = self.order();
        let a = match self.terms.get(&Key::ZERO) {
            Some(g) => g.add_const(C::new(1.0, 0.0)),
            None => Taylor::constant(C::new(1.0, 0.0), order),
        };
        let inv_a = a.recip();
        let mut eps = self.clone();
        eps.terms.remove(&Key::ZERO);
        debug_assert!(eps.terms.keys().all(|k| k.n >= 1));
        let x = eps.times(&inv_a).scale(C::new(-1.0, 0.0));
        let mut sum = Formal::single(Key::ZERO, inv_a.clone());
        let mut pow = Formal::single(Key::ZERO, Taylor::constant(C::new(1.0, 0.0), order));
        for _ in 1..=n_max.max(0) {
            pow = pow.mul(&x, n_max);
            if pow.terms.is_empty() {
                break;
            }
            sum = sum.add(&pow.times(&inv_a));
        }
        sum
    }

    /// Equation residual `-i w_t - w_rr - w_r/r + w/r^2 + G(w)` with
    /// `G = 2 conj(w) (w_r^2 - w^2/r^2) / (1 + |w|^2)`, keeping `n <= ctx.n_max`.
    pub fn residual(&self, ctx: &Ctx) -> Formal {
        let n_max = ctx.n_max;
        let inv_r = ctx.r.recip();
        let inv_r2 = &inv_r * &inv_r;
        let w_r = self.dr(ctx);
        let w_rr = w_r.dr(ctx);
        let w_t = self.dt(ctx);
        let wb = self.conj();
        let lin = w_t
            .scale(C::new(0.0, -1.0))
            .sub(&w_rr)
            .sub(&w_r.times(&inv_r))
            .add(&self.times(&inv_r2))
            .truncate(n_max);
        let sq = w_r.mul(&w_r, n_max).sub(&self.mul(self, n_max).times(&inv_r2));
        let den = self.mul(&wb, n_max).one_plus_recip(n_max);
        let g = wb.mul(&sq, n_max).mul(&den, n_max).scale(C::new(2.0, 0.0));
        lin.add(&g)
    }

    /// Value at `(r, t)` given `phi(r)`: sums the expansion-point values.
    pub fn eval(&self, nu: f64, alpha0: f64, r: f64, phi: f64, t: f64) -> C {
        self.eval_with_phase(nu, r, r * r / (4.0 * t) + 2.0 * alpha0 * t.ln() + phi, t)
    }

    /// Value with the total phase `Phi` supplied.
    pub fn eval_with_phase(&self, nu: f64, r: f64, big_phi: f64, t: f64) -> C {
        let lam = r.ln() - t.ln();
        let mut acc = C::new(0.0, 0.0);
        for (k, g) in &self.terms {
            let tp = t.powf(k.n as f64 + 2.0 * nu * k.q as f64);
            let ph = C::from_polar(1.0, -(k.m as f64) * big_phi);
            acc += g.value() * ph * (tp * lam.powi(k.s as i32));
        }
        acc
    }
}
