//! Truncated Laurent series `sum_q c_q y^q` near `y = 0` and the local solver
//! for `(L - mu) f = S` with `L = -Delta + y^-2 + (i/2) y d/dy`.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Laurent {
    /// Power of the first stored coefficient.
    pub lo: i32,
    pub c: Vec<Complex64>,
    /// Highest power kept.
    pub hi: i32,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl Laurent {
    pub fn zeros(lo: i32, hi: i32) -> Self {
        let n = (hi - lo + 1).max(0) as usize;
        Laurent { lo, c: vec![zero(); n], hi }
    }

    /// Single term `a y^q`.
    pub fn monomial(q: i32, a: Complex64, hi: i32) -> Self {
        let mut s = Laurent::zeros(q.min(hi), hi);
        s.set(q, a);
        s
    }

    pub fn get(&self, q: i32) -> Complex64 {
        if q < self.lo || q > self.hi {
            return zero();
        }
        self.c[(q - self.lo) as usize]
    }

    pub fn set(&mut self, q: i32, v: Complex64) {
        if q >= self.lo && q <= self.hi {
            self.c[(q - self.lo) as usize] = v;
        }
    }

    pub fn add(&self, o: &Laurent) -> Laurent {
        let lo = self.lo.min(o.lo);
        let hi = self.hi.min(o.hi);
        let mut out = Laurent::zeros(lo, hi);
        for q in lo..=hi {
            out.set(q, self.get(q) + o.get(q));
        }
        out
    }

    pub fn scale(&self, a: Complex64) -> Laurent {
        Laurent { lo: self.lo, c: self.c.iter().map(|v| v * a).collect(), hi: self.hi }
    }

    pub fn conj(&self) -> Laurent {
        Laurent { lo: self.lo, c: self.c.iter().map(|v| v.conj()).collect(), hi: self.hi }
    }

    /// Product, truncated at the highest power both factors determine.
    pub fn mul(&self, o: &Laurent) -> Laurent {
        let lo = self.lo + o.lo;
        let hi = (self.hi + o.lo).min(o.hi + self.lo);
        let mut out = Laurent::zeros(lo, hi);
        for (i, a) in self.c.iter().enumerate() {
            if *a == zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                let q = self.lo + o.lo + (i + j) as i32;
                if q > hi {
                    break;
                }
                out.c[(q - lo) as usize] += a * b;
            }
        }
        out
    }

    /// Multiplication by `y^k`.
    pub fn shift(&self, k: i32) -> Laurent {
        Laurent { lo: self.lo + k, c: self.c.clone(), hi: self.hi + k }
    }

    pub fn deriv(&self) -> Laurent {
        let mut out = Laurent::zeros(self.lo - 1, self.hi - 1);
        for q in self.lo..=self.hi {
            out.set(q - 1, self.get(q) * q as f64);
        }
        out
    }

    /// Value and first two derivatives at `y > 0`, plus the magnitude of the
    /// last two retained terms (a tail estimate).
    pub fn eval(&self, y: f64) -> ([Complex64; 3], f64) {
        let mut v = [zero(); 3];
        let mut tail = 0.0;
        let n = self.c.len();
        for (i, a) in self.c.iter().enumerate() {
            let q = self.lo + i as i32;
            let p = y.powi(q);
            let qf = q as f64;
            v[0] += a * p;
            v[1] += a * (qf * p / y);
            v[2] += a * (qf * (qf - 1.0) * p / (y * y));
            if i + 2 >= n {
                tail += (a * p).norm();
            }
        }
        (v, tail)
    }
}

/// Result of the local solve: the series and the residual of the
/// solvability condition attached to the `y^-3` equation.
#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub series: Laurent,
    pub constraint: Complex64,
}

/// Solves `(L - mu) f = s` with `f = sum_q c_q y^q` (odd q), starting two
/// powers above the lowest power of `s` and with the free coefficient `c_1 = c1`.
///
/// The coefficient of `y^q` gives
/// `-((q+2)^2 - 1) c_{q+2} + ((i/2) q - mu) c_q = s_q`.
pub fn solve_local(mu: Complex64, s: &Laurent, c1: Complex64) -> LocalSolution {
    let mut qmin = s.lo;
    while qmin < s.hi && s.get(qmin) == zero() {
        qmin += 1;
    }
    if qmin.rem_euclid(2) == 0 {
        qmin -= 1;
    }
    let half_i = Complex64::new(0.0, 0.5);
    let mut f = Laurent::zeros((qmin + 2).min(-1), s.hi + 2);
    f.set(-1, s.get(-1) / (-half_i - mu));
    f.set(1, c1);
    let mut constraint = zero();
    let mut q = qmin.min(1);
    while q + 2 <= f.hi {
        let k = q + 2;
        let a = (half_i * q as f64 - mu) * f.get(q);
        match k {
            1 => {}
            -1 => constraint = s.get(-3) - a,
            _ => f.set(k, (a - s.get(q)) / ((k * k - 1) as f64)),
        }
        q += 2;
    }
    LocalSolution { series: f, constraint }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(mu: Complex64, f: &Laurent) -> Laurent {
        // -(f'' + f'/y) + f/y^2 + (i/2) y f' - mu f
        let d1 = f.deriv();
        let d2 = d1.deriv();
        let mut out = d2.scale(Complex64::new(-1.0, 0.0));
        out = out.add(&d1.shift(-1).scale(Complex64::new(-1.0, 0.0)));
        out = out.add(&f.shift(-2));
        out = out.add(&d1.shift(1).scale(Complex64::new(0.0, 0.5)));
        out.add(&f.scale(-mu))
    }

    #[test]
    fn homogeneous_solution_starts_at_y() {
        let mu = Complex64::new(-0.2, 1.5);
        let sol = solve_local(mu, &Laurent::zeros(1, 61), 1.0.into());
        assert_eq!(sol.series.get(1), Complex64::new(1.0, 0.0));
        assert_eq!(sol.series.get(-1), zero());
        let r = apply(mu, &sol.series);
        for q in r.lo..=r.hi - 4 {
            assert!(r.get(q).norm() < 1e-14, "q {q}");
        }
    }

    #[test]
    fn singular_source_sets_inverse_power() {
        let mu = Complex64::new(0.0, 1.5);
        let mut s = Laurent::zeros(-1, 61);
        s.set(-1, 2.0.into());
        s.set(1, Complex64::new(0.3, -1.0));
        let sol = solve_local(mu, &s, 0.5.into());
        let kappa = Complex64::new(0.0, -0.25) - mu / 2.0;
        assert!((sol.series.get(-1) - 1.0 / kappa).norm() < 1e-14);
        let r = apply(mu, &sol.series).add(&s.scale(Complex64::new(-1.0, 0.0)));
        for q in -1..50 {
            assert!(r.get(q).norm() < 1e-12, "q {q}: {}", r.get(q));
        }
        assert_eq!(sol.constraint, zero());
    }

    #[test]
    fn cubic_singularity_is_a_constraint() {
        let mu = Complex64::new(0.0, 1.5);
        let s = Laurent::monomial(-3, 1.0.into(), 41);
        let sol = solve_local(mu, &s, zero());
        assert!((sol.constraint - 1.0).norm() < 1e-15);
        let mut s5 = Laurent::zeros(-5, 41);
        s5.set(-5, 8.0.into());
        let sol = solve_local(mu, &s5, zero());
        assert!((sol.series.get(-3) + 1.0).norm() < 1e-15);
        let half_i = Complex64::new(0.0, 0.5);
        assert!((sol.constraint - (half_i * 3.0 + mu) * -1.0).norm() < 1e-14);
    }

    #[test]
    fn products_and_evaluation() {
        let a = Laurent { lo: -1, c: vec![1.0.into(), zero(), 2.0.into()], hi: 1 };
        let b = a.mul(&a);
        assert_eq!(b.lo, -2);
        assert_eq!(b.get(-2), Complex64::new(1.0, 0.0));
        assert_eq!(b.get(0), Complex64::new(4.0, 0.0));
        let (v, _) = a.eval(0.5);
        assert!((v[0] - (2.0 + 1.0)).norm() < 1e-15);
        assert!((v[1] - (-4.0 + 2.0)).norm() < 1e-15);
        assert!((v[2] - 16.0).norm() < 1e-15);
    }
}
