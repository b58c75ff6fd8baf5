//! Closed-form harmonic map profiles `phi_m = e^{m theta R}(h1, 0, h3)` and the
//! potentials built from them.

use crate::geometry::Vec3;

/// Values and first two radial derivatives of `h1`, `h3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileJet {
    pub h1: f64,
    pub h3: f64,
    pub dh1: f64,
    pub dh3: f64,
    pub d2h1: f64,
    pub d2h3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarmonicProfile {
    pub m: u32,
}

impl HarmonicProfile {
    pub fn new(m: u32) -> Self {
        assert!(m >= 1, "winding must be positive");
        HarmonicProfile { m }
    }

    /// Returns `(h1, h3, 1 + h3, h1 / r)` without cancellation on either side of r = 1.
    fn core(&self, r: f64) -> (f64, f64, f64, f64) {
        let m = self.m as i32;
        if r == 0.0 {
            let h1_over_r = if m == 1 { 2.0 } else { 0.0 };
            return (0.0, -1.0, 0.0, h1_over_r);
        }
        if r <= 1.0 {
            let u = r.powi(m);
            let den = 1.0 + u * u;
            let h1 = 2.0 * u / den;
            let h3p1 = 2.0 * u * u / den;
            let h1_over_r = 2.0 * r.powi(m - 1) / den;
            (h1, h3p1 - 1.0, h3p1, h1_over_r)
        } else {
            let u = r.recip().powi(m);
            let den = 1.0 + u * u;
            let h1 = 2.0 * u / den;
            (h1, (1.0 - u * u) / den, 2.0 / den, h1 / r)
        }
    }

    pub fn h1(&self, r: f64) -> f64 {
        self.core(r).0
    }

    pub fn h3(&self, r: f64) -> f64 {
        self.core(r).1
    }

    pub fn jet(&self, r: f64) -> ProfileJet {
        let (h1, h3, h3p1, h1r) = self.core(r);
        let m = self.m as f64;
        if r == 0.0 {
            let (dh1, d2h1, d2h3) = match self.m {
                1 => (2.0, 0.0, 4.0),
                2 => (0.0, 4.0, 0.0),
                _ => (0.0, 0.0, 0.0),
            };
            return ProfileJet { h1, h3, dh1, dh3: 0.0, d2h1, d2h3 };
        }
        let dh1 = -m * h1r * h3;
        let dh3 = m * h1 * h1r;
        let d2h1 = m * h1r / r * ((m - 1.0) + h3p1 - 2.0 * m * h1 * h1);
        let d2h3 = m * h1r * h1r * (-2.0 * m * h3 - 1.0);
        ProfileJet { h1, h3, dh1, dh3, d2h1, d2h3 }
    }

    /// `(h1, h3, dh1, dh3)` at r.
    pub fn eval(&self, r: f64) -> (f64, f64, f64, f64) {
        let j = self.jet(r);
        (j.h1, j.h3, j.dh1, j.dh3)
    }

    /// Profile vector `Q = (h1, 0, h3)`.
    pub fn q(&self, r: f64) -> Vec3 {
        let (h1, h3, _, _) = self.core(r);
        Vec3::new(h1, 0.0, h3)
    }
}

/// `Q`, the moving frame `f1 = (h3, 0, -h1)`, `f2 = (0, 1, 0)` and their
/// first two derivatives for the degree-one profile.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub q: [Vec3; 3],
    pub f1: [Vec3; 3],
    pub f2: Vec3,
}

impl Frame {
    pub fn at(r: f64) -> Self {
        let j = HarmonicProfile::new(1).jet(r);
        Frame {
            q: [
                Vec3::new(j.h1, 0.0, j.h3),
                Vec3::new(j.dh1, 0.0, j.dh3),
                Vec3::new(j.d2h1, 0.0, j.d2h3),
            ],
            f1: [
                Vec3::new(j.h3, 0.0, -j.h1),
                Vec3::new(j.dh3, 0.0, -j.dh1),
                Vec3::new(j.d2h3, 0.0, -j.d2h1),
            ],
            f2: Vec3::new(0.0, 1.0, 0.0),
        }
    }
}

/// `kappa(r) = -2 h1^2 / r^2 = -8/(1+r^2)^2` for the degree-one profile.
pub fn kappa(r: f64) -> f64 {
    let s = 1.0 + r * r;
    -8.0 / (s * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let h = HarmonicProfile::new(1);
        let (h1, h3, _, _) = h.eval(1.0);
        assert!((h1 - 1.0).abs() < 1e-15 && h3.abs() < 1e-15);
        let (h1, h3, _, _) = h.eval(0.0);
        assert_eq!((h1, h3), (0.0, -1.0));
        let (h1, h3, dh1, _) = h.eval(2.0);
        assert!((dh1 + h1 * h3 / 2.0).abs() < 1e-12);
        let fd = (h.h1(2.0 + 1e-5) - h.h1(2.0 - 1e-5)) / 2e-5;
        assert!((fd - dh1).abs() < 1e-9);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for m in 1..=3 {
            let h = HarmonicProfile::new(m);
            for &r in &[0.01, 0.3, 0.9, 1.0, 1.7, 6.0, 40.0] {
                let j = h.jet(r);
                let e = 1e-4 * r;
                let p = h.jet(r + e);
                let n = h.jet(r - e);
                assert!(((p.h1 - n.h1) / (2.0 * e) - j.dh1).abs() < 1e-7 * (1.0 + j.dh1.abs()));
                assert!(((p.h3 - n.h3) / (2.0 * e) - j.dh3).abs() < 1e-7 * (1.0 + j.dh3.abs()));
                assert!(((p.dh1 - n.dh1) / (2.0 * e) - j.d2h1).abs() < 1e-6 * (1.0 + j.d2h1.abs()));
                assert!(((p.dh3 - n.dh3) / (2.0 * e) - j.d2h3).abs() < 1e-6 * (1.0 + j.d2h3.abs()));
                assert!((j.h1 * j.h1 + j.h3 * j.h3 - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn kappa_limits() {
        let series = |r: f64| -8.0 * (1.0 - 2.0 * r * r + 3.0 * r.powi(4));
        for &r in &[1e-6, 1e-4, 1e-3] {
            assert!((kappa(r) - series(r)).abs() < 1e-9);
        }
        assert!((kappa(1.0) + 2.0).abs() < 1e-15);
        let h = HarmonicProfile::new(1);
        for &r in &[0.2, 3.0] {
            let h1 = h.h1(r);
            assert!((kappa(r) + 2.0 * h1 * h1 / (r * r)).abs() < 1e-14);
        }
        let r = 1e3;
        assert!((kappa(r) * r.powi(4) + 8.0).abs() < 1e-4);
    }

    #[test]
    fn frame_relations() {
        for &r in &[0.0, 0.5, 2.0] {
            let f = Frame::at(r);
            assert!((f.q[0].cross(&f.f1[0]) - f.f2).norm() < 1e-15);
            assert!((f.q[0].cross(&f.f2) + f.f1[0]).norm() < 1e-15);
            assert!((f.f1[0].cross(&f.f2) - f.q[0]).norm() < 1e-15);
        }
    }
}
