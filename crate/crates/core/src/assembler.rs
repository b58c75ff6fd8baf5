//! The glued approximate solution `u^(N)` and its residual
//! `r^(N) = -u_t + u x Delta u`.
//!
//! Everything is evaluated in the lab variables `(r, t)` with
//! `u(r, t) = e^(alpha(t) R) V(lambda(t) r, t)`. In the chart the rotation is a
//! phase, so the lab chart of the glued field is
//! `theta1 w_in + (1 - theta1) theta2 w_ss + (1 - theta2) w_rem` with
//! `w_in = e^(i alpha) chart(V_in)`, `w_ss = e^(i alpha) W_ss(r/sqrt t, t)`,
//! `theta1 = theta(r t^(-1/2-eps1))` and `theta2 = theta(r t^(eps2-1/2))`.
//! For `rho <= t^(-nu+eps1)/2` the sphere representation of `V_in` is used.

use crate::error::{Error, Result};
use crate::fit::slope;
use crate::geometry::{sobolev_norm, SphereField, Vec3, VectorField, Weight};
use crate::grid::{RadialGrid, Spacing};
use crate::harmonic::Frame;
use crate::inner::{build_inner, InnerExpansion};
use crate::jet::{self, CJet, VJet};
use crate::params::BlowupParams;
use crate::remote::{build_remote, RemoteLayer, RemoteOptions};
use crate::selfsim::{build_matched, far_field_fit, SelfSimilarLayer, DEFAULT_Y_MAX};
use crate::taylor::cutoff_theta_derivs;
use num_complex::Complex64;
use serde::Serialize;
use std::sync::{Arc, OnceLock};

type C = Complex64;

/// Nodes per inner length `1/lambda(t)` required near the origin.
pub const INNER_RESOLUTION: f64 = 32.0;

/// Lab-frame value with two r-derivatives and the t-derivative at fixed r.
#[derive(Debug, Clone, Copy)]
pub struct LabPoint {
    pub v: VJet,
    pub v_t: Vec3,
}

/// A time-dependent equivariant map evaluated pointwise.
pub trait Profile {
    fn lab_point(&self, r: f64, t: f64) -> Result<LabPoint>;

    /// `-u_t + u x Delta u` at `(r, t)`.
    fn residual_at(&self, r: f64, t: f64) -> Result<Vec3> {
        Ok(residual_point(&self.lab_point(r, t)?, r))
    }

    /// Shortest length the field varies on at time `t`.
    fn inner_scale(&self, _t: f64) -> f64 {
        1.0
    }
}

/// The degree-one harmonic map, frozen in time.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaticMap;

impl Profile for StaticMap {
    fn lab_point(&self, r: f64, _t: f64) -> Result<LabPoint> {
        Ok(LabPoint { v: Frame::at(r).q, v_t: Vec3::zeros() })
    }
}

/// The constant map `k`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantMap;

impl Profile for ConstantMap {
    fn lab_point(&self, _r: f64, _t: f64) -> Result<LabPoint> {
        Ok(LabPoint { v: [Vec3::z(), Vec3::zeros(), Vec3::zeros()], v_t: Vec3::zeros() })
    }
}

/// `-u_t + u x (Delta u + R^2 u / r^2)`; zero at the origin, where an
/// equivariant field sits at a pole.
pub fn residual_point(p: &LabPoint, r: f64) -> Vec3 {
    if r == 0.0 {
        return Vec3::zeros();
    }
    -p.v_t + p.v[0].cross(&jet::map_laplacian(&p.v, r))
}

fn rotate(a: f64, v: &Vec3) -> Vec3 {
    let (s, c) = a.sin_cos();
    Vec3::new(c * v[0] - s * v[1], s * v[0] + c * v[1], v[2])
}

fn real_jet(a: [f64; 3]) -> CJet {
    [C::new(a[0], 0.0), C::new(a[1], 0.0), C::new(a[2], 0.0)]
}

/// Chart jets `w = (v1 + i v2)/(1 + v3)` of a lab point.
pub fn project_lab(p: &LabPoint) -> (CJet, C) {
    let num: CJet = [0, 1, 2].map(|k| C::new(p.v[k][0], p.v[k][1]));
    let den = real_jet([1.0 + p.v[0][2], p.v[1][2], p.v[2][2]]);
    let w = jet::div_cc(num, den);
    let num_t = C::new(p.v_t[0], p.v_t[1]);
    let w_t = (num_t - w[0] * p.v_t[2]) / den[0];
    (w, w_t)
}

/// Inverse of [`project_lab`].
pub fn unproject_lab(w: &CJet, w_t: C) -> LabPoint {
    let s = jet::re(jet::mul_cc(*w, jet::conj(*w)));
    let d = 1.0 + s[0];
    let inv = jet::compose([1.0 / d, -1.0 / (d * d), 2.0 / (d * d * d)], s);
    let h = jet::mul_cc(*w, real_jet(inv));
    let v: VJet = [0, 1, 2].map(|k| Vec3::new(2.0 * h[k].re, 2.0 * h[k].im, 2.0 * inv[k] - if k == 0 { 1.0 } else { 0.0 }));
    let s_t = 2.0 * (w[0].conj() * w_t).re;
    let inv_t = -s_t / (d * d);
    let h_t = 2.0 * (w_t / d + w[0] * inv_t);
    LabPoint { v, v_t: Vec3::new(h_t.re, h_t.im, 2.0 * inv_t) }
}

/// `theta(r t^-a)` as an r-jet with its t-derivative.
fn cutoff(r: f64, t: f64, a: f64) -> ([f64; 3], f64) {
    let xi = r * t.powf(-a);
    let d = cutoff_theta_derivs(xi, 2);
    let (xr, xt) = (xi / r, -a * xi / t);
    ([d[0], d[1] * xr, d[2] * xr * xr], d[1] * xt)
}

/// Product of a chart term with a cutoff, including the t-derivative.
fn weighted(w: (CJet, C), th: ([f64; 3], f64)) -> (CJet, C) {
    let p = jet::mul_cc(w.0, real_jet(th.0));
    (p, w.1 * th.0[0] + w.0[0] * th.1)
}

fn one_minus(th: ([f64; 3], f64)) -> ([f64; 3], f64) {
    ([1.0 - th.0[0], -th.0[1], -th.0[2]], -th.1)
}

fn mul_cut(a: ([f64; 3], f64), b: ([f64; 3], f64)) -> ([f64; 3], f64) {
    (jet::mul_rr(a.0, b.0), a.1 * b.0[0] + a.0[0] * b.1)
}

#[derive(Debug, Clone)]
pub struct ApproximateSolution {
    pub params: BlowupParams,
    pub inner: InnerExpansion,
    pub selfsim: SelfSimilarLayer,
    pub remote: RemoteLayer,
    threshold: OnceLock<f64>,
}

/// Residual field with its norms.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub t: f64,
    pub field: VectorField,
    pub l2: f64,
    pub h1: f64,
    pub weighted_l2: f64,
}

/// Distances between a field and `u^(N)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProximityReport {
    pub h1: f64,
    pub h2: f64,
    pub h3: Option<f64>,
    pub weighted_l2: f64,
}

/// Inner grid used by [`build_solution`].
pub fn default_inner_grid() -> Result<Arc<RadialGrid>> {
    Ok(Arc::new(RadialGrid::geometric(3e4, 7000, 1e-3)?))
}

/// Builds and matches all three layers.
pub fn build_solution(params: BlowupParams, inner_grid: Arc<RadialGrid>, options: RemoteOptions) -> Result<ApproximateSolution> {
    let inner = build_inner(params, inner_grid)?;
    let (selfsim, _) = build_matched(&inner, DEFAULT_Y_MAX)?;
    let far = far_field_fit(&selfsim)?;
    let remote = build_remote(&selfsim, &far, options)?;
    Ok(ApproximateSolution::from_parts(inner, selfsim, remote))
}

impl ApproximateSolution {
    pub fn from_parts(inner: InnerExpansion, selfsim: SelfSimilarLayer, remote: RemoteLayer) -> Self {
        ApproximateSolution { params: inner.params, inner, selfsim, remote, threshold: OnceLock::new() }
    }

    /// `t^(-1/2-eps1)`: the inner cutoff is `theta(r * this)`.
    fn inner_exponent(&self) -> f64 {
        0.5 + self.params.eps1
    }

    fn remote_exponent(&self) -> f64 {
        0.5 - self.params.eps2
    }

    /// True where `u^(N)` is `V_in` in the sphere representation.
    pub fn in_pure_inner_zone(&self, r: f64, t: f64) -> bool {
        r * t.powf(-self.inner_exponent()) <= 0.5
    }

    /// `e^(alpha R) V_in(lambda r, t)` with lab derivatives.
    pub fn inner_lab(&self, r: f64, t: f64) -> Result<LabPoint> {
        let p = &self.params;
        let lam = p.lambda(t);
        let rho = lam * r;
        let q = self.inner.point(rho, t)?;
        let a = p.alpha(t);
        let v = [rotate(a, &q.v[0]), rotate(a, &q.v[1]) * lam, rotate(a, &q.v[2]) * (lam * lam)];
        let body = jet::rot(&q.v[0]) * (p.alpha0 / t) - q.v[1] * ((0.5 + p.nu) * rho / t) + q.v_t;
        Ok(LabPoint { v, v_t: rotate(a, &body) })
    }

    /// `e^(i alpha) W_ss(r / sqrt t, t)` as lab chart jets.
    pub fn selfsim_chart(&self, r: f64, t: f64) -> Result<(CJet, C)> {
        let st = t.sqrt();
        let y = r / st;
        let s = self.selfsim.w_ss(y, t)?;
        let ph = C::from_polar(1.0, self.params.alpha(t));
        let w = [s.w[0] * ph, s.w[1] * (ph / st), s.w[2] * (ph / t)];
        let w_t = ph * (C::new(0.0, self.params.alpha0 / t) * s.w[0] + s.w_t - s.w[1] * (y / (2.0 * t)));
        Ok((w, w_t))
    }

    pub fn remote_chart(&self, r: f64, t: f64) -> Result<(CJet, C)> {
        let p = self.remote.eval_point(r, t)?;
        Ok((p.w, p.w_t))
    }

    /// Glued lab chart jets; regions with zero weight are not evaluated.
    pub fn chart(&self, r: f64, t: f64) -> Result<(CJet, C)> {
        let th1 = cutoff(r, t, self.inner_exponent());
        let th2 = cutoff(r, t, self.remote_exponent());
        let mut w = jet::czero();
        let mut w_t = C::new(0.0, 0.0);
        let mut acc = |term: (CJet, C)| {
            for k in 0..3 {
                w[k] += term.0[k];
            }
            w_t += term.1;
        };
        if th1.0[0] > 0.0 {
            acc(weighted(project_lab(&self.inner_lab(r, t)?), th1));
        }
        let mid = mul_cut(one_minus(th1), th2);
        if th1.0[0] < 1.0 && th2.0[0] > 0.0 {
            acc(weighted(self.selfsim_chart(r, t)?, mid));
        }
        if th2.0[0] < 1.0 {
            acc(weighted(self.remote_chart(r, t)?, one_minus(th2)));
        }
        Ok((w, w_t))
    }

    /// Smallest t whose inner zone fits on the inner grid.
    pub fn min_time(&self) -> f64 {
        let p = &self.params;
        (2.0 / self.inner.grid().r_max()).powf(1.0 / (p.nu - p.eps1))
    }

    /// Largest dyadic `t = 2^-k` from which every smaller dyadic time down to
    /// [`Self::min_time`] has ordered, nonempty overlap windows, a
    /// self-similar window inside `y_max` and `|z_in| < 1` on the inner zone.
    pub fn threshold(&self) -> f64 {
        *self.threshold.get_or_init(|| {
            let t_min = self.min_time();
            let mut best = f64::NAN;
            for k in (0..60).rev() {
                let t = 0.5f64.powi(k);
                if t < t_min {
                    continue;
                }
                if self.window_ok(t) {
                    best = t;
                } else {
                    break;
                }
            }
            best
        })
    }

    fn window_ok(&self, t: f64) -> bool {
        let p = &self.params;
        let y_in = 2.0 * t.powf(p.eps1);
        let y_rem = t.powf(-p.eps2);
        if !(y_in < y_rem && 2.0 * y_rem <= self.selfsim.y_max) {
            return false;
        }
        let rho_hi = y_in * t.powf(-p.nu);
        let n = 200;
        (0..=n).all(|i| {
            let rho = rho_hi * (i as f64 / n as f64).powi(2);
            matches!(self.inner.z(rho, t), Ok(z) if z[0].norm() < 1.0)
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let big = self.threshold();
        if !(t > 0.0 && t <= big && t >= self.min_time()) {
            return Err(Error::Domain(format!("t = {t} outside [{}, {big}]", self.min_time())));
        }
        Ok(())
    }
}

impl Profile for ApproximateSolution {
    fn lab_point(&self, r: f64, t: f64) -> Result<LabPoint> {
        if self.in_pure_inner_zone(r, t) {
            return self.inner_lab(r, t);
        }
        let (w, w_t) = self.chart(r, t)?;
        Ok(unproject_lab(&w, w_t))
    }

    /// In the pure inner zone the lab residual is `-lambda^2 e^(alpha R)` times
    /// the rescaled inner residual, which is summed as a series to avoid the
    /// cancellation between terms of size `lambda^2`.
    fn residual_at(&self, r: f64, t: f64) -> Result<Vec3> {
        if r > 0.0 && self.in_pure_inner_zone(r, t) {
            let lam = self.params.lambda(t);
            let res = self.inner.residual_vector(lam * r, t)?;
            return Ok(-rotate(self.params.alpha(t), &res) * (lam * lam));
        }
        Ok(residual_point(&self.lab_point(r, t)?, r))
    }

    fn inner_scale(&self, t: f64) -> f64 {
        1.0 / self.params.lambda(t)
    }
}

fn check_resolution(grid: &RadialGrid, scale: f64) -> Result<()> {
    let limit = scale / INNER_RESOLUTION;
    let spacing = grid.max_spacing_below(scale);
    if spacing > limit {
        return Err(Error::ScaleUnresolved { spacing, limit });
    }
    Ok(())
}

/// Samples `u^(N)(., t)` on `grid`.
pub fn eval_u_n(sol: &ApproximateSolution, t: f64, grid: Arc<RadialGrid>) -> Result<SphereField> {
    sol.check_time(t)?;
    eval_profile(sol, t, grid)
}

/// Samples any [`Profile`] on `grid` after the resolution check.
pub fn eval_profile(p: &impl Profile, t: f64, grid: Arc<RadialGrid>) -> Result<SphereField> {
    check_resolution(&grid, p.inner_scale(t))?;
    let samples = grid.nodes().iter().map(|&r| Ok(p.lab_point(r, t)?.v[0])).collect::<Result<Vec<_>>>()?;
    SphereField::new(grid, samples)
}

/// `r^(N)(., t)` on `grid` with its `L2`, `H1` and `<x>`-weighted `L2` norms.
pub fn residual_r_n(sol: &ApproximateSolution, t: f64, grid: Arc<RadialGrid>) -> Result<ResidualReport> {
    sol.check_time(t)?;
    residual_of(sol, t, grid)
}

pub fn residual_of(p: &impl Profile, t: f64, grid: Arc<RadialGrid>) -> Result<ResidualReport> {
    check_resolution(&grid, p.inner_scale(t))?;
    let values = grid
        .nodes()
        .iter()
        .map(|&r| p.residual_at(r, t))
        .collect::<Result<Vec<_>>>()?;
    let field = VectorField::new(grid, values, 1)?;
    Ok(ResidualReport {
        t,
        l2: sobolev_norm(&field, 0, Weight::None)?,
        h1: sobolev_norm(&field, 1, Weight::None)?,
        weighted_l2: sobolev_norm(&field, 0, Weight::Bracket)?,
        field,
    })
}

/// `H1`, `H2`, `H3` (when the grid has enough nodes) and `<x> L2` norms of `u - u^(N)(t)`.
pub fn proximity_norms(u: &SphereField, sol: &ApproximateSolution, t: f64) -> Result<ProximityReport> {
    let reference = eval_u_n(sol, t, u.grid.clone())?;
    proximity_to(u, &reference)
}

pub fn proximity_to(u: &SphereField, reference: &SphereField) -> Result<ProximityReport> {
    let d = u.difference(reference)?;
    let h3 = if d.grid.len() >= 13 { Some(sobolev_norm(&d, 3, Weight::None)?) } else { None };
    Ok(ProximityReport {
        h1: sobolev_norm(&d, 1, Weight::None)?,
        h2: sobolev_norm(&d, 2, Weight::None)?,
        h3,
        weighted_l2: sobolev_norm(&d, 0, Weight::Bracket)?,
    })
}

/// Grid on `[0, r_max]` resolving `1/lambda(t_min)` near 0 and, out to
/// `3 delta`, the oscillation `e^(i r^2/(4t_min))` with 24 nodes per period.
pub fn residual_grid(params: &BlowupParams, t_min: f64, r_max: f64) -> Result<Arc<RadialGrid>> {
    let q = 1.005;
    let h0 = 1.0 / (params.lambda(t_min) * 2.0 * INNER_RESOLUTION);
    let r_osc = 3.0 * params.delta;
    let mut nodes = vec![0.0];
    let (mut r, mut h) = (0.0, h0);
    while r + h < r_max {
        r += h;
        nodes.push(r);
        h *= q;
        if r < r_osc {
            h = h.min(8.0 * std::f64::consts::PI * t_min / (24.0 * r));
        }
    }
    // a short last gap gives the end node a negative quadrature weight
    let last = nodes.len() - 1;
    if last > 1 && r_max - r < 0.5 * (r - nodes[last - 1]) {
        nodes[last] = r_max;
    } else {
        nodes.push(r_max);
    }
    Ok(Arc::new(RadialGrid::from_nodes(nodes, Spacing::Geometric)?))
}

/// `L2` residual norms over `t0 2^-k`, k = 0..count, on one shared grid, and
/// the least-squares slope of `ln L2` against `ln t`.
pub fn residual_ladder(sol: &ApproximateSolution, t0: f64, count: usize) -> Result<(Vec<(f64, f64)>, f64)> {
    if count == 0 {
        return Err(Error::InvalidParams("empty t-ladder".into()));
    }
    let ts: Vec<f64> = (0..count).map(|k| t0 * 0.5f64.powi(k as i32)).collect();
    let grid = residual_grid(&sol.params, ts[count - 1], 1.0)?;
    let mut rows = Vec::with_capacity(count);
    for &t in &ts {
        rows.push((t, residual_r_n(sol, t, grid.clone())?.l2));
    }
    Ok((rows.clone(), log_slope(&rows)))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(rows: &[(f64, f64)]) -> f64 {
    if rows.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selfsim::overlap_mismatch;

    fn solution(n: usize) -> &'static ApproximateSolution {
        static S: [OnceLock<ApproximateSolution>; 2] = [OnceLock::new(), OnceLock::new()];
        S[n - 1].get_or_init(|| {
            let p = BlowupParams::new(1.5, 0.3, 0.2, n).unwrap();
            build_solution(p, default_inner_grid().unwrap(), RemoteOptions::default()).unwrap()
        })
    }

    #[test]
    fn chart_round_trip_keeps_derivatives() {
        let w = [C::new(0.3, -0.2), C::new(1.1, 0.4), C::new(-0.7, 2.0)];
        let w_t = C::new(0.25, -1.5);
        let p = unproject_lab(&w, w_t);
        assert!((p.v[0].norm() - 1.0).abs() < 1e-15);
        assert!(p.v[0].dot(&p.v[1]).abs() < 1e-14 && p.v[0].dot(&p.v_t).abs() < 1e-14);
        let (w2, w2_t) = project_lab(&p);
        for k in 0..3 {
            assert!((w2[k] - w[k]).norm() < 1e-13);
        }
        assert!((w2_t - w_t).norm() < 1e-13);
    }

    #[test]
    fn rotation_is_a_chart_phase() {
        let p = unproject_lab(&[C::new(0.4, 0.1), C::new(0.2, 0.0), C::new(0.0, 0.3)], C::new(0.1, 0.1));
        let b = 0.7;
        let q = LabPoint { v: p.v.map(|v| rotate(b, &v)), v_t: rotate(b, &p.v_t) };
        let (w, w_t) = project_lab(&p);
        let (wq, wq_t) = project_lab(&q);
        let ph = C::from_polar(1.0, b);
        assert!((0..3).all(|k| (wq[k] - ph * w[k]).norm() < 1e-14));
        assert!((wq_t - ph * w_t).norm() < 1e-14);
    }

    #[test]
    fn static_and_constant_maps_have_no_residual() {
        let grid = Arc::new(RadialGrid::geometric(50.0, 2000, 1e-3).unwrap());
        let s = residual_of(&StaticMap, 0.1, grid.clone()).unwrap();
        assert!(s.field.max_abs() < 1e-9 && s.l2 < 1e-9, "{}", s.field.max_abs());
        let c = residual_of(&ConstantMap, 0.1, grid).unwrap();
        assert_eq!(c.field.max_abs(), 0.0);
    }

    #[test]
    fn pure_inner_zone_is_the_rotated_inner_profile() {
        let sol = solution(2);
        let t = 1e-3;
        let p = &sol.params;
        let lam = p.lambda(t);
        let grid = residual_grid(p, t, 1.0).unwrap();
        let u = eval_u_n(sol, t, grid.clone()).unwrap();
        for (i, &r) in grid.nodes().iter().enumerate() {
            if !sol.in_pure_inner_zone(r, t) {
                break;
            }
            let v = sol.inner.point(lam * r, t).unwrap().v[0];
            assert_eq!(u.samples[i], rotate(p.alpha(t), &v));
        }
    }

    #[test]
    fn constant_outside_the_remote_support_and_unit_length() {
        let sol = solution(1);
        let t = 1e-3;
        let grid = residual_grid(&sol.params, t, 1.0).unwrap();
        let u = eval_u_n(sol, t, grid.clone()).unwrap();
        assert!(u.max_norm_defect() < 1e-10);
        for (i, &r) in grid.nodes().iter().enumerate() {
            if r >= 3.0 * sol.params.delta {
                assert_eq!(u.samples[i], Vec3::z());
            }
        }
        assert_eq!(u.samples[0], -Vec3::z());
    }

    #[test]
    fn glued_derivatives_match_differences() {
        let sol = solution(2);
        let t: f64 = 2e-3;
        let p = &sol.params;
        let a = t.powf(0.5 + p.eps1);
        let b = t.powf(0.5 - p.eps2);
        for &r in &[0.7 * a, 1.5 * a, 0.5 * b, 1.5 * b, 0.3] {
            let lp = sol.lab_point(r, t).unwrap();
            let (hr, ht) = (1e-5 * r, 1e-6 * t);
            let v = |r: f64, t: f64| sol.lab_point(r, t).unwrap().v[0];
            let d_r = (v(r + hr, t) - v(r - hr, t)) / (2.0 * hr);
            let d_rr = (v(r + hr, t) - 2.0 * v(r, t) + v(r - hr, t)) / (hr * hr);
            let d_t = (v(r, t + ht) - v(r, t - ht)) / (2.0 * ht);
            assert!((lp.v[1] - d_r).norm() < 1e-6 * (1.0 + d_r.norm()), "r {r}: {} vs {}", lp.v[1], d_r);
            assert!((lp.v[2] - d_rr).norm() < 1e-3 * (1.0 + d_rr.norm()), "r {r}");
            assert!((lp.v_t - d_t).norm() < 1e-5 * (1.0 + d_t.norm()), "r {r}: {} vs {}", lp.v_t, d_t);
        }
    }

    #[test]
    fn inner_series_residual_matches_the_lab_formula() {
        let sol = solution(2);
        let t = 1e-2;
        let lam = sol.params.lambda(t);
        for &rho in &[0.5, 2.0, 5.0] {
            let r = rho / lam;
            let a = sol.residual_at(r, t).unwrap();
            let b = residual_point(&sol.inner_lab(r, t).unwrap(), r);
            // the lab formula cancels terms of size lambda^2
            assert!((a - b).norm() < 1e-14 * lam * lam, "rho {rho}: {a} vs {b}");
        }
    }

    #[test]
    fn gluing_error_is_bounded_by_the_overlap_mismatch() {
        let sol = solution(2);
        let p = &sol.params;
        for &t in &[4e-3, 1e-3] {
            let m = overlap_mismatch(&sol.selfsim, &sol.inner, t).unwrap();
            let c = t.powf(-p.nu + p.eps1) / p.lambda(t);
            for i in 0..=40 {
                let r = c / 10.0 * 100f64.powf(i as f64 / 40.0);
                let glued = sol.chart(r, t).unwrap().0[0];
                let inner = project_lab(&sol.inner_lab(r, t).unwrap()).0[0];
                assert!((glued - inner).norm() <= m * (1.0 + 1e-9), "t {t} r {r}");
            }
        }
    }

    #[test]
    fn overlap_mismatch_decays_at_the_expected_rate() {
        let sol = solution(2);
        let p = &sol.params;
        let rows: Vec<(f64, f64)> = [4e-3, 2e-3, 1e-3, 5e-4].iter().map(|&t| (t, overlap_mismatch(&sol.selfsim, &sol.inner, t).unwrap())).collect();
        let floor = p.nu * p.order_n as f64 * (1.0 - 2.0 * p.eps2) - 1.0;
        assert!(log_slope(&rows) >= floor, "{rows:?}");
    }

    #[test]
    fn proximity_vanishes_on_itself_and_is_linear_in_small_offsets() {
        let sol = solution(1);
        let t = 1e-3;
        let grid = residual_grid(&sol.params, t * 0.9, 1.0).unwrap();
        let u = eval_u_n(sol, t, grid.clone()).unwrap();
        let zero = proximity_norms(&u, sol, t).unwrap();
        assert_eq!(zero.h1, 0.0);
        assert_eq!(zero.weighted_l2, 0.0);
        let d = |h: f64| proximity_norms(&eval_u_n(sol, t + h, grid.clone()).unwrap(), sol, t).unwrap().h1;
        let (a, b) = (d(4e-6), d(2e-6));
        assert!(a > 0.0 && b > 0.0);
        assert!((b / a - 0.5).abs() < 0.02, "{a} {b}");
    }

    #[test]
    fn coarse_grids_and_late_times_are_rejected() {
        let sol = solution(1);
        let coarse = Arc::new(RadialGrid::uniform(1.0, 100).unwrap());
        assert!(matches!(eval_u_n(sol, 1e-3, coarse), Err(Error::ScaleUnresolved { .. })));
        let grid = residual_grid(&sol.params, 1e-3, 1.0).unwrap();
        assert!(matches!(eval_u_n(sol, 0.5, grid), Err(Error::Domain(_))));
        let big = sol.threshold();
        assert!(sol.window_ok(big) && !sol.window_ok(2.0 * big));
    }

    #[test]
    fn residual_decreases_like_t_to_the_order() {
        let sol = solution(1);
        let (rows, slope) = residual_ladder(sol, 4e-5, 3).unwrap();
        assert!((slope - 1.0).abs() < 0.05, "{rows:?}");
        assert!(residual_ladder(sol, 1e-3, 0).is_err());
    }

    #[test]
    fn residual_grids_have_positive_weights() {
        let p = BlowupParams::new(1.5, 0.3, 0.2, 1).unwrap();
        for (t, r_max) in [(0.1, 1.0), (1e-4, 1.0), (2e-5, 2.0), (0.05, 0.7)] {
            let g = residual_grid(&p, t, r_max).unwrap();
            let w = g.area_weights();
            assert!(w[1..].iter().all(|&x| x > 0.0), "t = {t}");
            assert_eq!(*g.nodes().last().unwrap(), r_max);
        }
    }
}
