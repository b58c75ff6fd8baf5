//! Time integration of `v_t = v x (Delta v + R^2 v / r^2)` on a fixed radial
//! grid, run diagnostics and the functionals `J0`, `J1`, `J3`.
//!
//! The semi-discrete flow is `v_i' = v_i x F_i(v)` with
//! `F_i = -(1 / (2 pi c_i)) dE_h/dv_i` for the discrete energy
//! `E_h = pi sum r_(i+1/2) |v_(i+1) - v_i|^2 / h_i + pi sum c_i (v1^2 + v2^2)_i / r_i^2`,
//! `c_i = r_i (h_(i-1) + h_i) / 2`. Implicit midpoint keeps `|v_i|` and `E_h`
//! exactly (up to the Newton tolerance). The end nodes are held fixed.

use crate::assembler::{eval_u_n, proximity_to, residual_r_n, ApproximateSolution, INNER_RESOLUTION};
use crate::error::{Error, Result};
use crate::geometry::{degree, equivariant_laplacian, sobolev_norm_kind, NormKind, SphereField, Vec3, VectorField, Weight, STENCIL};
use crate::grid::{DiffOp, RadialGrid};
use crate::harmonic::kappa;
use crate::modulation::fit_modulation;
use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConfig {
    /// Largest allowed `|dt| / h_min^2`.
    pub stability: f64,
    /// Newton stops when the largest node update is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Length of the diagnostics ring buffer.
    pub history: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { stability: 0.25, tol: 1e-12, max_iter: 50, history: 64 }
    }
}

/// Discrete operator data for one grid.
#[derive(Debug, Clone)]
pub struct FlowOperator {
    pub grid: Arc<RadialGrid>,
    /// Coupling to the right and left neighbours.
    a: Vec<f64>,
    b: Vec<f64>,
    inv_r2: Vec<f64>,
    /// Energy weights `c_i` and half-point radii over spacings.
    c: Vec<f64>,
    bond: Vec<f64>,
    pub h_min: f64,
}

impl FlowOperator {
    pub fn new(grid: Arc<RadialGrid>) -> Self {
        let r = grid.nodes();
        let n = r.len();
        let h: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
        let bond: Vec<f64> = (0..n - 1).map(|i| 0.5 * (r[i] + r[i + 1]) / h[i]).collect();
        let mut c = vec![0.0; n];
        let (mut a, mut b, mut inv_r2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 1..n {
            let span = if i + 1 < n { h[i - 1] + h[i] } else { h[i - 1] };
            c[i] = r[i] * span / 2.0;
            inv_r2[i] = 1.0 / (r[i] * r[i]);
            if i + 1 < n {
                a[i] = bond[i] / c[i];
                b[i] = bond[i - 1] / c[i];
            }
        }
        let h_min = h.iter().cloned().fold(f64::INFINITY, f64::min);
        FlowOperator { grid, a, b, inv_r2, c, bond, h_min }
    }

    /// `F_i` at interior nodes (zero at the ends).
    pub fn force(&self, v: &[Vec3]) -> Vec<Vec3> {
        let n = v.len();
        let mut f = vec![Vec3::zeros(); n];
        for i in 1..n - 1 {
            let lap = (v[i + 1] - v[i]) * self.a[i] - (v[i] - v[i - 1]) * self.b[i];
            f[i] = lap - Vec3::new(v[i][0], v[i][1], 0.0) * self.inv_r2[i];
        }
        f
    }

    pub fn energy(&self, v: &[Vec3]) -> f64 {
        let grad: f64 = (0..v.len() - 1).map(|i| self.bond[i] * (v[i + 1] - v[i]).norm_squared()).sum();
        let ang: f64 = (1..v.len()).map(|i| self.c[i] * (v[i][0].powi(2) + v[i][1].powi(2)) * self.inv_r2[i]).sum();
        PI * (grad + ang)
    }
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub energy: f64,
    pub degree: f64,
    /// Largest `| |v_i| - 1 |` removed by the post-step renormalization.
    pub renorm: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub v: SphereField,
    pub history: VecDeque<(f64, Diagnostics)>,
    pub op: Arc<FlowOperator>,
    pub config: FlowConfig,
}

impl FlowState {
    pub fn new(t: f64, v: SphereField, config: FlowConfig) -> Self {
        let op = Arc::new(FlowOperator::new(v.grid.clone()));
        FlowState { t, v, history: VecDeque::with_capacity(config.history), op, config }
    }

    pub fn energy(&self) -> f64 {
        self.op.energy(&self.v.samples)
    }

    /// Largest step allowed by the configured stability fraction.
    pub fn max_dt(&self) -> f64 {
        self.config.stability * self.op.h_min * self.op.h_min
    }

    fn record(&mut self, d: Diagnostics) {
        if self.history.len() == self.config.history {
            self.history.pop_front();
        }
        self.history.push_back((self.t, d));
    }
}

/// One implicit-midpoint step of size `dt` (negative steps go back in time).
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt.abs() <= state.max_dt()) || dt == 0.0 {
        return Err(Error::InvalidParams(format!("|dt| = {:e} exceeds the limit {:e}", dt.abs(), state.max_dt())));
    }
    let op = &state.op;
    let v = &state.v.samples;
    let n = v.len();
    let mut m = v.clone();
    let k = 2.0 / dt;
    let mut iterations = 0;
    let mut converged = false;
    let mut last = f64::INFINITY;
    while iterations < state.config.max_iter {
        iterations += 1;
        let f = op.force(&m);
        // block tridiagonal Newton system over nodes 1..n-1
        let len = n - 2;
        let mut dp: Vec<Matrix3<f64>> = Vec::with_capacity(len);
        let mut gp: Vec<Vec3> = Vec::with_capacity(len);
        let mut up: Vec<Matrix3<f64>> = Vec::with_capacity(len);
        for j in 0..len {
            let i = j + 1;
            let sm = skew(&m[i]);
            let g = (m[i] - v[i]) * k - m[i].cross(&f[i]);
            let proj = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
            let d = Matrix3::identity() * k + skew(&f[i]) + sm * (op.a[i] + op.b[i]) + sm * proj * op.inv_r2[i];
            let u = -sm * op.a[i];
            let l = -sm * op.b[i];
            if j == 0 {
                dp.push(d);
                gp.push(-g);
            } else {
                let inv = dp[j - 1].try_inverse().ok_or(Error::StepRejected { iterations, residual: f64::NAN })?;
                let w = l * inv;
                dp.push(d - w * up[j - 1]);
                gp.push(-g - w * gp[j - 1]);
            }
            up.push(u);
        }
        let mut delta = vec![Vec3::zeros(); len];
        for j in (0..len).rev() {
            let rhs = if j + 1 < len { gp[j] - up[j] * delta[j + 1] } else { gp[j] };
            let inv = dp[j].try_inverse().ok_or(Error::StepRejected { iterations, residual: f64::NAN })?;
            delta[j] = inv * rhs;
        }
        last = delta.iter().map(|d| d.amax()).fold(0.0, f64::max);
        if !last.is_finite() {
            break;
        }
        for j in 0..len {
            m[j + 1] += delta[j];
        }
        if last <= state.config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::StepRejected { iterations, residual: last });
    }
    let mut renorm: f64 = 0.0;
    let samples: Vec<Vec3> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                return v[i];
            }
            let x = m[i] * 2.0 - v[i];
            renorm = renorm.max((x.norm() - 1.0).abs());
            x.normalize()
        })
        .collect();
    let mut next = FlowState {
        t: state.t + dt,
        v: SphereField { grid: state.v.grid.clone(), samples, m: state.v.m },
        history: state.history.clone(),
        op: state.op.clone(),
        config: state.config,
    };
    let d = Diagnostics { energy: next.energy(), degree: degree(&next.v), renorm, newton_iterations: iterations };
    next.record(d);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// `dt = c h_min^2`.
    SpacingFraction(f64),
    Fixed(f64),
}

/// One sampled row of a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReportRow {
    pub t: f64,
    pub energy: f64,
    pub degree: f64,
    pub j0: f64,
    pub j1: f64,
    pub j3: f64,
    pub lambda_fit: f64,
    pub alpha_fit: f64,
    pub prox_h1: f64,
    pub prox_wl2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub steps: usize,
    pub dt: f64,
    /// Time at which the inner scale fell below the grid resolution.
    pub reach: Option<f64>,
    pub max_renorm: f64,
}

pub const REPORT_HEADER: &str = "t,energy,degree,J0,J1,J3,lambda_fit,alpha_fit,prox_H1,prox_wL2";

impl RunReport {
    pub fn write_csv(&self, w: impl Write) -> std::io::Result<()> {
        let rows = self.rows.iter().map(|r| [r.t, r.energy, r.degree, r.j0, r.j1, r.j3, r.lambda_fit, r.alpha_fit, r.prox_h1, r.prox_wl2]);
        crate::io::write_rows(w, REPORT_HEADER, rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JFunctionals {
    pub j0: f64,
    pub j1: f64,
    pub j3: f64,
}

fn kappa_weighted(f: &VectorField, lambda: f64) -> f64 {
    let aw = f.grid.area_weights();
    f.grid.nodes().iter().zip(&f.values).zip(&aw).map(|((r, v), w)| kappa(lambda * r) * v.norm_squared() * w).sum()
}

fn dirichlet(f: &VectorField) -> Result<f64> {
    Ok(sobolev_norm_kind(f, 1, Weight::None, NormKind::Homogeneous)?.powi(2))
}

/// `J0 = int dy |S|^2` and `J1 = int dy (|grad S|^2 + kappa |S|^2)` for
/// `S(y) = e^(-alpha R) s(y / lambda)`, from the lab-frame `s`.
pub fn j0_j1(s: &VectorField, lambda: f64) -> Result<(f64, f64)> {
    let l2: f64 = s.grid.area_weights().iter().zip(&s.values).map(|(w, v)| w * v.norm_squared()).sum();
    let j0 = lambda * lambda * l2;
    let j1 = dirichlet(s)? + lambda * lambda * kappa_weighted(s, lambda);
    Ok((j0, j1))
}

/// `Delta v + R^2 v / r^2` by the grid stencils.
fn map_laplacian_field(f: &VectorField, op: &DiffOp) -> Vec<Vec3> {
    let w: Vec<Complex64> = f.values.iter().map(|v| Complex64::new(v[0], v[1])).collect();
    let z: Vec<Complex64> = f.values.iter().map(|v| Complex64::new(v[2], 0.0)).collect();
    let lw = equivariant_laplacian(&f.grid, op, &w, 1);
    let lz = equivariant_laplacian(&f.grid, op, &z, 0);
    lw.iter().zip(&lz).map(|(a, b)| Vec3::new(a.re, a.im, b.re)).collect()
}

/// `J0`, `J1` and `J3` for the difference `s = u - u^(N)(t)` sampled on a grid.
/// `s_t` is taken from the flow: `(u^(N) + s) x Delta s + s x Delta u^(N) + r^(N)`.
pub fn functionals_j(s: &VectorField, sol: &ApproximateSolution, t: f64) -> Result<JFunctionals> {
    let p = &sol.params;
    let lambda = p.lambda(t);
    let (j0, j1) = j0_j1(s, lambda)?;
    let un = eval_u_n(sol, t, s.grid.clone())?;
    let res = residual_r_n(sol, t, s.grid.clone())?;
    let op = DiffOp::new(&s.grid, STENCIL);
    let ls = map_laplacian_field(s, &op);
    let lu = map_laplacian_field(&un.as_vector(), &op);
    let st: Vec<Vec3> = (0..s.values.len())
        .map(|i| (un.samples[i] + s.values[i]).cross(&ls[i]) + s.values[i].cross(&lu[i]) + res.field.values[i])
        .collect();
    let st = VectorField::new(s.grid.clone(), st, 1)?;
    let j3 = t.powf(2.0 + 4.0 * p.nu) * dirichlet(&st)? + t.powf(1.0 + 2.0 * p.nu) * kappa_weighted(&st, lambda);
    Ok(JFunctionals { j0, j1, j3 })
}

fn scale_collapsed(v: &SphereField, lambda: f64) -> bool {
    let scale = 1.0 / lambda;
    v.grid.max_spacing_below(scale) > scale / INNER_RESOLUTION
}

/// What the proximity columns of a run are measured against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    None,
    /// `u^(N)(t)`; also enables the `J` functionals.
    Approximate(&'a ApproximateSolution),
    /// A fixed field on the run grid.
    Fixed(&'a SphereField),
}

fn sample(state: &FlowState, reference: Reference) -> Result<ReportRow> {
    let fit = fit_modulation(&state.v).ok();
    let mut row = ReportRow {
        t: state.t,
        energy: state.energy(),
        degree: degree(&state.v),
        j0: f64::NAN,
        j1: f64::NAN,
        j3: f64::NAN,
        lambda_fit: fit.map_or(f64::NAN, |f| f.lambda),
        alpha_fit: fit.map_or(f64::NAN, |f| f.alpha),
        prox_h1: f64::NAN,
        prox_wl2: f64::NAN,
    };
    match reference {
        Reference::None => {}
        Reference::Approximate(sol) => {
            let un = eval_u_n(sol, state.t, state.v.grid.clone())?;
            let prox = proximity_to(&state.v, &un)?;
            row.prox_h1 = prox.h1;
            row.prox_wl2 = prox.weighted_l2;
            let j = functionals_j(&state.v.difference(&un)?, sol, state.t)?;
            row.j0 = j.j0;
            row.j1 = j.j1;
            row.j3 = j.j3;
        }
        Reference::Fixed(u) => {
            let prox = proximity_to(&state.v, u)?;
            row.prox_h1 = prox.h1;
            row.prox_wl2 = prox.weighted_l2;
        }
    }
    Ok(row)
}

/// Steps from `state.t` to `t_end`, sampling diagnostics after steps
/// 0, 1, 2, 4, 8, ... and the last one. Stops early (and records `reach`)
/// when the fitted bubble scale is no longer resolved by the grid.
pub fn integrate(state: FlowState, t_end: f64, policy: DtPolicy, reference: Reference) -> Result<(FlowState, RunReport)> {
    let span = t_end - state.t;
    if span == 0.0 || !span.is_finite() {
        return Err(Error::InvalidParams("t_end must differ from the start time".into()));
    }
    let target = match policy {
        DtPolicy::SpacingFraction(c) => c * state.op.h_min * state.op.h_min,
        DtPolicy::Fixed(dt) => dt.abs(),
    };
    if !(target > 0.0) {
        return Err(Error::InvalidParams("time step must be positive".into()));
    }
    let steps = (span.abs() / target).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    let t0 = state.t;
    let mut rows = vec![sample(&state, reference)?];
    let mut report = RunReport { rows: Vec::new(), steps: 0, dt, reach: None, max_renorm: 0.0 };
    let mut state = state;
    let mut next_sample = 1;
    for k in 1..=steps {
        state = step(&state, dt)?;
        state.t = t0 + k as f64 * dt;
        report.steps = k;
        if let Some((_, d)) = state.history.back() {
            report.max_renorm = report.max_renorm.max(d.renorm);
        }
        if k == next_sample || k == steps {
            let row = sample(&state, reference)?;
            let collapsed = row.lambda_fit.is_finite() && scale_collapsed(&state.v, row.lambda_fit);
            rows.push(row);
            next_sample *= 2;
            if collapsed {
                report.reach = Some(state.t);
                break;
            }
        }
    }
    report.rows = rows;
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::Frame;
    use crate::quad::gauss5;

    fn grid() -> Arc<RadialGrid> {
        Arc::new(RadialGrid::geometric(30.0, 400, 2e-2).unwrap())
    }

    fn phi(g: &Arc<RadialGrid>) -> SphereField {
        SphereField::from_fn(g.clone(), 1, |r| Frame::at(r).q[0]).unwrap()
    }

    fn perturbed(g: &Arc<RadialGrid>) -> SphereField {
        SphereField::from_fn(g.clone(), 1, |r| {
            let bump = 0.3 * r * (-(r - 2.0).powi(2)).exp();
            (Frame::at(r).q[0] + Vec3::new(0.0, bump, 0.5 * bump)).normalize()
        })
        .unwrap()
    }

    fn max_diff(a: &SphereField, b: &SphereField) -> f64 {
        a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_map_is_a_fixed_point() {
        let s = FlowState::new(0.0, SphereField::constant(grid(), Vec3::z()), FlowConfig::default());
        let next = step(&s, s.max_dt()).unwrap();
        assert_eq!(next.v.samples, s.v.samples);
    }

    #[test]
    fn harmonic_map_is_stationary() {
        // the drift per step is dt * O(h_min) from the first interior node
        let g = Arc::new(RadialGrid::geometric(30.0, 2000, 1e-3).unwrap());
        let s = FlowState::new(0.0, phi(&g), FlowConfig::default());
        let next = step(&s, s.max_dt()).unwrap();
        let d = max_diff(&next.v, &s.v);
        assert!(d < 1e-9, "{d:e}");
    }

    #[test]
    fn energy_norm_and_degree_are_conserved() {
        let g = grid();
        let mut s = FlowState::new(0.0, perturbed(&g), FlowConfig::default());
        let (e0, d0) = (s.energy(), degree(&s.v));
        let dt = s.max_dt();
        let mut renorm: f64 = 0.0;
        for _ in 0..1000 {
            s = step(&s, dt).unwrap();
            renorm = renorm.max(s.history.back().unwrap().1.renorm);
        }
        assert!(((s.energy() - e0) / e0).abs() < 1e-6, "{} {}", s.energy(), e0);
        assert!((degree(&s.v) - d0).abs() < 1e-6);
        assert!(s.v.max_norm_defect() < 1e-10 && renorm < 1e-10);
        assert!(max_diff(&s.v, &perturbed(&g)) > 1e-6);
        assert_eq!(s.history.len(), s.config.history);
    }

    #[test]
    fn steps_are_time_symmetric() {
        let g = grid();
        let s = FlowState::new(0.0, perturbed(&g), FlowConfig::default());
        let dt = s.max_dt();
        let back = step(&step(&s, dt).unwrap(), -dt).unwrap();
        assert!(max_diff(&back.v, &s.v) < 1e-10);
    }

    #[test]
    fn steps_commute_with_rotations() {
        let g = grid();
        let rot = |v: &SphereField, b: f64| {
            let (sn, cs) = b.sin_cos();
            let samples = v.samples.iter().map(|x| Vec3::new(cs * x[0] - sn * x[1], sn * x[0] + cs * x[1], x[2])).collect();
            SphereField { grid: v.grid.clone(), samples, m: v.m }
        };
        let s = FlowState::new(0.0, perturbed(&g), FlowConfig::default());
        let dt = s.max_dt();
        let a = rot(&step(&s, dt).unwrap().v, 0.8);
        let b = step(&FlowState::new(0.0, rot(&s.v, 0.8), FlowConfig::default()), dt).unwrap().v;
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn oversized_or_unsolved_steps_are_rejected() {
        let g = grid();
        let s = FlowState::new(0.0, perturbed(&g), FlowConfig::default());
        assert!(step(&s, 10.0 * s.max_dt()).is_err());
        let strict = FlowState::new(0.0, perturbed(&g), FlowConfig { max_iter: 1, ..FlowConfig::default() });
        assert!(matches!(step(&strict, strict.max_dt()), Err(Error::StepRejected { .. })));
    }

    #[test]
    fn constant_run_has_flat_diagnostics() {
        let s = FlowState::new(1.0, SphereField::constant(grid(), Vec3::z()), FlowConfig::default());
        let dt = s.max_dt();
        let (end, rep) = integrate(s, 1.0 + 10.0 * dt, DtPolicy::SpacingFraction(0.25), Reference::None).unwrap();
        assert!((end.t - (1.0 + 10.0 * dt)).abs() < 1e-15);
        let ts: Vec<f64> = rep.rows.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 6);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!(rep.rows.iter().all(|r| r.energy == 0.0 && r.degree == 0.0));
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some(REPORT_HEADER));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn bubble_run_tracks_the_fitted_scale() {
        let g = grid();
        let s = FlowState::new(0.0, phi(&g), FlowConfig::default());
        let (_, rep) = integrate(s, 20.0 * 0.25 * 4e-4, DtPolicy::SpacingFraction(0.25), Reference::None).unwrap();
        assert!(rep.reach.is_none());
        for r in &rep.rows {
            assert!((r.lambda_fit - 1.0).abs() < 1e-3 && r.alpha_fit.abs() < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn l2_functional_matches_a_gaussian_integral() {
        let g = Arc::new(RadialGrid::geometric(10.0, 2000, 1e-3).unwrap());
        let eps = 0.1;
        let values = g.nodes().iter().map(|&r| Vec3::new(eps * r * (-r * r).exp(), 0.0, 0.0)).collect();
        let s = VectorField::new(g, values, 1).unwrap();
        let lambda = 3.0;
        let (j0, _) = j0_j1(&s, lambda).unwrap();
        // int_0^inf r^3 e^(-2 r^2) dr = 1/8
        let want = lambda * lambda * 2.0 * PI * eps * eps / 8.0;
        assert!((j0 - want).abs() < 0.01 * want);
    }

    #[test]
    fn far_field_potential_term_is_negligible() {
        let lambda = 10.0;
        let (r0, w) = (20.0 / lambda, 2.0 / lambda);
        let g = Arc::new(RadialGrid::uniform(5.0, 4001).unwrap());
        let f = |r: f64| 0.1 * (-((r - r0) / w).powi(2)).exp();
        let values = g.nodes().iter().map(|&r| Vec3::new(0.0, 0.0, f(r))).collect();
        let s = VectorField::new(g, values, 1).unwrap();
        let (_, j1) = j0_j1(&s, lambda).unwrap();
        let df = |r: f64| -2.0 * (r - r0) / (w * w) * f(r);
        let grad: f64 = 2.0 * PI * (0..500).map(|k| gauss5(|r: f64| r * df(r).powi(2), k as f64 * 0.01, (k + 1) as f64 * 0.01)).sum::<f64>();
        assert!((j1 - grad).abs() < 0.01 * grad, "{j1} {grad}");
    }
}
