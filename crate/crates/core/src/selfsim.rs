//! Self-similar layer: profiles `W_{j,l}(y)` solving `(L - mu_j) W_{j,l} = F_{j,l}`
//! with `L = -Delta + y^-2 + (i/2) y d/dy`, for `j <= 1`.
//!
//! Each profile starts as a Laurent series at the origin, hands off to an
//! adaptive march at `y = 0.5` and is stored at uniform checkpoints.

use crate::error::{Error, Result};
use crate::fit::{fit_basis, lstsq};
use crate::geometry::project_point;
use crate::inner::InnerExpansion;
use crate::jet::{self, CJet};
use crate::laurent::{solve_local, Laurent};
use crate::ode::{Dopri, OdeOptions};
use crate::params::BlowupParams;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

type C = Complex64;

/// Series-to-march handoff radius.
pub const Y_HANDOFF: f64 = 0.5;
/// Largest radius at which the near-origin series may be evaluated.
pub const SERIES_LIMIT: f64 = 2.0;
pub const DEFAULT_Y_MAX: f64 = 100.0;
const SERIES_HI: i32 = 81;
const CHECK_Y: f64 = 0.6;
const CHECKPOINT_DY: f64 = 0.005;
/// Samples per period of `e^(i y^2/4)` required at the outer fit boundary.
const FIT_SAMPLES_PER_PERIOD: f64 = 16.0;
const HANDOFF_TOL: f64 = 1e-9;
/// Radius where the asymptotic modes seed the inward connection.
const CONNECT_FAR: f64 = 12.0;
const CONNECT_NEAR: f64 = 1.0;

fn cr(x: f64) -> C {
    C::new(x, 0.0)
}

/// `kappa_j = -i/4 - mu_j/2`.
pub fn kappa(params: &BlowupParams, j: usize) -> C {
    C::new(0.0, -0.25) - params.mu(j) / 2.0
}

/// Near-origin basis of `(L - mu_j) f = 0`: `e1 = y + O(y^3)` and
/// `e2 = 1/y + kappa_j e1 ln y + O(y^3)`.
#[derive(Debug, Clone)]
pub struct NearZeroBasis {
    pub kappa: C,
    e1: Laurent,
    e2_regular: Laurent,
}

impl NearZeroBasis {
    pub fn new(params: &BlowupParams, j: usize) -> Self {
        let mu = params.mu(j);
        let k = kappa(params, j);
        let e1 = solve_local(mu, &Laurent::zeros(1, SERIES_HI), cr(1.0)).series;
        let d = e1.deriv().shift(-1).scale(cr(2.0));
        let src = d
            .add(&Laurent::monomial(-1, cr(-2.0), SERIES_HI))
            .add(&e1.scale(C::new(0.0, -0.5)))
            .scale(k);
        let e2_regular = solve_local(mu, &src, C::new(0.0, 0.0)).series;
        NearZeroBasis { kappa: k, e1, e2_regular }
    }

    /// Jets of `e1` and `e2` at `0 < y <= 2`.
    pub fn eval(&self, y: f64) -> Result<(CJet, CJet)> {
        check_series_window(y)?;
        let (e1, _) = self.e1.eval(y);
        let (g, _) = self.e2_regular.eval(y);
        let l = y.ln();
        let log_e1 = [e1[0] * l, e1[1] * l + e1[0] / y, e1[2] * l + e1[1] * (2.0 / y) - e1[0] / (y * y)];
        let inv = [cr(1.0 / y), cr(-1.0 / (y * y)), cr(2.0 / (y * y * y))];
        let mut e2 = jet::czero();
        for i in 0..3 {
            e2[i] = inv[i] + self.kappa * log_e1[i] + g[i];
        }
        Ok((e1, e2))
    }
}

fn check_series_window(y: f64) -> Result<()> {
    if !(y > 0.0 && y <= SERIES_LIMIT) {
        return Err(Error::SeriesDivergence(y));
    }
    Ok(())
}

pub fn basis_near_zero(params: &BlowupParams, j: usize, y: f64) -> Result<(CJet, CJet)> {
    NearZeroBasis::new(params, j).eval(y)
}

/// Profiles in solve order; `slot` maps `(j, l)` to storage.
pub const PROFILES: [(usize, usize); 6] = [(0, 1), (0, 0), (1, 3), (1, 2), (1, 1), (1, 0)];

pub fn slot(j: usize, l: usize) -> usize {
    if j == 0 {
        l
    } else {
        2 + l
    }
}

fn slot_count(j_max: usize) -> usize {
    if j_max == 0 {
        2
    } else {
        6
    }
}

/// Minimal algebra shared by Laurent series and pointwise values, so the
/// forcing is written once.
trait Alg: Clone {
    fn zero_like(&self) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn sc(&self, a: C) -> Self;
    fn cj(&self) -> Self;
    fn yp(&self, k: i32) -> Self;
}

impl Alg for Laurent {
    fn zero_like(&self) -> Self {
        Laurent::zeros(self.lo, self.hi)
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn sc(&self, a: C) -> Self {
        self.scale(a)
    }
    fn cj(&self) -> Self {
        self.conj()
    }
    fn yp(&self, k: i32) -> Self {
        self.shift(k)
    }
}

#[derive(Debug, Clone, Copy)]
struct At {
    v: C,
    y: f64,
}

impl Alg for At {
    fn zero_like(&self) -> Self {
        At { v: C::new(0.0, 0.0), y: self.y }
    }
    fn plus(&self, o: &Self) -> Self {
        At { v: self.v + o.v, y: self.y }
    }
    fn times(&self, o: &Self) -> Self {
        At { v: self.v * o.v, y: self.y }
    }
    fn sc(&self, a: C) -> Self {
        At { v: self.v * a, y: self.y }
    }
    fn cj(&self) -> Self {
        At { v: self.v.conj(), y: self.y }
    }
    fn yp(&self, k: i32) -> Self {
        At { v: self.v * self.y.powi(k), y: self.y }
    }
}

/// Nonlinear source of the `j = 1` equations: `-2 (conj(W00) P_l + conj(W01) P_{l-1})`.
fn nonlinear_source<A: Alg>(l: usize, w: &[A], dw: &[A]) -> A {
    let (c0, d0) = (&w[slot(0, 0)], &w[slot(0, 1)]);
    let a = dw[slot(0, 0)].plus(&d0.yp(-1));
    let b = &dw[slot(0, 1)];
    let m2 = cr(-2.0);
    let p = |k: usize| -> A {
        match k {
            0 => a.times(&a).plus(&c0.times(c0).yp(-2).sc(cr(-1.0))),
            1 => a.times(b).sc(cr(2.0)).plus(&c0.times(d0).yp(-2).sc(m2)),
            _ => b.times(b).plus(&d0.times(d0).yp(-2).sc(cr(-1.0))),
        }
    };
    let mut g = c0.zero_like();
    if l <= 2 {
        g = g.plus(&c0.cj().times(&p(l)));
    }
    if (1..=3).contains(&l) {
        g = g.plus(&d0.cj().times(&p(l - 1)));
    }
    g.sc(m2)
}

/// Right side `F_{j,l}` of the layer equations.
fn forcing<A: Alg>(nu: f64, j: usize, l: usize, w: &[A], dw: &[A]) -> A {
    forcing_with(nu, j, l, w, dw, true)
}

fn forcing_with<A: Alg>(nu: f64, j: usize, l: usize, w: &[A], dw: &[A], nonlinear: bool) -> A {
    let top = 2 * j + 1;
    let mut f = if j == 1 && nonlinear { nonlinear_source(l, w, dw) } else { w[0].zero_like() };
    if l < top {
        let s = slot(j, l + 1);
        let m = (l + 1) as f64;
        f = f.plus(&w[s].sc(C::new(0.0, -m * (0.5 + nu)))).plus(&dw[s].yp(-1).sc(cr(2.0 * m)));
    }
    if l + 2 <= top {
        f = f.plus(&w[slot(j, l + 2)].yp(-2).sc(cr(((l + 1) * (l + 2)) as f64)));
    }
    f
}

/// Laurent profiles for the given boundary data and the two free
/// coefficients of `W_{1,3}`, `W_{1,2}`; returns the `y^-3` constraints of
/// `W_{1,1}`, `W_{1,0}`.
fn series_profiles(params: &BlowupParams, j_max: usize, a: &[C], b: &[C], free: [C; 2]) -> (Vec<Laurent>, [C; 2]) {
    let n = slot_count(j_max);
    let mut w = vec![Laurent::zeros(1, SERIES_HI); n];
    let mut dw = vec![Laurent::zeros(0, SERIES_HI - 1); n];
    let mut cons = [C::new(0.0, 0.0); 2];
    for &(j, l) in PROFILES.iter().filter(|p| p.0 <= j_max) {
        let s = forcing(params.nu, j, l, &w, &dw);
        let c1 = match (j, l) {
            (0, 1) => a[0],
            (0, 0) => b[0],
            (1, 3) => free[0],
            (1, 2) => free[1],
            (1, 1) => a[1],
            _ => b[1],
        };
        let sol = solve_local(params.mu(j), &s, c1);
        match (j, l) {
            (1, 1) => cons[0] = sol.constraint,
            (1, 0) => cons[1] = sol.constraint,
            _ => {}
        }
        dw[slot(j, l)] = sol.series.deriv();
        w[slot(j, l)] = sol.series;
    }
    (w, cons)
}

/// Coefficients of `y` in `W_{1,3}` and `W_{1,2}` that remove the `y^-3`
/// singularities of `W_{1,1}` and `W_{1,0}`. They depend on `a_0`, `b_0` only.
pub fn solvability_constants(params: &BlowupParams, a: &[C], b: &[C]) -> Result<[C; 2]> {
    let zero = C::new(0.0, 0.0);
    let a = [a[0], a.get(1).copied().unwrap_or(zero)];
    let b = [b[0], b.get(1).copied().unwrap_or(zero)];
    let r0 = series_profiles(params, 1, &a, &b, [zero; 2]).1;
    let r1 = series_profiles(params, 1, &a, &b, [cr(1.0), zero]).1;
    let r2 = series_profiles(params, 1, &a, &b, [zero, cr(1.0)]).1;
    let m = [[r1[0] - r0[0], r2[0] - r0[0]], [r1[1] - r0[1], r2[1] - r0[1]]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    if scale > 0.0 && det.norm() > 1e-12 * scale * scale {
        Ok([(-r0[0] * m[1][1] + r0[1] * m[0][1]) / det, (-r0[1] * m[0][0] + r0[0] * m[1][0]) / det])
    } else if r0[0].norm() + r0[1].norm() > 1e-12 {
        Err(Error::MatchFailure("solvability system for j = 1 is singular".into()))
    } else {
        Ok([zero; 2])
    }
}

/// The profile table `W_{j,l}` for `j <= j_max`.
#[derive(Debug, Clone)]
pub struct SelfSimilarLayer {
    pub params: BlowupParams,
    pub j_max: usize,
    pub mu: Vec<C>,
    pub a: Vec<C>,
    pub b: Vec<C>,
    /// Coefficients of `y` in `W_{1,3}` and `W_{1,2}`, fixed by solvability.
    pub solvability: [C; 2],
    pub y_max: f64,
    /// Relative series/march disagreement at the check radius.
    pub handoff_mismatch: f64,
    series: Vec<Laurent>,
    ys: Vec<f64>,
    states: Vec<Vec<C>>,
}

fn rhs_system(params: &BlowupParams, j_max: usize) -> impl Fn(f64, &[C], &mut [C]) + '_ {
    rhs_system_with(params, j_max, true)
}

/// First-order form; `nonlinear = false` drops the `j = 1` sources.
pub fn rhs_system_with(params: &BlowupParams, j_max: usize, nonlinear: bool) -> impl Fn(f64, &[C], &mut [C]) + '_ {
    let n = slot_count(j_max);
    move |y: f64, s: &[C], d: &mut [C]| {
        let w: Vec<At> = (0..n).map(|k| At { v: s[2 * k], y }).collect();
        let dw: Vec<At> = (0..n).map(|k| At { v: s[2 * k + 1], y }).collect();
        for &(j, l) in PROFILES.iter().filter(|p| p.0 <= j_max) {
            let k = slot(j, l);
            let f = forcing_with(params.nu, j, l, &w, &dw, nonlinear).v;
            let (v, dv) = (s[2 * k], s[2 * k + 1]);
            d[2 * k] = dv;
            d[2 * k + 1] = -dv / y + v / (y * y) + C::new(0.0, 0.5 * y) * dv - params.mu(j) * v - f;
        }
    }
}

/// Builds the layer for boundary data `a_j`, `b_j` (`j <= j_max <= 1`),
/// marching out to `y_max`.
pub fn build_selfsim(params: &BlowupParams, j_max: usize, a: &[C], b: &[C], y_max: f64) -> Result<SelfSimilarLayer> {
    if j_max > 1 {
        return Err(Error::InvalidParams("self-similar layers beyond j = 1 are not implemented".into()));
    }
    if a.len() <= j_max || b.len() <= j_max {
        return Err(Error::InvalidParams("boundary data missing for a layer".into()));
    }
    if !(y_max > CHECK_Y) {
        return Err(Error::InvalidParams(format!("y_max = {y_max} too small")));
    }
    let zero = C::new(0.0, 0.0);
    let mut free = [zero; 2];
    let series = if j_max == 1 {
        free = solvability_constants(params, a, b)?;
        let (s, r) = series_profiles(params, 1, a, b, free);
        let (_, r0) = series_profiles(params, 1, a, b, [zero; 2]);
        let size = r0[0].norm().max(r0[1].norm()).max(1.0);
        if r[0].norm().max(r[1].norm()) > 1e-9 * size {
            return Err(Error::MatchFailure(format!("y^-3 constraints left at {:e}", r[0].norm().max(r[1].norm()))));
        }
        s
    } else {
        series_profiles(params, 0, a, b, free).0
    };
    let n = slot_count(j_max);
    let mut state = vec![zero; 2 * n];
    for k in 0..n {
        let (v, _) = series[k].eval(Y_HANDOFF);
        state[2 * k] = v[0];
        state[2 * k + 1] = v[1];
    }
    let f = rhs_system(params, j_max);
    let mut stepper = Dopri::new(OdeOptions::default(), 1e-3);
    let count = ((y_max - Y_HANDOFF) / CHECKPOINT_DY).ceil() as usize;
    let mut ys = Vec::with_capacity(count + 1);
    let mut states = Vec::with_capacity(count + 1);
    ys.push(Y_HANDOFF);
    states.push(state.clone());
    let mut y = Y_HANDOFF;
    let mut handoff_mismatch = 0.0;
    for i in 1..=count {
        let y1 = (Y_HANDOFF + i as f64 * CHECKPOINT_DY).min(y_max);
        stepper.advance(&f, y, &mut state, y1)?;
        y = y1;
        if (y - CHECK_Y).abs() < 1e-12 {
            let mut diff: f64 = 0.0;
            let mut size: f64 = 0.0;
            for k in 0..n {
                let (v, _) = series[k].eval(y);
                diff = diff.max((v[0] - state[2 * k]).norm()).max((v[1] - state[2 * k + 1]).norm());
                size = size.max(v[0].norm()).max(v[1].norm());
            }
            handoff_mismatch = if size > 0.0 { diff / size } else { diff };
            if handoff_mismatch > HANDOFF_TOL {
                return Err(Error::MatchFailure(format!("series/march handoff mismatch {handoff_mismatch:e}")));
            }
        }
        ys.push(y);
        states.push(state.clone());
    }
    Ok(SelfSimilarLayer {
        params: *params,
        j_max,
        mu: (0..=j_max).map(|j| params.mu(j)).collect(),
        a: a[..=j_max].to_vec(),
        b: b[..=j_max].to_vec(),
        solvability: free,
        y_max,
        handoff_mismatch,
        series,
        ys,
        states,
    })
}

/// The `j = 0` pair `(W_{0,1}, W_{0,0})` for boundary data `a0`, `b0`.
pub fn solve_layer0(params: &BlowupParams, a0: C, b0: C, y_max: f64) -> Result<SelfSimilarLayer> {
    build_selfsim(params, 0, &[a0], &[b0], y_max)
}

/// `W_ss` and its derivatives at one point.
#[derive(Debug, Clone, Copy)]
pub struct SsPoint {
    /// Value and two y-derivatives.
    pub w: CJet,
    /// Time derivative at fixed y.
    pub w_t: C,
}

impl SelfSimilarLayer {
    pub fn slots(&self) -> usize {
        slot_count(self.j_max)
    }

    /// Laurent series of profile `(j, l)` near the origin.
    pub fn series(&self, j: usize, l: usize) -> &Laurent {
        &self.series[slot(j, l)]
    }

    /// Checkpoint radii of the march.
    pub fn checkpoints(&self) -> &[f64] {
        &self.ys
    }

    /// Value and derivative of profile `(j, l)` at checkpoint `i`.
    pub fn checkpoint_value(&self, i: usize, j: usize, l: usize) -> [C; 2] {
        let k = slot(j, l);
        [self.states[i][2 * k], self.states[i][2 * k + 1]]
    }

    /// Jets of all profiles at `y`, indexed by slot.
    pub fn eval_all(&self, y: f64) -> Result<Vec<CJet>> {
        self.eval_all_with(y, OdeOptions { rtol: 1e-13, atol: 1e-300, ..OdeOptions::default() })
    }

    fn eval_all_with(&self, y: f64, opts: OdeOptions) -> Result<Vec<CJet>> {
        if !(y > 0.0 && y <= self.y_max) {
            return Err(Error::Domain(format!("y = {y} outside (0, {}]", self.y_max)));
        }
        let n = self.slots();
        if y <= Y_HANDOFF {
            return Ok(self.series.iter().map(|s| s.eval(y).0).collect());
        }
        let i = (((y - Y_HANDOFF) / CHECKPOINT_DY).round() as usize).min(self.ys.len() - 1);
        let mut state = self.states[i].clone();
        let f = rhs_system(&self.params, self.j_max);
        let span = (y - self.ys[i]).abs();
        if span > 0.0 {
            Dopri::new(opts, span).advance(&f, self.ys[i], &mut state, y)?;
        }
        let mut d = vec![C::new(0.0, 0.0); 2 * n];
        f(y, &state, &mut d);
        Ok((0..n).map(|k| [state[2 * k], state[2 * k + 1], d[2 * k + 1]]).collect())
    }

    /// Jet of profile `(j, l)` at `y`.
    pub fn profile(&self, j: usize, l: usize, y: f64) -> Result<CJet> {
        Ok(self.eval_all(y)?[slot(j, l)])
    }

    /// Right side `F_{j,l}(y)` evaluated from the stored profiles.
    pub fn forcing_at(&self, j: usize, l: usize, y: f64) -> Result<C> {
        let all = self.eval_all(y)?;
        let w: Vec<At> = all.iter().map(|v| At { v: v[0], y }).collect();
        let dw: Vec<At> = all.iter().map(|v| At { v: v[1], y }).collect();
        Ok(forcing(self.params.nu, j, l, &w, &dw).v)
    }

    /// `W_ss = sum_j t^(nu(2j+1)) sum_l (ln y - nu ln t)^l W_{j,l}(y)`.
    pub fn w_ss(&self, y: f64, t: f64) -> Result<SsPoint> {
        let all = self.eval_all(y)?;
        let nu = self.params.nu;
        let big_l = y.ln() - nu * t.ln();
        let mut w = jet::czero();
        let mut w_t = C::new(0.0, 0.0);
        for j in 0..=self.j_max {
            let p = nu * (2 * j + 1) as f64;
            let tp = t.powf(p);
            for l in 0..=2 * j + 1 {
                let prof = all[slot(j, l)];
                let lf = l as f64;
                let pw = |k: i32| if k < 0 { 0.0 } else { big_l.powi(k) };
                let lj = [
                    cr(pw(l as i32)),
                    cr(lf * pw(l as i32 - 1) / y),
                    cr((lf * (lf - 1.0) * pw(l as i32 - 2) - lf * pw(l as i32 - 1)) / (y * y)),
                ];
                let term = jet::mul_cc(lj, prof);
                for i in 0..3 {
                    w[i] += term[i] * tp;
                }
                w_t += prof[0] * (p * tp / t * pw(l as i32) - tp * lf * pw(l as i32 - 1) * nu / t);
            }
        }
        Ok(SsPoint { w, w_t })
    }
}

/// Growing (`y^sigma`) or oscillatory (`e^(i y^2/4) y^tau`) asymptotic
/// solution of the homogeneous layer-`j` system with leading coefficients
/// `lead[m]` of the log-free representation; returns `(W_l, W_l')` for
/// `l = 0..=2j+1`.
pub fn asymptotic_mode(params: &BlowupParams, j: usize, oscillatory: bool, lead: &[C], y: f64) -> Vec<[C; 2]> {
    let top = 2 * j + 1;
    let nu = params.nu;
    let sigma = params.sigma(j);
    let (expo, sign) = if oscillatory { (-sigma - 2.0, 1.0) } else { (sigma, -1.0) };
    // -i k w_k = X (growing), i k v_k = X (oscillatory)
    let step = if oscillatory { C::new(0.0, -1.0) } else { C::new(0.0, 1.0) };
    let mut coef: Vec<C> = (0..=top).map(|m| lead.get(m).copied().unwrap_or_default()).collect();
    let mut hat = vec![[C::new(0.0, 0.0); 2]; top + 1];
    let y2 = y * y;
    let base = C::new(y, 0.0).powc(expo);
    let osc = if oscillatory { C::new(0.0, y2 / 4.0).exp() } else { cr(1.0) };
    let mut prev_size = f64::INFINITY;
    for k in 0..200usize {
        let e = expo - 2.0 * k as f64;
        let pk = y.powi(-2 * k as i32);
        let mut size: f64 = 0.0;
        for m in 0..=top {
            let v = coef[m] * pk;
            size = size.max(v.norm());
            hat[m][0] += v;
            hat[m][1] += v * (e / y) + if oscillatory { v * C::new(0.0, y / 2.0) } else { C::new(0.0, 0.0) };
        }
        if size == 0.0 || size > prev_size || size < 1e-17 * hat.iter().map(|h| h[0].norm()).fold(0.0, f64::max) {
            break;
        }
        prev_size = size;
        let kk = (k + 1) as f64;
        let mut next = vec![C::new(0.0, 0.0); top + 1];
        for m in 0..=top {
            let q = expo - 2.0 * kk + 2.0;
            let mf = m as f64;
            let mut x = coef[m] * (q * q - 1.0);
            if m < top {
                x += coef[m + 1] * q * (2.0 * (mf + 1.0));
            }
            if m + 1 < top {
                x += coef[m + 2] * ((mf + 1.0) * (mf + 2.0));
            }
            next[m] = step * x / kk;
        }
        coef = next;
    }
    for h in hat.iter_mut() {
        h[1] = (h[1] * base) * osc;
        h[0] = (h[0] * base) * osc;
    }
    let a = y.ln();
    let kap = 1.0 - sign / (2.0 * nu);
    let mut out = vec![[C::new(0.0, 0.0); 2]; top + 1];
    for l in 0..=top {
        let pref = (sign / (2.0 * nu)).powi(l as i32);
        for m in l..=top {
            let n = (m - l) as i32;
            let c = binom(m, l) * pref * kap.powi(n);
            let an = a.powi(n);
            let dan = if n > 0 { n as f64 * a.powi(n - 1) / y } else { 0.0 };
            out[l][0] += hat[m][0] * (c * an);
            out[l][1] += hat[m][1] * (c * an) + hat[m][0] * (c * dan);
        }
    }
    out
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Far-field coefficients of each layer: `beta0[j][l]` multiplies the growing
/// mode and `beta1[j][l]` the oscillatory one.
#[derive(Debug, Clone)]
pub struct FarCoefficients {
    pub beta0: Vec<Vec<C>>,
    pub beta1: Vec<Vec<C>>,
    /// Relative reconstruction error per layer.
    pub residual: Vec<f64>,
}

/// Homogeneous `j = 0` system, integrated inward from the asymptotic modes.
fn connection_basis(params: &BlowupParams, y_near: f64) -> Result<[[C; 4]; 4]> {
    let f = rhs_system(params, 0);
    let mut cols = [[C::new(0.0, 0.0); 4]; 4];
    for (c, (osc, m)) in [(false, 0), (false, 1), (true, 0), (true, 1)].iter().enumerate() {
        let mut lead = [C::new(0.0, 0.0); 2];
        lead[*m] = cr(1.0);
        let v = asymptotic_mode(params, 0, *osc, &lead, CONNECT_FAR);
        let mut s = vec![v[0][0], v[0][1], v[1][0], v[1][1]];
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-300, ..OdeOptions::default() };
        Dopri::new(opts, 1e-3).advance(&f, CONNECT_FAR, &mut s, y_near)?;
        cols[c] = [s[0], s[1], s[2], s[3]];
    }
    Ok(cols)
}

/// Coefficients `(beta0(0,0), beta0(0,1), beta1(0,0), beta1(0,1))` of the
/// `j = 0` solution with data `(W00, W00', W01, W01')` at `y = 1`.
pub fn connect_layer0(params: &BlowupParams, data: [C; 4]) -> Result<[C; 4]> {
    let cols = connection_basis(params, CONNECT_NEAR)?;
    let m = DMatrix::from_fn(4, 4, |i, j| cols[j][i]);
    let fit = lstsq(&m, &DVector::from_column_slice(&data), 1e12)?;
    Ok([fit.coeffs[0], fit.coeffs[1], fit.coeffs[2], fit.coeffs[3]])
}

/// Extracts the far-field coefficients of every layer.
///
/// `j = 0` is connected exactly through the asymptotic modes; `j = 1` is fitted
/// against the growing family on the outer third of the march. The `j = 1`
/// oscillatory part sits far below the nonlinear terms and is reported as zero.
pub fn far_field_fit(layer: &SelfSimilarLayer) -> Result<FarCoefficients> {
    let p = &layer.params;
    if layer.y_max < 20.0 {
        return Err(Error::Domain(format!("far-field fit needs y_max >= 20, got {}", layer.y_max)));
    }
    let near = layer.eval_all(CONNECT_NEAR)?;
    let data = [near[slot(0, 0)][0], near[slot(0, 0)][1], near[slot(0, 1)][0], near[slot(0, 1)][1]];
    let beta = connect_layer0(p, data)?;
    let mut out = FarCoefficients {
        beta0: vec![vec![beta[0], beta[1]]],
        beta1: vec![vec![beta[2], beta[3]]],
        residual: vec![],
    };
    let y_chk = 0.5 * (CONNECT_FAR + layer.y_max);
    let g = asymptotic_mode(p, 0, false, &beta[..2], y_chk);
    let o = asymptotic_mode(p, 0, true, &beta[2..], y_chk);
    let marched = layer.eval_all(y_chk)?;
    let mut err: f64 = 0.0;
    let mut size: f64 = 0.0;
    for l in 0..2 {
        err = err.max((g[l][0] + o[l][0] - marched[slot(0, l)][0]).norm());
        size = size.max(marched[slot(0, l)][0].norm());
    }
    out.residual.push(if size > 0.0 { err / size } else { err });
    if layer.j_max >= 1 {
        let (b0, res) = fit_growing(layer, 1)?;
        out.beta0.push(b0);
        out.beta1.push(vec![C::new(0.0, 0.0); 4]);
        out.residual.push(res);
    }
    Ok(out)
}

/// Joint least-squares fit of `W_{j,0..2j+1}` on `[y_max/2.5, y_max]`: the
/// growing asymptotic modes with unknown leading coefficients, plus free
/// `y^(sigma-2) ln^q y` terms per profile for the sourced part.
fn fit_growing(layer: &SelfSimilarLayer, j: usize) -> Result<(Vec<C>, f64)> {
    let p = &layer.params;
    let sigma = p.sigma(j);
    let top = 2 * j + 1;
    let n = top + 1;
    let lo = layer.y_max / 2.5;
    let period = 4.0 * std::f64::consts::PI / layer.y_max;
    if period / CHECKPOINT_DY < FIT_SAMPLES_PER_PERIOD {
        return Err(Error::Domain(format!("oscillation under-resolved at y_max = {}", layer.y_max)));
    }
    let idx: Vec<usize> = (0..layer.ys.len()).filter(|&i| layer.ys[i] >= lo).collect();
    let data: Vec<C> = idx.iter().flat_map(|&i| (0..n).map(move |l| (i, l))).map(|(i, l)| layer.checkpoint_value(i, j, l)[0]).collect();
    if data.iter().all(|v| v.norm() == 0.0) {
        return Ok((vec![C::new(0.0, 0.0); n], 0.0));
    }
    let mid = 0.5 * (lo.ln() + layer.y_max.ln());
    let cols = n + n * n;
    let mut a = DMatrix::zeros(data.len(), cols);
    for (r, &i) in idx.iter().enumerate() {
        let y = layer.ys[i];
        for m in 0..n {
            let mut lead = vec![C::new(0.0, 0.0); n];
            lead[m] = cr(1.0);
            let mode = asymptotic_mode(p, j, false, &lead, y);
            for l in 0..n {
                a[(r * n + l, m)] = mode[l][0];
            }
        }
        let base = C::new(y, 0.0).powc(sigma - 2.0);
        let lc = y.ln() - mid;
        for l in 0..n {
            for q in 0..n {
                a[(r * n + l, n + l * n + q)] = base * lc.powi(q as i32);
            }
        }
    }
    let fit = lstsq(&a, &DVector::from_column_slice(&data), 1e12)?;
    let size = data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok((fit.coeffs[..n].to_vec(), fit.rms / size))
}

/// Default fit window for the inner far field: `[r_max/30, r_max/2]`.
pub fn default_match_window(exp: &InnerExpansion) -> (f64, f64) {
    let r = exp.grid().r_max();
    (r / 30.0, r / 2.0)
}

/// Boundary data matched to the inner expansion.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub a: Vec<C>,
    pub b: Vec<C>,
    /// Coefficients of `rho ln^3 rho` and `rho ln^2 rho` in the second chart
    /// coefficient; they must agree with the solvability constants.
    pub higher_logs: [C; 2],
    pub cond: f64,
}

/// Reads `a_j`, `b_j` (the `rho ln rho` and `rho` coefficients of the chart
/// coefficient `w_{j+1}`) from the large-rho inner profile.
pub fn match_boundary_data(exp: &InnerExpansion, j_max: usize, window: (f64, f64)) -> Result<BoundaryData> {
    if exp.order() < j_max + 1 {
        return Err(Error::InvalidParams(format!("inner order {} below {}", exp.order(), j_max + 1)));
    }
    let zero = C::new(0.0, 0.0);
    let ff = exp.far_field(1, window.0, window.1)?;
    let mut out = BoundaryData { a: vec![ff.c11 / 2.0], b: vec![ff.c10 / 2.0], higher_logs: [zero; 2], cond: ff.fit.cond };
    if j_max >= 1 {
        // rho^3 terms of w_2 are the y^3 coefficients of the j = 0 profiles,
        // rho ln^3 rho and rho ln^2 rho carry the solvability constants
        let l0 = build_series_only(&exp.params, &out.a, &out.b);
        let c3 = [l0[slot(0, 0)].get(3), l0[slot(0, 1)].get(3)];
        let sc = solvability_constants(&exp.params, &out.a, &out.b)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut raw = Vec::new();
        for &r in exp.grid().nodes() {
            if r >= window.0 && r <= window.1 {
                let w = exp.chart_series(r, 2)?;
                let l = r.ln();
                let rem = w[2] - (c3[0] + c3[1] * l) * r.powi(3);
                xs.push(r);
                raw.push(rem);
                ys.push(rem - (sc[0] * l + sc[1]) * r * l * l);
            }
        }
        if xs.len() < 20 {
            return Err(Error::Domain(format!("match window holds {} nodes", xs.len())));
        }
        let mid = 0.5 * (window.0.ln() + window.1.ln());
        let basis = |nlog: usize| {
            move |r: f64| -> Vec<C> {
                let l = r.ln() - mid;
                let mut v: Vec<C> = (0..nlog).map(|p| cr(r * l.powi(p as i32))).collect();
                v.extend((0..5).map(|p| cr(l.powi(p) / r)));
                v
            }
        };
        let fit = fit_basis(&xs, &ys, 7, basis(2), 1e8)?;
        out.a.push(fit.coeffs[1]);
        out.b.push(fit.coeffs[0] - fit.coeffs[1] * mid);
        // unconstrained fit of the two leading logs, as a consistency check
        let free_fit = fit_basis(&xs, &raw, 9, basis(4), 1e8)?;
        let plain = |k: usize| -> C {
            (k..4).map(|p| free_fit.coeffs[p] * binom(p, k) * (-mid).powi((p - k) as i32)).sum()
        };
        out.higher_logs = [plain(3), plain(2)];
        out.cond = out.cond.max(fit.cond);
    }
    Ok(out)
}

fn build_series_only(params: &BlowupParams, a: &[C], b: &[C]) -> Vec<Laurent> {
    series_profiles(params, 0, a, b, [C::new(0.0, 0.0); 2]).0
}

/// Inner profile in self-similar variables: the chart `(V1 + i V2)/(1 + V3)`
/// of `V_in` at `rho = y t^-nu`.
pub fn w_inner(exp: &InnerExpansion, y: f64, t: f64) -> Result<C> {
    let rho = y * t.powf(-exp.params.nu);
    let p = exp.point(rho, t)?;
    project_point(&p.v[0]).ok_or(Error::PoleError(0))
}

/// `sup |W_ss - W_in|` over `y in [t^eps1/10, 10 t^eps1]` (log-spaced samples).
pub fn overlap_mismatch(layer: &SelfSimilarLayer, exp: &InnerExpansion, t: f64) -> Result<f64> {
    let c = t.powf(exp.params.eps1);
    let (lo, hi) = (c / 10.0, 10.0 * c);
    let n = 120;
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        let y = lo * (hi / lo).powf(i as f64 / n as f64);
        let ss = layer.w_ss(y, t)?;
        worst = worst.max((ss.w[0] - w_inner(exp, y, t)?).norm());
    }
    Ok(worst)
}

/// Boundary data from `exp` and the full layer built on it.
pub fn build_matched(exp: &InnerExpansion, y_max: f64) -> Result<(SelfSimilarLayer, BoundaryData)> {
    let j_max = (exp.params.order_n - 1).min(1);
    let bd = match_boundary_data(exp, j_max, default_match_window(exp))?;
    let layer = build_selfsim(&exp.params, j_max, &bd.a, &bd.b, y_max)?;
    Ok((layer, bd))
}
