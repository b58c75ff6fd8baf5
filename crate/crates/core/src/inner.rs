//! Inner layer: the recurrence `L z^k = F_k`, the S^2-valued profile
//! `V_in = Q + z1 f1 + z2 f2 + gamma Q` and its residual.
//!
//! Fields are handled as power sums in `T = t^(2 nu)` with numeric-in-rho
//! coefficients. The rescaled equation is
//! `t^(1+2nu) V_t + alpha0 T R V - (1/2+nu) T rho V_rho = V x (Delta V + R^2 V/rho^2)`.

use crate::error::{Error, Result};
use crate::geometry::{RadialField, SphereField, Vec3};
use crate::grid::RadialGrid;
use crate::harmonic::{kappa, Frame};
use crate::jet::{self, CJet, VJet};
use crate::linop::{far_field, FarField, KernelPair, ZeroIcSolution};
use crate::params::BlowupParams;
use crate::quad::SimpsonOptions;
use num_complex::Complex64;
use std::sync::Arc;

/// Extra T-orders kept when summing the residual series.
const SERIES_EXTRA: usize = 4;

#[derive(Debug, Clone)]
pub struct InnerExpansion {
    pub params: BlowupParams,
    /// `z^k`, k = 1..N.
    pub layers: Vec<ZeroIcSolution>,
    pub d: Complex64,
}

/// `V_in` with its first two rho-derivatives and its t-derivative at fixed rho.
#[derive(Debug, Clone, Copy)]
pub struct InnerPoint {
    pub v: VJet,
    pub v_t: Vec3,
}

#[derive(Debug, Clone)]
pub struct InnerProfile {
    pub t: f64,
    pub z: RadialField,
    pub v: SphereField,
}

/// T-series coefficients at one radius: `V_n` jets and residual terms `Res_n`.
struct SeriesTerms {
    v: Vec<VJet>,
    res: Vec<Vec3>,
}

fn series_terms(params: &BlowupParams, rho: f64, z: &[CJet], nmax: usize) -> SeriesTerms {
    let fr = Frame::at(rho);
    let zk = |k: usize| if k >= 1 && k <= z.len() { z[k - 1] } else { jet::czero() };
    // |z|^2 = sum_n T^n S_n and gamma = sum_n T^n y_n with (1+gamma)^2 = 1 - |z|^2.
    let mut s = vec![jet::RZERO; nmax + 1];
    for (n, sn) in s.iter_mut().enumerate().skip(2) {
        for i in 1..n {
            *sn = jet::add_r(*sn, jet::re(jet::mul_cc(zk(i), jet::conj(zk(n - i)))));
        }
    }
    let mut y = vec![jet::RZERO; nmax + 1];
    for n in 1..=nmax {
        let mut acc = s[n];
        for i in 1..n {
            acc = jet::add_r(acc, jet::mul_rr(y[i], y[n - i]));
        }
        y[n] = jet::scale_r(acc, -0.5);
    }
    let mut v = Vec::with_capacity(nmax + 1);
    v.push(fr.q);
    for n in 1..=nmax {
        let c = zk(n);
        let mut vn = jet::mul_rv(jet::re(c), fr.f1);
        vn = jet::add_v(vn, [fr.f2 * c[0].im, fr.f2 * c[1].im, fr.f2 * c[2].im]);
        vn = jet::add_v(vn, jet::mul_rv(y[n], fr.q));
        v.push(vn);
    }
    let m: Vec<Vec3> = v
        .iter()
        .enumerate()
        .map(|(n, vn)| if n == 0 { fr.q[0] * kappa(rho) } else { jet::map_laplacian(vn, rho) })
        .collect();
    let (nu, a0) = (params.nu, params.alpha0);
    let mut res = vec![Vec3::zeros(); nmax + 1];
    for n in 1..=nmax {
        let p = &v[n - 1];
        let a = p[0] * (2.0 * nu * (n - 1) as f64) + jet::rot(&p[0]) * a0 - p[1] * ((0.5 + nu) * rho);
        let mut e = Vec3::zeros();
        for i in 0..=n {
            e += v[i][0].cross(&m[n - i]);
        }
        res[n] = a - e;
    }
    SeriesTerms { v, res }
}

/// Complex tangent coordinates `(r . f1) + i (r . f2)`.
fn tangent(rho: f64, r: &Vec3) -> Complex64 {
    let fr = Frame::at(rho);
    Complex64::new(r.dot(&fr.f1[0]), r.dot(&fr.f2))
}

fn build(params: BlowupParams, grid: Arc<RadialGrid>) -> Result<InnerExpansion> {
    let d = params.d();
    let opts = SimpsonOptions::default();
    let k1 = KernelPair;
    let first = ZeroIcSolution::solve(grid.clone(), |s| -d * k1.h1(s)[0], opts)?;
    let mut layers = vec![first];
    let nodes = grid.nodes();
    for k in 2..=params.order_n {
        let mut forcing = vec![Complex64::new(0.0, 0.0); nodes.len()];
        for (i, &r) in nodes.iter().enumerate().skip(1) {
            let z: Vec<CJet> = layers.iter().map(|l| l.node_jet(i)).collect();
            let terms = series_terms(&params, r, &z, k);
            forcing[i] = Complex64::i() * tangent(r, &terms.res[k]);
        }
        if forcing.iter().any(|f| !f.is_finite()) {
            return Err(Error::SeriesTruncation(format!("non-finite forcing at order {k}")));
        }
        let f = RadialField::new(grid.clone(), forcing, 1)?;
        layers.push(ZeroIcSolution::solve_field(&f, opts)?);
    }
    for (k, l) in layers.iter().enumerate() {
        if l.a.iter().chain(&l.b).any(|v| !v.is_finite()) {
            return Err(Error::SeriesTruncation(format!("non-finite layer {}", k + 1)));
        }
    }
    Ok(InnerExpansion { params, layers, d })
}

/// Builds `z^1..z^N` on `grid`. `z^1` solves `L z^1 = -d h1`.
pub fn build_inner(params: BlowupParams, grid: Arc<RadialGrid>) -> Result<InnerExpansion> {
    params.validate()?;
    if grid.r_max() < 10.0 {
        return Err(Error::InvalidGrid(format!("inner grid must reach rho = 10, got {}", grid.r_max())));
    }
    build(params, grid)
}

/// As [`build_inner`] without parameter validation (degenerate-rate checks).
pub fn build_inner_unchecked(params: BlowupParams, grid: Arc<RadialGrid>) -> Result<InnerExpansion> {
    build(params, grid)
}

impl InnerExpansion {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.layers[0].grid
    }

    pub fn order(&self) -> usize {
        self.layers.len()
    }

    /// `z^k` sampled on the grid, k >= 1.
    pub fn layer(&self, k: usize) -> RadialField {
        self.layers[k - 1].values()
    }

    /// Forcing `F_k` sampled on the grid.
    pub fn forcing(&self, k: usize) -> RadialField {
        let l = &self.layers[k - 1];
        RadialField { grid: l.grid.clone(), values: l.forcing.clone(), m: 1 }
    }

    pub fn far_field(&self, k: usize, lo: f64, hi: f64) -> Result<FarField> {
        far_field(&self.layers[k - 1], lo, hi)
    }

    /// Outer edge `10 t^(-nu + eps1)` of the validity window.
    pub fn validity_radius(&self, t: f64) -> f64 {
        10.0 * t.powf(-self.params.nu + self.params.eps1)
    }

    /// Jets of `z^1..z^N` at `rho`.
    pub fn layer_jets(&self, rho: f64) -> Result<Vec<CJet>> {
        if !(0.0..=self.grid().r_max()).contains(&rho) {
            return Err(Error::Domain(format!("rho = {rho} outside the inner grid")));
        }
        Ok(self.layers.iter().map(|l| l.eval(rho)).collect())
    }

    /// `z_in(rho, t)` with two rho-derivatives.
    pub fn z(&self, rho: f64, t: f64) -> Result<CJet> {
        let big = self.params.big_t(t);
        let mut out = jet::czero();
        let mut p = 1.0;
        for l in self.layer_jets(rho)? {
            p *= big;
            for j in 0..3 {
                out[j] += l[j] * p;
            }
        }
        Ok(out)
    }

    /// `V_in` jets and `partial_t V_in` at fixed rho.
    pub fn point(&self, rho: f64, t: f64) -> Result<InnerPoint> {
        let big = self.params.big_t(t);
        let layers = self.layer_jets(rho)?;
        let mut z = jet::czero();
        let mut z_t = Complex64::new(0.0, 0.0);
        let mut p = 1.0;
        for (k, l) in layers.iter().enumerate() {
            p *= big;
            for j in 0..3 {
                z[j] += l[j] * p;
            }
            z_t += l[0] * (2.0 * self.params.nu * (k + 1) as f64 * p / t);
        }
        let s = jet::re(jet::mul_cc(z, jet::conj(z)));
        if s[0] >= 1.0 {
            return Err(Error::Domain(format!("|z| >= 1 at rho = {rho}, t = {t}")));
        }
        let root = (1.0 - s[0]).sqrt();
        let g = [-s[0] / (1.0 + root), -0.5 / root, -0.25 / (root * root * root)];
        let gamma = jet::compose(g, s);
        let fr = Frame::at(rho);
        let mut v = jet::mul_rv(jet::re(z), fr.f1);
        v = jet::add_v(v, [fr.f2 * z[0].im, fr.f2 * z[1].im, fr.f2 * z[2].im]);
        v = jet::add_v(v, jet::mul_rv(jet::add_r(gamma, [1.0, 0.0, 0.0]), fr.q));
        let s_t = 2.0 * (z[0].conj() * z_t).re;
        let v_t = fr.f1[0] * z_t.re + fr.f2 * z_t.im + fr.q[0] * (g[1] * s_t);
        Ok(InnerPoint { v, v_t })
    }

    /// Vector residual `t^(1+2nu) V_t + alpha0 T R V - (1/2+nu) T rho V_rho - V x (Delta V + R^2 V/rho^2)`
    /// evaluated in closed form (no series).
    pub fn residual_vector_direct(&self, rho: f64, t: f64) -> Result<Vec3> {
        let p = self.point(rho, t)?;
        let big = self.params.big_t(t);
        let dv = p.v_t * t.powf(1.0 + 2.0 * self.params.nu);
        let a = dv + jet::rot(&p.v[0]) * (self.params.alpha0 * big) - p.v[1] * ((0.5 + self.params.nu) * big * rho);
        Ok(a - p.v[0].cross(&jet::map_laplacian(&p.v, rho)))
    }

    /// Vector residual by the T-series through order `N + 4`, with a
    /// tail estimate (the last retained term).
    pub fn residual_vector_series(&self, rho: f64, t: f64) -> Result<(Vec3, f64)> {
        if rho == 0.0 {
            return Ok((Vec3::zeros(), 0.0));
        }
        let n = self.order();
        let nmax = n + 1 + SERIES_EXTRA;
        let terms = series_terms(&self.params, rho, &self.layer_jets(rho)?, nmax);
        let big = self.params.big_t(t);
        let mut sum = Vec3::zeros();
        let mut last = 0.0;
        for (k, r) in terms.res.iter().enumerate().skip(n + 1) {
            let term = r * big.powi(k as i32);
            last = term.norm();
            sum += term;
        }
        Ok((sum, last))
    }

    /// Residual vector: series where the tail is below 1e-3 of the sum, closed form otherwise.
    pub fn residual_vector(&self, rho: f64, t: f64) -> Result<Vec3> {
        let (s, tail) = self.residual_vector_series(rho, t)?;
        if tail <= 1e-3 * s.norm() || s.norm() == 0.0 && tail == 0.0 {
            Ok(s)
        } else {
            self.residual_vector_direct(rho, t)
        }
    }

    /// Scalar inner residual `X_N = -i (Res . f1 + i Res . f2)`.
    pub fn residual_scalar(&self, rho: f64, t: f64) -> Result<Complex64> {
        if rho == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let r = self.residual_vector(rho, t)?;
        Ok(-Complex64::i() * tangent(rho, &r))
    }

    /// Component of the order-`k` residual along `Q` (zero for `k <= N`).
    pub fn normal_defect(&self, rho: f64, k: usize) -> Result<f64> {
        let terms = series_terms(&self.params, rho, &self.layer_jets(rho)?, k);
        Ok(terms.res[k].dot(&Frame::at(rho).q[0]))
    }

    /// T-series coefficients `w_0..w_nmax` of the stereographic coordinate
    /// `(V1 + i V2)/(1 + V3)` at `rho`.
    pub fn chart_series(&self, rho: f64, nmax: usize) -> Result<Vec<Complex64>> {
        let terms = series_terms(&self.params, rho, &self.layer_jets(rho)?, nmax);
        let num: Vec<Complex64> = terms.v.iter().map(|v| Complex64::new(v[0][0], v[0][1])).collect();
        let den: Vec<f64> = terms.v.iter().enumerate().map(|(n, v)| v[0][2] + if n == 0 { 1.0 } else { 0.0 }).collect();
        let mut w = vec![Complex64::new(0.0, 0.0); nmax + 1];
        for n in 0..=nmax {
            let mut acc = num[n];
            for i in 1..=n {
                acc -= w[n - i] * den[i];
            }
            w[n] = acc / den[0];
        }
        Ok(w)
    }
}

/// Nodes of `grid` inside `[0, r]`, as a grid of their own.
pub(crate) fn truncate_grid(grid: &RadialGrid, r: f64) -> Result<Arc<RadialGrid>> {
    let nodes: Vec<f64> = grid.nodes().iter().copied().take_while(|&x| x <= r).collect();
    Ok(Arc::new(RadialGrid::from_nodes(nodes, grid.spacing())?))
}

/// `z_in` and `V_in` on the grid nodes inside the validity window.
pub fn eval_inner_profile(exp: &InnerExpansion, t: f64) -> Result<InnerProfile> {
    let g = truncate_grid(exp.grid(), exp.validity_radius(t))?;
    let mut z = Vec::with_capacity(g.len());
    let mut v = Vec::with_capacity(g.len());
    for &r in g.nodes() {
        let p = exp.point(r, t)?;
        z.push(exp.z(r, t)?[0]);
        v.push(p.v[0]);
    }
    Ok(InnerProfile {
        t,
        z: RadialField::new(g.clone(), z, 1)?,
        v: SphereField::new(g, v)?,
    })
}

/// `X_N` on the grid nodes inside the validity window.
pub fn inner_residual(exp: &InnerExpansion, t: f64) -> Result<RadialField> {
    let g = truncate_grid(exp.grid(), exp.validity_radius(t))?;
    let vals = g.nodes().iter().map(|&r| exp.residual_scalar(r, t)).collect::<Result<Vec<_>>>()?;
    RadialField::new(g, vals, 1)
}

impl InnerProfile {
    /// `V_in - Q` on the profile grid.
    pub fn z_vector(&self) -> Vec<Vec3> {
        self.v
            .samples
            .iter()
            .zip(self.v.grid.nodes())
            .map(|(v, &r)| v - Frame::at(r).q[0])
            .collect()
    }
}
