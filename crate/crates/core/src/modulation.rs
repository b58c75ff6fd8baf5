//! Projection of a field onto the bubble orbit `{e^(alpha R) Q(lambda .)}`.

use crate::error::{Error, Result};
use crate::geometry::{SphereField, Vec3, STENCIL};
use crate::grid::DiffOp;
use crate::harmonic::HarmonicProfile;
use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

const MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulationFit {
    pub lambda: f64,
    /// Rotation angle in `(-pi, pi]`.
    pub alpha: f64,
    /// Equivariant Dirichlet distance to the fitted orbit point.
    pub residual: f64,
}

fn rotate(a: f64, v: &Vec3) -> Vec3 {
    let (s, c) = a.sin_cos();
    Vec3::new(c * v[0] - s * v[1], s * v[0] + c * v[1], v[2])
}

/// `e^(alpha R) Q(lambda r)` and its derivatives in `alpha` and `lambda`.
fn orbit(q: &HarmonicProfile, lambda: f64, alpha: f64, r: f64) -> [Vec3; 3] {
    let j = q.jet(lambda * r);
    let v = Vec3::new(j.h1, 0.0, j.h3);
    let dv = Vec3::new(j.dh1, 0.0, j.dh3);
    let val = rotate(alpha, &v);
    let d_alpha = Vec3::new(-val[1], val[0], 0.0);
    [val, d_alpha, rotate(alpha, &dv) * r]
}

/// Residual vector of `D(v - Q_orbit)` where `D d = (sqrt(w) d_r, sqrt(w) d_h / r)`,
/// so that `|D d|^2` is the equivariant Dirichlet energy of `d` divided by pi.
struct Objective<'a> {
    v: &'a SphereField,
    op: DiffOp,
    sw: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(v: &'a SphereField) -> Self {
        let op = DiffOp::new(&v.grid, STENCIL);
        let sw = v.grid.area_weights().iter().map(|w| w.max(0.0).sqrt()).collect();
        Objective { v, op, sw }
    }

    fn apply(&self, d: &[Vec3]) -> Vec<f64> {
        let r = self.v.grid.nodes();
        let dr = self.op.d1(d);
        let mut out = Vec::with_capacity(5 * d.len());
        for i in 0..d.len() {
            let s = self.sw[i];
            out.extend([dr[i][0] * s, dr[i][1] * s, dr[i][2] * s]);
            if r[i] > 0.0 {
                out.extend([d[i][0] * s / r[i], d[i][1] * s / r[i]]);
            }
        }
        out
    }

    /// Residual and Jacobian columns at `(lambda, alpha)`.
    fn eval(&self, q: &HarmonicProfile, lambda: f64, alpha: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let r = self.v.grid.nodes();
        let o: Vec<[Vec3; 3]> = r.iter().map(|&x| orbit(q, lambda, alpha, x)).collect();
        let d: Vec<Vec3> = self.v.samples.iter().zip(&o).map(|(v, o)| v - o[0]).collect();
        let ja: Vec<Vec3> = o.iter().map(|o| -o[1]).collect();
        let jl: Vec<Vec3> = o.iter().map(|o| -o[2]).collect();
        (self.apply(&d), self.apply(&jl), self.apply(&ja))
    }
}

/// Radius enclosing half of the Dirichlet energy.
fn half_energy_radius(v: &SphereField, op: &DiffOp) -> Option<f64> {
    let r = v.grid.nodes();
    let dv = op.d1(&v.samples);
    let dens: Vec<f64> = (0..r.len())
        .map(|i| {
            let ang = if r[i] > 0.0 { (v.samples[i][0].powi(2) + v.samples[i][1].powi(2)) / (r[i] * r[i]) } else { 0.0 };
            r[i] * (dv[i].norm_squared() + ang)
        })
        .collect();
    let cum = v.grid.cumulative(&dens);
    let total = *cum.last()?;
    if !(total > 0.0) {
        return None;
    }
    let i = cum.iter().position(|&c| c >= 0.5 * total)?;
    if i == 0 {
        return Some(r[1]);
    }
    let f = (0.5 * total - cum[i - 1]) / (cum[i] - cum[i - 1]);
    Some(r[i - 1] + f * (r[i] - r[i - 1]))
}

fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let w = a - t * (a / t).round();
    if w <= -std::f64::consts::PI {
        w + t
    } else {
        w
    }
}

/// Gauss-Newton fit of `(lambda, alpha)` minimizing the Dirichlet distance
/// `|| v - e^(alpha R) Q(lambda .) ||`, started from the half-energy radius.
pub fn fit_modulation(v: &SphereField) -> Result<ModulationFit> {
    let q = HarmonicProfile::new(1);
    let obj = Objective::new(v);
    let r_half = half_energy_radius(v, &obj.op).ok_or(Error::FitDiverged(f64::NAN))?;
    let mut lambda = 1.0 / r_half;
    let k = v.grid.locate(r_half);
    let s = v.samples[k + 1];
    let mut alpha = if s[0].hypot(s[1]) > 0.0 { s[1].atan2(s[0]) } else { 0.0 };
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut res, mut jl, mut ja) = obj.eval(&q, lambda, alpha);
    let mut cost = norm(&res);
    for _ in 0..MAX_ITER {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let m = Matrix2::new(dot(&jl, &jl), dot(&jl, &ja), dot(&ja, &jl), dot(&ja, &ja));
        let g = Vector2::new(dot(&jl, &res), dot(&ja, &res));
        let step = m.lu().solve(&(-g)).ok_or(Error::FitDiverged(lambda))?;
        // damped step: halve until the cost does not grow
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (l2, a2) = (lambda + scale * step[0], alpha + scale * step[1]);
            if l2 > 0.0 {
                let trial = obj.eval(&q, l2, a2);
                let c2 = norm(&trial.0);
                if c2 <= cost {
                    lambda = l2;
                    alpha = a2;
                    (res, jl, ja) = trial;
                    cost = c2;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !(1e-8..=1e8).contains(&lambda) {
            return Err(Error::FitDiverged(lambda));
        }
        let small = (scale * step[0]).abs() <= 1e-14 * lambda && (scale * step[1]).abs() <= 1e-14;
        if !accepted || small {
            break;
        }
    }
    Ok(ModulationFit { lambda, alpha: wrap(alpha), residual: cost * std::f64::consts::PI.sqrt() })
}

/// Samples `e^(alpha R) Q(lambda .)` on `grid`.
pub fn orbit_field(grid: std::sync::Arc<crate::grid::RadialGrid>, lambda: f64, alpha: f64) -> Result<SphereField> {
    let q = HarmonicProfile::new(1);
    SphereField::from_fn(grid, 1, |r| orbit(&q, lambda, alpha, r)[0])
}
