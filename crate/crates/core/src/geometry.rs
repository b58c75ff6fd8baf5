//! Equivariant fields on radial grids, stereographic chart, energy, degree
//! and discrete Sobolev norms.

use crate::error::{Error, Result};
use crate::grid::{DiffOp, RadialGrid};
use nalgebra::Vector3;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

pub type Vec3 = Vector3<f64>;

/// Stencil width used for all radial derivatives.
pub const STENCIL: usize = 9;

/// Complex radial profile `f(r)` of an m-equivariant scalar `f(r) e^{i m theta}`.
#[derive(Debug, Clone)]
pub struct RadialField {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<Complex64>,
    pub m: u32,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<Complex64>, m: u32) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(RadialField { grid, values, m })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, m: u32, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialField { grid, values, m }
    }

    pub fn zeros(grid: Arc<RadialGrid>, m: u32) -> Self {
        let n = grid.len();
        RadialField { grid, values: vec![Complex64::new(0.0, 0.0); n], m }
    }
}

/// Equivariant 3-vector field `e^{theta R} v(r)` without a unit-length constraint
/// (differences, residuals).
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<Vec3>,
    pub m: u32,
}

impl VectorField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<Vec3>, m: u32) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { grid, values, m })
    }

    pub fn zeros(grid: Arc<RadialGrid>, m: u32) -> Self {
        let n = grid.len();
        VectorField { grid, values: vec![Vec3::zeros(); n], m }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Unit-length equivariant map `u = e^{theta R} v(r)` into the sphere.
#[derive(Debug, Clone)]
pub struct SphereField {
    pub grid: Arc<RadialGrid>,
    pub samples: Vec<Vec3>,
    /// Equivariance index (1 for everything but the profiles `phi_m`).
    pub m: u32,
}

impl SphereField {
    pub fn new(grid: Arc<RadialGrid>, samples: Vec<Vec3>) -> Result<Self> {
        Self::with_index(grid, samples, 1)
    }

    pub fn with_index(grid: Arc<RadialGrid>, samples: Vec<Vec3>, m: u32) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        for (i, v) in samples.iter().enumerate() {
            if !((v.norm() - 1.0).abs() < 1e-10) {
                return Err(Error::Domain(format!("|v| = {} at node {i}", v.norm())));
            }
        }
        Ok(SphereField { grid, samples, m })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, m: u32, f: impl Fn(f64) -> Vec3) -> Result<Self> {
        let samples = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::with_index(grid, samples, m)
    }

    pub fn constant(grid: Arc<RadialGrid>, v: Vec3) -> Self {
        let n = grid.len();
        SphereField { grid, samples: vec![v.normalize(); n], m: 1 }
    }

    pub fn as_vector(&self) -> VectorField {
        VectorField { grid: self.grid.clone(), values: self.samples.clone(), m: self.m }
    }

    pub fn difference(&self, other: &SphereField) -> Result<VectorField> {
        if self.grid.nodes() != other.grid.nodes() {
            return Err(Error::GridMismatch);
        }
        let values = self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect();
        Ok(VectorField { grid: self.grid.clone(), values, m: self.m })
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.samples.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Field in the stereographic chart `w = (v1 + i v2)/(1 + v3)`.
#[derive(Debug, Clone)]
pub struct StereoField {
    pub grid: Arc<RadialGrid>,
    pub samples: Vec<Complex64>,
    pub pole_mask: Vec<bool>,
}

const POLE_TOL: f64 = 1e-12;

pub fn project_point(v: &Vec3) -> Option<Complex64> {
    if v[2] <= -1.0 + POLE_TOL {
        None
    } else {
        Some(Complex64::new(v[0], v[1]) / (1.0 + v[2]))
    }
}

pub fn unproject_point(w: Complex64) -> Vec3 {
    let a = w.norm_sqr();
    let s = 1.0 / (1.0 + a);
    Vec3::new(2.0 * w.re * s, 2.0 * w.im * s, (1.0 - a) * s)
}

pub fn stereo_project(v: &SphereField) -> StereoField {
    let mut samples = Vec::with_capacity(v.samples.len());
    let mut pole_mask = Vec::with_capacity(v.samples.len());
    for s in &v.samples {
        match project_point(s) {
            Some(w) => {
                samples.push(w);
                pole_mask.push(false);
            }
            None => {
                samples.push(Complex64::new(f64::INFINITY, 0.0));
                pole_mask.push(true);
            }
        }
    }
    StereoField { grid: v.grid.clone(), samples, pole_mask }
}

pub fn stereo_unproject(w: &StereoField) -> Result<SphereField> {
    if let Some(i) = w.pole_mask.iter().position(|&p| p) {
        return Err(Error::PoleError(i));
    }
    let samples = w.samples.iter().map(|&z| unproject_point(z)).collect();
    Ok(SphereField { grid: w.grid.clone(), samples, m: 1 })
}

/// `|f|^2 / r^2` at every node, using `|f'(0)|^2` (m = 1) or 0 (m >= 2) at the origin.
fn angular_density(grid: &RadialGrid, f: &[Complex64], df: &[Complex64], m: u32) -> Vec<f64> {
    let r = grid.nodes();
    let mm = (m * m) as f64;
    (0..r.len())
        .map(|i| {
            if m == 0 {
                0.0
            } else if r[i] == 0.0 {
                if m == 1 {
                    df[0].norm_sqr()
                } else {
                    0.0
                }
            } else {
                mm * f[i].norm_sqr() / (r[i] * r[i])
            }
        })
        .collect()
}

/// Equivariant energy `pi int r (|v_r|^2 + m^2 (v1^2+v2^2)/r^2) dr`.
pub fn energy(v: &SphereField) -> f64 {
    let op = DiffOp::new(&v.grid, STENCIL);
    energy_with(v, &op)
}

pub fn energy_with(v: &SphereField, op: &DiffOp) -> f64 {
    let r = v.grid.nodes();
    let dv = op.d1(&v.samples);
    let w: Vec<Complex64> = v.samples.iter().map(|s| Complex64::new(s[0], s[1])).collect();
    let dw: Vec<Complex64> = dv.iter().map(|s| Complex64::new(s[0], s[1])).collect();
    let ang = angular_density(&v.grid, &w, &dw, v.m);
    let dens: Vec<f64> = (0..r.len()).map(|i| r[i] * (dv[i].norm_squared() + ang[i])).collect();
    PI * v.grid.integrate(&dens)
}

/// Degree by the boundary reduction `m (v3(r_max) - v3(0)) / 2`.
pub fn degree(v: &SphereField) -> f64 {
    let n = v.samples.len();
    v.m as f64 * (v.samples[n - 1][2] - v.samples[0][2]) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    None,
    /// Multiply by `<x> = sqrt(1 + |x|^2)`.
    Bracket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Sum of all derivative orders up to k.
    Inhomogeneous,
    /// Top order only.
    Homogeneous,
}

/// Anything that splits into equivariant complex components.
pub trait Equivariant {
    fn grid(&self) -> &Arc<RadialGrid>;
    fn components(&self) -> Vec<(Vec<Complex64>, u32)>;
}

impl Equivariant for RadialField {
    fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    fn components(&self) -> Vec<(Vec<Complex64>, u32)> {
        vec![(self.values.clone(), self.m)]
    }
}

impl Equivariant for VectorField {
    fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    fn components(&self) -> Vec<(Vec<Complex64>, u32)> {
        let w = self.values.iter().map(|v| Complex64::new(v[0], v[1])).collect();
        let z = self.values.iter().map(|v| Complex64::new(v[2], 0.0)).collect();
        vec![(w, self.m), (z, 0)]
    }
}

impl Equivariant for SphereField {
    fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    fn components(&self) -> Vec<(Vec<Complex64>, u32)> {
        self.as_vector().components()
    }
}

/// Equivariant Laplacian `f'' + f'/r - m^2 f / r^2` with regularity limits at 0.
pub fn equivariant_laplacian(grid: &RadialGrid, op: &DiffOp, f: &[Complex64], m: u32) -> Vec<Complex64> {
    let r = grid.nodes();
    let d1 = op.d1(f);
    let d2 = op.d2(f);
    let mm = (m * m) as f64;
    (0..r.len())
        .map(|i| {
            if r[i] == 0.0 {
                if m == 0 {
                    d2[0] * 2.0
                } else {
                    Complex64::new(0.0, 0.0)
                }
            } else {
                d2[i] + d1[i] / r[i] - f[i] * (mm / (r[i] * r[i]))
            }
        })
        .collect()
}

/// Squared homogeneous seminorms `|f|_{D^j}^2`, j = 0..=k, of one component.
fn seminorms_sq(grid: &RadialGrid, op: &DiffOp, f: &[Complex64], m: u32, k: usize, weight: &[f64]) -> Vec<f64> {
    let aw = grid.area_weights();
    let integ = |dens: &[f64]| -> f64 { dens.iter().zip(&aw).zip(weight).map(|((d, a), w)| d * a * w * w).sum() };
    let grad_sq = |g: &[Complex64], m: u32| -> Vec<f64> {
        let dg = op.d1(g);
        let ang = angular_density(grid, g, &dg, m);
        dg.iter().zip(&ang).map(|(d, a)| d.norm_sqr() + a).collect()
    };
    let mut out = Vec::with_capacity(k + 1);
    out.push(integ(&f.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()));
    if k >= 1 {
        out.push(integ(&grad_sq(f, m)));
    }
    if k >= 2 {
        let lap = equivariant_laplacian(grid, op, f, m);
        out.push(integ(&lap.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()));
        if k >= 3 {
            out.push(integ(&grad_sq(&lap, m)));
        }
    }
    out
}

/// Discrete `H^k` (or `Hdot^k`) norm of the full 2D equivariant field.
pub fn sobolev_norm_kind(f: &impl Equivariant, k: usize, weight: Weight, kind: NormKind) -> Result<f64> {
    if k > 3 {
        return Err(Error::InvalidParams(format!("Sobolev order {k} > 3")));
    }
    let grid = f.grid();
    if grid.len() < 4 * k + 1 {
        return Err(Error::GridTooCoarse { needed: 4 * k + 1, got: grid.len() });
    }
    let op = DiffOp::new(grid, STENCIL);
    let wt: Vec<f64> = match weight {
        Weight::None => vec![1.0; grid.len()],
        Weight::Bracket => grid.nodes().iter().map(|r| (1.0 + r * r).sqrt()).collect(),
    };
    let mut total = 0.0;
    for (comp, m) in f.components() {
        let s = seminorms_sq(grid, &op, &comp, m, k, &wt);
        total += match kind {
            NormKind::Inhomogeneous => s.iter().sum::<f64>(),
            NormKind::Homogeneous => s[k],
        };
    }
    Ok(total.max(0.0).sqrt())
}

pub fn sobolev_norm(f: &impl Equivariant, k: usize, weight: Weight) -> Result<f64> {
    sobolev_norm_kind(f, k, weight, NormKind::Inhomogeneous)
}
