//! The linearized operator `L = -Delta + (1 - 2 h1^2)/rho^2` around the
//! degree-one harmonic map, its kernel and the zero-initial-data solver.

use crate::error::{Error, Result};
use crate::fit::{fit_basis, LinearFit};
use crate::geometry::{equivariant_laplacian, RadialField, STENCIL};
use crate::grid::{interpolate, DiffOp, RadialGrid};
use crate::harmonic::{kappa, HarmonicProfile};
use crate::quad::{gauss5, simpson, SimpsonOptions, C2};
use num_complex::Complex64;
use std::sync::Arc;

/// Value and first two derivatives.
pub type Jet1 = [f64; 3];

/// The kernel pair `h1`, `h2` of `L`.
#[derive(Debug, Clone, Copy, Default)]
pub struct KernelPair;

impl KernelPair {
    pub fn h1(&self, rho: f64) -> Jet1 {
        let j = HarmonicProfile::new(1).jet(rho);
        [j.h1, j.dh1, j.d2h1]
    }

    /// `h2 = (rho^4 + 4 rho^2 ln rho - 1)/(rho (rho^2 + 1))`, written as
    /// `rho - 1/rho + 4 rho ln rho / (1 + rho^2)` which has no cancellation.
    pub fn h2(&self, rho: f64) -> Jet1 {
        let l = rho.ln();
        let s = 1.0 + rho * rho;
        let g = rho * l / s;
        let num = l * (1.0 - rho * rho) + s;
        let dg = num / (s * s);
        let dnum = (1.0 - rho * rho) / rho - 2.0 * rho * l + 2.0 * rho;
        let d2g = dnum / (s * s) - 4.0 * rho * num / (s * s * s);
        [rho - 1.0 / rho + 4.0 * g, 1.0 + 1.0 / (rho * rho) + 4.0 * dg, -2.0 / (rho * rho * rho) + 4.0 * d2g]
    }

    /// `rho h2(rho)`, continuous at 0 with value -1.
    pub fn rho_h2(&self, rho: f64) -> f64 {
        if rho == 0.0 {
            return -1.0;
        }
        let s = 1.0 + rho * rho;
        rho * rho - 1.0 + 4.0 * rho * rho * rho.ln() / s
    }

    /// `rho (h2 h1' - h1 h2')`.
    pub fn wronskian(&self, rho: f64) -> f64 {
        let a = self.h1(rho);
        let b = self.h2(rho);
        rho * (b[0] * a[1] - a[0] * b[1])
    }
}

/// Measured `rho (h2 h1' - h1 h2')` at sample radii; returns the mean and the spread.
pub fn wronskian_samples(rhos: &[f64]) -> (f64, f64) {
    let k = KernelPair;
    let w: Vec<f64> = rhos.iter().map(|&r| k.wronskian(r)).collect();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let spread = w.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    (mean, spread)
}

/// The constant `rho (h2 h1' - h1 h2')` of the kernel pair.
pub fn wronskian_constant() -> f64 {
    wronskian_samples(&[0.25, 0.5, 1.0, 2.0, 4.0, 10.0]).0
}

/// Discrete `Lf` with the regularity limit `Lf(0) = 0`.
pub fn apply_l(f: &RadialField) -> Result<RadialField> {
    let op = DiffOp::new(&f.grid, STENCIL);
    apply_l_with(f, &op)
}

pub fn apply_l_with(f: &RadialField, op: &DiffOp) -> Result<RadialField> {
    let scale = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if f.values[0].norm() > 1e-12 * (1.0 + scale) {
        return Err(Error::SingularOrigin(f.values[0].norm()));
    }
    let lap = equivariant_laplacian(&f.grid, op, &f.values, 1);
    let r = f.grid.nodes();
    let values = (0..r.len())
        .map(|i| if r[i] == 0.0 { Complex64::new(0.0, 0.0) } else { -lap[i] + f.values[i] * kappa(r[i]) })
        .collect();
    Ok(RadialField { grid: f.grid.clone(), values, m: 1 })
}

/// Solution of `Lz = F`, `z(0) = z'(0) = 0` by variation of parameters,
/// `z = c [h1 A - h2 B]` with `A = int_0^rho s h2 F`, `B = int_0^rho s h1 F`
/// and `c = -1/W`.
#[derive(Debug, Clone)]
pub struct ZeroIcSolution {
    pub grid: Arc<RadialGrid>,
    pub forcing: Vec<Complex64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub factor: f64,
}

/// Stencil width for interpolating the forcing between nodes.
const INTERP_WIDTH: usize = 6;

impl ZeroIcSolution {
    /// Solves with a forcing given as a function of rho.
    pub fn solve(grid: Arc<RadialGrid>, rhs: impl Fn(f64) -> Complex64, opts: SimpsonOptions) -> Result<Self> {
        let k = KernelPair;
        let integrand = |s: f64| {
            let f = rhs(s);
            C2(f * k.rho_h2(s), f * (s * k.h1(s)[0]))
        };
        let nodes = grid.nodes();
        let mut a = vec![Complex64::new(0.0, 0.0); nodes.len()];
        let mut b = a.clone();
        for i in 0..nodes.len() - 1 {
            let inc = simpson(&integrand, nodes[i], nodes[i + 1], opts)?;
            a[i + 1] = a[i] + inc.0;
            b[i + 1] = b[i] + inc.1;
        }
        let forcing = nodes.iter().map(|&r| rhs(r)).collect();
        Ok(ZeroIcSolution { grid, forcing, a, b, factor: -1.0 / wronskian_constant() })
    }

    /// Solves with a sampled forcing, interpolated locally between nodes.
    pub fn solve_field(rhs: &RadialField, opts: SimpsonOptions) -> Result<Self> {
        let grid = rhs.grid.clone();
        let vals = rhs.values.clone();
        let g2 = grid.clone();
        Self::solve(grid, move |s| interpolate(&g2, &vals, s, INTERP_WIDTH)[0], opts)
    }

    /// Forcing at an arbitrary radius.
    pub fn forcing_at(&self, rho: f64) -> Complex64 {
        interpolate(&self.grid, &self.forcing, rho, INTERP_WIDTH)[0]
    }

    fn combine(&self, rho: f64, a: Complex64, b: Complex64, f: Complex64) -> [Complex64; 3] {
        if rho == 0.0 {
            return [Complex64::new(0.0, 0.0); 3];
        }
        let k = KernelPair;
        let (h1, h2) = (k.h1(rho), k.h2(rho));
        let c = self.factor;
        [
            (a * h1[0] - b * h2[0]) * c,
            (a * h1[1] - b * h2[1]) * c,
            (a * h1[2] - b * h2[2]) * c - f,
        ]
    }

    /// `(z, z', z'')` at node `i`.
    pub fn node_jet(&self, i: usize) -> [Complex64; 3] {
        self.combine(self.grid.nodes()[i], self.a[i], self.b[i], self.forcing[i])
    }

    /// `(z, z', z'')` at an arbitrary radius inside the grid.
    pub fn eval(&self, rho: f64) -> [Complex64; 3] {
        let nodes = self.grid.nodes();
        let i = self.grid.locate(rho);
        let r0 = nodes[i];
        if rho == r0 {
            return self.node_jet(i);
        }
        let k = KernelPair;
        let inc: C2 = gauss5(
            |s| {
                let f = self.forcing_at(s);
                C2(f * k.rho_h2(s), f * (s * k.h1(s)[0]))
            },
            r0,
            rho,
        );
        self.combine(rho, self.a[i] + inc.0, self.b[i] + inc.1, self.forcing_at(rho))
    }

    pub fn values(&self) -> RadialField {
        let values = (0..self.grid.len()).map(|i| self.node_jet(i)[0]).collect();
        RadialField { grid: self.grid.clone(), values, m: 1 }
    }
}

/// Large-rho coefficients `z ~ c10 rho + c11 rho ln rho + O(ln^2 rho / rho)`.
#[derive(Debug, Clone)]
pub struct FarField {
    pub c10: Complex64,
    pub c11: Complex64,
    pub fit: LinearFit,
}

/// Fits the far field of a solution on `[lo, hi]` against
/// `{rho, rho ln rho, ln^2 rho / rho, ln rho / rho, 1/rho}`.
pub fn far_field(sol: &ZeroIcSolution, lo: f64, hi: f64) -> Result<FarField> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &r) in sol.grid.nodes().iter().enumerate() {
        if r >= lo && r <= hi {
            xs.push(r);
            ys.push(sol.node_jet(i)[0]);
        }
    }
    if xs.len() < 10 {
        return Err(Error::Domain(format!("far-field window [{lo}, {hi}] holds {} nodes", xs.len())));
    }
    let fit = fit_basis(
        &xs,
        &ys,
        5,
        |r| {
            let l = r.ln();
            [r, r * l, l * l / r, l / r, 1.0 / r].iter().map(|&v| Complex64::new(v, 0.0)).collect()
        },
        1e8,
    )?;
    Ok(FarField { c10: fit.coeffs[0], c11: fit.coeffs[1], fit })
}
