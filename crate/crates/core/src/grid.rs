//! Radial grids, finite-difference stencils on nonuniform nodes, local
//! interpolation and cumulative quadrature.

use crate::error::{Error, Result};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// Values that can be combined linearly by stencil weights.
pub trait Linear: Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Copy + Zero + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>> Linear for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spacing {
    Uniform,
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
}

impl RadialGrid {
    pub fn from_nodes(nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if nodes.len() < 8 {
            return Err(Error::InvalidGrid(format!("{} nodes, at least 8 required", nodes.len())));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid("first node must be 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes.iter().all(|r| r.is_finite()) {
            return Err(Error::InvalidGrid("nodes must be finite and strictly increasing".into()));
        }
        Ok(RadialGrid { nodes, spacing })
    }

    pub fn uniform(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0) || n < 2 {
            return Err(Error::InvalidGrid("uniform grid needs r_max > 0".into()));
        }
        let h = r_max / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        nodes[n - 1] = r_max;
        Self::from_nodes(nodes, Spacing::Uniform)
    }

    /// Nodes `r_i = h0 (q^i - 1)/(q - 1)` with the ratio chosen so the last node is `r_max`.
    pub fn geometric(r_max: f64, n: usize, first_step: f64) -> Result<Self> {
        if n < 8 || !(first_step > 0.0) || !(r_max > first_step * (n - 1) as f64) {
            return Err(Error::InvalidGrid(format!(
                "geometric grid needs r_max > h0 (n-1) (r_max = {r_max}, h0 = {first_step}, n = {n})"
            )));
        }
        let m = (n - 1) as f64;
        let span = |q: f64| first_step * ((m * q.ln()).exp_m1() / (q - 1.0));
        let (mut lo, mut hi) = (1.0 + 1e-15, 2.0);
        while span(hi) < r_max {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if span(mid) < r_max {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = 0.5 * (lo + hi);
        let mut nodes: Vec<f64> =
            (0..n).map(|i| first_step * (((i as f64) * q.ln()).exp_m1() / (q - 1.0))).collect();
        nodes[n - 1] = r_max;
        Self::from_nodes(nodes, Spacing::Geometric)
    }

    /// Geometric grid whose first step resolves the scale `scale` with `per_scale` points.
    pub fn geometric_resolving(r_max: f64, n: usize, scale: f64, per_scale: f64) -> Result<Self> {
        Self::geometric(r_max, n, scale / per_scale)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// Largest spacing among the panels that intersect `[0, r]`.
    pub fn max_spacing_below(&self, r: f64) -> f64 {
        let mut h: f64 = 0.0;
        for w in self.nodes.windows(2) {
            h = h.max(w[1] - w[0]);
            if w[1] >= r {
                break;
            }
        }
        h
    }

    /// Index `i` with `r_i <= x < r_{i+1}`, clamped to the last panel.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return 0;
        }
        if x >= self.nodes[n - 1] {
            return n - 2;
        }
        match self.nodes.binary_search_by(|r| r.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        }
    }

    /// Trapezoid-free quadrature weights `w_i` with `sum w_i f_i ~ int_0^rmax f dr`,
    /// exact for piecewise cubics.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for panel in 0..self.len() - 1 {
            let (start, pw) = panel_weights(&self.nodes, panel);
            for (k, v) in pw.iter().enumerate() {
                w[start + k] += v;
            }
        }
        w
    }

    /// Quadrature weights for `2 pi int r f dr`.
    pub fn area_weights(&self) -> Vec<f64> {
        self.quadrature_weights()
            .iter()
            .zip(&self.nodes)
            .map(|(w, r)| 2.0 * std::f64::consts::PI * w * r)
            .collect()
    }

    pub fn integrate<T: Linear>(&self, f: &[T]) -> T {
        let w = self.quadrature_weights();
        f.iter().zip(&w).fold(T::zero(), |acc, (v, w)| acc + *v * *w)
    }

    /// Running integral `F_i = int_0^{r_i} f dr` with fourth-order panel rules.
    pub fn cumulative<T: Linear>(&self, f: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for panel in 0..self.len() - 1 {
            let (start, pw) = panel_weights(&self.nodes, panel);
            let inc = pw.iter().enumerate().fold(T::zero(), |acc, (k, w)| acc + f[start + k] * *w);
            out[panel + 1] = out[panel] + inc;
        }
        out
    }
}

/// Weights of the panel `[x_p, x_{p+1}]` integrating the cubic through four neighboring nodes.
fn panel_weights(x: &[f64], p: usize) -> (usize, [f64; 4]) {
    let n = x.len();
    let start = if p == 0 { 0 } else { (p - 1).min(n - 4) };
    let pts = &x[start..start + 4];
    let (a, b) = (x[p], x[p + 1]);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let g = (0.6f64).sqrt();
    let gauss = [(-g, 5.0 / 9.0), (0.0, 8.0 / 9.0), (g, 5.0 / 9.0)];
    let mut w = [0.0; 4];
    for (xi, wi) in gauss {
        let xg = mid + half * xi;
        let c = fornberg(xg, pts, 0);
        for k in 0..4 {
            w[k] += half * wi * c[0][k];
        }
    }
    (start, w)
}

/// Fornberg's recursion: weights `c[d][j]` of derivative order `d <= m` at `x0`
/// from the nodes `x`.
pub fn fornberg(x0: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - x0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Per-node first and second derivative stencils.
#[derive(Debug, Clone)]
pub struct DiffOp {
    start: Vec<usize>,
    d1: Vec<Vec<f64>>,
    d2: Vec<Vec<f64>>,
}

impl DiffOp {
    pub fn new(grid: &RadialGrid, width: usize) -> Self {
        let x = grid.nodes();
        let n = x.len();
        let width = width.min(n);
        let half = width / 2;
        let mut start = Vec::with_capacity(n);
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for i in 0..n {
            let s = i.saturating_sub(half).min(n - width);
            let c = fornberg(x[i], &x[s..s + width], 2);
            start.push(s);
            d1.push(c[1].clone());
            d2.push(c[2].clone());
        }
        DiffOp { start, d1, d2 }
    }

    /// Derivative weights sum to zero, so differences against the center value
    /// are combined to keep roundoff proportional to the local variation.
    fn apply<T: Linear>(&self, w: &[Vec<f64>], f: &[T]) -> Vec<T> {
        w.iter()
            .zip(&self.start)
            .enumerate()
            .map(|(i, (wi, &s))| wi.iter().enumerate().fold(T::zero(), |acc, (k, c)| acc + (f[s + k] - f[i]) * *c))
            .collect()
    }

    pub fn d1<T: Linear>(&self, f: &[T]) -> Vec<T> {
        self.apply(&self.d1, f)
    }

    pub fn d2<T: Linear>(&self, f: &[T]) -> Vec<T> {
        self.apply(&self.d2, f)
    }
}

/// Local Lagrange interpolation of samples (value and first two derivatives).
pub fn interpolate<T: Linear>(grid: &RadialGrid, f: &[T], x: f64, width: usize) -> [T; 3] {
    let nodes = grid.nodes();
    let n = nodes.len();
    let width = width.min(n);
    let i = grid.locate(x);
    let s = (i + 1).saturating_sub(width / 2).min(n - width);
    let c = fornberg(x, &nodes[s..s + width], 2);
    let mut out = [T::zero(); 3];
    for (d, o) in out.iter_mut().enumerate() {
        *o = c[d].iter().enumerate().fold(T::zero(), |acc, (k, w)| acc + f[s + k] * *w);
    }
    out
}
