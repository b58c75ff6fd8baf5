//! Remote layer: the static profile `f0`, its phase `phi`, the defect `D0`
//! and the correction coefficients `g_{k,q,m,s}` for `k <= 2`, with
//!
//! `w_rem = f0 + sum t^(k + 2 nu q) e^(-i m Phi) (ln r - ln t)^s g_{k,q,m,s}(r)`,
//! `Phi = r^2/(4t) + 2 alpha0 ln t + phi(r)`.
//!
//! Sources for `k = 2` come from the formal residual of the `k = 1` sum:
//! its `t^0` coefficients with `m != 0, -1` give `B`, its `t^1`
//! coefficients with `m = 0, -1` give `C` (up to the factor `-i`).

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use crate::formal::{Ctx, Formal, Key};
use crate::geometry::RadialField;
use crate::grid::RadialGrid;
use crate::jet::CJet;
use crate::params::BlowupParams;
use crate::quad::{gauss5, gauss5_many};
use crate::selfsim::{FarCoefficients, SelfSimilarLayer};
use crate::taylor::{cutoff_theta_jet, Taylor};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};

type C = Complex64;

/// Taylor order carried for `f0`; four orders are spent on the way to `C`.
const F0_ORDER: usize = 6;
/// Taylor order of the stored entries (value and two derivatives).
const ENTRY_ORDER: usize = 2;
/// Quadrature nodes per unit of `ln r` for `phi` and the `k = 2, m = -1` integral.
const NODES_PER_LOG: f64 = 40.0;
/// Lower end of the radial tables, relative to delta.
const TABLE_FLOOR: f64 = 1e-5;
/// Radius (relative to delta) at which `hat C(0)` is sampled.
const HAT_C_ORIGIN: f64 = 1e-4;

fn cr(x: f64) -> C {
    C::new(x, 0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct RemoteOptions {
    /// Multiply every correction by `theta((r - delta)/delta)` so that
    /// `w_rem = 0` for `r >= 3 delta`.
    pub tail_cutoff: bool,
    /// Outer radius of the tables; with the tail cutoff `3 delta` suffices.
    pub r_max: Option<f64>,
    /// Nodes of the exported g-table grid.
    pub table_nodes: usize,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions { tail_cutoff: true, r_max: None, table_nodes: 400 }
    }
}

/// Membership in the index set with the truncation bounds for order `n_order`:
/// `q <= (2N+1)(2k-1)` for `m = 0, -1`, `q <= (2N+1)(2k-2)` otherwise.
pub fn in_omega(key: &Key, n_order: usize) -> bool {
    let (k, q, m, s) = (key.n, key.q as i32, key.m, key.s as i32);
    if k < 1 || s > q || (q - m).rem_euclid(2) != 0 {
        return false;
    }
    if m < -k.min(q) || m > (k - 1).min(q) {
        return false;
    }
    let base = 2 * n_order as i32 + 1;
    let cap = if m == 0 || m == -1 { base * (2 * k - 1) } else { base * (2 * k - 2) };
    q <= cap
}

/// The index set for `k <= k_max`, in lexicographic order.
pub fn omega(k_max: usize, n_order: usize) -> impl Iterator<Item = Key> {
    let base = 2 * n_order as i32 + 1;
    (1..=k_max as i32).flat_map(move |k| {
        let qmax = base * (2 * k - 1);
        (0..=qmax).flat_map(move |q| {
            (-k..k).flat_map(move |m| (0..=q).map(move |s| Key::new(k, q as u32, m, s as u32)))
        })
    })
    .filter(move |key| in_omega(key, n_order))
}

/// Jet of `f0 = theta(r/delta) sum_j sum_l beta0(j,l) (ln r)^l r^(2 i alpha0 + 2 nu (2j+1))`.
pub fn f0_jet(params: &BlowupParams, beta0: &[Vec<C>], r: f64, order: usize) -> Taylor {
    let x = Taylor::var(r, order);
    let cut = cutoff_theta_jet(&x.scale_re(1.0 / params.delta));
    if cut.is_zero() {
        return Taylor::zeros(order);
    }
    let lr = x.ln();
    let mut sum = Taylor::zeros(order);
    for (j, row) in beta0.iter().enumerate() {
        let pw = lr.scale(params.sigma(j)).exp();
        let mut lp = Taylor::constant(cr(1.0), order);
        for b in row {
            if *b != C::new(0.0, 0.0) {
                sum = &sum + &(&lp * &pw).scale(*b);
            }
            lp = &lp * &lr;
        }
    }
    &sum * &cut
}

/// `phi' = 2 Im(conj(f0) f0') / (1 + |f0|^2)`.
pub fn dphi_jet(f0: &Taylor) -> Taylor {
    let num = (&f0.conj() * &f0.deriv()).im().scale_re(2.0);
    num.div(&f0.truncate(num.order()).abs2().add_const(cr(1.0)))
}

/// `G(w) = 2 conj(w) (w_r^2 - w^2/r^2) / (1 + |w|^2)`.
pub fn nonlinearity(w: &Taylor, r: &Taylor) -> Taylor {
    let w1 = w.deriv();
    let wt = w.truncate(w1.order());
    let rr = r.truncate(w1.order());
    let sq = &(&w1 * &w1) - &(&wt * &wt).div(&(&rr * &rr));
    (&wt.conj() * &sq).scale_re(2.0).div(&wt.abs2().add_const(cr(1.0)))
}

/// `(-Delta + r^-2) f`.
pub fn radial_operator(f: &Taylor, r: &Taylor) -> Taylor {
    let f1 = f.deriv();
    let f2 = f1.deriv();
    let n = f2.order();
    let rr = r.truncate(n);
    &(&f.truncate(n).div(&(&rr * &rr)) - &f2) - &f1.truncate(n).div(&rr)
}

/// `D0 = (-Delta + r^-2) f0 + G(f0)`.
pub fn defect_jet(f0: &Taylor, r: &Taylor) -> Taylor {
    let g = nonlinearity(f0, r);
    &radial_operator(f0, r) + &g.truncate(f0.order() - 2)
}

/// Phase `phi(r) = int_0^r phi'` tabulated on a geometric grid.
#[derive(Debug, Clone)]
struct Cumulative {
    nodes: Vec<f64>,
    values: Vec<C>,
}

impl Cumulative {
    fn build(nodes: Vec<f64>, f: &dyn Fn(f64) -> C) -> Self {
        let mut values = vec![C::new(0.0, 0.0); nodes.len()];
        for i in 1..nodes.len() {
            values[i] = values[i - 1] + gauss5(|x| f(x), nodes[i - 1], nodes[i]);
        }
        Cumulative { nodes, values }
    }

    fn eval(&self, r: f64, f: &dyn Fn(f64) -> C) -> C {
        let i = match self.nodes.partition_point(|&x| x <= r) {
            0 => 0,
            i => i - 1,
        };
        let base = self.nodes[i];
        if r == base {
            return self.values[i];
        }
        self.values[i] + gauss5(|x| f(x), base, r)
    }
}

/// Running integral `I = int_0^r rho^-2 (hat C - hat C(0))` per `(q, s)`,
/// with `I` and its first three derivatives at each node.
#[derive(Debug, Clone, Default)]
struct HatTable {
    nodes: Vec<f64>,
    keys: Vec<(u32, u32)>,
    jets: Vec<Vec<[C; 4]>>,
}

/// Two-point Hermite interpolant matching the value and three derivatives at
/// both ends of a cell of width `h`, at local coordinate `s in [0, 1]`.
fn hermite7(a: &[C; 4], b: &[C; 4], h: f64, s: f64) -> C {
    static INV: OnceLock<DMatrix<f64>> = OnceLock::new();
    let inv = INV.get_or_init(|| {
        let mut m = DMatrix::<f64>::zeros(8, 8);
        for k in 0..4 {
            for p in k..8 {
                let fall: f64 = (p - k + 1..=p).map(|v| v as f64).product();
                if p == k {
                    m[(k, p)] = fall;
                }
                m[(4 + k, p)] = fall;
            }
        }
        m.try_inverse().expect("Hermite matrix is invertible")
    });
    let mut rhs = [C::new(0.0, 0.0); 8];
    let mut hp = 1.0;
    for k in 0..4 {
        rhs[k] = a[k] * hp;
        rhs[4 + k] = b[k] * hp;
        hp *= h;
    }
    let mut acc = C::new(0.0, 0.0);
    let mut sp = 1.0;
    for p in 0..8 {
        let coef: C = (0..8).map(|q| rhs[q] * inv[(p, q)]).sum();
        acc += coef * sp;
        sp *= s;
    }
    acc
}

fn log_nodes(lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi / lo).ln() * NODES_PER_LOG).ceil().max(8.0) as usize;
    let mut v = vec![0.0];
    v.extend((0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)));
    v
}

/// Everything the `k <= 2` entries need at one radius.
#[derive(Debug, Clone)]
pub struct Sources {
    pub r: f64,
    pub f0: Taylor,
    pub dphi: Taylor,
    /// `k = 1` entries, keyed with `n = k`.
    pub k1: Formal,
    /// Formal residual of `f0 + k1`, keys with `n <= 1`.
    pub residual: Formal,
}

#[derive(Debug, Clone)]
pub struct RemoteLayer {
    pub params: BlowupParams,
    pub beta0: Vec<Vec<C>>,
    pub beta1: Vec<Vec<C>>,
    /// Highest `k` of the corrections, `min(N, 2)`.
    pub k_max: usize,
    pub options: RemoteOptions,
    pub r_max: f64,
    pub grid: Arc<RadialGrid>,
    pub f0: RadialField,
    pub phi_r: RadialField,
    pub g_table: BTreeMap<Key, RadialField>,
    /// `hat C(0)` per `(q, s)` of the `k = 2, m = -1` entries.
    pub hat_c_origin: BTreeMap<(u32, u32), C>,
    phi: Cumulative,
    hat_g: HatTable,
}

/// Value of the correction at `(r, t)` with its derivatives.
#[derive(Debug, Clone, Copy)]
pub struct RemotePoint {
    /// `w, w_r, w_rr`.
    pub w: CJet,
    pub w_t: C,
}

/// The formal sum at one radius, ready for evaluation at any `t`.
#[derive(Debug, Clone)]
pub struct RemoteProfile {
    pub r: f64,
    pub phi: f64,
    nu: f64,
    alpha0: f64,
    w: Formal,
    w_r: Formal,
    w_rr: Formal,
    w_t: Formal,
}

impl RemoteProfile {
    pub fn at(&self, t: f64) -> RemotePoint {
        let ev = |f: &Formal| f.eval(self.nu, self.alpha0, self.r, self.phi, t);
        RemotePoint { w: [ev(&self.w), ev(&self.w_r), ev(&self.w_rr)], w_t: ev(&self.w_t) }
    }

    /// Evaluation with the fast phase `r^2/(4t)` replaced by `theta`.
    pub fn at_phase(&self, t: f64, theta: f64) -> RemotePoint {
        let big_phi = theta + 2.0 * self.alpha0 * t.ln() + self.phi;
        let ev = |f: &Formal| f.eval_with_phase(self.nu, self.r, big_phi, t);
        RemotePoint { w: [ev(&self.w), ev(&self.w_r), ev(&self.w_rr)], w_t: ev(&self.w_t) }
    }

    pub fn terms(&self) -> &Formal {
        &self.w
    }
}

impl RemoteLayer {
    pub fn new(params: &BlowupParams, beta0: Vec<Vec<C>>, beta1: Vec<Vec<C>>, options: RemoteOptions) -> Result<Self> {
        params.validate()?;
        let delta = params.delta;
        let r_max = match options.r_max {
            Some(r) => r,
            None if options.tail_cutoff => 3.0 * delta,
            None => 1.0,
        };
        if !(r_max > 0.0) {
            return Err(Error::InvalidParams("remote table radius must be positive".into()));
        }
        let grid = Arc::new(RadialGrid::geometric(r_max.max(4.0 * delta), options.table_nodes, delta * 1e-3)?);
        let empty = Cumulative { nodes: vec![0.0, 1.0], values: vec![C::new(0.0, 0.0); 2] };
        let mut layer = RemoteLayer {
            params: *params,
            beta0,
            beta1,
            k_max: params.order_n.min(2),
            options,
            r_max,
            grid: grid.clone(),
            f0: RadialField::zeros(grid.clone(), 1),
            phi_r: RadialField::zeros(grid.clone(), 1),
            g_table: BTreeMap::new(),
            hat_c_origin: BTreeMap::new(),
            phi: empty,
            hat_g: HatTable::default(),
        };
        let dphi = |x: f64| dphi_jet(&layer.f0_jet(x, 1)).value();
        let phi_nodes = log_nodes(TABLE_FLOOR * delta, 2.0 * delta);
        layer.phi = Cumulative::build(phi_nodes, &dphi);
        if layer.k_max >= 2 {
            layer.build_hat_g()?;
        }
        layer.fill_tables()?;
        Ok(layer)
    }

    pub fn f0_jet(&self, r: f64, order: usize) -> Taylor {
        f0_jet(&self.params, &self.beta0, r, order)
    }

    /// `phi(r)`, constant beyond `2 delta`.
    pub fn phi(&self, r: f64) -> f64 {
        let rr = r.min(2.0 * self.params.delta);
        self.phi.eval(rr, &|x| dphi_jet(&self.f0_jet(x, 1)).value()).re
    }

    /// The phase integral with the complex integrand
    /// `-i (conj(f0) f0' - f0 conj(f0)') / (1 + |f0|^2)`, kept complex.
    pub fn phi_complex(&self, r: f64) -> C {
        let delta = self.params.delta;
        let rr = r.min(2.0 * delta);
        let integrand = |x: f64| {
            let f = self.f0_jet(x, 1);
            let (z, dz) = (f.value(), f.deriv_at(1));
            C::new(0.0, -1.0) * (z.conj() * dz - z * dz.conj()) / (1.0 + z.norm_sqr())
        };
        let nodes: Vec<f64> = self.phi.nodes.iter().copied().filter(|&x| x < rr).chain([rr]).collect();
        nodes.windows(2).map(|w| gauss5(integrand, w[0], w[1])).sum()
    }

    /// `k = 1` entries and the formal residual of `f0 + k1` at `r`.
    pub fn sources(&self, r: f64) -> Sources {
        let p = &self.params;
        let f0 = self.f0_jet(r, F0_ORDER);
        let x = Taylor::var(r, F0_ORDER);
        let dphi = dphi_jet(&f0);
        let d0 = defect_jet(&f0, &x);
        let mut k1 = Formal::single(Key::new(1, 0, 0, 0), d0.scale(C::new(0.0, -1.0)));
        let weight = f0.abs2().add_const(cr(1.0));
        for (j, row) in self.beta1.iter().enumerate() {
            let q = 2 * j as u32 + 1;
            let pw = x.powc(C::new(-2.0 * p.nu * q as f64 - 2.0, -2.0 * p.alpha0));
            let base = &weight * &pw;
            for (s, b) in row.iter().enumerate() {
                if *b != C::new(0.0, 0.0) {
                    k1.push(Key::new(1, q, -1, s as u32), base.scale(*b));
                }
            }
        }
        let ctx = Ctx { nu: p.nu, alpha0: p.alpha0, r: x, dphi: dphi.clone(), n_max: 1 };
        let w = Formal::single(Key::ZERO, f0.clone()).add(&k1);
        let residual = w.residual(&ctx);
        Sources { r, f0, dphi, k1, residual }
    }

    /// `hat C_{2,q,-1,s} = r^(2 i alpha0 + 4 + 2 nu q) (1 + |f0|^2)^-1 C_{2,q,-1,s}`.
    fn hat_c(&self, src: &Sources) -> BTreeMap<(u32, u32), Taylor> {
        let p = &self.params;
        let x = Taylor::var(src.r, src.residual.order());
        let inv_w = src.f0.truncate(x.order()).abs2().add_const(cr(1.0)).recip();
        let mut out = BTreeMap::new();
        for (k, e) in src.residual.terms.range(Key::new(1, 0, i32::MIN, 0)..) {
            if k.n != 1 || k.m != -1 {
                continue;
            }
            let pw = x.powc(C::new(4.0 + 2.0 * p.nu * k.q as f64, 2.0 * p.alpha0));
            let c = e.scale(C::new(0.0, -1.0));
            out.insert((k.q, k.s), &(&c * &pw) * &inv_w);
        }
        out
    }

    fn build_hat_g(&mut self) -> Result<()> {
        let delta = self.params.delta;
        let origin = self.hat_c(&self.sources(HAT_C_ORIGIN * delta));
        let keys: Vec<(u32, u32)> = origin.keys().copied().collect();
        let b00: Vec<C> = origin.values().map(|v| v.value()).collect();
        for (k, b) in keys.iter().zip(&b00) {
            self.hat_c_origin.insert(*k, *b);
        }
        let nodes: Vec<f64> = log_nodes(TABLE_FLOOR * delta, self.r_max.max(2.0 * delta))[1..].to_vec();
        let integrand = |x: f64| {
            let h = self.hat_c(&self.sources(x));
            keys.iter()
                .zip(&b00)
                .map(|(k, b)| (h.get(k).map(|v| v.value()).unwrap_or(C::new(0.0, 0.0)) - b) / (x * x))
                .collect::<Vec<C>>()
        };
        let mut acc = gauss5_many(integrand, 0.0, nodes[0], keys.len());
        let mut jets = Vec::with_capacity(nodes.len());
        for (i, &x) in nodes.iter().enumerate() {
            if i > 0 {
                let inc = gauss5_many(integrand, nodes[i - 1], x, keys.len());
                acc.iter_mut().zip(inc).for_each(|(a, v)| *a += v);
            }
            let h = self.hat_c(&self.sources(x));
            let xt = Taylor::var(x, ENTRY_ORDER);
            let mut row = Vec::with_capacity(keys.len());
            for (j, k) in keys.iter().enumerate() {
                let d = match h.get(k) {
                    Some(v) => v.truncate(ENTRY_ORDER).add_const(-b00[j]).div(&(&xt * &xt)),
                    None => Taylor::zeros(ENTRY_ORDER),
                };
                row.push([acc[j], d.deriv_at(0), d.deriv_at(1), d.deriv_at(2)]);
            }
            jets.push(row);
        }
        if jets.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::QuadratureFailure { a: 0.0, b: self.r_max });
        }
        self.hat_g = HatTable { nodes, keys, jets };
        Ok(())
    }

    /// `hat g(r) = int_0^r rho^-2 (hat C - hat C(0)) - hat C(0)/r` as a jet. The
    /// integral is read from the table by Hermite interpolation.
    fn hat_g_jet(&self, key: (u32, u32), r: f64, hat_c: &Taylor) -> Result<Taylor> {
        let table = &self.hat_g;
        let (lo, hi) = (table.nodes[0], *table.nodes.last().unwrap());
        if r < lo || r > hi * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("r = {r} outside the remote table [{lo}, {hi}]")));
        }
        let j = table
            .keys
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| Error::Domain(format!("no k = 2 entry {key:?}")))?;
        let b00 = self.hat_c_origin[&key];
        let i = table.nodes.partition_point(|&x| x <= r).clamp(1, table.nodes.len() - 1);
        let (a, b) = (table.nodes[i - 1], table.nodes[i]);
        let value = hermite7(&table.jets[i - 1][j], &table.jets[i][j], b - a, (r - a) / (b - a)) - b00 / r;
        let x = Taylor::var(r, hat_c.order());
        let d = hat_c.div(&(&x * &x));
        let mut c = vec![value];
        for (k, v) in d.c.iter().enumerate() {
            c.push(v / (k + 1) as f64);
        }
        Ok(Taylor { c })
    }

    /// `hat g` by direct quadrature from the origin; slow, used to audit the table.
    pub fn hat_g_direct(&self, key: (u32, u32), r: f64) -> C {
        let b00 = self.hat_c_origin[&key];
        let f = |x: f64| {
            let h = self.hat_c(&self.sources(x));
            (h.get(&key).map(|v| v.value()).unwrap_or(C::new(0.0, 0.0)) - b00) / (x * x)
        };
        let nodes = log_nodes(TABLE_FLOOR * self.params.delta, r);
        nodes.windows(2).map(|w| gauss5(f, w[0], w[1])).sum::<C>() - b00 / r
    }

    /// `hat g` from the table.
    pub fn hat_g(&self, key: (u32, u32), r: f64) -> Result<C> {
        Ok(self.hat_g_jet(key, r, &Taylor::zeros(0))?.value())
    }

    /// `(q, s)` of the `k = 2, m = -1` entries.
    pub fn hat_keys(&self) -> &[(u32, u32)] {
        &self.hat_g.keys
    }

    /// All stored entries at `r`, keyed with `n = k`, without the tail cutoff.
    pub fn entries(&self, r: f64) -> Result<Formal> {
        let src = self.sources(r);
        self.entries_from(&src)
    }

    fn entries_from(&self, src: &Sources) -> Result<Formal> {
        let p = &self.params;
        let mut out = Formal::new();
        for (k, g) in &src.k1.terms {
            out.push(*k, g.truncate(ENTRY_ORDER));
        }
        if self.k_max < 2 {
            return Ok(out);
        }
        let r = src.r;
        let x = Taylor::var(r, src.residual.order());
        let r2 = &x * &x;
        // t^0 coefficients: (m (m+1) r^2 / 4) g_2 = B = -E.
        for (k, e) in &src.residual.terms {
            if k.n == 0 && k.m != 0 && k.m != -1 {
                let fac = (k.m * (k.m + 1)) as f64 / 4.0;
                out.push(Key { n: 2, ..*k }, e.div(&r2.scale_re(-fac)).truncate(ENTRY_ORDER));
            }
        }
        // m = 0 chains: (2 nu q + 2) g_s - (s+1) g_{s+1} = C_s = -i E(1,q,0,s).
        let mut chains: BTreeMap<u32, BTreeMap<u32, Taylor>> = BTreeMap::new();
        for (k, e) in &src.residual.terms {
            if k.n == 1 && k.m == 0 {
                chains.entry(k.q).or_default().insert(k.s, e.scale(C::new(0.0, -1.0)));
            }
        }
        for (q, cs) in chains {
            let smax = *cs.keys().max().unwrap();
            let denom = 2.0 * p.nu * q as f64 + 2.0;
            let mut above: Option<Taylor> = None;
            for s in (0..=smax).rev() {
                let c = cs.get(&s).cloned().unwrap_or_else(|| Taylor::zeros(ENTRY_ORDER));
                let mut g = c.truncate(ENTRY_ORDER);
                if let Some(a) = &above {
                    g = &g + &a.scale_re((s + 1) as f64);
                }
                let g = g.scale_re(1.0 / denom);
                out.push(Key::new(2, q, 0, s), g.clone());
                above = Some(g);
            }
        }
        // m = -1: g = r^(-2 i alpha0 - 3 - 2 nu q) (1 + |f0|^2) hat g.
        let hat = self.hat_c(src);
        for ((q, s), hc) in &hat {
            if !self.hat_g.keys.contains(&(*q, *s)) {
                continue;
            }
            let hg = self.hat_g_jet((*q, *s), r, hc)?;
            let xo = Taylor::var(r, hg.order());
            let pw = xo.powc(C::new(-3.0 - 2.0 * p.nu * *q as f64, -2.0 * p.alpha0));
            let w = src.f0.truncate(hg.order()).abs2().add_const(cr(1.0));
            out.push(Key::new(2, *q, -1, *s), (&(&pw * &w) * &hg).truncate(ENTRY_ORDER));
        }
        Ok(out)
    }

    /// Formal sum `f0 + corrections` at `r` (tail cutoff applied if configured).
    pub fn profile(&self, r: f64) -> Result<RemoteProfile> {
        let p = &self.params;
        let src = self.sources(r);
        let mut w = Formal::single(Key::ZERO, src.f0.truncate(ENTRY_ORDER));
        let mut corr = self.entries_from(&src)?;
        if self.options.tail_cutoff {
            let x = Taylor::var(r, ENTRY_ORDER);
            let cut = cutoff_theta_jet(&x.add_const(cr(-p.delta)).scale_re(1.0 / p.delta));
            corr = corr.times(&cut);
        }
        corr.terms.retain(|k, _| k.n as usize <= self.k_max);
        w = w.add(&corr);
        let ctx = Ctx {
            nu: p.nu,
            alpha0: p.alpha0,
            r: Taylor::var(r, ENTRY_ORDER),
            dphi: src.dphi.truncate(ENTRY_ORDER),
            n_max: i32::MAX,
        };
        let w_r = w.dr(&ctx);
        let w_rr = w_r.dr(&ctx);
        let w_t = w.dt(&ctx);
        Ok(RemoteProfile { r, phi: self.phi(r), nu: p.nu, alpha0: p.alpha0, w, w_r, w_rr, w_t })
    }

    /// Lower end of the remote validity region, `t^(1/2 - eps2)/10`.
    pub fn validity_radius(&self, t: f64) -> f64 {
        t.powf(0.5 - self.params.eps2) / 10.0
    }

    /// `w_rem(r, t)`.
    pub fn eval_remote(&self, r: f64, t: f64) -> Result<C> {
        Ok(self.eval_point(r, t)?.w[0])
    }

    pub fn eval_point(&self, r: f64, t: f64) -> Result<RemotePoint> {
        if !(t > 0.0) || r < self.validity_radius(t) * (1.0 - 1e-12) {
            return Err(Error::Domain(format!("r = {r} below the remote validity radius at t = {t}")));
        }
        if self.options.tail_cutoff && r >= 3.0 * self.params.delta {
            return Ok(RemotePoint { w: [C::new(0.0, 0.0); 3], w_t: C::new(0.0, 0.0) });
        }
        Ok(self.profile(r)?.at(t))
    }

    /// Equation residual `A_rem = -i w_t - Delta w + w/r^2 + G(w)` at `(r, t)`.
    pub fn residual_at(&self, r: f64, t: f64) -> Result<C> {
        let pt = self.eval_point(r, t)?;
        Ok(equation_residual(r, pt.w, pt.w_t))
    }

    /// `||A_rem(t)||_{L^2(r dr)}` over `[validity_radius(t), r_hi]` by the
    /// trapezoid rule on `n` uniform nodes.
    pub fn residual_l2_sampled(&self, t: f64, r_hi: f64, n: usize) -> Result<f64> {
        let lo = self.validity_radius(t);
        let h = (r_hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let r = lo + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * self.residual_at(r, t)?.norm_sqr() * r * h;
        }
        Ok(acc.sqrt())
    }

    /// Two-scale version of the same norm: at each radius `|A_rem|^2` is
    /// averaged over the fast phase `r^2/(4t)` (it enters only through
    /// `e^(-i m Phi)`), then integrated over a log-spaced grid. Accurate
    /// when `r^2/(4t)` sweeps many periods per cell of the grid.
    pub fn residual_l2_averaged(&self, t: f64, r_hi: f64, n: usize, phases: usize) -> Result<f64> {
        let lo = self.validity_radius(t);
        let nodes: Vec<f64> = (0..=n).map(|i| lo * (r_hi / lo).powf(i as f64 / n as f64)).collect();
        let dens = |r: f64| -> Result<f64> {
            if self.options.tail_cutoff && r >= 3.0 * self.params.delta {
                return Ok(0.0);
            }
            let prof = self.profile(r)?;
            let mut s = 0.0;
            for k in 0..phases {
                let pt = prof.at_phase(t, 2.0 * std::f64::consts::PI * k as f64 / phases as f64);
                s += equation_residual(r, pt.w, pt.w_t).norm_sqr();
            }
            Ok(s / phases as f64 * r)
        };
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            let m = 0.5 * (a + b);
            acc += (b - a) / 6.0 * (dens(a)? + 4.0 * dens(m)? + dens(b)?);
        }
        Ok(acc.sqrt())
    }

    fn fill_tables(&mut self) -> Result<()> {
        let nodes = self.grid.nodes().to_vec();
        let mut f0 = Vec::with_capacity(nodes.len());
        let mut phi = Vec::with_capacity(nodes.len());
        let mut table: BTreeMap<Key, Vec<C>> = BTreeMap::new();
        for (i, &r) in nodes.iter().enumerate() {
            f0.push(self.f0_jet(r, 0).value());
            phi.push(cr(self.phi(r)));
            if r <= 0.0 || r > self.r_max.max(2.0 * self.params.delta) {
                continue;
            }
            for (k, g) in &self.entries(r)?.terms {
                table.entry(*k).or_insert_with(|| vec![C::new(0.0, 0.0); nodes.len()])[i] = g.value();
            }
        }
        self.f0 = RadialField::new(self.grid.clone(), f0, 1)?;
        self.phi_r = RadialField::new(self.grid.clone(), phi, 0)?;
        self.g_table = table
            .into_iter()
            .map(|(k, v)| Ok((k, RadialField::new(self.grid.clone(), v, 1)?)))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// One CSV per stored entry, named `g_k{k}_q{q}_m{m}_s{s}.csv`, columns `r,re_g,im_g`.
    pub fn export_g_tables(&self, dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (k, field) in &self.g_table {
            let path = dir.join(format!("g_k{}_q{}_m{}_s{}.csv", k.n, k.q, k.m, k.s));
            let f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            crate::io::write_radial_field(f, field, "r", "g")?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// `-i w_t - w_rr - w_r/r + w/r^2 + G(w)` from pointwise jets.
pub fn equation_residual(r: f64, w: CJet, w_t: C) -> C {
    let g = 2.0 * w[0].conj() * (w[1] * w[1] - w[0] * w[0] / (r * r)) / (1.0 + w[0].norm_sqr());
    C::new(0.0, -1.0) * w_t - w[2] - w[1] / r + w[0] / (r * r) + g
}

/// Remote layer from a self-similar layer's far field.
pub fn build_remote(layer: &SelfSimilarLayer, far: &FarCoefficients, options: RemoteOptions) -> Result<RemoteLayer> {
    let j_max = layer.j_max;
    RemoteLayer::new(&layer.params, far.beta0[..=j_max].to_vec(), far.beta1[..=j_max].to_vec(), options)
}

/// `sup |W_ss - W_rem|` over `y in [t^-eps2/10, 10 t^-eps2]`, with
/// `W_rem(y, t) = e^(-i alpha(t)) w_rem(y t^(1/2), t)`.
pub fn remote_mismatch(ss: &SelfSimilarLayer, rem: &RemoteLayer, t: f64) -> Result<f64> {
    let p = &rem.params;
    let yc = t.powf(-p.eps2);
    let rot = C::from_polar(1.0, -p.alpha(t));
    let mut worst: f64 = 0.0;
    let n = 41;
    for i in 0..n {
        let y = yc / 10.0 * 100f64.powf(i as f64 / (n - 1) as f64);
        if y > ss.y_max {
            return Err(Error::Domain(format!("y = {y} beyond the self-similar range {}", ss.y_max)));
        }
        let w_ss = ss.w_ss(y, t)?.w[0];
        let w_rem = rot * rem.eval_remote(y * t.sqrt(), t)?;
        worst = worst.max((w_ss - w_rem).norm());
    }
    Ok(worst)
}

/// `||f0||_{H^1-dot} = (int (|f0'|^2 + |f0|^2/r^2) r dr)^(1/2)`.
pub fn f0_h1_seminorm(layer: &RemoteLayer) -> f64 {
    let delta = layer.params.delta;
    let nodes = log_nodes(TABLE_FLOOR * delta, 2.0 * delta);
    let dens = |r: f64| {
        let f = layer.f0_jet(r, 1);
        (f.deriv_at(1).norm_sqr() + f.value().norm_sqr() / (r * r)) * r
    };
    nodes.windows(2).map(|w| gauss5(dens, w[0], w[1])).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::build_inner;
    use crate::selfsim::{build_matched, far_field_fit, DEFAULT_Y_MAX};
    use std::sync::OnceLock;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn synthetic(order_n: usize) -> RemoteLayer {
        let p = BlowupParams::new(1.5, 0.3, 0.2, order_n).unwrap();
        let beta0 = vec![vec![c(-0.85, -0.26), c(0.53, -0.32)]];
        let beta1 = vec![vec![c(-2.0, 3.0), c(0.7, 0.8)]];
        RemoteLayer::new(&p, beta0, beta1, RemoteOptions::default()).unwrap()
    }

    struct Pipeline {
        ss: SelfSimilarLayer,
        remote: RemoteLayer,
    }

    fn pipeline() -> &'static Pipeline {
        static P: OnceLock<Pipeline> = OnceLock::new();
        P.get_or_init(|| {
            let p = BlowupParams::new(1.5, 0.3, 0.2, 2).unwrap();
            let grid = Arc::new(RadialGrid::geometric(1e4, 6000, 1e-3).unwrap());
            let exp = build_inner(p, grid).unwrap();
            let (ss, _) = build_matched(&exp, DEFAULT_Y_MAX).unwrap();
            let far = far_field_fit(&ss).unwrap();
            let remote = build_remote(&ss, &far, RemoteOptions::default()).unwrap();
            Pipeline { ss, remote }
        })
    }

    fn rel(a: C, b: C) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn f0_support_and_single_term() {
        let p = BlowupParams::new(1.5, 0.0, 0.2, 1).unwrap();
        let beta0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)]];
        for &r in &[0.01, 0.15, 0.25, 0.35] {
            let want = crate::taylor::cutoff_theta(r / 0.2) * r.powf(3.0);
            assert!((f0_jet(&p, &beta0, r, 0).value() - want).norm() < 1e-15);
        }
        assert_eq!(f0_jet(&p, &beta0, 0.6, 3).value(), c(0.0, 0.0));
        let layer = synthetic(1);
        assert_eq!(layer.f0_jet(0.6, 2).value(), c(0.0, 0.0));
    }

    #[test]
    fn phase_is_real_and_frozen() {
        let layer = synthetic(1);
        for &r in &[0.05, 0.2, 0.39, 0.6] {
            let z = layer.phi_complex(r);
            assert!(z.im.abs() < 1e-12, "r {r}: {z}");
            assert!((z.re - layer.phi(r)).abs() < 1e-12 * z.re.abs().max(1e-3));
        }
        assert_eq!(layer.phi(0.6), layer.phi(1.0));
        assert!(layer.phi(0.0).abs() < 1e-300);
        let p = BlowupParams::new(1.5, 0.0, 0.2, 1).unwrap();
        let real = RemoteLayer::new(&p, vec![vec![c(0.8, 0.0), c(-0.3, 0.0)]], vec![vec![]], RemoteOptions::default()).unwrap();
        assert_eq!(real.phi(0.3), 0.0);
    }

    #[test]
    fn radial_operator_on_a_power() {
        // (-Delta + r^-2) r^(2 nu) = (1 - 4 nu^2) r^(2 nu - 2)
        let nu = 1.37;
        for &r in &[0.02, 0.3, 1.7] {
            let x = Taylor::var(r, 4);
            let w = x.powc(c(2.0 * nu, 0.0));
            let got = radial_operator(&w, &x).value();
            let want = (1.0 - 4.0 * nu * nu) * r.powf(2.0 * nu - 2.0);
            assert!((got.re - want).abs() < 1e-12 * want.abs() && got.im.abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn defect_vanishes_outside_support_and_for_zero_profile() {
        let layer = synthetic(1);
        let x = Taylor::var(0.45, 4);
        assert!(defect_jet(&layer.f0_jet(0.45, 4), &x).is_zero());
        let zero = Taylor::zeros(4);
        assert!(defect_jet(&zero, &Taylor::var(0.1, 4)).is_zero());
    }

    #[test]
    fn defect_matches_formal_static_residual() {
        let layer = synthetic(1);
        for &r in &[0.03, 0.17, 0.31] {
            let src = layer.sources(r);
            let x = Taylor::var(r, F0_ORDER);
            let d0 = defect_jet(&src.f0, &x);
            let ctx = Ctx { nu: 1.5, alpha0: 0.3, r: x.clone(), dphi: src.dphi.clone(), n_max: 0 };
            let res = Formal::single(Key::ZERO, src.f0.clone()).residual(&ctx);
            let e = res.get(&Key::ZERO).unwrap();
            assert!(rel(e.value(), d0.value()) < 1e-12, "r {r}");
        }
    }

    #[test]
    fn first_order_entries() {
        let layer = synthetic(1);
        let r = 0.13;
        let src = layer.sources(r);
        let d0 = defect_jet(&src.f0, &Taylor::var(r, F0_ORDER));
        let g1000 = src.k1.get(&Key::new(1, 0, 0, 0)).unwrap();
        assert!((g1000.value() + C::i() * d0.value()).norm() < 1e-14 * d0.value().norm());
        assert!(src.k1.get(&Key::new(1, 2, 0, 1)).is_none());
        let p = &layer.params;
        let w = 1.0 + src.f0.value().norm_sqr();
        for s in 0..2u32 {
            let g = src.k1.get(&Key::new(1, 1, -1, s)).unwrap().value();
            let norm = g * C::new(r, 0.0).powc(c(2.0 * p.nu + 2.0, 2.0 * p.alpha0)) / w;
            assert!(rel(norm, layer.beta1[0][s as usize]) < 1e-13);
        }
        let p = BlowupParams::new(1.5, 0.3, 0.2, 2).unwrap();
        let quiet = RemoteLayer::new(&p, layer.beta0.clone(), vec![vec![c(0.0, 0.0); 2]], RemoteOptions::default()).unwrap();
        let e = quiet.entries(0.1).unwrap();
        assert!(e.terms.keys().all(|k| k.m != -1 || k.n > 2));
        assert!(quiet.hat_keys().is_empty());
    }

    #[test]
    fn second_order_transport_equation_is_consistent() {
        // The t^0 coefficients with m = 0, -1 vanish for the first-order entries.
        let layer = &pipeline().remote;
        for &r in &[0.05, 0.1, 0.2, 0.3] {
            let src = layer.sources(r);
            let scale = src.k1.terms.values().map(|g| g.value().norm()).fold(0.0, f64::max);
            for (k, e) in &src.residual.terms {
                if k.n <= 0 && (k.m == 0 || k.m == -1) {
                    assert!(e.value().norm() < 1e-12 * scale, "r {r} {k:?}: {}", e.value());
                }
            }
        }
    }

    #[test]
    fn zero_inputs_give_zero_second_order() {
        let p = BlowupParams::new(1.5, 0.3, 0.2, 2).unwrap();
        let layer = RemoteLayer::new(&p, vec![vec![c(0.0, 0.0); 2]], vec![vec![c(0.0, 0.0); 2]], RemoteOptions::default()).unwrap();
        for &r in &[0.05, 0.3] {
            let e = layer.entries(r).unwrap();
            assert!(e.terms.values().all(|g| g.is_zero()));
        }
        assert_eq!(layer.eval_remote(0.1, 1e-3).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn quadratic_entries_match_the_product_formula() {
        // g_{2,q,-2,s} = conj(f0)/(1+|f0|^2) sum g_{1,q1,-1,s1} g_{1,q2,-1,s2}
        let layer = &pipeline().remote;
        for &r in &[0.02, 0.1, 0.25] {
            let src = layer.sources(r);
            let e = layer.entries(r).unwrap();
            let f = src.f0.value();
            let fac = f.conj() / (1.0 + f.norm_sqr());
            let ones: Vec<(Key, C)> = src.k1.terms.iter().filter(|(k, _)| k.m == -1).map(|(k, g)| (*k, g.value())).collect();
            let mut want: BTreeMap<(u32, u32), C> = BTreeMap::new();
            for (a, ga) in &ones {
                for (b, gb) in &ones {
                    *want.entry((a.q + b.q, a.s + b.s)).or_default() += fac * ga * gb;
                }
            }
            for ((q, s), w) in want {
                let got = e.get(&Key::new(2, q, -2, s)).unwrap().value();
                assert!(rel(got, w) < 1e-8, "r {r} q {q} s {s}");
            }
        }
    }

    #[test]
    fn zero_mode_chain_and_linearized_source() {
        let layer = &pipeline().remote;
        let p = layer.params;
        let r = 0.12;
        let src = layer.sources(r);
        let e = layer.entries(r).unwrap();
        // (2 nu q + 2) g_s - (s + 1) g_{s+1} = C_s
        for (k, res) in &src.residual.terms {
            if k.n == 1 && k.m == 0 {
                let cs = res.value() * c(0.0, -1.0);
                let g = e.get(&Key::new(2, k.q, 0, k.s)).unwrap().value();
                let up = e.get(&Key::new(2, k.q, 0, k.s + 1)).map(|v| v.value()).unwrap_or_default();
                let lhs = (2.0 * p.nu * k.q as f64 + 2.0) * g - (k.s as f64 + 1.0) * up;
                assert!(rel(lhs, cs) < 1e-8, "{k:?}");
            }
        }
        // q = 0: C = -i [ (-Delta + r^-2) g + V0 g' + V1 g + V2 conj(g) ] with g = -i D0.
        let x = Taylor::var(r, F0_ORDER);
        let f = &src.f0;
        let g = defect_jet(f, &x).scale(c(0.0, -1.0));
        let (f0, f1) = (f.value(), f.deriv_at(1));
        let w = 1.0 + f0.norm_sqr();
        let v0 = 4.0 * f0.conj() * f1 / w;
        let v1 = -2.0 * f0.norm_sqr() * (2.0 + f0.norm_sqr()) / (r * r * w * w) - 2.0 * f0.conj().powi(2) * f1 * f1 / (w * w);
        let v2 = 2.0 * (r * r * f1 * f1 - f0 * f0) / (r * r * w * w);
        let lin = radial_operator(&g, &x).value() + v0 * g.deriv_at(1) + v1 * g.value() + v2 * g.value().conj();
        let want = c(0.0, -1.0) * lin / 2.0;
        let got = e.get(&Key::new(2, 0, 0, 0)).unwrap().value();
        assert!(rel(got, want) < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn transport_entries_solve_their_equation() {
        // r g' + (2 nu q + 3 + 2 i alpha0 - r (ln(1+|f0|^2))') g = C
        let layer = &pipeline().remote;
        let p = layer.params;
        for &r in &[0.01, 0.07, 0.2, 0.35, 0.55] {
            let src = layer.sources(r);
            let e = layer.entries(r).unwrap();
            let h = 1e-3 * r;
            let at = |x: f64| layer.entries(x).unwrap();
            let (m2, m1, p1, p2) = (at(r - 2.0 * h), at(r - h), at(r + h), at(r + 2.0 * h));
            let f = &src.f0;
            let lw = (f.value().conj() * f.deriv_at(1) + f.value() * f.deriv_at(1).conj()) / (1.0 + f.value().norm_sqr());
            for &(q, s) in layer.hat_keys() {
                let key = Key::new(2, q, -1, s);
                let v = |m: &Formal| m.get(&key).unwrap().value();
                let d = (v(&m2) - 8.0 * v(&m1) + 8.0 * v(&p1) - v(&p2)) / (12.0 * h);
                let g = e.get(&key).unwrap();
                assert!(rel(g.deriv_at(1), d) < 1e-8, "jet vs difference r {r} {key:?}");
                let lhs = r * g.deriv_at(1) + (c(2.0 * p.nu * q as f64 + 3.0, 2.0 * p.alpha0) - r * lw) * g.value();
                let cq = src.residual.get(&Key::new(1, q, -1, s)).unwrap().value() * c(0.0, -1.0);
                assert!(rel(lhs, cq) < 1e-8, "r {r} {key:?}: {lhs} vs {cq}");
            }
        }
    }

    #[test]
    fn interpolated_integral_matches_direct_quadrature() {
        let layer = &pipeline().remote;
        for &key in layer.hat_keys() {
            for &r in &[0.004, 0.0917, 0.39] {
                let a = layer.hat_g(key, r).unwrap();
                let b = layer.hat_g_direct(key, r);
                assert!(rel(a, b) < 1e-9, "{key:?} r {r}");
            }
        }
    }

    #[test]
    fn regular_selection_at_the_origin() {
        // hat C(r) -> hat C(0) as r -> 0, so the integrand of hat g is integrable.
        let layer = &pipeline().remote;
        let h = layer.hat_c(&layer.sources(1e-3 * layer.params.delta));
        for (k, v) in &layer.hat_c_origin {
            assert!(rel(h[k].value(), *v) < 1e-6, "{k:?}");
        }
    }

    #[test]
    fn entries_lie_in_the_index_set() {
        let layer = &pipeline().remote;
        let e = layer.entries(0.1).unwrap();
        assert!(e.terms.keys().all(|k| in_omega(k, 2)));
        let all: Vec<Key> = omega(2, 2).collect();
        assert!(e.terms.keys().all(|k| all.contains(k)));
        assert!(all.iter().all(|k| !(k.n == 2 && k.m == -2 && k.q > 10)));
        assert!(!in_omega(&Key::new(2, 12, -2, 0), 2));
        assert!(in_omega(&Key::new(2, 15, -1, 0), 2) && !in_omega(&Key::new(2, 17, -1, 0), 2));
    }

    #[test]
    fn evaluation_limits() {
        let layer = synthetic(2);
        let f = layer.f0_jet(0.15, 0).value();
        let w = layer.eval_remote(0.15, 1e-9).unwrap();
        assert!((w - f).norm() < 1e-8);
        assert!(matches!(layer.eval_remote(1e-3, 1e-2), Err(Error::Domain(_))));
        assert_eq!(layer.eval_remote(0.7, 1e-3).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn profile_derivatives_match_differences() {
        let layer = synthetic(2);
        let (r, t, h) = (0.11, 2e-3, 1e-6);
        let pt = layer.eval_point(r, t).unwrap();
        let w = |r: f64, t: f64| layer.eval_remote(r, t).unwrap();
        let d_r = (w(r + h, t) - w(r - h, t)) / (2.0 * h);
        let d_t = (w(r, t + h * 1e-2) - w(r, t - h * 1e-2)) / (2.0 * h * 1e-2);
        assert!(rel(pt.w[1], d_r) < 1e-6);
        assert!(rel(pt.w_t, d_t) < 1e-5);
    }

    #[test]
    fn two_scale_norm_matches_sampling() {
        let layer = synthetic(2);
        let t = 1e-3;
        let a = layer.residual_l2_sampled(t, 0.6, 6000).unwrap();
        let b = layer.residual_l2_averaged(t, 0.6, 300, 32).unwrap();
        assert!((a - b).abs() < 0.02 * a, "{a} vs {b}");
    }

    #[test]
    fn second_order_truncation_lowers_the_residual() {
        let two = &pipeline().remote;
        let mut one = two.clone();
        one.k_max = 1;
        let t = 1e-6;
        let a = one.residual_l2_averaged(t, 0.6, 300, 32).unwrap();
        let b = two.residual_l2_averaged(t, 0.6, 300, 32).unwrap();
        assert!(b < 0.1 * a, "k=1 {a} k=2 {b}");
    }

    #[test]
    fn self_similar_and_remote_agree_in_the_overlap() {
        let p = pipeline();
        let ms: Vec<f64> = [4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4].iter().map(|&t| remote_mismatch(&p.ss, &p.remote, t).unwrap()).collect();
        assert!(ms.windows(2).all(|w| w[1] < w[0]), "{ms:?}");
        let t = 1e-4;
        for &y in &[5.0, 10.0, 20.0] {
            let ws = p.ss.w_ss(y, t).unwrap().w[0];
            let wr = C::from_polar(1.0, -p.remote.params.alpha(t)) * p.remote.eval_remote(y * t.sqrt(), t).unwrap();
            assert!((ws - wr).norm() < 1e-3 * ws.norm(), "y {y}");
        }
    }

    #[test]
    fn h1_norm_scales_with_delta_up_to_the_log() {
        let p = pipeline();
        let b = &p.remote.beta0;
        let ratio = |d: f64| {
            let q = BlowupParams::new(1.5, 0.3, d, 2).unwrap();
            let l = RemoteLayer::new(&q, b.clone(), p.remote.beta1.clone(), RemoteOptions { table_nodes: 50, ..Default::default() }).unwrap();
            f0_h1_seminorm(&l) / (d.powf(2.0 * q.nu) * (b[0][0] + b[0][1] * d.ln()).norm())
        };
        let rs = [ratio(0.1), ratio(0.2), ratio(0.4)];
        let spread = (rs.iter().cloned().fold(0.0, f64::max) - rs.iter().cloned().fold(f64::MAX, f64::min)) / rs[1];
        assert!(spread < 0.3, "{rs:?}");
    }

    #[test]
    #[ignore = "the (ln r) r^(2 nu) term in f0 gives a spread of about 48%"]
    fn h1_norm_scales_with_delta_literally() {
        let p = pipeline();
        let ratio = |d: f64| {
            let q = BlowupParams::new(1.5, 0.3, d, 2).unwrap();
            let l = RemoteLayer::new(&q, p.remote.beta0.clone(), p.remote.beta1.clone(), RemoteOptions { table_nodes: 50, ..Default::default() }).unwrap();
            f0_h1_seminorm(&l) / d.powf(2.0 * q.nu)
        };
        let rs = [ratio(0.1), ratio(0.2), ratio(0.4)];
        let spread = (rs.iter().cloned().fold(0.0, f64::max) - rs.iter().cloned().fold(f64::MAX, f64::min)) / rs[1];
        assert!(spread < 0.3, "{rs:?}");
    }

    #[test]
    fn g_tables_export() {
        let layer = synthetic(2);
        let dir = std::env::temp_dir().join(format!("smap_gtab_{}", std::process::id()));
        let paths = layer.export_g_tables(&dir).unwrap();
        assert_eq!(paths.len(), layer.g_table.len());
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text.lines().next(), Some("r,re_g,im_g"));
        assert_eq!(text.lines().count(), layer.grid.len() + 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
