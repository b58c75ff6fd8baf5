//! Adaptive Dormand-Prince 5(4) integrator for complex first-order systems.

use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-14, max_steps: 2_000_000 }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Stateful stepper remembering its step size between calls.
#[derive(Debug, Clone)]
pub struct Dopri {
    pub opts: OdeOptions,
    h: f64,
}

impl Dopri {
    pub fn new(opts: OdeOptions, h0: f64) -> Self {
        Dopri { opts, h: h0 }
    }

    /// Advances `y` from `x` to `x1` (either direction).
    pub fn advance<F>(&mut self, f: &F, x: f64, y: &mut [Complex64], x1: f64) -> Result<()>
    where
        F: Fn(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        let dir = if x1 >= x { 1.0 } else { -1.0 };
        let mut k = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        let mut xc = x;
        let mut steps = 0;
        let span = (x1 - x).abs();
        if span == 0.0 {
            return Ok(());
        }
        let mut h = self.h.abs().min(span) * dir;
        while (x1 - xc) * dir > 0.0 {
            if steps > self.opts.max_steps {
                return Err(Error::OdeFailure(format!("step budget exhausted at x = {xc}")));
            }
            steps += 1;
            let last = (xc + h - x1) * dir >= 0.0;
            if last {
                h = x1 - xc;
            }
            f(xc, y, &mut k[0]);
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * (h * A[s][j]);
                        }
                    }
                    tmp[i] = acc;
                }
                f(xc + C[s] * h, &tmp, &mut k[s]);
            }
            let mut err: f64 = 0.0;
            let mut ynew = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                let mut y5 = y[i];
                let mut e = Complex64::new(0.0, 0.0);
                for s in 0..7 {
                    y5 += k[s][i] * (h * B5[s]);
                    e += k[s][i] * (h * (B5[s] - B4[s]));
                }
                let sc = self.opts.atol + self.opts.rtol * y[i].norm().max(y5.norm());
                err = err.max(e.norm() / sc);
                ynew[i] = y5;
            }
            if !err.is_finite() {
                return Err(Error::OdeFailure(format!("non-finite state at x = {xc}")));
            }
            if err <= 1.0 {
                xc = if last { x1 } else { xc + h };
                y.copy_from_slice(&ynew);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = h * fac;
                }
                h *= fac;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h.abs() < 1e-14 * xc.abs().max(1.0) {
                    return Err(Error::OdeFailure(format!("step size underflow at x = {xc}")));
                }
            }
        }
        Ok(())
    }
}
