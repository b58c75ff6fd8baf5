use super::solution;
use crate::config::Config;
use crate::error::CliError;
use crate::output::Output;
use serde_json::json;
use smap::assembler::{eval_u_n, log_slope, residual_grid, ApproximateSolution};
use smap::evolve::{integrate, DtPolicy, FlowConfig, FlowState, Reference, RunReport};
use smap::io::write_sphere_field;
use smap::{HarmonicProfile, RadialGrid, SphereField, Vec3};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

const GNUPLOT: &str = "set datafile separator ','
set key autotitle columnhead
set logscale y
set multiplot layout 2,2
plot 'evolve.csv' using 1:2 with linespoints title 'energy'
plot 'evolve.csv' using 1:9 with linespoints title 'prox H1', '' using 1:10 with linespoints title 'prox wL2'
unset logscale y
set logscale xy
plot 'evolve.csv' using 1:7 with linespoints title 'lambda fit'
unset logscale xy
plot 'evolve.csv' using 1:8 with linespoints title 'alpha fit'
unset multiplot
";

/// Slope of `ln lambda_fit` against `ln t` over the rows with a fitted scale.
fn lambda_slope(report: &RunReport) -> f64 {
    let pts: Vec<(f64, f64)> = report.rows.iter().filter(|r| r.lambda_fit.is_finite() && r.t > 0.0).map(|r| (r.t, r.lambda_fit)).collect();
    log_slope(&pts)
}

pub fn run(config: &Config, dir: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let t1 = config.f64("evolve.t1");
    let duration = config.f64("evolve.duration");
    if !(duration > 0.0) {
        return Err(CliError::Config("evolve.duration must be positive".into()));
    }
    let t_end = match config.raw("evolve.direction") {
        "forward" => t1 + duration,
        _ => t1 - duration,
    };
    let initial = config.raw("evolve.initial");
    if initial == "approximate" && !(t1 > 0.0 && t_end > 0.0) {
        return Err(CliError::Config(format!("evolve: u^(N) needs t > 0 over the run, got [{t1}, {t_end}]")));
    }
    let r_max = config.f64("evolve.r_max");
    let stability = config.f64("evolve.stability");
    let policy = match config.opt_f64("evolve.dt") {
        Some(dt) => DtPolicy::Fixed(dt),
        None => DtPolicy::SpacingFraction(stability),
    };

    let mut sol: Option<ApproximateSolution> = None;
    let (grid, v0) = if initial == "approximate" {
        let s = solution(config, params)?;
        let grid = residual_grid(&params, t1.min(t_end), r_max)?;
        let v = eval_u_n(&s, t1, grid.clone())?;
        sol = Some(s);
        (grid, v)
    } else {
        let grid = Arc::new(RadialGrid::geometric(r_max, config.usize("evolve.nodes"), config.f64("evolve.first_step"))?);
        let v = if initial == "harmonic" {
            let q = HarmonicProfile::new(1);
            SphereField::from_fn(grid.clone(), 1, |r| q.q(r))?
        } else {
            SphereField::constant(grid.clone(), Vec3::z())
        };
        (grid, v)
    };
    let reference = match &sol {
        Some(s) => Reference::Approximate(s),
        None => Reference::Fixed(&v0),
    };
    let state = FlowState::new(t1, v0.clone(), FlowConfig { stability, ..FlowConfig::default() });
    let h_min = state.op.h_min;
    let (end, report) = integrate(state, t_end, policy, reference)?;

    let mut out = Output::new(dir, config)?;
    out.text("evolve.csv", |w| report.write_csv(w))?;
    out.text("final.csv", |w| write_sphere_field(w, &end.v))?;
    out.text("evolve.gp", |w| w.write_all(GNUPLOT.as_bytes()))?;
    let prox = |f: fn(&smap::evolve::ReportRow) -> f64| report.rows.iter().map(f).filter(|x| x.is_finite()).fold(f64::NAN, f64::max);
    let results = json!({
        "params": params,
        "initial": initial,
        "t1": t1,
        "t_end": t_end,
        "t_reached": end.t,
        "grid": {"nodes": grid.len(), "r_max": grid.r_max(), "h_min": h_min},
        "dt_policy": match policy {
            DtPolicy::SpacingFraction(c) => json!({"kind": "spacing_fraction", "c": c}),
            DtPolicy::Fixed(dt) => json!({"kind": "fixed", "dt": dt}),
        },
        "dt": report.dt,
        "steps": report.steps,
        "reach": report.reach,
        "max_renorm": report.max_renorm,
        "max_prox_H1": prox(|r| r.prox_h1),
        "max_prox_wL2": prox(|r| r.prox_wl2),
        "lambda_slope": lambda_slope(&report),
        "lambda_slope_target": -(0.5 + params.nu),
    });
    out.finish("evolve", config, results)
}
