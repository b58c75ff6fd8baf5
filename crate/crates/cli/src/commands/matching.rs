use super::{dyadic, solution};
use crate::config::Config;
use crate::error::CliError;
use crate::output::Output;
use serde_json::json;
use smap::assembler::{eval_u_n, log_slope, residual_grid};
use smap::fit::slope;
use smap::io::write_rows;
use smap::modulation::fit_modulation;
use std::path::Path;

pub fn run(config: &Config, dir: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let ts = dyadic("match.points", config.f64("match.t0"), config.usize("match.points"))?;
    let sol = solution(config, params)?;
    let grid = residual_grid(&params, ts[ts.len() - 1], config.f64("match.r_max"))?;
    let mut rows = Vec::with_capacity(ts.len());
    for &t in &ts {
        let fit = fit_modulation(&eval_u_n(&sol, t, grid.clone())?)?;
        rows.push([t, fit.lambda, fit.alpha, fit.residual, params.lambda(t), params.alpha(t)]);
    }
    let lambda_slope = log_slope(&rows.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>());
    let lt: Vec<f64> = rows.iter().map(|r| r[0].ln()).collect();
    let alpha: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let alpha_slope = if rows.len() < 2 { f64::NAN } else { slope(&lt, &alpha) };

    let mut out = Output::new(dir, config)?;
    out.text("match.csv", |w| write_rows(w, "t,lambda,alpha,residual,lambda_model,alpha_model", &rows))?;
    let results = json!({
        "lambda_slope": lambda_slope,
        "lambda_slope_target": -(0.5 + params.nu),
        "alpha_slope": alpha_slope,
        "alpha_slope_target": params.alpha0,
    });
    out.finish("match", config, results)
}
