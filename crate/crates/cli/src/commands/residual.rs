use super::{dyadic, solution};
use crate::config::Config;
use crate::error::CliError;
use crate::output::Output;
use serde_json::json;
use smap::assembler::{eval_u_n, log_slope, residual_grid, residual_r_n, ApproximateSolution};
use smap::io::{write_rows, write_sphere_field};
use std::path::Path;
use std::sync::Arc;

/// `(t, L2, H1, weighted L2)` over the ladder, on one grid resolving the smallest t.
fn ladder(sol: &ApproximateSolution, ts: &[f64], r_max: f64) -> Result<Vec<[f64; 4]>, CliError> {
    let grid = residual_grid(&sol.params, ts[ts.len() - 1], r_max)?;
    ts.iter()
        .map(|&t| {
            let r = residual_r_n(sol, t, grid.clone())?;
            Ok([t, r.l2, r.h1, r.weighted_l2])
        })
        .collect()
}

fn slope(rows: &[[f64; 4]]) -> f64 {
    log_slope(&rows.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>())
}

pub fn run(config: &Config, dir: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let ts = dyadic("residual.points", config.f64("residual.t0"), config.usize("residual.points"))?;
    let r_max = config.f64("residual.r_max");
    let n = params.order_n;
    let sol = solution(config, params)?;
    let rows = ladder(&sol, &ts, r_max)?;
    let fitted = slope(&rows);

    let mut out = Output::new(dir, config)?;
    out.text("residual.csv", |w| write_rows(w, "t,L2,H1,weightedL2", &rows))?;
    let mut slopes = vec![(n, fitted)];
    if config.bool("residual.compare") {
        for other in [1, 2].into_iter().filter(|&m| m != n) {
            let p = smap::BlowupParams { order_n: other, ..params };
            slopes.push((other, slope(&ladder(&solution(config, p)?, &ts, r_max)?)));
        }
        slopes.sort_by_key(|s| s.0);
    }
    // the residual is bounded by t^N
    out.text("slopes.csv", |w| write_rows(w, "order_n,slope,target", slopes.iter().map(|&(m, s)| [m as f64, s, m as f64])))?;
    if config.bool("residual.dump_un") {
        let grid = residual_grid(&params, ts[ts.len() - 1], r_max)?;
        let u = eval_u_n(&sol, ts[0], Arc::clone(&grid))?;
        out.text("u_n.csv", |w| write_sphere_field(w, &u))?;
    }
    let results = json!({
        "ladder": rows.iter().map(|r| json!({"t": r[0], "N": n, "L2": r[1], "H1": r[2], "weightedL2": r[3]})).collect::<Vec<_>>(),
        "slope": fitted,
        "target": n as f64,
        "meets_target": fitted >= n as f64,
        "slopes": slopes.iter().map(|&(m, s)| json!({"N": m, "slope": s, "target": m as f64})).collect::<Vec<_>>(),
    });
    out.finish("residual", config, results)
}
