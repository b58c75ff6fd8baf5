use super::{dyadic, remote_options};
use crate::config::Config;
use crate::error::CliError;
use crate::output::{complex, complex_table, Output};
use serde_json::json;
use smap::io::{write_radial_field, write_rows};
use smap::remote::{build_remote, remote_mismatch};
use smap::selfsim::{build_matched, far_field_fit, overlap_mismatch, PROFILES};
use std::path::Path;

pub fn run(config: &Config, dir: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let ts = dyadic("profiles.points", config.f64("profiles.t0"), config.usize("profiles.points"))?;
    let samples = config.usize("profiles.samples");
    if samples < 2 {
        return Err(CliError::Config("profiles.samples: at least 2 required".into()));
    }
    let inner = super::inner_expansion(config, params)?;
    let (selfsim, boundary) = build_matched(&inner, config.f64("selfsim.y_max"))?;
    let far = far_field_fit(&selfsim)?;
    let remote = build_remote(&selfsim, &far, remote_options(config))?;

    let mut out = Output::new(dir, config)?;
    for k in 1..=inner.order() {
        let layer = inner.layer(k);
        out.text(&format!("inner/z{k}.csv"), |w| write_radial_field(w, &layer, "rho", &format!("z{k}")))?;
    }
    // log-spaced y from 1e-3 to y_max
    let (lo, hi) = (1e-3, selfsim.y_max);
    let ys: Vec<f64> = (0..samples).map(|i| lo * (hi / lo).powf(i as f64 / (samples - 1) as f64)).collect();
    for &(j, l) in PROFILES.iter().filter(|p| p.0 <= selfsim.j_max) {
        let rows = ys.iter().map(|&y| selfsim.profile(j, l, y).map(|w| [y, w[0].re, w[0].im])).collect::<Result<Vec<_>, _>>()?;
        out.text(&format!("selfsim/W_{j}_{l}.csv"), |w| write_rows(w, &format!("y,re_W{j}{l},im_W{j}{l}"), rows))?;
    }
    for (key, field) in &remote.g_table {
        out.text(&format!("remote/g_k{}_q{}_m{}_s{}.csv", key.n, key.q, key.m, key.s), |w| write_radial_field(w, field, "r", "g"))?;
    }

    let mut ladder = Vec::with_capacity(ts.len());
    for &t in &ts {
        let inner_ss = overlap_mismatch(&selfsim, &inner, t)?;
        // the remote overlap needs y up to 10 t^-eps2, which may exceed the march
        let ss_remote = remote_mismatch(&selfsim, &remote, t).ok();
        ladder.push((t, inner_ss, ss_remote));
    }
    out.text("matching.csv", |w| write_rows(w, "t,inner_selfsim,selfsim_remote", ladder.iter().map(|r| [r.0, r.1, r.2.unwrap_or(f64::NAN)])))?;
    let decreasing = ladder.windows(2).all(|w| w[1].1 < w[0].1);
    let results = json!({
        "inner_order": inner.order(),
        "selfsim_j_max": selfsim.j_max,
        "a": selfsim.a.iter().map(|&z| complex(z)).collect::<Vec<_>>(),
        "b": selfsim.b.iter().map(|&z| complex(z)).collect::<Vec<_>>(),
        "a0": complex(selfsim.a[0]),
        "b0": complex(selfsim.b[0]),
        "solvability": selfsim.solvability.iter().map(|&z| complex(z)).collect::<Vec<_>>(),
        "boundary_fit_condition": boundary.cond,
        "handoff_mismatch": selfsim.handoff_mismatch,
        "beta0": complex_table(&remote.beta0),
        "beta1": complex_table(&remote.beta1),
        "far_field_residual": far.residual,
        "overlap": ladder.iter().map(|r| json!({"t": r.0, "inner_selfsim": r.1, "selfsim_remote": r.2})).collect::<Vec<_>>(),
        "inner_selfsim_decreasing": decreasing,
    });
    out.finish("profiles", config, results)
}
