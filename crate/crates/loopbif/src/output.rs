//! Bit-exact artifact emission: branch and family CSVs, plot files, and
//! structured-text reports. Floats are rendered with 17 significant digits
//! so every written value round-trips to the same binary double; all files
//! end lines with a single linefeed and always carry a header row.

use crate::continuation::Branch;
use crate::family::{FamilyResult, LoopReport, SigmaSplit};
use crate::mesh::Grid;
use crate::system::SolutionPoint;
use crate::{Error, Result};
use std::path::Path;

/// 17-significant-digit rendering: enough to reconstruct the exact double.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, contents.as_bytes()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn quad_l2(g: &Grid, v: &[f64]) -> f64 {
    let w = g.trap_weights();
    v.iter().zip(&w).map(|(&x, &wi)| wi * x * x).sum::<f64>().sqrt()
}

/// Branch CSV: one row per point with
/// `eps, frame, index, param, norm_inf, norm_l2, min_v, residual_norm`.
pub fn write_branch_csv(path: &Path, g: &Grid, b: &Branch) -> Result<()> {
    let mut out = String::from("eps,frame,index,param,norm_inf,norm_l2,min_v,residual_norm\n");
    for (i, pt) in b.points.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(b.eps),
            pt.frame,
            i,
            fmt_f64(pt.param),
            fmt_f64(pt.norm_inf()),
            fmt_f64(quad_l2(g, &pt.v)),
            fmt_f64(pt.min_v),
            fmt_f64(pt.residual_norm),
        ));
    }
    write_file(path, &out)
}

/// Plot-ready two-column file `(param, norm_inf)`.
pub fn write_plot_csv(path: &Path, b: &Branch) -> Result<()> {
    let mut out = String::from("param,norm_inf\n");
    for pt in &b.points {
        out.push_str(&format!("{},{}\n", fmt_f64(pt.param), fmt_f64(pt.norm_inf())));
    }
    write_file(path, &out)
}

/// Sidecar metadata record for a branch.
pub fn write_branch_meta(path: &Path, b: &Branch) -> Result<()> {
    let termination = b.termination.map(|t| {
        serde_json::json!({
            "tag": t.tag.to_string(),
            "location": { "param": fmt_f64(t.location.0), "norm_inf": fmt_f64(t.location.1) },
        })
    });
    let meta = serde_json::json!({
        "eps": fmt_f64(b.eps),
        "frame": b.frame.to_string(),
        "origin": b.origin,
        "origin_param": fmt_f64(b.origin_param),
        "points": b.points.len(),
        "termination": termination,
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    write_file(path, &format!("{text}\n"))
}

/// Family summary CSV:
/// `eps, mu_eps, cstar_eps, hausdorff_gap, termination_tag`.
/// The gap column holds the distance to the previous (coarser) branch and
/// is empty on the first row.
pub fn write_family_summary(path: &Path, fam: &FamilyResult) -> Result<()> {
    let mut out = String::from("eps,mu_eps,cstar_eps,hausdorff_gap,termination_tag\n");
    for (i, &eps) in fam.eps_sequence.iter().enumerate() {
        let gap = if i == 0 { String::new() } else { fmt_f64(fam.hausdorff_gaps[i - 1]) };
        let cstar = fam.cstar_values[i].map(fmt_f64).unwrap_or_default();
        let tag = fam.branches[i]
            .termination
            .map(|t| t.tag.to_string())
            .unwrap_or_else(|| "none".to_string());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(eps),
            fmt_f64(fam.mu_eps_values[i]),
            cstar,
            gap,
            tag,
        ));
    }
    write_file(path, &out)
}

/// Loop verdict as a `key = value` report.
pub fn write_loop_report(path: &Path, r: &LoopReport) -> Result<()> {
    let text = format!(
        "starts_at_origin = {}\n\
         ends_at_origin = {}\n\
         all_lambda_nonneg = {}\n\
         no_trivial_interior = {}\n\
         two_solutions_at_small_lambda = {}\n\
         lambda_probe = {}\n\
         max_lambda = {}\n\
         max_norm = {}\n\
         solutions_found = {}\n\
         probe_separation = {}\n\
         origin_tol = {}\n",
        r.starts_at_origin,
        r.ends_at_origin,
        r.all_lambda_nonneg,
        r.no_trivial_interior,
        r.two_solutions_at_small_lambda,
        fmt_f64(r.lambda_probe),
        fmt_f64(r.max_lambda),
        fmt_f64(r.max_norm),
        r.solutions_found,
        fmt_f64(r.probe_separation),
        fmt_f64(r.origin_tol),
    );
    write_file(path, &text)
}

fn write_points_csv(path: &Path, g: &Grid, eps: f64, pts: &[SolutionPoint]) -> Result<()> {
    let mut out = String::from("eps,frame,index,param,norm_inf,norm_l2,min_v,residual_norm\n");
    for (i, pt) in pts.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(eps),
            pt.frame,
            i,
            fmt_f64(pt.param),
            fmt_f64(pt.norm_inf()),
            fmt_f64(quad_l2(g, &pt.v)),
            fmt_f64(pt.min_v),
            fmt_f64(pt.residual_norm),
        ));
    }
    write_file(path, &out)
}

/// Two-sided split: one CSV per side plus the crossings and a key = value
/// report with the stability metadata.
pub fn write_sigma_outputs(dir: &Path, g: &Grid, s: &SigmaSplit) -> Result<()> {
    write_points_csv(&dir.join("sigma_plus.csv"), g, s.eps, &s.sigma_plus)?;
    write_points_csv(&dir.join("sigma_minus.csv"), g, s.eps, &s.sigma_minus)?;
    write_points_csv(&dir.join("sigma_crossings.csv"), g, s.eps, &s.crossing_points)?;
    let mut text = format!(
        "eps = {}\n\
         lambda_eps = {}\n\
         delta_floor = {}\n\
         crossing_found = {}\n\
         ball_radius = {}\n\
         trace_termination = {}\n\
         sigma_plus_points = {}\n\
         sigma_minus_points = {}\n\
         crossings = {}\n",
        fmt_f64(s.eps),
        fmt_f64(s.lambda_eps),
        fmt_f64(s.delta_floor),
        s.crossing_found,
        fmt_f64(s.ball_radius),
        s.trace_termination.map(|t| t.to_string()).unwrap_or_else(|| "none".into()),
        s.sigma_plus.len(),
        s.sigma_minus.len(),
        s.crossing_points.len(),
    );
    for (k, (eps_k, norms)) in s
        .per_eps_lambda_eps
        .iter()
        .zip(&s.per_eps_crossing_norms)
        .enumerate()
    {
        let rendered: Vec<String> = norms.iter().map(|&x| fmt_f64(x)).collect();
        text.push_str(&format!(
            "family[{k}].lambda_eps = {}\nfamily[{k}].crossing_norms = [{}]\n",
            fmt_f64(*eps_k),
            rendered.join(", "),
        ));
    }
    write_file(&dir.join("sigma_report.txt"), &text)
}
