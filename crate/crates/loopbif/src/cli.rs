//! Command dispatch: eigen | cstar | trace | family | loop | sigma | verify.
//!
//! Exit status: 0 on success, 1 when a verify check fails, 2 on
//! configuration errors, 3 on numerical failures.

use crate::config::{Prepared, RunConfig};
use crate::family::{
    classify_loop, limsup_estimate, rescale_to_p, sigma_split, trace_family, FamilyResult,
};
use crate::mesh::{
    build_grid, neumann_apply, neumann_laplacian, resolvent_apply, trapezoid_integral, CaseTag,
    Frame, ProblemParams,
};
use crate::output::{
    fmt_f64, write_branch_csv, write_branch_meta, write_family_summary, write_loop_report,
    write_plot_csv, write_sigma_outputs,
};
use crate::spectra::principal_eigenpair_neumann;
use crate::system::{cstar, divergence_residual, jacobian, residual, SolutionPoint};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eigen,
    Cstar,
    Trace,
    Family,
    Loop,
    Sigma,
    Verify,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub quiet: bool,
}

/// Loads, validates and dispatches. Returns the process exit status.
pub fn run(opts: &RunOptions) -> u8 {
    let config = match RunConfig::from_path(&opts.config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let prepared = match config.prepare() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let seed = opts.seed.unwrap_or(prepared.config.seed);
    let outcome = match opts.command {
        Command::Eigen => cmd_eigen(opts, &prepared),
        Command::Cstar => cmd_cstar(opts, &prepared),
        Command::Trace => cmd_trace(opts, &prepared),
        Command::Family => cmd_family(opts, &prepared).map(|_| ()),
        Command::Loop => cmd_loop(opts, &prepared),
        Command::Sigma => cmd_sigma(opts, &prepared),
        Command::Verify => return cmd_verify(opts, &prepared, seed),
    };
    match outcome {
        Ok(()) => 0,
        Err(e @ (Error::Precondition(_) | Error::ConstantLimitUndefined | Error::Config(_))) => {
            eprintln!("config error: {e}");
            2
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            3
        }
    }
}

fn finest_eps(prepared: &Prepared, override_eps: Option<f64>) -> f64 {
    override_eps.unwrap_or_else(|| *prepared.config.continuation.eps_sequence.last().unwrap())
}

/// Norm cap: configured value, or four times the unregularized constant
/// limit when that limit exists.
fn resolve_rho(prepared: &Prepared) -> Result<f64> {
    if let Some(rho) = prepared.config.continuation.rho {
        return Ok(rho);
    }
    let c0 = cstar(0.0, &prepared.weights, &prepared.params)?;
    Ok(4.0 * c0)
}

fn say(quiet: bool, msg: &str) {
    if !quiet {
        println!("{msg}");
    }
}

fn cmd_eigen(opts: &RunOptions, prep: &Prepared) -> Result<()> {
    let eps = finest_eps(prep, opts.eps);
    let spectrum =
        principal_eigenpair_neumann(&prep.grid, &prep.weights.b_samples, eps, prep.params.q)?;
    let text = format!(
        "eps = {}\n\
         principal_values = [{}, {}]\n\
         nu_unscaled = {}\n\
         mu_eps = {}\n\
         transversality_integral = {}\n\
         eigenfunction_min = {}\n\
         eigenfunction_max = {}\n",
        fmt_f64(eps),
        fmt_f64(spectrum.principal_values[0]),
        fmt_f64(spectrum.principal_values[1]),
        fmt_f64(spectrum.nu_unscaled),
        fmt_f64(spectrum.principal_values[1]),
        fmt_f64(spectrum.transversality_integral),
        fmt_f64(spectrum.positive_pair.eigfun.iter().cloned().fold(f64::INFINITY, f64::min)),
        fmt_f64(spectrum.positive_pair.eigfun.iter().cloned().fold(0.0f64, f64::max)),
    );
    write_text(&opts.out_dir.join("eigen_report.txt"), &text)?;
    let mut csv = String::from("x,phi\n");
    for (x, phi) in prep.grid.nodes.iter().zip(&spectrum.positive_pair.eigfun) {
        csv.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*phi)));
    }
    write_text(&opts.out_dir.join("eigenfunction.csv"), &csv)?;
    say(opts.quiet, &format!("mu_eps = {} (nu = {})", spectrum.principal_values[1], spectrum.nu_unscaled));
    Ok(())
}

fn cmd_cstar(opts: &RunOptions, prep: &Prepared) -> Result<()> {
    let params = &prep.params;
    let mut csv = String::from("eps,cstar,backsub_residual\n");
    let ratio = -prep.weights.int_b / prep.weights.int_a;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for &eps in &prep.config.continuation.eps_sequence {
        let c = cstar(eps, &prep.weights, params)?;
        rows.push((eps, c));
    }
    let c0 = cstar(0.0, &prep.weights, params)?;
    rows.push((0.0, c0));
    for (eps, c) in &rows {
        let backsub = (c.powf(params.p - 2.0) * (c + eps).powf(2.0 - params.q) - ratio).abs();
        csv.push_str(&format!("{},{},{}\n", fmt_f64(*eps), fmt_f64(*c), fmt_f64(backsub)));
    }
    write_text(&opts.out_dir.join("cstar_table.csv"), &csv)?;
    say(opts.quiet, &format!("c*(0) = {c0}"));
    Ok(())
}

fn trace_one(prep: &Prepared, eps: f64, rho: f64) -> Result<(crate::continuation::Branch, FamilyResult)> {
    let step = prep.config.continuation.step_control();
    let fam = trace_family(&prep.grid, &prep.weights, &prep.params, &[eps], &step, rho)?;
    Ok((fam.branches[0].clone(), fam))
}

fn cmd_trace(opts: &RunOptions, prep: &Prepared) -> Result<()> {
    let eps = finest_eps(prep, opts.eps);
    let rho = resolve_rho(prep)?;
    let (branch, _) = trace_one(prep, eps, rho)?;
    write_branch_csv(&opts.out_dir.join("branch_000.csv"), &prep.grid, &branch)?;
    write_plot_csv(&opts.out_dir.join("branch_000_plot.csv"), &branch)?;
    write_branch_meta(&opts.out_dir.join("branch_000_meta.json"), &branch)?;
    let tag = branch.termination.map(|t| t.tag.to_string()).unwrap_or_default();
    say(
        opts.quiet,
        &format!("traced {} points at eps = {eps}, termination {tag}", branch.points.len()),
    );
    Ok(())
}

fn cmd_family(opts: &RunOptions, prep: &Prepared) -> Result<FamilyResult> {
    let rho = resolve_rho(prep)?;
    let step = prep.config.continuation.step_control();
    let fam = trace_family(
        &prep.grid,
        &prep.weights,
        &prep.params,
        &prep.config.continuation.eps_sequence,
        &step,
        rho,
    )?;
    for (i, branch) in fam.branches.iter().enumerate() {
        let base = opts.out_dir.join(format!("branch_{i:03}"));
        write_branch_csv(&base.with_extension("csv"), &prep.grid, branch)?;
        write_plot_csv(&opts.out_dir.join(format!("branch_{i:03}_plot.csv")), branch)?;
        write_branch_meta(&opts.out_dir.join(format!("branch_{i:03}_meta.json")), branch)?;
    }
    write_family_summary(&opts.out_dir.join("family_summary.csv"), &fam)?;
    let est = limsup_estimate(&fam, prep.config.continuation.limsup_tol).ok();
    if let Some(est) = est {
        let text = format!(
            "p95_distance = {}\naccepted = {}\ndivergent = {}\norigin_witness_distance = {}\n",
            fmt_f64(est.p95),
            est.accepted,
            est.divergent,
            fmt_f64(est.origin_witness_distance),
        );
        write_text(&opts.out_dir.join("limsup_report.txt"), &text)?;
    }
    say(
        opts.quiet,
        &format!(
            "family of {} branches, gaps {:?}",
            fam.branches.len(),
            fam.hausdorff_gaps.iter().map(|&g| (g * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
    Ok(fam)
}

fn cmd_loop(opts: &RunOptions, prep: &Prepared) -> Result<()> {
    let fam = cmd_family(opts, prep)?;
    let finest = fam.branches.last().unwrap();
    let eps = *fam.eps_sequence.last().unwrap();
    let rescaled = rescale_to_p(finest, &prep.params.with_eps(eps))?;
    write_branch_csv(&opts.out_dir.join("rescaled_branch.csv"), &prep.grid, &rescaled)?;
    write_plot_csv(&opts.out_dir.join("rescaled_branch_plot.csv"), &rescaled)?;
    let lambda_start = rescaled.points[0].param;
    let lambda_probe = prep
        .config
        .continuation
        .lambda_probe
        .unwrap_or_else(|| (2.0 * lambda_start).min(0.5 * rescaled.max_param()));
    let step = prep.config.continuation.step_control();
    let report = classify_loop(&prep.grid, &prep.weights, &prep.params.with_eps(eps), &rescaled, lambda_probe, &step)?;
    write_loop_report(&opts.out_dir.join("loop_report.txt"), &report)?;
    say(
        opts.quiet,
        &format!(
            "loop verdict: starts {}, ends {}, nonneg {}, interior {}, two-solutions {}",
            report.starts_at_origin,
            report.ends_at_origin,
            report.all_lambda_nonneg,
            report.no_trivial_interior,
            report.two_solutions_at_small_lambda
        ),
    );
    Ok(())
}

fn cmd_sigma(opts: &RunOptions, prep: &Prepared) -> Result<()> {
    if prep.hypotheses.case_tag != CaseTag::Prehypo {
        return Err(Error::Precondition(format!(
            "sigma requires the prehypo sign case (both weights change sign, int_a < 0, int_b <= 0); \
             this configuration is {}",
            prep.hypotheses.case_tag
        )));
    }
    let rho = prep.config.continuation.rho.unwrap_or(60.0);
    let step = prep.config.continuation.step_control();
    let split = sigma_split(
        &prep.grid,
        &prep.weights,
        &prep.params,
        prep.hypotheses.case_tag,
        &prep.config.continuation.eps_sequence,
        rho,
        &step,
        rho,
        prep.config.continuation.sigma_param_cap,
    )?;
    write_sigma_outputs(&opts.out_dir, &prep.grid, &split)?;
    say(
        opts.quiet,
        &format!(
            "sigma split at eps = {}: {} plus / {} minus points, crossing found: {}",
            split.eps,
            split.sigma_plus.len(),
            split.sigma_minus.len(),
            split.crossing_found
        ),
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text.as_bytes()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------

enum CheckResult {
    Pass,
    Fail(String),
    Skip(String),
}

fn cmd_verify(opts: &RunOptions, prep: &Prepared, seed: u64) -> u8 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut any_fail = false;

    let mut record = |name: &str, result: CheckResult| {
        let line = match result {
            CheckResult::Pass => format!("PASS {name}"),
            CheckResult::Fail(detail) => {
                any_fail = true;
                format!("FAIL {name} ({detail})")
            }
            CheckResult::Skip(reason) => format!("SKIP {name} ({reason})"),
        };
        lines.push(line);
    };

    record("laplacian_row_sums_zero", check_row_sums(prep));
    record("laplacian_consistency", check_laplacian_consistency());
    record("trapezoid_linearity", check_trapezoid_linearity(prep, &mut rng));
    record("resolvent_roundtrip", check_resolvent_roundtrip(prep, &mut rng));
    record("jacobian_finite_difference", check_jacobian_fd(prep, &mut rng));
    record("weighted_jacobian_symmetry", check_weighted_symmetry(prep, &mut rng));
    record("trivial_lines_exact", check_trivial_lines(prep));
    record("eigen_two_principal_values", check_eigen_structure(prep));
    record("eigen_scaling_law", check_eigen_scaling(prep));
    record("cstar_monotone_backsub", check_cstar(prep));
    record("divergence_at_constant_root", check_divergence_constant(prep));
    record("rescale_roundtrip", check_rescale_roundtrip(prep));
    record("frame_consistency", check_frame_consistency(prep, &mut rng));

    let mut text = lines.join("\n");
    text.push('\n');
    if !opts.quiet {
        print!("{text}");
    }
    if write_text(&opts.out_dir.join("verify_report.txt"), &text).is_err() {
        eprintln!("failed to write verify report");
        return 3;
    }
    if any_fail {
        1
    } else {
        0
    }
}

fn check_row_sums(prep: &Prepared) -> CheckResult {
    let lap = neumann_laplacian(&prep.grid);
    if lap.row_sums().iter().all(|&s| s == 0.0) {
        CheckResult::Pass
    } else {
        CheckResult::Fail("a row sum is not exactly zero".into())
    }
}

fn check_laplacian_consistency() -> CheckResult {
    let g = match build_grid(1024, 0.0, 1.0) {
        Ok(g) => g,
        Err(e) => return CheckResult::Fail(e.to_string()),
    };
    let pi = std::f64::consts::PI;
    let v: Vec<f64> = g.nodes.iter().map(|&x| (pi * x).cos()).collect();
    let lv = neumann_apply(&g, &v);
    let err = g
        .nodes
        .iter()
        .zip(&lv)
        .map(|(&x, &l)| (l - pi * pi * (pi * x).cos()).abs())
        .fold(0.0f64, f64::max);
    if err < 1e-4 {
        CheckResult::Pass
    } else {
        CheckResult::Fail(format!("max consistency error {}", fmt_f64(err)))
    }
}

fn check_trapezoid_linearity(prep: &Prepared, rng: &mut ChaCha8Rng) -> CheckResult {
    let g = &prep.grid;
    let f: Vec<f64> = (0..g.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let e: Vec<f64> = (0..g.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (alpha, beta) = (1.7, -0.3);
    let comb: Vec<f64> = f.iter().zip(&e).map(|(&fi, &ei)| alpha * fi + beta * ei).collect();
    let lhs = trapezoid_integral(g, &comb).unwrap();
    let rhs = alpha * trapezoid_integral(g, &f).unwrap() + beta * trapezoid_integral(g, &e).unwrap();
    if (lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()) {
        CheckResult::Pass
    } else {
        CheckResult::Fail(format!("linearity defect {}", fmt_f64((lhs - rhs).abs())))
    }
}

fn check_resolvent_roundtrip(prep: &Prepared, rng: &mut ChaCha8Rng) -> CheckResult {
    let g = &prep.grid;
    let m = prep.params.shift_m;
    let wvec: Vec<f64> = (0..g.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lap = neumann_laplacian(g);
    let mut rhs = lap.apply(&wvec);
    for (r, &x) in rhs.iter_mut().zip(&wvec) {
        *r += m * x;
    }
    let back = match resolvent_apply(g, m, &rhs) {
        Ok(b) => b,
        Err(e) => return CheckResult::Fail(e.to_string()),
    };
    let err = back
        .iter()
        .zip(&wvec)
        .map(|(&bi, &wi)| (bi - wi).abs())
        .fold(0.0f64, f64::max);
    let scale = 1.0 + wvec.iter().fold(0.0f64, |mx, &x| mx.max(x.abs()));
    if err / scale < 1e-12 {
        CheckResult::Pass
    } else {
        CheckResult::Fail(format!("round-trip error {}", fmt_f64(err)))
    }
}

fn check_jacobian_fd(prep: &Prepared, rng: &mut ChaCha8Rng) -> CheckResult {
    let g = &prep.grid;
    let eps = *prep.config.continuation.eps_sequence.last().unwrap();
    let params = prep.params.with_eps(eps).with_frame(Frame::Q);
    let mu = 0.7;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let v: Vec<f64> = (0..g.n).map(|_| 0.2 + rng.gen_range(0.0..1.0)).collect();
        let jac = match jacobian(g, mu, &v, &prep.weights, &params) {
            Ok(j) => j,
            Err(e) => return CheckResult::Fail(e.to_string()),
        };
        let norm_v = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let step = 1e-7 * (1.0 + norm_v);
        // probe a fixed spread of columns
        for &j in &[0usize, 1, g.n / 4, g.n / 2, 3 * g.n / 4, g.n - 2, g.n - 1] {
            let mut vp = v.clone();
            vp[j] += step;
            let mut vm = v.clone();
            vm[j] -= step;
            let fp = residual(g, mu, &vp, &prep.weights, &params).unwrap();
            let fm = residual(g, mu, &vm, &prep.weights, &params).unwrap();
            for i in j.saturating_sub(1)..(j + 2).min(g.n) {
                let fd = (fp[i] - fm[i]) / (2.0 * step);
                let analytic = if i == j {
                    jac.diag[i]
                } else if i + 1 == j {
                    jac.sup[i]
                } else {
                    jac.sub[j]
                };
                let rel = (fd - analytic).abs() / analytic.abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    if worst < 1e-6 {
        CheckResult::Pass
    } else {
        CheckResult::Fail(format!("worst relative error {}", fmt_f64(worst)))
    }
}

fn check_weighted_symmetry(prep: &Prepared, rng: &mut ChaCha8Rng) -> CheckResult {
    let g = &prep.grid;
    let eps = *prep.config.continuation.eps_sequence.last().unwrap();
    let params = prep.params.with_eps(eps).with_frame(Frame::Q);
    let v: Vec<f64> = (0..g.n).map(|_| 0.2 + rng.gen_range(0.0..1.0)).collect();
    let jac = match jacobian(g, 0.9, &v, &prep.weights, &params) {
        Ok(j) => j,
        Err(e) => return CheckResult::Fail(e.to_string()),
    };
    let quad = g.trap_weights();
    for i in 0..g.n - 1 {
        if quad[i] * jac.sup[i] != quad[i + 1] * jac.sub[i] {
            return CheckResult::Fail(format!("asymmetry at off-diagonal {i}"));
        }
    }
    CheckResult::Pass
}

fn check_trivial_lines(prep: &Prepared) -> CheckResult {
    let g = &prep.grid;
    let eps = *prep.config.continuation.eps_sequence.last().unwrap();
    let params = prep.params.with_eps(eps).with_frame(Frame::Q);
    let zero = residual(g, 0.83, &vec![0.0; g.n], &prep.weights, &params).unwrap();
    if !zero.iter().all(|&x| x == 0.0) {
        return CheckResult::Fail("zero line residual not bitwise zero".into());
    }
    let constant = residual(g, 0.0, &vec![0.37; g.n], &prep.weights, &params).unwrap();
    if !constant.iter().all(|&x| x == 0.0) {
        return CheckResult::Fail("constant line residual not bitwise zero at zero parameter".into());
    }
    CheckResult::Pass
}

fn eigen_applicable(prep: &Prepared) -> bool {
    prep.hypotheses.b_changes_sign
        && prep.weights.int_b < -1e-12 * prep.grid.n as f64
}

fn check_eigen_structure(prep: &Prepared) -> CheckResult {
    if !eigen_applicable(prep) {
        return CheckResult::Skip("weight b lacks a sign change with negative integral".into());
    }
    let eps = *prep.config.continuation.eps_sequence.last().unwrap();
    match principal_eigenpair_neumann(&prep.grid, &prep.weights.b_samples, eps, prep.params.q) {
        Ok(spectrum) => {
            if spectrum.principal_values.len() != 2 || spectrum.principal_values[0] != 0.0 {
                return CheckResult::Fail("principal values are not {0, mu_eps}".into());
            }
            if spectrum.principal_values[1] <= 0.0 {
                return CheckResult::Fail("positive principal value missing".into());
            }
            if !spectrum.positive_pair.eigfun.iter().all(|&x| x > 0.0) {
                return CheckResult::Fail("positive eigenfunction changes sign".into());
            }
            if spectrum.transversality_integral <= 0.0 {
                return CheckResult::Fail(format!(
                    "transversality integral {}",
                    fmt_f64(spectrum.transversality_integral)
                ));
            }
            CheckResult::Pass
        }
        Err(e) => CheckResult::Fail(e.to_string()),
    }
}

fn check_eigen_scaling(prep: &Prepared) -> CheckResult {
    if !eigen_applicable(prep) {
        return CheckResult::Skip("weight b lacks a sign change with negative integral".into());
    }
    let q = prep.params.q;
    let mut pts = Vec::new();
    for &e in &[1e-1, 1e-2, 1e-3, 1e-4] {
        match principal_eigenpair_neumann(&prep.grid, &prep.weights.b_samples, e, q) {
            Ok(s) => pts.push((e.ln(), s.principal_values[1].ln())),
            Err(err) => return CheckResult::Fail(err.to_string()),
        }
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (slope - (2.0 - q)).abs() < 1e-8 {
        CheckResult::Pass
    } else {
        CheckResult::Fail(format!("slope {}", fmt_f64(slope)))
    }
}

fn check_cstar(prep: &Prepared) -> CheckResult {
    if prep.weights.int_a <= 0.0 || prep.weights.int_b >= 0.0 {
        return CheckResult::Skip("constant limit undefined for this weight pair".into());
    }
    let params = &prep.params;
    let ratio = -prep.weights.int_b / prep.weights.int_a;
    let c0 = match cstar(0.0, &prep.weights, params) {
        Ok(c) => c,
        Err(e) => return CheckResult::Fail(e.to_string()),
    };
    let mut prev = 0.0;
    for &e in &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
        let c = match cstar(e, &prep.weights, params) {
            Ok(c) => c,
            Err(err) => return CheckResult::Fail(err.to_string()),
        };
        if c <= prev {
            return CheckResult::Fail("sequence not strictly increasing toward the limit".into());
        }
        let backsub = (c.powf(params.p - 2.0) * (c + e).powf(2.0 - params.q) - ratio).abs();
        if backsub >= 1e-13 {
            return CheckResult::Fail(format!("back-substitution residual {}", fmt_f64(backsub)));
        }
        prev = c;
    }
    if (prev - c0).abs() < 1e-4 {
        CheckResult::Pass
    } else {
        CheckResult::Fail(format!("limit gap {}", fmt_f64((prev - c0).abs())))
    }
}

fn check_divergence_constant(prep: &Prepared) -> CheckResult {
    if prep.weights.int_a <= 0.0 || prep.weights.int_b >= 0.0 {
        return CheckResult::Skip("constant limit undefined for this weight pair".into());
    }
    let eps = *prep.config.continuation.eps_sequence.last().unwrap();
    let params = prep.params.with_eps(eps).with_frame(Frame::Q);
    let c = match cstar(eps, &prep.weights, &params) {
        Ok(c) => c,
        Err(e) => return CheckResult::Fail(e.to_string()),
    };
    let pt = SolutionPoint {
        param: 0.3,
        v: vec![c; prep.grid.n],
        residual_norm: 0.0,
        min_v: c,
        frame: Frame::Q,
    };
    match divergence_residual(&prep.grid, &pt, &prep.weights, &params) {
        Ok(d) if d <= 1e-12 => CheckResult::Pass,
        Ok(d) => CheckResult::Fail(format!("divergence defect {}", fmt_f64(d))),
        Err(e) => CheckResult::Fail(e.to_string()),
    }
}

fn check_rescale_roundtrip(prep: &Prepared) -> CheckResult {
    let (p, q) = (prep.params.p, prep.params.q);
    let lambda = 0.37f64;
    let mu = lambda.powf((p - 2.0) / (p - q));
    let back = mu.powf((p - q) / (p - 2.0));
    if (back - lambda).abs() <= 1e-12 * lambda {
        CheckResult::Pass
    } else {
        CheckResult::Fail(format!("parameter round trip error {}", fmt_f64((back - lambda).abs())))
    }
}

fn check_frame_consistency(prep: &Prepared, rng: &mut ChaCha8Rng) -> CheckResult {
    let g = &prep.grid;
    let (p, q) = (prep.params.p, prep.params.q);
    let params_p = match ProblemParams::new(p, q, 0.0, prep.params.shift_m, Frame::P) {
        Ok(v) => v,
        Err(e) => return CheckResult::Fail(e.to_string()),
    };
    let params_q = params_p.with_frame(Frame::Q);
    let lambda = 0.37f64;
    let mu = lambda.powf((p - 2.0) / (p - q));
    let u: Vec<f64> = (0..g.n).map(|_| 0.2 + rng.gen_range(0.0..1.0)).collect();
    let v: Vec<f64> = u.iter().map(|&ui| lambda.powf(-1.0 / (p - q)) * ui).collect();
    let fp = residual(g, lambda, &u, &prep.weights, &params_p).unwrap();
    let fq = residual(g, mu, &v, &prep.weights, &params_q).unwrap();
    let scale = lambda.powf(1.0 / (p - q));
    // quadrature-weighted mismatch: the raw pointwise difference carries
    // rounding proportional to the operator norm 1/h^2
    let quad = g.trap_weights();
    let err = fp
        .iter()
        .zip(&fq)
        .zip(&quad)
        .map(|((&rp, &rq), &wi)| (wi * (rp - scale * rq)).abs())
        .fold(0.0f64, f64::max);
    if err < 1e-10 {
        CheckResult::Pass
    } else {
        CheckResult::Fail(format!("frame mismatch {}", fmt_f64(err)))
    }
}
