//! Regularization families: one traced branch per epsilon, gap diagnostics
//! between consecutive traces, the rescaling back to the original frame,
//! loop classification, and the two-sided split of the mushroom component.

use crate::continuation::{
    extend_branch, hausdorff_distance, seed_branch_at_bifurcation, solutions_at_param, BifWhich,
    Branch, StepControl, Termination, TraceBounds,
};
use crate::mesh::{CaseTag, Frame, Grid, ProblemParams, WeightPair};
use crate::spectra::{default_ball, dirichlet_ball_eigenpair, mu_cap, principal_eigenpair_neumann, BallRange};
use crate::system::{cstar, newton_solve, SolutionPoint};
use crate::{Error, Result};

/// Family of traced branches over a decreasing sequence of regularization
/// values, with cap data and gap diagnostics.
#[derive(Debug, Clone)]
pub struct FamilyResult {
    pub eps_sequence: Vec<f64>,
    pub branches: Vec<Branch>,
    /// Hausdorff distance between consecutive `(param, norm_inf)` polylines.
    pub hausdorff_gaps: Vec<f64>,
    pub mu_eps_values: Vec<f64>,
    pub cstar_values: Vec<Option<f64>>,
    pub ball: BallRange,
    pub mu_d: f64,
    pub mu_bar: f64,
    /// `Lambda = 2 mu_bar`: no positive solutions beyond `Lambda / 2`.
    pub lambda_cap: f64,
    pub rho: f64,
}

/// Traces one branch per epsilon from the nontrivial bifurcation point,
/// bounded by the norm cap `rho` and the parameter cap from the ball scan.
/// Per-epsilon step failures are recorded on the branch, not propagated.
pub fn trace_family(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    eps_sequence: &[f64],
    step: &StepControl,
    rho: f64,
) -> Result<FamilyResult> {
    if eps_sequence.is_empty() {
        return Err(Error::Precondition("eps sequence must not be empty".into()));
    }
    for pair in eps_sequence.windows(2) {
        if pair[0] <= pair[1] {
            return Err(Error::Precondition("eps sequence must be strictly decreasing".into()));
        }
    }
    if eps_sequence.iter().any(|&e| e <= 0.0 || e > 1.0) {
        return Err(Error::Precondition("eps values must lie in (0, 1]".into()));
    }

    let ball = default_ball(w)?;
    let mu_d = dirichlet_ball_eigenpair(g, &w.a_samples, ball)?.value;
    let mu_bar = mu_cap(g, w, &params.with_eps(1.0), ball, mu_d)?;
    let lambda_cap = 2.0 * mu_bar;

    let mut branches = Vec::with_capacity(eps_sequence.len());
    let mut mu_eps_values = Vec::new();
    let mut cstar_values = Vec::new();
    for &eps in eps_sequence {
        let eps_params = params.with_eps(eps);
        let spectrum = principal_eigenpair_neumann(g, &w.b_samples, eps, params.q)?;
        let mu_eps = spectrum.principal_values[1];
        mu_eps_values.push(mu_eps);
        cstar_values.push(cstar(eps, w, &eps_params).ok());
        let bounds = TraceBounds {
            rho,
            param_cap: lambda_cap,
            mu_eps,
            allow_negative_param: false,
            check_gamma00: true,
        };
        let seed = seed_branch_at_bifurcation(g, &eps_params, &spectrum, BifWhich::MuEps, false)?;
        let branch = extend_branch(g, w, &eps_params, seed, step, &bounds)?;
        branches.push(branch);
    }

    let polylines: Vec<Vec<(f64, f64)>> = branches.iter().map(|b| b.polyline()).collect();
    let hausdorff_gaps = polylines
        .windows(2)
        .map(|pair| hausdorff_distance(&pair[0], &pair[1]))
        .collect();

    Ok(FamilyResult {
        eps_sequence: eps_sequence.to_vec(),
        branches,
        hausdorff_gaps,
        mu_eps_values,
        cstar_values,
        ball,
        mu_d,
        mu_bar,
        lambda_cap,
        rho,
    })
}

/// Working approximation of the vanishing-regularization limit set: the
/// finest-epsilon polyline, annotated with per-point distances to the
/// previous polyline.
#[derive(Debug, Clone)]
pub struct LimsupEstimate {
    pub points: Vec<(f64, f64)>,
    pub distances: Vec<f64>,
    /// 95th percentile of the distances.
    pub p95: f64,
    pub accepted: bool,
    /// Gap sequence failed to decrease monotonically.
    pub divergent: bool,
    /// Distance from the origin of the `(param, norm)` plane to the point
    /// set; bounded by the finest bifurcation parameter.
    pub origin_witness_distance: f64,
}

/// Builds the limit-set estimate from a traced family. Accepted when the
/// 95th percentile of the point distances stays below `limsup_tol`.
pub fn limsup_estimate(fam: &FamilyResult, limsup_tol: f64) -> Result<LimsupEstimate> {
    if fam.branches.len() < 2 {
        return Err(Error::Precondition("limit estimate needs at least two branches".into()));
    }
    let finest = fam.branches.last().unwrap().polyline();
    let previous = fam.branches[fam.branches.len() - 2].polyline();
    let distances = crate::continuation::directed_point_distances(&finest, &previous);
    let mut sorted = distances.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p95 = if sorted.is_empty() {
        0.0
    } else {
        sorted[((sorted.len() as f64 * 0.95).floor() as usize).min(sorted.len() - 1)]
    };
    let divergent = fam
        .hausdorff_gaps
        .windows(2)
        .any(|pair| pair[1] > pair[0]);
    let origin_witness_distance = finest
        .iter()
        .map(|&(x, y)| (x * x + y * y).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(LimsupEstimate {
        points: finest,
        distances,
        p95,
        accepted: p95 < limsup_tol,
        divergent,
        origin_witness_distance,
    })
}

/// Maps a traced branch of the scaled frame back to the original frame:
/// `(mu, v) -> (lambda, u)` with `lambda = mu^{(p-q)/(p-2)}` and
/// `u = lambda^{1/(p-q)} v`. A zero parameter collapses the whole state to
/// the origin, which is what closes loop components there.
pub fn rescale_to_p(b: &Branch, params: &ProblemParams) -> Result<Branch> {
    if b.frame != Frame::Q {
        return Err(Error::Precondition(format!(
            "rescaling expects a Q-frame branch, got {}",
            b.frame
        )));
    }
    let (p, q) = (params.p, params.q);
    let neg_tol = 1e-12 * (1.0 + b.origin_param.abs());
    let map_point = |pt: &SolutionPoint| -> Result<SolutionPoint> {
        if pt.param < -neg_tol {
            return Err(Error::Precondition(format!(
                "cannot rescale a point with negative parameter {}",
                pt.param
            )));
        }
        let mu = pt.param.max(0.0);
        let lambda = if mu == 0.0 { 0.0 } else { mu.powf((p - q) / (p - 2.0)) };
        let scale = if lambda == 0.0 { 0.0 } else { lambda.powf(1.0 / (p - q)) };
        let u: Vec<f64> = pt.v.iter().map(|&x| scale * x).collect();
        let min_v = u.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(SolutionPoint {
            param: lambda,
            v: u,
            residual_norm: pt.residual_norm,
            min_v,
            frame: Frame::P,
        })
    };
    let points = b.points.iter().map(map_point).collect::<Result<Vec<_>>>()?;
    let termination = b.termination.map(|t| {
        let mu = t.location.0.max(0.0);
        let lambda = if mu == 0.0 { 0.0 } else { mu.powf((p - q) / (p - 2.0)) };
        let scale = if lambda == 0.0 { 0.0 } else { lambda.powf(1.0 / (p - q)) };
        Termination { tag: t.tag, location: (lambda, scale * t.location.1) }
    });
    Ok(Branch {
        points,
        eps: b.eps,
        origin: b.origin,
        origin_param: b.origin_param.powf((p - q) / (p - 2.0)),
        termination,
        frame: Frame::P,
        seed_direction: None,
    })
}

/// Inverse of `rescale_to_p` on a single parameter value.
pub fn lambda_to_mu(lambda: f64, params: &ProblemParams) -> f64 {
    lambda.powf((params.p - 2.0) / (params.p - params.q))
}

/// Loop verdict for a rescaled branch.
#[derive(Debug, Clone)]
pub struct LoopReport {
    pub starts_at_origin: bool,
    pub ends_at_origin: bool,
    pub all_lambda_nonneg: bool,
    pub no_trivial_interior: bool,
    pub two_solutions_at_small_lambda: bool,
    pub lambda_probe: f64,
    pub max_lambda: f64,
    pub max_norm: f64,
    pub solutions_found: usize,
    /// Max-norm separation of the two most distant probe solutions.
    pub probe_separation: f64,
    /// Radius used for the origin checks: a fixed fraction of the branch
    /// extent in the `(lambda, norm)` plane.
    pub origin_tol: f64,
}

/// Fraction of the branch extent used as the near-origin radius.
const ORIGIN_FRAC: f64 = 0.05;

/// Checks the loop properties on a branch mapped to the original frame:
/// endpoints at the origin, no negative parameters, no trivial interior
/// points, and at least two distinct solutions at a small probe parameter.
pub fn classify_loop(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    b: &Branch,
    lambda_probe: f64,
    step: &StepControl,
) -> Result<LoopReport> {
    if b.points.is_empty() {
        return Err(Error::Precondition("cannot classify an empty branch".into()));
    }
    let poly = b.polyline();
    let max_lambda = poly.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let max_norm = poly.iter().map(|p| p.1).fold(0.0f64, f64::max);
    // a branch collapsed onto the origin carries no probe range
    let degenerate = max_lambda <= 0.0;
    if !degenerate && !(lambda_probe > 0.0 && lambda_probe < max_lambda) {
        return Err(Error::Precondition(format!(
            "probe parameter {lambda_probe} must lie in (0, {max_lambda})"
        )));
    }
    let origin_tol = ORIGIN_FRAC * (max_lambda.max(0.0).powi(2) + max_norm.powi(2)).sqrt();
    let near_origin = |pt: &(f64, f64)| (pt.0.powi(2) + pt.1.powi(2)).sqrt() <= origin_tol;

    let starts_at_origin = near_origin(&poly[0]);
    let ends_at_origin = near_origin(poly.last().unwrap());
    let all_lambda_nonneg = poly.iter().all(|p| p.0 >= -step.param_tol);
    let no_trivial_interior = poly
        .get(1..poly.len().saturating_sub(1))
        .unwrap_or(&[])
        .iter()
        .all(|p| p.0 <= origin_tol || p.1 > step.trivial_tol);

    let sols = if degenerate {
        Vec::new()
    } else {
        solutions_at_param(g, w, params, b, lambda_probe, step)?
    };
    let mut probe_separation = 0.0f64;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            let d = sols[i]
                .v
                .iter()
                .zip(&sols[j].v)
                .map(|(&x, &y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            probe_separation = probe_separation.max(d);
        }
    }

    Ok(LoopReport {
        starts_at_origin,
        ends_at_origin,
        all_lambda_nonneg,
        no_trivial_interior,
        two_solutions_at_small_lambda: sols.len() >= 2,
        lambda_probe,
        max_lambda,
        max_norm,
        solutions_found: sols.len(),
        probe_separation,
        origin_tol,
    })
}

/// Two-sided split of a mushroom component around the vertical axis.
#[derive(Debug, Clone)]
pub struct SigmaSplit {
    /// Points with non-negative parameter, including the bifurcation at
    /// `(lambda_eps, 0)`, restricted to the ball around the origin.
    pub sigma_plus: Vec<SolutionPoint>,
    /// Points with non-positive parameter, including the bifurcation at
    /// the origin, restricted to the ball.
    pub sigma_minus: Vec<SolutionPoint>,
    /// Refined zero-parameter crossings of the component.
    pub crossing_points: Vec<SolutionPoint>,
    pub eps: f64,
    pub lambda_eps: f64,
    /// Minimum norm a crossing must carry; crossings below it are noise.
    pub delta_floor: f64,
    /// A crossing with norm above the floor was found.
    pub crossing_found: bool,
    /// Crossing norms per family member, coarse to fine.
    pub per_eps_crossing_norms: Vec<Vec<f64>>,
    pub per_eps_lambda_eps: Vec<f64>,
    /// Ball radius of the restriction, in `|lambda| + |u|_inf`.
    pub ball_radius: f64,
    /// Where the finest trace stopped.
    pub trace_termination: Option<crate::continuation::TerminationTag>,
}

/// Traces the mushroom of the regularized sign-shifted frame for each
/// epsilon, cuts the finest component at its zero-parameter crossings and
/// returns the split restricted to the ball of radius `rho` around the
/// origin. Crossings are refined by a fixed-parameter solve on the axis,
/// where the frame equation no longer depends on the regularization.
pub fn sigma_split(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    case: CaseTag,
    eps_sequence: &[f64],
    rho: f64,
    step: &StepControl,
    trace_norm_cap: f64,
    trace_param_cap: f64,
) -> Result<SigmaSplit> {
    if case != CaseTag::Prehypo {
        return Err(Error::Precondition(format!(
            "two-sided split requires the prehypo sign case, got {case}"
        )));
    }
    if eps_sequence.is_empty() {
        return Err(Error::Precondition("eps sequence must not be empty".into()));
    }
    let params = &params.with_frame(Frame::PEpsVariant);

    // scale floor below which an axis crossing is treated as spurious
    let c_scale = if w.int_a.abs() > 0.0 {
        (w.int_b.abs() / w.int_a.abs()).powf(1.0 / (params.p - params.q))
    } else {
        1.0
    };
    let delta_floor = 0.05 * c_scale;

    let mut per_eps_crossing_norms = Vec::new();
    let mut per_eps_lambda_eps = Vec::new();
    let mut finest: Option<(Branch, f64)> = None;

    for &eps in eps_sequence {
        let eps_params = params.with_eps(eps);
        let shifted_b: Vec<f64> = w.b_samples.iter().map(|&x| x - eps).collect();
        let spectrum = principal_eigenpair_neumann(g, &shifted_b, eps, params.q)?;
        let lambda_eps = spectrum.principal_values[1];
        per_eps_lambda_eps.push(lambda_eps);
        let bounds = TraceBounds {
            rho: trace_norm_cap,
            param_cap: trace_param_cap,
            mu_eps: lambda_eps,
            allow_negative_param: true,
            check_gamma00: false,
        };
        let seed = seed_branch_at_bifurcation(g, &eps_params, &spectrum, BifWhich::MuEps, false)?;
        let mut branch = extend_branch(g, w, &eps_params, seed, step, &bounds)?;

        let mut crossings = raw_crossing_norms(&branch, delta_floor);
        if crossings.is_empty() {
            // the lobe through the origin was not reachable from the
            // nontrivial bifurcation point: trace it directly
            let seed0 =
                seed_branch_at_bifurcation(g, &eps_params, &spectrum, BifWhich::Zero, false)?;
            let lobe = extend_branch(g, w, &eps_params, seed0, step, &bounds)?;
            crossings = raw_crossing_norms(&lobe, delta_floor);
            branch.points.extend(lobe.points);
        }
        per_eps_crossing_norms.push(crossings);
        finest = Some((branch, lambda_eps));
    }

    let (branch, lambda_eps) = finest.unwrap();
    let eps = *eps_sequence.last().unwrap();
    let eps_params = params.with_eps(eps);

    // refined axis crossings
    let mut crossing_points = Vec::new();
    for k in 0..branch.points.len().saturating_sub(1) {
        let (p0, p1) = (&branch.points[k], &branch.points[k + 1]);
        if p0.param.signum() * p1.param.signum() < 0.0 {
            let t = p0.param / (p0.param - p1.param);
            let interp: Vec<f64> =
                p0.v.iter().zip(&p1.v).map(|(&x, &y)| x + t * (y - x)).collect();
            let norm = interp.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if norm < delta_floor {
                continue;
            }
            if let Some(pt) =
                newton_solve(g, &interp, 0.0, w, &eps_params, step.newton_tol, 50)?.converged()
            {
                crossing_points.push(pt.clone());
            }
        }
    }
    let crossing_found =
        crossing_points.iter().any(|pt| pt.norm_inf() >= delta_floor);

    let in_ball =
        |pt: &SolutionPoint| pt.param.abs() + pt.norm_inf() <= rho;
    let mut sigma_plus: Vec<SolutionPoint> = branch
        .points
        .iter()
        .filter(|pt| pt.param >= -step.param_tol && in_ball(pt))
        .cloned()
        .collect();
    let mut sigma_minus: Vec<SolutionPoint> = branch
        .points
        .iter()
        .filter(|pt| pt.param <= step.param_tol && in_ball(pt))
        .cloned()
        .collect();
    for pt in &crossing_points {
        if in_ball(pt) {
            sigma_plus.push(pt.clone());
            sigma_minus.push(pt.clone());
        }
    }

    Ok(SigmaSplit {
        sigma_plus,
        sigma_minus,
        crossing_points,
        eps,
        lambda_eps,
        delta_floor,
        crossing_found,
        per_eps_crossing_norms,
        per_eps_lambda_eps,
        ball_radius: rho,
        trace_termination: branch.termination.map(|t| t.tag),
    })
}

/// Interpolated norms of the axis crossings of a traced polyline, above the
/// noise floor.
fn raw_crossing_norms(branch: &Branch, floor: f64) -> Vec<f64> {
    let mut norms = Vec::new();
    for k in 0..branch.points.len().saturating_sub(1) {
        let (p0, p1) = (&branch.points[k], &branch.points[k + 1]);
        if p0.param.signum() * p1.param.signum() < 0.0 {
            let t = p0.param / (p0.param - p1.param);
            let norm = p0
                .v
                .iter()
                .zip(&p1.v)
                .map(|(&x, &y)| (x + t * (y - x)).abs())
                .fold(0.0f64, f64::max);
            if norm >= floor {
                norms.push(norm);
            }
        }
    }
    norms
}
