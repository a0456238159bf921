//! Pseudo-arclength branch tracing: secant predictor, bordered Newton
//! corrector with a quadrature-weighted arclength constraint, adaptive
//! step control, and termination classification against the trivial lines
//! and the norm/parameter caps.

use crate::linalg::solve_bordered;
use crate::mesh::{Frame, Grid, ProblemParams, WeightPair};
use crate::spectra::SpectrumReport;
use crate::system::{
    clip_tol, jacobian, newton_solve, param_derivative, residual, weighted_residual_norm,
    SolutionPoint,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Step-size and tolerance knobs for the tracer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub newton_tol: f64,
    pub max_corrector_iter: usize,
    pub trivial_tol: f64,
    pub const_tol: f64,
    pub param_tol: f64,
    pub sol_sep_tol: f64,
    /// Seed amplitude along the bifurcation eigenfunction.
    pub s0: f64,
    pub max_points: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            ds0: 1e-3,
            ds_min: 1e-6,
            ds_max: 5e-2,
            newton_tol: 1e-10,
            max_corrector_iter: 12,
            trivial_tol: 1e-8,
            const_tol: 1e-6,
            param_tol: 1e-6,
            sol_sep_tol: 1e-6,
            s0: 1e-3,
            max_points: 20000,
        }
    }
}

/// Run-specific caps and trivial-line data for one trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceBounds {
    /// Norm cap `rho`.
    pub rho: f64,
    /// Parameter cap `Lambda` (also the magnitude cap when negative
    /// parameters are allowed).
    pub param_cap: f64,
    /// Parameter of the nontrivial bifurcation point on the trivial line.
    pub mu_eps: f64,
    /// Mushroom traces may cross into negative parameters.
    pub allow_negative_param: bool,
    /// Whether the constant-solution line exists for this frame.
    pub check_gamma00: bool,
}

/// Where a branch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchOrigin {
    BifAtMuEps,
    BifAtZero,
    Gamma00AtCstar,
    UserSeed,
}

/// Why a trace stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationTag {
    ReturnsToGamma0AtZero,
    ReturnsToGamma0AtMuEps,
    MeetsGamma00,
    HitsNormCapRho,
    HitsParamCapLambda,
    NegativeParam,
    StepFailure,
}

impl std::fmt::Display for TerminationTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationTag::ReturnsToGamma0AtZero => "returns_to_gamma0_at_zero",
            TerminationTag::ReturnsToGamma0AtMuEps => "returns_to_gamma0_at_mu_eps",
            TerminationTag::MeetsGamma00 => "meets_gamma00",
            TerminationTag::HitsNormCapRho => "hits_norm_cap_rho",
            TerminationTag::HitsParamCapLambda => "hits_param_cap_Lambda",
            TerminationTag::NegativeParam => "negative_param",
            TerminationTag::StepFailure => "step_failure",
        };
        write!(f, "{s}")
    }
}

/// Termination tag plus the `(param, norm_inf)` location where it fired.
#[derive(Debug, Clone, Copy)]
pub struct Termination {
    pub tag: TerminationTag,
    pub location: (f64, f64),
}

/// An ordered traced component with origin and termination metadata.
#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<SolutionPoint>,
    pub eps: f64,
    pub origin: BranchOrigin,
    /// Parameter value of the originating bifurcation point.
    pub origin_param: f64,
    pub termination: Option<Termination>,
    pub frame: Frame,
    /// Direction used for the first predictor when only the seed point
    /// exists: `(param component, state component)`.
    pub seed_direction: Option<(f64, Vec<f64>)>,
}

impl Branch {
    pub fn last(&self) -> Option<&SolutionPoint> {
        self.points.last()
    }

    pub fn max_norm_inf(&self) -> f64 {
        self.points.iter().map(|p| p.norm_inf()).fold(0.0, f64::max)
    }

    pub fn max_param(&self) -> f64 {
        self.points.iter().map(|p| p.param).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_param(&self) -> f64 {
        self.points.iter().map(|p| p.param).fold(f64::INFINITY, f64::min)
    }

    /// `(param, norm_inf)` polyline of the branch.
    pub fn polyline(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.param, p.norm_inf())).collect()
    }
}

/// Which bifurcation point on the trivial line to seed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifWhich {
    Zero,
    MuEps,
}

/// Eigenfunction predictor at a trivial-line bifurcation point:
/// `(mu_eps, s0 phi_eps)` or `(0, s0 1)`. Not yet Newton-corrected.
pub fn tangent_at_bifurcation(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    which: BifWhich,
    spectrum: &SpectrumReport,
    s0: f64,
) -> Result<SolutionPoint> {
    let (param, dir) = match which {
        BifWhich::Zero => (0.0, &spectrum.zero_pair.eigfun),
        BifWhich::MuEps => {
            if spectrum.principal_values.len() < 2 {
                return Err(Error::Precondition(
                    "spectrum lacks the positive principal eigenvalue".into(),
                ));
            }
            (spectrum.principal_values[1], &spectrum.positive_pair.eigfun)
        }
    };
    let v: Vec<f64> = dir.iter().map(|&x| s0 * x).collect();
    let f = residual(g, param, &v, w, params)?;
    let min_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SolutionPoint {
        param,
        v,
        residual_norm: weighted_residual_norm(g, &f),
        min_v,
        frame: params.frame,
    })
}

/// Builds a one-point branch sitting at a trivial-line bifurcation point,
/// with the eigenfunction as the first predictor direction. With
/// `reverse = true` the seed direction points down the trivial line
/// instead (parameter decreasing), which immediately leaves the admissible
/// region for frames restricted to non-negative parameters.
pub fn seed_branch_at_bifurcation(
    g: &Grid,
    params: &ProblemParams,
    spectrum: &SpectrumReport,
    which: BifWhich,
    reverse: bool,
) -> Result<Branch> {
    let (param, eigfun, origin) = match which {
        BifWhich::Zero => (0.0, spectrum.zero_pair.eigfun.clone(), BranchOrigin::BifAtZero),
        BifWhich::MuEps => {
            if spectrum.principal_values.len() < 2 {
                return Err(Error::Precondition(
                    "spectrum lacks the positive principal eigenvalue".into(),
                ));
            }
            (
                spectrum.principal_values[1],
                spectrum.positive_pair.eigfun.clone(),
                BranchOrigin::BifAtMuEps,
            )
        }
    };
    let seed = SolutionPoint {
        param,
        v: vec![0.0; g.n],
        residual_norm: 0.0,
        min_v: 0.0,
        frame: params.frame,
    };
    let direction = if reverse { (-1.0, vec![0.0; g.n]) } else { (0.0, eigfun) };
    Ok(Branch {
        points: vec![seed],
        eps: params.eps,
        origin,
        origin_param: param,
        termination: None,
        frame: params.frame,
        seed_direction: Some(direction),
    })
}

/// Arclength-constrained Newton corrector around a predictor. The
/// constraint `<w (v - last_v), dir_v> + (param - last_param) dir_param = ds`
/// is linear, so it is satisfied exactly after the first update; iteration
/// continues until the weighted residual norm reaches the tolerance, with
/// one polish step beyond it.
#[allow(clippy::too_many_arguments)]
fn arclength_corrector(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    quad: &[f64],
    pred: (f64, &[f64]),
    dir: (f64, &[f64]),
    last: (f64, &[f64]),
    ds: f64,
    step: &StepControl,
) -> Option<(SolutionPoint, usize)> {
    let (mut param, mut v) = (pred.0, pred.1.to_vec());
    let (dir_p, dir_v) = dir;
    let (last_p, last_v) = last;
    let row: Vec<f64> = quad.iter().zip(dir_v).map(|(&wi, &di)| wi * di).collect();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut first_hit: Option<usize> = None;

    for it in 0..step.max_corrector_iter + 2 {
        if params.eps > 0.0 {
            let floor = -params.eps / 2.0;
            for x in v.iter_mut() {
                if *x < floor {
                    *x = floor;
                }
            }
        }
        let f = residual(g, param, &v, w, params).ok()?;
        let res = weighted_residual_norm(g, &f);
        let constraint: f64 = v
            .iter()
            .zip(last_v)
            .zip(&row)
            .map(|((&vi, &li), &r)| (vi - li) * r)
            .sum::<f64>()
            + (param - last_p) * dir_p
            - ds;
        let converged = res <= step.newton_tol && constraint.abs() <= 1e-8 * ds.abs().max(1.0);
        if converged {
            first_hit.get_or_insert(it);
            let stalled = best.as_ref().is_some_and(|(_, _, b)| res >= 0.5 * b);
            if best.as_ref().is_none_or(|(_, _, b)| res < *b) {
                best = Some((param, v.clone(), res));
            }
            if stalled || it >= step.max_corrector_iter {
                break;
            }
        } else if it >= step.max_corrector_iter {
            break;
        }

        let jac = jacobian(g, param, &v, w, params).ok()?;
        let col = {
            let mut c = param_derivative(&v, w, params);
            for x in c.iter_mut() {
                *x = -*x;
            }
            c
        };
        let neg_f: Vec<f64> = f.iter().map(|&x| -x).collect();
        let (dv, dp) = solve_bordered(
            &jac.sub,
            &jac.diag,
            &jac.sup,
            &col,
            &row,
            dir_p,
            &neg_f,
            -constraint,
        )
        .ok()?;
        for (vi, &di) in v.iter_mut().zip(&dv) {
            *vi += di;
        }
        param += dp;
        if !param.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return None;
        }
    }

    let (param, v, res) = best?;
    let min_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
    Some((
        SolutionPoint { param, v, residual_norm: res, min_v, frame: params.frame },
        first_hit.unwrap_or(step.max_corrector_iter),
    ))
}

/// Appends points to the branch until a termination predicate fires.
/// Secant predictor (eigenfunction direction for the first step), adaptive
/// arclength in `[ds_min, ds_max]` halving on rejection and doubling after
/// four easy successes. Correction results are rejected when they violate
/// nonnegativity beyond tolerance or collapse onto the trivial line from a
/// distance, both symptoms of leaving the traced sheet.
pub fn extend_branch(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    mut branch: Branch,
    step: &StepControl,
    bounds: &TraceBounds,
) -> Result<Branch> {
    if branch.points.is_empty() {
        return Err(Error::Precondition("cannot extend an empty branch".into()));
    }
    if branch.termination.is_some() {
        return Ok(branch);
    }
    let params = &params.with_frame(branch.frame).with_eps(branch.eps);
    let quad = g.trap_weights();
    let weighted_norm = |v: &[f64]| -> f64 {
        v.iter().zip(&quad).map(|(&x, &wi)| wi * x * x).sum::<f64>().sqrt()
    };

    // current direction: secant of the last two points, else the seed direction
    let (mut dir_p, mut dir_v) = if branch.points.len() >= 2 {
        let a = &branch.points[branch.points.len() - 2];
        let b = &branch.points[branch.points.len() - 1];
        let dv: Vec<f64> = b.v.iter().zip(&a.v).map(|(&x, &y)| x - y).collect();
        (b.param - a.param, dv)
    } else {
        branch
            .seed_direction
            .clone()
            .ok_or_else(|| Error::Precondition("single-point branch without a seed direction".into()))?
    };
    {
        let norm = (weighted_norm(&dir_v).powi(2) + dir_p * dir_p).sqrt();
        if norm == 0.0 {
            return Err(Error::Precondition("degenerate continuation direction".into()));
        }
        dir_p /= norm;
        for x in dir_v.iter_mut() {
            *x /= norm;
        }
    }

    let escape_norm = (100.0 * step.trivial_tol).max(3.0 * step.s0).max(3.0 * step.ds0);
    let mut escaped = branch.points.iter().any(|p| p.norm_inf() > escape_norm);
    let mut ds = step.ds0;
    let mut easy = 0usize;

    while branch.points.len() < step.max_points {
        let last = branch.points.last().unwrap();
        let (last_p, last_norm) = (last.param, last.norm_inf());

        // clamp the predictor so non-negative frames land on the axis
        // instead of overshooting it
        let mut ds_eff = ds;
        if !bounds.allow_negative_param && dir_p < 0.0 && last_p + ds * dir_p < 0.0 {
            ds_eff = (0.9 * last_p / (-dir_p)).max(step.ds_min).min(ds);
        }

        let pred_p = last_p + ds_eff * dir_p;
        let pred_v: Vec<f64> =
            last.v.iter().zip(&dir_v).map(|(&vi, &di)| vi + ds_eff * di).collect();

        let corrected = arclength_corrector(
            g,
            w,
            params,
            &quad,
            (pred_p, &pred_v),
            (dir_p, &dir_v),
            (last_p, &last.v),
            ds_eff,
            step,
        );

        let accepted = corrected.and_then(|(pt, its)| {
            let nnorm = pt.norm_inf();
            if pt.min_v < -clip_tol(nnorm) {
                return None; // left the non-negative sheet
            }
            if nnorm <= step.trivial_tol && last_norm > 0.3 * escape_norm {
                return None; // collapsed onto the zero line from a distance
            }
            Some((pt, its))
        });

        let (pt, its) = match accepted {
            Some(ok) => ok,
            None => {
                ds *= 0.5;
                easy = 0;
                if ds < step.ds_min {
                    let loc = (last_p, last_norm);
                    branch.termination =
                        Some(Termination { tag: TerminationTag::StepFailure, location: loc });
                    return Ok(branch);
                }
                continue;
            }
        };

        // parameter cap: reject the overshooting point, keep the invariant
        if pt.param >= bounds.param_cap
            || (bounds.allow_negative_param && pt.param <= -bounds.param_cap)
        {
            branch.termination = Some(Termination {
                tag: TerminationTag::HitsParamCapLambda,
                location: (pt.param, pt.norm_inf()),
            });
            return Ok(branch);
        }

        // update secant direction
        let new_dir_v: Vec<f64> =
            pt.v.iter().zip(&branch.points.last().unwrap().v).map(|(&x, &y)| x - y).collect();
        let new_dir_p = pt.param - last_p;
        let norm = (weighted_norm(&new_dir_v).powi(2) + new_dir_p * new_dir_p).sqrt();
        if norm > 0.0 {
            dir_p = new_dir_p / norm;
            dir_v = new_dir_v.iter().map(|&x| x / norm).collect();
        }

        let nnorm = pt.norm_inf();
        let nparam = pt.param;
        branch.points.push(pt);
        if its <= 3 {
            easy += 1;
            if easy >= 4 {
                ds = (2.0 * ds).min(step.ds_max);
                easy = 0;
            }
        } else {
            easy = 0;
        }
        if nnorm > escape_norm {
            escaped = true;
        }

        // termination predicates
        let window = step.param_tol.max(0.05 * bounds.mu_eps.abs());
        if escaped && nnorm <= step.trivial_tol {
            let tag = if nparam.abs() <= window {
                Some(TerminationTag::ReturnsToGamma0AtZero)
            } else if (nparam - bounds.mu_eps).abs() <= window {
                Some(TerminationTag::ReturnsToGamma0AtMuEps)
            } else {
                None
            };
            if let Some(tag) = tag {
                branch.termination = Some(Termination { tag, location: (nparam, nnorm) });
                return Ok(branch);
            }
        }
        if bounds.check_gamma00 && escaped && nparam <= step.param_tol {
            let last = branch.points.last().unwrap();
            let mean = last.v.iter().sum::<f64>() / last.v.len() as f64;
            let spread = last.v.iter().map(|&x| (x - mean).abs()).fold(0.0f64, f64::max);
            if spread <= step.const_tol && mean > 10.0 * step.trivial_tol {
                branch.termination = Some(Termination {
                    tag: TerminationTag::MeetsGamma00,
                    location: (nparam, nnorm),
                });
                return Ok(branch);
            }
        }
        if nnorm >= bounds.rho {
            branch.termination = Some(Termination {
                tag: TerminationTag::HitsNormCapRho,
                location: (nparam, nnorm),
            });
            return Ok(branch);
        }
        if !bounds.allow_negative_param && nparam < -step.param_tol {
            branch.termination = Some(Termination {
                tag: TerminationTag::NegativeParam,
                location: (nparam, nnorm),
            });
            return Ok(branch);
        }
    }

    let last = branch.points.last().unwrap();
    branch.termination = Some(Termination {
        tag: TerminationTag::StepFailure,
        location: (last.param, last.norm_inf()),
    });
    Ok(branch)
}

/// Re-classifies the last branch point against the termination predicates,
/// in order. Falls back to `step_failure` when nothing matches.
pub fn classify_termination(
    b: &Branch,
    rho: f64,
    lambda_cap: f64,
    _cstar_eps: f64,
    step: &StepControl,
) -> Termination {
    let last = match b.last() {
        Some(p) => p,
        None => {
            return Termination { tag: TerminationTag::StepFailure, location: (f64::NAN, f64::NAN) }
        }
    };
    let norm = last.norm_inf();
    let param = last.param;
    let location = (param, norm);
    let mu_eps = b.origin_param;
    let window = step.param_tol.max(0.05 * mu_eps.abs());
    if norm <= step.trivial_tol && param.abs() <= window {
        return Termination { tag: TerminationTag::ReturnsToGamma0AtZero, location };
    }
    if norm <= step.trivial_tol && (param - mu_eps).abs() <= window {
        return Termination { tag: TerminationTag::ReturnsToGamma0AtMuEps, location };
    }
    let mean = last.v.iter().sum::<f64>() / last.v.len() as f64;
    let spread = last.v.iter().map(|&x| (x - mean).abs()).fold(0.0f64, f64::max);
    if param <= step.param_tol && spread <= step.const_tol {
        return Termination { tag: TerminationTag::MeetsGamma00, location };
    }
    if norm >= rho {
        return Termination { tag: TerminationTag::HitsNormCapRho, location };
    }
    if param >= lambda_cap {
        return Termination { tag: TerminationTag::HitsParamCapLambda, location };
    }
    if param < -step.param_tol {
        return Termination { tag: TerminationTag::NegativeParam, location };
    }
    Termination { tag: TerminationTag::StepFailure, location }
}

/// All solutions on the branch at a fixed parameter value: locates the
/// polyline crossings, refines each by fixed-parameter Newton, and drops
/// duplicates closer than `sol_sep_tol` in max-norm. Rescaled branches
/// (P frame with a positive regularization) are refined in their source
/// frame and mapped back.
pub fn solutions_at_param(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    b: &Branch,
    param_value: f64,
    step: &StepControl,
) -> Result<Vec<SolutionPoint>> {
    let rescaled = b.frame == Frame::P && b.eps > 0.0;
    let mut found: Vec<SolutionPoint> = Vec::new();
    for k in 0..b.points.len().saturating_sub(1) {
        let (p0, p1) = (&b.points[k], &b.points[k + 1]);
        let (d0, d1) = (p0.param - param_value, p1.param - param_value);
        if d0 == 0.0 || d0 * d1 < 0.0 {
            let t = if d0 == 0.0 { 0.0 } else { d0 / (d0 - d1) };
            let interp: Vec<f64> =
                p0.v.iter().zip(&p1.v).map(|(&x, &y)| x + t * (y - x)).collect();
            let refined = if rescaled {
                refine_rescaled(g, w, params, b.eps, param_value, &interp, step)?
            } else {
                let solve_params = params.with_frame(b.frame).with_eps(b.eps);
                newton_solve(g, &interp, param_value, w, &solve_params, step.newton_tol, 50)?
                    .converged()
                    .cloned()
            };
            if let Some(pt) = refined {
                let distinct = found.iter().all(|other| {
                    pt.v.iter()
                        .zip(&other.v)
                        .map(|(&x, &y)| (x - y).abs())
                        .fold(0.0f64, f64::max)
                        > step.sol_sep_tol
                });
                if distinct {
                    found.push(pt);
                }
            }
        }
    }
    Ok(found)
}

/// Refines a crossing of a rescaled branch: maps the interpolated state to
/// the source frame, solves there, and maps the solution back.
fn refine_rescaled(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    eps: f64,
    lambda: f64,
    u_interp: &[f64],
    step: &StepControl,
) -> Result<Option<SolutionPoint>> {
    if lambda <= 0.0 {
        return Ok(None);
    }
    let (p, q) = (params.p, params.q);
    let mu = lambda.powf((p - 2.0) / (p - q));
    let state_scale = lambda.powf(1.0 / (p - q));
    let v0: Vec<f64> = u_interp.iter().map(|&u| u / state_scale).collect();
    let solve_params = params.with_frame(Frame::Q).with_eps(eps);
    let outcome = newton_solve(g, &v0, mu, w, &solve_params, step.newton_tol, 50)?;
    Ok(outcome.converged().map(|pt| {
        let u: Vec<f64> = pt.v.iter().map(|&v| state_scale * v).collect();
        let min_v = u.iter().cloned().fold(f64::INFINITY, f64::min);
        SolutionPoint {
            param: lambda,
            v: u,
            residual_norm: pt.residual_norm,
            min_v,
            frame: Frame::P,
        }
    }))
}

/// Directed distances from each point of `a` to the point set `b`.
pub fn directed_point_distances(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<f64> {
    a.iter()
        .map(|&(x, y)| {
            b.iter()
                .map(|&(u, v)| ((x - u).powi(2) + (y - v).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Symmetric Hausdorff distance between two point sets in the
/// `(param, norm_inf)` plane.
pub fn hausdorff_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let d_ab = directed_point_distances(a, b).into_iter().fold(0.0f64, f64::max);
    let d_ba = directed_point_distances(b, a).into_iter().fold(0.0f64, f64::max);
    d_ab.max(d_ba)
}
