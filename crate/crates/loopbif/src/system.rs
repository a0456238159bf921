//! Nonlinear residuals and Jacobians for the four problem frames, the
//! damped Newton corrector, the constant-solution equation and the
//! integral (divergence) identity, plus randomized nonexistence probes.

use crate::linalg::solve_tridiag;
use crate::mesh::{
    neumann_apply, neumann_laplacian, trapezoid_integral, Frame, Grid, OperatorKind,
    OperatorMatrix, ProblemParams, WeightPair,
};
use crate::{Error, Result};
use rand::Rng;

/// Floor below which the unregularized concave derivative is treated as
/// singular.
pub const DERIV_FLOOR: f64 = 1e-10;

/// Nonnegativity tolerance for accepted states: `1e-12 (1 + |v|_inf)`.
pub fn clip_tol(norm_inf: f64) -> f64 {
    1e-12 * (1.0 + norm_inf)
}

/// One accepted point on a solution branch.
#[derive(Debug, Clone)]
pub struct SolutionPoint {
    /// `mu` in Q-frames, `lambda` in P-frames.
    pub param: f64,
    pub v: Vec<f64>,
    /// Max-norm of the quadrature-weighted residual `w_i F_i`.
    pub residual_norm: f64,
    pub min_v: f64,
    pub frame: Frame,
}

impl SolutionPoint {
    pub fn norm_inf(&self) -> f64 {
        self.v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

/// Regularized concave factor `T_eps(s) = (s+eps)^{q-2} s` for `s >= 0`,
/// extended linearly (value- and slope-matched) by `eps^{q-2} s` for `s < 0`.
/// At `eps = 0` this is the odd power `|s|^{q-2} s`.
pub fn concave_term(s: f64, eps: f64, q: f64) -> f64 {
    if eps == 0.0 {
        if s == 0.0 {
            0.0
        } else {
            s.abs().powf(q - 2.0) * s
        }
    } else if s >= 0.0 {
        (s + eps).powf(q - 2.0) * s
    } else {
        eps.powf(q - 2.0) * s
    }
}

/// Derivative of `concave_term` in `s`.
pub fn concave_term_prime(s: f64, eps: f64, q: f64) -> f64 {
    if eps == 0.0 {
        (q - 1.0) * s.abs().powf(q - 2.0)
    } else if s >= 0.0 {
        (s + eps).powf(q - 2.0) + (q - 2.0) * (s + eps).powf(q - 3.0) * s
    } else {
        eps.powf(q - 2.0)
    }
}

/// Convex factor `S(s) = |s|^{p-2} s`.
pub fn convex_term(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(p - 2.0) * s
    }
}

/// Derivative of `convex_term` in `s`.
pub fn convex_term_prime(s: f64, p: f64) -> f64 {
    (p - 1.0) * s.abs().powf(p - 2.0)
}

/// Full right-hand side of the frame equation (with all parameter factors).
pub fn rhs_total(param: f64, v: &[f64], w: &WeightPair, params: &ProblemParams) -> Vec<f64> {
    let (p, q, eps) = (params.p, params.q, params.eps);
    v.iter()
        .enumerate()
        .map(|(i, &vi)| {
            let (a, b) = (w.a_samples[i], w.b_samples[i]);
            match params.frame {
                Frame::Q => param * (b * concave_term(vi, eps, q) + a * convex_term(vi, p)),
                Frame::P => param * b * concave_term(vi, eps, q) + a * convex_term(vi, p),
                Frame::PEpsVariant => {
                    param * (b - eps) * concave_term(vi, eps, q) + a * convex_term(vi, p)
                }
                Frame::QAltVariant => {
                    param * ((b - eps) * concave_term(vi, eps, q) + a * convex_term(vi, p))
                }
            }
        })
        .collect()
}

/// Diagonal of `d rhs_total / d v`.
fn rhs_derivative(param: f64, v: &[f64], w: &WeightPair, params: &ProblemParams) -> Vec<f64> {
    let (p, q, eps) = (params.p, params.q, params.eps);
    v.iter()
        .enumerate()
        .map(|(i, &vi)| {
            let (a, b) = (w.a_samples[i], w.b_samples[i]);
            match params.frame {
                Frame::Q => {
                    param * (b * concave_term_prime(vi, eps, q) + a * convex_term_prime(vi, p))
                }
                Frame::P => {
                    param * b * concave_term_prime(vi, eps, q) + a * convex_term_prime(vi, p)
                }
                Frame::PEpsVariant => {
                    param * (b - eps) * concave_term_prime(vi, eps, q)
                        + a * convex_term_prime(vi, p)
                }
                Frame::QAltVariant => {
                    param
                        * ((b - eps) * concave_term_prime(vi, eps, q)
                            + a * convex_term_prime(vi, p))
                }
            }
        })
        .collect()
}

/// `d rhs_total / d param`.
pub fn param_derivative(v: &[f64], w: &WeightPair, params: &ProblemParams) -> Vec<f64> {
    let (p, q, eps) = (params.p, params.q, params.eps);
    v.iter()
        .enumerate()
        .map(|(i, &vi)| {
            let (a, b) = (w.a_samples[i], w.b_samples[i]);
            match params.frame {
                Frame::Q => b * concave_term(vi, eps, q) + a * convex_term(vi, p),
                Frame::P => b * concave_term(vi, eps, q),
                Frame::PEpsVariant => (b - eps) * concave_term(vi, eps, q),
                Frame::QAltVariant => (b - eps) * concave_term(vi, eps, q) + a * convex_term(vi, p),
            }
        })
        .collect()
}

/// Residual `L v - rhs(param, v)` with the Laplacian applied in flux form.
pub fn residual(
    g: &Grid,
    param: f64,
    v: &[f64],
    w: &WeightPair,
    params: &ProblemParams,
) -> Result<Vec<f64>> {
    if v.len() != g.n {
        return Err(Error::LengthMismatch { expected: g.n, got: v.len() });
    }
    let lv = neumann_apply(g, v);
    let rhs = rhs_total(param, v, w, params);
    let out: Vec<f64> = lv.iter().zip(&rhs).map(|(&l, &r)| l - r).collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("residual evaluation produced a non-finite value".into()));
    }
    Ok(out)
}

/// Residual of a stored point.
pub fn residual_at(g: &Grid, pt: &SolutionPoint, w: &WeightPair, params: &ProblemParams) -> Result<Vec<f64>> {
    residual(g, pt.param, &pt.v, w, &params.with_frame(pt.frame))
}

/// Max-norm of the quadrature-weighted residual `w_i F_i`. This is the
/// acceptance norm used throughout: the trapezoid of any accepted residual
/// is then bounded by `n` times the tolerance.
pub fn weighted_residual_norm(g: &Grid, f: &[f64]) -> f64 {
    let w = g.trap_weights();
    f.iter().zip(&w).map(|(&fi, &wi)| (wi * fi).abs()).fold(0.0, f64::max)
}

/// Jacobian `L - diag(d rhs / d v)` as a tridiagonal operator. Errors when
/// the unregularized concave derivative would be evaluated at a state too
/// close to zero.
pub fn jacobian(
    g: &Grid,
    param: f64,
    v: &[f64],
    w: &WeightPair,
    params: &ProblemParams,
) -> Result<OperatorMatrix> {
    if params.eps == 0.0 && v.iter().any(|&vi| vi.abs() < DERIV_FLOOR) {
        return Err(Error::JacobianSingularAtOrigin);
    }
    let mut m = neumann_laplacian(g);
    m.kind = OperatorKind::ShiftedResolventTarget;
    let dr = rhs_derivative(param, v, w, params);
    for (d, r) in m.diag.iter_mut().zip(&dr) {
        *d -= r;
    }
    Ok(m)
}

/// Why a Newton solve gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailReason {
    MaxIter,
    Singular,
    Nan,
}

/// Failure record carrying the last iterate.
#[derive(Debug, Clone)]
pub struct NewtonFailure {
    pub last: Vec<f64>,
    pub reason: FailReason,
}

/// Outcome of a fixed-parameter Newton solve.
#[derive(Debug, Clone)]
pub enum NewtonOutcome {
    Converged(SolutionPoint),
    Failed(NewtonFailure),
}

impl NewtonOutcome {
    pub fn converged(&self) -> Option<&SolutionPoint> {
        match self {
            NewtonOutcome::Converged(pt) => Some(pt),
            NewtonOutcome::Failed(_) => None,
        }
    }
}

fn clip_state(v: &mut [f64], eps: f64) {
    if eps > 0.0 {
        let floor = -eps / 2.0;
        for x in v.iter_mut() {
            if *x < floor {
                *x = floor;
            }
        }
    }
}

/// Damped Newton iteration at a fixed parameter value. Accepts when the
/// weighted residual max-norm drops to `tol`, then keeps iterating while
/// the residual still improves markedly, so the returned point sits at the
/// numerical solution rather than just inside the tolerance band. Armijo
/// backtracking on the squared residual, factor 1/2, at most 30 halvings.
/// Negative overshoots are clipped to `-eps/2` before every evaluation.
pub fn newton_solve(
    g: &Grid,
    initial: &[f64],
    param: f64,
    w: &WeightPair,
    params: &ProblemParams,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("newton tolerance must be > 0, got {tol}")));
    }
    if params.eps == 0.0 {
        newton_eps0_homotopy(g, initial, param, w, params, tol, max_iter)
    } else {
        newton_core(g, initial, param, w, params, tol, max_iter)
    }
}

fn newton_core(
    g: &Grid,
    initial: &[f64],
    param: f64,
    w: &WeightPair,
    params: &ProblemParams,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let quad = g.trap_weights();
    let mut v = initial.to_vec();
    clip_state(&mut v, params.eps);
    // best state seen inside the tolerance band
    let mut best: Option<(Vec<f64>, f64)> = None;
    let extra_budget = 80usize;
    let mut extra_used = 0usize;

    let finish = |best: Option<(Vec<f64>, f64)>, frame: Frame| -> Option<NewtonOutcome> {
        best.map(|(bv, bres)| {
            let min_v = bv.iter().cloned().fold(f64::INFINITY, f64::min);
            NewtonOutcome::Converged(SolutionPoint {
                param,
                v: bv,
                residual_norm: bres,
                min_v,
                frame,
            })
        })
    };

    let mut iter = 0usize;
    loop {
        let f = match residual(g, param, &v, w, params) {
            Ok(f) => f,
            Err(_) => {
                return Ok(NewtonOutcome::Failed(NewtonFailure { last: v, reason: FailReason::Nan }))
            }
        };
        let res = weighted_residual_norm(g, &f);
        if res <= tol {
            let stalled = best.as_ref().is_some_and(|(_, b)| res >= 0.5 * b);
            if best.as_ref().is_none_or(|(_, b)| res < *b) {
                best = Some((v.clone(), res));
            }
            extra_used += 1;
            if stalled || extra_used > extra_budget {
                return Ok(finish(best, params.frame).unwrap());
            }
        } else if iter >= max_iter {
            if let Some(done) = finish(best, params.frame) {
                return Ok(done);
            }
            return Ok(NewtonOutcome::Failed(NewtonFailure { last: v, reason: FailReason::MaxIter }));
        }
        iter += 1;

        let jac = match jacobian(g, param, &v, w, params) {
            Ok(j) => j,
            Err(_) => {
                if let Some(done) = finish(best, params.frame) {
                    return Ok(done);
                }
                return Ok(NewtonOutcome::Failed(NewtonFailure {
                    last: v,
                    reason: FailReason::Singular,
                }));
            }
        };
        let neg_f: Vec<f64> = f.iter().map(|&x| -x).collect();
        let dv = match solve_tridiag(&jac.sub, &jac.diag, &jac.sup, &neg_f) {
            Ok(dv) => dv,
            Err(_) => {
                if let Some(done) = finish(best, params.frame) {
                    return Ok(done);
                }
                return Ok(NewtonOutcome::Failed(NewtonFailure {
                    last: v,
                    reason: FailReason::Singular,
                }));
            }
        };

        // Armijo backtracking on the weighted squared residual
        let f0: f64 = f.iter().zip(&quad).map(|(&fi, &wi)| (wi * fi) * (wi * fi)).sum();
        let mut t = 1.0;
        let mut stepped = false;
        for _ in 0..30 {
            let mut vt: Vec<f64> = v.iter().zip(&dv).map(|(&vi, &di)| vi + t * di).collect();
            clip_state(&mut vt, params.eps);
            if let Ok(ft) = residual(g, param, &vt, w, params) {
                let ft2: f64 = ft.iter().zip(&quad).map(|(&fi, &wi)| (wi * fi) * (wi * fi)).sum();
                if ft2 <= (1.0 - 1e-4 * t) * f0 || weighted_residual_norm(g, &ft) <= tol {
                    v = vt;
                    stepped = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !stepped {
            if let Some(done) = finish(best, params.frame) {
                return Ok(done);
            }
            return Ok(NewtonOutcome::Failed(NewtonFailure { last: v, reason: FailReason::MaxIter }));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Ok(NewtonOutcome::Failed(NewtonFailure { last: v, reason: FailReason::Nan }));
        }
    }
}

/// Unregularized solves step down a small-`eps` ladder before the final
/// refinement, because the concave power loses differentiability at zero.
fn newton_eps0_homotopy(
    g: &Grid,
    initial: &[f64],
    param: f64,
    w: &WeightPair,
    params: &ProblemParams,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let mut v = initial.to_vec();
    for stage_eps in [1e-6, 1e-8] {
        let stage = params.with_eps(stage_eps);
        match newton_core(g, &v, param, w, &stage, tol, max_iter)? {
            NewtonOutcome::Converged(pt) => v = pt.v,
            NewtonOutcome::Failed(f) => return Ok(NewtonOutcome::Failed(f)),
        }
    }
    // final refinement at eps = 0 when the state stays away from the
    // derivative singularity; otherwise classify the ladder result directly
    let norm = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if v.iter().all(|&vi| vi.abs() >= DERIV_FLOOR) {
        if let NewtonOutcome::Converged(pt) = newton_core(g, &v, param, w, params, tol, max_iter)? {
            return Ok(NewtonOutcome::Converged(pt));
        }
    }
    let f = residual(g, param, &v, w, params)?;
    let res = weighted_residual_norm(g, &f);
    if res <= tol || norm <= clip_tol(norm) {
        let min_v = v.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok(NewtonOutcome::Converged(SolutionPoint {
            param,
            v,
            residual_norm: res,
            min_v,
            frame: params.frame,
        }));
    }
    Ok(NewtonOutcome::Failed(NewtonFailure { last: v, reason: FailReason::MaxIter }))
}

/// Unique positive root `c` of `c^{p-2} (c + eps)^{2-q} = -int_b / int_a`,
/// by bisection. The left side is strictly increasing for `c > 0`, so the
/// root is simple; the bracket is shrunk until the midpoint is converged to
/// relative machine width.
pub fn cstar(eps: f64, w: &WeightPair, params: &ProblemParams) -> Result<f64> {
    if w.int_a <= 0.0 {
        return Err(Error::ConstantLimitUndefined);
    }
    if w.int_b >= 0.0 {
        return Err(Error::Precondition(format!(
            "constant-solution equation needs int_b < 0, got {}",
            w.int_b
        )));
    }
    let r = -w.int_b / w.int_a;
    let (p, q) = (params.p, params.q);
    let f = |c: f64| c.powf(p - 2.0) * (c + eps).powf(2.0 - q) - r;
    let mut lo = 1e-8f64.min(r);
    while f(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Numerical("constant-solution bracket collapsed".into()));
        }
    }
    let mut hi = 1.0f64.max(r);
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Numerical("constant-solution bracket diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Absolute trapezoid of the full right side divided by the parameter:
/// vanishes at exact solutions because the Laplacian rows sum to zero, and
/// is bounded by `n * newton_tol / param` for accepted points.
pub fn divergence_residual(
    g: &Grid,
    pt: &SolutionPoint,
    w: &WeightPair,
    params: &ProblemParams,
) -> Result<f64> {
    if pt.param == 0.0 {
        return Err(Error::IdentityUndefinedAtZeroParameter);
    }
    let rhs = rhs_total(pt.param, &pt.v, w, &params.with_frame(pt.frame));
    Ok(trapezoid_integral(g, &rhs)?.abs() / pt.param.abs())
}

/// One probe outcome: where a randomized Newton start ended up.
#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub converged: bool,
    pub norm_inf: f64,
    pub min_v: f64,
}

/// Report over all probe starts.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub outcomes: Vec<ProbeOutcome>,
}

impl ProbeReport {
    /// True when every converged outcome is trivial at the given threshold.
    pub fn only_trivial_or_failed(&self, threshold: f64) -> bool {
        self.outcomes.iter().all(|o| !o.converged || o.norm_inf <= threshold)
    }

    /// True when some converged outcome is a positive solution above the
    /// triviality threshold.
    pub fn found_positive(&self, threshold: f64) -> bool {
        self.outcomes
            .iter()
            .any(|o| o.converged && o.norm_inf > threshold && o.min_v > 0.0)
    }
}

/// Newton probe at `lambda = 0` in the unregularized frame from random
/// positive starts. Valid configurations admit no nontrivial non-negative
/// solution there, so every converged outcome should be trivial.
pub fn nonexistence_probe_lambda0<R: Rng>(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    n_starts: usize,
    rng: &mut R,
) -> Result<ProbeReport> {
    let frame_params = ProblemParams { frame: Frame::P, eps: 0.0, ..*params };
    probe_at_param(g, w, &frame_params, 0.0, n_starts, rng)
}

/// Newton probe at a fixed parameter from random positive starts.
pub fn probe_at_param<R: Rng>(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    param: f64,
    n_starts: usize,
    rng: &mut R,
) -> Result<ProbeReport> {
    let mut outcomes = Vec::with_capacity(n_starts);
    for _ in 0..n_starts {
        let start: Vec<f64> = (0..g.n).map(|_| 0.1 + rng.gen_range(0.0..1.0)).collect();
        let outcome = newton_solve(g, &start, param, w, params, 1e-10, 60)?;
        match outcome {
            NewtonOutcome::Converged(pt) => outcomes.push(ProbeOutcome {
                converged: true,
                norm_inf: pt.norm_inf(),
                min_v: pt.min_v,
            }),
            NewtonOutcome::Failed(f) => {
                let norm = f.last.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
                let min_v = f.last.iter().cloned().fold(f64::INFINITY, f64::min);
                outcomes.push(ProbeOutcome { converged: false, norm_inf: norm, min_v });
            }
        }
    }
    Ok(ProbeReport { outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, sample_weights, WeightSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (Grid, WeightPair) {
        let g = build_grid(n, 0.0, 1.0).unwrap();
        let w = sample_weights(
            &WeightSpec::Constant { value: 1.0 },
            &WeightSpec::CosineShift { amplitude: 1.0, offset: -0.5 },
            &g,
        )
        .unwrap();
        (g, w)
    }

    fn q_params(eps: f64) -> ProblemParams {
        ProblemParams::new(3.0, 1.5, eps, 1.0, Frame::Q).unwrap()
    }

    #[test]
    fn residual_vanishes_on_trivial_lines() {
        let (g, w) = setup(129);
        let params = q_params(1e-2);
        // zero line, any parameter
        let f = residual(&g, 0.7, &vec![0.0; g.n], &w, &params).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
        // constant line at mu = 0
        let f = residual(&g, 0.0, &vec![0.42; g.n], &w, &params).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn concave_extension_is_c1_at_zero() {
        let (eps, q) = (0.05, 1.5);
        let right = concave_term_prime(1e-14, eps, q);
        let left = concave_term_prime(-1e-14, eps, q);
        assert!((right - left).abs() < 1e-10 * left.abs());
        assert!((concave_term(0.0, eps, q)).abs() == 0.0);
    }

    #[test]
    fn jacobian_at_zero_matches_linearization() {
        let (g, w) = setup(65);
        let params = q_params(1e-2);
        let mu = 0.8;
        let jac = jacobian(&g, mu, &vec![0.0; g.n], &w, &params).unwrap();
        let lap = neumann_laplacian(&g);
        let factor = mu * params.eps.powf(params.q - 2.0);
        for i in 0..g.n {
            let expected = lap.diag[i] - factor * w.b_samples[i];
            assert!((jac.diag[i] - expected).abs() <= 1e-12 * expected.abs());
        }
        assert_eq!(jac.sub, lap.sub);
        assert_eq!(jac.sup, lap.sup);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let (g, w) = setup(48);
        let params = q_params(1e-2);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mu = 0.6;
        for _ in 0..3 {
            let v: Vec<f64> = (0..g.n).map(|_| 0.2 + rng.gen_range(0.0..1.0)).collect();
            let jac = jacobian(&g, mu, &v, &w, &params).unwrap();
            let norm_v = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            let step = 1e-7 * (1.0 + norm_v);
            for j in [0usize, 1, g.n / 2, g.n - 1] {
                let mut vp = v.clone();
                vp[j] += step;
                let mut vm = v.clone();
                vm[j] -= step;
                let fp = residual(&g, mu, &vp, &w, &params).unwrap();
                let fm = residual(&g, mu, &vm, &w, &params).unwrap();
                for i in j.saturating_sub(1)..(j + 2).min(g.n) {
                    let fd = (fp[i] - fm[i]) / (2.0 * step);
                    let analytic = if i == j {
                        jac.diag[i]
                    } else if i + 1 == j {
                        jac.sup[i]
                    } else {
                        jac.sub[j]
                    };
                    let scale = analytic.abs().max(1.0);
                    assert!(
                        (fd - analytic).abs() / scale < 1e-6,
                        "fd {fd} vs analytic {analytic} at ({i}, {j})"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_errors_at_unregularized_origin() {
        let (g, w) = setup(33);
        let params = q_params(0.0);
        let mut v = vec![0.5; g.n];
        v[7] = 0.0;
        let err = jacobian(&g, 0.4, &v, &w, &params).unwrap_err();
        assert!(matches!(err, Error::JacobianSingularAtOrigin));
    }

    #[test]
    fn weighted_jacobian_is_bitwise_symmetric() {
        let (g, w) = setup(97);
        let params = q_params(1e-2);
        let v: Vec<f64> = g.nodes.iter().map(|&x| 0.3 + 0.2 * (3.0 * x).sin()).collect();
        let jac = jacobian(&g, 0.9, &v, &w, &params).unwrap();
        let quad = g.trap_weights();
        for i in 0..g.n - 1 {
            let upper = quad[i] * jac.sup[i];
            let lower = quad[i + 1] * jac.sub[i];
            assert_eq!(upper, lower, "weighted symmetry broken at {i}");
        }
    }

    #[test]
    fn newton_converges_near_constant_branch() {
        let (g, w) = setup(129);
        let params = q_params(1e-1);
        let c = cstar(params.eps, &w, &params).unwrap();
        let initial = vec![c; g.n];
        let outcome = newton_solve(&g, &initial, 1e-3, &w, &params, 1e-10, 50).unwrap();
        let pt = outcome.converged().expect("newton should converge near the constant line");
        assert!(pt.residual_norm <= 1e-10);
        assert!(pt.min_v >= -clip_tol(pt.norm_inf()));
        let spread = pt
            .v
            .iter()
            .map(|&x| (x - c).abs())
            .fold(0.0f64, f64::max);
        assert!(spread < 0.05, "limit spread {spread}");
    }

    #[test]
    fn newton_from_zero_stays_at_zero() {
        let (g, w) = setup(65);
        let params = q_params(1e-2);
        let outcome = newton_solve(&g, &vec![0.0; g.n], 0.5, &w, &params, 1e-10, 20).unwrap();
        let pt = outcome.converged().unwrap();
        assert_eq!(pt.norm_inf(), 0.0);
    }

    #[test]
    fn cstar_examples() {
        let (g, w) = setup(513);
        let params = q_params(0.0);
        // -int_b / int_a = 0.5 for this weight pair
        let c0 = cstar(0.0, &w, &params).unwrap();
        assert!((c0 - 0.5f64.powf(2.0 / 3.0)).abs() < 1e-9, "c0 = {c0}");

        let c01 = cstar(0.1, &w, &params).unwrap();
        let back = c01.powf(1.0) * (c01 + 0.1).powf(0.5);
        assert!((back - (-w.int_b / w.int_a)).abs() < 1e-13);

        // exact ratio 1 gives root 1
        let wp = sample_weights(
            &WeightSpec::Constant { value: 1.0 },
            &WeightSpec::PiecewiseConstant { breakpoints: vec![0.5], values: vec![-3.0, 1.0] },
            &g,
        )
        .unwrap();
        assert!((wp.int_b + 1.0).abs() < 1e-12);
        let c1 = cstar(0.0, &wp, &params).unwrap();
        assert!((c1 - 1.0).abs() < 1e-12);

        let neg_a = sample_weights(
            &WeightSpec::Constant { value: -1.0 },
            &WeightSpec::CosineShift { amplitude: 1.0, offset: -0.5 },
            &g,
        )
        .unwrap();
        assert!(matches!(cstar(0.0, &neg_a, &params).unwrap_err(), Error::ConstantLimitUndefined));
    }

    #[test]
    fn cstar_monotone_in_eps_and_converges() {
        let (_, w) = setup(513);
        let params = q_params(0.0);
        let c0 = cstar(0.0, &w, &params).unwrap();
        let cs: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&e| cstar(e, &w, &params).unwrap())
            .collect();
        for pair in cs.windows(2) {
            assert!(pair[0] < pair[1], "c* must increase as eps decreases");
        }
        assert!((cs[4] - c0).abs() < 1e-4);
        let mut diffs: Vec<f64> = cs.iter().map(|&c| (c - c0).abs()).collect();
        diffs.push(0.0);
        for pair in diffs.windows(2) {
            assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn divergence_residual_examples() {
        let (g, w) = setup(257);
        let params = q_params(0.1);
        let c = cstar(params.eps, &w, &params).unwrap();
        let pt = SolutionPoint {
            param: 0.37,
            v: vec![c; g.n],
            residual_norm: 0.0,
            min_v: c,
            frame: Frame::Q,
        };
        let d = divergence_residual(&g, &pt, &w, &params).unwrap();
        assert!(d < 1e-12, "divergence at the constant root: {d}");

        // a constant away from the root leaves a finite defect
        let params0 = q_params(0.0);
        let m = 0.9 * c;
        let pt = SolutionPoint {
            param: 1.0,
            v: vec![m; g.n],
            residual_norm: 0.0,
            min_v: m,
            frame: Frame::Q,
        };
        let d = divergence_residual(&g, &pt, &w, &params0).unwrap();
        let expected = (m.powf(0.5) * w.int_b + m.powf(2.0) * w.int_a).abs();
        assert!((d - expected).abs() < 1e-12);
        assert!(d > 1e-3);

        let pt0 = SolutionPoint { param: 0.0, ..pt };
        assert!(matches!(
            divergence_residual(&g, &pt0, &w, &params0).unwrap_err(),
            Error::IdentityUndefinedAtZeroParameter
        ));
    }

    #[test]
    fn frame_consistency_under_rescaling() {
        let (g, w) = setup(129);
        let (p, q) = (3.0, 1.5);
        let params_p = ProblemParams::new(p, q, 0.0, 1.0, Frame::P).unwrap();
        let params_q = ProblemParams::new(p, q, 0.0, 1.0, Frame::Q).unwrap();
        let lambda = 0.37f64;
        let mu = lambda.powf((p - 2.0) / (p - q));
        let u: Vec<f64> = g.nodes.iter().map(|&x| 0.4 + 0.3 * (2.0 * x).cos()).collect();
        let v: Vec<f64> = u.iter().map(|&ui| lambda.powf(-1.0 / (p - q)) * ui).collect();
        let fp = residual(&g, lambda, &u, &w, &params_p).unwrap();
        let fq = residual(&g, mu, &v, &w, &params_q).unwrap();
        let scale = lambda.powf(1.0 / (p - q));
        let err = fp
            .iter()
            .zip(&fq)
            .map(|(&rp, &rq)| (rp - scale * rq).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10, "frame mismatch {err}");
    }

    #[test]
    fn alt_variant_frame_shifts_the_concave_weight() {
        let g = build_grid(129, 0.0, 1.0).unwrap();
        // zero-integral sign-changing weight: the shifted variant applies
        let w = sample_weights(
            &WeightSpec::Constant { value: 1.0 },
            &WeightSpec::CosineShift { amplitude: 1.0, offset: 0.0 },
            &g,
        )
        .unwrap();
        assert!(w.int_b.abs() < 1e-12);
        let params = ProblemParams::new(3.0, 1.5, 1e-2, 1.0, Frame::QAltVariant).unwrap();
        // trivial lines still hold exactly
        let f = residual(&g, 0.9, &vec![0.0; g.n], &w, &params).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
        let f = residual(&g, 0.0, &vec![0.55; g.n], &w, &params).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
        // the variant coincides with the plain frame run on b - eps
        let shifted = sample_weights(
            &WeightSpec::Constant { value: 1.0 },
            &WeightSpec::CosineShift { amplitude: 1.0, offset: -params.eps },
            &g,
        )
        .unwrap();
        let plain = params.with_frame(Frame::Q);
        let v: Vec<f64> = g.nodes.iter().map(|&x| 0.3 + 0.2 * (3.0 * x).sin()).collect();
        let fa = residual(&g, 0.7, &v, &w, &params).unwrap();
        let fb = residual(&g, 0.7, &v, &shifted, &plain).unwrap();
        let err = fa
            .iter()
            .zip(&fb)
            .map(|(&x, &y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "variant mismatch {err}");
    }

    #[test]
    fn lambda0_probe_finds_only_trivial_outcomes() {
        let (g, w) = setup(129);
        let params = ProblemParams::new(3.0, 1.5, 0.0, 1.0, Frame::P).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let report = nonexistence_probe_lambda0(&g, &w, &params, 8, &mut rng).unwrap();
        assert_eq!(report.outcomes.len(), 8);
        assert!(report.only_trivial_or_failed(1e-10));

        let empty = nonexistence_probe_lambda0(&g, &w, &params, 0, &mut rng).unwrap();
        assert!(empty.outcomes.is_empty());
    }
}
