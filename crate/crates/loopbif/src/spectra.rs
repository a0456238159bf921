//! Principal eigenvalues of the indefinite-weight Neumann problem
//! `-phi'' = nu b(x) phi`, the Dirichlet problem on a positivity ball,
//! and the parameter cap derived from it.
//!
//! The indefinite pencil is handled through its lowest eigencurve: for the
//! quadrature-symmetrized matrix `S(nu) = S - nu diag(b)` the smallest
//! eigenvalue is concave in `nu`, vanishes at `nu = 0` (constant mode) and
//! has exactly one positive zero when `b` changes sign with negative
//! integral. That zero is the positive principal eigenvalue; it is located
//! by bisection on the LDL^T inertia count, and the eigenfunction is then
//! recovered by inverse iteration on the near-singular shifted matrix.

use crate::linalg::{inertia_negative, inverse_iteration_near_zero};
use crate::mesh::{trapezoid_integral, Grid, ProblemParams, WeightPair};
use crate::{Error, Result};

/// One eigenvalue with its max-normalized eigenfunction.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub eigfun: Vec<f64>,
    pub positive: bool,
}

/// The two principal eigenvalues of the regularized linearization and the
/// transversality data attached to the positive one.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Always `[0, mu_eps]`.
    pub principal_values: Vec<f64>,
    /// `int b phi_eps^2` for the positive principal eigenfunction.
    pub transversality_integral: f64,
    /// Principal eigenvalue of the unscaled problem `-phi'' = nu b phi`.
    pub nu_unscaled: f64,
    /// `(0, phi = 1)`.
    pub zero_pair: EigenPair,
    /// `(mu_eps, phi_eps)`.
    pub positive_pair: EigenPair,
}

/// Symmetrized Neumann operator `S = D^{-1} (W L) D^{-1}` with
/// `D = diag(sqrt(w))`. `W L` is the path-graph Laplacian scaled by `1/h`.
fn symmetrized_neumann(g: &Grid) -> (Vec<f64>, Vec<f64>) {
    let n = g.n;
    let w = g.trap_weights();
    let inv_h = 1.0 / g.h;
    let mut wl_diag = vec![2.0 * inv_h; n];
    wl_diag[0] = inv_h;
    wl_diag[n - 1] = inv_h;
    let diag: Vec<f64> = wl_diag.iter().zip(&w).map(|(&d, &wi)| d / wi).collect();
    let off: Vec<f64> = (0..n - 1).map(|i| -inv_h / (w[i] * w[i + 1]).sqrt()).collect();
    (diag, off)
}

/// Smallest positive zero of the lowest eigencurve of `(S, diag(weight))`.
/// Returns the eigenvalue bracket midpoint after bisection to relative
/// width `1e-13`.
fn principal_positive_eigenvalue(
    s_diag: &[f64],
    s_off: &[f64],
    weight: &[f64],
    bracket_hint: Option<f64>,
) -> Result<f64> {
    let neg_count = |nu: f64| {
        let shift: Vec<f64> = weight.iter().map(|&b| nu * b).collect();
        inertia_negative(s_diag, s_off, &shift)
    };
    let mut hi = bracket_hint.unwrap_or(1.0).max(1.0);
    let mut grew = 0;
    while neg_count(hi) == 0 {
        hi *= 2.0;
        grew += 1;
        if grew > 60 {
            return Err(Error::NoPositivePrincipalEigenvalue(
                "inertia never turns negative on the scanned range".into(),
            ));
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if neg_count(mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    if lo == 0.0 {
        // the curve dips negative immediately: no positive principal value
        return Err(Error::NoPositivePrincipalEigenvalue(
            "lowest eigencurve has no positive zero".into(),
        ));
    }
    // simplicity: only the lowest eigencurve crosses here
    if neg_count(hi) != 1 {
        return Err(Error::Numerical(format!(
            "eigencurve crossing at {} is not simple",
            0.5 * (lo + hi)
        )));
    }
    Ok(0.5 * (lo + hi))
}

/// Coarse-grid bracket for the fine bisection. Subsamples the node values
/// with an exact stride when one exists; otherwise returns `None` and the
/// fine search grows its own bracket.
fn coarse_bracket(g: &Grid, weight: &[f64]) -> Option<f64> {
    let n = g.n;
    if n <= 257 {
        return None;
    }
    let mut stride = (n - 1).div_ceil(256);
    while stride < (n - 1) / 2 && !(n - 1).is_multiple_of(stride) {
        stride += 1;
    }
    if !(n - 1).is_multiple_of(stride) {
        return None;
    }
    let nc = (n - 1) / stride + 1;
    let gc = crate::mesh::build_grid(nc, g.x_lo, g.x_hi).ok()?;
    let wc: Vec<f64> = (0..nc).map(|i| weight[i * stride]).collect();
    let (s_diag, s_off) = symmetrized_neumann(&gc);
    principal_positive_eigenvalue(&s_diag, &s_off, &wc, None)
        .ok()
        .map(|nu| 4.0 * nu)
}

/// Positive principal eigenvalue and eigenfunction of
/// `-phi'' = nu weight(x) phi` with Neumann boundary.
fn principal_pair(g: &Grid, weight: &[f64]) -> Result<(f64, Vec<f64>)> {
    let int_w = trapezoid_integral(g, weight)?;
    let tol = 1e-12 * g.n as f64;
    let changes_sign =
        weight.iter().any(|&x| x > 0.0) && weight.iter().any(|&x| x < 0.0);
    if !changes_sign || int_w >= -tol {
        return Err(Error::NoPositivePrincipalEigenvalue(format!(
            "weight must change sign with negative integral (int = {int_w:.3e})"
        )));
    }
    let (s_diag, s_off) = symmetrized_neumann(g);
    let hint = coarse_bracket(g, weight);
    let nu = principal_positive_eigenvalue(&s_diag, &s_off, weight, hint)?;

    // ground state of S - nu B: positive for the principal value
    let shifted: Vec<f64> = s_diag.iter().zip(weight).map(|(&d, &b)| d - nu * b).collect();
    let w = g.trap_weights();
    let start: Vec<f64> = w.iter().map(|&wi| wi.sqrt()).collect();
    let psi = inverse_iteration_near_zero(&shifted, &s_off, &start, 40)?;
    let mut phi: Vec<f64> = psi.iter().zip(&w).map(|(&x, &wi)| x / wi.sqrt()).collect();
    let norm = phi.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    for x in phi.iter_mut() {
        *x /= norm;
    }
    if phi.iter().any(|&x| x <= 0.0) {
        return Err(Error::Numerical(
            "principal eigenfunction failed the positivity test".into(),
        ));
    }
    Ok((nu, phi))
}

/// Solves the linearized problem at the trivial line for its two principal
/// eigenvalues `{0, mu_eps}` with `mu_eps = nu eps^{2-q}`, where `nu` is the
/// principal eigenvalue of the unscaled weight problem. The `eps` dependence
/// is an exact rescaling of the same pencil, so it is applied algebraically.
pub fn principal_eigenpair_neumann(
    g: &Grid,
    b: &[f64],
    eps: f64,
    q: f64,
) -> Result<SpectrumReport> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eigen solve needs eps > 0, got {eps}")));
    }
    if b.len() != g.n {
        return Err(Error::LengthMismatch { expected: g.n, got: b.len() });
    }
    let (nu, phi) = principal_pair(g, b)?;
    let mu_eps = nu * eps.powf(2.0 - q);
    let transversality = {
        let prod: Vec<f64> = b.iter().zip(&phi).map(|(&bi, &fi)| bi * fi * fi).collect();
        trapezoid_integral(g, &prod)?
    };
    Ok(SpectrumReport {
        principal_values: vec![0.0, mu_eps],
        transversality_integral: transversality,
        nu_unscaled: nu,
        zero_pair: EigenPair { value: 0.0, eigfun: vec![1.0; g.n], positive: true },
        positive_pair: EigenPair { value: mu_eps, eigfun: phi, positive: true },
    })
}

/// Trapezoid value of `b phi^2`; positive at valid configurations for the
/// positive principal pair, and equal to `int b` for `phi = 1`.
pub fn transversality_check(g: &Grid, b: &[f64], pair: &EigenPair) -> Result<f64> {
    if !pair.positive {
        return Err(Error::Precondition("transversality check needs a positive eigenfunction".into()));
    }
    let prod: Vec<f64> = b.iter().zip(&pair.eigfun).map(|(&bi, &fi)| bi * fi * fi).collect();
    trapezoid_integral(g, &prod)
}

/// Inclusive contiguous node range used as the positivity ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallRange {
    pub first: usize,
    pub last: usize,
}

impl BallRange {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }
    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }
}

/// Largest contiguous run of nodes with `min(a, b) > 0`, shrunk by one node
/// on each side.
pub fn default_ball(w: &WeightPair) -> Result<BallRange> {
    let n = w.a_samples.len();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < n {
        if w.a_samples[i] > 0.0 && w.b_samples[i] > 0.0 {
            let start = i;
            while i < n && w.a_samples[i] > 0.0 && w.b_samples[i] > 0.0 {
                i += 1;
            }
            let end = i - 1;
            if best.is_none_or(|(s, e)| end - start > e - s) {
                best = Some((start, end));
            }
        } else {
            i += 1;
        }
    }
    let (start, end) = best.ok_or_else(|| {
        Error::Precondition("no node has a > 0 and b > 0 simultaneously".into())
    })?;
    if end - start < 4 {
        return Err(Error::Precondition(format!(
            "positivity run [{start}, {end}] too short for a ball"
        )));
    }
    Ok(BallRange { first: start + 1, last: end - 1 })
}

/// First Dirichlet eigenpair of `-w'' = mu a(x) w` on the ball subinterval,
/// zero at the ball's boundary nodes, extended by zero outside.
pub fn dirichlet_ball_eigenpair(g: &Grid, a: &[f64], ball: BallRange) -> Result<EigenPair> {
    if a.len() != g.n {
        return Err(Error::LengthMismatch { expected: g.n, got: a.len() });
    }
    if ball.last >= g.n || ball.len() < 3 {
        return Err(Error::Precondition(format!(
            "ball [{}, {}] must hold at least three nodes inside the grid",
            ball.first, ball.last
        )));
    }
    let interior = (ball.first + 1)..ball.last;
    if (ball.first..=ball.last).any(|i| a[i] <= 0.0) {
        return Err(Error::Precondition("weight a must be positive on the ball".into()));
    }
    let m = interior.len();
    let s = 1.0 / (g.h * g.h);
    let diag = vec![2.0 * s; m];
    let off = vec![-s; m.saturating_sub(1)];
    let a_int: Vec<f64> = interior.clone().map(|i| a[i]).collect();

    let neg_count = |mu: f64| {
        let shift: Vec<f64> = a_int.iter().map(|&ai| mu * ai).collect();
        inertia_negative(&diag, &off, &shift)
    };
    let mut hi = 1.0;
    let mut grew = 0;
    while neg_count(hi) == 0 {
        hi *= 2.0;
        grew += 1;
        if grew > 80 {
            return Err(Error::Numerical("Dirichlet eigenvalue search failed to bracket".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if neg_count(mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let mu_d = 0.5 * (lo + hi);

    let shifted: Vec<f64> = diag.iter().zip(&a_int).map(|(&d, &ai)| d - mu_d * ai).collect();
    let start = vec![1.0; m];
    let w_int = inverse_iteration_near_zero(&shifted, &off, &start, 40)?;
    if w_int.iter().any(|&x| x <= 0.0) {
        return Err(Error::Numerical("Dirichlet ground state failed the positivity test".into()));
    }
    let mut eigfun = vec![0.0; g.n];
    for (k, i) in interior.enumerate() {
        eigfun[i] = w_int[k];
    }
    Ok(EigenPair { value: mu_d, eigfun, positive: true })
}

/// Smallest `mu_bar` on a logarithmic scan such that
/// `a s^{p-q} + mu b (s/(s+1))^{2-q} - mu_D a s^{2-q} >= 0`
/// holds at every ball node for every `s` on a log-spaced grid. The factor
/// `(s/(s+eps))^{2-q}` decreases in `eps`, so scanning at `eps = 1` covers
/// the whole range `(0, 1]`. The no-positive-solution parameter cap is
/// `Lambda = 2 mu_bar`.
pub fn mu_cap(
    g: &Grid,
    w: &WeightPair,
    params: &ProblemParams,
    ball: BallRange,
    mu_d: f64,
) -> Result<f64> {
    if ball.last >= g.n || ball.is_empty() {
        return Err(Error::Precondition("ball range outside the grid".into()));
    }
    if (ball.first..=ball.last).any(|i| w.a_samples[i] <= 0.0 || w.b_samples[i] <= 0.0) {
        return Err(Error::Precondition(
            "cap scan needs a > 0 and b > 0 at every ball node".into(),
        ));
    }
    if !(params.eps > 0.0 && params.eps <= 1.0) {
        return Err(Error::Precondition(format!(
            "cap scan needs eps in (0, 1], got {}",
            params.eps
        )));
    }
    let (p, q) = (params.p, params.q);
    let s_grid = log_grid(1e-8, 1e8, 64);
    let spq: Vec<f64> = s_grid.iter().map(|&s| s.powf(p - q)).collect();
    let s2q: Vec<f64> = s_grid.iter().map(|&s| s.powf(2.0 - q)).collect();
    let frac: Vec<f64> = s_grid.iter().map(|&s| (s / (s + 1.0)).powf(2.0 - q)).collect();

    let mu_grid = log_grid(1.0, 1e8, 8);
    'mu: for &mu in &mu_grid {
        for i in ball.first..=ball.last {
            let (ai, bi) = (w.a_samples[i], w.b_samples[i]);
            for k in 0..s_grid.len() {
                if ai * spq[k] + mu * bi * frac[k] - mu_d * ai * s2q[k] < 0.0 {
                    continue 'mu;
                }
            }
        }
        return Ok(mu);
    }
    Err(Error::CapNotFound(
        "inequality scan exhausted the mu range [1, 1e8]".into(),
    ))
}

/// Log-spaced grid with `per_decade` points per decade, inclusive of both ends.
fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).round() as usize;
    (0..=count)
        .map(|k| lo * 10f64.powf(k as f64 / per_decade as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, sample_weights, Frame, WeightSpec};

    fn cosine_b(g: &Grid) -> Vec<f64> {
        g.nodes
            .iter()
            .map(|&x| (2.0 * std::f64::consts::PI * x).cos() - 0.5)
            .collect()
    }

    #[test]
    fn principal_pair_matches_fine_grid_oracle() {
        let g = build_grid(513, 0.0, 1.0).unwrap();
        let rep = principal_eigenpair_neumann(&g, &cosine_b(&g), 1.0, 1.5).unwrap();
        assert_eq!(rep.principal_values.len(), 2);
        assert_eq!(rep.principal_values[0], 0.0);
        assert!(rep.nu_unscaled > 0.0);
        assert!(rep.positive_pair.eigfun.iter().all(|&x| x > 0.0));
        let norm = rep
            .positive_pair
            .eigfun
            .iter()
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        assert!((norm - 1.0).abs() < 1e-14);

        let g_fine = build_grid(8193, 0.0, 1.0).unwrap();
        let oracle = principal_eigenpair_neumann(&g_fine, &cosine_b(&g_fine), 1.0, 1.5).unwrap();
        let rel = (rep.nu_unscaled - oracle.nu_unscaled).abs() / oracle.nu_unscaled;
        assert!(rel < 1e-3, "relative eigenvalue error {rel}");
    }

    #[test]
    fn eps_dependence_is_exact_rescaling() {
        let g = build_grid(257, 0.0, 1.0).unwrap();
        let b = cosine_b(&g);
        let base = principal_eigenpair_neumann(&g, &b, 1.0, 1.5).unwrap();
        let scaled = principal_eigenpair_neumann(&g, &b, 0.01, 1.5).unwrap();
        let expected = base.nu_unscaled * 0.01f64.powf(0.5);
        let rel = (scaled.principal_values[1] - expected).abs() / expected;
        assert!(rel < 1e-10, "scaling error {rel}");
    }

    #[test]
    fn scaling_law_slope_is_two_minus_q() {
        let g = build_grid(257, 0.0, 1.0).unwrap();
        let b = cosine_b(&g);
        let q = 1.5;
        let eps_seq = [1e-1, 1e-2, 1e-3, 1e-4];
        let pts: Vec<(f64, f64)> = eps_seq
            .iter()
            .map(|&e| {
                let rep = principal_eigenpair_neumann(&g, &b, e, q).unwrap();
                (e.ln(), rep.principal_values[1].ln())
            })
            .collect();
        let slope = least_squares_slope(&pts);
        assert!((slope - (2.0 - q)).abs() < 1e-8, "slope {slope}");
    }

    fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn negative_weight_has_no_positive_principal_value() {
        let g = build_grid(129, 0.0, 1.0).unwrap();
        let b = vec![-1.0; g.n];
        let err = principal_eigenpair_neumann(&g, &b, 1.0, 1.5).unwrap_err();
        assert!(matches!(err, Error::NoPositivePrincipalEigenvalue(_)));
    }

    #[test]
    fn nonnegative_integral_is_rejected() {
        let g = build_grid(129, 0.0, 1.0).unwrap();
        // changes sign but int b = +0.25
        let b: Vec<f64> = g
            .nodes
            .iter()
            .map(|&x| (2.0 * std::f64::consts::PI * x).cos() + 0.25)
            .collect();
        assert!(principal_eigenpair_neumann(&g, &b, 1.0, 1.5).is_err());
    }

    #[test]
    fn small_positive_perturbation_keeps_the_structure() {
        let g = build_grid(257, 0.0, 1.0).unwrap();
        let b: Vec<f64> = cosine_b(&g).iter().map(|&x| x + 0.05).collect();
        let rep = principal_eigenpair_neumann(&g, &b, 1.0, 1.5).unwrap();
        assert_eq!(rep.principal_values.len(), 2);
        assert!(rep.positive_pair.positive);
    }

    #[test]
    fn transversality_examples() {
        let g = build_grid(513, 0.0, 1.0).unwrap();
        let b = cosine_b(&g);
        let ones = EigenPair { value: 0.0, eigfun: vec![1.0; g.n], positive: true };
        let int_b = transversality_check(&g, &b, &ones).unwrap();
        assert!((int_b + 0.5).abs() < 1e-6);

        let rep = principal_eigenpair_neumann(&g, &b, 1.0, 1.5).unwrap();
        let t = transversality_check(&g, &b, &rep.positive_pair).unwrap();
        assert!(t > 0.0, "transversality integral {t}");
        assert!((rep.transversality_integral - t).abs() < 1e-15);

        let b2: Vec<f64> = b.iter().map(|&x| 2.0 * x).collect();
        let t2 = transversality_check(&g, &b2, &rep.positive_pair).unwrap();
        assert!((t2 - 2.0 * t).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_ball_first_eigenvalue() {
        // ball [0.25, 0.75] of length 1/2: first eigenvalue (pi / 0.5)^2
        let g = build_grid(2049, 0.0, 1.0).unwrap();
        let a = vec![1.0; g.n];
        let ball = BallRange { first: 512, last: 1536 };
        let pair = dirichlet_ball_eigenpair(&g, &a, ball).unwrap();
        let exact = (std::f64::consts::PI / 0.5).powi(2);
        let rel = (pair.value - exact).abs() / exact;
        assert!(rel < 1e-3, "relative error {rel}");
        assert_eq!(pair.eigfun[0], 0.0);
        assert_eq!(pair.eigfun[ball.first], 0.0);
        assert!(pair.eigfun[(ball.first + ball.last) / 2] > 0.0);

        // weight 4 divides the eigenvalue by 4
        let a4 = vec![4.0; g.n];
        let pair4 = dirichlet_ball_eigenpair(&g, &a4, ball).unwrap();
        assert!((pair4.value - pair.value / 4.0).abs() / pair.value < 1e-10);

        // half-length ball quadruples the eigenvalue
        let half = BallRange { first: 768, last: 1280 };
        let pair_half = dirichlet_ball_eigenpair(&g, &a, half).unwrap();
        let rel = (pair_half.value - 4.0 * pair.value).abs() / (4.0 * pair.value);
        assert!(rel < 1e-2, "half-ball scaling error {rel}");

        // monotonicity: larger weight, smaller eigenvalue
        let a_dominating: Vec<f64> = g.nodes.iter().map(|&x| 1.0 + x).collect();
        let dom = dirichlet_ball_eigenpair(&g, &a_dominating, ball).unwrap();
        assert!(dom.value < pair.value);

        let a_bad: Vec<f64> = g.nodes.iter().map(|&x| if x < 0.5 { 1.0 } else { -1.0 }).collect();
        assert!(dirichlet_ball_eigenpair(&g, &a_bad, ball).is_err());
    }

    #[test]
    fn mu_cap_examples() {
        let g = build_grid(257, 0.0, 1.0).unwrap();
        let params = ProblemParams::new(3.0, 1.5, 1.0, 1.0, Frame::Q).unwrap();
        let mu_d = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let ones = WeightSpec::Constant { value: 1.0 };
        let w = sample_weights(&ones, &ones, &g).unwrap();
        let ball = BallRange { first: 64, last: 192 };
        let mu_bar = mu_cap(&g, &w, &params, ball, mu_d).unwrap();
        assert!(mu_bar.is_finite() && mu_bar >= 1.0);

        // doubling b halves the cap within one scan step (step ratio 10^{1/8})
        let twos = WeightSpec::Constant { value: 2.0 };
        let w2 = sample_weights(&ones, &twos, &g).unwrap();
        let mu_bar2 = mu_cap(&g, &w2, &params, ball, mu_d).unwrap();
        let step = 10f64.powf(1.0 / 8.0);
        assert!(
            mu_bar2 <= mu_bar / 2.0 * step && mu_bar2 >= mu_bar / 2.0 / step,
            "cap halving: {mu_bar} -> {mu_bar2}"
        );

        // b = 0 on the ball: no cap exists
        let zero_b = WeightSpec::Constant { value: 0.0 };
        let w0 = sample_weights(&ones, &zero_b, &g).unwrap();
        assert!(mu_cap(&g, &w0, &params, ball, mu_d).is_err());
    }

    #[test]
    fn mu_cap_survives_s_grid_refinement() {
        let g = build_grid(257, 0.0, 1.0).unwrap();
        let params = ProblemParams::new(3.0, 1.5, 1.0, 1.0, Frame::Q).unwrap();
        let mu_d = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let ones = WeightSpec::Constant { value: 1.0 };
        let w = sample_weights(&ones, &ones, &g).unwrap();
        let ball = BallRange { first: 64, last: 192 };
        let mu_bar = mu_cap(&g, &w, &params, ball, mu_d).unwrap();

        let s_fine = log_grid(1e-8, 1e8, 640);
        let (p, q) = (params.p, params.q);
        let min_val = s_fine
            .iter()
            .map(|&s| {
                s.powf(p - q) + mu_bar * (s / (s + 1.0)).powf(2.0 - q) - mu_d * s.powf(2.0 - q)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(min_val >= -1e-12, "refined scan minimum {min_val}");
    }

    #[test]
    fn default_ball_lies_in_joint_positivity_region() {
        let g = build_grid(513, 0.0, 1.0).unwrap();
        let w = sample_weights(
            &WeightSpec::Constant { value: 1.0 },
            &WeightSpec::CosineShift { amplitude: 1.0, offset: -0.5 },
            &g,
        )
        .unwrap();
        let ball = default_ball(&w).unwrap();
        assert!(ball.len() >= 3);
        for i in ball.first..=ball.last {
            assert!(w.a_samples[i] > 0.0 && w.b_samples[i] > 0.0);
        }
        // shrunk by one node: the neighbors just outside still belong to the run
        assert!(w.b_samples[ball.first - 1] > 0.0);
        assert!(w.b_samples[ball.last + 1] > 0.0);
    }
}
