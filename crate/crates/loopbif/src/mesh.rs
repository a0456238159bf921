//! Uniform 1-D grid, Neumann/Dirichlet difference operators, trapezoid
//! quadrature, weight sampling and hypothesis checks on the weight pair.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform mesh on `[x_lo, x_hi]` with `n >= 3` nodes.
#[derive(Debug, Clone)]
pub struct Grid {
    pub n: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
}

/// Builds a uniform grid. Rejects `n < 3` and empty intervals.
pub fn build_grid(n: usize, x_lo: f64, x_hi: f64) -> Result<Grid> {
    if n < 3 {
        return Err(Error::Config(format!("grid needs n >= 3 nodes, got {n}")));
    }
    if !(x_lo < x_hi) {
        return Err(Error::Config(format!(
            "grid interval is empty: x_lo = {x_lo}, x_hi = {x_hi}"
        )));
    }
    let h = (x_hi - x_lo) / (n - 1) as f64;
    let nodes = (0..n).map(|i| x_lo + h * i as f64).collect();
    Ok(Grid { n, x_lo, x_hi, h, nodes })
}

impl Grid {
    /// Composite trapezoid weights: `h/2` at the endpoints, `h` inside.
    pub fn trap_weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.n];
        w[0] = 0.5 * self.h;
        w[self.n - 1] = 0.5 * self.h;
        w
    }
}

/// What a tridiagonal operator matrix discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    NeumannLaplacian,
    ShiftedResolventTarget,
    DirichletLaplacian,
}

/// Tridiagonal operator matrix stored by bands.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Literal tridiagonal matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.sub[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * v[i + 1];
            }
            out[i] = s;
        }
        out
    }

    /// Row sums, computed from the stored bands.
    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i];
                if i > 0 {
                    s += self.sub[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i];
                }
                s
            })
            .collect()
    }
}

/// Second-difference Neumann Laplacian (discretization of `-d^2/dx^2` with
/// zero-flux boundary). Interior stencil `(-1, 2, -1)/h^2`; the boundary rows
/// use the ghost-node mirror `(2, -2)/h^2`, so every row sums to zero exactly
/// and the quadrature-weighted matrix `W L` is symmetric.
pub fn neumann_laplacian(g: &Grid) -> OperatorMatrix {
    let n = g.n;
    let s = 1.0 / (g.h * g.h);
    let diag = vec![2.0 * s; n];
    let mut sub = vec![-s; n - 1];
    let mut sup = vec![-s; n - 1];
    sup[0] = -2.0 * s;
    sub[n - 2] = -2.0 * s;
    OperatorMatrix { kind: OperatorKind::NeumannLaplacian, sub, diag, sup }
}

/// Applies the Neumann Laplacian in telescoped flux form
/// `(d_i - d_{i-1})/h^2` with `d_i = v_i - v_{i+1}`. Algebraically identical
/// to `neumann_laplacian(g).apply(v)` but with rounding proportional to the
/// local differences instead of the solution magnitude.
pub fn neumann_apply(g: &Grid, v: &[f64]) -> Vec<f64> {
    let n = g.n;
    let s = 1.0 / (g.h * g.h);
    let mut out = vec![0.0; n];
    out[0] = 2.0 * (v[0] - v[1]) * s;
    for i in 1..n - 1 {
        let d_left = v[i - 1] - v[i];
        let d_right = v[i] - v[i + 1];
        out[i] = (d_right - d_left) * s;
    }
    out[n - 1] = 2.0 * (v[n - 1] - v[n - 2]) * s;
    out
}

/// Dirichlet Laplacian on the full grid: interior stencil `(-1, 2, -1)/h^2`,
/// identity rows at both boundary nodes.
pub fn dirichlet_laplacian(g: &Grid) -> OperatorMatrix {
    let n = g.n;
    let s = 1.0 / (g.h * g.h);
    let mut diag = vec![2.0 * s; n];
    let mut sub = vec![-s; n - 1];
    let mut sup = vec![-s; n - 1];
    diag[0] = 1.0;
    diag[n - 1] = 1.0;
    sup[0] = 0.0;
    sub[n - 2] = 0.0;
    OperatorMatrix { kind: OperatorKind::DirichletLaplacian, sub, diag, sup }
}

/// Composite trapezoid quadrature of `f` sampled on the grid nodes.
pub fn trapezoid_integral(g: &Grid, f: &[f64]) -> Result<f64> {
    if f.len() != g.n {
        return Err(Error::LengthMismatch { expected: g.n, got: f.len() });
    }
    let mut interior = 0.0;
    for &fi in &f[1..g.n - 1] {
        interior += fi;
    }
    Ok(g.h * (0.5 * f[0] + interior + 0.5 * f[g.n - 1]))
}

/// Solves `(L + M I) v = f` with the Neumann Laplacian `L`. The shifted
/// operator is positive definite for `M > 0`, so the solve is always
/// well posed.
pub fn resolvent_apply(g: &Grid, shift_m: f64, f: &[f64]) -> Result<Vec<f64>> {
    if shift_m <= 0.0 {
        return Err(Error::Precondition(format!("resolvent shift must be > 0, got {shift_m}")));
    }
    if f.len() != g.n {
        return Err(Error::LengthMismatch { expected: g.n, got: f.len() });
    }
    let lap = neumann_laplacian(g);
    let diag: Vec<f64> = lap.diag.iter().map(|d| d + shift_m).collect();
    crate::linalg::solve_tridiag(&lap.sub, &diag, &lap.sup, f)
}

/// Closed-form or tabulated weight function on the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant { value: f64 },
    /// `amplitude * cos(2 pi (x - x_lo)/(x_hi - x_lo)) + offset`.
    CosineShift { amplitude: f64, offset: f64 },
    /// Piecewise constant: `values[k]` on the k-th region delimited by the
    /// (strictly increasing, interior) breakpoints. A node falling exactly on
    /// a breakpoint gets the mean of the two adjacent values.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
    Table { samples: Vec<f64> },
}

impl WeightSpec {
    fn sample(&self, g: &Grid) -> Result<Vec<f64>> {
        match self {
            WeightSpec::Constant { value } => Ok(vec![*value; g.n]),
            WeightSpec::CosineShift { amplitude, offset } => {
                let span = g.x_hi - g.x_lo;
                Ok(g.nodes
                    .iter()
                    .map(|&x| {
                        let t = (x - g.x_lo) / span;
                        amplitude * (2.0 * std::f64::consts::PI * t).cos() + offset
                    })
                    .collect())
            }
            WeightSpec::PiecewiseConstant { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    return Err(Error::Config(format!(
                        "piecewise_constant needs {} values for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        values.len()
                    )));
                }
                for pair in breakpoints.windows(2) {
                    if pair[0] >= pair[1] {
                        return Err(Error::Config(
                            "piecewise_constant breakpoints must be strictly increasing".into(),
                        ));
                    }
                }
                if breakpoints.iter().any(|&bp| bp <= g.x_lo || bp >= g.x_hi) {
                    return Err(Error::Config(
                        "piecewise_constant breakpoints must lie strictly inside the domain".into(),
                    ));
                }
                let snap = 1e-12 * (g.x_hi - g.x_lo);
                Ok(g.nodes
                    .iter()
                    .map(|&x| {
                        let mut k = 0;
                        for (j, &bp) in breakpoints.iter().enumerate() {
                            if (x - bp).abs() <= snap {
                                return 0.5 * (values[j] + values[j + 1]);
                            }
                            if x > bp {
                                k = j + 1;
                            }
                        }
                        values[k]
                    })
                    .collect())
            }
            WeightSpec::Table { samples } => {
                if samples.len() != g.n {
                    return Err(Error::LengthMismatch { expected: g.n, got: samples.len() });
                }
                Ok(samples.clone())
            }
        }
    }
}

/// The sampled weight pair `(a, b)` with integrals and sign-region index sets.
#[derive(Debug, Clone)]
pub struct WeightPair {
    pub a_samples: Vec<f64>,
    pub b_samples: Vec<f64>,
    pub int_a: f64,
    pub int_b: f64,
    pub pos_a: Vec<usize>,
    pub neg_a: Vec<usize>,
    pub pos_b: Vec<usize>,
    pub neg_b: Vec<usize>,
}

fn sign_sets(samples: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, &s) in samples.iter().enumerate() {
        if s > 0.0 {
            pos.push(i);
        } else if s < 0.0 {
            neg.push(i);
        }
    }
    (pos, neg)
}

/// Samples both weights on the grid and records integrals and sign sets.
pub fn sample_weights(a_spec: &WeightSpec, b_spec: &WeightSpec, g: &Grid) -> Result<WeightPair> {
    let a_samples = a_spec.sample(g)?;
    let b_samples = b_spec.sample(g)?;
    let int_a = trapezoid_integral(g, &a_samples)?;
    let int_b = trapezoid_integral(g, &b_samples)?;
    let (pos_a, neg_a) = sign_sets(&a_samples);
    let (pos_b, neg_b) = sign_sets(&b_samples);
    Ok(WeightPair { a_samples, b_samples, int_a, int_b, pos_a, neg_a, pos_b, neg_b })
}

impl WeightPair {
    pub fn a_changes_sign(&self) -> bool {
        !self.pos_a.is_empty() && !self.neg_a.is_empty()
    }
    pub fn b_changes_sign(&self) -> bool {
        !self.pos_b.is_empty() && !self.neg_b.is_empty()
    }
}

/// Problem frame: which of the four residual variants is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// `-u'' = lambda b u^{q-1} + a u^{p-1}`.
    P,
    /// `-v'' = mu (b (v+eps)^{q-2} v + a v^{p-1})`.
    Q,
    /// `-u'' = lambda (b-eps)(u+eps)^{q-2} u + a u^{p-1}`.
    PEpsVariant,
    /// `-v'' = mu ((b-eps)(v+eps)^{q-2} v + a v^{p-1})`.
    QAltVariant,
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Frame::P => "P",
            Frame::Q => "Q",
            Frame::PEpsVariant => "P_eps_variant",
            Frame::QAltVariant => "Q_alt_variant",
        };
        write!(f, "{s}")
    }
}

/// Exponents, regularization and resolvent shift.
#[derive(Debug, Clone, Copy)]
pub struct ProblemParams {
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub shift_m: f64,
    pub frame: Frame,
}

impl ProblemParams {
    pub fn new(p: f64, q: f64, eps: f64, shift_m: f64, frame: Frame) -> Result<Self> {
        if !(1.0 < q && q < 2.0 && 2.0 < p) {
            return Err(Error::Config(format!(
                "exponents must satisfy 1 < q < 2 < p, got q = {q}, p = {p}"
            )));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Config(format!("eps must lie in [0, 1], got {eps}")));
        }
        if !(shift_m > 0.0) {
            return Err(Error::Config(format!("shift_M must be > 0, got {shift_m}")));
        }
        Ok(ProblemParams { p, q, eps, shift_m, frame })
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        ProblemParams { eps, ..*self }
    }

    pub fn with_frame(&self, frame: Frame) -> Self {
        ProblemParams { frame, ..*self }
    }
}

/// Sign of an integral after the zero tolerance `1e-12 * n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignClass {
    #[serde(rename = "-")]
    Neg,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "+")]
    Pos,
}

/// Which hypothesis regime the sampled weights fall into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    /// both weights change sign, `int b <= 0`, `int a < 0`
    Prehypo,
    /// `int b < 0 <= int a`
    MainCase,
    Degenerate,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseTag::Prehypo => "prehypo",
            CaseTag::MainCase => "main_case",
            CaseTag::Degenerate => "degenerate",
        };
        write!(f, "{s}")
    }
}

/// Report of the sign conditions on the sampled weight pair.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub b_changes_sign: bool,
    pub sign_int_b: SignClass,
    pub sign_int_a: SignClass,
    /// Some node carries `a > 0` and `b > 0` simultaneously.
    pub h0_holds: bool,
    pub case_tag: CaseTag,
    /// `a > 0` at every node (the p-bound is vacuous in one dimension).
    pub condition_a_ok: bool,
}

fn classify_sign(value: f64, n: usize) -> SignClass {
    let tol = 1e-12 * n as f64;
    if value > tol {
        SignClass::Pos
    } else if value < -tol {
        SignClass::Neg
    } else {
        SignClass::Zero
    }
}

/// Classifies the weight pair against the sign hypotheses. The case tag
/// depends only on integral signs (zero tolerance `1e-12 * n`) and on
/// whether each weight changes sign.
pub fn check_hypotheses(w: &WeightPair, _params: &ProblemParams) -> HypothesisReport {
    let n = w.a_samples.len();
    let sign_int_a = classify_sign(w.int_a, n);
    let sign_int_b = classify_sign(w.int_b, n);
    let h0_holds = w
        .a_samples
        .iter()
        .zip(&w.b_samples)
        .any(|(&ai, &bi)| ai > 0.0 && bi > 0.0);
    let case_tag = if sign_int_b == SignClass::Neg && sign_int_a != SignClass::Neg {
        CaseTag::MainCase
    } else if w.a_changes_sign()
        && w.b_changes_sign()
        && sign_int_a == SignClass::Neg
        && sign_int_b != SignClass::Pos
    {
        CaseTag::Prehypo
    } else {
        CaseTag::Degenerate
    };
    HypothesisReport {
        b_changes_sign: w.b_changes_sign(),
        sign_int_b,
        sign_int_a,
        h0_holds,
        case_tag,
        condition_a_ok: w.a_samples.iter().all(|&ai| ai > 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid {
        build_grid(n, 0.0, 1.0).unwrap()
    }

    #[test]
    fn build_grid_examples() {
        let g = unit_grid(3);
        assert_eq!(g.nodes, vec![0.0, 0.5, 1.0]);
        assert_eq!(g.h, 0.5);
        let g = unit_grid(101);
        assert!((g.h - 0.01).abs() < 1e-15);
        assert!(build_grid(2, 0.0, 1.0).is_err());
        assert!(build_grid(5, 1.0, 1.0).is_err());
    }

    #[test]
    fn grid_nodes_uniform_and_increasing() {
        let g = build_grid(97, -1.5, 2.25).unwrap();
        for i in 0..g.n - 1 {
            let d = g.nodes[i + 1] - g.nodes[i];
            assert!(d > 0.0);
            assert!((d - g.h).abs() <= 4.0 * f64::EPSILON * g.h.abs());
        }
    }

    #[test]
    fn laplacian_row_sums_are_exactly_zero() {
        for n in [3, 17, 513] {
            let lap = neumann_laplacian(&unit_grid(n));
            assert!(lap.row_sums().iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn laplacian_kills_constants_bitwise() {
        let g = unit_grid(257);
        let v = vec![0.7355; g.n];
        assert!(neumann_apply(&g, &v).iter().all(|&r| r == 0.0));
        let lap = neumann_laplacian(&g);
        assert!(lap.apply(&v).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn laplacian_consistency_on_cosine() {
        let g = unit_grid(1024);
        let v: Vec<f64> = g.nodes.iter().map(|&x| (std::f64::consts::PI * x).cos()).collect();
        let lv = neumann_apply(&g, &v);
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let err = g
            .nodes
            .iter()
            .zip(&lv)
            .map(|(&x, &l)| (l - pi2 * (std::f64::consts::PI * x).cos()).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-4, "max error {err}");
    }

    #[test]
    fn laplacian_second_order_refinement() {
        // n -> 2n-1 should cut the cos(pi x) error by a factor near 4
        let err_at = |n: usize| {
            let g = unit_grid(n);
            let v: Vec<f64> =
                g.nodes.iter().map(|&x| (std::f64::consts::PI * x).cos()).collect();
            let lv = neumann_apply(&g, &v);
            let pi2 = std::f64::consts::PI * std::f64::consts::PI;
            g.nodes
                .iter()
                .zip(&lv)
                .map(|(&x, &l)| (l - pi2 * (std::f64::consts::PI * x).cos()).abs())
                .fold(0.0f64, f64::max)
        };
        let ratio = err_at(129) / err_at(257);
        assert!((3.5..=4.5).contains(&ratio), "refinement ratio {ratio}");
    }

    #[test]
    fn dirichlet_laplacian_structure() {
        let g = unit_grid(17);
        let lap = dirichlet_laplacian(&g);
        assert_eq!(lap.kind, OperatorKind::DirichletLaplacian);
        // boundary rows are identity rows
        assert_eq!(lap.diag[0], 1.0);
        assert_eq!(lap.diag[g.n - 1], 1.0);
        assert_eq!(lap.sup[0], 0.0);
        assert_eq!(lap.sub[g.n - 2], 0.0);
        // interior stencil matches the Neumann interior
        let s = 1.0 / (g.h * g.h);
        assert_eq!(lap.diag[5], 2.0 * s);
        assert_eq!(lap.sub[5], -s);
        // boundary values pass through unchanged
        let mut v = vec![0.0; g.n];
        v[0] = 3.0;
        v[g.n - 1] = -2.0;
        let out = lap.apply(&v);
        assert_eq!(out[0], 3.0);
        assert_eq!(out[g.n - 1], -2.0);
    }

    #[test]
    fn trapezoid_examples() {
        let g = unit_grid(11);
        assert_eq!(trapezoid_integral(&g, &[1.0; 11]).unwrap(), 1.0);
        let f: Vec<f64> = g.nodes.clone();
        assert!((trapezoid_integral(&g, &f).unwrap() - 0.5).abs() < 1e-15);

        let g = unit_grid(1024);
        let f: Vec<f64> = g
            .nodes
            .iter()
            .map(|&x| (2.0 * std::f64::consts::PI * x).cos() - 0.5)
            .collect();
        assert!((trapezoid_integral(&g, &f).unwrap() + 0.5).abs() < 1e-9);

        assert!(trapezoid_integral(&g, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn trapezoid_is_linear() {
        let g = unit_grid(53);
        let f: Vec<f64> = g.nodes.iter().map(|&x| x * x - 0.3).collect();
        let e: Vec<f64> = g.nodes.iter().map(|&x| (3.1 * x).sin()).collect();
        let comb: Vec<f64> = f.iter().zip(&e).map(|(&fi, &ei)| 2.5 * fi - 0.75 * ei).collect();
        let lhs = trapezoid_integral(&g, &comb).unwrap();
        let rhs = 2.5 * trapezoid_integral(&g, &f).unwrap()
            - 0.75 * trapezoid_integral(&g, &e).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn resolvent_examples() {
        let g = unit_grid(64);
        let m = 2.5;
        let c = 0.8;
        let f = vec![m * c; g.n];
        let v = resolvent_apply(&g, m, &f).unwrap();
        assert!(v.iter().all(|&vi| (vi - c).abs() < 1e-12));

        // round trip through the shifted operator
        let w: Vec<f64> = g.nodes.iter().map(|&x| (5.0 * x).sin() + 0.2 * x).collect();
        let lap = neumann_laplacian(&g);
        let mut rhs = lap.apply(&w);
        for (ri, &wi) in rhs.iter_mut().zip(&w) {
            *ri += m * wi;
        }
        let back = resolvent_apply(&g, m, &rhs).unwrap();
        let err = back
            .iter()
            .zip(&w)
            .map(|(&bi, &wi)| (bi - wi).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "round trip error {err}");

        // continuum solution: (L + I) cos(pi x) = (1 + pi^2) cos(pi x)
        let g = unit_grid(1024);
        let f: Vec<f64> = g
            .nodes
            .iter()
            .map(|&x| (1.0 + std::f64::consts::PI.powi(2)) * (std::f64::consts::PI * x).cos())
            .collect();
        let v = resolvent_apply(&g, 1.0, &f).unwrap();
        let err = v
            .iter()
            .zip(&g.nodes)
            .map(|(&vi, &x)| (vi - (std::f64::consts::PI * x).cos()).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-4, "resolvent error {err}");

        assert!(resolvent_apply(&g, 0.0, &f).is_err());
    }

    #[test]
    fn sample_weights_cosine_shift() {
        let g = unit_grid(1024);
        let spec = WeightSpec::CosineShift { amplitude: 1.0, offset: -0.5 };
        let w = sample_weights(&WeightSpec::Constant { value: 1.0 }, &spec, &g).unwrap();
        assert!((w.int_b + 0.5).abs() < 1e-9);
        assert_eq!(w.int_a, 1.0);
        assert!(!w.pos_b.is_empty() && !w.neg_b.is_empty());
        assert!(w.neg_a.is_empty());
    }

    #[test]
    fn sample_weights_piecewise_halves() {
        let g = unit_grid(101);
        let spec = WeightSpec::PiecewiseConstant {
            breakpoints: vec![0.5],
            values: vec![1.0, -1.0],
        };
        let w = sample_weights(&spec, &spec, &g).unwrap();
        assert!(w.int_a.abs() < 1e-14, "integral {}", w.int_a);
        assert!(!w.pos_a.is_empty() && !w.neg_a.is_empty());

        let bad = WeightSpec::PiecewiseConstant { breakpoints: vec![1.5], values: vec![1.0, 2.0] };
        assert!(sample_weights(&bad, &spec, &g).is_err());
        let bad = WeightSpec::Table { samples: vec![1.0; 7] };
        assert!(sample_weights(&bad, &spec, &g).is_err());
    }

    #[test]
    fn hypotheses_main_case() {
        let g = unit_grid(513);
        let w = sample_weights(
            &WeightSpec::Constant { value: 1.0 },
            &WeightSpec::CosineShift { amplitude: 1.0, offset: -0.5 },
            &g,
        )
        .unwrap();
        let params = ProblemParams::new(3.0, 1.5, 0.0, 1.0, Frame::Q).unwrap();
        let rep = check_hypotheses(&w, &params);
        assert!(rep.h0_holds);
        assert_eq!(rep.case_tag, CaseTag::MainCase);
        assert!(rep.condition_a_ok);
    }

    #[test]
    fn hypotheses_prehypo_case() {
        let g = unit_grid(513);
        let w = sample_weights(
            &WeightSpec::CosineShift { amplitude: 1.0, offset: -0.25 },
            &WeightSpec::CosineShift { amplitude: 1.0, offset: -0.5 },
            &g,
        )
        .unwrap();
        let params = ProblemParams::new(3.0, 1.5, 0.0, 1.0, Frame::Q).unwrap();
        let rep = check_hypotheses(&w, &params);
        assert_eq!(rep.case_tag, CaseTag::Prehypo);
        assert!(rep.h0_holds);
        assert!(!rep.condition_a_ok);
    }

    #[test]
    fn hypotheses_degenerate_case() {
        let g = unit_grid(65);
        let w = sample_weights(
            &WeightSpec::Constant { value: -1.0 },
            &WeightSpec::Constant { value: -1.0 },
            &g,
        )
        .unwrap();
        let params = ProblemParams::new(3.0, 1.5, 0.0, 1.0, Frame::Q).unwrap();
        let rep = check_hypotheses(&w, &params);
        assert!(!rep.h0_holds);
        assert!(!rep.b_changes_sign);
        assert_eq!(rep.case_tag, CaseTag::Degenerate);
    }

    #[test]
    fn case_tag_stable_under_refinement() {
        let params = ProblemParams::new(3.0, 1.5, 0.0, 1.0, Frame::Q).unwrap();
        let mut tags = Vec::new();
        for n in [129, 257, 513, 1025] {
            let g = unit_grid(n);
            let w = sample_weights(
                &WeightSpec::Constant { value: 1.0 },
                &WeightSpec::CosineShift { amplitude: 1.0, offset: -0.5 },
                &g,
            )
            .unwrap();
            tags.push(check_hypotheses(&w, &params).case_tag);
        }
        assert!(tags.iter().all(|&t| t == CaseTag::MainCase));
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(3.0, 1.5, 0.5, 1.0, Frame::Q).is_ok());
        assert!(ProblemParams::new(1.5, 1.2, 0.0, 1.0, Frame::Q).is_err());
        assert!(ProblemParams::new(3.0, 2.5, 0.0, 1.0, Frame::Q).is_err());
        assert!(ProblemParams::new(3.0, 1.5, 1.5, 1.0, Frame::Q).is_err());
        assert!(ProblemParams::new(3.0, 1.5, 0.0, 0.0, Frame::Q).is_err());
    }
}
