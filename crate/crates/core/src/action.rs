//! Cost functions by direct minimization over discretized paths, the
//! Hamilton-Jacobi residual of cost fields, and the Laplacian/Hessian
//! comparison checks for those fields.
//!
//! Two Lagrangians are implemented and deliberately kept separate:
//!
//! * `KineticPlusPotential`: `L = |v|^2/2 + V(x)` with the canonical
//!   `V = lap U1 + |grad U1|^2/2 - 2 U2` (drives the Harnack and kernel
//!   comparison bounds);
//! * `DriftForm`: `L = |v - grad U1(x)|^2/2 - U2(x)` (drives the cost
//!   comparison theorems).
//!
//! The discrete action uses segment velocities with trapezoid-averaged
//! positional terms, so for quadratic drift potentials the cross term
//! telescopes exactly and the two variants are related by an exact boundary
//! identity.

use crate::closed_forms::a_comparison;
use crate::fields::ScalarField;
use crate::grid::{dot, norm_sq, GridSpec, Point, Topology, MAX_DIM};
use crate::potentials::{cost_comparison_potential, v_eval, v_grad, PotentialSpec};
use crate::report::{dilate_mask, EstimateReport};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ActionError {
    #[error("cost comparison checks need k3 < 0, got {0}")]
    NonNegativeK3(f64),
    #[error("hypothesis audit failed: inf over the grid of {quantity} is {observed}, need >= {required}")]
    HypothesisViolation { quantity: &'static str, observed: f64, required: f64 },
    #[error("need at least 3 time levels for the Hamilton-Jacobi residual, got {0}")]
    TooFewTimeLevels(usize),
    #[error("cost fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Comparison(#[from] crate::closed_forms::ComparisonError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostVariant {
    KineticPlusPotential,
    DriftForm,
}

#[derive(Debug, Clone)]
pub struct CostFunctional {
    pub variant: CostVariant,
    pub u1: PotentialSpec,
    pub u2: PotentialSpec,
}

impl CostFunctional {
    pub fn kinetic_plus_potential(u1: PotentialSpec, u2: PotentialSpec) -> Self {
        Self { variant: CostVariant::KineticPlusPotential, u1, u2 }
    }

    pub fn drift_form(u1: PotentialSpec, u2: PotentialSpec) -> Self {
        Self { variant: CostVariant::DriftForm, u1, u2 }
    }

    pub fn dim(&self) -> usize {
        self.u1.dim()
    }

    /// Lagrangian value at position `x` with velocity `v`.
    fn lagrangian(&self, x: &Point, v: &Point) -> f64 {
        let d = self.dim();
        match self.variant {
            CostVariant::KineticPlusPotential => {
                0.5 * norm_sq(v, d) + v_eval(&self.u1, &self.u2, x)
            }
            CostVariant::DriftForm => {
                let g = self.u1.grad(x);
                let mut rel = [0.0; MAX_DIM];
                for i in 0..d {
                    rel[i] = v[i] - g[i];
                }
                0.5 * norm_sq(&rel, d) - self.u2.eval(x)
            }
        }
    }

    /// Partial derivative of `L` in the position argument.
    fn l_x(&self, x: &Point, v: &Point) -> Point {
        let d = self.dim();
        match self.variant {
            CostVariant::KineticPlusPotential => v_grad(&self.u1, &self.u2, x),
            CostVariant::DriftForm => {
                let g = self.u1.grad(x);
                let mut rel = [0.0; MAX_DIM];
                for i in 0..d {
                    rel[i] = v[i] - g[i];
                }
                let hess_rel = self.u1.hess_apply(x, &rel);
                let g2 = self.u2.grad(x);
                let mut out = [0.0; MAX_DIM];
                for i in 0..d {
                    out[i] = -hess_rel[i] - g2[i];
                }
                out
            }
        }
    }

    /// Partial derivative of `L` in the velocity argument.
    fn l_v(&self, x: &Point, v: &Point) -> Point {
        let d = self.dim();
        match self.variant {
            CostVariant::KineticPlusPotential => *v,
            CostVariant::DriftForm => {
                let g = self.u1.grad(x);
                let mut out = [0.0; MAX_DIM];
                for i in 0..d {
                    out[i] = v[i] - g[i];
                }
                out
            }
        }
    }

    /// Gradient of `V` for the Euler-Lagrange residual audit (variant 1).
    fn potential_grad(&self, x: &Point) -> Point {
        v_grad(&self.u1, &self.u2, x)
    }

    /// Quadratic and zero families make the discrete action convex; others
    /// get perturbed restarts.
    fn is_convex_family(&self) -> bool {
        matches!(self.u1, PotentialSpec::Zero { .. } | PotentialSpec::Quadratic { .. })
            && matches!(self.u2, PotentialSpec::Zero { .. } | PotentialSpec::Quadratic { .. })
    }
}

/// A discretized path with pinned endpoints.
#[derive(Debug, Clone)]
pub struct PathCurve {
    pub start_time: f64,
    pub end_time: f64,
    pub dim: usize,
    pub points: Vec<Point>,
}

impl PathCurve {
    pub fn straight(x: &Point, y: &Point, s: f64, t: f64, nodes: usize, dim: usize) -> Self {
        assert!(nodes >= 3 && t > s);
        let points = (0..nodes)
            .map(|i| {
                let u = i as f64 / (nodes - 1) as f64;
                let mut p = [0.0; MAX_DIM];
                for c in 0..dim {
                    p[c] = (1.0 - u) * x[c] + u * y[c];
                }
                p
            })
            .collect();
        Self { start_time: s, end_time: t, dim, points }
    }

    pub fn node_time(&self, i: usize) -> f64 {
        let u = i as f64 / (self.points.len() - 1) as f64;
        self.start_time + u * (self.end_time - self.start_time)
    }

    pub fn segment_dt(&self) -> f64 {
        (self.end_time - self.start_time) / (self.points.len() - 1) as f64
    }

    /// Second-order one-sided estimate of the terminal velocity.
    pub fn terminal_velocity(&self) -> Point {
        let n = self.points.len();
        let ds = self.segment_dt();
        let (a, b, c) = (&self.points[n - 1], &self.points[n - 2], &self.points[n - 3]);
        let mut v = [0.0; MAX_DIM];
        for i in 0..self.dim {
            v[i] = (3.0 * a[i] - 4.0 * b[i] + c[i]) / (2.0 * ds);
        }
        v
    }

    /// Sup-norm distance to another path with the same node layout.
    pub fn sup_distance(&self, other: &PathCurve) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(p, q)| {
                (0..self.dim).map(|c| (p[c] - q[c]).abs()).fold(0.0f64, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Discrete action: trapezoid in the positional terms with the segment
/// velocity held fixed, `sum_i ds (L(x_i, v_i) + L(x_{i+1}, v_i)) / 2`.
pub fn action_value(path: &PathCurve, cost: &CostFunctional) -> f64 {
    let ds = path.segment_dt();
    let d = path.dim;
    let mut acc = 0.0;
    for i in 0..path.points.len() - 1 {
        let mut v = [0.0; MAX_DIM];
        for c in 0..d {
            v[c] = (path.points[i + 1][c] - path.points[i][c]) / ds;
        }
        acc += 0.5
            * ds
            * (cost.lagrangian(&path.points[i], &v) + cost.lagrangian(&path.points[i + 1], &v));
    }
    acc
}

/// Gradient of the discrete action with respect to the interior nodes.
fn action_gradient(path: &PathCurve, cost: &CostFunctional, out: &mut [Point]) {
    let n = path.points.len();
    let ds = path.segment_dt();
    let d = path.dim;
    for g in out.iter_mut() {
        *g = [0.0; MAX_DIM];
    }
    // Segment i contributes to nodes i and i+1.
    let mut v = [0.0; MAX_DIM];
    for i in 0..n - 1 {
        for c in 0..d {
            v[c] = (path.points[i + 1][c] - path.points[i][c]) / ds;
        }
        let lx_left = cost.l_x(&path.points[i], &v);
        let lx_right = cost.l_x(&path.points[i + 1], &v);
        let lv_left = cost.l_v(&path.points[i], &v);
        let lv_right = cost.l_v(&path.points[i + 1], &v);
        for c in 0..d {
            let lv_avg = 0.5 * (lv_left[c] + lv_right[c]);
            if i >= 1 {
                // node i is interior: positional term + velocity of segment i
                out[i - 1][c] += 0.5 * ds * lx_left[c] - lv_avg;
            }
            if i < n - 2 {
                // node i+1 interior: positional term + velocity of segment i
                out[i][c] += 0.5 * ds * lx_right[c] + lv_avg;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// Number of path nodes including endpoints.
    pub nodes: usize,
    /// Termination threshold on the max-norm of the action gradient.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Extra perturbed initializations for non-convex potentials; `None`
    /// picks 2 for non-convex families and 0 otherwise.
    pub extra_inits: Option<usize>,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { nodes: 256, grad_tol: 1e-8, max_iters: 10_000, extra_inits: None, seed: 0x9d2c }
    }
}

#[derive(Debug, Clone)]
pub struct CostResult {
    pub value: f64,
    pub path: PathCurve,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Number of distinct local minima found across restarts.
    pub multiplicity: usize,
}

fn grad_max_norm(grad: &[Point], dim: usize) -> f64 {
    grad.iter()
        .map(|g| (0..dim).map(|c| g[c].abs()).fold(0.0f64, f64::max))
        .fold(0.0, f64::max)
}

/// Componentwise Thomas solve of `(1/ds) tridiag(-1, 2, -1) z = g`, the
/// exact kinetic block of the action Hessian. Descending along `z` instead
/// of `g` keeps the BB iteration conditioned independently of the node
/// count.
struct KineticSolver {
    ds: f64,
    /// Forward-elimination diagonal factors, reusable across solves.
    denom: Vec<f64>,
}

impl KineticSolver {
    fn new(interior: usize, ds: f64) -> Self {
        let mut denom = vec![0.0; interior];
        let mut prev = 2.0;
        for d in denom.iter_mut() {
            *d = prev;
            prev = 2.0 - 1.0 / prev;
        }
        Self { ds, denom }
    }

    fn solve(&self, g: &[Point], out: &mut [Point], dim: usize, scratch: &mut Vec<f64>) {
        let n = g.len();
        scratch.resize(n, 0.0);
        for c in 0..dim {
            scratch[0] = g[0][c];
            for i in 1..n {
                scratch[i] = g[i][c] + scratch[i - 1] / self.denom[i - 1];
            }
            out[n - 1][c] = scratch[n - 1] / self.denom[n - 1] * self.ds;
            for i in (0..n - 1).rev() {
                out[i][c] = (scratch[i] + out[i + 1][c] / self.ds) / self.denom[i] * self.ds;
            }
        }
    }

    fn apply(&self, s: &[Point], out: &mut [Point], dim: usize) {
        let n = s.len();
        for i in 0..n {
            for c in 0..dim {
                let left = if i > 0 { s[i - 1][c] } else { 0.0 };
                let right = if i + 1 < n { s[i + 1][c] } else { 0.0 };
                out[i][c] = (2.0 * s[i][c] - left - right) / self.ds;
            }
        }
    }
}

/// Barzilai-Borwein descent with Armijo backtracking on the interior nodes,
/// run in the kinetic-metric preconditioned direction.
fn minimize_from(
    init: PathCurve,
    cost: &CostFunctional,
    opts: &MinimizeOptions,
) -> CostResult {
    let d = init.dim;
    let n = init.points.len();
    let interior = n - 2;
    let ds = init.segment_dt();
    let kinetic = KineticSolver::new(interior, ds);
    let mut scratch = Vec::new();

    let mut path = init;
    let mut grad = vec![[0.0; MAX_DIM]; interior];
    let mut precond = vec![[0.0; MAX_DIM]; interior];
    let mut value = action_value(&path, cost);
    action_gradient(&path, cost, &mut grad);
    let mut gnorm = grad_max_norm(&grad, d);

    let mut alpha = 1.0;
    let mut iters = 0usize;
    let mut step_vec = vec![[0.0; MAX_DIM]; interior];
    let mut d_step = vec![[0.0; MAX_DIM]; interior];

    while gnorm > opts.grad_tol && iters < opts.max_iters {
        iters += 1;
        kinetic.solve(&grad, &mut precond, d, &mut scratch);
        // <g, D^{-1} g>: the decrease rate along the preconditioned
        // direction.
        let gp: f64 = grad
            .iter()
            .zip(&precond)
            .map(|(g, p)| dot(g, p, d))
            .sum();
        let mut step = alpha;
        let mut candidate = path.clone();
        let mut cand_value;
        let mut backtracks = 0;
        loop {
            for i in 0..interior {
                for c in 0..d {
                    candidate.points[i + 1][c] = path.points[i + 1][c] - step * precond[i][c];
                }
            }
            cand_value = action_value(&candidate, cost);
            if cand_value <= value - 1e-4 * step * gp || backtracks >= 60 {
                break;
            }
            step *= 0.5;
            backtracks += 1;
        }

        let mut new_grad = vec![[0.0; MAX_DIM]; interior];
        action_gradient(&candidate, cost, &mut new_grad);

        // BB1 in the kinetic metric: alpha = <s, D s> / <s, y>.
        let mut sy = 0.0;
        for i in 0..interior {
            for c in 0..d {
                step_vec[i][c] = candidate.points[i + 1][c] - path.points[i + 1][c];
                sy += step_vec[i][c] * (new_grad[i][c] - grad[i][c]);
            }
        }
        kinetic.apply(&step_vec, &mut d_step, d);
        let sds: f64 = step_vec.iter().zip(&d_step).map(|(s, t)| dot(s, t, d)).sum();
        alpha = if sy > 1e-300 { (sds / sy).clamp(1e-8, 1e4) } else { step };

        path = candidate;
        value = cand_value;
        grad = new_grad;
        gnorm = grad_max_norm(&grad, d);
    }

    CostResult {
        value,
        path,
        grad_norm: gnorm,
        iterations: iters,
        converged: gnorm <= opts.grad_tol,
        multiplicity: 1,
    }
}

/// Minimize the discrete action over paths from `(s, x)` to `(t, y)`.
/// Non-convex potentials restart from perturbed initializations and keep the
/// least value; `multiplicity` reports how many distinct minima showed up.
pub fn minimize_cost(
    x: &Point,
    y: &Point,
    s: f64,
    t: f64,
    cost: &CostFunctional,
    opts: &MinimizeOptions,
) -> CostResult {
    let init = PathCurve::straight(x, y, s, t, opts.nodes, cost.dim());
    minimize_with_init(init, cost, opts)
}

/// Like `minimize_cost` but seeded with an explicit initial path (used for
/// warm starts across neighboring field nodes).
pub fn minimize_with_init(
    init: PathCurve,
    cost: &CostFunctional,
    opts: &MinimizeOptions,
) -> CostResult {
    let extra = opts
        .extra_inits
        .unwrap_or(if cost.is_convex_family() { 0 } else { 2 });
    let mut best = minimize_from(init.clone(), cost, opts);
    if extra == 0 {
        return best;
    }
    let d = cost.dim();
    let n = init.points.len();
    let (x, y) = (init.points[0], init.points[n - 1]);
    let span = (0..d)
        .map(|c| (y[c] - x[c]).powi(2))
        .sum::<f64>()
        .sqrt()
        .max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut minima = vec![best.value];
    for _ in 0..extra {
        let mut dir = [0.0; MAX_DIM];
        for c in dir.iter_mut().take(d) {
            *c = rng.gen_range(-1.0..1.0);
        }
        let nrm = norm_sq(&dir, d).sqrt().max(1e-12);
        let mut perturbed = PathCurve::straight(&x, &y, init.start_time, init.end_time, n, d);
        for i in 1..n - 1 {
            let u = i as f64 / (n - 1) as f64;
            let bulge = (std::f64::consts::PI * u).sin() * 0.25 * span;
            for c in 0..d {
                perturbed.points[i][c] += bulge * dir[c] / nrm;
            }
        }
        let candidate = minimize_from(perturbed, cost, opts);
        if candidate.converged
            && minima
                .iter()
                .all(|&m| (m - candidate.value).abs() > 1e-6 * (1.0 + m.abs()))
        {
            minima.push(candidate.value);
        }
        if candidate.value < best.value {
            best = candidate;
        }
    }
    best.multiplicity = minima.len();
    best
}

/// Minimize on a torus by trying the nearest lattice lifts of the endpoint
/// and keeping the least action.
pub fn minimize_cost_torus(
    x: &Point,
    y: &Point,
    s: f64,
    t: f64,
    cost: &CostFunctional,
    extents: &Point,
    opts: &MinimizeOptions,
) -> CostResult {
    let d = cost.dim();
    let shifts: Vec<i32> = vec![-1, 0, 1];
    let mut best: Option<CostResult> = None;
    let mut combos = vec![[0i32; MAX_DIM]];
    for axis in 0..d {
        let mut next = Vec::new();
        for combo in &combos {
            for &sh in &shifts {
                let mut c = *combo;
                c[axis] = sh;
                next.push(c);
            }
        }
        combos = next;
    }
    for combo in combos {
        let mut lifted = *y;
        for axis in 0..d {
            lifted[axis] += combo[axis] as f64 * extents[axis];
        }
        let r = minimize_cost(x, &lifted, s, t, cost, opts);
        if best.as_ref().map_or(true, |b| r.value < b.value) {
            best = Some(r);
        }
    }
    best.expect("at least one lift is attempted")
}

/// Max-norm residual of the continuum Euler-Lagrange system
/// `x'' = grad V(x)` over the interior nodes (variant 1 only).
pub fn euler_lagrange_residual(result: &CostResult, cost: &CostFunctional) -> f64 {
    let path = &result.path;
    let ds = path.segment_dt();
    let d = path.dim;
    let mut worst = 0.0f64;
    for i in 1..path.points.len() - 1 {
        let gv = cost.potential_grad(&path.points[i]);
        for c in 0..d {
            let second = (path.points[i + 1][c] - 2.0 * path.points[i][c]
                + path.points[i - 1][c])
                / (ds * ds);
            worst = worst.max((second - gv[c]).abs());
        }
    }
    worst
}

/// A cost field and the per-node optimizer diagnostics needed to exclude
/// unreliable nodes from downstream stencils.
#[derive(Debug, Clone)]
pub struct CostField {
    pub values: ScalarField,
    pub converged: Vec<bool>,
    pub multiple_minima: Vec<bool>,
    pub computed: Vec<bool>,
}

impl CostField {
    /// Nodes whose value cannot feed a second-derivative stencil.
    pub fn bad_mask(&self) -> Vec<bool> {
        (0..self.computed.len())
            .map(|i| !self.computed[i] || !self.converged[i] || self.multiple_minima[i])
            .collect()
    }
}

/// Minimize from `x0` to every grid node (or to the nodes selected by
/// `mask`). Lines along axis 0 run in parallel; within a line each solve is
/// warm-started from its left neighbor's path, and the first node of each
/// line from the line below, so results are deterministic.
pub fn cost_field(
    x0: &Point,
    t: f64,
    cost: &CostFunctional,
    grid: &GridSpec,
    mask: Option<&[bool]>,
    opts: &MinimizeOptions,
) -> CostField {
    let n = grid.node_count();
    let n0 = grid.count(0);
    let lines = n / n0;
    let d = grid.dim();

    let wanted: Vec<bool> = match mask {
        Some(m) => m.to_vec(),
        None => vec![true; n],
    };

    // Pass 1: the first wanted node of each line, chained sequentially so
    // every line gets a decent starting path.
    let mut line_seed: Vec<Option<(usize, PathCurve)>> = vec![None; lines];
    let mut carry: Option<PathCurve> = None;
    for line in 0..lines {
        let Some(j0) = (0..n0).find(|&j| wanted[line * n0 + j]) else {
            continue;
        };
        let node = line * n0 + j0;
        let y = grid.position(node);
        let init = match &carry {
            Some(p) => retarget(p, &y, d),
            None => PathCurve::straight(x0, &y, 0.0, t, opts.nodes, d),
        };
        let r = minimize_with_init(init, cost, opts);
        carry = Some(r.path.clone());
        line_seed[line] = Some((j0, r.path));
    }

    struct NodeOut {
        node: usize,
        value: f64,
        converged: bool,
        multiple: bool,
    }

    let results: Vec<Vec<NodeOut>> = (0..lines)
        .into_par_iter()
        .map(|line| {
            let mut out = Vec::new();
            let Some((j0, seed_path)) = &line_seed[line] else {
                return out;
            };
            let mut warm = seed_path.clone();
            for j in *j0..n0 {
                let node = line * n0 + j;
                if !wanted[node] {
                    continue;
                }
                let y = grid.position(node);
                let init = retarget(&warm, &y, d);
                let r = minimize_with_init(init, cost, opts);
                out.push(NodeOut {
                    node,
                    value: r.value,
                    converged: r.converged,
                    multiple: r.multiplicity > 1,
                });
                warm = r.path;
            }
            // Sweep the untouched left part of the line (mask gaps).
            let mut warm = seed_path.clone();
            for j in (0..*j0).rev() {
                let node = line * n0 + j;
                if !wanted[node] {
                    continue;
                }
                let y = grid.position(node);
                let init = retarget(&warm, &y, d);
                let r = minimize_with_init(init, cost, opts);
                out.push(NodeOut {
                    node,
                    value: r.value,
                    converged: r.converged,
                    multiple: r.multiplicity > 1,
                });
                warm = r.path;
            }
            out
        })
        .collect();

    let mut values = vec![0.0; n];
    let mut converged = vec![false; n];
    let mut multiple = vec![false; n];
    let mut computed = vec![false; n];
    for line in results {
        for o in line {
            values[o.node] = o.value;
            converged[o.node] = o.converged;
            multiple[o.node] = o.multiple;
            computed[o.node] = true;
        }
    }
    CostField {
        values: ScalarField::new(grid.clone(), values).expect("finite cost values"),
        converged,
        multiple_minima: multiple,
        computed,
    }
}

/// Shift a converged path onto a new endpoint by blending in the endpoint
/// displacement linearly in time.
fn retarget(path: &PathCurve, y: &Point, dim: usize) -> PathCurve {
    let n = path.points.len();
    let mut out = path.clone();
    let old = path.points[n - 1];
    for i in 0..n {
        let u = i as f64 / (n - 1) as f64;
        for c in 0..dim {
            out.points[i][c] += u * (y[c] - old[c]);
        }
    }
    out
}

/// Pointwise residual of the Hamilton-Jacobi equation
/// `f' + |grad f|^2/2 + <grad U1, grad f> + U2 = 0` at the middle time
/// level, which the drift-form cost field solves.
pub fn hj_residual(
    costs: &[(f64, ScalarField)],
    u1: &PotentialSpec,
    u2: &PotentialSpec,
) -> Result<(f64, ScalarField), ActionError> {
    if costs.len() < 3 {
        return Err(ActionError::TooFewTimeLevels(costs.len()));
    }
    let mid = costs.len() / 2;
    let (t_minus, ref f_minus) = costs[mid - 1];
    let (t_mid, ref f_mid) = costs[mid];
    let (t_plus, ref f_plus) = costs[mid + 1];
    if f_minus.grid() != f_mid.grid() || f_plus.grid() != f_mid.grid() {
        return Err(ActionError::GridMismatch);
    }
    let grid = f_mid.grid().clone();
    let d = grid.dim();
    let grad = f_mid.gradient();
    let mut values = vec![0.0; grid.node_count()];
    for i in 0..grid.node_count() {
        let p = grid.position(i);
        let df = (f_plus.values()[i] - f_minus.values()[i]) / (t_plus - t_minus);
        let g = grad.at(i);
        values[i] = df + 0.5 * norm_sq(&g, d) + dot(&u1.grad(&p), &g, d) + u2.eval(&p);
    }
    Ok((t_mid, ScalarField::new(grid, values).expect("finite residual")))
}

#[derive(Debug, Clone)]
pub struct ComparisonOptions {
    pub tolerance: f64,
    pub boundary_margin: usize,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self { tolerance: 5e-3, boundary_margin: 2 }
    }
}

fn audit_k3(
    u1: &PotentialSpec,
    u2: &PotentialSpec,
    grid: &GridSpec,
    k3: f64,
    matrix: bool,
) -> Result<(), ActionError> {
    if k3 >= 0.0 {
        return Err(ActionError::NonNegativeK3(k3));
    }
    let derived = cost_comparison_potential(u1, u2, grid)
        .expect("potentials validated by the caller");
    let margin = if derived.analytic { 0 } else { 2 };
    let mut inf = f64::INFINITY;
    for i in 0..grid.node_count() {
        if !grid.is_interior(i, margin) {
            continue;
        }
        inf = inf.min(if matrix {
            derived.hessian.eigen_range(i).0
        } else {
            derived.laplacian.values()[i]
        });
    }
    let slack = 1e-9 * k3.abs().max(1.0);
    if inf < k3 - slack {
        return Err(ActionError::HypothesisViolation {
            quantity: if matrix { "hess(U2 - |grad U1|^2/2)" } else { "lap(U2 - |grad U1|^2/2)" },
            observed: inf,
            required: k3,
        });
    }
    Ok(())
}

/// Check `lap_x c_{0,t}(x0, .) <= n a_{k3/n}(t)` on the reliable nodes of a
/// cost field.
pub fn check_laplacian_comparison(
    field: &CostField,
    u1: &PotentialSpec,
    u2: &PotentialSpec,
    k3: f64,
    t: f64,
    opts: &ComparisonOptions,
) -> Result<EstimateReport, ActionError> {
    let grid = field.values.grid().clone();
    let n = grid.dim();
    audit_k3(u1, u2, &grid, k3, false)?;
    let bound = n as f64 * a_comparison(k3 / n as f64, t)?;
    let lap = field.values.laplacian();
    let margin = lap.map(|obs| bound - obs);
    let excluded = exclusion_mask(field, &grid, opts.boundary_margin);
    let mut params = BTreeMap::new();
    params.insert("k3".into(), k3);
    params.insert("t".into(), t);
    params.insert("n".into(), n as f64);
    params.insert("bound".into(), bound);
    Ok(EstimateReport::from_field(
        "laplacian_cost_comparison",
        params,
        opts.tolerance,
        margin,
        excluded,
    ))
}

/// Check `hess_x c_{0,t}(x0, .) <= a_{k3}(t) I` via the largest eigenvalue
/// of the cost-field Hessian.
pub fn check_hessian_comparison(
    field: &CostField,
    u1: &PotentialSpec,
    u2: &PotentialSpec,
    k3: f64,
    t: f64,
    opts: &ComparisonOptions,
) -> Result<EstimateReport, ActionError> {
    let grid = field.values.grid().clone();
    audit_k3(u1, u2, &grid, k3, true)?;
    let bound = a_comparison(k3, t)?;
    let top = field.values.hessian().max_eigenvalue_field();
    let margin = top.map(|obs| bound - obs);
    let excluded = exclusion_mask(field, &grid, opts.boundary_margin);
    let mut params = BTreeMap::new();
    params.insert("k3".into(), k3);
    params.insert("t".into(), t);
    params.insert("bound".into(), bound);
    Ok(EstimateReport::from_field(
        "hessian_cost_comparison",
        params,
        opts.tolerance,
        margin,
        excluded,
    ))
}

fn exclusion_mask(field: &CostField, grid: &GridSpec, boundary_margin: usize) -> Vec<bool> {
    let mut bad = dilate_mask(grid, &field.bad_mask(), 1);
    let margin = if grid.topology() == Topology::Box { boundary_margin.max(1) } else { 0 };
    for (i, b) in bad.iter_mut().enumerate() {
        if !grid.is_interior(i, margin) {
            *b = true;
        }
    }
    bad
}
