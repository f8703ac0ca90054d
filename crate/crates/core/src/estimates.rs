//! Inequality checkers. Each theorem becomes an operation producing an
//! `EstimateReport` whose margin field is oriented so `margin >= 0` means
//! the estimate holds.
//!
//! Ratio-style bounds (Harnack, kernel comparison) are evaluated in log
//! space, and every bound built from `sinh` powers goes through
//! `b_comparison` so the k -> 0 limit degrades into the classical constants
//! instead of 0/0.

use crate::action::{minimize_cost, minimize_cost_torus, CostField, CostFunctional, MinimizeOptions};
use crate::closed_forms::{a_comparison, log_b_comparison, ComparisonError};
use crate::fields::ScalarField;
use crate::grid::{dot, norm_sq, GridSpec, Point, Topology};
use crate::pde::{EquationKind, Trajectory};
use crate::potentials::{audit_hypotheses, schrodinger_potential, PotentialError, PotentialSpec};
use crate::report::{dilate_mask, EstimateReport, PairMargin};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("no snapshot at t = {0}")]
    MissingSnapshot(f64),
    #[error("t = {t} is inside the time-discretization transient (need t >= 10 dt = {limit})")]
    TooEarly { t: f64, limit: f64 },
    #[error("hypothesis audit failed: {0}")]
    HypothesisFailed(String),
    #[error("estimate needs a {expected} trajectory")]
    WrongEquation { expected: &'static str },
    #[error("optimizer did not converge for the pair x = {x:?}, y = {y:?}")]
    PairNotConverged { x: Vec<f64>, y: Vec<f64> },
    #[error("state is not steady: residual {residual} exceeds {limit}")]
    NotSteady { residual: f64, limit: f64 },
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Default pass tolerance at default resolutions; every report also
    /// carries the raw min margin.
    pub tolerance: f64,
    /// Box-face layers excluded from verdicts.
    pub boundary_margin: usize,
    /// Nodes with density below this are treated as outside the support
    /// (porous medium); `None` derives `1e3 * floor` from the trajectory.
    pub support_floor: Option<f64>,
    /// Extra layers of dilation around support/boundary exclusions.
    pub support_margin: usize,
    pub minimize: MinimizeOptions,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tolerance: 5e-3,
            boundary_margin: 2,
            support_floor: None,
            support_margin: 10,
            minimize: MinimizeOptions::default(),
        }
    }
}

fn linear_potentials(traj: &Trajectory) -> Result<(&PotentialSpec, &PotentialSpec), EstimateError> {
    match &traj.equation {
        EquationKind::Linear { u1, u2 } => Ok((u1, u2)),
        EquationKind::PorousMedium { .. } => Err(EstimateError::WrongEquation { expected: "linear" }),
    }
}

fn early_time_guard(traj: &Trajectory, t: f64) -> Result<(), EstimateError> {
    let limit = 10.0 * traj.dt;
    if t < limit {
        return Err(EstimateError::TooEarly { t, limit });
    }
    Ok(())
}

fn boundary_exclusions(grid: &GridSpec, margin: usize) -> Vec<bool> {
    (0..grid.node_count()).map(|i| !grid.is_interior(i, margin)).collect()
}

/// Margin report for `observed >= -(n/2) a_{-k^2}(t)`, the gradient-form
/// log-curvature bound. `observed` is `lap log rho + lap U1 / 2`, built by
/// the caller (stencils or closed form).
pub fn li_yau_report(
    observed: &ScalarField,
    n: usize,
    k: f64,
    t: f64,
    opts: &CheckOptions,
) -> Result<EstimateReport, EstimateError> {
    let bound = -(n as f64) * 0.5 * a_comparison(-k * k, t)?;
    let margin = observed.map(|v| v - bound);
    let excluded = boundary_exclusions(observed.grid(), opts.boundary_margin);
    let mut params = BTreeMap::new();
    params.insert("n".into(), n as f64);
    params.insert("k".into(), k);
    params.insert("t".into(), t);
    params.insert("bound".into(), bound);
    Ok(EstimateReport::from_field("li_yau", params, opts.tolerance, margin, excluded))
}

/// Gradient-form log-curvature check on a solved trajectory: stencil
/// Laplacian of `log rho_t` plus the analytic `lap U1 / 2` against the
/// comparison bound.
pub fn check_li_yau(
    traj: &Trajectory,
    k: f64,
    t: f64,
    opts: &CheckOptions,
) -> Result<EstimateReport, EstimateError> {
    let (u1, u2) = linear_potentials(traj)?;
    let grid = traj.grid().clone();
    early_time_guard(traj, t)?;
    let n = grid.dim();
    let audit = audit_hypotheses(u1, u2, &grid, k, n)?;
    if !audit.laplacian_ok {
        return Err(EstimateError::HypothesisFailed(format!(
            "lap V <= n k^2 fails: sup lap V = {}, n k^2 = {}; smallest admissible k = {}",
            audit.sup_lap_v,
            n as f64 * k * k,
            audit.min_k_laplacian
        )));
    }
    let rho = traj.snapshot(t).ok_or(EstimateError::MissingSnapshot(t))?;
    let log_rho = rho.map(f64::ln);
    let u1_lap = u1.sample_laplacian(&grid);
    let observed = log_rho
        .laplacian()
        .zip(&u1_lap, |a, b| a + 0.5 * b)
        .expect("fields share the trajectory grid");
    li_yau_report(&observed, n, k, t, opts)
}

/// Margin report for the matrix form: smallest eigenvalue of
/// `hess log rho + hess U1 / 2` against `-(1/2) a_{-k^2}(t)`.
pub fn matrix_li_yau_report(
    observed_min_eig: &ScalarField,
    k: f64,
    t: f64,
    opts: &CheckOptions,
) -> Result<EstimateReport, EstimateError> {
    let bound = -0.5 * a_comparison(-k * k, t)?;
    let margin = observed_min_eig.map(|v| v - bound);
    let excluded = boundary_exclusions(observed_min_eig.grid(), opts.boundary_margin);
    let mut params = BTreeMap::new();
    params.insert("k".into(), k);
    params.insert("t".into(), t);
    params.insert("bound".into(), bound);
    Ok(EstimateReport::from_field("matrix_li_yau", params, opts.tolerance, margin, excluded))
}

pub fn check_matrix_li_yau(
    traj: &Trajectory,
    k: f64,
    t: f64,
    opts: &CheckOptions,
) -> Result<EstimateReport, EstimateError> {
    let (u1, u2) = linear_potentials(traj)?;
    let grid = traj.grid().clone();
    early_time_guard(traj, t)?;
    let audit = audit_hypotheses(u1, u2, &grid, k, grid.dim())?;
    if !audit.hessian_ok {
        return Err(EstimateError::HypothesisFailed(format!(
            "hess V <= k^2 I fails: sup eigenvalue = {}, k^2 = {}; smallest admissible k = {}",
            audit.sup_hess_v_eigenvalue,
            k * k,
            audit.min_k_hessian
        )));
    }
    let rho = traj.snapshot(t).ok_or(EstimateError::MissingSnapshot(t))?;
    let log_rho = rho.map(f64::ln);
    let u1_hess = u1.sample_hessian(&grid);
    let combined = log_rho
        .hessian()
        .zip(&u1_hess, |a, b| a + 0.5 * b)
        .expect("fields share the trajectory grid");
    matrix_li_yau_report(&combined.min_eigenvalue_field(), k, t, opts)
}

/// Ratio bound along pairs: in log space,
/// `log rho_t(y) - log rho_s(x) >= -(n/2) log(b(t)/b(s)) - (c + U1(y) - U1(x))/2`
/// with `b = b_{-k^2}` and `c` computed by path minimization of the
/// kinetic-plus-potential action.
pub fn check_harnack(
    traj: &Trajectory,
    k: f64,
    s: f64,
    t: f64,
    pairs: &[(Point, Point)],
    opts: &CheckOptions,
) -> Result<EstimateReport, EstimateError> {
    let (u1, u2) = linear_potentials(traj)?;
    let grid = traj.grid().clone();
    let n = grid.dim();
    assert!(s > 0.0 && s < t, "need 0 < s < t");
    early_time_guard(traj, t)?;
    let audit = audit_hypotheses(u1, u2, &grid, k, n)?;
    if !audit.laplacian_ok {
        return Err(EstimateError::HypothesisFailed(format!(
            "lap V <= n k^2 fails; smallest admissible k = {}",
            audit.min_k_laplacian
        )));
    }
    if !audit.inf_v.is_finite() {
        return Err(EstimateError::HypothesisFailed("V unbounded below on the grid".into()));
    }
    let rho_s = traj.snapshot(s).ok_or(EstimateError::MissingSnapshot(s))?;
    let rho_t = traj.snapshot(t).ok_or(EstimateError::MissingSnapshot(t))?;
    let cost = CostFunctional::kinetic_plus_potential(u1.clone(), u2.clone());
    let log_b_ratio = log_b_comparison(-k * k, t)? - log_b_comparison(-k * k, s)?;

    let mut margins = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let r = match grid.topology() {
            Topology::Periodic => {
                let mut extents = [0.0; 3];
                for a in 0..n {
                    extents[a] = grid.extent(a);
                }
                minimize_cost_torus(x, y, s, t, &cost, &extents, &opts.minimize)
            }
            Topology::Box => minimize_cost(x, y, s, t, &cost, &opts.minimize),
        };
        if !r.converged {
            return Err(EstimateError::PairNotConverged {
                x: x[..n].to_vec(),
                y: y[..n].to_vec(),
            });
        }
        let lhs = rho_t.sample(y).ln() - rho_s.sample(x).ln();
        let rhs = -(n as f64) / 2.0 * log_b_ratio
            - 0.5 * (r.value + u1.eval(y) - u1.eval(x));
        margins.push(PairMargin {
            x: x[..n].to_vec(),
            y: y[..n].to_vec(),
            margin: lhs - rhs,
        });
    }
    let mut params = BTreeMap::new();
    params.insert("n".into(), n as f64);
    params.insert("k".into(), k);
    params.insert("s".into(), s);
    params.insert("t".into(), t);
    params.insert("inf_v".into(), audit.inf_v);
    Ok(EstimateReport::from_pairs("harnack", params, opts.tolerance, margins))
}

/// Kernel lower bound in log space over the core region around `x0`:
/// `log p_t(y) >= -(n/2) log(4 pi b_{-k^2}(t)) - (c_{0,t}(x0,y) + U1(y) - U1(x0))/2`.
pub fn check_cheeger_yau(
    kernel: &ScalarField,
    x0: &Point,
    u1: &PotentialSpec,
    u2: &PotentialSpec,
    k: f64,
    t: f64,
    core_radius: f64,
    opts: &CheckOptions,
) -> Result<EstimateReport, EstimateError> {
    let grid = kernel.grid().clone();
    let n = grid.dim();
    let audit = audit_hypotheses(u1, u2, &grid, k, n)?;
    if !audit.laplacian_ok {
        return Err(EstimateError::HypothesisFailed(format!(
            "lap V <= n k^2 fails; smallest admissible k = {}",
            audit.min_k_laplacian
        )));
    }
    let core: Vec<bool> = (0..grid.node_count())
        .map(|i| {
            let p = grid.position(i);
            let r2: f64 = (0..n).map(|a| (p[a] - x0[a]).powi(2)).sum();
            r2.sqrt() <= core_radius && grid.is_interior(i, opts.boundary_margin)
        })
        .collect();
    let cost = CostFunctional::kinetic_plus_potential(u1.clone(), u2.clone());
    let field: CostField =
        crate::action::cost_field(x0, t, &cost, &grid, Some(&core), &opts.minimize);

    let log_prefactor =
        -(n as f64) / 2.0 * (4.0 * std::f64::consts::PI * log_b_comparison(-k * k, t)?.exp()).ln();
    let mut margin_values = vec![0.0; grid.node_count()];
    let mut excluded = vec![true; grid.node_count()];
    let bad = field.bad_mask();
    for i in 0..grid.node_count() {
        if !core[i] || bad[i] {
            continue;
        }
        let y = grid.position(i);
        let log_rhs = log_prefactor
            - 0.5 * (field.values.values()[i] + u1.eval(&y) - u1.eval(x0));
        margin_values[i] = kernel.values()[i].ln() - log_rhs;
        excluded[i] = false;
    }
    let margin = ScalarField::new(grid, margin_values).expect("finite margins");
    let mut params = BTreeMap::new();
    params.insert("n".into(), n as f64);
    params.insert("k".into(), k);
    params.insert("t".into(), t);
    params.insert("core_radius".into(), core_radius);
    Ok(EstimateReport::from_field("cheeger_yau", params, opts.tolerance, margin, excluded))
}

/// Pressure-Laplacian bound for the porous medium trajectory:
/// `(2m/(1-m)) lap(rho^{m-1}) <= (2n/(2+n(m-1))) a_{k3 (2+n(m-1))/(2n)}(t)`
/// under `lap U >= k3/(2m)`.
pub fn check_aronson_benilan(
    traj: &Trajectory,
    k3: f64,
    t: f64,
    opts: &CheckOptions,
) -> Result<EstimateReport, EstimateError> {
    let (m, u) = match &traj.equation {
        EquationKind::PorousMedium { m, u } => (*m, u),
        EquationKind::Linear { .. } => {
            return Err(EstimateError::WrongEquation { expected: "porous medium" })
        }
    };
    let grid = traj.grid().clone();
    let n = grid.dim();
    early_time_guard(traj, t)?;
    let lap_u = u.sample_laplacian(&grid);
    let required = k3 / (2.0 * m);
    let inf_lap_u = (0..grid.node_count())
        .filter(|&i| grid.is_interior(i, opts.boundary_margin))
        .map(|i| lap_u.values()[i])
        .fold(f64::INFINITY, f64::min);
    if inf_lap_u < required - 1e-9 * required.abs().max(1.0) {
        return Err(EstimateError::HypothesisFailed(format!(
            "lap U >= k3/(2m) fails: inf lap U = {inf_lap_u}, required {required}"
        )));
    }
    let rho = traj.snapshot(t).ok_or(EstimateError::MissingSnapshot(t))?;
    let coeff = 2.0 * m / (1.0 - m);
    let pressure = rho.map(|v| v.powf(m - 1.0));
    let observed = pressure.laplacian().map(|v| coeff * v);
    let weight = 2.0 * n as f64 / (2.0 + n as f64 * (m - 1.0));
    let bound = weight * a_comparison(k3 / weight, t)?;
    let margin = observed.map(|v| bound - v);

    let support_floor = opts.support_floor.unwrap_or(1e3 * traj.floor);
    let outside: Vec<bool> = rho.values().iter().map(|&v| v <= support_floor).collect();
    let mut excluded = dilate_mask(&grid, &outside, opts.support_margin);
    for (i, e) in excluded.iter_mut().enumerate() {
        if !grid.is_interior(i, opts.boundary_margin) {
            *e = true;
        }
    }
    let mut params = BTreeMap::new();
    params.insert("m".into(), m);
    params.insert("n".into(), n as f64);
    params.insert("k3".into(), k3);
    params.insert("t".into(), t);
    params.insert("bound".into(), bound);
    Ok(EstimateReport::from_field("aronson_benilan", params, opts.tolerance, margin, excluded))
}

/// Steady-state bound `|grad log rho + grad U1 / 2|^2 <= V / 2`. When
/// `V < 0` somewhere the equation admits no positive steady solution, so the
/// check refuses to produce a margin. When `V` vanishes identically, the
/// report also carries the sup/inf ratio of `rho e^{U1/2}`, which the
/// rigidity statement says is constant.
pub fn check_liouville(
    rho: &ScalarField,
    u1: &PotentialSpec,
    u2: &PotentialSpec,
    opts: &CheckOptions,
) -> Result<EstimateReport, EstimateError> {
    let grid = rho.grid().clone();
    let n = grid.dim();

    // Steadiness up to an overall exponential scaling: the discrete zero
    // mode carries an O(h^2) eigenvalue defect, so a long-time solve ends
    // at rho' = lambda rho with tiny lambda rather than rho' = 0. Every
    // quantity checked below is invariant under scaling, so the guard
    // deflates that direction and requires the shape residual to vanish.
    let lap = rho.laplacian();
    let grad = rho.gradient();
    let operator: Vec<f64> = (0..grid.node_count())
        .map(|i| {
            let p = grid.position(i);
            lap.values()[i]
                + dot(&u1.grad(&p), &grad.at(i), n)
                + u2.eval(&p) * rho.values()[i]
        })
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.node_count() {
        if grid.is_interior(i, opts.boundary_margin) {
            num += operator[i] * rho.values()[i];
            den += rho.values()[i] * rho.values()[i];
        }
    }
    let lambda = num / den;
    let mut residual = 0.0f64;
    for i in 0..grid.node_count() {
        if grid.is_interior(i, opts.boundary_margin) {
            residual = residual.max((operator[i] - lambda * rho.values()[i]).abs());
        }
    }
    let limit = 1e-6 * rho.max_abs();
    if residual > limit {
        return Err(EstimateError::NotSteady { residual, limit });
    }

    let derived = schrodinger_potential(u1, u2, &grid)?;
    let v_min = (0..grid.node_count())
        .filter(|&i| grid.is_interior(i, opts.boundary_margin))
        .map(|i| derived.values.values()[i])
        .fold(f64::INFINITY, f64::min);
    let v_scale = derived.values.max_abs().max(1.0);
    if v_min < -1e-9 * v_scale {
        return Err(EstimateError::HypothesisFailed(format!(
            "V takes the negative value {v_min}: the elliptic equation admits no positive solution"
        )));
    }

    let log_rho = rho.map(f64::ln);
    let log_grad = log_rho.gradient();
    let margin = ScalarField::new(
        grid.clone(),
        (0..grid.node_count())
            .map(|i| {
                let p = grid.position(i);
                let gu = u1.grad(&p);
                let g = log_grad.at(i);
                let mut total = [0.0; 3];
                for c in 0..n {
                    total[c] = g[c] + 0.5 * gu[c];
                }
                0.5 * derived.values.values()[i] - norm_sq(&total, n)
            })
            .collect(),
    )
    .expect("finite margins");
    let excluded = boundary_exclusions(&grid, opts.boundary_margin);

    let mut params = BTreeMap::new();
    params.insert("residual".into(), residual);
    params.insert("scaling_rate".into(), lambda);
    params.insert("inf_v".into(), v_min);
    if derived.values.max_abs() <= 1e-9 * v_scale {
        // V == 0: rho e^{U1/2} should be a constant.
        let w = ScalarField::from_fn(&grid, |p| u1.eval(p));
        let mut w_min = f64::INFINITY;
        let mut w_max = f64::NEG_INFINITY;
        for i in 0..grid.node_count() {
            let v = rho.values()[i] * (0.5 * w.values()[i]).exp();
            w_min = w_min.min(v);
            w_max = w_max.max(v);
        }
        params.insert("w_ratio_minus_one".into(), w_max / w_min - 1.0);
    }
    Ok(EstimateReport::from_field("liouville", params, opts.tolerance, margin, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::gaussian_like_solution;
    use crate::grid::Topology;
    use crate::pde::{solve_linear, Scheme, SolverConfig};
    use crate::potentials::TrigMode;

    fn analytic_sharp_trajectory(n: usize, k: f64, times: &[f64], grid: &GridSpec) -> Trajectory {
        let fields = times
            .iter()
            .map(|&t| ScalarField::from_fn(grid, |p| gaussian_like_solution(n, k, t, p)))
            .collect();
        Trajectory::from_fields(
            times.to_vec(),
            fields,
            EquationKind::Linear {
                u1: PotentialSpec::sharp_drift(n, k),
                u2: PotentialSpec::zero(n),
            },
        )
    }

    #[test]
    fn sharp_case_li_yau_margin_is_zero() {
        let g = GridSpec::cube(1, 16.0, 513, Topology::Box).unwrap();
        let k = 1.0;
        let traj = analytic_sharp_trajectory(1, k, &[0.7], &g);
        let r = check_li_yau(&traj, k, 0.7, &CheckOptions::default()).unwrap();
        assert!(r.pass, "margin {}", r.min_margin);
        // Stencils are exact on the quadratic log-density.
        assert!(r.min_margin.abs() < 1e-9, "sharp margin {}", r.min_margin);
    }

    #[test]
    fn heat_kernel_classical_margin_is_zero() {
        let g = GridSpec::cube(2, 16.0, 65, Topology::Box).unwrap();
        let t = 0.8;
        let rho = ScalarField::from_fn(&g, |p| {
            (4.0 * std::f64::consts::PI * t).powf(-1.0) * (-norm_sq(p, 2) / (4.0 * t)).exp()
        });
        let traj = Trajectory::from_fields(
            vec![t],
            vec![rho],
            EquationKind::Linear { u1: PotentialSpec::zero(2), u2: PotentialSpec::zero(2) },
        );
        let r = check_li_yau(&traj, 0.0, t, &CheckOptions::default()).unwrap();
        assert!(r.min_margin.abs() < 1e-9, "classical margin {}", r.min_margin);
        let rm = check_matrix_li_yau(&traj, 0.0, t, &CheckOptions::default()).unwrap();
        assert!(rm.min_margin.abs() < 1e-9, "matrix margin {}", rm.min_margin);
    }

    #[test]
    fn sharp_case_matrix_margin_is_zero() {
        let g = GridSpec::cube(2, 16.0, 129, Topology::Box).unwrap();
        let k = 1.0;
        let traj = analytic_sharp_trajectory(2, k, &[0.3, 0.7], &g);
        let r = check_matrix_li_yau(&traj, k, 0.3, &CheckOptions::default()).unwrap();
        assert!(r.min_margin.abs() < 1e-9, "matrix sharp margin {}", r.min_margin);
    }

    #[test]
    fn hypothesis_audit_gates_li_yau() {
        let g = GridSpec::cube(1, 16.0, 513, Topology::Box).unwrap();
        let k = 1.0;
        let traj = analytic_sharp_trajectory(1, k, &[0.7], &g);
        // k = 0.5 is below the smallest admissible k = 1.
        assert!(matches!(
            check_li_yau(&traj, 0.5, 0.7, &CheckOptions::default()),
            Err(EstimateError::HypothesisFailed(_))
        ));
    }

    #[test]
    fn margins_are_invariant_under_density_scaling() {
        let g = GridSpec::cube(1, 16.0, 257, Topology::Box).unwrap();
        let k = 1.0;
        let t = 0.5;
        let rho = ScalarField::from_fn(&g, |p| gaussian_like_solution(1, k, t, p));
        let scaled = rho.map(|v| 37.5 * v);
        let eq = EquationKind::Linear {
            u1: PotentialSpec::sharp_drift(1, k),
            u2: PotentialSpec::zero(1),
        };
        let r1 = check_li_yau(
            &Trajectory::from_fields(vec![t], vec![rho], eq.clone()),
            k,
            t,
            &CheckOptions::default(),
        )
        .unwrap();
        let r2 = check_li_yau(
            &Trajectory::from_fields(vec![t], vec![scaled], eq),
            k,
            t,
            &CheckOptions::default(),
        )
        .unwrap();
        assert!((r1.min_margin - r2.min_margin).abs() < 1e-10);
    }

    #[test]
    fn bounds_are_monotone_in_time() {
        let k = 1.3;
        let mut prev = f64::NEG_INFINITY;
        for &t in &[0.1, 0.3, 0.9, 2.7] {
            let bound = -(2.0) / 2.0 * a_comparison(-k * k, t).unwrap();
            assert!(bound > prev, "bound not increasing at t = {t}");
            prev = bound;
        }
    }

    #[test]
    fn generic_torus_li_yau_holds() {
        let g = GridSpec::cube(1, 2.0, 256, Topology::Periodic).unwrap();
        let u1 = PotentialSpec::Trig {
            dim: 1,
            extents: [2.0, 1.0, 1.0],
            modes: vec![TrigMode { amplitude: 0.25, mode: [1, 0, 0], phase: 0.7 }],
        };
        let u2 = PotentialSpec::zero(1);
        let rho0 = ScalarField::from_fn(&g, |p| {
            1.0 + 0.5 * (std::f64::consts::PI * p[0]).sin()
                + 0.2 * (2.0 * std::f64::consts::PI * p[0] + 0.3).cos()
        });
        let cfg = SolverConfig::new(Scheme::Imex, 1e-3, 0.0, 1.0)
            .with_snapshots(&[0.05, 0.2, 1.0]);
        let traj = solve_linear(&rho0, &u1, &u2, &cfg).unwrap();
        let audit = audit_hypotheses(&u1, &u2, &g, 0.0, 1).unwrap();
        let k = audit.min_k_laplacian * 1.01;
        for &t in &[0.05, 0.2, 1.0] {
            let r = check_li_yau(&traj, k, t, &CheckOptions::default()).unwrap();
            assert!(
                r.min_margin >= -5e-3,
                "generic margin {} at t = {t}",
                r.min_margin
            );
        }
    }

    #[test]
    fn sharp_harnack_is_tight_near_time_origin() {
        // Equality holds in the s -> 0 limit; at s = 1e-4 the closed-form
        // slack is ~4e-4, inside the +-1e-3 budget.
        let g = GridSpec::cube(1, 16.0, 513, Topology::Box).unwrap();
        let k = 1.0;
        let (s, t) = (1e-4, 0.5);
        let traj = analytic_sharp_trajectory(1, k, &[s, t], &g);
        let pairs: Vec<(Point, Point)> = [0.5f64, 1.0, 2.0]
            .iter()
            .map(|&r| {
                let y = g.position(g.nearest_node(&[r, 0.0, 0.0]));
                ([0.0; 3], y)
            })
            .collect();
        let r = check_harnack(&traj, k, s, t, &pairs, &CheckOptions::default()).unwrap();
        for p in r.pair_margins.as_ref().unwrap() {
            assert!(p.margin.abs() <= 1e-3, "pair margin {} at y = {:?}", p.margin, p.y);
        }
    }

    #[test]
    fn classical_harnack_limit_matches_displayed_form() {
        // k -> 0: prefactor reduces to (t/s)^{-n/2} e^{-d^2/(4(t-s))}.
        let (n, s, t) = (1usize, 0.2, 0.8);
        let k = 1e-8;
        let log_b_ratio =
            log_b_comparison(-k * k, t).unwrap() - log_b_comparison(-k * k, s).unwrap();
        let d2 = 1.44;
        let log_rhs_general = -(n as f64) / 2.0 * log_b_ratio - 0.5 * (d2 / (2.0 * (t - s)));
        let log_rhs_classic = -(n as f64) / 2.0 * (t / s).ln() - d2 / (4.0 * (t - s));
        assert!(
            (log_rhs_general - log_rhs_classic).abs() < 1e-6,
            "classical limit drift {}",
            log_rhs_general - log_rhs_classic
        );
    }

    #[test]
    fn liouville_flags_negative_v() {
        let g = GridSpec::cube(1, 8.0, 257, Topology::Box).unwrap();
        // Constants are steady for the drift-only equation, but
        // V = -k + k^2|x|^2/2 < 0 near the origin: the checker must refuse.
        let u1 = PotentialSpec::sharp_drift(1, 1.0);
        let rho = ScalarField::constant(&g, 1e-3);
        match check_liouville(&rho, &u1, &PotentialSpec::zero(1), &CheckOptions::default()) {
            Err(EstimateError::HypothesisFailed(msg)) => {
                assert!(msg.contains("no positive solution"), "unexpected message {msg}");
            }
            Err(EstimateError::NotSteady { .. }) => {
                panic!("steadiness guard fired before the hypothesis guard")
            }
            other => panic!("expected hypothesis failure, got {other:?}"),
        }
    }

    #[test]
    fn liouville_constant_harmonic_case() {
        let g = GridSpec::cube(1, 2.0, 128, Topology::Periodic).unwrap();
        let rho = ScalarField::constant(&g, 2.5);
        let r = check_liouville(
            &rho,
            &PotentialSpec::zero(1),
            &PotentialSpec::zero(1),
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(r.min_margin.abs() < 1e-12);
        assert!((r.params["w_ratio_minus_one"]).abs() < 1e-12);
    }

    #[test]
    fn early_time_guard_fires() {
        let g = GridSpec::cube(1, 2.0, 64, Topology::Periodic).unwrap();
        let rho0 = ScalarField::constant(&g, 1.0);
        let cfg = SolverConfig::new(Scheme::Imex, 1e-3, 0.0, 0.1).with_snapshots(&[5e-3, 0.1]);
        let traj =
            solve_linear(&rho0, &PotentialSpec::zero(1), &PotentialSpec::zero(1), &cfg).unwrap();
        assert!(matches!(
            check_li_yau(&traj, 0.0, 5e-3, &CheckOptions::default()),
            Err(EstimateError::TooEarly { .. })
        ));
    }
}
