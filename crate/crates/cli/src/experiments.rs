//! Experiment orchestration: build the configured run, execute the checks,
//! and emit the JSON/CSV/SVG artifacts.

use crate::config::{
    CurveKind, ExperimentConfig, ExperimentTag, FlowCheck, InitKind, SolveMode, VariantKind,
};
use crate::svg;
use harnack_core::action::{
    check_hessian_comparison, check_laplacian_comparison, cost_field, minimize_cost,
    ComparisonOptions, CostFunctional,
};
use harnack_core::closed_forms::{gaussian_like_log_hessian_coeff, gaussian_like_solution, quadratic_cost, quadratic_minimizer};
use harnack_core::estimates::{
    check_aronson_benilan, check_cheeger_yau, check_harnack, check_li_yau, check_matrix_li_yau,
    li_yau_report, matrix_li_yau_report, CheckOptions, EstimateError,
};
use harnack_core::export;
use harnack_core::flow::{
    hessian_lower_bound, run_flow, volume_audit, CurveState, FlowError, FlowRunConfig,
    QuantityVariant,
};
use harnack_core::grid::MAX_DIM;
use harnack_core::pde::{
    fundamental_solution_approx, solve_linear, solve_porous_medium, EquationKind, SolveError,
    SolverConfig, Trajectory,
};
use harnack_core::potentials::audit_hypotheses;
use harnack_core::report::EstimateReport;
use harnack_core::{GridSpec, MinimizeOptions, Point, PotentialSpec, ScalarField};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    /// Configuration or hypothesis-audit problems: exit code 2.
    #[error("configuration/audit error: {0}")]
    Config(String),
    /// Numerical failures (divergence, non-convergence): exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) | RunError::Io(_) => 3,
        }
    }
}

fn estimate_error(e: EstimateError) -> RunError {
    match e {
        EstimateError::HypothesisFailed(_)
        | EstimateError::TooEarly { .. }
        | EstimateError::MissingSnapshot(_)
        | EstimateError::WrongEquation { .. }
        | EstimateError::Comparison(_)
        | EstimateError::Potential(_) => RunError::Config(e.to_string()),
        EstimateError::PairNotConverged { .. } | EstimateError::NotSteady { .. } => {
            RunError::Numerical(e.to_string())
        }
    }
}

fn solve_error(e: SolveError) -> RunError {
    match e {
        SolveError::Divergence { .. } | SolveError::CflCollapse(_) => {
            RunError::Numerical(e.to_string())
        }
        other => RunError::Config(other.to_string()),
    }
}

fn flow_error(e: FlowError) -> RunError {
    match e {
        FlowError::SelfIntersection
        | FlowError::Collapsed { .. }
        | FlowError::CurveLeftCore
        | FlowError::NonPositiveDensity => RunError::Numerical(e.to_string()),
        other => RunError::Config(other.to_string()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub min_margin: f64,
    pub max_margin: Option<f64>,
    pub tolerance: f64,
    pub excluded: usize,
    pub argmin: Vec<f64>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub experiment: String,
    pub checks: Vec<CheckOutcome>,
    pub artifacts: Vec<String>,
    pub exit_code: i32,
    pub children: Vec<String>,
    pub config_echo: Vec<String>,
}

struct Emitter<'a> {
    dir: PathBuf,
    cfg: &'a ExperimentConfig,
    artifacts: Vec<String>,
    checks: Vec<CheckOutcome>,
}

impl<'a> Emitter<'a> {
    fn new(dir: &Path, cfg: &'a ExperimentConfig) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), cfg, artifacts: Vec::new(), checks: Vec::new() })
    }

    fn record_report(&mut self, report: &EstimateReport, label: &str) -> Result<(), RunError> {
        let max_margin = report.margin_field.as_ref().map(|f| {
            let mask = report.excluded_mask.as_deref().unwrap_or(&[]);
            f.values()
                .iter()
                .enumerate()
                .filter(|(i, _)| !mask.get(*i).copied().unwrap_or(false))
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max)
        });
        let max_margin = max_margin.or_else(|| {
            report
                .pair_margins
                .as_ref()
                .map(|ps| ps.iter().map(|p| p.margin).fold(f64::NEG_INFINITY, f64::max))
        });
        let pass = if self.cfg.estimate.equality {
            let hi = max_margin.unwrap_or(report.min_margin);
            report.min_margin >= -report.tolerance && hi <= report.tolerance
        } else {
            report.pass
        };
        self.checks.push(CheckOutcome {
            name: label.to_string(),
            pass,
            min_margin: report.min_margin,
            max_margin,
            tolerance: report.tolerance,
            excluded: report.excluded,
            argmin: report.argmin.clone(),
            params: report.params.clone(),
        });
        if self.cfg.output.csv {
            let path = self.dir.join(format!("margins_{label}.csv"));
            let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
            export::write_margins_csv(&mut f, report)?;
            self.artifacts.push(format!("margins_{label}.csv"));
        }
        Ok(())
    }

    fn record_custom(&mut self, outcome: CheckOutcome) {
        self.checks.push(outcome);
    }

    fn write_series(
        &mut self,
        name: &str,
        times: &[f64],
        quantity: &[f64],
        dissipation: &[f64],
    ) -> Result<(), RunError> {
        if self.cfg.output.csv {
            let path = self.dir.join(format!("{name}.csv"));
            let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
            export::write_series_csv(&mut f, times, quantity, dissipation)?;
            self.artifacts.push(format!("{name}.csv"));
        }
        Ok(())
    }

    fn write_svg(&mut self, name: &str, title: &str, x: &str, y: &str, series: &[svg::Series]) -> Result<(), RunError> {
        if self.cfg.output.svg {
            let path = self.dir.join(format!("{name}.svg"));
            fs::write(&path, svg::line_plot(title, x, y, series))?;
            self.artifacts.push(format!("{name}.svg"));
        }
        Ok(())
    }

    fn finish(self) -> RunSummary {
        let pass = self.checks.iter().all(|c| c.pass);
        RunSummary {
            name: self.cfg.name.clone(),
            experiment: self.cfg.experiment.as_str().to_string(),
            checks: self.checks,
            artifacts: self.artifacts,
            exit_code: if pass { 0 } else { 1 },
            children: Vec::new(),
            config_echo: self.cfg.source.lines().map(str::to_string).collect(),
        }
    }
}

/// Extract the sharp-drift rate: `U1 = -k|x|^2/2` with `k > 0`.
fn sharp_rate(u1: &PotentialSpec) -> Option<f64> {
    match u1 {
        PotentialSpec::Quadratic { a, b, c, .. }
            if *a < 0.0 && b.iter().all(|&x| x == 0.0) && *c == 0.0 =>
        {
            Some(-a)
        }
        _ => None,
    }
}

fn is_zero(u: &PotentialSpec) -> bool {
    matches!(u, PotentialSpec::Zero { .. })
        || matches!(u, PotentialSpec::Quadratic { a, b, c, .. }
            if *a == 0.0 && *c == 0.0 && b.iter().all(|&x| x == 0.0))
}

/// Seeded smooth positive data `1 + scale * sum of three cosine modes`.
fn random_positive_field(grid: &GridSpec, seed: u64, scale: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let modes: Vec<([f64; MAX_DIM], f64, f64)> = (0..3)
        .map(|_| {
            let mut w = [0.0; MAX_DIM];
            for c in w.iter_mut().take(d) {
                let m: i32 = rng.gen_range(1..=2);
                *c = m as f64;
            }
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp: f64 = rng.gen_range(0.3..1.0);
            (w, phase, amp)
        })
        .collect();
    let amp_scale = scale / 3.0;
    ScalarField::from_fn(grid, |p| {
        let mut v = 1.0;
        for (w, phase, amp) in &modes {
            let mut arg = *phase;
            for c in 0..d {
                arg += 2.0 * std::f64::consts::PI * w[c] * p[c] / grid.extent(c);
            }
            v += amp_scale * amp * arg.cos();
        }
        v
    })
}

fn check_options(cfg: &ExperimentConfig) -> CheckOptions {
    CheckOptions {
        tolerance: cfg.estimate.tolerance,
        boundary_margin: cfg.estimate.boundary_margin,
        support_floor: None,
        support_margin: 10,
        minimize: MinimizeOptions {
            nodes: cfg.estimate.path_nodes,
            seed: cfg.seed,
            ..MinimizeOptions::default()
        },
    }
}

/// Build the linear-equation trajectory for the configured initial data.
fn linear_trajectory(
    cfg: &ExperimentConfig,
    snapshot_times: &[f64],
) -> Result<Trajectory, RunError> {
    let grid = &cfg.grid;
    match cfg.solver.mode {
        SolveMode::Analytic => {
            let k = sharp_rate(&cfg.u1).ok_or_else(|| {
                RunError::Config(
                    "analytic mode needs the sharp drift potential U1 = -k|x|^2/2".into(),
                )
            })?;
            if !is_zero(&cfg.u2) {
                return Err(RunError::Config("analytic mode needs U2 = 0".into()));
            }
            let n = grid.dim();
            let mut times = snapshot_times.to_vec();
            times.sort_by(f64::total_cmp);
            times.dedup();
            let fields = times
                .iter()
                .map(|&t| ScalarField::from_fn(grid, |p| gaussian_like_solution(n, k, t, p)))
                .collect();
            Ok(Trajectory::from_fields(
                times,
                fields,
                EquationKind::Linear { u1: cfg.u1.clone(), u2: cfg.u2.clone() },
            ))
        }
        SolveMode::Solve => {
            let rho0 = match cfg.solver.init {
                InitKind::Oracle => {
                    let k = sharp_rate(&cfg.u1).ok_or_else(|| {
                        RunError::Config("oracle init needs U1 = -k|x|^2/2".into())
                    })?;
                    if cfg.solver.t_start <= 0.0 {
                        return Err(RunError::Config("oracle init needs t_start > 0".into()));
                    }
                    ScalarField::from_fn(grid, |p| {
                        gaussian_like_solution(grid.dim(), k, cfg.solver.t_start, p)
                            .max(cfg.solver.floor)
                    })
                }
                InitKind::Random => random_positive_field(grid, cfg.seed, cfg.solver.init_scale),
                InitKind::Constant => ScalarField::constant(grid, 1.0),
                InitKind::Barenblatt => {
                    return Err(RunError::Config(
                        "barenblatt init is only valid for the porous medium experiment".into(),
                    ))
                }
            };
            let sc = SolverConfig {
                scheme: cfg.solver.scheme,
                dt: cfg.solver.dt,
                t_start: cfg.solver.t_start,
                t_end: cfg.solver.t_end,
                floor: cfg.solver.floor,
                snapshot_times: snapshot_times.to_vec(),
            };
            solve_linear(&rho0, &cfg.u1, &cfg.u2, &sc).map_err(solve_error)
        }
    }
}

fn run_li_yau(cfg: &ExperimentConfig, emitter: &mut Emitter, matrix: bool) -> Result<(), RunError> {
    let opts = check_options(cfg);
    let mut min_margins = Vec::new();
    if cfg.solver.mode == SolveMode::Analytic {
        let k = sharp_rate(&cfg.u1)
            .ok_or_else(|| RunError::Config("analytic mode needs U1 = -k|x|^2/2".into()))?;
        if (k - cfg.estimate.k).abs() > 1e-12 * k.max(1.0) {
            return Err(RunError::Config(format!(
                "analytic equality case needs estimate k = drift rate {k}, got {}",
                cfg.estimate.k
            )));
        }
        let n = cfg.grid.dim();
        for &t in &cfg.estimate.times {
            // Closed-form log-curvature: hess log rho = c I with
            // c = -k/(e^{2tk}-1), so the observed quantity is constant.
            let coeff = gaussian_like_log_hessian_coeff(k, t);
            let report = if matrix {
                let observed = ScalarField::constant(&cfg.grid, coeff - 0.5 * k);
                matrix_li_yau_report(&observed, k, t, &opts).map_err(estimate_error)?
            } else {
                let observed =
                    ScalarField::constant(&cfg.grid, n as f64 * coeff - 0.5 * n as f64 * k);
                li_yau_report(&observed, n, k, t, &opts).map_err(estimate_error)?
            };
            min_margins.push((t, report.min_margin));
            emitter.record_report(&report, &format!("{}_t{t}", report.name))?;
        }
    } else {
        let traj = linear_trajectory(cfg, &cfg.estimate.times)?;
        for &t in &cfg.estimate.times {
            let report = if matrix {
                check_matrix_li_yau(&traj, cfg.estimate.k, t, &opts).map_err(estimate_error)?
            } else {
                check_li_yau(&traj, cfg.estimate.k, t, &opts).map_err(estimate_error)?
            };
            min_margins.push((t, report.min_margin));
            emitter.record_report(&report, &format!("{}_t{t}", report.name))?;
        }
        if cfg.solver.convergence_study && !matrix {
            convergence_check(cfg, emitter)?;
        }
    }
    emitter.write_svg(
        "margin_vs_t",
        "min margin vs t",
        "t",
        "min margin",
        &[svg::Series { label: "min margin", points: min_margins }],
    )?;
    Ok(())
}

/// Solver-versus-oracle convergence: sup error against the closed form at
/// (N, dt) and (2N-1, dt/2); pass needs the fine error below tolerance and
/// a contraction ratio of at least `ratio_min`.
fn convergence_check(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), RunError> {
    let k = sharp_rate(&cfg.u1)
        .ok_or_else(|| RunError::Config("convergence study needs U1 = -k|x|^2/2".into()))?;
    if cfg.grid.dim() != 1 {
        return Err(RunError::Config("convergence study is one-dimensional".into()));
    }
    let run = |count: usize, dt: f64| -> Result<f64, RunError> {
        let grid = GridSpec::cube(1, cfg.grid.extent(0), count, cfg.grid.topology())
            .map_err(|e| RunError::Config(e.to_string()))?;
        let rho0 = ScalarField::from_fn(&grid, |p| {
            gaussian_like_solution(1, k, cfg.solver.t_start, p)
        });
        let sc = SolverConfig {
            scheme: cfg.solver.scheme,
            dt,
            t_start: cfg.solver.t_start,
            t_end: cfg.solver.t_end,
            floor: cfg.solver.floor,
            snapshot_times: vec![cfg.solver.t_end],
        };
        let traj = solve_linear(&rho0, &cfg.u1, &cfg.u2, &sc).map_err(solve_error)?;
        let exact =
            ScalarField::from_fn(&grid, |p| gaussian_like_solution(1, k, cfg.solver.t_end, p));
        let err = traj.fields()[0]
            .zip(&exact, |a, b| a - b)
            .expect("same grid")
            .max_abs()
            / exact.max_abs();
        Ok(err)
    };
    let coarse = run(cfg.grid.count(0), cfg.solver.dt)?;
    let fine = run(cfg.grid.count(0) * 2 - 1, cfg.solver.dt / 2.0)?;
    let ratio = coarse / fine;
    let pass = coarse <= cfg.solver.error_tolerance && ratio >= cfg.solver.ratio_min;
    let mut params = BTreeMap::new();
    params.insert("coarse_error".into(), coarse);
    params.insert("fine_error".into(), fine);
    params.insert("ratio".into(), ratio);
    emitter.record_custom(CheckOutcome {
        name: "solver_convergence".into(),
        pass,
        min_margin: cfg.solver.error_tolerance - coarse,
        max_margin: None,
        tolerance: cfg.solver.error_tolerance,
        excluded: 0,
        argmin: vec![],
        params,
    });
    Ok(())
}

fn run_harnack(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), RunError> {
    let s = cfg
        .estimate
        .s
        .ok_or_else(|| RunError::Config("harnack needs `s` in [estimate]".into()))?;
    let t = *cfg
        .estimate
        .times
        .first()
        .ok_or_else(|| RunError::Config("harnack needs `t` in [estimate]".into()))?;
    let traj = linear_trajectory(cfg, &[s, t])?;
    let grid = &cfg.grid;
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9aa2);
    let mut pairs = Vec::new();
    for _ in 0..cfg.estimate.pairs {
        let sample_point = |rng: &mut ChaCha8Rng| -> Point {
            let mut p = [0.0; MAX_DIM];
            for c in p.iter_mut().take(d) {
                *c = rng.gen_range(-1.0..1.0) * cfg.estimate.pair_radius;
            }
            p
        };
        let x = if cfg.estimate.pair_from_origin { [0.0; MAX_DIM] } else { sample_point(&mut rng) };
        let y = sample_point(&mut rng);
        // Snap to nodes so interpolation does not blur near-peaked data.
        let x = grid.position(grid.nearest_node(&x));
        let y = grid.position(grid.nearest_node(&y));
        pairs.push((x, y));
    }
    let report = check_harnack(&traj, cfg.estimate.k, s, t, &pairs, &check_options(cfg))
        .map_err(estimate_error)?;
    emitter.record_report(&report, "harnack")?;
    Ok(())
}

fn run_cheeger_yau(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), RunError> {
    let t = *cfg
        .estimate
        .times
        .first()
        .ok_or_else(|| RunError::Config("cheeger-yau needs `t` in [estimate]".into()))?;
    let h_max = (0..cfg.grid.dim()).map(|a| cfg.grid.spacing(a)).fold(0.0f64, f64::max);
    let sigma0 = cfg.solver.sigma0.unwrap_or(4.0 * h_max);
    let core_radius = cfg.estimate.core_radius.unwrap_or(cfg.grid.extent(0) / 8.0);
    let sc = SolverConfig {
        scheme: cfg.solver.scheme,
        dt: cfg.solver.dt,
        t_start: 0.0,
        t_end: t,
        floor: cfg.solver.floor,
        snapshot_times: vec![t],
    };
    let x0 = [0.0; MAX_DIM];
    let kernel = fundamental_solution_approx(&x0, t, &cfg.u1, &cfg.u2, &cfg.grid, &sc, sigma0)
        .map_err(solve_error)?;
    let report = check_cheeger_yau(
        &kernel,
        &x0,
        &cfg.u1,
        &cfg.u2,
        cfg.estimate.k,
        t,
        core_radius,
        &check_options(cfg),
    )
    .map_err(estimate_error)?;
    emitter.record_report(&report, "cheeger_yau")?;
    Ok(())
}

/// Self-similar porous-medium profile in one dimension:
/// `B(x, t) = t^{-a} (C - b x^2 t^{-2a})_+^{1/(m-1)}` with `a = 1/(m+1)`
/// and `b = a (m-1) / (2m)`.
fn barenblatt(m: f64, c: f64, t: f64, x: f64) -> f64 {
    let alpha = 1.0 / (m + 1.0);
    let beta = alpha * (m - 1.0) / (2.0 * m);
    let inner = c - beta * x * x * t.powf(-2.0 * alpha);
    if inner <= 0.0 {
        0.0
    } else {
        t.powf(-alpha) * inner.powf(1.0 / (m - 1.0))
    }
}

fn run_ab(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), RunError> {
    let m = cfg.solver.m;
    let k3 = cfg.estimate.k3.unwrap_or(0.0);
    let c = 1.0 / 12.0;
    let rho0 = match cfg.solver.init {
        InitKind::Barenblatt => {
            if cfg.grid.dim() != 1 {
                return Err(RunError::Config("barenblatt init is one-dimensional".into()));
            }
            if cfg.solver.t_start <= 0.0 {
                return Err(RunError::Config("barenblatt init needs t_start > 0".into()));
            }
            ScalarField::from_fn(&cfg.grid, |p| {
                barenblatt(m, c, cfg.solver.t_start, p[0]).max(cfg.solver.floor)
            })
        }
        InitKind::Random => random_positive_field(&cfg.grid, cfg.seed, cfg.solver.init_scale),
        InitKind::Constant => ScalarField::constant(&cfg.grid, 1.0),
        InitKind::Oracle => {
            return Err(RunError::Config("use init = barenblatt for the porous oracle".into()))
        }
    };
    let sc = SolverConfig {
        scheme: harnack_core::Scheme::Explicit,
        dt: cfg.solver.dt,
        t_start: cfg.solver.t_start,
        t_end: cfg.solver.t_end,
        floor: cfg.solver.floor,
        snapshot_times: cfg.estimate.times.clone(),
    };
    let traj = solve_porous_medium(&rho0, m, &cfg.u1, &sc).map_err(solve_error)?;
    let mut opts = check_options(cfg);
    opts.support_floor = Some(1e3 * cfg.solver.floor);
    for &t in &cfg.estimate.times {
        let report = check_aronson_benilan(&traj, k3, t, &opts).map_err(estimate_error)?;
        emitter.record_report(&report, &format!("aronson_benilan_t{t}"))?;
        if cfg.solver.init == InitKind::Barenblatt {
            // Profile accuracy against the self-similar closed form, away
            // from the degenerate front.
            let rho = traj.snapshot(t).expect("snapshot requested");
            let exact = ScalarField::from_fn(&cfg.grid, |p| barenblatt(m, c, t, p[0]));
            let scale = exact.max_abs();
            let alpha = 1.0 / (m + 1.0);
            let beta = alpha * (m - 1.0) / (2.0 * m);
            let edge = (c / beta).sqrt() * t.powf(alpha);
            let band = 10.0 * cfg.grid.spacing(0);
            let mut worst = 0.0f64;
            for i in 0..cfg.grid.node_count() {
                let x = cfg.grid.position(i)[0];
                if x.abs() < edge - band {
                    worst = worst
                        .max((rho.values()[i] - exact.values()[i]).abs() / scale);
                }
            }
            let mut params = BTreeMap::new();
            params.insert("t".into(), t);
            params.insert("sup_error".into(), worst);
            emitter.record_custom(CheckOutcome {
                name: format!("barenblatt_profile_t{t}"),
                pass: worst <= 5e-3,
                min_margin: 5e-3 - worst,
                max_margin: None,
                tolerance: 5e-3,
                excluded: 0,
                argmin: vec![],
                params,
            });
        }
    }
    Ok(())
}

fn run_cost_compare(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), RunError> {
    let t = *cfg
        .estimate
        .times
        .first()
        .ok_or_else(|| RunError::Config("cost-compare needs `t` in [estimate]".into()))?;
    let opts = MinimizeOptions {
        nodes: cfg.estimate.path_nodes,
        seed: cfg.seed,
        ..MinimizeOptions::default()
    };

    if cfg.estimate.oracle_endpoints > 0 {
        // Closed-form oracle: U1 = -k|x|^2/2, U2 = 0 with the
        // kinetic-plus-potential functional.
        let k = sharp_rate(&cfg.u1).ok_or_else(|| {
            RunError::Config("the cost oracle needs U1 = -k|x|^2/2 and U2 = 0".into())
        })?;
        if !is_zero(&cfg.u2) {
            return Err(RunError::Config("the cost oracle needs U2 = 0".into()));
        }
        let n = cfg.grid.dim();
        let cost = CostFunctional::kinetic_plus_potential(cfg.u1.clone(), cfg.u2.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x51c0);
        let mut worst_value = 0.0f64;
        let mut worst_path = 0.0f64;
        for _ in 0..cfg.estimate.oracle_endpoints {
            // Sample within the ball |y| <= pair_radius.
            let mut y = [0.0; MAX_DIM];
            loop {
                let mut r2 = 0.0;
                for c in y.iter_mut().take(n) {
                    *c = rng.gen_range(-1.0..1.0);
                    r2 += *c * *c;
                }
                if r2 <= 1.0 && r2 > 1e-4 {
                    break;
                }
            }
            for c in y.iter_mut().take(n) {
                *c *= cfg.estimate.pair_radius;
            }
            let r = minimize_cost(&[0.0; MAX_DIM], &y, 0.0, t, &cost, &opts);
            if !r.converged {
                return Err(RunError::Numerical(format!(
                    "cost minimization did not converge for endpoint {y:?}"
                )));
            }
            let exact = quadratic_cost(n, k, t, &y);
            worst_value = worst_value.max((r.value - exact).abs() / exact.abs().max(1e-12));
            let nodes = r.path.points.len();
            for (i, p) in r.path.points.iter().enumerate() {
                let s = t * i as f64 / (nodes - 1) as f64;
                let q = quadratic_minimizer(k, t, &y, s);
                for c in 0..n {
                    worst_path = worst_path.max((p[c] - q[c]).abs());
                }
            }
        }
        let tol = 1e-4;
        let mut params = BTreeMap::new();
        params.insert("worst_value_rel".into(), worst_value);
        params.insert("worst_path_sup".into(), worst_path);
        params.insert("endpoints".into(), cfg.estimate.oracle_endpoints as f64);
        emitter.record_custom(CheckOutcome {
            name: "quadratic_cost_oracle".into(),
            pass: worst_value <= tol && worst_path <= tol,
            min_margin: tol - worst_value.max(worst_path),
            max_margin: None,
            tolerance: tol,
            excluded: 0,
            argmin: vec![],
            params,
        });
    }

    if cfg.estimate.k3.is_some() || cfg.estimate.k3_matrix.is_some() {
        let cost = CostFunctional::drift_form(cfg.u1.clone(), cfg.u2.clone());
        let field = cost_field(&[0.0; MAX_DIM], t, &cost, &cfg.grid, None, &opts);
        let copts = ComparisonOptions {
            tolerance: cfg.estimate.tolerance,
            boundary_margin: cfg.estimate.boundary_margin,
        };
        if let Some(k3) = cfg.estimate.k3 {
            let report = check_laplacian_comparison(&field, &cfg.u1, &cfg.u2, k3, t, &copts)
                .map_err(|e| RunError::Config(e.to_string()))?;
            emitter.record_report(&report, "laplacian_comparison")?;
        }
        if let Some(k3m) = cfg.estimate.k3_matrix {
            let report = check_hessian_comparison(&field, &cfg.u1, &cfg.u2, k3m, t, &copts)
                .map_err(|e| RunError::Config(e.to_string()))?;
            emitter.record_report(&report, "hessian_comparison")?;
        }
        if cfg.output.csv {
            let path = emitter.dir.join("cost_field.csv");
            let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
            export::write_field_csv(&mut f, &field.values)?;
            emitter.artifacts.push("cost_field.csv".into());
        }
    }
    Ok(())
}

fn run_flow_experiment(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), RunError> {
    let grid = &cfg.grid;
    let n = grid.dim();
    if n != 2 {
        return Err(RunError::Config("the curve flow needs a two-dimensional grid".into()));
    }
    let u = cfg.u1.clone();
    let u2 = u
        .laplacian_potential()
        .map_err(|e| RunError::Config(format!("flow ambient reaction: {e}")))?;

    // Hypothesis audit: hess(-lap U + |grad U|^2/2) <= k^2 I.
    let k = cfg.estimate.k;
    let audit = audit_hypotheses(&u, &u2, grid, k, n).map_err(|e| RunError::Config(e.to_string()))?;
    if !audit.hessian_ok {
        return Err(RunError::Config(format!(
            "flow hypothesis fails at k = {k}: smallest admissible k = {}",
            audit.min_k_hessian
        )));
    }

    let horizon = match cfg.flow.horizon {
        Some(t) => t,
        None => {
            let rate = sharp_rate(&u).ok_or_else(|| {
                RunError::Config("matched horizon needs U = -k|x|^2/2; set `horizon` explicitly".into())
            })?;
            (1.0 + rate * cfg.flow.r0 * cfg.flow.r0).ln() / (2.0 * rate)
        }
    };
    if horizon <= cfg.flow.t_end {
        return Err(RunError::Config(format!(
            "horizon {horizon} must exceed the flow window {}",
            cfg.flow.t_end
        )));
    }

    let audits: Vec<f64> = (0..cfg.flow.audits)
        .map(|j| cfg.flow.t_end * j as f64 / (cfg.flow.audits - 1) as f64)
        .collect();
    let mut snapshot_times: Vec<f64> = audits.iter().map(|&t| horizon - t).collect();
    snapshot_times.sort_by(f64::total_cmp);

    // Ambient density forward in time on [T - t_end, T].
    let ambient = match cfg.solver.mode {
        SolveMode::Analytic => {
            let rate = sharp_rate(&u).ok_or_else(|| {
                RunError::Config("analytic ambient needs U = -k|x|^2/2".into())
            })?;
            let fields = snapshot_times
                .iter()
                .map(|&s| {
                    ScalarField::from_fn(grid, |p| {
                        gaussian_like_solution(n, rate, s, p) * (-rate * n as f64 * s).exp()
                    })
                })
                .collect();
            Trajectory::from_fields(
                snapshot_times.clone(),
                fields,
                EquationKind::Linear { u1: u.clone(), u2: u2.clone() },
            )
        }
        SolveMode::Solve => {
            let t_start = snapshot_times[0];
            let rho0 = match cfg.solver.init {
                InitKind::Oracle => {
                    let rate = sharp_rate(&u).ok_or_else(|| {
                        RunError::Config("oracle ambient init needs U = -k|x|^2/2".into())
                    })?;
                    ScalarField::from_fn(grid, |p| {
                        (gaussian_like_solution(n, rate, t_start, p)
                            * (-rate * n as f64 * t_start).exp())
                        .max(cfg.solver.floor)
                    })
                }
                InitKind::Random => {
                    random_positive_field(grid, cfg.seed ^ 0xf10, cfg.solver.init_scale)
                }
                InitKind::Constant => ScalarField::constant(grid, 1.0),
                InitKind::Barenblatt => {
                    return Err(RunError::Config("barenblatt init is porous-medium only".into()))
                }
            };
            let sc = SolverConfig {
                scheme: cfg.solver.scheme,
                dt: cfg.solver.dt,
                t_start,
                t_end: horizon,
                floor: cfg.solver.floor,
                snapshot_times: snapshot_times.clone(),
            };
            solve_linear(&rho0, &u, &u2, &sc).map_err(solve_error)?
        }
    };

    let curve0 = match cfg.flow.curve {
        CurveKind::Circle => CurveState::circle([0.0, 0.0], cfg.flow.r0, cfg.flow.nodes),
        CurveKind::Ellipse => CurveState::ellipse(
            [0.0, 0.0],
            cfg.flow.ellipse_axes.0,
            cfg.flow.ellipse_axes.1,
            cfg.flow.nodes,
        ),
    }
    .map_err(flow_error)?;

    let big_k = cfg.flow.big_k.unwrap_or_else(|| hessian_lower_bound(&u, grid));
    let variant = match cfg.flow.variant {
        VariantKind::Sinh => QuantityVariant::Sinh { k },
        VariantKind::B => QuantityVariant::BFunction { k3: cfg.estimate.k3.unwrap_or(0.0) },
        VariantKind::Weighted => QuantityVariant::Weighted { k, big_k },
    };
    let frc = FlowRunConfig {
        dt: cfg.flow.dt,
        audit_times: audits.clone(),
        horizon,
        variant,
        redistribute_every: cfg.flow.redistribute_every,
    };
    let series = run_flow(&curve0, &u, &ambient, &frc).map_err(flow_error)?;

    // Verdicts.
    let q0 = series.quantity[0];
    match cfg.flow.check {
        FlowCheck::Constant => {
            let drift = series
                .quantity
                .iter()
                .map(|q| ((q - q0) / q0).abs())
                .fold(0.0f64, f64::max);
            let mut params = BTreeMap::new();
            params.insert("max_relative_drift".into(), drift);
            params.insert("q0".into(), q0);
            params.insert("horizon".into(), horizon);
            emitter.record_custom(CheckOutcome {
                name: "huisken_constant".into(),
                pass: drift <= cfg.flow.flow_tolerance,
                min_margin: cfg.flow.flow_tolerance - drift,
                max_margin: None,
                tolerance: cfg.flow.flow_tolerance,
                excluded: 0,
                argmin: vec![],
                params,
            });
        }
        FlowCheck::Monotone => {
            let max_slope = series
                .slopes()
                .iter()
                .map(|s| s / q0.abs())
                .fold(f64::NEG_INFINITY, f64::max);
            let mut params = BTreeMap::new();
            params.insert("max_normalized_slope".into(), max_slope);
            params.insert("q0".into(), q0);
            params.insert("big_k".into(), big_k);
            emitter.record_custom(CheckOutcome {
                name: "huisken_monotone".into(),
                pass: max_slope <= cfg.flow.flow_tolerance,
                min_margin: cfg.flow.flow_tolerance - max_slope,
                max_margin: None,
                tolerance: cfg.flow.flow_tolerance,
                excluded: 0,
                argmin: vec![],
                params,
            });
        }
    }

    // The flow is the gradient flow of the weighted length; audit decrease.
    let mut weighted_ok = true;
    for w in series.weighted_length.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-9) {
            weighted_ok = false;
        }
    }
    let mut params = BTreeMap::new();
    params.insert("initial".into(), series.weighted_length[0]);
    params.insert(
        "final".into(),
        *series.weighted_length.last().expect("at least one audit"),
    );
    emitter.record_custom(CheckOutcome {
        name: "weighted_length_decreasing".into(),
        pass: weighted_ok,
        min_margin: if weighted_ok { 0.0 } else { -1.0 },
        max_margin: None,
        tolerance: 0.0,
        excluded: 0,
        argmin: vec![],
        params,
    });

    // Circle-under-quadratic-drift radius oracle.
    if cfg.flow.curve == CurveKind::Circle {
        if let Some(rate) = sharp_rate(&u) {
            let mut worst = 0.0f64;
            for (j, curve) in series.curves.iter().enumerate() {
                let t = series.times[j];
                let expected =
                    ((cfg.flow.r0 * cfg.flow.r0 + 1.0 / rate) * (-2.0 * rate * t).exp()
                        - 1.0 / rate)
                        .sqrt();
                for p in curve.points() {
                    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                    worst = worst.max(((r - expected) / expected).abs());
                }
            }
            let mut params = BTreeMap::new();
            params.insert("worst_relative".into(), worst);
            emitter.record_custom(CheckOutcome {
                name: "circle_radius_oracle".into(),
                pass: worst <= cfg.flow.radius_oracle_tolerance,
                min_margin: cfg.flow.radius_oracle_tolerance - worst,
                max_margin: None,
                tolerance: cfg.flow.radius_oracle_tolerance,
                excluded: 0,
                argmin: vec![],
                params,
            });
        }
    }

    emitter.write_series("series", &series.times, &series.quantity, &series.dissipation)?;
    if cfg.output.csv {
        let path = emitter.dir.join("curves.csv");
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "t,node,x,y")?;
        for (j, curve) in series.curves.iter().enumerate() {
            for (i, p) in curve.points().iter().enumerate() {
                writeln!(f, "{},{},{},{}", series.times[j], i, p[0], p[1])?;
            }
        }
        emitter.artifacts.push("curves.csv".into());
    }
    emitter.write_svg(
        "quantity_vs_t",
        "monotone quantity",
        "t",
        "Q",
        &[svg::Series {
            label: "Q",
            points: series.times.iter().copied().zip(series.quantity.iter().copied()).collect(),
        }],
    )?;
    Ok(())
}

fn run_volume(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), RunError> {
    let grid = &cfg.grid;
    let n = grid.dim();
    let steps = cfg.flow.advect_steps;
    let times: Vec<f64> = (0..=2 * steps)
        .map(|j| cfg.flow.t0 + (cfg.flow.t1 - cfg.flow.t0) * j as f64 / (2 * steps) as f64)
        .collect();
    let traj = linear_trajectory(cfg, &times)?;
    let k3 = match cfg.estimate.k3 {
        Some(v) => v,
        None => {
            // Derive the trace-form constant from the audit: lap(-V) >= -sup lap V.
            let audit = audit_hypotheses(&cfg.u1, &cfg.u2, grid, cfg.estimate.k, n)
                .map_err(|e| RunError::Config(e.to_string()))?;
            -audit.sup_lap_v
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x70a1);
    let seeds: Vec<Point> = (0..cfg.flow.seeds)
        .map(|_| {
            let mut p = [0.0; MAX_DIM];
            for c in p.iter_mut().take(n) {
                *c = rng.gen_range(-1.0..1.0) * cfg.flow.seed_radius;
            }
            p
        })
        .collect();
    let report = volume_audit(&traj, &seeds, k3).map_err(flow_error)?;

    let (pass, observed, label) = match cfg.flow.check {
        FlowCheck::Constant => (
            report.max_step_change <= cfg.flow.flow_tolerance,
            report.max_step_change,
            "volume_constant",
        ),
        FlowCheck::Monotone => (
            report.max_step_increase <= cfg.flow.flow_tolerance,
            report.max_step_increase,
            "volume_monotone",
        ),
    };
    let mut params = BTreeMap::new();
    params.insert("k3".into(), k3);
    params.insert("observed".into(), observed);
    params.insert("seeds".into(), seeds.len() as f64);
    emitter.record_custom(CheckOutcome {
        name: label.into(),
        pass,
        min_margin: cfg.flow.flow_tolerance - observed,
        max_margin: None,
        tolerance: cfg.flow.flow_tolerance,
        excluded: 0,
        argmin: vec![],
        params,
    });

    if cfg.output.csv {
        let path = emitter.dir.join("series.csv");
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        let header: Vec<String> =
            (0..report.normalized.len()).map(|i| format!("seed{i}")).collect();
        writeln!(f, "t,{}", header.join(","))?;
        for (j, &t) in report.times.iter().enumerate() {
            let row: Vec<String> =
                report.normalized.iter().map(|seq| seq[j].to_string()).collect();
            writeln!(f, "{t},{}", row.join(","))?;
        }
        emitter.artifacts.push("series.csv".into());
    }
    let series: Vec<svg::Series> = report
        .normalized
        .iter()
        .enumerate()
        .map(|(i, seq)| svg::Series {
            label: Box::leak(format!("seed{i}").into_boxed_str()),
            points: report.times.iter().copied().zip(seq.iter().copied()).collect(),
        })
        .collect();
    emitter.write_svg("volume_vs_t", "normalized volume", "t", "v", &series)?;
    Ok(())
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<RunSummary, RunError> {
    if cfg.experiment == ExperimentTag::Sweep {
        return run_sweep(cfg, out_dir, jobs);
    }
    let mut emitter = Emitter::new(out_dir, cfg)?;
    match cfg.experiment {
        ExperimentTag::LiYau => run_li_yau(cfg, &mut emitter, false)?,
        ExperimentTag::MatrixLiYau => run_li_yau(cfg, &mut emitter, true)?,
        ExperimentTag::Harnack => run_harnack(cfg, &mut emitter)?,
        ExperimentTag::CheegerYau => run_cheeger_yau(cfg, &mut emitter)?,
        ExperimentTag::Ab => run_ab(cfg, &mut emitter)?,
        ExperimentTag::CostCompare => run_cost_compare(cfg, &mut emitter)?,
        ExperimentTag::Flow => run_flow_experiment(cfg, &mut emitter)?,
        ExperimentTag::Volume => run_volume(cfg, &mut emitter)?,
        ExperimentTag::Sweep => unreachable!(),
    }
    let summary = emitter.finish();
    write_summary(&summary, out_dir, cfg.output.json)?;
    Ok(summary)
}

fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<RunSummary, RunError> {
    let sweep = cfg.sweep.as_ref().expect("validated sweep block");
    fs::create_dir_all(out_dir)?;
    let children: Vec<(String, ExperimentConfig)> = sweep
        .values
        .iter()
        .map(|&v| {
            let mut child = cfg.clone();
            child.experiment = sweep.experiment;
            child.sweep = None;
            match sweep.parameter.as_str() {
                "k" => child.estimate.k = v,
                "k3" => child.estimate.k3 = Some(v),
                "t" => child.estimate.times = vec![v],
                _ => unreachable!("validated at parse time"),
            }
            let label = format!("{}={v}", sweep.parameter);
            child.name = format!("{}/{label}", cfg.name);
            (label, child)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    let results: Vec<(String, Result<RunSummary, RunError>)> = pool.install(|| {
        use rayon::prelude::*;
        children
            .par_iter()
            .map(|(label, child)| {
                let dir = out_dir.join(label);
                (label.clone(), run_experiment(child, &dir, 1))
            })
            .collect()
    });

    let mut checks = Vec::new();
    let mut child_names = Vec::new();
    let mut exit_code = 0;
    for (label, result) in results {
        match result {
            Ok(summary) => {
                exit_code = exit_code.max(summary.exit_code);
                child_names.push(label.clone());
                for c in summary.checks {
                    checks.push(CheckOutcome { name: format!("{label}/{}", c.name), ..c });
                }
            }
            Err(e) => {
                exit_code = exit_code.max(e.exit_code());
                let mut params = BTreeMap::new();
                params.insert("exit_code".into(), e.exit_code() as f64);
                checks.push(CheckOutcome {
                    name: format!("{label}/error"),
                    pass: false,
                    min_margin: f64::NEG_INFINITY,
                    max_margin: None,
                    tolerance: 0.0,
                    excluded: 0,
                    argmin: vec![],
                    params,
                });
            }
        }
    }
    let summary = RunSummary {
        name: cfg.name.clone(),
        experiment: "sweep".into(),
        checks,
        artifacts: Vec::new(),
        exit_code,
        children: child_names,
        config_echo: cfg.source.lines().map(str::to_string).collect(),
    };
    write_summary(&summary, out_dir, cfg.output.json)?;
    Ok(summary)
}

fn write_summary(summary: &RunSummary, out_dir: &Path, json: bool) -> Result<(), RunError> {
    if json {
        let path = out_dir.join("summary.json");
        let text = serde_json::to_string_pretty(summary).expect("summary serializes");
        fs::write(path, text)?;
    }
    Ok(())
}
