//! Weighted mean curvature flow of closed curves in the plane (the
//! codimension-one, two-dimensional instance of the general flow) together
//! with the monotone-quantity audits.
//!
//! Conventions, fixed once and used everywhere: curves are stored
//! counterclockwise; `nu` is the outward unit normal; the signed curvature
//! is positive for convex curves, so the curvature vector is `-kappa nu`
//! and the flow velocity is `(-kappa + <grad U, nu>) nu`. The codimension
//! enters the prefactors symbolically as `(n - m)/2`, so the formulas read
//! like the general statements even though only `n - m = 1` is exercised.

use crate::closed_forms::{b_comparison, ComparisonError};
use crate::fields::ScalarField;
use crate::grid::{GridSpec, Point, Topology};
use crate::pde::Trajectory;
use crate::potentials::PotentialSpec;
use thiserror::Error;

pub const MIN_CURVE_NODES: usize = 64;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("closed curves need at least {MIN_CURVE_NODES} nodes, got {0}")]
    TooFewNodes(usize),
    #[error("curvature CFL violated: dt = {dt} exceeds 0.2 min_element^2 = {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("curve self-intersects")]
    SelfIntersection,
    #[error("curve collapsed: length {length} fell below {limit}")]
    Collapsed { length: f64, limit: f64 },
    #[error("curve left the sampled region of the ambient grid")]
    CurveLeftCore,
    #[error("ambient density must be strictly positive along the curve")]
    NonPositiveDensity,
    #[error("no ambient snapshot at t = {0}")]
    MissingSnapshot(f64),
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
}

/// Closed polyline in the plane, counterclockwise.
#[derive(Debug, Clone)]
pub struct CurveState {
    points: Vec<[f64; 2]>,
}

/// Per-node derived quantities, recomputed after every node move.
pub struct CurveGeometry {
    pub tangents: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
    pub curvatures: Vec<f64>,
    /// Dual length of each node: half the sum of its two edges.
    pub weights: Vec<f64>,
    pub total_length: f64,
    pub min_element: f64,
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl CurveState {
    pub fn from_points(points: Vec<[f64; 2]>) -> Result<Self, FlowError> {
        if points.len() < MIN_CURVE_NODES {
            return Err(FlowError::TooFewNodes(points.len()));
        }
        let mut curve = Self { points };
        if curve.enclosed_area() < 0.0 {
            curve.points.reverse();
        }
        Ok(curve)
    }

    pub fn circle(center: [f64; 2], radius: f64, nodes: usize) -> Result<Self, FlowError> {
        let points = (0..nodes)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / nodes as f64;
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            })
            .collect();
        Self::from_points(points)
    }

    /// Ellipse sampled uniformly by arclength (via a dense intermediate
    /// polyline), so redistribution starts as a near no-op.
    pub fn ellipse(center: [f64; 2], a: f64, b: f64, nodes: usize) -> Result<Self, FlowError> {
        let dense = 16 * nodes;
        let coarse = Self {
            points: (0..dense)
                .map(|i| {
                    let th = 2.0 * std::f64::consts::PI * i as f64 / dense as f64;
                    [center[0] + a * th.cos(), center[1] + b * th.sin()]
                })
                .collect(),
        };
        let resampled = coarse.resample_uniform_to(nodes);
        Self::from_points(resampled.points)
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    pub fn total_length(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let p = self.points[i];
                let q = self.points[(i + 1) % n];
                ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
            })
            .sum()
    }

    /// Shoelace area; positive for counterclockwise orientation.
    pub fn enclosed_area(&self) -> f64 {
        let n = self.points.len();
        0.5 * (0..n)
            .map(|i| cross(self.points[i], self.points[(i + 1) % n]))
            .sum::<f64>()
    }

    pub fn geometry(&self) -> CurveGeometry {
        let n = self.points.len();
        let mut tangents = vec![[0.0; 2]; n];
        let mut normals = vec![[0.0; 2]; n];
        let mut curvatures = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut total = 0.0;
        let mut min_el = f64::INFINITY;
        let edge = |i: usize| -> [f64; 2] {
            let p = self.points[i];
            let q = self.points[(i + 1) % n];
            [q[0] - p[0], q[1] - p[1]]
        };
        let norms: Vec<f64> = (0..n)
            .map(|i| {
                let e = edge(i);
                (e[0] * e[0] + e[1] * e[1]).sqrt()
            })
            .collect();
        for i in 0..n {
            total += norms[i];
            min_el = min_el.min(norms[i]);
        }
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let e_prev = edge(prev);
            let e_next = edge(i);
            let chord = [
                self.points[(i + 1) % n][0] - self.points[prev][0],
                self.points[(i + 1) % n][1] - self.points[prev][1],
            ];
            let chord_len = (chord[0] * chord[0] + chord[1] * chord[1]).sqrt();
            let t = [chord[0] / chord_len, chord[1] / chord_len];
            tangents[i] = t;
            // Outward normal of a counterclockwise curve.
            normals[i] = [t[1], -t[0]];
            // Signed circumradius curvature of three consecutive nodes.
            curvatures[i] =
                2.0 * cross(e_prev, e_next) / (norms[prev] * norms[i] * chord_len);
            weights[i] = 0.5 * (norms[prev] + norms[i]);
        }
        CurveGeometry { tangents, normals, curvatures, weights, total_length: total, min_element: min_el }
    }

    /// Segment-pair sweep; adjacent segments share an endpoint and are
    /// skipped.
    pub fn is_simple(&self) -> bool {
        let n = self.points.len();
        let seg = |i: usize| (self.points[i], self.points[(i + 1) % n]);
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                let d1 = cross([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
                let d2 = cross([b[0] - a[0], b[1] - a[1]], [d[0] - a[0], d[1] - a[1]]);
                let d3 = cross([d[0] - c[0], d[1] - c[1]], [a[0] - c[0], a[1] - c[1]]);
                let d4 = cross([d[0] - c[0], d[1] - c[1]], [b[0] - c[0], b[1] - c[1]]);
                if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Weighted length `integral of e^{-U} ds`, the functional the flow
    /// descends.
    pub fn weighted_length(&self, u: &PotentialSpec) -> f64 {
        let geo = self.geometry();
        self.points
            .iter()
            .zip(&geo.weights)
            .map(|(p, w)| w * (-u.eval(&[p[0], p[1], 0.0])).exp())
            .sum()
    }

    pub fn resample_uniform(&self) -> CurveState {
        self.resample_uniform_to(self.points.len())
    }

    /// Chordal Catmull-Rom resampling to `target` nodes uniformly spaced in
    /// arclength. Purely tangential when the spacing is already close to
    /// uniform.
    fn resample_uniform_to(&self, target: usize) -> CurveState {
        let n = self.points.len();
        let mut cumulative = vec![0.0; n + 1];
        for i in 0..n {
            let p = self.points[i];
            let q = self.points[(i + 1) % n];
            cumulative[i + 1] =
                cumulative[i] + ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        }
        let total = cumulative[n];
        let mut out = Vec::with_capacity(target);
        let mut seg = 0usize;
        for j in 0..target {
            let s = total * j as f64 / target as f64;
            while seg + 1 < n + 1 && cumulative[seg + 1] < s {
                seg += 1;
            }
            let p0 = self.points[(seg + n - 1) % n];
            let p1 = self.points[seg % n];
            let p2 = self.points[(seg + 1) % n];
            let p3 = self.points[(seg + 2) % n];
            let local = s - cumulative[seg];
            out.push(catmull_rom_chordal(p0, p1, p2, p3, local));
        }
        CurveState { points: out }
    }
}

/// Chordal Catmull-Rom point at arclength-offset `s` past `p1` on the
/// segment p1 -> p2 (Barry-Goldman form).
fn catmull_rom_chordal(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], p3: [f64; 2], s: f64) -> [f64; 2] {
    let dist = |a: [f64; 2], b: [f64; 2]| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let t0 = 0.0;
    let t1 = t0 + dist(p0, p1).max(1e-300);
    let t2 = t1 + dist(p1, p2).max(1e-300);
    let t3 = t2 + dist(p2, p3).max(1e-300);
    let t = t1 + s;
    let lerp = |a: [f64; 2], b: [f64; 2], u: f64| {
        [a[0] + (b[0] - a[0]) * u, a[1] + (b[1] - a[1]) * u]
    };
    let a1 = lerp(p0, p1, (t - t0) / (t1 - t0));
    let a2 = lerp(p1, p2, (t - t1) / (t2 - t1));
    let a3 = lerp(p2, p3, (t - t2) / (t3 - t2));
    let b1 = lerp(a1, a2, (t - t0) / (t2 - t0));
    let b2 = lerp(a2, a3, (t - t1) / (t3 - t1));
    lerp(b1, b2, (t - t1) / (t2 - t1))
}

/// One forward-Euler step of `phi' = (-kappa + <grad U, nu>) nu`.
pub fn flow_step(curve: &CurveState, u: &PotentialSpec, dt: f64) -> Result<CurveState, FlowError> {
    let geo = curve.geometry();
    let limit = 0.4 * geo.min_element * geo.min_element / 2.0;
    if dt > limit {
        return Err(FlowError::CflViolation { dt, limit });
    }
    let points = curve
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let g = u.grad(&[p[0], p[1], 0.0]);
            let speed = -geo.curvatures[i] + g[0] * geo.normals[i][0] + g[1] * geo.normals[i][1];
            [
                p[0] + dt * speed * geo.normals[i][0],
                p[1] + dt * speed * geo.normals[i][1],
            ]
        })
        .collect();
    Ok(CurveState { points })
}

/// Prefactor variants of the monotone quantity; `codim` is `n - m`.
#[derive(Debug, Clone, Copy)]
pub enum QuantityVariant {
    /// `sinh^{(n-m)/2}(k s)` (the generalized formula).
    Sinh { k: f64 },
    /// `b_{k3}(s)^{(n-m)/2}` (the abstract form; `k3 = 0` gives the
    /// classical `s^{(n-m)/2}`).
    BFunction { k3: f64 },
    /// `e^{-K (n-m) s / 2} sinh^{(n-m)/2}(k s)` (the Hessian-shifted form).
    Weighted { k: f64, big_k: f64 },
}

impl QuantityVariant {
    /// Prefactor at time-to-horizon `s = T - t`.
    pub fn prefactor(&self, s: f64, codim: usize) -> Result<f64, ComparisonError> {
        let half = codim as f64 / 2.0;
        Ok(match *self {
            QuantityVariant::Sinh { k } => (k * s).sinh().powf(half),
            QuantityVariant::BFunction { k3 } => b_comparison(k3, s)?.powf(half),
            QuantityVariant::Weighted { k, big_k } => {
                (-big_k * codim as f64 * s / 2.0).exp() * (k * s).sinh().powf(half)
            }
        })
    }
}

fn curve_point(p: &[f64; 2]) -> Point {
    [p[0], p[1], 0.0]
}

fn sample_on_curve(field: &ScalarField, curve: &CurveState) -> Result<Vec<f64>, FlowError> {
    curve
        .points
        .iter()
        .map(|p| field.try_sample(&curve_point(p)).ok_or(FlowError::CurveLeftCore))
        .collect()
}

/// The monotone quantity: prefactor times the line integral of the
/// (bilinearly interpolated) ambient density over the polyline.
pub fn huisken_quantity(
    curve: &CurveState,
    rho: &ScalarField,
    variant: QuantityVariant,
    time_to_horizon: f64,
) -> Result<f64, FlowError> {
    let codim = rho.grid().dim() - 1;
    let values = sample_on_curve(rho, curve)?;
    if values.iter().any(|&v| v <= 0.0) {
        return Err(FlowError::NonPositiveDensity);
    }
    let geo = curve.geometry();
    let integral: f64 = values.iter().zip(&geo.weights).map(|(v, w)| v * w).sum();
    Ok(variant.prefactor(time_to_horizon, codim)? * integral)
}

/// The dissipation integral
/// `integral of rho (tr_perp(hess U)/2 + |grad_perp rho / rho - H|^2) ds`;
/// for plane curves the normal trace is `<hess U nu, nu>` and the squared
/// term is `(<grad rho, nu>/rho + kappa)^2`.
pub fn dissipation_integrand(
    curve: &CurveState,
    rho: &ScalarField,
    u: &PotentialSpec,
) -> Result<f64, FlowError> {
    let values = sample_on_curve(rho, curve)?;
    if values.iter().any(|&v| v <= 0.0) {
        return Err(FlowError::NonPositiveDensity);
    }
    let grad = rho.gradient();
    let geo = curve.geometry();
    let mut acc = 0.0;
    for (i, p) in curve.points.iter().enumerate() {
        let x = curve_point(p);
        let g = grad.try_sample(&x).ok_or(FlowError::CurveLeftCore)?;
        let nu = geo.normals[i];
        let nu3 = [nu[0], nu[1], 0.0];
        let hess_nu = u.hess_apply(&x, &nu3);
        let normal_trace = hess_nu[0] * nu[0] + hess_nu[1] * nu[1];
        let radial = (g[0] * nu[0] + g[1] * nu[1]) / values[i] + geo.curvatures[i];
        acc += values[i] * (0.5 * normal_trace + radial * radial) * geo.weights[i];
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct FlowRunConfig {
    /// Curve time step; clamped to the curvature CFL each step.
    pub dt: f64,
    /// Flow times at which the quantity and dissipation are audited.
    pub audit_times: Vec<f64>,
    /// Horizon `T` pairing flow time `t` with ambient density at `T - t`.
    pub horizon: f64,
    pub variant: QuantityVariant,
    /// Tangential redistribution cadence in steps.
    pub redistribute_every: usize,
}

#[derive(Debug, Clone)]
pub struct FlowSeries {
    pub times: Vec<f64>,
    pub quantity: Vec<f64>,
    /// The raw integrand of the general monotonicity formula,
    /// `integral of rho (tr_perp(hess U)/2 + |...|^2) ds`.
    pub dissipation: Vec<f64>,
    /// Bare line integral `integral of rho ds`, needed to shift the
    /// dissipation when balancing the Hessian-weighted variant.
    pub density_integral: Vec<f64>,
    pub weighted_length: Vec<f64>,
    pub curves: Vec<CurveState>,
}

impl FlowSeries {
    /// Finite-difference slopes of the quantity between audits.
    pub fn slopes(&self) -> Vec<f64> {
        self.times
            .windows(2)
            .zip(self.quantity.windows(2))
            .map(|(t, q)| (q[1] - q[0]) / (t[1] - t[0]))
            .collect()
    }
}

/// March the curve and audit the monotone quantity against the ambient
/// trajectory, which must hold snapshots at `horizon - t` for every audit
/// time `t`.
pub fn run_flow(
    curve0: &CurveState,
    u: &PotentialSpec,
    ambient: &Trajectory,
    cfg: &FlowRunConfig,
) -> Result<FlowSeries, FlowError> {
    let mut curve = curve0.clone();
    let initial_element = curve.total_length() / curve.node_count() as f64;
    let mut series = FlowSeries {
        times: Vec::new(),
        quantity: Vec::new(),
        dissipation: Vec::new(),
        density_integral: Vec::new(),
        weighted_length: Vec::new(),
        curves: Vec::new(),
    };
    let mut t = cfg.audit_times[0];
    let mut steps = 0usize;
    for (j, &target) in cfg.audit_times.iter().enumerate() {
        while t < target - 1e-14 {
            let geo_limit = {
                let geo = curve.geometry();
                0.4 * geo.min_element * geo.min_element / 2.0
            };
            let dt = cfg.dt.min(0.9 * geo_limit).min(target - t);
            curve = flow_step(&curve, u, dt)?;
            steps += 1;
            if steps % cfg.redistribute_every == 0 {
                curve = curve.resample_uniform();
            }
            let length = curve.total_length();
            let limit = 10.0 * initial_element;
            if length < limit {
                return Err(FlowError::Collapsed { length, limit });
            }
            t += dt;
        }
        t = target;
        if !curve.is_simple() {
            return Err(FlowError::SelfIntersection);
        }
        let s = cfg.horizon - target;
        let rho = ambient
            .snapshot(s)
            .ok_or(FlowError::MissingSnapshot(s))?;
        series.times.push(target);
        series.quantity.push(huisken_quantity(&curve, rho, cfg.variant, s)?);
        series.dissipation.push(dissipation_integrand(&curve, rho, u)?);
        let geo = curve.geometry();
        let density: f64 = sample_on_curve(rho, &curve)?
            .iter()
            .zip(&geo.weights)
            .map(|(v, w)| v * w)
            .sum();
        series.density_integral.push(density);
        series.weighted_length.push(curve.weighted_length(u));
        series.curves.push(curve.clone());
        let _ = j;
    }
    Ok(series)
}

#[derive(Debug, Clone)]
pub struct VolumeAuditReport {
    /// Times at which the normalized volume was recorded (every second
    /// snapshot: midpoints feed the RK2 stage).
    pub times: Vec<f64>,
    /// Per-seed normalized sequences, each starting at 1.
    pub normalized: Vec<Vec<f64>>,
    /// Largest per-step increase across seeds (negative when strictly
    /// decreasing).
    pub max_step_increase: f64,
    /// Largest per-step |change| across seeds.
    pub max_step_change: f64,
}

/// Advect seed points along `grad h` with `h = -2 log rho - U1`, accumulate
/// the volume factor via `d/dt log det = lap h`, and normalize by
/// `b_{k3/n}(t)^ن`. Snapshots must be uniformly spaced; odd indices serve as
/// RK2 midpoints.
pub fn volume_audit(
    traj: &Trajectory,
    seeds: &[Point],
    k3: f64,
) -> Result<VolumeAuditReport, FlowError> {
    let (u1, _) = match &traj.equation {
        crate::pde::EquationKind::Linear { u1, u2 } => (u1, u2),
        _ => panic!("volume audit needs a linear-equation trajectory"),
    };
    let grid = traj.grid().clone();
    let n = grid.dim();
    let times = traj.times();
    assert!(times.len() >= 3 && times.len() % 2 == 1, "need an odd number of snapshots");

    // Precompute h, grad h, lap h per snapshot.
    let mut grads = Vec::with_capacity(times.len());
    let mut laps = Vec::with_capacity(times.len());
    for f in traj.fields() {
        let h = ScalarField::new(
            grid.clone(),
            (0..grid.node_count())
                .map(|i| -2.0 * f.values()[i].ln() - u1.eval(&grid.position(i)))
                .collect(),
        )
        .expect("finite log-density");
        grads.push(h.gradient());
        laps.push(h.laplacian());
    }

    let normalizer = |t: f64| -> Result<f64, FlowError> {
        Ok(b_comparison(k3 / n as f64, t)?.powi(-(n as i32)))
    };

    let mut normalized = vec![Vec::new(); seeds.len()];
    let mut recorded_times = Vec::new();
    for (s_idx, seed) in seeds.iter().enumerate() {
        let mut x = *seed;
        let mut logdet = 0.0f64;
        let mut reference = None;
        for j in (0..times.len()).step_by(2) {
            let scale = normalizer(times[j])? * logdet.exp();
            let value = match reference {
                None => {
                    reference = Some(scale);
                    1.0
                }
                Some(r) => scale / r,
            };
            normalized[s_idx].push(value);
            if s_idx == 0 {
                recorded_times.push(times[j]);
            }
            if j + 2 >= times.len() {
                break;
            }
            // RK2 midpoint step from snapshot j to j+2 through j+1.
            let dt = times[j + 2] - times[j];
            let v0 = grads[j].try_sample(&x).ok_or(FlowError::CurveLeftCore)?;
            let mut mid = x;
            for c in 0..n {
                mid[c] += 0.5 * dt * v0[c];
            }
            let vm = grads[j + 1].try_sample(&mid).ok_or(FlowError::CurveLeftCore)?;
            let div_m = laps[j + 1].try_sample(&mid).ok_or(FlowError::CurveLeftCore)?;
            for c in 0..n {
                x[c] += dt * vm[c];
            }
            logdet += dt * div_m;
        }
    }

    let mut max_inc = f64::NEG_INFINITY;
    let mut max_change = 0.0f64;
    for seq in &normalized {
        for w in seq.windows(2) {
            max_inc = max_inc.max(w[1] - w[0]);
            max_change = max_change.max((w[1] - w[0]).abs());
        }
    }
    Ok(VolumeAuditReport {
        times: recorded_times,
        normalized,
        max_step_increase: max_inc,
        max_step_change: max_change,
    })
}

/// Smallest eigenvalue of `hess U` over a grid (the `K` of the weighted
/// variant's hypothesis `hess U >= K I`).
pub fn hessian_lower_bound(u: &PotentialSpec, grid: &GridSpec) -> f64 {
    let hess = u.sample_hessian(grid);
    let margin = if grid.topology() == Topology::Box { 2 } else { 0 };
    (0..grid.node_count())
        .filter(|&i| grid.is_interior(i, margin))
        .map(|i| hess.eigen_range(i).0)
        .fold(f64::INFINITY, f64::min)
}
