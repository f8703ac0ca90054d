//! Independent oracles for the path-space minimizer: a dynamic-programming
//! value iteration on a coarse space-time lattice, and the Hamilton-Jacobi
//! residual of numerically computed cost fields.

use harnack_core::action::{cost_field, hj_residual, minimize_cost, CostFunctional};
use harnack_core::closed_forms::quadratic_cost;
use harnack_core::grid::Point;
use harnack_core::{GridSpec, MinimizeOptions, PotentialSpec, Topology};

/// Value iteration for `min integral |v|^2/2 + V` on a box lattice with
/// per-step quadratic refinement of the argmin. Stays independent of the
/// descent optimizer: different discretization, different search.
struct DpOracle {
    lo: [f64; 2],
    delta: f64,
    nodes: usize,
    dt: f64,
    v_values: Vec<f64>,
}

impl DpOracle {
    fn new(center: [f64; 2], half_width: f64, nodes: usize, steps: usize, t: f64, v: &dyn Fn(f64, f64) -> f64) -> Self {
        let lo = [center[0] - half_width, center[1] - half_width];
        let delta = 2.0 * half_width / (nodes - 1) as f64;
        let mut v_values = vec![0.0; nodes * nodes];
        for j in 0..nodes {
            for i in 0..nodes {
                v_values[j * nodes + i] = v(lo[0] + i as f64 * delta, lo[1] + j as f64 * delta);
            }
        }
        Self { lo, delta, nodes, dt: t / steps as f64, v_values }
    }

    fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (self.lo[0] + i as f64 * self.delta, self.lo[1] + j as f64 * self.delta)
    }

    /// Biquadratic (3x3 Lagrange) interpolation: smooth enough inside each
    /// cell for the quadratic argmin refinement to be meaningful.
    fn interp(&self, grid: &[f64], x: f64, y: f64) -> f64 {
        let n = self.nodes;
        let weights = |coord: f64, lo: f64| -> (usize, [f64; 3]) {
            let u = ((coord - lo) / self.delta).clamp(0.0, (n - 1) as f64);
            let ic = (u.round() as usize).clamp(1, n - 2);
            let xi = u - ic as f64;
            (ic, [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)])
        };
        let (ic, wx) = weights(x, self.lo[0]);
        let (jc, wy) = weights(y, self.lo[1]);
        let mut acc = 0.0;
        for (dj, wj) in wy.iter().enumerate() {
            for (di, wi) in wx.iter().enumerate() {
                acc += wi * wj * grid[(jc + dj - 1) * n + (ic + di - 1)];
            }
        }
        acc
    }

    fn v_at(&self, x: f64, y: f64) -> f64 {
        self.interp(&self.v_values, x, y)
    }

    fn solve(&self, start: [f64; 2], target: [f64; 2], steps: usize) -> f64 {
        let n = self.nodes;
        let step_cost = |from: (f64, f64), to: (f64, f64)| {
            let dx = to.0 - from.0;
            let dy = to.1 - from.1;
            self.dt
                * (0.5 * (dx * dx + dy * dy) / (self.dt * self.dt)
                    + 0.5 * (self.v_at(from.0, from.1) + self.v_at(to.0, to.1)))
        };
        // First step from the start point.
        let mut value = vec![f64::INFINITY; n * n];
        for j in 0..n {
            for i in 0..n {
                value[j * n + i] = step_cost((start[0], start[1]), self.coords(i, j));
            }
        }
        let window = ((5.0 * self.dt / self.delta).ceil() as isize) + 1;
        for _ in 1..steps {
            let mut next = vec![f64::INFINITY; n * n];
            for j in 0..n {
                for i in 0..n {
                    let z = self.coords(i, j);
                    let phi = |y: (f64, f64)| self.interp(&value, y.0, y.1) + step_cost(y, z);
                    // Lattice search in the velocity window.
                    let mut best = f64::INFINITY;
                    let mut best_y = z;
                    for dj in -window..=window {
                        for di in -window..=window {
                            let ii = i as isize + di;
                            let jj = j as isize + dj;
                            if ii < 0 || jj < 0 || ii >= n as isize || jj >= n as isize {
                                continue;
                            }
                            let y = self.coords(ii as usize, jj as usize);
                            let c = phi(y);
                            if c < best {
                                best = c;
                                best_y = y;
                            }
                        }
                    }
                    // Per-axis quadratic refinement around the lattice argmin.
                    let mut refined = best_y;
                    for axis in 0..2 {
                        let mut plus = refined;
                        let mut minus = refined;
                        if axis == 0 {
                            plus.0 += self.delta;
                            minus.0 -= self.delta;
                        } else {
                            plus.1 += self.delta;
                            minus.1 -= self.delta;
                        }
                        let (f0, fp, fm) = (phi(refined), phi(plus), phi(minus));
                        let denom = fp - 2.0 * f0 + fm;
                        if denom > 1e-14 {
                            let shift = (0.5 * (fm - fp) / denom).clamp(-1.0, 1.0) * self.delta;
                            if axis == 0 {
                                refined.0 += shift;
                            } else {
                                refined.1 += shift;
                            }
                        }
                    }
                    next[j * n + i] = best.min(phi(refined));
                }
            }
            value = next;
        }
        self.interp(&value, target[0], target[1])
    }
}

#[test]
fn dp_oracle_reproduces_closed_form_costs() {
    // Free motion: c = |y - x|^2 / (2t).
    let t = 1.0;
    let free = DpOracle::new([0.5, 0.0], 1.6, 65, 32, t, &|_, _| 0.0);
    let y = [1.0, 0.2];
    let dp = free.solve([0.0, 0.0], y, 32);
    let exact = (y[0] * y[0] + y[1] * y[1]) / (2.0 * t);
    assert!((dp - exact).abs() < 5e-4, "free DP {dp} vs {exact}");

    // Quadratic potential: closed-form cost.
    let k = 1.0f64;
    let quad = DpOracle::new([0.5, 0.0], 1.6, 65, 32, t, &|x, y| {
        -2.0 * k + 0.5 * k * k * (x * x + y * y)
    });
    let dp = quad.solve([0.0, 0.0], [1.0, 0.0], 32);
    let exact = quadratic_cost(2, k, t, &[1.0, 0.0, 0.0]);
    assert!((dp - exact).abs() < 1e-3, "quadratic DP {dp} vs {exact}");
}

#[test]
fn bump_barrier_minimizer_agrees_with_dp_oracle() {
    // A positive barrier between the endpoints; the descent path detours and
    // its value must agree with the lattice value iteration.
    let t = 1.0;
    let (amp, cx, cy, w) = (2.0, 0.5, 0.05, 0.3);
    let bump = move |x: f64, y: f64| {
        amp * (-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2.0 * w * w)).exp()
    };
    // V = -2 U2 with U2 = -bump/2.
    let u2 = PotentialSpec::GaussianBump {
        dim: 2,
        amplitude: -amp / 2.0,
        center: [cx, cy, 0.0],
        width: w,
    };
    let cost = CostFunctional::kinetic_plus_potential(PotentialSpec::zero(2), u2);
    let y = [1.0, 0.0, 0.0];
    let r = minimize_cost(&[0.0; 3], &y, 0.0, t, &cost, &MinimizeOptions::default());
    assert!(r.converged);

    let dp = DpOracle::new([0.5, 0.0], 1.6, 97, 32, t, &bump).solve([0.0, 0.0], [1.0, 0.0], 32);
    assert!(
        (r.value - dp).abs() < 1e-3,
        "optimizer {} vs DP oracle {dp}",
        r.value
    );
}

#[test]
fn hj_residual_of_solved_drift_cost_fields() {
    // Drift-form cost with U1 = 0, U2 = -k^2|x|^2/2 solves the
    // Hamilton-Jacobi equation; the residual of three numerically minimized
    // cost fields must be small at the middle time.
    let k = 1.0f64;
    let u1 = PotentialSpec::zero(2);
    let u2 = PotentialSpec::quadratic(2, -k * k, [0.0; 3], 0.0);
    let cost = CostFunctional::drift_form(u1.clone(), u2.clone());
    let grid = GridSpec::cube(2, 3.0, 33, Topology::Box).unwrap();
    let dt = 5e-3;
    let levels: Vec<(f64, harnack_core::ScalarField)> = [1.0 - dt, 1.0, 1.0 + dt]
        .iter()
        .map(|&t| {
            let f = cost_field(&[0.0; 3], t, &cost, &grid, None, &MinimizeOptions::default());
            assert!(f.converged.iter().all(|&c| c));
            (t, f.values)
        })
        .collect();
    let (_, res) = hj_residual(&levels, &u1, &u2).unwrap();
    let mut worst = 0.0f64;
    for i in 0..grid.node_count() {
        if grid.is_interior(i, 2) {
            worst = worst.max(res.values()[i].abs());
        }
    }
    assert!(worst <= 5e-3, "drift HJ residual {worst}");
}

#[test]
fn cost_field_gradient_matches_terminal_velocity() {
    // Transversality: grad_y c equals the minimizer's terminal velocity.
    let k = 1.0f64;
    let cost = CostFunctional::kinetic_plus_potential(
        PotentialSpec::sharp_drift(2, k),
        PotentialSpec::zero(2),
    );
    let t = 1.0;
    let grid = GridSpec::cube(2, 3.0, 17, Topology::Box).unwrap();
    let field = cost_field(&[0.0; 3], t, &cost, &grid, None, &MinimizeOptions::default());
    let grad = field.values.gradient();
    let mut worst = 0.0f64;
    for i in 0..grid.node_count() {
        if !grid.is_interior(i, 1) {
            continue;
        }
        let y: Point = grid.position(i);
        let r = minimize_cost(&[0.0; 3], &y, 0.0, t, &cost, &MinimizeOptions::default());
        let v = r.path.terminal_velocity();
        let g = grad.at(i);
        for c in 0..2 {
            worst = worst.max((g[c] - v[c]).abs());
        }
    }
    assert!(worst <= 1e-3, "transversality gap {worst}");
}
