//! Grid-sampled scalar, vector, and symmetric-matrix fields with
//! second-order finite-difference operators.
//!
//! Interior nodes use central stencils. Periodic axes wrap. Box faces use
//! one-sided second-order stencils, so quadratics are differentiated exactly
//! everywhere. The Hessian diagonal reuses the same per-axis second-difference
//! kernel as the Laplacian, which makes `trace(hessian) == laplacian` hold to
//! round-off by construction.

use crate::grid::{dot, GridSpec, Point, Topology, MAX_DIM};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("expected {expected} values for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.node_count() {
            return Err(FieldError::LengthMismatch { expected: grid.node_count(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(&grid.position(i))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.node_count()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    /// First derivative along one axis, as a bare value vector.
    fn d1_axis(&self, axis: usize) -> Vec<f64> {
        derive_axis(&self.grid, &self.values, axis, Kernel::First)
    }

    /// Second derivative along one axis.
    fn d2_axis(&self, axis: usize) -> Vec<f64> {
        derive_axis(&self.grid, &self.values, axis, Kernel::Second)
    }

    pub fn gradient(&self) -> VectorField {
        let d = self.grid.dim();
        let n = self.grid.node_count();
        let mut values = vec![0.0; n * d];
        for axis in 0..d {
            let da = self.d1_axis(axis);
            for i in 0..n {
                values[i * d + axis] = da[i];
            }
        }
        VectorField { grid: self.grid.clone(), values }
    }

    pub fn laplacian(&self) -> ScalarField {
        let n = self.grid.node_count();
        let mut values = vec![0.0; n];
        for axis in 0..self.grid.dim() {
            let da = self.d2_axis(axis);
            for i in 0..n {
                values[i] += da[i];
            }
        }
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn hessian(&self) -> SymmetricMatrixField {
        let d = self.grid.dim();
        let n = self.grid.node_count();
        let tri = tri_len(d);
        let mut values = vec![0.0; n * tri];
        for a in 0..d {
            let daa = self.d2_axis(a);
            let slot = tri_index(d, a, a);
            for i in 0..n {
                values[i * tri + slot] = daa[i];
            }
            for b in (a + 1)..d {
                let da = self.d1_axis(a);
                let dab = derive_axis(&self.grid, &da, b, Kernel::First);
                let slot = tri_index(d, a, b);
                for i in 0..n {
                    values[i * tri + slot] = dab[i];
                }
            }
        }
        SymmetricMatrixField { grid: self.grid.clone(), values }
    }

    /// Integral over the domain: node sum times cell volume on periodic
    /// grids, composite trapezoid on box grids. Kahan-compensated and
    /// sequential so the result is deterministic.
    pub fn integrate(&self) -> f64 {
        let g = &self.grid;
        let cell = g.cell_volume();
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let w = match g.topology() {
                Topology::Periodic => 1.0,
                Topology::Box => {
                    let multi = g.multi_index(i);
                    let mut w = 1.0;
                    for axis in 0..g.dim() {
                        if multi[axis] == 0 || multi[axis] + 1 == g.count(axis) {
                            w *= 0.5;
                        }
                    }
                    w
                }
            };
            let term = v * w * cell;
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// Multilinear interpolation; panics outside a box domain.
    pub fn sample(&self, p: &Point) -> f64 {
        self.try_sample(p).expect("sample point outside the grid domain")
    }

    pub fn try_sample(&self, p: &Point) -> Option<f64> {
        let g = &self.grid;
        let d = g.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for axis in 0..d {
            let (i, u) = g.cell(axis, p[axis])?;
            base[axis] = i;
            frac[axis] = u;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut multi = [0usize; MAX_DIM];
            let mut w = 1.0;
            for axis in 0..d {
                let hi = (corner >> axis) & 1 == 1;
                let n = g.count(axis);
                multi[axis] = if hi { (base[axis] + 1) % n } else { base[axis] };
                w *= if hi { frac[axis] } else { 1.0 - frac[axis] };
            }
            acc += w * self.values[g.flat_index(multi)];
        }
        Some(acc)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    /// Node-major layout: `values[node * dim + component]`.
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, FieldError> {
        let expected = grid.node_count() * grid.dim();
        if values.len() != expected {
            return Err(FieldError::LengthMismatch { expected, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&Point) -> Point) -> Self {
        let d = grid.dim();
        let mut values = vec![0.0; grid.node_count() * d];
        for i in 0..grid.node_count() {
            let v = f(&grid.position(i));
            values[i * d..i * d + d].copy_from_slice(&v[..d]);
        }
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn at(&self, node: usize) -> Point {
        let d = self.grid.dim();
        let mut p = [0.0; MAX_DIM];
        p[..d].copy_from_slice(&self.values[node * d..node * d + d]);
        p
    }

    pub fn component_values(&self, axis: usize) -> Vec<f64> {
        let d = self.grid.dim();
        self.values.iter().skip(axis).step_by(d).copied().collect()
    }

    /// Multilinear interpolation of each component.
    pub fn try_sample(&self, p: &Point) -> Option<Point> {
        let d = self.grid.dim();
        let g = &self.grid;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for axis in 0..d {
            let (i, u) = g.cell(axis, p[axis])?;
            base[axis] = i;
            frac[axis] = u;
        }
        let mut acc = [0.0; MAX_DIM];
        for corner in 0..(1usize << d) {
            let mut multi = [0usize; MAX_DIM];
            let mut w = 1.0;
            for axis in 0..d {
                let hi = (corner >> axis) & 1 == 1;
                let n = g.count(axis);
                multi[axis] = if hi { (base[axis] + 1) % n } else { base[axis] };
                w *= if hi { frac[axis] } else { 1.0 - frac[axis] };
            }
            let node = g.flat_index(multi);
            for c in 0..d {
                acc[c] += w * self.values[node * d + c];
            }
        }
        Some(acc)
    }

    pub fn max_norm(&self) -> f64 {
        let d = self.grid.dim();
        (0..self.grid.node_count())
            .map(|i| dot(&self.at(i), &self.at(i), d).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Symmetric d-by-d matrix per node, upper triangle stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrixField {
    grid: GridSpec,
    values: Vec<f64>,
}

pub fn tri_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Index of entry (a, b), a <= b, in the packed upper triangle.
pub fn tri_index(dim: usize, a: usize, b: usize) -> usize {
    debug_assert!(a <= b && b < dim);
    a * dim - a * (a + 1) / 2 + b
}

impl SymmetricMatrixField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, FieldError> {
        let expected = grid.node_count() * tri_len(grid.dim());
        if values.len() != expected {
            return Err(FieldError::LengthMismatch { expected, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&Point, usize, usize) -> f64) -> Self {
        let d = grid.dim();
        let tri = tri_len(d);
        let mut values = vec![0.0; grid.node_count() * tri];
        for i in 0..grid.node_count() {
            let p = grid.position(i);
            for a in 0..d {
                for b in a..d {
                    values[i * tri + tri_index(d, a, b)] = f(&p, a, b);
                }
            }
        }
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn entry(&self, node: usize, a: usize, b: usize) -> f64 {
        let d = self.grid.dim();
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.values[node * tri_len(d) + tri_index(d, a, b)]
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn trace_field(&self) -> ScalarField {
        let d = self.grid.dim();
        let values = (0..self.grid.node_count())
            .map(|i| (0..d).map(|a| self.entry(i, a, a)).sum())
            .collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    /// Smallest eigenvalue at every node, closed form for d <= 3.
    pub fn min_eigenvalue_field(&self) -> ScalarField {
        self.eigenvalue_field(false)
    }

    /// Largest eigenvalue at every node.
    pub fn max_eigenvalue_field(&self) -> ScalarField {
        self.eigenvalue_field(true)
    }

    fn eigenvalue_field(&self, largest: bool) -> ScalarField {
        let d = self.grid.dim();
        let values = (0..self.grid.node_count())
            .map(|i| {
                let (lo, hi) = self.eigen_range(i);
                if largest {
                    hi
                } else {
                    lo
                }
            })
            .collect();
        let _ = d;
        ScalarField { grid: self.grid.clone(), values }
    }

    /// (smallest, largest) eigenvalue of the matrix at `node`.
    pub fn eigen_range(&self, node: usize) -> (f64, f64) {
        match self.grid.dim() {
            1 => {
                let a = self.entry(node, 0, 0);
                (a, a)
            }
            2 => {
                let a = self.entry(node, 0, 0);
                let b = self.entry(node, 0, 1);
                let c = self.entry(node, 1, 1);
                let mean = 0.5 * (a + c);
                let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                (mean - r, mean + r)
            }
            3 => {
                let a = [
                    [self.entry(node, 0, 0), self.entry(node, 0, 1), self.entry(node, 0, 2)],
                    [self.entry(node, 0, 1), self.entry(node, 1, 1), self.entry(node, 1, 2)],
                    [self.entry(node, 0, 2), self.entry(node, 1, 2), self.entry(node, 2, 2)],
                ];
                sym3_eigen_range(&a)
            }
            _ => unreachable!("grid dimension is validated at construction"),
        }
    }
}

/// Eigenvalue extremes of a symmetric 3x3 matrix by the trigonometric
/// closed form (no iteration).
fn sym3_eigen_range(a: &[[f64; 3]; 3]) -> (f64, f64) {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if p1 == 0.0 {
        let lo = a[0][0].min(a[1][1]).min(a[2][2]);
        let hi = a[0][0].max(a[1][1]).max(a[2][2]);
        return (lo, hi);
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let inv_p = 1.0 / p;
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = inv_p * (a[i][j] - if i == j { q } else { 0.0 });
        }
    }
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    (lo, hi)
}

enum Kernel {
    First,
    Second,
}

/// Apply a one-dimensional derivative kernel along `axis` of a flat value
/// vector laid out on `grid`.
fn derive_axis(grid: &GridSpec, values: &[f64], axis: usize, kernel: Kernel) -> Vec<f64> {
    let n_total = grid.node_count();
    let n = grid.count(axis);
    let stride = grid.stride(axis);
    let h = grid.spacing(axis);
    let mut out = vec![0.0; n_total];
    let periodic = grid.topology() == Topology::Periodic;

    for i in 0..n_total {
        let j = (i / stride) % n;
        let v = |offset: isize| -> f64 {
            let jj = j as isize + offset;
            let jj = if periodic {
                jj.rem_euclid(n as isize) as usize
            } else {
                jj as usize
            };
            values[(i as isize + (jj as isize - j as isize) * stride as isize) as usize]
        };
        out[i] = match kernel {
            Kernel::First => {
                if periodic || (j > 0 && j + 1 < n) {
                    (v(1) - v(-1)) / (2.0 * h)
                } else if j == 0 {
                    (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
                } else {
                    (3.0 * v(0) - 4.0 * v(-1) + v(-2)) / (2.0 * h)
                }
            }
            Kernel::Second => {
                if periodic || (j > 0 && j + 1 < n) {
                    (v(1) - 2.0 * v(0) + v(-1)) / (h * h)
                } else if j == 0 {
                    (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / (h * h)
                } else {
                    (2.0 * v(0) - 5.0 * v(-1) + 4.0 * v(-2) - v(-3)) / (h * h)
                }
            }
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm_sq;
    use std::f64::consts::PI;

    fn box_grid(dim: usize, extent: f64, count: usize) -> GridSpec {
        GridSpec::cube(dim, extent, count, Topology::Box).unwrap()
    }

    fn torus(dim: usize, extent: f64, count: usize) -> GridSpec {
        GridSpec::cube(dim, extent, count, Topology::Periodic).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = torus(2, 1.0, 16);
        let f = ScalarField::constant(&g, 3.25);
        assert_eq!(f.gradient().max_norm(), 0.0);
    }

    #[test]
    fn gradient_exact_on_quadratic() {
        let g = box_grid(2, 4.0, 33);
        let f = ScalarField::from_fn(&g, |p| 0.5 * norm_sq(p, 2));
        let grad = f.gradient();
        for i in 0..g.node_count() {
            let p = g.position(i);
            let v = grad.at(i);
            let tol = if g.is_interior(i, 1) { 1e-12 } else { 1e-8 };
            for c in 0..2 {
                assert!(
                    (v[c] - p[c]).abs() < tol,
                    "node {i} component {c}: {} vs {}",
                    v[c],
                    p[c]
                );
            }
        }
    }

    #[test]
    fn gradient_second_order_on_sine() {
        let l = 2.0;
        let err = |n: usize| {
            let g = torus(1, l, n);
            let f = ScalarField::from_fn(&g, |p| (2.0 * PI * p[0] / l).sin());
            let grad = f.gradient();
            (0..n)
                .map(|i| {
                    let x = g.coord(0, i);
                    (grad.at(i)[0] - (2.0 * PI / l) * (2.0 * PI * x / l).cos()).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 3.5 && ratio < 4.5, "convergence ratio {ratio}");
    }

    #[test]
    fn laplacian_of_quadratic_is_dimension() {
        let g = box_grid(3, 2.0, 9);
        let f = ScalarField::from_fn(&g, |p| 0.5 * norm_sq(p, 3));
        let lap = f.laplacian();
        for i in 0..g.node_count() {
            if g.is_interior(i, 1) {
                assert!((lap.values()[i] - 3.0).abs() < 1e-11);
            }
        }
        let c = ScalarField::constant(&g, 7.0);
        assert_eq!(c.laplacian().max_abs(), 0.0);
    }

    #[test]
    fn laplacian_second_order_on_sine() {
        let l = 3.0;
        let err = |n: usize| {
            let g = torus(1, l, n);
            let f = ScalarField::from_fn(&g, |p| (2.0 * PI * p[0] / l).sin());
            let lap = f.laplacian();
            let w = 2.0 * PI / l;
            (0..n)
                .map(|i| {
                    let x = g.coord(0, i);
                    (lap.values()[i] + w * w * (w * x).sin()).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 3.5 && ratio < 4.5, "convergence ratio {ratio}");
    }

    #[test]
    fn hessian_exact_on_quadratic_and_linear() {
        let g = box_grid(2, 4.0, 17);
        let f = ScalarField::from_fn(&g, |p| norm_sq(p, 2));
        let h = f.hessian();
        for i in 0..g.node_count() {
            if g.is_interior(i, 1) {
                assert!((h.entry(i, 0, 0) - 2.0).abs() < 1e-10);
                assert!((h.entry(i, 1, 1) - 2.0).abs() < 1e-10);
                assert!(h.entry(i, 0, 1).abs() < 1e-10);
            }
        }
        let lin = ScalarField::from_fn(&g, |p| 3.0 * p[0] - 2.0 * p[1] + 1.0);
        let hl = lin.hessian();
        for i in 0..g.node_count() {
            for a in 0..2 {
                for b in a..2 {
                    assert!(hl.entry(i, a, b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hessian_second_order_on_product_sine() {
        let err = |n: usize| {
            let g = torus(2, 2.0 * PI, n);
            let f = ScalarField::from_fn(&g, |p| p[0].sin() * p[1].sin());
            let h = f.hessian();
            let mut worst = 0.0f64;
            for i in 0..g.node_count() {
                let p = g.position(i);
                let dxx = -p[0].sin() * p[1].sin();
                let dxy = p[0].cos() * p[1].cos();
                worst = worst
                    .max((h.entry(i, 0, 0) - dxx).abs())
                    .max((h.entry(i, 0, 1) - dxy).abs());
            }
            worst
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 3.5 && ratio < 4.5, "convergence ratio {ratio}");
    }

    #[test]
    fn integrate_measures_domain_and_kills_modes() {
        let g = torus(2, 1.0, 32);
        assert!((ScalarField::constant(&g, 1.0).integrate() - 1.0).abs() < 1e-14);
        let g1 = torus(1, 1.0, 64);
        let s = ScalarField::from_fn(&g1, |p| (2.0 * PI * p[0]).sin());
        assert!(s.integrate().abs() < 1e-12);
    }

    #[test]
    fn integrate_gaussian_box_against_erf() {
        // 8 standard deviations per side; trapezoid should hit 1 to 1e-6.
        let g = box_grid(1, 16.0, 257);
        let f = ScalarField::from_fn(&g, |p| (-0.5 * p[0] * p[0]).exp() / (2.0 * PI).sqrt());
        // erf oracle via its Abramowitz-Stegun series is overkill here: mass
        // over [-8, 8] differs from 1 by less than 1e-15.
        assert!((f.integrate() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn min_eigenvalue_simple_cases() {
        let g = box_grid(2, 1.0, 8);
        let s = SymmetricMatrixField::from_fn(&g, |_, a, b| match (a, b) {
            (0, 0) => 2.0,
            (1, 1) => -1.0,
            _ => 0.0,
        });
        let m = s.min_eigenvalue_field();
        assert!(m.values().iter().all(|&v| (v + 1.0).abs() < 1e-14));

        let c = SymmetricMatrixField::from_fn(&g, |_, a, b| if a == b { 4.5 } else { 0.0 });
        assert!(c.min_eigenvalue_field().values().iter().all(|&v| (v - 4.5).abs() < 1e-14));
        assert!(c.max_eigenvalue_field().values().iter().all(|&v| (v - 4.5).abs() < 1e-14));
    }

    /// Jacobi rotation eigensolver, used only as an independent oracle.
    fn jacobi_eigenvalues(mut a: [[f64; 3]; 3]) -> [f64; 3] {
        for _ in 0..100 {
            let (mut p, mut q, mut off) = (0, 1, 0.0f64);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    if a[i][j].abs() > off {
                        off = a[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
            let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut b = a;
            for k in 0..3 {
                b[p][k] = c * a[p][k] - s * a[q][k];
                b[q][k] = s * a[p][k] + c * a[q][k];
            }
            let mut b2 = b;
            for k in 0..3 {
                b2[k][p] = c * b[k][p] - s * b[k][q];
                b2[k][q] = s * b[k][p] + c * b[k][q];
            }
            a = b2;
        }
        [a[0][0], a[1][1], a[2][2]]
    }

    #[test]
    fn min_eigenvalue_matches_jacobi_oracle() {
        let g = box_grid(3, 1.0, 8);
        // Deterministic pseudo-random entries.
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let e = [next(), next(), next(), next(), next(), next()];
            let m = [
                [e[0], e[1], e[2]],
                [e[1], e[3], e[4]],
                [e[2], e[4], e[5]],
            ];
            let (lo, hi) = {
                let field = SymmetricMatrixField::new(
                    g.clone(),
                    e.iter().cycle().take(g.node_count() * 6).copied().collect(),
                )
                .unwrap();
                field.eigen_range(0)
            };
            let mut eig = jacobi_eigenvalues(m);
            eig.sort_by(f64::total_cmp);
            worst = worst.max((lo - eig[0]).abs()).max((hi - eig[2]).abs());
        }
        assert!(worst < 1e-10, "worst eigenvalue deviation {worst}");
    }

    #[test]
    fn operators_are_linear() {
        let g = box_grid(2, 3.0, 24);
        let f = ScalarField::from_fn(&g, |p| (p[0] + 0.3).sin() * (p[1] * 0.7).cos());
        let h = ScalarField::from_fn(&g, |p| p[0] * p[0] * p[1] - p[1]);
        let (alpha, beta) = (1.7, -0.4);
        let combo = f.zip(&h, |a, b| alpha * a + beta * b).unwrap();
        let lhs = combo.laplacian();
        let rhs = f
            .laplacian()
            .zip(&h.laplacian(), |a, b| alpha * a + beta * b)
            .unwrap();
        let scale = lhs.max_abs().max(1.0);
        let diff = lhs.zip(&rhs, |a, b| a - b).unwrap().max_abs();
        assert!(diff / scale < 1e-13, "linearity violation {diff}");
    }

    #[test]
    fn hessian_trace_equals_laplacian() {
        let g = box_grid(3, 2.0, 10);
        let f = ScalarField::from_fn(&g, |p| (p[0] * 1.3).sin() * p[1] + p[2] * p[2] * p[0]);
        let tr = f.hessian().trace_field();
        let lap = f.laplacian();
        let diff = tr.zip(&lap, |a, b| a - b).unwrap().max_abs();
        assert!(diff < 1e-10, "trace/laplacian mismatch {diff}");
    }

    #[test]
    fn discrete_divergence_theorem_on_torus() {
        let g = torus(2, 1.0, 48);
        let f = ScalarField::from_fn(&g, |p| {
            (2.0 * PI * p[0]).sin() * (4.0 * PI * p[1]).cos() + (2.0 * PI * (p[0] + p[1])).cos()
        });
        assert!(f.laplacian().integrate().abs() < 1e-10);
    }

    #[test]
    fn multilinear_sampling_wraps_and_clamps() {
        let g = torus(1, 1.0, 64);
        let f = ScalarField::from_fn(&g, |p| (2.0 * PI * p[0]).sin());
        let v = f.try_sample(&[1.25, 0.0, 0.0]).unwrap();
        assert!((v - f.try_sample(&[0.25, 0.0, 0.0]).unwrap()).abs() < 1e-14);

        let b = box_grid(1, 2.0, 16);
        let fb = ScalarField::from_fn(&b, |p| p[0]);
        assert!(fb.try_sample(&[5.0, 0.0, 0.0]).is_none());
        assert!((fb.try_sample(&[0.33, 0.0, 0.0]).unwrap() - 0.33).abs() < 1e-12);
    }
}
