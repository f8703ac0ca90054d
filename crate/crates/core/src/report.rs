//! Uniform verdict carrier for every inequality check: observed-vs-bound
//! margins, oriented so that `margin >= 0` means the estimate holds.

use crate::fields::ScalarField;
use crate::grid::GridSpec;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize)]
pub struct PairMargin {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub min_margin: f64,
    /// Coordinates of the worst node or pair endpoint.
    pub argmin: Vec<f64>,
    pub pass: bool,
    /// Nodes dropped from the verdict (boundary layers, support margins,
    /// optimizer flags).
    pub excluded: usize,
    #[serde(skip)]
    pub margin_field: Option<ScalarField>,
    #[serde(skip)]
    pub excluded_mask: Option<Vec<bool>>,
    pub pair_margins: Option<Vec<PairMargin>>,
}

impl EstimateReport {
    /// Build a field-margin report. `excluded[i] == true` drops node `i`
    /// from the min.
    pub fn from_field(
        name: &str,
        params: BTreeMap<String, f64>,
        tolerance: f64,
        margin: ScalarField,
        excluded: Vec<bool>,
    ) -> Self {
        assert_eq!(excluded.len(), margin.grid().node_count());
        let mut min_margin = f64::INFINITY;
        let mut argmin_node = None;
        let mut excluded_count = 0usize;
        for (i, &m) in margin.values().iter().enumerate() {
            if excluded[i] {
                excluded_count += 1;
                continue;
            }
            if m < min_margin {
                min_margin = m;
                argmin_node = Some(i);
            }
        }
        let argmin = argmin_node
            .map(|i| position_vec(margin.grid(), i))
            .unwrap_or_default();
        Self {
            name: name.to_string(),
            params,
            tolerance,
            min_margin,
            argmin,
            pass: min_margin >= -tolerance,
            excluded: excluded_count,
            margin_field: Some(margin),
            excluded_mask: Some(excluded),
            pair_margins: None,
        }
    }

    pub fn from_pairs(
        name: &str,
        params: BTreeMap<String, f64>,
        tolerance: f64,
        pairs: Vec<PairMargin>,
    ) -> Self {
        let mut min_margin = f64::INFINITY;
        let mut argmin = Vec::new();
        for p in &pairs {
            if p.margin < min_margin {
                min_margin = p.margin;
                argmin = p.y.clone();
            }
        }
        Self {
            name: name.to_string(),
            params,
            tolerance,
            min_margin,
            argmin,
            pass: min_margin >= -tolerance,
            excluded: 0,
            margin_field: None,
            excluded_mask: None,
            pair_margins: Some(pairs),
        }
    }
}

fn position_vec(grid: &GridSpec, node: usize) -> Vec<f64> {
    grid.position(node)[..grid.dim()].to_vec()
}

/// Grow a node mask by `radius` layers along every axis (periodic wrap on
/// torus grids), so stencil outputs polluted by a flagged node get flagged
/// too.
pub fn dilate_mask(grid: &GridSpec, mask: &[bool], radius: usize) -> Vec<bool> {
    let mut current = mask.to_vec();
    for _ in 0..radius {
        let mut next = current.clone();
        for i in 0..current.len() {
            if next[i] {
                continue;
            }
            let multi = grid.multi_index(i);
            'axes: for axis in 0..grid.dim() {
                let n = grid.count(axis);
                for step in [-1isize, 1] {
                    let j = multi[axis] as isize + step;
                    let j = match grid.topology() {
                        crate::grid::Topology::Periodic => j.rem_euclid(n as isize) as usize,
                        crate::grid::Topology::Box => {
                            if j < 0 || j >= n as isize {
                                continue;
                            }
                            j as usize
                        }
                    };
                    let mut m = multi;
                    m[axis] = j;
                    if current[grid.flat_index(m)] {
                        next[i] = true;
                        break 'axes;
                    }
                }
            }
        }
        current = next;
    }
    current
}
