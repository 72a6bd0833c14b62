//! Penalized boundary functionals on a box `S`.
//!
//! A point may be sent to the boundary instead of being matched, at price
//! `q (d(x, ∂S)^p + eps^p)`. For general graph families the exterior of `S`
//! is represented by interchangeable virtual vertices: edges between two
//! exterior vertices are free and an edge between an interior point and the
//! exterior costs the interior point's boundary price.

use crate::assignment::{solve_rows_with_private, sum_in_order, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{boundary_dist_unchecked, BoxRegion, PointCloud};
use crate::graph::{family_min_edges, GraphFamily};
use crate::matching::{CostParams, SolveResult};

fn check_inside(cloud: &PointCloud, s: &BoxRegion) -> Result<()> {
    if cloud.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: cloud.dim(),
        });
    }
    if cloud.iter().any(|p| !s.contains_closed(p)) {
        return Err(Error::OutsideRegion);
    }
    Ok(())
}

/// Boundary prices `q (d(x, ∂S)^p + eps^p)` of every point.
pub fn boundary_costs(cloud: &PointCloud, params: &CostParams, s: &BoxRegion) -> Result<Vec<f64>> {
    check_inside(cloud, s)?;
    Ok(cloud
        .iter()
        .map(|p| params.boundary_cost(boundary_dist_unchecked(p, s)))
        .collect())
}

/// Square `(m+n) x (m+n)` assignment matrix whose optimum is the boundary
/// matching cost. Rows are `X` then `n` dummies, columns are `Y` then `m`
/// dummies.
pub fn boundary_matching_reduction(
    x: &PointCloud,
    y: &PointCloud,
    params: &CostParams,
    s: &BoxRegion,
) -> Result<CostMatrix> {
    x.check_dim(y)?;
    let bx = boundary_costs(x, params, s)?;
    let by = boundary_costs(y, params, s)?;
    let (m, n) = (x.len(), y.len());
    CostMatrix::from_fn(m + n, m + n, |i, j| match (i < m, j < n) {
        (true, true) => params.edge_cost(x.get(i), y.get(j)),
        (true, false) => bx[i],
        (false, true) => by[j],
        (false, false) => 0.0,
    })
}

/// `L_{∂S,eps}(X, Y)`: every point is either matched or sent to the boundary.
pub fn boundary_matching_cost(
    x: &PointCloud,
    y: &PointCloud,
    params: &CostParams,
    s: &BoxRegion,
) -> Result<SolveResult> {
    x.check_dim(y)?;
    let bx = boundary_costs(x, params, s)?;
    let by = boundary_costs(y, params, s)?;
    // Matching X_i to Y_j saves Y_j's boundary price; X_i's private column
    // is its own boundary price.
    let reduced = CostMatrix::from_fn(x.len(), y.len(), |i, j| params.edge_cost(x.get(i), y.get(j)) - by[j])?;
    let assigned = solve_rows_with_private(&reduced, &bx)?;
    let mut res = SolveResult::empty();
    let mut used_y = vec![false; y.len()];
    for (i, a) in assigned.into_iter().enumerate() {
        match a {
            Some(j) => {
                used_y[j] = true;
                res.matched.push((i, j));
            }
            None => res.boundary_x.push(i),
        }
    }
    res.boundary_y = (0..y.len()).filter(|&j| !used_y[j]).collect();
    res.cost = certificate_cost(&res, x, y, params, &bx, &by);
    Ok(res)
}

fn certificate_cost(res: &SolveResult, x: &PointCloud, y: &PointCloud, params: &CostParams, bx: &[f64], by: &[f64]) -> f64 {
    let edges = res.matched.iter().map(|&(i, j)| params.edge_cost(x.get(i), y.get(j)));
    let bxs = res.boundary_x.iter().map(|&i| bx[i]);
    let bys = res.boundary_y.iter().map(|&j| by[j]);
    sum_in_order(edges.chain(bxs).chain(bys))
}

/// Default bound on the number of exterior vertices per side.
pub fn default_aug_cap(m: usize, n: usize, family: &GraphFamily) -> usize {
    2 * (m + n) + family.kappa0()
}

/// Generic boundary functional: minimum over `k_A`, `k_B <= aug_cap` exterior
/// vertices with `|X| + k_A = |Y| + k_B >= kappa0` of the family cost on the
/// augmented sets. `boundary_x` and `boundary_y` hold one entry per edge to
/// the exterior. The result is flagged exact when
/// `aug_cap >= |X| + |Y| + kappa0`.
pub fn boundary_generic_cost(
    x: &PointCloud,
    y: &PointCloud,
    family: &GraphFamily,
    params: &CostParams,
    s: &BoxRegion,
    aug_cap: usize,
) -> Result<SolveResult> {
    x.check_dim(y)?;
    if aug_cap < family.kappa0() {
        return Err(Error::InvalidParameter(format!(
            "augmentation cap {aug_cap} is below kappa0 = {}",
            family.kappa0()
        )));
    }
    let bx = boundary_costs(x, params, s)?;
    let by = boundary_costs(y, params, s)?;
    let (m, n) = (x.len(), y.len());

    let mut best: Option<(f64, Vec<(usize, usize)>, usize)> = None;
    for ka in 0..=aug_cap {
        let size = m + ka;
        let Some(kb) = size.checked_sub(n) else { continue };
        if kb > aug_cap || size < family.kappa0() {
            continue;
        }
        let costs = CostMatrix::from_fn(size, size, |i, j| match (i < m, j < n) {
            (true, true) => params.edge_cost(x.get(i), y.get(j)),
            (true, false) => bx[i],
            (false, true) => by[j],
            (false, false) => 0.0,
        })?;
        let edges = family_min_edges(family, &costs)?;
        let value = sum_in_order(edges.iter().map(|&(i, j)| costs.get(i, j)));
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, edges, size));
        }
    }
    let Some((_, edges, _)) = best else {
        return Err(Error::InvalidParameter(format!(
            "augmentation cap {aug_cap} admits no sizes with |X|+k_A = |Y|+k_B >= {} for |X|={m}, |Y|={n}",
            family.kappa0()
        )));
    };

    let mut res = SolveResult::empty();
    let mut touched_x = vec![false; m];
    let mut touched_y = vec![false; n];
    for (i, j) in edges {
        match (i < m, j < n) {
            (true, true) => {
                touched_x[i] = true;
                touched_y[j] = true;
                res.matched.push((i, j));
            }
            (true, false) => {
                touched_x[i] = true;
                res.boundary_x.push(i);
            }
            (false, true) => {
                touched_y[j] = true;
                res.boundary_y.push(j);
            }
            (false, false) => {}
        }
    }
    res.matched.sort_unstable();
    res.boundary_x.sort_unstable();
    res.boundary_y.sort_unstable();
    res.unmatched_x = (0..m).filter(|&i| !touched_x[i]).collect();
    res.unmatched_y = (0..n).filter(|&j| !touched_y[j]).collect();
    res.cost = certificate_cost(&res, x, y, params, &bx, &by);
    res.exact = aug_cap >= m + n + family.kappa0();
    Ok(res)
}
