//! Dyadic partition bounds: the subadditive upper decomposition, the
//! superadditive boundary lower bound, and the size bound check.

use rayon::prelude::*;
use serde::Serialize;

use crate::assignment::sum_in_order;
use crate::boundary::boundary_matching_cost;
use crate::error::{Error, Result};
use crate::functional::{unknown_constant, Functional};
use crate::geometry::{BoxRegion, DyadicPartition, PointCloud};
use crate::matching::CostParams;
use crate::sampling::{sample_pair, MeasureSpec, SampleConfig};
use crate::stats::{loglog_slope, mean_stderr};

/// Absolute slack used when comparing a value against its bound.
pub const BOUND_TOL: f64 = 1e-9;

/// Slope above which the size bound ratio is considered growing.
pub const SIZE_SLOPE_MAX: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellDiagnostic {
    pub cell: usize,
    pub nx: usize,
    pub ny: usize,
    pub cost: f64,
    /// `C diam(Q)^p (1 + |nx - ny|)` for nonempty cells, 0 otherwise.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionBound {
    pub level: u32,
    pub constant: f64,
    pub root_cost: f64,
    pub bound: f64,
    pub per_cell: Vec<CellDiagnostic>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryBound {
    pub level: u32,
    pub root_cost: f64,
    pub bound: f64,
    pub per_cell: Vec<CellDiagnostic>,
    pub holds: bool,
}

fn split(x: &PointCloud, y: &PointCloud, root: &BoxRegion, level: u32) -> Result<(DyadicPartition, Vec<(PointCloud, PointCloud)>)> {
    x.check_dim(y)?;
    if x.dim() != root.dim() {
        return Err(Error::DimensionMismatch {
            expected: root.dim(),
            found: x.dim(),
        });
    }
    if x.iter().chain(y.iter()).any(|p| !root.contains_closed(p)) {
        return Err(Error::OutsideRegion);
    }
    let part = DyadicPartition::new(root.clone(), level)?;
    let gx = part.assign(x);
    let gy = part.assign(y);
    let pieces = gx
        .iter()
        .zip(&gy)
        .map(|(ix, iy)| (x.select(ix), y.select(iy)))
        .collect();
    Ok((part, pieces))
}

/// Realized right-hand side of the subadditivity inequality over the dyadic
/// cells of `root` at `level`:
/// `sum_P L(X∩P, Y∩P) + C diam(Q)^p sum_{P nonempty} (1 + |X(P) - Y(P)|)`.
///
/// `c` overrides the functional's own constant.
pub fn partition_upper_bound(
    x: &PointCloud,
    y: &PointCloud,
    root: &BoxRegion,
    level: u32,
    functional: &Functional,
    params: &CostParams,
    c: Option<f64>,
) -> Result<PartitionBound> {
    let constant = c
        .or_else(|| functional.subadditivity_constant())
        .ok_or_else(|| unknown_constant(functional))?;
    let (_, pieces) = split(x, y, root, level)?;
    let scale = constant * params.pow(root.diameter());
    let per_cell = pieces
        .par_iter()
        .enumerate()
        .map(|(cell, (px, py))| {
            let cost = functional.cost(px, py, params)?;
            let excess = if px.is_empty() && py.is_empty() {
                0.0
            } else {
                scale * (1.0 + px.len().abs_diff(py.len()) as f64)
            };
            Ok(CellDiagnostic {
                cell,
                nx: px.len(),
                ny: py.len(),
                cost,
                excess,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let root_cost = functional.cost(x, y, params)?;
    let bound = sum_in_order(per_cell.iter().flat_map(|c| [c.cost, c.excess]));
    Ok(PartitionBound {
        level,
        constant,
        root_cost,
        bound,
        holds: root_cost <= bound + BOUND_TOL,
        per_cell,
    })
}

/// `sum_P L_{∂P}(X∩P, Y∩P)` over the dyadic cells, compared against
/// `L_{∂Q}(X, Y)`. Guaranteed only for `eps = 0`: with a positive penalty a
/// crossing edge split into two boundary assignments pays `2 q eps^p` extra.
pub fn boundary_lower_bound(
    x: &PointCloud,
    y: &PointCloud,
    root: &BoxRegion,
    level: u32,
    params: &CostParams,
) -> Result<BoundaryBound> {
    let (part, pieces) = split(x, y, root, level)?;
    let per_cell = pieces
        .par_iter()
        .zip(part.cells())
        .enumerate()
        .map(|(cell, ((px, py), region))| {
            let cost = boundary_matching_cost(px, py, params, region)?.cost;
            Ok(CellDiagnostic {
                cell,
                nx: px.len(),
                ny: py.len(),
                cost,
                excess: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let root_cost = boundary_matching_cost(x, y, params, root)?.cost;
    let bound = sum_in_order(per_cell.iter().map(|c| c.cost));
    Ok(BoundaryBound {
        level,
        root_cost,
        bound,
        holds: root_cost >= bound - BOUND_TOL,
        per_cell,
    })
}

/// Instances drawn at one intensity `nu(Q)`.
#[derive(Clone, Debug)]
pub struct IntensityGroup {
    pub intensity: f64,
    pub instances: Vec<(PointCloud, PointCloud)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeBoundRow {
    pub intensity: f64,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `diam(Q)^p min(nu, nu^(1 - p/d))`.
    pub scale: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeBoundReport {
    pub rows: Vec<SizeBoundRow>,
    pub max_ratio: f64,
    /// Least-squares slope of `ln ratio` against `ln intensity`.
    pub slope: Option<f64>,
    pub bounded: bool,
}

/// Empirical `E L(nu) / [diam(Q)^p min(nu(Q), nu(Q)^(1-p/d))]` per
/// intensity, with a growth check on the log-log slope.
pub fn size_bound_check(
    groups: &[IntensityGroup],
    region: &BoxRegion,
    functional: &Functional,
    params: &CostParams,
) -> Result<SizeBoundReport> {
    let d = region.dim() as f64;
    let diam_p = params.pow(region.diameter());
    let mut rows = Vec::with_capacity(groups.len());
    for g in groups {
        if !(g.intensity > 0.0) || g.instances.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "intensity group {} needs a positive intensity and at least one instance",
                g.intensity
            )));
        }
        let costs = g
            .instances
            .par_iter()
            .map(|(x, y)| functional.cost(x, y, params))
            .collect::<Result<Vec<f64>>>()?;
        let (mean, stderr) = mean_stderr(&costs);
        let nu = g.intensity;
        let scale = diam_p * nu.min(nu.powf(1.0 - params.p() / d));
        rows.push(SizeBoundRow {
            intensity: nu,
            trials: costs.len(),
            mean,
            stderr,
            scale,
            ratio: mean / scale,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let xs: Vec<f64> = rows.iter().map(|r| r.intensity).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let slope = loglog_slope(&xs, &ys);
    let bounded = max_ratio.is_finite() && slope.is_none_or(|s| s <= SIZE_SLOPE_MAX);
    Ok(SizeBoundReport {
        rows,
        max_ratio,
        slope,
        bounded,
    })
}

/// Poissonized uniform samples on `region` at each intensity, then
/// [`size_bound_check`].
pub fn size_bound_experiment(
    region: &BoxRegion,
    functional: &Functional,
    params: &CostParams,
    intensities: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SizeBoundReport> {
    let measure = MeasureSpec::uniform_box(region);
    let groups = intensities
        .iter()
        .enumerate()
        .map(|(k, &nu)| {
            let instances = (0..trials)
                .map(|t| {
                    sample_pair(&SampleConfig {
                        measure: measure.clone(),
                        n: nu,
                        poissonized: true,
                        seed,
                        stream: ((k as u64) << 32) | t as u64,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(IntensityGroup { intensity: nu, instances })
        })
        .collect::<Result<Vec<_>>>()?;
    size_bound_check(&groups, region, functional, params)
}
