//! Power-cost bipartite matching `M_p` and its oracles.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_rows, sum_in_order, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{sq_dist, PointCloud};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest smaller side accepted by [`brute_force_matching`].
pub const BRUTE_FORCE_MAX_SIDE: usize = 8;

/// Exponent `p`, boundary weight `q = min(2^(p-1), 1)` and penalty `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostParams {
    p: f64,
    q: f64,
    eps: f64,
}

impl CostParams {
    pub fn new(p: f64, eps: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParameter(format!("exponent p={p} must be > 0")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("penalty eps={eps} must be >= 0")));
        }
        Ok(CostParams {
            p,
            q: (p - 1.0).exp2().min(1.0),
            eps,
        })
    }

    /// `eps = 0`.
    pub fn with_p(p: f64) -> Result<Self> {
        CostParams::new(p, 0.0)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `|x - y|^p`.
    #[inline]
    pub fn edge_cost(&self, x: &[f64], y: &[f64]) -> f64 {
        self.pow_from_sq(sq_dist(x, y))
    }

    /// `r^p` from `r^2`.
    #[inline]
    pub(crate) fn pow_from_sq(&self, sq: f64) -> f64 {
        if self.p == 2.0 {
            sq
        } else if self.p == 1.0 {
            sq.sqrt()
        } else {
            sq.powf(self.p / 2.0)
        }
    }

    /// `r^p`.
    #[inline]
    pub fn pow(&self, r: f64) -> f64 {
        if self.p == 1.0 {
            r
        } else if self.p == 2.0 {
            r * r
        } else {
            r.powf(self.p)
        }
    }

    /// `q (d^p + eps^p)`, the price of sending a point at distance `d` from
    /// the boundary to the boundary.
    #[inline]
    pub fn boundary_cost(&self, d: f64) -> f64 {
        self.q * (self.pow(d) + self.pow(self.eps))
    }
}

impl<'de> Deserialize<'de> for CostParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            p: f64,
            #[serde(default)]
            eps: f64,
        }
        let r = Repr::deserialize(d)?;
        CostParams::new(r.p, r.eps).map_err(serde::de::Error::custom)
    }
}

/// Solver certificate.
///
/// Every index of `X` appears in exactly one of `matched`, `boundary_x`,
/// `unmatched_x` (likewise for `Y`). For graph families other than matchings
/// `matched` lists the edges of the optimal graph and a vertex may appear in
/// several of them; `boundary_x` then holds one entry per edge to the
/// exterior.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub schema_version: u32,
    pub cost: f64,
    pub matched: Vec<(usize, usize)>,
    pub boundary_x: Vec<usize>,
    pub boundary_y: Vec<usize>,
    pub unmatched_x: Vec<usize>,
    pub unmatched_y: Vec<usize>,
    /// `false` only when a bounded search may have missed the optimum.
    pub exact: bool,
}

impl SolveResult {
    pub fn empty() -> Self {
        SolveResult {
            schema_version: SCHEMA_VERSION,
            exact: true,
            ..Default::default()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solve results always serialize")
    }

    /// Recomputes the edge part of the cost, `sum |X_i - Y_j|^p` over `matched`.
    pub fn edge_cost(&self, x: &PointCloud, y: &PointCloud, params: &CostParams) -> f64 {
        sum_in_order(
            self.matched
                .iter()
                .map(|&(i, j)| params.edge_cost(x.get(i), y.get(j))),
        )
    }
}

pub(crate) fn power_cost_matrix(x: &PointCloud, y: &PointCloud, params: &CostParams) -> CostMatrix {
    CostMatrix::from_fn(x.len(), y.len(), |i, j| params.edge_cost(x.get(i), y.get(j)))
        .expect("finite points give finite costs")
}

fn finish(
    x: &PointCloud,
    y: &PointCloud,
    params: &CostParams,
    matched: Vec<(usize, usize)>,
) -> SolveResult {
    let mut used_x = vec![false; x.len()];
    let mut used_y = vec![false; y.len()];
    for &(i, j) in &matched {
        used_x[i] = true;
        used_y[j] = true;
    }
    let mut res = SolveResult {
        matched,
        unmatched_x: (0..x.len()).filter(|&i| !used_x[i]).collect(),
        unmatched_y: (0..y.len()).filter(|&j| !used_y[j]).collect(),
        ..SolveResult::empty()
    };
    res.cost = res.edge_cost(x, y, params);
    res
}

/// `M_p(X, Y)`: the cheapest injection of the smaller side into the larger.
pub fn m_p_cost(x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<SolveResult> {
    x.check_dim(y)?;
    if x.is_empty() || y.is_empty() {
        return Ok(finish(x, y, params, Vec::new()));
    }
    let matched = if x.len() <= y.len() {
        let assigned = solve_rows(&power_cost_matrix(x, y, params))?;
        assigned.into_iter().enumerate().collect()
    } else {
        let assigned = solve_rows(&power_cost_matrix(y, x, params))?;
        let mut pairs: Vec<(usize, usize)> =
            assigned.into_iter().enumerate().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        pairs
    };
    Ok(finish(x, y, params, matched))
}

/// Exhaustive minimum over all injections; reference oracle for [`m_p_cost`].
pub fn brute_force_matching(x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<SolveResult> {
    x.check_dim(y)?;
    let swap = x.len() > y.len();
    let (small, large) = if swap { (y, x) } else { (x, y) };
    if small.len() > BRUTE_FORCE_MAX_SIDE {
        return Err(Error::SizeLimit {
            what: "brute-force matching side",
            limit: BRUTE_FORCE_MAX_SIDE,
            got: small.len(),
        });
    }
    let injections = (0..small.len()).fold(1u128, |acc, k| acc * (large.len() - k) as u128);
    const MAX_INJECTIONS: u128 = 50_000_000;
    if injections > MAX_INJECTIONS {
        return Err(Error::SizeLimit {
            what: "brute-force matching injections",
            limit: MAX_INJECTIONS as usize,
            got: usize::try_from(injections).unwrap_or(usize::MAX),
        });
    }

    struct Search<'a> {
        small: &'a PointCloud,
        large: &'a PointCloud,
        params: &'a CostParams,
        used: Vec<bool>,
        current: Vec<usize>,
        best: f64,
        best_map: Vec<usize>,
    }
    impl Search<'_> {
        fn run(&mut self, i: usize, acc: f64) {
            if i == self.small.len() {
                if acc < self.best {
                    self.best = acc;
                    self.best_map = self.current.clone();
                }
                return;
            }
            for j in 0..self.large.len() {
                if self.used[j] {
                    continue;
                }
                self.used[j] = true;
                self.current.push(j);
                let c = self.params.edge_cost(self.small.get(i), self.large.get(j));
                self.run(i + 1, acc + c);
                self.current.pop();
                self.used[j] = false;
            }
        }
    }

    let mut search = Search {
        small,
        large,
        params,
        used: vec![false; large.len()],
        current: Vec::with_capacity(small.len()),
        best: f64::INFINITY,
        best_map: Vec::new(),
    };
    search.run(0, 0.0);
    let mut matched: Vec<(usize, usize)> = search
        .best_map
        .iter()
        .enumerate()
        .map(|(a, &b)| if swap { (b, a) } else { (a, b) })
        .collect();
    matched.sort_unstable();
    Ok(finish(x, y, params, matched))
}

/// Sorted-to-sorted matching on the line; optimal for convex costs (`p >= 1`).
pub fn monotone_matching_1d(x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<SolveResult> {
    x.check_dim(y)?;
    if x.dim() != 1 {
        return Err(Error::InvalidParameter(format!(
            "monotone matching needs dimension 1, got {}",
            x.dim()
        )));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "monotone matching needs equal sides, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if params.p() < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "monotone matching needs p >= 1, got {}",
            params.p()
        )));
    }
    let order = |c: &PointCloud| {
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.sort_by(|&a, &b| c.get(a)[0].total_cmp(&c.get(b)[0]));
        idx
    };
    let (ox, oy) = (order(x), order(y));
    let mut matched: Vec<(usize, usize)> = ox.into_iter().zip(oy).collect();
    matched.sort_unstable();
    Ok(finish(x, y, params, matched))
}
