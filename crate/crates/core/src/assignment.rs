//! Dense minimum-cost assignment.
//!
//! Shortest augmenting paths with row and column potentials, one row per
//! phase, O(rows^2 * cols). Rectangular problems (rows <= cols) are solved
//! directly: every row is assigned and the leftover columns stay free.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cost entry {v}")));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged cost matrix".into()));
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

/// Minimum-cost perfect assignment of a square matrix.
///
/// Returns `perm` with row `i` assigned to column `perm[i]`, and the total
/// cost recomputed from `perm`.
pub fn assignment_min_cost(costs: &CostMatrix) -> Result<(Vec<usize>, f64)> {
    if !costs.is_square() {
        return Err(Error::InvalidParameter(format!(
            "assignment needs a square matrix, got {}x{}",
            costs.rows, costs.cols
        )));
    }
    let perm = solve_rows(costs)?;
    let total = sum_in_order(perm.iter().enumerate().map(|(i, &j)| costs.get(i, j)));
    Ok((perm, total))
}

/// Assigns every row to a distinct column, `rows <= cols`, minimizing the sum.
pub fn solve_rows(costs: &CostMatrix) -> Result<Vec<usize>> {
    if costs.rows > costs.cols {
        return Err(Error::InvalidParameter(format!(
            "more rows than columns: {}x{}",
            costs.rows, costs.cols
        )));
    }
    let assigned = hungarian(costs, None);
    Ok(assigned
        .into_iter()
        .map(|j| j.expect("no private columns in plain assignment"))
        .collect())
}

/// Assignment where row `i` may instead take a private column of cost
/// `private[i]`. Rows left on their private column map to `None`.
pub fn solve_rows_with_private(costs: &CostMatrix, private: &[f64]) -> Result<Vec<Option<usize>>> {
    if private.len() != costs.rows {
        return Err(Error::InvalidParameter(format!(
            "{} private costs for {} rows",
            private.len(),
            costs.rows
        )));
    }
    if let Some(v) = private.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("private cost {v}")));
    }
    Ok(hungarian(costs, Some(private)))
}

/// Sum with the summands sorted, so that the result depends only on the
/// multiset of terms.
pub(crate) fn sum_in_order(terms: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = terms.collect();
    v.sort_by(f64::total_cmp);
    v.iter().fold(0.0, |acc, t| acc + t)
}

/// Core solver. Columns are `1..=n` (real) then `n+1..=n+m` (private column
/// of row `i` is `n+i`); index 0 is the virtual root of each phase.
fn hungarian(costs: &CostMatrix, private: Option<&[f64]>) -> Vec<Option<usize>> {
    let m = costs.rows;
    let n = costs.cols;
    let total = n + if private.is_some() { m } else { 0 };
    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; total + 1];
    let mut owner = vec![0usize; total + 1];
    let mut way = vec![0usize; total + 1];
    let mut minv = vec![f64::INFINITY; total + 1];
    let mut used = vec![false; total + 1];
    // Unused real columns, compacted as the phase visits them.
    let mut free: Vec<usize> = Vec::with_capacity(n);
    // Private columns that entered the current phase.
    let mut touched: Vec<usize> = Vec::new();
    // Real columns visited in the current phase.
    let mut visited: Vec<usize> = Vec::with_capacity(n);

    for i in 1..=m {
        owner[0] = i;
        let mut j0 = 0usize;
        free.clear();
        free.extend(1..=n);
        for j in 0..=n {
            minv[j] = f64::INFINITY;
            used[j] = false;
        }
        for &c in &touched {
            minv[c] = f64::INFINITY;
            used[c] = false;
        }
        touched.clear();
        visited.clear();
        used[0] = true;

        loop {
            let i0 = owner[j0];
            let row = costs.row(i0 - 1);
            let ui = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let mut slot = usize::MAX;
            for (s, &j) in free.iter().enumerate() {
                let cur = row[j - 1] - ui - v[j];
                let mj = &mut minv[j];
                if cur < *mj {
                    *mj = cur;
                    way[j] = j0;
                }
                if *mj < delta {
                    delta = *mj;
                    j1 = j;
                    slot = s;
                }
            }
            if let Some(pr) = private {
                // Each row is scanned once per phase, so its private column
                // enters the phase exactly here.
                let c = n + i0;
                minv[c] = pr[i0 - 1] - ui - v[c];
                way[c] = j0;
                touched.push(c);
                for &c in &touched {
                    if !used[c] && minv[c] < delta {
                        delta = minv[c];
                        j1 = c;
                        slot = usize::MAX;
                    }
                }
            }
            debug_assert!(delta.is_finite(), "assignment phase found no column");

            // Potentials of visited nodes move by delta.
            u[owner[0]] += delta;
            for &j in &visited {
                u[owner[j]] += delta;
                v[j] -= delta;
            }
            for &j in &free {
                minv[j] -= delta;
            }
            for &c in &touched {
                if !used[c] {
                    minv[c] -= delta;
                }
            }

            used[j1] = true;
            if slot != usize::MAX {
                free.swap_remove(slot);
                visited.push(j1);
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assigned = vec![None; m];
    for j in 1..=n {
        if owner[j] != 0 {
            assigned[owner[j] - 1] = Some(j - 1);
        }
    }
    assigned
}
