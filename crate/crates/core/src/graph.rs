//! Bipartite graph families and their optimization problems.
//!
//! A member of the family at size `n` is a simple graph on `n` X-vertices and
//! `n` Y-vertices. Small families are enumerated as edge bitmasks: edge
//! `(i, j)` of a size-`n` graph is bit `i * n + j`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_rows, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::matching::{m_p_cost, power_cost_matrix, CostParams, SolveResult};

/// Largest `n` accepted by enumeration-based routines.
pub const ENUMERATION_MAX_N: usize = 5;
/// Largest smaller side accepted by the tour dynamic program.
pub const TSP_DP_MAX_N: usize = 12;
/// Largest larger side accepted by the tour dynamic program.
pub const TSP_DP_MAX_COLS: usize = 20;
const TSP_DP_MAX_STATES: usize = 20_000_000;
const ENUMERATION_MAX_WORK: usize = 50_000_000;
const IMPROVE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Matching,
    TspTour,
    SpanningTreeMaxDeg(usize),
    RRegularConnected(usize),
}

/// Admissible graph class with its constants `kappa0` (smallest nonempty
/// size) and `kappa` (merge and restriction budget).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GraphFamily {
    kind: FamilyKind,
    kappa0: usize,
    kappa: usize,
}

impl GraphFamily {
    pub fn matching() -> Self {
        GraphFamily {
            kind: FamilyKind::Matching,
            kappa0: 1,
            kappa: 0,
        }
    }

    pub fn tsp() -> Self {
        GraphFamily {
            kind: FamilyKind::TspTour,
            kappa0: 2,
            kappa: 4,
        }
    }

    /// Spanning trees with maximal degree `max_degree >= 2`.
    pub fn spanning_tree(max_degree: usize) -> Result<Self> {
        if max_degree < 2 {
            return Err(Error::InvalidParameter(format!(
                "spanning tree degree bound {max_degree} must be >= 2"
            )));
        }
        Ok(GraphFamily {
            kind: FamilyKind::SpanningTreeMaxDeg(max_degree),
            kappa0: 1,
            kappa: 2 * max_degree,
        })
    }

    /// Connected `r`-regular graphs, `r >= 2`.
    pub fn r_regular(r: usize) -> Result<Self> {
        if r < 2 {
            return Err(Error::InvalidParameter(format!("regularity r={r} must be >= 2")));
        }
        Ok(GraphFamily {
            kind: FamilyKind::RRegularConnected(r),
            kappa0: r,
            kappa: 11 * r,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn kappa0(&self) -> usize {
        self.kappa0
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// Largest vertex degree allowed in a member.
    pub fn degree_bound(&self) -> usize {
        match self.kind {
            FamilyKind::Matching => 1,
            FamilyKind::TspTour => 2,
            FamilyKind::SpanningTreeMaxDeg(k) => k,
            FamilyKind::RRegularConnected(r) => r,
        }
    }

    /// Edge budget for repairing a restriction. Matchings merge for free but
    /// need one new edge after a restriction.
    pub fn restriction_kappa(&self) -> usize {
        self.kappa.max(1)
    }

    /// Constant `C` of the subadditivity inequality: `1/2` for matchings,
    /// `(3 + kappa0) kappa / 2` otherwise.
    pub fn subadditivity_constant(&self) -> f64 {
        match self.kind {
            FamilyKind::Matching => 0.5,
            _ => (3 + self.kappa0) as f64 * self.kappa as f64 / 2.0,
        }
    }

    /// Number of edges of every member of size `n >= kappa0`.
    pub fn edge_count(&self, n: usize) -> usize {
        match self.kind {
            FamilyKind::Matching => n,
            FamilyKind::TspTour => 2 * n,
            FamilyKind::SpanningTreeMaxDeg(_) => (2 * n).saturating_sub(1),
            FamilyKind::RRegularConnected(r) => r * n,
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FamilyKind::Matching => write!(f, "matching"),
            FamilyKind::TspTour => write!(f, "tsp"),
            FamilyKind::SpanningTreeMaxDeg(k) => write!(f, "tree-{k}"),
            FamilyKind::RRegularConnected(r) => write!(f, "rreg-{r}"),
        }
    }
}

impl FromStr for GraphFamily {
    type Err = Error;

    /// Accepts `matching`, `tsp`, `tree-<k>`, `rreg-<r>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown graph family {s:?}"));
        let parse_suffix = |rest: &str| rest.parse::<usize>().map_err(|_| bad());
        match s {
            "matching" => Ok(GraphFamily::matching()),
            "tsp" => Ok(GraphFamily::tsp()),
            _ => {
                if let Some(rest) = s.strip_prefix("tree-") {
                    GraphFamily::spanning_tree(parse_suffix(rest)?)
                } else if let Some(rest) = s.strip_prefix("rreg-") {
                    GraphFamily::r_regular(parse_suffix(rest)?)
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl Serialize for GraphFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GraphFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Simple bipartite graph on `n + n` vertices; edge `(i, j)` joins `X_i` and `Y_j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipartiteGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let set: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        if let Some(&(i, j)) = set.iter().find(|&&(i, j)| i >= n || j >= n) {
            return Err(Error::InvalidParameter(format!("edge ({i}, {j}) out of range for n={n}")));
        }
        Ok(BipartiteGraph {
            n,
            edges: set.into_iter().collect(),
        })
    }

    fn from_mask(n: usize, mask: u32) -> Self {
        let edges = (0..n * n)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| (b / n, b % n))
            .collect();
        BipartiteGraph { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> (Vec<usize>, Vec<usize>) {
        let mut dx = vec![0; self.n];
        let mut dy = vec![0; self.n];
        for &(i, j) in &self.edges {
            dx[i] += 1;
            dy[j] += 1;
        }
        (dx, dy)
    }

    pub fn max_degree(&self) -> usize {
        let (dx, dy) = self.degrees();
        dx.into_iter().chain(dy).max().unwrap_or(0)
    }

    /// Connectivity of the whole vertex set `X ∪ Y`.
    pub fn is_connected(&self) -> bool {
        components(self.n, self.n, &self.edges) == 1
    }

    /// Re-validates membership in `family` from degrees and connectivity.
    pub fn is_member(&self, family: &GraphFamily) -> bool {
        if self.n < family.kappa0() {
            return false;
        }
        let (dx, dy) = self.degrees();
        let mut degrees = dx.iter().chain(dy.iter());
        match family.kind() {
            FamilyKind::Matching => degrees.all(|&d| d == 1),
            FamilyKind::TspTour => degrees.all(|&d| d == 2) && self.is_connected(),
            FamilyKind::SpanningTreeMaxDeg(k) => {
                self.edges.len() + 1 == 2 * self.n && degrees.all(|&d| d <= k) && self.is_connected()
            }
            FamilyKind::RRegularConnected(r) => degrees.all(|&d| d == r) && self.is_connected(),
        }
    }
}

/// Number of connected components of a bipartite graph on `nx + ny` vertices.
pub(crate) fn components(nx: usize, ny: usize, edges: &[(usize, usize)]) -> usize {
    let mut dsu = Dsu::new(nx + ny);
    let mut count = nx + ny;
    for &(i, j) in edges {
        if dsu.union(i, nx + j) {
            count -= 1;
        }
    }
    count
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

fn mask_edges(n: usize, mask: u32) -> Vec<(usize, usize)> {
    (0..n * n)
        .filter(|b| mask >> b & 1 == 1)
        .map(|b| (b / n, b % n))
        .collect()
}

fn mask_connected(n: usize, mask: u32) -> bool {
    components(n, n, &mask_edges(n, mask)) == 1
}

fn check_enumeration_size(n: usize) -> Result<()> {
    if n > ENUMERATION_MAX_N {
        return Err(Error::SizeLimit {
            what: "graph family enumeration size",
            limit: ENUMERATION_MAX_N,
            got: n,
        });
    }
    Ok(())
}

/// All members of the family at size `n`, as sorted edge bitmasks.
fn family_masks(n: usize, family: &GraphFamily) -> Result<Vec<u32>> {
    check_enumeration_size(n)?;
    if n < family.kappa0() || n == 0 {
        return Ok(Vec::new());
    }
    let mut out: BTreeSet<u32> = BTreeSet::new();
    match family.kind() {
        FamilyKind::Matching => {
            permutations(n, &mut |perm| {
                out.insert(perm.iter().enumerate().fold(0u32, |m, (i, &j)| m | 1 << (i * n + j)));
            });
        }
        FamilyKind::TspTour => {
            // Cycles through X_0; orientation duplicates collapse in the set.
            permutations(n, &mut |ys| {
                permutations(n - 1, &mut |xs| {
                    let order: Vec<usize> = std::iter::once(0).chain(xs.iter().map(|x| x + 1)).collect();
                    let mut mask = 0u32;
                    for k in 0..n {
                        mask |= 1 << (order[k] * n + ys[k]);
                        mask |= 1 << (order[(k + 1) % n] * n + ys[k]);
                    }
                    out.insert(mask);
                });
            });
        }
        FamilyKind::SpanningTreeMaxDeg(k) => {
            let bits = n * n;
            let take = 2 * n - 1;
            for mask in subsets_of_size(bits, take) {
                let mask = mask as u32;
                if max_mask_degree(n, mask) <= k && mask_connected(n, mask) {
                    out.insert(mask);
                }
            }
        }
        FamilyKind::RRegularConnected(r) => {
            if r <= n {
                let rows: Vec<u32> = subsets_of_size(n, r).map(|s| s as u32).collect();
                let mut col_deg = vec![0usize; n];
                regular_rows(n, r, 0, 0, &rows, &mut col_deg, &mut |mask| {
                    if mask_connected(n, mask) {
                        out.insert(mask);
                    }
                });
            }
        }
    }
    Ok(out.into_iter().collect())
}

fn regular_rows(
    n: usize,
    r: usize,
    row: usize,
    mask: u32,
    choices: &[u32],
    col_deg: &mut [usize],
    emit: &mut dyn FnMut(u32),
) {
    if row == n {
        emit(mask);
        return;
    }
    for &cols in choices {
        if (0..n).any(|j| cols >> j & 1 == 1 && col_deg[j] == r) {
            continue;
        }
        for j in 0..n {
            if cols >> j & 1 == 1 {
                col_deg[j] += 1;
            }
        }
        regular_rows(n, r, row + 1, mask | cols << (row * n), choices, col_deg, emit);
        for j in 0..n {
            if cols >> j & 1 == 1 {
                col_deg[j] -= 1;
            }
        }
    }
}

fn max_mask_degree(n: usize, mask: u32) -> usize {
    let mut best = 0;
    for i in 0..n {
        let row = (mask >> (i * n)) & ((1u32 << n) - 1);
        best = best.max(row.count_ones() as usize);
    }
    for j in 0..n {
        let col = (0..n).filter(|i| mask >> (i * n + j) & 1 == 1).count();
        best = best.max(col);
    }
    best
}

/// Heap's algorithm over permutations of `0..n`.
fn permutations(n: usize, emit: &mut dyn FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    emit(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            emit(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Subsets of `0..bits` with `k` elements, as masks in increasing order.
pub(crate) fn subsets_of_size(bits: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit = 1u64 << bits;
    let start = if k > bits { limit } else { (1u64 << k) - 1 };
    let mut next = Some(start).filter(|&s| s < limit);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            // Gosper's hack.
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let n = (((r ^ cur) >> 2) / c) | r;
            Some(n).filter(|&s| s < limit)
        };
        Some(cur)
    })
}

/// All members of `G_n`.
pub fn enumerate_family(n: usize, family: &GraphFamily) -> Result<Vec<BipartiteGraph>> {
    Ok(family_masks(n, family)?
        .into_iter()
        .map(|m| BipartiteGraph::from_mask(n, m))
        .collect())
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Minimizes the family cost on a `rows x cols` matrix, `rows <= cols`:
/// over members `G` of size `rows` and injections of the rows' partners into
/// the columns. Returns the optimal edge list `(row, col)`, empty when
/// `rows < kappa0`.
pub(crate) fn family_min_edges(family: &GraphFamily, costs: &CostMatrix) -> Result<Vec<(usize, usize)>> {
    let m = costs.rows();
    debug_assert!(m <= costs.cols());
    if m < family.kappa0() || m == 0 {
        return Ok(Vec::new());
    }
    match family.kind() {
        FamilyKind::Matching => Ok(solve_rows(costs)?.into_iter().enumerate().collect()),
        FamilyKind::TspTour => tsp_dp_edges(costs),
        _ => enumeration_edges(family, costs),
    }
}

fn enumeration_edges(family: &GraphFamily, costs: &CostMatrix) -> Result<Vec<(usize, usize)>> {
    let (m, n) = (costs.rows(), costs.cols());
    let masks = family_masks(m, family)?;
    if n > 63 {
        return Err(Error::SizeLimit {
            what: "family enumeration columns",
            limit: 63,
            got: n,
        });
    }
    let work = binom(n, m).saturating_mul(masks.len());
    if work > ENUMERATION_MAX_WORK {
        return Err(Error::SizeLimit {
            what: "family enumeration work",
            limit: ENUMERATION_MAX_WORK,
            got: work,
        });
    }
    let edge_lists: Vec<Vec<(usize, usize)>> = masks.iter().map(|&mk| mask_edges(m, mk)).collect();
    let mut best = f64::INFINITY;
    let mut best_edges = Vec::new();
    let mut cols = Vec::with_capacity(m);
    for subset in subsets_of_size(n, m) {
        cols.clear();
        cols.extend((0..n).filter(|j| subset >> j & 1 == 1));
        for edges in &edge_lists {
            let value: f64 = edges.iter().map(|&(i, j)| costs.get(i, cols[j])).sum();
            if value < best {
                best = value;
                best_edges = edges.iter().map(|&(i, j)| (i, cols[j])).collect();
            }
        }
    }
    Ok(best_edges)
}

/// Colex ranks of all subsets of `0..bits`, within their cardinality class.
fn rank_table(bits: usize) -> Vec<u32> {
    let mut table = vec![0u32; 1 << bits];
    for k in 0..=bits {
        for (r, s) in subsets_of_size(bits, k).enumerate() {
            table[s as usize] = r as u32;
        }
    }
    table
}

fn tsp_state_count(m: usize, n: usize) -> usize {
    let ylayers: usize = (1..=m).map(|k| binom(m - 1, k - 1) * binom(n, k) * k).sum();
    let xlayers: usize = (1..m).map(|k| binom(m - 1, k) * binom(n, k) * k).sum();
    ylayers + xlayers
}

#[inline]
fn pos_in(mask: u64, bit: usize) -> usize {
    (mask & ((1u64 << bit) - 1)).count_ones() as usize
}

/// Held-Karp style program over alternating paths from row 0.
///
/// `ylay[k]` holds paths that used `k` columns and `k - 1` further rows and
/// end at a column; `xlay[k]` holds paths that used `k` columns and `k`
/// further rows and end at a row. Rows `1..m` are bits `0..m-1` of the row
/// mask.
fn tsp_dp_edges(costs: &CostMatrix) -> Result<Vec<(usize, usize)>> {
    let (m, n) = (costs.rows(), costs.cols());
    if m > TSP_DP_MAX_N || n > TSP_DP_MAX_COLS {
        return Err(Error::SizeLimit {
            what: "tour dynamic program side",
            limit: if m > TSP_DP_MAX_N { TSP_DP_MAX_N } else { TSP_DP_MAX_COLS },
            got: if m > TSP_DP_MAX_N { m } else { n },
        });
    }
    let states = tsp_state_count(m, n);
    if states > TSP_DP_MAX_STATES {
        return Err(Error::SizeLimit {
            what: "tour dynamic program states",
            limit: TSP_DP_MAX_STATES,
            got: states,
        });
    }
    let rb = m - 1;
    let xrank = rank_table(rb);
    let yrank = rank_table(n);
    let bn: Vec<usize> = (0..=n).map(|k| binom(n, k)).collect();
    let c = |i: usize, j: usize| costs.get(i, j);
    let yidx = |k: usize, xm: u64, ym: u64, j: usize| {
        (xrank[xm as usize] as usize * bn[k] + yrank[ym as usize] as usize) * k + pos_in(ym, j)
    };
    let xidx = |k: usize, xm: u64, ym: u64, i: usize| {
        (xrank[xm as usize] as usize * bn[k] + yrank[ym as usize] as usize) * k + pos_in(xm, i - 1)
    };

    let mut ylay: Vec<Vec<f64>> = vec![Vec::new(); m + 1];
    let mut xlay: Vec<Vec<f64>> = vec![Vec::new(); m];
    for k in 1..=m {
        ylay[k] = vec![f64::INFINITY; binom(rb, k - 1) * binom(n, k) * k];
    }
    for k in 1..m {
        xlay[k] = vec![f64::INFINITY; binom(rb, k) * binom(n, k) * k];
    }
    for j in 0..n {
        let idx = yidx(1, 0, 1 << j, j);
        ylay[1][idx] = c(0, j);
    }
    for k in 1..m {
        // Columns to rows.
        for xm in subsets_of_size(rb, k - 1) {
            for ym in subsets_of_size(n, k) {
                for j in (0..n).filter(|j| ym >> j & 1 == 1) {
                    let val = ylay[k][yidx(k, xm, ym, j)];
                    if !val.is_finite() {
                        continue;
                    }
                    for i in (1..m).filter(|i| xm >> (i - 1) & 1 == 0) {
                        let nxm = xm | 1 << (i - 1);
                        let slot = &mut xlay[k][xidx(k, nxm, ym, i)];
                        let cand = val + c(i, j);
                        if cand < *slot {
                            *slot = cand;
                        }
                    }
                }
            }
        }
        // Rows to columns.
        for xm in subsets_of_size(rb, k) {
            for ym in subsets_of_size(n, k) {
                for i in (1..m).filter(|i| xm >> (i - 1) & 1 == 1) {
                    let val = xlay[k][xidx(k, xm, ym, i)];
                    if !val.is_finite() {
                        continue;
                    }
                    for j in (0..n).filter(|j| ym >> j & 1 == 0) {
                        let nym = ym | 1 << j;
                        let slot = &mut ylay[k + 1][yidx(k + 1, xm, nym, j)];
                        let cand = val + c(i, j);
                        if cand < *slot {
                            *slot = cand;
                        }
                    }
                }
            }
        }
    }

    let full = (1u64 << rb) - 1;
    let mut best = f64::INFINITY;
    let mut end = (0u64, 0usize);
    for ym in subsets_of_size(n, m) {
        for j in (0..n).filter(|j| ym >> j & 1 == 1) {
            let total = ylay[m][yidx(m, full, ym, j)] + c(0, j);
            if total < best {
                best = total;
                end = (ym, j);
            }
        }
    }

    // Walk back through the layers, matching stored values exactly.
    let mut edges = vec![(0, end.1)];
    let (mut xm, mut ym, mut j) = (full, end.0, end.1);
    let mut k = m;
    while k > 1 {
        let target = ylay[k][yidx(k, xm, ym, j)];
        let pym = ym & !(1 << j);
        let i = (1..m)
            .filter(|i| xm >> (i - 1) & 1 == 1)
            .find(|&i| xlay[k - 1][xidx(k - 1, xm, pym, i)] + c(i, j) == target)
            .expect("tour program predecessor");
        edges.push((i, j));
        let target = xlay[k - 1][xidx(k - 1, xm, pym, i)];
        let pxm = xm & !(1 << (i - 1));
        let pj = (0..n)
            .filter(|jj| pym >> jj & 1 == 1)
            .find(|&jj| ylay[k - 1][yidx(k - 1, pxm, pym, jj)] + c(i, jj) == target)
            .expect("tour program predecessor");
        edges.push((i, pj));
        xm = pxm;
        ym = pym;
        j = pj;
        k -= 1;
    }
    edges.push((0, j));
    edges.sort_unstable();
    Ok(edges)
}

fn oriented(x: &PointCloud, y: &PointCloud, params: &CostParams) -> (CostMatrix, bool) {
    if x.len() <= y.len() {
        (power_cost_matrix(x, y, params), false)
    } else {
        (power_cost_matrix(y, x, params), true)
    }
}

/// Builds a certificate from edges `(x index, y index)`.
pub(crate) fn graph_result(
    x: &PointCloud,
    y: &PointCloud,
    params: &CostParams,
    mut edges: Vec<(usize, usize)>,
) -> SolveResult {
    edges.sort_unstable();
    let mut used_x = vec![false; x.len()];
    let mut used_y = vec![false; y.len()];
    for &(i, j) in &edges {
        used_x[i] = true;
        used_y[j] = true;
    }
    let mut res = SolveResult {
        matched: edges,
        unmatched_x: (0..x.len()).filter(|&i| !used_x[i]).collect(),
        unmatched_y: (0..y.len()).filter(|&j| !used_y[j]).collect(),
        ..SolveResult::empty()
    };
    res.cost = res.edge_cost(x, y, params);
    res
}

/// `L(X, Y)` for a graph family: minimum over members of size `min(|X|,|Y|)`
/// and injections of the smaller side's partners into the larger side.
pub fn generic_cost(x: &PointCloud, y: &PointCloud, family: &GraphFamily, params: &CostParams) -> Result<SolveResult> {
    x.check_dim(y)?;
    if family.kind() == FamilyKind::Matching {
        return m_p_cost(x, y, params);
    }
    let (costs, swapped) = oriented(x, y, params);
    let edges = family_min_edges(family, &costs)?;
    let edges = edges
        .into_iter()
        .map(|(r, c)| if swapped { (c, r) } else { (r, c) })
        .collect();
    Ok(graph_result(x, y, params, edges))
}

/// Exact `T_p` for equal sides of size at most 12.
pub fn tsp_exact_dp(x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<SolveResult> {
    x.check_dim(y)?;
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "tour program needs equal sides, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() > TSP_DP_MAX_N {
        return Err(Error::SizeLimit {
            what: "tour dynamic program side",
            limit: TSP_DP_MAX_N,
            got: x.len(),
        });
    }
    generic_cost(x, y, &GraphFamily::tsp(), params)
}

/// Alternating tour as a vertex sequence; even positions are X indices, odd
/// positions are Y indices.
struct Tour<'a> {
    seq: Vec<usize>,
    cost: &'a dyn Fn(usize, usize) -> f64,
}

impl Tour<'_> {
    /// Edge cost between positions holding `a` (at parity `pa`) and `b`.
    fn w(&self, pos_a: usize, a: usize, b: usize) -> f64 {
        if pos_a.is_multiple_of(2) {
            (self.cost)(a, b)
        } else {
            (self.cost)(b, a)
        }
    }

    fn edge(&self, pos: usize) -> f64 {
        let len = self.seq.len();
        self.w(pos, self.seq[pos], self.seq[(pos + 1) % len])
    }

    /// First-improvement 2-opt over moves that keep the alternation: the
    /// reversed segment has odd length.
    fn two_opt(&mut self) -> bool {
        let len = self.seq.len();
        let mut any = false;
        loop {
            let mut improved = false;
            for i in 0..len - 2 {
                let mut j = i + 3;
                while j < len {
                    if i == 0 && j == len - 1 {
                        j += 2;
                        continue;
                    }
                    let (a, b) = (self.seq[i], self.seq[i + 1]);
                    let (cc, d) = (self.seq[j], self.seq[(j + 1) % len]);
                    let before = self.edge(i) + self.edge(j);
                    // New edges a-c (positions i, j have opposite parity) and b-d.
                    let after = self.w(i, a, cc) + self.w(i + 1, b, d);
                    if after < before - IMPROVE_TOL {
                        self.seq[i + 1..=j].reverse();
                        improved = true;
                    }
                    j += 2;
                }
            }
            if !improved {
                return any;
            }
            any = true;
        }
    }
}

/// Greedy alternating tour on a `m x m` cost function, then 2-opt.
fn heuristic_sequence(m: usize, cost: &dyn Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut used_x = vec![false; m];
    let mut used_y = vec![false; m];
    let mut seq = Vec::with_capacity(2 * m);
    let mut cur = 0usize;
    used_x[0] = true;
    seq.push(0);
    for step in 0..2 * m - 1 {
        let on_x = step % 2 == 0;
        let (used, pick) = if on_x {
            let j = (0..m)
                .filter(|&j| !used_y[j])
                .min_by(|&a, &b| cost(cur, a).total_cmp(&cost(cur, b)))
                .expect("free column");
            (&mut used_y, j)
        } else {
            let i = (0..m)
                .filter(|&i| !used_x[i])
                .min_by(|&a, &b| cost(a, cur).total_cmp(&cost(b, cur)))
                .expect("free row");
            (&mut used_x, i)
        };
        used[pick] = true;
        seq.push(pick);
        cur = pick;
    }
    let mut tour = Tour { seq, cost };
    tour.two_opt();
    tour.seq
}

fn sequence_edges(seq: &[usize]) -> Vec<(usize, usize)> {
    let len = seq.len();
    (0..len)
        .map(|p| {
            let (a, b) = (seq[p], seq[(p + 1) % len]);
            if p % 2 == 0 {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

/// Feasible alternating tour: greedy nearest-opposite construction followed
/// by alternation-preserving 2-opt. For unequal sides the larger side's
/// points are first chosen by an optimal matching and then improved by
/// single-point swaps. Returns cost 0 below two points per side.
pub fn tsp_heuristic(x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<SolveResult> {
    x.check_dim(y)?;
    let swapped = x.len() > y.len();
    let (small, large) = if swapped { (y, x) } else { (x, y) };
    let m = small.len();
    if m < 2 {
        return Ok(graph_result(x, y, params, Vec::new()));
    }
    // Choose which points of the larger side take part.
    let mut chosen: Vec<usize> = if large.len() == m {
        (0..m).collect()
    } else {
        let costs = power_cost_matrix(small, large, params);
        solve_rows(&costs)?
    };
    let run = |chosen: &[usize]| -> (Vec<usize>, f64) {
        let cost = |i: usize, j: usize| params.edge_cost(small.get(i), large.get(chosen[j]));
        let seq = heuristic_sequence(m, &cost);
        let total = sequence_edges(&seq).iter().map(|&(i, j)| cost(i, j)).sum();
        (seq, total)
    };
    let (mut seq, _) = run(&chosen);
    if large.len() > m {
        let mut in_tour = vec![false; large.len()];
        for &j in &chosen {
            in_tour[j] = true;
        }
        loop {
            let len = seq.len();
            let mut best: Option<(f64, usize, usize)> = None;
            for p in (1..len).step_by(2) {
                let slot = seq[p];
                let (prev, next) = (seq[p - 1], seq[(p + 1) % len]);
                let here = params.edge_cost(small.get(prev), large.get(chosen[slot]))
                    + params.edge_cost(small.get(next), large.get(chosen[slot]));
                for u in (0..large.len()).filter(|&u| !in_tour[u]) {
                    let there = params.edge_cost(small.get(prev), large.get(u))
                        + params.edge_cost(small.get(next), large.get(u));
                    let gain = here - there;
                    if gain > IMPROVE_TOL && best.is_none_or(|b| gain > b.0) {
                        best = Some((gain, slot, u));
                    }
                }
            }
            let Some((_, slot, u)) = best else { break };
            in_tour[chosen[slot]] = false;
            in_tour[u] = true;
            chosen[slot] = u;
            let cost = |i: usize, j: usize| params.edge_cost(small.get(i), large.get(chosen[j]));
            let mut tour = Tour { seq, cost: &cost };
            tour.two_opt();
            seq = tour.seq;
            let total: f64 = sequence_edges(&seq).iter().map(|&(i, j)| cost(i, j)).sum();
            let (fresh, fresh_total) = run(&chosen);
            if fresh_total < total {
                seq = fresh;
            }
        }
    }
    let edges = sequence_edges(&seq)
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (i, chosen[j]);
            if swapped {
                (b, a)
            } else {
                (a, b)
            }
        })
        .collect();
    Ok(graph_result(x, y, params, edges))
}

/// Observed constants of the family axioms, by enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub family: GraphFamily,
    pub n_max: usize,
    /// `(n, |G_n|)` for `0 <= n <= n_max`.
    pub sizes: Vec<(usize, usize)>,
    pub nonempty_ok: bool,
    pub max_degree_observed: usize,
    pub degree_ok: bool,
    /// Largest, over merged pairs, of the smallest symmetric difference to a
    /// member of the larger family. `None` when no pair fits in `n_max`.
    pub merge_observed: Option<usize>,
    pub merge_ok: bool,
    /// Same for restrictions to `B_{n-1}`.
    pub restriction_observed: Option<usize>,
    pub restriction_ok: bool,
}

impl AxiomReport {
    pub fn all_ok(&self) -> bool {
        self.nonempty_ok && self.degree_ok && self.merge_ok && self.restriction_ok
    }
}

/// Smallest Hamming distance from `target` to a member of `members`.
fn nearest_member(target: u32, bits: usize, lower: usize, members: &HashSet<u32>, all: &[u32]) -> usize {
    const SEARCH_RADIUS: usize = 6;
    let mut t = lower;
    while t <= SEARCH_RADIUS.min(bits) {
        for flip in subsets_of_size(bits, t) {
            if members.contains(&(target ^ flip as u32)) {
                return t;
            }
        }
        t += 2;
    }
    all.iter()
        .map(|&m| (m ^ target).count_ones() as usize)
        .min()
        .unwrap_or(usize::MAX)
}

/// Checks nonemptiness, degree, merging and restriction on all sizes up to `n_max`.
pub fn check_axioms(family: &GraphFamily, n_max: usize) -> Result<AxiomReport> {
    check_enumeration_size(n_max)?;
    let masks: Vec<Vec<u32>> = (0..=n_max)
        .map(|n| family_masks(n, family))
        .collect::<Result<_>>()?;
    let sets: Vec<HashSet<u32>> = masks.iter().map(|v| v.iter().copied().collect()).collect();
    let sizes: Vec<(usize, usize)> = masks.iter().enumerate().map(|(n, v)| (n, v.len())).collect();
    let nonempty_ok = sizes.iter().all(|&(n, c)| n < family.kappa0() || c > 0);
    let max_degree_observed = masks
        .iter()
        .enumerate()
        .flat_map(|(n, v)| v.iter().map(move |&mk| max_mask_degree(n, mk)))
        .max()
        .unwrap_or(0);

    let embed = |mask: u32, n: usize, total: usize, offset: usize| -> u32 {
        mask_edges(n, mask)
            .into_iter()
            .fold(0u32, |acc, (i, j)| acc | 1 << ((i + offset) * total + j + offset))
    };
    let edge_gap = |edges: u32, total: usize| family.edge_count(total).abs_diff(edges.count_ones() as usize);

    let mut merge_observed: Option<usize> = None;
    for n in family.kappa0().max(1)..=n_max {
        for m in 1..=n_max - n {
            let total = n + m;
            let partners: Vec<u32> = if m >= family.kappa0() {
                masks[m].clone()
            } else {
                vec![0]
            };
            for &g in &masks[n] {
                for &h in &partners {
                    let merged = embed(g, n, total, 0) | embed(h, m, total, n);
                    let d = nearest_member(merged, total * total, edge_gap(merged, total), &sets[total], &masks[total]);
                    merge_observed = Some(merge_observed.map_or(d, |o| o.max(d)));
                }
            }
        }
    }

    let mut restriction_observed: Option<usize> = None;
    for n in family.kappa0() + 1..=n_max {
        let smaller = n - 1;
        for &g in &masks[n] {
            let restricted = mask_edges(n, g)
                .into_iter()
                .filter(|&(i, j)| i < smaller && j < smaller)
                .fold(0u32, |acc, (i, j)| acc | 1 << (i * smaller + j));
            let d = nearest_member(
                restricted,
                smaller * smaller,
                edge_gap(restricted, smaller),
                &sets[smaller],
                &masks[smaller],
            );
            restriction_observed = Some(restriction_observed.map_or(d, |o| o.max(d)));
        }
    }

    Ok(AxiomReport {
        family: *family,
        n_max,
        sizes,
        nonempty_ok,
        max_degree_observed,
        degree_ok: max_degree_observed <= family.degree_bound(),
        merge_observed,
        merge_ok: merge_observed.is_none_or(|d| d <= 2 * family.kappa()),
        restriction_observed,
        restriction_ok: restriction_observed.is_none_or(|d| d <= family.restriction_kappa()),
    })
}
