//! Points, point clouds, axis-aligned boxes and dyadic partitions.
//!
//! Point clouds are multisets: duplicates are allowed and the order of the
//! points never changes any cost computed from them. Coordinates are stored
//! flat, `dim` values per point.

use std::io::{Read, Write};
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `R^d`, `d >= 1`, with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point coordinates"));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {c}")));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn splat(dim: usize, value: f64) -> Self {
        Point(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Euclidean distance `|x - y|`.
pub fn euclid_dist(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(sq_dist(x, y).sqrt())
}

/// Finite multiset of points of a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "point clouds need a positive dimension");
        PointCloud {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        assert!(dim >= 1, "point clouds need a positive dimension");
        PointCloud {
            dim,
            coords: Vec::with_capacity(dim * n),
        }
    }

    /// Builds a cloud from rows of coordinates.
    pub fn from_rows<I, R>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut cloud = PointCloud::new(dim);
        for row in rows {
            cloud.push(row.as_ref())?;
        }
        Ok(cloud)
    }

    /// Builds a cloud from a flat coordinate buffer.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point cloud coordinate".into()));
        }
        Ok(PointCloud { dim, coords })
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        if point.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("point {point:?}")));
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, point: &[f64]) {
        debug_assert_eq!(point.len(), self.dim);
        self.coords.extend_from_slice(point);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn check_dim(&self, other: &PointCloud) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    /// Multiset union.
    pub fn union(&self, other: &PointCloud) -> Result<PointCloud> {
        self.check_dim(other)?;
        let mut coords = Vec::with_capacity(self.coords.len() + other.coords.len());
        coords.extend_from_slice(&self.coords);
        coords.extend_from_slice(&other.coords);
        Ok(PointCloud {
            dim: self.dim,
            coords,
        })
    }

    pub fn union_all<'a, I>(dim: usize, clouds: I) -> Result<PointCloud>
    where
        I: IntoIterator<Item = &'a PointCloud>,
    {
        let mut out = PointCloud::new(dim);
        for c in clouds {
            out.check_dim(c)?;
            out.coords.extend_from_slice(&c.coords);
        }
        Ok(out)
    }

    /// Sub-multiset at the given indices.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut out = PointCloud::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.push_unchecked(self.get(i));
        }
        out
    }

    pub fn without(&self, index: usize) -> PointCloud {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != index).collect();
        self.select(&keep)
    }

    /// The image `a + lambda * X`.
    pub fn affine(&self, shift: &[f64], lambda: f64) -> Result<PointCloud> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: shift.len(),
            });
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, c)| shift[k % self.dim] + lambda * c)
            .collect();
        Ok(PointCloud {
            dim: self.dim,
            coords,
        })
    }

    /// Points that fall in cell `cell` of `partition`.
    pub fn restrict_to_cell(&self, partition: &DyadicPartition, cell: usize) -> PointCloud {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| partition.cell_of(self.get(i)) == Some(cell))
            .collect();
        self.select(&idx)
    }

    /// Reads a cloud from CSV with a header row `x0,...,x{d-1}`.
    pub fn read_csv<R: Read>(reader: R) -> Result<PointCloud> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let dim = rdr.headers()?.len();
        if dim == 0 {
            return Err(Error::Empty("csv header"));
        }
        let mut cloud = PointCloud::new(dim);
        for record in rdr.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|field| {
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidParameter(format!("not a number: {field:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            cloud.push(&row)?;
        }
        Ok(cloud)
    }

    pub fn from_csv_str(text: &str) -> Result<PointCloud> {
        PointCloud::read_csv(text.as_bytes())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record((0..self.dim).map(|k| format!("x{k}")))?;
        for p in self.iter() {
            wtr.write_record(p.iter().map(|c| c.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

impl Serialize for PointCloud {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            dim: usize,
            points: Vec<&'a [f64]>,
        }
        Repr {
            dim: self.dim,
            points: self.iter().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            dim: usize,
            points: Vec<Vec<f64>>,
        }
        let repr = Repr::deserialize(d)?;
        if repr.dim == 0 {
            return Err(serde::de::Error::custom("dimension must be positive"));
        }
        PointCloud::from_rows(repr.dim, repr.points).map_err(serde::de::Error::custom)
    }
}

/// Largest pairwise distance of a nonempty cloud (exhaustive pair scan).
pub fn diameter(points: &PointCloud) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("diameter of an empty cloud"));
    }
    let mut best: f64 = 0.0;
    for i in 0..points.len() {
        let xi = points.get(i);
        for j in i + 1..points.len() {
            best = best.max(sq_dist(xi, points.get(j)));
        }
    }
    Ok(best.sqrt())
}

/// Diameter of the union of several clouds; `0` when all are empty.
pub fn union_diameter(clouds: &[&PointCloud]) -> f64 {
    let Some(first) = clouds.first() else {
        return 0.0;
    };
    let dim = first.dim();
    let all: Vec<&[f64]> = clouds
        .iter()
        .filter(|c| c.dim() == dim)
        .flat_map(|c| c.iter())
        .collect();
    let mut best: f64 = 0.0;
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            best = best.max(sq_dist(a, b));
        }
    }
    best.sqrt()
}

/// Axis-aligned box `[lo, hi]`.
///
/// Membership in a partition cell uses the half-open box `[lo, hi)`; boundary
/// distances use the closed box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    lo: Point,
    hi: Point,
}

impl BoxRegion {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                expected: lo.dim(),
                found: hi.dim(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidBox(format!("lo {:?} must be below hi {:?}", lo.0, hi.0)));
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn from_bounds(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        BoxRegion::new(Point::new(lo)?, Point::new(hi)?)
    }

    /// `[0,1]^d`.
    pub fn unit(dim: usize) -> Self {
        BoxRegion {
            lo: Point::origin(dim),
            hi: Point::splat(dim, 1.0),
        }
    }

    /// `[origin, origin + side]^d`.
    pub fn cube(dim: usize, origin: f64, side: f64) -> Result<Self> {
        BoxRegion::new(Point::splat(dim, origin), Point::splat(dim, origin + side))
    }

    /// Re-checks the invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        BoxRegion::new(Point::new(self.lo.0.clone())?, Point::new(self.hi.0.clone())?).map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn lo(&self) -> &Point {
        &self.lo
    }

    pub fn hi(&self) -> &Point {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.side(k)).product()
    }

    /// `|hi - lo|`.
    pub fn diameter(&self) -> f64 {
        sq_dist(&self.lo, &self.hi).sqrt()
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(k, &c)| self.lo[k] <= c && c <= self.hi[k])
    }

    pub fn contains_half_open(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(k, &c)| self.lo[k] <= c && c < self.hi[k])
    }

    /// Image of the box under `x -> shift + lambda * x`, `lambda > 0`.
    pub fn affine(&self, shift: &[f64], lambda: f64) -> Result<BoxRegion> {
        let map = |p: &Point| -> Vec<f64> {
            p.iter().zip(shift).map(|(c, s)| s + lambda * c).collect()
        };
        BoxRegion::from_bounds(map(&self.lo), map(&self.hi))
    }

    pub fn boundary_dist(&self, x: &[f64]) -> Result<f64> {
        boundary_dist(x, self)
    }
}

/// Distance from a point of the closed box to the box boundary.
pub fn boundary_dist(x: &[f64], s: &BoxRegion) -> Result<f64> {
    if x.len() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: x.len(),
        });
    }
    if !s.contains_closed(x) {
        return Err(Error::OutsideRegion);
    }
    Ok(boundary_dist_unchecked(x, s))
}

#[inline]
pub(crate) fn boundary_dist_unchecked(x: &[f64], s: &BoxRegion) -> f64 {
    x.iter()
        .enumerate()
        .map(|(k, &c)| (c - s.lo[k]).min(s.hi[k] - c))
        .fold(f64::INFINITY, f64::min)
}

/// Largest supported `level * dim`, i.e. at most 2^24 cells.
const MAX_CELL_EXPONENT: u32 = 24;

/// Subdivision of a box into `2^(level*d)` congruent cells.
///
/// Cells are numbered lexicographically with axis 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicPartition {
    root: BoxRegion,
    level: u32,
    cells: Vec<BoxRegion>,
}

pub fn dyadic_partition(root: &BoxRegion, level: u32) -> Result<DyadicPartition> {
    DyadicPartition::new(root.clone(), level)
}

impl DyadicPartition {
    pub fn new(root: BoxRegion, level: u32) -> Result<Self> {
        let dim = root.dim() as u32;
        let exponent = level
            .checked_mul(dim)
            .filter(|&e| e <= MAX_CELL_EXPONENT)
            .ok_or(Error::SizeLimit {
                what: "dyadic partition cells (log2)",
                limit: MAX_CELL_EXPONENT as usize,
                got: (level as usize).saturating_mul(dim as usize),
            })?;
        let per_axis = 1u64 << level;
        for k in 0..root.dim() {
            let first = grid(root.lo[k], root.hi[k], 1, per_axis);
            if !(first > root.lo[k]) {
                return Err(Error::PartitionTooFine { level });
            }
        }
        let count = 1usize << exponent;
        let mut cells = Vec::with_capacity(count);
        let mut index = vec![0u64; root.dim()];
        for _ in 0..count {
            let lo: Vec<f64> = (0..root.dim())
                .map(|k| grid(root.lo[k], root.hi[k], index[k], per_axis))
                .collect();
            let hi: Vec<f64> = (0..root.dim())
                .map(|k| grid(root.lo[k], root.hi[k], index[k] + 1, per_axis))
                .collect();
            cells.push(BoxRegion::from_bounds(lo, hi).map_err(|_| Error::PartitionTooFine { level })?);
            for k in (0..root.dim()).rev() {
                index[k] += 1;
                if index[k] < per_axis {
                    break;
                }
                index[k] = 0;
            }
        }
        Ok(DyadicPartition { root, level, cells })
    }

    pub fn root(&self) -> &BoxRegion {
        &self.root
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells(&self) -> &[BoxRegion] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the cell containing `x`.
    ///
    /// Cells are half-open, except that points on the upper faces of the root
    /// belong to the last cell along that axis. Returns `None` outside the
    /// closed root box.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        if !self.root.contains_closed(x) {
            return None;
        }
        let per_axis = 1u64 << self.level;
        let mut cell = 0usize;
        for (k, &c) in x.iter().enumerate() {
            let (lo, hi) = (self.root.lo[k], self.root.hi[k]);
            let guess = (((c - lo) / (hi - lo)) * per_axis as f64).floor();
            let mut i = (guess.max(0.0) as u64).min(per_axis - 1);
            // Align with the exact cell faces used to build the cells.
            while i > 0 && c < grid(lo, hi, i, per_axis) {
                i -= 1;
            }
            while i + 1 < per_axis && c >= grid(lo, hi, i + 1, per_axis) {
                i += 1;
            }
            cell = cell * per_axis as usize + i as usize;
        }
        Some(cell)
    }

    /// Indices of `cloud` grouped by cell.
    pub fn assign(&self, cloud: &PointCloud) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.cells.len()];
        for (i, p) in cloud.iter().enumerate() {
            if let Some(c) = self.cell_of(p) {
                groups[c].push(i);
            }
        }
        groups
    }
}

#[inline]
fn grid(lo: f64, hi: f64, i: u64, per_axis: u64) -> f64 {
    if i == per_axis {
        hi
    } else {
        lo + (hi - lo) * (i as f64) / (per_axis as f64)
    }
}
