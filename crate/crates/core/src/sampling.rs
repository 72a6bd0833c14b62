//! Seeded generation of i.i.d. and Poissonized samples.
//!
//! Every draw comes from a ChaCha8 stream keyed by `(seed, lane)` and
//! positioned on `stream`, so trial `i` of an experiment reproduces the same
//! clouds whatever the execution order. Lane 0 feeds `X`, lane 1 feeds `Y`,
//! lane 2 draws the Poisson cardinalities. The Poissonized cloud is the
//! prefix of the same point sequence used by the fixed-size cloud.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, BoxRegion, DyadicPartition, Point, PointCloud};

const WEIGHT_TOL: f64 = 1e-12;

/// Number of ternary digits drawn per Cantor sample; `3^-40` is below `f64`
/// resolution on `[0,1]`.
const CANTOR_DIGITS: u32 = 40;

/// A probability law on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Uniform law on the box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Piecewise-constant density on the cells of a dyadic partition of
    /// `[lo, hi]`, with probability `weights[c]` on cell `c`.
    BlockDensity {
        lo: Vec<f64>,
        hi: Vec<f64>,
        level: u32,
        weights: Vec<f64>,
    },
    /// Uniform law on the segment `[a, b]`.
    SingularSegment { a: Vec<f64>, b: Vec<f64> },
    /// Middle-thirds Cantor measure on `[0,1]`.
    Cantor,
    /// Pareto radius on `[1, inf)` with `P(R > t) = t^-alpha`, uniform direction.
    HeavyTailRadial { alpha: f64, dim: usize },
    /// Convex combination of measures of a common dimension.
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub measure: MeasureSpec,
}

impl MeasureSpec {
    pub fn uniform_box(region: &BoxRegion) -> Self {
        MeasureSpec::UniformBox {
            lo: region.lo().to_vec(),
            hi: region.hi().to_vec(),
        }
    }

    pub fn unit_cube(dim: usize) -> Self {
        MeasureSpec::uniform_box(&BoxRegion::unit(dim))
    }

    pub fn block_density(partition: &DyadicPartition, weights: Vec<f64>) -> Self {
        MeasureSpec::BlockDensity {
            lo: partition.root().lo().to_vec(),
            hi: partition.root().hi().to_vec(),
            level: partition.level(),
            weights,
        }
    }

    pub fn dim(&self) -> Result<usize> {
        match self {
            MeasureSpec::UniformBox { lo, .. } | MeasureSpec::BlockDensity { lo, .. } => Ok(lo.len()),
            MeasureSpec::SingularSegment { a, .. } => Ok(a.len()),
            MeasureSpec::Cantor => Ok(1),
            MeasureSpec::HeavyTailRadial { dim, .. } => Ok(*dim),
            MeasureSpec::Mixture { components } => components
                .first()
                .ok_or(Error::Empty("mixture components"))?
                .measure
                .dim(),
        }
    }

    /// Full validation, returning the ambient dimension.
    pub fn validate(&self) -> Result<usize> {
        MeasureSampler::new(self).map(|s| s.dim())
    }

    /// Smallest box containing the support, `None` for unbounded laws.
    pub fn bounding_box(&self) -> Result<Option<BoxRegion>> {
        match self {
            MeasureSpec::UniformBox { lo, hi } | MeasureSpec::BlockDensity { lo, hi, .. } => {
                BoxRegion::from_bounds(lo.clone(), hi.clone()).map(Some)
            }
            MeasureSpec::SingularSegment { a, b } => {
                let lo: Vec<f64> = a.iter().zip(b).map(|(s, t)| s.min(*t)).collect();
                let mut hi: Vec<f64> = a.iter().zip(b).map(|(s, t)| s.max(*t)).collect();
                // A segment parallel to a face gives a degenerate box; thicken it.
                for (l, h) in lo.iter().zip(hi.iter_mut()) {
                    if !(*h > *l) {
                        *h = *l + f64::EPSILON.max(l.abs() * f64::EPSILON);
                    }
                }
                BoxRegion::from_bounds(lo, hi).map(Some)
            }
            MeasureSpec::Cantor => Ok(Some(BoxRegion::unit(1))),
            MeasureSpec::HeavyTailRadial { .. } => Ok(None),
            MeasureSpec::Mixture { components } => {
                let mut acc: Option<(Vec<f64>, Vec<f64>)> = None;
                for c in components {
                    let Some(b) = c.measure.bounding_box()? else {
                        return Ok(None);
                    };
                    acc = Some(match acc {
                        None => (b.lo().to_vec(), b.hi().to_vec()),
                        Some((lo, hi)) => (
                            lo.iter().zip(b.lo().iter()).map(|(x, y)| x.min(*y)).collect(),
                            hi.iter().zip(b.hi().iter()).map(|(x, y)| x.max(*y)).collect(),
                        ),
                    });
                }
                let (lo, hi) = acc.ok_or(Error::Empty("mixture components"))?;
                BoxRegion::from_bounds(lo, hi).map(Some)
            }
        }
    }
}

fn check_weights(weights: &[f64], what: &str) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter(format!("{what} must be non-negative and finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidParameter(format!(
            "{what} must sum to 1, got {total}"
        )));
    }
    Ok(())
}

/// A validated measure, ready to draw points.
#[derive(Clone, Debug)]
pub struct MeasureSampler {
    dim: usize,
    kind: SamplerKind,
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Uniform(BoxRegion),
    Block {
        cells: Vec<BoxRegion>,
        pick: WeightedIndex<f64>,
    },
    Segment {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Cantor,
    HeavyTail {
        alpha: f64,
    },
    Mixture {
        pick: WeightedIndex<f64>,
        parts: Vec<MeasureSampler>,
    },
}

impl MeasureSampler {
    pub fn new(spec: &MeasureSpec) -> Result<Self> {
        match spec {
            MeasureSpec::UniformBox { lo, hi } => {
                let region = BoxRegion::from_bounds(lo.clone(), hi.clone())?;
                Ok(MeasureSampler {
                    dim: region.dim(),
                    kind: SamplerKind::Uniform(region),
                })
            }
            MeasureSpec::BlockDensity {
                lo,
                hi,
                level,
                weights,
            } => {
                let root = BoxRegion::from_bounds(lo.clone(), hi.clone())?;
                let dim = root.dim();
                let partition = DyadicPartition::new(root, *level)?;
                if weights.len() != partition.len() {
                    return Err(Error::InvalidParameter(format!(
                        "block density needs {} weights, got {}",
                        partition.len(),
                        weights.len()
                    )));
                }
                check_weights(weights, "block weights")?;
                let pick = WeightedIndex::new(weights)
                    .map_err(|e| Error::InvalidParameter(format!("block weights: {e}")))?;
                Ok(MeasureSampler {
                    dim,
                    kind: SamplerKind::Block {
                        cells: partition.cells().to_vec(),
                        pick,
                    },
                })
            }
            MeasureSpec::SingularSegment { a, b } => {
                let (pa, pb) = (Point::new(a.clone())?, Point::new(b.clone())?);
                if pa.dim() != pb.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: pa.dim(),
                        found: pb.dim(),
                    });
                }
                Ok(MeasureSampler {
                    dim: pa.dim(),
                    kind: SamplerKind::Segment {
                        a: pa.into_inner(),
                        b: pb.into_inner(),
                    },
                })
            }
            MeasureSpec::Cantor => Ok(MeasureSampler {
                dim: 1,
                kind: SamplerKind::Cantor,
            }),
            MeasureSpec::HeavyTailRadial { alpha, dim } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::InvalidParameter(format!("tail exponent {alpha} must be > 0")));
                }
                if *dim == 0 {
                    return Err(Error::InvalidParameter("dimension must be positive".into()));
                }
                Ok(MeasureSampler {
                    dim: *dim,
                    kind: SamplerKind::HeavyTail { alpha: *alpha },
                })
            }
            MeasureSpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::Empty("mixture components"));
                }
                let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
                check_weights(&weights, "mixture weights")?;
                let parts = components
                    .iter()
                    .map(|c| MeasureSampler::new(&c.measure))
                    .collect::<Result<Vec<_>>>()?;
                let dim = parts[0].dim;
                if let Some(bad) = parts.iter().find(|p| p.dim != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: bad.dim,
                    });
                }
                let pick = WeightedIndex::new(&weights)
                    .map_err(|e| Error::InvalidParameter(format!("mixture weights: {e}")))?;
                Ok(MeasureSampler {
                    dim,
                    kind: SamplerKind::Mixture { pick, parts },
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes one draw into `out` (length `dim`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            SamplerKind::Uniform(region) => uniform_in(region, rng, out),
            SamplerKind::Block { cells, pick } => uniform_in(&cells[pick.sample(rng)], rng, out),
            SamplerKind::Segment { a, b } => {
                let t: f64 = rng.gen();
                for k in 0..out.len() {
                    out[k] = a[k] + t * (b[k] - a[k]);
                }
            }
            SamplerKind::Cantor => {
                let mut x = 0.0;
                let mut scale = 1.0;
                for _ in 0..CANTOR_DIGITS {
                    scale /= 3.0;
                    if rng.gen::<bool>() {
                        x += 2.0 * scale;
                    }
                }
                out[0] = x;
            }
            SamplerKind::HeavyTail { alpha } => {
                // 1 - U lies in (0, 1].
                let u = 1.0 - rng.gen::<f64>();
                let radius = u.powf(-1.0 / alpha);
                loop {
                    for c in out.iter_mut() {
                        *c = rng.sample(StandardNormal);
                    }
                    let len = norm(out);
                    if len > 0.0 {
                        for c in out.iter_mut() {
                            *c *= radius / len;
                        }
                        break;
                    }
                }
            }
            SamplerKind::Mixture { pick, parts } => parts[pick.sample(rng)].sample_into(rng, out),
        }
    }

    /// `count` i.i.d. draws.
    pub fn sample_cloud<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> PointCloud {
        let mut cloud = PointCloud::with_capacity(self.dim, count);
        let mut buf = vec![0.0; self.dim];
        for _ in 0..count {
            self.sample_into(rng, &mut buf);
            cloud.push_unchecked(&buf);
        }
        cloud
    }

    /// Two independent clouds; see the module docs for the stream layout.
    pub fn sample_pair(
        &self,
        n: f64,
        poissonized: bool,
        seed: u64,
        stream: u64,
    ) -> Result<(PointCloud, PointCloud)> {
        let (nx, ny) = sample_sizes(n, poissonized, seed, stream)?;
        let x = self.sample_cloud(&mut stream_rng(seed, Lane::X, stream), nx);
        let y = self.sample_cloud(&mut stream_rng(seed, Lane::Y, stream), ny);
        Ok((x, y))
    }
}

fn uniform_in<R: Rng + ?Sized>(region: &BoxRegion, rng: &mut R, out: &mut [f64]) {
    for (k, c) in out.iter_mut().enumerate() {
        let u: f64 = rng.gen();
        *c = region.lo()[k] + u * region.side(k);
    }
}

/// Independent random sub-streams of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lane {
    X = 0,
    Y = 1,
    Counts = 2,
    Aux = 3,
}

/// The generator for `(seed, lane)` positioned on `stream`.
pub fn stream_rng(seed: u64, lane: Lane, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(lane as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

fn sample_sizes(n: f64, poissonized: bool, seed: u64, stream: u64) -> Result<(usize, usize)> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::InvalidParameter(format!("intensity {n} must be finite and >= 0")));
    }
    if !poissonized {
        if n.fract() != 0.0 || n < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "fixed sample size {n} must be a positive integer"
            )));
        }
        return Ok((n as usize, n as usize));
    }
    if n == 0.0 {
        return Ok((0, 0));
    }
    let law = Poisson::new(n).map_err(|e| Error::InvalidParameter(format!("poisson({n}): {e}")))?;
    let mut rng = stream_rng(seed, Lane::Counts, stream);
    let nx: f64 = law.sample(&mut rng);
    let ny: f64 = law.sample(&mut rng);
    Ok((nx as usize, ny as usize))
}

/// One draw of the random pair `(X, Y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub measure: MeasureSpec,
    /// Intensity when Poissonized, exact sample size otherwise.
    pub n: f64,
    pub poissonized: bool,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

pub fn sample_pair(cfg: &SampleConfig) -> Result<(PointCloud, PointCloud)> {
    MeasureSampler::new(&cfg.measure)?.sample_pair(cfg.n, cfg.poissonized, cfg.seed, cfg.stream)
}

/// Largest Euclidean norm over `X ∪ Y`; `0` when both are empty.
pub fn max_radius(x: &PointCloud, y: &PointCloud) -> f64 {
    x.iter().chain(y.iter()).map(norm).fold(0.0, f64::max)
}
