//! Randomized battery for the constant-bearing inequalities.
//!
//! Each check evaluates a left side and a right side on every instance and
//! counts a violation when `lhs > rhs + LEMMA_TOL`. The first violating
//! instance is shrunk by greedy point removal and kept for replay.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::sum_in_order;
use crate::error::{Error, Result};
use crate::estimators::boundary_lower_bound;
use crate::functional::Functional;
use crate::geometry::{union_diameter, BoxRegion, PointCloud};
use crate::graph::{check_axioms, AxiomReport, FamilyKind, GraphFamily};
use crate::matching::{CostParams, SCHEMA_VERSION};
use crate::sampling::{stream_rng, Lane};

/// Absolute slack on every inequality.
pub const LEMMA_TOL: f64 = 1e-9;

/// Relative tolerance of the homogeneity check.
pub const HOMOGENEITY_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomogeneityTarget {
    Matching,
    Tsp,
    BoundaryMatching,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    SubadditivityMatching,
    RegularityMatching,
    SubadditivityGeneric(GraphFamily),
    InverseSubaddMatching,
    InverseSubaddTsp,
    BoundarySuperadditivity,
    Homogeneity(HomogeneityTarget),
}

impl Check {
    pub fn name(&self) -> String {
        match self {
            Check::SubadditivityMatching => "subadditivity-matching".into(),
            Check::RegularityMatching => "regularity-matching".into(),
            Check::SubadditivityGeneric(f) => format!("subadditivity-{f}"),
            Check::InverseSubaddMatching => "inverse-subadditivity-matching".into(),
            Check::InverseSubaddTsp => "inverse-subadditivity-tsp".into(),
            Check::BoundarySuperadditivity => "boundary-superadditivity".into(),
            Check::Homogeneity(HomogeneityTarget::Matching) => "homogeneity-matching".into(),
            Check::Homogeneity(HomogeneityTarget::Tsp) => "homogeneity-tsp".into(),
            Check::Homogeneity(HomogeneityTarget::BoundaryMatching) => "homogeneity-boundary-matching".into(),
        }
    }

    /// Size of the default corpus.
    pub fn default_count(&self) -> usize {
        match self {
            Check::SubadditivityGeneric(_) | Check::InverseSubaddTsp => 200,
            _ => 500,
        }
    }

    fn salt(&self) -> u64 {
        let tag = match self {
            Check::SubadditivityMatching => 1,
            Check::RegularityMatching => 2,
            Check::SubadditivityGeneric(f) => 3 + 16 * f.kappa0() as u64 + 256 * f.kappa() as u64,
            Check::InverseSubaddMatching => 4,
            Check::InverseSubaddTsp => 5,
            Check::BoundarySuperadditivity => 6,
            Check::Homogeneity(t) => 7 + 16 * (*t as u64),
        };
        tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// One randomized instance. The meaning of the groups depends on the check:
/// subadditivity uses `k` groups, regularity `[base, inserted, removed]`,
/// inverse subadditivity `[1, 2]`, and the other checks a single pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaInstance {
    pub p: f64,
    pub xs: Vec<PointCloud>,
    pub ys: Vec<PointCloud>,
    /// Root box for boundary checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<BoxRegion>,
    #[serde(default)]
    pub level: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shift: Vec<f64>,
    #[serde(default = "one")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

impl LemmaInstance {
    pub fn point_count(&self) -> usize {
        self.xs.iter().chain(&self.ys).map(PointCloud::len).sum()
    }

    fn params(&self) -> Result<CostParams> {
        CostParams::with_p(self.p)
    }

    fn all_clouds(&self) -> Vec<&PointCloud> {
        self.xs.iter().chain(&self.ys).collect()
    }

    fn delta_p(&self, params: &CostParams) -> f64 {
        params.pow(union_diameter(&self.all_clouds()))
    }
}

/// Evaluates functionals for the checks. Replaced in negative-path tests.
pub trait CostOracle: Sync {
    fn cost(&self, functional: &Functional, x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<f64> {
        functional.cost(x, y, params)
    }
}

/// The crate's exact solvers.
pub struct ExactOracle;

impl CostOracle for ExactOracle {}

/// Exact cost plus `amount * (|X| + |Y|)^2`; a deliberately broken solver
/// used to exercise the failure path.
#[doc(hidden)]
pub struct PerturbedOracle {
    pub amount: f64,
}

impl CostOracle for PerturbedOracle {
    fn cost(&self, functional: &Functional, x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<f64> {
        let k = (x.len() + y.len()) as f64;
        Ok(functional.cost(x, y, params)? + self.amount * k * k)
    }
}

fn union(clouds: &[PointCloud], dim: usize) -> Result<PointCloud> {
    PointCloud::union_all(dim, clouds.iter())
}

fn card_gap(x: &PointCloud, y: &PointCloud) -> f64 {
    x.len().abs_diff(y.len()) as f64
}

fn dim_of(inst: &LemmaInstance) -> Result<usize> {
    inst.xs
        .first()
        .or(inst.ys.first())
        .map(PointCloud::dim)
        .ok_or(Error::Empty("instance groups"))
}

fn expect_groups(inst: &LemmaInstance, k: usize, check: &Check) -> Result<()> {
    if inst.xs.len() != k || inst.ys.len() != k {
        return Err(Error::InvalidParameter(format!(
            "{check} expects {k} groups per side, got {} and {}",
            inst.xs.len(),
            inst.ys.len()
        )));
    }
    Ok(())
}

fn require_p_at_most_one(inst: &LemmaInstance, check: &Check) -> Result<()> {
    if inst.p > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "{check} is only established for p <= 1, got p = {}",
            inst.p
        )));
    }
    Ok(())
}

/// `(lhs, rhs)` of `check` on `inst`; the inequality asserted is `lhs <= rhs`.
pub fn evaluate(check: &Check, inst: &LemmaInstance, oracle: &dyn CostOracle) -> Result<(f64, f64)> {
    let params = inst.params()?;
    let d = dim_of(inst)?;
    let delta_p = inst.delta_p(&params);
    let l = |f: &Functional, x: &PointCloud, y: &PointCloud| oracle.cost(f, x, y, &params);
    match check {
        Check::SubadditivityMatching | Check::SubadditivityGeneric(_) => {
            if inst.xs.len() != inst.ys.len() || inst.xs.len() < 2 {
                return Err(Error::InvalidParameter(format!("{check} needs k >= 2 paired groups")));
            }
            let (f, c, counted) = match check {
                // Only the excess cardinality is charged for matchings.
                Check::SubadditivityMatching => (Functional::Matching, 0.5, false),
                Check::SubadditivityGeneric(fam) => (Functional::Graph(*fam), fam.subadditivity_constant(), true),
                _ => unreachable!(),
            };
            let lhs = l(&f, &union(&inst.xs, d)?, &union(&inst.ys, d)?)?;
            let mut terms = Vec::new();
            for (x, y) in inst.xs.iter().zip(&inst.ys) {
                terms.push(l(&f, x, y)?);
                if counted {
                    if !(x.is_empty() && y.is_empty()) {
                        terms.push(c * delta_p * (1.0 + card_gap(x, y)));
                    }
                } else {
                    terms.push(c * delta_p * card_gap(x, y));
                }
            }
            Ok((lhs, sum_in_order(terms.into_iter())))
        }
        Check::RegularityMatching => {
            expect_groups(inst, 3, check)?;
            let f = Functional::Matching;
            let (x, x1, x2) = (&inst.xs[0], &inst.xs[1], &inst.xs[2]);
            let (y, y1, y2) = (&inst.ys[0], &inst.ys[1], &inst.ys[2]);
            let lhs = l(&f, &x.union(x1)?, &y.union(y1)?)?;
            let base = l(&f, &x.union(x2)?, &y.union(y2)?)?;
            let moved = (x1.len() + x2.len() + y1.len() + y2.len()) as f64;
            Ok((lhs, base + delta_p * moved))
        }
        Check::InverseSubaddMatching | Check::InverseSubaddTsp => {
            expect_groups(inst, 2, check)?;
            require_p_at_most_one(inst, check)?;
            let (x1, x2, y1, y2) = (&inst.xs[0], &inst.xs[1], &inst.ys[0], &inst.ys[1]);
            let (f, slack) = if *check == Check::InverseSubaddMatching {
                (Functional::Matching, delta_p * (card_gap(x1, y1) + 2.0 * card_gap(x2, y2)))
            } else {
                (
                    Functional::Graph(GraphFamily::tsp()),
                    2.0 * delta_p * (1.0 + card_gap(x1, y1) + card_gap(x2, y2)),
                )
            };
            let lhs = l(&f, x1, y1)?;
            let whole = l(&f, &x1.union(x2)?, &y1.union(y2)?)?;
            let second = l(&f, x2, y2)?;
            Ok((lhs, sum_in_order([whole, second, slack].into_iter())))
        }
        Check::BoundarySuperadditivity => {
            expect_groups(inst, 1, check)?;
            let region = inst
                .region
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("boundary check needs a region".into()))?;
            let (x, y) = (&inst.xs[0], &inst.ys[0]);
            let bound = boundary_lower_bound(x, y, region, inst.level, &params)?;
            // The decomposition itself uses the exact solver; only the root
            // value goes through the oracle.
            let root = l(&Functional::BoundaryMatching(region.clone()), x, y)?;
            Ok((bound.bound, root))
        }
        Check::Homogeneity(target) => {
            expect_groups(inst, 1, check)?;
            let (x, y) = (&inst.xs[0], &inst.ys[0]);
            let f = match target {
                HomogeneityTarget::Matching => Functional::Matching,
                HomogeneityTarget::Tsp => Functional::Graph(GraphFamily::tsp()),
                HomogeneityTarget::BoundaryMatching => Functional::BoundaryMatching(
                    inst.region
                        .clone()
                        .ok_or_else(|| Error::InvalidParameter("boundary homogeneity needs a region".into()))?,
                ),
            };
            let shift = if inst.shift.is_empty() { vec![0.0; d] } else { inst.shift.clone() };
            let moved = f.transformed(&shift, inst.lambda)?;
            let a = l(&moved, &x.affine(&shift, inst.lambda)?, &y.affine(&shift, inst.lambda)?)?;
            let b = inst.lambda.powf(inst.p) * l(&f, x, y)?;
            Ok(((a - b).abs(), HOMOGENEITY_RTOL * a.abs().max(b.abs())))
        }
    }
}

fn violates(check: &Check, inst: &LemmaInstance, oracle: &dyn CostOracle) -> bool {
    matches!(evaluate(check, inst, oracle), Ok((lhs, rhs)) if lhs > rhs + LEMMA_TOL)
}

/// Greedy shrinking: drop single points while the violation persists.
pub fn shrink(check: &Check, inst: &LemmaInstance, oracle: &dyn CostOracle) -> LemmaInstance {
    let mut cur = inst.clone();
    loop {
        let mut improved = false;
        'scan: for side in 0..2 {
            let groups = if side == 0 { cur.xs.len() } else { cur.ys.len() };
            for g in 0..groups {
                let len = if side == 0 { cur.xs[g].len() } else { cur.ys[g].len() };
                for i in 0..len {
                    let mut cand = cur.clone();
                    if side == 0 {
                        cand.xs[g] = cand.xs[g].without(i);
                    } else {
                        cand.ys[g] = cand.ys[g].without(i);
                    }
                    if violates(check, &cand, oracle) {
                        cur = cand;
                        improved = true;
                        break 'scan;
                    }
                }
            }
        }
        if !improved {
            return cur;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub original: LemmaInstance,
    pub shrunk: LemmaInstance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub schema_version: u32,
    pub check: String,
    pub instances: usize,
    pub violations: usize,
    /// Largest `lhs - rhs`; negative when every instance holds strictly.
    pub max_excess: f64,
    /// Largest `lhs / rhs` over instances with `rhs > 0`.
    pub max_usage: f64,
    pub counterexample: Option<Counterexample>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Runs `check` over `instances`.
pub fn run_check(check: &Check, instances: &[LemmaInstance], oracle: &dyn CostOracle) -> Result<LemmaReport> {
    let values = instances
        .par_iter()
        .map(|inst| evaluate(check, inst, oracle))
        .collect::<Result<Vec<_>>>()?;
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_usage: f64 = 0.0;
    let mut violations = 0;
    let mut first = None;
    for (i, &(lhs, rhs)) in values.iter().enumerate() {
        max_excess = max_excess.max(lhs - rhs);
        if rhs > 0.0 {
            max_usage = max_usage.max(lhs / rhs);
        }
        if lhs > rhs + LEMMA_TOL {
            violations += 1;
            first.get_or_insert(i);
        }
    }
    let counterexample = first.map(|index| {
        let (lhs, rhs) = values[index];
        Counterexample {
            index,
            lhs,
            rhs,
            original: instances[index].clone(),
            shrunk: shrink(check, &instances[index], oracle),
        }
    });
    Ok(LemmaReport {
        schema_version: SCHEMA_VERSION,
        check: check.name(),
        instances: instances.len(),
        violations,
        max_excess: if instances.is_empty() { 0.0 } else { max_excess },
        max_usage,
        counterexample,
    })
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Uniform,
    Clustered,
    NearBoundary,
    Coincident,
}

fn random_cloud<R: Rng>(rng: &mut R, n: usize, region: &BoxRegion) -> PointCloud {
    let d = region.dim();
    let shape = *[Shape::Uniform, Shape::Clustered, Shape::NearBoundary, Shape::Coincident]
        .choose(rng)
        .expect("nonempty");
    let uniform = |rng: &mut R| -> Vec<f64> { (0..d).map(|k| region.lo()[k] + rng.gen::<f64>() * region.side(k)).collect() };
    let clamp = |v: Vec<f64>| -> Vec<f64> {
        v.into_iter()
            .enumerate()
            .map(|(k, c)| c.clamp(region.lo()[k], region.hi()[k]))
            .collect()
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    match shape {
        Shape::Uniform => rows.extend((0..n).map(|_| uniform(rng))),
        Shape::Clustered => {
            let centers: Vec<Vec<f64>> = (0..rng.gen_range(1..=2)).map(|_| uniform(rng)).collect();
            for _ in 0..n {
                let c = &centers[rng.gen_range(0..centers.len())];
                let p = c
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v + 0.03 * region.side(k) * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                rows.push(clamp(p));
            }
        }
        Shape::NearBoundary => {
            for _ in 0..n {
                let mut p = uniform(rng);
                let k = rng.gen_range(0..d);
                let off = 1e-3 * region.side(k) * rng.gen::<f64>();
                p[k] = if rng.gen() { region.lo()[k] + off } else { region.hi()[k] - off };
                rows.push(p);
            }
        }
        Shape::Coincident => {
            let distinct: Vec<Vec<f64>> = (0..n.div_ceil(2).max(1)).map(|_| uniform(rng)).collect();
            rows.extend((0..n).map(|i| distinct[i % distinct.len()].clone()));
        }
    }
    PointCloud::from_rows(d, rows).expect("generated rows share the dimension")
}

/// Side sizes biased toward imbalance: a third of the time one side is
/// nearly empty.
fn sizes<R: Rng>(rng: &mut R, max: usize) -> (usize, usize) {
    let a = rng.gen_range(0..=max);
    let b = if rng.gen_range(0..3) == 0 {
        rng.gen_range(0..=max.min(1))
    } else {
        rng.gen_range(0..=max)
    };
    if rng.gen() {
        (a, b)
    } else {
        (b, a)
    }
}

fn random_region<R: Rng>(rng: &mut R, d: usize) -> BoxRegion {
    if rng.gen_range(0..3) == 0 {
        let lo: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.2..3.0)).collect();
        BoxRegion::from_bounds(lo, hi).expect("positive sides")
    } else {
        BoxRegion::unit(d)
    }
}

/// Clips groups so that the union per side stays within `cap`.
fn cap_union(groups: &mut [PointCloud], cap: usize) {
    let mut left = cap;
    for g in groups.iter_mut() {
        if g.len() > left {
            *g = g.select(&(0..left).collect::<Vec<_>>());
        }
        left -= g.len();
    }
}

fn grouped<R: Rng>(rng: &mut R, k: usize, max_each: usize, cap: usize, p: f64) -> LemmaInstance {
    let d = rng.gen_range(1..=3);
    let region = random_region(rng, d);
    let mut xs = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for _ in 0..k {
        let (a, b) = sizes(rng, max_each);
        xs.push(random_cloud(rng, a, &region));
        ys.push(random_cloud(rng, b, &region));
    }
    cap_union(&mut xs, cap);
    cap_union(&mut ys, cap);
    LemmaInstance {
        p,
        xs,
        ys,
        region: Some(region),
        level: 0,
        shift: Vec::new(),
        lambda: 1.0,
    }
}

/// Deterministic adversarial corpus of `count` instances for `check`.
pub fn default_corpus(check: &Check, seed: u64, count: usize) -> Vec<LemmaInstance> {
    let seed = seed ^ check.salt();
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, Lane::Aux, i as u64);
            let pick = |rng: &mut _, ps: &[f64]| *ps.choose(rng).expect("nonempty");
            match check {
                Check::SubadditivityMatching => {
                    let k = rng.gen_range(2..=4);
                    let p = pick(&mut rng, &[0.5, 1.0, 2.0]);
                    grouped(&mut rng, k, 5, 20, p)
                }
                Check::RegularityMatching => {
                    let p = pick(&mut rng, &[0.5, 1.0, 2.0]);
                    let mut inst = grouped(&mut rng, 3, 4, 12, p);
                    // Keep the two modified sets small relative to the base.
                    for side in [&mut inst.xs, &mut inst.ys] {
                        for g in 1..3 {
                            let keep = side[g].len().min(3);
                            side[g] = side[g].select(&(0..keep).collect::<Vec<_>>());
                        }
                    }
                    inst
                }
                Check::SubadditivityGeneric(fam) => {
                    let k = rng.gen_range(2..=3);
                    let p = pick(&mut rng, &[0.5, 1.0, 2.0]);
                    let cap = if fam.kind() == FamilyKind::TspTour { 8 } else { 5 };
                    grouped(&mut rng, k, 4, cap, p)
                }
                Check::InverseSubaddMatching => {
                    let p = pick(&mut rng, &[0.5, 0.75, 1.0]);
                    grouped(&mut rng, 2, 6, 12, p)
                }
                Check::InverseSubaddTsp => {
                    let p = pick(&mut rng, &[0.5, 1.0]);
                    grouped(&mut rng, 2, 4, 8, p)
                }
                Check::BoundarySuperadditivity => {
                    let p = pick(&mut rng, &[0.5, 1.0, 2.0]);
                    let mut inst = grouped(&mut rng, 1, 12, 12, p);
                    let d = inst.xs[0].dim();
                    inst.level = if d == 3 { 1 } else { rng.gen_range(1..=2) };
                    inst
                }
                Check::Homogeneity(target) => {
                    let p = pick(&mut rng, &[0.5, 0.7, 1.0, 2.0]);
                    let cap = if *target == HomogeneityTarget::Tsp { 6 } else { 8 };
                    let mut inst = grouped(&mut rng, 1, cap, cap, p);
                    let d = inst.xs[0].dim();
                    inst.lambda = pick(&mut rng, &[0.5, 1.0, 2.0, 7.3]);
                    inst.shift = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
                    inst
                }
            }
        })
        .collect()
}

pub fn check_subadditivity_matching(instances: &[LemmaInstance]) -> Result<LemmaReport> {
    run_check(&Check::SubadditivityMatching, instances, &ExactOracle)
}

pub fn check_regularity_matching(instances: &[LemmaInstance]) -> Result<LemmaReport> {
    run_check(&Check::RegularityMatching, instances, &ExactOracle)
}

pub fn check_subadditivity_generic(family: &GraphFamily, instances: &[LemmaInstance]) -> Result<LemmaReport> {
    run_check(&Check::SubadditivityGeneric(*family), instances, &ExactOracle)
}

pub fn check_inverse_subadd_matching(instances: &[LemmaInstance]) -> Result<LemmaReport> {
    run_check(&Check::InverseSubaddMatching, instances, &ExactOracle)
}

pub fn check_inverse_subadd_tsp(instances: &[LemmaInstance]) -> Result<LemmaReport> {
    run_check(&Check::InverseSubaddTsp, instances, &ExactOracle)
}

pub fn check_boundary_superadditivity(instances: &[LemmaInstance]) -> Result<LemmaReport> {
    run_check(&Check::BoundarySuperadditivity, instances, &ExactOracle)
}

pub fn check_homogeneity(target: HomogeneityTarget, instances: &[LemmaInstance]) -> Result<LemmaReport> {
    run_check(&Check::Homogeneity(target), instances, &ExactOracle)
}

/// Named groups of checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    All,
    Subadd,
    Regularity,
    Inverse,
    Boundary,
    Homogeneity,
    Axioms,
}

impl Suite {
    pub fn checks(&self) -> Vec<Check> {
        let rreg2 = GraphFamily::r_regular(2).expect("r = 2 is valid");
        match self {
            Suite::All => [Suite::Subadd, Suite::Regularity, Suite::Inverse, Suite::Boundary, Suite::Homogeneity]
                .iter()
                .flat_map(|s| s.checks())
                .collect(),
            Suite::Subadd => vec![
                Check::SubadditivityMatching,
                Check::SubadditivityGeneric(GraphFamily::tsp()),
                Check::SubadditivityGeneric(rreg2),
            ],
            Suite::Regularity => vec![Check::RegularityMatching],
            Suite::Inverse => vec![Check::InverseSubaddMatching, Check::InverseSubaddTsp],
            Suite::Boundary => vec![Check::BoundarySuperadditivity],
            Suite::Homogeneity => vec![
                Check::Homogeneity(HomogeneityTarget::Matching),
                Check::Homogeneity(HomogeneityTarget::Tsp),
                Check::Homogeneity(HomogeneityTarget::BoundaryMatching),
            ],
            Suite::Axioms => Vec::new(),
        }
    }

    pub fn includes_axioms(&self) -> bool {
        matches!(self, Suite::All | Suite::Axioms)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "subadd" => Suite::Subadd,
            "regularity" => Suite::Regularity,
            "inverse" => Suite::Inverse,
            "boundary" => Suite::Boundary,
            "homogeneity" => Suite::Homogeneity,
            "axioms" => Suite::Axioms,
            other => return Err(Error::InvalidParameter(format!("unknown suite '{other}'"))),
        })
    }
}

/// Largest size enumerated by the axiom checks of a suite run.
pub const SUITE_AXIOM_N_MAX: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub seed: u64,
    pub reports: Vec<LemmaReport>,
    pub axioms: Vec<AxiomReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(LemmaReport::passed) && self.axioms.iter().all(AxiomReport::all_ok)
    }
}

/// Runs a suite on its default corpora; `count` overrides the corpus sizes.
pub fn run_suite(suite: Suite, seed: u64, count: Option<usize>, oracle: &dyn CostOracle) -> Result<SuiteReport> {
    let mut reports = Vec::new();
    for check in suite.checks() {
        let corpus = default_corpus(&check, seed, count.unwrap_or_else(|| check.default_count()));
        reports.push(run_check(&check, &corpus, oracle)?);
    }
    let mut axioms = Vec::new();
    if suite.includes_axioms() {
        for fam in [
            GraphFamily::matching(),
            GraphFamily::tsp(),
            GraphFamily::spanning_tree(2)?,
            GraphFamily::r_regular(2)?,
        ] {
            axioms.push(check_axioms(&fam, SUITE_AXIOM_N_MAX)?);
        }
    }
    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        seed,
        reports,
        axioms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(d: usize, rows: &[&[f64]]) -> PointCloud {
        PointCloud::from_rows(d, rows.iter().map(|r| r.to_vec())).unwrap()
    }

    fn inst(p: f64, xs: Vec<PointCloud>, ys: Vec<PointCloud>) -> LemmaInstance {
        LemmaInstance {
            p,
            xs,
            ys,
            region: None,
            level: 0,
            shift: Vec::new(),
            lambda: 1.0,
        }
    }

    #[test]
    fn all_groups_empty() {
        let e = PointCloud::new(2);
        let i = inst(1.0, vec![e.clone(), e.clone()], vec![e.clone(), e]);
        assert_eq!(evaluate(&Check::SubadditivityMatching, &i, &ExactOracle).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn balanced_disjoint_boxes() {
        let x1 = pc(2, &[&[0.1, 0.1], &[0.2, 0.3]]);
        let y1 = pc(2, &[&[0.15, 0.2], &[0.3, 0.1]]);
        let x2 = pc(2, &[&[0.8, 0.9]]);
        let y2 = pc(2, &[&[0.9, 0.8]]);
        let i = inst(1.0, vec![x1, x2], vec![y1, y2]);
        let (lhs, rhs) = evaluate(&Check::SubadditivityMatching, &i, &ExactOracle).unwrap();
        assert!(lhs <= rhs + LEMMA_TOL);
    }

    #[test]
    fn regularity_identity_case() {
        let x = pc(1, &[&[0.0], &[0.5]]);
        let y = pc(1, &[&[0.2]]);
        let a = pc(1, &[&[0.9]]);
        let b = PointCloud::new(1);
        let i = inst(1.0, vec![x, a.clone(), a], vec![y, b.clone(), b]);
        let (lhs, rhs) = evaluate(&Check::RegularityMatching, &i, &ExactOracle).unwrap();
        // Equal modifications: lhs is the first rhs term, the slack is 2 diam.
        assert!((rhs - lhs - 2.0 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn inverse_rejects_large_p() {
        let e = PointCloud::new(1);
        let i = inst(2.0, vec![e.clone(), e.clone()], vec![e.clone(), e]);
        assert!(evaluate(&Check::InverseSubaddMatching, &i, &ExactOracle).is_err());
        assert!(evaluate(&Check::InverseSubaddTsp, &i, &ExactOracle).is_err());
    }

    #[test]
    fn inverse_tsp_small_first_group() {
        let x1 = pc(2, &[&[0.0, 0.0]]);
        let y1 = pc(2, &[&[1.0, 1.0], &[0.0, 1.0]]);
        let x2 = pc(2, &[&[0.5, 0.5], &[0.2, 0.2]]);
        let y2 = pc(2, &[&[0.5, 0.6]]);
        let i = inst(1.0, vec![x1, x2], vec![y1, y2]);
        let (lhs, _) = evaluate(&Check::InverseSubaddTsp, &i, &ExactOracle).unwrap();
        assert_eq!(lhs, 0.0);
    }

    #[test]
    fn homogeneity_forced_cases() {
        let x = pc(2, &[&[0.1, 0.2], &[0.7, 0.4]]);
        let y = pc(2, &[&[0.3, 0.9], &[0.5, 0.5]]);
        let mut i = inst(2.0, vec![x], vec![y]);
        i.lambda = 2.0;
        i.shift = vec![1.0, -1.0];
        let (diff, tol) = evaluate(&Check::Homogeneity(HomogeneityTarget::Matching), &i, &ExactOracle).unwrap();
        assert!(diff <= tol);
        i.region = Some(BoxRegion::unit(2));
        let (diff, tol) = evaluate(&Check::Homogeneity(HomogeneityTarget::BoundaryMatching), &i, &ExactOracle).unwrap();
        assert!(diff <= tol);
    }

    #[test]
    fn corpora_are_deterministic() {
        for check in Suite::All.checks() {
            assert_eq!(default_corpus(&check, 5, 10), default_corpus(&check, 5, 10));
        }
        assert_ne!(
            default_corpus(&Check::SubadditivityMatching, 5, 3),
            default_corpus(&Check::SubadditivityMatching, 6, 3)
        );
    }

    #[test]
    fn small_suite_passes() {
        let r = run_suite(Suite::All, 3, Some(20), &ExactOracle).unwrap();
        for rep in &r.reports {
            assert!(rep.passed(), "{}", rep.to_json());
            assert_eq!(rep.instances, 20);
        }
        assert_eq!(r.axioms.len(), 4);
        assert!(r.passed());
    }

    #[test]
    fn perturbed_solver_is_caught_and_shrunk() {
        let oracle = PerturbedOracle { amount: 0.5 };
        let check = Check::SubadditivityMatching;
        let corpus = default_corpus(&check, 1, 50);
        let r = run_check(&check, &corpus, &oracle).unwrap();
        assert!(r.violations > 0);
        let cx = r.counterexample.unwrap();
        assert!(cx.shrunk.point_count() <= cx.original.point_count());
        assert!(violates(&check, &cx.shrunk, &oracle));
        // Minimal: no single point can be dropped.
        let again = shrink(&check, &cx.shrunk, &oracle);
        assert_eq!(again, cx.shrunk);
    }

    #[test]
    fn instance_json_roundtrip() {
        let corpus = default_corpus(&Check::BoundarySuperadditivity, 2, 3);
        let text = serde_json::to_string(&corpus).unwrap();
        let back: Vec<LemmaInstance> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, corpus);
    }
}
