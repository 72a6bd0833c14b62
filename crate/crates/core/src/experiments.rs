//! Monte Carlo harness for the normalized costs `E L / n^(1 - p/d)`.
//!
//! Trial `t` at intensity `n` draws its clouds from stream `(n << 32) | t`,
//! so a trial is reproducible on its own and runs that share a seed share
//! samples (plain versus boundary, fixed versus Poissonized). Trials run in
//! parallel; their costs are collected by index and reduced by pairwise
//! summation, so results do not depend on the thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::boundary_matching_cost;
use crate::error::{Error, Result};
use crate::geometry::BoxRegion;
use crate::graph::tsp_heuristic;
use crate::matching::{m_p_cost, CostParams, SCHEMA_VERSION};
use crate::sampling::{max_radius, MeasureSampler, MeasureSpec};
use crate::stats::{linear_fit, loglog_slope, mean_stderr, pairwise_sum, sample_std};

/// Fewest trials accepted by [`run_concentration`].
pub const CONCENTRATION_MIN_TRIALS: usize = 30;

/// Slope tolerance for the normalized tail moment.
pub const TAIL_SLOPE_MAX: f64 = 0.05;

const Z95: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentFunctional {
    Matching,
    #[serde(alias = "tsp-heur")]
    TspHeuristic,
}

impl ExperimentFunctional {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentFunctional::Matching => "matching",
            // Local search only bounds T_p from above.
            ExperimentFunctional::TspHeuristic => "tsp-heuristic-upper-estimate",
        }
    }
}

/// Trials per intensity: one count for the whole schedule or one per entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trials {
    Uniform(usize),
    PerN(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub functional: ExperimentFunctional,
    pub p: f64,
    #[serde(default)]
    pub eps: f64,
    pub d: usize,
    pub measure: MeasureSpec,
    pub n_schedule: Vec<u64>,
    pub trials: Trials,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub poissonized: bool,
    /// Use `L_{∂S}` with `S` the bounding box of the measure.
    #[serde(default)]
    pub boundary: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Poissonized matching with `p` on `measure`.
    pub fn new(measure: MeasureSpec, p: f64, n_schedule: Vec<u64>, trials: Trials, seed: u64) -> Result<Self> {
        Ok(ExperimentConfig {
            functional: ExperimentFunctional::Matching,
            p,
            eps: 0.0,
            d: measure.dim()?,
            measure,
            n_schedule,
            trials,
            seed,
            poissonized: true,
            boundary: false,
        })
    }

    pub fn params(&self) -> Result<CostParams> {
        CostParams::new(self.p, self.eps)
    }

    pub fn trials_at(&self, index: usize) -> usize {
        match &self.trials {
            Trials::Uniform(t) => *t,
            Trials::PerN(v) => v[index],
        }
    }

    /// `d > 2p`, the regime of the limit theorems.
    pub fn in_theory(&self) -> bool {
        self.d as f64 > 2.0 * self.p
    }

    /// Checks the configuration; returns warnings for runnable but
    /// out-of-theory settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.params()?;
        let dim = self.measure.validate()?;
        if dim != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: dim,
            });
        }
        if self.n_schedule.is_empty() {
            return Err(Error::Empty("n_schedule"));
        }
        if self.n_schedule[0] == 0 || self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "n_schedule must be positive and strictly increasing".into(),
            ));
        }
        if self.n_schedule.iter().any(|&n| n >= 1 << 32) {
            return Err(Error::InvalidParameter("n_schedule entries must be below 2^32".into()));
        }
        match &self.trials {
            Trials::Uniform(0) => return Err(Error::InvalidParameter("trials must be >= 1".into())),
            Trials::PerN(v) if v.len() != self.n_schedule.len() => {
                return Err(Error::InvalidParameter(format!(
                    "{} trial counts for {} schedule entries",
                    v.len(),
                    self.n_schedule.len()
                )))
            }
            Trials::PerN(v) if v.contains(&0) => {
                return Err(Error::InvalidParameter("trials must be >= 1".into()))
            }
            _ => {}
        }
        if self.boundary {
            if self.functional != ExperimentFunctional::Matching {
                return Err(Error::InvalidParameter(
                    "the boundary option is only available for matching".into(),
                ));
            }
            if self.measure.bounding_box()?.is_none() {
                return Err(Error::InvalidParameter(
                    "the boundary option needs a measure with bounded support".into(),
                ));
            }
        }
        let mut warnings = Vec::new();
        if !self.in_theory() {
            warnings.push(format!(
                "out-of-theory: d = {} is not larger than 2p = {}",
                self.d,
                2.0 * self.p
            ));
        }
        Ok(warnings)
    }
}

/// Monte Carlo estimate at one intensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub n: u64,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `mean / n^(1 - p/d)`.
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub p: f64,
    pub d: usize,
}

impl EstimateRecord {
    pub fn from_costs(n: u64, costs: &[f64], p: f64, d: usize) -> Self {
        let (mean, stderr) = mean_stderr(costs);
        let scale = (n as f64).powf(1.0 - p / d as f64);
        EstimateRecord {
            n,
            trials: costs.len(),
            mean,
            stderr,
            ratio: mean / scale,
            ratio_stderr: stderr / scale,
            p,
            d,
        }
    }
}

/// Per-trial costs of a run, one vector per schedule entry.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialCosts {
    pub n_schedule: Vec<u64>,
    pub costs: Vec<Vec<f64>>,
}

impl TrialCosts {
    pub fn records(&self, p: f64, d: usize) -> Vec<EstimateRecord> {
        self.n_schedule
            .iter()
            .zip(&self.costs)
            .map(|(&n, c)| EstimateRecord::from_costs(n, c, p, d))
            .collect()
    }
}

pub fn trial_stream(n: u64, trial: usize) -> u64 {
    (n << 32) | trial as u64
}

/// Runs every trial of `cfg` and keeps the raw costs.
pub fn run_trial_costs(cfg: &ExperimentConfig) -> Result<TrialCosts> {
    cfg.validate()?;
    let params = cfg.params()?;
    let sampler = MeasureSampler::new(&cfg.measure)?;
    let region = if cfg.boundary { cfg.measure.bounding_box()? } else { None };
    let mut costs = Vec::with_capacity(cfg.n_schedule.len());
    for (k, &n) in cfg.n_schedule.iter().enumerate() {
        let c = (0..cfg.trials_at(k))
            .into_par_iter()
            .map(|t| {
                let (x, y) = sampler.sample_pair(n as f64, cfg.poissonized, cfg.seed, trial_stream(n, t))?;
                match (cfg.functional, &region) {
                    (ExperimentFunctional::Matching, None) => m_p_cost(&x, &y, &params),
                    (ExperimentFunctional::Matching, Some(s)) => boundary_matching_cost(&x, &y, &params, s),
                    (ExperimentFunctional::TspHeuristic, _) => tsp_heuristic(&x, &y, &params),
                }
                .map(|r| r.cost)
            })
            .collect::<Result<Vec<f64>>>()?;
        costs.push(c);
    }
    Ok(TrialCosts {
        n_schedule: cfg.n_schedule.clone(),
        costs,
    })
}

/// Per-intensity mean cost, standard error and normalized ratio.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<EstimateRecord>> {
    Ok(run_trial_costs(cfg)?.records(cfg.p, cfg.d))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    n: u64,
    trials: usize,
    mean: f64,
    stderr: f64,
    ratio: f64,
    functional: &'a str,
    p: f64,
    d: usize,
    seed: u64,
    schema_version: u32,
}

/// Writes records with columns
/// `n,trials,mean,stderr,ratio,functional,p,d,seed,schema_version`.
pub fn write_records_csv<W: Write>(records: &[EstimateRecord], functional: &str, seed: u64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            n: r.n,
            trials: r.trials,
            mean: r.mean,
            stderr: r.stderr,
            ratio: r.ratio,
            functional,
            p: r.p,
            d: r.d,
            seed,
            schema_version: SCHEMA_VERSION,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_csv_string(records: &[EstimateRecord], functional: &str, seed: u64) -> String {
    let mut buf = Vec::new();
    write_records_csv(records, functional, seed, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    /// Ratio at the largest intensity.
    pub beta_hat: f64,
    /// `max(ci_half_width, |ratio(n_max) - ratio(n_max / 2)|)`.
    pub uncertainty: f64,
    pub ci_half_width: f64,
    pub half_n_gap: f64,
    /// Intercept of the least-squares fit `ratio = beta + c n^(-p/d)`.
    pub fit_beta: Option<f64>,
}

/// `beta_hat` is the ratio at the largest intensity; the comparison point
/// is the record at `n_max / 2`, or the one just below `n_max` when the
/// schedule does not contain it.
pub fn estimate_beta(records: &[EstimateRecord]) -> Result<BetaEstimate> {
    if records.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "estimate_beta needs at least 3 records, got {}",
            records.len()
        )));
    }
    let last = records.iter().max_by_key(|r| r.n).expect("nonempty");
    let half = records
        .iter()
        .find(|r| r.n == last.n / 2)
        .or_else(|| records.iter().filter(|r| r.n < last.n).max_by_key(|r| r.n))
        .expect("at least two distinct intensities");
    let ci_half_width = Z95 * last.ratio_stderr;
    let half_n_gap = (last.ratio - half.ratio).abs();
    let exponent = last.p / last.d as f64;
    let xs: Vec<f64> = records.iter().map(|r| (r.n as f64).powf(-exponent)).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    Ok(BetaEstimate {
        beta_hat: last.ratio,
        uncertainty: ci_half_width.max(half_n_gap),
        ci_half_width,
        half_n_gap,
        fit_beta: linear_fit(&xs, &ys).map(|(_, b)| b),
    })
}

/// Exact `∫ f^(1 - p/d)` for the absolutely continuous part of `measure`.
/// Singular components contribute 0.
pub fn density_functional(measure: &MeasureSpec, p: f64, d: usize) -> Result<f64> {
    if measure.dim()? != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: measure.dim()?,
        });
    }
    let mut pieces = Vec::new();
    density_pieces(measure, 1.0, &mut pieces)?;
    let exponent = 1.0 - p / d as f64;
    let term = |vol: f64, density: f64| if density > 0.0 { vol * density.powf(exponent) } else { 0.0 };
    if pieces.iter().all(|(_, _, single)| *single) {
        return Ok(pairwise_sum(
            &pieces.iter().map(|(b, f, _)| term(b.volume(), *f)).collect::<Vec<_>>(),
        ));
    }
    // Overlapping pieces: evaluate on the common refinement of all faces.
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); d];
    for (b, _, _) in &pieces {
        for k in 0..d {
            axes[k].push(b.lo()[k]);
            axes[k].push(b.hi()[k]);
        }
    }
    let mut cells = 1usize;
    for a in &mut axes {
        a.sort_by(f64::total_cmp);
        a.dedup();
        cells = cells.saturating_mul(a.len().saturating_sub(1));
    }
    const MAX_CELLS: usize = 1 << 22;
    if cells > MAX_CELLS {
        return Err(Error::UnsupportedMeasure(format!(
            "overlapping density pieces need {cells} refinement cells (limit {MAX_CELLS})"
        )));
    }
    let mut index = vec![0usize; d];
    let mut terms = Vec::with_capacity(cells);
    for _ in 0..cells {
        let mid: Vec<f64> = (0..d).map(|k| 0.5 * (axes[k][index[k]] + axes[k][index[k] + 1])).collect();
        let vol: f64 = (0..d).map(|k| axes[k][index[k] + 1] - axes[k][index[k]]).product();
        let density: f64 = pieces
            .iter()
            .filter(|(b, _, _)| b.contains_closed(&mid))
            .map(|(_, f, _)| f)
            .sum();
        terms.push(term(vol, density));
        for k in (0..d).rev() {
            index[k] += 1;
            if index[k] + 1 < axes[k].len() {
                break;
            }
            index[k] = 0;
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Boxes with constant density. The flag is cleared once pieces from two
/// components are present, since those may overlap.
fn density_pieces(measure: &MeasureSpec, weight: f64, out: &mut Vec<(BoxRegion, f64, bool)>) -> Result<()> {
    match measure {
        MeasureSpec::UniformBox { lo, hi } => {
            let b = BoxRegion::from_bounds(lo.clone(), hi.clone())?;
            let f = weight / b.volume();
            out.push((b, f, true));
        }
        MeasureSpec::BlockDensity { lo, hi, level, weights } => {
            let part = crate::geometry::DyadicPartition::new(BoxRegion::from_bounds(lo.clone(), hi.clone())?, *level)?;
            if weights.len() != part.len() {
                return Err(Error::InvalidParameter(format!(
                    "{} block weights for {} cells",
                    weights.len(),
                    part.len()
                )));
            }
            for (cell, w) in part.cells().iter().zip(weights) {
                out.push((cell.clone(), weight * w / cell.volume(), true));
            }
        }
        MeasureSpec::SingularSegment { .. } | MeasureSpec::Cantor => {}
        MeasureSpec::HeavyTailRadial { .. } => {
            return Err(Error::UnsupportedMeasure(
                "no closed form for the heavy-tailed radial density".into(),
            ))
        }
        MeasureSpec::Mixture { components } => {
            for c in components {
                let before = out.len();
                density_pieces(&c.measure, weight * c.weight, out)?;
                if before > 0 && out.len() > before {
                    for piece in out.iter_mut() {
                        piece.2 = false;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Ratio of the target measure sandwiched between calibrated constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityLimitReport {
    pub integral: f64,
    pub records: Vec<EstimateRecord>,
    pub calibration_plain: Vec<EstimateRecord>,
    pub calibration_boundary: Vec<EstimateRecord>,
    pub beta: BetaEstimate,
    pub beta_boundary: BetaEstimate,
    pub ratio: f64,
    /// Pooled standard error of `ratio` and the calibrated bounds.
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
    pub warnings: Vec<String>,
}

fn require_theory(cfg: &ExperimentConfig) -> Result<()> {
    if !cfg.in_theory() {
        return Err(Error::InvalidParameter(format!(
            "this experiment needs d > 2p, got d = {}, p = {}",
            cfg.d, cfg.p
        )));
    }
    Ok(())
}

/// Runs `cfg`, then calibrates `beta` and `beta'` on the unit cube with the
/// same schedule and seed, and checks
/// `beta' I - 3 sigma <= ratio(n_max) <= beta I + 3 sigma`.
pub fn run_density_limit(cfg: &ExperimentConfig) -> Result<DensityLimitReport> {
    require_theory(cfg)?;
    let warnings = cfg.validate()?;
    let integral = density_functional(&cfg.measure, cfg.p, cfg.d)?;
    let records = run_convergence(cfg)?;
    let mut cube = cfg.clone();
    cube.measure = MeasureSpec::unit_cube(cfg.d);
    cube.boundary = false;
    let calibration_plain = run_convergence(&cube)?;
    cube.boundary = true;
    cube.functional = ExperimentFunctional::Matching;
    let calibration_boundary = run_convergence(&cube)?;
    let beta = estimate_beta(&calibration_plain)?;
    let beta_boundary = estimate_beta(&calibration_boundary)?;
    let last = records.last().expect("validated schedule is nonempty");
    let se_plain = calibration_plain.last().expect("nonempty").ratio_stderr;
    let se_boundary = calibration_boundary.last().expect("nonempty").ratio_stderr;
    let se_hi = (last.ratio_stderr.powi(2) + (integral * se_plain).powi(2)).sqrt();
    let se_lo = (last.ratio_stderr.powi(2) + (integral * se_boundary).powi(2)).sqrt();
    let lower = beta_boundary.beta_hat * integral;
    let upper = beta.beta_hat * integral;
    Ok(DensityLimitReport {
        integral,
        ratio: last.ratio,
        sigma: se_hi.max(se_lo),
        within: lower - 3.0 * se_lo <= last.ratio && last.ratio <= upper + 3.0 * se_hi,
        lower,
        upper,
        records,
        calibration_plain,
        calibration_boundary,
        beta,
        beta_boundary,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularDecayReport {
    pub records: Vec<EstimateRecord>,
    /// Each ratio is at most the previous one.
    pub decreasing: bool,
    /// `ratio(n_max) < 0.5 ratio(n_min)`.
    pub decay_ok: bool,
    /// `∫ f^(1-p/d)` of the absolutely continuous part; the ratio should
    /// approach `beta` times this value.
    pub ac_integral: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn run_singular_decay(cfg: &ExperimentConfig) -> Result<SingularDecayReport> {
    if cfg.d < 2 {
        return Err(Error::InvalidParameter(format!("singular decay needs d >= 2, got {}", cfg.d)));
    }
    require_theory(cfg)?;
    let warnings = cfg.validate()?;
    let records = run_convergence(cfg)?;
    let first = records.first().expect("nonempty").ratio;
    let last = records.last().expect("nonempty").ratio;
    Ok(SingularDecayReport {
        decreasing: records.windows(2).all(|w| w[1].ratio <= w[0].ratio),
        decay_ok: last < 0.5 * first,
        ac_integral: density_functional(&cfg.measure, cfg.p, cfg.d).ok(),
        records,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub n: u64,
    pub mean_fixed: f64,
    pub mean_poisson: f64,
    /// `|mean_fixed - mean_poisson| / n^(1-p/d)`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoissonGapReport {
    pub fixed: Vec<EstimateRecord>,
    pub poisson: Vec<EstimateRecord>,
    pub rows: Vec<GapRow>,
    /// Steps where the normalized gap increases.
    pub inversions: usize,
    pub decreasing_up_to_one: bool,
}

/// Normalized gap between fixed-size and Poissonized runs that share a seed.
pub fn poissonization_gap(fixed: &[EstimateRecord], poisson: &[EstimateRecord]) -> Result<PoissonGapReport> {
    if fixed.len() != poisson.len() || fixed.iter().zip(poisson).any(|(a, b)| a.n != b.n) {
        return Err(Error::InvalidParameter("fixed and Poissonized schedules differ".into()));
    }
    let rows: Vec<GapRow> = fixed
        .iter()
        .zip(poisson)
        .map(|(f, q)| GapRow {
            n: f.n,
            mean_fixed: f.mean,
            mean_poisson: q.mean,
            gap: (f.mean - q.mean).abs() / (f.n as f64).powf(1.0 - f.p / f.d as f64),
        })
        .collect();
    let inversions = rows.windows(2).filter(|w| w[1].gap > w[0].gap).count();
    Ok(PoissonGapReport {
        fixed: fixed.to_vec(),
        poisson: poisson.to_vec(),
        rows,
        inversions,
        decreasing_up_to_one: inversions <= 1,
    })
}

pub fn run_poissonization_gap(cfg: &ExperimentConfig) -> Result<PoissonGapReport> {
    let mut c = cfg.clone();
    c.poissonized = false;
    let fixed = run_convergence(&c)?;
    c.poissonized = true;
    let poisson = run_convergence(&c)?;
    poissonization_gap(&fixed, &poisson)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailMaxConfig {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default = "default_tail_dim")]
    pub dim: usize,
    pub n_schedule: Vec<u64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub poissonized: bool,
    /// Replaces the default `HeavyTailRadial { alpha, dim }`.
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
}

fn default_tail_dim() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub n: u64,
    pub trials: usize,
    /// `(E T_n^gamma)^(1/gamma)`.
    pub moment: f64,
    /// `moment / n^(1/alpha)`.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailMaxReport {
    pub rows: Vec<TailRow>,
    /// Log-log slope of `moment` against `n`.
    pub slope: Option<f64>,
    pub normalized_slope: Option<f64>,
    pub bounded: bool,
}

/// Moments of `T_n = max |Z|` over `Z ∈ X ∪ Y`.
pub fn run_tail_max(cfg: &TailMaxConfig) -> Result<TailMaxReport> {
    if !(cfg.gamma > 0.0 && cfg.alpha > 0.0) || cfg.gamma >= cfg.alpha {
        return Err(Error::InvalidParameter(format!(
            "need 0 < gamma < alpha, got gamma = {}, alpha = {}",
            cfg.gamma, cfg.alpha
        )));
    }
    if cfg.trials == 0 || cfg.n_schedule.is_empty() || cfg.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "tail-max needs trials >= 1 and a strictly increasing schedule".into(),
        ));
    }
    let measure = cfg.measure.clone().unwrap_or(MeasureSpec::HeavyTailRadial {
        alpha: cfg.alpha,
        dim: cfg.dim,
    });
    let sampler = MeasureSampler::new(&measure)?;
    let mut rows = Vec::with_capacity(cfg.n_schedule.len());
    for &n in &cfg.n_schedule {
        let powers = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let (x, y) = sampler.sample_pair(n as f64, cfg.poissonized, cfg.seed, trial_stream(n, t))?;
                Ok(max_radius(&x, &y).powf(cfg.gamma))
            })
            .collect::<Result<Vec<f64>>>()?;
        let moment = (pairwise_sum(&powers) / powers.len() as f64).powf(1.0 / cfg.gamma);
        rows.push(TailRow {
            n,
            trials: cfg.trials,
            moment,
            normalized: moment / (n as f64).powf(1.0 / cfg.alpha),
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let slope = loglog_slope(&ns, &rows.iter().map(|r| r.moment).collect::<Vec<_>>());
    let normalized_slope = loglog_slope(&ns, &rows.iter().map(|r| r.normalized).collect::<Vec<_>>());
    let bounded = rows.iter().all(|r| r.normalized.is_finite()) && normalized_slope.is_none_or(|s| s <= TAIL_SLOPE_MAX);
    Ok(TailMaxReport {
        rows,
        slope,
        normalized_slope,
        bounded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub n: u64,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    /// `4 C Δ^p sqrt(2 n ln 2)`: the deviation exceeded with probability at
    /// most 1/2 by the Azuma bound.
    pub envelope: f64,
    pub std_over_sqrt_n: f64,
    pub std_over_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub regularity_constant: f64,
    pub support_diameter: f64,
    pub rows: Vec<ConcentrationRow>,
    pub within_envelope: bool,
    pub warnings: Vec<String>,
}

pub fn run_concentration(cfg: &ExperimentConfig) -> Result<ConcentrationReport> {
    let warnings = cfg.validate()?;
    let min_trials = (0..cfg.n_schedule.len()).map(|k| cfg.trials_at(k)).min().unwrap_or(0);
    if min_trials < CONCENTRATION_MIN_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "concentration needs at least {CONCENTRATION_MIN_TRIALS} trials per intensity, got {min_trials}"
        )));
    }
    let support = cfg
        .measure
        .bounding_box()?
        .ok_or_else(|| Error::InvalidParameter("concentration needs a measure with bounded support".into()))?;
    let params = cfg.params()?;
    let c = match cfg.functional {
        ExperimentFunctional::Matching => 1.0,
        ExperimentFunctional::TspHeuristic => crate::functional::Functional::TspHeuristic
            .regularity_constant()
            .expect("tsp has a regularity constant"),
    };
    let delta_p = params.pow(support.diameter());
    let runs = run_trial_costs(cfg)?;
    let rows = runs
        .n_schedule
        .iter()
        .zip(&runs.costs)
        .map(|(&n, costs)| {
            let (mean, _) = mean_stderr(costs);
            let std = sample_std(costs);
            let nf = n as f64;
            ConcentrationRow {
                n,
                trials: costs.len(),
                mean,
                std,
                envelope: 4.0 * c * delta_p * (2.0 * nf * std::f64::consts::LN_2).sqrt(),
                std_over_sqrt_n: std / nf.sqrt(),
                std_over_scale: std / nf.powf(1.0 - cfg.p / cfg.d as f64),
            }
        })
        .collect::<Vec<_>>();
    Ok(ConcentrationReport {
        regularity_constant: c,
        support_diameter: support.diameter(),
        within_envelope: rows.iter().all(|r| r.std <= r.envelope),
        rows,
        warnings,
    })
}
