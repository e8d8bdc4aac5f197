//! Degradation-loss curves, step detection, landscapes inferred from sample
//! frequencies, and classification of landscape rearrangements.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::degradation::{apply_degradation, DegradationSpec};
use crate::enumerator::Composition;
use crate::error::{Error, Result};
use crate::lattice::{evaluate, AllocationMap, LandUse, ModelParams, ObjectiveValue, SuitabilityField, NUM_USES};
use crate::sampler::SampleRecord;
use crate::sweep::ResultStore;

/// Default per-increment loss change separating steps from flat stretches.
pub const DEFAULT_JUMP_THRESHOLD: f64 = 0.05;
/// Default composition tolerance (fraction of parcels) for optimum motion.
pub const DEFAULT_COMPOSITION_TOLERANCE: f64 = 0.05;
/// `Lambda >= 1 - TOTAL_LOSS_EPS` counts as total loss.
pub const TOTAL_LOSS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub delta_a: f64,
    pub n_a: usize,
    /// `(N_A(0) - N_A(delta)) / N_A(0)`; negative values are gains.
    pub lambda_a: f64,
}

impl LossPoint {
    pub fn is_gain(&self) -> bool {
        self.lambda_a < 0.0
    }
}

/// Relative loss of `n_a` parcels against a baseline of `n_a0`.
pub fn relative_loss(n_a0: usize, n_a: usize) -> Option<f64> {
    (n_a0 > 0).then(|| (n_a0 as f64 - n_a as f64) / n_a0 as f64)
}

/// Builds a loss curve from `(delta, N_A)` pairs; the pair at `delta = 0`
/// is the baseline.
pub fn loss_curve_from_counts(ps: f64, counts: &[(f64, usize)]) -> Result<Vec<LossPoint>> {
    let n_a0 = counts
        .iter()
        .find(|(d, _)| *d == 0.0)
        .map(|(_, n)| *n)
        .ok_or_else(|| Error::Validation("loss curve needs a delta = 0 baseline".into()))?;
    let mut curve: Vec<LossPoint> = counts
        .iter()
        .map(|&(delta_a, n_a)| {
            Ok(LossPoint {
                delta_a,
                n_a,
                lambda_a: relative_loss(n_a0, n_a).ok_or(Error::UndefinedBaseline { ps })?,
            })
        })
        .collect::<Result<_>>()?;
    curve.sort_by(|a, b| a.delta_a.total_cmp(&b.delta_a));
    Ok(curve)
}

/// Where `N_A` at each degradation level comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimumSource {
    /// The lowest-objective map sampled in that cell.
    Cell,
    /// The lowest-objective map among the optima and most frequent maps of
    /// every cell in the row, each re-evaluated at that cell's degradation.
    /// This can only lower the objective and keeps `N_A` from jumping
    /// between basins that one cell's chains happened to miss.
    #[default]
    Pooled,
}

impl fmt::Display for OptimumSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimumSource::Cell => "cell",
            OptimumSource::Pooled => "pooled",
        })
    }
}

impl std::str::FromStr for OptimumSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell" => Ok(OptimumSource::Cell),
            "pooled" => Ok(OptimumSource::Pooled),
            _ => Err(Error::Config(format!("unknown optimum source `{s}` (expected cell or pooled)"))),
        }
    }
}

/// Lowest-objective candidate under each degradation level. Ties go to the
/// earlier candidate.
pub fn pooled_optima(
    field: &SuitabilityField,
    params: &ModelParams,
    target_use: LandUse,
    delta_values: &[f64],
    candidates: &[AllocationMap],
) -> Result<Vec<(AllocationMap, ObjectiveValue)>> {
    if candidates.is_empty() {
        return Err(Error::Validation("no candidate maps to pool".into()));
    }
    delta_values
        .iter()
        .map(|&delta_a| {
            let degraded = apply_degradation(field, &DegradationSpec { delta_a, target_use })?;
            let mut best: Option<(usize, ObjectiveValue)> = None;
            for (i, map) in candidates.iter().enumerate() {
                let v = evaluate(map, &degraded, params)?;
                if best.as_ref().is_none_or(|(_, b)| v.phi < b.phi) {
                    best = Some((i, v));
                }
            }
            let (i, v) = best.expect("candidates are non-empty");
            Ok((candidates[i].clone(), v))
        })
        .collect()
}

/// Loss curve at suitability pressure `ps`.
pub fn loss_curve(store: &ResultStore, ps: f64, source: OptimumSource) -> Result<Vec<LossPoint>> {
    let target = store.target_use();
    let deltas = store.delta_values();
    let aggregates = deltas
        .iter()
        .map(|&d| store.aggregate(ps, d))
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<(f64, usize)> = match source {
        OptimumSource::Cell => aggregates
            .iter()
            .map(|a| (a.delta, a.optimum.counts[target.code()]))
            .collect(),
        OptimumSource::Pooled => {
            let plan = &store.manifest().plan;
            let params = ModelParams::new(plan.p_compact, ps, plan.temperature)?;
            let field = store.field()?;
            let mut candidates = Vec::new();
            for a in &aggregates {
                for code in [&a.optimum.map, &a.most_frequent.map] {
                    let map = AllocationMap::from_code_string(code)?;
                    if !candidates.contains(&map) {
                        candidates.push(map);
                    }
                }
            }
            pooled_optima(&field, &params, target, deltas, &candidates)?
                .iter()
                .zip(deltas)
                .map(|((map, _), &d)| (d, map.counts()[target.code()]))
                .collect()
        }
    };
    loss_curve_from_counts(ps, &counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub delta_start: f64,
    pub delta_end: f64,
    /// Net loss change across the step, signed.
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub threshold: f64,
    pub steps: Vec<Step>,
    /// Smallest delta with `Lambda >= 1 - 1e-9`.
    pub total_loss_onset: Option<f64>,
}

/// Maximal runs of consecutive increments whose `|dLambda|` exceeds
/// `threshold`.
pub fn detect_steps(curve: &[LossPoint], threshold: f64) -> StepReport {
    let mut steps = Vec::new();
    let mut open: Option<usize> = None;
    for (i, w) in curve.windows(2).enumerate() {
        let big = (w[1].lambda_a - w[0].lambda_a).abs() > threshold;
        match (big, open) {
            (true, None) => open = Some(i),
            (false, Some(start)) => {
                steps.push(make_step(curve, start, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        steps.push(make_step(curve, start, curve.len() - 1));
    }
    StepReport {
        threshold,
        steps,
        total_loss_onset: curve
            .iter()
            .find(|p| p.lambda_a >= 1.0 - TOTAL_LOSS_EPS)
            .map(|p| p.delta_a),
    }
}

fn make_step(curve: &[LossPoint], start: usize, end: usize) -> Step {
    Step {
        delta_start: curve[start].delta_a,
        delta_end: curve[end].delta_a,
        jump: curve[end].lambda_a - curve[start].lambda_a,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeBin {
    pub count: u64,
    pub probability: f64,
    /// `-ln(probability)`.
    pub neg_log_p: f64,
}

/// Empirical distribution over use-count triples. Only occupied bins are
/// stored, so an empty bin has no `neg_log_p` at all.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeHistogram {
    pub temperature: f64,
    pub total: u64,
    pub bins: BTreeMap<Composition, LandscapeBin>,
}

impl LandscapeHistogram {
    pub fn from_counts(temperature: f64, counts: &BTreeMap<Composition, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::Validation("landscape needs at least one sample".into()));
        }
        let bins = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&k, &count)| {
                let probability = count as f64 / total as f64;
                (
                    k,
                    LandscapeBin {
                        count,
                        probability,
                        neg_log_p: -probability.ln(),
                    },
                )
            })
            .collect();
        Ok(LandscapeHistogram {
            temperature,
            total,
            bins,
        })
    }

    pub fn n_parcels(&self) -> usize {
        self.bins.keys().next().map_or(0, |c| c.iter().sum())
    }

    /// `T * neg_log_p`, the landscape in objective units.
    pub fn free_energy(&self, composition: &Composition) -> Option<f64> {
        self.bins
            .get(composition)
            .map(|b| self.temperature * b.neg_log_p)
    }

    /// `n0,n1,n2,count,p,neglogp`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n0,n1,n2,count,p,neglogp")?;
        for (c, b) in &self.bins {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c[0], c[1], c[2], b.count, b.probability, b.neg_log_p
            )?;
        }
        Ok(())
    }
}

pub fn infer_landscape(samples: &[SampleRecord], temperature: f64) -> Result<LandscapeHistogram> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s.counts()).or_insert(0u64) += 1;
    }
    LandscapeHistogram::from_counts(temperature, &counts)
}

/// Compositions reachable by moving one parcel from one use to another.
pub fn composition_neighbors(c: &Composition) -> impl Iterator<Item = Composition> + '_ {
    (0..NUM_USES).flat_map(move |from| {
        (0..NUM_USES).filter_map(move |to| {
            (from != to && c[from] > 0).then(|| {
                let mut n = *c;
                n[from] -= 1;
                n[to] += 1;
                n
            })
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub counts: Composition,
    pub fractions: [f64; NUM_USES],
    /// `neg_log_p` of the bin.
    pub depth: f64,
    /// Smallest rise in `neg_log_p` to an occupied neighbour bin; `None`
    /// when no neighbour is occupied.
    pub barrier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimaReport {
    pub global: Optimum,
    /// Subleading local optima, ordered by depth.
    pub local: Vec<Optimum>,
}

fn fractions(c: &Composition) -> [f64; NUM_USES] {
    let n: usize = c.iter().sum();
    c.map(|k| k as f64 / n as f64)
}

fn optimum(land: &LandscapeHistogram, c: &Composition) -> Optimum {
    let depth = land.bins[c].neg_log_p;
    let barrier = composition_neighbors(c)
        .filter_map(|n| land.bins.get(&n))
        .map(|b| b.neg_log_p - depth)
        .min_by(f64::total_cmp);
    Optimum {
        counts: *c,
        fractions: fractions(c),
        depth,
        barrier,
    }
}

/// Global optimum (most probable bin; ties go to the first in composition
/// order) and every other bin strictly below all its occupied neighbours.
pub fn find_optima(land: &LandscapeHistogram) -> OptimaReport {
    let global = land
        .bins
        .iter()
        .min_by(|a, b| a.1.neg_log_p.total_cmp(&b.1.neg_log_p))
        .map(|(c, _)| *c)
        .expect("landscape has at least one bin");
    let mut local: Vec<Optimum> = land
        .bins
        .iter()
        .filter(|(c, b)| {
            **c != global
                && composition_neighbors(c)
                    .filter_map(|n| land.bins.get(&n))
                    .all(|nb| b.neg_log_p < nb.neg_log_p)
        })
        .map(|(c, _)| optimum(land, c))
        .collect();
    local.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.counts.cmp(&b.counts)));
    OptimaReport {
        global: optimum(land, &global),
        local,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rearrangement {
    #[serde(rename = "SLO-rearrangement")]
    Slo,
    #[serde(rename = "GO-rearrangement")]
    Go,
    #[serde(rename = "none")]
    None,
}

impl fmt::Display for Rearrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rearrangement::Slo => "SLO-rearrangement",
            Rearrangement::Go => "GO-rearrangement",
            Rearrangement::None => "none",
        })
    }
}

fn max_fraction_shift(a: &[f64; NUM_USES], b: &[f64; NUM_USES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compares optima at adjacent degradation levels.
///
/// GO motion is measured on the target (agricultural) fraction. Local optima
/// are matched across reports when every use fraction agrees within
/// `tolerance`; an unmatched optimum on either side counts as a change.
pub fn classify_rearrangement(
    before: &OptimaReport,
    after: &OptimaReport,
    tolerance: f64,
) -> Rearrangement {
    if (before.global.fractions[0] - after.global.fractions[0]).abs() > tolerance {
        return Rearrangement::Go;
    }
    let unmatched = |xs: &[Optimum], ys: &[Optimum]| {
        xs.iter().any(|x| {
            !ys.iter()
                .any(|y| max_fraction_shift(&x.fractions, &y.fractions) <= tolerance)
        })
    };
    if unmatched(&before.local, &after.local) || unmatched(&after.local, &before.local) {
        Rearrangement::Slo
    } else {
        Rearrangement::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub delta_from: f64,
    pub delta_to: f64,
    pub d_lambda: f64,
    pub classification: Rearrangement,
    pub go_from: Composition,
    pub go_to: Composition,
    pub slo_count_from: usize,
    pub slo_count_to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedStep {
    #[serde(flatten)]
    pub step: Step,
    pub classification: Rearrangement,
}

/// Contents of `events_<ps>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsReport {
    pub ps: f64,
    pub jump_threshold: f64,
    pub composition_tolerance: f64,
    pub total_loss_onset: Option<f64>,
    pub steps: Vec<ClassifiedStep>,
    /// One entry per adjacent pair of delta values.
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOptions {
    pub jump_threshold: f64,
    pub composition_tolerance: f64,
}

impl Default for EventOptions {
    fn default() -> Self {
        EventOptions {
            jump_threshold: DEFAULT_JUMP_THRESHOLD,
            composition_tolerance: DEFAULT_COMPOSITION_TOLERANCE,
        }
    }
}

/// Steps and landscape rearrangements along one loss curve. `optima` holds
/// one report per curve point, in the same order. A step is classified by
/// comparing the optima at its two ends.
pub fn classify_events(
    ps: f64,
    curve: &[LossPoint],
    optima: &[OptimaReport],
    opts: EventOptions,
) -> Result<EventsReport> {
    if curve.len() != optima.len() {
        return Err(Error::Validation(format!(
            "{} curve points but {} optima reports",
            curve.len(),
            optima.len()
        )));
    }
    let index_of = |d: f64| curve.iter().position(|p| p.delta_a == d).expect("step ends lie on the curve");
    let report = detect_steps(curve, opts.jump_threshold);
    let steps = report
        .steps
        .iter()
        .map(|s| ClassifiedStep {
            step: *s,
            classification: classify_rearrangement(
                &optima[index_of(s.delta_start)],
                &optima[index_of(s.delta_end)],
                opts.composition_tolerance,
            ),
        })
        .collect();
    let transitions = (1..curve.len())
        .map(|i| Transition {
            delta_from: curve[i - 1].delta_a,
            delta_to: curve[i].delta_a,
            d_lambda: curve[i].lambda_a - curve[i - 1].lambda_a,
            classification: classify_rearrangement(&optima[i - 1], &optima[i], opts.composition_tolerance),
            go_from: optima[i - 1].global.counts,
            go_to: optima[i].global.counts,
            slo_count_from: optima[i - 1].local.len(),
            slo_count_to: optima[i].local.len(),
        })
        .collect();
    Ok(EventsReport {
        ps,
        jump_threshold: opts.jump_threshold,
        composition_tolerance: opts.composition_tolerance,
        total_loss_onset: report.total_loss_onset,
        steps,
        transitions,
    })
}

/// Landscape of one sweep cell from its stored composition histogram.
pub fn cell_landscape(store: &ResultStore, ps: f64, delta: f64) -> Result<LandscapeHistogram> {
    LandscapeHistogram::from_counts(store.temperature(), &store.aggregate(ps, delta)?.histogram())
}

pub fn events(store: &ResultStore, ps: f64, source: OptimumSource, opts: EventOptions) -> Result<EventsReport> {
    let curve = loss_curve(store, ps, source)?;
    let optima = curve
        .iter()
        .map(|p| Ok(find_optima(&cell_landscape(store, ps, p.delta_a)?)))
        .collect::<Result<Vec<_>>>()?;
    classify_events(ps, &curve, &optima, opts)
}

/// `delta,n_a,lambda`.
pub fn write_loss_csv<W: Write>(curve: &[LossPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "delta,n_a,lambda")?;
    for p in curve {
        writeln!(out, "{},{},{}", p.delta_a, p.n_a, p.lambda_a)?;
    }
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_events_json<W: Write>(report: &EventsReport, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)
}

pub fn loss_csv_name(ps: f64) -> String {
    format!("loss_curve_{ps}.csv")
}

pub fn landscape_csv_name(ps: f64, delta: f64) -> String {
    format!("landscape_{ps}_{delta}.csv")
}

pub fn events_json_name(ps: f64) -> String {
    format!("events_{ps}.json")
}
