//! Parameter sweeps over `(P_S, delta_A)` cells with replicate chains, and
//! the on-disk result store they produce.
//!
//! Layout of a sweep directory:
//!
//! ```text
//! manifest.json
//! field.csv                       suitability field used by every cell
//! cells/ps_<ps>_delta_<delta>/
//!     samples.csv                 chain_id,sweep_index,phi,phi_c,phi_s,n0,n1,n2
//!     aggregate.json              written last; marks the cell complete
//! ```
//!
//! Seeds: `cell_seed = derive_seed(plan.seed, [ps bits, delta bits])`, and
//! replicate `r` of a cell runs as chain `r` with seed
//! `chain_seed(cell_seed, r)`. Records are keyed by `(cell, chain_id)`. A
//! cell therefore depends only on the plan's seed, chain settings and field,
//! never on which other cells the plan lists or which of them ran.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degradation::{apply_degradation, DegradationSpec};
use crate::enumerator::Composition;
use crate::error::{Error, Result};
use crate::field_io::{field_checksum, generate_field, load_field, save_field};
use crate::lattice::{LandUse, ModelParams, ObjectiveValue, SuitabilityField, NUM_USES};
use crate::rng::{chain_seed, derive_seed};
use crate::sampler::{run_chain, ChainConfig, Engine, InitState, SampleRecord};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIELD_FILE: &str = "field.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";

/// The six default suitability pressures; 4.4 is the published one, the
/// others span the `(0, 8)` trade-off range.
pub const DEFAULT_PS_VALUES: [f64; 6] = [0.5, 1.5, 2.9, 4.4, 5.9, 7.4];

/// `0.00, 0.01, ..., 1.00`, each value computed as `i / 100` so it prints
/// as the short decimal.
pub fn default_delta_values() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainTemplate {
    #[serde(default = "default_engine")]
    pub engine: Engine,
    #[serde(default = "default_burn_in")]
    pub burn_in_sweeps: u64,
    #[serde(default = "default_interval")]
    pub sample_interval_sweeps: u64,
    #[serde(default = "default_n_samples")]
    pub n_samples: u64,
    #[serde(default = "default_init")]
    pub init: InitState,
}

fn default_engine() -> Engine {
    Engine::Hybrid
}
fn default_burn_in() -> u64 {
    1000
}
fn default_interval() -> u64 {
    10
}
fn default_n_samples() -> u64 {
    100
}
fn default_init() -> InitState {
    InitState::RandomUniform
}

impl Default for ChainTemplate {
    fn default() -> Self {
        ChainTemplate {
            engine: default_engine(),
            burn_in_sweeps: default_burn_in(),
            sample_interval_sweeps: default_interval(),
            n_samples: default_n_samples(),
            init: default_init(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum FieldSource {
    Generate {
        rows: usize,
        cols: usize,
        seed: u64,
        smoothness: u32,
    },
    File {
        path: PathBuf,
    },
}

impl Default for FieldSource {
    fn default() -> Self {
        FieldSource::Generate {
            rows: crate::field_io::BUNDLED_SIZE,
            cols: crate::field_io::BUNDLED_SIZE,
            seed: crate::field_io::BUNDLED_SEED,
            smoothness: crate::field_io::BUNDLED_SMOOTHNESS,
        }
    }
}

impl FieldSource {
    pub fn resolve(&self) -> Result<SuitabilityField> {
        match self {
            FieldSource::Generate {
                rows,
                cols,
                seed,
                smoothness,
            } => generate_field(*rows, *cols, *seed, *smoothness),
            FieldSource::File { path } => load_field(path, None, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_ps")]
    pub ps_values: Vec<f64>,
    #[serde(default = "default_delta_values")]
    pub delta_values: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates_per_cell: u64,
    #[serde(default = "default_unit")]
    pub p_compact: f64,
    #[serde(default = "default_unit")]
    pub temperature: f64,
    #[serde(default = "default_target")]
    pub target_use: LandUse,
    #[serde(default)]
    pub chain: ChainTemplate,
    #[serde(default)]
    pub field: FieldSource,
}

fn default_seed() -> u64 {
    42
}
fn default_ps() -> Vec<f64> {
    DEFAULT_PS_VALUES.to_vec()
}
fn default_replicates() -> u64 {
    50
}
fn default_unit() -> f64 {
    1.0
}
fn default_target() -> LandUse {
    LandUse::Agriculture
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            seed: default_seed(),
            ps_values: default_ps(),
            delta_values: default_delta_values(),
            replicates_per_cell: default_replicates(),
            p_compact: 1.0,
            temperature: 1.0,
            target_use: LandUse::Agriculture,
            chain: ChainTemplate::default(),
            field: FieldSource::default(),
        }
    }
}

impl SweepPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: SweepPlan = toml::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SweepPlan::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ps_values.is_empty() {
            return Err(Error::Config("ps_values is empty".into()));
        }
        if let Some(ps) = self.ps_values.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Config(format!("P_S value {ps} must be finite and >= 0")));
        }
        let mut seen = self.ps_values.clone();
        seen.sort_by(f64::total_cmp);
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("ps_values contains duplicates".into()));
        }
        if self.delta_values.first() != Some(&0.0) {
            return Err(Error::Config(
                "delta_values must start at 0 (the loss baseline)".into(),
            ));
        }
        if self.delta_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("delta_values must be strictly ascending".into()));
        }
        if let Some(d) = self.delta_values.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::Config(format!("delta value {d} outside [0, 1]")));
        }
        if self.replicates_per_cell == 0 {
            return Err(Error::Config("replicates_per_cell must be >= 1".into()));
        }
        if self.chain.sample_interval_sweeps == 0 {
            return Err(Error::Config("sample_interval_sweeps must be >= 1".into()));
        }
        ModelParams::new(self.p_compact, 0.0, self.temperature)?;
        Ok(())
    }

    /// SHA-256 of the plan's JSON serialisation.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serialises");
        hex::encode(Sha256::digest(json))
    }

    pub fn n_cells(&self) -> usize {
        self.ps_values.len() * self.delta_values.len()
    }

    /// Cells in `(ps, delta)` row-major order.
    pub fn cells(&self) -> Vec<CellEntry> {
        let mut cells = Vec::with_capacity(self.n_cells());
        for &ps in &self.ps_values {
            for &delta in &self.delta_values {
                cells.push(CellEntry {
                    ps,
                    delta,
                    dir: cell_dir_name(ps, delta),
                    cell_seed: derive_seed(self.seed, &[ps.to_bits(), delta.to_bits()]),
                    replicates: self.replicates_per_cell,
                });
            }
        }
        cells
    }
}

pub fn cell_dir_name(ps: f64, delta: f64) -> String {
    format!("ps_{ps}_delta_{delta}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub ps: f64,
    pub delta: f64,
    pub dir: String,
    pub cell_seed: u64,
    pub replicates: u64,
}

impl CellEntry {
    pub fn chain_ids(&self) -> std::ops::Range<u64> {
        0..self.replicates
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub code_version: String,
    pub plan: SweepPlan,
    pub plan_hash: String,
    pub field_checksum: String,
    pub engine_versions: BTreeMap<String, String>,
    pub cells: Vec<CellEntry>,
    pub created_at: String,
    pub updated_at: String,
}

impl RunManifest {
    fn new(plan: &SweepPlan, field: &SuitabilityField) -> Self {
        let now = chrono::Utc::now().to_rfc3339();
        RunManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            plan: plan.clone(),
            plan_hash: plan.hash(),
            field_checksum: field_checksum(field),
            engine_versions: Engine::ALL
                .iter()
                .map(|e| (e.to_string(), e.version().to_string()))
                .collect(),
            cells: plan.cells(),
            created_at: now.clone(),
            updated_at: now,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        if manifest.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Store(format!(
                "manifest format {} is not supported (expected {MANIFEST_FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        if manifest.plan.hash() != manifest.plan_hash {
            return Err(Error::Store("manifest plan does not match its hash".into()));
        }
        Ok(manifest)
    }

    fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Parcel-count summary of one sampled map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub map: String,
    pub counts: Composition,
    pub objective: ObjectiveValue,
    pub chain_id: u64,
    pub sweep_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentMap {
    pub map: String,
    pub counts: Composition,
    pub occurrences: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub counts: Composition,
    pub samples: u64,
}

/// Aggregated results of one `(P_S, delta)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub ps: f64,
    pub delta: f64,
    pub cell_seed: u64,
    pub replicates: u64,
    pub n_samples: u64,
    /// Lowest-objective map seen in any replicate; the optimum estimate.
    pub optimum: MapSummary,
    /// Most frequently sampled map, recorded alongside.
    pub most_frequent: FrequentMap,
    pub use_fraction_mean: [f64; NUM_USES],
    /// Population variance over all samples.
    pub use_fraction_var: [f64; NUM_USES],
    pub composition_histogram: Vec<HistogramBin>,
}

impl CellAggregate {
    pub fn histogram(&self) -> BTreeMap<Composition, u64> {
        self.composition_histogram
            .iter()
            .map(|b| (b.counts, b.samples))
            .collect()
    }
}

/// Order-independent accumulator for one cell's samples. Merging is
/// commutative and associative; ties on the optimum resolve by
/// `(phi, chain_id, sweep_index)` and on the most frequent map by
/// `(occurrences desc, code string)`.
#[derive(Debug, Clone, Default)]
pub struct CellAccumulator {
    n: u64,
    optimum: Option<MapSummary>,
    maps: HashMap<String, (Composition, u64)>,
    histogram: BTreeMap<Composition, u64>,
}

impl CellAccumulator {
    pub fn push(&mut self, rec: &SampleRecord) {
        let counts = rec.counts();
        self.n += 1;
        let code = rec.map.to_code_string();
        let better = match &self.optimum {
            None => true,
            Some(cur) => {
                (rec.objective.phi, rec.chain_id, rec.sweep_index)
                    .partial_cmp(&(cur.objective.phi, cur.chain_id, cur.sweep_index))
                    == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            self.optimum = Some(MapSummary {
                map: code.clone(),
                counts,
                objective: rec.objective,
                chain_id: rec.chain_id,
                sweep_index: rec.sweep_index,
            });
        }
        self.maps.entry(code).or_insert((counts, 0)).1 += 1;
        *self.histogram.entry(counts).or_insert(0) += 1;
    }

    pub fn merge(mut self, other: CellAccumulator) -> CellAccumulator {
        self.n += other.n;
        self.optimum = match (self.optimum.take(), other.optimum) {
            (Some(a), Some(b)) => {
                if (b.objective.phi, b.chain_id, b.sweep_index)
                    .partial_cmp(&(a.objective.phi, a.chain_id, a.sweep_index))
                    == Some(std::cmp::Ordering::Less)
                {
                    Some(b)
                } else {
                    Some(a)
                }
            }
            (a, b) => a.or(b),
        };
        for (code, (counts, n)) in other.maps {
            self.maps.entry(code).or_insert((counts, 0)).1 += n;
        }
        for (c, n) in other.histogram {
            *self.histogram.entry(c).or_insert(0) += n;
        }
        self
    }

    fn finish(self, entry: &CellEntry) -> Result<CellAggregate> {
        let optimum = self
            .optimum
            .ok_or_else(|| Error::Store(format!("cell {} produced no samples", entry.dir)))?;
        let (map, (counts, occurrences)) = self
            .maps
            .into_iter()
            .min_by(|a, b| b.1 .1.cmp(&a.1 .1).then_with(|| a.0.cmp(&b.0)))
            .expect("non-empty");
        let cells: usize = counts.iter().sum();
        let n = self.n as f64;
        let mut mean = [0.0; NUM_USES];
        let mut var = [0.0; NUM_USES];
        for (c, &k) in &self.histogram {
            for u in 0..NUM_USES {
                mean[u] += k as f64 * c[u] as f64 / cells as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for (c, &k) in &self.histogram {
            for u in 0..NUM_USES {
                var[u] += k as f64 * (c[u] as f64 / cells as f64 - mean[u]).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        Ok(CellAggregate {
            ps: entry.ps,
            delta: entry.delta,
            cell_seed: entry.cell_seed,
            replicates: entry.replicates,
            n_samples: self.n,
            optimum,
            most_frequent: FrequentMap {
                map,
                counts,
                occurrences,
            },
            use_fraction_mean: mean,
            use_fraction_var: var,
            composition_histogram: self
                .histogram
                .into_iter()
                .map(|(counts, samples)| HistogramBin { counts, samples })
                .collect(),
        })
    }
}

/// One row of a cell's `samples.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub chain_id: u64,
    pub sweep_index: u64,
    pub objective: ObjectiveValue,
    pub counts: Composition,
}

fn write_sample_row<W: Write>(out: &mut W, rec: &SampleRecord) -> std::io::Result<()> {
    let c = rec.counts();
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        rec.chain_id,
        rec.sweep_index,
        rec.objective.phi,
        rec.objective.phi_c,
        rec.objective.phi_s,
        c[0],
        c[1],
        c[2]
    )
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs every replicate of one cell and returns the samples in chain order.
pub fn run_cell(
    plan: &SweepPlan,
    field: &SuitabilityField,
    entry: &CellEntry,
) -> Result<Vec<Vec<SampleRecord>>> {
    let degraded = apply_degradation(
        field,
        &DegradationSpec {
            delta_a: entry.delta,
            target_use: plan.target_use,
        },
    )?;
    let params = ModelParams::new(plan.p_compact, entry.ps, plan.temperature)?;
    entry
        .chain_ids()
        .into_par_iter()
        .map(|chain_id| {
            let config = ChainConfig {
                engine: plan.chain.engine,
                seed: chain_seed(entry.cell_seed, chain_id),
                chain_id,
                burn_in_sweeps: plan.chain.burn_in_sweeps,
                sample_interval_sweeps: plan.chain.sample_interval_sweeps,
                n_samples: plan.chain.n_samples,
                init: plan.chain.init.clone(),
            };
            Ok(run_chain(config, &degraded, params)?.collect())
        })
        .collect()
}

fn compute_cell(plan: &SweepPlan, field: &SuitabilityField, entry: &CellEntry, dir: &Path) -> Result<()> {
    let chains = run_cell(plan, field, entry)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let samples_path = dir.join(SAMPLES_FILE);
    let mut csv = Vec::new();
    writeln!(csv, "chain_id,sweep_index,phi,phi_c,phi_s,n0,n1,n2").expect("in-memory write");
    let mut acc = CellAccumulator::default();
    for rec in chains.iter().flatten() {
        write_sample_row(&mut csv, rec).expect("in-memory write");
        acc.push(rec);
    }
    write_atomic(&samples_path, &csv)?;

    let aggregate = acc.finish(entry)?;
    write_atomic(
        &dir.join(AGGREGATE_FILE),
        serde_json::to_string_pretty(&aggregate)?.as_bytes(),
    )
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecSummary {
    pub computed: usize,
    pub skipped: usize,
}

/// Runs `plan` into `out_dir`. An existing sweep with the same plan is
/// resumed; one with a different plan is refused.
pub fn execute(plan: &SweepPlan, out_dir: &Path, opts: ExecOptions) -> Result<ExecSummary> {
    plan.validate()?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let existing = RunManifest::load(&manifest_path)?;
        if existing.plan_hash != plan.hash() {
            return Err(Error::Store(format!(
                "{} already holds a sweep with a different plan",
                out_dir.display()
            )));
        }
        return resume(&manifest_path, opts);
    }
    let field = plan.field.resolve()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    save_field(&field, &out_dir.join(FIELD_FILE))?;
    let manifest = RunManifest::new(plan, &field);
    manifest.save(&manifest_path)?;
    run_missing(manifest, &manifest_path, &field, opts)
}

/// Computes every cell of the manifest's sweep that is not yet complete.
/// The sweep directory is the manifest's parent.
pub fn resume(manifest_path: &Path, opts: ExecOptions) -> Result<ExecSummary> {
    let manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let field_path = dir.join(FIELD_FILE);
    let field = if field_path.exists() {
        load_field(&field_path, None, None)?
    } else {
        let f = manifest.plan.field.resolve()?;
        save_field(&f, &field_path)?;
        f
    };
    if field_checksum(&field) != manifest.field_checksum {
        return Err(Error::Store(format!(
            "field checksum mismatch: manifest has {}, field resolves to {}",
            manifest.field_checksum,
            field_checksum(&field)
        )));
    }
    run_missing(manifest, manifest_path, &field, opts)
}

fn cell_complete(dir: &Path, entry: &CellEntry) -> bool {
    let Ok(text) = fs::read_to_string(dir.join(AGGREGATE_FILE)) else {
        return false;
    };
    match serde_json::from_str::<CellAggregate>(&text) {
        Ok(agg) => agg.cell_seed == entry.cell_seed && dir.join(SAMPLES_FILE).exists(),
        Err(_) => false,
    }
}

fn run_missing(
    mut manifest: RunManifest,
    manifest_path: &Path,
    field: &SuitabilityField,
    opts: ExecOptions,
) -> Result<ExecSummary> {
    let root = manifest_path.parent().unwrap_or(Path::new(".")).join("cells");
    let pending: Vec<&CellEntry> = manifest
        .cells
        .iter()
        .filter(|e| !cell_complete(&root.join(&e.dir), e))
        .collect();
    let summary = ExecSummary {
        computed: pending.len(),
        skipped: manifest.cells.len() - pending.len(),
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let plan = &manifest.plan;
    pool.install(|| {
        pending
            .par_iter()
            .map(|e| compute_cell(plan, field, e, &root.join(&e.dir)))
            .collect::<Result<Vec<()>>>()
    })?;

    manifest.updated_at = chrono::Utc::now().to_rfc3339();
    manifest.save(manifest_path)?;
    Ok(summary)
}

/// Read access to a finished sweep.
#[derive(Debug, Clone)]
pub struct ResultStore {
    root: PathBuf,
    manifest: RunManifest,
}

impl ResultStore {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
        Ok(ResultStore {
            root: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn ps_values(&self) -> &[f64] {
        &self.manifest.plan.ps_values
    }

    pub fn delta_values(&self) -> &[f64] {
        &self.manifest.plan.delta_values
    }

    pub fn temperature(&self) -> f64 {
        self.manifest.plan.temperature
    }

    pub fn target_use(&self) -> LandUse {
        self.manifest.plan.target_use
    }

    /// The undegraded field the sweep ran on, checked against the manifest.
    pub fn field(&self) -> Result<SuitabilityField> {
        let field = load_field(&self.root.join(FIELD_FILE), None, None)?;
        if field_checksum(&field) != self.manifest.field_checksum {
            return Err(Error::Store("field.csv does not match the manifest checksum".into()));
        }
        Ok(field)
    }

    fn entry(&self, ps: f64, delta: f64) -> Result<&CellEntry> {
        self.manifest
            .cells
            .iter()
            .find(|e| e.ps == ps && e.delta == delta)
            .ok_or_else(|| Error::Store(format!("no cell for P_S = {ps}, delta = {delta}")))
    }

    pub fn cell_dir(&self, ps: f64, delta: f64) -> Result<PathBuf> {
        Ok(self.root.join("cells").join(&self.entry(ps, delta)?.dir))
    }

    pub fn aggregate(&self, ps: f64, delta: f64) -> Result<CellAggregate> {
        let path = self.cell_dir(ps, delta)?.join(AGGREGATE_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Store(format!("{}: {e} (incomplete sweep? try resume)", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn samples(&self, ps: f64, delta: f64) -> Result<Vec<SampleRow>> {
        let path = self.cell_dir(ps, delta)?.join(SAMPLES_FILE);
        let mut reader = csv::Reader::from_path(&path)
            .map_err(|e| Error::Store(format!("{}: {e}", path.display())))?;
        let bad = |line: usize, what: &str| Error::Store(format!("{}: line {line}: {what}", path.display()));
        let mut rows = Vec::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(n + 2, &e.to_string()))?;
            if rec.len() != 8 {
                return Err(bad(n + 2, "expected 8 columns"));
            }
            let int = |i: usize| rec[i].parse::<u64>().map_err(|_| bad(n + 2, "bad integer"));
            let float = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(n + 2, "bad number"));
            rows.push(SampleRow {
                chain_id: int(0)?,
                sweep_index: int(1)?,
                objective: ObjectiveValue {
                    phi: float(2)?,
                    phi_c: int(3)?,
                    phi_s: float(4)?,
                },
                counts: [int(5)? as usize, int(6)? as usize, int(7)? as usize],
            });
        }
        Ok(rows)
    }
}
