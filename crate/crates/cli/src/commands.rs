use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mola_core::analysis::{self, EventOptions};
use mola_core::enumerator::{enumerate_states_capped, write_landscape_csv};
use mola_core::field_io::{bundled_field, field_checksum, generate_field, load_field, load_field_planes, save_field};
use mola_core::sweep::{self, ExecOptions, ExecSummary, FieldSource, ResultStore, SweepPlan, MANIFEST_FILE};
use mola_core::{Error, ModelParams, SuitabilityField};
use serde::Serialize;

use crate::{
    AnalyzeCommand, Command, EnumerateArgs, EventsArgs, FieldCommand, GenerateArgs, LandscapeArgs, LossArgs,
    OracleCommand, RunArgs, SweepCommand, SweepSelection, ValidateArgs,
};

/// Name of the manifest every non-sweep command leaves next to its output.
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug)]
pub struct CliError(Error);

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e)
    }
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self.0 {
            Error::Config(_)
            | Error::Validation(_)
            | Error::Toml(_)
            | Error::EnumerationCap { .. }
            | Error::OutOfBounds { .. } => "config",
            Error::Ingestion { .. } => "input",
            _ => "runtime",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category() {
            "config" => 2,
            "input" => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Serialize)]
struct CommandManifest {
    command: String,
    args: Vec<String>,
    code_version: &'static str,
    manifest_format_version: u32,
    created_at: String,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl CommandManifest {
    fn new(command: &str) -> Self {
        CommandManifest {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            code_version: env!("CARGO_PKG_VERSION"),
            manifest_format_version: sweep::MANIFEST_FORMAT_VERSION,
            created_at: chrono::Utc::now().to_rfc3339(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn write(&self, path: &Path) -> CliResult {
        let text = serde_json::to_string_pretty(self).map_err(Error::from)?;
        fs::write(path, text + "\n").map_err(|e| io_error(path, e))?;
        Ok(())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    Ok(())
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(|e| io_error(path, e))?;
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

pub fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Field(FieldCommand::Generate(a)) => field_generate(a),
        Command::Field(FieldCommand::Validate(a)) => field_validate(a),
        Command::Sweep(SweepCommand::Run(a)) => sweep_run(a),
        Command::Sweep(SweepCommand::Resume { manifest, workers }) => {
            let summary = sweep::resume(&manifest, ExecOptions { workers })?;
            report_sweep(manifest.parent().unwrap_or(Path::new(".")), &summary);
            Ok(())
        }
        Command::Analyze(AnalyzeCommand::Loss(a)) => analyze_loss(a),
        Command::Analyze(AnalyzeCommand::Landscape(a)) => analyze_landscape(a),
        Command::Analyze(AnalyzeCommand::Events(a)) => analyze_events(a),
        Command::Oracle(OracleCommand::Enumerate(a)) => oracle_enumerate(a),
    }
}

fn field_generate(a: GenerateArgs) -> CliResult {
    let field = generate_field(a.rows, a.cols, a.seed, a.smoothness)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_field(&field, &a.out)?;
    let checksum = field_checksum(&field);
    let mut manifest = CommandManifest::new("field generate");
    manifest.outputs.push(file_name(&a.out));
    manifest.inputs.insert("field_checksum".into(), checksum.clone());
    let mut name = a.out.clone().into_os_string();
    name.push(".manifest.json");
    manifest.write(Path::new(&name))?;
    println!("wrote {} ({}x{}, sha256 {checksum})", a.out.display(), a.rows, a.cols);
    Ok(())
}

fn field_validate(a: ValidateArgs) -> CliResult {
    let field = match (&a.path, &a.planes) {
        (Some(p), _) => load_field(p, a.rows, a.cols)?,
        (None, Some(planes)) => {
            let paths = [planes[0].as_path(), planes[1].as_path(), planes[2].as_path()];
            load_field_planes(&paths, a.rows, a.cols)?
        }
        (None, None) => unreachable!("clap requires a path or --planes"),
    };
    print_field_summary(&field);
    Ok(())
}

fn print_field_summary(field: &SuitabilityField) {
    println!("size {}x{}", field.rows(), field.cols());
    for u in mola_core::LandUse::ALL {
        let plane = field.plane(u);
        let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = plane.iter().sum::<f64>() / plane.len() as f64;
        println!("{u:<13} min {lo:.4} max {hi:.4} mean {mean:.4}");
    }
    println!("sha256 {}", field_checksum(field));
}

fn apply_overrides(plan: &mut SweepPlan, a: &RunArgs) {
    if let Some(v) = a.seed {
        plan.seed = v;
    }
    if let Some(v) = &a.ps {
        plan.ps_values = v.clone();
    }
    if let Some(v) = &a.delta {
        plan.delta_values = v.clone();
    }
    if let Some(v) = a.replicates {
        plan.replicates_per_cell = v;
    }
    if let Some(v) = a.temperature {
        plan.temperature = v;
    }
    if let Some(v) = a.engine {
        plan.chain.engine = v;
    }
    if let Some(v) = a.burn_in {
        plan.chain.burn_in_sweeps = v;
    }
    if let Some(v) = a.interval {
        plan.chain.sample_interval_sweeps = v;
    }
    if let Some(v) = a.samples {
        plan.chain.n_samples = v;
    }
    if let Some(p) = &a.field {
        plan.field = FieldSource::File { path: p.clone() };
    }
}

fn sweep_run(a: RunArgs) -> CliResult {
    let mut plan = match &a.plan {
        Some(p) => SweepPlan::load(p)?,
        None => SweepPlan::default(),
    };
    apply_overrides(&mut plan, &a);
    plan.validate()?;
    let summary = sweep::execute(&plan, &a.out, ExecOptions { workers: a.workers })?;
    report_sweep(&a.out, &summary);
    Ok(())
}

fn report_sweep(dir: &Path, s: &ExecSummary) {
    println!(
        "{}: {} cells computed, {} already complete",
        dir.join(MANIFEST_FILE).display(),
        s.computed,
        s.skipped
    );
}

struct Selection {
    store: ResultStore,
    ps: Vec<f64>,
    out: PathBuf,
}

fn select(sel: &SweepSelection) -> CliResult<Selection> {
    let store = ResultStore::open(&sel.sweep)?;
    let ps = match &sel.ps {
        Some(v) => {
            for p in v {
                if !store.ps_values().contains(p) {
                    return Err(Error::Config(format!("P_S = {p} is not part of the sweep")).into());
                }
            }
            v.clone()
        }
        None => store.ps_values().to_vec(),
    };
    let out = sel.out.clone().unwrap_or_else(|| sel.sweep.join("analysis"));
    create_dir(&out)?;
    Ok(Selection { store, ps, out })
}

fn sweep_manifest(command: &str, store: &ResultStore) -> CommandManifest {
    let mut m = CommandManifest::new(command);
    m.inputs.insert("plan_hash".into(), store.manifest().plan_hash.clone());
    m.inputs.insert("field_checksum".into(), store.manifest().field_checksum.clone());
    m
}

fn analyze_loss(a: LossArgs) -> CliResult {
    let sel = select(&a.sel)?;
    let mut manifest = sweep_manifest("analyze loss", &sel.store);
    manifest.inputs.insert("optimum_source".into(), a.source.to_string());
    for &ps in &sel.ps {
        let curve = analysis::loss_curve(&sel.store, ps, a.source)?;
        let name = analysis::loss_csv_name(ps);
        write_file(&sel.out.join(&name), |w| analysis::write_loss_csv(&curve, w))?;
        let report = analysis::detect_steps(&curve, analysis::DEFAULT_JUMP_THRESHOLD);
        let onset = report
            .total_loss_onset
            .map_or_else(|| "never".to_string(), |d| d.to_string());
        println!("P_S {ps}: {} steps, total loss from delta {onset}", report.steps.len());
        manifest.outputs.push(name);
    }
    manifest.write(&sel.out.join(RUN_MANIFEST_FILE))
}

fn analyze_landscape(a: LandscapeArgs) -> CliResult {
    let sel = select(&a.sel)?;
    let deltas = match &a.delta {
        Some(v) => v.clone(),
        None => sel.store.delta_values().to_vec(),
    };
    let mut manifest = sweep_manifest("analyze landscape", &sel.store);
    for &ps in &sel.ps {
        for &d in &deltas {
            let land = analysis::cell_landscape(&sel.store, ps, d)?;
            let name = analysis::landscape_csv_name(ps, d);
            write_file(&sel.out.join(&name), |w| land.write_csv(w))?;
            manifest.outputs.push(name);
        }
    }
    println!("wrote {} landscapes to {}", manifest.outputs.len(), sel.out.display());
    manifest.write(&sel.out.join(RUN_MANIFEST_FILE))
}

fn analyze_events(a: EventsArgs) -> CliResult {
    let sel = select(&a.sel)?;
    let opts = EventOptions {
        jump_threshold: a.jump_threshold,
        composition_tolerance: a.tolerance,
    };
    let mut manifest = sweep_manifest("analyze events", &sel.store);
    manifest.inputs.insert("optimum_source".into(), a.source.to_string());
    for &ps in &sel.ps {
        let report = analysis::events(&sel.store, ps, a.source, opts)?;
        let name = analysis::events_json_name(ps);
        write_file(&sel.out.join(&name), |w| analysis::write_events_json(&report, w))?;
        let go = report
            .steps
            .iter()
            .filter(|s| s.classification == analysis::Rearrangement::Go)
            .count();
        println!("P_S {ps}: {} steps ({go} GO-rearrangement)", report.steps.len());
        manifest.outputs.push(name);
    }
    manifest.write(&sel.out.join(RUN_MANIFEST_FILE))
}

fn oracle_enumerate(a: EnumerateArgs) -> CliResult {
    let source = match &a.field {
        Some(p) => load_field(p, None, None)?,
        None => bundled_field(),
    };
    let field = source.crop(a.row0, a.col0, a.rows, a.cols)?;
    let params = ModelParams::new(a.pc, a.ps, a.temperature)?;
    let dist = enumerate_states_capped(a.rows, a.cols, &field, &params, a.cap)?;
    create_dir(&a.out)?;
    write_file(&a.out.join("states.csv"), |w| dist.write_csv(w))?;
    let land = dist.composition_landscape();
    write_file(&a.out.join("landscape.csv"), |w| write_landscape_csv(&land, w))?;

    let mut manifest = CommandManifest::new("oracle enumerate");
    manifest.inputs.insert("field_checksum".into(), field_checksum(&field));
    manifest.outputs = vec!["states.csv".into(), "landscape.csv".into()];
    manifest.write(&a.out.join(RUN_MANIFEST_FILE))?;

    let best = dist.argmin();
    println!("{} states, ln Z = {}", dist.len(), dist.log_partition);
    println!(
        "optimum {} phi {} probability {}",
        dist.state(best),
        dist.phi[best as usize],
        dist.probability[best as usize]
    );
    Ok(())
}
