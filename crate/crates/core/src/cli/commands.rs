use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use fxq::ecg::{self, load_dataset, read_windows, write_windows, Label, PipelineOptions, SignalRecord, WindowBatch};
use fxq::float_ref::deserialize_float;
use fxq::graph::{deserialize, serialize, validate};
use fxq::par::{self, Exec};
use fxq::profile::{classification_metrics, profile as build_profile, Measurements};
use fxq::quantizer::{calibrate_activations, quantize_model, QuantPolicy};
use fxq::{build_canonical_model, forward_quantized, Error, ModelGraph, QFormat, QTensor};

use super::{CliError, ReportFormat, WindowArgs};

type CliResult<T = ()> = Result<T, CliError>;

fn exec(w: &WindowArgs) -> Exec {
    if w.sequential { Exec::Sequential } else { Exec::Parallel }
}

fn window_config(w: &WindowArgs) -> Value {
    json!({
        "seed": w.seed,
        "deterministic_offset": w.deterministic_offset,
        "zero_phase": w.zero_phase,
    })
}

/// Echo the effective configuration so a run can be repeated exactly.
fn echo(command: &str, config: &Value) {
    eprintln!("fxq {command} {config}");
}

fn emit(format: ReportFormat, table: impl FnOnce() -> String, doc: Value) -> CliResult {
    let text = match format {
        ReportFormat::Table => table(),
        ReportFormat::Json => serde_json::to_string_pretty(&doc)? + "\n",
    };
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::MissingFile { path: path.to_path_buf(), source }.into())
}

fn load_graph(path: &Path) -> CliResult<ModelGraph> {
    let graph = deserialize(&read_file(path)?)?;
    let report = validate(&graph);
    if !report.is_ok() {
        let msgs: Vec<String> = report
            .errors()
            .map(|d| format!("{}: {}", d.layer.as_deref().unwrap_or("model"), d.message))
            .collect();
        return Err(CliError::Validation(msgs.join("; ")));
    }
    Ok(graph)
}

enum Outcome {
    Windows(ecg::Preprocessed),
    Skipped(String),
}

/// Preprocess every record in input order. Records too short to yield a
/// window are skipped rather than failing the run.
fn preprocess_all(records: &[SignalRecord], w: &WindowArgs) -> CliResult<Vec<Outcome>> {
    let indexed: Vec<(usize, &SignalRecord)> = records.iter().enumerate().collect();
    let results = par::map(exec(w), &indexed, |(i, r)| {
        let opts = PipelineOptions {
            zero_phase: w.zero_phase,
            seed: (!w.deterministic_offset).then(|| ecg::record_seed(w.seed, *i)),
            ..PipelineOptions::default()
        };
        match ecg::preprocess(r, &opts) {
            Ok(p) => Ok(Outcome::Windows(p)),
            Err(e @ Error::RecordTooShort { .. }) => {
                warn!("skipping {}: {e}", r.id);
                Ok(Outcome::Skipped(e.to_string()))
            }
            Err(e) => Err(e),
        }
    });
    Ok(results.into_iter().collect::<Result<Vec<_>, Error>>()?)
}

#[derive(Serialize)]
struct Skipped {
    id: String,
    reason: String,
}

fn file_stem_for(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

pub fn preprocess(manifest: &Path, out: &Path, w: &WindowArgs, format: ReportFormat) -> CliResult {
    let config = json!({ "manifest": manifest, "out": out, "window": window_config(w) });
    echo("preprocess", &config);
    let records = load_dataset(manifest, exec(w))?;
    let mut stems = BTreeSet::new();
    for r in &records {
        if !stems.insert(file_stem_for(&r.id)) {
            return Err(CliError::Precondition(format!("record id '{}' is not unique", r.id)));
        }
    }
    std::fs::create_dir_all(out)?;
    let outcomes = preprocess_all(&records, w)?;
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let (mut skipped, mut degenerate, mut windows_total) = (Vec::new(), Vec::new(), 0);
    for (r, o) in records.iter().zip(&outcomes) {
        match o {
            Outcome::Windows(p) => {
                write_windows(&out.join(format!("{}.fxw", file_stem_for(&r.id))), &p.batch)?;
                *histogram.entry(p.batch.len()).or_default() += 1;
                windows_total += p.batch.len();
                if p.degenerate {
                    degenerate.push(r.id.clone());
                }
            }
            Outcome::Skipped(reason) => skipped.push(Skipped { id: r.id.clone(), reason: reason.clone() }),
        }
    }
    let summary = json!({
        "schema": "fxq.preprocess/1",
        "config": config,
        "records": records.len(),
        "written": records.len() - skipped.len(),
        "windows_total": windows_total,
        "windows_histogram": histogram,
        "skipped": skipped,
        "degenerate": degenerate,
    });
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let table = || {
        let mut s = format!("records {}  written {}  windows {}\n", records.len(), records.len() - skipped.len(), windows_total);
        for (n, count) in &histogram {
            s += &format!("N_w {n:>3}: {count}\n");
        }
        for k in &skipped {
            s += &format!("skipped {}: {}\n", k.id, k.reason);
        }
        for d in &degenerate {
            s += &format!("warning: {d} is flat; normalized to zeros\n");
        }
        s
    };
    emit(format, table, summary)
}

pub struct QuantizeOptions {
    pub uniform: Option<QFormat>,
    pub weight_bits: u8,
    pub activation_bits: u8,
}

pub fn quantize(
    model: &Path,
    out: &Path,
    calibration: Option<&Path>,
    opts: &QuantizeOptions,
    w: &WindowArgs,
    format: ReportFormat,
) -> CliResult {
    let config = json!({
        "model": model,
        "out": out,
        "calibration": calibration,
        "uniform": opts.uniform,
        "weight_bits": opts.weight_bits,
        "activation_bits": opts.activation_bits,
        "window": window_config(w),
    });
    echo("quantize", &config);
    for bits in [opts.weight_bits, opts.activation_bits] {
        if !(2..=16).contains(&bits) {
            return Err(CliError::Precondition(format!("word size {bits} outside 2..=16")));
        }
    }
    let float = deserialize_float(&read_file(model)?)?;
    let calibrated = match calibration {
        Some(manifest) => {
            let records = load_dataset(manifest, exec(w))?;
            let recordings: Vec<Vec<Vec<f64>>> = preprocess_all(&records, w)?
                .into_iter()
                .filter_map(|o| match o {
                    Outcome::Windows(p) => Some(p.batch.windows),
                    Outcome::Skipped(_) => None,
                })
                .collect();
            info!("calibrating on {} recordings", recordings.len());
            Some(calibrate_activations(&float, &recordings, opts.activation_bits, exec(w))?)
        }
        None => None,
    };
    let policy = QuantPolicy {
        weight_bits: opts.weight_bits,
        activation_bits: opts.activation_bits,
        uniform: opts.uniform,
        ..QuantPolicy::default()
    };
    let (graph, scheme) = quantize_model(&float, &policy, calibrated.as_deref())?;
    let report = validate(&graph);
    if !report.is_ok() {
        let msgs: Vec<String> = report.errors().map(|d| d.message.clone()).collect();
        return Err(CliError::Validation(msgs.join("; ")));
    }
    std::fs::write(out, serialize(&graph)?)?;
    let doc = json!({ "schema": "fxq.quantize/1", "config": config, "scheme": scheme, "diagnostics": report });
    emit(format, || scheme.to_table(), doc)
}

#[derive(Serialize)]
struct Prediction {
    id: String,
    label: Label,
    windows: usize,
    probabilities: Vec<f64>,
}

fn classify(graph: &ModelGraph, batch: &WindowBatch) -> CliResult<Prediction> {
    let q = batch
        .windows
        .iter()
        .map(|x| QTensor::from_real(x, x.len(), 1, graph.input_fmt))
        .collect::<Result<Vec<_>, _>>()?;
    let inf = forward_quantized(graph, &q)?;
    let label = Label::from_index(inf.class)
        .ok_or_else(|| CliError::Validation(format!("model has more than 4 outputs (argmax {})", inf.class)))?;
    Ok(Prediction { id: batch.id.clone(), label, windows: batch.len(), probabilities: inf.probabilities })
}

/// Classify each usable record of a manifest, in manifest order.
fn classify_manifest(
    graph: &ModelGraph,
    manifest: &Path,
    w: &WindowArgs,
) -> CliResult<(Vec<SignalRecord>, Vec<Option<Prediction>>, Vec<Skipped>)> {
    let records = load_dataset(manifest, exec(w))?;
    let outcomes = preprocess_all(&records, w)?;
    let preds = par::map(exec(w), &outcomes, |o| match o {
        Outcome::Windows(p) => classify(graph, &p.batch).map(Some),
        Outcome::Skipped(_) => Ok(None),
    })
    .into_iter()
    .collect::<CliResult<Vec<_>>>()?;
    let skipped = records
        .iter()
        .zip(&outcomes)
        .filter_map(|(r, o)| match o {
            Outcome::Skipped(reason) => Some(Skipped { id: r.id.clone(), reason: reason.clone() }),
            Outcome::Windows(_) => None,
        })
        .collect();
    Ok((records, preds, skipped))
}

fn prediction_table(preds: &[&Prediction], skipped: &[Skipped]) -> String {
    let mut s = format!("{:<16} {:<7} {:>7} {:>7} {:>7} {:>7}\n", "id", "class", "Normal", "AF", "Other", "Noise");
    for p in preds {
        s += &format!("{:<16} {:<7}", p.id, p.label.to_string());
        for v in &p.probabilities {
            s += &format!(" {v:>7.4}");
        }
        s += "\n";
    }
    for k in skipped {
        s += &format!("skipped {}: {}\n", k.id, k.reason);
    }
    s
}

pub fn infer(
    model: &Path,
    manifest: Option<&Path>,
    windows: Option<&Path>,
    w: &WindowArgs,
    format: ReportFormat,
) -> CliResult {
    let config = json!({ "model": model, "manifest": manifest, "windows": windows, "window": window_config(w) });
    echo("infer", &config);
    let graph = load_graph(model)?;
    let (preds, skipped) = match (manifest, windows) {
        (_, Some(path)) => (vec![classify(&graph, &read_windows(path)?)?], Vec::new()),
        (Some(m), None) => {
            let (_, preds, skipped) = classify_manifest(&graph, m, w)?;
            (preds.into_iter().flatten().collect(), skipped)
        }
        (None, None) => return Err(CliError::Precondition("either --manifest or --windows is required".into())),
    };
    let refs: Vec<&Prediction> = preds.iter().collect();
    let doc = json!({ "schema": "fxq.infer/1", "config": config, "results": preds, "skipped": skipped });
    emit(format, || prediction_table(&refs, &skipped), doc)
}

pub fn evaluate(model: &Path, manifest: &Path, w: &WindowArgs, format: ReportFormat) -> CliResult {
    let config = json!({ "model": model, "manifest": manifest, "window": window_config(w) });
    echo("evaluate", &config);
    let graph = load_graph(model)?;
    let (records, preds, skipped) = classify_manifest(&graph, manifest, w)?;
    if let Some(r) = records.iter().find(|r| r.label.is_none()) {
        return Err(CliError::Precondition(format!("record '{}' has no label", r.id)));
    }
    let (mut truth, mut predicted) = (Vec::new(), Vec::new());
    for (r, p) in records.iter().zip(&preds) {
        if let (Some(t), Some(p)) = (r.label, p) {
            truth.push(t);
            predicted.push(p.label);
        }
    }
    if truth.is_empty() {
        return Err(CliError::Precondition("no record long enough to classify".into()));
    }
    let metrics = classification_metrics(&predicted, &truth)?;
    let doc = json!({
        "schema": "fxq.evaluate/1",
        "config": config,
        "records": truth.len(),
        "metrics": metrics,
        "skipped": skipped,
    });
    let table = || {
        let mut s = metrics.to_table();
        for k in &skipped {
            s += &format!("skipped {}: {}\n", k.id, k.reason);
        }
        s
    };
    emit(format, table, doc)
}

pub fn profile(model: Option<&Path>, m: &Measurements, format: ReportFormat) -> CliResult {
    let config = json!({
        "model": model.map(PathBuf::from),
        "exec_time_s": m.exec_time_s,
        "clock_hz": m.clock_hz,
        "v_drop": m.v_drop,
        "r_shunt": m.r_shunt,
        "v_supply": m.v_supply,
    });
    echo("profile", &config);
    let graph = match model {
        Some(p) => load_graph(p)?,
        None => build_canonical_model(),
    };
    let report = build_profile(&graph, m)?;
    let doc = json!({ "schema": "fxq.profile/1", "config": config, "report": report });
    emit(format, || report.to_table(), doc)
}
