use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use asad_core::association::{builtin_registry, to_record, AssociationConfig, ConfigOverrides};
use asad_core::bench::{bench_to_csv, run_bench, summarize, BenchConfig, ModeSummary};
use asad_core::eval::{evaluate_detailed, EvalConfig};
use asad_core::io::{
    parse_annotations_str, parse_detection_stream, read_sidecar, report_to_csv, report_to_json, write_annotations,
    write_detection_stream, write_pr_curve, ReportFormat,
};
use asad_core::synth::{generate, preset, Manifest, ScenarioSpec, GENERATOR_ID};
use asad_core::{BenchError, Role, VideoRecord};

use crate::config::{load, pick, BenchFile, EvaluateFile, SynthFile, TrackFile};
use crate::{BenchArgs, CliError, EvaluateArgs, ScenarioArgs, SynthArgs, TrackArgs};

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_records(path: &Path, role: Role, labels: Option<u16>) -> Result<Vec<VideoRecord>, CliError> {
    let mut meta = read_sidecar(path)?;
    if let Some(n) = labels {
        meta.n_labels = n;
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_annotations_str(&text, role, &meta, path)?)
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let file: EvaluateFile = load(a.config.as_deref())?;
    let gt_path = required(pick(a.gt, file.gt), "gt")?;
    let pred_path = required(pick(a.pred, file.pred), "pred")?;
    let format: ReportFormat = pick(a.format, file.format)
        .map(|f| f.parse())
        .transpose()
        .map_err(CliError::Usage)?
        .unwrap_or_default();
    let cfg = EvalConfig {
        iou_threshold: pick(a.iou, file.iou).unwrap_or(EvalConfig::default().iou_threshold),
        n_labels: pick(a.labels, file.labels),
        score_cutoff: pick(a.score_cutoff, file.score_cutoff),
        id_switch_persistence: !(a.no_switch_persistence || file.no_switch_persistence.unwrap_or(false)),
    };
    cfg.validate().map_err(CliError::Usage)?;

    let gt = read_records(&gt_path, Role::Gt, cfg.n_labels)?;
    let pred = read_records(&pred_path, Role::Pred, cfg.n_labels)?;
    let evaluation = evaluate_detailed(&gt, &pred, &cfg);
    let mut report = evaluation.report;
    report.inputs.insert("gt".into(), gt_path.display().to_string());
    report.inputs.insert("pred".into(), pred_path.display().to_string());
    if !(a.per_video || file.per_video.unwrap_or(false)) {
        report.videos.clear();
    }
    let text = match format {
        ReportFormat::Json => report_to_json(&report)?,
        ReportFormat::Csv => report_to_csv(&report)?,
    };
    match pick(a.report, file.report) {
        Some(path) => write_file(&path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = pick(a.pr_curve, file.pr_curve) {
        write_pr_curve(&evaluation.curve, &path)?;
    }
    Ok(())
}

pub fn track(a: TrackArgs) -> Result<(), CliError> {
    let file: TrackFile = load(a.config.as_deref())?;
    let det_path = required(pick(a.detections, file.detections), "detections")?;
    let mode = required(pick(a.mode, file.mode), "mode")?;
    let out = required(pick(a.out, file.out), "out")?;
    let overrides = ConfigOverrides {
        lambda: pick(a.lambda, file.lambda),
        tau: pick(a.tau, file.tau),
        max_gap: pick(a.gap, file.gap),
    };
    let tracker = builtin_registry()
        .build(&mode, &overrides)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let streams = parse_detection_stream(&det_path)?;
    let mut records = Vec::with_capacity(streams.len());
    for s in &streams {
        let ids = tracker.assign_ids(s).map_err(|e| CliError::Validation(e.to_string()))?;
        records.push(to_record(s, &ids, None));
    }
    write_annotations(&out, &records, Role::Pred)?;
    eprintln!(
        "{}: {} video(s), {} detection(s) tracked with {mode} ({:?})",
        out.display(),
        records.len(),
        records.iter().map(VideoRecord::len).sum::<usize>(),
        tracker.config()
    );
    Ok(())
}

fn scenario_spec(flags: &ScenarioArgs, file: &ScenarioArgs, default_name: &str) -> Result<(String, ScenarioSpec), CliError> {
    let name = pick(flags.scenario.clone(), file.scenario.clone()).unwrap_or_else(|| default_name.to_string());
    let mut spec = preset(&name).map_err(|e| CliError::Usage(e.to_string()))?;
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = pick(flags.$field, file.$field) {
                spec.$field = v;
            })*
        };
    }
    apply!(n_actors, n_keyframes, n_cuts, p_miss, p_fp, p_act, sigma_box, sigma_app);
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((name, spec))
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let file: SynthFile = load(a.config.as_deref())?;
    let (name, mut spec) = scenario_spec(&a.scenario, &file.scenario_args(), "default")?;
    spec.seed = pick(a.seed, file.seed).unwrap_or(0);
    let out = required(pick(a.out, file.out), "out")?;
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let scenario = generate(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    write_annotations(&out.join("gt.csv"), std::slice::from_ref(&scenario.gt), Role::Gt)?;
    write_detection_stream(&out.join("detections.csv"), std::slice::from_ref(&scenario.stream))?;
    let manifest = Manifest::new(&name, &scenario);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_file(&out.join("manifest.json"), &json)?;
    eprintln!(
        "{}: {} ground-truth observations, {} detections, {} cuts",
        out.display(),
        scenario.gt.len(),
        scenario.stream.len(),
        scenario.cuts.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchProvenance<'a> {
    tool_version: &'a str,
    generator: &'a str,
    scenario_name: &'a str,
    scenario: &'a ScenarioSpec,
    seeds: &'a [u64],
    modes: Vec<(&'a str, AssociationConfig)>,
    eval: &'a EvalConfig,
    summary: Vec<ModeSummary>,
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let file: BenchFile = load(a.config.as_deref())?;
    let (name, spec) = scenario_spec(&a.scenario, &file.scenario_args(), "camera-cut")?;
    let k = pick(a.seeds, file.seeds).unwrap_or(10);
    if k < 1 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let out: PathBuf = required(pick(a.out, file.out), "out")?;
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let cfg = BenchConfig::new(spec, k);
    let registry = builtin_registry();
    let rows = run_bench(&cfg, registry).map_err(|e| match e {
        BenchError::Synth(e) => CliError::Usage(e.to_string()),
        BenchError::Association(e) => CliError::Usage(e.to_string()),
    })?;
    write_file(&out.join("bench.csv"), &bench_to_csv(&rows)?)?;

    let summary = summarize(&rows);
    for s in &summary {
        println!(
            "{:<8} runs={} mean_ap50={} mean_idf1={:.4} total_id_switches={}",
            s.mode,
            s.runs,
            s.mean_ap50.map_or("null".to_string(), |v| format!("{v:.4}")),
            s.mean_idf1,
            s.total_id_switches
        );
    }
    let modes = cfg
        .modes
        .iter()
        .map(|m| Ok((m.as_str(), registry.resolve(m, &cfg.overrides).map_err(|e| CliError::Usage(e.to_string()))?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let provenance = BenchProvenance {
        tool_version: asad_core::VERSION,
        generator: GENERATOR_ID,
        scenario_name: &name,
        scenario: &cfg.scenario,
        seeds: &cfg.seeds,
        modes,
        eval: &cfg.eval,
        summary,
    };
    let json = serde_json::to_string_pretty(&provenance).expect("provenance serializes") + "\n";
    write_file(&out.join("bench.json"), &json)
}
