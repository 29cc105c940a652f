//! The five experiment commands. Every command writes CSV/JSON outputs and a
//! `manifest.json` listing the configuration hash, seeds and the SHA-256 of
//! each output file.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{Factor, Level, ModelChoice, ScenarioConfig};
use super::scenario::{build_problem, simulate_dataset, Dataset, GroundTruth};
use crate::diagnostics::{box_whisker, model_fit, summarize, write_fits_csv, ModelFit, Summary};
use crate::error::{Error, Result};
use crate::inference::{Checkpoint, DispersionMode, Problem, Sampler, Trace};
use crate::plume::{AscTables, DispersionSpec, DraxlerParams};
use crate::sensing::chilbolton::{self, FixtureSpec, IngestReport};

/// Iterations between checkpoint writes.
pub const CHECKPOINT_EVERY: usize = 500;

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    data_seed: u64,
    chain_seed: u64,
    config_sha256: String,
    outputs: Vec<ManifestEntry>,
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p.file_name().is_some_and(|n| n != "manifest.json") {
            out.push(p.strip_prefix(root).unwrap_or(&p).to_path_buf());
        }
    }
    Ok(())
}

/// Writes `config.toml` and, after every other output, `manifest.json`.
fn write_manifest(command: &str, cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let mut files = vec![];
    collect_files(out, out, &mut files)?;
    let outputs = files
        .iter()
        .map(|rel| {
            let p = out.join(rel);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            Ok(ManifestEntry {
                file: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        data_seed: cfg.seeds.data,
        chain_seed: cfg.seeds.chain,
        config_sha256: sha256_hex(cfg.to_toml_string().as_bytes()),
        outputs,
    };
    write_json(&out.join("manifest.json"), &m)
}

fn write_config(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    write_text(&out.join("config.toml"), &cfg.to_toml_string())
}

/// `simulate`: synthetic wind, sensors, observations and ground truth.
pub fn cmd_simulate(cfg: &ScenarioConfig, out: &Path) -> Result<Dataset> {
    let tables = AscTables::shipped();
    mkdir(out)?;
    let data = simulate_dataset(cfg, &tables)?;
    data.write(out)?;
    write_config(cfg, out)?;
    write_manifest("simulate", cfg, out)?;
    Ok(data)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coverage {
    pub parameter: String,
    pub truth: f64,
    pub q025: f64,
    pub q975: f64,
    pub covered: bool,
}

/// Result of one inversion.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub label: String,
    pub summary: Summary,
    pub fit: ModelFit,
    pub coverage: Vec<Coverage>,
    pub metric_fallbacks: usize,
}

#[derive(Serialize)]
struct BoxRow<'a> {
    run: &'a str,
    parameter: &'a str,
    truth: Option<f64>,
    whisker_lo: f64,
    q1: f64,
    median: f64,
    q3: f64,
    whisker_hi: f64,
    n_outliers: usize,
    mean: f64,
}

fn box_rows<'a>(label: &'a str, trace: &'a Trace, truth: Option<&GroundTruth>) -> Vec<BoxRow<'a>> {
    let mut names: Vec<&str> = trace.names.iter().map(String::as_str).collect();
    names.push("sigma2");
    names
        .into_iter()
        .map(|n| {
            let draws = trace.column(n).expect("known column");
            let b = box_whisker(&draws);
            BoxRow {
                run: label,
                parameter: n,
                truth: truth.and_then(|t| t.value(n)),
                whisker_lo: b.whisker_lo,
                q1: b.q1,
                median: b.median,
                q3: b.q3,
                whisker_hi: b.whisker_hi,
                n_outliers: b.n_outliers,
                mean: crate::diagnostics::mean(&draws),
            }
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs one inversion, writing trace, checkpoint, summary, fit and
/// box-whisker files to `out`. With `resume`, continues from
/// `out/checkpoint.json` and `out/trace.csv` when present.
pub fn invert_problem(
    label: &str,
    cfg: &ScenarioConfig,
    problem: &Problem,
    truth: Option<&GroundTruth>,
    out: &Path,
    resume: bool,
) -> Result<RunResult> {
    mkdir(out)?;
    let cp_path = out.join("checkpoint.json");
    let trace_path = out.join("trace.csv");
    let names: Vec<String> = problem.mode().names().into_iter().map(String::from).collect();
    let mut sampler = if resume && cp_path.exists() {
        let cp = Checkpoint::read_json(&cp_path)?;
        let trace = Trace::read_csv(&trace_path, names, problem.sensor_ids().to_vec(), cfg.sampler.burn_in)?;
        Sampler::resume(problem, cfg.sampler.clone(), cp, trace)?
    } else {
        Sampler::new(problem, cfg.sampler.clone(), cfg.seeds.chain)?
    };
    while !sampler.is_done() {
        let next = (sampler.state().iteration / CHECKPOINT_EVERY + 1) * CHECKPOINT_EVERY;
        sampler.run_until(next)?;
        sampler.trace().write_csv(&trace_path)?;
        sampler.checkpoint().write_json(&cp_path)?;
    }
    let trace = sampler.trace();
    let summary = summarize(trace)?;
    summary.write_csv(out.join("summary.csv"))?;
    summary.write_json(out.join("summary.json"))?;
    let fit = model_fit(label, problem, trace)?;
    write_fits_csv(std::slice::from_ref(&fit), out.join("fit.csv"))?;
    write_rows(&out.join("boxwhisker.csv"), &box_rows(label, trace, truth))?;
    let coverage: Vec<Coverage> = match truth {
        None => vec![],
        Some(t) => summary
            .params
            .iter()
            .filter_map(|p| {
                let v = t.value(&p.name)?;
                Some(Coverage {
                    parameter: p.name.clone(),
                    truth: v,
                    q025: p.q025,
                    q975: p.q975,
                    covered: p.covers_95(v),
                })
            })
            .collect(),
    };
    if !coverage.is_empty() {
        write_rows(&out.join("coverage.csv"), &coverage)?;
    }
    Ok(RunResult {
        label: label.to_string(),
        summary,
        fit,
        coverage,
        metric_fallbacks: sampler.metric_fallbacks(),
    })
}

fn truth_dispersion(cfg: &ScenarioConfig, data: &Dataset) -> DraxlerParams {
    data.truth.as_ref().map(|t| t.dispersion).unwrap_or_else(|| cfg.dpv())
}

/// `invert`: reads a data set (or simulates the configured one) and runs
/// the configured model.
pub fn cmd_invert(cfg: &ScenarioConfig, data_dir: Option<&Path>, out: &Path, resume: bool) -> Result<RunResult> {
    let tables = AscTables::shipped();
    mkdir(out)?;
    let data = match data_dir {
        Some(d) => Dataset::read(d).map_err(|e| e.context(format!("data set {}", d.display())))?,
        None => {
            let data = simulate_dataset(cfg, &tables)?;
            data.write(&out.join("data"))?;
            data
        }
    };
    let mode = cfg.model.to_mode(truth_dispersion(cfg, &data));
    let problem = build_problem(cfg, &data, mode, cfg.base.source, &tables)?;
    let res = invert_problem(&cfg.model.to_string(), cfg, &problem, data.truth.as_ref(), out, resume)
        .map_err(|e| e.context("invert"))?;
    write_config(cfg, out)?;
    write_manifest("invert", cfg, out)?;
    Ok(res)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub run: String,
    pub factor: String,
    pub level: String,
    pub config_sha256: String,
    pub status: String,
    pub message: String,
}

/// The 13 one-factor-at-a-time configurations: the shared level-M base,
/// then L and H for each factor.
pub fn main_effects_configs(base: &ScenarioConfig) -> Vec<(String, Option<Factor>, Level, ScenarioConfig)> {
    let mut m = base.clone();
    m.factors = Default::default();
    let mut v = vec![("M".to_string(), None, Level::M, m.clone())];
    for f in Factor::ALL {
        for l in [Level::L, Level::H] {
            let mut c = m.clone();
            c.factors.set(f, l);
            v.push((format!("{f}-{l}"), Some(f), l, c));
        }
    }
    v
}

fn run_scenario(label: &str, cfg: &ScenarioConfig, dir: &Path) -> Result<(RunResult, Dataset)> {
    let tables = AscTables::shipped();
    let data = simulate_dataset(cfg, &tables)?;
    data.write(&dir.join("data"))?;
    let mode = cfg.model.to_mode(truth_dispersion(cfg, &data));
    let problem = build_problem(cfg, &data, mode, cfg.base.source, &tables)?;
    let r = invert_problem(label, cfg, &problem, data.truth.as_ref(), dir, false)?;
    Ok((r, data))
}

pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    pub results: Vec<Option<RunResult>>,
}

/// `main-effects`: the one-factor-at-a-time sweep. A failing run is
/// recorded and the sweep continues.
pub fn cmd_main_effects(cfg: &ScenarioConfig, out: &Path) -> Result<SweepReport> {
    mkdir(out)?;
    let configs = main_effects_configs(cfg);
    let results: Vec<Result<(RunResult, Dataset)>> = configs
        .par_iter()
        .map(|(label, _, _, c)| {
            run_scenario(label, c, &out.join("runs").join(label)).map_err(|e| e.context(label.clone()))
        })
        .collect();
    let mut entries = vec![];
    let mut boxes: Vec<(String, String, String, String, Option<f64>, [f64; 5], usize, f64)> = vec![];
    let mut kept = vec![];
    for ((label, factor, level, c), res) in configs.iter().zip(results) {
        let factor_name = factor.map(|f| f.to_string()).unwrap_or_else(|| "base".into());
        let (status, message) = match &res {
            Ok(_) => ("ok".to_string(), String::new()),
            Err(e) => ("failed".to_string(), e.to_string()),
        };
        entries.push(SweepEntry {
            run: label.clone(),
            factor: factor_name.clone(),
            level: level.to_string(),
            config_sha256: sha256_hex(c.to_toml_string().as_bytes()),
            status,
            message,
        });
        match res {
            Ok((r, data)) => {
                let trace_path = out.join("runs").join(label).join("trace.csv");
                let names: Vec<String> = c.model.to_mode(c.dpv()).names().into_iter().map(String::from).collect();
                let trace = Trace::read_csv(&trace_path, names, data.array.ids(), c.sampler.burn_in)?;
                for b in box_rows(label, &trace, data.truth.as_ref()) {
                    boxes.push((
                        label.clone(),
                        factor_name.clone(),
                        level.to_string(),
                        b.parameter.to_string(),
                        b.truth,
                        [b.whisker_lo, b.q1, b.median, b.q3, b.whisker_hi],
                        b.n_outliers,
                        b.mean,
                    ));
                }
                kept.push(Some(r));
            }
            Err(_) => kept.push(None),
        }
    }
    write_rows(&out.join("sweep.csv"), &entries)?;
    #[derive(Serialize)]
    struct Row<'a> {
        run: &'a str,
        factor: &'a str,
        level: &'a str,
        parameter: &'a str,
        truth: Option<f64>,
        whisker_lo: f64,
        q1: f64,
        median: f64,
        q3: f64,
        whisker_hi: f64,
        n_outliers: usize,
        mean: f64,
    }
    let rows: Vec<Row> = boxes
        .iter()
        .map(|b| Row {
            run: &b.0,
            factor: &b.1,
            level: &b.2,
            parameter: &b.3,
            truth: b.4,
            whisker_lo: b.5[0],
            q1: b.5[1],
            median: b.5[2],
            q3: b.5[3],
            whisker_hi: b.5[4],
            n_outliers: b.6,
            mean: b.7,
        })
        .collect();
    write_rows(&out.join("boxwhisker.csv"), &rows)?;
    write_config(cfg, out)?;
    write_manifest("main-effects", cfg, out)?;
    Ok(SweepReport {
        entries,
        results: kept,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MisspecRow {
    pub run: String,
    pub fixed_parameter: String,
    pub fixed_value: Option<f64>,
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub q025: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q975: f64,
}

fn scaled(p: DraxlerParams, name: &str, f: f64) -> DraxlerParams {
    let mut q = p;
    match name {
        "a_h" => q.a_h *= f,
        "b_h" => q.b_h *= f,
        "a_v" => q.a_v *= f,
        "b_v" => q.b_v *= f,
        _ => unreachable!("unknown dispersion parameter {name}"),
    }
    q
}

fn param_value(p: &DraxlerParams, name: &str) -> f64 {
    match name {
        "a_h" => p.a_h,
        "b_h" => p.b_h,
        "a_v" => p.a_v,
        _ => p.b_v,
    }
}

/// `misspec-study`: one data set at the study truth, inverted with the
/// truth, with all four parameters estimated, and with each parameter in
/// turn fixed at every configured multiple of its true value.
pub fn cmd_misspec_study(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<MisspecRow>> {
    let tables = AscTables::shipped();
    mkdir(out)?;
    let truth = cfg.misspec.truth;
    let mut c = cfg.clone();
    c.levels.dpv = [truth; 3];
    let data = simulate_dataset(&c, &tables)?;
    data.write(&out.join("data"))?;
    let gt = data.truth.clone().expect("simulated data carry truth");

    let mut runs: Vec<(String, String, Option<f64>, DispersionMode)> = vec![
        (
            "truth".into(),
            "none".into(),
            None,
            DispersionMode::Fixed {
                spec: DispersionSpec::Draxler(truth),
            },
        ),
        ("est".into(), "none".into(), None, DispersionMode::EstimateDraxler),
    ];
    for name in ["a_h", "b_h", "a_v", "b_v"] {
        for &f in &c.misspec.factors {
            let p = scaled(truth, name, f);
            runs.push((
                format!("{name}x{f}"),
                name.to_string(),
                Some(param_value(&p, name)),
                DispersionMode::Fixed {
                    spec: DispersionSpec::Draxler(p),
                },
            ));
        }
    }
    let results: Vec<Result<RunResult>> = runs
        .par_iter()
        .map(|(label, _, _, mode)| {
            let problem = build_problem(&c, &data, mode.clone(), c.base.source, &tables)?;
            invert_problem(label, &c, &problem, Some(&gt), &out.join("runs").join(label), false)
                .map_err(|e| e.context(label.clone()))
        })
        .collect();
    let mut rows = vec![];
    for ((label, fixed, value, _), res) in runs.iter().zip(results) {
        let r = res?;
        for pname in ["rate", "x", "y"] {
            let p = r.summary.get(pname).expect("location and rate are always sampled");
            rows.push(MisspecRow {
                run: label.clone(),
                fixed_parameter: fixed.clone(),
                fixed_value: *value,
                parameter: pname.to_string(),
                truth: gt.value(pname).expect("known truth"),
                mean: p.mean,
                q025: p.q025,
                q25: p.q25,
                median: p.median,
                q75: p.q75,
                q975: p.q975,
            });
        }
    }
    write_rows(&out.join("misspec.csv"), &rows)?;
    write_config(cfg, out)?;
    write_manifest("misspec-study", cfg, out)?;
    Ok(rows)
}

pub struct TrialReport {
    pub fits: Vec<ModelFit>,
    pub failures: Vec<(String, String)>,
    pub ingest: IngestReport,
}

/// `chilbolton`: ingests a trial directory (or writes a synthetic one) and
/// fits every configured model, writing a model/BIC/RMSE comparison.
pub fn cmd_chilbolton(cfg: &ScenarioConfig, data_dir: Option<&Path>, out: &Path) -> Result<TrialReport> {
    let tables = AscTables::shipped();
    mkdir(out)?;
    let dir = match data_dir.or(cfg.trial.data_dir.as_deref()) {
        Some(d) => d.to_path_buf(),
        None => {
            let d = out.join("fixture");
            chilbolton::write_fixture(&d, &FixtureSpec::default(), cfg.seeds.data)?;
            d
        }
    };
    let trial = chilbolton::ingest(&dir, &cfg.trial.aggregation)?;
    let release = trial.release.clone().ok_or_else(|| {
        Error::Config(format!("{}: release.json with the source geometry is required", dir.display()))
    })?;
    write_json(&out.join("ingest_report.json"), &trial.report)?;
    let data = Dataset {
        array: trial.array.clone(),
        observations: trial.observations.clone(),
        truth: None,
    };
    let mut c = cfg.clone();
    c.priors = cfg.trial.priors.clone();
    let models = &cfg.trial.models;
    let results: Vec<Result<RunResult>> = models
        .par_iter()
        .map(|m| {
            let label = m.to_string();
            let mode = m.to_mode(DraxlerParams::UNIT);
            let problem = build_problem(&c, &data, mode, release.source, &tables)?;
            let dir = out.join("models").join(label.replace(':', "-"));
            invert_problem(&label, &c, &problem, None, &dir, false).map_err(|e| e.context(label.clone()))
        })
        .collect();
    let mut fits = vec![];
    let mut failures = vec![];
    for (m, r) in models.iter().zip(results) {
        match r {
            Ok(r) => fits.push(r.fit),
            Err(e) => failures.push((m.to_string(), e.to_string())),
        }
    }
    write_fits_csv(&fits, out.join("comparison.csv"))?;
    if !failures.is_empty() {
        #[derive(Serialize)]
        struct F<'a> {
            model: &'a str,
            error: &'a str,
        }
        let rows: Vec<F> = failures.iter().map(|(m, e)| F { model: m, error: e }).collect();
        write_rows(&out.join("failures.csv"), &rows)?;
    }
    write_config(&c, out)?;
    write_manifest("chilbolton", &c, out)?;
    Ok(TrialReport {
        fits,
        failures,
        ingest: trial.report,
    })
}

/// Parses a model list such as `briggs:A,est-draxler`.
pub fn parse_models(list: &str) -> Result<Vec<ModelChoice>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}
