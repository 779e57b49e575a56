//! End-to-end experiment: learning set, surrogate fits, propagation,
//! Monte-Carlo reference, comparison and sensitivity, plus artifacts.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use gppopf::acopf::oracle_calls;
use gppopf::case_io::{load_case, NetworkCase};
use gppopf::gpr::GpModel;
use gppopf::popf::{
    add_renewables, build_training_set, compare, draw, mcs_reference, model_digest, propagate, stream_rng,
    train_surrogates, uncertainty_box, GpSamples, McsSamples, OutputLayout, PopfReport, RenewableScenario,
    SampleErrors, Stream, Summary, TrainingSet, UncertaintySpec,
};
use gppopf::sensitivity::{inverse_relation_report, record, InverseRelation, SensitivityRecord};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, Artifacts};
use crate::config::ExperimentConfig;
use crate::models::{self, ModelManifest, MANIFEST_SCHEMA, MANIFEST_VERSION};
use crate::BUILD_ID;

pub const REPORT_SCHEMA: &str = "gppopf.report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub n_bus: usize,
    pub n_gen: usize,
    pub renewable_buses: Vec<u32>,
    pub renewable_capacity_mw: Vec<f64>,
    pub base_load_mw: f64,
    /// Realized renewable capacity as % of base load.
    pub penetration_pct: f64,
    pub input_dim: usize,
    pub n_outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub l: f64,
    pub sigma_f: f64,
    pub sigma_n: f64,
    pub lml: f64,
    pub jitter: f64,
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSummary {
    pub name: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub version: u32,
    pub build: String,
    pub config: ExperimentConfig,
    pub scenario: ScenarioInfo,
    pub training_samples: usize,
    pub training_rejected: usize,
    pub model_digest: String,
    pub models: Vec<ModelInfo>,
    /// Surrogate predictive means over every test sample.
    pub gp_summaries: Vec<NamedSummary>,
    pub popf: PopfReport,
    /// Over the conventional generators; absent with fewer than three.
    pub sensitivity: Option<InverseRelation>,
}

/// Wall-clock seconds per stage; kept out of the report so the report is
/// reproducible byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub training_set_s: f64,
    pub fit_s: f64,
    pub predict_s: f64,
    pub mcs_s: f64,
    /// `mcs / (fit + predict)`.
    pub speedup: f64,
    /// `mcs / (training set + fit + predict)`.
    pub speedup_with_training_set: f64,
    pub oracle_calls: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub timings: Timings,
}

pub fn gp_summaries(outputs: &OutputLayout, gp: &GpSamples) -> Result<Vec<NamedSummary>> {
    outputs
        .names
        .iter()
        .zip(gp.summaries()?)
        .map(|(name, summary)| {
            Ok(NamedSummary {
                name: name.clone(),
                summary,
            })
        })
        .collect()
}

fn scenario_case(cfg: &ExperimentConfig) -> Result<(NetworkCase, UncertaintySpec, ScenarioInfo)> {
    let base = load_case(&cfg.case_path).with_context(|| format!("loading case {}", cfg.case_path))?;
    base.validate().context("validating case")?;
    let scenario = RenewableScenario {
        buses: cfg.renewable_buses.clone(),
        penetration: cfg.penetration_target.unwrap_or(0.0),
    };
    let case = add_renewables(&base, &scenario)?;
    let spec = uncertainty_box(&case, cfg.load_fraction, cfg.renewable_fraction)?;
    let caps: Vec<f64> = case
        .generators
        .iter()
        .filter(|g| g.is_renewable)
        .map(|g| g.pmax)
        .collect();
    let load = base.total_load_mw();
    let info = ScenarioInfo {
        n_bus: case.buses.len(),
        n_gen: case.generators.len(),
        renewable_buses: cfg.renewable_buses.clone(),
        penetration_pct: caps.iter().sum::<f64>() / load * 100.0,
        renewable_capacity_mw: caps,
        base_load_mw: load,
        input_dim: spec.dim(),
        n_outputs: OutputLayout::for_case(&case).len(),
    };
    Ok((case, spec, info))
}

fn sensitivity(
    case: &NetworkCase,
    outputs: &OutputLayout,
    models: &[GpModel],
    mcs: &McsSamples,
) -> Result<Option<InverseRelation>> {
    let mut records: Vec<SensitivityRecord> = Vec::new();
    for (k, j) in outputs.pg().enumerate() {
        if case.generators[k].is_renewable {
            continue;
        }
        records.push(record(&outputs.names[j], &models[j], &mcs.converged_values(j))?);
    }
    if records.len() < 3 {
        log::warn!(
            "only {} conventional generators; skipping the sensitivity report",
            records.len()
        );
        return Ok(None);
    }
    Ok(Some(inverse_relation_report(&records)?))
}

/// Run the configured experiment and write its artifacts into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let art = Artifacts::open(out)?;
    let result = run_inner(cfg, &art);
    match &result {
        Ok(_) => art.complete()?,
        Err(e) => art.fail(&format!("{e:#}")),
    }
    result
}

fn run_inner(cfg: &ExperimentConfig, art: &Artifacts) -> Result<RunOutcome> {
    let calls0 = oracle_calls();
    let (case, spec, info) = scenario_case(cfg)?;
    art.stage("training set")?;
    let t = Instant::now();
    let ts = build_training_set(
        &case,
        &spec,
        cfg.n_train,
        &cfg.train_distribution,
        &cfg.oracle,
        &mut stream_rng(cfg.seed, Stream::Training),
    )?;
    let training_set_s = t.elapsed().as_secs_f64();

    art.stage("fit")?;
    let t = Instant::now();
    let models = train_surrogates(&ts, &cfg.gp.fit_options(cfg.seed))?;
    let fit_s = t.elapsed().as_secs_f64();
    let digest = model_digest(&models);

    art.stage("propagate")?;
    let inputs = draw(
        &cfg.test_distribution,
        &spec,
        cfg.n_test,
        &mut stream_rng(cfg.seed, Stream::Test),
    )?;
    let t = Instant::now();
    let gp = propagate(&models, &inputs)?;
    let predict_s = t.elapsed().as_secs_f64();

    art.stage("monte carlo")?;
    let t = Instant::now();
    let mcs = mcs_reference(&case, &spec, &inputs, &cfg.oracle)?;
    let mcs_s = t.elapsed().as_secs_f64();

    art.stage("compare")?;
    let (popf, errors) = compare(&ts.outputs, &gp, &mcs, cfg.histogram_bins)?;
    let sens = sensitivity(&case, &ts.outputs, &models, &mcs)?;

    let mut embedded = cfg.clone();
    embedded.output_dir = None;
    let report = ExperimentReport {
        schema: REPORT_SCHEMA.into(),
        version: REPORT_VERSION,
        build: BUILD_ID.into(),
        config: embedded,
        scenario: info,
        training_samples: ts.x.len(),
        training_rejected: ts.rejected,
        model_digest: digest.clone(),
        models: ts
            .outputs
            .names
            .iter()
            .zip(&models)
            .map(|(name, m)| ModelInfo {
                name: name.clone(),
                l: m.hp.l,
                sigma_f: m.hp.sigma_f,
                sigma_n: m.hp.sigma_n,
                lml: m.lml,
                jitter: m.jitter,
                constant: m.constant,
            })
            .collect(),
        gp_summaries: gp_summaries(&ts.outputs, &gp)?,
        popf,
        sensitivity: sens,
    };
    let gp_s = fit_s + predict_s;
    let timings = Timings {
        training_set_s,
        fit_s,
        predict_s,
        mcs_s,
        speedup: mcs_s / gp_s,
        speedup_with_training_set: mcs_s / (gp_s + training_set_s),
        oracle_calls: oracle_calls() - calls0,
    };

    art.stage("artifacts")?;
    write_artifacts(
        art, cfg, &spec, &ts, &models, &inputs, &gp, &mcs, &errors, &report, &timings,
    )?;
    Ok(RunOutcome { report, timings })
}

#[allow(clippy::too_many_arguments)]
fn write_artifacts(
    art: &Artifacts,
    cfg: &ExperimentConfig,
    spec: &UncertaintySpec,
    ts: &TrainingSet,
    models: &[GpModel],
    inputs: &[Vec<f64>],
    gp: &GpSamples,
    mcs: &McsSamples,
    errors: &SampleErrors,
    report: &ExperimentReport,
    timings: &Timings,
) -> Result<()> {
    let input_names = artifacts::input_names(spec);
    let names = &ts.outputs.names;
    art.json("report.json", report)?;
    art.json("timings.json", timings)?;
    art.rows("training_inputs.csv", &input_names, ts.x.iter().cloned())?;
    art.rows("training_outputs.csv", names, ts.y.iter().cloned())?;
    art.rows("test_inputs.csv", &input_names, inputs.iter().cloned())?;
    let by_sample = |cols: &[Vec<f64>], s: usize| cols.iter().map(|c| c[s]).collect::<Vec<f64>>();
    let n = inputs.len();
    art.rows("gp_mean.csv", names, (0..n).map(|s| by_sample(&gp.mean, s)))?;
    art.rows("gp_variance.csv", names, (0..n).map(|s| by_sample(&gp.variance, s)))?;
    art.rows("mcs_outputs.csv", names, (0..n).map(|s| by_sample(&mcs.values, s)))?;
    art.l1_errors("l1_errors.csv", errors)?;
    art.text("hist_l1_pg.csv", &report.popf.l1_pg.histogram.to_csv())?;
    art.text("hist_l1_vm.csv", &report.popf.l1_vm.histogram.to_csv())?;
    if let Some(s) = &report.sensitivity {
        art.text("sensitivity.csv", &s.to_csv())?;
    }
    let manifest = ModelManifest {
        schema: MANIFEST_SCHEMA.into(),
        version: MANIFEST_VERSION,
        build: BUILD_ID.into(),
        experiment: cfg.name.clone(),
        seed: cfg.seed,
        n_test: cfg.n_test,
        test_distribution: cfg.test_distribution.clone(),
        spec: spec.clone(),
        outputs: ts.outputs.clone(),
        files: names
            .iter()
            .enumerate()
            .map(|(j, n)| models::model_file_name(j, n))
            .collect(),
        digest: report.model_digest.clone(),
    };
    models::save(&art.path("models"), &manifest, models)
}
