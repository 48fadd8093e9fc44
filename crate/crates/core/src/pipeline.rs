//! Dataset generation, split assignment and directory-level evaluation.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{
    channel_stats, encode_sample, read_sample, sample_file_name, topo1, DatasetError,
    DatasetManifest, FailedSample, ManifestEntry, SampleMeta, SampleRecord, SimpSummary,
    MANIFEST_FILE, MANIFEST_VERSION, SAMPLE_EXTENSION,
};
use crate::fem::{initial_fields, FemError};
use crate::metrics::{evaluate_batch, EvalOptions, GroundTruth, MetricsError, MetricsReport};
use crate::model::{catalog_hash, enumerate_bc_scenarios, DesignDomain, ModelError, ProblemSpec};
use crate::sampler::{plan_splits, sample_problem, sample_rng, SamplerError, SplitLabel};
use crate::simp::{optimize, SimpConfig, SimpError};
use crate::GENERATOR_VERSION;

/// Name of the per-sample structured log written next to the manifest.
pub const RUN_LOG_FILE: &str = "run_log.jsonl";

/// Largest tolerated share of failed samples in one run.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} already holds a dataset; choose an empty directory")]
    OutputNotEmpty(PathBuf),
    #[error("{failed} of {total} samples failed (limit {limit:.0}%)", limit = MAX_FAILURE_RATE * 100.0)]
    FailureRate { failed: usize, total: usize },
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors of a single sample; recorded in the manifest instead of aborting.
#[derive(Debug, Error)]
enum SampleError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Simp(#[from] SimpError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub out_dir: PathBuf,
    pub count: usize,
    pub seed: u64,
    pub domain: DesignDomain,
    pub simp: SimpConfig,
    /// Worker threads; `None` lets the pool pick.
    pub threads: Option<usize>,
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.count == 0 {
            return Err(PipelineError::InvalidConfig("sample count must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(PipelineError::InvalidConfig("thread count must be positive".into()));
        }
        self.domain.validate()?;
        self.simp
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }
}

/// One line of the run log.
#[derive(Debug, Serialize)]
struct RunLogLine<'a> {
    sample_id: u64,
    status: &'a str,
    iterations: Option<usize>,
    converged: Option<bool>,
    compliance: Option<f64>,
    wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn build_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, PipelineError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| PipelineError::InvalidConfig(format!("thread pool: {e}")))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(path.to_path_buf(), e)
}

/// Solves one sampled problem and encodes it. Depends only on the seed, the
/// sample id and the settings.
pub fn generate_sample(
    sample_id: u64,
    seed: u64,
    domain: &DesignDomain,
    simp: &SimpConfig,
) -> Result<SampleRecord, DatasetError> {
    build_sample(sample_id, seed, domain, simp).map_err(|e| match e {
        SampleError::Dataset(d) => d,
        other => DatasetError::InvalidRecord(other.to_string()),
    })
}

fn build_sample(
    sample_id: u64,
    seed: u64,
    domain: &DesignDomain,
    simp: &SimpConfig,
) -> Result<SampleRecord, SampleError> {
    let catalog = enumerate_bc_scenarios();
    let mut rng = sample_rng(seed, sample_id);
    let spec = sample_problem(&mut rng, &catalog, domain)?;
    let fields = initial_fields(&spec, domain)?;
    let (density, trace) = optimize(&spec, domain, simp)?;
    let meta = SampleMeta {
        sample_id,
        spec: spec.clone(),
        split: None,
        seed,
        stream: sample_id,
        generator: GENERATOR_VERSION.into(),
        simp: Some(SimpSummary {
            iterations: trace.iterations,
            converged: trace.converged,
            initial_compliance: trace.initial_compliance,
            final_compliance: trace.final_compliance,
        }),
    };
    Ok(encode_sample(&spec, &fields, &density, domain, meta)?)
}

fn holds_dataset(dir: &Path) -> Result<bool, PipelineError> {
    if !dir.exists() {
        return Ok(false);
    }
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let name = entry.map_err(io_err(dir))?.file_name();
        let name = name.to_string_lossy();
        if name == MANIFEST_FILE || name.ends_with(&format!(".{SAMPLE_EXTENSION}")) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Generates `count` samples with ids `0..count` into an empty directory.
/// Sample files are written as they complete; the manifest is written last.
/// Output bytes do not depend on the worker count.
pub fn generate_dataset(config: &GenerateConfig) -> Result<DatasetManifest, PipelineError> {
    config.validate()?;
    let dir = &config.out_dir;
    if holds_dataset(dir)? {
        return Err(PipelineError::OutputNotEmpty(dir.clone()));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let log_path = dir.join(RUN_LOG_FILE);
    let log = Mutex::new(BufWriter::new(File::create(&log_path).map_err(io_err(&log_path))?));
    let pool = build_pool(config.threads)?;
    info!(
        "generating {} samples into {} on {} threads",
        config.count,
        dir.display(),
        pool.current_num_threads()
    );

    let outcomes: Vec<Result<ManifestEntry, FailedSample>> = pool.install(|| {
        (0..config.count as u64)
            .into_par_iter()
            .map(|id| {
                let start = Instant::now();
                let file = sample_file_name(id);
                let result = build_sample(id, config.seed, &config.domain, &config.simp)
                    .and_then(|rec| {
                        topo1::write_sample(&rec, &dir.join(&file))?;
                        Ok(rec)
                    });
                let wall_time_s = start.elapsed().as_secs_f64();
                let line = match &result {
                    Ok(rec) => {
                        let s = rec.meta.simp.expect("generated samples carry a summary");
                        RunLogLine {
                            sample_id: id,
                            status: "ok",
                            iterations: Some(s.iterations),
                            converged: Some(s.converged),
                            compliance: Some(s.final_compliance),
                            wall_time_s,
                            error: None,
                        }
                    }
                    Err(e) => {
                        warn!("sample {id} failed: {e}");
                        RunLogLine {
                            sample_id: id,
                            status: "failed",
                            iterations: None,
                            converged: None,
                            compliance: None,
                            wall_time_s,
                            error: Some(e.to_string()),
                        }
                    }
                };
                {
                    let mut w = log.lock().expect("log writer poisoned");
                    // a lost log line must not fail the sample
                    let _ = serde_json::to_writer(&mut *w, &line)
                        .map_err(std::io::Error::from)
                        .and_then(|_| writeln!(w))
                        .and_then(|_| w.flush());
                }
                info!("sample {id} done in {wall_time_s:.2}s");
                match result {
                    Ok(rec) => Ok(ManifestEntry {
                        sample_id: id,
                        file,
                        split: None,
                        scenario_id: rec.meta.spec.scenario.id,
                        vf_target: rec.meta.spec.vf_target,
                    }),
                    Err(e) => Err(FailedSample {
                        sample_id: id,
                        error: e.to_string(),
                    }),
                }
            })
            .collect()
    });
    log.into_inner()
        .expect("log writer poisoned")
        .flush()
        .map_err(io_err(&log_path))?;

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(e) => samples.push(e),
            Err(f) => failures.push(f),
        }
    }
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        generator: GENERATOR_VERSION.into(),
        domain: config.domain,
        simp: config.simp,
        catalog_hash: catalog_hash(&enumerate_bc_scenarios()),
        global_seed: config.seed,
        sample_count: samples.len(),
        samples,
        failures,
        split_plan: None,
        normalization: None,
    };
    manifest.save(dir)?;
    let failed = manifest.failures.len();
    if failed as f64 > MAX_FAILURE_RATE * config.count as f64 {
        return Err(PipelineError::FailureRate {
            failed,
            total: config.count,
        });
    }
    Ok(manifest)
}

/// Labels every sample of a dataset from its global seed and stores the
/// labels, the plan and train-split channel statistics in the manifest. Sample
/// files are left untouched. Running it twice gives the same manifest.
pub fn apply_split(dir: &Path) -> Result<DatasetManifest, PipelineError> {
    let mut manifest = DatasetManifest::load(dir)?;
    let pairs: Vec<(u64, usize)> = manifest
        .samples
        .iter()
        .map(|e| (e.sample_id, e.scenario_id))
        .collect();
    let (plan, labels) = plan_splits(&pairs, manifest.global_seed)?;
    for e in &mut manifest.samples {
        e.split = Some(labels[&e.sample_id]);
    }
    let mut train = Vec::new();
    for e in manifest.samples.iter().filter(|e| e.split == Some(SplitLabel::Train)) {
        train.push(read_sample(&dir.join(&e.file))?);
    }
    manifest.normalization = Some(channel_stats(&train));
    manifest.split_plan = Some(plan);
    manifest.save(dir)?;
    Ok(manifest)
}

/// Reads every TOPO1 file of a directory, keyed by sample id.
pub fn read_records(dir: &Path) -> Result<BTreeMap<u64, SampleRecord>, PipelineError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|x| x == SAMPLE_EXTENSION) {
            paths.push(path);
        }
    }
    paths.sort();
    let mut out = BTreeMap::new();
    for path in paths {
        let rec = read_sample(&path)?;
        let id = rec.meta.sample_id;
        if out.insert(id, rec).is_some() {
            return Err(MetricsError::IdMismatch(format!(
                "sample id {id} appears twice in {}",
                dir.display()
            ))
            .into());
        }
    }
    Ok(out)
}

/// Scores a directory of predictions against a generated dataset. A
/// prediction is any TOPO1 file whose target holds the predicted density; its
/// channels are ignored. With a split, only that split's samples are scored
/// and predictions for other samples are skipped. `penal` defaults to the
/// dataset's generation penalty.
pub fn evaluate_dirs(
    pred_dir: &Path,
    truth_dir: &Path,
    split: Option<SplitLabel>,
    penal: Option<f64>,
    mut options: EvalOptions,
) -> Result<MetricsReport, PipelineError> {
    let manifest = DatasetManifest::load(truth_dir)?;
    options.penal = penal.unwrap_or(manifest.simp.penal);
    let entries: Vec<&ManifestEntry> = match split {
        None => manifest.samples.iter().collect(),
        Some(s) => {
            if manifest.split_plan.is_none() {
                return Err(PipelineError::InvalidConfig(format!(
                    "{} has no split labels; run the split step first",
                    truth_dir.display()
                )));
            }
            manifest.samples.iter().filter(|e| e.split == Some(s)).collect()
        }
    };
    let mut truth = Vec::with_capacity(entries.len());
    for e in &entries {
        let rec = read_sample(&truth_dir.join(&e.file))?;
        truth.push(GroundTruth {
            sample_id: e.sample_id,
            spec: rec.meta.spec.clone(),
            density: rec.target_density()?,
        });
    }
    let mut predictions = BTreeMap::new();
    for (id, rec) in read_records(pred_dir)? {
        if split.is_some() && manifest.entry(id).is_some_and(|e| e.split != split) {
            continue;
        }
        predictions.insert(id, rec.target_density()?);
    }
    Ok(evaluate_batch(&predictions, &truth, &manifest.domain, split, options)?)
}

/// Classic cantilever on the given grid: left edge clamped, unit load at the
/// top-right corner pointing up. This is the vertical mirror of the textbook
/// downward tip load, since load directions span `0..=pi`.
pub fn cantilever_preset(vf_target: f64, domain: &DesignDomain) -> Result<ProblemSpec, ModelError> {
    let scenario = enumerate_bc_scenarios().swap_remove(0);
    ProblemSpec::new(vf_target, scenario, domain.node_index(domain.nelx, 0), 3, domain)
}
