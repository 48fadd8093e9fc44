//! `topofield`: dataset generation, single-problem solving, field export,
//! split assignment and evaluation.
//!
//! Exit status is 0 on success, 1 on runtime failure and 2 on usage errors.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use config::{DomainOverrides, RunConfig, SimpOverrides};
use topofield::dataset::{
    encode_sample, to_pgm, topo1, write_pgm, FieldCombo, SampleMeta, SampleRecord, SimpSummary,
};
use topofield::fem::{assemble_and_solve, initial_fields, StaticProblem, StiffnessSystem};
use topofield::metrics::{ComplianceMode, EvalOptions, MetricsReport};
use topofield::model::{
    catalog_document, catalog_hash, enumerate_bc_scenarios, DensityField, DesignDomain,
    ProblemSpec,
};
use topofield::pipeline::{
    apply_split, cantilever_preset, evaluate_dirs, generate_dataset, GenerateConfig,
};
use topofield::sampler::SplitLabel;
use topofield::simp::optimize;
use topofield::GENERATOR_VERSION;

#[derive(Debug, Parser)]
#[command(name = "topofield", version, about = "Topology optimization dataset factory")]
struct Cli {
    /// TOML run configuration; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (-v debug, -vv trace)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset of optimized samples
    Generate(GenerateArgs),
    /// Optimize one problem and write its density and iteration trace
    Solve(SolveArgs),
    /// Compute the initial physical fields of one problem
    Fields(FieldsArgs),
    /// Assign train/val/test labels and normalization statistics
    Split(SplitArgs),
    /// Score predicted structures against a dataset
    Evaluate(EvaluateArgs),
    /// Print the boundary-condition scenario catalog
    Catalog(CatalogArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output directory; must not already hold a dataset
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of samples
    #[arg(long)]
    count: Option<usize>,
    /// Global seed (required here or in the config file)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    domain: DomainOverrides,
    #[command(flatten)]
    simp: SimpOverrides,
}

/// Problem selection shared by `solve` and `fields`. Without `--scenario` the
/// cantilever preset is used: left edge clamped, upward unit load at the
/// top-right corner.
#[derive(Debug, Args)]
struct ProblemArgs {
    /// Target volume fraction, one of 0.30, 0.32, ..., 0.50
    #[arg(long, default_value_t = 0.5)]
    vf: f64,
    /// Catalog scenario id
    #[arg(long, requires = "load_node")]
    scenario: Option<usize>,
    /// Boundary node index receiving the load
    #[arg(long)]
    load_node: Option<usize>,
    /// Load direction k, angle k*30 degrees from +x toward +y
    #[arg(long)]
    angle_step: Option<u8>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    domain: DomainOverrides,
    #[command(flatten)]
    simp: SimpOverrides,
}

#[derive(Debug, Args)]
struct FieldsArgs {
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    domain: DomainOverrides,
    /// Keep only the channels of this field combination (0-8)
    #[arg(long)]
    combo: Option<u8>,
    /// Also write one PGM image per channel
    #[arg(long)]
    pgm: bool,
    /// Also write the stiffness matrix triplets and the displacement vector
    #[arg(long)]
    dump_system: bool,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Directory of TOPO1 predictions (target slot holds the prediction)
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth dataset directory
    #[arg(long)]
    truth: PathBuf,
    /// Directory for metrics.csv, summary.json and sorted_series.csv
    #[arg(long)]
    out: PathBuf,
    /// Restrict to one split
    #[arg(long)]
    split: Option<SplitLabel>,
    /// Threshold predictions at 0.5 before the compliance analysis
    #[arg(long)]
    binarize: bool,
    /// Penalty for the compliance analysis (default: the dataset's)
    #[arg(long)]
    penal: Option<f64>,
    /// Histogram bin width for RE^VF and RE^C
    #[arg(long, default_value_t = 0.05)]
    bin_width: f64,
}

#[derive(Debug, Args)]
struct CatalogArgs {
    /// Write to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Invalid or missing arguments detected after parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_millis()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Generate(a) => cmd_generate(a, &file),
        Command::Solve(a) => cmd_solve(a, &file),
        Command::Fields(a) => cmd_fields(a, &file),
        Command::Split(a) => cmd_split(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Catalog(a) => cmd_catalog(a),
    }
}

fn out_dir(flag: Option<PathBuf>, file: &RunConfig) -> Result<PathBuf> {
    flag.or_else(|| file.out.clone())
        .ok_or_else(|| usage("an output directory is required (--out or `out` in the config)"))
}

fn cmd_generate(a: GenerateArgs, file: &RunConfig) -> Result<()> {
    let seed = a
        .seed
        .or(file.seed)
        .ok_or_else(|| usage("generate needs an explicit --seed (or `seed` in the config)"))?;
    let count = a
        .count
        .or(file.count)
        .ok_or_else(|| usage("generate needs --count (or `count` in the config)"))?;
    let config = GenerateConfig {
        out_dir: out_dir(a.out, file)?,
        count,
        seed,
        domain: file.domain.merged(a.domain).resolve(),
        simp: file.simp.merged(a.simp).resolve(),
        threads: a.threads.or(file.threads),
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let manifest = generate_dataset(&config)?;
    println!(
        "wrote {} samples ({} failed) to {}",
        manifest.sample_count,
        manifest.failures.len(),
        config.out_dir.display()
    );
    Ok(())
}

fn problem_spec(p: &ProblemArgs, domain: &DesignDomain) -> Result<ProblemSpec> {
    domain.validate().map_err(|e| usage(e.to_string()))?;
    let mut spec = match p.scenario {
        None => cantilever_preset(p.vf, domain).map_err(|e| usage(e.to_string()))?,
        Some(id) => {
            let scenario = enumerate_bc_scenarios()
                .into_iter()
                .nth(id)
                .ok_or_else(|| usage(format!("scenario {id} is not in the catalog (0-41)")))?;
            ProblemSpec {
                vf_target: p.vf,
                scenario,
                load_node: p.load_node.expect("clap enforces --load-node"),
                load_angle_step: 0,
                load_magnitude: 1.0,
            }
        }
    };
    if let Some(node) = p.load_node {
        spec.load_node = node;
    }
    if let Some(k) = p.angle_step {
        spec.load_angle_step = k;
    }
    spec.validate(domain).map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn single_meta(spec: &ProblemSpec, simp: Option<SimpSummary>) -> SampleMeta {
    SampleMeta {
        sample_id: 0,
        spec: spec.clone(),
        split: None,
        seed: 0,
        stream: 0,
        generator: GENERATOR_VERSION.into(),
        simp,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_solve(a: SolveArgs, file: &RunConfig) -> Result<()> {
    let out = out_dir(a.out, file)?;
    let domain = file.domain.merged(a.domain).resolve();
    let simp = file.simp.merged(a.simp).resolve();
    simp.validate().map_err(|e| usage(e.to_string()))?;
    let spec = problem_spec(&a.problem, &domain)?;
    create_dir(&out)?;

    let (density, trace) = optimize(&spec, &domain, &simp)?;
    let fields = initial_fields(&spec, &domain)?;
    let summary = SimpSummary {
        iterations: trace.iterations,
        converged: trace.converged,
        initial_compliance: trace.initial_compliance,
        final_compliance: trace.final_compliance,
    };
    let record = encode_sample(&spec, &fields, &density, &domain, single_meta(&spec, Some(summary)))?;
    topo1::write_sample(&record, &out.join("density.topo"))?;
    write_pgm(&record.target, &out.join("density.pgm"), Some((0.0, 1.0)), true)?;
    let trace_path = out.join("trace.csv");
    let mut w = BufWriter::new(File::create(&trace_path).with_context(|| trace_path.display().to_string())?);
    trace.write_csv(&mut w)?;
    w.flush()?;
    println!(
        "{} iterations (converged: {}), compliance {:.6e}, volume fraction {:.4}",
        trace.iterations,
        trace.converged,
        trace.final_compliance,
        density.volume_fraction()
    );
    println!("wrote density.topo, density.pgm and trace.csv to {}", out.display());
    Ok(())
}

fn cmd_fields(a: FieldsArgs, file: &RunConfig) -> Result<()> {
    let out = out_dir(a.out, file)?;
    let domain = file.domain.merged(a.domain).resolve();
    let spec = problem_spec(&a.problem, &domain)?;
    let combo = a
        .combo
        .or(file.combo)
        .map(FieldCombo::from_id)
        .transpose()
        .map_err(|e| usage(e.to_string()))?;
    create_dir(&out)?;

    // fields live on the solid domain, which is also stored as the target
    let solid = DensityField::uniform(&domain, 1.0)?;
    let fields = initial_fields(&spec, &domain)?;
    let mut record: SampleRecord = encode_sample(&spec, &fields, &solid, &domain, single_meta(&spec, None))?;
    if let Some(c) = combo {
        let keep = c.channels();
        record.channels.retain(|ch| keep.contains(&ch.name.as_str()));
        info!("kept {} channels of combo {}", record.channels.len(), c.label());
    }
    topo1::write_sample(&record, &out.join("fields.topo"))?;
    if a.pgm {
        for ch in &record.channels {
            let path = out.join(format!("{}.pgm", ch.name));
            fs::write(&path, to_pgm(&ch.values, None, false))
                .with_context(|| path.display().to_string())?;
        }
    }
    if a.dump_system {
        let problem = StaticProblem::from_spec(&spec, &domain);
        let system = StiffnessSystem::assemble(&solid, &problem, &domain, 1.0)?;
        let path = out.join("stiffness.txt");
        let mut w = BufWriter::new(File::create(&path).with_context(|| path.display().to_string())?);
        system.write_triplets(&mut w)?;
        w.flush()?;
        let u = assemble_and_solve(&solid, &problem, &domain, 1.0)?;
        let path = out.join("displacement.txt");
        let mut w = BufWriter::new(File::create(&path).with_context(|| path.display().to_string())?);
        for v in &u {
            writeln!(w, "{v:.17e}")?;
        }
        w.flush()?;
    }
    println!("wrote {} channels to {}", record.channels.len(), out.display());
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let m = apply_split(&a.data)?;
    let plan = m.split_plan.as_ref().expect("split step records a plan");
    println!("test scenarios: {:?}", plan.test_scenarios);
    for label in [SplitLabel::Train, SplitLabel::Val, SplitLabel::Test] {
        println!("{label}: {} samples", m.ids_with(label).len());
    }
    Ok(())
}

fn print_report(r: &MetricsReport) {
    let split = r.split.map_or("all".to_string(), |s| s.to_string());
    println!("split    {split}");
    println!("samples  {}", r.count);
    println!("MAE      {:.6e}", r.mae);
    println!("MSE      {:.6e}", r.mse);
    println!("RE^VF    {:.6e}", r.re_vf);
    println!("RE^C     {:.6e}", r.re_c);
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    if !(a.bin_width > 0.0 && a.bin_width.is_finite()) {
        return Err(usage("--bin-width must be positive"));
    }
    let options = EvalOptions {
        penal: 0.0,
        mode: if a.binarize {
            ComplianceMode::Binarized
        } else {
            ComplianceMode::Grayscale
        },
        bin_width: a.bin_width,
    };
    let report = evaluate_dirs(&a.pred, &a.truth, a.split, a.penal, options)?;
    print_report(&report);
    create_dir(&a.out)?;
    let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> Result<()> {
        let path = a.out.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| path.display().to_string())?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    };
    write("metrics.csv", &|w| report.write_csv(w))?;
    write("sorted_series.csv", &|w| report.write_sorted_series(w))?;
    write("summary.json", &|w| writeln!(w, "{}", report.summary_json()))?;
    println!("wrote metrics.csv, sorted_series.csv and summary.json to {}", a.out.display());
    Ok(())
}

fn cmd_catalog(a: CatalogArgs) -> Result<()> {
    let catalog = enumerate_bc_scenarios();
    let doc = catalog_document(&catalog);
    match a.out {
        Some(path) => {
            fs::write(&path, format!("{doc}\n")).with_context(|| path.display().to_string())?;
            println!("catalog hash {}", catalog_hash(&catalog));
        }
        None => println!("{doc}"),
    }
    Ok(())
}
