//! The five commands: `build`, `decompose`, `topics`, `synth`, `eval`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use concmtf_core::als::fit;
use concmtf_core::baselines::{parafac_ns_fit, tucker3_ns_fit};
use concmtf_core::corpus::{bucket_post_number, build_corpus, week_index, PostRecord};
use concmtf_core::synth::{evaluate_run, generate_planted, PlantedConfig, PlantedInstance, RunMetrics};
use concmtf_core::topics::{build_report, TopicReport};
use concmtf_core::{ConstraintConfig, CooTensor, FactorModel, FitConfig, FitTrace, Matrix, ModelKind, Ranks, Tensor3};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{EvalRun, Method, RunConfig};
use crate::ingest::parse_posts;
use crate::io;

/// How a command finished; errors are reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// Results were written but the fit stopped at its iteration cap.
    MaxIters,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::MaxIters => 2,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn cmd_build(input: &Path, out: &Path, cfg: &RunConfig) -> Result<Outcome> {
    cfg.corpus.buckets.validate()?;
    let ingested = parse_posts(&io::read_text(input)?).with_context(|| format!("parsing {}", input.display()))?;
    for m in &ingested.malformed {
        eprintln!("warning: {} line {}: skipped malformed record: {}", input.display(), m.line, m.message);
    }
    if ingested.posts.is_empty() {
        eprintln!("warning: {} holds no posts; writing empty outputs", input.display());
    }
    let corpus = build_corpus(&ingested.posts, &cfg.corpus)?;
    create_dir(out)?;
    io::write_text(&out.join("tensor.tsv"), &io::format_coo(&corpus.tensor))?;
    io::write_text(&out.join("side.tsv"), &io::format_matrix(&corpus.side))?;
    io::write_text(&out.join("vocab.tsv"), &io::format_vocab(&corpus.vocab))?;
    io::write_text(&out.join("tags.tsv"), &io::format_tags(&corpus.tags))?;
    io::write_text(&out.join("posts.tsv"), &format_post_index(&ingested.posts, &corpus.post_numbers, cfg, corpus.epoch_start)?)?;
    let (i, j, k) = corpus.tensor.dims();
    let manifest = json!({
        "input": input.display().to_string(),
        "posts": ingested.posts.len(),
        "malformed_lines": ingested.malformed.iter().map(|m| m.line).collect::<Vec<_>>(),
        "dims": [i, j, k],
        "tags": corpus.side.cols(),
        "nnz": corpus.tensor.nnz(),
        "total": corpus.tensor.total(),
        "epoch_start": corpus.epoch_start,
        "corpus": cfg.corpus,
    });
    io::write_text(&out.join("manifest.json"), &to_json(&manifest))?;
    eprintln!("tensor {i} x {j} x {k}, {} nonzeros, {} tags", corpus.tensor.nnz(), corpus.side.cols());
    Ok(Outcome::Done)
}

fn format_post_index(posts: &[PostRecord], numbers: &[u64], cfg: &RunConfig, epoch: i64) -> Result<String> {
    let mut out = String::from("post\tuser\ttimestamp\tpost_number\tweek\tbucket\n");
    for (n, (p, &num)) in posts.iter().zip(numbers).enumerate() {
        let week = week_index(p.timestamp, epoch)?;
        let bucket = bucket_post_number(num, &cfg.corpus.buckets);
        writeln!(out, "{n}\t{}\t{}\t{num}\t{week}\t{bucket}", p.user_id, p.timestamp).unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub method: Method,
    pub kind: ModelKind,
    pub ranks: Ranks,
    pub constraints: ConstraintConfig,
    pub fit: FitConfig,
    pub seed: u64,
    pub tensor: Option<String>,
    pub side: Option<String>,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub max_violation: f64,
    pub degenerate_columns: usize,
    pub zero_columns: usize,
}

/// Runs `method` and returns the model, trace and the constraint set that
/// was actually applied.
pub fn run_method(
    method: Method,
    t: &Tensor3,
    y: &Matrix,
    kind: ModelKind,
    ranks: Ranks,
    constraints: &ConstraintConfig,
    fcfg: &FitConfig,
) -> Result<(FactorModel, FitTrace, ConstraintConfig)> {
    let (model, trace, applied) = match method {
        Method::Concmtf => {
            let (m, tr) = fit(t, y, ranks, kind, constraints, fcfg)?;
            (m, tr, *constraints)
        }
        Method::ParafacNs => {
            if !ranks.is_cubic() {
                bail!("parafac-ns needs equal ranks, got {ranks:?}");
            }
            let (m, tr) = parafac_ns_fit(t, ranks.0, fcfg)?;
            (m, tr, concmtf_core::baselines::parafac_ns_config())
        }
        Method::Tucker3Ns => {
            let l1 = constraints.core.l1_eps;
            let (m, tr) = tucker3_ns_fit(t, ranks, l1, fcfg)?;
            (m, tr, concmtf_core::baselines::tucker3_ns_config(l1))
        }
    };
    Ok((model, trace, applied))
}

fn format_trace(trace: &FitTrace, timing: bool) -> String {
    let mut out = String::from("iteration\tobjective\tmax_violation\tmillis\n");
    for (n, obj) in trace.objectives.iter().enumerate() {
        let viol = if n == 0 { 0.0 } else { trace.violations.get(n - 1).map_or(0.0, |v| v.max()) };
        let ms = if timing && n > 0 { trace.millis.get(n - 1).copied().unwrap_or(0) } else { 0 };
        writeln!(out, "{n}\t{obj}\t{viol}\t{ms}").unwrap();
    }
    out
}

pub struct DecomposeArgs<'a> {
    pub tensor: &'a Path,
    pub side: Option<&'a Path>,
    pub out: &'a Path,
    /// Write measured sweep times instead of zeros.
    pub timing: bool,
}

pub fn cmd_decompose(args: &DecomposeArgs, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let t = io::parse_dense_tensor(&io::read_text(args.tensor)?).with_context(|| format!("parsing {}", args.tensor.display()))?;
    let y = match args.side {
        Some(p) => io::read_matrix(p)?,
        None => Matrix::zeros(t.dims().0, 0),
    };
    if y.rows() != t.dims().0 {
        bail!("side matrix has {} rows but the tensor's first mode has {}", y.rows(), t.dims().0);
    }
    let method = cfg.model.method;
    let kind = method.kind(cfg.model.kind);
    let fcfg = FitConfig { record_trace: true, ..cfg.fit };
    let (model, trace, applied) = run_method(method, &t, &y, kind, cfg.model.ranks, &cfg.constraints, &fcfg)?;

    io::write_model(args.out, &model)?;
    io::write_text(&args.out.join("trace.tsv"), &format_trace(&trace, args.timing))?;
    let manifest = ModelManifest {
        method,
        kind,
        ranks: cfg.model.ranks,
        constraints: applied,
        fit: fcfg,
        seed: fcfg.seed,
        tensor: Some(args.tensor.display().to_string()),
        side: args.side.map(|p| p.display().to_string()),
        iterations: trace.iterations,
        converged: trace.converged,
        final_objective: trace.final_objective(),
        max_violation: trace.max_violation(),
        degenerate_columns: trace.degenerate.len(),
        zero_columns: trace.zero_columns.len(),
    };
    io::write_text(&args.out.join("manifest.json"), &to_json(&manifest))?;
    eprintln!(
        "{}: {} iterations, objective {:.6e}, max violation {:.2e}{}",
        method.name(),
        trace.iterations,
        trace.final_objective(),
        trace.max_violation(),
        if trace.converged { "" } else { " (iteration cap reached)" }
    );
    Ok(if trace.converged { Outcome::Done } else { Outcome::MaxIters })
}

fn manifest_kind(dir: &Path) -> Result<ModelKind> {
    let path = dir.join("manifest.json");
    let v: serde_json::Value =
        serde_json::from_str(&io::read_text(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    let kind = v.get("kind").cloned().with_context(|| format!("{} has no `kind`", path.display()))?;
    Ok(serde_json::from_value(kind)?)
}

fn read_names(path: Option<&Path>, len: usize, prefix: &str) -> Result<Vec<String>> {
    match path {
        None => Ok((0..len).map(|i| format!("{prefix}{i}")).collect()),
        Some(p) => {
            let names = io::parse_names(&io::read_text(p)?).with_context(|| format!("parsing {}", p.display()))?;
            if names.len() != len {
                bail!("{} lists {} entries, model expects {len}", p.display(), names.len());
            }
            Ok(names)
        }
    }
}

pub struct TopicsArgs<'a> {
    pub model: &'a Path,
    pub vocab: Option<&'a Path>,
    pub tags: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn cmd_topics(args: &TopicsArgs, cfg: &RunConfig) -> Result<Outcome> {
    let model = io::read_model(args.model, manifest_kind(args.model)?)?;
    let words = read_names(args.vocab, model.a.rows(), "w")?;
    let tags = read_names(args.tags, model.d.rows(), "tag")?;
    let report = build_report(&model, words.len(), cfg.topics.density_tol)?;
    create_dir(args.out)?;
    io::write_text(&args.out.join("report.json"), &to_json(&report_json(&report, &words, &tags)))?;
    for c in &report.components {
        let r = c.index;
        let mut w = String::from("word\tindex\tweight\n");
        for &(i, v) in &c.word_support {
            writeln!(w, "{}\t{i}\t{v}", words[i]).unwrap();
        }
        io::write_text(&args.out.join(format!("component_{r}_words.tsv")), &w)?;
        io::write_text(&args.out.join(format!("component_{r}_time.tsv")), &profile_tsv("week", &c.time_profile, None))?;
        io::write_text(&args.out.join(format!("component_{r}_difficulty.tsv")), &profile_tsv("bucket", &c.difficulty_profile, None))?;
        io::write_text(&args.out.join(format!("component_{r}_tags.tsv")), &profile_tsv("tag", &c.tag_loadings, Some(&tags)))?;
    }
    eprintln!(
        "{} components, mean overlap {:.4}, core density {:.4}",
        report.components.len(),
        report.mean_pairwise_overlap(),
        report.core_density
    );
    Ok(Outcome::Done)
}

fn profile_tsv(axis: &str, values: &[f64], labels: Option<&[String]>) -> String {
    let mut out = format!("{axis}\tvalue\n");
    for (n, v) in values.iter().enumerate() {
        match labels {
            Some(l) => writeln!(out, "{}\t{v}", l[n]).unwrap(),
            None => writeln!(out, "{n}\t{v}").unwrap(),
        }
    }
    out
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect()).collect()
}

#[derive(Serialize)]
struct WordWeight<'a> {
    word: &'a str,
    index: usize,
    weight: f64,
}

#[derive(Serialize)]
struct TagWeight<'a> {
    tag: &'a str,
    weight: f64,
}

#[derive(Serialize)]
struct ComponentJson<'a> {
    index: usize,
    threshold: f64,
    words: Vec<WordWeight<'a>>,
    time_profile: &'a [f64],
    difficulty_profile: &'a [f64],
    tag_loadings: Vec<TagWeight<'a>>,
}

#[derive(Serialize)]
struct MetricsJson {
    mean_pairwise_overlap: f64,
    core_density: f64,
    density_tol: f64,
    cosine_overlap: Vec<Vec<f64>>,
    support_jaccard: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    components: Vec<ComponentJson<'a>>,
    metrics: MetricsJson,
}

fn report_json<'a>(report: &'a TopicReport, words: &'a [String], tags: &'a [String]) -> ReportJson<'a> {
    let components = report
        .components
        .iter()
        .map(|c| ComponentJson {
            index: c.index,
            threshold: c.threshold,
            words: c.word_support.iter().map(|&(i, weight)| WordWeight { word: &words[i], index: i, weight }).collect(),
            time_profile: &c.time_profile,
            difficulty_profile: &c.difficulty_profile,
            tag_loadings: tags.iter().zip(&c.tag_loadings).map(|(t, &weight)| TagWeight { tag: t, weight }).collect(),
        })
        .collect();
    ReportJson {
        components,
        metrics: MetricsJson {
            mean_pairwise_overlap: report.mean_pairwise_overlap(),
            core_density: report.core_density,
            density_tol: report.density_tol,
            cosine_overlap: matrix_rows(&report.cosine_overlap),
            support_jaccard: matrix_rows(&report.support_jaccard),
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: PlantedConfig,
    pub kind: ModelKind,
    pub signal_norm: f64,
}

fn write_instance(dir: &Path, inst: &PlantedInstance) -> Result<()> {
    create_dir(dir)?;
    io::write_text(&dir.join("tensor.tsv"), &io::format_coo(&CooTensor::from_dense(&inst.tensor)?))?;
    io::write_text(&dir.join("side.tsv"), &io::format_matrix(&inst.side))?;
    let truth = dir.join("truth");
    io::write_model(&truth, &inst.truth)?;
    let manifest = SynthManifest { config: inst.config.clone(), kind: inst.truth.kind, signal_norm: inst.signal().frobenius_norm() };
    io::write_text(&truth.join("manifest.json"), &to_json(&json!({"kind": inst.truth.kind})))?;
    io::write_text(&dir.join("manifest.json"), &to_json(&manifest))
}

pub fn cmd_synth(out: &Path, cfg: &RunConfig) -> Result<Outcome> {
    let inst = generate_planted(&cfg.synth)?;
    write_instance(out, &inst)?;
    let (i, j, k) = inst.tensor.dims();
    eprintln!("planted {:?} instance {i} x {j} x {k}, ranks {:?}", inst.truth.kind, inst.truth.ranks());
    Ok(Outcome::Done)
}

fn read_instance(dir: &Path) -> Result<PlantedInstance> {
    if !dir.is_dir() {
        bail!("instance directory {} does not exist", dir.display());
    }
    let path = dir.join("manifest.json");
    let manifest: SynthManifest =
        serde_json::from_str(&io::read_text(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    let tensor = io::read_dense_tensor(&dir.join("tensor.tsv"))?;
    let side = io::read_matrix(&dir.join("side.tsv"))?;
    let truth = io::read_model(&dir.join("truth"), manifest.kind)?;
    Ok(PlantedInstance { tensor, side, truth, config: manifest.config })
}

/// One row of the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub name: String,
    pub seed: Option<u64>,
    pub metrics: RunMetrics,
}

fn worker_count(jobs: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("CONCMTF_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    cap.unwrap_or(available).min(available.max(1)).min(jobs).max(1)
}

/// Runs `jobs` on up to `CONCMTF_THREADS` workers, keeping input order.
fn parallel_map<T: Send>(n: usize, job: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..worker_count(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = job(i);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}

fn metrics_for(inst: &PlantedInstance, model: &FactorModel, trace: &FitTrace, tol: Option<f64>) -> Result<RunMetrics> {
    let report = build_report(model, model.a.rows(), tol)?;
    let mut m = evaluate_run(inst, model, trace, &report);
    m.wall_millis = 0;
    Ok(m)
}

fn sweep_job(cfg: &RunConfig, run: &EvalRun, seed: u64) -> Result<EvalRecord> {
    let inst = generate_planted(&PlantedConfig { seed, ..cfg.synth.clone() })?;
    let constraints = run.constraints.unwrap_or(cfg.constraints);
    let base = run.fit.unwrap_or(cfg.fit);
    let fcfg = FitConfig { seed: base.seed.wrapping_add(seed), ..base };
    let kind = run.method.kind(cfg.model.kind);
    let (model, trace, _) = run_method(run.method, &inst.tensor, &inst.side, kind, cfg.model.ranks, &constraints, &fcfg)
        .with_context(|| format!("run {:?}, seed {seed}", run.name))?;
    Ok(EvalRecord { name: run.name.clone(), seed: Some(seed), metrics: metrics_for(&inst, &model, &trace, cfg.topics.density_tol)? })
}

pub struct EvalArgs<'a> {
    /// Planted instance written by `synth`; required with `models`.
    pub instance: Option<&'a Path>,
    /// Fitted model directories to score against `instance`.
    pub models: &'a [PathBuf],
    pub out: &'a Path,
}

pub fn cmd_eval(args: &EvalArgs, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let records = if args.models.is_empty() {
        let runs = cfg.eval_runs();
        let seeds = &cfg.eval.seeds;
        if seeds.is_empty() {
            bail!("eval needs at least one seed");
        }
        let jobs: Vec<(&EvalRun, u64)> = seeds.iter().flat_map(|&s| runs.iter().map(move |r| (r, s))).collect();
        parallel_map(jobs.len(), |i| sweep_job(cfg, jobs[i].0, jobs[i].1))?
    } else {
        let dir = args.instance.context("--instance is required when scoring model directories")?;
        let inst = read_instance(dir)?;
        let mut records = Vec::new();
        for m in args.models {
            if !m.is_dir() {
                bail!("model directory {} does not exist", m.display());
            }
            let path = m.join("manifest.json");
            let manifest: ModelManifest =
                serde_json::from_str(&io::read_text(&path)?).with_context(|| format!("parsing {}", path.display()))?;
            let model = io::read_model(m, manifest.kind)?;
            let trace = FitTrace { iterations: manifest.iterations, converged: manifest.converged, ..FitTrace::default() };
            let name = m.file_name().map_or_else(|| m.display().to_string(), |n| n.to_string_lossy().into_owned());
            records.push(EvalRecord { name, seed: None, metrics: metrics_for(&inst, &model, &trace, cfg.topics.density_tol)? });
        }
        records
    };
    create_dir(args.out)?;
    io::write_text(&args.out.join("metrics.json"), &to_json(&records))?;
    io::write_text(&args.out.join("comparison.tsv"), &comparison_table(&records))?;
    let summary = summary_table(&records);
    io::write_text(&args.out.join("summary.tsv"), &summary)?;
    print!("{summary}");
    Ok(Outcome::Done)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn comparison_table(records: &[EvalRecord]) -> String {
    let mut out = String::from("name\tseed\tmatch_score\trelative_error\tmean_word_overlap\tcore_density\titerations\n");
    for r in records {
        let m = &r.metrics;
        let seed = r.seed.map_or_else(|| "NA".to_string(), |s| s.to_string());
        writeln!(
            out,
            "{}\t{seed}\t{}\t{}\t{}\t{}\t{}",
            r.name,
            opt(m.match_score),
            m.relative_error,
            m.mean_word_overlap,
            m.core_density,
            m.iterations
        )
        .unwrap();
    }
    out
}

/// Per-method means in first-appearance order.
fn summary_table(records: &[EvalRecord]) -> String {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.name.as_str()) {
            names.push(&r.name);
        }
    }
    let mut out = String::from("name\truns\tmean_match_score\tmean_relative_error\tmean_word_overlap\tmean_core_density\n");
    for name in names {
        let rs: Vec<&RunMetrics> = records.iter().filter(|r| r.name == name).map(|r| &r.metrics).collect();
        let n = rs.len() as f64;
        let mean = |f: &dyn Fn(&RunMetrics) -> f64| rs.iter().map(|m| f(m)).sum::<f64>() / n;
        let matches: Option<Vec<f64>> = rs.iter().map(|m| m.match_score).collect();
        let mm = matches.map(|v| v.iter().sum::<f64>() / n);
        writeln!(
            out,
            "{name}\t{}\t{}\t{}\t{}\t{}",
            rs.len(),
            opt(mm),
            mean(&|m| m.relative_error),
            mean(&|m| m.mean_word_overlap),
            mean(&|m| m.core_density)
        )
        .unwrap();
    }
    out
}
