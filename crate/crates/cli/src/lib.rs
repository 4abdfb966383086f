//! `embrank` subcommands. Each `cmd_*` function works without the argument
//! parser, so tests can drive whole runs in-process.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use embrank_core::error::Error as CoreError;
use embrank_core::eval::{
    evaluate, paired_t_one_tailed, read_qrels, read_run, render_tsv, write_run, EvalReport, Metric,
    PairedT, ALPHA,
};
use embrank_core::features::{
    cross_validate, export_letor, parse_letor, score_with_ranker, standardize_per_query,
    train_linear, FeatureExtractor, FeatureMatrix, LinearRanker,
};
use embrank_core::fixtures;
use embrank_core::retrieval::{index_exists, retrieve};
use embrank_core::{
    analyze, read_records, CandidateList, EmbeddingTable, InvertedIndex, Judgments, LookupPolicy,
    Pipeline, PipelineSettings, Record, RunConfig, Runner, SemanticScorer,
};

pub const RUN_FILE: &str = "run.trec";
pub const META_FILE: &str = "run.meta";
pub const RESOLVED_FILE: &str = "config.resolved";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_TSV: &str = "metrics.tsv";
pub const METRICS_JSON: &str = "metrics.json";
pub const FEATURES_FILE: &str = "features.letor";

#[derive(Debug, Parser)]
#[command(
    name = "embrank",
    version,
    about = "Embedding-based answer re-ranking toolkit"
)]
pub struct Cli {
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// `key = value` run configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and persist the inverted index.
    Index {
        #[command(flatten)]
        config: ConfigArgs,
        /// Overwrite an existing index.
        #[arg(long)]
        force: bool,
    },
    /// Retrieve, re-rank and write a run (plus metrics when qrels are set).
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Extract learning-to-rank features for first-pass candidates.
    Features {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the linear ranker on a LETOR file.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a LETOR file with a trained ranker and write a run.
    Rerank {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        ranker: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "ltr")]
        tag: String,
    },
    /// Cross-validated held-out NDCG@20 of the linear ranker.
    Cv {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
    },
    /// Evaluate runs and mark significant differences.
    Eval {
        #[arg(long)]
        qrels: PathBuf,
        /// Run files, compared pairwise.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// One-tailed paired t-test of run A over run B.
    Significance {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value = "ndcg@20")]
        metric: String,
    },
    /// Write the bundled toy data, or a generated planted-semantics set.
    Fixtures {
        dir: PathBuf,
        /// Generate this many planted-semantics queries instead.
        #[arg(long)]
        planted: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

/// Bad invocation, as opposed to bad data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// 0 ok, 1 usage, 2 data, 3 internal invariant.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<CoreError>() {
        Some(e) if e.is_internal() => 3,
        Some(CoreError::Config(_)) => 1,
        _ => 2,
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn required<'a>(name: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| {
        usage(format!(
            "`{name}` is not set (config key or --set {name}=...)"
        ))
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut h = Sha256::new();
    std::io::copy(&mut f, &mut h).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(h.finalize()))
}

/// `role<TAB>sha256<TAB>path` lines for every existing file, inputs first.
pub fn write_manifest(dir: &Path, inputs: &[(&str, PathBuf)], outputs: &[&str]) -> Result<()> {
    let mut text = String::from("# role\tsha256\tpath\n");
    for (role, p) in inputs {
        let files: Vec<PathBuf> = if p.is_dir() {
            let mut v: Vec<PathBuf> = std::fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            v.sort();
            v
        } else {
            vec![p.clone()]
        };
        for f in files {
            writeln!(text, "input:{role}\t{}\t{}", sha256_file(&f)?, f.display())?;
        }
    }
    for name in outputs {
        let p = dir.join(name);
        if p.exists() {
            writeln!(text, "output\t{}\t{name}", sha256_file(&p)?)?;
        }
    }
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexStats {
    pub docs: usize,
    pub terms: usize,
    pub tokens: u64,
}

impl fmt::Display for IndexStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "docs={} terms={} tokens={}",
            self.docs, self.terms, self.tokens
        )
    }
}

pub fn cmd_index(cfg: &RunConfig, force: bool) -> Result<IndexStats> {
    let corpus = required("corpus", &cfg.corpus)?;
    let dir = required("index_dir", &cfg.index_dir)?;
    if index_exists(dir) && !force {
        return Err(usage(format!(
            "index already exists in {}; pass --force to overwrite",
            dir.display()
        )));
    }
    let records = read_records(corpus, &cfg.corpus_rule())?;
    info!(
        "indexing {} records from {}",
        records.len(),
        corpus.display()
    );
    let index = InvertedIndex::build(records, &cfg.analyzer()?)?;
    index.save(dir, force)?;
    Ok(IndexStats {
        docs: index.num_docs(),
        terms: index.vocabulary_size(),
        tokens: index.collection_length(),
    })
}

fn load_index(cfg: &RunConfig) -> Result<InvertedIndex> {
    let dir = required("index_dir", &cfg.index_dir)?;
    if !index_exists(dir) {
        return Err(CoreError::Config(format!(
            "no index in {}; run `embrank index` first",
            dir.display()
        ))
        .into());
    }
    let index = InvertedIndex::load(dir)?;
    if index.analyzer() != &cfg.analyzer()? {
        log::warn!(
            "analyzer settings differ from the ones the index was built with; using the index's"
        );
    }
    Ok(index)
}

fn load_table(cfg: &RunConfig) -> Result<EmbeddingTable> {
    let path = cfg.embeddings.as_deref().ok_or_else(|| {
        usage("this pipeline needs embeddings; set `embeddings` (and `embeddings_format`)")
    })?;
    let table = EmbeddingTable::load(path, cfg.embeddings_format)?;
    info!(
        "loaded {} vectors of dim {} ({} zero, {} duplicate rows dropped)",
        table.len(),
        table.dim(),
        table.dropped_zero,
        table.dropped_duplicate
    );
    Ok(table)
}

fn load_queries(cfg: &RunConfig) -> Result<Vec<Record>> {
    let path = required("queries", &cfg.queries)?;
    Ok(read_records(path, &cfg.query_rule())?)
}

fn settings(cfg: &RunConfig) -> PipelineSettings {
    PipelineSettings {
        k: cfg.k,
        mu: cfg.mu,
        rm: cfg.rm,
        spans: cfg.spans,
        mmp: cfg.mmp,
        policy: LookupPolicy::default(),
    }
}

pub fn resolve_pipeline(cfg: &RunConfig) -> Result<Pipeline> {
    Ok(match &cfg.fusion {
        Some(channels) => Pipeline::fused(channels)?,
        None => Pipeline::named(&cfg.pipeline)?,
    })
}

fn input_files(cfg: &RunConfig) -> Vec<(&'static str, PathBuf)> {
    let mut v = Vec::new();
    for (role, p) in [
        ("index", &cfg.index_dir),
        ("queries", &cfg.queries),
        ("qrels", &cfg.qrels),
        ("embeddings", &cfg.embeddings),
    ] {
        if let Some(p) = p {
            v.push((role, p.clone()));
        }
    }
    v
}

#[derive(Debug)]
pub struct RunOutputs {
    pub dir: PathBuf,
    pub lists: Vec<CandidateList>,
    pub report: Option<EvalReport>,
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutputs> {
    let out = required("output_dir", &cfg.output_dir)?.to_path_buf();
    let pipeline = resolve_pipeline(cfg)?;
    let index = load_index(cfg)?;
    let table = if pipeline.needs_embeddings() {
        Some(load_table(cfg)?)
    } else {
        None
    };
    let queries = load_queries(cfg)?;
    let runner = Runner::new(&index, table.as_ref(), pipeline, settings(cfg))?;
    info!("running {} queries: {}", queries.len(), runner.describe());
    let lists = runner.run(&queries)?;

    create_dir(&out)?;
    std::fs::write(out.join(RESOLVED_FILE), cfg.resolved())?;
    write_run(&out.join(RUN_FILE), &lists, &cfg.run_tag)?;
    let mut meta = format!("{}\n", runner.describe());
    for l in &lists {
        for (k, v) in &l.metadata {
            writeln!(meta, "{}\t{k}\t{v}", l.query_id)?;
        }
    }
    std::fs::write(out.join(META_FILE), meta)?;

    let report = match &cfg.qrels {
        Some(q) => {
            let judgments = read_qrels(q)?;
            let rankings = lists
                .iter()
                .map(|l| (l.query_id.clone(), l.doc_ids().map(String::from).collect()))
                .collect();
            let ids: Vec<String> = queries.iter().map(|q| q.id.clone()).collect();
            let report = evaluate(
                &[(runner.pipeline.name.clone(), rankings)],
                &judgments,
                &ids,
            );
            std::fs::write(out.join(METRICS_TSV), render_tsv(&report))?;
            std::fs::write(out.join(METRICS_JSON), report.to_json())?;
            Some(report)
        }
        None => None,
    };
    write_manifest(
        &out,
        &input_files(cfg),
        &[
            RESOLVED_FILE,
            RUN_FILE,
            META_FILE,
            METRICS_TSV,
            METRICS_JSON,
        ],
    )?;
    Ok(RunOutputs {
        dir: out,
        lists,
        report,
    })
}

/// First-pass candidates for every query, with their feature rows.
pub fn extract_features(
    index: &InvertedIndex,
    table: Option<&EmbeddingTable>,
    queries: &[Record],
    judgments: &Judgments,
    cfg: &RunConfig,
) -> Result<FeatureMatrix> {
    let scorer = table.map(|t| SemanticScorer {
        table: t,
        policy: LookupPolicy::default(),
        spans: cfg.spans,
        mmp: cfg.mmp,
    });
    let extractor = FeatureExtractor {
        index,
        scorer,
        mu: cfg.mu,
        set: cfg.features,
    };
    let mut matrix = FeatureMatrix::new(cfg.features.raw_columns());
    for q in queries {
        let tokens = analyze(&q.text, index.analyzer());
        let list = retrieve(&q.id, &tokens, index, cfg.k, cfg.mu)?;
        for row in extractor.extract(&q.text, &list, judgments)? {
            matrix.push(row)?;
        }
    }
    matrix.sort_rows();
    Ok(if cfg.standardize {
        standardize_per_query(&matrix)
    } else {
        matrix
    })
}

pub fn cmd_features(cfg: &RunConfig) -> Result<(PathBuf, FeatureMatrix)> {
    let out = required("output_dir", &cfg.output_dir)?.to_path_buf();
    let index = load_index(cfg)?;
    let table = if cfg.features.needs_embeddings() {
        Some(load_table(cfg)?)
    } else {
        None
    };
    let queries = load_queries(cfg)?;
    let judgments = match &cfg.qrels {
        Some(q) => read_qrels(q)?,
        None => Judgments::default(),
    };
    let matrix = extract_features(&index, table.as_ref(), &queries, &judgments, cfg)?;
    create_dir(&out)?;
    std::fs::write(out.join(RESOLVED_FILE), cfg.resolved())?;
    let path = out.join(FEATURES_FILE);
    export_letor(&matrix, &path)?;
    let schema = format!("{FEATURES_FILE}.schema");
    write_manifest(
        &out,
        &input_files(cfg),
        &[RESOLVED_FILE, FEATURES_FILE, &schema],
    )?;
    Ok((path, matrix))
}

pub fn cmd_train(cfg: &RunConfig, features: &Path, out: &Path) -> Result<LinearRanker> {
    let matrix = parse_letor(features)?;
    let ranker = train_linear(&matrix, &cfg.train)?;
    ranker.save(out)?;
    Ok(ranker)
}

pub fn cmd_rerank(
    features: &Path,
    ranker: &Path,
    out: &Path,
    tag: &str,
) -> Result<Vec<CandidateList>> {
    let matrix = parse_letor(features)?;
    let ranker = LinearRanker::load(ranker)?;
    let lists = score_with_ranker(&ranker, &matrix)?;
    write_run(out, &lists, tag)?;
    Ok(lists)
}

pub fn cmd_cv(cfg: &RunConfig, features: &Path, qrels: &Path) -> Result<f64> {
    let matrix = parse_letor(features)?;
    let judgments = read_qrels(qrels)?;
    let per_query = cross_validate(&matrix, &judgments, cfg.folds, &cfg.train)?;
    Ok(per_query.values().sum::<f64>() / per_query.len().max(1) as f64)
}

fn system_name(path: &Path) -> String {
    path.display().to_string()
}

pub fn cmd_eval(qrels: &Path, runs: &[PathBuf]) -> Result<EvalReport> {
    let judgments = read_qrels(qrels)?;
    let mut systems = Vec::new();
    for r in runs {
        systems.push((system_name(r), read_run(r)?.rankings));
    }
    let ids: Vec<String> = judgments.by_query.keys().cloned().collect();
    Ok(evaluate(&systems, &judgments, &ids))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceReport {
    pub metric: Metric,
    pub query_ids: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub test: PairedT,
}

impl SignificanceReport {
    pub fn verdict(&self) -> &'static str {
        match self.test {
            PairedT::ZeroVariance { .. } => "undefined (zero-variance differences)",
            t if t.significant(ALPHA) => "A > B significant at alpha=0.05",
            _ => "not significant at alpha=0.05",
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!("query\tA\tB\t# {}\n", self.metric.name());
        for (i, q) in self.query_ids.iter().enumerate() {
            let _ = writeln!(s, "{q}\t{:.6}\t{:.6}", self.a[i], self.b[i]);
        }
        match self.test {
            PairedT::Defined { t, df, p } => {
                let _ = writeln!(s, "t={t:.6} df={df} p={p:.6}");
            }
            PairedT::ZeroVariance { mean_diff } => {
                let _ = writeln!(s, "t=undefined mean_diff={mean_diff:.6}");
            }
        }
        let _ = writeln!(s, "verdict: {}", self.verdict());
        s
    }
}

pub fn cmd_significance(
    run_a: &Path,
    run_b: &Path,
    qrels: &Path,
    metric: &str,
) -> Result<SignificanceReport> {
    let metric: Metric = metric.parse()?;
    let judgments = read_qrels(qrels)?;
    let a = read_run(run_a)?;
    let b = read_run(run_b)?;
    let qa: Vec<&String> = a.rankings.keys().collect();
    let qb: Vec<&String> = b.rankings.keys().collect();
    if qa != qb {
        let only_a: Vec<&&String> = qa
            .iter()
            .filter(|q| !b.rankings.contains_key(**q))
            .collect();
        let only_b: Vec<&&String> = qb
            .iter()
            .filter(|q| !a.rankings.contains_key(**q))
            .collect();
        return Err(CoreError::Misaligned(format!(
            "queries only in A: {only_a:?}; only in B: {only_b:?}"
        ))
        .into());
    }
    let ids: Vec<String> = qa.into_iter().cloned().collect();
    let values = |run: &embrank_core::eval::Run| -> Vec<f64> {
        ids.iter()
            .map(|q| metric.compute(&run.rankings[q], judgments.for_query(q)))
            .collect()
    };
    let (va, vb) = (values(&a), values(&b));
    let test = paired_t_one_tailed(&va, &vb)?;
    Ok(SignificanceReport {
        metric,
        query_ids: ids,
        a: va,
        b: vb,
        test,
    })
}

pub const SAMPLE_CONFIG: &str = "\
# embrank run configuration; paths are relative to the working directory
corpus = corpus.tsv
queries = queries.tsv
qrels = qrels.txt
embeddings = embeddings.txt
embeddings_format = word2vec_text
index_dir = index
output_dir = out
pipeline = lm+srwmd
";

pub fn cmd_fixtures(dir: &Path, planted: Option<usize>, seed: u64) -> Result<()> {
    match planted {
        None => fixtures::write_bundled(dir)?,
        Some(n) => {
            create_dir(dir)?;
            let p = fixtures::planted_semantics(n, seed);
            let tsv = |recs: &[Record]| {
                recs.iter()
                    .map(|r| format!("{}\t{}\n", r.id, r.text))
                    .collect::<String>()
            };
            std::fs::write(dir.join("corpus.tsv"), tsv(&p.corpus))?;
            std::fs::write(dir.join("queries.tsv"), tsv(&p.queries))?;
            let mut qrels = String::new();
            for (q, docs) in &p.judgments.by_query {
                for (d, r) in docs {
                    writeln!(qrels, "{q} 0 {d} {r}")?;
                }
            }
            std::fs::write(dir.join("qrels.txt"), qrels)?;
            p.table.write_word2vec_text(&dir.join("embeddings.txt"))?;
        }
    }
    std::fs::write(dir.join("run.conf"), SAMPLE_CONFIG)?;
    Ok(())
}

pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| UsageError(format!("cannot start {threads} threads: {e}")))?;
    pool.install(f)
}

/// Execute a parsed command, printing its report to stdout.
pub fn execute(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Index { config, force } => {
            let cfg = config.resolve()?;
            let stats = with_threads(threads, || cmd_index(&cfg, force))?;
            println!("{stats}");
        }
        Command::Run { config } => {
            let cfg = config.resolve()?;
            let out = with_threads(threads, || cmd_run(&cfg))?;
            match &out.report {
                Some(r) => print!("{}", render_tsv(r)),
                None => println!("wrote {}", out.dir.join(RUN_FILE).display()),
            }
        }
        Command::Features { config } => {
            let cfg = config.resolve()?;
            let (path, m) = with_threads(threads, || cmd_features(&cfg))?;
            println!(
                "wrote {} rows x {} columns to {}",
                m.len(),
                m.schema.len(),
                path.display()
            );
        }
        Command::Train {
            config,
            features,
            out,
        } => {
            let cfg = config.resolve()?;
            let r = with_threads(threads, || cmd_train(&cfg, &features, &out))?;
            println!(
                "train ndcg@20 = {:.4} after {} steps; wrote {}",
                r.train_ndcg20.unwrap_or(0.0),
                r.iterations,
                out.display()
            );
        }
        Command::Rerank {
            features,
            ranker,
            out,
            tag,
        } => {
            let lists = cmd_rerank(&features, &ranker, &out, &tag)?;
            println!("wrote {} queries to {}", lists.len(), out.display());
        }
        Command::Cv {
            config,
            features,
            qrels,
        } => {
            let cfg = config.resolve()?;
            let mean = with_threads(threads, || cmd_cv(&cfg, &features, &qrels))?;
            println!("held-out ndcg@20 = {mean:.4} ({} folds)", cfg.folds);
        }
        Command::Eval { qrels, runs, json } => {
            let report = cmd_eval(&qrels, &runs)?;
            print!("{}", render_tsv(&report));
            if let Some(j) = json {
                std::fs::write(&j, report.to_json())?;
            }
        }
        Command::Significance {
            run_a,
            run_b,
            qrels,
            metric,
        } => {
            let r = cmd_significance(&run_a, &run_b, &qrels, &metric)?;
            print!("{}", r.render());
        }
        Command::Fixtures { dir, planted, seed } => {
            cmd_fixtures(&dir, planted, seed)?;
            println!("wrote fixtures to {}", dir.display());
        }
    }
    Ok(())
}
