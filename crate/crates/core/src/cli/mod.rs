mod config;

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use log::{error, info};
use serde::{Deserialize, Serialize};

use factlink::decoder::scorers::{AdversarialScorer, OracleScorer, OverlapScorer};
use factlink::decoder::{DecodeConfig, DecodeMode, SequenceScorer, SroTries};
use factlink::eval::{self, EvalError, EvalReport, GoldExample, MetricOptions};
use factlink::kg::{self, KgError, LabelConfig};
use factlink::pipeline::{Pipeline, Retriever, Stage};
use factlink::predictions::{read_predictions, write_predictions, PredictionFileError};
use factlink::rerank::{LexicalScorer, Reranker};
use factlink::retrieval::{
    AnnParams, Embedder, EmbeddingIndex, HashEmbedder, LabelMode, LabelStrategy, RetrievalError,
    SearchMode,
};
use factlink::trie::{TokenTrie, TrieError};
use factlink::KnowledgeGraph;

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(
    name = "factlink",
    version,
    about = "Link sentences to knowledge-graph facts"
)]
pub struct Cli {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Raise log verbosity (repeatable). RUST_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the embedding index and label tries from KG files.
    Build(BuildArgs),
    /// Link gold-file sentences to facts and write predictions.
    Link(LinkArgs),
    /// Same as `link` with a re-ranker (default `ind`).
    Rerank(LinkArgs),
    /// Score predictions against gold facts.
    Eval(EvalArgs),
    /// Label-language and corpus statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct KgArgs {
    /// Directory holding entities.jsonl, relations.jsonl and facts.jsonl.
    #[arg(long, value_name = "DIR")]
    kg_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    entities: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    relations: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    facts: Option<PathBuf>,
    /// Languages whose labels are written object first.
    #[arg(long, value_delimiter = ',', value_name = "LANG")]
    rtl: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Output directory for the artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Retrieval label strategy, e.g. El, Tl, ETl-Sum, All-Max.
    #[arg(long)]
    strategy: Option<String>,
    /// Embedding dimension of the hash embedder.
    #[arg(long)]
    dim: Option<usize>,
    /// Character n-gram size of the hash embedder.
    #[arg(long)]
    ngram: Option<usize>,
}

#[derive(Debug, Args)]
struct LinkArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Directory written by `build`.
    #[arg(long, value_name = "DIR")]
    artifacts: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    gold: Option<PathBuf>,
    /// Predictions output; stdout when omitted.
    #[arg(long, short, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Retrieved facts per sentence.
    #[arg(short, long)]
    k: Option<usize>,
    /// Beam width.
    #[arg(short, long)]
    beam: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Decode over the whole vocabulary instead of the label trie.
    #[arg(long)]
    no_constraints: bool,
    /// Decode subject, relation and object separately.
    #[arg(long)]
    sro_independent: bool,
    /// Skip retrieval; the decoder sees the sentence only.
    #[arg(long)]
    no_de: bool,
    /// Output the retrieved facts without generation or re-ranking.
    #[arg(long)]
    retrieve_only: bool,
    /// Re-rank retrieved facts instead of generating: ind or jnt.
    #[arg(long)]
    reranker: Option<String>,
    /// Add the NULL fact to the re-ranker candidates.
    #[arg(long)]
    with_null: bool,
    /// overlap, oracle or adversarial for generation; lexical for re-ranking.
    #[arg(long)]
    scorer: Option<String>,
    /// Fact-label languages shown to the generator or re-ranker.
    #[arg(long)]
    label_mode: Option<String>,
    /// Must match the strategy the index was built with.
    #[arg(long)]
    strategy: Option<String>,
    /// exact or approximate.
    #[arg(long)]
    search: Option<String>,
    /// Inverted lists for approximate search.
    #[arg(long)]
    lists: Option<usize>,
    /// Lists probed per query in approximate search.
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long)]
    length_penalty: Option<f64>,
    /// Worker threads.
    #[arg(long, env = "FACTLINK_JOBS")]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[arg(long, value_name = "FILE")]
    gold: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    predictions: Option<PathBuf>,
    /// Second predictions file; prints both runs with deltas.
    #[arg(long, value_name = "FILE")]
    compare: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Count an empty prediction list as predicting NULL.
    #[arg(long)]
    empty_as_null: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[arg(long, value_name = "FILE")]
    gold: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or missing inputs.
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

impl From<KgError> for CliError {
    fn from(e: KgError) -> Self {
        match e {
            KgError::Missing { .. } => usage(e),
            _ => runtime(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Missing { .. } => usage(e),
            _ => runtime(e),
        }
    }
}

impl From<PredictionFileError> for CliError {
    fn from(e: PredictionFileError) -> Self {
        match e {
            PredictionFileError::Missing(_) => usage(e),
            _ => runtime(e),
        }
    }
}

impl From<TrieError> for CliError {
    fn from(e: TrieError) -> Self {
        match e {
            TrieError::Io { ref source, .. } if source.kind() == io::ErrorKind::NotFound => {
                usage(e)
            }
            _ => runtime(e),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Io { ref source, .. } if source.kind() == io::ErrorKind::NotFound => {
                usage(e)
            }
            RetrievalError::DimensionMismatch { .. }
            | RetrievalError::StaleIndex { .. }
            | RetrievalError::InvalidK
            | RetrievalError::UnknownStrategy(_) => usage(e),
            _ => runtime(e),
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(usage)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Build(a) => cmd_build(&a, &file),
        Command::Link(a) => cmd_link(&a, &file, None),
        Command::Rerank(a) => cmd_link(&a, &file, Some(Reranker::Ind)),
        Command::Eval(a) => cmd_eval(&a, &file),
        Command::Stats(a) => cmd_stats(&a, &file),
    }
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn verbosity(cli: &Cli) -> u8 {
    cli.verbose
}

struct KgPaths {
    entities: PathBuf,
    relations: PathBuf,
    facts: PathBuf,
}

fn kg_file(
    flag: &Option<PathBuf>,
    file: &Option<PathBuf>,
    dir: Option<&Path>,
    name: &str,
) -> Option<PathBuf> {
    flag.clone()
        .or_else(|| file.clone())
        .or_else(|| dir.map(|d| d.join(format!("{name}.jsonl"))))
}

impl KgArgs {
    fn dir<'a>(&'a self, file: &'a FileConfig) -> Option<&'a Path> {
        self.kg_dir.as_deref().or(file.kg.dir.as_deref())
    }

    fn facts_path(&self, file: &FileConfig) -> Option<PathBuf> {
        kg_file(&self.facts, &file.kg.facts, self.dir(file), "facts")
    }

    fn paths(&self, file: &FileConfig) -> Option<KgPaths> {
        let dir = self.dir(file);
        Some(KgPaths {
            entities: kg_file(&self.entities, &file.kg.entities, dir, "entities")?,
            relations: kg_file(&self.relations, &file.kg.relations, dir, "relations")?,
            facts: kg_file(&self.facts, &file.kg.facts, dir, "facts")?,
        })
    }

    fn label_config(&self, file: &FileConfig) -> LabelConfig {
        match self.rtl.clone().or_else(|| file.kg.rtl_languages.clone()) {
            Some(langs) => LabelConfig {
                rtl_languages: langs.into_iter().map(|l| l.to_ascii_lowercase()).collect(),
            },
            None => LabelConfig::default(),
        }
    }

    fn load(&self, file: &FileConfig) -> Result<KnowledgeGraph> {
        let paths = self
            .paths(file)
            .ok_or_else(|| usage("no KG given; pass --kg-dir or --entities/--relations/--facts"))?;
        let graph = kg::load_kg(
            &paths.entities,
            &paths.relations,
            &paths.facts,
            self.label_config(file),
        )?;
        info!(
            "loaded KG: {} facts, {} entities, {} relations",
            graph.fact_count(),
            graph.entities().len(),
            graph.relations().len()
        );
        Ok(graph)
    }
}

const MANIFEST: &str = "manifest.json";
const INDEX_FILE: &str = "index.fidx";
const FACT_TRIE: &str = "facts.ftri";
const ENTITY_TRIE: &str = "entities.ftri";
const RELATION_TRIE: &str = "relations.ftri";
const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct EmbedderSpec {
    kind: String,
    dim: usize,
    ngram: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    strategy: String,
    embedder: EmbedderSpec,
    facts: usize,
    index_entries: usize,
    fact_trie_nodes: usize,
    entity_trie_nodes: usize,
    relation_trie_nodes: usize,
}

fn parse_strategy(s: &str) -> Result<LabelStrategy> {
    s.parse().map_err(usage)
}

fn cmd_build(a: &BuildArgs, file: &FileConfig) -> Result<()> {
    let out = a
        .out
        .clone()
        .or_else(|| file.artifacts.dir.clone())
        .ok_or_else(|| usage("no output directory; pass --out"))?;
    let strategy = parse_strategy(
        a.strategy
            .as_deref()
            .or(file.artifacts.strategy.as_deref())
            .unwrap_or("El"),
    )?;
    let dim = a
        .dim
        .or(file.artifacts.dim)
        .unwrap_or(HashEmbedder::DEFAULT_DIM);
    let ngram = a
        .ngram
        .or(file.artifacts.ngram)
        .unwrap_or(HashEmbedder::DEFAULT_NGRAM);
    if dim == 0 || ngram == 0 {
        return Err(usage("--dim and --ngram must be at least 1"));
    }
    let graph = a.kg.load(file)?;
    let embedder = HashEmbedder::with_ngram(dim, ngram);

    let index = EmbeddingIndex::build(&graph, &embedder, strategy)?;
    let facts = TokenTrie::for_facts(&graph)?;
    let sro = SroTries::from_kg(&graph)?;

    fs::create_dir_all(&out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    index.save(&out.join(INDEX_FILE))?;
    facts.save(&out.join(FACT_TRIE))?;
    sro.entities.save(&out.join(ENTITY_TRIE))?;
    sro.relations.save(&out.join(RELATION_TRIE))?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        strategy: strategy.to_string(),
        embedder: EmbedderSpec {
            kind: "hash".into(),
            dim,
            ngram,
        },
        facts: graph.fact_count(),
        index_entries: index.entry_count(),
        fact_trie_nodes: facts.node_count(),
        entity_trie_nodes: sro.entities.node_count(),
        relation_trie_nodes: sro.relations.node_count(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out.join(MANIFEST), json + "\n")
        .map_err(|e| runtime(format!("{}: {e}", out.display())))?;

    println!("facts: {}", manifest.facts);
    println!(
        "index entries: {} (strategy {}, dim {})",
        manifest.index_entries, manifest.strategy, dim
    );
    println!("fact trie nodes: {}", manifest.fact_trie_nodes);
    println!(
        "entity/relation trie nodes: {}/{}",
        manifest.entity_trie_nodes, manifest.relation_trie_nodes
    );
    Ok(())
}

fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => {
            usage(format!("artifact manifest not found: {}", path.display()))
        }
        _ => runtime(format!("{}: {e}", path.display())),
    })?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if m.format != MANIFEST_FORMAT {
        return Err(usage(format!(
            "{}: unsupported artifact format {}; rebuild with `factlink build`",
            path.display(),
            m.format
        )));
    }
    if m.embedder.kind != "hash" {
        return Err(usage(format!(
            "unknown embedder kind {:?}",
            m.embedder.kind
        )));
    }
    Ok(m)
}

fn parse_label_mode(s: &str) -> Result<LabelMode> {
    match s.to_ascii_lowercase().as_str() {
        "el" => Ok(LabelMode::El),
        "tl" => Ok(LabelMode::Tl),
        "etl" | "etl-concat" => Ok(LabelMode::ETl),
        "all" | "all-concat" => Ok(LabelMode::All),
        _ => Err(usage(format!(
            "unknown label mode {s:?}; expected El, Tl, ETl or All"
        ))),
    }
}

fn parse_search(s: &str) -> Result<SearchMode> {
    match s.to_ascii_lowercase().as_str() {
        "exact" => Ok(SearchMode::Exact),
        "approximate" | "ann" => Ok(SearchMode::Approximate),
        _ => Err(usage(format!(
            "unknown search mode {s:?}; expected exact or approximate"
        ))),
    }
}

fn oracle_for(gold: &[GoldExample], graph: &KnowledgeGraph) -> OracleScorer {
    let mut oracle = OracleScorer::default();
    for ex in gold {
        for f in &ex.gold_facts {
            oracle.add_fact(&ex.text, graph, f);
        }
    }
    oracle
}

fn cmd_link(a: &LinkArgs, file: &FileConfig, default_reranker: Option<Reranker>) -> Result<()> {
    let artifacts = a
        .artifacts
        .clone()
        .or_else(|| file.artifacts.dir.clone())
        .ok_or_else(|| usage("no artifact directory; pass --artifacts"))?;
    let gold_path = a
        .gold
        .clone()
        .or_else(|| file.link.gold.clone())
        .ok_or_else(|| usage("no gold file; pass --gold"))?;
    let out_path = a.out.clone().or_else(|| file.link.out.clone());
    let k = a.k.or(file.link.k).unwrap_or(5);
    let beam = a.beam.or(file.decode.beam).unwrap_or(5);
    let max_len = a.max_len.or(file.decode.max_len).unwrap_or(64);
    if k == 0 || beam == 0 || max_len == 0 {
        return Err(usage("k, beam and max length must be at least 1"));
    }
    let no_de = a.no_de || file.link.no_de.unwrap_or(false);
    let retrieve_only = a.retrieve_only || file.link.retrieve_only.unwrap_or(false);
    let reranker = match a.reranker.as_deref().or(file.rerank.reranker.as_deref()) {
        Some(r) => Some(r.parse::<Reranker>().map_err(usage)?),
        None => default_reranker,
    };
    let with_null = a.with_null || file.rerank.with_null.unwrap_or(false);
    let mode = if a.no_constraints && a.sro_independent {
        return Err(usage(
            "--no-constraints and --sro-independent are exclusive",
        ));
    } else if a.no_constraints {
        DecodeMode::Unconstrained
    } else if a.sro_independent {
        DecodeMode::SroIndependent
    } else {
        match &file.decode.mode {
            Some(m) => m.parse().map_err(usage)?,
            None => DecodeMode::Constrained,
        }
    };
    if retrieve_only && (no_de || reranker.is_some()) {
        return Err(usage("--retrieve-only excludes --no-de and re-ranking"));
    }
    if reranker.is_some() && mode != DecodeMode::Constrained {
        return Err(usage("decoding flags do not apply to re-ranking"));
    }
    let label_mode = parse_label_mode(
        a.label_mode
            .as_deref()
            .or(file.link.label_mode.as_deref())
            .unwrap_or("El"),
    )?;
    let search = parse_search(
        a.search
            .as_deref()
            .or(file.link.search.as_deref())
            .unwrap_or("exact"),
    )?;
    let jobs = a.jobs.or(file.link.jobs).unwrap_or(0);
    let length_penalty = a
        .length_penalty
        .or(file.decode.length_penalty)
        .unwrap_or(0.0);

    let manifest = load_manifest(&artifacts)?;
    if let Some(s) = a.strategy.as_deref() {
        let wanted = parse_strategy(s)?;
        if wanted.to_string() != manifest.strategy {
            return Err(usage(format!(
                "index was built with strategy {}, not {wanted}; rebuild or drop --strategy",
                manifest.strategy
            )));
        }
    }
    let graph = a.kg.load(file)?;
    if graph.fact_count() != manifest.facts {
        return Err(usage(format!(
            "artifacts cover {} facts but the KG has {}; rebuild",
            manifest.facts,
            graph.fact_count()
        )));
    }
    let gold = eval::load_gold(&gold_path)?;
    info!("loaded {} gold sentences", gold.len());

    let embedder = HashEmbedder::with_ngram(manifest.embedder.dim, manifest.embedder.ngram);
    let mut index = EmbeddingIndex::load(&artifacts.join(INDEX_FILE))?;
    if index.embedder_identity() != embedder.identity() {
        return Err(usage("index does not match the manifest embedder; rebuild"));
    }
    if search == SearchMode::Approximate && !no_de {
        index.build_ann(&AnnParams {
            lists: a.lists.or(file.link.lists),
            probes: a.probes.or(file.link.probes),
            ..AnnParams::default()
        });
    }

    let decode = DecodeConfig {
        beam_width: beam,
        max_len,
        mode,
        context_size: k,
        length_penalty,
    };
    let scorer_name = a.scorer.as_deref().or(if reranker.is_some() {
        file.rerank.scorer.as_deref()
    } else {
        file.decode.scorer.as_deref()
    });

    let fact_trie;
    let sro;
    let gen_scorer: Box<dyn SequenceScorer>;
    let stage = if retrieve_only {
        Stage::RetrieveOnly
    } else if let Some(reranker) = reranker {
        match scorer_name.unwrap_or("lexical") {
            "lexical" => {}
            other => {
                return Err(usage(format!(
                    "unknown re-ranking scorer {other:?}; expected lexical"
                )))
            }
        }
        Stage::Rerank {
            reranker,
            scorer: &LexicalScorer,
            with_null,
        }
    } else {
        gen_scorer = match scorer_name.unwrap_or("overlap") {
            "overlap" => Box::new(OverlapScorer),
            "oracle" => Box::new(oracle_for(&gold, &graph)),
            "adversarial" => Box::new(AdversarialScorer),
            other => {
                return Err(usage(format!(
                    "unknown scorer {other:?}; expected overlap, oracle or adversarial"
                )))
            }
        };
        fact_trie = TokenTrie::load(&artifacts.join(FACT_TRIE))?;
        sro = if mode == DecodeMode::SroIndependent {
            Some(SroTries {
                entities: TokenTrie::load(&artifacts.join(ENTITY_TRIE))?,
                relations: TokenTrie::load(&artifacts.join(RELATION_TRIE))?,
            })
        } else {
            None
        };
        Stage::Generate {
            trie: &fact_trie,
            sro: sro.as_ref(),
            scorer: gen_scorer.as_ref(),
            config: &decode,
        }
    };

    let pipeline = Pipeline {
        kg: &graph,
        retriever: (!no_de).then_some(Retriever {
            index: &index,
            embedder: &embedder,
            k,
            search,
        }),
        label_mode,
        stage,
    };
    let output = pipeline.link_all(&gold, jobs).map_err(usage)?;

    let write_result = match &out_path {
        Some(p) => File::create(p).and_then(|f| write_predictions(f, &output.records)),
        None => write_predictions(io::stdout().lock(), &output.records),
    };
    write_result.map_err(|e| runtime(format!("writing predictions: {e}")))?;

    let invalid: usize = output
        .records
        .iter()
        .map(|r| r.predictions.invalid_count())
        .sum();
    info!(
        "linked {} sentences, {} failed, {} invalid predictions",
        output.records.len(),
        output.failures.len(),
        invalid
    );
    for (id, e) in &output.failures {
        error!("sentence {id}: {e}");
    }
    if output.failures.is_empty() {
        Ok(())
    } else {
        Err(runtime(format!(
            "{} sentences failed to link",
            output.failures.len()
        )))
    }
}

fn evaluate_file(
    gold: &[GoldExample],
    path: &Path,
    relations: Option<&std::collections::HashMap<factlink::FactId, factlink::kg::RelationId>>,
    opts: MetricOptions,
) -> Result<EvalReport> {
    let predictions = read_predictions(path)?;
    let missing = eval::missing_predictions(gold, &predictions);
    if !missing.is_empty() {
        return Err(EvalError::MissingSentences(missing).into());
    }
    Ok(eval::evaluate(gold, &predictions, relations, opts)?)
}

fn cmd_eval(a: &EvalArgs, file: &FileConfig) -> Result<()> {
    let gold_path = a
        .gold
        .clone()
        .or_else(|| file.link.gold.clone())
        .ok_or_else(|| usage("no gold file; pass --gold"))?;
    let pred_path = a
        .predictions
        .clone()
        .or_else(|| file.eval.predictions.clone())
        .ok_or_else(|| usage("no predictions file; pass --predictions"))?;
    let opts = MetricOptions {
        empty_as_null: a.empty_as_null || file.eval.empty_as_null.unwrap_or(false),
    };
    let gold = eval::load_gold(&gold_path)?;
    let relations = match a.kg.facts_path(file) {
        Some(p) => Some(kg::load_fact_relations(&p)?),
        None => None,
    };
    let base = evaluate_file(&gold, &pred_path, relations.as_ref(), opts)?;
    let other = match &a.compare {
        Some(p) => Some(evaluate_file(&gold, p, relations.as_ref(), opts)?),
        None => None,
    };

    let mut stdout = io::stdout().lock();
    let text = match (&other, a.json) {
        (None, false) => base.to_table(),
        (None, true) => base.to_json() + "\n",
        (Some(o), false) => base.compare_table(o),
        (Some(o), true) => {
            serde_json::to_string_pretty(&serde_json::json!({ "base": base, "other": o }))
                .expect("reports serialize")
                + "\n"
        }
    };
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| runtime(format!("writing report: {e}")))
}

#[derive(Serialize)]
struct LabelCount {
    language: String,
    facts: usize,
}

#[derive(Serialize)]
struct StatsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    facts: Option<usize>,
    label_languages: Vec<LabelCount>,
    total_labels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<eval::CorpusStats>,
}

fn cmd_stats(a: &StatsArgs, file: &FileConfig) -> Result<()> {
    let graph = match a.kg.paths(file) {
        Some(_) => Some(a.kg.load(file)?),
        None => None,
    };
    let gold_path = a.gold.clone().or_else(|| file.link.gold.clone());
    if graph.is_none() && gold_path.is_none() {
        return Err(usage("nothing to report; pass --kg-dir and/or --gold"));
    }
    let mut label_languages: Vec<LabelCount> = graph
        .as_ref()
        .map(|g| {
            kg::label_language_stats(g)
                .into_iter()
                .map(|(language, facts)| LabelCount { language, facts })
                .collect()
        })
        .unwrap_or_default();
    label_languages.sort_by(|x, y| {
        y.facts
            .cmp(&x.facts)
            .then_with(|| kg::compare_languages(&x.language, &y.language))
    });
    let report = StatsReport {
        facts: graph.as_ref().map(|g| g.fact_count()),
        total_labels: label_languages.iter().map(|l| l.facts).sum(),
        label_languages,
        corpus: match gold_path {
            Some(p) => Some(eval::corpus_stats(&eval::load_gold(&p)?)),
            None => None,
        },
    };

    let text = if a.json {
        serde_json::to_string_pretty(&report).expect("stats serialize") + "\n"
    } else {
        let mut s = String::new();
        if let Some(n) = report.facts {
            s.push_str(&format!("facts: {n}\n"));
            s.push_str(&format!("{:<10} {:>10}\n", "language", "labels"));
            for l in &report.label_languages {
                s.push_str(&format!("{:<10} {:>10}\n", l.language, l.facts));
            }
            s.push_str(&format!("{:<10} {:>10}\n", "total", report.total_labels));
        }
        if let Some(c) = &report.corpus {
            if !s.is_empty() {
                s.push('\n');
            }
            s.push_str(&c.to_table());
        }
        s
    };
    io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|e| runtime(format!("writing report: {e}")))
}
