use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use evopatch::align::{align_corpus, load_anchor_csv, write_anchor_csv, AlignConfig};
use evopatch::config::Config;
use evopatch::corpus::{
    format_addr, normalize_identity, parse_addr, parse_elf, symbols_path, Arch, Corpus, FeatureExport,
    SymbolTable, Version,
};
use evopatch::eval::{run_task1, write_pair_csv, EvalOptions, Method, Summary};
use evopatch::index::{build_index as fit_index, stripped_shapes, Index};
use evopatch::patchproxy::{corpus_binaries, holdout_eval, write_fold_csv};
use evopatch::retrieve::{rank, EvoScorer, FunctionView, ScoreWeights};
use evopatch::synth::{generate_corpus, SynthConfig};
use evopatch::Error;

pub(crate) fn write_output(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json output");
    s.push('\n');
    s
}

fn load_corpus(root: &Path, config: &Config) -> Result<Corpus> {
    Ok(Corpus::load(root, &config.filter)?)
}

#[derive(Args)]
pub struct SynthArgs {
    /// Corpus directory to create
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    identities: usize,
    #[arg(long, default_value_t = 8)]
    versions: usize,
    /// Comma-separated architecture names
    #[arg(long, value_delimiter = ',')]
    arches: Option<Vec<Arch>>,
    #[arg(long)]
    drift_rate: Option<f64>,
    #[arg(long)]
    changed_magnitude: Option<f64>,
    #[arg(long)]
    layout_jitter: Option<f64>,
    /// Share of identities that drift at --hot-drift
    #[arg(long)]
    hot_fraction: Option<f64>,
    #[arg(long)]
    hot_drift: Option<f64>,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig {
        seed: a.seed,
        n_identities: a.identities,
        n_versions: a.versions,
        ..SynthConfig::default()
    };
    if let Some(arches) = a.arches {
        cfg.arches = arches;
    }
    cfg.drift_rate = a.drift_rate.unwrap_or(cfg.drift_rate);
    cfg.changed_magnitude = a.changed_magnitude.unwrap_or(cfg.changed_magnitude);
    cfg.layout_jitter = a.layout_jitter.unwrap_or(cfg.layout_jitter);
    cfg.hot_fraction = a.hot_fraction.unwrap_or(cfg.hot_fraction);
    cfg.hot_drift = a.hot_drift.unwrap_or(cfg.hot_drift);
    let out = generate_corpus(&cfg)?;
    out.write(&a.out, &cfg)?;
    println!(
        "synth: {} stripped and {} labeled binaries, {} ground-truth rows, {} hot identities -> {}",
        out.corpus.stripped.len(),
        out.corpus.labeled.len(),
        out.ground_truth.len(),
        out.hot.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Unstripped ELF files
    #[arg(required = true)]
    elf: Vec<PathBuf>,
    /// Release version of the binaries
    #[arg(long)]
    version: Version,
    /// Architecture; inferred from the ELF header when omitted
    #[arg(long)]
    arch: Option<Arch>,
    /// Corpus directory receiving symbols/<version>/<arch>.sym
    #[arg(long)]
    out: PathBuf,
}

pub fn extract_symbols(a: ExtractArgs, config: &Config) -> Result<()> {
    for path in &a.elf {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let summary = parse_elf(&bytes, &config.filter).with_context(|| format!("parsing {}", path.display()))?;
        let arch = match (&a.arch, summary.arch()) {
            (Some(arch), _) => arch.clone(),
            (None, Some(arch)) => arch,
            (None, None) => bail!(
                "{}: cannot infer architecture from e_machine {}; pass --arch",
                path.display(),
                summary.machine
            ),
        };
        let table = SymbolTable {
            version: a.version.clone(),
            arch: arch.clone(),
            file_size: summary.file_size,
            section_count: summary.section_count as u64,
            debug_section_count: summary.debug_section_count as u64,
            symbols: summary.symbols,
        };
        let dest = symbols_path(&a.out, &a.version, &arch);
        write_output(&dest, table.to_text())?;
        println!(
            "{}: {} function symbols ({} analysis) -> {}",
            path.display(),
            table.symbols.len(),
            table.symbols.iter().filter(|s| s.is_analysis).count(),
            dest.display()
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct IngestArgs {
    /// Feature exports (*.json), symbol tables (*.sym) or directories of them
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Corpus directory to write
    #[arg(long)]
    out: PathBuf,
}

pub fn ingest(a: IngestArgs, config: &Config) -> Result<()> {
    let mut corpus = Corpus::default();
    for input in &a.inputs {
        if input.is_dir() {
            let found = Corpus::scan(input, &config.filter)?;
            for export in found.stripped.into_values() {
                corpus.insert_stripped(export)?;
            }
            for table in found.labeled.into_values() {
                corpus.insert_labeled(table)?;
            }
        } else if input.extension().is_some_and(|e| e == "sym") {
            corpus.insert_labeled(SymbolTable::load(input, &config.filter)?)?;
        } else {
            corpus.insert_stripped(FeatureExport::load(input)?)?;
        }
    }
    if corpus.stripped.is_empty() && corpus.labeled.is_empty() {
        bail!("no feature exports or symbol tables among the inputs");
    }
    corpus.write(&a.out)?;
    println!(
        "ingest: {} feature exports, {} symbol tables -> {}",
        corpus.stripped.len(),
        corpus.labeled.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct AlignArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Anchor dump to write (CSV)
    #[arg(long)]
    out: PathBuf,
    /// Candidate window size
    #[arg(long)]
    window: Option<usize>,
    /// Acceptance threshold on the shape distance
    #[arg(long)]
    threshold: Option<f64>,
}

pub fn align(a: AlignArgs, config: &Config) -> Result<()> {
    let corpus = load_corpus(&a.corpus, config)?;
    let cfg = AlignConfig {
        window: a.window.unwrap_or(config.align.window),
        threshold: a.threshold.unwrap_or(config.align.threshold),
    };
    let result = align_corpus(&corpus, &cfg, &config.shape.alpha, config.shape.neighborhood)?;
    for b in &result.buckets {
        info!(
            "{}/{}: {} labeled, {} stripped, {} anchors, {} distance evaluations",
            b.version, b.arch, b.labeled, b.stripped, b.anchors, b.distance_evaluations
        );
    }
    for (v, arch) in &result.unpaired {
        log::warn!("{v}/{arch}: only one branch present, not aligned");
    }
    write_output(&a.out, write_anchor_csv(&result.anchors))?;
    println!(
        "align: {} anchors over {} buckets ({} unpaired) -> {}",
        result.anchors.len(),
        result.buckets.len(),
        result.unpaired.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct BuildIndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Anchor dump from `align`
    #[arg(long)]
    anchors: PathBuf,
    /// Statistics and prototypes use only versions strictly older than this
    #[arg(long)]
    cutoff: Version,
    /// Index directory to write
    #[arg(long)]
    out: PathBuf,
}

pub fn build_index(a: BuildIndexArgs, config: &Config) -> Result<()> {
    let corpus = load_corpus(&a.corpus, config)?;
    let anchors = load_anchor_csv(&a.anchors)?;
    let index = fit_index(&corpus, anchors, &a.cutoff, &config.index_settings())?;
    index.save(&a.out)?;
    let m = index.manifest();
    println!(
        "build-index: cutoff {}, {} training functions, {} fused vectors, {} prototypes -> {}",
        m.cutoff,
        m.counts.training_functions,
        m.counts.fused_vectors,
        m.counts.prototypes,
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// Feature export of the binary to search
    #[arg(long)]
    target: PathBuf,
    /// Feature export holding the query function
    #[arg(long)]
    reference: PathBuf,
    /// Address of the query function in the reference export
    #[arg(long)]
    address: Option<String>,
    /// Identity being hunted; locates the query through the index anchors
    /// when --address is omitted
    #[arg(long)]
    identity: Option<String>,
    /// Number of candidates to emit (0 for the whole pool)
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Evidence document path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn query(a: QueryArgs, config: &Config) -> Result<()> {
    let index = Index::load(&a.index)?;
    let target = FeatureExport::load(&a.target)?;
    let reference = FeatureExport::load(&a.reference)?;
    let nb = index.settings.neighborhood;
    let mut identity = a.identity.as_deref().map(normalize_identity).transpose()?;

    let address = match (&a.address, &identity) {
        (Some(s), _) => parse_addr(s).with_context(|| format!("bad address {s:?}; expected 0x-prefixed hex"))?,
        (None, Some(id)) => index
            .anchors
            .anchors()
            .iter()
            .find(|m| m.version == reference.version && m.arch == reference.arch && m.identity == *id)
            .map(|m| m.stripped_addr)
            .with_context(|| format!("no anchor for {id} in {}/{}", reference.version, reference.arch))?,
        (None, None) => {
            return Err(Error::InvalidConfig("query needs --address or --identity".into()).into());
        }
    };
    if identity.is_none() {
        identity = index.anchors.identity(&reference.version, &reference.arch, address).cloned();
    }

    let ref_shapes = stripped_shapes(&reference, nb)?;
    let q = ref_shapes
        .iter()
        .find(|s| s.record.address == address)
        .with_context(|| format!("no function of non-zero size at {address:#x} in {}", a.reference.display()))?;
    let qz = index.embedder.fuse(&reference.arch, q.record, &q.shape).into_vec();

    let shaped = stripped_shapes(&target, nb)?;
    let vectors: Vec<Vec<f32>> = shaped
        .par_iter()
        .map(|s| index.embedder.fuse(&target.arch, s.record, &s.shape).into_vec())
        .collect();
    let pool: Vec<FunctionView<'_>> = shaped
        .iter()
        .zip(&vectors)
        .map(|(s, z)| FunctionView {
            address: s.record.address,
            size: s.record.size,
            shape: &s.shape,
            embedding: z,
        })
        .collect();
    let view = FunctionView {
        address,
        size: q.record.size,
        shape: &q.shape,
        embedding: &qz,
    };
    let scorer = EvoScorer::new(
        view,
        &index.prototypes,
        identity.as_ref(),
        config.score,
        index.settings.shape_scale,
    );
    let ranked = rank(&pool, &scorer)?;
    let keep = if a.top == 0 { ranked.candidates.len() } else { a.top };
    let candidates: Vec<_> = ranked
        .candidates
        .iter()
        .take(keep)
        .map(|c| {
            json!({
                "rank": c.rank,
                "address": format_addr(c.address),
                "r_s": c.score.r_s,
                "r_f": c.score.r_f,
                "r_p": c.score.r_p,
                "total": c.score.total,
            })
        })
        .collect();
    let doc = json!({
        "query": {
            "version": reference.version,
            "arch": reference.arch,
            "address": format_addr(address),
            "identity": identity.as_ref().map(|i| i.as_str()),
            "prototype": scorer.prototype.is_some(),
        },
        "target": { "version": target.version, "arch": target.arch },
        "weights": config.score,
        "pool_size": ranked.pool_size,
        "candidates": candidates,
    });
    match &a.out {
        Some(path) => write_output(path, pretty_json(&doc)),
        None => {
            print!("{}", pretty_json(&doc));
            Ok(())
        }
    }
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    index: PathBuf,
    /// Output directory for pairs.csv and summary.json
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of evopatch, shapestat, sizestat
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated versions to evaluate (default: all at or after the cutoff)
    #[arg(long, value_delimiter = ',')]
    versions: Option<Vec<Version>>,
    #[arg(long)]
    lambda_s: Option<f64>,
    #[arg(long)]
    lambda_f: Option<f64>,
    #[arg(long)]
    lambda_p: Option<f64>,
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    cutoff: &'a Version,
    weights: ScoreWeights,
    summaries: &'a [Summary],
    diagnostics: &'a evopatch::eval::Diagnostics,
}

pub fn eval(a: EvalArgs, config: &Config) -> Result<()> {
    let corpus = load_corpus(&a.corpus, config)?;
    let index = Index::load(&a.index)?;
    let weights = ScoreWeights {
        lambda_s: a.lambda_s.unwrap_or(config.score.lambda_s),
        lambda_f: a.lambda_f.unwrap_or(config.score.lambda_f),
        lambda_p: a.lambda_p.unwrap_or(config.score.lambda_p),
    };
    let options = EvalOptions {
        methods: a.methods.unwrap_or_else(|| Method::ALL.to_vec()),
        weights,
        min_bytes: config.eval.min_bytes,
        min_instructions: config.eval.min_instructions,
        versions: a.versions,
        identities: None,
    };
    let result = run_task1(&corpus, &index, &options)?;
    write_output(&a.out.join("pairs.csv"), write_pair_csv(&result.reports)?)?;
    let doc = SummaryDoc {
        cutoff: &result.cutoff,
        weights,
        summaries: &result.summaries,
        diagnostics: &result.diagnostics,
    };
    write_output(&a.out.join("summary.json"), pretty_json(&doc))?;

    println!("{:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}", "method", "pairs", "queries", "hit@1", "hit@10", "mrr@10", "reduct.");
    for s in &result.summaries {
        println!(
            "{:<10} {:>6} {:>8} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            s.method.to_string(),
            s.pairs,
            s.queries,
            s.hit_at_1,
            s.hit_at_10,
            s.mrr_at_10,
            s.inspection_reduction
        );
    }
    let d = &result.diagnostics;
    println!(
        "skipped pairs {}, queries without truth {}, below size filter {}",
        d.skipped_pairs.len(),
        d.queries_without_truth,
        d.queries_below_size_filter
    );
    Ok(())
}

#[derive(Args)]
pub struct PatchProxyArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for folds.csv and report.json
    #[arg(long)]
    out: PathBuf,
    /// First patched version
    #[arg(long)]
    boundary: Option<Version>,
}

pub fn patch_proxy(a: PatchProxyArgs, config: &Config) -> Result<()> {
    let corpus = load_corpus(&a.corpus, config)?;
    let boundary = match a.boundary {
        Some(b) => b,
        None => Version::parse(&config.patch.boundary)?,
    };
    let binaries = corpus_binaries(&corpus);
    let report = holdout_eval(&binaries, &boundary, config.patch.epsilon)?;
    write_output(&a.out.join("folds.csv"), write_fold_csv(&report)?)?;
    write_output(&a.out.join("report.json"), pretty_json(&report))?;
    for f in &report.folds {
        println!(
            "{:<8} n={:<4} acc {:.4} prec {:.4} rec {:.4} f1 {:.4}",
            f.arch.to_string(),
            f.binaries,
            f.accuracy,
            f.precision,
            f.recall,
            f.f1
        );
    }
    println!(
        "mean     acc {:.4} prec {:.4} rec {:.4} f1 {:.4} ({} binaries without symbol counts)",
        report.mean_accuracy, report.mean_precision, report.mean_recall, report.mean_f1, report.n_sym_missing
    );
    Ok(())
}
