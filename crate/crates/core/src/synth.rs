//! Seeded synthetic corpora: a fixed population of function identities that
//! drifts across versions and is recompiled for several architectures.
//!
//! Every identity keeps a base profile (size, op-class mix, preferred
//! tokens, context events). A version step perturbs a `drift_rate` share of
//! the identities. Each architecture remaps part of the token vocabulary,
//! rescales sizes and lays functions out in the shared base order with
//! bounded local transpositions.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    format_addr, normalize_identity, write_ground_truth, AnalysisFilter, Arch, Corpus, FeatureExport,
    FunctionRecord, GroundTruthRow, Identity, SymbolRecord, SymbolTable, Version,
};
use crate::error::{Error, Result};

pub const VOCABULARY: usize = 256;
const TOKEN_CAP: usize = 48;
const PREFERRED_TOKENS: usize = 10;
const MAX_TRANSPOSITION: usize = 4;
const THUNK_SHARE: f64 = 0.03;
const RUNTIME_SYMBOLS: [&str; 8] = [
    "_init",
    "_start",
    "deregister_tm_clones",
    "register_tm_clones",
    "__do_global_dtors_aux",
    "frame_dummy",
    "__libc_csu_init",
    "_fini",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchNoise {
    /// Share of the token vocabulary each arch permutes.
    pub token_remap: f64,
    /// Log-scale spread of per-arch and per-function size factors.
    pub size_scale: f64,
    /// Probability that recovery misjudges a stripped function's extent.
    pub recovery: f64,
}

impl Default for ArchNoise {
    fn default() -> Self {
        ArchNoise {
            token_remap: 0.25,
            size_scale: 0.15,
            recovery: 0.05,
        }
    }
}

impl ArchNoise {
    pub fn none() -> Self {
        ArchNoise {
            token_remap: 0.0,
            size_scale: 0.0,
            recovery: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_identities: usize,
    pub n_versions: usize,
    pub arches: Vec<Arch>,
    pub drift_rate: f64,
    pub arch_noise: ArchNoise,
    pub changed_magnitude: f64,
    pub layout_jitter: f64,
    /// Share of identities marked hot; they drift at `hot_drift` instead.
    pub hot_fraction: f64,
    pub hot_drift: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_identities: 500,
            n_versions: 8,
            arches: Arch::KNOWN.to_vec(),
            drift_rate: 0.05,
            arch_noise: ArchNoise::default(),
            changed_magnitude: 0.25,
            layout_jitter: 0.30,
            hot_fraction: 0.0,
            hot_drift: 0.5,
        }
    }
}

impl SynthConfig {
    /// The seeded reference corpus of the end-to-end checks.
    pub fn reference() -> Self {
        SynthConfig {
            seed: 7,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("drift_rate", self.drift_rate),
            ("arch_noise.token_remap", self.arch_noise.token_remap),
            ("arch_noise.size_scale", self.arch_noise.size_scale),
            ("arch_noise.recovery", self.arch_noise.recovery),
            ("changed_magnitude", self.changed_magnitude),
            ("layout_jitter", self.layout_jitter),
            ("hot_fraction", self.hot_fraction),
            ("hot_drift", self.hot_drift),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if self.n_identities == 0 || self.n_versions == 0 || self.arches.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one identity, version and architecture".into(),
            ));
        }
        let distinct: BTreeSet<&Arch> = self.arches.iter().collect();
        if distinct.len() != self.arches.len() {
            return Err(Error::InvalidConfig("architecture list has duplicates".into()));
        }
        Ok(())
    }

    pub fn versions(&self) -> Vec<Version> {
        (0..self.n_versions)
            .map(|k| Version::parse(&format!("1.{k}.0")).expect("generated versions parse"))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub ground_truth: Vec<GroundTruthRow>,
    pub hot: BTreeSet<Identity>,
}

impl SynthOutput {
    /// Writes the corpus layout plus `manifest.csv` and `synth.toml`.
    pub fn write(&self, root: &Path, config: &SynthConfig) -> Result<()> {
        self.corpus.write(root)?;
        write_ground_truth(&root.join("manifest.csv"), &self.ground_truth)?;
        let text = toml::to_string(config).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        crate::corpus::write_file(&root.join("synth.toml"), text.as_bytes())
    }
}

#[derive(Debug, Clone)]
struct Profile {
    name: String,
    hot: bool,
    size: f64,
    op_weights: [f64; 16],
    edge_weights: [f64; 9],
    insns_per_block: f64,
    edges_per_block: f64,
    call_rate: f64,
    branch_rate: f64,
    string_rate: f64,
    const_rate: f64,
    tokens: Vec<(usize, f64)>,
    contexts: Vec<String>,
}

struct ArchModel {
    arch: Arch,
    remap: Vec<usize>,
    size_factor: f64,
    bytes_per_insn: f64,
    granule: u64,
    base_address: u64,
    function_noise: Vec<f64>,
}

const VERBS: [&str; 24] = [
    "parse", "read", "write", "handle", "init", "free", "send", "recv", "check", "update", "find", "open",
    "close", "load", "store", "print", "scan", "copy", "match", "decode", "encode", "flush", "setup", "run",
];
const NOUNS: [&str; 24] = [
    "config", "packet", "buffer", "header", "option", "entry", "table", "socket", "file", "string", "line",
    "route", "lease", "token", "record", "state", "request", "reply", "applet", "inode", "device", "user",
    "group", "args",
];
const CLONE_SUFFIXES: [&str; 4] = [".isra.0", ".part.0", ".constprop.0", ".cold"];

fn identity_names(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut seen = BTreeSet::new();
    (0..n)
        .map(|i| {
            let base = format!(
                "{}_{}",
                VERBS[rng.random_range(0..VERBS.len())],
                NOUNS[rng.random_range(0..NOUNS.len())]
            );
            let name = if seen.contains(&base) { format!("{base}_{i}") } else { base };
            seen.insert(name.clone());
            name
        })
        .collect()
}

fn weights<const N: usize>(rng: &mut ChaCha8Rng, spread: f64) -> [f64; N] {
    let noise = Normal::new(0.0, spread).unwrap();
    let mut w: [f64; N] = std::array::from_fn(|_| noise.sample(rng).exp());
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn sample_profile(name: String, hot: bool, rng: &mut ChaCha8Rng) -> Profile {
    let body = LogNormal::new(180f64.ln(), 0.9).unwrap().sample(rng).clamp(6.0, 20_000.0);
    let thunk = rng.random_bool(THUNK_SHARE);
    let size = if thunk { rng.random_range(6.0..20.0) } else { body };
    let mut tokens: Vec<(usize, f64)> = Vec::with_capacity(PREFERRED_TOKENS);
    while tokens.len() < PREFERRED_TOKENS {
        let t = rng.random_range(0..VOCABULARY);
        if tokens.iter().all(|&(u, _)| u != t) {
            tokens.push((t, rng.random_range(0.5..2.0)));
        }
    }
    let n_contexts = rng.random_range(2..=7);
    let contexts = (0..n_contexts).map(|_| random_context(rng)).collect();
    Profile {
        name,
        hot,
        size,
        op_weights: weights(rng, 0.8),
        edge_weights: weights(rng, 0.8),
        insns_per_block: rng.random_range(3.0..10.0),
        edges_per_block: rng.random_range(0.8..1.8),
        call_rate: rng.random_range(0.0..0.12),
        branch_rate: rng.random_range(0.05..0.2),
        string_rate: rng.random_range(0.0..0.05),
        const_rate: rng.random_range(0.0..0.1),
        tokens,
        contexts,
    }
}

fn random_context(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3) {
        0 => format!("call:{}", rng.random_range(0..5)),
        1 => format!("str:{}", rng.random_range(0..40)),
        _ => format!("const:{}", ["zero", "small", "med", "large"][rng.random_range(0..4)]),
    }
}

/// One version step of drift; draws the same number of values whatever
/// the magnitude, so the magnitude knob is monotone under a fixed seed.
fn drift(p: &mut Profile, magnitude: f64, rng: &mut ChaCha8Rng) {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let u: f64 = rng.random_range(0.5..1.0);
    p.size = (p.size * (sign * magnitude * u).exp()).clamp(6.0, 40_000.0);
    for slot in 0..PREFERRED_TOKENS {
        let replace = rng.random_bool(0.3);
        let t = rng.random_range(0..VOCABULARY);
        if replace && p.tokens.iter().all(|&(u, _)| u != t) {
            p.tokens[slot].0 = t;
        }
    }
    let swap = rng.random_bool(0.3);
    let ctx = random_context(rng);
    if swap {
        let i = rng.random_range(0..p.contexts.len());
        p.contexts[i] = ctx;
    }
    p.insns_per_block = (p.insns_per_block * rng.random_range(0.9..1.1)).clamp(2.0, 16.0);
}

fn arch_constants(arch: &Arch) -> (f64, u64, u64) {
    match arch {
        Arch::X86_64 => (3.6, 1, 0x401000),
        Arch::Arm => (3.2, 2, 0x10000),
        Arch::Aarch64 => (4.0, 4, 0x400000),
        Arch::Mips | Arch::Mipsel => (4.0, 4, 0x400000),
        Arch::Other(_) => (4.0, 4, 0x10000),
    }
}

fn arch_model(arch: &Arch, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> ArchModel {
    let noise = &cfg.arch_noise;
    let mut remap: Vec<usize> = (0..VOCABULARY).collect();
    let k = (noise.token_remap * VOCABULARY as f64).round() as usize;
    let mut chosen: Vec<usize> = (0..VOCABULARY).collect();
    chosen.shuffle(rng);
    chosen.truncate(k);
    let mut targets = chosen.clone();
    targets.shuffle(rng);
    for (&from, &to) in chosen.iter().zip(&targets) {
        remap[from] = to;
    }
    let size_factor = (noise.size_scale * rng.random_range(-1.0..=1.0)).exp();
    let jitter = Normal::new(0.0, 1.0).unwrap();
    let function_noise = (0..cfg.n_identities)
        .map(|_| (0.5 * noise.size_scale * jitter.sample(rng)).exp())
        .collect();
    let (bytes_per_insn, granule, base_address) = arch_constants(arch);
    ArchModel {
        arch: arch.clone(),
        remap,
        size_factor,
        bytes_per_insn,
        granule,
        base_address,
        function_noise,
    }
}

/// Largest-remainder apportionment of `total` over `weights`.
fn apportion<const N: usize>(total: u64, weights: &[f64; N]) -> [u64; N] {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: [u64; N] = std::array::from_fn(|k| exact[k].floor() as u64);
    let mut rest = total - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for k in order {
        if rest == 0 {
            break;
        }
        counts[k] += 1;
        rest -= 1;
    }
    counts
}

fn round_to(x: f64, granule: u64) -> u64 {
    let g = granule as f64;
    ((x / g).round() * g).max(g) as u64
}

struct Emitted {
    name: String,
    record: FunctionRecord,
    labeled_size: u64,
}

fn emit_function(
    p: &Profile,
    idx: usize,
    model: &ArchModel,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Emitted {
    let size = round_to(p.size * model.size_factor * model.function_noise[idx], model.granule).max(4);
    let insns = ((size as f64 / model.bytes_per_insn).round() as u64).max(1);
    let blocks = ((insns as f64 / p.insns_per_block).round() as u64).max(1);
    let edges = if blocks == 1 { 0 } else { (blocks as f64 * p.edges_per_block).round() as u64 };
    let jitter = Normal::new(0.0f64, 0.1).unwrap();
    let mut op_w = p.op_weights;
    op_w.iter_mut().for_each(|w| *w *= jitter.sample(rng).exp());
    let total: f64 = op_w.iter().sum();
    op_w.iter_mut().for_each(|w| *w /= total);
    let rate = |r: f64| (insns as f64 * r).round() as u64;

    let n_tokens = (insns as usize).min(TOKEN_CAP);
    let pref_total: f64 = p.tokens.iter().map(|t| t.1).sum();
    let tokens = (0..n_tokens)
        .map(|_| {
            let t = if rng.random_bool(0.75) {
                let mut x = rng.random_range(0.0..pref_total);
                let mut pick = p.tokens[p.tokens.len() - 1].0;
                for &(t, w) in &p.tokens {
                    if x < w {
                        pick = t;
                        break;
                    }
                    x -= w;
                }
                pick
            } else {
                rng.random_range(0..VOCABULARY)
            };
            format!("t{:03}", model.remap[t])
        })
        .collect();
    let mut contexts = p.contexts.clone();
    if contexts.len() > 1 && rng.random_bool(0.2) {
        contexts.remove(rng.random_range(0..contexts.len()));
    }

    let recovered = if rng.random_bool(cfg.arch_noise.recovery) {
        let d = model.granule * rng.random_range(1..=4);
        if rng.random_bool(0.5) { size + d } else { size.saturating_sub(d).max(model.granule) }
    } else {
        size
    };
    let name = if rng.random_bool(0.05) {
        format!("{}{}", p.name, CLONE_SUFFIXES[rng.random_range(0..CLONE_SUFFIXES.len())])
    } else {
        p.name.clone()
    };

    Emitted {
        name,
        labeled_size: size,
        record: FunctionRecord {
            address: 0,
            size: recovered,
            instruction_count: insns,
            block_count: blocks,
            edge_count: edges,
            call_count: rate(p.call_rate),
            branch_count: rate(p.branch_rate),
            ret_count: 1,
            string_ref_count: rate(p.string_rate),
            const_ref_count: rate(p.const_rate),
            op_class_counts: apportion(insns, &op_w),
            edge_type_counts: apportion(edges, &p.edge_weights),
            tokens,
            contexts,
        },
    }
}

/// Base order with bounded random transpositions.
fn jittered_order(n: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let swap = rng.random_bool(jitter);
        let d = rng.random_range(1..=MAX_TRANSPOSITION);
        if swap && i + d < n {
            order.swap(i, i + d);
        }
    }
    order
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names = identity_names(cfg.n_identities, &mut rng);
    let n_hot = (cfg.hot_fraction * cfg.n_identities as f64).round() as usize;
    let mut hot_pick: Vec<usize> = (0..cfg.n_identities).collect();
    hot_pick.shuffle(&mut rng);
    let hot_set: BTreeSet<usize> = hot_pick.into_iter().take(n_hot).collect();
    let mut profiles: Vec<Profile> = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| sample_profile(name, hot_set.contains(&i), &mut rng))
        .collect();
    let models: Vec<ArchModel> = cfg.arches.iter().map(|a| arch_model(a, cfg, &mut rng)).collect();
    let filter = AnalysisFilter::default();

    let mut out = SynthOutput {
        corpus: Corpus::default(),
        ground_truth: Vec::new(),
        hot: profiles
            .iter()
            .filter(|p| p.hot)
            .map(|p| Identity::from_normalized(p.name.clone()))
            .collect(),
    };
    for (v_idx, version) in cfg.versions().into_iter().enumerate() {
        let mut changed = vec![false; profiles.len()];
        if v_idx > 0 {
            for (i, p) in profiles.iter_mut().enumerate() {
                let rate = if p.hot { cfg.hot_drift } else { cfg.drift_rate };
                let hit = rng.random_bool(rate);
                let mut step = ChaCha8Rng::seed_from_u64(rng.random());
                if hit {
                    drift(p, cfg.changed_magnitude, &mut step);
                    changed[i] = true;
                }
            }
        }
        for model in &models {
            let order = jittered_order(profiles.len(), cfg.layout_jitter, &mut rng);
            let mut addr = model.base_address;
            let mut symbols = Vec::new();
            for name in RUNTIME_SYMBOLS.iter().take(3) {
                let size = round_to(rng.random_range(16.0..96.0), model.granule);
                symbols.push(symbol(name, addr, size, &filter));
                addr = align_up(addr + size, 16);
            }
            let mut functions = Vec::with_capacity(order.len());
            for &i in &order {
                let e = emit_function(&profiles[i], i, model, cfg, &mut rng);
                let mut record = e.record;
                record.address = addr;
                symbols.push(symbol(&e.name, addr, e.labeled_size, &filter));
                out.ground_truth.push(GroundTruthRow {
                    version: version.to_string(),
                    arch: model.arch.to_string(),
                    address: format_addr(addr),
                    identity: normalize_identity(&e.name)?.to_string(),
                    name: e.name,
                    changed: changed[i],
                    hot: profiles[i].hot,
                });
                let pad = model.granule * rng.random_range(0..4);
                addr = align_up(addr + e.labeled_size.max(record.size) + pad, model.granule.max(4));
                functions.push(record);
            }
            for name in RUNTIME_SYMBOLS.iter().skip(3) {
                let size = round_to(rng.random_range(16.0..96.0), model.granule);
                symbols.push(symbol(name, addr, size, &filter));
                addr = align_up(addr + size, 16);
            }
            let text_size = addr - model.base_address;
            out.corpus.insert_labeled(SymbolTable {
                version: version.clone(),
                arch: model.arch.clone(),
                file_size: text_size + 0x2000 + 24 * symbols.len() as u64,
                section_count: 27,
                debug_section_count: 0,
                symbols,
            })?;
            out.corpus.insert_stripped(FeatureExport {
                version: version.clone(),
                arch: model.arch.clone(),
                functions,
            })?;
        }
    }
    Ok(out)
}

fn symbol(name: &str, address: u64, size: u64, filter: &AnalysisFilter) -> SymbolRecord {
    SymbolRecord {
        name: name.to_string(),
        address,
        size,
        is_analysis: filter.is_analysis(name),
    }
}

fn align_up(x: u64, a: u64) -> u64 {
    x.div_ceil(a) * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{align_corpus, AlignConfig};
    use crate::shape::{log_size, ShapeScale};
    use std::collections::BTreeMap;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            n_identities: 60,
            n_versions: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn reference_counts() {
        let cfg = SynthConfig::reference();
        let out = generate_corpus(&cfg).unwrap();
        assert_eq!(out.corpus.stripped.len(), 40);
        assert_eq!(out.corpus.labeled.len(), 40);
        assert_eq!(out.ground_truth.len(), 500 * 8 * 5);
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = small(11);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate_corpus(&cfg).unwrap().write(a.path(), &cfg).unwrap();
        generate_corpus(&cfg).unwrap().write(b.path(), &cfg).unwrap();
        let files = |root: &Path| {
            let mut v = Vec::new();
            for sub in ["stripped", "symbols"] {
                for dir in std::fs::read_dir(root.join(sub)).unwrap() {
                    for f in std::fs::read_dir(dir.unwrap().path()).unwrap() {
                        let p = f.unwrap().path();
                        v.push((p.strip_prefix(root).unwrap().to_owned(), std::fs::read(&p).unwrap()));
                    }
                }
            }
            v.push(("manifest.csv".into(), std::fs::read(root.join("manifest.csv")).unwrap()));
            v.sort();
            v
        };
        assert_eq!(files(a.path()), files(b.path()));
        let back = Corpus::load(a.path(), &AnalysisFilter::default()).unwrap();
        assert_eq!(back.stripped.len(), 15);
    }

    #[test]
    fn ground_truth_is_complete() {
        let out = generate_corpus(&small(3)).unwrap();
        let rows: BTreeMap<(String, String, String), &GroundTruthRow> = out
            .ground_truth
            .iter()
            .map(|r| ((r.version.clone(), r.arch.clone(), r.address.clone()), r))
            .collect();
        assert_eq!(rows.len(), out.ground_truth.len());
        for ((v, a), export) in &out.corpus.stripped {
            for f in &export.functions {
                f.validate().unwrap();
                let key = (v.to_string(), a.to_string(), format_addr(f.address));
                assert!(rows.contains_key(&key));
            }
        }
    }

    #[test]
    fn zero_drift_keeps_sizes() {
        let cfg = SynthConfig {
            drift_rate: 0.0,
            ..small(5)
        };
        let out = generate_corpus(&cfg).unwrap();
        for arch in &cfg.arches {
            let sizes = |v: &Version| {
                let t = &out.corpus.labeled[&(v.clone(), arch.clone())];
                let mut m: Vec<(String, u64)> = t
                    .alignable()
                    .into_iter()
                    .map(|s| (normalize_identity(&s.name).unwrap().to_string(), s.size))
                    .collect();
                m.sort();
                m
            };
            let vs = cfg.versions();
            assert_eq!(sizes(&vs[0]), sizes(&vs[2]));
        }
    }

    #[test]
    fn noiseless_alignment_is_exact() {
        let cfg = SynthConfig {
            arch_noise: ArchNoise::none(),
            layout_jitter: 0.0,
            ..small(9)
        };
        let out = generate_corpus(&cfg).unwrap();
        let al = align_corpus(&out.corpus, &AlignConfig::default(), &ShapeScale::default(), 2).unwrap();
        assert_eq!(al.anchors.len(), 60 * 3 * 5);
        assert!(al.anchors.iter().all(|a| a.stripped_addr == a.labeled_addr));
    }

    #[test]
    fn changed_magnitude_is_monotone() {
        let mean_delta = |m: f64| {
            let cfg = SynthConfig {
                changed_magnitude: m,
                drift_rate: 0.3,
                ..small(21)
            };
            let out = generate_corpus(&cfg).unwrap();
            let arch = &cfg.arches[0];
            let vs = cfg.versions();
            let sizes = |v: &Version| -> BTreeMap<String, u64> {
                out.corpus.labeled[&(v.clone(), arch.clone())]
                    .alignable()
                    .into_iter()
                    .map(|s| (normalize_identity(&s.name).unwrap().to_string(), s.size))
                    .collect()
            };
            let (before, after) = (sizes(&vs[0]), sizes(&vs[1]));
            let flagged: Vec<f64> = out
                .ground_truth
                .iter()
                .filter(|r| r.changed && r.version == vs[1].to_string() && r.arch == arch.to_string())
                .map(|r| (log_size(after[&r.identity]) - log_size(before[&r.identity])).abs())
                .collect();
            assert!(!flagged.is_empty());
            flagged.iter().sum::<f64>() / flagged.len() as f64
        };
        let (a, b, c) = (mean_delta(0.1), mean_delta(0.3), mean_delta(0.6));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig { drift_rate: 1.5, ..SynthConfig::default() },
            SynthConfig { n_identities: 0, ..SynthConfig::default() },
            SynthConfig { arches: vec![Arch::Arm, Arch::Arm], ..SynthConfig::default() },
        ] {
            assert!(matches!(generate_corpus(&cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn hot_subset_is_marked() {
        let cfg = SynthConfig { hot_fraction: 0.2, ..small(4) };
        let out = generate_corpus(&cfg).unwrap();
        assert_eq!(out.hot.len(), 12);
        let hot_rows = out.ground_truth.iter().filter(|r| r.hot).count();
        assert_eq!(hot_rows, 12 * 3 * 5);
    }
}
