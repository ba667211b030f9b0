//! Built retrieval index: training-split statistics, fused vectors for every
//! stripped function, the prototype bank, and the anchors they came from.
//!
//! On disk:
//!
//! ```text
//! manifest.json                 format, cutoff, counts, config hash, artifact digests
//! settings.json                 index-relevant constants
//! idf_token.json idf_context.json moments.json
//! vectors/<version>__<arch>.evpx  fused vectors, with .addrs listing addresses
//! prototypes.txt prototypes.evpx prototype_members.txt
//! anchors.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::{alignable_functions, read_anchor_csv, write_anchor_csv, AnchorIndex, MatchAnchor};
use crate::corpus::{format_addr, parse_addr, write_file, Arch, Corpus, FeatureExport, FunctionRecord, Version};
use crate::embed::store::{decode_vectors, encode_vectors};
use crate::embed::{
    fit_arch_moments, fit_idf, graph_vector, ArchMoments, Embedder, FusedEmbedding, GraphVector, IdfTable, Space,
    FUSED_DIM,
};
use crate::error::{Error, Result};
use crate::prototype::{build_prototypes, PrototypeBank};
use crate::shape::{shape_descriptors_with, ShapeScale, ShapeVector};

pub const INDEX_FORMAT: &str = "evopatch-index 1";

/// Constants that change what the index contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSettings {
    pub shape_scale: ShapeScale,
    pub neighborhood: usize,
    pub epsilon: f64,
}

impl Default for IndexSettings {
    fn default() -> Self {
        IndexSettings {
            shape_scale: ShapeScale::default(),
            neighborhood: crate::shape::DEFAULT_NEIGHBORHOOD,
            epsilon: crate::embed::DEFAULT_EPSILON,
        }
    }
}

impl IndexSettings {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("settings serialize").as_bytes())
    }
}

/// Fused vectors of one stripped binary, by ascending address.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BucketVectors {
    pub addrs: Vec<u64>,
    pub vectors: Vec<Vec<f32>>,
}

impl BucketVectors {
    pub fn get(&self, address: u64) -> Option<&[f32]> {
        self.addrs
            .binary_search(&address)
            .ok()
            .map(|i| self.vectors[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.addrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addrs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCounts {
    pub training_functions: u64,
    pub fused_vectors: u64,
    pub prototypes: u64,
    pub anchors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format: String,
    pub cutoff: Version,
    pub versions: Vec<Version>,
    pub arches: Vec<Arch>,
    pub counts: IndexCounts,
    pub config_hash: String,
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Index {
    pub cutoff: Version,
    pub settings: IndexSettings,
    pub embedder: Embedder,
    pub prototypes: PrototypeBank,
    pub anchors: AnchorIndex,
    pub vectors: BTreeMap<(Version, Arch), BucketVectors>,
    pub training_functions: u64,
}

/// A stripped function with the shape it has inside its binary.
pub struct Shaped<'a> {
    pub record: &'a FunctionRecord,
    pub shape: ShapeVector,
}

/// Shapes of every non-zero-size function of a stripped binary.
pub fn stripped_shapes(export: &FeatureExport, neighborhood: usize) -> Result<Vec<Shaped<'_>>> {
    let fns = alignable_functions(&export.functions);
    if fns.is_empty() {
        return Ok(Vec::new());
    }
    let shapes = shape_descriptors_with(&fns, neighborhood)?;
    Ok(fns
        .into_iter()
        .zip(shapes)
        .map(|(record, shape)| Shaped { record, shape })
        .collect())
}

/// Fits all statistics on anchored stripped functions older than `cutoff`
/// and fuses every stripped function in the corpus.
pub fn build_index(
    corpus: &Corpus,
    anchors: Vec<MatchAnchor>,
    cutoff: &Version,
    settings: &IndexSettings,
) -> Result<Index> {
    let anchors = AnchorIndex::new(anchors);
    let buckets: Vec<(&(Version, Arch), Vec<Shaped<'_>>)> = corpus
        .stripped
        .par_iter()
        .map(|(key, export)| Ok((key, stripped_shapes(export, settings.neighborhood)?)))
        .collect::<Result<_>>()?;

    let mut training: Vec<(&Arch, &FunctionRecord, GraphVector, ShapeVector)> = Vec::new();
    for ((version, arch), shaped) in &buckets {
        if version >= cutoff {
            continue;
        }
        for s in shaped {
            if anchors.get(version, arch, s.record.address).is_some() {
                training.push((arch, s.record, graph_vector(s.record), s.shape));
            }
        }
    }
    if training.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let token_idf = fit_idf(training.iter().map(|t| &t.1.tokens), Space::Token)?;
    let context_idf = fit_idf(training.iter().map(|t| &t.1.contexts), Space::Context)?;
    let moments = fit_arch_moments(training.iter().map(|(a, _, g, s)| (*a, g, s)), settings.epsilon)?;
    let embedder = Embedder {
        token_idf,
        context_idf,
        moments,
    };

    let vectors: BTreeMap<(Version, Arch), BucketVectors> = buckets
        .par_iter()
        .map(|(key, shaped)| {
            let bucket = BucketVectors {
                addrs: shaped.iter().map(|s| s.record.address).collect(),
                vectors: shaped
                    .iter()
                    .map(|s| embedder.fuse(&key.1, s.record, &s.shape).into_vec())
                    .collect(),
            };
            ((*key).clone(), bucket)
        })
        .collect();

    let mut members = Vec::new();
    for a in anchors.anchors() {
        if a.version >= *cutoff {
            continue;
        }
        let z = vectors
            .get(&(a.version.clone(), a.arch.clone()))
            .and_then(|b| b.get(a.stripped_addr));
        if let Some(z) = z {
            members.push((a, FusedEmbedding::from_vec(z.to_vec()).expect("fused dimension")));
        }
    }
    let prototypes = build_prototypes(members.iter().map(|(a, z)| (*a, z)), cutoff);

    Ok(Index {
        cutoff: cutoff.clone(),
        settings: settings.clone(),
        embedder,
        prototypes,
        anchors,
        vectors,
        training_functions: training.len() as u64,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn bucket_stem(version: &Version, arch: &Arch) -> String {
    format!("{version}__{arch}")
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("index documents serialize");
    s.push('\n');
    s.into_bytes()
}

impl Index {
    pub fn versions(&self) -> Vec<Version> {
        let mut v: Vec<Version> = self.vectors.keys().map(|(v, _)| v.clone()).collect();
        v.dedup();
        v
    }

    pub fn arches(&self) -> Vec<Arch> {
        let mut a: Vec<Arch> = self.vectors.keys().map(|(_, a)| a.clone()).collect();
        a.sort();
        a.dedup();
        a
    }

    fn artifacts(&self) -> BTreeMap<String, Vec<u8>> {
        let mut files = BTreeMap::new();
        files.insert("settings.json".to_string(), to_json(&self.settings));
        files.insert("idf_token.json".to_string(), to_json(&self.embedder.token_idf));
        files.insert("idf_context.json".to_string(), to_json(&self.embedder.context_idf));
        files.insert("moments.json".to_string(), to_json(&self.embedder.moments));
        files.insert("prototypes.txt".to_string(), self.prototypes.manifest_text().into_bytes());
        files.insert("prototypes.evpx".to_string(), self.prototypes.vector_bytes());
        files.insert("prototype_members.txt".to_string(), self.prototypes.members_text().into_bytes());
        files.insert("anchors.csv".to_string(), write_anchor_csv(self.anchors.anchors()).into_bytes());
        for ((version, arch), bucket) in &self.vectors {
            let stem = bucket_stem(version, arch);
            let rows: Vec<&[f32]> = bucket.vectors.iter().map(Vec::as_slice).collect();
            let mut addrs = String::new();
            for a in &bucket.addrs {
                writeln!(addrs, "{}", format_addr(*a)).unwrap();
            }
            files.insert(
                format!("vectors/{stem}.evpx"),
                encode_vectors(FUSED_DIM, &rows).expect("fused dimension"),
            );
            files.insert(format!("vectors/{stem}.addrs"), addrs.into_bytes());
        }
        files
    }

    pub fn manifest(&self) -> IndexManifest {
        IndexManifest {
            format: INDEX_FORMAT.to_string(),
            cutoff: self.cutoff.clone(),
            versions: self.versions(),
            arches: self.arches(),
            counts: IndexCounts {
                training_functions: self.training_functions,
                fused_vectors: self.vectors.values().map(|b| b.len() as u64).sum(),
                prototypes: self.prototypes.len() as u64,
                anchors: self.anchors.anchors().len() as u64,
            },
            config_hash: self.settings.hash(),
            artifacts: self
                .artifacts()
                .iter()
                .map(|(name, bytes)| (name.clone(), sha256_hex(bytes)))
                .collect(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let artifacts = self.artifacts();
        let manifest = IndexManifest {
            artifacts: artifacts
                .iter()
                .map(|(name, bytes)| (name.clone(), sha256_hex(bytes)))
                .collect(),
            ..self.manifest()
        };
        for (name, bytes) in &artifacts {
            write_file(&dir.join(name), bytes)?;
        }
        write_file(&dir.join("manifest.json"), &to_json(&manifest))
    }

    /// Fails closed: every artifact must match its recorded digest and the
    /// settings must match the recorded config hash.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.json");
        let manifest: IndexManifest = serde_json::from_slice(&read(&manifest_path)?)
            .map_err(|e| Error::parse(&manifest_path, e))?;
        if manifest.format != INDEX_FORMAT {
            return Err(Error::IndexIntegrity(format!("unknown index format {:?}", manifest.format)));
        }
        let mut files = BTreeMap::new();
        for (name, digest) in &manifest.artifacts {
            let bytes = read(&dir.join(name))?;
            if sha256_hex(&bytes) != *digest {
                return Err(Error::IndexIntegrity(format!("{name} does not match its recorded digest")));
            }
            files.insert(name.as_str(), bytes);
        }
        let need = |name: &str| {
            files
                .get(name)
                .ok_or_else(|| Error::IndexIntegrity(format!("manifest does not list {name}")))
        };
        let json = |name: &str| -> Result<serde_json::Value> {
            serde_json::from_slice(need(name)?).map_err(|e| Error::parse(dir.join(name), e))
        };
        let text = |name: &str| -> Result<String> {
            String::from_utf8(need(name)?.clone()).map_err(|e| Error::parse(dir.join(name), e))
        };
        fn typed<T: serde::de::DeserializeOwned>(v: serde_json::Value, name: &str) -> Result<T> {
            serde_json::from_value(v).map_err(|e| Error::IndexIntegrity(format!("{name}: {e}")))
        }

        let settings: IndexSettings = typed(json("settings.json")?, "settings.json")?;
        if settings.hash() != manifest.config_hash {
            return Err(Error::IndexIntegrity("config hash does not match settings".into()));
        }
        let token_idf: IdfTable = typed(json("idf_token.json")?, "idf_token.json")?;
        let context_idf: IdfTable = typed(json("idf_context.json")?, "idf_context.json")?;
        let moments: ArchMoments = typed(json("moments.json")?, "moments.json")?;
        let prototypes = PrototypeBank::from_parts(
            &text("prototypes.txt")?,
            need("prototypes.evpx")?,
            &text("prototype_members.txt")?,
        )?;
        let anchors = AnchorIndex::new(read_anchor_csv(&text("anchors.csv")?)?);

        let mut vectors = BTreeMap::new();
        for version in &manifest.versions {
            for arch in &manifest.arches {
                let stem = bucket_stem(version, arch);
                let store = format!("vectors/{stem}.evpx");
                if !files.contains_key(store.as_str()) {
                    continue;
                }
                let (_, rows) = decode_vectors(need(&store)?)?;
                let addrs = text(&format!("vectors/{stem}.addrs"))?
                    .lines()
                    .map(|l| parse_addr(l).ok_or_else(|| Error::IndexIntegrity(format!("bad address {l:?} in {stem}"))))
                    .collect::<Result<Vec<u64>>>()?;
                if addrs.len() != rows.len() || rows.iter().any(|r| r.len() != FUSED_DIM) {
                    return Err(Error::IndexIntegrity(format!("{stem}: address list and vector store disagree")));
                }
                vectors.insert(
                    (version.clone(), arch.clone()),
                    BucketVectors {
                        addrs,
                        vectors: rows,
                    },
                );
            }
        }

        let index = Index {
            cutoff: manifest.cutoff.clone(),
            settings,
            embedder: Embedder {
                token_idf,
                context_idf,
                moments,
            },
            prototypes,
            anchors,
            vectors,
            training_functions: manifest.counts.training_functions,
        };
        if index.manifest().counts != manifest.counts {
            return Err(Error::IndexIntegrity("manifest counts do not match the artifacts".into()));
        }
        Ok(index)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
