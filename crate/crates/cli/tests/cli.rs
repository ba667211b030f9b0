use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evopatch::corpus::{Arch, Version};
use evopatch::eval::{write_pair_csv, Method, PairReport};

fn evopatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evopatch"))
        .args(args)
        .output()
        .expect("spawn evopatch")
}

fn ok(args: &[&str]) -> String {
    let out = evopatch(args);
    assert!(
        out.status.success(),
        "evopatch {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    let record: serde_json::Value = serde_json::from_str(line.lines().last().unwrap()).expect("json error record");
    record["error"]["kind"].as_str().unwrap().to_string()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

struct Pipeline {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Pipeline {
    fn path(&self, rel: &str) -> String {
        self.root.join(rel).to_string_lossy().into_owned()
    }

    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let p = Pipeline { _tmp: tmp, root };
        ok(&["synth", "--seed", "3", "--identities", "60", "--versions", "3", "--out", &p.path("corpus")]);
        ok(&["align", "--corpus", &p.path("corpus"), "--out", &p.path("anchors.csv")]);
        ok(&[
            "build-index",
            "--corpus",
            &p.path("corpus"),
            "--anchors",
            &p.path("anchors.csv"),
            "--cutoff",
            "1.2.0",
            "--out",
            &p.path("index"),
        ]);
        p
    }
}

#[test]
fn smoke_pipeline_prints_weighted_summary() {
    let p = Pipeline::new();
    let stdout = ok(&["eval", "--corpus", &p.path("corpus"), "--index", &p.path("index"), "--out", &p.path("eval")]);
    assert!(stdout.contains("hit@10"), "{stdout}");
    for m in ["EvoPatch", "ShapeStat", "SizeStat"] {
        assert!(stdout.contains(m), "{stdout}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.root.join("eval/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cutoff"], "1.2.0");
    let sums = summary["summaries"].as_array().unwrap();
    assert_eq!(sums.len(), 3);
    assert!(sums.iter().all(|s| s["pairs"] == 20));

    let md = ok(&["report", "--eval", &p.path("eval"), "--out", &p.path("report")]);
    assert!(md.starts_with("| Method |"));
    for f in ["summary.md", "summary.csv", "trend.csv", "trend.svg"] {
        assert!(p.root.join("report").join(f).is_file(), "{f}");
    }
    let trend = fs::read_to_string(p.root.join("report/trend.csv")).unwrap();
    assert_eq!(trend.lines().count(), 1 + 3);
}

#[test]
fn query_emits_ranked_evidence() {
    let p = Pipeline::new();
    let anchors = fs::read_to_string(p.root.join("anchors.csv")).unwrap();
    let header: Vec<&str> = anchors.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let row = anchors
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|r| r[col("version")] == "1.2.0" && r[col("arch")] == "arm")
        .unwrap();
    let identity = row[col("identity")];
    let doc = ok(&[
        "query",
        "--index",
        &p.path("index"),
        "--target",
        &p.path("corpus/stripped/1.2.0/mips.json"),
        "--reference",
        &p.path("corpus/stripped/1.2.0/arm.json"),
        "--identity",
        identity,
        "--top",
        "5",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&doc).unwrap();
    assert_eq!(doc["query"]["identity"], identity);
    assert_eq!(doc["query"]["address"], row[col("stripped_addr")]);
    assert_eq!(doc["query"]["prototype"], true);
    let cands = doc["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 5);
    for (i, c) in cands.iter().enumerate() {
        assert_eq!(c["rank"], i + 1);
        let total = 0.7 * c["r_s"].as_f64().unwrap() + 0.1 * c["r_f"].as_f64().unwrap() + 0.2 * c["r_p"].as_f64().unwrap();
        assert!((total - c["total"].as_f64().unwrap()).abs() < 1e-12);
    }
    assert!(cands.windows(2).all(|w| w[0]["total"].as_f64() >= w[1]["total"].as_f64()));

    let missing = evopatch(&[
        "query",
        "--index",
        &p.path("index"),
        "--target",
        &p.path("corpus/stripped/1.2.0/mips.json"),
        "--reference",
        &p.path("corpus/stripped/1.2.0/arm.json"),
    ]);
    assert_eq!(error_kind(&missing), "InvalidConfig");
}

#[test]
fn eval_refuses_leaking_configurations() {
    let p = Pipeline::new();
    let older = evopatch(&[
        "eval",
        "--corpus",
        &p.path("corpus"),
        "--index",
        &p.path("index"),
        "--out",
        &p.path("eval"),
        "--versions",
        "1.0.0",
    ]);
    assert_eq!(error_kind(&older), "Leakage");

    ok(&[
        "build-index",
        "--corpus",
        &p.path("corpus"),
        "--anchors",
        &p.path("anchors.csv"),
        "--cutoff",
        "9.0.0",
        "--out",
        &p.path("index_all"),
    ]);
    let everything = evopatch(&["eval", "--corpus", &p.path("corpus"), "--index", &p.path("index_all"), "--out", &p.path("eval")]);
    assert_eq!(error_kind(&everything), "Leakage");
    assert!(!p.root.join("eval").exists());
}

#[test]
fn tampered_index_fails_closed() {
    let p = Pipeline::new();
    let moments = p.root.join("index/moments.json");
    let mut text = fs::read_to_string(&moments).unwrap();
    text.push(' ');
    fs::write(&moments, text).unwrap();
    let out = evopatch(&["eval", "--corpus", &p.path("corpus"), "--index", &p.path("index"), "--out", &p.path("eval")]);
    assert_eq!(error_kind(&out), "IndexIntegrity");
}

#[test]
fn reruns_are_byte_identical_and_inputs_untouched() {
    let p = Pipeline::new();
    let corpus_before = tree(&p.root.join("corpus"));
    ok(&["synth", "--seed", "3", "--identities", "60", "--versions", "3", "--out", &p.path("corpus2")]);
    assert_eq!(tree(&p.root.join("corpus2")), corpus_before);

    ok(&["--jobs", "1", "align", "--corpus", &p.path("corpus"), "--out", &p.path("anchors2.csv")]);
    assert_eq!(fs::read(p.root.join("anchors2.csv")).unwrap(), fs::read(p.root.join("anchors.csv")).unwrap());

    ok(&[
        "--jobs",
        "3",
        "build-index",
        "--corpus",
        &p.path("corpus"),
        "--anchors",
        &p.path("anchors.csv"),
        "--cutoff",
        "1.2.0",
        "--out",
        &p.path("index2"),
    ]);
    assert_eq!(tree(&p.root.join("index2")), tree(&p.root.join("index")));

    for (jobs, out) in [("1", "eval_a"), ("4", "eval_b")] {
        ok(&["--jobs", jobs, "eval", "--corpus", &p.path("corpus"), "--index", &p.path("index"), "--out", &p.path(out)]);
        ok(&["report", "--eval", &p.path(out), "--out", &p.path(&format!("{out}/report"))]);
        ok(&["patch-proxy", "--corpus", &p.path("corpus"), "--boundary", "1.1.0", "--out", &p.path(&format!("{out}/patch"))]);
    }
    assert_eq!(tree(&p.root.join("eval_a")), tree(&p.root.join("eval_b")));
    assert_eq!(tree(&p.root.join("corpus")), corpus_before);
}

#[test]
fn extract_and_ingest_build_a_corpus() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("corpus");
    let o = out.to_string_lossy();
    ok(&["extract-symbols", "--version", "1.0.0", "--out", &o, &fixtures.join("le64.elf").to_string_lossy()]);
    ok(&["extract-symbols", "--version", "1.0.0", "--out", &o, &fixtures.join("be32.elf").to_string_lossy()]);
    let le = fs::read_to_string(out.join("symbols/1.0.0/x86_64.sym")).unwrap();
    assert!(le.contains("main\t0x1000\t42"), "{le}");
    assert!(out.join("symbols/1.0.0/mips.sym").is_file());

    let bad = evopatch(&["extract-symbols", "--version", "1.0.0", "--out", &o, &fixtures.join("hello.c").to_string_lossy()]);
    assert_eq!(error_kind(&bad), "NotElf");

    let merged = tmp.path().join("merged");
    ok(&["ingest", "--out", &merged.to_string_lossy(), &out.join("symbols").to_string_lossy()]);
    assert_eq!(fs::read_to_string(merged.join("symbols/1.0.0/x86_64.sym")).unwrap(), le);

    let broken = tmp.path().join("broken.json");
    fs::write(&broken, r#"{"schema_version":"1","version":"1.0.0","arch":"arm","functions":[],"name":"x"}"#).unwrap();
    let rejected = evopatch(&["ingest", "--out", &merged.to_string_lossy(), &broken.to_string_lossy()]);
    assert!(!rejected.status.success());
}

#[test]
fn report_recomputes_inspection_reduction() {
    let tmp = tempfile::tempdir().unwrap();
    let eval = tmp.path().join("eval");
    fs::create_dir_all(&eval).unwrap();
    let pair = PairReport {
        method: Method::EvoPatch,
        version: Version::parse("1.0.0").unwrap(),
        source: Arch::Arm,
        target: Arch::Mips,
        query_count: 100,
        hit_at_1: 0.35,
        hit_at_5: 0.5,
        hit_at_10: 0.56,
        mrr_at_10: 0.42,
        mean_inspected_at_10: 6.20,
        mean_pool: 609.41,
    };
    fs::write(eval.join("pairs.csv"), write_pair_csv(&[pair]).unwrap()).unwrap();
    let md = ok(&["report", "--eval", &eval.to_string_lossy(), "--out", &tmp.path().join("r").to_string_lossy()]);
    assert!(md.contains("| 0.9898 |"), "{md}");
}

#[test]
fn unknown_commands_and_bad_config_produce_error_records() {
    let out = evopatch(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "UnknownCommand");

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("evopatch.toml");
    fs::write(&cfg, "format = 1\n[align]\nwindow = 0\n").unwrap();
    let out = evopatch(&["--config", &cfg.to_string_lossy(), "config"]);
    assert!(!out.status.success());

    fs::write(&cfg, "format = 1\n[score]\nlambda_p = 0.5\n").unwrap();
    let toml = ok(&["--config", &cfg.to_string_lossy(), "config"]);
    assert!(toml.contains("lambda_p = 0.5"));
    assert!(toml.contains("window = 96"));
}
