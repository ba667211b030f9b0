//! Summary tables and version-trend plots from `eval` output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use evopatch::corpus::Version;
use evopatch::eval::{read_pair_csv, summarize, Method, PairReport, Summary};

use crate::commands::write_output;

#[derive(Args)]
pub struct ReportArgs {
    /// Directory written by `eval` (reads pairs.csv)
    #[arg(long)]
    eval: PathBuf,
    /// Output directory for summary.md, summary.csv, trend.csv and trend.svg
    #[arg(long)]
    out: PathBuf,
}

fn methods_in(reports: &[PairReport]) -> Vec<Method> {
    Method::ALL
        .into_iter()
        .filter(|m| reports.iter().any(|r| r.method == *m))
        .collect()
}

pub fn summaries(reports: &[PairReport]) -> Result<Vec<Summary>> {
    Ok(methods_in(reports)
        .into_iter()
        .map(|m| summarize(m, reports))
        .collect::<evopatch::Result<_>>()?)
}

pub struct TrendPoint {
    pub version: Version,
    pub summary: Summary,
}

pub fn version_trend(reports: &[PairReport]) -> Result<Vec<TrendPoint>> {
    let mut by_version: BTreeMap<&Version, Vec<PairReport>> = BTreeMap::new();
    for r in reports {
        by_version.entry(&r.version).or_default().push(r.clone());
    }
    let mut out = Vec::new();
    for (v, rs) in by_version {
        for s in summaries(&rs)? {
            out.push(TrendPoint {
                version: v.clone(),
                summary: s,
            });
        }
    }
    Ok(out)
}

pub fn summary_markdown(summaries: &[Summary]) -> String {
    let mut md = String::from(
        "| Method | Pairs | Queries | Hit@1 | Hit@5 | Hit@10 | MRR@10 | Mean inspected | Mean pool | Inspection reduction |\n\
         |---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    for s in summaries {
        writeln!(
            md,
            "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.2} | {:.2} | {:.4} |",
            s.method,
            s.pairs,
            s.queries,
            s.hit_at_1,
            s.hit_at_5,
            s.hit_at_10,
            s.mrr_at_10,
            s.mean_inspected_at_10,
            s.mean_pool,
            s.inspection_reduction
        )
        .unwrap();
    }
    md
}

fn summary_csv(summaries: &[Summary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in summaries {
        w.serialize(s)?;
    }
    Ok(w.into_inner()?)
}

fn trend_csv(points: &[TrendPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["version", "method", "pairs", "queries", "hit_at_1", "hit_at_10", "mrr_at_10"])?;
    for p in points {
        let s = &p.summary;
        w.write_record([
            p.version.to_string(),
            s.method.to_string(),
            s.pairs.to_string(),
            s.queries.to_string(),
            s.hit_at_1.to_string(),
            s.hit_at_10.to_string(),
            s.mrr_at_10.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

const COLORS: [&str; 3] = ["#1f77b4", "#ff7f0e", "#2ca02c"];

/// Hit@10 per version, one polyline per method.
pub fn trend_svg(points: &[TrendPoint]) -> String {
    let (w, h, pad) = (640.0, 360.0, 48.0);
    let mut versions: Vec<&Version> = points.iter().map(|p| &p.version).collect();
    versions.dedup();
    let x = |i: usize| {
        if versions.len() <= 1 {
            w / 2.0
        } else {
            pad + (w - 2.0 * pad) * i as f64 / (versions.len() - 1) as f64
        }
    };
    let y = |v: f64| h - pad - (h - 2.0 * pad) * v;

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        writeln!(
            svg,
            r##"<line x1="{pad}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="#ddd"/><text x="{2}" y="{3:.1}" text-anchor="end">{v:.2}</text>"##,
            y(v),
            w - pad,
            pad - 6.0,
            y(v) + 4.0
        )
        .unwrap();
    }
    for (i, v) in versions.iter().enumerate() {
        writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{v}</text>"#, x(i), h - pad + 16.0).unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">Hit@10 by version</text>"#, w / 2.0, pad / 2.0).unwrap();

    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| points.iter().any(|p| p.summary.method == *m))
        .collect();
    for (k, m) in methods.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .filter(|p| p.summary.method == *m)
            .map(|p| {
                let i = versions.iter().position(|v| **v == p.version).unwrap();
                format!("{:.1},{:.1}", x(i), y(p.summary.hit_at_10))
            })
            .collect();
        writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" ")).unwrap();
        let ly = pad + 14.0 * k as f64;
        writeln!(
            svg,
            r#"<rect x="{0}" y="{1:.1}" width="10" height="10" fill="{color}"/><text x="{2}" y="{3:.1}">{m}</text>"#,
            w - pad - 90.0,
            ly,
            w - pad - 75.0,
            ly + 9.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn report(a: ReportArgs) -> Result<()> {
    let path = a.eval.join("pairs.csv");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let reports = read_pair_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
    let sums = summaries(&reports)?;
    let trend = version_trend(&reports)?;

    let md = summary_markdown(&sums);
    write_output(&a.out.join("summary.md"), &md)?;
    write_output(&a.out.join("summary.csv"), summary_csv(&sums)?)?;
    write_output(&a.out.join("trend.csv"), trend_csv(&trend)?)?;
    write_output(&a.out.join("trend.svg"), trend_svg(&trend))?;
    print!("{md}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use evopatch::corpus::Arch;

    fn pair(method: Method, version: &str, inspected: f64, pool: f64, queries: usize) -> PairReport {
        PairReport {
            method,
            version: Version::parse(version).unwrap(),
            source: Arch::Arm,
            target: Arch::Mips,
            query_count: queries,
            hit_at_1: 0.5,
            hit_at_5: 0.5,
            hit_at_10: 0.75,
            mrr_at_10: 0.6,
            mean_inspected_at_10: inspected,
            mean_pool: pool,
        }
    }

    #[test]
    fn inspection_reduction_is_recomputed_from_the_summary() {
        let s = summaries(&[pair(Method::EvoPatch, "1.0", 6.20, 609.41, 10)]).unwrap();
        assert!((s[0].inspection_reduction - 0.98983).abs() < 1e-4);
        assert!(summary_markdown(&s).contains("| 0.9898 |"));
    }

    #[test]
    fn trend_has_one_point_per_version_and_method() {
        let reports = vec![
            pair(Method::EvoPatch, "1.0", 2.0, 50.0, 4),
            pair(Method::SizeStat, "1.0", 5.0, 50.0, 4),
            pair(Method::EvoPatch, "1.1", 3.0, 50.0, 4),
        ];
        let t = version_trend(&reports).unwrap();
        assert_eq!(t.len(), 3);
        let svg = trend_svg(&t);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }
}
