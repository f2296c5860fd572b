//! Artifact emitters: SVG heatmap and dendrogram, run manifest, run report.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{ClusterOptions, ClusteringResult, Dendrogram, Partition};
use crate::corpus::CorpusManifest;
use crate::embedding::ProviderIdentity;
use crate::error::{Error, Result};
use crate::planner::{CurriculumPlan, PivotRanking, TransferRecommendation};
use crate::similarity::{SimilarityMatrix, SimilarityStats};
use crate::taxonomy::{hex, LanguageRegistry};

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"];

/// Colour for cluster `c`; cycles after ten clusters.
pub fn palette(c: usize) -> &'static str {
    PALETTE[c % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_artifact(path: &Path, contents: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty output path")));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// White (0) to deep red (1).
fn heat(v: f64) -> String {
    let t = v.clamp(0.0, 1.0);
    let g = (255.0 * (1.0 - t)).round() as u8;
    let r = (255.0 - 80.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{g:02x}")
}

/// Heatmap with 2-decimal cell labels. The reference language (if any) is
/// moved to the last row and column; the bottom row holds each programming
/// language's mean similarity to the other programming languages.
pub fn heatmap_svg(matrix: &SimilarityMatrix, registry: &LanguageRegistry, manifest_digest: Option<&str>) -> String {
    let n = matrix.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| !registry.is_reference(&matrix.languages()[i])).collect();
    let prog = order.clone();
    order.extend((0..n).filter(|&i| registry.is_reference(&matrix.languages()[i])));

    let cell = 44.0;
    let left = 12.0 + 7.0 * matrix.languages().iter().map(|l| l.chars().count()).max().unwrap_or(4).max(4) as f64;
    let top = left;
    let width = left + cell * n as f64 + 10.0;
    let height = top + cell * (n + 1) as f64 + 10.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif" font-size="11">"#
    );
    if let Some(d) = manifest_digest {
        let _ = writeln!(out, "<!-- manifest: {d} -->");
    }
    for (c, &j) in order.iter().enumerate() {
        let x = left + cell * (c as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text class="col-label" x="{x}" y="{}" transform="rotate(-60 {x} {})" text-anchor="start">{}</text>"#,
            top - 6.0,
            top - 6.0,
            esc(&matrix.languages()[j])
        );
    }
    for (r, &i) in order.iter().enumerate() {
        let y = top + cell * r as f64;
        let _ = writeln!(
            out,
            r#"<text class="row-label" x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell / 2.0 + 4.0,
            esc(&matrix.languages()[i])
        );
        for (c, &j) in order.iter().enumerate() {
            let v = matrix.value(i, j);
            let x = left + cell * c as f64;
            let ink = if v > 0.6 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                out,
                r#"<rect class="cell" data-row="{}" data-col="{}" data-value="{v}" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}"/>"#,
                esc(&matrix.languages()[i]),
                esc(&matrix.languages()[j]),
                heat(v)
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{v:.2}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    let y = top + cell * n as f64;
    let _ = writeln!(
        out,
        r#"<text class="row-label" x="{}" y="{}" text-anchor="end" font-weight="bold">Mean</text>"#,
        left - 6.0,
        y + cell / 2.0 + 4.0
    );
    for (c, &j) in order.iter().enumerate() {
        if !prog.contains(&j) || prog.len() < 2 {
            continue;
        }
        let v = prog.iter().filter(|&&i| i != j).map(|&i| matrix.value(i, j)).sum::<f64>() / (prog.len() - 1) as f64;
        let x = left + cell * c as f64;
        let _ = writeln!(
            out,
            r##"<rect class="mean" data-col="{}" data-value="{v}" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="#333333"/>"##,
            esc(&matrix.languages()[j]),
            heat(v)
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{v:.2}</text>"#, x + cell / 2.0, y + cell / 2.0 + 4.0);
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit_heatmap(
    matrix: &SimilarityMatrix,
    registry: &LanguageRegistry,
    path: &Path,
    manifest_digest: Option<&str>,
) -> Result<()> {
    write_artifact(path, &heatmap_svg(matrix, registry, manifest_digest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DendrogramFormat {
    TreeText,
    Newick,
    Dot,
    Svg,
}

impl DendrogramFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DendrogramFormat::TreeText => "tree",
            DendrogramFormat::Newick => "nwk",
            DendrogramFormat::Dot => "dot",
            DendrogramFormat::Svg => "svg",
        }
    }
}

impl std::str::FromStr for DendrogramFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree-text" | "tree" => Ok(DendrogramFormat::TreeText),
            "newick" | "nwk" => Ok(DendrogramFormat::Newick),
            "dot" => Ok(DendrogramFormat::Dot),
            "svg" => Ok(DendrogramFormat::Svg),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Tree drawing with merge heights on the vertical axis. Every subtree lying
/// entirely inside one cluster of `partition` is drawn in a
/// `<g class="cluster" data-cluster="c">` group with that cluster's colour.
pub fn dendrogram_svg(d: &Dendrogram, partition: Option<&Partition>, manifest_digest: Option<&str>) -> String {
    let n = d.len();
    let order = d.leaf_order();
    let step = 36.0;
    let (left, top, plot_h) = (60.0, 20.0, 300.0);
    let label_h = 12.0 + 7.0 * d.leaves().iter().map(|l| l.chars().count()).max().unwrap_or(4) as f64;
    let width = left + step * n as f64 + 20.0;
    let height = top + plot_h + label_h;
    let max_h = d.height(d.root()).max(f64::MIN_POSITIVE);
    let y = |h: f64| top + plot_h * (1.0 - h / max_h);

    let mut x = vec![0.0f64; 2 * n - 1];
    for (pos, &leaf) in order.iter().enumerate() {
        x[leaf] = left + step * (pos as f64 + 0.5);
    }
    // Cluster of each node when all its leaves share one.
    let mut cluster: Vec<Option<usize>> = (0..n).map(|i| partition.map(|p| p.labels[i])).collect();
    for (s, m) in d.merges().iter().enumerate() {
        x[n + s] = (x[m.left] + x[m.right]) / 2.0;
        cluster.push(match (cluster[m.left], cluster[m.right]) {
            (Some(a), Some(b)) if a == b => Some(a),
            _ => None,
        });
    }

    let k = partition.map_or(0, Partition::k);
    let mut groups: Vec<String> = vec![String::new(); k + 1];
    for (s, m) in d.merges().iter().enumerate() {
        let id = n + s;
        let g = cluster[id].unwrap_or(k);
        let _ = writeln!(
            groups[g],
            r#"<path class="link" data-node="{id}" data-height="{}" d="M{} {} V{} H{} V{}" fill="none"/>"#,
            m.height,
            x[m.left],
            y(d.height(m.left)),
            y(m.height),
            x[m.right],
            y(d.height(m.right))
        );
    }
    for &leaf in &order {
        let g = cluster[leaf].unwrap_or(k);
        let (lx, ly) = (x[leaf], top + plot_h + 8.0);
        let _ = writeln!(
            groups[g],
            r#"<text class="leaf" x="{lx}" y="{ly}" transform="rotate(60 {lx} {ly})" stroke="none">{}</text>"#,
            esc(&d.leaves()[leaf])
        );
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif" font-size="11">"#
    );
    if let Some(dg) = manifest_digest {
        let _ = writeln!(out, "<!-- manifest: {dg} -->");
    }
    let _ = writeln!(out, r##"<g class="axis" stroke="#333333" fill="#333333">"##);
    let _ = writeln!(out, r#"<line x1="{}" y1="{top}" x2="{}" y2="{}"/>"#, left - 10.0, left - 10.0, top + plot_h);
    for t in 0..=4 {
        let h = max_h * t as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" stroke="none">{h:.3}</text>"#,
            left - 14.0,
            y(h) + 4.0
        );
    }
    out.push_str("</g>\n");
    for (c, body) in groups.iter().enumerate().take(k) {
        let col = palette(c);
        let _ = write!(out, "<g class=\"cluster\" data-cluster=\"{c}\" stroke=\"{col}\" fill=\"{col}\" stroke-width=\"2\">\n{body}</g>\n");
    }
    let _ = write!(out, "<g class=\"trunk\" stroke=\"#555555\" fill=\"#000000\" stroke-width=\"1.5\">\n{}</g>\n", groups[k]);
    out.push_str("</svg>\n");
    out
}

pub fn render_dendrogram(
    d: &Dendrogram,
    partition: Option<&Partition>,
    format: DendrogramFormat,
    manifest_digest: Option<&str>,
) -> String {
    match format {
        DendrogramFormat::TreeText => d.to_tree_text(manifest_digest),
        DendrogramFormat::Newick => d.to_newick(manifest_digest),
        DendrogramFormat::Dot => d.to_dot(partition.map(|p| p.labels.as_slice()), manifest_digest),
        DendrogramFormat::Svg => dendrogram_svg(d, partition, manifest_digest),
    }
}

pub fn emit_dendrogram(
    d: &Dendrogram,
    partition: Option<&Partition>,
    path: &Path,
    format: DendrogramFormat,
    manifest_digest: Option<&str>,
) -> Result<()> {
    write_artifact(path, &render_dendrogram(d, partition, format, manifest_digest))
}

/// Inputs and settings identifying a run. Timestamps are excluded from
/// [`RunManifest::digest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub registry_digest: String,
    pub corpus_digest: Option<String>,
    pub provider: Option<ProviderIdentity>,
    pub matrix_digest: Option<String>,
    pub clustering: Option<ClusterOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

impl RunManifest {
    pub fn new(registry: &LanguageRegistry) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            registry_digest: registry.digest(),
            corpus_digest: None,
            provider: None,
            matrix_digest: None,
            clustering: None,
            started_at: None,
            finished_at: None,
        }
    }

    pub fn digest(&self) -> String {
        let bare = RunManifest { started_at: None, finished_at: None, ..self.clone() };
        hex(&Sha256::digest(serde_json::to_vec(&bare).expect("manifest serializes")))
    }

    /// Pretty JSON including the digest.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        v["digest"] = serde_json::Value::String(self.digest());
        serde_json::to_string_pretty(&v).expect("value serializes") + "\n"
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlanSet {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub transfer: Vec<TransferRecommendation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub curriculum: Vec<CurriculumPlan>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pivots: Vec<PivotRanking>,
}

impl PlanSet {
    pub fn is_empty(&self) -> bool {
        self.transfer.is_empty() && self.curriculum.is_empty() && self.pivots.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub manifest_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusManifest>,
    pub similarity: SimilarityStats,
    pub clustering: ClusteringResult,
    /// Agreement with expected family labels, when supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_ari: Option<f64>,
    #[serde(skip_serializing_if = "PlanSet::is_empty")]
    pub plans: PlanSet,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Language family report\n\n");
        let _ = writeln!(out, "Manifest: `{}`\n", self.manifest_digest);
        if let Some(c) = &self.corpus {
            let _ = writeln!(out, "## Corpus\n");
            let _ = writeln!(out, "- samples: {} ({} programming)", c.total, c.programming_total);
            let _ = writeln!(out, "- duplicate rate: {:.4}", c.duplicate_rate);
            let _ = writeln!(out, "- cells over the duplicate threshold: {}\n", c.flagged_cells.len());
        }
        let s = &self.similarity;
        let _ = writeln!(out, "## Similarity\n");
        let _ = writeln!(out, "Centroid language: **{}**\n", s.centroid_language);
        let _ = writeln!(out, "| language | mean similarity |\n|---|---|");
        let mut means = s.mean_similarity.clone();
        means.sort_by(|a, b| b.value.total_cmp(&a.value));
        for v in &means {
            let _ = writeln!(out, "| {} | {:.4} |", v.language, v.value);
        }
        let _ = writeln!(out, "\nOverall pairwise mean {:.4} (σ {:.4}).", s.overall.mean, s.overall.std_dev);
        if let Some(r) = &s.reference {
            let _ = writeln!(out, "Mean similarity to {}: {:.4}.", r.reference, r.mean);
        }
        let c = &self.clustering;
        let _ = writeln!(out, "\n## Families\n");
        let _ = write!(out, "k = {}", c.k);
        if let Some(sil) = &c.silhouette {
            let _ = write!(out, ", silhouette {:.4}", sil.overall);
        }
        if let Some(ari) = self.expected_ari {
            let _ = write!(out, ", ARI vs expected {ari:.4}");
        }
        out.push_str("\n\n");
        for (i, members) in c.per_cluster.iter().enumerate() {
            let _ = writeln!(out, "{}. {}", i + 1, members.join(", "));
        }
        if !self.plans.is_empty() {
            out.push_str("\n## Plans\n");
            for t in &self.plans.transfer {
                let _ = write!(out, "\n```text\n{}```\n", t.to_table());
            }
            for p in &self.plans.curriculum {
                let _ = write!(out, "\n```text\n{}```\n", p.to_table());
            }
            for p in &self.plans.pivots {
                let _ = write!(out, "\n```text\n{}```\n", p.to_table());
            }
        }
        out
    }
}
