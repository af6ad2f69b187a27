use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{recall_by_hop, HopBucketReport, OverlapMatrix};
use crate::baselines::{train_id_last, BprHyper, FusionSpec};
use crate::corpus::{EmbeddingMatrix, SplitDataset};
use crate::error::{Error, Result, StageExt};
use crate::eval::{run_model, IdLast, IdSem, MetricsTable, PredictionSet, Recommender, SemNn, TghModel};
use crate::graph::{graph_stats, GraphStats, TransitionGraph};
use crate::table::{percent, Table};
use crate::tgh::{Tgh, TghConfig};

pub const HISTORY_SUBSTITUTION_NOTE: &str = "History dependence is probed without full sequence models: \
the TGH-1 vs TGH-2 gap stands in for last-item vs two-item context, and any external prediction \
files are compared against TGH-1 by recall delta and correct-set overlap.";

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub ks: Vec<usize>,
    pub coverage_ks: Vec<usize>,
    pub overlap_k: usize,
    pub max_hop: usize,
    /// Training ID-Last dominates audit runtime; off skips ID-Last and ID+Sem.
    pub train_id_last: bool,
    pub bpr: BprHyper,
    pub fusion: FusionSpec,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            ks: vec![1, 5, 10],
            coverage_ks: vec![1, 2, 3],
            overlap_k: 10,
            max_hop: 3,
            train_id_last: true,
            bpr: BprHyper::default(),
            fusion: FusionSpec::default(),
        }
    }
}

impl AuditConfig {
    pub fn k_max(&self) -> usize {
        self.ks.iter().copied().chain([self.overlap_k]).max().unwrap_or(10)
    }
}

pub struct AuditInputs<'a> {
    pub dataset: String,
    pub split: &'a SplitDataset,
    pub graph: &'a TransitionGraph,
    /// Row-normalized, aligned to the split vocabulary.
    pub embeddings: &'a EmbeddingMatrix<f64>,
    pub external: Vec<PredictionSet>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// SHA-256 of each input file, keyed by role.
    pub input_sha256: std::collections::BTreeMap<String, String>,
    /// Effective configuration of the run.
    pub config: serde_json::Value,
    pub generated_at_unix: u64,
}

impl Provenance {
    pub fn new(config: serde_json::Value) -> Self {
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_sha256: Default::default(),
            config,
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowBranching {
    pub avg_out_degree: f64,
    /// Percent of test targets among the top-k successors of the anchor.
    pub coverage: std::collections::BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSmoothness {
    pub k: usize,
    pub semnn_recall: f64,
    pub semnn_ndcg: f64,
    /// TGH-1 minus Sem-NN recall at `k`.
    pub tgh1_gain_over_semnn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalComparison {
    pub model: String,
    pub recall: f64,
    pub recall_minus_tgh1: f64,
    pub jaccard_with_tgh1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortHistory {
    pub k: usize,
    pub tgh1_recall: f64,
    pub tgh2_recall: f64,
    pub tgh2_minus_tgh1: f64,
    pub external: Vec<ExternalComparison>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutAxes {
    pub low_branching: LowBranching,
    pub feature_smoothness: FeatureSmoothness,
    pub short_history: ShortHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dataset: String,
    pub graph_stats: GraphStats,
    pub metrics: MetricsTable,
    pub overlap: OverlapMatrix,
    pub hop_buckets: HopBucketReport,
    pub shortcut_axes: ShortcutAxes,
    pub provenance: Provenance,
}

fn recall_of(m: &MetricsTable, model: &str, k: usize) -> f64 {
    m.get(model, k).map_or(0.0, |r| r.recall)
}

/// Runs every probe on the inputs and assembles the report.
pub fn audit(inputs: AuditInputs<'_>, cfg: &AuditConfig) -> Result<AuditReport> {
    let AuditInputs {
        dataset,
        split,
        graph,
        embeddings: emb,
        external,
        provenance,
    } = inputs;
    if cfg.ks.is_empty() {
        return Err(Error::Config("audit needs at least one cutoff".into()));
    }
    let k_max = cfg.k_max();
    let k_ref = *cfg.ks.iter().max().unwrap();
    let stats = graph_stats(graph, split, &cfg.coverage_ks);

    let mut preds = Vec::new();
    for name in ["tgh1", "tgh2"] {
        let tgh = Tgh::new(TghConfig::preset(name).expect("preset"), graph, emb).stage("tgh")?;
        let m = TghModel { name: name.into(), tgh };
        preds.push(run_model(&m, split, k_max).stage("tgh")?);
    }
    preds.push(run_model(&SemNn { emb }, split, k_max).stage("semnn")?);
    if cfg.train_id_last {
        let model = train_id_last::<f64>(split, &cfg.bpr).stage("idlast training")?;
        let probes: [&dyn Recommender; 2] = [
            &IdLast { model: &model },
            &IdSem { model: &model, emb, fusion: cfg.fusion },
        ];
        for p in probes {
            preds.push(run_model(p, split, k_max).stage("idlast")?);
        }
    }
    let n_internal = preds.len();
    let mut external = external;
    for e in &mut external {
        if e.k_max < k_max {
            log::warn!("{}: lists hold at most {} items, scored as top-{k_max}", e.model, e.k_max);
            e.k_max = k_max;
        }
        if preds.iter().any(|p: &PredictionSet| p.model == e.model) {
            return Err(Error::Config(format!(
                "external prediction set `{}` shares its name with a probe; rename the file",
                e.model
            )));
        }
    }
    preds.extend(external);

    let metrics = MetricsTable::merge(
        preds
            .iter()
            .map(|p| MetricsTable::evaluate(p, split, &cfg.ks))
            .collect::<Result<Vec<_>>>()
            .stage("metrics")?,
    );
    let overlap = OverlapMatrix::compute(&preds, split, cfg.overlap_k).stage("overlap")?;
    let hop_buckets = recall_by_hop(graph, &preds, split, cfg.overlap_k, cfg.max_hop).stage("hop buckets")?;

    let tgh1 = recall_of(&metrics, "tgh1", k_ref);
    let semnn = metrics.get("semnn", k_ref);
    let external = preds[n_internal..]
        .iter()
        .map(|p| {
            let recall = recall_of(&metrics, &p.model, k_ref);
            ExternalComparison {
                model: p.model.clone(),
                recall,
                recall_minus_tgh1: recall - tgh1,
                jaccard_with_tgh1: overlap.get(&p.model, "tgh1").expect("tgh1 is always probed"),
            }
        })
        .collect();
    let shortcut_axes = ShortcutAxes {
        low_branching: LowBranching {
            avg_out_degree: stats.avg_out_degree,
            coverage: stats.coverage.clone(),
        },
        feature_smoothness: FeatureSmoothness {
            k: k_ref,
            semnn_recall: semnn.map_or(0.0, |r| r.recall),
            semnn_ndcg: semnn.map_or(0.0, |r| r.ndcg),
            tgh1_gain_over_semnn: tgh1 - semnn.map_or(0.0, |r| r.recall),
        },
        short_history: ShortHistory {
            k: k_ref,
            tgh1_recall: tgh1,
            tgh2_recall: recall_of(&metrics, "tgh2", k_ref),
            tgh2_minus_tgh1: recall_of(&metrics, "tgh2", k_ref) - tgh1,
            external,
            note: HISTORY_SUBSTITUTION_NOTE.into(),
        },
    };
    let report = AuditReport {
        dataset,
        graph_stats: stats,
        metrics,
        overlap,
        hop_buckets,
        shortcut_axes,
        provenance,
    };
    report.check_finite()?;
    Ok(report)
}

impl AuditReport {
    fn check_finite(&self) -> Result<()> {
        let value = serde_json::to_value(self)?;
        fn walk(v: &serde_json::Value, path: &str) -> Result<()> {
            match v {
                // serde_json writes non-finite floats as null
                serde_json::Value::Null => Err(Error::Config(format!("non-finite value at {path}"))),
                serde_json::Value::Array(a) => a.iter().enumerate().try_for_each(|(i, x)| walk(x, &format!("{path}[{i}]"))),
                serde_json::Value::Object(o) => o.iter().try_for_each(|(k, x)| walk(x, &format!("{path}.{k}"))),
                _ => Ok(()),
            }
        }
        walk(&value["graph_stats"], "graph_stats")?;
        walk(&value["metrics"], "metrics")?;
        walk(&value["overlap"], "overlap")?;
        walk(&value["hop_buckets"], "hop_buckets")?;
        walk(&value["shortcut_axes"], "shortcut_axes")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn render_markdown(&self) -> String {
        let mut out = format!("# Audit: {}\n\n", self.dataset);
        out += "## Transition graph\n\n";
        out += &self.graph_stats.table(&self.dataset).render_markdown();
        out += &format!(
            "\nOut-degree: {}. Edge weight: {}.\n\n",
            self.graph_stats.out_degree_basis, self.graph_stats.edge_weight_basis
        );
        out += "## Probe metrics (percent)\n\n";
        out += &if self.metrics.rows.is_empty() {
            "No models evaluated.\n".to_string()
        } else {
            self.metrics.table().render_markdown()
        };
        out += &format!("\n## Correct-set overlap at {}\n\n", self.overlap.k);
        out += &self.overlap.table().render_markdown();
        out += &format!("\n## Recall@{} by hop distance of the target\n\n", self.hop_buckets.k);
        out += &self.hop_buckets.table().render_markdown();

        let ax = &self.shortcut_axes;
        out += "\n## Shortcut axes\n\n";
        let mut t = Table::new(["Axis", "Measure", "Value"]);
        t.push(["low branching", "avg out-degree", &format!("{:.2}", ax.low_branching.avg_out_degree)]);
        for (k, v) in &ax.low_branching.coverage {
            t.push(["low branching".to_string(), format!("Cov@{k}"), format!("{v:.2}")]);
        }
        let fs = &ax.feature_smoothness;
        t.push(["feature smoothness".to_string(), format!("Sem-NN R@{}", fs.k), percent(fs.semnn_recall)]);
        t.push(["feature smoothness".to_string(), format!("Sem-NN N@{}", fs.k), percent(fs.semnn_ndcg)]);
        t.push(["feature smoothness".to_string(), "TGH-1 minus Sem-NN".into(), percent(fs.tgh1_gain_over_semnn)]);
        let sh = &ax.short_history;
        t.push(["short history".to_string(), format!("TGH-1 R@{}", sh.k), percent(sh.tgh1_recall)]);
        t.push(["short history".to_string(), format!("TGH-2 R@{}", sh.k), percent(sh.tgh2_recall)]);
        t.push(["short history".to_string(), "TGH-2 minus TGH-1".into(), percent(sh.tgh2_minus_tgh1)]);
        for e in &sh.external {
            t.push(["short history".to_string(), format!("{} minus TGH-1", e.model), percent(e.recall_minus_tgh1)]);
            t.push(["short history".to_string(), format!("{} Jaccard with TGH-1", e.model), format!("{:.3}", e.jaccard_with_tgh1)]);
        }
        out += &t.render_markdown();
        out += &format!("\n{}\n", sh.note);

        let p = &self.provenance;
        out += "\n## Provenance\n\n";
        out += &format!("- tool version: {}\n", p.tool_version);
        for (role, h) in &p.input_sha256 {
            out += &format!("- {role} sha256: `{h}`\n");
        }
        out += &format!("- generated at (unix): {}\n", p.generated_at_unix);
        out
    }

    /// Writes `audit.json`, `audit.md`, `overlap.json` and `hop_buckets.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let write = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(p, e))
        };
        write("audit.json", self.to_json()?)?;
        write("audit.md", self.render_markdown())?;
        write("overlap.json", serde_json::to_string_pretty(&self.overlap)? + "\n")?;
        write("hop_buckets.json", serde_json::to_string_pretty(&self.hop_buckets)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_leave_one_out, SequenceDataset};

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    fn toy() -> (SplitDataset, TransitionGraph, EmbeddingMatrix<f64>) {
        let split = split_leave_one_out(&SequenceDataset::from_id_sequences([
            ("u1", vec!["a", "b", "c", "d", "e"]),
            ("u2", vec!["b", "c", "d", "e"]),
            ("u3", vec!["a", "c", "d", "b"]),
            ("u4", vec!["e", "d", "c", "b", "a"]),
            ("u5", vec!["c", "d", "e", "a"]),
        ]))
        .unwrap();
        let g = TransitionGraph::build(&split);
        let n = split.num_items();
        let data = (0..n)
            .flat_map(|i| {
                let t = i as f64;
                [t.cos(), t.sin(), 0.5]
            })
            .collect();
        (split, g, EmbeddingMatrix::from_rows(3, data).normalize_rows())
    }

    #[test]
    fn toy_report_has_every_section() {
        let (split, g, emb) = toy();
        let cfg = AuditConfig {
            bpr: BprHyper { dim: 4, epochs: 3, ..BprHyper::default() },
            ..AuditConfig::default()
        };
        let ext = PredictionSet {
            model: "copy".into(),
            k_max: 2,
            lists: vec![vec![0, 1]; 5],
        };
        let inputs = AuditInputs {
            dataset: "toy".into(),
            split: &split,
            graph: &g,
            embeddings: &emb,
            external: vec![ext],
            provenance: Provenance::new(serde_json::json!({"k": 10})),
        };
        let r = audit(inputs, &cfg).unwrap();
        assert_eq!(r.overlap.models, vec!["tgh1", "tgh2", "semnn", "idlast", "idsem", "copy"]);
        assert_eq!(r.metrics.rows.len(), 18);
        assert_eq!(r.shortcut_axes.short_history.external.len(), 1);
        assert_eq!(r.overlap.get("copy", "copy"), Some(1.0));
        assert_eq!(r.hop_buckets.buckets.iter().map(|b| b.num_users).sum::<usize>(), 5);

        let json = r.to_json().unwrap();
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["graph_stats", "metrics", "overlap", "hop_buckets", "shortcut_axes", "provenance"] {
            assert!(back.get(key).is_some(), "{key}");
        }
        let md = r.render_markdown();
        assert!(md.contains("## Shortcut axes") && md.contains(HISTORY_SUBSTITUTION_NOTE));

        let dir = tempfile::tempdir().unwrap();
        r.write(dir.path()).unwrap();
        assert!(dir.path().join("audit.md").exists());
    }

    #[test]
    fn external_names_must_not_shadow_probes() {
        let (split, g, emb) = toy();
        let ext = PredictionSet {
            model: "semnn".into(),
            k_max: 10,
            lists: vec![vec![]; 5],
        };
        let inputs = AuditInputs {
            dataset: "toy".into(),
            split: &split,
            graph: &g,
            embeddings: &emb,
            external: vec![ext],
            provenance: Provenance::new(serde_json::Value::Null),
        };
        let cfg = AuditConfig {
            train_id_last: false,
            ..AuditConfig::default()
        };
        assert!(matches!(audit(inputs, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn unnormalized_embeddings_fail_in_tgh_stage() {
        let (split, g, _) = toy();
        let raw = EmbeddingMatrix::from_rows(1, vec![2.0; split.num_items()]);
        let inputs = AuditInputs {
            dataset: "toy".into(),
            split: &split,
            graph: &g,
            embeddings: &raw,
            external: vec![],
            provenance: Provenance::new(serde_json::Value::Null),
        };
        let err = audit(inputs, &AuditConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "tgh", .. }), "{err}");
    }
}
