use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ModelSpec, RunConfig};
use crate::baselines::{train_id_last, IdLastModel};
use crate::corpus::{
    align_to_vocab, build_sequences, load_interactions, read_embedding_file, split_leave_one_out,
    write_binary, write_text, AlignOptions, EmbeddingFormat, EmbeddingMatrix, RawEmbeddings, SplitDataset,
};
use crate::diagnostics::{audit, sha256_hex, AuditInputs, Provenance};
use crate::error::{Error, Result, StageExt};
use crate::eval::{
    emit_report, read_predictions, run_model, write_predictions, CountLast, IdLast, IdSem, MetricsTable,
    PredictionSet, Recommender, SemNn, TghModel,
};
use crate::graph::{graph_stats, write_graph, TransitionGraph};
use crate::tgh::{Tgh, TghConfig};

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir()?.to_path_buf();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join("config.json"), cfg.to_json()?)?;
    Ok(dir)
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn load_split(cfg: &RunConfig) -> Result<SplitDataset> {
    let path = cfg.interactions()?;
    let log = load_interactions(path, &cfg.input.to_log_format()?).stage("ingest")?;
    if log.skipped_rows > 0 {
        log::warn!("{}: skipped {} malformed rows", path.display(), log.skipped_rows);
    }
    let ds = build_sequences(&log, &cfg.preprocess).stage("preprocess")?;
    let split = split_leave_one_out(&ds).stage("split")?;
    log::info!("{} users, {} items", split.num_users(), split.num_items());
    Ok(split)
}

fn load_aligned(cfg: &RunConfig, split: &SplitDataset) -> Result<EmbeddingMatrix<f64>> {
    let opts = AlignOptions {
        zero_fill_missing: cfg.zero_fill_missing,
    };
    let raw = read_embedding_file(cfg.embeddings()?, None).stage("embeddings")?;
    let (m, report) = align_to_vocab::<f64>(&raw, &split.vocab, opts).stage("embeddings")?;
    if report.ignored > 0 {
        log::info!("{} embedding rows not in the catalog", report.ignored);
    }
    if !report.zero_filled.is_empty() {
        log::warn!("{} catalog items given zero embeddings", report.zero_filled.len());
    }
    Ok(m.normalize_rows())
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<()> {
    let out = prepare_out(cfg)?;
    let split = load_split(cfg)?;
    let g = TransitionGraph::build(&split);
    let stats = graph_stats(&g, &split, &cfg.coverage_ks);
    let name = cfg.dataset_name();
    let text = stats.render_text(&name);
    write_file(&out.join("graph_stats.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
    write_file(&out.join("graph_stats.txt"), &text)?;
    write_graph(out.join("graph.srtg"), &g).stage("graph")?;
    print!("{text}");
    Ok(())
}

fn run_models(
    cfg: &RunConfig,
    split: &SplitDataset,
    specs: &[ModelSpec],
) -> Result<Vec<PredictionSet>> {
    let graph = TransitionGraph::build(split);
    let emb = if specs.iter().any(ModelSpec::needs_embeddings) {
        Some(load_aligned(cfg, split)?)
    } else {
        None
    };
    let id_last: Option<IdLastModel<f64>> = if specs.iter().any(ModelSpec::needs_id_last) {
        Some(train_id_last(split, &cfg.bpr).stage("idlast training")?)
    } else {
        None
    };
    let k_max = *cfg.ks.iter().max().expect("validated");
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let p = match spec {
            ModelSpec::External(path) => read_predictions(path, split, None).stage("external predictions")?,
            _ => {
                let emb = emb.as_ref();
                let model: Box<dyn Recommender> = match spec {
                    ModelSpec::Tgh(name) => Box::new(TghModel {
                        name: name.clone(),
                        tgh: Tgh::new(TghConfig::preset(name).expect("preset"), &graph, emb.unwrap())?,
                    }),
                    ModelSpec::SemNn => Box::new(SemNn { emb: emb.unwrap() }),
                    ModelSpec::IdLast => Box::new(IdLast {
                        model: id_last.as_ref().unwrap(),
                    }),
                    ModelSpec::IdSem => Box::new(IdSem {
                        model: id_last.as_ref().unwrap(),
                        emb: emb.unwrap(),
                        fusion: cfg.fusion,
                    }),
                    ModelSpec::CountLast => Box::new(CountLast { graph: &graph }),
                    ModelSpec::External(_) => unreachable!(),
                };
                run_model(model.as_ref(), split, k_max).stage("eval")?
            }
        };
        out.push(p);
    }
    Ok(out)
}

fn metrics_for(p: &PredictionSet, split: &SplitDataset, ks: &[usize]) -> Result<MetricsTable> {
    let k_max = *ks.iter().max().expect("validated");
    if p.k_max >= k_max {
        return MetricsTable::evaluate(p, split, ks);
    }
    // lists shorter than the cutoff are legal; they just cannot hit below their length
    log::warn!("{}: lists hold at most {} items, scored as top-{k_max}", p.model, p.k_max);
    let lifted = PredictionSet {
        k_max,
        ..p.clone()
    };
    MetricsTable::evaluate(&lifted, split, ks)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let specs = cfg.model_specs()?;
    let out = prepare_out(cfg)?;
    let split = load_split(cfg)?;
    let preds = run_models(cfg, &split, &specs)?;
    for (i, p) in preds.iter().enumerate() {
        if preds[..i].iter().any(|q| q.model == p.model) {
            return Err(Error::Config(format!("two models are named `{}`; rename the prediction file", p.model)));
        }
    }
    let pred_dir = out.join("predictions");
    fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
    let mut tables = Vec::new();
    for (spec, p) in specs.iter().zip(&preds) {
        if !matches!(spec, ModelSpec::External(_)) {
            write_predictions(pred_dir.join(format!("{}.tsv", p.model)), p, &split)?;
        }
        tables.push(metrics_for(p, &split, &cfg.ks).stage("metrics")?);
    }
    let merged = emit_report(&tables, &out).stage("report")?;
    print!("{}", merged.render_text());
    Ok(())
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<()> {
    let out = prepare_out(cfg)?;
    let split = load_split(cfg)?;
    let graph = TransitionGraph::build(&split);
    let emb = load_aligned(cfg, &split)?;
    let mut external_paths: Vec<PathBuf> = cfg.external.clone();
    for spec in cfg.model_specs()? {
        if let ModelSpec::External(p) = spec {
            if !external_paths.contains(&p) {
                external_paths.push(p);
            }
        }
    }
    let external = external_paths
        .iter()
        .map(|p| read_predictions(p, &split, None))
        .collect::<Result<Vec<_>>>()
        .stage("external predictions")?;

    let mut provenance = Provenance::new(serde_json::to_value(cfg)?);
    let mut hashes = BTreeMap::new();
    hashes.insert("interactions".to_string(), hash_file(cfg.interactions()?)?);
    hashes.insert("embeddings".to_string(), hash_file(cfg.embeddings()?)?);
    for (p, set) in external_paths.iter().zip(&external) {
        hashes.insert(format!("external:{}", set.model), hash_file(p)?);
    }
    provenance.input_sha256 = hashes;

    let report = audit(
        AuditInputs {
            dataset: cfg.dataset_name(),
            split: &split,
            graph: &graph,
            embeddings: &emb,
            external,
            provenance,
        },
        &cfg.audit_config(),
    )
    .stage("audit")?;
    report.write(&out).stage("report")?;
    print!("{}", report.render_markdown());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingTarget {
    Text,
    Binary,
}

fn normalize_raw(raw: &mut RawEmbeddings) {
    let dim = raw.dim;
    for row in raw.values.chunks_mut(dim) {
        let n = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v = (f64::from(*v) / n) as f32);
        }
    }
}

pub fn cmd_convert_embeddings(
    input: &Path,
    output: &Path,
    to: Option<EmbeddingTarget>,
    normalize: bool,
    sep: Option<char>,
) -> Result<()> {
    let from = EmbeddingFormat::sniff(input)?;
    let mut raw = read_embedding_file(input, sep).stage("read embeddings")?;
    if normalize {
        normalize_raw(&mut raw);
    }
    let to = to.unwrap_or(match from {
        EmbeddingFormat::Text => EmbeddingTarget::Binary,
        EmbeddingFormat::Binary => EmbeddingTarget::Text,
    });
    match to {
        EmbeddingTarget::Text => write_text(output, &raw, sep.unwrap_or(' ')),
        EmbeddingTarget::Binary => write_binary(output, &raw),
    }
    .stage("write embeddings")?;
    log::info!("{} vectors of dim {} written to {}", raw.len(), raw.dim, output.display());
    Ok(())
}

/// Writes `train.tsv` (`user<TAB>items`), `valid.tsv` and `test.tsv`
/// (`user<TAB>context<TAB>target`) plus `items.txt`.
pub fn cmd_split(cfg: &RunConfig) -> Result<()> {
    let out = prepare_out(cfg)?;
    let split = load_split(cfg)?;
    let ids = |s: &[u32]| s.iter().map(|&i| split.vocab.decode(i)).collect::<Vec<_>>().join(",");
    let (mut train, mut valid, mut test) = (String::new(), String::new(), String::new());
    for u in &split.users {
        let prefix = u.train_prefix();
        train += &format!("{}\t{}\n", u.user_id, ids(prefix));
        valid += &format!("{}\t{}\t{}\n", u.user_id, ids(prefix), split.vocab.decode(u.valid_target()));
        test += &format!("{}\t{}\t{}\n", u.user_id, ids(u.test_context()), split.vocab.decode(u.test_target()));
    }
    write_file(&out.join("train.tsv"), train)?;
    write_file(&out.join("valid.tsv"), valid)?;
    write_file(&out.join("test.tsv"), test)?;
    write_file(&out.join("items.txt"), split.vocab.ids().join("\n") + "\n")?;
    println!("{} users, {} items written to {}", split.num_users(), split.num_items(), out.display());
    Ok(())
}
