use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::agreement::HumanSummary;
use super::dataset::EvalItem;
use super::rouge::{rouge_l, RougeScore};
use super::EvalError;
use crate::context_engine::{answer, ContextBundle, CorpusIndex, RetrievalConfig, RetrievalMode, TaskStyle};
use crate::llm_gateway::Gateway;

/// k values explored by a default sweep.
pub const DEFAULT_SWEEP: std::ops::RangeInclusive<usize> = 1..=12;

const UNTAGGED: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub dataset: String,
    pub task: TaskStyle,
    pub model: String,
    pub mode: RetrievalMode,
    /// Exemplars requested; 0 for zero-shot.
    pub k: usize,
    pub rouge_l_precision: f64,
    pub rouge_l_recall: f64,
    pub rouge_l_f1: f64,
    pub n_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub id: String,
    pub dataset: String,
    pub mode: RetrievalMode,
    pub k: usize,
    pub answer: String,
    pub reference: String,
    pub rouge: RougeScore,
    pub bundle: ContextBundle,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human: Option<HumanSummary>,
}

const TSV_COLUMNS: [&str; 9] = [
    "dataset",
    "task",
    "model",
    "mode",
    "k",
    "rouge_l_precision",
    "rouge_l_recall",
    "rouge_l_f1",
    "n_items",
];

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        let mut out = TSV_COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            let task = match r.task {
                TaskStyle::Description => "description",
                TaskStyle::Qa => "qa",
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                r.dataset,
                task,
                r.model,
                r.mode.label(),
                r.k,
                r.rouge_l_precision,
                r.rouge_l_recall,
                r.rouge_l_f1,
                r.n_items
            ));
        }
        if let Some(h) = &self.human {
            let alpha = h.alpha.as_ref().map_or("NA".to_string(), |a| format!("{:.6}", a.alpha));
            out.push_str(&format!("# human alpha={alpha}"));
            for (cond, m) in &h.mean_rating {
                out.push_str(&format!(" mean_rating[{cond}]={m:.4}"));
            }
            if let Some(w) = &h.winloss {
                out.push_str(&format!(" win={:.4} lose={:.4} tie={:.4}", w.win, w.lose, w.tie));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }
}

/// Per-run settings that are not part of the retrieval config.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Overrides the task default k.
    pub k: Option<usize>,
    /// Model tag for report rows; defaults to the gateway's model.
    pub model: Option<String>,
    /// Tag for items that carry no dataset of their own.
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalRun {
    pub report: EvalReport,
    /// Sorted by dataset, task, then id.
    pub items: Vec<ItemResult>,
}

/// Answers every item through the context engine and scores it against its
/// reference. One row per (dataset, task) group.
pub fn evaluate(
    items: &[EvalItem],
    index: &CorpusIndex,
    config: &RetrievalConfig,
    gateway: &Gateway,
    opts: &EvalOptions,
) -> Result<EvalRun, EvalError> {
    if items.is_empty() {
        return Err(EvalError::NoItems);
    }
    let model = opts.model.clone().unwrap_or_else(|| gateway.config().model.clone());
    let tag = |it: &EvalItem| {
        it.dataset
            .clone()
            .or_else(|| opts.dataset.clone())
            .unwrap_or_else(|| UNTAGGED.to_string())
    };
    let mut groups: BTreeMap<(String, TaskStyle), Vec<&EvalItem>> = BTreeMap::new();
    for it in items {
        groups.entry((tag(it), it.task)).or_default().push(it);
    }

    let mut run = EvalRun::default();
    for ((dataset, task), mut group) in groups {
        group.sort_by(|a, b| a.id.cmp(&b.id));
        let mut cfg = config.clone();
        cfg.k = opts.k.unwrap_or_else(|| task.default_k());
        if cfg.k > cfg.candidate_m {
            cfg.candidate_m = cfg.k;
        }
        let reported_k = if cfg.mode == RetrievalMode::ZeroShot { 0 } else { cfg.k };
        let results = config.exec.map(&group, |it| {
            let out = answer(&it.query(), index, &cfg, gateway).map_err(|source| EvalError::Item {
                id: it.id.clone(),
                source,
            })?;
            Ok(ItemResult {
                id: it.id.clone(),
                dataset: dataset.clone(),
                mode: cfg.mode,
                k: reported_k,
                rouge: rouge_l(&out.text, &it.reference),
                answer: out.text,
                reference: it.reference.clone(),
                bundle: out.bundle,
            })
        });
        let results = results.into_iter().collect::<Result<Vec<_>, EvalError>>()?;
        let n = results.len() as f64;
        let mean = |f: fn(&RougeScore) -> f64| results.iter().map(|r| f(&r.rouge)).sum::<f64>() / n;
        run.report.rows.push(EvalRow {
            dataset,
            task,
            model: model.clone(),
            mode: cfg.mode,
            k: reported_k,
            rouge_l_precision: mean(|r| r.precision),
            rouge_l_recall: mean(|r| r.recall),
            rouge_l_f1: mean(|r| r.f1),
            n_items: results.len(),
        });
        run.items.extend(results);
    }
    Ok(run)
}

/// One evaluation per k, in the given order.
pub fn k_sweep(
    items: &[EvalItem],
    ks: &[usize],
    index: &CorpusIndex,
    config: &RetrievalConfig,
    gateway: &Gateway,
    opts: &EvalOptions,
) -> Result<EvalRun, EvalError> {
    let mut run = EvalRun::default();
    for &k in ks {
        let o = EvalOptions { k: Some(k), ..opts.clone() };
        let r = evaluate(items, index, config, gateway, &o)?;
        run.report.extend(r.report);
        run.items.extend(r.items);
    }
    Ok(run)
}

/// One evaluation per retrieval mode, everything else held fixed.
pub fn ablate(
    items: &[EvalItem],
    modes: &[RetrievalMode],
    index: &CorpusIndex,
    config: &RetrievalConfig,
    gateway: &Gateway,
    opts: &EvalOptions,
) -> Result<EvalRun, EvalError> {
    let mut run = EvalRun::default();
    for &mode in modes {
        let cfg = RetrievalConfig { mode, ..config.clone() };
        let r = evaluate(items, index, &cfg, gateway, opts)?;
        run.report.extend(r.report);
        run.items.extend(r.items);
    }
    Ok(run)
}
