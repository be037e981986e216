use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{GoDag, GoError, Namespace};
use crate::par::Exec;
use crate::protein::ProteinRecord;

/// Thresholds steering the recursive pruning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruningParams {
    /// Fraction of the corpus a node must cover at depth 0.
    pub lambda: f64,
    /// Linear growth of the support threshold with depth.
    pub beta: f64,
    /// Child-imbalance threshold at depth 0.
    pub tau0: f64,
    /// Per-level decay of the imbalance threshold.
    pub alpha: f64,
    /// Total protein count the support threshold is relative to.
    pub total_count: u64,
}

impl Default for PruningParams {
    fn default() -> Self {
        PruningParams {
            lambda: 0.001,
            beta: 0.5,
            tau0: 10.0,
            alpha: 0.9,
            total_count: 1,
        }
    }
}

impl PruningParams {
    pub fn validate(&self) -> Result<(), GoError> {
        let bad = |m: &str| Err(GoError::InvalidParams(m.to_string()));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be > 0");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be >= 0");
        }
        if !(self.tau0 > 1.0 && self.tau0.is_finite()) {
            return bad("tau0 must be > 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be > 0");
        }
        if self.total_count == 0 {
            return bad("total_count must be >= 1");
        }
        Ok(())
    }

    /// Depth-adjusted minimum support `λ·C_tot·(1 + β·d)`.
    pub fn min_support(&self, depth: u32) -> f64 {
        self.lambda * self.total_count as f64 * (1.0 + self.beta * depth as f64)
    }

    /// Depth-adjusted imbalance threshold `τ₀·α^d`.
    pub fn imbalance_threshold(&self, depth: u32) -> f64 {
        self.tau0 * self.alpha.powi(depth as i32)
    }
}

/// Which rule kept a grouping node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionRule {
    /// The node meets its support threshold and no child qualified.
    Support,
    /// The child-count ratio exceeds the imbalance threshold.
    Imbalance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedNode {
    pub term_id: String,
    pub rule: RetentionRule,
    pub depth: u32,
    pub count: u64,
    /// Child imbalance ratio at the time of the decision, if defined.
    pub ratio: Option<f64>,
}

/// Result of [`GoDag::prune`], sorted by term id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pruning {
    pub params: PruningParams,
    pub retained: Vec<RetainedNode>,
}

impl Pruning {
    pub fn term_ids(&self) -> BTreeSet<String> {
        self.retained.iter().map(|r| r.term_id.clone()).collect()
    }
}

struct Walker<'a> {
    dag: &'a GoDag,
    params: &'a PruningParams,
    visited: Vec<bool>,
    retained: BTreeMap<usize, (RetentionRule, Option<f64>)>,
}

impl Walker<'_> {
    fn visit(&mut self, v: usize) {
        if std::mem::replace(&mut self.visited[v], true) {
            return;
        }
        let node = self.dag.node_at(v);
        let ratio = self.dag.imbalance_ratio_at(v);
        if let Some(r) = ratio {
            if r > self.params.imbalance_threshold(node.depth) {
                self.retained.insert(v, (RetentionRule::Imbalance, ratio));
                return;
            }
        }
        // children are index-sorted, and indices follow term id order
        let qualifying: Vec<usize> = self
            .dag
            .children_of(v)
            .iter()
            .copied()
            .filter(|&c| {
                let child = self.dag.node_at(c);
                child.propagated_count as f64 >= self.params.min_support(child.depth)
            })
            .collect();
        if !qualifying.is_empty() {
            for c in qualifying {
                self.visit(c);
            }
        } else if node.propagated_count as f64 >= self.params.min_support(node.depth) {
            self.retained.insert(v, (RetentionRule::Support, ratio));
        }
    }
}

impl GoDag {
    /// Recursive top-down pruning from every root.
    ///
    /// At node `v`: an imbalance ratio above `τ(d)` retains `v` and stops the
    /// descent; otherwise the walk descends into every child meeting its own
    /// support threshold; when none does, `v` is retained if it meets its
    /// support. Roots are processed independently (in parallel when enabled).
    pub fn prune(&self, params: &PruningParams) -> Result<Pruning, GoError> {
        self.prune_with(params, Exec::default())
    }

    pub fn prune_with(&self, params: &PruningParams, exec: Exec) -> Result<Pruning, GoError> {
        params.validate()?;
        let roots: Vec<usize> = self.root_indices().collect();
        let per_root = exec.map(&roots, |&r| {
            let mut w = Walker {
                dag: self,
                params,
                visited: vec![false; self.len()],
                retained: BTreeMap::new(),
            };
            w.visit(r);
            w.retained
        });
        let mut merged = BTreeMap::new();
        for part in per_root {
            merged.extend(part);
        }
        if merged.is_empty() {
            return Err(GoError::EmptyPrune {
                roots: roots.iter().map(|&r| self.node_at(r).term_id.clone()).collect(),
            });
        }
        let retained = merged
            .into_iter()
            .map(|(i, (rule, ratio))| {
                let n = self.node_at(i);
                RetainedNode {
                    term_id: n.term_id.clone(),
                    rule,
                    depth: n.depth,
                    count: n.propagated_count,
                    ratio,
                }
            })
            .collect();
        Ok(Pruning {
            params: *params,
            retained,
        })
    }
}

/// One line of the retained-groups JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub term_id: String,
    pub name: String,
    pub namespace: Namespace,
    pub depth: u32,
    pub count: u64,
    pub rule: RetentionRule,
    pub protein_ids: Vec<String>,
}

/// Proteins assigned to each retained node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grouping {
    /// term id -> accessions (sorted).
    pub groups: BTreeMap<String, Vec<String>>,
    /// Proteins that fall under no retained node, sorted.
    pub ungrouped: Vec<String>,
}

/// Places each protein in every retained group that is one of its
/// annotations or an ancestor of one.
pub fn group_proteins(
    retained: &BTreeSet<String>,
    dag: &GoDag,
    proteins: &[ProteinRecord],
) -> Grouping {
    let retained_idx: BTreeMap<usize, &String> = retained
        .iter()
        .filter_map(|t| dag.resolve(t).map(|i| (i, t)))
        .collect();
    let mut grouping = Grouping::default();
    for t in retained {
        grouping.groups.insert(t.clone(), Vec::new());
    }
    for p in proteins {
        let closure = dag.closure_indices(p.go_terms.iter().map(String::as_str));
        let mut placed = false;
        for i in closure {
            if let Some(t) = retained_idx.get(&i) {
                grouping.groups.get_mut(*t).expect("group exists").push(p.accession.clone());
                placed = true;
            }
        }
        if !placed {
            grouping.ungrouped.push(p.accession.clone());
        }
    }
    for members in grouping.groups.values_mut() {
        members.sort();
    }
    grouping.ungrouped.sort();
    grouping
}

impl Grouping {
    /// Builds the JSONL records for the given pruning result.
    pub fn records(&self, dag: &GoDag, pruning: &Pruning) -> Vec<GroupRecord> {
        pruning
            .retained
            .iter()
            .map(|r| {
                let node = dag.get(&r.term_id).expect("retained node in dag");
                GroupRecord {
                    term_id: r.term_id.clone(),
                    name: node.name.clone(),
                    namespace: node.namespace,
                    depth: r.depth,
                    count: r.count,
                    rule: r.rule,
                    protein_ids: self.groups.get(&r.term_id).cloned().unwrap_or_default(),
                }
            })
            .collect()
    }
}
