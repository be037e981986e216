//! Gene Ontology DAG: parsing, protein-count propagation and recursive
//! pruning into functional grouping nodes.

mod obo;
mod prune;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::par::Exec;
use crate::protein::ProteinRecord;

pub use obo::parse_obo;
pub use prune::{group_proteins, Grouping, GroupRecord, Pruning, PruningParams, RetainedNode, RetentionRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Namespace {
    BiologicalProcess,
    MolecularFunction,
    CellularComponent,
}

impl Namespace {
    pub fn as_str(self) -> &'static str {
        match self {
            Namespace::BiologicalProcess => "biological_process",
            Namespace::MolecularFunction => "molecular_function",
            Namespace::CellularComponent => "cellular_component",
        }
    }
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Namespace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "biological_process" => Ok(Namespace::BiologicalProcess),
            "molecular_function" => Ok(Namespace::MolecularFunction),
            "cellular_component" => Ok(Namespace::CellularComponent),
            other => Err(format!("unknown namespace {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoNode {
    pub term_id: String,
    pub name: String,
    pub namespace: Namespace,
    pub parents: BTreeSet<String>,
    pub children: BTreeSet<String>,
    /// Proteins annotated directly to this term.
    pub direct_count: u64,
    /// Proteins annotated to this term or any descendant, each counted once.
    pub propagated_count: u64,
    /// Minimum number of `is_a` edges to a root.
    pub depth: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum GoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("is_a cycle through edge {child} -> {parent}")]
    Cycle { child: String, parent: String },
    #[error("duplicate term {0}")]
    DuplicateTerm(String),
    #[error("invalid pruning parameters: {0}")]
    InvalidParams(String),
    #[error("no node meets the support threshold under roots {}", .roots.join(", "))]
    EmptyPrune { roots: Vec<String> },
}

/// Annotations that could not be matched to a live term.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnnotationReport {
    /// `(accession, term_id)` pairs in input order.
    pub unresolved: Vec<(String, String)>,
    /// Proteins with at least one resolved annotation.
    pub annotated_proteins: u64,
    /// Proteins reaching each namespace.
    pub per_namespace: BTreeMap<Namespace, u64>,
}

/// The ontology graph. Nodes are stored sorted by term id; parent/child
/// adjacency is kept both as ids on [`GoNode`] and as index lists for
/// traversal.
#[derive(Debug, Clone)]
pub struct GoDag {
    nodes: Vec<GoNode>,
    index: HashMap<String, usize>,
    alt_ids: HashMap<String, usize>,
    parent_idx: Vec<Vec<usize>>,
    child_idx: Vec<Vec<usize>>,
    dropped_edges: Vec<(String, String)>,
}

impl GoDag {
    /// Builds the DAG from parsed terms. Edges to unknown terms are dropped
    /// (and remembered); cycles are rejected.
    pub(crate) fn build(
        mut terms: Vec<GoNode>,
        alt_ids: Vec<(String, String)>,
    ) -> Result<GoDag, GoError> {
        terms.sort_by(|a, b| a.term_id.cmp(&b.term_id));
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.term_id.clone(), i).is_some() {
                return Err(GoError::DuplicateTerm(t.term_id.clone()));
            }
        }
        let mut dropped_edges = Vec::new();
        let mut parent_idx = vec![Vec::new(); terms.len()];
        let mut child_idx = vec![Vec::new(); terms.len()];
        for (i, t) in terms.iter_mut().enumerate() {
            let mut kept = BTreeSet::new();
            for p in &t.parents {
                match index.get(p) {
                    Some(&pi) => {
                        parent_idx[i].push(pi);
                        child_idx[pi].push(i);
                        kept.insert(p.clone());
                    }
                    None => dropped_edges.push((t.term_id.clone(), p.clone())),
                }
            }
            t.parents = kept;
            t.children.clear();
        }
        for (pi, kids) in child_idx.iter_mut().enumerate() {
            kids.sort_unstable();
            kids.dedup();
            for &c in kids.iter() {
                let id = terms[c].term_id.clone();
                terms[pi].children.insert(id);
            }
        }
        for ps in parent_idx.iter_mut() {
            ps.sort_unstable();
            ps.dedup();
        }
        let alt_ids = alt_ids
            .into_iter()
            .filter_map(|(alt, primary)| index.get(&primary).map(|&i| (alt, i)))
            .collect();
        let mut dag = GoDag {
            nodes: terms,
            index,
            alt_ids,
            parent_idx,
            child_idx,
            dropped_edges,
        };
        dag.check_acyclic()?;
        dag.compute_depths();
        Ok(dag)
    }

    fn check_acyclic(&self) -> Result<(), GoError> {
        let n = self.nodes.len();
        let mut pending: Vec<usize> = self.parent_idx.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
        let mut done = vec![false; n];
        while let Some(v) = queue.pop_front() {
            done[v] = true;
            for &c in &self.child_idx[v] {
                pending[c] -= 1;
                if pending[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        let Some(start) = (0..n).find(|&i| !done[i]) else {
            return Ok(());
        };
        // Every unfinished node keeps an unfinished parent, so walking
        // upwards must revisit a node.
        let mut seen = vec![false; n];
        let mut v = start;
        loop {
            seen[v] = true;
            let p = *self.parent_idx[v]
                .iter()
                .find(|&&p| !done[p])
                .expect("unfinished node has an unfinished parent");
            if seen[p] {
                return Err(GoError::Cycle {
                    child: self.nodes[v].term_id.clone(),
                    parent: self.nodes[p].term_id.clone(),
                });
            }
            v = p;
        }
    }

    fn compute_depths(&mut self) {
        let n = self.nodes.len();
        let mut depth = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        for i in 0..n {
            if self.parent_idx[i].is_empty() {
                depth[i] = 0;
                queue.push_back(i);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &c in &self.child_idx[v] {
                if depth[c] == u32::MAX {
                    depth[c] = depth[v] + 1;
                    queue.push_back(c);
                }
            }
        }
        for (node, d) in self.nodes.iter_mut().zip(depth) {
            node.depth = d;
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GoNode] {
        &self.nodes
    }

    /// Looks a term up by primary or alternative id.
    pub fn get(&self, term_id: &str) -> Option<&GoNode> {
        self.resolve(term_id).map(|i| &self.nodes[i])
    }

    pub(crate) fn resolve(&self, term_id: &str) -> Option<usize> {
        self.index
            .get(term_id)
            .or_else(|| self.alt_ids.get(term_id))
            .copied()
    }

    pub(crate) fn node_at(&self, idx: usize) -> &GoNode {
        &self.nodes[idx]
    }

    pub(crate) fn children_of(&self, idx: usize) -> &[usize] {
        &self.child_idx[idx]
    }

    /// Terms without parents, sorted by id.
    pub fn roots(&self) -> Vec<&GoNode> {
        self.root_indices().map(|i| &self.nodes[i]).collect()
    }

    pub(crate) fn root_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.parent_idx[i].is_empty())
    }

    /// `is_a` edges that referenced terms missing from the file.
    pub fn dropped_edges(&self) -> &[(String, String)] {
        &self.dropped_edges
    }

    /// Indices of the given terms together with all their ancestors, sorted
    /// and without duplicates. Unknown ids are skipped.
    pub(crate) fn closure_indices<'a, I>(&self, terms: I) -> Vec<usize>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = terms.into_iter().filter_map(|t| self.resolve(t)).collect();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.parent_idx[v].iter().copied());
            }
        }
        seen.into_iter().collect()
    }

    /// Term ids of `terms` plus all their ancestors.
    pub fn ancestor_closure<'a, I>(&self, terms: I) -> BTreeSet<String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.closure_indices(terms)
            .into_iter()
            .map(|i| self.nodes[i].term_id.clone())
            .collect()
    }

    /// Whether `ancestor` is reachable from `term` via `is_a` edges
    /// (a term counts as its own ancestor).
    pub fn is_ancestor_or_self(&self, ancestor: &str, term: &str) -> bool {
        match self.resolve(ancestor) {
            Some(a) => self.closure_indices([term]).binary_search(&a).is_ok(),
            None => false,
        }
    }

    /// Resets and recomputes `direct_count` and `propagated_count` from the
    /// given proteins. A protein adds at most one to any node.
    pub fn annotate_counts(&mut self, proteins: &[ProteinRecord]) -> AnnotationReport {
        self.annotate_counts_with(proteins, Exec::default())
    }

    pub fn annotate_counts_with(&mut self, proteins: &[ProteinRecord], exec: Exec) -> AnnotationReport {
        for node in &mut self.nodes {
            node.direct_count = 0;
            node.propagated_count = 0;
        }
        let closures = exec.map(proteins, |p| self.closure_indices(p.go_terms.iter().map(String::as_str)));
        let mut report = AnnotationReport::default();
        for (p, closure) in proteins.iter().zip(&closures) {
            let mut direct = BTreeSet::new();
            for t in &p.go_terms {
                match self.resolve(t) {
                    Some(i) => {
                        direct.insert(i);
                    }
                    None => report.unresolved.push((p.accession.clone(), t.clone())),
                }
            }
            for i in direct {
                self.nodes[i].direct_count += 1;
            }
            if !closure.is_empty() {
                report.annotated_proteins += 1;
            }
            let mut spaces = BTreeSet::new();
            for &i in closure {
                self.nodes[i].propagated_count += 1;
                spaces.insert(self.nodes[i].namespace);
            }
            for ns in spaces {
                *report.per_namespace.entry(ns).or_default() += 1;
            }
        }
        report
    }

    /// Max/min ratio of `propagated_count` over children with a non-zero count.
    /// `None` when fewer than two such children exist.
    pub fn imbalance_ratio(&self, term_id: &str) -> Option<f64> {
        self.resolve(term_id).and_then(|i| self.imbalance_ratio_at(i))
    }

    pub(crate) fn imbalance_ratio_at(&self, idx: usize) -> Option<f64> {
        let counts: Vec<u64> = self.child_idx[idx]
            .iter()
            .map(|&c| self.nodes[c].propagated_count)
            .filter(|&c| c > 0)
            .collect();
        imbalance_of_counts(&counts)
    }
}

/// Ratio of the largest to the smallest non-zero count; `None` when fewer
/// than two non-zero counts are present.
pub fn imbalance_of_counts(counts: &[u64]) -> Option<f64> {
    let positive = counts.iter().copied().filter(|&c| c > 0);
    let (mut lo, mut hi, mut n) = (u64::MAX, 0u64, 0usize);
    for c in positive {
        lo = lo.min(c);
        hi = hi.max(c);
        n += 1;
    }
    (n > 1).then(|| hi as f64 / lo as f64)
}
