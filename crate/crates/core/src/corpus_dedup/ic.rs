use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DedupError;
use crate::go_graph::{GoDag, Namespace};
use crate::protein::ProteinRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    fn ln(self) -> f64 {
        match self {
            LogBase::Natural => 1.0,
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::Ten => std::f64::consts::LN_10,
        }
    }
}

/// Per-term information content `−log(count / N)`, where `N` counts the
/// proteins annotated anywhere in the term's namespace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcTable {
    values: BTreeMap<String, f64>,
    pub base: LogBase,
    pub namespace_totals: BTreeMap<Namespace, u64>,
}

impl IcTable {
    /// Counts are taken over `proteins` only (typically the cluster
    /// representatives); terms no protein reaches are absent.
    pub fn compute(dag: &GoDag, proteins: &[ProteinRecord], base: LogBase) -> IcTable {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        let mut totals: BTreeMap<Namespace, u64> = BTreeMap::new();
        for p in proteins {
            let closure = dag.closure_indices(p.go_terms.iter().map(String::as_str));
            let mut spaces = Vec::new();
            for i in closure {
                *counts.entry(i).or_default() += 1;
                let ns = dag.node_at(i).namespace;
                if !spaces.contains(&ns) {
                    spaces.push(ns);
                }
            }
            for ns in spaces {
                *totals.entry(ns).or_default() += 1;
            }
        }
        let values = counts
            .into_iter()
            .map(|(i, c)| {
                let node = dag.node_at(i);
                let n = totals[&node.namespace];
                (node.term_id.clone(), (n as f64 / c as f64).ln() / base.ln())
            })
            .collect();
        IcTable {
            values,
            base,
            namespace_totals: totals,
        }
    }

    pub fn get(&self, term_id: &str) -> Option<f64> {
        self.values.get(term_id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    #[cfg(test)]
    pub(crate) fn from_values(values: BTreeMap<String, f64>) -> IcTable {
        IcTable {
            values,
            base: LogBase::Natural,
            namespace_totals: BTreeMap::new(),
        }
    }
}

/// Sum of IC over the union of a protein's terms and all their ancestors;
/// each term counts once, terms missing from the table count zero.
pub fn protein_functional_ic(p: &ProteinRecord, dag: &GoDag, ic: &IcTable) -> Result<f64, DedupError> {
    if p.go_terms.is_empty() {
        return Err(DedupError::NoAnnotations(p.accession.clone()));
    }
    Ok(dag
        .closure_indices(p.go_terms.iter().map(String::as_str))
        .into_iter()
        .filter_map(|i| ic.get(&dag.node_at(i).term_id))
        .sum())
}
