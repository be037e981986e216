//! Two-pass redundancy removal inside each functional group: sequence
//! identity clustering, then functional-information-content sampling under
//! species quotas.

mod cluster;
mod ic;
mod identity;
mod sampling;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::go_graph::GoDag;
use crate::par::Exec;
use crate::protein::{ProteinRecord, Superkingdom};

pub use cluster::{cluster_group, Cluster, ClusterConfig, Prefilter};
pub use ic::{protein_functional_ic, IcTable, LogBase};
pub use identity::{kmer_set, lcs_length, pairwise_identity, shared_kmers};
pub use sampling::{ic_bucket, largest_remainder, sample_by_ic, species_quota_sample};

#[derive(Debug, thiserror::Error)]
pub enum DedupError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("protein {0} has no GO annotations")]
    NoAnnotations(String),
    #[error("species proportions sum to {0}, expected 1")]
    InvalidProportions(f64),
    #[error("group {group} references unknown accession {accession}")]
    UnknownAccession { group: String, accession: String },
    #[error("identity threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DedupConfig {
    pub cluster: ClusterConfig,
    /// Proteins kept per group after IC sampling; `None` keeps every IC bucket.
    pub per_group_target: Option<usize>,
    pub ic_base: LogBase,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            cluster: ClusterConfig::default(),
            per_group_target: None,
            ic_base: LogBase::Natural,
            exec: Exec::default(),
        }
    }
}

/// Sidecar line tracing where each grouped protein ended up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub accession: String,
    pub group: String,
    pub cluster_representative: String,
    pub functional_ic: f64,
    pub kept: bool,
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    /// Union of the proteins kept in any group, sorted by accession.
    pub proteins: Vec<ProteinRecord>,
    /// One line per (group, member), ordered by group, cluster, join order.
    pub provenance: Vec<ProvenanceRecord>,
    pub clusters: BTreeMap<String, Vec<Cluster>>,
    pub ic: IcTable,
    /// Superkingdom shares among the cluster representatives.
    pub proportions: BTreeMap<Superkingdom, f64>,
    pub representatives: usize,
}

/// Runs the full two-pass deduplication over `groups` (term id -> accessions).
pub fn deduplicate(
    dag: &GoDag,
    groups: &BTreeMap<String, Vec<String>>,
    proteins: &[ProteinRecord],
    config: &DedupConfig,
) -> Result<DedupOutcome, DedupError> {
    let threshold = config.cluster.threshold;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DedupError::InvalidThreshold(threshold));
    }
    let by_acc: HashMap<&str, &ProteinRecord> = proteins.iter().map(|p| (p.accession.as_str(), p)).collect();
    let mut resolved: Vec<(&String, Vec<&ProteinRecord>)> = Vec::with_capacity(groups.len());
    for (g, accs) in groups {
        let mut members = Vec::with_capacity(accs.len());
        for a in accs {
            let p = by_acc.get(a.as_str()).ok_or_else(|| DedupError::UnknownAccession {
                group: g.clone(),
                accession: a.clone(),
            })?;
            members.push(*p);
        }
        resolved.push((g, members));
    }

    // pass 1: sequence clustering per group
    let clustered: Vec<Vec<Cluster>> = config
        .exec
        .map(&resolved, |(g, members)| cluster_group(g, members, &config.cluster));

    let rep_set: BTreeSet<&str> = clustered
        .iter()
        .flatten()
        .map(|c| c.representative.as_str())
        .collect();
    let reps: Vec<ProteinRecord> = rep_set.iter().map(|a| by_acc[a].clone()).collect();

    let ic = IcTable::compute(dag, &reps, config.ic_base);
    let mut proportions: BTreeMap<Superkingdom, f64> = BTreeMap::new();
    for p in &reps {
        *proportions.entry(p.superkingdom).or_default() += 1.0;
    }
    let n_reps = reps.len().max(1) as f64;
    for v in proportions.values_mut() {
        *v /= n_reps;
    }

    // pass 2: IC buckets and species quotas per group
    let work: Vec<(&String, &Vec<Cluster>)> = resolved.iter().map(|(g, _)| *g).zip(&clustered).collect();
    let kept_per_group = config.exec.map(&work, |(_, clusters)| {
        let cands: Vec<&ProteinRecord> = clusters.iter().map(|c| by_acc[c.representative.as_str()]).collect();
        let sampled = sample_by_ic(&cands, dag, &ic)?;
        let target = config.per_group_target.unwrap_or(sampled.len());
        let chosen = if proportions.is_empty() {
            sampled
        } else {
            species_quota_sample(&sampled, target, &proportions)?
        };
        Ok::<BTreeSet<String>, DedupError>(chosen.into_iter().map(|p| p.accession.clone()).collect())
    });

    let mut provenance = Vec::new();
    let mut kept_all = BTreeSet::new();
    let mut cluster_map = BTreeMap::new();
    for ((g, clusters), kept) in work.into_iter().zip(kept_per_group) {
        let kept = kept?;
        for c in clusters {
            for m in &c.members {
                let p = by_acc[m.as_str()];
                provenance.push(ProvenanceRecord {
                    accession: m.clone(),
                    group: g.clone(),
                    cluster_representative: c.representative.clone(),
                    functional_ic: protein_functional_ic(p, dag, &ic)?,
                    kept: kept.contains(m),
                });
            }
        }
        kept_all.extend(kept);
        cluster_map.insert(g.clone(), clusters.clone());
    }

    Ok(DedupOutcome {
        proteins: kept_all.iter().map(|a| by_acc[a.as_str()].clone()).collect(),
        provenance,
        clusters: cluster_map,
        ic,
        proportions,
        representatives: reps.len(),
    })
}
