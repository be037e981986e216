use serde::{Deserialize, Serialize};

use super::identity::{kmer_set, lcs_length, shared_kmers};
use crate::protein::ProteinRecord;

/// Shared-k-mer gate evaluated before the alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prefilter {
    pub k: usize,
    /// Minimum `|shared k-mers| / min(|kmers(a)|, |kmers(b)|)`.
    pub min_fraction: f64,
}

impl Default for Prefilter {
    fn default() -> Self {
        Prefilter { k: 5, min_fraction: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub threshold: f64,
    pub prefilter: Option<Prefilter>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            threshold: 0.70,
            prefilter: Some(Prefilter::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub representative: String,
    /// Members in join order; the representative comes first.
    pub members: Vec<String>,
    pub group: String,
}

struct Founder<'a> {
    seq: &'a [u8],
    kmers: Vec<u64>,
    cluster: usize,
}

/// Greedy incremental clustering of one group.
///
/// Proteins are visited longest first (ties by accession). Each joins the
/// first cluster, in creation order, whose representative it matches at
/// `threshold` identity or more; otherwise it founds a new cluster.
pub fn cluster_group(group_id: &str, members: &[&ProteinRecord], config: &ClusterConfig) -> Vec<Cluster> {
    let mut order: Vec<&ProteinRecord> = members.to_vec();
    order.sort_by(|a, b| {
        b.sequence
            .len()
            .cmp(&a.sequence.len())
            .then_with(|| a.accession.cmp(&b.accession))
    });
    order.dedup_by(|a, b| a.accession == b.accession);

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut founders: Vec<Founder> = Vec::new();
    for p in order {
        let seq = p.sequence.as_bytes();
        let kmers = config.prefilter.map(|f| kmer_set(seq, f.k)).unwrap_or_default();
        let hit = founders.iter().find(|f| {
            if let Some(pf) = config.prefilter {
                let denom = kmers.len().min(f.kmers.len());
                // sequences shorter than k bypass the gate
                if denom > 0 && (shared_kmers(&kmers, &f.kmers) as f64) < pf.min_fraction * denom as f64 {
                    return false;
                }
            }
            let matches = lcs_length(seq, f.seq);
            matches as f64 / seq.len().min(f.seq.len()) as f64 >= config.threshold
        });
        match hit {
            Some(f) => clusters[f.cluster].members.push(p.accession.clone()),
            None => {
                founders.push(Founder {
                    seq,
                    kmers,
                    cluster: clusters.len(),
                });
                clusters.push(Cluster {
                    representative: p.accession.clone(),
                    members: vec![p.accession.clone()],
                    group: group_id.to_string(),
                });
            }
        }
    }
    clusters
}
