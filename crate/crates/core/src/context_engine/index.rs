use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ContextError;
use crate::corpus_dedup::{kmer_set, pairwise_identity};
use crate::qa_forge::QaInstance;
use crate::text::tokenize;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
const FORMAT_VERSION: u32 = 1;

/// Inverted index from amino-acid k-mers to protein slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeqIndex {
    k: usize,
    accessions: Vec<String>,
    sequences: Vec<String>,
    postings: BTreeMap<u64, Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeqHit {
    pub accession: String,
    /// Shared k-mers over query k-mers.
    pub containment: f64,
    pub identity: f64,
}

impl SeqIndex {
    /// `proteins` must be sorted by accession without duplicates.
    pub fn build(proteins: &[(String, String)], k: usize) -> SeqIndex {
        let mut postings: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for (slot, (_, seq)) in proteins.iter().enumerate() {
            for km in kmer_set(seq.as_bytes(), k) {
                postings.entry(km).or_default().push(slot as u32);
            }
        }
        SeqIndex {
            k,
            accessions: proteins.iter().map(|p| p.0.clone()).collect(),
            sequences: proteins.iter().map(|p| p.1.clone()).collect(),
            postings,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.accessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accessions.is_empty()
    }

    pub fn accessions(&self) -> &[String] {
        &self.accessions
    }

    pub fn sequence(&self, accession: &str) -> Option<&str> {
        self.slot(accession).map(|i| self.sequences[i].as_str())
    }

    fn slot(&self, accession: &str) -> Option<usize> {
        self.accessions.binary_search_by(|a| a.as_str().cmp(accession)).ok()
    }

    pub fn posting(&self, kmer: u64) -> &[u32] {
        self.postings.get(&kmer).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Two-stage homology search: containment shortlist of `4m`, then
    /// identity rerank to the top `m`. `skip` filters accessions out before
    /// either cut.
    pub fn candidates(&self, query: &str, m: usize, skip: &dyn Fn(&str) -> bool) -> Vec<SeqHit> {
        let qk = kmer_set(query.as_bytes(), self.k);
        if qk.is_empty() {
            log::warn!("query sequence shorter than k-mer size {}; no sequence candidates", self.k);
            return Vec::new();
        }
        let mut shared: HashMap<u32, u32> = HashMap::new();
        for km in &qk {
            for &slot in self.posting(*km) {
                *shared.entry(slot).or_default() += 1;
            }
        }
        let mut short: Vec<(u32, f64)> = shared
            .into_iter()
            .filter(|(slot, _)| !skip(&self.accessions[*slot as usize]))
            .map(|(slot, n)| (slot, n as f64 / qk.len() as f64))
            .collect();
        // slots follow accession order, so slot breaks ties by accession
        short.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        short.truncate(4 * m);
        let mut hits: Vec<(u32, SeqHit)> = short
            .into_iter()
            .map(|(slot, containment)| {
                let s = slot as usize;
                let identity = pairwise_identity(query, &self.sequences[s]).unwrap_or(0.0);
                (slot, SeqHit { accession: self.accessions[s].clone(), containment, identity })
            })
            .collect();
        hits.sort_by(|a, b| b.1.identity.total_cmp(&a.1.identity).then(a.0.cmp(&b.0)));
        hits.truncate(m);
        hits.into_iter().map(|(_, h)| h).collect()
    }
}

/// Okapi BM25 over question and answer tokens of each instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bm25Index {
    doc_len: Vec<u32>,
    avgdl: f64,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a str>) -> Bm25Index {
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_len = Vec::new();
        for (d, text) in docs.into_iter().enumerate() {
            let toks = tokenize(text);
            doc_len.push(toks.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in toks {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push((d as u32, n));
            }
        }
        let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
        let avgdl = if doc_len.is_empty() { 0.0 } else { total as f64 / doc_len.len() as f64 };
        Bm25Index { doc_len, avgdl, postings }
    }

    pub fn len(&self) -> usize {
        self.doc_len.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_len.is_empty()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `ln((N - n + 0.5) / (n + 0.5) + 1)`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.document_frequency(term) as f64;
        let big_n = self.len() as f64;
        ((big_n - n + 0.5) / (n + 0.5) + 1.0).ln()
    }

    /// Nonzero scores per document. Each distinct query term counts once.
    pub fn scores(&self, query: &str) -> HashMap<u32, f64> {
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        let mut out: HashMap<u32, f64> = HashMap::new();
        for t in &terms {
            let Some(post) = self.postings.get(t) else { continue };
            let idf = self.idf(t);
            for &(d, tf) in post {
                let tf = tf as f64;
                let dl = self.doc_len[d as usize] as f64;
                let norm = 1.0 - BM25_B + BM25_B * dl / self.avgdl;
                *out.entry(d).or_default() += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm);
            }
        }
        out.retain(|_, s| *s > 0.0);
        out
    }
}

/// Everything retrieval needs, built once from a QA corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusIndex {
    version: u32,
    /// Sorted by (accession, id).
    instances: Vec<QaInstance>,
    by_accession: BTreeMap<String, Vec<u32>>,
    pub seq: SeqIndex,
    pub text: Bm25Index,
}

impl CorpusIndex {
    pub fn build(corpus: &[QaInstance], seq_kmer_k: usize) -> Result<CorpusIndex, ContextError> {
        if corpus.is_empty() {
            return Err(ContextError::EmptyCorpus);
        }
        if !(1..=8).contains(&seq_kmer_k) {
            return Err(ContextError::InvalidConfig(format!("seq_kmer_k {seq_kmer_k} outside 1..=8")));
        }
        let mut instances = corpus.to_vec();
        instances.sort_by(|a, b| a.accession.cmp(&b.accession).then_with(|| a.id.cmp(&b.id)));
        if let Some(w) = instances.windows(2).find(|w| w[0].id == w[1].id && w[0].accession == w[1].accession) {
            return Err(ContextError::InvalidConfig(format!("duplicate instance id {}", w[0].id)));
        }
        let mut by_accession: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let mut proteins: Vec<(String, String)> = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            let slots = by_accession.entry(inst.accession.clone()).or_default();
            if slots.is_empty() {
                proteins.push((inst.accession.clone(), inst.sequence.clone()));
            } else if instances[slots[0] as usize].sequence != inst.sequence {
                log::warn!("{}: instances disagree on sequence; using the first", inst.accession);
            }
            slots.push(i as u32);
        }
        let docs: Vec<String> = instances.iter().map(|i| format!("{} {}", i.question, i.answer)).collect();
        Ok(CorpusIndex {
            version: FORMAT_VERSION,
            seq: SeqIndex::build(&proteins, seq_kmer_k),
            text: Bm25Index::build(docs.iter().map(String::as_str)),
            instances,
            by_accession,
        })
    }

    pub fn from_json(text: &str) -> Result<CorpusIndex, ContextError> {
        let idx: CorpusIndex = serde_json::from_str(text).map_err(|e| ContextError::Index(e.to_string()))?;
        if idx.version != FORMAT_VERSION {
            return Err(ContextError::Index(format!("index format {} not supported", idx.version)));
        }
        Ok(idx)
    }

    pub fn instances(&self) -> &[QaInstance] {
        &self.instances
    }

    pub fn instance(&self, slot: u32) -> &QaInstance {
        &self.instances[slot as usize]
    }

    pub fn instances_of(&self, accession: &str) -> &[u32] {
        self.by_accession.get(accession).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn protein_count(&self) -> usize {
        self.by_accession.len()
    }
}
