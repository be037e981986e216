use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::protein::{ProteinRecord, Superkingdom};
use crate::qa_forge::{QaInstance, QaType};
use crate::text::tokenize;

/// Published corpus figures, shown next to local stats for scale.
pub const REFERENCE_ATTRIBUTE_COUNT: usize = 11_693;
pub const REFERENCE_TRUE_FALSE_COUNT: usize = 32_444;
pub const REFERENCE_SEQUENCE_SHARE: f64 = 0.70;

const BIN_WIDTH: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBin {
    /// Inclusive lower and exclusive upper residue count.
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub instances: usize,
    pub proteins: usize,
    pub per_type: BTreeMap<QaType, usize>,
    /// Over distinct proteins in the corpus.
    pub length_histogram: Vec<LengthBin>,
    /// Superkingdom counts over distinct proteins; proteins missing from the
    /// record list count as Unknown.
    pub species: BTreeMap<String, usize>,
    pub sequence_tokens: usize,
    pub text_tokens: usize,
    pub sequence_share: f64,
}

impl CorpusStats {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("section\tkey\tvalue\n");
        out.push_str(&format!("total\tinstances\t{}\n", self.instances));
        out.push_str(&format!("total\tproteins\t{}\n", self.proteins));
        for (t, n) in &self.per_type {
            out.push_str(&format!("type\t{}\t{n}\n", t.as_str()));
        }
        for b in &self.length_histogram {
            out.push_str(&format!("length\t{}-{}\t{}\n", b.lo, b.hi, b.count));
        }
        for (s, n) in &self.species {
            out.push_str(&format!("species\t{s}\t{n}\n"));
        }
        out.push_str(&format!("tokens\tsequence\t{}\n", self.sequence_tokens));
        out.push_str(&format!("tokens\ttext\t{}\n", self.text_tokens));
        out.push_str(&format!("tokens\tsequence_share\t{:.6}\n", self.sequence_share));
        out.push_str(&format!("reference\tattribute\t{REFERENCE_ATTRIBUTE_COUNT}\n"));
        out.push_str(&format!("reference\ttrue_false\t{REFERENCE_TRUE_FALSE_COUNT}\n"));
        out.push_str(&format!("reference\tsequence_share\t{REFERENCE_SEQUENCE_SHARE:.2}\n"));
        out
    }
}

/// Sequence tokens are residues of each instance's sequence; text tokens are
/// evaluation-tokenizer tokens of question, answer and explanation.
pub fn corpus_stats(corpus: &[QaInstance], proteins: &[ProteinRecord]) -> CorpusStats {
    let mut per_type: BTreeMap<QaType, usize> = QaType::ALL.iter().map(|&t| (t, 0)).collect();
    let mut lengths: BTreeMap<&str, usize> = BTreeMap::new();
    let (mut seq_tokens, mut text_tokens) = (0usize, 0usize);
    for inst in corpus {
        *per_type.entry(inst.qa_type).or_default() += 1;
        let len = inst.sequence.chars().count();
        lengths.insert(&inst.accession, len);
        seq_tokens += len;
        text_tokens += tokenize(&inst.question).len() + tokenize(&inst.answer).len();
        if let Some(e) = &inst.explanation {
            text_tokens += tokenize(e).len();
        }
    }

    let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
    for &len in lengths.values() {
        *bins.entry(len / BIN_WIDTH).or_default() += 1;
    }
    let length_histogram = bins
        .into_iter()
        .map(|(b, count)| LengthBin { lo: b * BIN_WIDTH, hi: (b + 1) * BIN_WIDTH, count })
        .collect();

    let kingdom: HashMap<&str, Superkingdom> = proteins.iter().map(|p| (p.accession.as_str(), p.superkingdom)).collect();
    let mut species = BTreeMap::new();
    for acc in lengths.keys() {
        let k = kingdom.get(acc).copied().unwrap_or_default();
        *species.entry(k.as_str().to_string()).or_default() += 1;
    }

    let total = seq_tokens + text_tokens;
    CorpusStats {
        instances: corpus.len(),
        proteins: lengths.len(),
        per_type,
        length_histogram,
        species,
        sequence_tokens: seq_tokens,
        text_tokens,
        sequence_share: if total == 0 { 0.0 } else { seq_tokens as f64 / total as f64 },
    }
}
