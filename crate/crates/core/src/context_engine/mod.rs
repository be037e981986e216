//! Query-adaptive context construction: retrieve exemplars by sequence
//! homology and by question/answer text similarity, fuse the two rankings
//! and assemble the in-context prompt.

mod assemble;
mod fuse;
mod index;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus_dedup::pairwise_identity;
use crate::llm_gateway::{ChatRequest, Gateway, GatewayError, Message, Responder};
use crate::par::Exec;
use crate::qa_forge::QaInstance;
use crate::text::tokenize;

pub use assemble::{center_truncate, exemplar_block, query_block, PREAMBLE};
pub use fuse::{fuse, Candidate, Fused};
pub use index::{Bm25Index, CorpusIndex, SeqHit, SeqIndex, BM25_B, BM25_K1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RetrievalMode {
    #[serde(rename = "dual")]
    Dual,
    #[serde(rename = "seq")]
    SeqOnly,
    #[serde(rename = "qa")]
    QaOnly,
    /// No exemplars; the bare query block.
    #[serde(rename = "zero")]
    ZeroShot,
}

impl RetrievalMode {
    pub const ALL: [RetrievalMode; 4] =
        [RetrievalMode::Dual, RetrievalMode::SeqOnly, RetrievalMode::QaOnly, RetrievalMode::ZeroShot];

    pub fn code(self) -> &'static str {
        match self {
            RetrievalMode::Dual => "dual",
            RetrievalMode::SeqOnly => "seq",
            RetrievalMode::QaOnly => "qa",
            RetrievalMode::ZeroShot => "zero",
        }
    }

    /// Name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            RetrievalMode::Dual => "Dual",
            RetrievalMode::SeqOnly => "SeqOnly",
            RetrievalMode::QaOnly => "QAOnly",
            RetrievalMode::ZeroShot => "ZeroShot",
        }
    }

    fn uses_seq(self) -> bool {
        matches!(self, RetrievalMode::Dual | RetrievalMode::SeqOnly)
    }
}

impl fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RetrievalMode {
    type Err = ContextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        match norm.as_str() {
            "dual" => Ok(RetrievalMode::Dual),
            "seq" | "seqonly" => Ok(RetrievalMode::SeqOnly),
            "qa" | "qaonly" | "text" => Ok(RetrievalMode::QaOnly),
            "zero" | "zeroshot" | "none" => Ok(RetrievalMode::ZeroShot),
            _ => Err(ContextError::InvalidConfig(format!("unknown retrieval mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarOrder {
    /// Most relevant exemplar last, next to the query.
    Ascending,
    Descending,
}

/// Answer style of a benchmark; picks the default exemplar count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStyle {
    Description,
    Qa,
}

impl TaskStyle {
    pub fn default_k(self) -> usize {
        match self {
            TaskStyle::Description => 11,
            TaskStyle::Qa => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub mode: RetrievalMode,
    pub k: usize,
    pub candidate_m: usize,
    pub rrf_k: f64,
    pub token_budget: usize,
    pub seq_kmer_k: usize,
    pub order: ExemplarOrder,
    /// Also exclude candidates at or above this identity to the query.
    pub near_duplicate_identity: Option<f64>,
    pub chars_per_token: f64,
    pub token_multiplier: f64,
    /// Residues kept at each end when truncating exemplar sequences.
    pub truncate_keep: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            mode: RetrievalMode::Dual,
            k: TaskStyle::Qa.default_k(),
            candidate_m: 50,
            rrf_k: 60.0,
            token_budget: 16_000,
            seq_kmer_k: 3,
            order: ExemplarOrder::Ascending,
            near_duplicate_identity: None,
            chars_per_token: 4.0,
            token_multiplier: 1.0,
            truncate_keep: 100,
            exec: Exec::default(),
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), ContextError> {
        let bad = |m: String| Err(ContextError::InvalidConfig(m));
        if self.k == 0 || self.k > self.candidate_m {
            return bad(format!("k={} must be in 1..=candidate_m ({})", self.k, self.candidate_m));
        }
        if self.token_budget == 0 {
            return bad("token_budget must be > 0".into());
        }
        if !(1..=8).contains(&self.seq_kmer_k) {
            return bad(format!("seq_kmer_k {} outside 1..=8", self.seq_kmer_k));
        }
        if !(self.rrf_k >= 0.0 && self.chars_per_token > 0.0 && self.token_multiplier > 0.0) {
            return bad("rrf_k must be >= 0; chars_per_token and token_multiplier > 0".into());
        }
        if let Some(t) = self.near_duplicate_identity {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("near_duplicate_identity {t} outside (0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    /// Used only to keep the query's own entries out of the context.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accession: Option<String>,
    pub sequence: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExemplar {
    pub instance: QaInstance,
    /// Identity of the exemplar's protein to the query, if it was a sequence candidate.
    pub seq_score: Option<f64>,
    /// BM25 score of the instance, if it was a text candidate.
    pub text_score: Option<f64>,
    pub fused_score: f64,
    pub seq_rank: Option<usize>,
    pub text_rank: Option<usize>,
}

/// Audit record of one assembled context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_accession: Option<String>,
    pub query_sequence: String,
    pub query_question: String,
    pub mode: RetrievalMode,
    pub k: usize,
    /// In prompt order.
    pub exemplars: Vec<ScoredExemplar>,
    pub seq_candidates: usize,
    pub text_candidates: usize,
    pub prompt: String,
    pub prompt_tokens: usize,
    pub truncated_sequences: bool,
    pub dropped_exemplars: usize,
}

impl ContextBundle {
    /// Chat messages: the preamble as system message and the rest as user
    /// message; a context without exemplars is a single user message.
    pub fn messages(&self) -> Vec<Message> {
        match self.prompt.strip_prefix(PREAMBLE).and_then(|r| r.strip_prefix("\n\n")) {
            Some(body) if !self.exemplars.is_empty() => vec![Message::system(PREAMBLE), Message::user(body)],
            _ => vec![Message::user(self.prompt.as_str())],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answered {
    pub text: String,
    pub bundle: ContextBundle,
}

#[derive(Debug, thiserror::Error)]
pub enum ContextError {
    #[error("QA corpus is empty")]
    EmptyCorpus,
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
    #[error("query alone needs {tokens} tokens, budget is {budget}")]
    QueryTooLong { tokens: usize, budget: usize },
    #[error("index: {0}")]
    Index(String),
    #[error("gateway: {error}")]
    Gateway { error: GatewayError, bundle: Box<ContextBundle> },
}

struct Selection {
    ranked: Vec<ScoredExemplar>,
    seq_candidates: usize,
    text_candidates: usize,
}

fn select(query: &Query, index: &CorpusIndex, config: &RetrievalConfig) -> Selection {
    let empty = Selection { ranked: Vec::new(), seq_candidates: 0, text_candidates: 0 };
    if config.mode == RetrievalMode::ZeroShot {
        return empty;
    }
    let skip = |acc: &str| -> bool {
        if query.accession.as_deref() == Some(acc) {
            return true;
        }
        match (config.near_duplicate_identity, index.seq.sequence(acc)) {
            (Some(t), Some(s)) => pairwise_identity(&query.sequence, s).is_ok_and(|id| id >= t),
            _ => false,
        }
    };
    if tokenize(&query.question).is_empty() {
        log::warn!("query question has no tokens; no text candidates");
    }
    let m = config.candidate_m;
    let (seq_hits, text_scores) = config.exec.join(
        || if config.mode.uses_seq() { index.seq.candidates(&query.sequence, m, &skip) } else { Vec::new() },
        || index.text.scores(&query.question),
    );

    let mut text_ranked: Vec<(u32, f64)> = text_scores
        .iter()
        .map(|(&d, &s)| (d, s))
        .filter(|(d, _)| !skip(&index.instance(*d).accession))
        .collect();
    // slots are in (accession, id) order
    text_ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    text_ranked.truncate(m);
    let text_list: Vec<Candidate> = text_ranked
        .iter()
        .map(|&(d, s)| {
            let i = index.instance(d);
            Candidate { accession: i.accession.clone(), id: i.id.clone(), score: s }
        })
        .collect();

    // each sequence hit stands for its instance that best matches the question
    let mut seq_list = Vec::with_capacity(seq_hits.len());
    let mut identity: HashMap<&str, f64> = HashMap::new();
    for h in &seq_hits {
        let slots = index.instances_of(&h.accession);
        let best = slots
            .iter()
            .copied()
            .max_by(|a, b| {
                let sa = text_scores.get(a).copied().unwrap_or(0.0);
                let sb = text_scores.get(b).copied().unwrap_or(0.0);
                sa.total_cmp(&sb).then(b.cmp(a))
            });
        if let Some(slot) = best {
            let i = index.instance(slot);
            seq_list.push(Candidate { accession: i.accession.clone(), id: i.id.clone(), score: h.identity });
            identity.insert(h.accession.as_str(), h.identity);
        }
    }
    let used_text = config.mode != RetrievalMode::SeqOnly;
    if seq_list.is_empty() && (text_list.is_empty() || !used_text) {
        log::warn!("no candidates for query; answering without exemplars");
    }

    let fused = fuse(&seq_list, &text_list, config.mode, config.rrf_k, config.k);
    let text_by_id: HashMap<&str, f64> = text_list.iter().map(|c| (c.id.as_str(), c.score)).collect();
    let ranked = fused
        .into_iter()
        .map(|f| {
            let slot = index
                .instances_of(&f.accession)
                .iter()
                .copied()
                .find(|&s| index.instance(s).id == f.id)
                .expect("fused ids come from the index");
            ScoredExemplar {
                instance: index.instance(slot).clone(),
                seq_score: f.seq_rank.and_then(|_| identity.get(f.accession.as_str()).copied()),
                text_score: f.text_rank.and_then(|_| text_by_id.get(f.id.as_str()).copied()),
                fused_score: f.fused_score,
                seq_rank: f.seq_rank,
                text_rank: f.text_rank,
            }
        })
        .collect();
    Selection {
        ranked,
        seq_candidates: seq_list.len(),
        text_candidates: if used_text { text_list.len() } else { 0 },
    }
}

/// Retrieves, fuses and assembles the context for `query` without calling a model.
pub fn build_context(query: &Query, index: &CorpusIndex, config: &RetrievalConfig) -> Result<ContextBundle, ContextError> {
    config.validate()?;
    if config.seq_kmer_k != index.seq.k() {
        return Err(ContextError::InvalidConfig(format!(
            "seq_kmer_k {} differs from the index ({})",
            config.seq_kmer_k,
            index.seq.k()
        )));
    }
    let sel = select(query, index, config);
    let asm = assemble::assemble(sel.ranked, &query.sequence, &query.question, config)?;
    Ok(ContextBundle {
        query_accession: query.accession.clone(),
        query_sequence: query.sequence.clone(),
        query_question: query.question.clone(),
        mode: config.mode,
        k: config.k,
        exemplars: asm.exemplars,
        seq_candidates: sel.seq_candidates,
        text_candidates: sel.text_candidates,
        prompt: asm.prompt,
        prompt_tokens: asm.tokens,
        truncated_sequences: asm.truncated,
        dropped_exemplars: asm.dropped,
    })
}

/// Full pipeline: context construction, then one chat completion.
pub fn answer(query: &Query, index: &CorpusIndex, config: &RetrievalConfig, gateway: &Gateway) -> Result<Answered, ContextError> {
    let bundle = build_context(query, index, config)?;
    match gateway.complete(&bundle.messages()) {
        Ok(c) => Ok(Answered { text: c.text.trim().to_string(), bundle }),
        Err(error) => Err(ContextError::Gateway { error, bundle: Box::new(bundle) }),
    }
}

/// Mock responder that repeats the answer of the exemplar adjacent to the
/// query block. Declines when the prompt carries no exemplar.
pub fn parrot_responder() -> impl Responder {
    |req: &ChatRequest| {
        let prompt = req.last_user();
        let q = prompt.rfind("Protein sequence: ")?;
        let before = &prompt[..q];
        let a = before.rfind("\nA: ")?;
        let ans = before[a + 4..].trim();
        (!ans.is_empty()).then(|| ans.to_string())
    }
}
