use super::{ContextError, ExemplarOrder, RetrievalConfig, ScoredExemplar};
use crate::text::estimate_tokens;

pub const PREAMBLE: &str = "You will learn to interpret protein sequences from the following examples.";

pub fn exemplar_block(sequence: &str, question: &str, answer: &str) -> String {
    format!("Protein sequence: {sequence}\nQ: {question}\nA: {answer}")
}

pub fn query_block(sequence: &str, question: &str) -> String {
    format!("Protein sequence: {sequence}\nQ: {question}\nA:")
}

/// Keeps `keep` residues at each end joined by `…`; shorter sequences pass through.
pub fn center_truncate(seq: &str, keep: usize) -> String {
    let n = seq.chars().count();
    if n <= 2 * keep + 1 {
        return seq.to_string();
    }
    let head: String = seq.chars().take(keep).collect();
    let tail: String = seq.chars().skip(n - keep).collect();
    format!("{head}…{tail}")
}

/// Assembled prompt plus what was cut to fit the budget.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// Exemplars in prompt order.
    pub exemplars: Vec<ScoredExemplar>,
    pub prompt: String,
    pub tokens: usize,
    pub truncated: bool,
    pub dropped: usize,
}

fn render(ex: &[ScoredExemplar], qblock: &str, truncate_keep: Option<usize>) -> String {
    if ex.is_empty() {
        return qblock.to_string();
    }
    let mut body = String::new();
    for e in ex {
        let seq = match truncate_keep {
            Some(keep) => center_truncate(&e.instance.sequence, keep),
            None => e.instance.sequence.clone(),
        };
        body.push_str(&exemplar_block(&seq, &e.instance.question, &e.instance.answer));
        body.push_str("\n\n");
    }
    body.push_str(qblock);
    format!("{PREAMBLE}\n\n{body}")
}

/// Builds the prompt from exemplars given most relevant first.
///
/// Over budget, exemplar sequences are center-truncated first; then the
/// least relevant exemplars are dropped one at a time.
pub fn assemble(
    ranked: Vec<ScoredExemplar>,
    query_sequence: &str,
    query_question: &str,
    config: &RetrievalConfig,
) -> Result<Assembly, ContextError> {
    let count = |s: &str| estimate_tokens(s, config.chars_per_token, config.token_multiplier);
    let qblock = query_block(query_sequence, query_question);
    let qtokens = count(&qblock);
    if qtokens > config.token_budget {
        return Err(ContextError::QueryTooLong { tokens: qtokens, budget: config.token_budget });
    }
    let ordered = |mut v: Vec<ScoredExemplar>| {
        if config.order == ExemplarOrder::Ascending {
            v.reverse();
        }
        v
    };
    let mut kept = ranked;
    let mut truncate = None;
    let mut dropped = 0;
    loop {
        let ex = ordered(kept.clone());
        let prompt = render(&ex, &qblock, truncate);
        let tokens = count(&prompt);
        if tokens <= config.token_budget {
            return Ok(Assembly {
                exemplars: ex,
                prompt,
                tokens,
                truncated: truncate.is_some(),
                dropped,
            });
        }
        if truncate.is_none() {
            truncate = Some(config.truncate_keep);
        } else {
            // the query alone fits, so this terminates
            kept.pop();
            dropped += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_keeps_ends() {
        let s: String = "A".repeat(150) + &"C".repeat(100) + &"D".repeat(150);
        let t = center_truncate(&s, 100);
        assert_eq!(t.chars().count(), 201);
        assert!(t.starts_with(&"A".repeat(100)));
        assert!(t.ends_with(&"D".repeat(100)));
        assert_eq!(center_truncate("MKV", 1), "MKV");
        assert_eq!(center_truncate("MKVL", 1), "M…L");
    }

    #[test]
    fn blocks() {
        assert_eq!(exemplar_block("MK", "q?", "a."), "Protein sequence: MK\nQ: q?\nA: a.");
        assert_eq!(query_block("MK", "q?"), "Protein sequence: MK\nQ: q?\nA:");
    }
}
