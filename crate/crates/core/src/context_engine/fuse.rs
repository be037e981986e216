use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::RetrievalMode;

/// One entry of a ranked candidate list; rank is the 1-based position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub accession: String,
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fused {
    pub accession: String,
    pub id: String,
    pub fused_score: f64,
    pub seq_rank: Option<usize>,
    pub text_rank: Option<usize>,
}

/// Reciprocal-rank fusion: `Σ 1/(rrf_k + rank)` over the lists that the
/// active mode reads. Duplicate ids within a list keep their best rank.
/// Ties are broken by accession, then id. Returns the top `k`.
pub fn fuse(seq: &[Candidate], text: &[Candidate], mode: RetrievalMode, rrf_k: f64, k: usize) -> Vec<Fused> {
    let (use_seq, use_text) = match mode {
        RetrievalMode::Dual => (true, true),
        RetrievalMode::SeqOnly => (true, false),
        RetrievalMode::QaOnly => (false, true),
        RetrievalMode::ZeroShot => (false, false),
    };
    let mut by_id: HashMap<(String, String), Fused> = HashMap::new();
    let mut add = |list: &[Candidate], is_seq: bool| {
        let mut rank = 0;
        for c in list {
            let key = (c.accession.clone(), c.id.clone());
            let entry = by_id.entry(key).or_insert_with(|| Fused {
                accession: c.accession.clone(),
                id: c.id.clone(),
                fused_score: 0.0,
                seq_rank: None,
                text_rank: None,
            });
            let slot = if is_seq { &mut entry.seq_rank } else { &mut entry.text_rank };
            if slot.is_some() {
                continue;
            }
            rank += 1;
            *slot = Some(rank);
            entry.fused_score += 1.0 / (rrf_k + rank as f64);
        }
    };
    if use_seq {
        add(seq, true);
    }
    if use_text {
        add(text, false);
    }
    let mut out: Vec<Fused> = by_id.into_values().collect();
    out.sort_by(|a, b| {
        b.fused_score
            .total_cmp(&a.fused_score)
            .then_with(|| a.accession.cmp(&b.accession))
            .then_with(|| a.id.cmp(&b.id))
    });
    out.truncate(k);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(acc: &str, id: &str) -> Candidate {
        Candidate { accession: acc.into(), id: id.into(), score: 1.0 }
    }

    #[test]
    fn first_in_both_lists() {
        let f = fuse(&[c("A", "a"), c("B", "b")], &[c("A", "a"), c("C", "c")], RetrievalMode::Dual, 60.0, 10);
        assert_eq!(f[0].id, "a");
        assert!((f[0].fused_score - 2.0 / 61.0).abs() < 1e-15);
        assert_eq!(f.len(), 3);
        // B and C both score 1/62; accession breaks the tie
        assert_eq!((f[1].id.as_str(), f[2].id.as_str()), ("b", "c"));
    }

    #[test]
    fn single_list_modes_keep_order() {
        let seq = [c("Z", "z"), c("A", "a"), c("M", "m")];
        let text = [c("Q", "q")];
        let ids: Vec<String> = fuse(&seq, &text, RetrievalMode::SeqOnly, 60.0, 2).into_iter().map(|f| f.id).collect();
        assert_eq!(ids, ["z", "a"]);
        let ids: Vec<String> = fuse(&seq, &text, RetrievalMode::QaOnly, 60.0, 5).into_iter().map(|f| f.id).collect();
        assert_eq!(ids, ["q"]);
        assert!(fuse(&seq, &text, RetrievalMode::ZeroShot, 60.0, 5).is_empty());
        assert!(fuse(&[], &[], RetrievalMode::Dual, 60.0, 5).is_empty());
    }

    /// Brute-force recomputation straight from the definition.
    fn oracle(seq: &[Candidate], text: &[Candidate], rrf_k: f64) -> Vec<(String, f64)> {
        let mut ids: Vec<(String, String)> = seq.iter().chain(text).map(|c| (c.accession.clone(), c.id.clone())).collect();
        ids.sort();
        ids.dedup();
        let rank_in = |list: &[Candidate], key: &(String, String)| -> Option<usize> {
            let mut seen: Vec<(String, String)> = Vec::new();
            for x in list {
                let k = (x.accession.clone(), x.id.clone());
                if !seen.contains(&k) {
                    seen.push(k.clone());
                }
                if &k == key {
                    return Some(seen.len());
                }
            }
            None
        };
        let mut out: Vec<(String, String, f64)> = ids
            .iter()
            .map(|key| {
                let s: f64 = [rank_in(seq, key), rank_in(text, key)]
                    .into_iter()
                    .flatten()
                    .map(|r| 1.0 / (rrf_k + r as f64))
                    .sum();
                (key.0.clone(), key.1.clone(), s)
            })
            .collect();
        out.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        out.into_iter().map(|(_, id, s)| (id, s)).collect()
    }

    fn list() -> impl Strategy<Value = Vec<Candidate>> {
        proptest::collection::vec((0u8..6, 0u8..3), 0..12).prop_map(|v| {
            v.into_iter()
                .map(|(a, i)| c(&format!("P{a}"), &format!("P{a}:{i}")))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn rrf_matches_oracle(seq in list(), text in list(), k in 1usize..20) {
            let got: Vec<(String, f64)> = fuse(&seq, &text, RetrievalMode::Dual, 60.0, k).into_iter().map(|f| (f.id, f.fused_score)).collect();
            let mut want = oracle(&seq, &text, 60.0);
            want.truncate(k);
            prop_assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                prop_assert_eq!(&g.0, &w.0);
                prop_assert!((g.1 - w.1).abs() < 1e-12);
            }
        }

        #[test]
        fn fused_items_come_from_inputs(seq in list(), text in list()) {
            for f in fuse(&seq, &text, RetrievalMode::Dual, 60.0, 50) {
                prop_assert!(seq.iter().chain(&text).any(|c| c.id == f.id));
            }
        }

        #[test]
        fn monotone_in_k(seq in list(), text in list(), k in 1usize..12) {
            let small = fuse(&seq, &text, RetrievalMode::Dual, 60.0, k);
            let big = fuse(&seq, &text, RetrievalMode::Dual, 60.0, k + 1);
            prop_assert_eq!(&big[..small.len()], &small[..]);
        }
    }
}
