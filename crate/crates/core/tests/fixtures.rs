use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use psl_core::context_engine::{build_context, CorpusIndex, Query, RetrievalConfig};
use psl_core::corpus_dedup::{deduplicate, DedupConfig, IcTable, LogBase};
use psl_core::go_graph::{group_proteins, parse_obo, GoDag, PruningParams, RetentionRule};
use psl_core::llm_gateway::{Gateway, MockBackend};
use psl_core::par::Exec;
use psl_core::protein::{import_uniprot_tsv, read_proteins_file, ProteinRecord};
use psl_core::qa_forge::{generate_corpus, synthetic_responder, GenerateConfig, PromptTemplates};
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn dag() -> GoDag {
    parse_obo(BufReader::new(File::open(fixture("toy_go.obo")).unwrap())).unwrap()
}

fn proteins() -> Vec<ProteinRecord> {
    read_proteins_file(&fixture("proteins.jsonl")).unwrap()
}

#[derive(Deserialize)]
struct Golden {
    params: PruningParams,
    retained: Vec<GoldenNode>,
    counts: BTreeMap<String, u64>,
}

#[derive(Deserialize)]
struct GoldenNode {
    term_id: String,
    rule: RetentionRule,
    depth: u32,
    count: u64,
}

fn golden() -> Golden {
    serde_json::from_reader(File::open(fixture("prune_golden.json")).unwrap()).unwrap()
}

#[test]
fn uniprot_import_matches_protein_fixture() {
    let imported = import_uniprot_tsv(File::open(fixture("uniprot_sample.tsv")).unwrap()).unwrap();
    assert_eq!(imported, proteins());
}

#[test]
fn counts_match_golden() {
    let g = golden();
    let mut d = dag();
    let report = d.annotate_counts(&proteins());
    assert_eq!(report.annotated_proteins, g.params.total_count);
    for (term, count) in &g.counts {
        assert_eq!(d.get(term).unwrap().propagated_count, *count, "{term}");
    }
}

#[test]
fn prune_matches_golden() {
    let g = golden();
    let mut d = dag();
    d.annotate_counts(&proteins());
    for exec in [Exec::Sequential, Exec::default()] {
        let pr = d.prune_with(&g.params, exec).unwrap();
        let got: Vec<(&str, RetentionRule, u32, u64)> =
            pr.retained.iter().map(|r| (r.term_id.as_str(), r.rule, r.depth, r.count)).collect();
        let want: Vec<(&str, RetentionRule, u32, u64)> =
            g.retained.iter().map(|r| (r.term_id.as_str(), r.rule, r.depth, r.count)).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn ic_monotone_on_fixture() {
    let d = dag();
    let ic = IcTable::compute(&d, &proteins(), LogBase::Natural);
    assert!(!ic.is_empty());
    for node in d.nodes() {
        let Some(child) = ic.get(&node.term_id) else { continue };
        for p in &node.parents {
            let parent = ic.get(p).expect("ancestor of a counted term is counted");
            assert!(parent <= child + 1e-12, "{p} -> {}", node.term_id);
        }
    }
}

#[test]
fn dedup_then_generate_then_retrieve() {
    let g = golden();
    let mut d = dag();
    let ps = proteins();
    d.annotate_counts(&ps);
    let pr = d.prune(&g.params).unwrap();
    let grouping = group_proteins(&pr.term_ids(), &d, &ps);
    let cfg = DedupConfig { per_group_target: Some(20), ..Default::default() };
    let out = deduplicate(&d, &grouping.groups, &ps, &cfg).unwrap();
    assert!(!out.proteins.is_empty() && out.proteins.len() < ps.len());
    for rec in &out.provenance {
        assert!(grouping.groups[&rec.group].contains(&rec.accession));
    }

    let gw = Gateway::mock(MockBackend::new().with_responder(synthetic_responder()));
    let gen = generate_corpus(&out.proteins, &PromptTemplates::builtin(), &gw, &GenerateConfig::default(), None).unwrap();
    assert!(gen.is_complete());
    assert_eq!(gen.rejects.len(), 0);

    let index = CorpusIndex::build(&gen.instances, 3).unwrap();
    let p = &out.proteins[0];
    let q = Query {
        accession: Some(p.accession.clone()),
        sequence: p.sequence.clone(),
        question: "What is the function of this protein?".into(),
    };
    let bundle = build_context(&q, &index, &RetrievalConfig::default()).unwrap();
    assert_eq!(bundle.exemplars.len(), 4);
    assert!(bundle.exemplars.iter().all(|e| e.instance.accession != p.accession));
}
