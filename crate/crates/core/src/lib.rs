//! Building blocks for teaching frozen language models to read protein
//! sequences through retrieved bilingual exemplars.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`go_graph`] parses a Gene Ontology release, attaches protein counts and
//!    prunes the DAG into balanced functional grouping nodes.
//! 2. [`corpus_dedup`] removes redundancy inside every group, first by
//!    sequence identity clustering and then by functional information content
//!    with species-proportional sampling.
//! 3. [`qa_forge`] prompts a chat model (through [`llm_gateway`]) to turn the
//!    curated annotations into four kinds of question/answer pairs.
//! 4. [`context_engine`] retrieves exemplars for a new protein question by
//!    sequence homology and text similarity, fuses both rankings and assembles
//!    the final in-context prompt; [`evalkit`] scores the answers.
//!
//! Data-parallel loops go through [`par::Exec`], which falls back to plain
//! iteration when the `parallel` feature is disabled.

pub mod context_engine;
pub mod corpus_dedup;
pub mod evalkit;
pub mod go_graph;
pub mod jsonl;
pub mod llm_gateway;
pub mod par;
pub mod protein;
pub mod qa_forge;
pub mod text;

pub use protein::{Annotation, ProteinRecord, Superkingdom};
