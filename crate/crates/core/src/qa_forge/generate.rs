use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::parse::{parse_response, ParseError};
use super::{PromptTemplates, QaError, QaInstance, QaType};
use crate::llm_gateway::{Gateway, Message};
use crate::par::Exec;
use crate::protein::ProteinRecord;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub types: Vec<QaType>,
    /// Extra attempts after a response fails to parse.
    pub retries: u32,
    /// Tasks per checkpoint flush.
    pub chunk_size: usize,
    /// Optional cap on proteins per type, taken in accession order.
    pub max_per_type: BTreeMap<QaType, usize>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            types: QaType::ALL.to_vec(),
            retries: 2,
            chunk_size: 16,
            max_per_type: BTreeMap::new(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub accession: String,
    pub qa_type: QaType,
    pub attempts: u32,
    pub last_error: String,
    pub raw: String,
}

/// One finished protein×type task, as stored in the checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub accession: String,
    pub qa_type: QaType,
    pub instances: Vec<QaInstance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject: Option<RejectRecord>,
    /// Parse failures that were retried.
    #[serde(default)]
    pub retries: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenerationReport {
    pub instances_per_type: BTreeMap<QaType, usize>,
    pub rejects_per_type: BTreeMap<QaType, usize>,
    pub total_instances: usize,
    pub total_rejects: usize,
    pub parse_retries: u64,
    pub resumed_tasks: usize,
    pub pending_tasks: usize,
}

#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    /// Ordered by accession, then type, then pair index.
    pub instances: Vec<QaInstance>,
    pub rejects: Vec<RejectRecord>,
    /// Tasks not attempted or cut short by a gateway failure.
    pub pending: Vec<(String, QaType)>,
    pub gateway_error: Option<String>,
    pub report: GenerationReport,
}

impl GenerationOutcome {
    pub fn is_complete(&self) -> bool {
        self.pending.is_empty()
    }
}

/// Append-only record of finished tasks; reopening it resumes a run.
pub struct Checkpoint {
    path: PathBuf,
    writer: BufWriter<File>,
    done: Vec<TaskRecord>,
}

/// Reads every complete line of a checkpoint file. A torn final line (no
/// trailing newline) from an interrupted write is ignored.
pub fn read_checkpoint(path: &Path) -> Result<Vec<TaskRecord>, QaError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<&str> = text.split('\n').collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let last = i + 1 == lines.len();
        match serde_json::from_str::<TaskRecord>(line) {
            Ok(r) => out.push(r),
            Err(e) if last => log::warn!("ignoring torn checkpoint line {}: {e}", i + 1),
            Err(e) => return Err(QaError::Checkpoint { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(out)
}

impl Checkpoint {
    pub fn open(path: &Path) -> Result<Checkpoint, QaError> {
        let done = read_checkpoint(path)?;
        // rewrite so a torn tail never precedes new appends
        let mut file = BufWriter::new(File::create(path)?);
        for r in &done {
            serde_json::to_writer(&mut file, r).map_err(std::io::Error::from)?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Checkpoint { path: path.to_path_buf(), writer: BufWriter::new(file), done })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[TaskRecord] {
        &self.done
    }

    fn append(&mut self, r: &TaskRecord) -> Result<(), QaError> {
        serde_json::to_writer(&mut self.writer, r).map_err(std::io::Error::from)?;
        self.writer.write_all(b"\n")?;
        self.done.push(r.clone());
        Ok(())
    }

    fn flush(&mut self) -> Result<(), QaError> {
        self.writer.flush()?;
        Ok(())
    }
}

enum TaskResult {
    Done(TaskRecord),
    GatewayFailed(String),
}

fn retry_prompt(prompt: &str, err: &ParseError) -> String {
    format!(
        "{prompt}\n\nYour previous response could not be parsed ({err}). Reply again using exactly the requested output format."
    )
}

fn build_instances(p: &ProteinRecord, t: QaType, drafts: Vec<super::QaDraft>, model: &str) -> Vec<QaInstance> {
    let batch = (t == QaType::Knowledge).then(|| format!("{}:{}", p.accession, t.code()));
    drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| QaInstance {
            id: match &batch {
                Some(b) => format!("{b}:{}", i + 1),
                None => format!("{}:{}", p.accession, t.code()),
            },
            accession: p.accession.clone(),
            qa_type: t,
            question: d.question,
            answer: d.answer,
            explanation: d.explanation,
            verdict: d.verdict,
            source_model: model.to_string(),
            sequence: p.sequence.clone(),
            batch: batch.clone(),
        })
        .collect()
}

fn run_task(p: &ProteinRecord, t: QaType, templates: &PromptTemplates, gateway: &Gateway, retries: u32) -> TaskResult {
    let base = templates.render(p, t);
    let mut prompt = base.clone();
    let mut last_error = ParseError::new("no attempt");
    let mut last_raw = String::new();
    for attempt in 0..=retries {
        let text = match gateway.complete(&[Message::user(prompt.as_str())]) {
            Ok(c) => c.text,
            Err(e) => return TaskResult::GatewayFailed(e.to_string()),
        };
        let parsed = parse_response(t, &text).and_then(|drafts| {
            let inst = build_instances(p, t, drafts, &gateway.config().model);
            inst.iter().try_for_each(QaInstance::validate)?;
            Ok(inst)
        });
        match parsed {
            Ok(instances) => {
                return TaskResult::Done(TaskRecord {
                    accession: p.accession.clone(),
                    qa_type: t,
                    instances,
                    reject: None,
                    retries: attempt,
                })
            }
            Err(e) => {
                log::debug!("{} {t}: attempt {} unparseable: {e}", p.accession, attempt + 1);
                prompt = retry_prompt(&base, &e);
                last_error = e;
                last_raw = text;
            }
        }
    }
    TaskResult::Done(TaskRecord {
        accession: p.accession.clone(),
        qa_type: t,
        instances: Vec::new(),
        reject: Some(RejectRecord {
            accession: p.accession.clone(),
            qa_type: t,
            attempts: retries + 1,
            last_error: last_error.message,
            raw: last_raw,
        }),
        retries,
    })
}

/// Renders, sends and parses every protein×type task.
///
/// Tasks run in chunks; each finished chunk is appended to `checkpoint`
/// before the next starts. Tasks already present in the checkpoint are not
/// re-run. When the gateway gives up, the remaining tasks are reported as
/// pending and the partial corpus is returned.
pub fn generate_corpus(
    proteins: &[ProteinRecord],
    templates: &PromptTemplates,
    gateway: &Gateway,
    config: &GenerateConfig,
    mut checkpoint: Option<&mut Checkpoint>,
) -> Result<GenerationOutcome, QaError> {
    let mut sorted: Vec<&ProteinRecord> = proteins.iter().collect();
    sorted.sort_by(|a, b| a.accession.cmp(&b.accession));
    let mut types = config.types.clone();
    types.sort();
    types.dedup();

    let mut tasks: Vec<(&ProteinRecord, QaType)> = Vec::new();
    for &t in &types {
        let cap = config.max_per_type.get(&t).copied().unwrap_or(usize::MAX);
        tasks.extend(sorted.iter().take(cap).map(|p| (*p, t)));
    }
    tasks.sort_by(|a, b| a.0.accession.cmp(&b.0.accession).then(a.1.cmp(&b.1)));

    let mut done: HashMap<(String, QaType), TaskRecord> = HashMap::new();
    if let Some(cp) = checkpoint.as_deref() {
        for r in cp.records() {
            done.insert((r.accession.clone(), r.qa_type), r.clone());
        }
    }
    let mut report = GenerationReport {
        resumed_tasks: tasks.iter().filter(|(p, t)| done.contains_key(&(p.accession.clone(), *t))).count(),
        ..GenerationReport::default()
    };
    let todo: Vec<(&ProteinRecord, QaType)> = tasks
        .iter()
        .copied()
        .filter(|(p, t)| !done.contains_key(&(p.accession.clone(), *t)))
        .collect();

    let mut pending = Vec::new();
    let mut gateway_error = None;
    for chunk in todo.chunks(config.chunk_size.max(1)) {
        if gateway_error.is_some() {
            pending.extend(chunk.iter().map(|(p, t)| (p.accession.clone(), *t)));
            continue;
        }
        let results = config
            .exec
            .map(chunk, |(p, t)| run_task(p, *t, templates, gateway, config.retries));
        for ((p, t), r) in chunk.iter().zip(results) {
            match r {
                TaskResult::Done(rec) => {
                    if let Some(cp) = checkpoint.as_deref_mut() {
                        cp.append(&rec)?;
                    }
                    done.insert((p.accession.clone(), *t), rec);
                }
                TaskResult::GatewayFailed(e) => {
                    pending.push((p.accession.clone(), *t));
                    gateway_error.get_or_insert(e);
                }
            }
        }
        if let Some(cp) = checkpoint.as_deref_mut() {
            cp.flush()?;
        }
    }
    if let Some(e) = &gateway_error {
        log::error!("gateway failure, {} tasks pending: {e}", pending.len());
    }

    let mut instances = Vec::new();
    let mut rejects = Vec::new();
    for (p, t) in &tasks {
        let Some(rec) = done.get(&(p.accession.clone(), *t)) else {
            continue;
        };
        report.parse_retries += rec.retries as u64;
        *report.instances_per_type.entry(*t).or_default() += rec.instances.len();
        instances.extend(rec.instances.iter().cloned());
        if let Some(r) = &rec.reject {
            *report.rejects_per_type.entry(*t).or_default() += 1;
            rejects.push(r.clone());
        }
    }
    report.total_instances = instances.len();
    report.total_rejects = rejects.len();
    report.pending_tasks = pending.len();
    Ok(GenerationOutcome { instances, rejects, pending, gateway_error, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_gateway::{BackendError, MockBackend, MockReply};
    use crate::protein::read_proteins;
    use crate::qa_forge::synthetic_responder;

    fn proteins(n: usize) -> Vec<ProteinRecord> {
        let text = include_str!("../../../../fixtures/proteins.jsonl");
        read_proteins(text.as_bytes()).unwrap().into_iter().take(n).collect()
    }

    fn synthetic_gateway() -> Gateway {
        Gateway::mock(MockBackend::new().with_responder(synthetic_responder()))
    }

    #[test]
    fn four_types_per_protein() {
        let ps = proteins(5);
        let gw = synthetic_gateway();
        let out = generate_corpus(&ps, &PromptTemplates::builtin(), &gw, &GenerateConfig::default(), None).unwrap();
        assert!(out.is_complete());
        assert!(out.rejects.is_empty());
        for p in &ps {
            let types: std::collections::BTreeSet<QaType> =
                out.instances.iter().filter(|i| i.accession == p.accession).map(|i| i.qa_type).collect();
            assert_eq!(types.len(), 4);
        }
        let sum: usize = out.report.instances_per_type.values().sum();
        assert_eq!(sum, out.instances.len());
        let keys: Vec<(String, QaType)> = out.instances.iter().map(|i| (i.accession.clone(), i.qa_type)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn garbage_then_valid_consumes_one_retry() {
        let ps = proteins(1);
        let templates = PromptTemplates::builtin();
        let prompt = templates.render(&ps[0], QaType::TrueFalse);
        let backend = MockBackend::new()
            .with_reply(prompt, "I cannot comply.")
            .with_responder(synthetic_responder());
        let gw = Gateway::mock(backend);
        let cfg = GenerateConfig { types: vec![QaType::TrueFalse], ..GenerateConfig::default() };
        let out = generate_corpus(&ps, &templates, &gw, &cfg, None).unwrap();
        assert_eq!(out.instances.len(), 1);
        assert_eq!(out.report.parse_retries, 1);
        assert_eq!(gw.usage().completions, 2);
    }

    #[test]
    fn always_garbage_lands_in_rejects() {
        let ps = proteins(2);
        let gw = Gateway::mock(MockBackend::new().with_responder(|_: &crate::llm_gateway::ChatRequest| Some("nope".to_string())));
        let cfg = GenerateConfig { types: vec![QaType::Knowledge], retries: 2, ..GenerateConfig::default() };
        let out = generate_corpus(&ps, &PromptTemplates::builtin(), &gw, &cfg, None).unwrap();
        assert!(out.instances.is_empty());
        assert_eq!(out.rejects.len(), 2);
        assert!(out.rejects.iter().all(|r| r.attempts == 3 && r.raw == "nope"));
        assert_eq!(gw.usage().completions, 6);
    }

    #[test]
    fn gateway_failure_then_resume_matches_full_run() {
        let ps = proteins(6);
        let templates = PromptTemplates::builtin();
        let cfg = GenerateConfig { chunk_size: 4, exec: Exec::Sequential, ..GenerateConfig::default() };
        let full = generate_corpus(&ps, &templates, &synthetic_gateway(), &cfg, None).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.jsonl");
        // the fourth protein's attribute prompt hits a hard server failure
        let poison = templates.render(&ps[3], QaType::Attribute);
        let failing = Gateway::mock(
            MockBackend::new()
                .with_sequence(poison, vec![MockReply::Error(BackendError::Status { code: 503, body: String::new() })])
                .with_responder(synthetic_responder()),
        );
        let mut cp = Checkpoint::open(&path).unwrap();
        let partial = generate_corpus(&ps, &templates, &failing, &cfg, Some(&mut cp)).unwrap();
        drop(cp);
        assert!(!partial.is_complete());
        assert!(partial.gateway_error.is_some());
        assert!(partial.instances.len() < full.instances.len());

        let mut cp = Checkpoint::open(&path).unwrap();
        let resumed = generate_corpus(&ps, &templates, &synthetic_gateway(), &cfg, Some(&mut cp)).unwrap();
        assert!(resumed.is_complete());
        assert!(resumed.report.resumed_tasks > 0);
        assert_eq!(resumed.instances, full.instances);
    }

    #[test]
    fn torn_checkpoint_tail_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let rec = TaskRecord { accession: "A".into(), qa_type: QaType::Attribute, instances: vec![], reject: None, retries: 0 };
        std::fs::write(&path, format!("{}\n{{\"accession\":\"B", serde_json::to_string(&rec).unwrap())).unwrap();
        let cp = Checkpoint::open(&path).unwrap();
        assert_eq!(cp.records().len(), 1);
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
        std::fs::write(&path, "garbage\n{}\n").unwrap();
        assert!(matches!(read_checkpoint(&path), Err(QaError::Checkpoint { line: 1, .. })));
    }

    #[test]
    fn per_type_cap() {
        let ps = proteins(4);
        let mut cfg = GenerateConfig { types: vec![QaType::Attribute, QaType::Descriptive], ..GenerateConfig::default() };
        cfg.max_per_type.insert(QaType::Descriptive, 1);
        let out = generate_corpus(&ps, &PromptTemplates::builtin(), &synthetic_gateway(), &cfg, None).unwrap();
        assert_eq!(out.report.instances_per_type[&QaType::Attribute], 4);
        assert_eq!(out.report.instances_per_type[&QaType::Descriptive], 1);
    }
}
