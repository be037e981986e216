use std::io::{BufRead, Read};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::context_engine::{Query, TaskStyle};
use crate::protein::is_residue;

/// One benchmark question with its reference answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub sequence: String,
    pub question: String,
    pub reference: String,
    pub task: TaskStyle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    /// Excluded from retrieval when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accession: Option<String>,
}

impl EvalItem {
    pub fn query(&self) -> Query {
        Query {
            accession: self.accession.clone(),
            sequence: self.sequence.clone(),
            question: self.question.clone(),
        }
    }
}

pub fn read_eval_items<R: BufRead>(input: R) -> Result<Vec<EvalItem>, EvalError> {
    let items: Vec<EvalItem> = crate::jsonl::read_jsonl(input)?;
    check_items(&items)?;
    Ok(items)
}

fn check_items(items: &[EvalItem]) -> Result<(), EvalError> {
    let mut ids = std::collections::HashSet::new();
    for it in items {
        if !ids.insert(it.id.as_str()) {
            return Err(EvalError::Dataset(format!("duplicate item id {}", it.id)));
        }
        if it.sequence.is_empty() || !it.sequence.chars().all(is_residue) {
            return Err(EvalError::Dataset(format!("item {}: invalid sequence", it.id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    Jsonl,
    JsonArray,
    Csv,
    Tsv,
}

/// Field mapping from a benchmark's native records to [`EvalItem`].
/// Field names may be dotted paths into nested JSON objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub format: SourceFormat,
    pub task: TaskStyle,
    /// Missing or absent ids fall back to `<name>-<row>`.
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub accession: Option<String>,
    pub sequence: String,
    #[serde(default)]
    pub question: Option<String>,
    /// Used when the source has no question field.
    #[serde(default)]
    pub question_constant: Option<String>,
    pub reference: String,
    /// Strips Markdown code fences around the sequence.
    #[serde(default)]
    pub strip_code_fence: bool,
}

const BUILTIN: [(&str, &str); 3] = [
    ("protdescribe", include_str!("../../datasets/protdescribe.json")),
    ("protein2text_qa", include_str!("../../datasets/protein2text_qa.json")),
    ("mol_instructions", include_str!("../../datasets/mol_instructions.json")),
];

impl DatasetSpec {
    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN.iter().map(|b| b.0).collect()
    }

    pub fn builtin(name: &str) -> Result<DatasetSpec, EvalError> {
        let text = BUILTIN
            .iter()
            .find(|b| b.0 == name)
            .map(|b| b.1)
            .ok_or_else(|| EvalError::Dataset(format!("no built-in mapping {name:?}")))?;
        DatasetSpec::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<DatasetSpec, EvalError> {
        let spec: DatasetSpec = serde_json::from_str(text).map_err(|e| EvalError::Dataset(e.to_string()))?;
        if spec.question.is_none() && spec.question_constant.is_none() {
            return Err(EvalError::Dataset(format!("{}: needs question or question_constant", spec.name)));
        }
        Ok(spec)
    }
}

fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, key| cur.get(key))
}

fn as_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn clean_sequence(raw: &str, strip_fence: bool) -> String {
    let mut s = raw.trim();
    if strip_fence {
        s = s.trim_start_matches("```").trim_end_matches("```");
    }
    s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_uppercase()
}

fn map_record(spec: &DatasetSpec, row: usize, v: &Value) -> Result<EvalItem, EvalError> {
    let field = |name: &str| -> Result<String, EvalError> {
        lookup(v, name)
            .and_then(as_text)
            .ok_or_else(|| EvalError::Dataset(format!("{} record {}: missing field {name:?}", spec.name, row + 1)))
    };
    let id = spec
        .id
        .as_deref()
        .and_then(|f| lookup(v, f).and_then(as_text))
        .unwrap_or_else(|| format!("{}-{:06}", spec.name, row + 1));
    let question = match (&spec.question, &spec.question_constant) {
        (Some(f), _) => field(f)?,
        (None, Some(c)) => c.clone(),
        (None, None) => unreachable!("checked in from_json"),
    };
    Ok(EvalItem {
        id,
        sequence: clean_sequence(&field(&spec.sequence)?, spec.strip_code_fence),
        question: question.trim().to_string(),
        reference: field(&spec.reference)?.trim().to_string(),
        task: spec.task,
        dataset: Some(spec.name.clone()),
        accession: spec.accession.as_deref().and_then(|f| lookup(v, f).and_then(as_text)),
    })
}

/// Converts a benchmark file to evaluation items using `spec`.
pub fn import_dataset<R: Read>(spec: &DatasetSpec, mut input: R) -> Result<Vec<EvalItem>, EvalError> {
    let records: Vec<Value> = match spec.format {
        SourceFormat::Jsonl => {
            let mut text = String::new();
            input.read_to_string(&mut text)?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| serde_json::from_str(l).map_err(|e| EvalError::Dataset(format!("line {}: {e}", i + 1))))
                .collect::<Result<_, _>>()?
        }
        SourceFormat::JsonArray => serde_json::from_reader(input).map_err(|e| EvalError::Dataset(e.to_string()))?,
        SourceFormat::Csv | SourceFormat::Tsv => {
            let delim = if spec.format == SourceFormat::Tsv { b'\t' } else { b',' };
            let mut rdr = csv::ReaderBuilder::new().delimiter(delim).flexible(true).from_reader(input);
            let headers = rdr.headers().map_err(|e| EvalError::Dataset(e.to_string()))?.clone();
            let mut out = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(|e| EvalError::Dataset(e.to_string()))?;
                let obj = headers
                    .iter()
                    .zip(rec.iter())
                    .map(|(h, f)| (h.to_string(), Value::String(f.to_string())))
                    .collect();
                out.push(Value::Object(obj));
            }
            out
        }
    };
    let items = records
        .iter()
        .enumerate()
        .map(|(i, v)| map_record(spec, i, v))
        .collect::<Result<Vec<_>, _>>()?;
    check_items(&items)?;
    Ok(items)
}
