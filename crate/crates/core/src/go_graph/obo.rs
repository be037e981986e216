use std::collections::BTreeSet;
use std::io::BufRead;

use super::{GoDag, GoError, GoNode, Namespace};

#[derive(Default)]
struct Stanza {
    line: usize,
    id: Option<String>,
    name: Option<String>,
    namespace: Option<(usize, String)>,
    is_a: Vec<String>,
    alt_ids: Vec<String>,
    obsolete: bool,
}

/// Strips a trailing `! comment` and `{qualifier}` block from a tag value.
fn clean_value(value: &str) -> &str {
    let mut v = value;
    if let Some(pos) = v.find(" !") {
        v = &v[..pos];
    }
    if let Some(pos) = v.find(" {") {
        v = &v[..pos];
    }
    v.trim()
}

impl Stanza {
    fn finish(self, terms: &mut Vec<GoNode>, alts: &mut Vec<(String, String)>) -> Result<(), GoError> {
        let id = self.id.ok_or_else(|| GoError::Parse {
            line: self.line,
            message: "[Term] stanza without id".into(),
        })?;
        if self.obsolete {
            return Ok(());
        }
        let namespace = match self.namespace {
            Some((line, ns)) => ns.parse::<Namespace>().map_err(|message| GoError::Parse { line, message })?,
            None => {
                return Err(GoError::Parse {
                    line: self.line,
                    message: format!("term {id} has no namespace"),
                })
            }
        };
        for alt in self.alt_ids {
            alts.push((alt, id.clone()));
        }
        terms.push(GoNode {
            name: self.name.unwrap_or_default(),
            namespace,
            parents: self.is_a.into_iter().collect(),
            children: BTreeSet::new(),
            direct_count: 0,
            propagated_count: 0,
            depth: 0,
            term_id: id,
        });
        Ok(())
    }
}

/// Parses OBO 1.2/1.4 text. One node per non-obsolete `[Term]` stanza; only
/// `is_a` lines become edges, every other relationship is ignored.
pub fn parse_obo<R: BufRead>(input: R) -> Result<GoDag, GoError> {
    let mut terms = Vec::new();
    let mut alts = Vec::new();
    let mut current: Option<Stanza> = None;

    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('!') {
            continue;
        }
        if trimmed.starts_with('[') {
            if let Some(st) = current.take() {
                st.finish(&mut terms, &mut alts)?;
            }
            if trimmed == "[Term]" {
                current = Some(Stanza {
                    line: line_no,
                    ..Default::default()
                });
            } else if !trimmed.ends_with(']') {
                return Err(GoError::Parse {
                    line: line_no,
                    message: format!("malformed stanza header {trimmed:?}"),
                });
            }
            continue;
        }
        let Some(st) = current.as_mut() else {
            // header tags and non-Term stanzas
            continue;
        };
        let Some((tag, value)) = trimmed.split_once(':') else {
            return Err(GoError::Parse {
                line: line_no,
                message: format!("expected `tag: value`, got {trimmed:?}"),
            });
        };
        let value = clean_value(value);
        match tag.trim() {
            "id" => {
                if value.is_empty() {
                    return Err(GoError::Parse {
                        line: line_no,
                        message: "empty id".into(),
                    });
                }
                st.id = Some(value.to_string());
            }
            "name" => st.name = Some(value.to_string()),
            "namespace" => st.namespace = Some((line_no, value.to_string())),
            "is_a" => st.is_a.push(value.to_string()),
            "alt_id" => st.alt_ids.push(value.to_string()),
            "is_obsolete" => st.obsolete = value == "true",
            _ => {}
        }
    }
    if let Some(st) = current.take() {
        st.finish(&mut terms, &mut alts)?;
    }
    GoDag::build(terms, alts)
}
