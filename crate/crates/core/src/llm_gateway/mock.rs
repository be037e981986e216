use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{BackendError, ChatBackend, ChatRequest, Completion, Usage};

/// Canned reply; a sequence of these is played back per prompt.
#[derive(Debug, Clone)]
pub enum MockReply {
    Text(String),
    Error(BackendError),
}

impl MockReply {
    pub fn text(s: impl Into<String>) -> Self {
        MockReply::Text(s.into())
    }
}

/// Computes a reply from the request, or declines with `None`.
pub trait Responder: Send + Sync {
    fn respond(&self, request: &ChatRequest) -> Option<String>;
}

impl<F> Responder for F
where
    F: Fn(&ChatRequest) -> Option<String> + Send + Sync,
{
    fn respond(&self, request: &ChatRequest) -> Option<String> {
        self(request)
    }
}

/// 64-bit FNV-1a, stable across platforms and releases.
pub fn stable_hash(seed: u64, data: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in data.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

const ECHO_WORDS: &[&str] = &[
    "protein", "binding", "domain", "membrane", "enzyme", "activity", "catalyzes", "transport",
    "kinase", "family", "nucleus", "cytoplasm", "regulation", "metal", "ion", "complex",
];

/// Offline backend. Lookup order per request: scripted replies keyed by the
/// last user message, then responders in registration order, then the echo
/// fallback if enabled. Anything else is an `Unscripted` error.
pub struct MockBackend {
    scripts: Mutex<HashMap<String, (Vec<MockReply>, usize)>>,
    responders: Vec<Box<dyn Responder>>,
    echo_seed: Option<u64>,
    calls: AtomicUsize,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend::new()
    }
}

impl MockBackend {
    pub fn new() -> Self {
        MockBackend {
            scripts: Mutex::new(HashMap::new()),
            responders: Vec::new(),
            echo_seed: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// Backend that answers every prompt with a deterministic hash-derived text.
    pub fn echo() -> Self {
        MockBackend::new().with_echo(0)
    }

    pub fn with_echo(mut self, seed: u64) -> Self {
        self.echo_seed = Some(seed);
        self
    }

    pub fn with_reply(self, prompt: impl Into<String>, reply: impl Into<String>) -> Self {
        self.with_sequence(prompt, vec![MockReply::Text(reply.into())])
    }

    /// Plays `replies` in order for `prompt`; the last one repeats.
    pub fn with_sequence(self, prompt: impl Into<String>, replies: Vec<MockReply>) -> Self {
        assert!(!replies.is_empty(), "empty reply sequence");
        self.scripts.lock().unwrap().insert(prompt.into(), (replies, 0));
        self
    }

    pub fn with_responder(mut self, responder: impl Responder + 'static) -> Self {
        self.responders.push(Box::new(responder));
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn echo_text(seed: u64, prompt: &str) -> String {
        let mut h = stable_hash(seed, prompt);
        let mut words = Vec::with_capacity(8);
        for _ in 0..8 {
            words.push(ECHO_WORDS[(h % ECHO_WORDS.len() as u64) as usize]);
            h = h.rotate_right(7).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        }
        format!("Mock answer {:016x}: {}.", stable_hash(seed, prompt), words.join(" "))
    }
}

impl ChatBackend for MockBackend {
    fn send(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = request.last_user();
        let scripted = {
            let mut scripts = self.scripts.lock().unwrap();
            scripts.get_mut(prompt).map(|(replies, pos)| {
                let r = replies[(*pos).min(replies.len() - 1)].clone();
                *pos += 1;
                r
            })
        };
        let text = match scripted {
            Some(MockReply::Text(t)) => t,
            Some(MockReply::Error(e)) => return Err(e),
            None => match self.responders.iter().find_map(|r| r.respond(request)) {
                Some(t) => t,
                None => match self.echo_seed {
                    Some(seed) => MockBackend::echo_text(seed, prompt),
                    None => {
                        let head: String = prompt.chars().take(60).collect();
                        return Err(BackendError::Unscripted(format!("no reply for prompt starting {head:?}")));
                    }
                },
            },
        };
        let chars: usize = request.messages.iter().map(|m| m.content.len()).sum();
        let usage = Usage {
            prompt_tokens: chars.div_ceil(4) as u64,
            completion_tokens: text.len().div_ceil(4) as u64,
        };
        Ok(Completion { text, usage })
    }
}
