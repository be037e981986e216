use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use psl_core::context_engine::RetrievalConfig;
use psl_core::corpus_dedup::{ClusterConfig, DedupConfig, LogBase, Prefilter};
use psl_core::go_graph::PruningParams;
use psl_core::llm_gateway::{GatewayConfig, RetryPolicy, DEFAULT_API_KEY_ENV};
use psl_core::par::Exec;
use psl_core::qa_forge::{GenerateConfig, QaType};

use crate::error::CliError;

/// Input locations; command-line flags take precedence.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub obo: Option<PathBuf>,
    pub proteins: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruningSection {
    pub lambda: f64,
    pub beta: f64,
    pub tau0: f64,
    pub alpha: f64,
    /// Defaults to the number of proteins with at least one resolved annotation.
    pub total_count: Option<u64>,
}

impl Default for PruningSection {
    fn default() -> Self {
        let p = PruningParams::default();
        PruningSection { lambda: p.lambda, beta: p.beta, tau0: p.tau0, alpha: p.alpha, total_count: None }
    }
}

impl PruningSection {
    pub fn params(&self, annotated: u64) -> PruningParams {
        PruningParams {
            lambda: self.lambda,
            beta: self.beta,
            tau0: self.tau0,
            alpha: self.alpha,
            total_count: self.total_count.unwrap_or(annotated),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupSection {
    pub identity: f64,
    pub per_group_target: Option<usize>,
    pub prefilter: bool,
    pub prefilter_k: usize,
    pub prefilter_min_fraction: f64,
    pub ic_base: LogBase,
}

impl Default for DedupSection {
    fn default() -> Self {
        let c = ClusterConfig::default();
        let pf = Prefilter::default();
        DedupSection {
            identity: c.threshold,
            per_group_target: None,
            prefilter: true,
            prefilter_k: pf.k,
            prefilter_min_fraction: pf.min_fraction,
            ic_base: LogBase::default(),
        }
    }
}

impl DedupSection {
    pub fn config(&self, exec: Exec) -> DedupConfig {
        DedupConfig {
            cluster: ClusterConfig {
                threshold: self.identity,
                prefilter: self
                    .prefilter
                    .then_some(Prefilter { k: self.prefilter_k, min_fraction: self.prefilter_min_fraction }),
            },
            per_group_target: self.per_group_target,
            ic_base: self.ic_base,
            exec,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub types: Vec<QaType>,
    pub retries: u32,
    pub chunk_size: usize,
    /// Keys are type names or codes (`attr`, `know`, `desc`, `tf`).
    pub max_per_type: BTreeMap<String, usize>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        let g = GenerateConfig::default();
        GenerationSection { types: g.types, retries: g.retries, chunk_size: g.chunk_size, max_per_type: BTreeMap::new() }
    }
}

impl GenerationSection {
    pub fn config(&self, exec: Exec) -> Result<GenerateConfig, CliError> {
        let mut max_per_type = BTreeMap::new();
        for (k, v) in &self.max_per_type {
            let t: QaType = k.parse().map_err(|e| CliError::Usage(format!("generation.max_per_type: {e}")))?;
            max_per_type.insert(t, *v);
        }
        if self.chunk_size == 0 {
            return Err(CliError::Usage("generation.chunk_size must be >= 1".into()));
        }
        Ok(GenerateConfig { types: self.types.clone(), retries: self.retries, chunk_size: self.chunk_size, max_per_type, exec })
    }
}

/// Gateway settings that may live in the config file. The endpoint and key
/// only ever come from the environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    pub api_key_env: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub max_inflight: usize,
    pub retry: RetryPolicy,
}

impl Default for GatewaySection {
    fn default() -> Self {
        let g = GatewayConfig::default();
        GatewaySection {
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            model: g.model,
            temperature: g.temperature,
            max_tokens: g.max_tokens,
            timeout_secs: g.timeout_secs,
            max_inflight: g.max_inflight,
            retry: g.retry,
        }
    }
}

impl GatewaySection {
    pub fn config(&self, verbose: bool) -> GatewayConfig {
        GatewayConfig {
            api_key_env: self.api_key_env.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            timeout_secs: self.timeout_secs,
            max_inflight: self.max_inflight,
            retry: self.retry,
            verbose,
            ..GatewayConfig::default()
        }
        .with_env_overrides()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: u64,
    pub paths: Paths,
    pub pruning: PruningSection,
    pub dedup: DedupSection,
    pub generation: GenerationSection,
    pub retrieval: RetrievalConfig,
    pub gateway: GatewaySection,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<AppConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        AppConfig::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<AppConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// SHA-256 over the effective settings, leaving out file paths so the
    /// same run from another directory hashes the same.
    pub fn hash(&self, command: &str) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(json.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c = AppConfig::parse("seed = 9\n[pruning]\nlambda = 0.05\n[retrieval]\nk = 6\nmode = \"seq\"\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.pruning.lambda, 0.05);
        assert_eq!(c.pruning.beta, 0.5);
        assert_eq!(c.retrieval.k, 6);
        assert_eq!(c.retrieval.candidate_m, 50);
    }

    #[test]
    fn endpoint_and_unknown_keys_rejected() {
        assert!(AppConfig::parse("[gateway]\nbase_url = \"http://x\"\n").is_err());
        assert!(AppConfig::parse("[gateway]\napi_key = \"sk\"\n").is_err());
        assert!(AppConfig::parse("bogus = 1\n").is_err());
    }

    #[test]
    fn hash_ignores_paths() {
        let a = AppConfig::default();
        let mut b = AppConfig::default();
        b.paths.obo = Some("/elsewhere/go.obo".into());
        assert_eq!(a.hash("x"), b.hash("x"));
        assert_ne!(a.hash("x"), a.hash("y"));
        b.seed = 1;
        assert_ne!(a.hash("x"), b.hash("x"));
        assert_eq!(a.hash("x").len(), 64);
    }

    #[test]
    fn max_per_type_codes() {
        let c = AppConfig::parse("[generation]\nmax_per_type = { tf = 3, attribute = 2 }\n").unwrap();
        let g = c.generation.config(Exec::Sequential).unwrap();
        assert_eq!(g.max_per_type[&QaType::TrueFalse], 3);
        assert_eq!(g.max_per_type[&QaType::Attribute], 2);
    }
}
