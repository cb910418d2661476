//! Experiment config files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use regex::Regex;
use serde::Deserialize;

use crate::agents::AgentSpec;
use crate::prompting::{PromptError, Templates};
use crate::provider::{
    ClientOptions, Clock, CompletionClient, MockProvider, OpenAiProvider, Predictor, ProviderError, ProviderOptions,
    ProviderParams, RetryPolicy, API_KEY_ENV,
};
use crate::tournament::GridSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("environment variable {0} is not set")]
    MissingEnv(String),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("provider '{id}': {message}")]
    Provider { id: String, message: String },
    #[error("duplicate provider id '{0}'")]
    DuplicateProvider(String),
    #[error("agent '{agent}' refers to unknown provider '{provider}'")]
    UnknownProvider { agent: String, provider: String },
    #[error(transparent)]
    Templates(#[from] PromptError),
    #[error(transparent)]
    Client(#[from] ProviderError),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output directory for runs; defaults to `runs`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub offline: bool,
    #[serde(default)]
    pub cache: CacheConfig,
    /// Directory of template files overriding the built-in set named in the grid.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default)]
    pub retry: RetryConfig,
    #[serde(default)]
    pub providers: Vec<ProviderConfig>,
    pub grid: Option<GridSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Defaults to `<out>/cache`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig { enabled: true, dir: None }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryConfig {
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_base_ms")]
    pub base_delay_ms: u64,
    #[serde(default = "default_cap_ms")]
    pub max_delay_ms: u64,
}

fn default_retries() -> u32 {
    RetryPolicy::default().max_retries
}
fn default_base_ms() -> u64 {
    RetryPolicy::default().base_delay_ms
}
fn default_cap_ms() -> u64 {
    RetryPolicy::default().max_delay_ms
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig { max_retries: default_retries(), base_delay_ms: default_base_ms(), max_delay_ms: default_cap_ms() }
    }
}

impl From<&RetryConfig> for RetryPolicy {
    fn from(r: &RetryConfig) -> Self {
        RetryPolicy { max_retries: r.max_retries, base_delay_ms: r.base_delay_ms, max_delay_ms: r.max_delay_ms }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// OpenAI-compatible chat endpoint.
    Openai {
        id: String,
        endpoint: String,
        model: String,
        /// Falls back to `ARENA_API_KEY`.
        #[serde(default)]
        api_key: Option<String>,
        #[serde(default)]
        temperature: Option<f64>,
        #[serde(default)]
        max_completion_tokens: Option<u32>,
        #[serde(default)]
        forward_seed: bool,
        #[serde(default)]
        requests_per_second: Option<f64>,
        #[serde(default)]
        burst: Option<u32>,
    },
    /// Offline stand-in: a fixed script, or a scripted strategy read off each prompt.
    Mock {
        id: String,
        #[serde(default)]
        script: Option<Vec<String>>,
        #[serde(default)]
        policy: Option<String>,
        #[serde(default)]
        predictor: Option<String>,
        #[serde(default = "mock_model")]
        model: String,
    },
}

fn mock_model() -> String {
    "mock".into()
}

impl ProviderConfig {
    pub fn id(&self) -> &str {
        match self {
            ProviderConfig::Openai { id, .. } | ProviderConfig::Mock { id, .. } => id,
        }
    }
}

/// Replace `${NAME}` with the value of environment variable `NAME`.
pub fn interpolate_env(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, ConfigError> {
    let re = Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("valid pattern");
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for c in re.captures_iter(text) {
        let whole = c.get(0).expect("match");
        let name = &c[1];
        out.push_str(&text[last..whole.start()]);
        out.push_str(&lookup(name).ok_or_else(|| ConfigError::MissingEnv(name.to_string()))?);
        last = whole.end();
    }
    out.push_str(&text[last..]);
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let text = interpolate_env(text, |k| std::env::var(k).ok())?;
        Ok(toml::from_str(&text)?)
    }

    /// Relative paths inside the file are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.out);
        rebase(&mut cfg.cache.dir);
        rebase(&mut cfg.templates_dir);
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }

    pub fn templates(&self) -> Result<Templates, ConfigError> {
        match &self.templates_dir {
            Some(dir) => Ok(Templates::load_dir(dir)?),
            None => Ok(Templates::builtin(
                self.grid.as_ref().map_or(crate::prompting::DEFAULT_TEMPLATES, |g| &g.templates),
            )?),
        }
    }

    /// Every `llm:<id>` agent in the grid must name a configured provider.
    pub fn check_agents(&self, agents: &[AgentSpec]) -> Result<(), ConfigError> {
        for a in agents {
            if let Some(p) = a.provider() {
                if !self.providers.iter().any(|c| c.id() == p) {
                    return Err(ConfigError::UnknownProvider { agent: a.to_string(), provider: p.into() });
                }
            }
        }
        Ok(())
    }

    /// Build the completion client. `offline` (or the config's own flag) refuses network
    /// providers. Runs with only offline providers get a frozen clock so their logs
    /// reproduce byte for byte.
    pub fn build_client(
        &self,
        out: &Path,
        offline: bool,
        templates: &Templates,
    ) -> Result<CompletionClient, ConfigError> {
        let offline = offline || self.offline;
        let all_mock = self.providers.iter().all(|p| matches!(p, ProviderConfig::Mock { .. }));
        let cache_dir = self.cache.enabled.then(|| self.cache.dir.clone().unwrap_or_else(|| out.join("cache")));
        let mut client = CompletionClient::new(ClientOptions {
            retry: (&self.retry).into(),
            cache_dir,
            offline,
            clock: if all_mock { Clock::Frozen } else { Clock::System },
        });
        let mut seen = std::collections::HashSet::new();
        for p in &self.providers {
            if !seen.insert(p.id().to_string()) {
                return Err(ConfigError::DuplicateProvider(p.id().into()));
            }
            let bad = |message: String| ConfigError::Provider { id: p.id().into(), message };
            match p {
                ProviderConfig::Openai {
                    id,
                    endpoint,
                    model,
                    api_key,
                    temperature,
                    max_completion_tokens,
                    forward_seed,
                    requests_per_second,
                    burst,
                } => {
                    if offline {
                        return Err(ProviderError::Offline(id.clone()).into());
                    }
                    let key = api_key.clone().or_else(|| std::env::var(API_KEY_ENV).ok());
                    let backend = OpenAiProvider::new(id.clone(), endpoint.clone(), key).map_err(bad)?;
                    let mut params = ProviderParams::new(model.clone());
                    if let Some(t) = temperature {
                        params.temperature = *t;
                    }
                    if let Some(m) = max_completion_tokens {
                        params.max_completion_tokens = *m;
                    }
                    let options = ProviderOptions {
                        forward_seed: *forward_seed,
                        requests_per_second: *requests_per_second,
                        burst: burst.unwrap_or(1),
                    };
                    client.register(Arc::new(backend), params, options)?;
                }
                ProviderConfig::Mock { id, script, policy, predictor, model } => {
                    let backend = match (script, policy) {
                        (Some(s), None) => MockProvider::scripted(id.clone(), s.clone()),
                        (None, Some(policy)) => {
                            let act: AgentSpec =
                                policy.parse().map_err(|e: crate::agents::AgentError| bad(e.to_string()))?;
                            let predict: Predictor = match predictor {
                                Some(s) => s.parse().map_err(bad)?,
                                None => Predictor::default(),
                            };
                            MockProvider::policy(id.clone(), act, predict, templates).map_err(bad)?
                        }
                        _ => return Err(bad("a mock needs exactly one of `script` or `policy`".into())),
                    };
                    client.register(
                        Arc::new(backend),
                        ProviderParams::new(model.clone()),
                        ProviderOptions::default(),
                    )?;
                }
            }
        }
        Ok(client)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
out = "runs"
[cache]
enabled = false

[[providers]]
kind = "mock"
id = "m1"
policy = "alternator"

[[providers]]
kind = "mock"
id = "m2"
script = ["F", "J"]

[grid]
agents = ["llm:m1", "llm:m2", "alternator"]
games = ["pd", "bos"]
rounds = 5
"#;

    #[test]
    fn parses_demo() {
        let cfg = ExperimentConfig::parse(DEMO).unwrap();
        assert_eq!(cfg.providers.len(), 2);
        let grid = cfg.grid.as_ref().unwrap();
        assert_eq!(grid.rounds, 5);
        assert_eq!(grid.repetitions, 1);
        let t = cfg.templates().unwrap();
        let client = cfg.build_client(Path::new("runs"), true, &t).unwrap();
        assert_eq!(client.provider_ids().collect::<Vec<_>>(), vec!["m1", "m2"]);
        cfg.check_agents(&grid.agent_specs().unwrap()).unwrap();
    }

    #[test]
    fn env_interpolation() {
        let lookup = |k: &str| (k == "KEY").then(|| "s3cret".to_string());
        assert_eq!(interpolate_env("a = \"${KEY}\"", lookup).unwrap(), "a = \"s3cret\"");
        assert_eq!(interpolate_env("no vars $KEY {KEY}", lookup).unwrap(), "no vars $KEY {KEY}");
        assert!(matches!(interpolate_env("${NOPE}", lookup), Err(ConfigError::MissingEnv(n)) if n == "NOPE"));
    }

    #[test]
    fn offline_refuses_network_provider() {
        let text = r#"
[[providers]]
kind = "openai"
id = "gpt4"
endpoint = "http://localhost:1/v1/chat/completions"
model = "gpt-4"
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let t = Templates::base();
        assert!(matches!(
            cfg.build_client(Path::new("x"), true, &t),
            Err(ConfigError::Client(ProviderError::Offline(_)))
        ));
        assert!(cfg.build_client(Path::new("x"), false, &t).is_ok());
    }

    #[test]
    fn rejects_bad_providers() {
        let t = Templates::base();
        let both = "[[providers]]\nkind = \"mock\"\nid = \"m\"\nscript = [\"F\"]\npolicy = \"alternator\"\n";
        let cfg = ExperimentConfig::parse(both).unwrap();
        assert!(matches!(cfg.build_client(Path::new("x"), true, &t), Err(ConfigError::Provider { .. })));
        let dup = "[[providers]]\nkind = \"mock\"\nid = \"m\"\nscript = []\n[[providers]]\nkind = \"mock\"\nid = \"m\"\nscript = []\n";
        let cfg = ExperimentConfig::parse(dup).unwrap();
        assert!(matches!(cfg.build_client(Path::new("x"), true, &t), Err(ConfigError::DuplicateProvider(_))));
        let cfg = ExperimentConfig::parse(DEMO).unwrap();
        let stray = vec![AgentSpec::Llm { provider: "ghost".into() }];
        assert!(matches!(cfg.check_agents(&stray), Err(ConfigError::UnknownProvider { .. })));
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
    }
}
