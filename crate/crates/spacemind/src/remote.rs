//! Decision provider backed by an OpenAI-compatible chat-completions
//! endpoint (vLLM, llama.cpp server, hosted APIs).

use std::time::Duration;

use serde_json::{json, Value};
use spacemind_core::reasoning::{DecisionProvider, ProviderError, ProviderKind, ProviderRequest};

use crate::config::RemoteConfig;

pub struct RemoteProvider {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_tokens: u32,
}

impl RemoteProvider {
    /// Reads the API key from the configured environment variable, if set.
    pub fn new(config: &RemoteConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: &RemoteConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(config.timeout_s))).build().into();
        RemoteProvider {
            agent,
            url: format!("{}/chat/completions", config.endpoint.trim_end_matches('/')),
            model: config.model.clone(),
            api_key,
            temperature: config.temperature,
            max_tokens: config.max_tokens,
        }
    }

    fn body(&self, req: &ProviderRequest) -> Value {
        let mut user = String::new();
        if !req.memory_text.is_empty() {
            user.push_str("MEMORY\n");
            user.push_str(&req.memory_text);
            user.push_str("\n\n");
        }
        user.push_str(&req.user);
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": user},
            ],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

fn transport(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        other => ProviderError::Transport(other.to_string()),
    }
}

impl DecisionProvider for RemoteProvider {
    fn identity(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn complete(&mut self, req: &ProviderRequest) -> Result<String, ProviderError> {
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(self.body(req)).map_err(transport)?;
        let value: Value = resp.body_mut().read_json().map_err(transport)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Transport(format!("response has no message content: {value}")))
    }
}
