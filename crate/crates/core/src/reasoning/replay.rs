use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{CallKind, DecisionProvider, ProviderError, ProviderKind, ProviderRequest};

/// One recorded provider answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub episode_id: String,
    pub step_index: u32,
    pub call_kind: CallKind,
    /// Position among calls with the same episode, step and kind.
    pub ordinal: u32,
    pub output: String,
}

type Key = (String, u32, CallKind);

#[derive(Default)]
struct Ordinals(BTreeMap<Key, u32>);

impl Ordinals {
    fn next(&mut self, req: &ProviderRequest) -> (Key, u32) {
        let key = (req.episode_id.clone(), req.step_index, req.kind());
        let slot = self.0.entry(key.clone()).or_insert(0);
        let ordinal = *slot;
        *slot += 1;
        (key, ordinal)
    }

    fn forget(&mut self, episode_id: &str) {
        self.0.retain(|k, _| k.0 != episode_id);
    }
}

/// Answers from a transcript. Any call that is not in the transcript is a
/// hard error.
pub struct ReplayProvider {
    identity: String,
    entries: BTreeMap<(Key, u32), String>,
    ordinals: Ordinals,
}

impl ReplayProvider {
    pub fn new(identity: &str, transcript: Vec<TranscriptEntry>) -> Self {
        let entries = transcript
            .into_iter()
            .map(|e| (((e.episode_id, e.step_index, e.call_kind), e.ordinal), e.output))
            .collect();
        ReplayProvider { identity: identity.into(), entries, ordinals: Ordinals::default() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl DecisionProvider for ReplayProvider {
    fn identity(&self) -> String {
        format!("replay:{}", self.identity)
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Replay
    }

    fn complete(&mut self, req: &ProviderRequest) -> Result<String, ProviderError> {
        let (key, ordinal) = self.ordinals.next(req);
        self.entries.get(&(key.clone(), ordinal)).cloned().ok_or_else(|| {
            ProviderError::Replay(format!("no entry for episode {} step {} {} #{ordinal}", key.0, key.1, key.2))
        })
    }

    fn begin_episode(&mut self, episode_id: &str) {
        self.ordinals.forget(episode_id);
    }
}

/// Wraps a provider and keeps a transcript of every answer it gave.
pub struct RecordingProvider<P> {
    pub inner: P,
    pub transcript: Vec<TranscriptEntry>,
    ordinals: Ordinals,
}

impl<P: DecisionProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        RecordingProvider { inner, transcript: Vec::new(), ordinals: Ordinals::default() }
    }
}

impl<P: DecisionProvider> DecisionProvider for RecordingProvider<P> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn complete(&mut self, req: &ProviderRequest) -> Result<String, ProviderError> {
        let output = self.inner.complete(req)?;
        let ((episode_id, step_index, call_kind), ordinal) = self.ordinals.next(req);
        self.transcript.push(TranscriptEntry { episode_id, step_index, call_kind, ordinal, output: output.clone() });
        Ok(output)
    }

    fn begin_episode(&mut self, episode_id: &str) {
        self.ordinals.forget(episode_id);
        self.inner.begin_episode(episode_id)
    }
}
