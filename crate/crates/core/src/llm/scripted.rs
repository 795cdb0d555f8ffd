use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{check_messages, ChatMessage, CompletionParams, LlmBackend, LlmError, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    /// Substring the last user message must contain.
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub matches: Option<String>,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Script {
    pub entries: Vec<ScriptEntry>,
}

impl Script {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn parse_script(text: &str) -> Result<Script, LlmError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| LlmError::SchemaViolation(format!("at {}: {}", e.path(), e.inner())))
}

pub fn load_script(path: &Path) -> Result<Script, LlmError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlmError::SchemaViolation(format!("cannot read {}: {e}", path.display())))?;
    parse_script(&text)
}

/// Replays a script in order. Single consumer only: overlapping calls fail
/// with [`LlmError::ConcurrentUse`].
pub struct ScriptedBackend {
    name: String,
    script: Script,
    cursor: Mutex<usize>,
    busy: AtomicBool,
}

struct BusyGuard<'a>(&'a AtomicBool);

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, script: Script) -> Self {
        Self {
            name: name.into(),
            script,
            cursor: Mutex::new(0),
            busy: AtomicBool::new(false),
        }
    }

    pub fn from_json(name: impl Into<String>, text: &str) -> Result<Self, LlmError> {
        Ok(Self::new(name, parse_script(text)?))
    }

    /// Entries consumed so far.
    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - self.consumed()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage], _params: &CompletionParams) -> Result<String, LlmError> {
        if self
            .busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return Err(LlmError::ConcurrentUse(self.name.clone()));
        }
        let _guard = BusyGuard(&self.busy);
        check_messages(messages)?;
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let Some(entry) = self.script.entries.get(*cursor) else {
            return Err(LlmError::ScriptExhausted(self.script.len()));
        };
        if let Some(expected) = &entry.matches {
            let last_user = messages
                .iter()
                .rev()
                .find(|m| m.role == Role::User)
                .map(|m| m.content.as_str())
                .unwrap_or("");
            if !last_user.contains(expected.as_str()) {
                return Err(LlmError::ScriptMismatch {
                    index: *cursor,
                    expected: expected.clone(),
                });
            }
        }
        *cursor += 1;
        Ok(entry.response.clone())
    }

    fn name(&self) -> &str {
        &self.name
    }
}
