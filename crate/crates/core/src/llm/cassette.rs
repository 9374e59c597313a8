use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CallId, ChatRequest, ChatResponse, LlmError, Provider};

/// One line of a cassette file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub stream: String,
    pub index: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

/// Passes calls through to `inner` and appends each exchange to a cassette.
pub struct Recorder<P> {
    inner: P,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<P: Provider> Recorder<P> {
    pub fn new(inner: P, path: impl Into<PathBuf>) -> Self {
        Recorder {
            inner,
            path: path.into(),
            lock: Mutex::new(()),
        }
    }
}

impl<P: Provider> Provider for Recorder<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, id: &CallId, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let response = self.inner.complete(id, request)?;
        let entry = CassetteEntry {
            stream: id.stream.clone(),
            index: id.index,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
            request: request.clone(),
            response: response.clone(),
        };
        let mut line = serde_json::to_string(&entry).map_err(std::io::Error::other)?;
        line.push('\n');
        let _guard = self.lock.lock().expect("cassette lock");
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        OpenOptions::new().create(true).append(true).open(&self.path)?.write_all(line.as_bytes())?;
        Ok(response)
    }
}

/// Serves recorded responses. The request at each `(stream, index)` must
/// equal the recorded one.
pub struct Replayer {
    name: String,
    entries: HashMap<(String, u64), CassetteEntry>,
}

impl Replayer {
    pub fn open(path: &Path, name: impl Into<String>) -> Result<Self, LlmError> {
        let file = File::open(path)?;
        let mut entries = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: CassetteEntry = serde_json::from_str(&line).map_err(|err| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {err}", path.display(), i + 1),
                )
            })?;
            let key = (e.stream.clone(), e.index);
            if entries.insert(key, e).is_some() {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: duplicate entry", path.display(), i + 1),
                )
                .into());
            }
        }
        Ok(Replayer {
            name: name.into(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn first_difference(recorded: &ChatRequest, actual: &ChatRequest) -> Option<String> {
    if recorded.temperature.to_bits() != actual.temperature.to_bits() {
        return Some(format!("temperature {} != recorded {}", actual.temperature, recorded.temperature));
    }
    if recorded.max_tokens != actual.max_tokens {
        return Some(format!("max_tokens {} != recorded {}", actual.max_tokens, recorded.max_tokens));
    }
    if recorded.messages.len() != actual.messages.len() {
        return Some(format!(
            "{} messages != recorded {}",
            actual.messages.len(),
            recorded.messages.len()
        ));
    }
    recorded
        .messages
        .iter()
        .zip(&actual.messages)
        .position(|(r, a)| r != a)
        .map(|i| format!("message {i} differs"))
}

impl Provider for Replayer {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, id: &CallId, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let entry = self
            .entries
            .get(&(id.stream.clone(), id.index))
            .ok_or_else(|| LlmError::ReplayExhausted {
                stream: id.stream.clone(),
                index: id.index,
            })?;
        if let Some(detail) = first_difference(&entry.request, request) {
            return Err(LlmError::ReplayMismatch {
                stream: id.stream.clone(),
                index: id.index,
                detail,
            });
        }
        Ok(entry.response.clone())
    }
}

/// Returns canned replies per stream, indexed by call position. A missing
/// reply or an `Err` script entry is a provider failure. Every request is
/// kept for inspection.
pub struct ScriptedProvider {
    name: String,
    script: BTreeMap<String, Vec<Result<String, String>>>,
    seen: Mutex<Vec<(CallId, ChatRequest)>>,
}

impl ScriptedProvider {
    pub fn new(name: impl Into<String>) -> Self {
        ScriptedProvider {
            name: name.into(),
            script: BTreeMap::new(),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn with_stream(mut self, stream: impl Into<String>, replies: impl IntoIterator<Item = String>) -> Self {
        self.script
            .insert(stream.into(), replies.into_iter().map(Ok).collect());
        self
    }

    pub fn with_failures(mut self, stream: impl Into<String>, errors: impl IntoIterator<Item = String>) -> Self {
        self.script
            .insert(stream.into(), errors.into_iter().map(Err).collect());
        self
    }

    pub fn requests(&self) -> Vec<(CallId, ChatRequest)> {
        self.seen.lock().expect("request log").clone()
    }
}

impl Provider for ScriptedProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, id: &CallId, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.seen.lock().expect("request log").push((id.clone(), request.clone()));
        let reply = self
            .script
            .get(&id.stream)
            .and_then(|r| r.get(id.index as usize))
            .cloned()
            .unwrap_or_else(|| Err(format!("no scripted reply for {}#{}", id.stream, id.index)));
        match reply {
            Ok(content) => Ok(ChatResponse {
                prompt_tokens: request.messages.iter().map(|m| m.content.len() as u64 / 4).sum(),
                completion_tokens: content.len() as u64 / 4,
                content,
            }),
            Err(message) => Err(LlmError::Provider {
                provider: self.name.clone(),
                message,
            }),
        }
    }
}
