//! Language-model backends: a deterministic offline mock and an
//! OpenAI-compatible HTTP client.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::PromptMode;
use super::request::Composition;
use crate::error::ConstraintError;
use crate::symmetry::{SpaceGroupId, WyckoffTable};

pub trait Backend: Send + Sync {
    /// Completes one prompt. `seed` varies across retries.
    fn complete(&self, prompt: &str, seed: u64) -> Result<String, ConstraintError>;
}

/// Most common space groups by number of distinct elements.
const FREQUENT_GROUPS: [&[u16]; 4] = [
    &[225, 229, 194, 227, 191, 166, 139, 12, 64, 2],
    &[225, 221, 194, 62, 139, 191, 12, 166, 227, 63],
    &[62, 225, 139, 221, 12, 14, 166, 194, 2, 63],
    &[14, 2, 62, 12, 15, 225, 139, 166, 63, 1],
];

/// Largest cell the mock will propose.
pub const MOCK_MAX_ATOMS: usize = 48;
/// Formula-unit multiples the mock tries.
pub const MOCK_MAX_SCALE: u32 = 8;
const SEARCH_BUDGET: usize = 20_000;

/// Offline backend that reads the structured input lines of the bundled
/// templates and answers with a frequency heuristic. It is a pure function of
/// the prompt text and, like a model at temperature 0, ignores the seed.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

struct MockInput {
    composition: Composition,
    space_group: Option<SpaceGroupId>,
    candidates: Vec<(char, usize)>,
}

fn field<'a>(prompt: &'a str, key: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.trim().strip_prefix(key).map(str::trim))
}

fn read_prompt(prompt: &str) -> Option<MockInput> {
    let composition = if let Some(f) = field(prompt, "Formula:") {
        Composition::parse_formula(f).ok()?
    } else {
        let e = field(prompt, "Elements:")?;
        Composition::Elements(e.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    };
    let space_group = match field(prompt, "Space group:") {
        Some(s) => Some(SpaceGroupId::new(s.split_whitespace().next()?.parse().ok()?).ok()?),
        None => None,
    };
    let mut candidates = Vec::new();
    if let Some(c) = field(prompt, "Candidate Wyckoff letters:") {
        for item in c.split(',') {
            let item = item.trim();
            let letter = item.chars().next()?;
            let mult = item[letter.len_utf8()..].trim().trim_start_matches('(').trim_end_matches(')').parse().ok()?;
            candidates.push((letter, mult));
        }
    }
    Some(MockInput { composition, space_group, candidates })
}

/// Letters whose orbits have no free parameter can host one orbit only.
fn letter_options(sg: SpaceGroupId) -> Vec<(char, usize, bool)> {
    WyckoffTable::global().positions(sg).iter().map(|w| (w.letter, w.multiplicity, !w.is_fixed())).collect()
}

#[allow(clippy::too_many_arguments)]
fn search(
    targets: &[(String, usize)],
    ei: usize,
    remaining: usize,
    from: usize,
    opts: &[(char, usize, bool)],
    used: &mut [bool],
    out: &mut Vec<(String, char)>,
    budget: &mut usize,
) -> bool {
    if remaining == 0 {
        return match targets.get(ei + 1) {
            Some((_, t)) => search(targets, ei + 1, *t, 0, opts, used, out, budget),
            None => true,
        };
    }
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    for i in from..opts.len() {
        let (letter, mult, reusable) = opts[i];
        if mult > remaining || used[i] {
            continue;
        }
        used[i] = !reusable;
        out.push((targets[ei].0.clone(), letter));
        let next = if reusable { i } else { i + 1 };
        if search(targets, ei, remaining - mult, next, opts, used, out, budget) {
            return true;
        }
        out.pop();
        used[i] = false;
    }
    false
}

/// Assigns letters so that each element reaches its target count.
pub fn assign_counts(sg: SpaceGroupId, targets: &[(String, usize)]) -> Option<Vec<(String, char)>> {
    let opts = letter_options(sg);
    let mut used = vec![false; opts.len()];
    let mut out = Vec::new();
    let mut budget = SEARCH_BUDGET;
    let first = targets.first()?.1;
    if first == 0 || targets.iter().any(|(_, t)| *t == 0) {
        return None;
    }
    search(targets, 0, first, 0, &opts, &mut used, &mut out, &mut budget).then_some(out)
}

/// One orbit per element on the smallest available positions.
fn assign_elements(sg: SpaceGroupId, elements: &[String]) -> Option<Vec<(String, char)>> {
    let opts = letter_options(sg);
    let mut used = vec![false; opts.len()];
    let mut out = Vec::new();
    for el in elements {
        let i = (0..opts.len()).find(|i| !used[*i])?;
        if !opts[i].2 {
            used[i] = true;
        }
        out.push((el.clone(), opts[i].0));
    }
    Some(out)
}

fn mock_assignment(sg: SpaceGroupId, comp: &Composition) -> Option<Vec<(String, char)>> {
    match comp {
        Composition::Elements(e) => assign_elements(sg, e),
        Composition::Formula(f) => {
            let units: usize = f.iter().map(|(_, n)| *n as usize).sum();
            (1..=MOCK_MAX_SCALE as usize).take_while(|s| s * units <= MOCK_MAX_ATOMS).find_map(|s| {
                let targets: Vec<(String, usize)> = f.iter().map(|(e, n)| (e.clone(), s * *n as usize)).collect();
                assign_counts(sg, &targets)
            })
        }
    }
}

impl MockBackend {
    fn feasible_groups(comp: &Composition) -> Vec<SpaceGroupId> {
        let n = comp.elements().len();
        let list = FREQUENT_GROUPS[(n.max(1) - 1).min(3)];
        let mut out: Vec<SpaceGroupId> = list
            .iter()
            .map(|i| SpaceGroupId::new(*i as i64).expect("listed groups are valid"))
            .filter(|sg| mock_assignment(*sg, comp).is_some())
            .collect();
        let p1 = SpaceGroupId::new(1).unwrap();
        if !out.contains(&p1) {
            out.push(p1);
        }
        out
    }
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &str, _seed: u64) -> Result<String, ConstraintError> {
        let Some(input) = read_prompt(prompt) else {
            return Ok("I cannot answer this request.".into());
        };
        let mode = if input.space_group.is_some() { PromptMode::Wyckoff } else { PromptMode::SpaceGroup };
        match mode {
            PromptMode::SpaceGroup => {
                let groups = Self::feasible_groups(&input.composition);
                let g = groups[0];
                Ok(format!("The most suitable space group is {g}.\nspace group: {}", g.index()))
            }
            PromptMode::Wyckoff => {
                let sg = input.space_group.unwrap();
                let Some(assign) = mock_assignment(sg, &input.composition) else {
                    return Ok("No consistent Wyckoff assignment exists.".into());
                };
                let mult: BTreeMap<char, usize> = input.candidates.iter().cloned().collect();
                let tokens: Vec<String> =
                    assign.iter().map(|(e, l)| format!("{e}[{}{l}]", mult.get(l).copied().unwrap_or(0))).collect();
                Ok(tokens.join(" "))
            }
        }
    }
}

/// Connection settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: f64,
    pub max_retries: usize,
    pub temperature: f64,
    /// Environment variable holding the bearer token.
    pub token_env: Option<String>,
    pub max_concurrency: usize,
    pub backoff_base_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            temperature: 0.0,
            token_env: Some("SYMGEN_API_KEY".into()),
            max_concurrency: 4,
            backoff_base_ms: 1000,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ConstraintError::InvalidInput(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        if self.max_concurrency == 0 {
            return Err(ConstraintError::InvalidInput("concurrency cap must be at least 1".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ConstraintError::InvalidInput(format!("bad temperature {}", self.temperature)));
        }
        Ok(())
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut n = self.free.lock().unwrap();
        while *n == 0 {
            n = self.cv.wait(n).unwrap();
        }
        *n -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpBackend {
    config: BackendConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
    slots: Semaphore,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    seed: u64,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, ConstraintError> {
        config.validate()?;
        let token = match &config.token_env {
            Some(var) => std::env::var(var).ok(),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| ConstraintError::Transport(e.to_string()))?;
        let slots = Semaphore { free: Mutex::new(config.max_concurrency), cv: Condvar::new() };
        Ok(Self { config, client, token, slots })
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Result<String, (bool, String)> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.client.post(url).json(body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, format!("HTTP {status}")));
        }
        let v: serde_json::Value = resp.json().map_err(|e| (false, format!("bad response body: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| (false, "response has no choices[0].message.content".into()))
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &str, seed: u64) -> Result<String, ConstraintError> {
        let _slot = self.slots.acquire();
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage { role: "user", content: prompt }],
            temperature: self.config.temperature,
            seed,
        };
        let mut delay = self.config.backoff_base_ms;
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retry, msg)) => {
                    log::warn!("backend attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                    if !retry {
                        break;
                    }
                    if attempt < self.config.max_retries {
                        std::thread::sleep(Duration::from_millis(delay));
                        delay = delay.saturating_mul(2);
                    }
                }
            }
        }
        Err(ConstraintError::Transport(last))
    }
}
