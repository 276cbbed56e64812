//! Language-model program synthesis: prompt assembly, a chat-completions
//! wire protocol, fenced-JSON extraction with retry, and the model-written
//! reflection channel. The prompt templates here are original to this
//! project. Everything is testable offline through [`StubTransport`]; the
//! whole framework also runs without this module via the offline mutator.

use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Task;
use crate::evolve::{ReflectionNote, ReflectionWriter, SynthesisContext, Synthesizer};
use crate::gen_dsl::{self, GeneratorProgram};
use crate::heur_dsl::{self, HeuristicProgram};
use crate::rng::Seed;

/// How many of the most recent reflection notes a prompt carries.
pub const REFLECTION_CONTEXT_K: usize = 3;

/// Default prompt budget; tokens are estimated as ceil(chars / 4).
pub const DEFAULT_TOKEN_BUDGET: usize = 2048;

/// Which program type a synthesis call must produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramKind {
    Generator,
    Heuristic,
}

impl std::fmt::Display for ProgramKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProgramKind::Generator => write!(f, "generator"),
            ProgramKind::Heuristic => write!(f, "heuristic"),
        }
    }
}

/// All the slots a synthesis prompt is assembled from. Rendering is a pure
/// function of this struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub role_preamble: String,
    pub task_description: String,
    pub dsl_grammar_excerpt: String,
    /// The parent program, serialized as pretty JSON.
    pub parent_program: String,
    /// Rendered reflection summaries, oldest first.
    pub reflection_context: Vec<String>,
    pub output_contract: String,
    pub token_budget: usize,
}

/// A rendered prompt plus whether reflections were dropped to fit the
/// budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub text: String,
    pub truncated: bool,
}

fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

fn assemble(template: &PromptTemplate, reflections: &[String], dropped: usize) -> String {
    let mut feedback = String::new();
    if dropped > 0 {
        feedback.push_str(&format!("({dropped} older notes dropped to fit the budget)\n"));
    }
    if reflections.is_empty() {
        feedback.push_str("No prior feedback is available yet.");
    } else {
        for (i, note) in reflections.iter().enumerate() {
            if i > 0 {
                feedback.push('\n');
            }
            feedback.push_str("- ");
            feedback.push_str(note);
        }
    }
    format!(
        "{}\n\n## Task\n{}\n\n## Output grammar\n{}\n\n## Current program\n```json\n{}\n```\n\n## Feedback from earlier edits\n{}\n\n## Required output\n{}\n",
        template.role_preamble,
        template.task_description,
        template.dsl_grammar_excerpt,
        template.parent_program,
        feedback,
        template.output_contract,
    )
}

/// Render a template to prompt text. Deterministic; if the estimate
/// exceeds the budget, the oldest reflection notes are dropped first and
/// the result is flagged. A prompt that cannot fit even without any
/// reflections is an error.
pub fn render_prompt(template: &PromptTemplate) -> Result<RenderedPrompt> {
    let mut keep = template.reflection_context.len();
    loop {
        let dropped = template.reflection_context.len() - keep;
        let text = assemble(template, &template.reflection_context[dropped..], dropped);
        if estimate_tokens(&text) <= template.token_budget {
            return Ok(RenderedPrompt {
                text,
                truncated: dropped > 0,
            });
        }
        if keep == 0 {
            return Err(Error::Prompt(format!(
                "prompt needs {} tokens even without reflections, budget is {}",
                estimate_tokens(&text),
                template.token_budget
            )));
        }
        keep -= 1;
    }
}

/// Connector settings. `api_key_env` is the name of the environment
/// variable holding the key; the key itself is read at request time and is
/// never stored or serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub api_key_env: String,
}

impl Default for ConnectorConfig {
    fn default() -> Self {
        ConnectorConfig {
            endpoint: "http://localhost:8080/v1/chat/completions".to_string(),
            model: "default".to_string(),
            temperature: 0.8,
            max_retries: 3,
            timeout_secs: 60,
            api_key_env: "COEVO_API_KEY".to_string(),
        }
    }
}

impl ConnectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.endpoint.is_empty() || self.model.is_empty() {
            return Err(Error::Transport("endpoint and model must be set".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::Transport("temperature must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// One chat message; the wire format is the standard chat-completions
/// shape: request `{model, temperature, messages: [{role, content}]}`,
/// response `{choices: [{message: {role, content}}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".to_string(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

/// Sends one conversation and returns the assistant's reply text.
pub trait ChatTransport {
    fn send(&mut self, config: &ConnectorConfig, messages: &[ChatMessage]) -> Result<String>;
}

/// Blocking HTTP transport. Reads the API key from the environment at
/// request time and puts it in the Authorization header only.
#[derive(Debug, Default)]
pub struct HttpTransport;

impl ChatTransport for HttpTransport {
    fn send(&mut self, config: &ConnectorConfig, messages: &[ChatMessage]) -> Result<String> {
        config.validate()?;
        let request = ChatRequest {
            model: &config.model,
            temperature: config.temperature,
            messages,
        };
        let mut builder = ureq::post(&config.endpoint)
            .config()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .header("content-type", "application/json");
        if let Ok(key) = std::env::var(&config.api_key_env) {
            builder = builder.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(&request)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::Transport(format!("malformed chat response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Transport("chat response had no choices".into()))
    }
}

/// Canned-reply transport for tests: pops replies in order and records
/// every conversation it was sent.
#[derive(Debug, Default)]
pub struct StubTransport {
    pub replies: VecDeque<String>,
    pub calls: u32,
    pub conversations: Vec<Vec<ChatMessage>>,
}

impl StubTransport {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StubTransport {
            replies: replies.into_iter().map(Into::into).collect(),
            calls: 0,
            conversations: Vec::new(),
        }
    }
}

impl ChatTransport for StubTransport {
    fn send(&mut self, _config: &ConnectorConfig, messages: &[ChatMessage]) -> Result<String> {
        self.calls += 1;
        self.conversations.push(messages.to_vec());
        self.replies
            .pop_front()
            .ok_or_else(|| Error::Transport("stub transport ran out of replies".into()))
    }
}

/// The first fenced code block's contents, tolerating a language tag on
/// the opening fence. None when the text has no complete fenced block.
pub fn extract_fenced_block(text: &str) -> Option<String> {
    let mut inside = false;
    let mut block = String::new();
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            if inside {
                return Some(block);
            }
            inside = true;
            continue;
        }
        if inside {
            block.push_str(line);
            block.push('\n');
        }
    }
    None
}

/// A parsed and validated program of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthesizedProgram {
    Generator(GeneratorProgram),
    Heuristic(HeuristicProgram),
}

fn parse_reply(reply: &str, kind: ProgramKind) -> Result<SynthesizedProgram> {
    let payload = extract_fenced_block(reply).unwrap_or_else(|| reply.trim().to_string());
    match kind {
        ProgramKind::Generator => Ok(SynthesizedProgram::Generator(GeneratorProgram::from_json(
            &payload,
        )?)),
        ProgramKind::Heuristic => Ok(SynthesizedProgram::Heuristic(HeuristicProgram::from_json(
            &payload,
        )?)),
    }
}

/// Render the prompt, converse until the model produces a program that
/// parses and validates, feeding each failure back as a correction
/// message. Makes at most `1 + max_retries` requests; exhaustion returns
/// [`Error::SynthesisExhausted`], the signal for the evolution engine to
/// fall back to an offline mutation.
pub fn synthesize_program(
    template: &PromptTemplate,
    kind: ProgramKind,
    config: &ConnectorConfig,
    transport: &mut dyn ChatTransport,
) -> Result<SynthesizedProgram> {
    let prompt = render_prompt(template)?;
    let mut conversation = vec![ChatMessage::user(prompt.text)];
    let attempts = 1 + config.max_retries;
    let mut last_error = String::new();
    for _ in 0..attempts {
        let reply = match transport.send(config, &conversation) {
            Ok(r) => r,
            Err(e) => {
                last_error = e.to_string();
                continue;
            }
        };
        match parse_reply(&reply, kind) {
            Ok(program) => return Ok(program),
            Err(e) => {
                last_error = e.to_string();
                conversation.push(ChatMessage::assistant(reply));
                conversation.push(ChatMessage::user(format!(
                    "That reply was not a valid {kind} program: {e}. \
                     Answer again with exactly one fenced JSON block and no other text."
                )));
            }
        }
    }
    Err(Error::SynthesisExhausted {
        attempts,
        last_error,
    })
}

const GENERATOR_GRAMMAR: &str = r#"A generator program is JSON: {"version": 1, "root": <node>} with two
optional top-level fields for orienteering: "prize_rule" and "budget_rule".
Each <node> is an object tagged by "node":
  {"node": "uniform_square"}
  {"node": "gaussian_clusters", "k": <int >= 1>, "spread": <float > 0>}
  {"node": "ring", "radius": <float in (0, 0.5]>, "jitter": <float >= 0>}
  {"node": "spiral", "turns": <float > 0>, "jitter": <float >= 0>}
  {"node": "grid", "jitter": <float >= 0>}
  {"node": "mix", "weights": [<float > 0>, ...], "children": [<node>, ...]}  (same length)
  {"node": "transform", "a": f, "b": f, "c": f, "d": f, "tx": f, "ty": f, "child": <node>}
  {"node": "perturb", "sigma": <float >= 0>, "child": <node>}
Coordinates are clamped to the unit square after sampling.
"prize_rule" is tagged by "rule": {"rule": "uniform_prize", "scale": s},
{"rule": "distance_from_depot_prize", "scale": s}, or
{"rule": "cluster_bonus_prize", "scale": s} with s > 0.
"budget_rule" is {"factor": <float in [0.5, 4.0]>}."#;

const HEURISTIC_GRAMMAR: &str = r#"A heuristic program is JSON: {"target": <target>, "root": <expr>} where
<target> is "gls_guide", "aco_eta_tsp", or "aco_eta_op" and must be kept
identical to the current program's target. Each <expr> is an n-by-n matrix
expression tagged by "op":
  {"op": "dist"}                      the Euclidean distance matrix
  {"op": "prize_outer"}               column j holds prize_j (orienteering targets only)
  {"op": "const", "value": <float>}
  one argument ("arg"): row_mean, row_min, row_max, rank_row, neg, abs,
    sqrt, exp_clamped, log_safe, normalize01, symmetrize
  two arguments ("lhs", "rhs"): add, sub, mul, safe_div, min, max
Depth is limited to 10 and total node count to 96. Non-finite values are
scrubbed to zero and visibility-style outputs are floored at a small
positive constant by the interpreter."#;

fn task_noun(task: Task) -> &'static str {
    match task {
        Task::TspGls => "traveling-salesman instances solved by guided local search",
        Task::TspAco => "traveling-salesman instances solved by an ant-colony heuristic",
        Task::OpAco => "orienteering instances solved by an ant-colony heuristic",
    }
}

/// Render a reflection note as one compact prompt line.
pub fn reflection_line(note: &ReflectionNote) -> String {
    let mut line = format!(
        "generation {} {}: {} -> {} [{}] fitness delta {:+.6}",
        note.generation,
        note.side,
        note.parent,
        note.subject,
        note.summary.edit_class,
        note.fitness_delta,
    );
    if !note.summary.degraded_families.is_empty() {
        line.push_str(&format!(
            "; harder on {}",
            note.summary.degraded_families.join(", ")
        ));
    }
    if !note.summary.improved_families.is_empty() {
        line.push_str(&format!(
            "; easier on {}",
            note.summary.improved_families.join(", ")
        ));
    }
    if let Some(text) = &note.summary.text {
        line.push_str("; ");
        line.push_str(text);
    }
    line
}

fn reflection_context(reflections: &[ReflectionNote]) -> Vec<String> {
    let skip = reflections.len().saturating_sub(REFLECTION_CONTEXT_K);
    reflections[skip..].iter().map(reflection_line).collect()
}

/// Prompt asking for a mutated generator program.
pub fn generator_template(
    task: Task,
    parent: &GeneratorProgram,
    reflections: &[ReflectionNote],
    token_budget: usize,
) -> PromptTemplate {
    PromptTemplate {
        role_preamble: "You design point-distribution programs that produce hard instances \
                        for a fixed solver."
            .to_string(),
        task_description: format!(
            "Propose one mutated variant of the current program so that {} become harder: \
             the solver's tour quality should degrade relative to a stronger reference \
             solver on instances sampled from your program. Change the structure or the \
             numeric parameters, but stay inside the grammar.",
            task_noun(task)
        ),
        dsl_grammar_excerpt: GENERATOR_GRAMMAR.to_string(),
        parent_program: parent.to_json(),
        reflection_context: reflection_context(reflections),
        output_contract: "Reply with exactly one fenced JSON code block containing the \
                          complete mutated program. No text outside the fence."
            .to_string(),
        token_budget,
    }
}

/// Prompt asking for a mutated heuristic program.
pub fn heuristic_template(
    task: Task,
    parent: &HeuristicProgram,
    reflections: &[ReflectionNote],
    token_budget: usize,
) -> PromptTemplate {
    PromptTemplate {
        role_preamble: "You design guidance matrices that steer a combinatorial-optimization \
                        solver."
            .to_string(),
        task_description: format!(
            "Propose one mutated variant of the current program so that the solver performs \
             better on {}: its solution quality should move toward the stronger reference \
             solver on the adversary's instances. Keep the \"target\" field unchanged.",
            task_noun(task)
        ),
        dsl_grammar_excerpt: HEURISTIC_GRAMMAR.to_string(),
        parent_program: parent.to_json(),
        reflection_context: reflection_context(reflections),
        output_contract: "Reply with exactly one fenced JSON code block containing the \
                          complete mutated program. No text outside the fence."
            .to_string(),
        token_budget,
    }
}

/// Synthesizer backend that asks the model for every offspring; any
/// failure surfaces as an error so the engine falls back to the offline
/// mutator for that slot.
pub struct LlmSynthesizer<T: ChatTransport> {
    pub config: ConnectorConfig,
    pub transport: T,
    pub token_budget: usize,
}

impl<T: ChatTransport> LlmSynthesizer<T> {
    pub fn new(config: ConnectorConfig, transport: T) -> Self {
        LlmSynthesizer {
            config,
            transport,
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

impl<T: ChatTransport> Synthesizer for LlmSynthesizer<T> {
    fn propose_generator(
        &mut self,
        parent: &GeneratorProgram,
        _weights: &gen_dsl::MutationWeights,
        _seed: Seed,
        ctx: &SynthesisContext,
    ) -> Result<(GeneratorProgram, String)> {
        let template = generator_template(ctx.task, parent, ctx.reflections, self.token_budget);
        match synthesize_program(
            &template,
            ProgramKind::Generator,
            &self.config,
            &mut self.transport,
        )? {
            SynthesizedProgram::Generator(program) => Ok((program, "llm".to_string())),
            SynthesizedProgram::Heuristic(_) => {
                Err(Error::Transport("connector returned the wrong program kind".into()))
            }
        }
    }

    fn propose_heuristic(
        &mut self,
        parent: &HeuristicProgram,
        _weights: &heur_dsl::MutationWeights,
        _seed: Seed,
        ctx: &SynthesisContext,
    ) -> Result<(HeuristicProgram, String)> {
        let template = heuristic_template(ctx.task, parent, ctx.reflections, self.token_budget);
        match synthesize_program(
            &template,
            ProgramKind::Heuristic,
            &self.config,
            &mut self.transport,
        )? {
            SynthesizedProgram::Heuristic(program) => Ok((program, "llm".to_string())),
            SynthesizedProgram::Generator(_) => {
                Err(Error::Transport("connector returned the wrong program kind".into()))
            }
        }
    }

    fn name(&self) -> &'static str {
        "llm"
    }
}

/// Reflection writer that asks the model for a short diagnosis of a
/// structured note draft.
pub struct ConnectorReflectionWriter<T: ChatTransport> {
    pub config: ConnectorConfig,
    pub transport: T,
}

impl<T: ChatTransport> ReflectionWriter for ConnectorReflectionWriter<T> {
    fn describe(&mut self, draft: &ReflectionNote) -> Result<String> {
        let summary = serde_json::to_string(&draft.summary)?;
        let message = format!(
            "A program mutation was evaluated. Side: {}. Edit class: {}. Fitness delta: \
             {:+.6}. Structured summary: {summary}. In one or two sentences, state what \
             the edit did to instance hardness and what kind of edit to try next.",
            draft.side, draft.summary.edit_class, draft.fitness_delta,
        );
        self.transport
            .send(&self.config, &[ChatMessage::user(message)])
    }
}
