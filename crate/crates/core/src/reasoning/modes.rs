use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::grammar::{parse_decision, parse_plan, parse_select, Candidate, Decision};
use super::{CallKind, DecisionProvider, MemoryState, ProviderError, ProviderRequest, ReasoningMode};
use crate::env::Observation;
use crate::runner::InnerCall;
use crate::tools::{ToolCall, ToolLayer, ToolResult};

/// Inner-round budget of the ReAct loop.
pub const REACT_ROUNDS: u32 = 3;

/// Inputs shared by every mode for one outer step.
pub struct StepContext<'a> {
    pub episode_id: &'a str,
    pub step_index: u32,
    pub prompt: &'a str,
    /// Agent view of the current observation.
    pub observation: &'a Observation,
    pub memory: &'a MemoryState,
    pub tools: &'a ToolLayer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub committed: ToolCall,
    pub inner: Vec<InnerCall>,
    /// Provider calls made, in order.
    pub calls: Vec<CallKind>,
    pub degraded: bool,
    pub analysis: String,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("malformed provider output: {detail}")]
    Malformed { detail: String, inner: Vec<InnerCall>, calls: Vec<CallKind> },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

struct Session<'a, 'p> {
    ctx: &'a StepContext<'a>,
    provider: &'p mut dyn DecisionProvider,
    inner: Vec<InnerCall>,
    calls: Vec<CallKind>,
}

fn names(tools: &ToolLayer, commit_only: bool) -> Vec<String> {
    tools.visible().iter().filter(|t| !commit_only || t.commits()).map(|t| t.name.clone()).collect()
}

impl<'a, 'p> Session<'a, 'p> {
    fn request(&self, kind: CallKind, round: u32, allowed: &[String], hint: Option<&str>) -> ProviderRequest {
        let ctx = self.ctx;
        let mut user = format!("Step {}. Observation: {}\n", ctx.step_index, ctx.observation.describe());
        for c in &self.inner {
            user.push_str(&format!("Result of {}: {}\n", c.call.tool, c.result.digest()));
        }
        user.push_str(&format!("Allowed tools: {}\n", allowed.join(", ")));
        user.push_str(match kind {
            CallKind::Plan => "Propose up to three candidates: CANDIDATE i: TOOL <name> ARGS <json> | OUTCOME <text> | RISK <low|medium|high>",
            CallKind::Select => "Answer SELECT i for the candidate to execute.",
            _ => "Answer with one line TOOL <name> ARGS <json object>, optionally preceded by THOUGHT lines.",
        });
        if let Some(hint) = hint {
            user.push_str(&format!("\nYour previous answer was rejected: {hint}"));
        }
        ProviderRequest {
            call_kind: Some(kind),
            episode_id: ctx.episode_id.to_string(),
            step_index: ctx.step_index,
            round,
            system: ctx.prompt.to_string(),
            memory_text: ctx.memory.text(),
            user,
            observation: Some(ctx.observation.clone()),
            allowed_tools: allowed.to_vec(),
            inner: self.inner.clone(),
            memory: ctx.memory.clone(),
            candidates: Vec::new(),
            context: Default::default(),
        }
    }

    fn call(&mut self, req: &ProviderRequest) -> Result<String, StepError> {
        self.calls.push(req.kind());
        Ok(self.provider.complete(req)?)
    }

    fn checked(&self, call: &ToolCall, allowed: &[String]) -> Result<(), String> {
        if !allowed.contains(&call.tool) {
            return Err(format!("tool `{}` is not allowed here", call.tool));
        }
        self.ctx.tools.check(call).map(|_| ()).map_err(|e| e.to_string())
    }

    fn decide_once(
        &mut self,
        round: u32,
        allowed: &[String],
        hint: Option<&str>,
    ) -> Result<Result<Decision, String>, StepError> {
        let req = self.request(CallKind::DecideAction, round, allowed, hint);
        let text = self.call(&req)?;
        Ok(parse_decision(&text).and_then(|mut d| {
            self.checked(&d.call, allowed)?;
            d.call = d.call.at(self.ctx.step_index, round);
            Ok(d)
        }))
    }

    /// DecideAction with one retry carrying the rejection reason.
    fn decide(&mut self, round: u32, allowed: &[String]) -> Result<Decision, StepError> {
        match self.decide_once(round, allowed, None)? {
            Ok(d) => Ok(d),
            Err(first) => match self.decide_once(round, allowed, Some(&first))? {
                Ok(d) => Ok(d),
                Err(detail) => Err(self.malformed(detail)),
            },
        }
    }

    fn malformed(&self, detail: String) -> StepError {
        StepError::Malformed { detail, inner: self.inner.clone(), calls: self.calls.clone() }
    }

    fn commits(&self, call: &ToolCall) -> bool {
        self.ctx.tools.descriptor(&call.tool).is_some_and(|d| d.commits())
    }

    fn finish(self, committed: ToolCall, degraded: bool, analysis: String) -> StepOutput {
        StepOutput { committed, inner: self.inner, calls: self.calls, degraded, analysis }
    }
}

/// One decision, plus at most one follow-up restricted to control tools when
/// the first call gathered information.
pub fn step_standard(
    ctx: &StepContext<'_>,
    provider: &mut dyn DecisionProvider,
    exec: &mut dyn FnMut(&ToolCall) -> ToolResult,
) -> Result<StepOutput, StepError> {
    let mut s = Session { ctx, provider, inner: Vec::new(), calls: Vec::new() };
    let first = s.decide(0, &names(ctx.tools, false))?;
    if s.commits(&first.call) {
        return Ok(s.finish(first.call, false, first.thought));
    }
    let result = exec(&first.call);
    s.inner.push(InnerCall { call: first.call, result });
    let follow = s.decide(1, &names(ctx.tools, true))?;
    let analysis = join(&first.thought, &follow.thought);
    Ok(s.finish(follow.call, false, analysis))
}

/// Thought/action/observation rounds; the last round must commit.
pub fn step_react(
    ctx: &StepContext<'_>,
    provider: &mut dyn DecisionProvider,
    exec: &mut dyn FnMut(&ToolCall) -> ToolResult,
    rounds: u32,
) -> Result<StepOutput, StepError> {
    let rounds = rounds.max(1);
    let mut s = Session { ctx, provider, inner: Vec::new(), calls: Vec::new() };
    let mut analysis = String::new();
    for round in 0..rounds {
        let allowed = names(ctx.tools, round + 1 == rounds);
        let d = s.decide(round, &allowed)?;
        analysis = join(&analysis, &d.thought);
        if s.commits(&d.call) {
            return Ok(s.finish(d.call, false, analysis));
        }
        let result = exec(&d.call);
        s.inner.push(InnerCall { call: d.call, result });
    }
    unreachable!("the last round only allows committing tools")
}

/// Plan three candidates, then select one. Malformed plan or select output
/// degrades to a single direct decision.
pub fn step_prospective(ctx: &StepContext<'_>, provider: &mut dyn DecisionProvider) -> Result<StepOutput, StepError> {
    let control = names(ctx.tools, true);
    let mut s = Session { ctx, provider, inner: Vec::new(), calls: Vec::new() };
    let plan_req = s.request(CallKind::Plan, 0, &control, None);
    let plan_text = s.call(&plan_req)?;
    let plan = parse_plan(&plan_text).and_then(|cands| {
        for c in &cands {
            s.checked(&c.action, &control)?;
        }
        Ok(cands)
    });
    let failure = match plan {
        Ok(cands) => {
            let mut req = s.request(CallKind::Select, 1, &control, None);
            req.user.push('\n');
            req.user.push_str(&super::grammar::render_plan(&cands));
            req.candidates = cands.clone();
            let text = s.call(&req)?;
            match parse_select(&text, cands.len()) {
                Ok(i) => {
                    let Candidate { action, predicted_outcome, risk } = cands[i].clone();
                    let analysis = format!("candidate {} of {}: {predicted_outcome} (risk {risk})", i + 1, cands.len());
                    return Ok(s.finish(action.at(ctx.step_index, 0), false, analysis));
                }
                Err(e) => format!("select: {e}"),
            }
        }
        Err(e) => format!("plan: {e}"),
    };
    let round = s.calls.len() as u32;
    match s.decide_once(round, &control, Some(&failure))? {
        Ok(d) => {
            let analysis = join(&format!("degraded after {failure}"), &d.thought);
            Ok(s.finish(d.call, true, analysis))
        }
        Err(detail) => Err(s.malformed(format!("{failure}; direct call: {detail}"))),
    }
}

/// Dispatch on the configured mode.
pub fn step(
    mode: ReasoningMode,
    ctx: &StepContext<'_>,
    provider: &mut dyn DecisionProvider,
    exec: &mut dyn FnMut(&ToolCall) -> ToolResult,
) -> Result<StepOutput, StepError> {
    match mode {
        ReasoningMode::Standard => step_standard(ctx, provider, exec),
        ReasoningMode::React => step_react(ctx, provider, exec, REACT_ROUNDS),
        ReasoningMode::Prospective => step_prospective(ctx, provider),
    }
}

fn join(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a} | {b}"),
    }
}
