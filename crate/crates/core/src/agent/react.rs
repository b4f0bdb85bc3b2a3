//! The Thought/Action/Observation loop of one decision cycle.

use std::time::Duration;

use crate::colregs::DecisionCommand;
use crate::depiction::{build_prompt, DEFAULT_SYSTEM_PROMPT};

use super::cores::DecisionCore;
use super::grammar::{parse_action_with, ParsedResponse, ReactStep, ReactTrace, TraceStatus};
use super::tools::ToolRegistry;
use super::validator::validate_decision;
use super::DecisionContext;

#[derive(Debug, Clone, PartialEq)]
pub struct ReactConfig {
    /// core calls allowed per cycle
    pub max_steps: usize,
    /// unparseable or inconsistent responses tolerated before falling back
    pub parse_retries: u32,
    pub system_prompt: String,
}

impl Default for ReactConfig {
    fn default() -> Self {
        Self {
            max_steps: 8,
            parse_retries: 2,
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
        }
    }
}

/// A finished cycle. Latency is kept apart from the trace so traces stay
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactOutcome {
    pub trace: ReactTrace,
    /// wall-clock time spent inside the core
    pub core_latency: Duration,
}

impl ReactOutcome {
    pub fn decision(&self) -> &DecisionCommand {
        &self.trace.final_decision
    }
}

fn corrective(problem: &str) -> String {
    format!(
        "Error: {problem}. Reply with `Thought: ...` followed by exactly one `Action: tool({{...}})` or `Final Answer: {{...}}` line."
    )
}

/// Runs the loop until the core gives a consistent final answer, the step or
/// retry budget runs out, or the core fails. The last two fall back to the rule
/// core. Every outcome carries a validated decision.
pub fn run_react(
    ctx: &DecisionContext,
    core: &dyn DecisionCore,
    registry: &ToolRegistry,
    cfg: &ReactConfig,
) -> ReactOutcome {
    let names = registry.names();
    let own = &ctx.snapshot.own;
    let mut steps: Vec<ReactStep> = Vec::new();
    let mut feedback: Vec<String> = Vec::new();
    let mut retries = 0;
    let mut failures = 0;
    let mut latency = Duration::ZERO;

    let finish = |steps: Vec<ReactStep>, status, retries, proposal: DecisionCommand, latency| {
        let v = validate_decision(&proposal, ctx);
        ReactOutcome {
            trace: ReactTrace {
                status,
                retries,
                steps,
                candidate: (!v.accepted).then_some(proposal),
                final_decision: v.decision,
            },
            core_latency: latency,
        }
    };

    for _ in 0..cfg.max_steps.max(1) {
        let bundle = match build_prompt(&cfg.system_prompt, &ctx.snapshot, &feedback) {
            Ok(b) => b,
            Err(_) => break,
        };
        let reply = match core.respond(&bundle, ctx) {
            Ok(r) => r,
            Err(_) => {
                return finish(steps, TraceStatus::Degraded, retries, ctx.rule_proposal(), latency)
            }
        };
        retries += reply.retries;
        latency += reply.latency;

        let problem = match parse_action_with(&reply.text, &names) {
            Ok(ParsedResponse::Action { thought, call }) => {
                let observation = registry.observe(&call, ctx);
                feedback.push(format!(
                    "Action: {}\nObservation: {observation}",
                    call.format()
                ));
                steps.push(ReactStep {
                    thought,
                    invalid: None,
                    action: Some(call),
                    observation: Some(observation),
                });
                continue;
            }
            Ok(ParsedResponse::Final { thought, decision }) => {
                match decision.check(&own.state, own.goal) {
                    Ok(()) => {
                        steps.push(ReactStep {
                            thought,
                            ..Default::default()
                        });
                        return finish(steps, TraceStatus::Complete, retries, decision, latency);
                    }
                    Err(msg) => format!("inconsistent decision: {msg}"),
                }
            }
            Err(e) => format!("could not parse the response at {e}"),
        };

        let observation = corrective(&problem);
        feedback.push(observation.clone());
        steps.push(ReactStep {
            thought: String::new(),
            invalid: Some(reply.text),
            action: None,
            observation: Some(observation),
        });
        failures += 1;
        if failures > cfg.parse_retries {
            break;
        }
    }
    finish(steps, TraceStatus::Truncated, retries, ctx.rule_proposal(), latency)
}
