//! The five hard-coded tools and their registry.

use serde_json::Value;
use thiserror::Error;

use crate::depiction::{depict, fmt_deg, fmt_nm, TargetSnapshot};
use crate::kinematics::wrap_2pi;

use super::grammar::{format_decision, ToolCall};
use super::DecisionContext;

pub const DEFAULT_TOOL_NAMES: [&str; 5] = [
    "get_sensor_data",
    "compute_cpa",
    "classify_encounter",
    "assess_risk",
    "propose_avoidance",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ToolError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("tool `{0}` is already registered")]
    Duplicate(String),
    #[error("bad arguments: {0}")]
    BadArguments(String),
    #[error("no target with id `{0}`")]
    UnknownTarget(String),
}

pub trait Tool: Send + Sync {
    fn name(&self) -> &str;
    fn invoke(&self, ctx: &DecisionContext, args: &Value) -> Result<String, ToolError>;
}

/// Named tools in registration order.
pub struct ToolRegistry {
    tools: Vec<Box<dyn Tool>>,
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl Default for ToolRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl ToolRegistry {
    pub fn empty() -> Self {
        Self { tools: Vec::new() }
    }

    /// The five navigation tools.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SensorData)).expect("unique");
        r.register(Box::new(ComputeCpa)).expect("unique");
        r.register(Box::new(ClassifyEncounter)).expect("unique");
        r.register(Box::new(AssessRisk)).expect("unique");
        r.register(Box::new(ProposeAvoidance)).expect("unique");
        r
    }

    pub fn register(&mut self, tool: Box<dyn Tool>) -> Result<(), ToolError> {
        if self.tools.iter().any(|t| t.name() == tool.name()) {
            return Err(ToolError::Duplicate(tool.name().to_string()));
        }
        self.tools.push(tool);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.name()).collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn invoke(&self, call: &ToolCall, ctx: &DecisionContext) -> Result<String, ToolError> {
        let tool = self
            .tools
            .iter()
            .find(|t| t.name() == call.tool)
            .ok_or_else(|| ToolError::UnknownTool(call.tool.clone()))?;
        tool.invoke(ctx, &call.args)
    }

    /// Observation text for a call; tool errors become an `Error:` observation.
    pub fn observe(&self, call: &ToolCall, ctx: &DecisionContext) -> String {
        match self.invoke(call, ctx) {
            Ok(text) => text,
            Err(e) => format!("Error: {e}"),
        }
    }
}

/// Reads the optional `target` argument; rejects any other key.
fn target_arg(args: &Value) -> Result<Option<String>, ToolError> {
    let obj = args
        .as_object()
        .ok_or_else(|| ToolError::BadArguments("expected an object".into()))?;
    if let Some(k) = obj.keys().find(|k| k.as_str() != "target") {
        return Err(ToolError::BadArguments(format!("unexpected key `{k}`")));
    }
    match obj.get("target") {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(ToolError::BadArguments("`target` must be a string".into())),
    }
}

fn require_target<'a>(ctx: &'a DecisionContext, args: &Value) -> Result<&'a TargetSnapshot, ToolError> {
    let id = target_arg(args)?
        .ok_or_else(|| ToolError::BadArguments("missing `target`".into()))?;
    ctx.snapshot
        .target(&id)
        .ok_or(ToolError::UnknownTarget(id))
}

fn selected<'a>(ctx: &'a DecisionContext, args: &Value) -> Result<Vec<&'a TargetSnapshot>, ToolError> {
    match target_arg(args)? {
        Some(id) => Ok(vec![ctx
            .snapshot
            .target(&id)
            .ok_or(ToolError::UnknownTarget(id))?]),
        None => Ok(ctx.snapshot.targets.iter().collect()),
    }
}

struct SensorData;

impl Tool for SensorData {
    fn name(&self) -> &str {
        "get_sensor_data"
    }

    fn invoke(&self, ctx: &DecisionContext, args: &Value) -> Result<String, ToolError> {
        let text = depict(&ctx.snapshot);
        match target_arg(args)? {
            None => Ok(text),
            Some(id) => {
                ctx.snapshot
                    .target(&id)
                    .ok_or_else(|| ToolError::UnknownTarget(id.clone()))?;
                let prefix = format!("[Target {id}]");
                Ok(text
                    .lines()
                    .filter(|l| l.starts_with(&prefix))
                    .collect::<Vec<_>>()
                    .join("\n"))
            }
        }
    }
}

struct ComputeCpa;

impl Tool for ComputeCpa {
    fn name(&self) -> &str {
        "compute_cpa"
    }

    fn invoke(&self, ctx: &DecisionContext, args: &Value) -> Result<String, ToolError> {
        let t = require_target(ctx, args)?;
        let c = &t.assessment.cpa;
        Ok(format!(
            "CPA of target {}: range {} nm; relative bearing {} deg; DCPA {} nm; TCPA {:.1} min.",
            t.id,
            fmt_nm(c.range),
            fmt_deg(c.relative_bearing),
            fmt_nm(c.dcpa),
            c.tcpa / 60.0
        ))
    }
}

struct ClassifyEncounter;

impl Tool for ClassifyEncounter {
    fn name(&self) -> &str {
        "classify_encounter"
    }

    fn invoke(&self, ctx: &DecisionContext, args: &Value) -> Result<String, ToolError> {
        let t = require_target(ctx, args)?;
        let own = &ctx.snapshot.own.state;
        Ok(format!(
            "Encounter with target {}: {} ({}); relative bearing {} deg; course difference {} deg.",
            t.id,
            t.assessment.encounter.as_str(),
            t.assessment.encounter.phrase(),
            fmt_deg(t.assessment.cpa.relative_bearing),
            fmt_deg(wrap_2pi(t.state.heading - own.heading))
        ))
    }
}

struct AssessRisk;

impl Tool for AssessRisk {
    fn name(&self) -> &str {
        "assess_risk"
    }

    fn invoke(&self, ctx: &DecisionContext, args: &Value) -> Result<String, ToolError> {
        let targets = selected(ctx, args)?;
        if targets.is_empty() {
            return Ok("No targets detected.".to_string());
        }
        let lines: Vec<String> = targets
            .iter()
            .map(|t| {
                let a = &t.assessment;
                match a.priority {
                    Some(p) => format!("Risk of target {}: {}; priority {p}.", t.id, a.risk.phrase()),
                    None => format!("Risk of target {}: {}.", t.id, a.risk.phrase()),
                }
            })
            .collect();
        Ok(lines.join("\n"))
    }
}

struct ProposeAvoidance;

impl Tool for ProposeAvoidance {
    fn name(&self) -> &str {
        "propose_avoidance"
    }

    fn invoke(&self, ctx: &DecisionContext, args: &Value) -> Result<String, ToolError> {
        if target_arg(args)?.is_some() {
            return Err(ToolError::BadArguments("takes no arguments".into()));
        }
        Ok(format_decision(&ctx.rule_proposal()))
    }
}
