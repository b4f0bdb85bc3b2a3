//! ReAct orchestration: tools, decision cores, the response grammar, the
//! decision validator and the remote chat-completion client.

pub mod cores;
pub mod grammar;
pub mod mock;
pub mod react;
pub mod remote;
pub mod tools;
pub mod validator;

pub use cores::{CoreError, CoreReply, DecisionCore, RemoteLlmCore, RuleCore, ScriptedCore, ScriptedReply};
pub use grammar::{
    format_final_answer, parse_action, parse_action_with, parse_trace, serialize_trace,
    ParseError, ParseErrorKind, ParsedResponse, ReactStep, ReactTrace, ToolCall, TraceStatus,
};
pub use react::{run_react, ReactConfig, ReactOutcome};
pub use remote::{llm_complete, Completion, RemoteConfig};
pub use tools::{Tool, ToolError, ToolRegistry, DEFAULT_TOOL_NAMES};
pub use validator::{validate_decision, ForwardCheck, Validation, ValidatorConfig};

use crate::colregs::{rule_decision, AvoidanceConfig, DecisionCommand, OwnSituation, RiskThresholds};
use crate::depiction::SceneSnapshot;
use crate::dynamics::{CourseKeeperGains, ShipModelParams};

/// Everything a decision cycle needs besides the core itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionContext {
    pub snapshot: SceneSnapshot,
    pub thresholds: RiskThresholds,
    pub avoidance: AvoidanceConfig,
    pub params: ShipModelParams,
    pub gains: CourseKeeperGains,
    pub validator: ValidatorConfig,
    /// consecutive risk-free cycles including this one
    pub clear_streak: u32,
}

impl DecisionContext {
    pub fn own_situation(&self) -> OwnSituation {
        OwnSituation {
            state: self.snapshot.own.state,
            goal: self.snapshot.own.goal,
            cruise_speed: self.snapshot.own.cruise_speed,
            clear_streak: self.clear_streak,
        }
    }

    /// The rule core's proposal for this scene, before validation.
    pub fn rule_proposal(&self) -> DecisionCommand {
        rule_decision(
            &self.own_situation(),
            &self.snapshot.assessments(),
            &self.avoidance,
        )
    }
}
