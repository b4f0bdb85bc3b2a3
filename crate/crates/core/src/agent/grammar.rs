//! The ReAct response grammar and the transcript format for traces.
//!
//! A core response is an optional `Thought:` (may span lines) followed by
//! exactly one directive:
//!
//! ```text
//! Thought: check geometry
//! Action: compute_cpa({"target":"A"})
//! ```
//!
//! or
//!
//! ```text
//! Final Answer: {"maneuver":"StarboardTurn","course_order_deg":30.0,"rationale":"head-on, Rule 14"}
//! ```
//!
//! Lines after the directive are ignored unless they hold a second directive,
//! which makes the response ambiguous.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::colregs::{DecisionCommand, Maneuver};
use crate::kinematics::knots_to_mps;

use super::tools::DEFAULT_TOOL_NAMES;

const THOUGHT: &str = "Thought:";
const ACTION: &str = "Action:";
const FINAL: &str = "Final Answer:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    /// always a JSON object
    pub args: Value,
}

impl ToolCall {
    pub fn new(tool: impl Into<String>, args: Value) -> Self {
        Self {
            tool: tool.into(),
            args,
        }
    }

    /// `name({...})` with compact, key-sorted arguments.
    pub fn format(&self) -> String {
        format!("{}({})", self.tool, self.args)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedResponse {
    Action { thought: String, call: ToolCall },
    Final { thought: String, decision: DecisionCommand },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty response")]
    Empty,
    #[error("no `Action:` or `Final Answer:` directive")]
    MissingDirective,
    #[error("more than one directive in one response")]
    Ambiguous,
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("malformed decision: {0}")]
    MalformedDecision(String),
}

/// Grammar violation with a 1-based position in the response text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(line: usize, column: usize, kind: ParseErrorKind) -> Self {
        Self { line, column, kind }
    }
}

/// Wire shape of a final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FinalAnswerWire {
    maneuver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    course_order_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed_order_kn: Option<f64>,
    rationale: String,
}

/// Compact JSON object for a decision, as used after `Final Answer:`.
pub fn format_decision(decision: &DecisionCommand) -> String {
    let wire = FinalAnswerWire {
        maneuver: decision.maneuver.as_str().to_string(),
        course_order_deg: decision.course_order_deg(),
        speed_order_kn: decision.speed_order_kn(),
        rationale: decision.rationale.clone(),
    };
    serde_json::to_string(&wire).expect("decision serializes")
}

/// `Final Answer: {...}`
pub fn format_final_answer(decision: &DecisionCommand) -> String {
    format!("{FINAL} {}", format_decision(decision))
}

/// Parses a decision object; the input must contain nothing but the object.
pub fn parse_decision(text: &str) -> Result<DecisionCommand, ParseErrorKind> {
    let wire: FinalAnswerWire = serde_json::from_str(text.trim())
        .map_err(|e| ParseErrorKind::MalformedDecision(e.to_string()))?;
    decision_from_wire(wire)
}

fn decision_from_wire(wire: FinalAnswerWire) -> Result<DecisionCommand, ParseErrorKind> {
    let maneuver: Maneuver = wire
        .maneuver
        .parse()
        .map_err(ParseErrorKind::MalformedDecision)?;
    if let Some(kn) = wire.speed_order_kn {
        if kn < 0.0 {
            return Err(ParseErrorKind::MalformedDecision(
                "speed_order_kn must not be negative".into(),
            ));
        }
    }
    Ok(DecisionCommand::new(
        maneuver,
        wire.course_order_deg.map(f64::to_radians),
        wire.speed_order_kn.map(knots_to_mps),
        wire.rationale,
    ))
}

/// Parses one core response against the default five tools.
pub fn parse_action(response: &str) -> Result<ParsedResponse, ParseError> {
    parse_action_with(response, &DEFAULT_TOOL_NAMES)
}

/// Parses one core response against the given tool names.
pub fn parse_action_with(response: &str, tools: &[&str]) -> Result<ParsedResponse, ParseError> {
    parse_inner(response, Some(tools))
}

struct Line<'a> {
    number: usize,
    /// byte offset of the line start in the response
    offset: usize,
    text: &'a str,
}

fn lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, raw) in text.split('\n').enumerate() {
        out.push(Line {
            number: i + 1,
            offset,
            text: raw.strip_suffix('\r').unwrap_or(raw),
        });
        offset += raw.len() + 1;
    }
    out
}

fn column_of(line: &Line<'_>, byte_in_line: usize) -> usize {
    line.text[..byte_in_line.min(line.text.len())].chars().count() + 1
}

/// Converts a serde_json error position inside `text[start..]` into an absolute one.
fn json_error_position(text: &str, start: usize, err: &serde_json::Error) -> (usize, usize) {
    let before = &text[..start];
    let base_line = before.matches('\n').count() + 1;
    let base_col = before.rsplit('\n').next().unwrap_or("").chars().count();
    if err.line() <= 1 {
        (base_line, base_col + err.column().max(1))
    } else {
        (base_line + err.line() - 1, err.column().max(1))
    }
}

fn parse_inner(response: &str, tools: Option<&[&str]>) -> Result<ParsedResponse, ParseError> {
    if response.trim().is_empty() {
        return Err(ParseError::at(1, 1, ParseErrorKind::Empty));
    }
    let all = lines(response);
    let is_directive = |l: &Line<'_>| {
        let t = l.text.trim_start();
        t.starts_with(ACTION) || t.starts_with(FINAL)
    };
    let Some(d_idx) = all.iter().position(is_directive) else {
        let last = all.last().expect("non-empty");
        return Err(ParseError::at(
            last.number,
            last.text.chars().count() + 1,
            ParseErrorKind::MissingDirective,
        ));
    };

    let mut thought_parts: Vec<&str> = Vec::new();
    let mut in_thought = false;
    for l in &all[..d_idx] {
        let t = l.text.trim_start();
        if let Some(rest) = t.strip_prefix(THOUGHT) {
            in_thought = true;
            thought_parts.push(rest.trim());
        } else if in_thought {
            thought_parts.push(l.text.trim_end());
        }
    }
    let thought = thought_parts.join("\n").trim().to_string();

    let line = &all[d_idx];
    let indent = line.text.len() - line.text.trim_start().len();
    let body = line.text.trim_start();

    if let Some(rest) = body.strip_prefix(ACTION) {
        let rest_start = indent + ACTION.len();
        let name_start = rest_start + (rest.len() - rest.trim_start().len());
        let name_text = &line.text[name_start..];
        let Some(paren) = name_text.find('(') else {
            return Err(ParseError::at(
                line.number,
                column_of(line, name_start),
                ParseErrorKind::MalformedAction("expected `tool_name(<args>)`".into()),
            ));
        };
        let name = name_text[..paren].trim_end();
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            return Err(ParseError::at(
                line.number,
                column_of(line, name_start),
                ParseErrorKind::MalformedAction(format!("invalid tool name `{name}`")),
            ));
        }
        if let Some(known) = tools {
            if !known.contains(&name) {
                return Err(ParseError::at(
                    line.number,
                    column_of(line, name_start),
                    ParseErrorKind::UnknownTool(name.to_string()),
                ));
            }
        }
        let args_start = line.offset + name_start + paren + 1;
        let tail = &response[args_start..];
        let mut stream = serde_json::Deserializer::from_str(tail).into_iter::<Value>();
        let args = match stream.next() {
            Some(Ok(v)) => v,
            Some(Err(e)) => {
                let (l, c) = json_error_position(response, args_start, &e);
                return Err(ParseError::at(
                    l,
                    c,
                    ParseErrorKind::MalformedAction(format!("arguments: {e}")),
                ));
            }
            None => {
                let (l, c) = position_of(response, args_start);
                return Err(ParseError::at(
                    l,
                    c,
                    ParseErrorKind::MalformedAction("missing argument object".into()),
                ));
            }
        };
        if !args.is_object() {
            return Err(ParseError::at(
                line.number,
                column_of(line, name_start + paren + 1),
                ParseErrorKind::MalformedAction("arguments must be a JSON object".into()),
            ));
        }
        let after = args_start + stream.byte_offset();
        let close = response[after..]
            .char_indices()
            .find(|(_, c)| !c.is_whitespace() || *c == '\n');
        let close_pos = match close {
            Some((i, ')')) => after + i,
            _ => {
                let (l, c) = position_of(response, after);
                return Err(ParseError::at(
                    l,
                    c,
                    ParseErrorKind::MalformedAction("expected `)` after arguments".into()),
                ));
            }
        };
        let line_end = response[close_pos..]
            .find('\n')
            .map_or(response.len(), |i| close_pos + i);
        if !response[close_pos + 1..line_end].trim().is_empty() {
            let (l, c) = position_of(response, close_pos + 1);
            return Err(ParseError::at(
                l,
                c,
                ParseErrorKind::MalformedAction("unexpected text after `)`".into()),
            ));
        }
        check_no_second_directive(response, line_end)?;
        return Ok(ParsedResponse::Action {
            thought,
            call: ToolCall::new(name, args),
        });
    }

    let rest = body.strip_prefix(FINAL).expect("directive");
    let obj_start = line.offset + indent + FINAL.len() + (rest.len() - rest.trim_start().len());
    let tail = &response[obj_start..];
    let mut stream = serde_json::Deserializer::from_str(tail).into_iter::<FinalAnswerWire>();
    let wire = match stream.next() {
        Some(Ok(w)) => w,
        Some(Err(e)) => {
            let (l, c) = json_error_position(response, obj_start, &e);
            return Err(ParseError::at(
                l,
                c,
                ParseErrorKind::MalformedDecision(e.to_string()),
            ));
        }
        None => {
            return Err(ParseError::at(
                line.number,
                column_of(line, obj_start - line.offset),
                ParseErrorKind::MalformedDecision("missing decision object".into()),
            ))
        }
    };
    let end = obj_start + stream.byte_offset();
    let line_end = response[end..].find('\n').map_or(response.len(), |i| end + i);
    if !response[end..line_end].trim().is_empty() {
        let (l, c) = position_of(response, end);
        return Err(ParseError::at(
            l,
            c,
            ParseErrorKind::MalformedDecision("unexpected text after decision object".into()),
        ));
    }
    check_no_second_directive(response, line_end)?;
    let decision = decision_from_wire(wire).map_err(|k| {
        ParseError::at(line.number, column_of(line, obj_start - line.offset), k)
    })?;
    Ok(ParsedResponse::Final { thought, decision })
}

fn position_of(text: &str, byte: usize) -> (usize, usize) {
    let before = &text[..byte.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
    (line, col)
}

fn check_no_second_directive(response: &str, from: usize) -> Result<(), ParseError> {
    let mut offset = from;
    for raw in response[from..].split('\n') {
        let t = raw.trim_start();
        if t.starts_with(ACTION) || t.starts_with(FINAL) {
            let (l, c) = position_of(response, offset + (raw.len() - t.len()));
            return Err(ParseError::at(l, c, ParseErrorKind::Ambiguous));
        }
        offset += raw.len() + 1;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Transcript format

/// How a ReAct loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    /// the core produced a valid final answer
    Complete,
    /// step or parse-retry budget exhausted; rule core decided
    Truncated,
    /// the core failed to respond; rule core decided
    Degraded,
}

impl TraceStatus {
    fn as_str(&self) -> &'static str {
        match self {
            TraceStatus::Complete => "complete",
            TraceStatus::Truncated => "truncated",
            TraceStatus::Degraded => "degraded",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "complete" => Some(TraceStatus::Complete),
            "truncated" => Some(TraceStatus::Truncated),
            "degraded" => Some(TraceStatus::Degraded),
            _ => None,
        }
    }
}

/// One Thought/Action/Observation step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReactStep {
    pub thought: String,
    /// raw response that failed to parse
    pub invalid: Option<String>,
    pub action: Option<ToolCall>,
    pub observation: Option<String>,
}

impl ReactStep {
    pub fn is_terminal(&self) -> bool {
        self.action.is_none() && self.observation.is_none()
    }
}

/// Ordered steps of one decision cycle and the decision it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactTrace {
    pub status: TraceStatus,
    /// transport retries spent across all core calls
    pub retries: u32,
    pub steps: Vec<ReactStep>,
    /// proposal before validation, when validation replaced it
    pub candidate: Option<DecisionCommand>,
    pub final_decision: DecisionCommand,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                other => return Err(format!("bad escape `\\{}`", other.map_or(String::new(), String::from))),
            }
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

/// Text transcript of a trace; [`parse_trace`] is its inverse.
pub fn serialize_trace(trace: &ReactTrace) -> String {
    let mut out = String::new();
    out.push_str(&format!("Status: {}\n", trace.status.as_str()));
    out.push_str(&format!("Retries: {}\n", trace.retries));
    for step in &trace.steps {
        out.push_str(&format!("{THOUGHT} {}\n", escape(&step.thought)));
        if let Some(raw) = &step.invalid {
            out.push_str(&format!("Invalid: {}\n", escape(raw)));
        }
        if let Some(call) = &step.action {
            out.push_str(&format!("{ACTION} {}\n", call.format()));
        }
        if let Some(obs) = &step.observation {
            out.push_str(&format!("Observation: {}\n", escape(obs)));
        }
    }
    if let Some(c) = &trace.candidate {
        out.push_str(&format!("Candidate: {}\n", format_decision(c)));
    }
    out.push_str(&format!("{}\n", format_final_answer(&trace.final_decision)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transcript line {line}: {message}")]
pub struct TranscriptError {
    pub line: usize,
    pub message: String,
}

pub fn parse_trace(text: &str) -> Result<ReactTrace, TranscriptError> {
    let err = |line: usize, message: String| TranscriptError { line, message };
    let mut status = None;
    let mut retries = None;
    let mut steps: Vec<ReactStep> = Vec::new();
    let mut candidate = None;
    let mut final_decision = None;

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        if final_decision.is_some() {
            return Err(err(n, "content after final answer".into()));
        }
        let (key, value) = raw
            .split_once(": ")
            .or_else(|| raw.strip_suffix(':').map(|k| (k, "")))
            .ok_or_else(|| err(n, format!("unrecognized line `{raw}`")))?;
        match key {
            "Status" => {
                status = Some(TraceStatus::parse(value).ok_or_else(|| err(n, "bad status".into()))?)
            }
            "Retries" => {
                retries = Some(value.parse::<u32>().map_err(|e| err(n, e.to_string()))?)
            }
            "Thought" => steps.push(ReactStep {
                thought: unescape(value).map_err(|m| err(n, m))?,
                ..Default::default()
            }),
            "Invalid" | "Action" | "Observation" => {
                let step = steps
                    .last_mut()
                    .ok_or_else(|| err(n, format!("`{key}` before any Thought")))?;
                match key {
                    "Invalid" => step.invalid = Some(unescape(value).map_err(|m| err(n, m))?),
                    "Action" => {
                        let parsed = parse_inner(&format!("{ACTION} {value}"), None)
                            .map_err(|e| err(n, e.to_string()))?;
                        let ParsedResponse::Action { call, .. } = parsed else {
                            unreachable!("action directive parses as action")
                        };
                        step.action = Some(call);
                    }
                    _ => step.observation = Some(unescape(value).map_err(|m| err(n, m))?),
                }
            }
            "Candidate" => {
                candidate = Some(parse_decision(value).map_err(|k| err(n, k.to_string()))?)
            }
            "Final Answer" => {
                final_decision =
                    Some(parse_decision(value).map_err(|k| err(n, k.to_string()))?)
            }
            _ => return Err(err(n, format!("unknown key `{key}`"))),
        }
    }
    let last = text.lines().count();
    Ok(ReactTrace {
        status: status.ok_or_else(|| err(1, "missing Status".into()))?,
        retries: retries.ok_or_else(|| err(2, "missing Retries".into()))?,
        steps,
        candidate,
        final_decision: final_decision.ok_or_else(|| err(last, "missing Final Answer".into()))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn action_exemplar() {
        let r = parse_action("Thought: check geometry\nAction: compute_cpa({\"target\":\"A\"})").unwrap();
        assert_eq!(
            r,
            ParsedResponse::Action {
                thought: "check geometry".into(),
                call: ToolCall::new("compute_cpa", json!({"target": "A"})),
            }
        );
    }

    #[test]
    fn final_exemplar() {
        let r = parse_action(
            r#"Final Answer: {"maneuver":"StarboardTurn","course_order_deg":30.0,"rationale":"head-on, Rule 14"}"#,
        )
        .unwrap();
        let ParsedResponse::Final { thought, decision } = r else {
            panic!("expected final")
        };
        assert!(thought.is_empty());
        assert_eq!(decision.maneuver, Maneuver::StarboardTurn);
        assert_eq!(decision.course_order_deg(), Some(30.0));
        assert_eq!(decision.rationale, "head-on, Rule 14");
    }

    #[test]
    fn unknown_tool() {
        let e = parse_action("Action: warp_drive({})").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownTool("warp_drive".into()));
        assert_eq!((e.line, e.column), (1, 9));
    }

    #[test]
    fn multi_line_thought_and_trailing_observation_ignored() {
        let r = parse_action(
            "Thought: first\nsecond\nAction: assess_risk({})\nObservation: hallucinated",
        )
        .unwrap();
        match r {
            ParsedResponse::Action { thought, call } => {
                assert_eq!(thought, "first\nsecond");
                assert_eq!(call.tool, "assess_risk");
            }
            _ => panic!(),
        }
    }

    #[test]
    fn error_positions() {
        let e = parse_action("Thought: x\nFinal Answer: {\"maneuver\":\"Jump\",\"rationale\":\"r\"}")
            .unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::MalformedDecision(_)));
        assert_eq!(e.line, 2);

        let e = parse_action("Action: compute_cpa({\"target\": })").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.column > 20, "{e:?}");

        let e = parse_action("Action: assess_risk({})\nFinal Answer: {}").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Ambiguous);
        assert_eq!(e.line, 2);
    }

    #[test]
    fn decision_format_round_trip() {
        let d = DecisionCommand::new(
            Maneuver::SlowDown,
            Some(1.2345),
            Some(knots_to_mps(4.0)),
            "slow \"down\"",
        );
        let text = format_final_answer(&d);
        assert_eq!(
            text,
            r#"Final Answer: {"maneuver":"SlowDown","course_order_deg":70.7,"speed_order_kn":4.0,"rationale":"slow \"down\""}"#
        );
        match parse_action(&text).unwrap() {
            ParsedResponse::Final { decision, .. } => assert_eq!(decision, d),
            _ => panic!(),
        }
    }

    #[test]
    fn trace_round_trip() {
        let d = DecisionCommand::new(Maneuver::StarboardTurn, Some(0.5), None, "r");
        let trace = ReactTrace {
            status: TraceStatus::Truncated,
            retries: 2,
            steps: vec![
                ReactStep {
                    thought: "multi\nline \\ thought".into(),
                    invalid: None,
                    action: Some(ToolCall::new("compute_cpa", json!({"target": "A"}))),
                    observation: Some("a\nb".into()),
                },
                ReactStep {
                    thought: String::new(),
                    invalid: Some("garbage\r\n".into()),
                    action: None,
                    observation: Some("Parse error".into()),
                },
                ReactStep::default(),
            ],
            candidate: Some(d.clone()),
            final_decision: d,
        };
        let text = serialize_trace(&trace);
        let back = parse_trace(&text).unwrap();
        assert_eq!(back, trace);
        assert_eq!(serialize_trace(&back), text);
    }

    #[test]
    fn transcript_errors() {
        assert!(parse_trace("Status: complete\nRetries: 0\n").is_err());
        let e = parse_trace("Status: complete\nRetries: 0\nObservation: x\n").unwrap_err();
        assert_eq!(e.line, 3);
    }
}
