use std::time::Duration;

use proptest::prelude::*;
use serde_json::json;

use navagent::agent::mock::{tool_follower_reply, MockBehavior, MockServer};
use navagent::agent::validator::forward_check;
use navagent::agent::{
    format_final_answer, llm_complete, parse_action, run_react, validate_decision, DecisionContext,
    ParsedResponse, ReactConfig, RemoteConfig, RemoteLlmCore, RuleCore, ScriptedCore, ScriptedReply,
    ToolCall, ToolError, ToolRegistry, TraceStatus, DEFAULT_TOOL_NAMES,
};
use navagent::colregs::{DecisionCommand, Maneuver};
use navagent::datasets::{gen_scadd, SceneGeometry, ShipGeometry, TargetGeometry};
use navagent::depiction::{build_prompt, ZoneSnapshot, DEFAULT_SYSTEM_PROMPT};
use navagent::kinematics::LocalPoint;
use navagent::zones::Zone;

fn ship(x: f64, y: f64, course_deg: f64, speed_kn: f64) -> ShipGeometry {
    ShipGeometry { x, y, course_deg, speed_kn }
}

/// Own ship northbound at 10 kn, target A 4 nm ahead on the reciprocal course.
fn head_on() -> DecisionContext {
    SceneGeometry {
        own: ship(0.0, 0.0, 0.0, 10.0),
        goal: Some(LocalPoint::new(0.0, 11_112.0)),
        targets: vec![TargetGeometry {
            id: "A".into(),
            ship: ship(0.0, 7408.0, 180.0, 10.0),
        }],
    }
    .context()
}

fn with_zone(mut ctx: DecisionContext, id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> DecisionContext {
    ctx.snapshot.zones.push(ZoneSnapshot {
        zone: Zone {
            id: id.into(),
            polygon: vec![
                LocalPoint::new(x0, y0),
                LocalPoint::new(x1, y0),
                LocalPoint::new(x1, y1),
                LocalPoint::new(x0, y1),
            ],
            side: "starboard".into(),
            description: "A large area of fishing nets".into(),
        },
        newly_appeared: true,
    });
    ctx
}

fn turn(ctx: &DecisionContext, maneuver: Maneuver, deg: f64) -> DecisionCommand {
    let h = ctx.snapshot.own.state.heading;
    DecisionCommand::new(maneuver, Some(h + deg.to_radians()), None, "test")
}

fn fallback(ctx: &DecisionContext) -> DecisionCommand {
    validate_decision(&ctx.rule_proposal(), ctx).decision
}

// ---------------------------------------------------------------------------
// tools

#[test]
fn five_unique_tools_by_default() {
    let r = ToolRegistry::standard();
    assert_eq!(r.len(), 5);
    assert_eq!(r.names(), DEFAULT_TOOL_NAMES.to_vec());
}

#[test]
fn duplicate_registration_fails() {
    struct Echo;
    impl navagent::agent::Tool for Echo {
        fn name(&self) -> &str {
            "compute_cpa"
        }
        fn invoke(&self, _: &DecisionContext, _: &serde_json::Value) -> Result<String, ToolError> {
            Ok(String::new())
        }
    }
    let mut r = ToolRegistry::standard();
    assert_eq!(
        r.register(Box::new(Echo)),
        Err(ToolError::Duplicate("compute_cpa".into()))
    );
}

#[test]
fn tool_outputs() {
    let ctx = head_on();
    let r = ToolRegistry::standard();
    let cpa = r.observe(&ToolCall::new("compute_cpa", json!({"target": "A"})), &ctx);
    assert_eq!(
        cpa,
        "CPA of target A: range 4.00 nm; relative bearing 000.0 deg; DCPA 0.00 nm; TCPA 12.0 min."
    );
    let class = r.observe(&ToolCall::new("classify_encounter", json!({"target": "A"})), &ctx);
    assert!(class.starts_with("Encounter with target A: HeadOn (head-on)"), "{class}");
    let risk = r.observe(&ToolCall::new("assess_risk", json!({})), &ctx);
    assert_eq!(risk, "Risk of target A: give-way; priority 1.");
    let sensor = r.observe(&ToolCall::new("get_sensor_data", json!({"target": "A"})), &ctx);
    assert!(sensor.starts_with("[Target A]") && !sensor.contains('\n'), "{sensor}");

    let proposal = r.observe(&ToolCall::new("propose_avoidance", json!({})), &ctx);
    let Ok(ParsedResponse::Final { decision, .. }) = parse_action(&format!("Final Answer: {proposal}")) else {
        panic!("proposal does not parse: {proposal}");
    };
    assert_eq!(decision, ctx.rule_proposal());
}

#[test]
fn tool_errors_become_observations() {
    let ctx = head_on();
    let r = ToolRegistry::standard();
    let o = r.observe(&ToolCall::new("compute_cpa", json!({"target": "Z"})), &ctx);
    assert_eq!(o, "Error: no target with id `Z`");
    let o = r.observe(&ToolCall::new("compute_cpa", json!({})), &ctx);
    assert!(o.starts_with("Error: bad arguments"), "{o}");
    let o = r.observe(&ToolCall::new("assess_risk", json!({"radius": 3})), &ctx);
    assert!(o.contains("unexpected key `radius`"), "{o}");
    assert!(matches!(
        r.invoke(&ToolCall::new("warp_drive", json!({})), &ctx),
        Err(ToolError::UnknownTool(_))
    ));
}

// ---------------------------------------------------------------------------
// ReAct loop

#[test]
fn single_final_answer_is_one_step() {
    let ctx = head_on();
    let decision = turn(&ctx, Maneuver::StarboardTurn, 30.0);
    let core = ScriptedCore::texts([format!("Thought: head-on.\n{}", format_final_answer(&decision))]);
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Complete);
    assert_eq!(out.trace.steps.len(), 1);
    assert_eq!(out.trace.steps[0].thought, "head-on.");
    assert_eq!(out.trace.final_decision, decision);
    assert_eq!(out.trace.candidate, None);
}

#[test]
fn tool_call_then_final_is_two_steps() {
    let ctx = head_on();
    let registry = ToolRegistry::standard();
    let decision = turn(&ctx, Maneuver::StarboardTurn, 30.0);
    let core = ScriptedCore::texts([
        "Thought: check geometry\nAction: compute_cpa({\"target\":\"A\"})".to_string(),
        format!("Thought: give way.\n{}", format_final_answer(&decision)),
    ]);
    let out = run_react(&ctx, &core, &registry, &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Complete);
    assert_eq!(out.trace.steps.len(), 2);
    let call = out.trace.steps[0].action.clone().expect("action step");
    assert_eq!(call, ToolCall::new("compute_cpa", json!({"target": "A"})));
    assert_eq!(out.trace.steps[0].observation.as_deref(), Some(registry.observe(&call, &ctx).as_str()));
    assert!(out.trace.steps[1].is_terminal());
    assert_eq!(out.trace.final_decision, decision);
}

#[test]
fn garbage_forever_truncates_to_rule_decision() {
    let ctx = head_on();
    let cfg = ReactConfig::default();
    let core = ScriptedCore::cycling(vec![ScriptedReply::Text("I am not sure.".into())]);
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &cfg);
    assert_eq!(out.trace.status, TraceStatus::Truncated);
    assert_eq!(out.trace.steps.len(), cfg.parse_retries as usize + 1);
    assert!(out.trace.steps.iter().all(|s| s.invalid.is_some()));
    assert_eq!(out.trace.final_decision, fallback(&ctx));
}

#[test]
fn endless_tool_calls_stop_at_max_steps() {
    let ctx = head_on();
    let cfg = ReactConfig::default();
    let core = ScriptedCore::cycling(vec![ScriptedReply::Text("Action: assess_risk({})".into())]);
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &cfg);
    assert_eq!(out.trace.status, TraceStatus::Truncated);
    assert_eq!(out.trace.steps.len(), cfg.max_steps);
    assert_eq!(out.trace.final_decision, fallback(&ctx));
}

#[test]
fn inconsistent_decision_gets_a_corrective_observation() {
    let ctx = head_on();
    // a starboard turn whose order lies to port of the current heading
    let wrong = turn(&ctx, Maneuver::StarboardTurn, -30.0);
    let right = turn(&ctx, Maneuver::StarboardTurn, 30.0);
    let core = ScriptedCore::texts([format_final_answer(&wrong), format_final_answer(&right)]);
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Complete);
    assert_eq!(out.trace.steps.len(), 2);
    let obs = out.trace.steps[0].observation.as_deref().unwrap();
    assert!(obs.starts_with("Error: inconsistent decision"), "{obs}");
    assert_eq!(out.trace.final_decision, right);
}

#[test]
fn unknown_tool_is_a_parse_failure() {
    let ctx = head_on();
    let core = ScriptedCore::cycling(vec![ScriptedReply::Text("Action: warp_drive({})".into())]);
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Truncated);
    assert!(out.trace.steps[0].observation.as_deref().unwrap().contains("unknown tool `warp_drive`"));
}

#[test]
fn transport_failure_degrades() {
    let ctx = head_on();
    let core = ScriptedCore::new(vec![ScriptedReply::TransportFailure]);
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Degraded);
    assert!(out.trace.steps.is_empty());
    assert_eq!(out.trace.final_decision, fallback(&ctx));
}

#[test]
fn rule_core_completes_in_one_step() {
    for rec in gen_scadd(20, 3).unwrap() {
        let ctx = rec.geometry.context();
        let out = run_react(&ctx, &RuleCore, &ToolRegistry::standard(), &ReactConfig::default());
        assert_eq!(out.trace.status, TraceStatus::Complete);
        assert_eq!(out.trace.steps.len(), 1);
        assert_eq!(out.trace.final_decision, fallback(&ctx));
        let again = run_react(&ctx, &RuleCore, &ToolRegistry::standard(), &ReactConfig::default());
        assert_eq!(again.trace, out.trace);
    }
}

// ---------------------------------------------------------------------------
// validator

#[test]
fn passing_candidate_is_returned_unchanged() {
    let ctx = head_on();
    let candidate = ctx.rule_proposal();
    let v = validate_decision(&candidate, &ctx);
    assert!(v.accepted);
    assert_eq!(v.decision, candidate);
}

#[test]
fn zone_clipping_the_turn_deepens_it() {
    // nets astride the 30° track; the 45° track passes east of them
    let ctx = with_zone(head_on(), "nets", 1200.0, 2400.0, 1800.0, 3300.0);
    let proposal = ctx.rule_proposal();
    assert_eq!(proposal.maneuver, Maneuver::StarboardTurn);
    assert_eq!(proposal.course_order, turn(&ctx, Maneuver::StarboardTurn, 30.0).course_order);
    let d_safe = ctx.thresholds.d_safe;
    let c30 = forward_check(&proposal, &ctx);
    assert!(c30.zone_entry.is_some(), "{c30:?}");
    let t45 = turn(&ctx, Maneuver::StarboardTurn, 45.0);
    assert!(forward_check(&t45, &ctx).passes(d_safe, true));

    let v = validate_decision(&proposal, &ctx);
    assert!(!v.accepted);
    assert_eq!(v.decision.maneuver, Maneuver::StarboardTurn);
    assert_eq!(v.decision.course_order, t45.course_order);
}

#[test]
fn blocked_everywhere_stops() {
    // nets straight ahead and to both sides
    let ctx = with_zone(head_on(), "nets", -3000.0, 300.0, 3000.0, 3000.0);
    let v = validate_decision(&ctx.rule_proposal(), &ctx);
    assert_eq!(v.decision.maneuver, Maneuver::Stop);
    assert_eq!(v.decision.speed_order, Some(0.0));
}

#[test]
fn zones_alone_never_block_standing_on_clear_water() {
    let mut ctx = head_on();
    ctx.snapshot.targets.clear();
    let stand = DecisionCommand::new(Maneuver::StandOn, None, None, "hold");
    assert!(validate_decision(&stand, &ctx).accepted);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn validator_output_is_safe_or_stop(
        scene in 0usize..32,
        deg in -90.0..90.0f64,
        zx in -3000.0..3000.0f64,
        zy in 500.0..5000.0f64,
        w in 200.0..2000.0f64,
    ) {
        let rec = &scenes()[scene];
        let ctx = with_zone(rec.geometry.context(), "z", zx, zy, zx + w, zy + w);
        let maneuver = if deg >= 0.0 { Maneuver::StarboardTurn } else { Maneuver::PortTurn };
        let candidate = turn(&ctx, maneuver, deg.abs().max(1.0).copysign(deg));
        let v = validate_decision(&candidate, &ctx);
        let check = forward_check(&v.decision, &ctx);
        let targets = v.decision.maneuver != Maneuver::StandOn;
        if v.accepted {
            prop_assert_eq!(&v.decision, &candidate);
        }
        prop_assert!(
            check.passes(ctx.thresholds.d_safe, targets) || v.decision.maneuver == Maneuver::Stop,
            "{:?} {:?}", v.decision, check
        );
        // validation is a fixed point
        let again = validate_decision(&v.decision, &ctx);
        if v.decision.maneuver != Maneuver::Stop {
            prop_assert!(again.accepted);
        }
    }
}

fn scenes() -> &'static [navagent::datasets::ScaddRecord] {
    static SCENES: std::sync::OnceLock<Vec<navagent::datasets::ScaddRecord>> = std::sync::OnceLock::new();
    SCENES.get_or_init(|| gen_scadd(32, 21).unwrap())
}

// ---------------------------------------------------------------------------
// remote client against the loopback server

fn remote(url: &str) -> RemoteConfig {
    RemoteConfig {
        timeout_s: 5.0,
        backoff_ms: 10,
        ..RemoteConfig::new(url, "mock")
    }
}

#[test]
fn fixed_reply_round_trip() {
    let ctx = head_on();
    let decision = turn(&ctx, Maneuver::StarboardTurn, 30.0);
    let reply = format!("Thought: remote says turn.\n{}", format_final_answer(&decision));
    let server = MockServer::start(MockBehavior::Fixed(reply.clone())).unwrap();

    let bundle = build_prompt(DEFAULT_SYSTEM_PROMPT, &ctx.snapshot, &[]).unwrap();
    let completion = llm_complete(&bundle, &remote(server.url())).unwrap();
    assert_eq!(completion.text, reply);
    assert_eq!(completion.retries, 0);

    let core = RemoteLlmCore::new(remote(server.url()));
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Complete);
    assert_eq!(out.trace.final_decision, decision);
    assert_eq!(server.requests(), 2);
}

#[test]
fn delay_past_timeout_falls_back() {
    let ctx = head_on();
    let server = MockServer::start(MockBehavior::Delay {
        delay: Duration::from_millis(800),
        reply: "Final Answer: {}".into(),
    })
    .unwrap();
    let core = RemoteLlmCore::new(RemoteConfig {
        timeout_s: 0.2,
        retries: 0,
        ..remote(server.url())
    });
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Degraded);
    assert_eq!(out.trace.final_decision, fallback(&ctx));
}

#[test]
fn server_errors_are_retried() {
    let ctx = head_on();
    let reply = RuleCore::response(&ctx);
    let server = MockServer::start(MockBehavior::FailThenOk {
        failures: 2,
        status: 500,
        reply,
    })
    .unwrap();
    let core = RemoteLlmCore::new(remote(server.url()));
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Complete);
    assert_eq!(out.trace.retries, 2);
    assert_eq!(server.requests(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let ctx = head_on();
    let server = MockServer::start(MockBehavior::FailThenOk {
        failures: 5,
        status: 400,
        reply: String::new(),
    })
    .unwrap();
    let core = RemoteLlmCore::new(remote(server.url()));
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Degraded);
    assert_eq!(server.requests(), 1);
}

#[test]
fn tool_follower_adopts_the_proposal() {
    let ctx = head_on();
    let server = MockServer::start(MockBehavior::ToolFollower).unwrap();
    let core = RemoteLlmCore::new(remote(server.url()));
    let out = run_react(&ctx, &core, &ToolRegistry::standard(), &ReactConfig::default());
    assert_eq!(out.trace.status, TraceStatus::Complete);
    assert_eq!(out.trace.steps.len(), 2);
    assert_eq!(out.trace.final_decision, ctx.rule_proposal());

    assert!(tool_follower_reply("nothing yet").contains("Action: propose_avoidance({})"));
}
