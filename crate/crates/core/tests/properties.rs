mod common;

use dexholdem_core::agents::{AgentKind, OpponentKind, Thresholds};
use dexholdem_core::bench::{generate_schedule, parse_labels, read_label_lines, CounterReport, TrialSpec};
use dexholdem_core::metrics::OutcomeCounts;
use dexholdem_core::perceiver::{perceive, NoiseProfile, ParsedState, ShowdownOutcome};
use dexholdem_core::rules::OpponentAction;
use dexholdem_core::session::SessionConfig;
use dexholdem_core::tabletop::{new_initial_table, Card, TableConfig, TableState};
use dexholdem_core::wire::{ActionName, ErrorCode, Message};
use dexholdem_core::{AgentPrimitive, LoopStage};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn label_vocabulary() -> Vec<String> {
    let mut out = Vec::new();
    for name in ["i", "ii", "iii"] {
        let path = format!("{}/fixtures/trajectory_{name}.txt", env!("CARGO_MANIFEST_DIR"));
        out.extend(read_label_lines(&std::fs::read_to_string(path).unwrap()));
    }
    out.sort();
    out.dedup();
    out
}

fn quad() -> impl Strategy<Value = [u32; 4]> {
    [1u32..10, 0u32..3, 0u32..4, 0u32..2]
}

fn action_name() -> impl Strategy<Value = ActionName> {
    prop_oneof![
        Just(ActionName::Check),
        Just(ActionName::Call),
        Just(ActionName::Raise),
        Just(ActionName::AllIn),
        Just(ActionName::Fold),
    ]
}

fn error_code() -> impl Strategy<Value = ErrorCode> {
    prop_oneof![
        Just(ErrorCode::UnknownSession),
        Just(ErrorCode::OutOfTurn),
        Just(ErrorCode::Malformed),
        Just(ErrorCode::IllegalAction),
        Just(ErrorCode::SessionFinished),
    ]
}

fn client_message() -> impl Strategy<Value = Message> {
    let id = "[a-z0-9-]{1,12}";
    prop_oneof![
        (id, any::<u64>(), any::<bool>()).prop_map(|(session_id, seq, cfg)| Message::Join {
            session_id,
            seq,
            config: cfg.then(SessionConfig::default),
        }),
        (id, any::<u64>(), action_name(), proptest::option::of(0u32..1000)).prop_map(|(session_id, seq, action, amount)| {
            Message::OpponentAction { session_id, seq, action, amount }
        }),
        (id, any::<u64>()).prop_map(|(session_id, seq)| Message::HumanHelpAck { session_id, seq }),
        (id, any::<u64>()).prop_map(|(session_id, seq)| Message::Subscribe { session_id, seq }),
        (id, any::<u64>()).prop_map(|(session_id, seq)| Message::Resign { session_id, seq }),
        (id, any::<u64>(), error_code(), ".{0,20}").prop_map(|(session_id, seq, code, message)| Message::Error {
            session_id,
            seq,
            code,
            message,
        }),
    ]
}

fn perceived(seed: u64, rate: f64) -> (TableState, ParsedState) {
    let t = new_initial_table(&TableConfig { deck_seed: seed, ..TableConfig::default() });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stage = LoopStage::ALL[(seed % 7) as usize];
    let ps = perceive(&t, stage, ShowdownOutcome::NotShowdown, &NoiseProfile::from_rates([rate; 8]), &mut rng);
    (t, ps)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn chips_are_conserved_at_every_state(seed: u64, q in quad(), noise in 0.0f64..0.3, scripted: bool) {
        let rec = common::hand(seed, q, noise, scripted).map_err(TestCaseError::fail)?;
        common::check_chip_conservation(&rec).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn every_card_has_one_location(seed: u64, q in quad(), noise in 0.0f64..0.3, scripted: bool) {
        let rec = common::hand(seed, q, noise, scripted).map_err(TestCaseError::fail)?;
        common::check_card_uniqueness(&rec).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn session_counters_are_prefix_monotone(seed: u64, q in quad(), noise in 0.0f64..0.3, scripted: bool) {
        let rec = common::hand(seed, q, noise, scripted).map_err(TestCaseError::fail)?;
        common::check_hl_le_ap(&rec.counters).map_err(TestCaseError::fail)?;
        common::check_prefix_monotone(&rec.events).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn session_records_round_trip(seed: u64, q in quad(), noise in 0.0f64..0.3, scripted: bool) {
        let rec = common::hand(seed, q, noise, scripted).map_err(TestCaseError::fail)?;
        common::check_round_trip(&rec).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn heuristic_matches_stay_consistent(seed: u64, hands in 1u32..4) {
        let cfg = SessionConfig {
            seeds: dexholdem_core::session::Seeds::from_master(seed),
            robot_agent: AgentKind::Heuristic { thresholds: Thresholds { trials: 200, ..Thresholds::default() } },
            opponent_agent: OpponentKind::Heuristic { thresholds: Thresholds { trials: 200, ..Thresholds::default() } },
            carry_over: true,
            ..SessionConfig::default()
        };
        let recs = dexholdem_core::session::run_match(&cfg, hands).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let total = cfg.table.robot_chips.plus(&cfg.table.opponent_chips).value();
        for rec in &recs {
            for s in &rec.states {
                prop_assert_eq!(s.truth.chip_totals().value(), total);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn spsr_never_exceeds_tcr(sp in 0u64..500, dc in 0u64..500, tf in 0u64..500, df in 0u64..500) {
        common::check_rates_ordered(OutcomeCounts::new(sp, dc, tf, df)).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn label_replays_are_prefix_monotone(picks in proptest::collection::vec(any::<prop::sample::Index>(), 0..60)) {
        let vocab = label_vocabulary();
        let labels: Vec<&String> = picks.iter().map(|i| i.get(&vocab)).collect();
        let events = parse_labels(&labels).map_err(|e| TestCaseError::fail(e.to_string()))?;
        common::check_prefix_monotone(&events).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn wire_messages_round_trip(msg in client_message()) {
        let line = msg.encode();
        prop_assert!(line.ends_with('\n'));
        prop_assert_eq!(line.matches('\n').count(), 1);
        let back: Message = dexholdem_core::codec::decode_line(&line).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back.encode(), line);
        prop_assert_eq!(&back, &msg);
    }

    #[test]
    fn tables_and_parsed_states_round_trip(seed: u64, rate in 0.0f64..1.0) {
        let (t, ps) = perceived(seed, rate);
        common::check_round_trip(&t).map_err(TestCaseError::fail)?;
        common::check_round_trip(&ps).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn schedules_round_trip(seed: u64) {
        let schedule = generate_schedule(seed);
        prop_assert_eq!(schedule.len(), 80);
        common::check_round_trip::<Vec<TrialSpec>>(&schedule).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn counter_reports_round_trip(v in proptest::array::uniform6(0u64..1000), lap in "[a-z_()LR]{0,16}", ldp in "[a-z_0-9]{0,16}") {
        let c = CounterReport { states: v[0], ap: v[1], dpp: v[2], wa: v[3], hl: v[4], rc: v[5], lap, ldp };
        common::check_round_trip(&c).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn router_is_total_over_the_input_grid() {
    let visited = common::router_totality_grid().unwrap();
    assert_eq!(visited, 7 * 2 * 2 * 3 * 2 * 4 * 2 * 2 * 2 * 2 * 2 * 2 * 2 * 2 * 2);
}

#[test]
fn cards_and_primitives_round_trip() {
    for i in 0..52 {
        let c = Card::from_index(i);
        assert_eq!(c.to_string().parse::<Card>().unwrap(), c);
        common::check_round_trip(&c).unwrap();
    }
    for p in [
        AgentPrimitive::Raise(35),
        AgentPrimitive::AllIn,
        AgentPrimitive::CollectWinnings,
        AgentPrimitive::RequestHuman("scene down".into()),
    ] {
        common::check_round_trip(&p).unwrap();
    }
    for a in [OpponentAction::Raise(20), OpponentAction::AllIn, OpponentAction::Fold] {
        common::check_round_trip(&a).unwrap();
    }
}
