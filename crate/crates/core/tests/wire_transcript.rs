//! Byte-level wire fixture: a console session replayed against the hub.
//!
//! Lines starting with `> ` are client input, `< ` lines are what the hub
//! sends back (direct replies first, then broadcasts). Set
//! `DEXHOLDEM_BLESS=1` to rewrite the fixture after an intended change.

use std::path::PathBuf;

use dexholdem_core::agents::OpponentKind;
use dexholdem_core::session::{reference_hand_config, SessionConfig};
use dexholdem_core::wire::{ActionName, ErrorCode, Hub, Message};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/wire/console_session.txt")
}

fn console_config() -> SessionConfig {
    SessionConfig { opponent_agent: OpponentKind::Console, ..reference_hand_config() }
}

fn act(seq: u64, action: ActionName, amount: Option<u32>) -> String {
    Message::OpponentAction { session_id: "demo".into(), seq, action, amount }.encode()
}

fn client_lines() -> Vec<String> {
    vec![
        "{\"type\":\"join\"\n".to_string(),
        Message::Subscribe { session_id: "nope".into(), seq: 0 }.encode(),
        Message::Join { session_id: "demo".into(), seq: 0, config: Some(console_config()) }.encode(),
        act(1, ActionName::Raise, None),
        act(2, ActionName::Check, None),
        act(3, ActionName::Call, None),
        act(4, ActionName::AllIn, None),
        Message::HumanHelpAck { session_id: "demo".into(), seq: 5 }.encode(),
        act(6, ActionName::Call, None),
    ]
}

fn transcript() -> String {
    let hub = Hub::new(SessionConfig::default());
    let mut out = String::new();
    for line in client_lines() {
        out.push_str("> ");
        out.push_str(&line);
        let replies = hub.handle_line(&line);
        for m in replies.direct.iter().chain(&replies.broadcast) {
            out.push_str("< ");
            out.push_str(&m.encode());
        }
    }
    out
}

#[test]
fn console_session_matches_fixture_bytes() {
    let got = transcript();
    if std::env::var_os("DEXHOLDEM_BLESS").is_some() {
        std::fs::create_dir_all(fixture().parent().unwrap()).unwrap();
        std::fs::write(fixture(), &got).unwrap();
    }
    let want = std::fs::read_to_string(fixture()).expect("fixture; rerun with DEXHOLDEM_BLESS=1");
    for (i, (g, w)) in got.lines().zip(want.lines()).enumerate() {
        assert_eq!(g, w, "line {}", i + 1);
    }
    assert_eq!(got, want);
}

#[test]
fn fixture_lines_decode_and_reencode_identically() {
    let text = std::fs::read_to_string(fixture()).unwrap();
    let mut codes = Vec::new();
    for line in text.lines().filter_map(|l| l.strip_prefix("< ")) {
        let msg: Message = dexholdem_core::codec::decode_line(line).unwrap();
        assert_eq!(msg.encode(), format!("{line}\n"));
        if let Message::Error { code, seq, .. } = msg {
            assert_eq!(seq, 0);
            codes.push(code);
        }
    }
    for code in [ErrorCode::Malformed, ErrorCode::UnknownSession, ErrorCode::IllegalAction, ErrorCode::OutOfTurn] {
        assert!(codes.contains(&code), "{code:?} missing from {codes:?}");
    }
}

#[test]
fn state_updates_carry_contiguous_sequence_numbers() {
    let text = std::fs::read_to_string(fixture()).unwrap();
    let seqs: Vec<u64> = text
        .lines()
        .filter_map(|l| l.strip_prefix("< "))
        .map(|l| dexholdem_core::codec::decode_line::<Message>(l).unwrap())
        .filter(|m| m.session_id() == "demo" && !matches!(m, Message::Error { .. }))
        .map(|m| m.seq())
        .collect();
    assert!(!seqs.is_empty());
    assert!(seqs.iter().enumerate().all(|(i, s)| *s == i as u64), "{seqs:?}");
}

#[test]
fn tcp_console_can_join_raise_and_see_errors() {
    use std::io::{BufRead, BufReader, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::Arc;

    use dexholdem_core::rules::OpponentAction;

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hub = Arc::new(Hub::new(console_config()));
    std::thread::spawn(move || dexholdem_core::wire::serve(listener, hub));

    let mut stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(std::time::Duration::from_secs(10))).unwrap();
    let mut lines = BufReader::new(stream.try_clone().unwrap()).lines();
    let mut next = || -> Message { dexholdem_core::codec::decode_line(&lines.next().unwrap().unwrap()).unwrap() };

    stream.write_all(Message::Join { session_id: "tcp".into(), seq: 0, config: None }.encode().as_bytes()).unwrap();
    let mut last_seq = None;
    let raise = loop {
        let Message::StateUpdate { seq, view, .. } = next() else { panic!("expected a state update") };
        assert_eq!(seq, last_seq.map_or(0, |s| s + 1), "join snapshot first, then contiguous updates");
        last_seq = Some(seq);
        let target = view.opponent_legal.iter().find_map(|a| match a {
            OpponentAction::Raise(t) => Some(*t),
            _ => None,
        });
        if let (false, Some(t)) = (view.is_robot_turn, target) {
            break t;
        }
    };

    stream.write_all(act(1, ActionName::Check, None).replace("demo", "tcp").as_bytes()).unwrap();
    match next() {
        Message::Error { code, seq, .. } => assert_eq!((code, seq), (ErrorCode::IllegalAction, 0)),
        other => panic!("expected an error, got {other:?}"),
    }

    stream.write_all(act(2, ActionName::Raise, Some(raise)).replace("demo", "tcp").as_bytes()).unwrap();
    loop {
        match next() {
            Message::StateUpdate { seq, cause, .. } => {
                assert_eq!(Some(seq), last_seq.map(|s| s + 1));
                last_seq = Some(seq);
                if cause.is_some() {
                    break;
                }
            }
            Message::HumanHelp { .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
