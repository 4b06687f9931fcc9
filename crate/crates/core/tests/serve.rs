mod common;

use std::io::Write;
use std::net::{TcpStream, UdpSocket};
use std::sync::atomic::Ordering;
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};
use vif_core::physio::{encode_sample, Sample};
use vif_core::runtime::{Cause, EngineEvent};
use vif_core::script::parse_script;
use vif_core::session::{
    decode_server_message, encode_client_message, serve, ClientMessage, ServeConfig, ServerHandle, ServerMessage,
    SINGLE_READER,
};

type Ws = WebSocket<TcpStream>;

fn start() -> ServerHandle {
    let story = parse_script(&common::read_corpus("adventurer.vif")).unwrap().story;
    let mut config = ServeConfig::new("127.0.0.1:0".parse().unwrap(), "127.0.0.1:0".parse().unwrap());
    config.tick_ms = 10;
    serve(story, config).unwrap()
}

fn connect(handle: &ServerHandle) -> Ws {
    let stream = TcpStream::connect(handle.client_addr()).unwrap();
    stream.set_read_timeout(Some(Duration::from_millis(50))).unwrap();
    let url = format!("ws://{}/", handle.client_addr());
    tungstenite::client(url, stream).unwrap().0
}

fn send(ws: &mut Ws, msg: &ClientMessage) {
    ws.send(Message::Text(encode_client_message(msg))).unwrap();
}

/// Reads until `pred` matches a server message; `None` on deadline or close.
fn wait_for(ws: &mut Ws, within: Duration, mut pred: impl FnMut(&ServerMessage) -> bool) -> Option<ServerMessage> {
    let deadline = Instant::now() + within;
    while Instant::now() < deadline {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let msg = decode_server_message(&text).unwrap();
                if pred(&msg) {
                    return Some(msg);
                }
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(_) => return None,
        }
    }
    None
}

/// Reads until the server closes; returns the close reason.
fn close_reason(ws: &mut Ws) -> Option<String> {
    let deadline = Instant::now() + Duration::from_secs(3);
    while Instant::now() < deadline {
        match ws.read() {
            Ok(Message::Close(frame)) => return frame.map(|f| f.reason.into_owned()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(_) => return None,
        }
    }
    None
}

fn is_transition(msg: &ServerMessage, to: &str, cause: Cause) -> bool {
    matches!(msg, ServerMessage::Event { event: EngineEvent::TransitionFired { to: t, cause: c, .. } } if t == to && *c == cause)
}

#[test]
fn live_session_over_sockets() {
    let handle = start();
    let mut reader = connect(&handle);
    send(&mut reader, &ClientMessage::Hello { protocol_version: 1 });
    let scene = wait_for(&mut reader, Duration::from_secs(2), |m| matches!(m, ServerMessage::Scene { .. }));
    match scene {
        Some(ServerMessage::Scene { scene }) => {
            assert_eq!(scene.section, "start");
            assert_eq!(scene.speakers.len(), 2);
            assert_eq!(scene.spans[0].text, "Howdy, Adventurer!");
        }
        other => panic!("expected a scene, got {other:?}"),
    }

    let mut second = connect(&handle);
    assert_eq!(close_reason(&mut second).as_deref(), Some(SINGLE_READER));
    assert_eq!(handle.stats().readers_rejected.load(Ordering::Relaxed), 1);

    let mut sensor = TcpStream::connect(handle.sensor_addr()).unwrap();
    writeln!(sensor, "this is not a sample").unwrap();
    writeln!(sensor, "{}", encode_sample(&Sample::event(500, "sim", "sim.stressed", "true"))).unwrap();
    sensor.flush().unwrap();
    let started = Instant::now();
    assert!(
        wait_for(&mut reader, Duration::from_secs(4), |m| is_transition(m, "stress", Cause::Conditional)).is_some(),
        "no start->stress transition"
    );
    assert!(started.elapsed() >= Duration::from_millis(1500));
    let scene = wait_for(&mut reader, Duration::from_secs(1), |m| matches!(m, ServerMessage::Scene { .. }));
    assert!(matches!(scene, Some(ServerMessage::Scene { scene }) if scene.section == "stress"));

    send(&mut reader, &ClientMessage::Hover { span: Some("s4".into()) });
    assert!(wait_for(&mut reader, Duration::from_secs(3), |m| is_transition(m, "send_to_bob", Cause::Choice)).is_some());

    let udp = UdpSocket::bind("127.0.0.1:0").unwrap();
    udp.send_to(b"{\"t\":1}", handle.sensor_addr()).unwrap();
    let deadline = Instant::now() + Duration::from_secs(2);
    while handle.stats().sensor_dropped.load(Ordering::Relaxed) < 2 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(10));
    }
    assert_eq!(handle.stats().sensor_dropped.load(Ordering::Relaxed), 2);

    send(&mut reader, &ClientMessage::Yaw { deg: 180.0 });
    assert!(wait_for(&mut reader, Duration::from_secs(4), |m| is_transition(m, "bob_awaits", Cause::Timer)).is_some());

    drop(reader);
    let transcript = handle.shutdown();
    let visited: Vec<&str> = transcript
        .iter()
        .filter_map(|e| match e {
            EngineEvent::SectionActivated { id, .. } => Some(id.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(visited, ["start", "stress", "send_to_bob", "bob_awaits"]);
    assert!(transcript.windows(2).all(|w| w[0].t() <= w[1].t()));
}

#[test]
fn protocol_violations_close_the_channel() {
    let handle = start();
    let mut reader = connect(&handle);
    send(&mut reader, &ClientMessage::Yaw { deg: 10.0 });
    assert_eq!(close_reason(&mut reader).as_deref(), Some("hello expected"));

    // the slot frees up once the violator is gone
    let deadline = Instant::now() + Duration::from_secs(2);
    let mut next = loop {
        let mut ws = connect(&handle);
        send(&mut ws, &ClientMessage::Hello { protocol_version: 1 });
        if wait_for(&mut ws, Duration::from_millis(300), |m| matches!(m, ServerMessage::Scene { .. })).is_some() {
            break ws;
        }
        assert!(Instant::now() < deadline, "reader slot never freed");
    };
    next.send(Message::Text(r#"{"type":"warp"}"#.into())).unwrap();
    let reason = close_reason(&mut next).unwrap();
    assert!(reason.contains("malformed client message"), "{reason}");
    handle.shutdown();
}
