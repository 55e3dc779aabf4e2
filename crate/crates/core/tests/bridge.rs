use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, UdpSocket};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use musinger::bridge::{BridgeMessage, BridgeServer, BRIDGE_PATH};
use musinger::display::LinkageState;
use musinger::recorder::TapKind;
use serde_json::{json, Value};
use tungstenite::{connect, Message, WebSocket};

type Client = WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>;

fn ui_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<!doctype html><title>console</title>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    dir
}

fn free_tcp_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn free_udp_port() -> u16 {
    UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// Connects, retrying while the server starts.
fn client(port: u16) -> Client {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        match connect(format!("ws://127.0.0.1:{port}{BRIDGE_PATH}")) {
            Ok((ws, _)) => {
                if let tungstenite::stream::MaybeTlsStream::Plain(s) = ws.get_ref() {
                    s.set_read_timeout(Some(Duration::from_millis(200))).unwrap();
                }
                return ws;
            }
            Err(e) if Instant::now() > deadline => panic!("bridge never came up: {e}"),
            Err(_) => thread::sleep(Duration::from_millis(50)),
        }
    }
}

fn read_json(ws: &mut Client) -> Option<Value> {
    match ws.read() {
        Ok(Message::Text(t)) => Some(serde_json::from_str(t.as_str()).unwrap()),
        _ => None,
    }
}

fn http_get(port: u16, path: &str) -> String {
    let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    out
}

fn musinger() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_musinger"));
    c.env_remove("MUSINGER_CONFIG").stdout(Stdio::piped()).stderr(Stdio::piped());
    c
}

fn interrupt(child: &Child) {
    Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
}

#[test]
fn tap_and_state_messages_cross_the_socket() {
    let dir = ui_dir();
    let server = BridgeServer::start("127.0.0.1:0", Some(dir.path())).unwrap();
    let port = server.local_addr().port();
    let mut ws = client(port);
    assert!(server.wait_for_client(Duration::from_secs(5)));

    let tap = json!({"type": "tap", "channel": 2, "kind": "Press", "force_n": 6.5, "t_us": 1234});
    ws.send(Message::text(tap.to_string())).unwrap();
    ws.send(Message::text(r#"{"type":"hello"}"#)).unwrap();
    ws.send(Message::text(r#"{"type":"answer","melody":"C"}"#)).unwrap();
    match server.recv_timeout(Duration::from_secs(5)) {
        Some(BridgeMessage::Tap { channel, kind, force_n, t_us }) => {
            assert_eq!((channel, kind, force_n, t_us), (2, TapKind::Press, 6.5, 1234));
        }
        other => panic!("{other:?}"),
    }
    // the unknown type is skipped
    assert_eq!(
        server.recv_timeout(Duration::from_secs(5)),
        Some(BridgeMessage::Answer { melody: musinger::model::MelodyId::C })
    );

    let rest = LinkageState {
        theta1_rad: -1.5,
        theta2_rad: -1.6,
        effector_mm: musinger::display::Point::new(15.0, -55.0),
        in_contact: false,
        contact_depth_mm: 0.0,
        clamped: false,
    };
    server.broadcast(&BridgeMessage::state(7, &[rest; 3]));
    server.broadcast(&BridgeMessage::Prompt { trial_index: 3 });
    let deadline = Instant::now() + Duration::from_secs(5);
    let mut got = Vec::new();
    while got.len() < 2 && Instant::now() < deadline {
        got.extend(read_json(&mut ws));
    }
    assert_eq!(got[0]["type"], "state");
    assert_eq!(got[0]["tick"], 7);
    assert_eq!(got[0]["linkages"].as_array().unwrap().len(), 3);
    assert_eq!(got[0]["linkages"][0]["y_mm"], -55.0);
    assert_eq!(got[1], json!({"type": "prompt", "trial_index": 3}));
}

#[test]
fn static_assets_share_the_port() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("ui");
    std::fs::create_dir(&dir).unwrap();
    std::fs::write(dir.join("index.html"), "<!doctype html><title>console</title>").unwrap();
    std::fs::write(dir.join("app.js"), "console.log(1)").unwrap();
    std::fs::write(root.path().join("secret.txt"), "nope").unwrap();
    let server = BridgeServer::start("127.0.0.1:0", Some(&dir)).unwrap();
    let port = server.local_addr().port();
    let index = http_get(port, "/");
    assert!(index.starts_with("HTTP/1.1 200"), "{index}");
    assert!(index.contains("<title>console</title>"));
    assert!(http_get(port, "/app.js").contains("javascript"));
    assert!(http_get(port, "/missing.css").starts_with("HTTP/1.1 404"));
    let escaped = http_get(port, "/../secret.txt");
    assert!(escaped.starts_with("HTTP/1.1 404") && !escaped.contains("nope"), "{escaped}");
}

#[test]
fn missing_console_assets_exit_four() {
    let empty = tempfile::tempdir().unwrap();
    let port = free_tcp_port().to_string();
    let o = musinger()
        .args(["play", "--melody", "A", "--ui-port", &port, "--ui-dir", empty.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(!Path::new(&empty.path().join("index.html")).exists());
}

#[test]
fn full_session_through_the_console() {
    let dir = ui_dir();
    let log = dir.path().join("trials.csv");
    let port = free_tcp_port();
    let child = musinger()
        .args(["--seed", "3", "trial", "--answers", "ui", "--reps", "3", "--speed", "1000", "--timeout", "20"])
        .args(["--ui-port", &port.to_string(), "--ui-dir", dir.path().to_str().unwrap()])
        .args(["--log", log.to_str().unwrap()])
        .spawn()
        .unwrap();
    let mut ws = client(port);
    let mut prompts = Vec::new();
    let mut states = 0;
    let deadline = Instant::now() + Duration::from_secs(120);
    while prompts.len() < 12 && Instant::now() < deadline {
        let Some(msg) = read_json(&mut ws) else { continue };
        match msg["type"].as_str() {
            Some("state") => states += 1,
            Some("prompt") => {
                prompts.push(msg["trial_index"].as_u64().unwrap());
                ws.send(Message::text(json!({"type": "answer", "melody": "B"}).to_string())).unwrap();
            }
            _ => {}
        }
    }
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(prompts, (0..12).collect::<Vec<_>>());
    assert!(states > 0);

    let records = musinger::experiment::read_trial_log(std::fs::File::open(&log).unwrap()).unwrap();
    assert_eq!(records.len(), 12);
    assert!(records.iter().all(|r| r.answered == musinger::model::MelodyId::B));
    assert_eq!(records.iter().filter(|r| r.correct()).count(), 3);
    let analyzed = musinger().args(["analyze", log.to_str().unwrap()]).output().unwrap();
    assert!(analyzed.status.success());
}

#[test]
fn console_taps_stream_to_a_listener_with_a_display_view() {
    let dir = ui_dir();
    let udp = format!("127.0.0.1:{}", free_udp_port());
    let (view_port, pad_port) = (free_tcp_port(), free_tcp_port());
    let listener = musinger()
        .args(["stream", "--listen", &udp, "--max-seconds", "30"])
        .args(["--ui-port", &view_port.to_string(), "--ui-dir", dir.path().to_str().unwrap()])
        .spawn()
        .unwrap();
    let mut view = client(view_port);
    let sender = musinger()
        .args(["stream", "--connect", &udp])
        .args(["--ui-port", &pad_port.to_string(), "--ui-dir", dir.path().to_str().unwrap()])
        .stdin(Stdio::null())
        .spawn()
        .unwrap();
    let mut pads = client(pad_port);
    thread::sleep(Duration::from_millis(200));
    for channel in [1, 2, 3, 1] {
        let tap = |kind: &str, force: f64| json!({"type": "tap", "channel": channel, "kind": kind, "force_n": force, "t_us": 0});
        pads.send(Message::text(tap("Press", 9.0).to_string())).unwrap();
        thread::sleep(Duration::from_millis(150));
        pads.send(Message::text(tap("Release", 0.0).to_string())).unwrap();
        thread::sleep(Duration::from_millis(250));
    }
    // the display view sees contact while the taps play out
    let mut contact = false;
    let deadline = Instant::now() + Duration::from_secs(3);
    while Instant::now() < deadline {
        if let Some(msg) = read_json(&mut view) {
            if msg["type"] == "state" {
                contact |= msg["linkages"].as_array().unwrap().iter().any(|l| l["in_contact"] == true);
            }
        }
    }
    interrupt(&sender);
    let send = sender.wait_with_output().unwrap();
    assert!(send.status.success(), "{}", String::from_utf8_lossy(&send.stderr));
    let listen = listener.wait_with_output().unwrap();
    let text = String::from_utf8_lossy(&listen.stdout);
    assert!(text.contains("onsets: 4"), "{text}");
    assert!(contact, "display view never showed skin contact");
}
