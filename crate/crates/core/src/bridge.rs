//! JSON bridge for the browser console. One port serves both the websocket
//! endpoint at `/bridge` and the console's static files.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tungstenite::{Message, WebSocket};

use crate::display::LinkageState;
use crate::model::{MelodyId, CHANNELS};
use crate::recorder::{TapEvent, TapKind};

pub const BRIDGE_PATH: &str = "/bridge";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageView {
    pub x_mm: f64,
    pub y_mm: f64,
    pub in_contact: bool,
    pub depth_mm: f64,
}

impl From<&LinkageState> for LinkageView {
    fn from(s: &LinkageState) -> Self {
        LinkageView { x_mm: s.effector_mm.x, y_mm: s.effector_mm.y, in_contact: s.in_contact, depth_mm: s.contact_depth_mm }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BridgeMessage {
    Tap { channel: u8, kind: TapKind, force_n: f64, t_us: u64 },
    State { tick: u64, linkages: [LinkageView; CHANNELS] },
    Prompt { trial_index: u32 },
    Answer { melody: MelodyId },
}

impl BridgeMessage {
    pub fn state(tick: u64, states: &[LinkageState; CHANNELS]) -> Self {
        BridgeMessage::State { tick, linkages: states.each_ref().map(LinkageView::from) }
    }

    /// Tap messages as recorder events; `None` for other messages or bad channels.
    pub fn tap_event(&self) -> Option<TapEvent> {
        match *self {
            BridgeMessage::Tap { channel, kind, force_n, t_us } => {
                let ch = crate::model::Channel::from_number(channel as u32)?;
                Some(match kind {
                    TapKind::Press => TapEvent::press(ch, force_n, t_us),
                    TapKind::Release => TapEvent::release(ch, t_us),
                })
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bridge messages are plain data")
    }
}

const KNOWN_TYPES: [&str; 4] = ["tap", "state", "prompt", "answer"];

/// Parses one message. Unknown `type`s are ignored (`Ok(None)`) with a warning.
pub fn parse_message(text: &str) -> Result<Option<BridgeMessage>, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("type").and_then(|t| t.as_str()) {
        Some(t) if KNOWN_TYPES.contains(&t) => serde_json::from_value(value).map(Some),
        other => {
            log::warn!("ignoring bridge message of unknown type {other:?}");
            Ok(None)
        }
    }
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error("console assets not found: {0}")]
    MissingUi(PathBuf),
}

type Clients = Arc<Mutex<Vec<Sender<String>>>>;

/// Running bridge. Dropping it stops accepting connections.
pub struct BridgeServer {
    addr: SocketAddr,
    inbound: Receiver<BridgeMessage>,
    clients: Clients,
    shutdown: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl BridgeServer {
    /// `ui_dir`, if given, must contain `index.html`.
    pub fn start(addr: &str, ui_dir: Option<&Path>) -> Result<Self, BridgeError> {
        if let Some(dir) = ui_dir {
            if !dir.join("index.html").is_file() {
                return Err(BridgeError::MissingUi(dir.to_path_buf()));
            }
        }
        let listener = TcpListener::bind(addr).map_err(|source| BridgeError::Bind { addr: addr.to_string(), source })?;
        let local = listener.local_addr().map_err(|source| BridgeError::Bind { addr: addr.to_string(), source })?;
        listener.set_nonblocking(true).map_err(|source| BridgeError::Bind { addr: addr.to_string(), source })?;

        let (tx, inbound) = mpsc::channel();
        let clients: Clients = Arc::default();
        let shutdown = Arc::new(AtomicBool::new(false));
        let ui_dir = ui_dir.map(Path::to_path_buf);
        let accept = {
            let clients = clients.clone();
            let shutdown = shutdown.clone();
            thread::spawn(move || accept_loop(listener, tx, clients, shutdown, ui_dir))
        };
        log::info!("bridge listening on ws://{local}{BRIDGE_PATH}");
        Ok(BridgeServer { addr: local, inbound, clients, shutdown, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        self.clients.lock().unwrap().len()
    }

    /// Sends to every connected client; disconnected clients are pruned.
    pub fn broadcast(&self, msg: &BridgeMessage) {
        let text = msg.to_json();
        self.clients.lock().unwrap().retain(|c| c.send(text.clone()).is_ok());
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<BridgeMessage> {
        self.inbound.recv_timeout(timeout).ok()
    }

    pub fn try_recv(&self) -> Option<BridgeMessage> {
        self.inbound.try_recv().ok()
    }

    /// Discards queued inbound messages.
    pub fn drain(&self) {
        while self.inbound.try_recv().is_ok() {}
    }

    /// Blocks until at least one client is connected.
    pub fn wait_for_client(&self, timeout: Duration) -> bool {
        let deadline = std::time::Instant::now() + timeout;
        while std::time::Instant::now() < deadline {
            if self.client_count() > 0 {
                return true;
            }
            thread::sleep(Duration::from_millis(10));
        }
        self.client_count() > 0
    }
}

impl Drop for BridgeServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        self.clients.lock().unwrap().clear();
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<BridgeMessage>, clients: Clients, shutdown: Arc<AtomicBool>, ui: Option<PathBuf>) {
    while !shutdown.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let tx = tx.clone();
                let clients = clients.clone();
                let shutdown = shutdown.clone();
                let ui = ui.clone();
                thread::spawn(move || {
                    if let Err(e) = handle_connection(stream, tx, clients, shutdown, ui.as_deref()) {
                        log::debug!("bridge connection {peer}: {e}");
                    }
                });
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::warn!("bridge accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

/// Request line and headers, read without consuming them from the socket.
fn peek_request(stream: &TcpStream) -> io::Result<(String, HashMap<String, String>)> {
    let mut buf = vec![0u8; 8192];
    for _ in 0..200 {
        let n = stream.peek(&mut buf)?;
        if n == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "closed before request"));
        }
        let head = &buf[..n];
        if let Some(end) = head.windows(4).position(|w| w == b"\r\n\r\n") {
            let text = String::from_utf8_lossy(&head[..end]);
            let mut lines = text.split("\r\n");
            let request = lines.next().unwrap_or_default().to_string();
            let headers = lines
                .filter_map(|l| l.split_once(':'))
                .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
                .collect();
            return Ok((request, headers));
        }
        if n == buf.len() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "request head too large"));
        }
        thread::sleep(Duration::from_millis(5));
    }
    Err(io::Error::new(io::ErrorKind::TimedOut, "incomplete request"))
}

fn handle_connection(
    stream: TcpStream,
    tx: Sender<BridgeMessage>,
    clients: Clients,
    shutdown: Arc<AtomicBool>,
    ui: Option<&Path>,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let (request, headers) = peek_request(&stream)?;
    let mut parts = request.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or("/").split('?').next().unwrap_or("/").to_string();
    let upgrade = headers.get("upgrade").is_some_and(|v| v.eq_ignore_ascii_case("websocket"));
    if path == BRIDGE_PATH && upgrade {
        let ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
        serve_socket(ws, tx, clients, shutdown)
    } else {
        serve_static(stream, &method, &path, ui)
    }
}

fn serve_socket(
    mut ws: WebSocket<TcpStream>,
    tx: Sender<BridgeMessage>,
    clients: Clients,
    shutdown: Arc<AtomicBool>,
) -> io::Result<()> {
    let (out_tx, out_rx) = mpsc::channel::<String>();
    clients.lock().unwrap().push(out_tx);
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(2)))?;
    loop {
        if shutdown.load(Ordering::Relaxed) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        loop {
            match out_rx.try_recv() {
                Ok(text) => ws.write(Message::text(text)).map_err(|e| io::Error::other(e.to_string()))?,
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    return Ok(());
                }
            }
        }
        match ws.flush() {
            Ok(()) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(io::Error::other(e.to_string())),
        }
        match ws.read() {
            Ok(Message::Text(text)) => match parse_message(text.as_str()) {
                Ok(Some(msg)) => {
                    let _ = tx.send(msg);
                }
                Ok(None) => {}
                Err(e) => log::warn!("malformed bridge message: {e}"),
            },
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(io::Error::other(e.to_string())),
        }
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

fn resolve_asset(ui: &Path, url_path: &str) -> Option<PathBuf> {
    let rel = Path::new(url_path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let file = if url_path.ends_with('/') || rel.as_os_str().is_empty() { ui.join(rel).join("index.html") } else { ui.join(rel) };
    file.is_file().then_some(file)
}

fn serve_static(mut stream: TcpStream, method: &str, path: &str, ui: Option<&Path>) -> io::Result<()> {
    // consume the request head so the peer sees a clean response
    let mut sink = [0u8; 8192];
    let _ = stream.read(&mut sink);
    let respond = |stream: &mut TcpStream, status: &str, ctype: &str, body: &[u8], head_only: bool| {
        write!(stream, "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", body.len())?;
        if !head_only {
            stream.write_all(body)?;
        }
        stream.flush()
    };
    if method != "GET" && method != "HEAD" {
        return respond(&mut stream, "405 Method Not Allowed", "text/plain", b"method not allowed\n", false);
    }
    match ui.and_then(|dir| resolve_asset(dir, path)) {
        Some(file) => {
            let body = std::fs::read(&file)?;
            respond(&mut stream, "200 OK", content_type(&file), &body, method == "HEAD")
        }
        None => respond(&mut stream, "404 Not Found", "text/plain", b"not found\n", method == "HEAD"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        let tap = BridgeMessage::Tap { channel: 2, kind: TapKind::Press, force_n: 10.0, t_us: 1234 };
        assert_eq!(tap.to_json(), r#"{"type":"tap","channel":2,"kind":"Press","force_n":10.0,"t_us":1234}"#);
        assert_eq!(BridgeMessage::Answer { melody: MelodyId::C }.to_json(), r#"{"type":"answer","melody":"C"}"#);
        assert_eq!(BridgeMessage::Prompt { trial_index: 3 }.to_json(), r#"{"type":"prompt","trial_index":3}"#);
    }

    #[test]
    fn messages_round_trip() {
        let state = BridgeMessage::State {
            tick: 9,
            linkages: [
                LinkageView { x_mm: 15.0, y_mm: -50.0, in_contact: false, depth_mm: 0.0 },
                LinkageView { x_mm: 15.0, y_mm: -57.25, in_contact: true, depth_mm: 2.25 },
                LinkageView { x_mm: 14.999999999999998, y_mm: -50.1, in_contact: false, depth_mm: 0.0 },
            ],
        };
        for m in [
            state,
            BridgeMessage::Tap { channel: 1, kind: TapKind::Release, force_n: 0.0, t_us: u64::MAX },
            BridgeMessage::Prompt { trial_index: 11 },
            BridgeMessage::Answer { melody: MelodyId::D },
        ] {
            let json = m.to_json();
            let back = parse_message(&json).unwrap().unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_json(), json);
        }
    }

    #[test]
    fn unknown_types_are_ignored() {
        assert_eq!(parse_message(r#"{"type":"hello","x":1}"#).unwrap(), None);
        assert_eq!(parse_message(r#"{"no_type":true}"#).unwrap(), None);
        assert!(parse_message(r#"{"type":"answer","melody":"Z"}"#).is_err());
        assert!(parse_message("not json").is_err());
    }

    #[test]
    fn taps_become_events() {
        let m = BridgeMessage::Tap { channel: 3, kind: TapKind::Press, force_n: 10.0, t_us: 5 };
        let e = m.tap_event().unwrap();
        assert_eq!((e.channel.number(), e.kind, e.force_n, e.timestamp_us), (3, TapKind::Press, 10.0, 5));
        assert!(BridgeMessage::Tap { channel: 0, kind: TapKind::Press, force_n: 1.0, t_us: 0 }.tap_event().is_none());
    }

    #[test]
    fn asset_paths_stay_inside() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("index.html"), "<html></html>").unwrap();
        std::fs::write(dir.path().join("app.js"), "//").unwrap();
        assert_eq!(resolve_asset(dir.path(), "/"), Some(dir.path().join("index.html")));
        assert_eq!(resolve_asset(dir.path(), "/app.js"), Some(dir.path().join("app.js")));
        assert_eq!(resolve_asset(dir.path(), "/../etc/passwd"), None);
        assert_eq!(resolve_asset(dir.path(), "/missing.js"), None);
    }

    #[test]
    fn missing_ui_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(BridgeServer::start("127.0.0.1:0", Some(dir.path())), Err(BridgeError::MissingUi(_))));
    }
}
