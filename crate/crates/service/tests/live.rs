use std::net::SocketAddr;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use junction_core::{dsl, run, InputCode, ModeTag, Scenario};
use junction_service::{Service, ServiceConfig, ServiceError, ServiceHandle, StateUpdate};
use serde_json::Value;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, Lines};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;

const WAIT: Duration = Duration::from_secs(10);

fn config(tick_ms: u64) -> ServiceConfig {
    ServiceConfig {
        listen: SocketAddr::from(([127, 0, 0, 1], 0)),
        ws_listen: Some(SocketAddr::from(([127, 0, 0, 1], 0))),
        tick_period_ms: tick_ms,
        junction: None,
        max_clients: 8,
    }
}

async fn start(tick_ms: u64) -> ServiceHandle {
    Service::bind(config(tick_ms)).await.unwrap().spawn()
}

struct Client {
    lines: Lines<BufReader<OwnedReadHalf>>,
    write: OwnedWriteHalf,
}

impl Client {
    async fn connect(addr: SocketAddr) -> Client {
        let (read, write) = TcpStream::connect(addr).await.unwrap().into_split();
        Client {
            lines: BufReader::new(read).lines(),
            write,
        }
    }

    async fn send(&mut self, line: &str) {
        self.write.write_all(line.as_bytes()).await.unwrap();
        self.write.write_all(b"\n").await.unwrap();
    }

    async fn recv(&mut self) -> Option<String> {
        timeout(WAIT, self.lines.next_line()).await.expect("reply in time").unwrap()
    }

    async fn recv_json(&mut self) -> Value {
        serde_json::from_str(&self.recv().await.expect("open connection")).unwrap()
    }

    async fn update(&mut self) -> StateUpdate {
        let line = self.recv().await.expect("open connection");
        serde_json::from_str(&line).unwrap_or_else(|e| panic!("{line}: {e}"))
    }

    /// Sends a command and returns the reply, keeping any updates that were
    /// pushed ahead of it.
    async fn request(&mut self, line: &str) -> (Vec<StateUpdate>, Value) {
        self.send(line).await;
        let mut before = Vec::new();
        loop {
            let v = self.recv_json().await;
            if v.get("ok").is_some() {
                return (before, v);
            }
            before.push(serde_json::from_value(v).unwrap());
        }
    }
}

#[tokio::test]
async fn get_at_startup() {
    let service = start(60_000).await;
    let mut c = Client::connect(service.local_addr()).await;
    c.send(r#"{"cmd":"get"}"#).await;
    let v = c.recv_json().await;
    assert_eq!(v["tick"], 0);
    assert_eq!(v["hex"], "3218A6");
    assert_eq!(v["mode"], "traditional");
    assert_eq!(v["phase"], 0);
    assert_eq!(v["remaining"], 60);
    assert_eq!(v["input"], 0);
    service.shutdown().await;
}

#[tokio::test]
async fn error_replies_keep_the_connection() {
    let service = start(60_000).await;
    let mut c = Client::connect(service.local_addr()).await;
    c.send(r#"{"cmd":"set_input","code":9}"#).await;
    assert_eq!(c.recv().await.unwrap(), r#"{"ok":false,"error":"code out of range"}"#);
    c.send(r#"{"cmd":"launch"}"#).await;
    assert_eq!(c.recv().await.unwrap(), r#"{"ok":false,"error":"unknown command"}"#);
    c.send("{{{").await;
    assert_eq!(c.recv().await.unwrap(), r#"{"ok":false,"error":"malformed request"}"#);
    c.send(r#"{"cmd":"ping"}"#).await;
    assert_eq!(c.recv().await.unwrap(), r#"{"ok":true,"pong":true}"#);
    c.send(r#"{"cmd":"set_input","code":7}"#).await;
    assert_eq!(c.recv().await.unwrap(), r#"{"ok":true}"#);
    service.shutdown().await;
}

#[tokio::test]
async fn first_phase_change_at_tick_60() {
    let service = Service::bind(config(1)).await.unwrap();
    let mut rx = service.updates();
    let mut seen = vec![service.latest()];
    let service = service.spawn();
    while seen.len() < 76 {
        seen.push(timeout(WAIT, rx.recv()).await.unwrap().unwrap());
    }
    for (i, u) in seen.iter().enumerate() {
        assert_eq!(u.tick, i as u64);
        let expected = match u.tick {
            0..60 => "3218A6",
            60..75 => "410820",
            _ => "98C862",
        };
        assert_eq!(u.hex, expected, "tick {}", u.tick);
    }
    assert_eq!(seen[59].remaining, 1);
    assert_eq!((seen[60].phase, seen[60].remaining), (Some(1), 15));

    // A TCP subscriber sees the same stream.
    let mut c = Client::connect(service.local_addr()).await;
    c.request(r#"{"cmd":"subscribe"}"#).await;
    let pushed = c.update().await;
    let mut local = timeout(WAIT, rx.recv()).await.unwrap().unwrap();
    while local.tick < pushed.tick {
        local = timeout(WAIT, rx.recv()).await.unwrap().unwrap();
    }
    assert_eq!(local, pushed);
    service.shutdown().await;
}

#[tokio::test]
async fn emergency_request_shows_safe_word_next() {
    let service = start(5).await;
    let mut c = Client::connect(service.local_addr()).await;
    c.request(r#"{"cmd":"subscribe"}"#).await;
    c.update().await;
    let (_, ok) = c.request(r#"{"cmd":"set_input","code":1}"#).await;
    assert_eq!(ok, serde_json::json!({"ok": true}));
    let mut safe = 0;
    let next = c.update().await;
    assert_eq!((next.hex.as_str(), next.mode, next.input), ("410410", ModeTag::SafeTransition, 1));
    let mut u = next;
    while u.hex == "410410" {
        safe += 1;
        u = c.update().await;
    }
    assert_eq!(safe, 15);
    assert_eq!((u.hex.as_str(), u.mode), ("3A0822", ModeTag::EmergencyHold));
    service.shutdown().await;
}

#[tokio::test]
async fn two_clients_last_command_wins() {
    let service = start(250).await;
    let mut a = Client::connect(service.local_addr()).await;
    let mut b = Client::connect(service.local_addr()).await;
    a.request(r#"{"cmd":"subscribe"}"#).await;
    b.request(r#"{"cmd":"subscribe"}"#).await;
    // Start right after a tick so both commands land in the same one.
    let last = a.update().await;
    let (before_a, _) = a.request(r#"{"cmd":"set_input","code":2}"#).await;
    let (before_b, _) = b.request(r#"{"cmd":"set_input","code":3}"#).await;
    assert!(before_a.is_empty());
    let mut from_a = Vec::new();
    let mut from_b = before_b;
    while from_a.len() < 3 {
        from_a.push(a.update().await);
    }
    while from_b.len() < from_a.len() + 1 {
        from_b.push(b.update().await);
    }
    let from_b: Vec<_> = from_b.into_iter().filter(|u| u.tick > last.tick).take(3).collect();
    assert_eq!(from_a, from_b);
    assert_eq!(from_a[0].tick, last.tick + 1);
    assert!(from_a.iter().all(|u| u.input == 3 && u.hex == "410410"));
    service.shutdown().await;
}

#[tokio::test]
async fn live_session_replays_through_the_simulator() {
    let service = start(2).await;
    let mut c = Client::connect(service.local_addr()).await;
    c.request(r#"{"cmd":"subscribe"}"#).await;
    let mut updates = vec![c.update().await];
    let plan = [(20, 1), (110, 0), (140, 5), (260, 0), (300, 4), (310, 6), (330, 2)];
    let mut plan = plan.iter().peekable();
    while updates.len() < 520 {
        if let Some((at, code)) = plan.peek() {
            if updates.len() >= *at {
                let (mut pushed, ok) = c.request(&format!(r#"{{"cmd":"set_input","code":{code}}}"#)).await;
                assert_eq!(ok["ok"], true);
                updates.append(&mut pushed);
                plan.next();
                continue;
            }
        }
        updates.push(c.update().await);
    }
    service.shutdown().await;

    let first = updates[0].tick;
    for pair in updates.windows(2) {
        assert_eq!(pair[1].tick, pair[0].tick + 1, "gap in pushed updates");
    }
    let inputs: Vec<InputCode> = std::iter::repeat_n(InputCode::TRADITIONAL, first as usize)
        .chain(updates.iter().map(|u| InputCode::new(u.input.into()).unwrap()))
        .collect();
    let scenario = Scenario::from_inputs("live", &inputs).unwrap();
    let trace = run(&scenario, &dsl::compile_builtin());
    let replayed: Vec<StateUpdate> = trace.records[first as usize..].iter().map(StateUpdate::from).collect();
    assert_eq!(replayed, updates);
    assert!(updates.iter().any(|u| u.mode == ModeTag::SafeHold));
    assert!(updates.iter().any(|u| u.hex == "88E820"));
}

#[tokio::test]
async fn websocket_speaks_the_same_schema() {
    let service = start(5).await;
    let url = format!("ws://{}/ws", service.ws_addr().unwrap());
    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    ws.send(Message::text(r#"{"cmd":"ping"}"#)).await.unwrap();
    assert_eq!(ws_text(&mut ws).await, r#"{"ok":true,"pong":true}"#);
    ws.send(Message::text(r#"{"cmd":"set_input","code":9}"#)).await.unwrap();
    assert_eq!(ws_text(&mut ws).await, r#"{"ok":false,"error":"code out of range"}"#);
    ws.send(Message::text(r#"{"cmd":"get"}"#)).await.unwrap();
    let got: StateUpdate = serde_json::from_str(&ws_text(&mut ws).await).unwrap();
    assert!(got.tick < 60 || got.hex != "3218A6");
    ws.send(Message::text(r#"{"cmd":"subscribe"}"#)).await.unwrap();
    assert_eq!(ws_text(&mut ws).await, r#"{"ok":true}"#);
    let a: StateUpdate = serde_json::from_str(&ws_text(&mut ws).await).unwrap();
    let b: StateUpdate = serde_json::from_str(&ws_text(&mut ws).await).unwrap();
    assert_eq!(b.tick, a.tick + 1);
    ws.send(Message::text(r#"{"cmd":"set_input","code":5}"#)).await.unwrap();
    let mut text = ws_text(&mut ws).await;
    while text != r#"{"ok":true}"# {
        text = ws_text(&mut ws).await;
    }
    let after: StateUpdate = serde_json::from_str(&ws_text(&mut ws).await).unwrap();
    assert_eq!((after.hex.as_str(), after.mode, after.input), ("410410", ModeTag::SafeTransition, 5));
    service.shutdown().await;
}

async fn ws_text<S>(ws: &mut S) -> String
where
    S: futures::Stream<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        match timeout(WAIT, ws.next()).await.unwrap().unwrap().unwrap() {
            Message::Text(t) => return t.to_string(),
            _ => continue,
        }
    }
}

#[tokio::test]
async fn client_limit() {
    let service = Service::bind(ServiceConfig {
        max_clients: 1,
        tick_period_ms: 60_000,
        ..config(1)
    })
    .await
    .unwrap()
    .spawn();
    let mut first = Client::connect(service.local_addr()).await;
    first.send(r#"{"cmd":"ping"}"#).await;
    first.recv().await.unwrap();
    let mut second = Client::connect(service.local_addr()).await;
    assert_eq!(second.recv().await.unwrap(), r#"{"ok":false,"error":"too many clients"}"#);
    assert_eq!(second.recv().await, None);
    drop(first);
    tokio::time::sleep(Duration::from_millis(100)).await;
    let mut third = Client::connect(service.local_addr()).await;
    third.send(r#"{"cmd":"ping"}"#).await;
    assert_eq!(third.recv().await.unwrap(), r#"{"ok":true,"pong":true}"#);
    service.shutdown().await;
}

#[tokio::test]
async fn shutdown_closes_clients() {
    let service = start(1).await;
    let mut c = Client::connect(service.local_addr()).await;
    c.request(r#"{"cmd":"subscribe"}"#).await;
    c.update().await;
    service.shutdown().await;
    while c.recv().await.is_some() {}
}

#[tokio::test]
async fn startup_errors() {
    let taken = Service::bind(config(10)).await.unwrap();
    let clash = ServiceConfig {
        listen: taken.local_addr(),
        ..config(10)
    };
    assert!(matches!(Service::bind(clash).await, Err(ServiceError::Bind { .. })));

    let dir = std::env::temp_dir().join(format!("junction-service-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.junction");
    std::fs::write(&path, "junction broken {").unwrap();
    let bad = ServiceConfig {
        junction: Some(path),
        ..config(10)
    };
    let err = Service::bind(bad).await.err().unwrap();
    assert!(matches!(err, ServiceError::Compile(_)));
    assert!(err.to_string().contains("1:"), "{err}");

    assert!(matches!(Service::bind(config(0)).await, Err(ServiceError::ZeroTickPeriod)));
}
