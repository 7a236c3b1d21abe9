//! Live junction controller behind a socket.
//!
//! One task steps the controller every `tick_period_ms`. Clients talk line
//! JSON over TCP, or the same objects over the `/ws` WebSocket endpoint (see
//! [`protocol`]). Input commands are queued and sampled once per tick; the
//! last one queued before a tick wins.

pub mod protocol;

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use junction_core::dsl::{self, Diagnostic};
use junction_core::{Controller, ControllerState, InputCode, PhaseTable};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, watch};
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

pub use protocol::{parse_request, ProtocolError, Request, StateUpdate};

/// Pending commands beyond this are refused.
pub const COMMAND_QUEUE_CAPACITY: usize = 64;
/// Updates a subscriber may fall behind before it is dropped.
pub const UPDATE_BUFFER: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Address for the WebSocket endpoint; `None` disables it.
    pub ws_listen: Option<SocketAddr>,
    pub tick_period_ms: u64,
    /// `None` serves the built-in reference junction.
    pub junction: Option<PathBuf>,
    pub max_clients: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 7400)),
            ws_listen: None,
            tick_period_ms: 1000,
            junction: None,
            max_clients: 64,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("tick period must be at least 1 ms")]
    ZeroTickPeriod,
    #[error("max_clients must be at least 1")]
    NoClients,
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("junction does not compile:\n{}", render(.0))]
    Compile(Vec<Diagnostic>),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.tick_period_ms == 0 {
            return Err(ServiceError::ZeroTickPeriod);
        }
        if self.max_clients == 0 {
            return Err(ServiceError::NoClients);
        }
        Ok(())
    }

    pub fn load_table(&self) -> Result<PhaseTable, ServiceError> {
        let source = match &self.junction {
            None => dsl::builtin_paper_junction().to_string(),
            Some(path) => std::fs::read_to_string(path).map_err(|source| ServiceError::Read {
                path: path.clone(),
                source,
            })?,
        };
        dsl::compile(&source).map(|c| c.table).map_err(ServiceError::Compile)
    }
}

struct Inner {
    queue: VecDeque<InputCode>,
    input: InputCode,
    latest: StateUpdate,
}

/// State shared between the tick loop and the client sessions.
///
/// The tick loop takes the queue, steps and broadcasts under one lock, so
/// any command acknowledged to a client is reflected in every update the
/// client receives after the acknowledgement.
struct Shared {
    inner: Mutex<Inner>,
    updates: broadcast::Sender<StateUpdate>,
    clients: AtomicUsize,
    max_clients: usize,
}

impl Shared {
    fn enqueue(&self, code: InputCode) -> Result<(), ProtocolError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.queue.len() >= COMMAND_QUEUE_CAPACITY {
            return Err(ProtocolError::QueueFull);
        }
        inner.queue.push_back(code);
        Ok(())
    }

    fn latest(&self) -> StateUpdate {
        self.inner.lock().unwrap().latest.clone()
    }

    fn try_join(self: &Arc<Self>) -> Option<ClientSlot> {
        let prev = self.clients.fetch_add(1, Ordering::SeqCst);
        if prev >= self.max_clients {
            self.clients.fetch_sub(1, Ordering::SeqCst);
            return None;
        }
        Some(ClientSlot(self.clone()))
    }
}

struct ClientSlot(Arc<Shared>);

impl Drop for ClientSlot {
    fn drop(&mut self) {
        self.0.clients.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Owns the controller state. Only this type ever calls `step`.
struct Stepper {
    table: Arc<PhaseTable>,
    state: ControllerState,
    tick: u64,
}

impl Stepper {
    fn new(table: Arc<PhaseTable>) -> Self {
        let state = Controller::new(&table).init();
        Stepper { table, state, tick: 0 }
    }

    fn step(&mut self, input: InputCode) -> StateUpdate {
        let (next, out) = Controller::new(&self.table).step(&self.state, input);
        self.state = next;
        let update = StateUpdate::from_step(self.tick, input, &out);
        self.tick += 1;
        update
    }

    fn tick(&mut self, shared: &Shared) {
        let mut inner = shared.inner.lock().unwrap();
        let last = inner.queue.drain(..).next_back();
        if let Some(last) = last {
            inner.input = last;
        }
        let update = self.step(inner.input);
        inner.latest = update.clone();
        // No receivers is fine.
        let _ = shared.updates.send(update);
    }
}

/// Per-connection protocol state, independent of the transport.
struct Session {
    shared: Arc<Shared>,
    updates: Option<broadcast::Receiver<StateUpdate>>,
}

impl Session {
    fn new(shared: Arc<Shared>) -> Self {
        Session { shared, updates: None }
    }

    /// Answers one request line. Updates already published when a
    /// `set_input` is accepted are returned ahead of the acknowledgement.
    fn handle_line(&mut self, line: &str) -> Vec<String> {
        match parse_request(line) {
            Err(e) => vec![e.to_line()],
            Ok(Request::Ping) => vec![protocol::pong_line()],
            Ok(Request::Get) => vec![protocol::update_line(&self.shared.latest())],
            Ok(Request::Subscribe) => {
                if self.updates.is_none() {
                    self.updates = Some(self.shared.updates.subscribe());
                }
                vec![protocol::ok_line()]
            }
            Ok(Request::SetInput(code)) => {
                if let Err(e) = self.shared.enqueue(code) {
                    return vec![e.to_line()];
                }
                let mut out = Vec::new();
                if let Some(rx) = &mut self.updates {
                    while let Ok(u) = rx.try_recv() {
                        out.push(protocol::update_line(&u));
                    }
                }
                out.push(protocol::ok_line());
                out
            }
        }
    }

    /// Next pushed update, or `None` when not subscribed. Errors when the
    /// client fell too far behind or the service stopped.
    async fn next_update(&mut self) -> Option<Result<StateUpdate, ProtocolError>> {
        let rx = self.updates.as_mut()?;
        Some(match rx.recv().await {
            Ok(u) => Ok(u),
            Err(broadcast::error::RecvError::Lagged(_)) => Err(ProtocolError::Lagged),
            Err(broadcast::error::RecvError::Closed) => Err(ProtocolError::Stopped),
        })
    }
}

async fn next_or_pending(session: &mut Session) -> Result<StateUpdate, ProtocolError> {
    match session.next_update().await {
        Some(r) => r,
        None => std::future::pending().await,
    }
}

/// A bound but not yet running service.
pub struct Service {
    shared: Arc<Shared>,
    stepper: Stepper,
    tcp: TcpListener,
    ws: Option<TcpListener>,
    period: Duration,
}

impl Service {
    /// Compiles the junction, binds the sockets and computes tick 0 with
    /// input 0, so `get` always has an answer.
    pub async fn bind(config: ServiceConfig) -> Result<Service, ServiceError> {
        config.validate()?;
        let table = Arc::new(config.load_table()?);
        let tcp = bind(config.listen).await?;
        let ws = match config.ws_listen {
            Some(addr) => Some(bind(addr).await?),
            None => None,
        };
        let mut stepper = Stepper::new(table);
        let first = stepper.step(InputCode::TRADITIONAL);
        let (updates, _) = broadcast::channel(UPDATE_BUFFER);
        let shared = Arc::new(Shared {
            inner: Mutex::new(Inner {
                queue: VecDeque::new(),
                input: InputCode::TRADITIONAL,
                latest: first,
            }),
            updates,
            clients: AtomicUsize::new(0),
            max_clients: config.max_clients,
        });
        Ok(Service {
            shared,
            stepper,
            tcp,
            ws,
            period: Duration::from_millis(config.tick_period_ms),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.tcp.local_addr().expect("bound socket has an address")
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws.as_ref().map(|l| l.local_addr().expect("bound socket has an address"))
    }

    /// The update for the most recent tick.
    pub fn latest(&self) -> StateUpdate {
        self.shared.latest()
    }

    /// Receives every update published after this call.
    pub fn updates(&self) -> broadcast::Receiver<StateUpdate> {
        self.shared.updates.subscribe()
    }

    pub fn spawn(self) -> ServiceHandle {
        let (stop_tx, stop_rx) = watch::channel(false);
        let local_addr = self.local_addr();
        let ws_addr = self.ws_addr();
        let mut tasks = Vec::new();
        tasks.push(tokio::spawn(tick_loop(
            self.stepper,
            self.shared.clone(),
            self.period,
            stop_rx.clone(),
        )));
        tasks.push(tokio::spawn(accept_tcp(self.tcp, self.shared.clone(), stop_rx.clone())));
        if let Some(ws) = self.ws {
            tasks.push(tokio::spawn(serve_ws(ws, self.shared.clone(), stop_rx.clone())));
        }
        info!(%local_addr, ?ws_addr, "service running");
        ServiceHandle {
            stop: stop_tx,
            tasks,
            local_addr,
            ws_addr,
            shared: self.shared,
        }
    }
}

async fn bind(addr: SocketAddr) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })
}

pub struct ServiceHandle {
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
    local_addr: SocketAddr,
    ws_addr: Option<SocketAddr>,
    shared: Arc<Shared>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    pub fn latest(&self) -> StateUpdate {
        self.shared.latest()
    }

    pub fn updates(&self) -> broadcast::Receiver<StateUpdate> {
        self.shared.updates.subscribe()
    }

    /// Stops ticking and accepting, closes client connections, and waits
    /// for the service tasks to finish.
    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        for task in self.tasks {
            let _ = task.await;
        }
    }
}

async fn tick_loop(mut stepper: Stepper, shared: Arc<Shared>, period: Duration, mut stop: watch::Receiver<bool>) {
    let mut interval = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
    loop {
        tokio::select! {
            _ = interval.tick() => stepper.tick(&shared),
            _ = stop.changed() => break,
        }
    }
    debug!(tick = stepper.tick, "tick loop stopped");
}

async fn accept_tcp(listener: TcpListener, shared: Arc<Shared>, mut stop: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    debug!(%peer, "tcp client connected");
                    tokio::spawn(tcp_client(stream, shared.clone(), stop.clone()));
                }
                Err(e) => warn!(error = %e, "accept failed"),
            },
            _ = stop.changed() => break,
        }
    }
}

async fn tcp_client(stream: TcpStream, shared: Arc<Shared>, mut stop: watch::Receiver<bool>) {
    let (read, mut write) = stream.into_split();
    let Some(_slot) = shared.try_join() else {
        let _ = write_line(&mut write, &ProtocolError::TooManyClients.to_line()).await;
        return;
    };
    let mut lines = BufReader::new(read).lines();
    let mut session = Session::new(shared);
    loop {
        tokio::select! {
            line = lines.next_line() => {
                let Ok(Some(line)) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                for reply in session.handle_line(&line) {
                    if write_line(&mut write, &reply).await.is_err() {
                        return;
                    }
                }
            }
            update = next_or_pending(&mut session) => {
                let text = match update {
                    Ok(u) => protocol::update_line(&u),
                    Err(e) => {
                        let _ = write_line(&mut write, &e.to_line()).await;
                        break;
                    }
                };
                if write_line(&mut write, &text).await.is_err() {
                    break;
                }
            }
            _ = stop.changed() => break,
        }
    }
    let _ = write.shutdown().await;
}

async fn write_line(write: &mut tokio::net::tcp::OwnedWriteHalf, line: &str) -> std::io::Result<()> {
    write.write_all(line.as_bytes()).await?;
    write.write_all(b"\n").await
}

#[derive(Clone)]
struct WsState {
    shared: Arc<Shared>,
    stop: watch::Receiver<bool>,
}

pub const WS_PATH: &str = "/ws";

async fn serve_ws(listener: TcpListener, shared: Arc<Shared>, stop: watch::Receiver<bool>) {
    let state = WsState {
        shared,
        stop: stop.clone(),
    };
    let app = Router::new().route(WS_PATH, get(ws_upgrade)).with_state(state);
    let mut stop = stop;
    let served = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            let _ = stop.changed().await;
        })
        .await;
    if let Err(e) = served {
        warn!(error = %e, "websocket server failed");
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<WsState>) -> axum::response::Response {
    ws.on_upgrade(move |socket| ws_client(socket, state))
}

async fn ws_client(socket: WebSocket, state: WsState) {
    let WsState { shared, mut stop } = state;
    let (mut tx, mut rx) = socket.split();
    let Some(_slot) = shared.try_join() else {
        let _ = tx.send(Message::Text(ProtocolError::TooManyClients.to_line().into())).await;
        let _ = tx.close().await;
        return;
    };
    let mut session = Session::new(shared);
    loop {
        tokio::select! {
            msg = rx.next() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Binary(b))) => String::from_utf8_lossy(&b).into_owned(),
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                    _ => break,
                };
                for reply in session.handle_line(&text) {
                    if tx.send(Message::Text(reply.into())).await.is_err() {
                        return;
                    }
                }
            }
            update = next_or_pending(&mut session) => {
                let text = match update {
                    Ok(u) => protocol::update_line(&u),
                    Err(e) => {
                        let _ = tx.send(Message::Text(e.to_line().into())).await;
                        break;
                    }
                };
                if tx.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            _ = stop.changed() => break,
        }
    }
    let _ = tx.close().await;
}

/// Binds, runs until Ctrl-C, then shuts down cleanly.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let service = Service::bind(config).await?;
    let handle = service.spawn();
    let _ = tokio::signal::ctrl_c().await;
    info!("shutting down");
    handle.shutdown().await;
    Ok(())
}
