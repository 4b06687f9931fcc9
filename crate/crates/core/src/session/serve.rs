//! Live service: one reader over a WebSocket, any number of sensor senders
//! over TCP or UDP, and a single runtime thread that owns the session.
//!
//! Network threads only decode and forward; they talk to the runtime
//! through an mpsc queue. The runtime answers the reader through two
//! queues: an unbounded one for scenes and events, and a bounded one for
//! biofeedback that drops when the reader falls behind.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tungstenite::protocol::frame::coding::CloseCode;
use tungstenite::protocol::CloseFrame;
use tungstenite::{Message, WebSocket};

use super::headless::{Driver, Stimulus};
use super::protocol::{decode_client_message, encode_server_message, ClientMessage, Scene, ServerMessage};
use crate::physio::{decode_sample, Sample};
use crate::runtime::{EngineEvent, RuntimeError, SessionConfig};
use crate::script::Story;

pub const SINGLE_READER: &str = "single-reader";
const POLL: Duration = Duration::from_millis(10);
const HELLO_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub client_addr: SocketAddr,
    /// TCP and UDP are both bound on this address.
    pub sensor_addr: SocketAddr,
    pub session: SessionConfig,
    pub tick_ms: u64,
    /// Capacity of the per-reader biofeedback queue.
    pub bio_queue: usize,
    /// Append every engine event to this file as it happens.
    pub transcript: Option<PathBuf>,
}

impl ServeConfig {
    pub fn new(client_addr: SocketAddr, sensor_addr: SocketAddr) -> Self {
        Self {
            client_addr,
            sensor_addr,
            session: SessionConfig::default(),
            tick_ms: 50,
            bio_queue: 64,
            transcript: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum StreamKey {
    Tcp(u64),
    Udp(SocketAddr),
}

struct Outbox {
    reliable: Sender<ServerMessage>,
    bio: SyncSender<ServerMessage>,
}

enum Command {
    Connect { id: u64, outbox: Outbox },
    Disconnect { id: u64 },
    Input { id: u64, msg: ClientMessage },
    Sample { stream: StreamKey, sample: Sample },
}

/// Counters shared with network threads.
#[derive(Debug, Default)]
pub struct ServeStats {
    pub sensor_dropped: AtomicU64,
    pub bio_dropped: AtomicU64,
    pub readers_rejected: AtomicU64,
}

pub struct ServerHandle {
    client_addr: SocketAddr,
    sensor_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    stats: Arc<ServeStats>,
    runtime: JoinHandle<Vec<EngineEvent>>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn client_addr(&self) -> SocketAddr {
        self.client_addr
    }

    pub fn sensor_addr(&self) -> SocketAddr {
        self.sensor_addr
    }

    pub fn stats(&self) -> &ServeStats {
        &self.stats
    }

    /// Stops every thread and returns the session transcript.
    pub fn shutdown(self) -> Vec<EngineEvent> {
        self.stop.store(true, Ordering::SeqCst);
        for w in self.workers {
            let _ = w.join();
        }
        self.runtime.join().unwrap_or_default()
    }

    /// Blocks until the runtime thread ends.
    pub fn wait(self) -> Vec<EngineEvent> {
        let transcript = self.runtime.join().unwrap_or_default();
        self.stop.store(true, Ordering::SeqCst);
        for w in self.workers {
            let _ = w.join();
        }
        transcript
    }
}

/// Binds all ports, starts the session and returns once everything is
/// listening. Port 0 picks an ephemeral port; see the handle's addresses.
pub fn serve(story: Story, config: ServeConfig) -> Result<ServerHandle, ServeError> {
    let bind = |addr: SocketAddr| move |source| ServeError::Bind { addr, source };
    let client_listener = TcpListener::bind(config.client_addr).map_err(bind(config.client_addr))?;
    let sensor_listener = TcpListener::bind(config.sensor_addr).map_err(bind(config.sensor_addr))?;
    let sensor_addr = sensor_listener.local_addr()?;
    let udp = UdpSocket::bind(sensor_addr).map_err(bind(sensor_addr))?;
    let client_addr = client_listener.local_addr()?;
    client_listener.set_nonblocking(true)?;
    sensor_listener.set_nonblocking(true)?;
    udp.set_read_timeout(Some(POLL * 5))?;

    let (driver, initial) = Driver::start(story, config.session.clone())?;
    let stop = Arc::new(AtomicBool::new(false));
    let stats = Arc::new(ServeStats::default());
    let (tx, rx) = mpsc::channel();

    let runtime = {
        let stop = Arc::clone(&stop);
        let stats = Arc::clone(&stats);
        let config = config.clone();
        thread::Builder::new()
            .name("vif-runtime".into())
            .spawn(move || run_runtime(driver, initial, rx, stop, stats, config))?
    };
    let workers = vec![
        spawn_named("vif-clients", {
            let (tx, stop, stats) = (tx.clone(), Arc::clone(&stop), Arc::clone(&stats));
            let bio_queue = config.bio_queue;
            move || accept_clients(client_listener, tx, stop, stats, bio_queue)
        })?,
        spawn_named("vif-sensor-tcp", {
            let (tx, stop, stats) = (tx.clone(), Arc::clone(&stop), Arc::clone(&stats));
            move || accept_sensors(sensor_listener, tx, stop, stats)
        })?,
        spawn_named("vif-sensor-udp", {
            let (stop, stats) = (Arc::clone(&stop), Arc::clone(&stats));
            move || read_udp(udp, tx, stop, stats)
        })?,
    ];
    log::info!("serving readers on {client_addr}, sensors on {sensor_addr} (tcp+udp)");
    Ok(ServerHandle {
        client_addr,
        sensor_addr,
        stop,
        stats,
        runtime,
        workers,
    })
}

fn spawn_named(name: &str, f: impl FnOnce() + Send + 'static) -> io::Result<JoinHandle<()>> {
    thread::Builder::new().name(name.into()).spawn(f)
}

struct Runtime {
    driver: Driver,
    started: Instant,
    epoch: u64,
    reader: Option<(u64, Outbox)>,
    offsets: HashMap<StreamKey, i64>,
    stats: Arc<ServeStats>,
    log: Option<io::BufWriter<std::fs::File>>,
}

impl Runtime {
    /// Session time never goes back: wall clock, or the latest stimulus if
    /// a fast sensor stream ran ahead of it.
    fn now(&self) -> u64 {
        let wall = self.epoch + self.started.elapsed().as_millis() as u64;
        wall.max(self.driver.session.now())
    }

    fn record(&mut self, events: &[EngineEvent]) {
        if let Some(log) = &mut self.log {
            for ev in events {
                let _ = writeln!(log, "{}", ev.to_json_line());
            }
            let _ = log.flush();
        }
    }

    fn apply(&mut self, t: u64, stimulus: &Stimulus) {
        match self.driver.apply(t, stimulus) {
            Ok(events) => self.dispatch(events, t),
            Err(e) => log::error!("runtime rejected stimulus at {t}: {e}"),
        }
    }

    fn dispatch(&mut self, events: Vec<EngineEvent>, t: u64) {
        if events.is_empty() {
            return;
        }
        self.record(&events);
        let transitioned = events.iter().any(|e| matches!(e, EngineEvent::TransitionFired { .. }));
        for ev in events {
            self.send(ServerMessage::from_event(ev));
        }
        if transitioned {
            self.send_scene(t);
        }
    }

    fn send_scene(&mut self, t: u64) {
        let scene = Scene::of(&self.driver.session, t);
        self.send(ServerMessage::Scene { scene });
    }

    fn send(&mut self, msg: ServerMessage) {
        let Some((_, outbox)) = &self.reader else {
            return;
        };
        let gone = if msg.is_droppable() {
            match outbox.bio.try_send(msg) {
                Ok(()) => false,
                Err(TrySendError::Full(_)) => {
                    self.stats.bio_dropped.fetch_add(1, Ordering::Relaxed);
                    false
                }
                Err(TrySendError::Disconnected(_)) => true,
            }
        } else {
            outbox.reliable.send(msg).is_err()
        };
        if gone {
            self.reader = None;
        }
    }

    fn handle(&mut self, cmd: Command) {
        let now = self.now();
        match cmd {
            Command::Connect { id, outbox } => {
                self.reader = Some((id, outbox));
                self.send_scene(now);
            }
            Command::Disconnect { id } => {
                if self.reader.as_ref().is_some_and(|(cur, _)| *cur == id) {
                    self.reader = None;
                }
            }
            Command::Input { id, msg } => {
                if !self.reader.as_ref().is_some_and(|(cur, _)| *cur == id) {
                    return;
                }
                if let Some(input) = msg.to_input() {
                    self.apply(now, &Stimulus::Player(input));
                }
            }
            Command::Sample { stream, mut sample } => {
                // stream-local time is anchored to session time on first contact
                let offset = *self.offsets.entry(stream).or_insert(now as i64 - sample.t as i64);
                let mapped = (sample.t as i64 + offset).max(now as i64) as u64;
                sample.t = mapped;
                self.apply(mapped, &Stimulus::Sample(sample));
            }
        }
    }
}

fn run_runtime(
    driver: Driver,
    initial: Vec<EngineEvent>,
    rx: Receiver<Command>,
    stop: Arc<AtomicBool>,
    stats: Arc<ServeStats>,
    config: ServeConfig,
) -> Vec<EngineEvent> {
    let log = config.transcript.as_ref().and_then(|p| match std::fs::File::create(p) {
        Ok(f) => Some(io::BufWriter::new(f)),
        Err(e) => {
            log::error!("cannot write transcript {}: {e}", p.display());
            None
        }
    });
    let mut rt = Runtime {
        driver,
        started: Instant::now(),
        epoch: config.session.epoch,
        reader: None,
        offsets: HashMap::new(),
        stats,
        log,
    };
    rt.record(&initial);
    let tick = Duration::from_millis(config.tick_ms.max(1));
    let mut next_tick = Instant::now() + tick;
    while !stop.load(Ordering::SeqCst) {
        let wait = next_tick.saturating_duration_since(Instant::now()).min(POLL);
        match rx.recv_timeout(wait) {
            Ok(cmd) => rt.handle(cmd),
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        if Instant::now() >= next_tick {
            let now = rt.now();
            rt.apply(now, &Stimulus::Tick);
            next_tick += tick;
            if next_tick < Instant::now() {
                next_tick = Instant::now() + tick;
            }
        }
    }
    rt.driver.transcript
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

fn accept_clients(
    listener: TcpListener,
    tx: Sender<Command>,
    stop: Arc<AtomicBool>,
    stats: Arc<ServeStats>,
    bio_queue: usize,
) {
    let active = Arc::new(AtomicBool::new(false));
    let mut next_id = 0u64;
    let mut handlers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        let stream = match listener.accept() {
            Ok((stream, _)) => stream,
            Err(e) if is_timeout(&e) => {
                thread::sleep(POLL);
                continue;
            }
            Err(e) => {
                log::warn!("reader accept failed: {e}");
                continue;
            }
        };
        let _ = stream.set_nonblocking(false);
        if active.swap(true, Ordering::SeqCst) {
            stats.readers_rejected.fetch_add(1, Ordering::Relaxed);
            thread::spawn(|| reject(stream, SINGLE_READER));
            continue;
        }
        next_id += 1;
        let (id, tx, stop, active) = (next_id, tx.clone(), Arc::clone(&stop), Arc::clone(&active));
        handlers.push(thread::spawn(move || {
            if let Err(e) = run_reader(id, stream, &tx, &stop, bio_queue) {
                log::info!("reader {id} ended: {e}");
            }
            let _ = tx.send(Command::Disconnect { id });
            active.store(false, Ordering::SeqCst);
        }));
    }
    for h in handlers {
        let _ = h.join();
    }
}

fn close_with(ws: &mut WebSocket<TcpStream>, reason: &str) {
    let frame = CloseFrame {
        code: CloseCode::Policy,
        reason: reason.to_string().into(),
    };
    if ws.close(Some(frame)).is_ok() {
        // let the peer acknowledge so the reason is delivered before the socket drops
        let deadline = Instant::now() + Duration::from_millis(500);
        let _ = ws.get_ref().set_read_timeout(Some(POLL * 5));
        while Instant::now() < deadline {
            match ws.read() {
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {
                    let _ = ws.flush();
                }
                Err(_) => break,
            }
        }
    }
}

fn reject(stream: TcpStream, reason: &str) {
    let _ = stream.set_read_timeout(Some(HELLO_TIMEOUT));
    if let Ok(mut ws) = tungstenite::accept(stream) {
        close_with(&mut ws, reason);
    }
}

#[derive(Debug, thiserror::Error)]
enum ReaderEnd {
    #[error("websocket: {0}")]
    Ws(Box<tungstenite::Error>),
    #[error("handshake: {0}")]
    Handshake(String),
    #[error("protocol violation: {0}")]
    Violation(String),
    #[error("closed")]
    Closed,
}

impl From<tungstenite::Error> for ReaderEnd {
    fn from(e: tungstenite::Error) -> Self {
        ReaderEnd::Ws(Box::new(e))
    }
}

fn run_reader(id: u64, stream: TcpStream, tx: &Sender<Command>, stop: &AtomicBool, bio_queue: usize) -> Result<(), ReaderEnd> {
    stream.set_read_timeout(Some(HELLO_TIMEOUT)).map_err(tungstenite::Error::Io)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| ReaderEnd::Handshake(e.to_string()))?;

    // hello first
    loop {
        match ws.read()? {
            Message::Text(text) => match decode_client_message(&text) {
                Ok(ClientMessage::Hello { .. }) => break,
                Ok(_) => {
                    close_with(&mut ws, "hello expected");
                    return Err(ReaderEnd::Violation("message before hello".into()));
                }
                Err(e) => {
                    close_with(&mut ws, &e.to_string());
                    return Err(ReaderEnd::Violation(e.to_string()));
                }
            },
            Message::Close(_) => return Err(ReaderEnd::Closed),
            Message::Binary(_) => {
                close_with(&mut ws, "text frames only");
                return Err(ReaderEnd::Violation("binary frame".into()));
            }
            _ => {}
        }
    }

    let (reliable_tx, reliable_rx) = mpsc::channel();
    let (bio_tx, bio_rx) = mpsc::sync_channel(bio_queue.max(1));
    let outbox = Outbox {
        reliable: reliable_tx,
        bio: bio_tx,
    };
    if tx.send(Command::Connect { id, outbox }).is_err() {
        return Err(ReaderEnd::Closed);
    }
    ws.get_ref().set_read_timeout(Some(POLL)).map_err(tungstenite::Error::Io)?;

    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => match decode_client_message(&text) {
                Ok(msg) => {
                    if tx.send(Command::Input { id, msg }).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    close_with(&mut ws, &e.to_string());
                    return Err(ReaderEnd::Violation(e.to_string()));
                }
            },
            Ok(Message::Binary(_)) => {
                close_with(&mut ws, "text frames only");
                return Err(ReaderEnd::Violation("binary frame".into()));
            }
            Ok(Message::Close(_)) => return Err(ReaderEnd::Closed),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
            Err(e) => return Err(e.into()),
        }
        let mut wrote = false;
        for msg in reliable_rx.try_iter().chain(bio_rx.try_iter()) {
            ws.write(Message::Text(encode_server_message(&msg)))?;
            wrote = true;
        }
        if wrote {
            ws.flush()?;
        }
    }
    close_with(&mut ws, "server shutting down");
    Ok(())
}

fn forward_line(line: &[u8], stream: StreamKey, tx: &Sender<Command>, stats: &ServeStats) -> bool {
    let text = String::from_utf8_lossy(line);
    let text = text.trim();
    if text.is_empty() {
        return true;
    }
    match decode_sample(text) {
        Ok(sample) => tx.send(Command::Sample { stream, sample }).is_ok(),
        Err(e) => {
            stats.sensor_dropped.fetch_add(1, Ordering::Relaxed);
            log::debug!("dropping sensor line: {e}");
            true
        }
    }
}

fn accept_sensors(listener: TcpListener, tx: Sender<Command>, stop: Arc<AtomicBool>, stats: Arc<ServeStats>) {
    let mut next_id = 0u64;
    let mut readers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        let stream = match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("sensor stream from {peer}");
                stream
            }
            Err(e) if is_timeout(&e) => {
                thread::sleep(POLL);
                continue;
            }
            Err(e) => {
                log::warn!("sensor accept failed: {e}");
                continue;
            }
        };
        next_id += 1;
        let key = StreamKey::Tcp(next_id);
        let (tx, stop, stats) = (tx.clone(), Arc::clone(&stop), Arc::clone(&stats));
        readers.push(thread::spawn(move || {
            let _ = stream.set_nonblocking(false);
            let _ = stream.set_read_timeout(Some(POLL * 5));
            let mut reader = BufReader::new(stream);
            // bytes survive read timeouts, so a line split across reads stays whole
            let mut line = Vec::new();
            while !stop.load(Ordering::SeqCst) {
                match reader.read_until(b'\n', &mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if line.last() == Some(&b'\n') {
                            if !forward_line(&line, key, &tx, &stats) {
                                break;
                            }
                            line.clear();
                        }
                    }
                    Err(e) if is_timeout(&e) => {}
                    Err(_) => break,
                }
            }
            if !line.is_empty() {
                forward_line(&line, key, &tx, &stats);
            }
        }));
    }
    for r in readers {
        let _ = r.join();
    }
}

fn read_udp(socket: UdpSocket, tx: Sender<Command>, stop: Arc<AtomicBool>, stats: Arc<ServeStats>) {
    let mut buf = vec![0u8; 65_536];
    while !stop.load(Ordering::SeqCst) {
        match socket.recv_from(&mut buf) {
            Ok((n, peer)) => {
                for line in buf[..n].split(|b| *b == b'\n') {
                    if !forward_line(line, StreamKey::Udp(peer), &tx, &stats) {
                        return;
                    }
                }
            }
            Err(e) if is_timeout(&e) => {}
            Err(e) => log::warn!("sensor datagram error: {e}"),
        }
    }
}

/// Sends samples to a sensor port over TCP. With `paced`, each sample goes
/// out when its stream time comes due on the wall clock.
pub fn stream_samples(samples: &[Sample], target: &str, paced: bool) -> io::Result<usize> {
    let mut stream = io::BufWriter::new(TcpStream::connect(target)?);
    let started = Instant::now();
    let first = samples.first().map_or(0, |s| s.t);
    for sample in samples {
        if paced {
            let due = started + Duration::from_millis(sample.t - first);
            let now = Instant::now();
            if due > now {
                stream.flush()?;
                thread::sleep(due - now);
            }
        }
        writeln!(stream, "{}", crate::physio::encode_sample(sample))?;
    }
    stream.flush()?;
    Ok(samples.len())
}
