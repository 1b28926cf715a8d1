use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{Envelope, Message};
use crate::error::{Error, Result};

/// Frames larger than this are rejected as corrupt.
pub const MAX_FRAME_BYTES: usize = 1 << 30;

/// What the coordinator receives.
#[derive(Debug)]
pub enum Incoming {
    Message(Envelope),
    Disconnected { client_id: String, reason: String },
}

pub trait ServerTransport: Send {
    fn send(&mut self, client_id: &str, envelope: Envelope) -> Result<()>;

    /// Next incoming event, or `None` after `timeout` without one.
    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Incoming>>;
}

pub trait ClientTransport: Send {
    fn send(&mut self, envelope: Envelope) -> Result<()>;

    fn recv(&mut self) -> Result<Envelope>;
}

/// Shared log of every serialized party-to-coordinator message.
#[derive(Debug, Clone, Default)]
pub struct Transcript(Arc<Mutex<Vec<String>>>);

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&self, envelope: &Envelope) -> Result<()> {
        let text = serde_json::to_string(envelope)?;
        self.0.lock().expect("transcript lock").push(text);
        Ok(())
    }

    pub fn messages(&self) -> Vec<String> {
        self.0.lock().expect("transcript lock").clone()
    }
}

type Mailboxes = Arc<Mutex<HashMap<String, Sender<Envelope>>>>;

/// Coordinator end of the in-process transport.
pub struct InProcessServer {
    inbox: Receiver<Incoming>,
    inbox_tx: Sender<Incoming>,
    mailboxes: Mailboxes,
    transcript: Option<Transcript>,
}

impl Default for InProcessServer {
    fn default() -> Self {
        Self::new()
    }
}

impl InProcessServer {
    pub fn new() -> Self {
        let (inbox_tx, inbox) = mpsc::channel();
        Self { inbox, inbox_tx, mailboxes: Arc::default(), transcript: None }
    }

    /// Record every party-to-coordinator message as JSON.
    pub fn with_transcript(mut self, transcript: Transcript) -> Self {
        self.transcript = Some(transcript);
        self
    }

    pub fn connect(&self, client_id: &str) -> InProcessClient {
        let (tx, rx) = mpsc::channel();
        self.mailboxes.lock().expect("mailbox lock").insert(client_id.to_string(), tx);
        InProcessClient {
            client_id: client_id.to_string(),
            to_server: self.inbox_tx.clone(),
            inbox: rx,
            transcript: self.transcript.clone(),
        }
    }
}

impl ServerTransport for InProcessServer {
    fn send(&mut self, client_id: &str, envelope: Envelope) -> Result<()> {
        let boxes = self.mailboxes.lock().expect("mailbox lock");
        let tx = boxes.get(client_id).ok_or_else(|| Error::Protocol(format!("no connected client `{client_id}`")))?;
        tx.send(envelope).map_err(|_| Error::Disconnected(format!("client `{client_id}` is gone")))
    }

    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Incoming>> {
        match self.inbox.recv_timeout(timeout) {
            Ok(incoming) => Ok(Some(incoming)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Disconnected("all clients are gone".into())),
        }
    }
}

/// Party end of the in-process transport. Dropping it tells the coordinator
/// the party disconnected.
pub struct InProcessClient {
    client_id: String,
    to_server: Sender<Incoming>,
    inbox: Receiver<Envelope>,
    transcript: Option<Transcript>,
}

impl ClientTransport for InProcessClient {
    fn send(&mut self, envelope: Envelope) -> Result<()> {
        if let Some(t) = &self.transcript {
            t.record(&envelope)?;
        }
        self.to_server.send(Incoming::Message(envelope)).map_err(|_| Error::Disconnected("coordinator is gone".into()))
    }

    fn recv(&mut self) -> Result<Envelope> {
        self.inbox.recv().map_err(|_| Error::Disconnected("coordinator is gone".into()))
    }
}

impl Drop for InProcessClient {
    fn drop(&mut self) {
        let _ = self.to_server.send(Incoming::Disconnected {
            client_id: self.client_id.clone(),
            reason: "client closed its connection".into(),
        });
    }
}

/// Write one frame: big-endian u32 length, then the JSON body.
pub fn write_frame<W: Write>(w: &mut W, envelope: &Envelope) -> Result<()> {
    let body = serde_json::to_vec(envelope)?;
    if body.len() > MAX_FRAME_BYTES {
        return Err(Error::Protocol(format!("frame of {} bytes is too large", body.len())));
    }
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Read one frame; `None` on a clean end of stream before a frame starts.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Envelope>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut len[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(Error::Protocol("stream ended inside a frame header".into()));
        }
        got += n;
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(Error::Protocol(format!("frame of {len} bytes is too large")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(serde_json::from_slice(&body)?))
}

/// Coordinator end of the TCP transport.
pub struct TcpServer {
    inbox: Receiver<Incoming>,
    writers: HashMap<String, BufWriter<TcpStream>>,
}

impl TcpServer {
    /// Accept `clients` connections. Each connection must open with a
    /// `Register` message, which names the party; it is delivered through
    /// the inbox like any other message.
    pub fn accept(listener: &TcpListener, clients: usize, timeout: Option<Duration>) -> Result<Self> {
        let (tx, inbox) = mpsc::channel();
        let mut writers = HashMap::new();
        let deadline = timeout.map(|t| Instant::now() + t);
        listener.set_nonblocking(deadline.is_some())?;
        while writers.len() < clients {
            let stream = match listener.accept() {
                Ok((stream, _)) => stream,
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if deadline.is_some_and(|d| Instant::now() > d) {
                        return Err(Error::Disconnected(format!(
                            "only {} of {clients} clients connected in time",
                            writers.len()
                        )));
                    }
                    thread::sleep(Duration::from_millis(10));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            stream.set_nonblocking(false)?;
            stream.set_nodelay(true)?;
            let mut reader = BufReader::new(stream.try_clone()?);
            let first = read_frame(&mut reader)?
                .ok_or_else(|| Error::Protocol("connection closed before registering".into()))?;
            if !matches!(first.body, Message::Register(_)) {
                return Err(Error::Protocol(format!(
                    "connection opened with `{}` instead of register",
                    first.body.kind()
                )));
            }
            let client_id = first.client_id.clone();
            if writers.contains_key(&client_id) {
                return Err(Error::Protocol(format!("duplicate client registration `{client_id}`")));
            }
            writers.insert(client_id.clone(), BufWriter::new(stream));
            tx.send(Incoming::Message(first)).expect("inbox open");
            let tx = tx.clone();
            thread::spawn(move || loop {
                match read_frame(&mut reader) {
                    Ok(Some(env)) => {
                        if tx.send(Incoming::Message(env)).is_err() {
                            return;
                        }
                    }
                    Ok(None) => {
                        let _ = tx.send(Incoming::Disconnected { client_id, reason: "connection closed".into() });
                        return;
                    }
                    Err(e) => {
                        let _ = tx.send(Incoming::Disconnected { client_id, reason: e.to_string() });
                        return;
                    }
                }
            });
        }
        listener.set_nonblocking(false)?;
        Ok(Self { inbox, writers })
    }
}

impl ServerTransport for TcpServer {
    fn send(&mut self, client_id: &str, envelope: Envelope) -> Result<()> {
        let w = self
            .writers
            .get_mut(client_id)
            .ok_or_else(|| Error::Protocol(format!("no connected client `{client_id}`")))?;
        write_frame(w, &envelope)
    }

    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Incoming>> {
        match self.inbox.recv_timeout(timeout) {
            Ok(incoming) => Ok(Some(incoming)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Disconnected("all clients are gone".into())),
        }
    }
}

/// Party end of the TCP transport.
pub struct TcpClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpClient {
    /// Connect, retrying while the coordinator is not yet listening.
    pub fn connect<A: ToSocketAddrs + Clone>(addr: A, patience: Duration) -> Result<Self> {
        let deadline = Instant::now() + patience;
        loop {
            match TcpStream::connect(addr.clone()) {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    return Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) });
                }
                Err(e) if Instant::now() < deadline => {
                    log::debug!("coordinator not reachable yet: {e}");
                    thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl ClientTransport for TcpClient {
    fn send(&mut self, envelope: Envelope) -> Result<()> {
        write_frame(&mut self.writer, &envelope)
    }

    fn recv(&mut self) -> Result<Envelope> {
        read_frame(&mut self.reader)?.ok_or_else(|| Error::Disconnected("coordinator closed the connection".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::protocol::Control;

    fn env(client: &str, body: Message) -> Envelope {
        Envelope { run_id: "r".into(), round: 0, client_id: client.into(), body }
    }

    #[test]
    fn frames_round_trip() {
        let mut buf = Vec::new();
        let e = env("a", Message::Control(Control::Pause));
        write_frame(&mut buf, &e).unwrap();
        write_frame(&mut buf, &e).unwrap();
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap(), Some(e.clone()));
        assert_eq!(read_frame(&mut r).unwrap(), Some(e));
        assert_eq!(read_frame(&mut r).unwrap(), None);
    }

    #[test]
    fn truncated_frame_is_an_error() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &env("a", Message::Control(Control::Finish))).unwrap();
        buf.pop();
        assert!(read_frame(&mut &buf[..]).is_err());
        assert!(read_frame(&mut &buf[..2]).is_err());
    }

    #[test]
    fn in_process_delivery_and_disconnect() {
        let mut server = InProcessServer::new().with_transcript(Transcript::new());
        let mut client = server.connect("a");
        client.send(env("a", Message::Goodbye { reason: "x".into() })).unwrap();
        server.send("a", env("a", Message::Control(Control::Finish))).unwrap();
        assert_eq!(client.recv().unwrap().body, Message::Control(Control::Finish));
        assert!(matches!(server.recv_timeout(Duration::from_secs(1)).unwrap(), Some(Incoming::Message(_))));
        drop(client);
        assert!(matches!(
            server.recv_timeout(Duration::from_secs(1)).unwrap(),
            Some(Incoming::Disconnected { client_id, .. }) if client_id == "a"
        ));
        assert!(server.send("nobody", env("x", Message::Control(Control::Pause))).is_err());
    }
}
