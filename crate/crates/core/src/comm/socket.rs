use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::debug;

use super::frame::{kind_from_u8, read_frame, write_frame, KIND_ACK, KIND_BYE, KIND_HELLO};
use super::inbox::{Credits, Inbox, Received};
use super::{Batch, BatchKind, SendCounters, Transport, TransportStats};
use crate::error::{Error, Result};

/// TCP transport. Worker `i` opens one connection to every worker `j`
/// (itself included) and sends its frames for channel `i -> j` on it; the
/// receiver acknowledges each consumed DATA batch on the same connection.
pub struct SocketTransport {
    worker: usize,
    n: usize,
    outgoing: Vec<Mutex<TcpStream>>,
    acks: Vec<Mutex<TcpStream>>,
    raw: Vec<TcpStream>,
    credits: Vec<Arc<Credits>>,
    inbox: Arc<Inbox>,
    closing: Arc<AtomicBool>,
    counters: SendCounters,
}

fn transport_err(ctx: &str) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Transport(format!("{ctx}: {e}"))
}

fn accept_all(listener: TcpListener, n: usize, deadline: Instant) -> Result<Vec<TcpStream>> {
    listener.set_nonblocking(true).map_err(transport_err("listener"))?;
    let mut slots: Vec<Option<TcpStream>> = (0..n).map(|_| None).collect();
    let mut got = 0;
    while got < n {
        match listener.accept() {
            Ok((mut s, _)) => {
                s.set_nonblocking(false).map_err(transport_err("accept"))?;
                s.set_nodelay(true).map_err(transport_err("accept"))?;
                let hello = read_frame(&mut s)
                    .map_err(transport_err("hello"))?
                    .ok_or_else(|| Error::Transport("peer closed before hello".into()))?;
                let from = hello.superstep as usize;
                if hello.kind != KIND_HELLO || from >= n || slots[from].is_some() {
                    return Err(Error::Protocol(format!("bad hello from peer claiming index {from}")));
                }
                slots[from] = Some(s);
                got += 1;
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if Instant::now() > deadline {
                    return Err(Error::Transport(format!("only {got} of {n} peers connected")));
                }
                thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(transport_err("accept")(e)),
        }
    }
    Ok(slots.into_iter().map(Option::unwrap).collect())
}

fn connect_retry(addr: SocketAddr, deadline: Instant) -> Result<TcpStream> {
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() < deadline => {
                debug!("connect {addr}: {e}, retrying");
                thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(Error::Transport(format!("connect {addr}: {e}"))),
        }
    }
}

impl SocketTransport {
    /// Connects worker `worker` to every address in `addrs` and accepts one
    /// connection from each on `listener`.
    pub fn establish(
        worker: usize,
        listener: TcpListener,
        addrs: &[SocketAddr],
        in_flight: usize,
        timeout: Duration,
    ) -> Result<Arc<Self>> {
        let n = addrs.len();
        let deadline = Instant::now() + timeout;
        let acceptor = thread::spawn(move || accept_all(listener, n, deadline));
        let mut outgoing = Vec::with_capacity(n);
        for &addr in addrs {
            let mut s = connect_retry(addr, deadline)?;
            s.set_nodelay(true).map_err(transport_err("connect"))?;
            write_frame(&mut s, KIND_HELLO, worker as u64, &[]).map_err(transport_err("hello"))?;
            outgoing.push(s);
        }
        let incoming = acceptor.join().map_err(|_| Error::Transport("acceptor panicked".into()))??;

        let inbox = Arc::new(Inbox::new(n));
        let closing = Arc::new(AtomicBool::new(false));
        let credits: Vec<_> = (0..n).map(|_| Arc::new(Credits::new(in_flight))).collect();
        let mut raw = Vec::new();
        let mut acks = Vec::new();
        for (from, s) in incoming.into_iter().enumerate() {
            let reader = s.try_clone().map_err(transport_err("clone"))?;
            raw.push(s.try_clone().map_err(transport_err("clone"))?);
            acks.push(Mutex::new(s));
            let (inbox, closing) = (inbox.clone(), closing.clone());
            thread::spawn(move || read_incoming(reader, from, &inbox, &closing));
        }
        let mut out = Vec::new();
        for (to, s) in outgoing.into_iter().enumerate() {
            let reader = s.try_clone().map_err(transport_err("clone"))?;
            raw.push(s.try_clone().map_err(transport_err("clone"))?);
            out.push(Mutex::new(s));
            let (c, closing) = (credits[to].clone(), closing.clone());
            thread::spawn(move || read_acks(reader, to, &c, &closing));
        }
        Ok(Arc::new(SocketTransport {
            worker,
            n,
            outgoing: out,
            acks,
            raw,
            credits,
            inbox,
            closing,
            counters: SendCounters::default(),
        }))
    }

    /// Establishes a full mesh among `n` workers inside one process, one
    /// transport per worker.
    pub fn local_mesh(n: usize, in_flight: usize) -> Result<Vec<Arc<Self>>> {
        let listeners: Vec<_> = (0..n)
            .map(|_| TcpListener::bind("127.0.0.1:0"))
            .collect::<io::Result<_>>()
            .map_err(transport_err("bind"))?;
        let addrs: Vec<_> =
            listeners.iter().map(|l| l.local_addr()).collect::<io::Result<_>>().map_err(transport_err("addr"))?;
        let handles: Vec<_> = listeners
            .into_iter()
            .enumerate()
            .map(|(w, l)| {
                let addrs = addrs.clone();
                thread::spawn(move || SocketTransport::establish(w, l, &addrs, in_flight, Duration::from_secs(30)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().map_err(|_| Error::Transport("connect thread panicked".into()))?).collect()
    }
}

fn read_incoming(mut s: TcpStream, from: usize, inbox: &Inbox, closing: &AtomicBool) {
    loop {
        match read_frame(&mut s) {
            Ok(Some(f)) if f.kind == KIND_BYE => {
                inbox.close(from);
                return;
            }
            Ok(Some(f)) => match kind_from_u8(f.kind) {
                Ok(kind) => {
                    inbox.push(from, Instant::now(), Batch { kind, superstep: f.superstep, payload: f.payload })
                }
                Err(e) => {
                    inbox.abort(&e.to_string());
                    return;
                }
            },
            Ok(None) | Err(_) => {
                if !closing.load(Ordering::SeqCst) {
                    inbox.abort(&format!("connection from worker {from} lost"));
                }
                return;
            }
        }
    }
}

fn read_acks(mut s: TcpStream, to: usize, credits: &Credits, closing: &AtomicBool) {
    loop {
        match read_frame(&mut s) {
            Ok(Some(f)) if f.kind == KIND_ACK => credits.release(),
            Ok(Some(_)) => {
                credits.abort(&format!("unexpected frame on channel to {to}"));
                return;
            }
            Ok(None) | Err(_) => {
                if !closing.load(Ordering::SeqCst) {
                    credits.abort(&format!("connection to worker {to} lost"));
                }
                return;
            }
        }
    }
}

impl Transport for SocketTransport {
    fn worker(&self) -> usize {
        self.worker
    }

    fn num_workers(&self) -> usize {
        self.n
    }

    fn send(&self, to: usize, batch: Batch) -> Result<()> {
        if to >= self.n {
            return Err(Error::Transport(format!("no worker {to}")));
        }
        if batch.kind == BatchKind::Data {
            self.credits[to].acquire()?;
        }
        self.counters.record(&batch);
        let mut s = self.outgoing[to].lock().unwrap();
        write_frame(&mut *s, batch.kind as u8, batch.superstep, &batch.payload)
            .map_err(|e| Error::Transport(format!("send to {to}: {e}")))
    }

    fn recv_timeout(&self, timeout: Option<Duration>) -> Result<Received> {
        let r = self.inbox.pop(timeout)?;
        if let Received::Batch(from, b) = &r {
            if b.kind == BatchKind::Data {
                let mut s = self.acks[*from].lock().unwrap();
                write_frame(&mut *s, KIND_ACK, 0, &[]).map_err(|e| Error::Transport(format!("ack to {from}: {e}")))?;
            }
        }
        Ok(r)
    }

    fn abort(&self, reason: &str) {
        self.closing.store(true, Ordering::SeqCst);
        self.inbox.abort(reason);
        for c in &self.credits {
            c.abort(reason);
        }
        for s in &self.raw {
            let _ = s.shutdown(Shutdown::Both);
        }
    }

    fn close(&self) {
        self.closing.store(true, Ordering::SeqCst);
        for s in &self.outgoing {
            let mut s = s.lock().unwrap();
            let _ = write_frame(&mut *s, KIND_BYE, 0, &[]);
            let _ = s.shutdown(Shutdown::Write);
        }
    }

    fn stats(&self) -> TransportStats {
        self.counters.snapshot()
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        for s in &self.raw {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}
