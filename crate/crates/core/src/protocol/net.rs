//! Two-process transport: one TCP connection, one forward frame, one backward frame.
//!
//! The ego and the budget are agreed out of band; only the two messages travel.
//! Nothing is encrypted or authenticated.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;

use super::wire::{read_frame, write_frame};
use super::{
    decode_msg, encode_msg, party_rngs, respond_y, BudgetLedger, EbcEstimate, Message,
    ProtocolConfig, ProtocolError, TranscriptFrame, XSession,
};
use crate::graph::{y_ego_neighbours, NodeId, Party, XView, YView};

/// X's half of a session over `stream`. Draws the same two seeds from `rng` as
/// [`super::Protocol::run`] and keeps the first.
pub fn run_party_x<S: Read + Write, R: Rng + ?Sized>(
    stream: &mut S,
    view: &XView,
    a: NodeId,
    config: ProtocolConfig,
    rng: &mut R,
) -> Result<EbcEstimate, ProtocolError> {
    let (mut x_rng, _) = party_rngs(rng);
    let mut x = XSession::open(view, a, config)?;
    let mut transcript = Vec::new();
    let reply = if x.needs_exchange() {
        let fwd = x.release(None, &mut x_rng)?;
        let frame = encode_msg(&Message::Forward(fwd));
        write_frame(stream, &frame)?;
        transcript.push(TranscriptFrame {
            from: Party::X,
            bytes: frame,
        });
        let frame = read_frame(stream)?;
        let msg = match decode_msg(&frame)? {
            Message::Backward(m) => m,
            other => return Err(ProtocolError::Unexpected(other.kind())),
        };
        transcript.push(TranscriptFrame {
            from: Party::Y,
            bytes: frame,
        });
        Some(msg)
    } else {
        None
    };
    let mut est = x.finish(reply.as_ref())?;
    est.ledger.check()?;
    est.transcript = transcript;
    Ok(est)
}

/// Y's half of a session over `stream`; returns Y's budget ledger. When the ego has
/// at most one Y-side neighbour nothing is read or written.
pub fn run_party_y<S: Read + Write, R: Rng + ?Sized>(
    stream: &mut S,
    view: &YView,
    a: NodeId,
    config: ProtocolConfig,
    rng: &mut R,
) -> Result<BudgetLedger, ProtocolError> {
    let (_, mut y_rng) = party_rngs(rng);
    if !y_needs_exchange(view, a)? {
        return Ok(BudgetLedger::new(config.epsilon));
    }
    let frame = read_frame(stream)?;
    let fwd = match decode_msg(&frame)? {
        Message::Forward(f) => f,
        other => return Err(ProtocolError::Unexpected(other.kind())),
    };
    let (msg, ledger) = respond_y(view, a, &fwd, &config, &mut y_rng)?;
    write_frame(stream, &encode_msg(&Message::Backward(msg)))?;
    ledger.check()?;
    Ok(ledger)
}

fn y_needs_exchange(view: &YView, a: NodeId) -> Result<bool, ProtocolError> {
    Ok(y_ego_neighbours(view, a)?.len() >= 2)
}

pub enum PartyRole<'v> {
    X(&'v XView),
    Y(&'v YView),
}

#[derive(Debug)]
pub enum TwoProcessOutcome {
    X(EbcEstimate),
    Y(BudgetLedger),
}

/// How long X keeps retrying while Y's listener comes up.
const CONNECT_PATIENCE: Duration = Duration::from_secs(10);

/// Runs one side over TCP: Y listens on `addr` and serves one connection, X connects
/// to it. Both processes must pass generators seeded identically to reproduce an
/// in-process run.
pub fn run_two_process<R: Rng + ?Sized>(
    role: PartyRole<'_>,
    addr: &str,
    a: NodeId,
    config: ProtocolConfig,
    rng: &mut R,
) -> Result<TwoProcessOutcome, ProtocolError> {
    match role {
        PartyRole::Y(view) => {
            if !y_needs_exchange(view, a)? {
                return run_party_y(&mut Unconnected, view, a, config, rng)
                    .map(TwoProcessOutcome::Y);
            }
            let listener = TcpListener::bind(addr)?;
            let (mut stream, _) = listener.accept()?;
            run_party_y(&mut stream, view, a, config, rng).map(TwoProcessOutcome::Y)
        }
        PartyRole::X(view) => {
            if !XSession::open(view, a, config)?.needs_exchange() {
                return run_party_x(&mut Unconnected, view, a, config, rng)
                    .map(TwoProcessOutcome::X);
            }
            let mut stream = connect_with_retry(addr)?;
            run_party_x(&mut stream, view, a, config, rng).map(TwoProcessOutcome::X)
        }
    }
}

/// Stand-in stream for sessions that exchange nothing.
struct Unconnected;

impl Read for Unconnected {
    fn read(&mut self, _: &mut [u8]) -> std::io::Result<usize> {
        Err(std::io::ErrorKind::NotConnected.into())
    }
}

impl Write for Unconnected {
    fn write(&mut self, _: &[u8]) -> std::io::Result<usize> {
        Err(std::io::ErrorKind::NotConnected.into())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn connect_with_retry(addr: &str) -> Result<TcpStream, ProtocolError> {
    let start = Instant::now();
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => {
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(_) if start.elapsed() < CONNECT_PATIENCE => {
                thread::sleep(Duration::from_millis(50));
            }
            Err(e) => return Err(e.into()),
        }
    }
}
