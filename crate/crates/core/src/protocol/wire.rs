//! Wire format v1, big-endian:
//!
//! ```text
//! frame    = u32 length | u8 version (=1) | u8 type | payload      (length counts the bytes after itself)
//! Forward  (type 1) = u32 count | count × u64 node
//! Backward (type 2) = u32 count | count × (u64 i | u64 j | f64 value) | f64 S_Y
//! ```
//!
//! Node ids are the dense indices both parties derive from the shared, sorted label
//! list. Payload entries must be strictly increasing.

use std::fmt;
use std::io::{self, Read, Write};

use crate::backward::{BackwardMsg, CountEntry};
use crate::forward::ForwardMsg;
use crate::graph::{NodeId, NodeSet};

pub const WIRE_VERSION: u8 = 1;
/// Length, version and type bytes.
pub const HEADER_LEN: usize = 6;
pub const COUNT_ENTRY_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Forward = 1,
    Backward = 2,
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MsgType::Forward => "forward",
            MsgType::Backward => "backward",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Forward(ForwardMsg),
    Backward(BackwardMsg),
}

impl Message {
    pub fn kind(&self) -> MsgType {
        match self {
            Message::Forward(_) => MsgType::Forward,
            Message::Backward(_) => MsgType::Backward,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeErrorKind {
    Truncated,
    Version(u8),
    UnknownType(u8),
    LengthMismatch { declared: usize, actual: usize },
    Unsorted,
    NodeOutOfRange(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("malformed frame at byte {offset}: {kind:?}")]
pub struct DecodeError {
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

pub fn encode_msg(msg: &Message) -> Vec<u8> {
    let body = match msg {
        Message::Forward(f) => 4 + 8 * f.nodes.len(),
        Message::Backward(b) => 4 + COUNT_ENTRY_LEN * b.counts.len() + 8,
    };
    let mut out = Vec::with_capacity(4 + 2 + body);
    out.extend_from_slice(&((2 + body) as u32).to_be_bytes());
    out.push(WIRE_VERSION);
    out.push(msg.kind() as u8);
    match msg {
        Message::Forward(f) => {
            out.extend_from_slice(&(f.nodes.len() as u32).to_be_bytes());
            for v in &f.nodes {
                out.extend_from_slice(&(v.0 as u64).to_be_bytes());
            }
        }
        Message::Backward(b) => {
            out.extend_from_slice(&(b.counts.len() as u32).to_be_bytes());
            for e in &b.counts {
                out.extend_from_slice(&(e.i.0 as u64).to_be_bytes());
                out.extend_from_slice(&(e.j.0 as u64).to_be_bytes());
                out.extend_from_slice(&e.value.to_be_bytes());
            }
            out.extend_from_slice(&b.partial_sum.to_be_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail(&self, kind: DecodeErrorKind) -> DecodeError {
        DecodeError {
            offset: self.pos,
            kind,
        }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| self.fail(DecodeErrorKind::Truncated))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice of length N"))
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        self.take().map(u32::from_be_bytes)
    }

    fn f64(&mut self) -> Result<f64, DecodeError> {
        self.take().map(f64::from_be_bytes)
    }

    fn node(&mut self) -> Result<NodeId, DecodeError> {
        let at = self.pos;
        let raw = u64::from_be_bytes(self.take()?);
        u32::try_from(raw).map(NodeId).map_err(|_| DecodeError {
            offset: at,
            kind: DecodeErrorKind::NodeOutOfRange(raw),
        })
    }
}

/// Decodes exactly one frame; trailing bytes are an error.
pub fn decode_msg(buf: &[u8]) -> Result<Message, DecodeError> {
    let mut c = Cursor { buf, pos: 0 };
    let declared = c.u32()? as usize;
    if buf.len() - 4 != declared {
        return Err(DecodeError {
            offset: 0,
            kind: DecodeErrorKind::LengthMismatch {
                declared,
                actual: buf.len() - 4,
            },
        });
    }
    let version = c.u8()?;
    if version != WIRE_VERSION {
        return Err(DecodeError {
            offset: 4,
            kind: DecodeErrorKind::Version(version),
        });
    }
    let kind = c.u8()?;
    let count = c.u32()? as usize;
    let msg = match kind {
        1 => {
            let mut nodes = Vec::with_capacity(count.min(buf.len() / 8));
            for _ in 0..count {
                let at = c.pos;
                let v = c.node()?;
                if nodes.last().is_some_and(|&last| last >= v) {
                    return Err(DecodeError {
                        offset: at,
                        kind: DecodeErrorKind::Unsorted,
                    });
                }
                nodes.push(v);
            }
            Message::Forward(ForwardMsg {
                nodes: NodeSet::from_sorted(nodes),
            })
        }
        2 => {
            let mut counts: Vec<CountEntry> =
                Vec::with_capacity(count.min(buf.len() / COUNT_ENTRY_LEN));
            for _ in 0..count {
                let at = c.pos;
                let (i, j) = (c.node()?, c.node()?);
                let value = c.f64()?;
                if counts.last().is_some_and(|l| (l.i, l.j) >= (i, j)) {
                    return Err(DecodeError {
                        offset: at,
                        kind: DecodeErrorKind::Unsorted,
                    });
                }
                counts.push(CountEntry { i, j, value });
            }
            let partial_sum = c.f64()?;
            Message::Backward(BackwardMsg {
                counts,
                partial_sum,
            })
        }
        other => {
            return Err(DecodeError {
                offset: 5,
                kind: DecodeErrorKind::UnknownType(other),
            })
        }
    };
    if c.pos != buf.len() {
        return Err(c.fail(DecodeErrorKind::LengthMismatch {
            declared,
            actual: c.pos - 4,
        }));
    }
    Ok(msg)
}

/// Reads one length-prefixed frame, returning it with its length field.
pub fn read_frame<R: Read>(reader: &mut R) -> io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    reader.read_exact(&mut len)?;
    let body = u32::from_be_bytes(len) as usize;
    let mut frame = Vec::with_capacity(4 + body);
    frame.extend_from_slice(&len);
    frame.resize(4 + body, 0);
    reader.read_exact(&mut frame[4..])?;
    Ok(frame)
}

pub fn write_frame<W: Write>(writer: &mut W, frame: &[u8]) -> io::Result<()> {
    writer.write_all(frame)?;
    writer.flush()
}
