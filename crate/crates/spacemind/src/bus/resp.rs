//! Adapter for an external key-value pub/sub server speaking the RESP wire
//! protocol (Redis and compatibles).
//!
//! Latest values live under `<ns>:latest:<key>`, sequence counters under
//! `<ns>:seq:<key>` (INCR), and messages are published on `<ns>:<key>`.
//! Values are JSON envelopes `{"seq", "timestamp_ms", "payload"}`. Semantics
//! are the server's own: PUBLISH is at-most-once and a subscriber only sees
//! messages published after its SUBSCRIBE was acknowledged.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use spacemind_core::bus::{Bus, BusError, BusMessage, ChannelKey, Handler, SubscriptionId};

use super::now_ms;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reply {
    Simple(String),
    Error(String),
    Int(i64),
    Bulk(Option<Vec<u8>>),
    Array(Option<Vec<Reply>>),
}

pub fn encode_command(args: &[&[u8]]) -> Vec<u8> {
    let mut out = format!("*{}\r\n", args.len()).into_bytes();
    for a in args {
        out.extend_from_slice(format!("${}\r\n", a.len()).as_bytes());
        out.extend_from_slice(a);
        out.extend_from_slice(b"\r\n");
    }
    out
}

fn line<R: BufRead>(r: &mut R) -> std::io::Result<String> {
    let mut buf = Vec::new();
    r.read_until(b'\n', &mut buf)?;
    if buf.is_empty() {
        return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "connection closed"));
    }
    if !buf.ends_with(b"\r\n") {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "line without CRLF"));
    }
    buf.truncate(buf.len() - 2);
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

fn bad(msg: &str) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string())
}

pub fn read_reply<R: BufRead>(r: &mut R) -> std::io::Result<Reply> {
    let head = line(r)?;
    let (tag, rest) = head.split_at(head.len().min(1));
    let int = || rest.parse::<i64>().map_err(|_| bad("bad integer"));
    Ok(match tag {
        "+" => Reply::Simple(rest.to_string()),
        "-" => Reply::Error(rest.to_string()),
        ":" => Reply::Int(int()?),
        "$" => match int()? {
            -1 => Reply::Bulk(None),
            n if n >= 0 => {
                let mut buf = vec![0; n as usize + 2];
                r.read_exact(&mut buf)?;
                if !buf.ends_with(b"\r\n") {
                    return Err(bad("bulk string without CRLF"));
                }
                buf.truncate(n as usize);
                Reply::Bulk(Some(buf))
            }
            _ => return Err(bad("negative bulk length")),
        },
        "*" => match int()? {
            -1 => Reply::Array(None),
            n if n >= 0 => Reply::Array(Some((0..n).map(|_| read_reply(r)).collect::<Result<_, _>>()?)),
            _ => return Err(bad("negative array length")),
        },
        _ => return Err(bad("unknown reply type")),
    })
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    seq: u64,
    timestamp_ms: u64,
    payload: String,
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Conn {
    fn open(addr: &str, timeout: Duration) -> std::io::Result<Self> {
        let sock = addr.to_socket_addrs()?.next().ok_or_else(|| bad("address did not resolve"))?;
        let stream = TcpStream::connect_timeout(&sock, timeout)?;
        stream.set_nodelay(true)?;
        Ok(Conn { reader: BufReader::new(stream.try_clone()?), writer: stream })
    }

    fn call(&mut self, args: &[&[u8]]) -> std::io::Result<Reply> {
        self.writer.write_all(&encode_command(args))?;
        read_reply(&mut self.reader)
    }
}

fn unavailable(e: impl std::fmt::Display) -> BusError {
    BusError::BackendUnavailable(e.to_string())
}

/// Bus backed by a RESP server. Commands share one connection; each
/// subscription opens its own.
pub struct RespBus {
    addr: String,
    namespace: String,
    timeout: Duration,
    conn: Mutex<Conn>,
    subs: Mutex<BTreeMap<SubscriptionId, TcpStream>>,
    next_id: Mutex<u64>,
}

impl RespBus {
    pub fn connect(addr: &str, namespace: &str) -> Result<Self, BusError> {
        let timeout = Duration::from_secs(5);
        let mut conn = Conn::open(addr, timeout).map_err(unavailable)?;
        conn.writer.set_read_timeout(Some(timeout)).map_err(unavailable)?;
        match conn.call(&[b"PING"]).map_err(unavailable)? {
            Reply::Simple(s) if s == "PONG" => {}
            other => return Err(unavailable(format!("unexpected PING reply {other:?}"))),
        }
        Ok(RespBus {
            addr: addr.to_string(),
            namespace: namespace.to_string(),
            timeout,
            conn: Mutex::new(conn),
            subs: Mutex::new(BTreeMap::new()),
            next_id: Mutex::new(0),
        })
    }

    fn name(&self, kind: &str, key: ChannelKey) -> String {
        match kind {
            "" => format!("{}:{}", self.namespace, key.as_str()),
            _ => format!("{}:{kind}:{}", self.namespace, key.as_str()),
        }
    }

    fn call(&self, args: &[&[u8]]) -> Result<Reply, BusError> {
        match self.conn.lock().expect("resp lock").call(args).map_err(unavailable)? {
            Reply::Error(e) => Err(unavailable(e)),
            r => Ok(r),
        }
    }
}

fn decode_envelope(key: ChannelKey, raw: &[u8]) -> Result<BusMessage, BusError> {
    let env: Envelope = serde_json::from_slice(raw).map_err(|e| unavailable(format!("bad envelope: {e}")))?;
    Ok(BusMessage { key, payload: env.payload.into_bytes(), seq: env.seq, timestamp_ms: env.timestamp_ms })
}

impl Bus for RespBus {
    fn publish(&self, key: ChannelKey, payload: &[u8]) -> Result<u64, BusError> {
        key.validate(payload)?;
        let payload =
            std::str::from_utf8(payload).map_err(|e| BusError::SchemaViolation { key, detail: e.to_string() })?;
        // Hold the connection across INCR/SET/PUBLISH so this client's
        // messages cannot interleave.
        let mut conn = self.conn.lock().expect("resp lock");
        let mut call = |args: &[&[u8]]| match conn.call(args).map_err(unavailable)? {
            Reply::Error(e) => Err(unavailable(e)),
            r => Ok(r),
        };
        let seq = match call(&[b"INCR", self.name("seq", key).as_bytes()])? {
            Reply::Int(n) if n > 0 => n as u64,
            other => return Err(unavailable(format!("unexpected INCR reply {other:?}"))),
        };
        let env = serde_json::to_vec(&Envelope { seq, timestamp_ms: now_ms(), payload: payload.to_string() })
            .expect("envelope serializes");
        call(&[b"SET", self.name("latest", key).as_bytes(), &env])?;
        call(&[b"PUBLISH", self.name("", key).as_bytes(), &env])?;
        Ok(seq)
    }

    fn get_latest(&self, key: ChannelKey) -> Result<Option<BusMessage>, BusError> {
        match self.call(&[b"GET", self.name("latest", key).as_bytes()])? {
            Reply::Bulk(None) => Ok(None),
            Reply::Bulk(Some(raw)) => decode_envelope(key, &raw).map(Some),
            other => Err(unavailable(format!("unexpected GET reply {other:?}"))),
        }
    }

    fn subscribe(&self, key: ChannelKey, handler: Handler) -> Result<SubscriptionId, BusError> {
        let mut conn = Conn::open(&self.addr, self.timeout).map_err(unavailable)?;
        let channel = self.name("", key);
        conn.writer.set_read_timeout(Some(self.timeout)).map_err(unavailable)?;
        match conn.call(&[b"SUBSCRIBE", channel.as_bytes()]).map_err(unavailable)? {
            Reply::Array(Some(items)) if items.first() == Some(&Reply::Bulk(Some(b"subscribe".to_vec()))) => {}
            other => return Err(unavailable(format!("unexpected SUBSCRIBE reply {other:?}"))),
        }
        conn.writer.set_read_timeout(None).map_err(unavailable)?;
        let id = {
            let mut n = self.next_id.lock().expect("resp lock");
            *n += 1;
            SubscriptionId(*n)
        };
        let control = conn.writer.try_clone().map_err(unavailable)?;
        let Conn { mut reader, writer: _writer } = conn;
        thread::Builder::new()
            .name(format!("resp-{}", key.as_str()))
            .spawn(move || {
                while let Ok(reply) = read_reply(&mut reader) {
                    if let Reply::Array(Some(items)) = reply {
                        if let [Reply::Bulk(Some(kind)), _, Reply::Bulk(Some(raw))] = items.as_slice() {
                            if kind == b"message" {
                                match decode_envelope(key, raw) {
                                    Ok(msg) => handler(&msg),
                                    Err(e) => log::warn!("dropping message on {key}: {e}"),
                                }
                            }
                        }
                    }
                }
            })
            .map_err(unavailable)?;
        self.subs.lock().expect("resp lock").insert(id, control);
        Ok(id)
    }

    fn unsubscribe(&self, id: SubscriptionId) -> Result<(), BusError> {
        if let Some(stream) = self.subs.lock().expect("resp lock").remove(&id) {
            let _ = stream.shutdown(Shutdown::Both);
        }
        Ok(())
    }
}

impl Drop for RespBus {
    fn drop(&mut self) {
        for (_, s) in std::mem::take(&mut *self.subs.lock().expect("resp lock")) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_encoding() {
        assert_eq!(encode_command(&[b"GET", b"k"]), b"*2\r\n$3\r\nGET\r\n$1\r\nk\r\n".to_vec());
    }

    #[test]
    fn reply_parsing() {
        let mut r = &b"*3\r\n$7\r\nmessage\r\n$2\r\nch\r\n$-1\r\n:42\r\n+OK\r\n-ERR nope\r\n"[..];
        assert_eq!(
            read_reply(&mut r).unwrap(),
            Reply::Array(Some(vec![
                Reply::Bulk(Some(b"message".to_vec())),
                Reply::Bulk(Some(b"ch".to_vec())),
                Reply::Bulk(None)
            ]))
        );
        assert_eq!(read_reply(&mut r).unwrap(), Reply::Int(42));
        assert_eq!(read_reply(&mut r).unwrap(), Reply::Simple("OK".into()));
        assert_eq!(read_reply(&mut r).unwrap(), Reply::Error("ERR nope".into()));
        assert!(read_reply(&mut r).is_err());
        assert!(read_reply(&mut &b"$5\r\nab\r\n"[..]).is_err());
    }
}
