//! A tiny in-test RESP server: GET, SET, INCR, PUBLISH, SUBSCRIBE, PING.
#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use spacemind::bus::resp::{encode_command, read_reply, Reply};

#[derive(Default)]
struct Db {
    values: HashMap<Vec<u8>, Vec<u8>>,
    subscribers: HashMap<Vec<u8>, Vec<TcpStream>>,
}

pub struct FakeResp {
    pub addr: String,
}

fn bulk(b: &[u8]) -> Vec<u8> {
    let mut out = format!("${}\r\n", b.len()).into_bytes();
    out.extend_from_slice(b);
    out.extend_from_slice(b"\r\n");
    out
}

fn push(kind: &[u8], channel: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = b"*3\r\n".to_vec();
    out.extend(bulk(kind));
    out.extend(bulk(channel));
    out.extend(bulk(payload));
    out
}

fn serve(stream: TcpStream, db: Arc<Mutex<Db>>) {
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    while let Ok(Reply::Array(Some(items))) = read_reply(&mut reader) {
        let args: Vec<Vec<u8>> = items
            .into_iter()
            .map(|r| match r {
                Reply::Bulk(Some(b)) => b,
                _ => Vec::new(),
            })
            .collect();
        let cmd = String::from_utf8_lossy(&args[0]).to_ascii_uppercase();
        let mut db = db.lock().unwrap();
        let reply = match (cmd.as_str(), args.len()) {
            ("PING", 1) => b"+PONG\r\n".to_vec(),
            ("GET", 2) => match db.values.get(&args[1]) {
                Some(v) => bulk(v),
                None => b"$-1\r\n".to_vec(),
            },
            ("SET", 3) => {
                db.values.insert(args[1].clone(), args[2].clone());
                b"+OK\r\n".to_vec()
            }
            ("INCR", 2) => {
                let n =
                    db.values.get(&args[1]).and_then(|v| String::from_utf8_lossy(v).parse::<i64>().ok()).unwrap_or(0)
                        + 1;
                db.values.insert(args[1].clone(), n.to_string().into_bytes());
                format!(":{n}\r\n").into_bytes()
            }
            ("PUBLISH", 3) => {
                let msg = push(b"message", &args[1], &args[2]);
                let subs = db.subscribers.entry(args[1].clone()).or_default();
                subs.retain_mut(|s| s.write_all(&msg).is_ok());
                format!(":{}\r\n", subs.len()).into_bytes()
            }
            ("SUBSCRIBE", 2) => {
                db.subscribers.entry(args[1].clone()).or_default().push(writer.try_clone().unwrap());
                let mut out = b"*3\r\n".to_vec();
                out.extend(bulk(b"subscribe"));
                out.extend(bulk(&args[1]));
                out.extend(b":1\r\n");
                out
            }
            _ => b"-ERR unknown command\r\n".to_vec(),
        };
        if writer.write_all(&reply).is_err() {
            return;
        }
    }
}

impl FakeResp {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let db = Arc::new(Mutex::new(Db::default()));
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let db = db.clone();
                thread::spawn(move || serve(stream, db));
            }
        });
        FakeResp { addr }
    }
}

/// Raw client call, for poking the server directly.
pub fn raw_call(addr: &str, args: &[&[u8]]) -> Reply {
    let mut s = TcpStream::connect(addr).unwrap();
    s.write_all(&encode_command(args)).unwrap();
    read_reply(&mut BufReader::new(s)).unwrap()
}
