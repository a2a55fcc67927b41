//! A scorer whose distributions come from a server speaking the line
//! protocol, over a child process's pipes or a TCP socket.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::*;
use crate::dist::TokenDist;
use crate::error::{Error, Result};
use crate::scorer::IncrementalScorer;
use crate::vocab::{Sentence, TokenId, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub timeout_secs: f64,
    pub top_m: usize,
    /// Request full distributions instead of the top entries.
    pub exact: bool,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            timeout_secs: 30.0,
            top_m: DEFAULT_TOP_M,
            exact: false,
        }
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    replies: Receiver<std::io::Result<String>>,
    next_id: u64,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RemoteState {
    handle: u64,
}

impl RemoteState {
    pub fn handle(&self) -> u64 {
        self.handle
    }
}

pub struct RemoteScorer {
    vocab: Vocabulary,
    config: RemoteConfig,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer")
            .field("vocab_size", &self.vocab.len())
            .field("config", &self.config)
            .finish()
    }
}

fn transport(what: &str, e: impl std::fmt::Display) -> Error {
    Error::Transport(format!("{what}: {e}"))
}

impl RemoteScorer {
    /// Starts `command` and talks to it over stdin/stdout.
    pub fn spawn(mut command: Command, vocab: Vocabulary, config: RemoteConfig) -> Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| transport("spawn", e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::over(stdout, Box::new(stdin), Some(child), vocab, config)
    }

    pub fn connect<A: ToSocketAddrs>(addr: A, vocab: Vocabulary, config: RemoteConfig) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| transport("connect", e))?;
        stream.set_nodelay(true).map_err(|e| transport("connect", e))?;
        let reader = stream.try_clone().map_err(|e| transport("connect", e))?;
        Self::over(reader, Box::new(stream), None, vocab, config)
    }

    /// Uses an already open byte stream pair.
    pub fn from_streams<R: Read + Send + 'static>(
        reader: R,
        writer: Box<dyn Write + Send>,
        vocab: Vocabulary,
        config: RemoteConfig,
    ) -> Result<Self> {
        Self::over(reader, writer, None, vocab, config)
    }

    fn over<R: Read + Send + 'static>(
        reader: R,
        writer: Box<dyn Write + Send>,
        child: Option<Child>,
        vocab: Vocabulary,
        config: RemoteConfig,
    ) -> Result<Self> {
        if !(config.timeout_secs > 0.0) || config.top_m < 1 {
            return Err(Error::InvalidConfig(
                "remote scorer needs timeout_secs > 0 and top_m >= 1".into(),
            ));
        }
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let scorer = Self {
            vocab,
            config,
            conn: Mutex::new(Connection {
                writer,
                replies: rx,
                next_id: 1,
                child,
            }),
        };
        match scorer.call(Call::Info)? {
            Reply::Info {
                vocab_hash,
                vocab_size,
            } => {
                let expected = scorer.vocab.hash();
                if vocab_hash != expected || vocab_size != scorer.vocab.len() {
                    return Err(Error::VocabMismatch {
                        expected,
                        actual: vocab_hash,
                    });
                }
            }
            other => return Err(transport("info", format!("unexpected reply {other:?}"))),
        }
        Ok(scorer)
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn call(&self, call: Call) -> Result<Reply> {
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| Error::Transport("connection poisoned".into()))?;
        let id = conn.next_id;
        conn.next_id += 1;
        let mut line = serde_json::to_vec(&Request {
            v: PROTOCOL_VERSION,
            id,
            call,
        })?;
        line.push(b'\n');
        conn.writer
            .write_all(&line)
            .and_then(|_| conn.writer.flush())
            .map_err(|e| transport("send", e))?;
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        loop {
            let text = match conn.replies.recv_timeout(timeout) {
                Ok(Ok(text)) => text,
                Ok(Err(e)) => return Err(transport("receive", e)),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Transport(format!(
                        "no reply within {} s",
                        self.config.timeout_secs
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Transport("server closed the connection".into()))
                }
            };
            let resp: Response =
                serde_json::from_str(&text).map_err(|e| transport("bad reply", e))?;
            if resp.id.is_some_and(|r| r < id) {
                // a late answer to a request that already timed out
                continue;
            }
            if resp.id != Some(id) {
                return Err(transport("reply", format!("expected id {id}, got {:?}", resp.id)));
            }
            return match resp.body {
                Body::Result(r) => Ok(r),
                Body::Error(e) if e.code == HASH_MISMATCH => Err(Error::VocabMismatch {
                    expected: self.vocab.hash(),
                    actual: e.message,
                }),
                Body::Error(e) => Err(Error::Remote {
                    code: e.code,
                    message: e.message,
                }),
            };
        }
    }

    fn handle_of(&self, reply: Reply) -> Result<RemoteState> {
        match reply {
            Reply::Handle { handle } => Ok(RemoteState { handle }),
            other => Err(transport("reply", format!("expected a handle, got {other:?}"))),
        }
    }
}

impl IncrementalScorer for RemoteScorer {
    type State = RemoteState;

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn init_state(&self, source: &Sentence) -> Result<RemoteState> {
        let words = source.words(&self.vocab).into_iter().map(str::to_string).collect();
        let reply = self.call(Call::Init {
            source: words,
            vocab_hash: Some(self.vocab.hash()),
        })?;
        self.handle_of(reply)
    }

    fn next_dist(&self, state: &RemoteState) -> Result<TokenDist> {
        let reply = self.call(Call::NextDist {
            handle: state.handle,
            top: (!self.config.exact).then_some(self.config.top_m),
            exact: self.config.exact,
        })?;
        match reply {
            Reply::Dist(d) if d.size == self.vocab.len() => TokenDist::from_weights(d.densify()),
            other => Err(transport("next_dist", format!("unexpected reply {other:?}"))),
        }
    }

    fn advance(&self, state: &RemoteState, token: TokenId) -> Result<RemoteState> {
        let reply = self.call(Call::Advance {
            handle: state.handle,
            token: token.0,
        })?;
        self.handle_of(reply)
    }
}
