//! Serving an in-process scorer over the line protocol.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::sync::Arc;

use super::protocol::*;
use crate::error::{Error, Result};
use crate::scorer::{DynScorer, ErasedState};
use crate::vocab::{Sentence, TokenId};

/// One client's view of the server: its handles live and die with it.
pub struct Session<'a> {
    scorer: &'a dyn DynScorer,
    states: HashMap<u64, ErasedState>,
    next_handle: u64,
}

impl<'a> Session<'a> {
    pub fn new(scorer: &'a dyn DynScorer) -> Self {
        Self {
            scorer,
            states: HashMap::new(),
            next_handle: 1,
        }
    }

    pub fn live_handles(&self) -> usize {
        self.states.len()
    }

    fn store(&mut self, state: ErasedState) -> u64 {
        let h = self.next_handle;
        self.next_handle += 1;
        self.states.insert(h, state);
        h
    }

    fn state(&self, id: u64, handle: u64) -> Result<&ErasedState, Response> {
        self.states
            .get(&handle)
            .ok_or_else(|| Response::error(Some(id), UNKNOWN_HANDLE, format!("unknown handle {handle}")))
    }

    /// Answers one request line.
    pub fn handle_line(&mut self, line: &str) -> Response {
        match parse_request(line) {
            Ok(req) => self.dispatch(req).unwrap_or_else(|e| e),
            Err(resp) => resp,
        }
    }

    fn dispatch(&mut self, req: Request) -> Result<Response, Response> {
        let id = req.id;
        let fail = |e: Error| {
            let code = match e {
                Error::InvalidInput(_)
                | Error::ClosedState
                | Error::EmptySentence
                | Error::ImpossibleEmission(_)
                | Error::Precondition(_) => MALFORMED,
                _ => SERVER_ERROR,
            };
            Response::error(Some(id), code, e.to_string())
        };
        let vocab = self.scorer.vocabulary();
        let reply = match req.call {
            Call::Info => Reply::Info {
                vocab_hash: vocab.hash(),
                vocab_size: vocab.len(),
            },
            Call::Init { source, vocab_hash } => {
                if let Some(h) = vocab_hash {
                    if h != vocab.hash() {
                        return Err(Response::error(
                            Some(id),
                            HASH_MISMATCH,
                            format!("vocabulary hash {h} does not match {}", vocab.hash()),
                        ));
                    }
                }
                if source.is_empty() {
                    return Err(Response::error(Some(id), MALFORMED, "empty source"));
                }
                let ids = source.iter().map(|w| vocab.id_or_unk(w)).collect();
                let sentence = Sentence::new(vocab, ids, source.join(" ")).map_err(fail)?;
                let state = self.scorer.init_erased(&sentence).map_err(fail)?;
                Reply::Handle {
                    handle: self.store(state),
                }
            }
            Call::NextDist { handle, top, exact } => {
                let dist = self.scorer.next_dist_erased(self.state(id, handle)?).map_err(fail)?;
                let top = if exact { None } else { Some(top.unwrap_or(DEFAULT_TOP_M)) };
                Reply::Dist(SparseDist::from_probs(dist.probs(), top))
            }
            Call::Advance { handle, token } => {
                if token as usize >= vocab.len() {
                    return Err(Response::error(
                        Some(id),
                        MALFORMED,
                        format!("token {token} outside a vocabulary of {}", vocab.len()),
                    ));
                }
                let next = self
                    .scorer
                    .advance_erased(self.state(id, handle)?, TokenId(token))
                    .map_err(fail)?;
                Reply::Handle {
                    handle: self.store(next),
                }
            }
        };
        Ok(Response::ok(id, reply))
    }
}

/// Serves one connection until the reader is exhausted.
pub fn serve<R: BufRead, W: Write>(scorer: &dyn DynScorer, reader: R, mut writer: W) -> Result<()> {
    let io = |e| Error::Transport(format!("serve: {e}"));
    let mut session = Session::new(scorer);
    for line in reader.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = session.handle_line(&line);
        serde_json::to_writer(&mut writer, &resp)?;
        writer.write_all(b"\n").map_err(io)?;
        writer.flush().map_err(io)?;
    }
    Ok(())
}

/// Accepts connections forever, one thread and one session per client.
pub fn serve_tcp(scorer: Arc<dyn DynScorer>, listener: TcpListener) -> Result<()> {
    for stream in listener.incoming() {
        let stream = stream.map_err(|e| Error::Transport(format!("accept: {e}")))?;
        let scorer = Arc::clone(&scorer);
        std::thread::spawn(move || {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(e) => {
                    log::warn!("{peer}: {e}");
                    return;
                }
            };
            if let Err(e) = serve(scorer.as_ref(), reader, BufWriter::new(stream)) {
                log::warn!("{peer}: {e}");
            }
        });
    }
    Ok(())
}
