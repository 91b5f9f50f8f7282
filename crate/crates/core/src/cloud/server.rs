use std::convert::Infallible;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread::{self, JoinHandle};

use super::wire::{decode_request, encode_response, error_response_for};
use super::{derive_seed, Adversary, Response, WorkerBehavior};
use crate::error::{Error, Result};

/// Line-protocol worker service. Every connection gets its own adversary
/// state, seeded from the server seed and the connection's index.
pub struct Server {
    listener: TcpListener,
    behavior: WorkerBehavior,
    seed: u64,
}

pub struct ServerHandle {
    addr: SocketAddr,
    _thread: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, behavior: WorkerBehavior, seed: u64) -> Result<Self> {
        let listener =
            TcpListener::bind(addr).map_err(|e| Error::Transport(format!("bind failed: {e}")))?;
        Ok(Server {
            listener,
            behavior,
            seed,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until the process ends.
    pub fn serve(self) -> Result<Infallible> {
        for (index, stream) in (0u64..).zip(self.listener.incoming()) {
            let stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let adversary = Adversary::new(self.behavior, derive_seed(self.seed, index));
            thread::spawn(move || {
                let _ = handle_connection(stream, adversary);
            });
        }
        unreachable!("incoming() never ends")
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let thread = thread::spawn(move || {
            let _ = self.serve();
        });
        Ok(ServerHandle {
            addr,
            _thread: thread,
        })
    }
}

fn handle_connection(stream: TcpStream, mut adversary: Adversary) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match decode_request(&line) {
            Ok(req) => encode_response(&Response {
                outcome: adversary.answer(&req.task),
                id: req.id,
            }),
            Err(e) => error_response_for(&line, &e.to_string()),
        };
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

pub fn run_server(endpoint: &str, behavior: WorkerBehavior, seed: u64) -> Result<Infallible> {
    Server::bind(endpoint, behavior, seed)?.serve()
}
