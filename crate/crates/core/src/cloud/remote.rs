use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::wire::{decode_response, encode_request};
use super::{CloudWorker, Request, Response};
use crate::error::{Error, Result};

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Client side of the line protocol. Each batch uses a fresh connection.
#[derive(Debug, Clone)]
pub struct RemoteWorker {
    addr: SocketAddr,
    timeout: Duration,
}

pub fn remote_worker(endpoint: &str) -> Result<RemoteWorker> {
    let addr = endpoint
        .to_socket_addrs()
        .map_err(|e| Error::Transport(format!("cannot resolve {endpoint}: {e}")))?
        .next()
        .ok_or_else(|| Error::Transport(format!("{endpoint} resolves to nothing")))?;
    Ok(RemoteWorker {
        addr,
        timeout: DEFAULT_TIMEOUT,
    })
}

impl RemoteWorker {
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    fn roundtrip(&self, batch: &[Request]) -> std::io::Result<Vec<String>> {
        let stream = TcpStream::connect_timeout(&self.addr, self.timeout)?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;
        let mut writer = stream.try_clone()?;
        let mut payload = String::new();
        for req in batch {
            payload.push_str(&encode_request(req));
            payload.push('\n');
        }
        writer.write_all(payload.as_bytes())?;
        writer.flush()?;
        let mut reader = BufReader::new(stream);
        let mut lines = Vec::with_capacity(batch.len());
        while lines.len() < batch.len() {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "worker closed the connection early",
                ));
            }
            lines.push(line);
        }
        Ok(lines)
    }
}

impl CloudWorker for RemoteWorker {
    fn submit(&self, batch: &[Request]) -> Result<Vec<Response>> {
        let lines = self
            .roundtrip(batch)
            .map_err(|e| Error::Transport(format!("{}: {e}", self.addr)))?;
        lines
            .iter()
            .map(|l| decode_response(l).map_err(|e| Error::Protocol(e.to_string())))
            .collect()
    }
}
