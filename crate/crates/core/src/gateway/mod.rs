//! Length-prefixed JSON protocol exposing reset/step over TCP.
//!
//! Each connection owns one environment built by the factory on its first
//! reset. Requests are answered strictly in order, one in flight.

mod protocol;

use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use thiserror::Error;

pub use protocol::{
    decode, decode_body, encode, read_frame, write_message, ProtocolMessage, MAX_FRAME_BYTES,
};

use crate::env::{EnvConfig, EnvError, ExecutionEnv, StepResult};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("frame declares {declared} body bytes but carries {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("server error {kind}: {message}")]
    Remote { kind: String, message: String },
    #[error("unexpected reply: {0}")]
    UnexpectedReply(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Builds a fresh environment for each connection.
pub type EnvFactory = Arc<dyn Fn() -> Result<ExecutionEnv, EnvError> + Send + Sync>;

pub fn factory_from_config(cfg: EnvConfig) -> EnvFactory {
    Arc::new(move || ExecutionEnv::new(cfg.clone()))
}

/// A running server; dropping the handle does not stop it.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections. Open connections run until their
    /// clients disconnect.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Blocks until the accept loop exits.
    pub fn join(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Binds `endpoint` and serves connections on background threads.
pub fn spawn(endpoint: impl ToSocketAddrs, factory: EnvFactory) -> Result<ServerHandle, GatewayError> {
    let listener = TcpListener::bind(endpoint)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let accept = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let factory = factory.clone();
            std::thread::spawn(move || {
                let _ = handle_connection(stream, factory);
            });
        }
    });
    Ok(ServerHandle { addr, stop, accept: Some(accept) })
}

/// Serves until the process exits.
pub fn serve(endpoint: impl ToSocketAddrs, factory: EnvFactory) -> Result<(), GatewayError> {
    spawn(endpoint, factory)?.join();
    Ok(())
}

fn handle_connection(mut stream: TcpStream, factory: EnvFactory) -> Result<(), GatewayError> {
    stream.set_nodelay(true)?;
    let mut env: Option<ExecutionEnv> = None;
    loop {
        let body = match read_frame(&mut stream) {
            Ok(Some(b)) => b,
            Ok(None) => break,
            Err(GatewayError::FrameTooLarge(n)) => {
                let reply = ProtocolMessage::error("protocol_violation", format!("frame of {n} bytes"));
                write_message(&mut stream, &reply)?;
                break;
            }
            Err(e) => return Err(e),
        };
        let request = match decode_body(&body) {
            Ok(m) => m,
            Err(e) => {
                write_message(&mut stream, &ProtocolMessage::error("malformed", e))?;
                continue;
            }
        };
        let reply = match request {
            ProtocolMessage::Close => break,
            ProtocolMessage::Reset { seed, config } => reset(&mut env, &factory, seed, config),
            ProtocolMessage::Step { action } => match env.as_mut() {
                None => ProtocolMessage::error("step_before_reset", EnvError::NotReset),
                Some(e) => match e.step(action) {
                    Ok(r) => ProtocolMessage::from_step(r),
                    Err(err) => ProtocolMessage::error(err.kind(), err),
                },
            },
            m if m.is_reply() => {
                let reply = ProtocolMessage::error("protocol_violation", "clients may not send replies");
                write_message(&mut stream, &reply)?;
                break;
            }
            _ => unreachable!("all request types handled"),
        };
        write_message(&mut stream, &reply)?;
    }
    let _ = stream.shutdown(Shutdown::Both);
    Ok(())
}

fn reset(
    env: &mut Option<ExecutionEnv>,
    factory: &EnvFactory,
    seed: Option<u64>,
    config: Option<Box<EnvConfig>>,
) -> ProtocolMessage {
    let result = (|| {
        let e = match env {
            Some(e) => e,
            None => env.insert(factory()?),
        };
        if let Some(cfg) = config {
            e.reconfigure(*cfg)?;
        }
        e.reset(seed)
    })();
    match result {
        Ok(r) => ProtocolMessage::Obs { observation: r.observation, info: r.info },
        Err(err) => ProtocolMessage::error(err.kind(), err),
    }
}

/// Blocking client, one request in flight.
pub struct Client {
    stream: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, GatewayError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }

    pub fn request(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage, GatewayError> {
        write_message(&mut self.stream, msg)?;
        self.receive()
    }

    pub fn receive(&mut self) -> Result<ProtocolMessage, GatewayError> {
        let body = read_frame(&mut self.stream)?
            .ok_or_else(|| GatewayError::Io(std::io::ErrorKind::UnexpectedEof.into()))?;
        decode_body(&body)
    }

    /// Sends raw bytes, for exercising malformed input.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), GatewayError> {
        use std::io::Write;
        self.stream.write_all(bytes)?;
        Ok(())
    }

    pub fn reset(
        &mut self,
        seed: Option<u64>,
        config: Option<EnvConfig>,
    ) -> Result<StepResult, GatewayError> {
        into_step(self.request(&ProtocolMessage::Reset { seed, config: config.map(Box::new) })?)
    }

    pub fn step(&mut self, action: [f64; 3]) -> Result<StepResult, GatewayError> {
        into_step(self.request(&ProtocolMessage::Step { action })?)
    }

    pub fn close(mut self) -> Result<(), GatewayError> {
        write_message(&mut self.stream, &ProtocolMessage::Close)
    }
}

fn into_step(reply: ProtocolMessage) -> Result<StepResult, GatewayError> {
    match reply {
        ProtocolMessage::Obs { observation, info } => {
            Ok(StepResult { observation, reward: 0.0, done: false, info })
        }
        ProtocolMessage::Transition { observation, reward, done, info } => {
            Ok(StepResult { observation, reward, done, info })
        }
        ProtocolMessage::Error { kind, message } => Err(GatewayError::Remote { kind, message }),
        other => Err(GatewayError::UnexpectedReply(format!("{other:?}"))),
    }
}
