use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::env::{EnvConfig, StepInfo, StepResult};
use crate::features::ObservationMatrix;

/// Largest accepted body; anything bigger is treated as a protocol violation.
pub const MAX_FRAME_BYTES: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProtocolMessage {
    Reset {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        config: Option<Box<EnvConfig>>,
    },
    Step {
        action: [f64; 3],
    },
    Close,
    Obs {
        observation: ObservationMatrix,
        info: StepInfo,
    },
    Transition {
        observation: ObservationMatrix,
        reward: f64,
        done: bool,
        info: StepInfo,
    },
    Error {
        kind: String,
        message: String,
    },
}

impl ProtocolMessage {
    pub fn error(kind: &str, message: impl ToString) -> Self {
        ProtocolMessage::Error { kind: kind.to_string(), message: message.to_string() }
    }

    pub fn from_step(r: StepResult) -> Self {
        ProtocolMessage::Transition {
            observation: r.observation,
            reward: r.reward,
            done: r.done,
            info: r.info,
        }
    }

    /// Messages only a server may send.
    pub fn is_reply(&self) -> bool {
        matches!(
            self,
            ProtocolMessage::Obs { .. } | ProtocolMessage::Transition { .. } | ProtocolMessage::Error { .. }
        )
    }
}

/// Length prefix (big-endian u32) followed by the JSON body.
pub fn encode(msg: &ProtocolMessage) -> Result<Vec<u8>, GatewayError> {
    let body = serde_json::to_vec(msg).map_err(|e| GatewayError::Malformed(e.to_string()))?;
    if body.len() > MAX_FRAME_BYTES {
        return Err(GatewayError::FrameTooLarge(body.len()));
    }
    let mut frame = Vec::with_capacity(4 + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

/// Decodes one complete frame, prefix included.
pub fn decode(frame: &[u8]) -> Result<ProtocolMessage, GatewayError> {
    let Some((prefix, body)) = frame.split_first_chunk::<4>() else {
        return Err(GatewayError::LengthMismatch { declared: 0, actual: frame.len() });
    };
    let declared = u32::from_be_bytes(*prefix) as usize;
    if declared != body.len() {
        return Err(GatewayError::LengthMismatch { declared, actual: body.len() });
    }
    decode_body(body)
}

pub fn decode_body(body: &[u8]) -> Result<ProtocolMessage, GatewayError> {
    serde_json::from_slice(body).map_err(|e| GatewayError::Malformed(e.to_string()))
}

/// Reads one body. `Ok(None)` on a clean end of stream before any prefix
/// byte.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, GatewayError> {
    let mut prefix = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut prefix[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(GatewayError::Io(ErrorKind::UnexpectedEof.into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(GatewayError::FrameTooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn write_message<W: Write>(w: &mut W, msg: &ProtocolMessage) -> Result<(), GatewayError> {
    w.write_all(&encode(msg)?)?;
    w.flush()?;
    Ok(())
}
