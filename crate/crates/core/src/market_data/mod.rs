//! Message-level market data: the CSV record format, a seeded synthetic
//! order-flow generator and the replay agent.

mod io;
mod replay;
mod synthetic;

pub use io::{parse_messages, read_messages, serialize_messages, write_messages, MESSAGE_HEADER};
pub use replay::{apply_records, ReplayAgent, ReplayStats};
pub use synthetic::{generate_synthetic_day, SyntheticConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Price, Qty, Side, Ts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Add,
    Cancel,
    Reduce,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Add => "ADD",
            MessageKind::Cancel => "CANCEL",
            MessageKind::Reduce => "REDUCE",
        }
    }
}

/// One historical order-book message. CANCEL ignores price and qty;
/// REDUCE removes `qty` shares from a resting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub ts: Ts,
    pub kind: MessageKind,
    pub order_id: u64,
    pub side: Side,
    pub price: Price,
    pub qty: Qty,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing or wrong header, expected `{expected}`")]
    Header { expected: &'static str },
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
