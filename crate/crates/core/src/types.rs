//! Primitive domain types shared across the book, kernel and environment.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Price in integer ticks.
pub type Price = i64;
/// Share count.
pub type Qty = u64;
/// Nanoseconds since the session epoch.
pub type Ts = u64;
/// Cost in tick·share units.
pub type Cost = i64;

pub const NANOS_PER_SEC: Ts = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Side::Bid => 'B',
            Side::Ask => 'A',
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Bid => "BID",
            Side::Ask => "ASK",
        })
    }
}

/// Agent identifier, assigned ordinally by the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Exchange-wide order identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderId(pub u64);

impl OrderId {
    const LOCAL_BITS: u32 = 40;

    /// Builds an id in the namespace of `agent`, so agents can pick ids
    /// without coordinating with the exchange.
    pub fn namespaced(agent: AgentId, local: u64) -> OrderId {
        debug_assert!(local < (1 << Self::LOCAL_BITS));
        OrderId(((agent.0 as u64) << Self::LOCAL_BITS) | local)
    }

    /// Agent namespace the id was built in.
    pub fn namespace(self) -> u32 {
        (self.0 >> Self::LOCAL_BITS) as u32
    }

    pub fn local(self) -> u64 {
        self.0 & ((1 << Self::LOCAL_BITS) - 1)
    }
}

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
