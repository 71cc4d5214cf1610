pub mod agents;
pub mod env;
pub mod features;
pub mod gateway;
pub mod kernel;
pub mod lob;
pub mod market_data;
pub mod pipeline;
pub mod types;
