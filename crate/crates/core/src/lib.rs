pub mod agents;
pub mod env;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod marketdata;
pub mod pipeline;
pub mod seed;
pub mod strategies;
