pub mod algorithms;
pub mod cli;
pub mod comm;
pub mod error;
pub mod graph;
pub mod memory;
pub mod model;
pub mod oracle;
pub mod recode;
pub mod streams;
pub mod worker;

pub use error::{Error, Result};
