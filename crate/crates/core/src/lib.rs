pub mod bench;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod linloss;
pub mod models;
pub mod probdist;
pub mod workflow;

pub use error::{Error, Result};
