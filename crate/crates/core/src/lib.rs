//! Common information and rate regions of finite joint distributions.

pub mod cli;
pub mod common;
pub mod crypto;
pub mod error;
pub mod optimize;
pub mod pmf;
pub mod regions;
pub mod verify;

pub use error::{Error, Result};
