//! Entanglement-assisted quantum error correction by alternating
//! optimization of encoding and recovery operations.

pub mod channel_io;
pub mod channels;
pub mod error;
pub mod gates;
pub mod layout;
pub mod linalg;
pub mod matrix;
pub mod optimizer;
pub mod oracle;
pub mod teleport;

pub use channels::{KrausChannel, TargetSpec};
pub use error::{Error, Result};
pub use layout::{Factor, SystemLayout};
pub use matrix::CMatrix;
