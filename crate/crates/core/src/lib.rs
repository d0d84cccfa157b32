pub mod bench;
pub mod demo;
pub mod error;
pub mod io_formats;
pub mod lie_se3;
pub mod matching;
pub mod metric_spaces;
pub mod reparam;
pub mod synth;
pub mod varglobal;
pub mod verify;

pub use error::{Error, Result};
