pub mod cli;
pub mod dtw;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod lof;
pub mod periodicity;
pub mod robust;
pub mod series;
pub mod synth;
pub mod trend;

pub use error::{Error, Result};
