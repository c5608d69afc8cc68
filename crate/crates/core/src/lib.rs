pub mod basis;
pub mod error;
pub mod estimator;
pub mod evaluate;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod pipeline;
pub mod projection;
pub mod registry;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
