pub mod dataset;
pub mod error;
pub mod io;
pub mod layout;
pub mod merge;
pub mod mesh;
pub mod numeric;
pub mod photometry;
pub mod projection;
pub mod radiance;
pub mod scene;

pub use error::{Error, ErrorKind, Result};
