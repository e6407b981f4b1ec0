//! Transaction sources: trace files and synthetic generators.

mod synthetic;
mod trace;

pub use synthetic::{generate, Generator, SyntheticSpec, DEFAULT_ZIPF_EXPONENT};
pub use trace::{load_trace, parse_line, write_trace, TraceReader, TraceRecord};
