//! Building blocks of a data/code availability audit over a scholarly
//! corpus: venue indexes and seeded samples, polite PDF fetching, pattern
//! mining over extracted paragraphs, an append-only label store and
//! venue-level reports.

pub mod corpus;
pub mod digest;
pub mod error;
pub mod fetch;
pub mod labels;
pub mod mine;
pub mod report;
pub mod rng;

pub use error::{CoreError, Result};
