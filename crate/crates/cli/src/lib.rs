//! Driver library behind the `dlfilter` binary: fact files, the bundled
//! benchmark corpus, data generators, and the run/diff/bench pipeline.

pub mod bench;
pub mod corpus;
pub mod facts;
pub mod gen;
pub mod pipeline;
pub mod randprog;
