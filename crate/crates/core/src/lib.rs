//! Mining, classification and statistics for `if`-condition bug fixes.
//!
//! The pipeline runs in four stages: [`miner`] finds fix revisions and
//! splits their diffs into hunk pairs, [`analyzer`] keeps the pairs that
//! change an `if` condition, [`classifier`] and [`nonfix`] label each change
//! with a boolean-expression fault class, and [`stats`]/[`report`] turn the
//! labels into frequency tables and rank correlations.

pub mod analyzer;
pub mod classifier;
pub mod condition;
pub mod lexer;
pub mod miner;
pub mod mutation;
pub mod nonfix;
pub mod par;
pub mod pipeline;
pub mod report;
pub mod stats;
mod tsv;

pub use classifier::{classify, ClassificationRecord, FaultClass, LrfSubclass};
pub use condition::{parse_condition, ConditionAst, Node};
pub use nonfix::NonFixPattern;
pub use par::Execution;
