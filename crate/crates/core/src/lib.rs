//! Video annotation pipeline: semantics-aware splitting, multi-teacher
//! caption fan-out, matching-score caption selection, greedy teacher
//! subset selection and the human annotation protocols.

pub mod annotation;
pub mod catalog;
pub mod corpus;
pub mod fanout;
pub mod gateway;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod select;
pub mod splitter;
pub mod teacher_pick;
