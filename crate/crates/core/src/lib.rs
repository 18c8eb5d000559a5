//! Interactive, feedback-driven extractive summarization of document clusters.
//!
//! Users (or simulated users) label concepts with accept/reject actions,
//! importance weights and confidence; each round the summary is re-solved as
//! a budgeted maximization of signed concept weight.

pub mod concepts;
pub mod corpus;
pub mod feedback;
pub mod harness;
pub mod optimizer;
pub mod oracle;
pub mod ranking;
pub mod rouge;
pub mod session;
