//! Agent-centric HDDL planning and learning engine.
//!
//! The crate parses agent-centric HDDL domains/problems, lints and adapts
//! standard HDDL files to the agent-centric protocol, grounds them, exposes
//! them as deterministic multi-agent step environments, plans joint action
//! hierarchies with a policy-guided decomposition search, and trains/evaluates
//! discrete policies against those environments.

pub mod agent;
pub mod encoding;
pub mod env;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod ground;
pub mod lint;
pub mod model;
pub mod nn;
pub mod parser;
pub mod planner;
pub mod policy;
pub mod printer;
pub mod sexpr;
pub mod train;
