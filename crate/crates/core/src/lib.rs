//! Processing-element design space exploration for coarse-grained
//! reconfigurable arrays.
//!
//! Frequent subgraphs are mined from application dataflow graphs
//! ([`miner`]), ranked by how many non-overlapping occurrences they have
//! ([`mis`]), and merged into a single reconfigurable datapath ([`merger`]).
//! The datapath becomes a PE specification ([`pe_spec`]) that applications
//! are mapped onto ([`mapper`]), simulated ([`sim`]) and costed ([`cost`]).
//! [`pipeline`] runs all stages from a TOML config.

pub mod canon;
pub mod clique;
pub mod cost;
pub mod datapath;
pub mod fixtures;
pub mod graph;
pub mod iso;
pub mod mapper;
pub mod merger;
pub mod miner;
pub mod mis;
pub mod op;
pub mod pe_spec;
pub mod sim;
pub mod pipeline;
