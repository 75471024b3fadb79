pub mod data;
pub mod graph;
pub mod lattice;
pub mod pipeline;
pub mod registry;
pub mod scm;
pub mod stats;
