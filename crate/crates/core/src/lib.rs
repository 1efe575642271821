pub mod error;
pub mod geometry;
pub mod graph;
pub mod inflation;
pub mod planner;
pub mod solver;
pub mod tracker;
pub mod scenario;
