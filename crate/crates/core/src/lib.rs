pub mod delay;
pub mod expr;
pub mod graph;
pub mod metric;
pub mod model;
pub mod par;
pub mod region;
pub mod report;
pub mod sim;
pub mod synth;
pub mod verify;
