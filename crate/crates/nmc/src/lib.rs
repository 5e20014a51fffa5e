pub mod autodiff;
pub mod distributions;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod engine;
pub mod proposers;
