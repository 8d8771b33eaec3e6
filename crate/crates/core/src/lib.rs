pub mod geometry;
pub mod dynamics;
pub mod model;
pub mod sensor;
pub mod binding;
pub mod hypotheses;
pub mod harness;
