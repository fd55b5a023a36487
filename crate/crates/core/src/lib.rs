pub mod error;
pub mod estimate;
pub mod linalg;
pub mod rng;
pub mod sets;
pub mod cones;
pub mod elemental;
pub mod meet;
pub mod transversal;
pub mod solvers;
pub mod fixtures;
