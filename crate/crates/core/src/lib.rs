pub mod cylinder;
pub mod fields;
pub mod lattice;
pub mod solver;
pub mod specfun;
