#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod cli;
pub mod linsolve;
pub mod mesh;
pub mod potentials;
pub mod solver;
pub mod sparse;
pub mod verification;
