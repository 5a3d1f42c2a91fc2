//! `A` as a Hilbert `B`-module: quasi-bases, the Watatani index, the basic
//! construction, the tower and the Stinespring dilation.

mod basic;
mod quasi;
mod stinespring;

pub use basic::{
    basic_construction, jones_tower, next_expectation, BasicConstruction, NextExpectation,
    Stabilization, Tower, TowerLevel, DEFAULT_DIM_BUDGET,
};
pub use quasi::{
    default_generators, gram_operator, index_element, quasi_basis, quasi_basis_from_generators,
    random_generators, reconstruction_residual, GramOperator, IndexElement, QuasiBasis,
    FULL_BASIS_DIM,
};
pub use stinespring::{stinespring, Stinespring};

#[cfg(test)]
mod tests;
