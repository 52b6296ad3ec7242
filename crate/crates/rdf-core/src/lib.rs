//! Decision procedure for RDF⁺: quantifier-free formulas over the reals and
//! continuously differentiable real functions.

pub mod ast;
pub mod parser;
pub mod select;
pub mod normal;
pub mod tarski;
pub mod elim;
pub mod smt;
pub mod check;
pub mod corpus;
pub mod elastic;
pub mod witness;
