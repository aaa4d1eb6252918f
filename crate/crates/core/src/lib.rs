//! Pure core of the meta-agent MAS engine.
//!
//! Everything here is deterministic and free of IO: the workflow dialect
//! (lexer, parser, validator, canonical form, dialect emitter), the operator
//! catalog and its arity table, exact cost arithmetic, the rectifier trigger
//! predicate, collaborative-tree credit assignment and preference extraction,
//! and the value-scaled preference loss.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

pub mod corpus;
pub mod cto;
pub mod ir;
pub mod loss;
pub mod money;
pub mod operator;
pub mod trigger;

pub use money::Money;
