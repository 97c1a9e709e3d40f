//! Conflict-aware replicated data types.
//!
//! A CARD is a replicated store equipped with parametric effect classes and
//! two-state *consistency guards* relating the (never materialized) global
//! store to a replica's local view. This crate implements:
//!
//! * a typed formula language over store pairs, with an SMT-LIB2 solver
//!   backend and an independent bounded-enumeration backend ([`logic`]);
//! * CARD definitions with symbolic effect denotations ([`card`]);
//! * conflict inference: immediate accords, weakest consistency
//!   preconditions, and the transitive-accord fixed point ([`inference`]);
//! * the abstract execution model: well-formedness, carefulness, event
//!   specifications, invariants ([`execution`]);
//! * the operation calculus with queries and emits, its refinement type
//!   checker, and the operation execution rules ([`lambdaq`]);
//! * a deterministic seeded replica-network simulator whose locking is
//!   driven by the inferred accord sets ([`replica_sim`]);
//! * the benchmark corpus and its bounded-search oracle ([`corpus`]);
//! * the text formats for cards, operations, and scenarios ([`parse`]).

pub mod card;
pub mod corpus;
pub mod execution;
pub mod inference;
pub mod lambdaq;
pub mod logic;
pub mod parse;
pub mod replica_sim;
