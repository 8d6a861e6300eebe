//! Minimum sufficient control sets in network coordination games.
//!
//! Players on a graph choose 0 or 1 and earn one unit per agreeing neighbor.
//! A *control set* is a group of players pinned to 1; it is *sufficient* when
//! asynchronous best-response dynamics then reach all-ones almost surely from
//! any start. This crate decides sufficiency in linear time through contagion
//! closure ([`cascade`]), searches for small sufficient sets with a
//! reversible Markov chain ([`chain`]), and checks both against exhaustive
//! enumeration on small graphs ([`oracle`]).
//!
//! ```
//! use netcoord::cascade::{is_valid, ControlSet};
//! use netcoord::chain::{run_search, ChainParams, Variant};
//! use netcoord::graph::gen_clique;
//!
//! let k5 = gen_clique(5).unwrap();
//! assert!(!is_valid(&k5, &ControlSet::new([0])));
//! assert!(is_valid(&k5, &ControlSet::new([0, 1])));
//!
//! let params = ChainParams { epsilon: 0.2, budget: 500, variant: Variant::Jump, seed: 1 };
//! let record = run_search(&k5, &params).unwrap();
//! assert!(is_valid(&k5, &record.best_set()));
//! ```

pub mod cascade;
pub mod chain;
pub mod experiment;
pub mod game;
pub mod graph;
pub mod oracle;

pub use cascade::ControlSet;
pub use game::Configuration;
pub use graph::Graph;
