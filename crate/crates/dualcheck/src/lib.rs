//! Specification-driven conformance testing: validators and interactive
//! testers derived from nondeterministic reference models.

pub mod dualize;
pub mod harness;
pub mod http;
pub mod itree;
pub mod prog;
pub mod qac;
pub mod runner;
pub mod sut;
pub mod symbolic;
pub mod tester;
pub mod transport;
pub mod wire;
