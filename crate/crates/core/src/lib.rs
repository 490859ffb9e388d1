//! Simulation of cavity-decay entanglement concentration: exact few-body
//! dynamics, closed forms, quadrature over click times and quantum-jump
//! trajectories. See the book in `book/` for a walkthrough.

pub mod dynamics;
pub mod error;
pub mod protocol;
pub mod qcore;
pub mod quadrature;
pub mod trajectories;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hilbert-spaces.md")]
    mod hilbert_spaces {}
    #[doc = include_str!("../../../book/src/conditional-evolution.md")]
    mod conditional_evolution {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
