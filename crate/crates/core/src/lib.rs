//! Equilibria and simulation of search-and-bargaining markets with middlemen
//! on producer–middleman–consumer trading networks.

pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod network;
pub mod pattern;
pub mod payoffs;
pub mod simulate;
pub mod sweep;

pub use error::{Error, Result};
