//! Assouad and lower dimensions of finite metric spaces, nested cube systems
//! and the doubling measures built on them.

pub mod analysis;
pub mod cubes;
pub mod dimension;
pub mod error;
pub mod generators;
pub mod mean_cycle;
pub mod measures;
pub mod metric;
pub mod rational;

pub use error::{Error, Result};
pub use rational::Rational;
