pub mod certificates;
pub mod complexity;
pub mod config;
pub mod datagen;
pub mod error;
pub mod evaluate;
pub mod lp;
pub mod model;
pub mod orchestrate;

pub use error::{Error, Result};
