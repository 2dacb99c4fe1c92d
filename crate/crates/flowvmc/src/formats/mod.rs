//! File formats written and read by the command-line driver.

pub mod csv;
pub mod json;
pub mod svg;
