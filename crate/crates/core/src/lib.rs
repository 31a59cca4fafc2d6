pub mod cli;
pub mod error;
pub mod estimation;
pub mod gaussian;
pub mod measures;
pub mod oracle;
pub mod render;
