pub mod classify;
pub mod encode;
pub mod gen;
pub mod resolution;
pub mod train;
