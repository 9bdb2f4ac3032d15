pub mod amenability;
pub mod catalog;
pub mod cli;
pub mod compatibility;
pub mod conditioning;
pub mod domain;
pub mod expr;
pub mod fp_sim;
pub mod interval;
pub mod jet;
pub mod metric;
pub mod real;
pub mod roots;
pub mod scalar;
pub mod stability;
