#![allow(dead_code)]
pub mod chain;
pub mod cli;
pub mod cycles;
pub mod fk;
pub mod toys;
