pub mod config;
pub mod counting;
pub mod expectation;
pub mod fock;
pub mod operator;
pub mod spectral;
pub mod scan;
pub mod io;
pub mod cli;
