//! Command-line tools and the HTTP/JSON service over a balcube warehouse.

pub mod cli;
pub mod service;
