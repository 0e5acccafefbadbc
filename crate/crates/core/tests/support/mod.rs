#![allow(dead_code)]

pub mod backtrack;
pub mod server;
