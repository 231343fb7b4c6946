//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod datalog;
pub mod dbscan;
pub mod edl;
