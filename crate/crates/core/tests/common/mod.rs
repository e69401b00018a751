//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod breakers;
pub mod circuits;
pub mod relays;
