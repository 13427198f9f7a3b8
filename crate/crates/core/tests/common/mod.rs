#![allow(dead_code)]

pub mod gradients;
pub mod market_oracle;
pub mod properties;
