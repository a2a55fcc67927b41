#![allow(dead_code)]

pub mod channel_oracle;
pub mod ged_oracle;
pub mod search_oracle;
