//! Failure classes mapped to process exit codes.

pub const DATA_ERROR: u8 = 1;
pub const USAGE_ERROR: u8 = 2;

#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn data(error: impl Into<anyhow::Error>) -> Exit {
    Exit { code: DATA_ERROR, error: error.into() }
}

pub fn usage(error: impl Into<anyhow::Error>) -> Exit {
    Exit { code: USAGE_ERROR, error: error.into() }
}
