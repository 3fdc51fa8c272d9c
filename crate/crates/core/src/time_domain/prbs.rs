use crate::error::{Error, Result};

pub const PRBS7_PERIOD: usize = 127;

/// PRBS7 (x^7 + x^6 + 1) Fibonacci LFSR. Each step emits
/// `bit6 ^ bit5` of the 7-bit state and shifts it in at bit 0.
pub fn prbs7(seed: u8, length: usize) -> Result<Vec<u8>> {
    if seed == 0 || seed > 0x7f {
        return Err(Error::InvalidParameter(format!(
            "PRBS7 seed must be in 1..=127, got {seed}"
        )));
    }
    let mut state = seed;
    Ok((0..length)
        .map(|_| {
            let bit = ((state >> 6) ^ (state >> 5)) & 1;
            state = ((state << 1) | bit) & 0x7f;
            bit
        })
        .collect())
}
