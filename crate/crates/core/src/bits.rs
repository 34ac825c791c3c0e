//! Small helpers for byte strings and bit strings.

use crate::error::{invalid, Result};

pub fn xor_bytes(a: &[u8], b: &[u8]) -> Result<Vec<u8>> {
    if a.len() != b.len() {
        return Err(invalid(format!(
            "xor of {}-byte and {}-byte strings",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x ^ y).collect())
}

/// Bits of `bytes`, most significant bit of each byte first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |k| (b >> k) & 1 == 1))
        .collect()
}

/// Low `len` bits of `value`, most significant first.
pub fn int_to_bits(value: u64, len: usize) -> Vec<bool> {
    (0..len).rev().map(|k| (value >> k) & 1 == 1).collect()
}

/// Render an m-bit value as a 0/1 string, most significant first.
pub fn bit_string(value: u64, len: usize) -> String {
    int_to_bits(value, len)
        .into_iter()
        .map(|b| if b { '1' } else { '0' })
        .collect()
}

pub fn parity(x: u64) -> bool {
    x.count_ones() % 2 == 1
}
