//! Bit-exact text encoding of `f64` arrays used by the model files:
//! little-endian IEEE-754 bytes, base64 (standard alphabet, padded).

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

pub(crate) const F64_ENCODING: &str = "f64-le-base64";

pub(crate) fn encode_f64(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

/// Decodes exactly `len` values.
pub(crate) fn decode_f64(text: &str, len: usize) -> Result<Vec<f64>, String> {
    let bytes = B64.decode(text).map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() != len * 8 {
        return Err(format!(
            "expected {len} values, found {} bytes",
            bytes.len()
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let v = [0.0, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, -1e308, 5e-324];
        let back = decode_f64(&encode_f64(&v), v.len()).unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(decode_f64(&encode_f64(&v), 5).is_err());
        assert!(decode_f64("***", 1).is_err());
    }
}
