use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::sphere::FrameGeometry;

use super::ConditionMap;

pub const CONDITION_MAGIC: &[u8; 8] = b"OMNICND1";
const HEADER_LEN: usize = 8 + 4 * 4;

impl ConditionMap {
    /// `OMNICND1`, then `L, C, H, W` as little-endian `u32`, then the values
    /// as little-endian `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data().len());
        out.extend_from_slice(CONDITION_MAGIC);
        for d in self.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in self.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        if bytes.len() < 8 || &bytes[..8] != CONDITION_MAGIC {
            return Err(FormatError::BadMagic { expected: "OMNICND1" });
        }
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let dim = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap());
        let (l, c, h, w) = (dim(0), dim(1), dim(2), dim(3));
        if c == 0 {
            return Err(FormatError::Geometry("C must be positive".into()));
        }
        let geometry = FrameGeometry::new(w, h, l).map_err(|e| FormatError::Geometry(e.to_string()))?;
        let count = [l, c, h, w]
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| FormatError::Geometry(format!("{l}x{c}x{h}x{w} is too large")))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < count {
            return Err(FormatError::Truncated {
                expected: HEADER_LEN + count,
                found: bytes.len(),
            });
        }
        if payload.len() > count {
            return Err(FormatError::TrailingData(payload.len() - count));
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(ConditionMap::from_vec(geometry, c as usize, data).expect("sized from header"))
    }
}

pub fn write_condition_map(map: &ConditionMap, path: &Path) -> Result<()> {
    std::fs::write(path, map.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_condition_map(path: &Path) -> Result<ConditionMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(ConditionMap::from_bytes(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConditionMap {
        let g = FrameGeometry::new(5, 3, 2).unwrap();
        let data = (0..60).map(|i| (i as f32 - 30.0) / 7.0).collect();
        ConditionMap::from_vec(g, 2, data).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..8], b"OMNICND1");
        assert_eq!(bytes.len(), 24 + 4 * 60);
        let back = ConditionMap::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert!(back.data().iter().zip(m.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        let words: Vec<u32> = bytes[8..24]
            .chunks(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(words, [2, 2, 3, 5]);
    }

    #[test]
    fn corruptions_have_distinct_codes() {
        let bytes = sample().to_bytes();
        let mut magic = bytes.clone();
        magic[3] = b'x';
        let mut zero_w = bytes.clone();
        zero_w[20..24].copy_from_slice(&0u32.to_le_bytes());
        let mut long = bytes.clone();
        long.extend_from_slice(&[0, 0]);
        let codes: Vec<u16> = [&magic[..], &zero_w[..], &bytes[..bytes.len() - 1], &long[..]]
            .iter()
            .map(|b| ConditionMap::from_bytes(b).unwrap_err().code())
            .collect();
        assert_eq!(codes, [10, 13, 16, 17]);
    }
}
