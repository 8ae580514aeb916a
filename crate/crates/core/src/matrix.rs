//! Dense and k-pruned sparse score matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Square matrix of pair scores `m[i][j]` between statement `i` and proof
/// `j`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { n, values }
    }

    /// Builds from `n*n` row-major values.
    pub fn from_values(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n, "score matrix must be square");
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Flat binary form for debugging dumps: `n` as u64 little-endian, then
    /// the `n*n` row-major values as f64 little-endian.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.values.len());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self, MatrixFormatError> {
        if bytes.len() < 8 {
            return Err(MatrixFormatError::Truncated);
        }
        let n = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let expected = 8 + 8 * n * n;
        if bytes.len() != expected {
            return Err(MatrixFormatError::LengthMismatch {
                expected,
                actual: bytes.len(),
            });
        }
        let values = bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { n, values })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixFormatError {
    Truncated,
    LengthMismatch { expected: usize, actual: usize },
}

impl fmt::Display for MatrixFormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixFormatError::Truncated => write!(f, "matrix file shorter than its header"),
            MatrixFormatError::LengthMismatch { expected, actual } => {
                write!(f, "matrix file has {actual} bytes, expected {expected}")
            }
        }
    }
}

impl core::error::Error for MatrixFormatError {}

/// Row-pruned score matrix: each row keeps only its `min(k, n)` largest
/// entries, stored as `(column, score)` sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseScoreMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseScoreMatrix {
    pub(crate) fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert_eq!(rows.len(), n);
        Self { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Kept `(column, score)` entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Score of the kept edge `(i, j)`, if it was kept.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .ok()
            .map(|pos| self.rows[i][pos].1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_binary_format() {
        let m = ScoreMatrix::from_fn(3, |i, j| (i * 3 + j) as f64 * 0.5 - 1.0);
        let bytes = m.to_le_bytes();
        assert_eq!(bytes.len(), 8 + 8 * 9);
        let back = ScoreMatrix::from_le_bytes(&bytes).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn binary_format_rejects_bad_lengths() {
        let m = ScoreMatrix::zeros(2);
        let mut bytes = m.to_le_bytes();
        bytes.pop();
        assert!(ScoreMatrix::from_le_bytes(&bytes).is_err());
        assert!(ScoreMatrix::from_le_bytes(&[1, 2, 3]).is_err());
    }
}
