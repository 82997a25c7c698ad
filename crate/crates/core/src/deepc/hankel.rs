use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{singular_values, RANK_TOL};

/// Block Hankel matrix of depth `depth`: column `j` stacks
/// `seq[j], seq[j+1], .., seq[j+depth-1]`.
pub fn build_hankel(seq: &[Vec<f64>], depth: usize) -> Result<DMatrix<f64>> {
    let len = seq.len();
    if depth == 0 || len < depth {
        return Err(Error::TooShort { len, depth });
    }
    let dim = seq[0].len();
    if seq.iter().any(|v| v.len() != dim) {
        return Err(Error::dims("sequence entries have different lengths"));
    }
    let cols = len - depth + 1;
    Ok(DMatrix::from_fn(dim * depth, cols, |r, c| seq[c + r / dim][r % dim]))
}

/// Rank diagnostics of a depth-`order` Hankel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationReport {
    pub persistently_exciting: bool,
    pub rank: usize,
    pub rows: usize,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
}

/// Whether `seq` is persistently exciting of order `order`, i.e. its Hankel
/// matrix of that depth has full row rank.
pub fn check_persistent_excitation(seq: &[Vec<f64>], order: usize) -> ExcitationReport {
    let rows = seq.first().map_or(0, |v| v.len()) * order;
    let Ok(h) = build_hankel(seq, order) else {
        return ExcitationReport {
            persistently_exciting: false,
            rank: 0,
            rows,
            smallest_singular_value: 0.0,
            largest_singular_value: 0.0,
        };
    };
    let s = singular_values(&h);
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = if smax > 0.0 { s.iter().filter(|&&v| v > RANK_TOL * smax).count() } else { 0 };
    // A wide matrix has `rows` singular values; a tall one is rank-deficient by shape.
    let smallest = if s.len() >= rows { s[rows - 1] } else { 0.0 };
    ExcitationReport {
        persistently_exciting: rows > 0 && rank == rows,
        rank,
        rows,
        smallest_singular_value: smallest,
        largest_singular_value: smax,
    }
}
