//! Reference chains used by the examples, the tests and the bundled
//! fixture files.

use nalgebra::DMatrix;

use crate::chain::{NcdSpec, TransitionModel};
use crate::error::Result;

/// Seed of the bundled four-block chain.
pub const FOUR_BLOCK_SEED: u64 = 20;
pub const FOUR_BLOCK_SIZES: [usize; 4] = [3, 2, 2, 2];
pub const FOUR_BLOCK_EPSILON: f64 = 0.3;

/// Coupling weights between the blocks of the bundled chain: blocks 0 and
/// 1 form one strongly coupled pair, blocks 2 and 3 a weaker pair, and the
/// two pairs barely talk to each other.
pub fn four_block_weights() -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |a, b| match (a / 2 == b / 2, a / 2) {
        (false, _) => 0.02,
        (true, 0) => 1.0,
        (true, _) => 0.3,
    })
}

/// Nine states in blocks of sizes 3, 2, 2, 2 with hierarchical coupling.
/// Its group count grows 1, 2, 3, 4 at well separated critical values.
pub fn four_block_nine_state() -> Result<(NcdSpec, TransitionModel)> {
    let spec = NcdSpec::random_weighted(
        &FOUR_BLOCK_SIZES,
        &four_block_weights(),
        FOUR_BLOCK_EPSILON,
        FOUR_BLOCK_SEED,
    )?;
    let chain = spec.chain()?;
    Ok((spec, chain))
}

/// Nine states in three blocks `{0,1,2}`, `{3,4,5}`, `{6,7,8}`. Rows 0 and
/// 1 are equal, as are rows 3 and 4 and rows 6, 7 and 8. All entries are
/// positive and column weights differ, so the stationary masses of equal
/// rows differ.
pub fn duplicated_rows_nine_state() -> TransitionModel {
    let pattern = [0, 0, 2, 3, 3, 5, 6, 6, 6];
    let n = 9;
    let mut pi = DMatrix::from_fn(n, n, |i, k| {
        let p = pattern[i];
        if k / 3 == p / 3 {
            1.0 + 0.35 * ((k + 2 * p) % 4) as f64
        } else {
            0.04 + 0.015 * ((3 * k + p) % 5) as f64
        }
    });
    for i in 0..n {
        let s: f64 = pi.row(i).sum();
        for k in 0..n {
            pi[(i, k)] /= s;
        }
    }
    TransitionModel::ergodic(pi).expect("fixture is a valid ergodic chain")
}

/// States `0..n` with the row for state `i` equal to `row`.
pub fn identical_rows(row: &[f64]) -> Result<TransitionModel> {
    TransitionModel::from_rows(&vec![row.to_vec(); row.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary;

    #[test]
    fn four_block_is_ergodic() {
        let (spec, chain) = four_block_nine_state().unwrap();
        assert!(chain.validate().accepted());
        assert_eq!(spec.n(), 9);
    }

    #[test]
    fn duplicated_rows_have_distinct_masses() {
        let chain = duplicated_rows_nine_state();
        assert_eq!(chain.row(0), chain.row(1));
        assert_eq!(chain.row(6), chain.row(8));
        let g = stationary(&chain).unwrap();
        assert!((g[0] - g[1]).abs() > 1e-3);
        assert!((g[6] - g[7]).abs() > 1e-3);
    }
}
