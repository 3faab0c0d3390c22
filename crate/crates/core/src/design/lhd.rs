use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::DesignMatrix;
use crate::error::{invalid_arg, Result};
use crate::rng::{rng_from_seed, Rng};

/// Placement of a point inside its Latin hypercube cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelStyle {
    /// Cell centre `(i - 0.5)/n`.
    #[default]
    Midpoint,
    /// Uniform draw inside the cell.
    RandomInCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhdDesign {
    pub design: DesignMatrix,
    pub style: LevelStyle,
}

impl LhdDesign {
    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn k(&self) -> usize {
        self.design.k()
    }

    pub fn into_design(self) -> DesignMatrix {
        self.design
    }
}

/// Random Latin hypercube of `n` runs in `k` dimensions.
pub fn generate_lhd(n: usize, k: usize, style: LevelStyle, seed: u64) -> Result<LhdDesign> {
    lhd_with_rng(n, k, style, &mut rng_from_seed(seed))
}

pub fn lhd_with_rng(n: usize, k: usize, style: LevelStyle, rng: &mut Rng) -> Result<LhdDesign> {
    if n < 2 {
        return Err(invalid_arg(format!("an LHD needs at least 2 runs, got {n}")));
    }
    if k < 1 {
        return Err(invalid_arg("an LHD needs at least one dimension"));
    }
    let mut data = vec![0.0; n * k];
    let mut perm: Vec<usize> = (0..n).collect();
    for c in 0..k {
        perm.shuffle(rng);
        for (i, &level) in perm.iter().enumerate() {
            data[i * k + c] = cell_value(level, n, style, rng);
        }
    }
    Ok(LhdDesign {
        design: DesignMatrix::from_row_major(n, k, data)?,
        style,
    })
}

/// Value for zero-based `level` on an `cells`-cell grid.
pub(crate) fn cell_value(level: usize, cells: usize, style: LevelStyle, rng: &mut Rng) -> f64 {
    let offset = match style {
        LevelStyle::Midpoint => 0.5,
        LevelStyle::RandomInCell => rng.random::<f64>(),
    };
    (level as f64 + offset) / cells as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::has_lhd_projection;
    use crate::error::SmddError;

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(matches!(
            generate_lhd(1, 2, LevelStyle::Midpoint, 0),
            Err(SmddError::InvalidArgument(_))
        ));
        assert!(generate_lhd(3, 0, LevelStyle::Midpoint, 0).is_err());
    }

    #[test]
    fn four_run_midpoint_column_is_forced() {
        let lhd = generate_lhd(4, 1, LevelStyle::Midpoint, 11).unwrap();
        let mut col = lhd.design.column(0);
        col.sort_by(f64::total_cmp);
        assert_eq!(col, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn projections_occupy_distinct_cells() {
        for seed in 0..20 {
            for style in [LevelStyle::Midpoint, LevelStyle::RandomInCell] {
                let lhd = generate_lhd(10, 3, style, seed).unwrap();
                // histogram oracle: count points per cell in each column
                for c in 0..3 {
                    let mut hist = [0usize; 10];
                    for v in lhd.design.column(c) {
                        hist[(v * 10.0) as usize] += 1;
                    }
                    assert!(hist.iter().all(|&h| h == 1), "column {c}: {hist:?}");
                }
                assert!(has_lhd_projection(&lhd.design));
            }
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_lhd(15, 4, LevelStyle::RandomInCell, 3).unwrap();
        let b = generate_lhd(15, 4, LevelStyle::RandomInCell, 3).unwrap();
        assert_eq!(a, b);
    }
}
