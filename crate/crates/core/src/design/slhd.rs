use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::anneal::{anneal_sliced, AnnealOptions};
use super::lhd::cell_value;
use super::{DesignMatrix, LevelStyle, LhdDesign};
use crate::error::{invalid_arg, Result};
use crate::rng::{rng_from_seed, Rng};

/// `t` slices of `m` points each; the union is an LHD on `t*m` cells and
/// every slice is an LHD on `m` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicedCandidateSet {
    pub slices: Vec<LhdDesign>,
}

impl SlicedCandidateSet {
    pub fn t(&self) -> usize {
        self.slices.len()
    }

    pub fn m(&self) -> usize {
        self.slices.first().map_or(0, LhdDesign::n)
    }

    pub fn k(&self) -> usize {
        self.slices.first().map_or(0, LhdDesign::k)
    }

    pub fn len(&self) -> usize {
        self.t() * self.m()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points, slice by slice.
    pub fn union(&self) -> DesignMatrix {
        let data: Vec<f64> = self
            .slices
            .iter()
            .flat_map(|s| s.design.as_slice().iter().copied())
            .collect();
        DesignMatrix::from_row_major_unchecked(self.len(), self.k(), data)
            .expect("slices share one dimension")
    }

    /// Points as rows, slice by slice.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.slices.iter().flat_map(|s| s.design.to_rows()).collect()
    }
}

/// Sliced maximin LHD with midpoint levels on the fine grid.
pub fn generate_slhd(t: usize, m: usize, k: usize, seed: u64) -> Result<SlicedCandidateSet> {
    slhd_with_rng(
        t,
        m,
        k,
        LevelStyle::Midpoint,
        AnnealOptions::for_dimension(k),
        &mut rng_from_seed(seed),
    )
}

/// Permutation construction: each slice draws a coarse level per row from a
/// permutation of `0..m`; the `t` slices sharing coarse level `j` split the fine
/// levels `j*t..(j+1)*t` by a random permutation. Slice-wise φ_q annealing
/// follows.
pub fn slhd_with_rng(
    t: usize,
    m: usize,
    k: usize,
    style: LevelStyle,
    opts: AnnealOptions,
    rng: &mut Rng,
) -> Result<SlicedCandidateSet> {
    if t < 1 {
        return Err(invalid_arg("a sliced design needs at least one slice"));
    }
    if m < 2 {
        return Err(invalid_arg(format!("slices need at least 2 points, got {m}")));
    }
    if k < 1 {
        return Err(invalid_arg("a sliced design needs at least one dimension"));
    }
    let total = t
        .checked_mul(m)
        .filter(|tot| tot.checked_mul(k).is_some())
        .ok_or_else(|| invalid_arg("slice count times slice size overflows"))?;

    let mut data = vec![0.0; total * k];
    let mut coarse: Vec<usize> = (0..m).collect();
    let mut fine_offset: Vec<usize> = (0..t).collect();
    for c in 0..k {
        // fine[s][j] = fine level used by slice s at coarse level j
        let mut fine = vec![vec![0usize; m]; t];
        for j in 0..m {
            fine_offset.shuffle(rng);
            for s in 0..t {
                fine[s][j] = j * t + fine_offset[s];
            }
        }
        for (s, fine_s) in fine.iter().enumerate() {
            coarse.shuffle(rng);
            for (r, &j) in coarse.iter().enumerate() {
                data[(s * m + r) * k + c] = cell_value(fine_s[j], total, style, rng);
            }
        }
    }

    let slice_of: Vec<usize> = (0..total).map(|r| r / m).collect();
    let data = anneal_sliced(data, k, &slice_of, opts, rng)?;

    let slices = data
        .chunks_exact(m * k)
        .map(|chunk| {
            Ok(LhdDesign {
                design: DesignMatrix::from_row_major(m, k, chunk.to_vec())?,
                style,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let set = SlicedCandidateSet { slices };
    set.union().validate()?;
    Ok(set)
}
