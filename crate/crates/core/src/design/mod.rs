//! Design matrices on the unit hypercube, Latin hypercube construction,
//! maximin optimization and sliced candidate sets.

mod anneal;
mod lhd;
mod slhd;

pub use anneal::{optimize_lhd, optimize_mmlhd, AnnealOptions, DEFAULT_COOLING};
pub use lhd::{generate_lhd, lhd_with_rng, LevelStyle, LhdDesign};
pub use slhd::{generate_slhd, slhd_with_rng, SlicedCandidateSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result, SmddError};

/// Minimum admissible pairwise distance between design points.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Default exponent of the φ_q criterion.
pub const DEFAULT_Q: f64 = 15.0;

/// `n` points in `[0,1]^k`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Builds a design from row-major data, checking the unit-cube and
    /// distinct-rows invariants.
    pub fn from_row_major(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        let design = Self::from_row_major_unchecked(n, k, data)?;
        design.validate()?;
        Ok(design)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(invalid_arg("rows have unequal lengths"));
        }
        Self::from_row_major(n, k, rows.concat())
    }

    /// A design with no rows yet.
    pub fn empty(k: usize) -> Result<Self> {
        Self::from_row_major_unchecked(0, k, Vec::new())
    }

    pub(crate) fn from_row_major_unchecked(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(invalid_arg("design dimension must be at least 1"));
        }
        if data.len() != n * k {
            return Err(invalid_arg(format!(
                "expected {} values for a {n}x{k} design, got {}",
                n * k,
                data.len()
            )));
        }
        Ok(Self { n, k, data })
    }

    /// Re-checks every invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.n * self.k {
            return Err(invalid_arg("design data length does not match its shape"));
        }
        if let Some(v) = self
            .data
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(invalid_arg(format!("design entry {v} outside [0,1]")));
        }
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if sq_dist(self.row(i), self.row(j)) < DUPLICATE_TOLERANCE * DUPLICATE_TOLERANCE {
                    return Err(SmddError::DegenerateDistance(format!(
                        "design rows {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.k)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Appends a point, rejecting duplicates and points outside the cube.
    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.k {
            return Err(invalid_arg(format!(
                "point has dimension {}, design has {}",
                point.len(),
                self.k
            )));
        }
        if point.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(invalid_arg("point outside [0,1]^K"));
        }
        if self.min_distance_to(point) < DUPLICATE_TOLERANCE {
            return Err(SmddError::DegenerateDistance(
                "point duplicates an existing design point".into(),
            ));
        }
        self.data.extend_from_slice(point);
        self.n += 1;
        Ok(())
    }

    /// Removes row `i`, keeping the order of the others.
    pub fn remove_row(&mut self, i: usize) -> Result<Vec<f64>> {
        if i >= self.n {
            return Err(invalid_arg(format!("row {i} out of range")));
        }
        let row: Vec<f64> = self.data.drain(i * self.k..(i + 1) * self.k).collect();
        self.n -= 1;
        Ok(row)
    }

    /// Smallest Euclidean distance from `point` to any row (infinity when empty).
    pub fn min_distance_to(&self, point: &[f64]) -> f64 {
        self.rows()
            .map(|r| sq_dist(r, point))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// All `n(n-1)/2` pairwise Euclidean distances, in `(i<j)` row order.
    pub fn pairwise_distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push(sq_dist(self.row(i), self.row(j)).sqrt());
            }
        }
        out
    }

    /// φ_q over all pairwise distances.
    pub fn phi_q(&self, q: f64) -> Result<f64> {
        phi_q(&self.pairwise_distances(), q)
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.k);
        for &i in idx {
            if i >= self.n {
                return Err(invalid_arg(format!("row {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::from_row_major_unchecked(idx.len(), self.k, data)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid_arg(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(sq_dist(a, b).sqrt())
}

/// The φ_q criterion `(Σ d_i^{-q})^{1/q}`.
///
/// Evaluated as `(1/d_min) (Σ (d_min/d_i)^q)^{1/q}` so large `q` does not
/// overflow. An empty list gives 0.
pub fn phi_q(distances: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(invalid_arg(format!("q must be positive, got {q}")));
    }
    let mut d_min = f64::INFINITY;
    for &d in distances {
        if !(d > 0.0) {
            return Err(SmddError::DegenerateDistance(format!(
                "non-positive distance {d}"
            )));
        }
        d_min = d_min.min(d);
    }
    if distances.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = distances.iter().map(|&d| (d_min / d).powf(q)).sum();
    Ok(s.powf(1.0 / q) / d_min)
}

/// Checks the one-dimensional projection property on an `n`-cell grid:
/// every column occupies each cell `[(i-1)/n, i/n)` exactly once.
pub fn has_lhd_projection(design: &DesignMatrix) -> bool {
    has_projection_on_grid(design, design.n())
}

/// Projection check on an arbitrary number of cells.
pub fn has_projection_on_grid(design: &DesignMatrix, cells: usize) -> bool {
    if cells == 0 {
        return design.n() == 0;
    }
    (0..design.k()).all(|c| {
        let mut seen = vec![false; cells];
        let mut count = 0;
        for r in design.rows() {
            let cell = ((r[c] * cells as f64).floor() as usize).min(cells - 1);
            if seen[cell] {
                return false;
            }
            seen[cell] = true;
            count += 1;
        }
        count == cells
    })
}
