//! Standardization and SVD-based principal component analysis of inner
//! simulator outputs.
//!
//! Each of the `L` output columns is centred and scaled to unit sample
//! variance across the `n` runs; the standardized `n x L` matrix is then
//! decomposed as `Y* = U S Γᵀ` and the run-wise scores are `Y* Γ`.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result, SmddError};

/// Default cumulative-variance threshold for choosing the number of PCs.
pub const DEFAULT_PC_THRESHOLD: f64 = 0.90;

const CONSTANT_SD: f64 = 1e-12;

/// `n x L` inner outputs, row `i` holding `h(x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerResponseMatrix {
    n: usize,
    l: usize,
    data: Vec<f64>,
}

impl InnerResponseMatrix {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(invalid_arg("inner simulator must have at least one output"));
        }
        Ok(Self {
            n: 0,
            l,
            data: Vec::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid_arg("no response rows"))?;
        let mut out = Self::new(l)?;
        for r in rows {
            out.push(r)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.l {
            return Err(invalid_arg(format!(
                "response has {} outputs, expected {}",
                row.len(),
                self.l
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SmddError::InvalidData("non-finite inner output".into()));
        }
        self.data.extend_from_slice(row);
        self.n += 1;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.l..(i + 1) * self.l]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.l)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.l, &self.data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.n * self.l || self.l == 0 {
            return Err(invalid_arg("response data length does not match its shape"));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(SmddError::InvalidData("non-finite inner output".into()));
        }
        Ok(())
    }
}

/// Column-standardized responses together with the constants used.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub values: DMatrix<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Original indices of the kept columns.
    pub columns: Vec<usize>,
}

fn column_stats(m: &DMatrix<f64>, c: usize) -> (f64, f64) {
    let col = m.column(c);
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn standardize_columns(m: &DMatrix<f64>, columns: Vec<usize>) -> Standardized {
    let n = m.nrows();
    let mut values = DMatrix::zeros(n, columns.len());
    let mut means = Vec::with_capacity(columns.len());
    let mut sds = Vec::with_capacity(columns.len());
    for (j, &c) in columns.iter().enumerate() {
        let (mean, sd) = column_stats(m, c);
        for i in 0..n {
            values[(i, j)] = (m[(i, c)] - mean) / sd;
        }
        means.push(mean);
        sds.push(sd);
    }
    Standardized {
        values,
        means,
        sds,
        columns,
    }
}

fn check_rows(y: &InnerResponseMatrix) -> Result<()> {
    if y.n() < 3 {
        return Err(invalid_arg(format!(
            "standardization needs at least 3 runs, got {}",
            y.n()
        )));
    }
    y.validate()
}

/// Scales every column to mean 0 and sample variance 1; a constant column
/// is an error naming that column.
pub fn standardize(y: &InnerResponseMatrix) -> Result<Standardized> {
    check_rows(y)?;
    let m = y.to_matrix();
    for c in 0..y.l() {
        if column_stats(&m, c).1 <= CONSTANT_SD {
            return Err(SmddError::DegenerateOutputDimension { column: c });
        }
    }
    Ok(standardize_columns(&m, (0..y.l()).collect()))
}

/// Like [`standardize`], but drops constant columns with a warning.
/// Fails only when every column is constant.
pub fn standardize_dropping_constant(y: &InnerResponseMatrix) -> Result<Standardized> {
    check_rows(y)?;
    let m = y.to_matrix();
    let mut keep = Vec::new();
    for c in 0..y.l() {
        if column_stats(&m, c).1 <= CONSTANT_SD {
            warn!("inner output {c} is constant over the design and is ignored");
        } else {
            keep.push(c);
        }
    }
    if keep.is_empty() {
        return Err(SmddError::DegenerateOutputDimension { column: 0 });
    }
    Ok(standardize_columns(&m, keep))
}

/// Principal components of a standardized response matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub col_means: Vec<f64>,
    pub col_sds: Vec<f64>,
    /// Original output indices behind each standardized column.
    pub columns: Vec<usize>,
    /// `L x L` orthonormal loadings, one component per column.
    pub loadings: DMatrix<f64>,
    /// `min(n, L)` singular values, descending.
    pub singular_values: Vec<f64>,
    /// Share of total variance carried by each component.
    pub variance_fractions: Vec<f64>,
    /// Running sums of `variance_fractions`.
    pub cumulative_fractions: Vec<f64>,
    /// Number of runs the model was fitted on.
    pub n: usize,
    pub l_pc: usize,
}

impl PcaModel {
    pub fn l(&self) -> usize {
        self.loadings.nrows()
    }

    /// Largest admissible component count, `min(L, n - 1)`.
    pub fn max_components(&self) -> usize {
        self.l().min(self.n.saturating_sub(1)).max(1)
    }

    /// Scores of one raw output vector (`L` original outputs).
    pub fn project(&self, raw: &[f64], l_pc: usize) -> Result<Vec<f64>> {
        if l_pc == 0 || l_pc > self.l() {
            return Err(invalid_arg(format!("cannot project onto {l_pc} components")));
        }
        let z: Vec<f64> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                raw.get(c)
                    .map(|v| (v - self.col_means[j]) / self.col_sds[j])
                    .ok_or_else(|| invalid_arg("raw output vector is too short"))
            })
            .collect::<Result<_>>()?;
        Ok((0..l_pc)
            .map(|p| z.iter().enumerate().map(|(j, v)| v * self.loadings[(j, p)]).sum())
            .collect())
    }
}

/// SVD of the standardized matrix; selects components at the default threshold.
pub fn fit_pca(standardized: &Standardized) -> Result<PcaModel> {
    let y = &standardized.values;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SmddError::InvalidData("non-finite standardized value".into()));
    }
    let (n, l) = y.shape();
    if n == 0 || l == 0 {
        return Err(invalid_arg("empty response matrix"));
    }
    // zero rows leave YᵀY unchanged but make the right factor square
    let padded = if n < l {
        let mut p = DMatrix::zeros(l, l);
        p.view_mut((0, 0), (n, l)).copy_from(y);
        p
    } else {
        y.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| SmddError::InvalidData("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut loadings = DMatrix::zeros(l, l);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = v_t.row(src).iter().copied().collect();
        let lead = col
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        if lead < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (i, v) in col.into_iter().enumerate() {
            loadings[(i, dst)] = v;
        }
    }
    let singular_values: Vec<f64> = order
        .iter()
        .take(n.min(l))
        .map(|&i| svd.singular_values[i].max(0.0))
        .collect();
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(SmddError::InvalidData("response matrix has no variance".into()));
    }
    let variance_fractions: Vec<f64> = singular_values.iter().map(|s| s * s / total).collect();
    let cumulative_fractions: Vec<f64> = variance_fractions
        .iter()
        .scan(0.0, |acc, f| {
            *acc += f;
            Some(*acc)
        })
        .collect();
    let mut model = PcaModel {
        col_means: standardized.means.clone(),
        col_sds: standardized.sds.clone(),
        columns: standardized.columns.clone(),
        loadings,
        singular_values,
        variance_fractions,
        cumulative_fractions,
        n,
        l_pc: 1,
    };
    model.l_pc = select_num_pcs(&model, DEFAULT_PC_THRESHOLD);
    Ok(model)
}

/// Smallest count whose cumulative variance share exceeds `threshold`,
/// capped at `min(L, n - 1)`.
pub fn select_num_pcs(model: &PcaModel, threshold: f64) -> usize {
    select_from_fractions(&model.variance_fractions, threshold, model.max_components())
}

pub(crate) fn select_from_fractions(fractions: &[f64], threshold: f64, cap: usize) -> usize {
    let mut acc = 0.0;
    for (i, f) in fractions.iter().enumerate() {
        acc += f;
        if acc > threshold {
            return (i + 1).min(cap).max(1);
        }
    }
    cap.max(1)
}

/// Run-wise PC scores, `n x l_pc`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcScores {
    pub scores: DMatrix<f64>,
}

impl PcScores {
    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    pub fn l_pc(&self) -> usize {
        self.scores.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.scores.row(i).iter().copied().collect()
    }

    pub fn column(&self, p: usize) -> Vec<f64> {
        self.scores.column(p).iter().copied().collect()
    }
}

/// Projects the standardized responses onto the first `l_pc` loadings.
pub fn scores(model: &PcaModel, standardized: &DMatrix<f64>, l_pc: usize) -> Result<PcScores> {
    if l_pc == 0 || l_pc > model.l() {
        return Err(invalid_arg(format!(
            "l_pc must lie in 1..={}, got {l_pc}",
            model.l()
        )));
    }
    if standardized.ncols() != model.l() {
        return Err(invalid_arg("standardized matrix does not match the model"));
    }
    Ok(PcScores {
        scores: standardized * model.loadings.columns(0, l_pc),
    })
}
