//! Simulated annealing of φ_q over within-column level swaps.
//!
//! A swap exchanges the values of two rows in one column, which keeps every
//! one-dimensional projection intact. For sliced designs both rows come from
//! the same slice, so the slice structure survives as well. The objective is
//! φ_q of the whole design, or for `t > 1` slices the average
//! `(φ_q(union) + mean_s φ_q(slice_s)) / 2`.

use rand::Rng as _;

use super::{lhd_with_rng, sq_dist, LevelStyle, LhdDesign, DEFAULT_Q};
use crate::error::{invalid_arg, Result};
use crate::rng::{rng_from_seed, Rng};

pub const DEFAULT_COOLING: f64 = 0.95;

/// Number of geometric cooling stages spread over the swap budget.
const COOLING_STAGES: usize = 100;
/// Annealing restarts from the incumbent within one budget.
const REHEAT_CYCLES: usize = 4;
/// Proposals drawn to calibrate the starting temperature.
const CALIBRATION_MOVES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealOptions {
    pub q: f64,
    /// Total number of proposed swaps.
    pub budget: usize,
    pub cooling: f64,
}

impl AnnealOptions {
    /// `q = 15`, `10^4 * k` swaps, cooling ratio 0.95.
    pub fn for_dimension(k: usize) -> Self {
        Self {
            q: DEFAULT_Q,
            budget: 10_000 * k.max(1),
            cooling: DEFAULT_COOLING,
        }
    }
}

/// Random midpoint LHD followed by φ_q annealing.
pub fn optimize_mmlhd(n: usize, k: usize, q: f64, budget: usize, seed: u64) -> Result<LhdDesign> {
    let mut rng = rng_from_seed(seed);
    let start = lhd_with_rng(n, k, LevelStyle::Midpoint, &mut rng)?;
    optimize_lhd(
        start,
        AnnealOptions {
            q,
            budget,
            cooling: DEFAULT_COOLING,
        },
        &mut rng,
    )
}

/// Anneals an existing LHD; the result never has a larger φ_q than the input.
pub fn optimize_lhd(lhd: LhdDesign, opts: AnnealOptions, rng: &mut Rng) -> Result<LhdDesign> {
    let LhdDesign { design, style } = lhd;
    let (n, k) = (design.n(), design.k());
    let data = anneal_sliced(design.as_slice().to_vec(), k, &vec![0; n], opts, rng)?;
    Ok(LhdDesign {
        design: super::DesignMatrix::from_row_major(n, k, data)?,
        style,
    })
}

/// Anneals a row-major `n x k` point set whose rows are partitioned into
/// slices by `slice_of`; returns the best point set visited.
pub(crate) fn anneal_sliced(
    data: Vec<f64>,
    k: usize,
    slice_of: &[usize],
    opts: AnnealOptions,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if !(opts.q > 0.0) {
        return Err(invalid_arg(format!("q must be positive, got {}", opts.q)));
    }
    if !(opts.cooling > 0.0 && opts.cooling < 1.0) {
        return Err(invalid_arg("cooling ratio must lie in (0,1)"));
    }
    let mut state = PhiState::new(data, k, slice_of, opts.q);
    if opts.budget == 0 || state.movable.is_empty() {
        return Ok(state.data);
    }

    let mut current = state.objective(state.union_sum, &state.slice_sums);
    let mut best = current;
    let mut best_data = state.data.clone();

    // Reheating cycles: each restarts from the incumbent with a freshly
    // calibrated temperature, so deep local optima can still be left.
    let cycle_len = (opts.budget / REHEAT_CYCLES).max(1);
    let per_stage = (cycle_len / COOLING_STAGES).max(1);
    let mut temperature = 0.0;
    let mut accepted_since_refresh = 0usize;

    for step in 0..opts.budget {
        if step % cycle_len == 0 {
            if step > 0 {
                state.reset(&best_data);
                current = best;
                accepted_since_refresh = 0;
            }
            temperature = state.initial_temperature(current, rng);
        } else if step % per_stage == 0 {
            temperature *= opts.cooling;
        }
        let mv = state.random_move(rng);
        let (du, ds) = state.deltas(&mv);
        let candidate = state.objective_after(du, mv.slice, ds);
        let delta = candidate - current;
        let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp();
        if !accept {
            continue;
        }
        state.apply(&mv);
        accepted_since_refresh += 1;
        if accepted_since_refresh >= state.n {
            state.refresh_sums();
            accepted_since_refresh = 0;
        } else {
            state.union_sum += du;
            state.slice_sums[mv.slice] += ds;
        }
        current = state.objective(state.union_sum, &state.slice_sums);
        if current < best {
            best = current;
            best_data.copy_from_slice(&state.data);
        }
    }
    Ok(best_data)
}

struct Move {
    slice: usize,
    col: usize,
    i: usize,
    j: usize,
}

struct PhiState {
    n: usize,
    k: usize,
    half_q: f64,
    q: f64,
    data: Vec<f64>,
    slice_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Slices with at least two rows.
    movable: Vec<usize>,
    d2: Vec<f64>,
    inv: Vec<f64>,
    union_sum: f64,
    slice_sums: Vec<f64>,
}

impl PhiState {
    fn new(data: Vec<f64>, k: usize, slice_of: &[usize], q: f64) -> Self {
        let n = slice_of.len();
        let t = slice_of.iter().copied().max().map_or(1, |m| m + 1);
        let mut members = vec![Vec::new(); t];
        for (r, &s) in slice_of.iter().enumerate() {
            members[s].push(r);
        }
        let movable = (0..t).filter(|&s| members[s].len() >= 2).collect();
        let mut d2 = vec![0.0; n * n];
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = sq_dist(&data[i * k..(i + 1) * k], &data[j * k..(j + 1) * k]);
                let w = v.powf(-q / 2.0);
                d2[i * n + j] = v;
                d2[j * n + i] = v;
                inv[i * n + j] = w;
                inv[j * n + i] = w;
            }
        }
        let mut state = Self {
            n,
            k,
            half_q: q / 2.0,
            q,
            data,
            slice_of: slice_of.to_vec(),
            members,
            movable,
            d2,
            inv,
            union_sum: 0.0,
            slice_sums: vec![0.0; t],
        };
        state.refresh_sums();
        state
    }

    fn refresh_sums(&mut self) {
        let n = self.n;
        self.union_sum = 0.0;
        self.slice_sums.iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.inv[i * n + j];
                self.union_sum += w;
                if self.slice_of[i] == self.slice_of[j] {
                    self.slice_sums[self.slice_of[i]] += w;
                }
            }
        }
    }

    fn reset(&mut self, data: &[f64]) {
        *self = Self::new(data.to_vec(), self.k, &self.slice_of, self.q);
    }

    /// Objective after adding `du` to the union sum and `ds` to one slice.
    fn objective_after(&self, du: f64, slice: usize, ds: f64) -> f64 {
        let p = 1.0 / self.q;
        let whole = (self.union_sum + du).powf(p);
        let t = self.slice_sums.len();
        if t <= 1 {
            return whole;
        }
        let per_slice: f64 = self
            .slice_sums
            .iter()
            .enumerate()
            .map(|(s, v)| if s == slice { (v + ds).powf(p) } else { v.powf(p) })
            .sum::<f64>()
            / t as f64;
        0.5 * (whole + per_slice)
    }

    fn objective(&self, union_sum: f64, slice_sums: &[f64]) -> f64 {
        let p = 1.0 / self.q;
        let whole = union_sum.powf(p);
        if slice_sums.len() <= 1 {
            return whole;
        }
        let per_slice: f64 =
            slice_sums.iter().map(|s| s.powf(p)).sum::<f64>() / slice_sums.len() as f64;
        0.5 * (whole + per_slice)
    }

    fn random_move(&self, rng: &mut Rng) -> Move {
        let slice = self.movable[rng.random_range(0..self.movable.len())];
        let rows = &self.members[slice];
        let a = rng.random_range(0..rows.len());
        let mut b = rng.random_range(0..rows.len() - 1);
        if b >= a {
            b += 1;
        }
        Move {
            slice,
            col: rng.random_range(0..self.k),
            i: rows[a],
            j: rows[b],
        }
    }

    fn new_d2(&self, mv: &Move, row: usize, other: usize) -> f64 {
        // row takes the partner's value in column `col`
        let partner = if row == mv.i { mv.j } else { mv.i };
        let c = mv.col;
        let xo = self.data[other * self.k + c];
        let old = self.data[row * self.k + c] - xo;
        let new = self.data[partner * self.k + c] - xo;
        (self.d2[row * self.n + other] - old * old + new * new).max(0.0)
    }

    /// Changes of the union and slice power sums under `mv`.
    fn deltas(&self, mv: &Move) -> (f64, f64) {
        let mut du = 0.0;
        let mut ds = 0.0;
        for r in 0..self.n {
            if r == mv.i || r == mv.j {
                continue;
            }
            let same_slice = self.slice_of[r] == mv.slice;
            for row in [mv.i, mv.j] {
                let old = self.inv[row * self.n + r];
                let new = self.new_d2(mv, row, r).powf(-self.half_q);
                du += new - old;
                if same_slice {
                    ds += new - old;
                }
            }
        }
        (du, ds)
    }

    fn apply(&mut self, mv: &Move) {
        let n = self.n;
        for r in 0..n {
            if r == mv.i || r == mv.j {
                continue;
            }
            let vi = self.new_d2(mv, mv.i, r);
            let vj = self.new_d2(mv, mv.j, r);
            for (row, v) in [(mv.i, vi), (mv.j, vj)] {
                let w = v.powf(-self.half_q);
                self.d2[row * n + r] = v;
                self.d2[r * n + row] = v;
                self.inv[row * n + r] = w;
                self.inv[r * n + row] = w;
            }
        }
        self.data.swap(mv.i * self.k + mv.col, mv.j * self.k + mv.col);
    }

    /// Temperature at which a median worsening move is accepted with
    /// probability 1/2.
    fn initial_temperature(&self, current: f64, rng: &mut Rng) -> f64 {
        let mut worse: Vec<f64> = (0..CALIBRATION_MOVES)
            .filter_map(|_| {
                let mv = self.random_move(rng);
                let (du, ds) = self.deltas(&mv);
                let d = self.objective_after(du, mv.slice, ds) - current;
                (d > 0.0).then_some(d)
            })
            .collect();
        if worse.is_empty() {
            return 1e-3 * current.max(f64::MIN_POSITIVE);
        }
        worse.sort_by(f64::total_cmp);
        worse[worse.len() / 2] / std::f64::consts::LN_2
    }
}
