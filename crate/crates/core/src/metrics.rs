//! Average inter-site distance and mean posterior variance.

use serde::{Deserialize, Serialize};

use crate::design::{optimize_lhd, lhd_with_rng, sq_dist, AnnealOptions, DesignMatrix, LevelStyle};
use crate::error::{invalid_arg, Result};
use crate::gp::GpModel;
use crate::rng::{stream, stream_rng};

/// Default number of MPV test points.
pub const DEFAULT_TEST_POINTS: usize = 500;

/// Mean Euclidean distance over all unordered pairs.
pub fn aid(points: &[Vec<f64>]) -> Result<f64> {
    aid_with(points, |a, b| sq_dist(a, b).sqrt())
}

/// Mean of `metric` over all unordered pairs.
pub fn aid_with(points: &[Vec<f64>], metric: impl Fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(invalid_arg(format!("AID needs at least 2 points, got {n}")));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += metric(&points[i], &points[j]);
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// Mean posterior variance of `gp` over `test_points`.
pub fn mpv(gp: &GpModel, test_points: &DesignMatrix) -> Result<f64> {
    if test_points.n() == 0 {
        return Err(invalid_arg("MPV needs at least one test point"));
    }
    let mut total = 0.0;
    for x in test_points.rows() {
        total += gp.posterior_variance(x)?;
    }
    Ok(total / test_points.n() as f64)
}

/// Maximin LHD of MPV test points, drawn from its own seed stream.
pub fn test_points(n: usize, k: usize, seed: u64) -> Result<DesignMatrix> {
    let mut rng = stream_rng(seed, stream::TEST_POINTS);
    let start = lhd_with_rng(n, k, LevelStyle::Midpoint, &mut rng)?;
    Ok(optimize_lhd(start, AnnealOptions::for_dimension(k), &mut rng)?.into_design())
}

/// Quality summary of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub seed: u64,
    pub n: usize,
    pub aid_x: f64,
    pub aid_h: f64,
    /// One entry per modelled component.
    pub mpv: Vec<f64>,
}
