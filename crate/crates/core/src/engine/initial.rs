use serde::{Deserialize, Serialize};

use crate::design::{optimize_lhd, lhd_with_rng, sq_dist, AnnealOptions, DesignMatrix, LevelStyle};
use crate::error::{invalid_arg, Result, SmddError};
use crate::rng::{derive_seed, rng_from_seed};

/// Starting design for the sequential loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitialDesign {
    /// Maximin LHD over the whole cube.
    #[default]
    #[serde(rename = "id1")]
    Maximin,
    /// Maximin points that avoid the corner `Σ x_k < K/4`.
    #[serde(rename = "id2")]
    PoorlyFilled,
}

impl InitialDesign {
    pub fn label(self) -> &'static str {
        match self {
            Self::Maximin => "id1",
            Self::PoorlyFilled => "id2",
        }
    }
}

impl std::str::FromStr for InitialDesign {
    type Err = SmddError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "id1" | "maximin" => Ok(Self::Maximin),
            "id2" | "poorly-filled" => Ok(Self::PoorlyFilled),
            other => Err(invalid_arg(format!("unknown initial design '{other}'"))),
        }
    }
}

pub fn initial_design(kind: InitialDesign, n0: usize, k: usize, q: f64, seed: u64) -> Result<DesignMatrix> {
    match kind {
        InitialDesign::Maximin => maximin(n0, k, q, seed),
        InitialDesign::PoorlyFilled => poorly_filled_design(n0, k, q, seed),
    }
}

fn maximin(n: usize, k: usize, q: f64, seed: u64) -> Result<DesignMatrix> {
    let mut rng = rng_from_seed(seed);
    let start = lhd_with_rng(n, k, LevelStyle::Midpoint, &mut rng)?;
    let opts = AnnealOptions {
        q,
        ..AnnealOptions::for_dimension(k)
    };
    Ok(optimize_lhd(start, opts, &mut rng)?.into_design())
}

/// True when `x` lies outside the excluded corner `Σ x_k < K/4`.
pub fn admissible(x: &[f64]) -> bool {
    x.iter().sum::<f64>() >= x.len() as f64 / 4.0
}

/// Grows maximin LHDs until at least `n0` of their points are admissible,
/// then thins the admissible set to `n0` by repeatedly dropping the point
/// with the closest neighbour.
pub fn poorly_filled_design(n0: usize, k: usize, q: f64, seed: u64) -> Result<DesignMatrix> {
    if n0 < 2 {
        return Err(invalid_arg(format!("initial design needs at least 2 points, got {n0}")));
    }
    for m in n0..=100 * n0 {
        let lhd = maximin(m, k, q, derive_seed(seed, m as u64))?;
        let mut kept: Vec<Vec<f64>> = lhd.rows().filter(|r| admissible(r)).map(<[f64]>::to_vec).collect();
        if kept.len() < n0 {
            continue;
        }
        while kept.len() > n0 {
            let nearest = |i: usize| {
                kept.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, r)| sq_dist(&kept[i], r))
                    .fold(f64::INFINITY, f64::min)
            };
            let mut drop = 0;
            let mut worst = f64::INFINITY;
            for i in 0..kept.len() {
                let d = nearest(i);
                if d <= worst {
                    worst = d;
                    drop = i;
                }
            }
            kept.remove(drop);
        }
        return DesignMatrix::from_rows(&kept);
    }
    Err(invalid_arg("could not place enough admissible initial points"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::has_lhd_projection;

    #[test]
    fn maximin_start_is_an_lhd() {
        let d = initial_design(InitialDesign::Maximin, 20, 2, 15.0, 1).unwrap();
        assert_eq!(d.n(), 20);
        assert!(has_lhd_projection(&d));
    }

    #[test]
    fn poorly_filled_avoids_the_corner() {
        for seed in 0..10 {
            let d = initial_design(InitialDesign::PoorlyFilled, 20, 2, 15.0, seed).unwrap();
            assert_eq!(d.n(), 20);
            for r in d.rows() {
                assert!(r[0] + r[1] >= 0.5, "{r:?}");
            }
        }
    }

    #[test]
    fn parses_labels() {
        assert_eq!("ID2".parse::<InitialDesign>().unwrap(), InitialDesign::PoorlyFilled);
        assert_eq!("id1".parse::<InitialDesign>().unwrap(), InitialDesign::Maximin);
        assert!("id3".parse::<InitialDesign>().is_err());
    }
}
