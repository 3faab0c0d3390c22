use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{euclidean_distance, phi_q, sq_dist, DesignMatrix, DUPLICATE_TOLERANCE};
use crate::error::{invalid_arg, Result, SmddError};
use crate::gp::{fit_gp, FitOptions, GpModel, KernelFamily};
use crate::pca::{
    fit_pca, scores, select_num_pcs, standardize_dropping_constant, InnerResponseMatrix, PcaModel,
};

/// Whether the posterior variance enters the output-space distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceVariant {
    /// `Σ (μ_l² + τ_l²)`.
    #[default]
    Stochastic,
    /// Posterior means only.
    Deterministic,
}

/// Per-component mean differences and posterior variances between a
/// candidate and one observed point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixedDistanceTerms {
    pub mu: Vec<f64>,
    pub tau2: Vec<f64>,
}

/// `Σ_l (μ_l² + τ_l²)`.
pub fn mixed_distance_sq_h(terms: &MixedDistanceTerms) -> f64 {
    terms.mu.iter().map(|m| m * m).sum::<f64>() + terms.tau2.iter().sum::<f64>()
}

/// `w d_h + (1 - w) d_x`.
pub fn mixed_distance_outer(x: &[f64], xi: &[f64], dist_h: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(invalid_arg(format!("w must lie in [0,1], got {w}")));
    }
    Ok(w * dist_h + (1.0 - w) * euclidean_distance(x, xi)?)
}

/// Settings for the per-iteration PCA and GP fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSettings {
    pub pc_threshold: f64,
    pub family: KernelFamily,
    pub nu: f64,
    pub skip_pca: bool,
}

/// Posterior means and variances of every modelled component at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// PCA and per-component GPs fitted on the current data.
#[derive(Debug, Clone)]
pub struct Surrogates {
    pub pca: Option<PcaModel>,
    /// Components selected before any GP was dropped.
    pub l_pc: usize,
    /// Selected components that ended up with a GP.
    pub components: Vec<usize>,
    /// Observed scores, `n` rows over `components`.
    pub scores: Vec<Vec<f64>>,
    pub gps: Vec<GpModel>,
    pub variance_fractions: Vec<f64>,
}

/// Standardizes, runs PCA (unless skipped), keeps the leading components and
/// fits one GP per component. A component whose GP fit fails is dropped.
pub fn fit_surrogates(
    x: &DesignMatrix,
    y: &InnerResponseMatrix,
    settings: &SurrogateSettings,
) -> Result<Surrogates> {
    if x.n() != y.n() {
        return Err(SmddError::InvalidState(format!(
            "{} design rows but {} response rows",
            x.n(),
            y.n()
        )));
    }
    let standardized = standardize_dropping_constant(y)?;
    let (pca, score_rows, l_pc, fractions) = if settings.skip_pca {
        let cols = standardized.values.ncols();
        let rows: Vec<Vec<f64>> = (0..x.n())
            .map(|i| standardized.values.row(i).iter().copied().collect())
            .collect();
        (None, rows, cols, vec![1.0 / cols as f64; cols])
    } else {
        let model = fit_pca(&standardized)?;
        let l_pc = select_num_pcs(&model, settings.pc_threshold);
        let sc = scores(&model, &standardized.values, l_pc)?;
        let rows = (0..sc.n()).map(|i| sc.row(i)).collect();
        let fractions = model.variance_fractions.clone();
        (Some(model), rows, l_pc, fractions)
    };

    let opts = FitOptions {
        family: settings.family,
        nu: settings.nu,
        ..FitOptions::default()
    };
    let fits: Vec<Result<GpModel>> = (0..l_pc)
        .into_par_iter()
        .map(|p| {
            let target: Vec<f64> = score_rows.iter().map(|r| r[p]).collect();
            fit_gp(x, &target, &opts)
        })
        .collect();

    let mut components = Vec::with_capacity(l_pc);
    let mut gps = Vec::with_capacity(l_pc);
    for (p, fit) in fits.into_iter().enumerate() {
        match fit {
            Ok(gp) => {
                components.push(p);
                gps.push(gp);
            }
            Err(err @ SmddError::IllConditioned { .. }) => {
                warn!("dropping component {p} for this iteration: {err}");
            }
            Err(err) => return Err(err),
        }
    }
    if gps.is_empty() {
        return Err(SmddError::IllConditioned {
            jitter: crate::gp::MAX_JITTER,
        });
    }
    let scores = score_rows
        .iter()
        .map(|r| components.iter().map(|&p| r[p]).collect())
        .collect();
    Ok(Surrogates {
        pca,
        l_pc,
        components,
        scores,
        gps,
        variance_fractions: fractions,
    })
}

impl Surrogates {
    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let mut mean = Vec::with_capacity(self.gps.len());
        let mut var = Vec::with_capacity(self.gps.len());
        for gp in &self.gps {
            let (m, v) = gp.posterior(x)?;
            mean.push(m);
            var.push(v);
        }
        Ok(Prediction { mean, var })
    }

    /// Terms between candidate `x` and observed run `i`.
    pub fn terms(&self, x: &[f64], i: usize) -> Result<MixedDistanceTerms> {
        let row = self
            .scores
            .get(i)
            .ok_or_else(|| invalid_arg(format!("observed index {i} out of range")))?;
        let pred = self.predict(x)?;
        Ok(MixedDistanceTerms {
            mu: pred.mean.iter().zip(row).map(|(m, s)| m - s).collect(),
            tau2: pred.var,
        })
    }

    /// Output-space distance between candidate `x` and observed run `i`.
    pub fn dist_h(&self, x: &[f64], i: usize, variant: DistanceVariant) -> Result<f64> {
        let mut t = self.terms(x, i)?;
        if variant == DistanceVariant::Deterministic {
            t.tau2.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(mixed_distance_sq_h(&t).sqrt())
    }

    /// Distances from a prediction to every observed run.
    pub fn distances_from(&self, pred: &Prediction, variant: DistanceVariant) -> Vec<f64> {
        let extra: f64 = match variant {
            DistanceVariant::Stochastic => pred.var.iter().sum(),
            DistanceVariant::Deterministic => 0.0,
        };
        self.scores
            .iter()
            .map(|row| (sq_dist(&pred.mean, row) + extra).sqrt())
            .collect()
    }
}

/// φ_q of the output-space distances from `x` to the observed runs; `+∞`
/// when `x` duplicates a design point in input or output space.
pub fn acquisition_phi_q(
    x: &[f64],
    design: &DesignMatrix,
    surrogates: &Surrogates,
    variant: DistanceVariant,
    q: f64,
) -> Result<f64> {
    if design.min_distance_to(x) < DUPLICATE_TOLERANCE {
        return Ok(f64::INFINITY);
    }
    let d = surrogates.distances_from(&surrogates.predict(x)?, variant);
    match phi_q(&d, q) {
        Err(SmddError::DegenerateDistance(_)) => Ok(f64::INFINITY),
        other => other,
    }
}

/// How the next point is picked from the candidate pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    /// Minimize φ_q of the output-space distances.
    PhiQ { q: f64, variant: DistanceVariant },
    /// Maximize `min_i [w d_h + (1 - w) d_x]`.
    Weighted { w: f64, variant: DistanceVariant, q: f64 },
}

/// The chosen candidate and its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub point: Vec<f64>,
    pub phi_q: f64,
    pub min_dist_h: f64,
}

struct Scored {
    key: f64,
    phi_q: f64,
    min_dist_h: f64,
}

fn score_candidate(
    x: &[f64],
    design: &DesignMatrix,
    surrogates: &Surrogates,
    rule: &SelectionRule,
) -> Result<Scored> {
    let (q, variant) = match *rule {
        SelectionRule::PhiQ { q, variant } | SelectionRule::Weighted { q, variant, .. } => {
            (q, variant)
        }
    };
    let d = surrogates.distances_from(&surrogates.predict(x)?, variant);
    let min_dist_h = d.iter().copied().fold(f64::INFINITY, f64::min);
    let duplicate = design.min_distance_to(x) < DUPLICATE_TOLERANCE || !(min_dist_h > 0.0);
    let phi = if duplicate {
        f64::INFINITY
    } else {
        phi_q(&d, q)?
    };
    let key = match *rule {
        SelectionRule::PhiQ { .. } => phi,
        SelectionRule::Weighted { w, .. } if !duplicate => {
            let worst = design
                .rows()
                .zip(&d)
                .map(|(xi, dh)| w * dh + (1.0 - w) * sq_dist(x, xi).sqrt())
                .fold(f64::INFINITY, f64::min);
            -worst
        }
        SelectionRule::Weighted { .. } => f64::INFINITY,
    };
    Ok(Scored {
        key,
        phi_q: phi,
        min_dist_h,
    })
}

/// Exhaustive scan of the candidate pool; ties go to the lowest index.
pub fn select_next(
    candidates: &DesignMatrix,
    design: &DesignMatrix,
    surrogates: &Surrogates,
    rule: &SelectionRule,
) -> Result<Selection> {
    if candidates.n() == 0 {
        return Err(SmddError::ExhaustedCandidates);
    }
    let rows: Vec<&[f64]> = candidates.rows().collect();
    let scored: Vec<Scored> = rows
        .par_iter()
        .map(|x| score_candidate(x, design, surrogates, rule))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in scored.iter().enumerate().skip(1) {
        if s.key < scored[best].key {
            best = i;
        }
    }
    if scored[best].key == f64::INFINITY {
        return Err(SmddError::ExhaustedCandidates);
    }
    Ok(Selection {
        index: best,
        point: rows[best].to_vec(),
        phi_q: scored[best].phi_q,
        min_dist_h: scored[best].min_dist_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::generate_lhd;
    use crate::design::LevelStyle;

    fn settings() -> SurrogateSettings {
        SurrogateSettings {
            pc_threshold: 0.9,
            family: KernelFamily::Matern,
            nu: 2.5,
            skip_pca: false,
        }
    }

    fn toy(n: usize, seed: u64) -> (DesignMatrix, InnerResponseMatrix) {
        let x = generate_lhd(n, 2, LevelStyle::Midpoint, seed).unwrap().into_design();
        let rows: Vec<Vec<f64>> = x
            .rows()
            .map(|r| vec![(3.0 * r[0]).sin() + r[1], r[0] * r[1], (r[0] - r[1]).powi(2)])
            .collect();
        (x, InnerResponseMatrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn squared_distance_examples() {
        let t = |mu: &[f64], tau2: &[f64]| MixedDistanceTerms {
            mu: mu.to_vec(),
            tau2: tau2.to_vec(),
        };
        assert_eq!(mixed_distance_sq_h(&t(&[0.0, 0.0], &[0.0, 0.0])), 0.0);
        assert_eq!(mixed_distance_sq_h(&t(&[3.0, 4.0], &[0.0, 0.0])), 25.0);
        assert_eq!(mixed_distance_sq_h(&t(&[1.0, 2.0], &[4.0, 1.0])), 10.0);
    }

    #[test]
    fn outer_distance_endpoints() {
        let (x, xi) = ([0.0, 0.0], [0.6, 0.8]);
        assert!((mixed_distance_outer(&x, &xi, 7.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(mixed_distance_outer(&x, &xi, 7.0, 1.0).unwrap(), 7.0);
        assert!((mixed_distance_outer(&x, &xi, 2.0, 0.5).unwrap() - 1.5).abs() < 1e-15);
        assert!(mixed_distance_outer(&x, &xi, 2.0, 1.5).is_err());
    }

    #[test]
    fn distance_at_training_points() {
        let (x, y) = toy(15, 3);
        let s = fit_surrogates(&x, &y, &settings()).unwrap();
        for i in 0..x.n() {
            assert!(s.dist_h(x.row(i), i, DistanceVariant::Stochastic).unwrap() < 1e-4);
            for j in [0, 7] {
                let d = s.dist_h(x.row(i), j, DistanceVariant::Stochastic).unwrap();
                let exact = sq_dist(&s.scores[i], &s.scores[j]).sqrt();
                assert!((d - exact).abs() < 1e-6, "{d} vs {exact}");
            }
        }
    }

    #[test]
    fn stochastic_dominates_deterministic() {
        let (x, y) = toy(12, 4);
        let s = fit_surrogates(&x, &y, &settings()).unwrap();
        let probe = generate_lhd(30, 2, LevelStyle::RandomInCell, 9).unwrap().into_design();
        for p in probe.rows() {
            for i in 0..x.n() {
                let st = s.dist_h(p, i, DistanceVariant::Stochastic).unwrap();
                let de = s.dist_h(p, i, DistanceVariant::Deterministic).unwrap();
                assert!(st >= de);
            }
        }
    }

    #[test]
    fn duplicate_candidate_gets_sentinel() {
        let (x, y) = toy(12, 5);
        let s = fit_surrogates(&x, &y, &settings()).unwrap();
        let v = acquisition_phi_q(x.row(3), &x, &s, DistanceVariant::Stochastic, 15.0).unwrap();
        assert_eq!(v, f64::INFINITY);

        let other = [0.333, 0.777];
        let cands = DesignMatrix::from_rows(&[x.row(3).to_vec(), other.to_vec()]).unwrap();
        let rule = SelectionRule::PhiQ {
            q: 15.0,
            variant: DistanceVariant::Stochastic,
        };
        let sel = select_next(&cands, &x, &s, &rule).unwrap();
        assert_eq!(sel.index, 1);
        assert_eq!(sel.point, other.to_vec());
    }

    #[test]
    fn selection_is_the_exhaustive_minimum() {
        let (x, y) = toy(14, 6);
        let s = fit_surrogates(&x, &y, &settings()).unwrap();
        let cands = generate_lhd(60, 2, LevelStyle::RandomInCell, 11).unwrap().into_design();
        let rule = SelectionRule::PhiQ {
            q: 15.0,
            variant: DistanceVariant::Stochastic,
        };
        let sel = select_next(&cands, &x, &s, &rule).unwrap();
        let values: Vec<f64> = cands
            .rows()
            .map(|c| acquisition_phi_q(c, &x, &s, DistanceVariant::Stochastic, 15.0).unwrap())
            .collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(values[sel.index], min);
        assert_eq!(sel.phi_q, min);
        assert!(values[..sel.index].iter().all(|v| *v > min));
    }

    #[test]
    fn single_candidate_is_forced() {
        let (x, y) = toy(10, 7);
        let s = fit_surrogates(&x, &y, &settings()).unwrap();
        let cands = DesignMatrix::from_rows(&[vec![0.51, 0.49]]).unwrap();
        let rule = SelectionRule::PhiQ {
            q: 15.0,
            variant: DistanceVariant::Stochastic,
        };
        assert_eq!(select_next(&cands, &x, &s, &rule).unwrap().index, 0);
        let empty = DesignMatrix::empty(2).unwrap();
        assert_eq!(
            select_next(&empty, &x, &s, &rule),
            Err(SmddError::ExhaustedCandidates)
        );
    }

    #[test]
    fn weighted_endpoints_match_maximin_oracles() {
        let (x, y) = toy(12, 8);
        let s = fit_surrogates(&x, &y, &settings()).unwrap();
        let cands = generate_lhd(50, 2, LevelStyle::RandomInCell, 13).unwrap().into_design();
        let variant = DistanceVariant::Stochastic;
        let argmax = |f: &dyn Fn(&[f64]) -> f64| {
            let mut best = 0;
            let mut bv = f64::NEG_INFINITY;
            for (i, c) in cands.rows().enumerate() {
                let v = f(c);
                if v > bv {
                    bv = v;
                    best = i;
                }
            }
            best
        };
        let input_oracle = argmax(&|c| x.min_distance_to(c));
        let output_oracle = argmax(&|c| {
            (0..x.n())
                .map(|i| s.dist_h(c, i, variant).unwrap())
                .fold(f64::INFINITY, f64::min)
        });
        let pick = |w| {
            select_next(&cands, &x, &s, &SelectionRule::Weighted { w, variant, q: 15.0 })
                .unwrap()
                .index
        };
        assert_eq!(pick(0.0), input_oracle);
        assert_eq!(pick(1.0), output_oracle);
    }

    #[test]
    fn skip_pca_models_every_output() {
        let (x, y) = toy(12, 9);
        let s = fit_surrogates(
            &x,
            &y,
            &SurrogateSettings {
                skip_pca: true,
                ..settings()
            },
        )
        .unwrap();
        assert!(s.pca.is_none());
        assert_eq!(s.gps.len(), 3);
        assert_eq!(s.l_pc, 3);
    }
}
