//! The sequential design loop.
//!
//! Each iteration standardizes the inner outputs, extracts principal
//! components, fits one GP per retained component and picks the candidate
//! whose predicted outputs minimize φ_q of the distances to the observed
//! outputs. The loop can be driven with a callback ([`SmddState::step`]) or
//! through [`SmddState::ask`] / [`SmddState::tell`] for external simulators.

mod initial;
mod surrogate;

pub use initial::{admissible, initial_design, poorly_filled_design, InitialDesign};
pub use surrogate::{
    acquisition_phi_q, fit_surrogates, mixed_distance_outer, mixed_distance_sq_h, select_next,
    DistanceVariant, MixedDistanceTerms, Prediction, Selection, SelectionRule, SurrogateSettings,
    Surrogates,
};

use serde::{Deserialize, Serialize};

use crate::design::{slhd_with_rng, AnnealOptions, DesignMatrix, LevelStyle, DEFAULT_Q};
use crate::error::{invalid_arg, Result, SmddError};
use crate::gp::{KernelFamily, DEFAULT_NU};
use crate::pca::{InnerResponseMatrix, DEFAULT_PC_THRESHOLD};
use crate::rng::{derive_seed, stream, stream_rng};

/// Absolute per-coordinate tolerance when matching a told point to the asked one.
pub const TELL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionMode {
    /// Minimize φ_q of the output distances over the candidate pool.
    #[default]
    Candidate,
    /// Maximize the weighted input/output maximin distance; needs `w`.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmddConfig {
    pub k: usize,
    pub l: usize,
    pub n0: usize,
    /// Final design size.
    pub n_final: usize,
    /// Candidate multiplier: the pool holds `a (N - n0) K` points.
    pub a: usize,
    pub q: f64,
    pub mode: AcquisitionMode,
    pub w: Option<f64>,
    pub pc_threshold: f64,
    pub kernel: KernelFamily,
    pub nu: f64,
    pub skip_pca: bool,
    pub distance: DistanceVariant,
    pub initial: InitialDesign,
    pub seed: u64,
}

/// `max(10 K, 3 L)`.
pub fn default_n0(k: usize, l: usize) -> usize {
    (10 * k).max(3 * l)
}

impl SmddConfig {
    pub fn new(k: usize, l: usize, n_final: usize, seed: u64) -> Self {
        Self {
            k,
            l,
            n0: default_n0(k, l),
            n_final,
            a: 5,
            q: DEFAULT_Q,
            mode: AcquisitionMode::Candidate,
            w: None,
            pc_threshold: DEFAULT_PC_THRESHOLD,
            kernel: KernelFamily::Matern,
            nu: DEFAULT_NU,
            skip_pca: false,
            distance: DistanceVariant::Stochastic,
            initial: InitialDesign::Maximin,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 {
            return Err(invalid_arg("K and L must be at least 1"));
        }
        if self.n0 < 3 {
            return Err(invalid_arg(format!("n0 must be at least 3, got {}", self.n0)));
        }
        if self.n0 >= self.n_final {
            return Err(invalid_arg(format!(
                "n0 ({}) must be smaller than N ({})",
                self.n0, self.n_final
            )));
        }
        if self.a == 0 {
            return Err(invalid_arg("candidate multiplier a must be at least 1"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(invalid_arg(format!("q must be positive, got {}", self.q)));
        }
        if let Some(w) = self.w {
            if !(0.0..=1.0).contains(&w) {
                return Err(invalid_arg(format!("w must lie in [0,1], got {w}")));
            }
        }
        if self.mode == AcquisitionMode::Weighted && self.w.is_none() {
            return Err(invalid_arg("weighted mode needs an explicit w"));
        }
        if !(self.pc_threshold > 0.0 && self.pc_threshold <= 1.0) {
            return Err(invalid_arg(format!(
                "pc_threshold must lie in (0,1], got {}",
                self.pc_threshold
            )));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(invalid_arg(format!("nu must be positive, got {}", self.nu)));
        }
        Ok(())
    }

    /// Points per candidate slice, `(N - n0) K`, at least 2.
    pub fn slice_size(&self) -> usize {
        ((self.n_final - self.n0) * self.k).max(2)
    }

    pub fn candidate_count(&self) -> usize {
        self.a * self.slice_size()
    }

    pub fn surrogate_settings(&self) -> SurrogateSettings {
        SurrogateSettings {
            pc_threshold: self.pc_threshold,
            family: self.kernel,
            nu: self.nu,
            skip_pca: self.skip_pca,
        }
    }

    pub fn selection_rule(&self) -> SelectionRule {
        match self.mode {
            AcquisitionMode::Candidate => SelectionRule::PhiQ {
                q: self.q,
                variant: self.distance,
            },
            AcquisitionMode::Weighted => SelectionRule::Weighted {
                w: self.w.unwrap_or(0.5),
                variant: self.distance,
                q: self.q,
            },
        }
    }
}

/// One sequential iteration, as written to `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub min_dist_h: f64,
    pub phi_q: f64,
    pub l_pc: usize,
}

/// Fitted-model summary kept in the state file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n: usize,
    pub l_pc: usize,
    pub variance_fractions: Vec<f64>,
    pub components: Vec<usize>,
    pub theta: Vec<f64>,
}

impl FitSummary {
    fn of(s: &Surrogates) -> Self {
        Self {
            n: s.n(),
            l_pc: s.l_pc,
            variance_fractions: s.variance_fractions.clone(),
            components: s.components.clone(),
            theta: s.gps.iter().map(|g| g.theta()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Pending {
    point: Vec<f64>,
    /// Pool index for sequential points; `None` during the initial phase.
    candidate: Option<usize>,
    record: Option<TraceRecord>,
}

/// Complete sequential-design state; serializes to JSON for ask/tell use.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmddState {
    config: SmddConfig,
    initial: DesignMatrix,
    x: DesignMatrix,
    y: InnerResponseMatrix,
    candidates: DesignMatrix,
    iteration: usize,
    pending: Option<Pending>,
    trace: Vec<TraceRecord>,
    summary: Option<FitSummary>,
    #[serde(skip)]
    cache: Option<Surrogates>,
}

fn candidate_pool(config: &SmddConfig) -> Result<DesignMatrix> {
    let opts = AnnealOptions {
        q: config.q,
        ..AnnealOptions::for_dimension(config.k)
    };
    let mut rng = stream_rng(config.seed, stream::CANDIDATES);
    let set = slhd_with_rng(config.a, config.slice_size(), config.k, LevelStyle::Midpoint, opts, &mut rng)?;
    Ok(set.union())
}

impl SmddState {
    /// Builds the initial design named in the config and the candidate pool.
    pub fn new(config: SmddConfig) -> Result<Self> {
        config.validate()?;
        let initial = initial_design(
            config.initial,
            config.n0,
            config.k,
            config.q,
            derive_seed(config.seed, stream::INITIAL),
        )?;
        Self::with_initial_design(config, initial)
    }

    /// Uses a caller-supplied initial design; its size overrides `n0`.
    pub fn with_initial_design(mut config: SmddConfig, initial: DesignMatrix) -> Result<Self> {
        config.n0 = initial.n();
        config.validate()?;
        if initial.k() != config.k {
            return Err(invalid_arg(format!(
                "initial design has dimension {}, config says {}",
                initial.k(),
                config.k
            )));
        }
        initial.validate()?;
        Ok(Self {
            candidates: candidate_pool(&config)?,
            x: DesignMatrix::empty(config.k)?,
            y: InnerResponseMatrix::new(config.l)?,
            initial,
            iteration: 0,
            pending: None,
            trace: Vec::new(),
            summary: None,
            cache: None,
            config,
        })
    }

    /// Starts from an already evaluated initial design.
    pub fn with_initial_data(config: SmddConfig, x: DesignMatrix, y: InnerResponseMatrix) -> Result<Self> {
        if x.n() != y.n() {
            return Err(invalid_arg("initial design and responses differ in length"));
        }
        let mut state = Self::with_initial_design(config, x.clone())?;
        for (row, h) in x.rows().zip(y.rows()) {
            state.ask()?;
            state.tell(row, h)?;
        }
        Ok(state)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: Self =
            serde_json::from_str(text).map_err(|e| SmddError::Serialization(e.to_string()))?;
        state.validate()?;
        Ok(state)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SmddError::Serialization(e.to_string()))
    }

    /// Checks the cross-field invariants; used after loading a state file.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SmddError::InvalidState(m));
        self.config.validate()?;
        for (name, d) in [("initial", &self.initial), ("design", &self.x), ("candidate", &self.candidates)] {
            d.validate()?;
            if d.k() != self.config.k {
                return bad(format!("{name} dimension {} differs from K={}", d.k(), self.config.k));
            }
        }
        self.y.validate()?;
        if self.y.l() != self.config.l {
            return bad(format!("responses have {} outputs, config says {}", self.y.l(), self.config.l));
        }
        if self.x.n() != self.y.n() {
            return bad(format!("{} design rows but {} response rows", self.x.n(), self.y.n()));
        }
        if self.initial.n() != self.config.n0 || self.x.n() > self.config.n_final {
            return bad("design size inconsistent with n0/N".into());
        }
        if self.iteration != self.x.n().saturating_sub(self.config.n0) || self.trace.len() != self.iteration {
            return bad(format!("iteration counter {} does not match the design", self.iteration));
        }
        for i in 0..self.x.n().min(self.initial.n()) {
            if self.x.row(i) != self.initial.row(i) {
                return bad(format!("design row {i} differs from the initial design"));
            }
        }
        if let Some(p) = &self.pending {
            if p.point.len() != self.config.k {
                return bad("pending point has the wrong dimension".into());
            }
            if let Some(c) = p.candidate {
                if c >= self.candidates.n() || self.candidates.row(c) != p.point.as_slice() {
                    return bad("pending point is not in the candidate pool".into());
                }
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &SmddConfig {
        &self.config
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn responses(&self) -> &InnerResponseMatrix {
        &self.y
    }

    pub fn initial(&self) -> &DesignMatrix {
        &self.initial
    }

    pub fn candidates(&self) -> &DesignMatrix {
        &self.candidates
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn summary(&self) -> Option<&FitSummary> {
        self.summary.as_ref()
    }

    pub fn pending_point(&self) -> Option<&[f64]> {
        self.pending.as_ref().map(|p| p.point.as_slice())
    }

    pub fn is_finished(&self) -> bool {
        self.x.n() >= self.config.n_final
    }

    /// PCA and GPs on the current data, fitted on first use.
    pub fn surrogates(&mut self) -> Result<&Surrogates> {
        if self.x.n() < self.initial.n() {
            return Err(SmddError::InvalidState(format!(
                "only {} of {} initial points evaluated",
                self.x.n(),
                self.initial.n()
            )));
        }
        if self.cache.as_ref().is_none_or(|c| c.n() != self.x.n()) {
            let fitted = fit_surrogates(&self.x, &self.y, &self.config.surrogate_settings())?;
            self.summary = Some(FitSummary::of(&fitted));
            self.cache = Some(fitted);
        }
        Ok(self.cache.as_ref().expect("cache filled above"))
    }

    /// Best remaining candidate under the configured rule; the pool is not
    /// changed until the point is told.
    pub fn next_candidate(&mut self) -> Result<Selection> {
        let rule = self.config.selection_rule();
        self.surrogates()?;
        let s = self.cache.as_ref().expect("fitted");
        select_next(&self.candidates, &self.x, s, &rule)
    }

    /// Next point to evaluate: the remaining initial points in order, then
    /// sequential picks. Repeated calls return the same point until it is told.
    pub fn ask(&mut self) -> Result<Vec<f64>> {
        if let Some(p) = &self.pending {
            return Ok(p.point.clone());
        }
        if self.is_finished() {
            return Err(SmddError::Finished(self.x.n()));
        }
        let pending = if self.x.n() < self.initial.n() {
            Pending {
                point: self.initial.row(self.x.n()).to_vec(),
                candidate: None,
                record: None,
            }
        } else {
            let sel = self.next_candidate()?;
            let l_pc = self.summary.as_ref().map_or(0, |s| s.components.len());
            Pending {
                record: Some(TraceRecord {
                    iteration: self.iteration + 1,
                    point: sel.point.clone(),
                    min_dist_h: sel.min_dist_h,
                    phi_q: sel.phi_q,
                    l_pc,
                }),
                point: sel.point,
                candidate: Some(sel.index),
            }
        };
        let point = pending.point.clone();
        self.pending = Some(pending);
        Ok(point)
    }

    /// Records the inner outputs at the last asked point.
    pub fn tell(&mut self, point: &[f64], outputs: &[f64]) -> Result<()> {
        let pending = self
            .pending
            .as_ref()
            .ok_or_else(|| SmddError::ProtocolViolation("tell before ask".into()))?;
        if point.len() != pending.point.len()
            || point
                .iter()
                .zip(&pending.point)
                .any(|(a, b)| !((a - b).abs() <= TELL_TOLERANCE))
        {
            return Err(SmddError::ProtocolViolation(format!(
                "told point {point:?} differs from the asked point {:?}",
                pending.point
            )));
        }
        if outputs.len() != self.config.l {
            return Err(invalid_arg(format!(
                "expected {} inner outputs, got {}",
                self.config.l,
                outputs.len()
            )));
        }
        if outputs.iter().any(|v| !v.is_finite()) {
            return Err(SmddError::InvalidData("non-finite inner output".into()));
        }
        let pending = self.pending.take().expect("checked above");
        if let Err(e) = self.x.push(&pending.point) {
            self.pending = Some(pending);
            return Err(SmddError::InvalidState(e.to_string()));
        }
        self.y.push(outputs)?;
        if let Some(c) = pending.candidate {
            self.candidates.remove_row(c)?;
        }
        if let Some(r) = pending.record {
            self.trace.push(r);
        }
        self.iteration = self.x.n().saturating_sub(self.config.n0);
        self.cache = None;
        Ok(())
    }

    /// One ask/evaluate/tell round with an in-process inner simulator.
    pub fn step<F>(&mut self, inner: F) -> Result<()>
    where
        F: FnOnce(&[f64]) -> Result<Vec<f64>>,
    {
        if self.is_finished() {
            return Err(SmddError::Finished(self.x.n()));
        }
        let point = self.ask()?;
        let h = inner(&point)?;
        self.tell(&point, &h)
    }

    /// Steps until the design reaches `N` points.
    pub fn run<F>(&mut self, mut inner: F) -> Result<()>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        while !self.is_finished() {
            self.step(&mut inner)?;
        }
        Ok(())
    }
}
