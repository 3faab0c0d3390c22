//! Built-in two-layer test problems and the replication harness that
//! compares the sequential designs against a one-shot maximin LHD.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{optimize_mmlhd, DesignMatrix, DEFAULT_Q};
use crate::engine::{
    default_n0, fit_surrogates, DistanceVariant, InitialDesign, SmddConfig, SmddState, Surrogates,
};
use crate::error::{invalid_arg, Result};
use crate::metrics::{aid, mpv, test_points, MetricReport, DEFAULT_TEST_POINTS};
use crate::pca::{fit_pca, standardize_dropping_constant, InnerResponseMatrix, PcaModel};
use crate::rng::{derive_seed, stream};

fn check_unit(x: &[f64], k: usize) -> Result<()> {
    if x.len() != k {
        return Err(invalid_arg(format!("expected a {k}-dimensional point, got {}", x.len())));
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid_arg(format!("point {x:?} outside [0,1]^{k}")));
    }
    Ok(())
}

/// Three-hump and six-hump Camel functions on `x̄ = 2x - 1`.
pub fn camel_inner(x: &[f64]) -> Result<[f64; 2]> {
    check_unit(x, 2)?;
    let (a, b) = (2.0 * x[0] - 1.0, 2.0 * x[1] - 1.0);
    let (a2, b2) = (a * a, b * b);
    let h1 = 2.0 * a2 - 1.05 * a2 * a2 + a2 * a2 * a2 / 6.0 + a * b + b2;
    let h2 = (4.0 - 2.1 * a2 + a2 * a2 / 3.0) * a2 + a * b + (-4.0 + 4.0 * b2) * b2;
    Ok([h1, h2])
}

/// Coefficients `a_{l1..l4}` for the ten outputs of [`highdim_inner`].
pub const HIGHDIM_A: [[f64; 4]; 10] = [
    [0.614, 0.965, 0.761, 0.296],
    [0.453, 0.400, 0.410, 0.189],
    [0.264, 0.189, 0.691, 0.561],
    [0.354, 0.574, 0.872, 0.775],
    [0.850, 0.323, 0.248, 0.945],
    [0.514, 0.791, 0.574, 0.002],
    [0.040, 0.093, 0.386, 0.356],
    [0.958, 0.813, 0.086, 0.615],
    [0.142, 0.617, 0.135, 0.819],
    [0.717, 0.221, 0.938, 0.435],
];

/// Ten outputs on `[0,1]^8` sharing four basis terms.
pub fn highdim_inner(x: &[f64]) -> Result<[f64; 10]> {
    check_unit(x, 8)?;
    let t1 = 4.0 * (x[0] - 2.0 + 8.0 * x[1] - 8.0 * x[1] * x[1]).powi(2);
    let t2 = (3.0 - 4.0 * x[1]).powi(2);
    let t3 = 16.0 * (x[2] + 1.0).sqrt() * (2.0 * x[2] - 1.0).powi(2);
    // inner sum over j = 3..=i is empty for i < 3
    let mut t4 = 0.0;
    let mut partial = 0.0;
    for i in 1..=8 {
        if i >= 3 {
            partial += x[i - 1];
        }
        t4 += i as f64 * partial.ln_1p();
    }
    let mut out = [0.0; 10];
    for (o, a) in out.iter_mut().zip(HIGHDIM_A.iter()) {
        *o = a[0] * t1 + a[1] * t2 + a[2] * t3 + a[3] * t4;
    }
    Ok(out)
}

/// Branin-Hoo with a `cos(5 h1)` term, on `[-5,10] x [0,15]`.
pub fn branin_mod_outer(h1: f64, h2: f64) -> Result<f64> {
    if !(-5.0..=10.0).contains(&h1) || !(0.0..=15.0).contains(&h2) {
        return Err(invalid_arg(format!("({h1}, {h2}) outside [-5,10]x[0,15]")));
    }
    let poly = h2 - 5.1 / (4.0 * PI * PI) * h1 * h1 + 5.0 / PI * h1 - 6.0;
    Ok(poly * poly + 10.0 * (1.0 - 1.0 / (8.0 * PI)) * (5.0 * h1).cos() + 10.0)
}

/// Piecewise-linear zigzag surface.
pub fn zigzag_outer(h1: f64, h2: f64) -> f64 {
    h1 + 2.0 * h2 - (0.5 + h1).floor() - (0.4 + h2).floor()
}

/// A named inner simulator with an optional outer model.
#[derive(Debug, Clone, Copy)]
pub struct TestProblem {
    pub name: &'static str,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub inner: fn(&[f64]) -> Result<Vec<f64>>,
    pub outer: Option<fn(&[f64]) -> Result<f64>>,
}

impl TestProblem {
    pub fn camel() -> Self {
        Self {
            name: "example1",
            k: 2,
            l: 2,
            m: 1,
            inner: |x| camel_inner(x).map(|h| h.to_vec()),
            outer: None,
        }
    }

    pub fn highdim() -> Self {
        Self {
            name: "example2",
            k: 8,
            l: 10,
            m: 0,
            inner: |x| highdim_inner(x).map(|h| h.to_vec()),
            outer: None,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "example1" | "camel" => Ok(Self::camel()),
            "example2" | "highdim" => Ok(Self::highdim()),
            other => Err(invalid_arg(format!("unknown problem '{other}'"))),
        }
    }

    pub fn evaluate(&self, x: &DesignMatrix) -> Result<InnerResponseMatrix> {
        let mut y = InnerResponseMatrix::new(self.l)?;
        for r in x.rows() {
            y.push(&(self.inner)(r)?)?;
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "smdd")]
    Smdd,
    #[serde(rename = "smdd-det")]
    SmddDet,
    #[serde(rename = "mmlhd")]
    Mmlhd,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Self::Smdd => "smdd",
            Self::SmddDet => "smdd-det",
            Self::Mmlhd => "mmlhd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::SmddError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smdd" => Ok(Self::Smdd),
            "smdd-det" | "smdd_det" => Ok(Self::SmddDet),
            "mmlhd" => Ok(Self::Mmlhd),
            other => Err(invalid_arg(format!("unknown method '{other}'"))),
        }
    }
}

fn default_initials() -> Vec<InitialDesign> {
    vec![InitialDesign::Maximin, InitialDesign::PoorlyFilled]
}

fn default_test_points() -> usize {
    DEFAULT_TEST_POINTS
}

fn default_reference_points() -> usize {
    2000
}

/// Which runs to make; every replicate gets seed `derive_seed(base_seed, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub problem: String,
    pub methods: Vec<Method>,
    #[serde(default = "default_initials")]
    pub initials: Vec<InitialDesign>,
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to `max(10 K, 3 L)`.
    #[serde(default)]
    pub n0: Option<usize>,
    /// Design sizes at which metrics are recorded; the largest is the final size.
    pub n_grid: Vec<usize>,
    #[serde(default = "default_test_points")]
    pub test_points: usize,
    /// Size of the design whose outputs fix the standardization used for AID_h.
    #[serde(default = "default_reference_points")]
    pub reference_points: usize,
}

impl ReplicationPlan {
    pub fn new(problem: &str, methods: Vec<Method>, replicates: usize, n_grid: Vec<usize>) -> Self {
        Self {
            problem: problem.to_string(),
            methods,
            initials: default_initials(),
            replicates,
            base_seed: 0,
            n0: None,
            n_grid,
            test_points: DEFAULT_TEST_POINTS,
            reference_points: default_reference_points(),
        }
    }

    pub fn replicate_seed(&self, r: usize) -> u64 {
        derive_seed(self.base_seed, r as u64)
    }

    fn validate(&self, problem: &TestProblem) -> Result<usize> {
        if self.methods.is_empty() {
            return Err(invalid_arg("plan lists no methods"));
        }
        if self.initials.is_empty() {
            return Err(invalid_arg("plan lists no initial designs"));
        }
        if self.replicates == 0 {
            return Err(invalid_arg("plan needs at least one replicate"));
        }
        if self.n_grid.iter().any(|&n| n < 3) || self.n_grid.is_empty() {
            return Err(invalid_arg("every grid size must be at least 3"));
        }
        if self.test_points == 0 || self.reference_points < 3 {
            return Err(invalid_arg("test and reference point counts are too small"));
        }
        let n0 = self.n0.unwrap_or_else(|| default_n0(problem.k, problem.l));
        let sequential = self.methods.iter().any(|m| *m != Method::Mmlhd);
        let top = *self.n_grid.iter().max().expect("non-empty");
        if sequential && top <= n0 {
            return Err(invalid_arg(format!("largest grid size {top} must exceed n0 = {n0}")));
        }
        Ok(n0)
    }
}

/// One completed design in the replication table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub problem: String,
    pub initial: InitialDesign,
    pub report: MetricReport,
}

/// Fixed standardization and PCA of the inner outputs over a large maximin
/// LHD, so that AID_h is measured on the same scale for every design.
#[derive(Debug, Clone)]
pub struct OutputReference {
    pub pca: PcaModel,
}

impl OutputReference {
    pub fn build(problem: &TestProblem, size: usize, seed: u64) -> Result<Self> {
        let x = optimize_mmlhd(size, problem.k, DEFAULT_Q, 10_000 * problem.k, derive_seed(seed, stream::REFERENCE))?
            .into_design();
        let y = problem.evaluate(&x)?;
        Ok(Self {
            pca: fit_pca(&standardize_dropping_constant(&y)?)?,
        })
    }

    /// AID of the reference PC scores of `y`.
    pub fn aid_h(&self, y: &InnerResponseMatrix) -> Result<f64> {
        let pts: Vec<Vec<f64>> = y
            .rows()
            .map(|r| self.pca.project(r, self.pca.l_pc))
            .collect::<Result<_>>()?;
        aid(&pts)
    }
}

struct Replicate<'a> {
    plan: &'a ReplicationPlan,
    problem: &'a TestProblem,
    reference: &'a OutputReference,
    n0: usize,
    seed: u64,
    tests: DesignMatrix,
}

impl Replicate<'_> {
    fn report(&self, method: Method, x: &DesignMatrix, y: &InnerResponseMatrix, s: &Surrogates) -> Result<MetricReport> {
        Ok(MetricReport {
            method: method.label().to_string(),
            seed: self.seed,
            n: x.n(),
            aid_x: aid(&x.to_rows())?,
            aid_h: self.reference.aid_h(y)?,
            mpv: s.gps.iter().map(|g| mpv(g, &self.tests)).collect::<Result<_>>()?,
        })
    }

    fn sequential(&self, method: Method, initial: InitialDesign) -> Result<Vec<MetricReport>> {
        let grid = &self.plan.n_grid;
        let top = *grid.iter().max().expect("validated");
        let config = SmddConfig {
            n0: self.n0,
            initial,
            distance: if method == Method::SmddDet {
                DistanceVariant::Deterministic
            } else {
                DistanceVariant::Stochastic
            },
            ..SmddConfig::new(self.problem.k, self.problem.l, top, self.seed)
        };
        let mut state = SmddState::new(config)?;
        let mut out = Vec::new();
        loop {
            let n = state.design().n();
            if n >= self.n0 && grid.contains(&n) {
                let s = state.surrogates()?.clone();
                out.push(self.report(method, state.design(), state.responses(), &s)?);
            }
            if state.is_finished() {
                return Ok(out);
            }
            state.step(self.problem.inner)?;
        }
    }

    fn baseline(&self, n: usize) -> Result<MetricReport> {
        let (k, l) = (self.problem.k, self.problem.l);
        let seed = derive_seed(derive_seed(self.seed, stream::BASELINE), n as u64);
        let x = optimize_mmlhd(n, k, DEFAULT_Q, 10_000 * k, seed)?.into_design();
        let y = self.problem.evaluate(&x)?;
        let settings = SmddConfig::new(k, l, n + 1, self.seed).surrogate_settings();
        let s = fit_surrogates(&x, &y, &settings)?;
        self.report(Method::Mmlhd, &x, &y, &s)
    }

    fn rows(&self) -> Result<Vec<BenchRow>> {
        let mut grid = self.plan.n_grid.clone();
        grid.sort_unstable();
        grid.dedup();
        let mut rows = Vec::new();
        for &method in &self.plan.methods {
            let per_initial: Vec<(InitialDesign, Vec<MetricReport>)> = if method == Method::Mmlhd {
                let reports = grid.iter().map(|&n| self.baseline(n)).collect::<Result<Vec<_>>>()?;
                self.plan.initials.iter().map(|&i| (i, reports.clone())).collect()
            } else {
                self.plan
                    .initials
                    .iter()
                    .map(|&i| Ok((i, self.sequential(method, i)?)))
                    .collect::<Result<_>>()?
            };
            for (initial, reports) in per_initial {
                rows.extend(reports.into_iter().map(|report| BenchRow {
                    problem: self.problem.name.to_string(),
                    initial,
                    report,
                }));
            }
        }
        Ok(rows)
    }
}

/// Runs every (replicate, method, initial design) combination in parallel;
/// rows come back in replicate order, then plan order.
pub fn run_replication(plan: &ReplicationPlan, problem: &TestProblem) -> Result<Vec<BenchRow>> {
    let n0 = plan.validate(problem)?;
    let reference = OutputReference::build(problem, plan.reference_points, plan.base_seed)?;
    let per_rep: Vec<Result<Vec<BenchRow>>> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = plan.replicate_seed(r);
            Replicate {
                plan,
                problem,
                reference: &reference,
                n0,
                seed,
                tests: test_points(plan.test_points, problem.k, seed)?,
            }
            .rows()
        })
        .collect();
    let mut rows = Vec::new();
    for rep in per_rep {
        rows.extend(rep?);
    }
    Ok(rows)
}
