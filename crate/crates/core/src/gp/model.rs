use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{Kernel, KernelFamily, DEFAULT_NU};
use crate::design::{sq_dist, DesignMatrix};
use crate::error::{invalid_arg, Result, SmddError};

/// Mean-function basis `b(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisSpec {
    /// `b(x) = 1`.
    #[default]
    Constant,
}

impl BasisSpec {
    pub fn size(&self) -> usize {
        match self {
            BasisSpec::Constant => 1,
        }
    }

    pub fn eval(&self, _x: &[f64]) -> DVector<f64> {
        match self {
            BasisSpec::Constant => DVector::from_element(1, 1.0),
        }
    }

    fn matrix(&self, x: &DesignMatrix) -> DMatrix<f64> {
        let q = self.size();
        let mut b = DMatrix::zeros(x.n(), q);
        for (i, row) in x.rows().enumerate() {
            b.set_row(i, &self.eval(row).transpose());
        }
        b
    }
}

pub const INITIAL_JITTER: f64 = 1e-8;
pub const MAX_JITTER: f64 = 1e-4;

/// Settings for the profile-likelihood search over `ln θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub family: KernelFamily,
    pub nu: f64,
    pub basis: BasisSpec,
    pub theta_bounds: (f64, f64),
    pub grid_points: usize,
    /// Golden-section tolerance in `ln θ`.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            family: KernelFamily::Matern,
            nu: DEFAULT_NU,
            basis: BasisSpec::Constant,
            theta_bounds: (1e-2, 1e3),
            grid_points: 20,
            tolerance: 1e-4,
        }
    }
}

impl FitOptions {
    pub fn with_family(family: KernelFamily) -> Self {
        Self {
            family,
            ..Self::default()
        }
    }
}

/// Point summary of a fitted model, as stored in state files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpSummary {
    pub theta: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub jitter: f64,
}

/// Noise-free universal kriging model with plug-in estimates of θ, β and σ².
#[derive(Debug, Clone)]
pub struct GpModel {
    x: DesignMatrix,
    y: DVector<f64>,
    kernel: Kernel,
    basis: BasisSpec,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    beta: DVector<f64>,
    sigma2: f64,
    /// `R⁻¹ (y - Bβ)`.
    alpha: DVector<f64>,
    /// `L⁻¹ B` with `R = L Lᵀ`.
    linv_b: DMatrix<f64>,
    /// `(Bᵀ R⁻¹ B)⁻¹`.
    gram_inv: DMatrix<f64>,
}

/// Fits θ by maximizing the profile log-likelihood, then builds the model.
pub fn fit_gp(x: &DesignMatrix, y: &[f64], opts: &FitOptions) -> Result<GpModel> {
    check_inputs(x, y, opts.basis)?;
    let (lo, hi) = opts.theta_bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid_arg("theta bounds must satisfy 0 < lo < hi"));
    }
    let dist = pairwise(x);
    let yv = DVector::from_column_slice(y);
    let b = opts.basis.matrix(x);

    let spread = y.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
        - y.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let theta = if spread <= 1e-14 * (1.0 + y[0].abs()) {
        // flat data: every θ gives a zero residual
        (lo * hi).sqrt()
    } else {
        let objective = |log_theta: f64| {
            Kernel::new(opts.family, log_theta.exp(), opts.nu)
                .ok()
                .and_then(|k| profile_loglik(&dist, &yv, &b, &k))
                .unwrap_or(f64::NEG_INFINITY)
        };
        maximize_log_theta(objective, lo.ln(), hi.ln(), opts.grid_points, opts.tolerance).exp()
    };
    fit_gp_with_kernel(x, y, Kernel::new(opts.family, theta, opts.nu)?, opts.basis)
}

/// Builds the model for a fixed kernel (no hyperparameter search).
pub fn fit_gp_with_kernel(
    x: &DesignMatrix,
    y: &[f64],
    kernel: Kernel,
    basis: BasisSpec,
) -> Result<GpModel> {
    check_inputs(x, y, basis)?;
    let n = x.n();
    let dist = pairwise(x);
    let (chol, jitter) = factorize(&dist, &kernel)?;
    let yv = DVector::from_column_slice(y);
    let b = basis.matrix(x);
    let gls = gls(&chol, &yv, &b)?;
    let sigma2 = (gls.quad / (n as f64 - 1.0)).max(0.0);
    Ok(GpModel {
        x: x.clone(),
        y: yv,
        kernel,
        basis,
        jitter,
        alpha: chol.solve(&gls.resid),
        chol,
        beta: gls.beta,
        sigma2,
        linv_b: gls.linv_b,
        gram_inv: gls.gram_inv,
    })
}

fn check_inputs(x: &DesignMatrix, y: &[f64], basis: BasisSpec) -> Result<()> {
    if x.n() != y.len() {
        return Err(invalid_arg(format!(
            "{} inputs but {} targets",
            x.n(),
            y.len()
        )));
    }
    if x.n() < basis.size() + 2 {
        return Err(invalid_arg(format!(
            "need at least {} points for {} basis functions, got {}",
            basis.size() + 2,
            basis.size(),
            x.n()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SmddError::InvalidData("non-finite GP target".into()));
    }
    Ok(())
}

fn pairwise(x: &DesignMatrix) -> DMatrix<f64> {
    let n = x.n();
    DMatrix::from_fn(n, n, |i, j| sq_dist(x.row(i), x.row(j)).sqrt())
}

fn correlation(dist: &DMatrix<f64>, kernel: &Kernel, jitter: f64) -> DMatrix<f64> {
    let n = dist.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + jitter
        } else {
            kernel.of_distance(dist[(i, j)])
        }
    })
}

/// Cholesky of `R + εI`, escalating ε by 10 from 1e-8 up to 1e-4.
fn factorize(dist: &DMatrix<f64>, kernel: &Kernel) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = INITIAL_JITTER;
    while jitter <= MAX_JITTER * (1.0 + 1e-9) {
        if let Some(chol) = Cholesky::new(correlation(dist, kernel, jitter)) {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
    }
    Err(SmddError::IllConditioned { jitter: MAX_JITTER })
}

struct Gls {
    beta: DVector<f64>,
    resid: DVector<f64>,
    /// `(y - Bβ)ᵀ R⁻¹ (y - Bβ)`.
    quad: f64,
    linv_b: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

fn gls(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>, b: &DMatrix<f64>) -> Result<Gls> {
    let l = chol.l_dirty();
    let linv_b = l
        .solve_lower_triangular(b)
        .ok_or(SmddError::IllConditioned { jitter: MAX_JITTER })?;
    let linv_y = l
        .solve_lower_triangular(y)
        .ok_or(SmddError::IllConditioned { jitter: MAX_JITTER })?;
    let gram = linv_b.transpose() * &linv_b;
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| SmddError::InvalidData("basis matrix is rank deficient".into()))?;
    let beta = &gram_inv * (linv_b.transpose() * &linv_y);
    let resid = y - b * &beta;
    let linv_r = &linv_y - &linv_b * &beta;
    Ok(Gls {
        beta,
        resid,
        quad: linv_r.norm_squared(),
        linv_b,
        gram_inv,
    })
}

/// `-(n ln σ̂²_ML + ln|R|)/2`, or `None` when `R` cannot be factorized.
fn profile_loglik(
    dist: &DMatrix<f64>,
    y: &DVector<f64>,
    b: &DMatrix<f64>,
    kernel: &Kernel,
) -> Option<f64> {
    let (chol, _) = factorize(dist, kernel).ok()?;
    let g = gls(&chol, y, b).ok()?;
    let n = y.len() as f64;
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let s2 = (g.quad / n).max(f64::MIN_POSITIVE);
    let v = -0.5 * (n * s2.ln() + log_det);
    v.is_finite().then_some(v)
}

/// Grid search followed by golden-section refinement around the best cell.
fn maximize_log_theta(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize, tol: f64) -> f64 {
    let grid = grid.max(2);
    let step = (hi - lo) / (grid - 1) as f64;
    let values: Vec<f64> = (0..grid).map(|i| f(lo + step * i as f64)).collect();
    let best = (0..grid)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut a = lo + step * best.saturating_sub(1) as f64;
    let mut b = (lo + step * (best + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let refined = 0.5 * (a + b);
    if f(refined) >= values[best] {
        refined
    } else {
        lo + step * best as f64
    }
}

impl GpModel {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn theta(&self) -> f64 {
        self.kernel.theta
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn inputs(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn summary(&self) -> GpSummary {
        GpSummary {
            theta: self.kernel.theta,
            beta: self.beta[0],
            sigma2: self.sigma2,
            jitter: self.jitter,
        }
    }

    /// Correlation vector `r(x)`; the jitter is added where `x` coincides
    /// with a training input so the model interpolates its own data.
    pub fn correlation_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x.n(),
            self.x.rows().map(|xi| {
                let d2 = sq_dist(xi, x);
                if d2 < 1e-24 {
                    1.0 + self.jitter
                } else {
                    self.kernel.of_distance(d2.sqrt())
                }
            }),
        )
    }

    fn prior_correlation(&self, x: &[f64]) -> f64 {
        if self.x.min_distance_to(x) < 1e-12 {
            1.0 + self.jitter
        } else {
            1.0
        }
    }

    /// Posterior mean and variance at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.x.k() {
            return Err(invalid_arg(format!(
                "point has dimension {}, model has {}",
                x.len(),
                self.x.k()
            )));
        }
        let r = self.correlation_vector(x);
        let bx = self.basis.eval(x);
        let mean = bx.dot(&self.beta) + r.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&r)
            .ok_or(SmddError::IllConditioned { jitter: self.jitter })?;
        let u = &bx - self.linv_b.transpose() * &v;
        let reduced =
            self.prior_correlation(x) - v.norm_squared() + (u.transpose() * &self.gram_inv * &u)[0];
        Ok((mean, (self.sigma2 * reduced).max(0.0)))
    }

    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(self.posterior(x)?.0)
    }

    pub fn posterior_variance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.posterior(x)?.1)
    }
}
