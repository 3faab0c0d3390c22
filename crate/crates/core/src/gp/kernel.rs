use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::design::euclidean_distance;
use crate::error::{invalid_arg, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `exp(-θ r²)`.
    Gaussian,
    /// Matérn with argument `z = 2√ν r / θ`, normalized to 1 at `r = 0`.
    #[default]
    Matern,
}

pub const DEFAULT_NU: f64 = 2.5;

/// Isotropic correlation function with a single scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub theta: f64,
    /// Matérn smoothness; ignored for the Gaussian family.
    pub nu: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, theta: f64, nu: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid_arg(format!("theta must be positive, got {theta}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(invalid_arg(format!("nu must be positive, got {nu}")));
        }
        Ok(Self { family, theta, nu })
    }

    pub fn gaussian(theta: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, theta, DEFAULT_NU)
    }

    pub fn matern(theta: f64, nu: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern, theta, nu)
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.of_distance(euclidean_distance(a, b)?))
    }

    /// Correlation at Euclidean distance `r`.
    pub fn of_distance(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.theta * r * r).exp(),
            KernelFamily::Matern => matern(2.0 * self.nu.sqrt() * r / self.theta, self.nu),
        }
    }
}

/// Normalized Matérn correlation `2^{1-ν}/Γ(ν) z^ν K_ν(z)`.
pub(crate) fn matern(z: f64, nu: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    match half_integer_order(nu) {
        Some(p) => matern_half_integer(z, p),
        None => matern_bessel(z, nu),
    }
}

fn half_integer_order(nu: f64) -> Option<u32> {
    let p = nu - 0.5;
    (p >= 0.0 && p.fract() == 0.0 && p <= 30.0).then_some(p as u32)
}

/// Closed form for `ν = p + 1/2`:
/// `e^{-z} p!/(2p)! Σ_{i=0}^{p} (p+i)!/(i!(p-i)!) (2z)^{p-i}`.
fn matern_half_integer(z: f64, p: u32) -> f64 {
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    let lead = fact(p) / fact(2 * p);
    let poly: f64 = (0..=p)
        .map(|i| fact(p + i) / (fact(i) * fact(p - i)) * (2.0 * z).powi((p - i) as i32))
        .sum();
    (-z).exp() * lead * poly
}

fn matern_bessel(z: f64, nu: f64) -> f64 {
    if z < 1e-8 {
        return 1.0;
    }
    let log_k = ln_bessel_k(nu, z);
    let log_val = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * z.ln() + log_k;
    log_val.exp().min(1.0)
}

/// `ln K_ν(z)` from `K_ν(z) = ∫_0^∞ exp(-z cosh t) cosh(ν t) dt`, evaluated by
/// the trapezoidal rule, which converges geometrically for this integrand.
pub(crate) fn ln_bessel_k(nu: f64, z: f64) -> f64 {
    const STEP: f64 = 0.005;
    // log-integrand, shifted by its maximum to avoid under/overflow
    let f = |t: f64| -z * t.cosh() + log_cosh(nu * t);
    let mut peak = f(0.0);
    let mut t = 0.0;
    loop {
        let next = f(t + STEP);
        if next < peak {
            break;
        }
        peak = next;
        t += STEP;
    }
    let mut sum = 0.5 * (f(0.0) - peak).exp();
    let mut i = 1usize;
    loop {
        let ti = i as f64 * STEP;
        let v = f(ti) - peak;
        sum += v.exp();
        if ti > t && v < -40.0 {
            break;
        }
        i += 1;
    }
    peak + (sum * STEP).ln()
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_at_zero_distance() {
        let g = Kernel::gaussian(1.0).unwrap();
        assert_eq!(g.eval(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 1.0);
        let m = Kernel::matern(0.7, 2.5).unwrap();
        assert_eq!(m.eval(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 1.0);
        let m = Kernel::matern(0.7, 1.3).unwrap();
        assert_eq!(m.eval(&[0.1], &[0.1]).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_at_unit_distance() {
        let g = Kernel::gaussian(1.0).unwrap();
        let v = g.eval(&[0.0, 0.0], &[0.6, 0.8]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn matern_five_halves_closed_form() {
        let k = Kernel::matern(0.5, 2.5).unwrap();
        for r in [0.01, 0.1, 0.3, 1.0] {
            let s = 10f64.sqrt() * r / 0.5;
            let expected = (1.0 + s + s * s / 3.0) * (-s).exp();
            assert!((k.of_distance(r) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn bessel_route_agrees_with_half_integer_forms() {
        for p in 0..4u32 {
            let nu = p as f64 + 0.5;
            for z in [1e-3, 0.05, 0.5, 1.0, 3.0, 10.0, 40.0] {
                let closed = matern_half_integer(z, p);
                let integral = matern_bessel(z, nu);
                assert!(
                    (closed - integral).abs() < 1e-10 * closed.max(1e-300) + 1e-14,
                    "nu={nu} z={z}: {closed} vs {integral}"
                );
            }
        }
        // K_{1/2}(z) = sqrt(pi/(2z)) e^{-z}
        let z: f64 = 2.0;
        let exact = (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp();
        assert!((ln_bessel_k(0.5, z) - exact.ln()).abs() < 1e-12);
    }

    #[test]
    fn non_half_integer_is_monotone_and_bounded() {
        let k = Kernel::matern(1.0, 1.7).unwrap();
        let mut prev = 1.0;
        for i in 1..50 {
            let v = k.of_distance(i as f64 * 0.05);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Kernel::gaussian(0.0).is_err());
        assert!(Kernel::matern(1.0, -1.0).is_err());
        assert!(Kernel::gaussian(1.0).unwrap().eval(&[0.0], &[0.0, 1.0]).is_err());
    }
}
