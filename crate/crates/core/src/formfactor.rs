//! Transient binary form factor `B₂(s|κ)` of the Poisson→GUE crossover and
//! the Laplace-type transforms of it that enter the enhancement factor.
//!
//! The form factor is
//!
//! ```text
//! B₂(s|κ) = (1-s)θ(1-s) - (2/π) ∫₀^π dθ sin²θ (2√s cosθ + 1) e^{-κ s D} / D,
//! D(s, θ) = s + 2√s cosθ + 1 = (√s - 1)² + 4√s cos²(θ/2),
//! ```
//!
//! and at `κ = 0` the angular integral reproduces `(1-s)θ(1-s)` exactly.
//! Subtracting that identity under the integral sign gives the form used
//! here,
//!
//! ```text
//! B₂(s|κ) = (2/π) ∫₀^π dθ sin²θ (2√s cosθ + 1) (1 - e^{-κ s D}) / D,
//! ```
//!
//! whose integrand is bounded by `κ s (2√s + 1)` and has no removable
//! `0/0` at `(s = 1, θ = π)` nor a kink at `s = 1`.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{
    try_integrate_breakpoints, try_integrate_semi_infinite, DecayBound, IntegralResult, QuadratureConfig,
};

/// Chaoticity `κ` of the internal dynamics: `0` is regular (Poisson),
/// [`Chaoticity::Infinite`] is fully chaotic (GUE).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chaoticity {
    Finite(f64),
    Infinite,
}

impl Chaoticity {
    pub const REGULAR: Chaoticity = Chaoticity::Finite(0.0);

    pub fn new(kappa: f64) -> Result<Self> {
        if kappa == f64::INFINITY {
            return Ok(Chaoticity::Infinite);
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::domain(format!("kappa must be >= 0, got {kappa}")));
        }
        Ok(Chaoticity::Finite(kappa))
    }

    /// Re-checks a value built directly from the `Finite` variant.
    pub fn validated(self) -> Result<Self> {
        match self {
            Chaoticity::Finite(k) => Chaoticity::new(k),
            Chaoticity::Infinite => Ok(self),
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Chaoticity::Finite(k) => Some(k),
            Chaoticity::Infinite => None,
        }
    }

    pub fn is_regular(self) -> bool {
        self == Chaoticity::REGULAR
    }

    pub fn is_infinite(self) -> bool {
        self == Chaoticity::Infinite
    }

    /// `κ` as a float, `+∞` for the chaotic limit.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Chaoticity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chaoticity::Finite(k) => write!(f, "{k}"),
            Chaoticity::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Chaoticity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "∞" => Ok(Chaoticity::Infinite),
            t => {
                let k: f64 = t
                    .parse()
                    .map_err(|_| Error::domain(format!("cannot parse kappa from '{s}'")))?;
                Chaoticity::new(k)
            }
        }
    }
}

impl Serialize for Chaoticity {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Chaoticity::Finite(k) => serializer.serialize_f64(*k),
            Chaoticity::Infinite => serializer.serialize_str("inf"),
        }
    }
}

/// Time `s ≥ 0` in units of the Heisenberg time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ScaledTime(f64);

impl ScaledTime {
    pub fn new(s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::domain(format!(
                "scaled time must be finite and >= 0, got {s}"
            )));
        }
        Ok(Self(s))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// GUE form factor `(1-s)θ(1-s)`.
pub fn b2_gue(s: ScaledTime) -> f64 {
    (1.0 - s.0).max(0.0)
}

/// `(1 - e^{-κ s D}) / D`, finite as `D → 0`.
#[inline]
fn damped_kernel(ks: f64, d: f64) -> f64 {
    let z = ks * d;
    if z < 1e-8 {
        ks * (1.0 - 0.5 * z)
    } else {
        -(-z).exp_m1() / d
    }
}

/// Angular integrand of the cancellation-free form at fixed `(s, κ)`.
#[inline]
fn angular_integrand(s: f64, kappa: f64, theta: f64) -> f64 {
    let rs = s.sqrt();
    let c = theta.cos();
    let half_cos = (0.5 * theta).cos();
    let d = (rs - 1.0) * (rs - 1.0) + 4.0 * rs * half_cos * half_cos;
    let sin = theta.sin();
    sin * sin * (2.0 * rs * c + 1.0) * damped_kernel(kappa * s, d)
}

/// `B₂(s|κ)` for finite `κ > 0`, without argument checks.
pub(crate) fn b2_finite(s: f64, kappa: f64, cfg: &QuadratureConfig) -> Result<IntegralResult> {
    if s == 0.0 || kappa == 0.0 {
        return Ok(IntegralResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let r = try_integrate_breakpoints(|t| Ok(angular_integrand(s, kappa, t)), &[0.0, 0.5 * PI, PI], cfg)?;
    Ok(IntegralResult {
        value: FRAC_2_PI * r.value,
        error_estimate: FRAC_2_PI * r.error_estimate,
        evaluations: r.evaluations,
    })
}

/// Transient binary form factor `B₂(s|κ)` (β = 2).
pub fn b2_transient(s: ScaledTime, kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    match kappa.validated()? {
        Chaoticity::Infinite => Ok(IntegralResult {
            value: b2_gue(s),
            error_estimate: 0.0,
            evaluations: 0,
        }),
        Chaoticity::Finite(k) => b2_finite(s.0, k, cfg),
    }
}

// Crude certified envelope |B₂| <= 3.
const B2_BOUND: f64 = 3.0;

// Panel breaks for outer s-integrals: the form factor changes fastest near s = 1.
pub(crate) const S_BREAKS: [f64; 5] = [0.5, 0.81, 1.0, 1.21, 2.0];

fn check_eta(eta: f64) -> Result<()> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::domain(format!(
            "openness eta must be finite and >= 0, got {eta}"
        )));
    }
    Ok(())
}

/// `1 - (1 - e^{-η})/η`: the GUE value of [`laplace_b2`].
pub fn laplace_b2_gue(eta: f64) -> f64 {
    if eta == 0.0 {
        return 0.0;
    }
    1.0 + (-eta).exp_m1() / eta
}

/// `η ∫₀^∞ ds e^{-ηs} B₂(s|κ)`, lying in `[0, 1]`.
pub fn laplace_b2(eta: f64, kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<IntegralResult> {
    check_eta(eta)?;
    cfg.validate()?;
    let exact = |value| IntegralResult {
        value,
        error_estimate: 0.0,
        evaluations: 0,
    };
    let k = match kappa.validated()? {
        _ if eta == 0.0 => return Ok(exact(0.0)),
        Chaoticity::Infinite => return Ok(exact(laplace_b2_gue(eta))),
        Chaoticity::Finite(0.0) => return Ok(exact(0.0)),
        Chaoticity::Finite(k) => k,
    };
    let inner = cfg.nested();
    let outer = QuadratureConfig {
        abs_tol: cfg.abs_tol / eta,
        ..*cfg
    };
    let r = try_integrate_semi_infinite(
        |s| Ok((-eta * s).exp() * b2_finite(s, k, &inner)?.value),
        DecayBound::new(B2_BOUND, eta)?,
        &S_BREAKS,
        &outer,
    )?;
    Ok(IntegralResult {
        value: eta * r.value,
        error_estimate: eta * r.error_estimate,
        evaluations: r.evaluations,
    })
}

/// `d/dη [η ∫ e^{-ηs} B₂ ds] = ∫₀^∞ ds e^{-ηs} (1 - ηs) B₂(s|κ)`.
pub fn laplace_b2_eta_derivative(
    eta: f64,
    kappa: Chaoticity,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult> {
    check_eta(eta)?;
    if eta == 0.0 {
        return Err(Error::domain("eta derivative needs eta > 0"));
    }
    cfg.validate()?;
    let exact = |value| IntegralResult {
        value,
        error_estimate: 0.0,
        evaluations: 0,
    };
    let k = match kappa.validated()? {
        Chaoticity::Infinite => {
            let num = -(-eta).exp_m1() - eta * (-eta).exp();
            return Ok(exact(num / (eta * eta)));
        }
        Chaoticity::Finite(0.0) => return Ok(exact(0.0)),
        Chaoticity::Finite(k) => k,
    };
    let inner = cfg.nested();
    // |(1 - x) e^{-x/2}| <= 1 for x >= 0.
    let r = try_integrate_semi_infinite(
        |s| Ok((-eta * s).exp() * (1.0 - eta * s) * b2_finite(s, k, &inner)?.value),
        DecayBound::new(B2_BOUND, 0.5 * eta)?,
        &S_BREAKS,
        cfg,
    )?;
    Ok(r)
}
