//! Elastic enhancement factor `F(η|κ)` for broken time-reversal symmetry.
//!
//! The primary route is `F = 2 - η ∫₀^∞ e^{-ηs} B₂(s|κ) ds`. The other
//! routes are kept as cross-checks and approximations:
//!
//! * [`repr_small_kappa`] and [`repr_large_kappa`] build `F` from the
//!   auxiliary function [`psi`], with the `η`-derivatives taken under the
//!   integral sign (each `∂/∂η` brings down a factor `-s`).
//! * [`series_small_kappa`] is the printed small-κ expansion.
//! * [`approx_large_kappa`] is the Laplace-method result around `s = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::formfactor::{laplace_b2, laplace_b2_gue, Chaoticity};
use crate::numerics::{
    try_integrate_breakpoints, try_integrate_semi_infinite, xi, DecayBound, IntegralResult, QuadratureConfig,
};

/// Openness `η = t_H / t_W = M T`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Openness(f64);

impl Openness {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::domain(format!(
                "openness must be finite and >= 0, got {eta}"
            )));
        }
        Ok(Self(eta))
    }

    /// `η = M T` for `M` statistically equivalent channels of transmission `T`.
    pub fn from_channels(n_channels: usize, transmission: f64) -> Result<Self> {
        Self::new(n_channels as f64 * transmission)
    }

    /// `η = t_H / t_W`.
    pub fn from_times(heisenberg_time: f64, dwell_time: f64) -> Result<Self> {
        if dwell_time.is_nan() || dwell_time <= 0.0 {
            return Err(Error::domain("dwell time must be > 0"));
        }
        Self::new(heisenberg_time / dwell_time)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Symmetry class of the limiting ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryClass {
    /// β = 1, time-reversal invariant.
    Orthogonal,
    /// β = 2, broken time-reversal invariance.
    Unitary,
}

impl SymmetryClass {
    pub fn beta(self) -> u8 {
        match self {
            SymmetryClass::Orthogonal => 1,
            SymmetryClass::Unitary => 2,
        }
    }

    /// The symmetry offset `δ_{β1}`.
    pub fn offset(self) -> f64 {
        match self {
            SymmetryClass::Orthogonal => 1.0,
            SymmetryClass::Unitary => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    ReprSmallKappa,
    ReprLargeKappa,
    SeriesSmallKappa,
    ApproxLargeKappa,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::ReprSmallKappa => "repr_small_kappa",
            Method::ReprLargeKappa => "repr_large_kappa",
            Method::SeriesSmallKappa => "series_small_kappa",
            Method::ApproxLargeKappa => "approx_large_kappa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnhancementValue {
    pub f: f64,
    pub method: Method,
    pub error_estimate: f64,
}

fn check_positive_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain(format!(
            "openness eta must be finite and > 0, got {eta}"
        )));
    }
    Ok(())
}

/// `(1 - e^{-η})/η`, equal to 1 at `η = 0`.
fn gue_decay(eta: f64) -> f64 {
    if eta == 0.0 {
        1.0
    } else {
        -(-eta).exp_m1() / eta
    }
}

/// `F_GUE(η) = 1 + (1 - e^{-η})/η`.
pub fn enhancement_gue(eta: f64) -> f64 {
    1.0 + gue_decay(eta)
}

// s-panel breaks; the window |√s - 1| < 0.1 gets its own panels.
const S_BREAKS_FINE: [f64; 9] = [0.25, 0.5, 0.81, 0.9, 1.0, 1.1, 1.21, 2.0, 4.0];

/// `e^{-κ s (√s-1)²} Ξ(2κ s^{3/2})`, the κ-integrand shared by Ψ and its
/// κ-integrals. Equal to `e^{-κ s(s+1)} I₁(2κ s^{3/2}) / (κ s^{3/2})`.
#[inline]
fn psi_kernel(s: f64, kappa: f64) -> Result<f64> {
    let rs = s.sqrt();
    let gap = rs - 1.0;
    Ok((-kappa * s * gap * gap).exp() * xi(2.0 * kappa * s * rs)?)
}

/// `Ψ(η|κ) = η ∫₀^∞ ds e^{-κ s(√s-1)² - sη} Ξ(2κ s^{3/2})`.
pub fn psi(eta: f64, kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<IntegralResult> {
    check_positive_eta(eta)?;
    cfg.validate()?;
    let k = match kappa.validated()? {
        Chaoticity::Infinite => return Ok(exact(0.0)),
        Chaoticity::Finite(0.0) => return Ok(exact(1.0)),
        Chaoticity::Finite(k) => k,
    };
    let outer = QuadratureConfig {
        abs_tol: cfg.abs_tol / eta,
        ..*cfg
    };
    // Exponent is non-positive and Ξ <= 1, so the integrand is below e^{-sη}.
    let r = try_integrate_semi_infinite(
        |s| Ok((-eta * s).exp() * psi_kernel(s, k)?),
        DecayBound::new(1.0, eta)?,
        &S_BREAKS_FINE,
        &outer,
    )?;
    Ok(scaled(r, eta))
}

fn exact(value: f64) -> IntegralResult {
    IntegralResult {
        value,
        error_estimate: 0.0,
        evaluations: 0,
    }
}

fn scaled(r: IntegralResult, factor: f64) -> IntegralResult {
    IntegralResult {
        value: factor * r.value,
        error_estimate: factor.abs() * r.error_estimate,
        evaluations: r.evaluations,
    }
}

/// `F(η|κ) = 2 - η ∫₀^∞ e^{-ηs} B₂(s|κ) ds`, the primary route.
pub fn enhancement_exact(eta: f64, kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<EnhancementValue> {
    let l = laplace_b2(eta, kappa, cfg)?;
    Ok(EnhancementValue {
        f: 2.0 - l.value,
        method: Method::Exact,
        error_estimate: l.error_estimate,
    })
}

/// `F` for an explicit symmetry class. Only the regular limit is defined
/// for β = 1; every other β = 1 request is [`Error::Unsupported`].
pub fn enhancement_with_symmetry(
    eta: f64,
    kappa: Chaoticity,
    symmetry: SymmetryClass,
    cfg: &QuadratureConfig,
) -> Result<EnhancementValue> {
    match symmetry {
        SymmetryClass::Unitary => enhancement_exact(eta, kappa, cfg),
        SymmetryClass::Orthogonal => {
            Openness::new(eta)?;
            if kappa.validated()?.is_regular() {
                Ok(EnhancementValue {
                    f: 2.0 + symmetry.offset(),
                    method: Method::Exact,
                    error_estimate: 0.0,
                })
            } else {
                Err(Error::Unsupported(format!(
                    "no binary form factor is available for beta = 1 at kappa = {kappa}"
                )))
            }
        }
    }
}

/// `F = 1 + Ψ(η|κ) + η ∂²_η[(1/η) ∫₀^κ Ψ(η|κ') dκ']`, evaluated as
/// `1 + Ψ + η ∫₀^∞ ds s² e^{-sη} J(s,κ)` with `J = ∫₀^κ dκ' e^{-κ's(s+1)} I₁(2κ's^{3/2})/(κ's^{3/2})`.
pub fn repr_small_kappa(eta: f64, kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<EnhancementValue> {
    check_positive_eta(eta)?;
    cfg.validate()?;
    let k = match kappa.validated()? {
        Chaoticity::Infinite => {
            return Err(Error::domain("repr_small_kappa needs a finite kappa"));
        }
        Chaoticity::Finite(0.0) => {
            return Ok(EnhancementValue {
                f: 2.0,
                method: Method::ReprSmallKappa,
                error_estimate: 0.0,
            })
        }
        Chaoticity::Finite(k) => k,
    };
    let p = psi(eta, kappa, cfg)?;
    let inner = cfg.nested();
    let mut kappa_breaks = vec![0.0];
    let mut b = k * 1e-3;
    while b < k {
        kappa_breaks.push(b);
        b *= 4.0;
    }
    kappa_breaks.push(k);
    let head = |s: f64| -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        let j = try_integrate_breakpoints(|kp| psi_kernel(s, kp), &kappa_breaks, &inner)?;
        Ok(s * s * (-eta * s).exp() * j.value)
    };
    // J <= κ and s² e^{-sη/2} <= 16 / (e η)².
    let scale = k * 16.0 / (std::f64::consts::E * eta).powi(2);
    let outer = QuadratureConfig {
        abs_tol: cfg.abs_tol / eta,
        ..*cfg
    };
    let r = try_integrate_semi_infinite(head, DecayBound::new(scale, 0.5 * eta)?, &S_BREAKS_FINE, &outer)?;
    Ok(EnhancementValue {
        f: 1.0 + p.value + eta * r.value,
        method: Method::ReprSmallKappa,
        error_estimate: p.error_estimate + eta * r.error_estimate,
    })
}

/// `F = 1 + (1-e^{-η})/η + Ψ - η ∂²_η[(1/η) ∫_κ^∞ Ψ(η|κ') dκ']`.
///
/// The κ'-tail is mapped onto `t ∈ (0, 1]` by `κ' = κ / t²`; the kernel
/// decays like `κ'^{-3/2}` at `s = 1`, which makes the mapped integrand
/// finite at `t = 0`.
pub fn repr_large_kappa(eta: f64, kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<EnhancementValue> {
    check_positive_eta(eta)?;
    cfg.validate()?;
    let k = match kappa.validated()? {
        Chaoticity::Infinite => {
            return Ok(EnhancementValue {
                f: enhancement_gue(eta),
                method: Method::ReprLargeKappa,
                error_estimate: 0.0,
            })
        }
        Chaoticity::Finite(0.0) => {
            return Err(Error::domain("repr_large_kappa needs kappa > 0"));
        }
        Chaoticity::Finite(k) => k,
    };
    let p = psi(eta, kappa, cfg)?;
    let inner = cfg.nested();
    let tail = |s: f64| -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        let k_tail = try_integrate_breakpoints(
            |t| {
                if t == 0.0 {
                    return Ok(0.0);
                }
                let kp = k / (t * t);
                Ok(2.0 * k / (t * t * t) * psi_kernel(s, kp)?)
            },
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            &inner,
        )?;
        Ok(s * s * (-eta * s).exp() * k_tail.value)
    };
    // ∫₀^∞ kernel dκ' = min(1/s, 1/s²), so s² × tail <= 1.
    let outer = QuadratureConfig {
        abs_tol: cfg.abs_tol / eta,
        ..*cfg
    };
    let r = try_integrate_semi_infinite(tail, DecayBound::new(1.0, eta)?, &S_BREAKS_FINE, &outer)?;
    Ok(EnhancementValue {
        f: enhancement_gue(eta) + p.value - eta * r.value,
        method: Method::ReprLargeKappa,
        error_estimate: p.error_estimate + eta * r.error_estimate,
    })
}

/// The expansion stops being meaningful once `κ/η` exceeds one half.
pub fn series_is_meaningful(eta: f64, kappa: f64) -> bool {
    eta > 0.0 && kappa / eta <= 0.5
}

/// `2 - κ/η + (6+η)κ²/η³ - (60 + η(20+η))κ³/η⁵`, truncated after `order`
/// powers of κ. The error estimate is the size of the last kept term.
pub fn series_small_kappa(eta: f64, kappa: f64, order: u32) -> Result<EnhancementValue> {
    check_positive_eta(eta)?;
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!(
            "series needs a finite kappa >= 0, got {kappa}"
        )));
    }
    if !(1..=3).contains(&order) {
        return Err(Error::domain(format!(
            "series order must be 1, 2 or 3, got {order}"
        )));
    }
    let terms = [
        -kappa / eta,
        (6.0 + eta) * kappa.powi(2) / eta.powi(3),
        -(60.0 + eta * (20.0 + eta)) * kappa.powi(3) / eta.powi(5),
    ];
    let kept = &terms[..order as usize];
    Ok(EnhancementValue {
        f: 2.0 + kept.iter().sum::<f64>(),
        method: Method::SeriesSmallKappa,
        error_estimate: kept.last().map_or(0.0, |t| t.abs()),
    })
}

/// `1 + (1-e^{-η})/η + η/(η+κ) - η/(η+κ)²`, intended for `κ ≫ 1`.
pub fn approx_large_kappa(eta: f64, kappa: Chaoticity) -> Result<EnhancementValue> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::domain(format!(
            "openness eta must be finite and >= 0, got {eta}"
        )));
    }
    let k = match kappa.validated()? {
        Chaoticity::Infinite => {
            return Ok(EnhancementValue {
                f: enhancement_gue(eta),
                method: Method::ApproxLargeKappa,
                error_estimate: 0.0,
            })
        }
        Chaoticity::Finite(0.0) => {
            return Err(Error::domain("approx_large_kappa needs kappa > 0"));
        }
        Chaoticity::Finite(k) => k,
    };
    let sum = eta + k;
    Ok(EnhancementValue {
        f: 1.0 + gue_decay(eta) + eta / sum - eta / (sum * sum),
        method: Method::ApproxLargeKappa,
        error_estimate: f64::NAN,
    })
}

/// One-sided derivative `∂F/∂η` at `η = 0⁺`, by Richardson extrapolation
/// of forward differences. `κ = 0` returns 0 (F is constant).
pub fn slope_at_origin(kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<f64> {
    let kappa = kappa.validated()?;
    let step0 = match kappa {
        Chaoticity::Finite(0.0) => return Ok(0.0),
        Chaoticity::Finite(k) => 0.1 * k.sqrt().min(1.0),
        Chaoticity::Infinite => 0.1,
    };
    // (F(h) - F(0)) / h = -laplace_b2(h) / h
    let levels = 4;
    let mut table: Vec<f64> = (0..levels)
        .map(|i| {
            let h = step0 / f64::from(1u32 << i);
            let l = match kappa {
                Chaoticity::Infinite => laplace_b2_gue(h),
                _ => laplace_b2(h, kappa, cfg)?.value,
            };
            Ok(-l / h)
        })
        .collect::<Result<_>>()?;
    for order in 1..levels {
        let factor = f64::from(1u32 << order);
        for i in (order..levels).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    Ok(table[levels - 1])
}

/// Extrema of the exponent `-κ s(√s-1)² - ηs` in the Ψ integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddlePoints {
    /// Always a maximum, where the integrand equals one.
    pub s0: f64,
    /// Second maximum; exists while `η <= κ/8`.
    pub s1: Option<f64>,
    /// Where `s1` merges with the minimum, at `η = κ/8`.
    pub inflection: f64,
}

pub const SADDLE_INFLECTION: f64 = 9.0 / 16.0;

pub fn saddle_points(eta: f64, kappa: f64) -> Result<SaddlePoints> {
    if !(eta >= 0.0 && kappa > 0.0 && eta.is_finite() && kappa.is_finite()) {
        return Err(Error::domain("saddle points need eta >= 0 and finite kappa > 0"));
    }
    let ratio = eta / kappa;
    let s1 = (ratio <= 0.125).then(|| (5.0 - 4.0 * ratio + 3.0 * (1.0 - 8.0 * ratio).sqrt()) / 8.0);
    Ok(SaddlePoints {
        s0: 0.0,
        s1,
        inflection: SADDLE_INFLECTION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn fin(k: f64) -> Chaoticity {
        Chaoticity::Finite(k)
    }

    fn exact_f(eta: f64, k: Chaoticity) -> f64 {
        enhancement_exact(eta, k, &cfg()).unwrap().f
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut sum = f(a) + f(b);
        for i in 1..n {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        sum * h / 3.0
    }

    // Unscaled I₁ by its power series: independent of the scaled kernel.
    fn bessel_i1_series(x: f64) -> f64 {
        let mut term = x / 2.0;
        let mut sum = term;
        let mut k = 0.0;
        while term > 1e-18 * sum {
            term *= (x / 2.0).powi(2) / ((k + 1.0) * (k + 2.0));
            sum += term;
            k += 1.0;
        }
        sum
    }

    #[test]
    fn psi_limits() {
        assert_eq!(psi(3.0, Chaoticity::REGULAR, &cfg()).unwrap().value, 1.0);
        assert_eq!(psi(3.0, Chaoticity::Infinite, &cfg()).unwrap().value, 0.0);
        assert!(psi(0.0, fin(1.0), &cfg()).is_err());
        assert!(psi(-1.0, fin(1.0), &cfg()).is_err());
    }

    #[test]
    fn psi_against_unscaled_bessel_brute_force() {
        // η ∫ e^{-κs(s+1) - sη} I₁(2κ s^{3/2}) / (κ s^{3/2}) ds on [0, 6] with
        // 60000 Simpson panels; the remainder is below e^{-6}·e^{-5·6·7}.
        let (eta, k) = (1.0, 5.0);
        let f = |s: f64| {
            if s == 0.0 {
                return 1.0;
            }
            let a = k * s.powf(1.5);
            (-k * s * (s + 1.0) - s * eta).exp() * bessel_i1_series(2.0 * a) / a
        };
        let oracle = eta * simpson(f, 0.0, 6.0, 60_000);
        let got = psi(eta, fin(k), &cfg()).unwrap().value;
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }

    #[test]
    fn psi_bounds() {
        for &eta in &[0.1, 1.0, 10.0] {
            for &k in &[0.01, 1.0, 100.0] {
                let v = psi(eta, fin(k), &cfg()).unwrap().value;
                assert!(v > 0.0 && v <= 1.0, "eta={eta} k={k}: {v}");
            }
        }
    }

    #[test]
    fn exact_endpoints() {
        for &eta in &[0.1, 1.0, 10.0] {
            assert!((exact_f(eta, Chaoticity::REGULAR) - 2.0).abs() < 1e-8);
            let gue = 1.0 + (1.0 - (-eta).exp()) / eta;
            assert!((exact_f(eta, Chaoticity::Infinite) - gue).abs() < 1e-8);
        }
        assert_eq!(exact_f(2.0, Chaoticity::REGULAR), 2.0);
        assert!((exact_f(1.0, Chaoticity::Infinite) - 1.632_120_558_828_557_7).abs() < 1e-12);
    }

    #[test]
    fn exact_limits_in_eta() {
        for &k in &[0.5, 5.0, 50.0] {
            assert_eq!(exact_f(0.0, fin(k)), 2.0);
        }
        assert!((exact_f(1e3, fin(5.0)) - 2.0).abs() < 5e-3);
        assert!(exact_f(1e3, fin(0.5)) >= 1.99);
        assert!(exact_f(1e3, fin(5.0)) >= 1.99);
        // At κ = 50 the recovery at η = 10³ is only to 2 - κ/η + O(κ²/η²).
        let f50 = exact_f(1e3, fin(50.0));
        let series = series_small_kappa(1e3, 50.0, 3).unwrap().f;
        assert!((f50 - series).abs() < 1e-3, "{f50} vs {series}");
    }

    #[test]
    fn exact_bounded_between_one_and_two() {
        for &eta in &[0.05, 0.5, 1.0, 3.0, 10.0, 50.0] {
            for &k in &[0.01, 0.5, 5.0, 50.0, 500.0] {
                let f = exact_f(eta, fin(k));
                assert!((1.0..=2.0 + 1e-8).contains(&f), "eta={eta} k={k}: {f}");
            }
        }
    }

    #[test]
    fn beta_one_only_in_regular_limit() {
        let v =
            enhancement_with_symmetry(1.0, Chaoticity::REGULAR, SymmetryClass::Orthogonal, &cfg()).unwrap();
        assert_eq!(v.f, 3.0);
        let e = enhancement_with_symmetry(1.0, fin(2.0), SymmetryClass::Orthogonal, &cfg()).unwrap_err();
        assert!(matches!(e, Error::Unsupported(_)));
        assert!(
            enhancement_with_symmetry(1.0, Chaoticity::Infinite, SymmetryClass::Orthogonal, &cfg()).is_err()
        );
        let u = enhancement_with_symmetry(1.0, fin(2.0), SymmetryClass::Unitary, &cfg()).unwrap();
        assert_eq!(u.f, exact_f(1.0, fin(2.0)));
    }

    #[test]
    fn small_kappa_representation_limits() {
        assert_eq!(repr_small_kappa(1.0, Chaoticity::REGULAR, &cfg()).unwrap().f, 2.0);
        let tiny = repr_small_kappa(1.0, fin(1e-9), &cfg()).unwrap().f;
        assert!((tiny - 2.0).abs() < 1e-8);
        assert!(repr_small_kappa(1.0, Chaoticity::Infinite, &cfg()).is_err());
    }

    #[test]
    fn large_kappa_representation_limits() {
        let v = repr_large_kappa(1.0, Chaoticity::Infinite, &cfg()).unwrap().f;
        assert!((v - (2.0 - (-1.0f64).exp())).abs() < 1e-15);
        let big = repr_large_kappa(1.0, fin(1e6), &cfg()).unwrap().f;
        assert!((big - enhancement_gue(1.0)).abs() < 1e-4);
        assert!(repr_large_kappa(1.0, Chaoticity::REGULAR, &cfg()).is_err());
    }

    #[test]
    fn representations_agree_with_exact_route() {
        for &(eta, k) in &[(2.0, 0.5), (1.0, 5.0)] {
            let e = exact_f(eta, fin(k));
            let s = repr_small_kappa(eta, fin(k), &cfg()).unwrap().f;
            assert!((s - e).abs() < 1e-5, "small eta={eta} k={k}: {s} vs {e}");
        }
        for &(eta, k) in &[(1.0, 50.0), (3.0, 5.0)] {
            let e = exact_f(eta, fin(k));
            let l = repr_large_kappa(eta, fin(k), &cfg()).unwrap().f;
            assert!((l - e).abs() < 1e-4, "large eta={eta} k={k}: {l} vs {e}");
        }
    }

    #[test]
    fn series_values() {
        for order in 1..=3 {
            assert_eq!(series_small_kappa(2.0, 0.0, order).unwrap().f, 2.0);
        }
        assert!((series_small_kappa(2.0, 0.1, 1).unwrap().f - 1.95).abs() < 1e-15);
        let want = 2.0 - 0.1 / 2.0 + 8.0 * 0.01 / 8.0 - (60.0 + 2.0 * 22.0) * 0.001 / 32.0;
        assert!((series_small_kappa(2.0, 0.1, 3).unwrap().f - want).abs() < 1e-15);
        assert!(series_small_kappa(2.0, 0.1, 0).is_err());
        assert!(series_small_kappa(2.0, 0.1, 4).is_err());
        assert!(series_is_meaningful(2.0, 0.1));
        assert!(!series_is_meaningful(1.0, 0.6));
    }

    #[test]
    fn series_error_shrinks_with_order() {
        let e = exact_f(2.0, fin(0.1));
        let errs: Vec<f64> = (1..=3)
            .map(|o| (series_small_kappa(2.0, 0.1, o).unwrap().f - e).abs())
            .collect();
        assert!(errs[2] < 1e-3, "{errs:?}");
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        // Deep in the regime κ/η <= 0.05.
        let e = exact_f(4.0, fin(0.2));
        let errs: Vec<f64> = (1..=3)
            .map(|o| (series_small_kappa(4.0, 0.2, o).unwrap().f - e).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn large_kappa_approximation() {
        assert_eq!(approx_large_kappa(0.0, fin(50.0)).unwrap().f, 2.0);
        let far = approx_large_kappa(1e12, fin(5.0)).unwrap().f;
        assert!((far - 2.0).abs() < 1e-9);
        assert!(approx_large_kappa(0.0, Chaoticity::REGULAR).is_err());
        assert!(approx_large_kappa(1.0, Chaoticity::REGULAR).is_err());
        let a = approx_large_kappa(1.0, fin(50.0)).unwrap().f;
        assert!((a - exact_f(1.0, fin(50.0))).abs() < 0.01);
    }

    #[test]
    fn universal_slope() {
        assert_eq!(slope_at_origin(Chaoticity::REGULAR, &cfg()).unwrap(), 0.0);
        let gue = slope_at_origin(Chaoticity::Infinite, &cfg()).unwrap();
        assert!((gue + 0.5).abs() < 1e-6, "{gue}");
        let half = slope_at_origin(fin(0.5), &cfg()).unwrap();
        assert!((half + 0.5).abs() < 0.02, "{half}");
    }

    #[test]
    fn saddle_point_geometry() {
        let sp = saddle_points(0.0, 10.0).unwrap();
        assert_eq!(sp.s1, Some(1.0));
        let sp = saddle_points(10.0 / 8.0, 10.0).unwrap();
        assert!((sp.s1.unwrap() - SADDLE_INFLECTION).abs() < 1e-15);
        assert!(saddle_points(2.0, 10.0).unwrap().s1.is_none());
        // s1 is a stationary point of -κ s (√s - 1)² - η s.
        let (eta, k) = (0.5, 10.0);
        let s1 = saddle_points(eta, k).unwrap().s1.unwrap();
        let phi = |s: f64| -k * s * (s.sqrt() - 1.0).powi(2) - eta * s;
        let h = 1e-6;
        assert!(((phi(s1 + h) - phi(s1 - h)) / (2.0 * h)).abs() < 1e-6);
        assert!(phi(s1) > phi(s1 + 0.01) && phi(s1) > phi(s1 - 0.01));
    }

    #[test]
    fn openness_constructors() {
        assert_eq!(Openness::from_channels(20, 0.05).unwrap().get(), 1.0);
        assert_eq!(Openness::from_times(10.0, 5.0).unwrap().get(), 2.0);
        assert!(Openness::new(-1.0).is_err());
        assert!(Openness::from_times(1.0, 0.0).is_err());
    }
}
