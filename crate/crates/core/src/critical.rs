//! Critical openness `η_c(κ)` where `F(η|κ)` is minimal, and the inverse
//! map from an observed minimum `F_min` back to the chaoticity `κ`.

use rayon::prelude::*;
use serde::Serialize;

use crate::enhancement::enhancement_exact;
use crate::error::{Error, Result};
use crate::formfactor::{laplace_b2_eta_derivative, Chaoticity};
use crate::numerics::QuadratureConfig;

/// `|∂F/∂η|` below which a bracketed root counts as converged.
pub const DERIVATIVE_TOL: f64 = 1e-8;

/// Inversion stops once `|F_min(κ) - target|` falls below this.
pub const FMIN_TOL: f64 = 1e-7;

pub const KAPPA_SEARCH_MIN: f64 = 1e-3;
pub const KAPPA_SEARCH_MAX: f64 = 1e4;

const SCAN_START: f64 = 1e-4;
const SCAN_PER_DECADE: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub eta_c: f64,
    pub f_min: f64,
    pub kappa: Chaoticity,
    /// `∂F/∂η` at `eta_c`.
    pub slope: f64,
}

/// `∂F/∂η = -∫₀^∞ e^{-ηs}(1 - ηs) B₂(s|κ) ds`.
pub fn df_deta(eta: f64, kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<f64> {
    if kappa.validated()?.is_regular() {
        return Err(Error::NoCriticalPoint("F(eta|0) = 2 is constant".into()));
    }
    Ok(-laplace_b2_eta_derivative(eta, kappa, cfg)?.value)
}

/// Upper end of the η scan, `max(100, 50κ)`.
pub fn eta_scan_limit(kappa: f64) -> f64 {
    (50.0 * kappa).max(100.0)
}

/// First interior minimum of `F(·|κ)`: a geometric scan for the sign
/// change of `∂F/∂η` followed by bisection.
pub fn eta_critical(kappa: Chaoticity, cfg: &QuadratureConfig) -> Result<CriticalPoint> {
    let k = match kappa.validated()? {
        Chaoticity::Infinite => {
            return Err(Error::domain(
                "kappa = inf: F_GUE decreases monotonically, there is no interior minimum",
            ))
        }
        Chaoticity::Finite(0.0) => return Err(Error::NoCriticalPoint("F(eta|0) = 2 is constant".into())),
        Chaoticity::Finite(k) => k,
    };
    let eta_max = eta_scan_limit(k);
    let ratio = 10f64.powf(1.0 / SCAN_PER_DECADE);

    let mut lo = SCAN_START;
    let mut d_lo = df_deta(lo, kappa, cfg)?;
    let mut bracket = None;
    while lo < eta_max {
        let hi = (lo * ratio).min(eta_max);
        let d_hi = df_deta(hi, kappa, cfg)?;
        if d_lo < 0.0 && d_hi >= 0.0 {
            bracket = Some((lo, hi, d_hi));
            break;
        }
        lo = hi;
        d_lo = d_hi;
    }
    let Some((mut lo, mut hi, d_hi)) = bracket else {
        return Err(Error::NoCriticalPoint(format!(
            "dF/deta keeps one sign on [{SCAN_START}, {eta_max}] for kappa = {k}"
        )));
    };

    let (mut eta_c, mut slope) = (hi, d_hi);
    for _ in 0..200 {
        if slope.abs() < DERIVATIVE_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let d = df_deta(mid, kappa, cfg)?;
        if d < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        eta_c = mid;
        slope = d;
    }
    if slope.abs() >= DERIVATIVE_TOL {
        return Err(Error::Solver(format!(
            "bisection stalled at eta = {eta_c} with dF/deta = {slope:e} for kappa = {k}"
        )));
    }
    let f_min = enhancement_exact(eta_c, kappa, cfg)?.f;
    Ok(CriticalPoint {
        eta_c,
        f_min,
        kappa,
        slope,
    })
}

/// Inverse of `κ ↦ F_min(κ)` on `[1e-3, 1e4]`.
///
/// Construction tabulates `F_min` on a logarithmic κ grid and checks that
/// it is non-increasing; the inversion bisects in `log κ` inside the
/// bracketing grid cell.
#[derive(Debug, Clone)]
pub struct FminInverter {
    grid: Vec<CriticalPoint>,
    cfg: QuadratureConfig,
}

impl FminInverter {
    pub fn new(cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let decades = (KAPPA_SEARCH_MAX / KAPPA_SEARCH_MIN).log10();
        let n = (4.0 * decades).round() as usize;
        let grid = (0..=n)
            .into_par_iter()
            .map(|i| {
                let k = KAPPA_SEARCH_MIN * 10f64.powf(decades * i as f64 / n as f64);
                eta_critical(Chaoticity::Finite(k), cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        for w in grid.windows(2) {
            if w[1].f_min > w[0].f_min {
                return Err(Error::Solver(format!(
                    "F_min is not monotone on the kappa grid: F_min({}) = {} < F_min({}) = {}",
                    w[0].kappa, w[0].f_min, w[1].kappa, w[1].f_min
                )));
            }
        }
        Ok(Self { grid, cfg: *cfg })
    }

    pub fn grid(&self) -> &[CriticalPoint] {
        &self.grid
    }

    /// `(F_min(κ_max), F_min(κ_min))`.
    pub fn attainable_range(&self) -> (f64, f64) {
        (self.grid[self.grid.len() - 1].f_min, self.grid[0].f_min)
    }

    pub fn invert(&self, f_min_observed: f64) -> Result<Chaoticity> {
        if !(f_min_observed > 1.0 && f_min_observed < 2.0) {
            return Err(Error::domain(format!(
                "F_min must lie strictly inside (1, 2), got {f_min_observed}"
            )));
        }
        let (floor, ceiling) = self.attainable_range();
        if !(f_min_observed >= floor && f_min_observed <= ceiling) {
            return Err(Error::domain(format!(
                "F_min = {f_min_observed} is outside the attainable range [{floor}, {ceiling}] \
                 for kappa in [{KAPPA_SEARCH_MIN}, {KAPPA_SEARCH_MAX}]"
            )));
        }
        let cell = self
            .grid
            .windows(2)
            .position(|w| w[0].f_min >= f_min_observed && f_min_observed >= w[1].f_min)
            .ok_or_else(|| Error::Solver("no bracketing cell for F_min".into()))?;
        let left = &self.grid[cell];
        let right = &self.grid[cell + 1];
        for end in [left, right] {
            if (end.f_min - f_min_observed).abs() < FMIN_TOL {
                return Ok(end.kappa);
            }
        }
        let mut lo = left.kappa.as_f64().ln();
        let mut hi = right.kappa.as_f64().ln();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let cp = eta_critical(Chaoticity::Finite(mid.exp()), &self.cfg)?;
            let gap = cp.f_min - f_min_observed;
            if gap.abs() < FMIN_TOL {
                return Ok(cp.kappa);
            }
            // F_min decreases with κ.
            if gap > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        Err(Error::Solver(format!(
            "kappa bisection did not reach |F_min - {f_min_observed}| < {FMIN_TOL}"
        )))
    }
}

/// Root of `F(η_c(κ)|κ) = f_min_observed`; builds a fresh [`FminInverter`].
pub fn kappa_from_fmin(f_min_observed: f64, cfg: &QuadratureConfig) -> Result<Chaoticity> {
    if !(f_min_observed > 1.0 && f_min_observed < 2.0) {
        return Err(Error::domain(format!(
            "F_min must lie strictly inside (1, 2), got {f_min_observed}"
        )));
    }
    FminInverter::new(cfg)?.invert(f_min_observed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn f(eta: f64, k: f64) -> f64 {
        enhancement_exact(eta, Chaoticity::Finite(k), &cfg()).unwrap().f
    }

    #[test]
    fn slope_sign_pattern() {
        let k = Chaoticity::Finite(5.0);
        let near_zero = df_deta(1e-4, k, &cfg()).unwrap();
        assert!((near_zero + 0.5).abs() < 1e-3, "{near_zero}");
        assert!(df_deta(200.0, k, &cfg()).unwrap() > 0.0);
        assert!(matches!(
            df_deta(1.0, Chaoticity::REGULAR, &cfg()),
            Err(Error::NoCriticalPoint(_))
        ));
    }

    #[test]
    fn critical_point_is_a_local_minimum() {
        let cp = eta_critical(Chaoticity::Finite(5.0), &cfg()).unwrap();
        assert!(cp.slope.abs() < DERIVATIVE_TOL);
        assert!(df_deta(cp.eta_c, Chaoticity::Finite(5.0), &cfg()).unwrap().abs() < DERIVATIVE_TOL);
        let delta = 0.1 * cp.eta_c;
        assert!(f(cp.eta_c - delta, 5.0) > cp.f_min);
        assert!(f(cp.eta_c + delta, 5.0) > cp.f_min);
        let h = 1e-3 * cp.eta_c;
        let second = f(cp.eta_c - h, 5.0) - 2.0 * cp.f_min + f(cp.eta_c + h, 5.0);
        assert!(second > 0.0, "{second}");
        assert!(cp.f_min < 2.0 && cp.f_min > 1.0);
    }

    #[test]
    fn critical_openness_grows_with_kappa() {
        let a = eta_critical(Chaoticity::Finite(5.0), &cfg()).unwrap();
        let b = eta_critical(Chaoticity::Finite(50.0), &cfg()).unwrap();
        assert!(b.eta_c > a.eta_c);
        assert!(b.f_min < a.f_min);
    }

    #[test]
    fn excluded_chaoticities() {
        assert!(matches!(
            eta_critical(Chaoticity::Infinite, &cfg()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            eta_critical(Chaoticity::REGULAR, &cfg()),
            Err(Error::NoCriticalPoint(_))
        ));
    }

    #[test]
    fn fmin_non_increasing_on_reference_grid() {
        let mut prev = 2.0;
        for &k in &[0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
            let cp = eta_critical(Chaoticity::Finite(k), &cfg()).unwrap();
            assert!(cp.f_min < 2.0);
            assert!(cp.f_min <= prev, "k={k}: {} > {prev}", cp.f_min);
            prev = cp.f_min;
        }
    }

    #[test]
    fn inversion_round_trip_and_range() {
        let inv = FminInverter::new(&cfg()).unwrap();
        let target = eta_critical(Chaoticity::Finite(5.0), &cfg()).unwrap().f_min;
        let k = inv.invert(target).unwrap().as_f64();
        assert!((k / 5.0 - 1.0).abs() < 1e-3, "{k}");
        let back = eta_critical(Chaoticity::Finite(k), &cfg()).unwrap().f_min;
        assert!((back - target).abs() < 1e-6);

        let small = inv.invert(1.99).unwrap().as_f64();
        assert!(small < 0.5, "{small}");
        assert!(matches!(inv.invert(2.0), Err(Error::Domain(_))));
        assert!(matches!(inv.invert(2.5), Err(Error::Domain(_))));
        let (floor, _) = inv.attainable_range();
        assert!(matches!(inv.invert(0.5 * (1.0 + floor)), Err(Error::Domain(_))));
    }
}
