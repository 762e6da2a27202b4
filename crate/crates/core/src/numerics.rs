//! Scaled Bessel functions and adaptive Gauss–Kronrod quadrature.
//!
//! Every analytic quantity in this crate reduces to one- or two-dimensional
//! integrals of smooth, exponentially damped integrands, so a single global
//! adaptive G10/K21 scheme with an explicit tail cut is enough.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerances and truncation policy for the integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Semi-infinite integrals are cut where the certified tail drops below
    /// `abs_tol * tail_cutoff`.
    pub tail_cutoff: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
            tail_cutoff: 1e-2,
        }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::domain(format!(
                "abs_tol must be > 0, got {}",
                self.abs_tol
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::domain(format!(
                "rel_tol must be > 0, got {}",
                self.rel_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::domain("max_subdivisions must be >= 1"));
        }
        if !(self.tail_cutoff > 0.0 && self.tail_cutoff <= 1.0) {
            return Err(Error::domain(format!(
                "tail_cutoff must lie in (0, 1], got {}",
                self.tail_cutoff
            )));
        }
        Ok(())
    }

    /// Configuration for an integral nested inside another one: a hundred
    /// times tighter, so inner noise stays below the outer error estimate.
    pub fn nested(&self) -> Self {
        Self {
            abs_tol: (self.abs_tol * 1e-2).max(1e-15),
            rel_tol: (self.rel_tol * 1e-2).max(1e-14),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// `e^{-x} I_1(x)` for `x >= 0`, free of overflow for every finite `x`.
pub fn bessel_i1_scaled(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "bessel_i1_scaled needs a finite x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x <= 30.0 {
        // All terms positive: no cancellation.
        let half = 0.5 * x;
        let q = half * half;
        let mut term = half;
        let mut sum = term;
        let mut k = 0.0;
        loop {
            term *= q / ((k + 1.0) * (k + 2.0));
            sum += term;
            k += 1.0;
            if term <= sum * 1e-17 {
                break;
            }
        }
        Ok(sum * (-x).exp())
    } else {
        // Hankel expansion with mu = 4 nu^2 = 4, summed to its smallest term.
        let mut term = 1.0_f64;
        let mut sum = 1.0_f64;
        let mut k = 1.0_f64;
        loop {
            let odd = 2.0 * k - 1.0;
            let next = -term * (4.0 - odd * odd) / (8.0 * k * x);
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
            k += 1.0;
        }
        Ok(sum / (2.0 * std::f64::consts::PI * x).sqrt())
    }
}

/// `Xi(u) = 2 e^{-u} I_1(u) / u`, with `Xi(0) = 1`.
///
/// Below `u = 1e-4` the four-term Taylor polynomial `1 - u + 5u²/8 - 7u³/24`
/// replaces the ratio.
pub fn xi(u: f64) -> Result<f64> {
    if !u.is_finite() || u < 0.0 {
        return Err(Error::domain(format!("xi needs a finite u >= 0, got {u}")));
    }
    if u < 1e-4 {
        return Ok(1.0 - u + u * u * (5.0 / 8.0 - u * (7.0 / 24.0)));
    }
    Ok(2.0 * bessel_i1_scaled(u)? / u)
}

// Gauss–Kronrod 10/21 abscissae and weights.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_159_668,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::domain(format!(
                "integrand is not finite near x = {}",
                center - dx
            )));
        }
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    if !fc.is_finite() {
        return Err(Error::domain(format!("integrand is not finite at x = {center}")));
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let abs_half = half.abs();
    let value = res_k * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (1.0_f64).min((200.0 * error / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value, error })
}

/// Global adaptive integration over consecutive panels `points[i]..points[i+1]`.
fn adaptive<F>(f: &mut F, points: &[f64], cfg: &QuadratureConfig, context: &str) -> Result<IntegralResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    cfg.validate()?;
    let mut heap = BinaryHeap::new();
    // Panels too narrow to split further in floating point.
    let mut frozen: Vec<Panel> = Vec::new();
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gk21(f, w[0], w[1])?);
            evaluations += 21;
        }
    }
    let mut subdivisions = heap.len();
    loop {
        let (value, error) = heap
            .iter()
            .chain(frozen.iter())
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        let best = IntegralResult {
            value,
            error_estimate: error,
            evaluations,
        };
        if error <= tol {
            return Ok(best);
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::Convergence {
                context: format!("{context}: roundoff limit reached"),
                best,
            });
        };
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Convergence {
                context: format!("{context}: {} subdivisions exhausted", cfg.max_subdivisions),
                best,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-14 * mid.abs().max(1.0) {
            frozen.push(worst);
            continue;
        }
        heap.push(gk21(f, worst.a, mid)?);
        heap.push(gk21(f, mid, worst.b)?);
        evaluations += 42;
        subdivisions += 1;
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<IntegralResult>
where
    F: Fn(f64) -> f64,
{
    try_integrate_breakpoints(|x| Ok(f(x)), &[a, b], cfg)
}

/// Fallible variant of [`integrate_finite`] with interior breakpoints; the
/// first integrand error aborts the integration.
pub fn try_integrate_breakpoints<F>(
    mut f: F,
    points: &[f64],
    cfg: &QuadratureConfig,
) -> Result<IntegralResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if points.len() < 2 {
        return Err(Error::domain("need at least two integration limits"));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    if points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("integration limits must be non-decreasing"));
    }
    if points[0] == points[points.len() - 1] {
        return Ok(IntegralResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    adaptive(&mut f, points, cfg, "finite interval")
}

/// Certified envelope `|f(s)| <= scale * exp(-rate * s)` for `s >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub scale: f64,
    pub rate: f64,
}

impl DecayBound {
    pub fn new(scale: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::domain(format!("decay rate must be > 0, got {rate}")));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!("decay scale must be >= 0, got {scale}")));
        }
        Ok(Self { scale, rate })
    }

    /// Bound on `∫_L^∞ |f|`.
    pub fn tail(&self, cut: f64) -> f64 {
        self.scale * (-self.rate * cut).exp() / self.rate
    }

    /// Smallest cut whose tail bound is at most `target`.
    pub fn cut_for(&self, target: f64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        ((self.scale / (self.rate * target)).ln() / self.rate).max(0.0)
    }
}

/// Integrates `f` over `[0, ∞)` by truncating where the certified tail
/// falls below `abs_tol * tail_cutoff`; the tail bound is added to the
/// error estimate.
pub fn integrate_semi_infinite<F>(f: F, bound: DecayBound, cfg: &QuadratureConfig) -> Result<IntegralResult>
where
    F: Fn(f64) -> f64,
{
    try_integrate_semi_infinite(|x| Ok(f(x)), bound, &[], cfg)
}

/// Fallible variant of [`integrate_semi_infinite`]; `breaks` are interior
/// points where the integrand changes character (kinks, narrow features).
pub fn try_integrate_semi_infinite<F>(
    f: F,
    bound: DecayBound,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<IntegralResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let bound = DecayBound::new(bound.scale, bound.rate)?;
    cfg.validate()?;
    let cut = bound.cut_for(cfg.abs_tol * cfg.tail_cutoff);
    if cut == 0.0 {
        return Ok(IntegralResult {
            value: 0.0,
            error_estimate: bound.tail(0.0),
            evaluations: 0,
        });
    }
    let mut points = vec![0.0];
    points.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < cut));
    let mut p = (1.0 / bound.rate).min(1.0);
    while p < cut {
        points.push(p);
        p *= 2.0;
    }
    points.push(cut);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut f = f;
    let mut res = adaptive(&mut f, &points, cfg, "semi-infinite interval")?;
    res.error_estimate += bound.tail(cut);
    Ok(res)
}
