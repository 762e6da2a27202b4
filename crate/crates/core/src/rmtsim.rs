//! Random-matrix scattering laboratory.
//!
//! Samples an internal Hamiltonian `H` and Gaussian channel couplings `A`,
//! builds `S(E) = I - iA†(E - H + (i/2)AA†)⁻¹A`, and estimates the
//! enhancement factor, mean S-matrix, transmission and delay-time
//! statistics over independent realizations.
//!
//! Every realization draws from its own ChaCha8 stream selected by
//! `(master_seed, index)`, and records are reduced in index order, so
//! results do not depend on the number of worker threads.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formfactor::{b2_transient, Chaoticity, ScaledTime};
use crate::numerics::QuadratureConfig;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest weak-coupling parameter `x = πγ/(2Nd)` a model may use.
pub const MAX_WEAK_COUPLING: f64 = 0.1;

/// Unitarity requirement on every sampled S-matrix.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Ordered levels with their mean spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    levels: Vec<f64>,
    mean_spacing: f64,
}

impl Spectrum {
    /// Sorts `levels` ascending.
    pub fn new(mut levels: Vec<f64>, mean_spacing: f64) -> Result<Self> {
        if levels.is_empty() || levels.iter().any(|e| !e.is_finite()) {
            return Err(Error::domain("spectrum needs at least one finite level"));
        }
        if !(mean_spacing > 0.0 && mean_spacing.is_finite()) {
            return Err(Error::domain(format!(
                "mean spacing must be > 0, got {mean_spacing}"
            )));
        }
        levels.sort_by(f64::total_cmp);
        Ok(Self { levels, mean_spacing })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn mean_spacing(&self) -> f64 {
        self.mean_spacing
    }

    pub fn density(&self) -> f64 {
        1.0 / self.mean_spacing
    }

    /// `t_H = 2π/d`.
    pub fn heisenberg_time(&self) -> f64 {
        2.0 * PI / self.mean_spacing
    }

    /// Nearest-neighbour spacings of the levels whose rank lies in the
    /// central `fraction` of the spectrum.
    pub fn central_spacings(&self, fraction: f64) -> Vec<f64> {
        let n = self.levels.len();
        let lo = ((1.0 - fraction) * 0.5 * n as f64).floor() as usize;
        let hi = (n - lo).max(lo + 1);
        self.levels[lo..hi].windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Internal Hamiltonian of one realization.
#[derive(Debug, Clone, PartialEq)]
pub enum Hamiltonian {
    Diagonal(Vec<f64>),
    Dense(DMatrix<Complex64>),
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        match self {
            Hamiltonian::Diagonal(levels) => levels.len(),
            Hamiltonian::Dense(h) => h.nrows(),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        match self {
            Hamiltonian::Diagonal(levels) => levels.clone(),
            Hamiltonian::Dense(h) => h.clone().symmetric_eigenvalues().as_slice().to_vec(),
        }
    }

    pub fn spectrum(&self, mean_spacing: f64) -> Result<Spectrum> {
        Spectrum::new(self.eigenvalues(), mean_spacing)
    }
}

/// Level statistics of the internal Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Ensemble {
    /// `N` independent levels uniform on `[-Nd/2, Nd/2]`.
    PoissonDiagonal,
    /// Dense GUE matrix whose semicircle has central spacing `d`.
    Gue,
    /// Poisson levels plus `λ` times a GUE matrix with unit central spacing.
    Transition { lambda: f64 },
}

impl Ensemble {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Ensemble::Transition { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => Err(Error::domain(
                format!("transition strength must be finite and >= 0, got {lambda}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Ensemble::PoissonDiagonal => "poisson",
            Ensemble::Gue => "gue",
            Ensemble::Transition { .. } => "transition",
        }
    }
}

/// Off-diagonal standard deviation `v` of a GUE matrix of size `n` whose
/// semicircle density at the origin is `1/d`: `ρ(0) = √n/(πv)`.
pub fn gue_scale(n: usize, mean_spacing: f64) -> f64 {
    mean_spacing * (n as f64).sqrt() / PI
}

/// Deterministic stream for realization `index`.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

fn poisson_levels<R: Rng + ?Sized>(rng: &mut R, n: usize, d: f64) -> Vec<f64> {
    let half = 0.5 * n as f64 * d;
    (0..n).map(|_| rng.random_range(-half..half)).collect()
}

fn gue_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> DMatrix<Complex64> {
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let diag: f64 = rng.sample(StandardNormal);
        h[(i, i)] = Complex64::new(scale * diag, 0.0);
        for j in i + 1..n {
            let z = complex_normal(rng, scale * scale);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

fn check_size(n: usize, d: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 levels, got {n}")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain(format!("mean spacing must be > 0, got {d}")));
    }
    Ok(())
}

pub fn sample_hamiltonian<R: Rng + ?Sized>(
    ensemble: Ensemble,
    n: usize,
    d: f64,
    rng: &mut R,
) -> Result<Hamiltonian> {
    check_size(n, d)?;
    ensemble.validate()?;
    Ok(match ensemble {
        Ensemble::PoissonDiagonal => Hamiltonian::Diagonal(poisson_levels(rng, n, d)),
        Ensemble::Gue => Hamiltonian::Dense(gue_matrix(rng, n, gue_scale(n, d))),
        Ensemble::Transition { lambda } => {
            let levels = poisson_levels(rng, n, d);
            if lambda == 0.0 {
                Hamiltonian::Diagonal(levels)
            } else {
                let mut h = gue_matrix(rng, n, lambda * gue_scale(n, 1.0));
                for (i, e) in levels.into_iter().enumerate() {
                    h[(i, i)] += e;
                }
                Hamiltonian::Dense(h)
            }
        }
    })
}

/// Samples a Hamiltonian and returns its ordered levels with nominal spacing `d`.
pub fn sample_spectrum<R: Rng + ?Sized>(
    ensemble: Ensemble,
    n: usize,
    d: f64,
    rng: &mut R,
) -> Result<Spectrum> {
    sample_hamiltonian(ensemble, n, d, rng)?.spectrum(d)
}

/// `N×M` matrix of iid complex Gaussians with `⟨|A_n^a|²⟩ = γ/N`.
pub fn sample_couplings<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if n == 0 || m == 0 {
        return Err(Error::domain("coupling matrix needs N >= 1 and M >= 1"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "coupling strength must be > 0, got {gamma}"
        )));
    }
    let variance = gamma / n as f64;
    Ok(DMatrix::from_fn(n, m, |_, _| complex_normal(rng, variance)))
}

/// Scattering matrix at one energy with its resolvent-trace delay time.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    pub matrix: DMatrix<Complex64>,
    pub energy: f64,
    /// `Q = -(2/M) Im Tr (E - 𝓗)⁻¹`.
    pub delay_time: f64,
    /// `‖S†S - I‖_F`, an upper bound on the operator-norm deficit.
    pub unitarity_deficit: f64,
}

/// Solves `(E - H + (i/2)AA†) X = A` with one LU factorization and forms
/// `S = I - iA†X`. The delay time uses `-2 Im Tr R = ‖R A‖²_F`, which holds
/// for `R⁻¹ = E - H + (i/2)AA†` with Hermitian `H` and real `E`.
pub fn smatrix(h: &Hamiltonian, a: &DMatrix<Complex64>, energy: f64) -> Result<SMatrix> {
    let n = h.dim();
    if a.nrows() != n {
        return Err(Error::domain(format!(
            "coupling matrix has {} rows for a {n}-level Hamiltonian",
            a.nrows()
        )));
    }
    if !energy.is_finite() {
        return Err(Error::domain("energy must be finite"));
    }
    let m = a.ncols();
    let mut k = (a * a.adjoint()) * Complex64::new(0.0, 0.5);
    match h {
        Hamiltonian::Diagonal(levels) => {
            for (i, e) in levels.iter().enumerate() {
                k[(i, i)] += energy - e;
            }
        }
        Hamiltonian::Dense(hm) => {
            k -= hm;
            for i in 0..n {
                k[(i, i)] += energy;
            }
        }
    }
    let x = k
        .lu()
        .solve(a)
        .filter(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::LinearSolve(format!("E - H + (i/2)AA† is singular at E = {energy}")))?;
    let mut s = (a.adjoint() * &x) * (-I);
    for i in 0..m {
        s[(i, i)] += 1.0;
    }
    let mut gram = s.adjoint() * &s;
    for i in 0..m {
        gram[(i, i)] -= 1.0;
    }
    Ok(SMatrix {
        delay_time: x.norm_squared() / m as f64,
        unitarity_deficit: gram.norm(),
        matrix: s,
        energy,
    })
}

/// Resonance scattering setup with `N` levels and `M` equivalent channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringModel {
    pub n_levels: usize,
    pub n_channels: usize,
    pub gamma: f64,
    pub mean_spacing: f64,
    pub ensemble: Ensemble,
    pub energy: f64,
}

impl ScatteringModel {
    pub fn new(
        n_levels: usize,
        n_channels: usize,
        gamma: f64,
        mean_spacing: f64,
        ensemble: Ensemble,
    ) -> Result<Self> {
        let model = Self {
            n_levels,
            n_channels,
            gamma,
            mean_spacing,
            ensemble,
            energy: 0.0,
        };
        model.validate()?;
        Ok(model)
    }

    /// Chooses `γ` so that `η = 4Mx` equals `eta`.
    pub fn with_eta(
        n_levels: usize,
        n_channels: usize,
        eta: f64,
        mean_spacing: f64,
        ensemble: Ensemble,
    ) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::domain(format!("openness must be > 0, got {eta}")));
        }
        let x = eta / (4.0 * n_channels.max(1) as f64);
        Self::new(
            n_levels,
            n_channels,
            Self::gamma_for_x(x, n_levels, mean_spacing),
            mean_spacing,
            ensemble,
        )
    }

    /// Chooses `γ` so that `πγ/(2Nd)` equals `x`.
    pub fn with_x(
        n_levels: usize,
        n_channels: usize,
        x: f64,
        mean_spacing: f64,
        ensemble: Ensemble,
    ) -> Result<Self> {
        Self::new(
            n_levels,
            n_channels,
            Self::gamma_for_x(x, n_levels, mean_spacing),
            mean_spacing,
            ensemble,
        )
    }

    fn gamma_for_x(x: f64, n: usize, d: f64) -> f64 {
        2.0 * n as f64 * d * x / PI
    }

    pub fn at_energy(mut self, energy: f64) -> Result<Self> {
        self.energy = energy;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_size(self.n_levels, self.mean_spacing)?;
        self.ensemble.validate()?;
        if self.n_channels == 0 || self.n_channels > self.n_levels {
            return Err(Error::domain(format!(
                "need 1 <= M <= N, got M = {} with N = {}",
                self.n_channels, self.n_levels
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!(
                "coupling strength must be > 0, got {}",
                self.gamma
            )));
        }
        if !self.energy.is_finite() {
            return Err(Error::domain("energy must be finite"));
        }
        let x = self.x();
        if x >= MAX_WEAK_COUPLING {
            return Err(Error::domain(format!(
                "x = {x} leaves the weak-coupling regime (x < {MAX_WEAK_COUPLING})"
            )));
        }
        Ok(())
    }

    /// `x = πγ/(2Nd)`.
    pub fn x(&self) -> f64 {
        PI * self.gamma / (2.0 * self.n_levels as f64 * self.mean_spacing)
    }

    /// `m = M/N`.
    pub fn channel_ratio(&self) -> f64 {
        self.n_channels as f64 / self.n_levels as f64
    }

    /// `η = 4Mx = 2π(M/N)(γ/d)`.
    pub fn eta(&self) -> f64 {
        4.0 * self.n_channels as f64 * self.x()
    }

    /// `(1 - x)/(1 + x)`.
    pub fn mean_s_weak(&self) -> f64 {
        let x = self.x();
        (1.0 - x) / (1.0 + x)
    }

    /// `1 - ((1 - x)/(1 + x))² = 4x/(1 + x)²`.
    pub fn transmission(&self) -> f64 {
        let x = self.x();
        4.0 * x / ((1.0 + x) * (1.0 + x))
    }

    pub fn heisenberg_time(&self) -> f64 {
        2.0 * PI / self.mean_spacing
    }

    /// Samples one realization and evaluates its S-matrix.
    pub fn realize(&self, master_seed: u64, index: u64) -> Result<SMatrix> {
        let mut rng = realization_rng(master_seed, index);
        let h = sample_hamiltonian(self.ensemble, self.n_levels, self.mean_spacing, &mut rng)?;
        let a = sample_couplings(self.n_levels, self.n_channels, self.gamma, &mut rng)?;
        smatrix(&h, &a, self.energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl MCEstimate {
    /// `(value - reference)/std_error`.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.value - reference) / self.std_error
    }
}

/// Reduced per-realization data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationRecord {
    pub index: u64,
    /// `S^{aa}` for every channel.
    pub diagonal: Vec<Complex64>,
    /// `Σ_a |S^{aa}|²`.
    pub elastic_power: f64,
    /// `Σ_{a≠b} |S^{ab}|²`.
    pub inelastic_power: f64,
    /// `Σ_{a≠b} S^{ab}`.
    pub offdiagonal_sum: Complex64,
    pub delay_time: f64,
    pub unitarity_deficit: f64,
}

impl RealizationRecord {
    pub fn from_smatrix(index: u64, s: &SMatrix) -> Self {
        let m = s.matrix.nrows();
        let diagonal: Vec<Complex64> = (0..m).map(|a| s.matrix[(a, a)]).collect();
        let elastic_power = diagonal.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let mut inelastic_power = 0.0;
        let mut offdiagonal_sum = Complex64::new(0.0, 0.0);
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    inelastic_power += s.matrix[(a, b)].norm_sqr();
                    offdiagonal_sum += s.matrix[(a, b)];
                }
            }
        }
        Self {
            index,
            diagonal,
            elastic_power,
            inelastic_power,
            offdiagonal_sum,
            delay_time: s.delay_time,
            unitarity_deficit: s.unitarity_deficit,
        }
    }

    pub fn channel_mean(&self) -> Complex64 {
        self.diagonal.iter().sum::<Complex64>() / self.diagonal.len() as f64
    }
}

/// Runs `n_realizations` independent realizations on the current rayon pool.
pub fn simulate(
    model: &ScatteringModel,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<RealizationRecord>> {
    model.validate()?;
    if n_realizations < 2 {
        return Err(Error::domain("need at least 2 realizations"));
    }
    (0..n_realizations as u64)
        .into_par_iter()
        .map(|i| {
            Ok(RealizationRecord::from_smatrix(
                i,
                &model.realize(master_seed, i)?,
            ))
        })
        .collect()
}

fn mean_and_error(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Leave-one-out standard error of an estimator given its leave-out values.
fn jackknife_error(leave_out: &[f64]) -> f64 {
    let n = leave_out.len() as f64;
    let mean = leave_out.iter().sum::<f64>() / n;
    ((n - 1.0) / n * leave_out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()).sqrt()
}

fn channels(records: &[RealizationRecord]) -> Result<usize> {
    let m = records.first().map(|r| r.diagonal.len()).unwrap_or(0);
    if records.len() < 2 || m == 0 {
        return Err(Error::domain("need at least 2 realizations with M >= 1"));
    }
    Ok(m)
}

/// Connected elastic and inelastic variances and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnhancementEstimate {
    pub f: MCEstimate,
    /// Channel average of `⟨|S^{aa} - ⟨S^{aa}⟩|²⟩`.
    pub elastic_variance: f64,
    /// Pair average of `⟨|S^{ab}|²⟩`, `a ≠ b`.
    pub inelastic_variance: f64,
    pub max_unitarity_deficit: f64,
}

struct CorrelatorSums {
    channel: Vec<Complex64>,
    elastic: f64,
    inelastic: f64,
    n: f64,
}

impl CorrelatorSums {
    fn variances(&self) -> (f64, f64) {
        let m = self.channel.len() as f64;
        let n = self.n;
        let mean_sq = self.channel.iter().map(|c| (c / n).norm_sqr()).sum::<f64>() / m;
        let elastic = n / (n - 1.0) * (self.elastic / (n * m) - mean_sq);
        let inelastic = self.inelastic / (n * m * (m - 1.0));
        (elastic, inelastic)
    }

    fn without(&self, r: &RealizationRecord) -> Self {
        Self {
            channel: self.channel.iter().zip(&r.diagonal).map(|(c, s)| c - s).collect(),
            elastic: self.elastic - r.elastic_power,
            inelastic: self.inelastic - r.inelastic_power,
            n: self.n - 1.0,
        }
    }
}

/// `F̂ = C^{aaaa}(0)/C^{abab}(0)` with a jackknife error.
pub fn enhancement_from_records(
    records: &[RealizationRecord],
    master_seed: u64,
) -> Result<EnhancementEstimate> {
    let m = channels(records)?;
    if m < 2 {
        return Err(Error::domain("the enhancement factor needs M >= 2 channels"));
    }
    let mut sums = CorrelatorSums {
        channel: vec![Complex64::new(0.0, 0.0); m],
        elastic: 0.0,
        inelastic: 0.0,
        n: records.len() as f64,
    };
    for r in records {
        for (c, s) in sums.channel.iter_mut().zip(&r.diagonal) {
            *c += s;
        }
        sums.elastic += r.elastic_power;
        sums.inelastic += r.inelastic_power;
    }
    let (elastic, inelastic) = sums.variances();
    let leave_out: Vec<f64> = records
        .iter()
        .map(|r| {
            let (e, i) = sums.without(r).variances();
            e / i
        })
        .collect();
    Ok(EnhancementEstimate {
        f: MCEstimate {
            value: elastic / inelastic,
            std_error: jackknife_error(&leave_out),
            n_realizations: records.len(),
            master_seed,
        },
        elastic_variance: elastic,
        inelastic_variance: inelastic,
        max_unitarity_deficit: records.iter().map(|r| r.unitarity_deficit).fold(0.0, f64::max),
    })
}

pub fn estimate_enhancement_mc(
    model: &ScatteringModel,
    n_realizations: usize,
    master_seed: u64,
) -> Result<EnhancementEstimate> {
    if model.n_channels < 2 {
        return Err(Error::domain("the enhancement factor needs M >= 2 channels"));
    }
    enhancement_from_records(&simulate(model, n_realizations, master_seed)?, master_seed)
}

/// Channel-averaged mean S-matrix and transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSEstimate {
    pub s_aa_re: MCEstimate,
    pub s_aa_im: MCEstimate,
    /// `1 - |⟨S^{aa}⟩|²` from the same sample.
    pub transmission: MCEstimate,
    /// Pair average of `⟨S^{ab}⟩`, `a ≠ b`.
    pub offdiagonal_re: MCEstimate,
    pub offdiagonal_im: MCEstimate,
}

pub fn mean_s_from_records(records: &[RealizationRecord], master_seed: u64) -> Result<MeanSEstimate> {
    let m = channels(records)?;
    let n = records.len();
    let est = |(value, std_error): (f64, f64)| MCEstimate {
        value,
        std_error,
        n_realizations: n,
        master_seed,
    };
    let means: Vec<Complex64> = records.iter().map(RealizationRecord::channel_mean).collect();
    let s_re = mean_and_error(means.iter().map(|z| z.re));
    let s_im = mean_and_error(means.iter().map(|z| z.im));
    let total: Complex64 = means.iter().sum();
    let mean = total / n as f64;
    let leave_out: Vec<f64> = means
        .iter()
        .map(|z| 1.0 - ((total - z) / (n - 1) as f64).norm_sqr())
        .collect();
    let pairs = (m * m.saturating_sub(1)).max(1) as f64;
    let off: Vec<Complex64> = records.iter().map(|r| r.offdiagonal_sum / pairs).collect();
    Ok(MeanSEstimate {
        s_aa_re: est(s_re),
        s_aa_im: est(s_im),
        transmission: est((1.0 - mean.norm_sqr(), jackknife_error(&leave_out))),
        offdiagonal_re: est(mean_and_error(off.iter().map(|z| z.re))),
        offdiagonal_im: est(mean_and_error(off.iter().map(|z| z.im))),
    })
}

pub fn mean_s_and_transmission(
    model: &ScatteringModel,
    n_realizations: usize,
    master_seed: u64,
) -> Result<MeanSEstimate> {
    mean_s_from_records(&simulate(model, n_realizations, master_seed)?, master_seed)
}

/// Delay-time moments at `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayTimeStats {
    pub mean_q: MCEstimate,
    /// `⟨Q²⟩/⟨Q⟩² - 1`.
    pub var_q_normalized: MCEstimate,
    /// `1 + η·var_q_normalized/2`.
    pub f_from_var_q: MCEstimate,
    /// `⟨Q⟩·M/t_H`; equals 1 when the level density at `E` is `1/d`.
    pub mean_q_over_weyl: MCEstimate,
}

pub fn delay_stats_from_records(
    records: &[RealizationRecord],
    model: &ScatteringModel,
    master_seed: u64,
) -> Result<DelayTimeStats> {
    channels(records)?;
    let n = records.len();
    let nf = n as f64;
    let est = |value: f64, std_error: f64| MCEstimate {
        value,
        std_error,
        n_realizations: n,
        master_seed,
    };
    let q: Vec<f64> = records.iter().map(|r| r.delay_time).collect();
    let (mean, mean_err) = mean_and_error(q.iter().copied());
    let sum: f64 = q.iter().sum();
    let sum_sq: f64 = q.iter().map(|v| v * v).sum();
    let rel_var = |s: f64, s2: f64, k: f64| {
        let mu = s / k;
        (s2 - k * mu * mu) / (k - 1.0) / (mu * mu)
    };
    let value = rel_var(sum, sum_sq, nf);
    let leave_out: Vec<f64> = q
        .iter()
        .map(|v| rel_var(sum - v, sum_sq - v * v, nf - 1.0))
        .collect();
    let rel_err = jackknife_error(&leave_out);
    let half_eta = 0.5 * model.eta();
    let weyl = model.heisenberg_time() / model.n_channels as f64;
    Ok(DelayTimeStats {
        mean_q: est(mean, mean_err),
        var_q_normalized: est(value, rel_err),
        f_from_var_q: est(1.0 + half_eta * value, half_eta * rel_err),
        mean_q_over_weyl: est(mean / weyl, mean_err / weyl),
    })
}

pub fn delay_time_stats(
    model: &ScatteringModel,
    n_realizations: usize,
    master_seed: u64,
) -> Result<DelayTimeStats> {
    delay_stats_from_records(&simulate(model, n_realizations, master_seed)?, model, master_seed)
}

/// Converged solution of the self-consistency equation for `g(E)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GSolution {
    pub g: Complex64,
    /// `|g - Φ(g)|/|g|` at the returned `g`.
    pub residual: f64,
    pub iterations: usize,
    /// Relaxation factor that converged: 1 for plain iteration, 0.5 after a retry.
    pub damping: f64,
}

impl GSolution {
    /// `⟨S^{aa}⟩ = (1 - (iγ/2)g)/(1 + (iγ/2)g)`.
    pub fn mean_s(&self, gamma: f64) -> Complex64 {
        let z = I * (0.5 * gamma) * self.g;
        (1.0 - z) / (1.0 + z)
    }
}

const G_MAX_ITERATIONS: usize = 10_000;

/// Fixed point of `g = (1/N) Σ_n [E - E_n + (i/2)mγ/(1 + (i/2)γg)]⁻¹`,
/// seeded with `(1/N) Σ_n [E - E_n + (i/2)mγ]⁻¹`.
pub fn solve_g(spectrum: &Spectrum, gamma: f64, m: f64, energy: f64, tol: f64) -> Result<GSolution> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!(
            "coupling strength must be > 0, got {gamma}"
        )));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("channel ratio must be > 0, got {m}")));
    }
    if tol.is_nan() || tol <= 0.0 || !energy.is_finite() {
        return Err(Error::domain("tolerance must be > 0 and energy finite"));
    }
    let nf = spectrum.len() as f64;
    let levels = spectrum.levels();
    let phi = |g: Complex64| {
        let shift = I * (0.5 * m * gamma) / (1.0 + I * (0.5 * gamma) * g);
        levels
            .iter()
            .map(|e| 1.0 / (energy - e + shift))
            .sum::<Complex64>()
            / nf
    };
    let seed = levels
        .iter()
        .map(|e| 1.0 / (energy - e + I * (0.5 * m * gamma)))
        .sum::<Complex64>()
        / nf;

    let mut last = f64::NAN;
    for damping in [1.0, 0.5] {
        let mut g = seed;
        let mut image = phi(g);
        for it in 1..=G_MAX_ITERATIONS {
            g = (1.0 - damping) * g + damping * image;
            image = phi(g);
            last = (image - g).norm() / g.norm();
            if last < tol {
                return Ok(GSolution {
                    g,
                    residual: last,
                    iterations: it,
                    damping,
                });
            }
            if !last.is_finite() {
                break;
            }
        }
    }
    Err(Error::Iteration(format!(
        "g(E) not converged after {G_MAX_ITERATIONS} iterations with damping 1 and 0.5, residual {last:e}"
    )))
}

/// Mean S-matrix from the self-consistent `g`, averaged over sampled spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfConsistentMeanS {
    pub s_re: MCEstimate,
    pub s_im: MCEstimate,
    pub max_residual: f64,
}

pub fn mean_s_self_consistent(
    model: &ScatteringModel,
    n_spectra: usize,
    master_seed: u64,
    tol: f64,
) -> Result<SelfConsistentMeanS> {
    model.validate()?;
    if n_spectra < 2 {
        return Err(Error::domain("need at least 2 spectra"));
    }
    let solutions = (0..n_spectra as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = realization_rng(master_seed, i);
            let spectrum = sample_spectrum(model.ensemble, model.n_levels, model.mean_spacing, &mut rng)?;
            solve_g(&spectrum, model.gamma, model.channel_ratio(), model.energy, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let s: Vec<Complex64> = solutions.iter().map(|g| g.mean_s(model.gamma)).collect();
    let est = |(value, std_error): (f64, f64)| MCEstimate {
        value,
        std_error,
        n_realizations: n_spectra,
        master_seed,
    };
    Ok(SelfConsistentMeanS {
        s_re: est(mean_and_error(s.iter().map(|z| z.re))),
        s_im: est(mean_and_error(s.iter().map(|z| z.im))),
        max_residual: solutions.iter().map(|g| g.residual).fold(0.0, f64::max),
    })
}

/// Settings for [`calibrate_kappa`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationConfig {
    pub n_levels: usize,
    pub mean_spacing: f64,
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Uniform fit grid on `[s_min, s_max]`.
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Largest accepted `χ²` per degree of freedom.
    pub max_reduced_chi2: f64,
    pub quadrature: QuadratureConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n_levels: 300,
            mean_spacing: 1.0,
            n_realizations: 80,
            master_seed: 0,
            s_min: 0.05,
            s_max: 1.5,
            n_s: 60,
            kappa_min: 1e-3,
            kappa_max: 1e4,
            max_reduced_chi2: 3.0,
            quadrature: QuadratureConfig {
                abs_tol: 1e-8,
                rel_tol: 1e-8,
                ..QuadratureConfig::default()
            },
        }
    }
}

/// Empirical two-level form factor on a grid of scaled times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalFormFactor {
    pub s: Vec<f64>,
    pub b2: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Grid average of `var|Z|²/⟨|Z|²⟩²`; close to 1 for Gaussian `Z`.
    pub relative_variance: f64,
    pub n_realizations: usize,
}

/// Estimates `B₂(s)` from the central half of unfolded spectra.
///
/// Levels are unfolded with the pooled empirical counting function, weighted
/// with a Hann taper over the central half, and the connected form factor
/// `K(s) = (⟨|Z|²⟩ - |⟨Z⟩|²)/⟨Σw²⟩` (unbiased sample covariance) of `Z(s) = Σ_j w_j e^{2πi s e_j}` is
/// reported as `B₂ = 1 - K`.
pub fn empirical_form_factor(
    ensemble: Ensemble,
    n_levels: usize,
    mean_spacing: f64,
    n_realizations: usize,
    master_seed: u64,
    s_grid: &[f64],
) -> Result<EmpiricalFormFactor> {
    if n_realizations < 2 {
        return Err(Error::domain("need at least 2 realizations"));
    }
    let spectra = (0..n_realizations as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = realization_rng(master_seed, i);
            sample_hamiltonian(ensemble, n_levels, mean_spacing, &mut rng).map(|h| h.eigenvalues())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pooled: Vec<f64> = spectra.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let per_level = 1.0 / n_realizations as f64;
    let unfold = |e: f64| pooled.partition_point(|&p| p < e) as f64 * per_level;

    let lo = 0.25 * n_levels as f64;
    let width = 0.5 * n_levels as f64;
    let nr = n_realizations as f64;
    let mut z_mean = vec![Complex64::new(0.0, 0.0); s_grid.len()];
    let mut p_sum = vec![0.0; s_grid.len()];
    let mut p_sq = vec![0.0; s_grid.len()];
    let mut w_sq = 0.0;
    for levels in &spectra {
        let tapered: Vec<(f64, f64)> = levels
            .iter()
            .map(|&e| unfold(e))
            .filter(|&u| u > lo && u < lo + width)
            .map(|u| (u, (PI * (u - lo) / width).sin().powi(2)))
            .collect();
        w_sq += tapered.iter().map(|(_, w)| w * w).sum::<f64>();
        for (k, &s) in s_grid.iter().enumerate() {
            let z: Complex64 = tapered
                .iter()
                .map(|&(u, w)| Complex64::from_polar(w, 2.0 * PI * s * u))
                .sum();
            z_mean[k] += z / nr;
            p_sum[k] += z.norm_sqr();
            p_sq[k] += z.norm_sqr().powi(2);
        }
    }
    let w_mean = w_sq / nr;
    let mut b2 = Vec::with_capacity(s_grid.len());
    let mut std_error = Vec::with_capacity(s_grid.len());
    let mut relative = 0.0;
    for k in 0..s_grid.len() {
        let p = p_sum[k] / nr;
        let var_p = (p_sq[k] / nr - p * p) * nr / (nr - 1.0);
        let connected = (p - z_mean[k].norm_sqr()) * nr / (nr - 1.0);
        b2.push(1.0 - connected / w_mean);
        std_error.push((var_p / nr).sqrt() / w_mean);
        relative += var_p / (p * p);
    }
    Ok(EmpiricalFormFactor {
        s: s_grid.to_vec(),
        b2,
        std_error,
        relative_variance: relative / s_grid.len().max(1) as f64,
        n_realizations,
    })
}

/// Best-fit chaoticity of a transition ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaCalibration {
    pub lambda: f64,
    pub kappa: Chaoticity,
    pub reduced_chi2: f64,
    /// Range of κ with `χ² ≤ χ²_min + 1`.
    pub kappa_interval: (f64, f64),
    /// The lower fit bound lies inside the `Δχ² ≤ 1` interval.
    pub at_lower_bound: bool,
    /// The upper fit bound lies inside the `Δχ² ≤ 1` interval.
    pub at_upper_bound: bool,
    pub form_factor: EmpiricalFormFactor,
}

struct LogKappaFit {
    log_k: f64,
    chi2: f64,
}

/// Scan on a grid of eight points per decade, then golden-section search
/// around the best grid point.
fn minimize_log_kappa(a: f64, b: f64, chi2: &impl Fn(f64) -> Result<f64>) -> Result<LogKappaFit> {
    let n_scan = (8.0 * (b - a) / std::f64::consts::LN_10).ceil() as usize;
    let scan: Vec<(f64, f64)> = (0..=n_scan)
        .map(|i| {
            let t = a + (b - a) * i as f64 / n_scan as f64;
            chi2(t).map(|c| (t, c))
        })
        .collect::<Result<_>>()?;
    let best = (0..scan.len())
        .min_by(|&i, &j| scan[i].1.total_cmp(&scan[j].1))
        .unwrap_or(0);
    let mut lo = scan[best.saturating_sub(1)].0;
    let mut hi = scan[(best + 1).min(scan.len() - 1)].0;
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (chi2(c)?, chi2(d)?);
    while hi - lo > 1e-4 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = chi2(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = chi2(d)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let refined = (mid, chi2(mid)?);
    let (log_k, chi2) = if refined.1 <= scan[best].1 {
        refined
    } else {
        scan[best]
    };
    Ok(LogKappaFit { log_k, chi2 })
}

/// Least-squares fit of `B₂(s|κ)` to the empirical form factor of the
/// `Transition(λ)` ensemble, searched in `log κ`.
///
/// A first pass with uniform weights gives `κ₁`; the final pass weights each
/// point by `σ(s) = (1 - B₂(s|κ₁))·√(r/R)` with `r` the pooled relative
/// variance. Per-point sample variances are not used as weights because
/// they correlate with the point values.
pub fn calibrate_kappa(lambda: f64, cfg: &CalibrationConfig) -> Result<KappaCalibration> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!(
            "transition strength must be finite and >= 0, got {lambda}"
        )));
    }
    if cfg.n_s < 2 || !(cfg.s_min > 0.0 && cfg.s_max > cfg.s_min) {
        return Err(Error::domain("fit grid needs n_s >= 2 and 0 < s_min < s_max"));
    }
    if !(cfg.kappa_min > 0.0 && cfg.kappa_max > cfg.kappa_min) {
        return Err(Error::domain("fit bounds need 0 < kappa_min < kappa_max"));
    }
    let step = (cfg.s_max - cfg.s_min) / (cfg.n_s - 1) as f64;
    let s_grid: Vec<f64> = (0..cfg.n_s).map(|i| cfg.s_min + step * i as f64).collect();
    let ff = empirical_form_factor(
        Ensemble::Transition { lambda },
        cfg.n_levels,
        cfg.mean_spacing,
        cfg.n_realizations,
        cfg.master_seed,
        &s_grid,
    )?;
    let model = |log_k: f64| -> Result<Vec<f64>> {
        let kappa = Chaoticity::Finite(log_k.exp());
        ff.s.iter()
            .map(|&s| Ok(b2_transient(ScaledTime::new(s)?, kappa, &cfg.quadrature)?.value))
            .collect()
    };
    let chi2_with = |log_k: f64, sigma: &[f64]| -> Result<f64> {
        Ok(model(log_k)?
            .iter()
            .zip(&ff.b2)
            .zip(sigma)
            .map(|((m, b), e)| ((b - m) / e).powi(2))
            .sum())
    };
    let (a, b) = (cfg.kappa_min.ln(), cfg.kappa_max.ln());

    let pooled = (ff.std_error.iter().map(|e| e * e).sum::<f64>() / ff.s.len() as f64).sqrt();
    let uniform = vec![pooled; ff.s.len()];
    let first = minimize_log_kappa(a, b, &|t| chi2_with(t, &uniform))?;
    let scale = (ff.relative_variance / ff.n_realizations as f64).sqrt();
    let sigma: Vec<f64> = model(first.log_k)?
        .iter()
        .map(|m| (1.0 - m).max(1e-3) * scale)
        .collect();
    let chi2 = |t: f64| chi2_with(t, &sigma);
    let fit = minimize_log_kappa(a, b, &chi2)?;

    let threshold = fit.chi2 + 1.0;
    let edge = |bound: f64| -> Result<f64> {
        if chi2(bound)? <= threshold {
            return Ok(bound);
        }
        let (mut inner, mut outer) = (fit.log_k, bound);
        while (outer - inner).abs() > 1e-3 {
            let mid = 0.5 * (inner + outer);
            if chi2(mid)? <= threshold {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(inner)
    };
    let (k_lo, k_hi) = (edge(a)?, edge(b)?);
    let reduced_chi2 = fit.chi2 / (cfg.n_s - 1) as f64;
    let result = KappaCalibration {
        lambda,
        kappa: Chaoticity::Finite(fit.log_k.exp()),
        reduced_chi2,
        kappa_interval: (k_lo.exp(), k_hi.exp()),
        at_lower_bound: k_lo == a,
        at_upper_bound: k_hi == b,
        form_factor: ff,
    };
    if reduced_chi2 > cfg.max_reduced_chi2 {
        return Err(Error::Calibration(format!(
            "lambda = {lambda}: best kappa = {} leaves chi2/dof = {reduced_chi2:.3} > {}",
            result.kappa, cfg.max_reduced_chi2
        )));
    }
    Ok(result)
}
