//! Stochastic pairwise-collision simulation of `N_a` spin-½ electron spins and
//! `N_b` spin-½ nuclear spins, restricted to one or two up-spins.
//!
//! Each step pairs every alkali site with a distinct noble site and applies the
//! pair scattering matrix. Sites `0..N_a` are alkali, `N_a..N_a+N_b` noble.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{golden_min, linear_fit, slope_through_origin};

const NORM_TOLERANCE: f64 = 1e-8;
const MAX_SAMPLES: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScatteringForm {
    /// `exp(−iφ ŝ·k̂)`.
    #[default]
    Exact,
    /// First-order-in-φ scattering matrix written in the synchronized frame; not unitary.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    /// Each alkali draws a fresh noble partner every step, without replacement.
    #[default]
    Random,
    /// Alkali `a` always meets noble `a`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "rad")]
pub enum FieldPhase {
    /// `⟨φ⟩/2` for the exact form, 0 for the truncated form.
    #[default]
    Standard,
    /// `(1 − N_a/N_b)⟨φ⟩/2`: also cancels the mean phase of paired noble excitations.
    PairingCorrected,
    Custom(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManyBodyConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub phi_mean_rad: f64,
    pub phi_std_rad: f64,
    pub steps: u64,
    pub form: ScatteringForm,
    pub pairing: PairingMode,
    /// Clamp sampled angles at zero from below.
    pub clamp_positive: bool,
    pub field_phase: FieldPhase,
}

impl Default for ManyBodyConfig {
    fn default() -> Self {
        Self {
            n_a: 100,
            n_b: 10_000,
            phi_mean_rad: 1e-5,
            phi_std_rad: 1e-5,
            steps: 1000,
            form: ScatteringForm::Exact,
            pairing: PairingMode::Random,
            clamp_positive: true,
            field_phase: FieldPhase::Standard,
        }
    }
}

impl ManyBodyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n_b == 0 {
            return Err(Error::Config(
                "manybody.n_a and manybody.n_b must be positive".into(),
            ));
        }
        if self.n_a > self.n_b {
            return Err(Error::Config(format!(
                "manybody.n_a ({}) exceeds manybody.n_b ({}); pairing needs distinct noble partners",
                self.n_a, self.n_b
            )));
        }
        if !(self.phi_std_rad >= 0.0) || !self.phi_mean_rad.is_finite() {
            return Err(Error::Config(
                "manybody.phi_std_rad must be >= 0 and phi_mean_rad finite".into(),
            ));
        }
        Ok(())
    }

    /// Magnetic phase per step applied to each alkali excitation.
    pub fn field_phase_rad(&self) -> f64 {
        match self.field_phase {
            FieldPhase::Standard => match self.form {
                ScatteringForm::Exact => self.phi_mean_rad / 2.0,
                ScatteringForm::Truncated => 0.0,
            },
            FieldPhase::PairingCorrected => {
                let base = match self.form {
                    ScatteringForm::Exact => self.phi_mean_rad / 2.0,
                    ScatteringForm::Truncated => 0.0,
                };
                base * (1.0 - self.n_a as f64 / self.n_b as f64)
            }
            FieldPhase::Custom(v) => v,
        }
    }

    /// Second moment of the sampled angle, ignoring clamping.
    pub fn phi_second_moment(&self) -> f64 {
        self.phi_mean_rad.powi(2) + self.phi_std_rad.powi(2)
    }

    /// `J τ = ½ ⟨φ⟩ sqrt(N_a/N_b)`.
    pub fn coupling_per_step(&self) -> f64 {
        0.5 * self.phi_mean_rad * (self.n_a as f64 / self.n_b as f64).sqrt()
    }

    pub fn sample_interval(&self) -> u64 {
        (self.steps / MAX_SAMPLES).max(1)
    }
}

/// One step's collisions: alkali `a` meets noble `partners[a]` with angle `angles[a]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollisionRound {
    pub partners: Vec<usize>,
    pub angles: Vec<f64>,
}

impl CollisionRound {
    pub fn validate(&self, n_a: usize, n_b: usize) -> Result<()> {
        if self.partners.len() != n_a || self.angles.len() != n_a {
            return Err(Error::Domain(
                "collision round does not cover every alkali".into(),
            ));
        }
        let mut seen = vec![false; n_b];
        for &b in &self.partners {
            if b >= n_b || std::mem::replace(&mut seen[b], true) {
                return Err(Error::Domain(format!(
                    "noble partner {b} invalid or reused"
                )));
            }
        }
        Ok(())
    }
}

/// Draws collision rounds; deterministic for a given seed and stream.
pub struct CollisionSampler {
    n_a: usize,
    n_b: usize,
    angle: Option<Normal<f64>>,
    mean: f64,
    clamp: bool,
    pairing: PairingMode,
    rng: ChaCha8Rng,
    stamp: Vec<u32>,
    generation: u32,
}

impl CollisionSampler {
    pub fn new(cfg: &ManyBodyConfig, seed: u64, stream: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let angle = if cfg.phi_std_rad > 0.0 {
            Some(
                Normal::new(cfg.phi_mean_rad, cfg.phi_std_rad)
                    .map_err(|e| Error::Config(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            n_a: cfg.n_a,
            n_b: cfg.n_b,
            angle,
            mean: cfg.phi_mean_rad,
            clamp: cfg.clamp_positive,
            pairing: cfg.pairing,
            rng,
            stamp: vec![0; cfg.n_b],
            generation: 0,
        })
    }

    pub fn next_round(&mut self, round: &mut CollisionRound) {
        round.partners.resize(self.n_a, 0);
        round.angles.resize(self.n_a, 0.0);
        match self.pairing {
            PairingMode::Fixed => {
                for (a, p) in round.partners.iter_mut().enumerate() {
                    *p = a;
                }
            }
            PairingMode::Random => {
                self.generation = self.generation.wrapping_add(1);
                if self.generation == 0 {
                    self.stamp.iter_mut().for_each(|s| *s = 0);
                    self.generation = 1;
                }
                for p in round.partners.iter_mut() {
                    loop {
                        let b = self.rng.gen_range(0..self.n_b);
                        if self.stamp[b] != self.generation {
                            self.stamp[b] = self.generation;
                            *p = b;
                            break;
                        }
                    }
                }
            }
        }
        for phi in round.angles.iter_mut() {
            let x = match &self.angle {
                Some(d) => d.sample(&mut self.rng),
                None => self.mean,
            };
            *phi = if self.clamp { x.max(0.0) } else { x };
        }
    }
}

/// Factors `(stay, swap)` acting on `{|↑_a↓_b⟩, |↓_a↑_b⟩}`, relative to the `|↓↓⟩` phase.
pub fn pair_factors(phi: f64, form: ScatteringForm) -> (Complex64, Complex64) {
    let e = Complex64::from_polar(1.0, phi);
    match form {
        ScatteringForm::Exact => ((1.0 + e) * 0.5, (1.0 - e) * 0.5),
        ScatteringForm::Truncated => {
            let half = Complex64::from_polar(1.0, phi / 2.0);
            (
                1.0 - half * 2.0 * (phi / 4.0).sin().powi(2),
                Complex64::new(0.0, 1.0) * half * (phi / 2.0).sin(),
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Single,
    Double,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyState {
    pub sector: Sector,
    pub n_a: usize,
    pub n_b: usize,
    pub step: u64,
    pub amplitudes: Vec<Complex64>,
}

/// Position of the unordered site pair `i < j` among `n` sites.
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl ManyBodyState {
    fn sites(&self) -> usize {
        self.n_a + self.n_b
    }

    /// `|1⟩_a|0⟩_b`: one excitation shared symmetrically by the alkali sites.
    pub fn symmetric_single(n_a: usize, n_b: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_a + n_b];
        let w = (n_a as f64).sqrt().recip();
        amplitudes[..n_a]
            .iter_mut()
            .for_each(|c| *c = Complex64::new(w, 0.0));
        Self {
            sector: Sector::Single,
            n_a,
            n_b,
            step: 0,
            amplitudes,
        }
    }

    /// One excitation on alkali site 0.
    pub fn localized_single(n_a: usize, n_b: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_a + n_b];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            sector: Sector::Single,
            n_a,
            n_b,
            step: 0,
            amplitudes,
        }
    }

    /// `|1⟩_a|1⟩_b`.
    pub fn symmetric_pair(n_a: usize, n_b: usize) -> Self {
        let n = n_a + n_b;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n * (n - 1) / 2];
        let w = ((n_a * n_b) as f64).sqrt().recip();
        for a in 0..n_a {
            for b in n_a..n {
                amplitudes[pair_index(n, a, b)] = Complex64::new(w, 0.0);
            }
        }
        Self {
            sector: Sector::Double,
            n_a,
            n_b,
            step: 0,
            amplitudes,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨1_a 0_b|ψ⟩` in the single sector.
    pub fn symmetric_alkali_amplitude(&self) -> Complex64 {
        self.amplitudes[..self.n_a].iter().sum::<Complex64>() / (self.n_a as f64).sqrt()
    }

    /// `⟨0_a 1_b|ψ⟩` in the single sector.
    pub fn symmetric_noble_amplitude(&self) -> Complex64 {
        self.amplitudes[self.n_a..].iter().sum::<Complex64>() / (self.n_b as f64).sqrt()
    }

    /// `(F_10, F_01)`.
    pub fn fidelities(&self) -> (f64, f64) {
        (
            self.symmetric_alkali_amplitude().norm_sqr(),
            self.symmetric_noble_amplitude().norm_sqr(),
        )
    }

    /// `(P_coincidence, P_bunch_a, P_bunch_b)` in the double sector.
    pub fn bunching(&self) -> (f64, f64, f64) {
        let (na, nb, n) = (self.n_a, self.n_b, self.sites());
        let mut both = Complex64::new(0.0, 0.0);
        let mut aa = Complex64::new(0.0, 0.0);
        let mut bb = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let c = self.amplitudes[pair_index(n, i, j)];
                match (i < na, j < na) {
                    (true, true) => aa += c,
                    (true, false) => both += c,
                    _ => bb += c,
                }
            }
        }
        let pairs = |k: usize| (k * k.saturating_sub(1) / 2).max(1) as f64;
        (
            both.norm_sqr() / (na * nb) as f64,
            aa.norm_sqr() / pairs(na),
            bb.norm_sqr() / pairs(nb),
        )
    }
}

/// Applies one collision round and then the field phase `e^{−i·field_phase}` per alkali excitation.
pub fn step(
    state: &mut ManyBodyState,
    round: &CollisionRound,
    field_phase: f64,
    form: ScatteringForm,
) {
    let rot = Complex64::from_polar(1.0, -field_phase);
    let (na, n) = (state.n_a, state.n_a + state.n_b);
    match state.sector {
        Sector::Single => {
            let c = &mut state.amplitudes;
            for (a, (&b, &phi)) in round.partners.iter().zip(&round.angles).enumerate() {
                let (d, o) = pair_factors(phi, form);
                let ib = na + b;
                let (ca, cb) = (c[a], c[ib]);
                c[a] = d * ca + o * cb;
                c[ib] = o * ca + d * cb;
            }
            c[..na].iter_mut().for_each(|x| *x *= rot);
        }
        Sector::Double => {
            let c = &mut state.amplitudes;
            for (a, (&b, &phi)) in round.partners.iter().zip(&round.angles).enumerate() {
                let (d, o) = pair_factors(phi, form);
                let ib = na + b;
                for k in 0..n {
                    if k == a || k == ib {
                        continue;
                    }
                    let ia = if k < a {
                        pair_index(n, k, a)
                    } else {
                        pair_index(n, a, k)
                    };
                    let jb = if k < ib {
                        pair_index(n, k, ib)
                    } else {
                        pair_index(n, ib, k)
                    };
                    let (ca, cb) = (c[ia], c[jb]);
                    c[ia] = d * ca + o * cb;
                    c[jb] = o * ca + d * cb;
                }
            }
            let rot2 = rot * rot;
            for i in 0..na {
                for j in i + 1..n {
                    let idx = pair_index(n, i, j);
                    c[idx] *= if j < na { rot2 } else { rot };
                }
            }
        }
    }
    state.step += 1;
}

fn check_norm(state: &ManyBodyState, form: ScatteringForm) -> Result<()> {
    let drift = (state.norm_sqr() - 1.0).abs();
    if form == ScatteringForm::Exact && drift > NORM_TOLERANCE {
        return Err(Error::Invariant(format!(
            "norm drifted by {drift:e} after {} steps",
            state.step
        )));
    }
    Ok(())
}

fn evolve<F: FnMut(&ManyBodyState, &CollisionRound)>(
    cfg: &ManyBodyConfig,
    mut state: ManyBodyState,
    seed: u64,
    stream: u64,
    interval: u64,
    mut record: F,
) -> Result<ManyBodyState> {
    let mut sampler = CollisionSampler::new(cfg, seed, stream)?;
    let phase = cfg.field_phase_rad();
    let mut round = CollisionRound::default();
    record(&state, &round);
    for n in 1..=cfg.steps {
        sampler.next_round(&mut round);
        step(&mut state, &round, phase, cfg.form);
        if n % interval == 0 || n == cfg.steps {
            check_norm(&state, cfg.form)?;
            record(&state, &round);
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialExcitation {
    Symmetric,
    Localized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleSample {
    pub step: u64,
    pub f10: f64,
    pub f01: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSample {
    pub step: u64,
    pub coincidence: f64,
    pub bunch_a: f64,
    pub bunch_b: f64,
}

pub fn run_single_excitation(
    cfg: &ManyBodyConfig,
    seed: u64,
    initial: InitialExcitation,
) -> Result<Vec<SingleSample>> {
    let state = match initial {
        InitialExcitation::Symmetric => ManyBodyState::symmetric_single(cfg.n_a, cfg.n_b),
        InitialExcitation::Localized => ManyBodyState::localized_single(cfg.n_a, cfg.n_b),
    };
    let mut out = Vec::new();
    evolve(cfg, state, seed, 0, cfg.sample_interval(), |s, _| {
        let (f10, f01) = s.fidelities();
        out.push(SingleSample {
            step: s.step,
            f10,
            f01,
        });
    })?;
    Ok(out)
}

pub fn run_two_excitation(cfg: &ManyBodyConfig, seed: u64) -> Result<Vec<PairSample>> {
    Ok(two_excitation_runs(cfg, seed, 1)?.remove(0))
}

/// Independent two-excitation trajectories; seed index `k` uses RNG stream `k`.
pub fn two_excitation_runs(
    cfg: &ManyBodyConfig,
    seed: u64,
    seeds: usize,
) -> Result<Vec<Vec<PairSample>>> {
    if seeds == 0 {
        return Err(Error::Domain("need at least one seed".into()));
    }
    (0..seeds as u64)
        .into_par_iter()
        .map(|k| {
            let state = ManyBodyState::symmetric_pair(cfg.n_a, cfg.n_b);
            let mut out = Vec::new();
            evolve(cfg, state, seed, k, cfg.sample_interval(), |s, _| {
                let (coincidence, bunch_a, bunch_b) = s.bunching();
                out.push(PairSample {
                    step: s.step,
                    coincidence,
                    bunch_a,
                    bunch_b,
                });
            })?;
            Ok(out)
        })
        .collect()
}

/// Independent single-excitation trajectories; seed index `k` uses RNG stream `k`.
pub fn single_excitation_runs(
    cfg: &ManyBodyConfig,
    seed: u64,
    seeds: usize,
    initial: InitialExcitation,
) -> Result<Vec<Vec<SingleSample>>> {
    (0..seeds as u64)
        .into_par_iter()
        .map(|k| {
            let state = match initial {
                InitialExcitation::Symmetric => ManyBodyState::symmetric_single(cfg.n_a, cfg.n_b),
                InitialExcitation::Localized => ManyBodyState::localized_single(cfg.n_a, cfg.n_b),
            };
            let mut out = Vec::new();
            evolve(cfg, state, seed, k, cfg.sample_interval(), |s, _| {
                let (f10, f01) = s.fidelities();
                out.push(SingleSample {
                    step: s.step,
                    f10,
                    f01,
                });
            })?;
            Ok(out)
        })
        .collect()
}

/// Pointwise mean of equally sampled trajectories.
pub fn mean_trajectory(runs: &[Vec<SingleSample>]) -> Result<Vec<SingleSample>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Domain("need at least one seed".into()))?;
    let n = runs.len() as f64;
    Ok((0..first.len())
        .map(|i| {
            let (f10, f01) = runs
                .iter()
                .fold((0.0, 0.0), |acc, r| (acc.0 + r[i].f10, acc.1 + r[i].f01));
            SingleSample {
                step: first[i].step,
                f10: f10 / n,
                f01: f01 / n,
            }
        })
        .collect())
}

/// Seed-averaged single-excitation fidelities.
pub fn average_single_excitation(
    cfg: &ManyBodyConfig,
    seed: u64,
    seeds: usize,
    initial: InitialExcitation,
) -> Result<Vec<SingleSample>> {
    mean_trajectory(&single_excitation_runs(cfg, seed, seeds, initial)?)
}

/// Seed ensemble decomposition of the early-time single-excitation dynamics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeEstimate {
    pub steps: Vec<u64>,
    /// Seed mean of `⟨0_a 1_b|ψ⟩`.
    pub mean_amplitude_re: Vec<f64>,
    pub mean_amplitude_im: Vec<f64>,
    /// Seed mean of `Σ_b S_b²/(2N_a)` with `S_b = Σ_{a,n} (κ_ab φ_a − ⟨φ⟩/N_b)`.
    pub eps_sq: Vec<f64>,
    /// Seed mean of `1 − F_10 − F_01`.
    pub residual_weight: Vec<f64>,
    /// Fitted `J τ` from `|mean amplitude|`.
    pub coupling_per_step: f64,
    /// Fitted `ε²` growth per step.
    pub eps_sq_per_step: f64,
    pub residual_per_step: f64,
    pub warnings: Vec<String>,
}

pub fn estimate_exchange_amplitudes(
    cfg: &ManyBodyConfig,
    seed: u64,
    seeds: usize,
) -> Result<ExchangeEstimate> {
    cfg.validate()?;
    let interval = cfg.sample_interval();
    let runs: Vec<Vec<(u64, Complex64, f64, f64)>> = (0..seeds as u64)
        .into_par_iter()
        .map(|k| {
            let mut sums = vec![0.0; cfg.n_b];
            let mut out = Vec::new();
            let mut pending = 0u64;
            let mut sampler = CollisionSampler::new(cfg, seed, k)?;
            let phase = cfg.field_phase_rad();
            let mut state = ManyBodyState::symmetric_single(cfg.n_a, cfg.n_b);
            let mut round = CollisionRound::default();
            let record = |state: &ManyBodyState, sums: &[f64], out: &mut Vec<_>| {
                let shift = state.step as f64 * cfg.n_a as f64 * cfg.phi_mean_rad / cfg.n_b as f64;
                let eps: f64 =
                    sums.iter().map(|s| (s - shift).powi(2)).sum::<f64>() / (2.0 * cfg.n_a as f64);
                let (f10, f01) = state.fidelities();
                out.push((
                    state.step,
                    state.symmetric_noble_amplitude(),
                    eps,
                    1.0 - f10 - f01,
                ));
            };
            record(&state, &sums, &mut out);
            for n in 1..=cfg.steps {
                sampler.next_round(&mut round);
                for (&b, &phi) in round.partners.iter().zip(&round.angles) {
                    sums[b] += phi;
                }
                step(&mut state, &round, phase, cfg.form);
                pending += 1;
                if pending == interval || n == cfg.steps {
                    pending = 0;
                    check_norm(&state, cfg.form)?;
                    record(&state, &sums, &mut out);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let first = runs
        .first()
        .ok_or_else(|| Error::Domain("need at least one seed".into()))?;
    let m = seeds as f64;
    let mut est = ExchangeEstimate {
        steps: first.iter().map(|r| r.0).collect(),
        mean_amplitude_re: vec![0.0; first.len()],
        mean_amplitude_im: vec![0.0; first.len()],
        eps_sq: vec![0.0; first.len()],
        residual_weight: vec![0.0; first.len()],
        coupling_per_step: 0.0,
        eps_sq_per_step: 0.0,
        residual_per_step: 0.0,
        warnings: Vec::new(),
    };
    for run in &runs {
        for (i, &(_, amp, eps, res)) in run.iter().enumerate() {
            est.mean_amplitude_re[i] += amp.re / m;
            est.mean_amplitude_im[i] += amp.im / m;
            est.eps_sq[i] += eps / m;
            est.residual_weight[i] += res / m;
        }
    }
    let t: Vec<f64> = est.steps.iter().map(|&s| s as f64).collect();
    let mag: Vec<f64> = est
        .mean_amplitude_re
        .iter()
        .zip(&est.mean_amplitude_im)
        .map(|(r, i)| r.hypot(*i))
        .collect();
    est.coupling_per_step = slope_through_origin(&t, &mag);
    est.eps_sq_per_step = slope_through_origin(&t, &est.eps_sq);
    est.residual_per_step = linear_fit(&t, &est.residual_weight).1;
    if seeds < 100 {
        est.warnings.push(format!(
            "only {seeds} seeds; ε̂² carries ~{:.0}% noise",
            100.0 / (seeds as f64).sqrt()
        ));
    }
    if cfg.coupling_per_step() * cfg.steps as f64 > 0.3 {
        est.warnings
            .push("J t exceeds 0.3; linear regime assumption is weak".into());
    }
    Ok(est)
}

/// Amplitudes of `ȧ = −γa − iJb`, `ḃ = −iJa` from `a(0)=1`, `b(0)=0`.
pub fn two_mode_amplitudes(j: f64, gamma: f64, t: f64) -> (Complex64, Complex64) {
    let kappa = Complex64::new(gamma * gamma / 4.0 - j * j, 0.0).sqrt();
    let env = (-gamma * t / 2.0).exp();
    let (sinh_over, cosh) = if kappa.norm() * t.max(1.0) < 1e-9 {
        (Complex64::new(t, 0.0), Complex64::new(1.0, 0.0))
    } else {
        ((kappa * t).sinh() / kappa, (kappa * t).cosh())
    };
    let a = env * (cosh - gamma / 2.0 * sinh_over);
    let b = -Complex64::new(0.0, 1.0) * j * env * sinh_over;
    (a, b)
}

/// Least-squares `(Jτ, γτ)` of the damped two-mode model to fidelity samples.
pub fn fit_two_mode_decay(samples: &[SingleSample], j_guess: f64, gamma_max: f64) -> (f64, f64) {
    let rss = |j: f64, g: f64| -> f64 {
        samples
            .iter()
            .map(|s| {
                let (a, b) = two_mode_amplitudes(j, g, s.step as f64);
                (a.norm_sqr() - s.f10).powi(2) + (b.norm_sqr() - s.f01).powi(2)
            })
            .sum()
    };
    let best_j = |g: f64| golden_min(|j| rss(j, g), 0.7 * j_guess, 1.3 * j_guess, 1e-6 * j_guess);
    let gamma = golden_min(|g| rss(best_j(g), g), 0.0, gamma_max, 1e-6 * gamma_max);
    (best_j(gamma), gamma)
}
