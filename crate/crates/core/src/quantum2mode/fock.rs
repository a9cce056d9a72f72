//! Two-mode truncated-Fock master equation.
//!
//! `H = −Δ a†a + J(a†b + b†a)` reproduces the drift of the Langevin model;
//! alkali noise enters as loss `2γ(1+n̄)` and gain `2γ n̄` with `n̄ = ⟨F†F⟩/(2γ)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::factorial::{binomial, factorial};

use super::DriftDiffusion;
use crate::error::{Error, Result};
use crate::numerics::rk4_step;
use crate::params::FieldSchedule;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const LEAK_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    A,
    ADag,
    B,
    BDag,
}

/// Density matrix over `|n_a, n_b⟩`, index `n_a (n_max+1) + n_b`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityState {
    pub t: f64,
    pub n_max: usize,
    pub rho: Vec<Complex64>,
}

impl FockDensityState {
    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.n_max + 1)
    }

    fn split(&self, idx: usize) -> (usize, usize) {
        (idx / (self.n_max + 1), idx % (self.n_max + 1))
    }

    fn join(&self, na: usize, nb: usize) -> usize {
        na * (self.n_max + 1) + nb
    }

    pub fn fock(n_max: usize, na: usize, nb: usize) -> Result<Self> {
        if na > n_max || nb > n_max {
            return Err(Error::Domain(format!("|{na},{nb}⟩ exceeds cutoff {n_max}")));
        }
        let mut s = Self {
            t: 0.0,
            n_max,
            rho: Vec::new(),
        };
        let d = s.dim();
        s.rho = vec![ZERO; d * d];
        let i = s.join(na, nb);
        s.rho[i * d + i] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Product of single-mode density matrices of size `n_max + 1`.
    pub fn product(rho_a: &DMatrix<Complex64>, rho_b: &DMatrix<Complex64>) -> Result<Self> {
        if rho_a.nrows() != rho_b.nrows() || !rho_a.is_square() || !rho_b.is_square() {
            return Err(Error::Domain(
                "single-mode matrices must be square and equal-sized".into(),
            ));
        }
        let n_max = rho_a.nrows() - 1;
        let mut s = Self {
            t: 0.0,
            n_max,
            rho: Vec::new(),
        };
        let d = s.dim();
        s.rho = vec![ZERO; d * d];
        for r in 0..d {
            let (ra, rb) = s.split(r);
            for c in 0..d {
                let (ca, cb) = s.split(c);
                s.rho[r * d + c] = rho_a[(ra, ca)] * rho_b[(rb, cb)];
            }
        }
        Ok(s)
    }

    pub fn trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.rho[i * d + i].re).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.rho[r * d + c] - self.rho[c * d + r].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_row_slice(d, d, &self.rho);
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Marginal photon-number distribution of mode a.
    pub fn probs_a(&self) -> Vec<f64> {
        let d = self.dim();
        let mut p = vec![0.0; self.n_max + 1];
        for i in 0..d {
            p[self.split(i).0] += self.rho[i * d + i].re;
        }
        p
    }

    pub fn probs_b(&self) -> Vec<f64> {
        let d = self.dim();
        let mut p = vec![0.0; self.n_max + 1];
        for i in 0..d {
            p[self.split(i).1] += self.rho[i * d + i].re;
        }
        p
    }

    fn apply(&self, idx: usize, op: Ladder) -> Option<(usize, f64)> {
        let (na, nb) = self.split(idx);
        match op {
            Ladder::A if na > 0 => Some((self.join(na - 1, nb), (na as f64).sqrt())),
            Ladder::ADag if na < self.n_max => {
                Some((self.join(na + 1, nb), ((na + 1) as f64).sqrt()))
            }
            Ladder::B if nb > 0 => Some((self.join(na, nb - 1), (nb as f64).sqrt())),
            Ladder::BDag if nb < self.n_max => {
                Some((self.join(na, nb + 1), ((nb + 1) as f64).sqrt()))
            }
            _ => None,
        }
    }

    /// `Tr(O ρ)` for a product of ladder operators written left to right.
    pub fn expect(&self, word: &[Ladder]) -> Complex64 {
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            let mut target = Some((i, 1.0));
            for &op in word.iter().rev() {
                target = target.and_then(|(j, c)| self.apply(j, op).map(|(k, c2)| (k, c * c2)));
            }
            if let Some((j, c)) = target {
                // O|i⟩ = c|j⟩ contributes c ρ_ij.
                acc += self.rho[i * d + j] * c;
            }
        }
        acc
    }

    /// Weight in the highest retained level of either mode.
    pub fn top_level_population(&self) -> f64 {
        let pa = self.probs_a();
        let pb = self.probs_b();
        pa[self.n_max].max(pb[self.n_max])
    }
}

/// Coherent state truncated at `n_max` and renormalized.
pub fn coherent_ket(n_max: usize, alpha: Complex64) -> Vec<Complex64> {
    let mut ket = Vec::with_capacity(n_max + 1);
    let mut amp = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..=n_max {
        if n > 0 {
            amp = amp * alpha / (n as f64).sqrt();
        }
        ket.push(amp);
    }
    let norm = ket.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    ket.iter().map(|a| a / norm).collect()
}

pub fn pure_mode(ket: &[Complex64]) -> DMatrix<Complex64> {
    let n = ket.len();
    DMatrix::from_fn(n, n, |r, c| ket[r] * ket[c].conj())
}

/// Thermal state truncated at `n_max` and renormalized.
pub fn thermal_mode(n_max: usize, occupation: f64) -> DMatrix<Complex64> {
    let ratio = occupation / (1.0 + occupation);
    let total: f64 = (0..=n_max).map(|k| ratio.powi(k as i32)).sum();
    DMatrix::from_fn(n_max + 1, n_max + 1, |r, c| {
        if r == c {
            Complex64::new(ratio.powi(r as i32) / total, 0.0)
        } else {
            ZERO
        }
    })
}

/// Summary of one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct FockObservables {
    pub t: f64,
    pub population_a: f64,
    pub population_b: f64,
    pub probs_a: Vec<f64>,
    pub probs_b: Vec<f64>,
    pub trace: f64,
    pub purity: f64,
}

impl FockObservables {
    fn of(s: &FockDensityState) -> Self {
        Self {
            t: s.t,
            population_a: s.expect(&[Ladder::ADag, Ladder::A]).re,
            population_b: s.expect(&[Ladder::BDag, Ladder::B]).re,
            probs_a: s.probs_a(),
            probs_b: s.probs_b(),
            trace: s.trace(),
            purity: s.purity(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FockRun {
    pub samples: Vec<FockObservables>,
    pub final_state: FockDensityState,
    pub warnings: Vec<String>,
}

/// Sparse rows of the effective non-Hermitian generator `K = H − (i/2)Σ L†L`.
fn effective_generator(
    s: &FockDensityState,
    delta: f64,
    j: f64,
    loss: f64,
    gain: f64,
) -> Vec<Vec<(usize, Complex64)>> {
    let d = s.dim();
    let mut rows = vec![Vec::new(); d];
    for (i, row) in rows.iter_mut().enumerate() {
        let (na, nb) = s.split(i);
        let nf = na as f64;
        // Truncated a a† vanishes on the top level.
        let aadag = if na < s.n_max { nf + 1.0 } else { 0.0 };
        row.push((
            i,
            Complex64::new(-delta * nf, -0.5 * (loss * nf + gain * aadag)),
        ));
        // Row i of a†b collects from |na-1, nb+1⟩.
        if na > 0 && nb < s.n_max {
            let c = (nf * (nb + 1) as f64).sqrt();
            row.push((s.join(na - 1, nb + 1), Complex64::new(j * c, 0.0)));
        }
        if nb > 0 && na < s.n_max {
            let c = ((na + 1) as f64 * nb as f64).sqrt();
            row.push((s.join(na + 1, nb - 1), Complex64::new(j * c, 0.0)));
        }
    }
    rows
}

fn master_rhs(
    s: &FockDensityState,
    k_rows: &[Vec<(usize, Complex64)>],
    loss: f64,
    gain: f64,
    rho: &[Complex64],
    out: &mut [Complex64],
) {
    let d = s.dim();
    let mi = Complex64::new(0.0, -1.0);
    out.iter_mut().for_each(|z| *z = ZERO);
    for r in 0..d {
        let dst = &mut out[r * d..(r + 1) * d];
        for &(k, v) in &k_rows[r] {
            let coeff = mi * v;
            let src = &rho[k * d..(k + 1) * d];
            for c in 0..d {
                dst[c] += coeff * src[c];
            }
        }
    }
    // + i ρ K†: (ρK†)_rc = Σ_k ρ_rk conj(K_ck).
    for c in 0..d {
        for &(k, v) in &k_rows[c] {
            let coeff = Complex64::new(0.0, 1.0) * v.conj();
            for r in 0..d {
                out[r * d + c] += coeff * rho[r * d + k];
            }
        }
    }
    let np1 = s.n_max + 1;
    for r in 0..d {
        let ra = r / np1;
        for c in 0..d {
            let ca = c / np1;
            let mut acc = ZERO;
            // loss · a ρ a†
            if ra < s.n_max && ca < s.n_max {
                let f = ((ra + 1) as f64 * (ca + 1) as f64).sqrt();
                acc += rho[(r + np1) * d + c + np1] * (loss * f);
            }
            // gain · a† ρ a
            if ra > 0 && ca > 0 {
                let f = (ra as f64 * ca as f64).sqrt();
                acc += rho[(r - np1) * d + c - np1] * (gain * f);
            }
            out[r * d + c] += acc;
        }
    }
}

/// Integrates the master equation, recording observables every `dt`.
pub fn propagate_fock(
    state: &FockDensityState,
    dd: &DriftDiffusion,
    schedule: &FieldSchedule,
    t_end: f64,
    dt: f64,
) -> Result<FockRun> {
    if dd.modes() != 2 {
        return Err(Error::Domain(
            "Fock propagation supports exactly two modes".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let decay = -dd.drift[(0, 0)].re;
    let j = -dd.drift[(0, 1)].im;
    let normal = dd.normal[(0, 0)].re;
    let occupation = if decay > 0.0 {
        normal / (2.0 * decay)
    } else {
        0.0
    };
    let loss = 2.0 * decay * (1.0 + occupation);
    let gain = 2.0 * decay * occupation;
    let mut current = state.clone();
    let mut samples = vec![FockObservables::of(&current)];
    let mut warnings = Vec::new();
    let mut leak_warned = false;
    let n = current.n_max as f64;
    for (start, end, b) in schedule.intervals(t_end) {
        if end <= current.t {
            continue;
        }
        let start = start.max(current.t);
        let delta = dd.detuning(b);
        let k_rows = effective_generator(&current, delta, j, loss, gain);
        let spectral = (delta.abs() + 2.0 * j + loss + gain) * (n + 1.0);
        let h_max = if spectral > 0.0 {
            0.05 / spectral
        } else {
            f64::INFINITY
        };
        let records = ((end - start) / dt).ceil().max(1.0) as usize;
        let span = (end - start) / records as f64;
        let sub = (span / h_max).ceil().max(1.0) as usize;
        let h = span / sub as f64;
        for rec in 0..records {
            for _ in 0..sub {
                let shape = current.clone();
                rk4_step(&mut current.rho, h, |rho, out| {
                    master_rhs(&shape, &k_rows, loss, gain, rho, out)
                });
            }
            current.t = start + (rec + 1) as f64 * span;
            let top = current.top_level_population();
            if top > LEAK_WARN && !leak_warned {
                warnings.push(format!(
                    "truncation leak: top Fock level holds {top:.3e} at t = {:.6e}",
                    current.t
                ));
                leak_warned = true;
            }
            samples.push(FockObservables::of(&current));
        }
        current.t = end;
    }
    let trace = current.trace();
    if (trace - 1.0).abs() > 1e-8 {
        return Err(Error::Invariant(format!("trace drifted to {trace}")));
    }
    Ok(FockRun {
        samples,
        final_state: current,
        warnings,
    })
}

/// Output photon statistics of a Fock state `|n_in⟩` mixed on a beam splitter of
/// transmissivity `eta` with a thermal port of occupation `n_env`.
pub fn thermal_loss_fock_distribution(n_in: u64, eta: f64, n_env: f64, k_max: usize) -> Vec<f64> {
    let t = eta.sqrt();
    let s = (1.0 - eta).max(0.0).sqrt();
    let ratio = n_env / (1.0 + n_env);
    let mut probs = vec![0.0; k_max + 1];
    let mut weight = 1.0 / (1.0 + n_env);
    let mut m: u64 = 0;
    let mut remaining = 1.0;
    while remaining > 1e-15 && m < 400 {
        let total = n_in + m;
        for (k, slot) in probs.iter_mut().enumerate() {
            let k = k as u64;
            if k > total {
                break;
            }
            // Coefficient of c†^k d†^(N-k) in (t c† + s d†)^n (−s c† + t d†)^m.
            let mut coeff = 0.0;
            for jj in 0..=n_in.min(k) {
                if k - jj > m {
                    continue;
                }
                coeff += binomial(n_in, jj)
                    * t.powi(jj as i32)
                    * s.powi((n_in - jj) as i32)
                    * binomial(m, k - jj)
                    * (-s).powi((k - jj) as i32)
                    * t.powi((m + jj - k) as i32);
            }
            let norm = factorial(k) * factorial(total - k) / (factorial(n_in) * factorial(m));
            *slot += weight * coeff * coeff * norm;
        }
        remaining -= weight;
        weight *= ratio;
        m += 1;
    }
    probs
}
