//! Spherically symmetric diffusion modes of a spherical cell, their overlaps,
//! and the multimode Langevin system built on them.
//!
//! Radial profiles are `sin(k r)/r` with `k R` a root of `x cos x − c sin x`:
//! alkali Dirichlet walls give `x = mπ`, a Robin wall with extrapolation length
//! `λ` gives `c = 1 − R/λ`, and the non-relaxing noble-gas wall gives `c = 1`
//! together with the uniform `k = 0` mode.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::bisect;
use crate::params::{incoherent_occupation, DerivedRates};
use crate::quantum2mode::{alkali_noise, DriftDiffusion, GaussianModeState};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlkaliBoundary {
    #[default]
    Dirichlet,
    Robin {
        extrapolation_length_cm: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeBasis {
    pub radius: f64,
    pub alkali_boundary: AlkaliBoundary,
    pub alkali_wavenumbers: Vec<f64>,
    pub noble_wavenumbers: Vec<f64>,
    pub gamma_alkali: Vec<f64>,
    pub gamma_noble: Vec<f64>,
    /// `c[m][n] = ∫ A_m B_n d³r`, alkali rows and noble columns.
    pub overlap: Vec<Vec<f64>>,
}

fn shell_norm(k: f64, radius: f64) -> f64 {
    // 1/sqrt(∫ 4π sin²(k r) dr) over [0, R].
    (4.0 * std::f64::consts::PI * (radius / 2.0 - (2.0 * k * radius).sin() / (4.0 * k)))
        .sqrt()
        .recip()
}

/// First `count` positive roots of `x cos x − c sin x`.
fn radial_roots(c: f64, count: usize) -> Result<Vec<f64>> {
    let f = |x: f64| x * x.cos() - c * x.sin();
    let mut roots = Vec::with_capacity(count);
    let step = 0.05;
    let mut lo = 1e-6;
    let mut flo = f(lo);
    while roots.len() < count {
        let hi = lo + step;
        let fhi = f(hi);
        if flo.signum() != fhi.signum() {
            roots.push(bisect(f, lo, hi, 1e-14)?);
        }
        lo = hi;
        flo = fhi;
        if lo > 1e7 {
            return Err(Error::Numerical("radial root search ran away".into()));
        }
    }
    Ok(roots)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `∫₀ᴿ sin(a r) sin(b r) dr`.
fn sin_product_integral(a: f64, b: f64, radius: f64) -> f64 {
    0.5 * radius * (sinc((a - b) * radius) - sinc((a + b) * radius))
}

/// `∫₀ᴿ r sin(k r) dr`.
fn r_sin_integral(k: f64, radius: f64) -> f64 {
    let kr = k * radius;
    (kr.sin() - kr * kr.cos()) / (k * k)
}

#[allow(clippy::too_many_arguments)]
pub fn build_mode_basis(
    radius: f64,
    d_a: f64,
    d_b: f64,
    gamma_a: f64,
    gamma_b: f64,
    n_alkali: usize,
    n_noble: usize,
    alkali_boundary: AlkaliBoundary,
) -> Result<ModeBasis> {
    if n_alkali == 0 || n_noble == 0 {
        return Err(Error::Domain("need at least one mode per species".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let alkali_x = match alkali_boundary {
        AlkaliBoundary::Dirichlet => (1..=n_alkali)
            .map(|m| m as f64 * std::f64::consts::PI)
            .collect(),
        AlkaliBoundary::Robin {
            extrapolation_length_cm,
        } => {
            if !(extrapolation_length_cm > 0.0) {
                return Err(Error::Domain(
                    "extrapolation length must be positive".into(),
                ));
            }
            radial_roots(1.0 - radius / extrapolation_length_cm, n_alkali)?
        }
    };
    let mut noble_x = vec![0.0];
    noble_x.extend(radial_roots(1.0, n_noble - 1)?);
    let alkali_k: Vec<f64> = alkali_x.iter().map(|x| x / radius).collect();
    let noble_k: Vec<f64> = noble_x.iter().map(|x| x / radius).collect();
    let volume = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
    let four_pi = 4.0 * std::f64::consts::PI;
    let overlap = alkali_k
        .iter()
        .map(|&ka| {
            let na = shell_norm(ka, radius);
            noble_k
                .iter()
                .map(|&kb| {
                    if kb == 0.0 {
                        four_pi * na * r_sin_integral(ka, radius) / volume.sqrt()
                    } else {
                        four_pi * na * shell_norm(kb, radius) * sin_product_integral(ka, kb, radius)
                    }
                })
                .collect()
        })
        .collect();
    Ok(ModeBasis {
        radius,
        alkali_boundary,
        gamma_alkali: alkali_k.iter().map(|k| gamma_a + d_a * k * k).collect(),
        gamma_noble: noble_k.iter().map(|k| gamma_b + d_b * k * k).collect(),
        alkali_wavenumbers: alkali_k,
        noble_wavenumbers: noble_k,
        overlap,
    })
}

impl ModeBasis {
    pub fn n_alkali(&self) -> usize {
        self.alkali_wavenumbers.len()
    }

    pub fn n_noble(&self) -> usize {
        self.noble_wavenumbers.len()
    }

    /// Normalized radial profile `A_m(r)`.
    pub fn alkali_profile(&self, m: usize, r: f64) -> f64 {
        let k = self.alkali_wavenumbers[m];
        let kr = k * r;
        let sinc = if kr.abs() < 1e-8 { k } else { kr.sin() / r };
        shell_norm(k, self.radius) * sinc
    }

    /// Normalized radial profile `B_n(r)`.
    pub fn noble_profile(&self, n: usize, r: f64) -> f64 {
        let k = self.noble_wavenumbers[n];
        if k == 0.0 {
            let volume = 4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3);
            return volume.sqrt().recip();
        }
        let kr = k * r;
        let sinc = if kr.abs() < 1e-8 { k } else { kr.sin() / r };
        shell_norm(k, self.radius) * sinc
    }

    /// `max |c cᵀ − 1|` over the leading `rows` alkali modes.
    pub fn isometry_residual(&self, rows: usize) -> f64 {
        let rows = rows.min(self.n_alkali());
        let mut worst = 0f64;
        for i in 0..rows {
            for j in 0..rows {
                let dot: f64 = self.overlap[i]
                    .iter()
                    .zip(&self.overlap[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Alkali-mode amplitudes of the normalized uniform profile.
    pub fn uniform_alkali_profile(&self) -> Vec<f64> {
        let col: Vec<f64> = self.overlap.iter().map(|row| row[0]).collect();
        let norm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
        col.iter().map(|c| c / norm).collect()
    }

    /// Restricts to the leading modes of each species.
    pub fn truncated(&self, n_alkali: usize, n_noble: usize) -> Self {
        Self {
            radius: self.radius,
            alkali_boundary: self.alkali_boundary,
            alkali_wavenumbers: self.alkali_wavenumbers[..n_alkali].to_vec(),
            noble_wavenumbers: self.noble_wavenumbers[..n_noble].to_vec(),
            gamma_alkali: self.gamma_alkali[..n_alkali].to_vec(),
            gamma_noble: self.gamma_noble[..n_noble].to_vec(),
            overlap: self.overlap[..n_alkali]
                .iter()
                .map(|r| r[..n_noble].to_vec())
                .collect(),
        }
    }
}

const I: Complex64 = Complex64::new(0.0, 1.0);

fn noble_noise(decay: f64, p_b: f64) -> (f64, f64) {
    let occupation = incoherent_occupation(p_b).unwrap_or(0.0);
    (2.0 * decay * occupation, 2.0 * decay * (occupation + 1.0))
}

/// Multimode system: alkali modes first, then noble modes.
pub fn build_multimode_system(
    basis: &ModeBasis,
    rates: &DerivedRates,
    p_a: f64,
    p_b: f64,
) -> DriftDiffusion {
    let (na, nb) = (basis.n_alkali(), basis.n_noble());
    let n = na + nb;
    let mut drift = DMatrix::<Complex64>::zeros(n, n);
    let mut normal = DMatrix::<Complex64>::zeros(n, n);
    let mut anti_normal = DMatrix::<Complex64>::zeros(n, n);
    for m in 0..na {
        drift[(m, m)] = Complex64::new(-basis.gamma_alkali[m], 0.0);
        for k in 0..nb {
            let c = basis.overlap[m][k];
            drift[(m, na + k)] = -I * rates.j * c;
            drift[(na + k, m)] = -I * rates.j * c;
        }
        let noise = alkali_noise(basis.gamma_alkali[m], rates.gamma_ex, p_a, p_b);
        normal[(m, m)] = Complex64::new(noise.normal, 0.0);
        anti_normal[(m, m)] = Complex64::new(noise.anti_normal, 0.0);
    }
    for k in 0..nb {
        let g = basis.gamma_noble[k];
        drift[(na + k, na + k)] = Complex64::new(-g, 0.0);
        let (nn, mm) = noble_noise(g, p_b);
        normal[(na + k, na + k)] = Complex64::new(nn, 0.0);
        anti_normal[(na + k, na + k)] = Complex64::new(mm, 0.0);
    }
    let mut detuned = vec![true; na];
    detuned.extend(std::iter::repeat_n(false, nb));
    DriftDiffusion {
        drift,
        detuned,
        detuning_slope: rates.g_a_slowed - rates.g_b,
        detuning_offset: rates.delta_c,
        normal,
        anti_normal,
    }
}

/// Initial state: the uniform-profile alkali mode carries `block`, other alkali
/// modes hold `(1−p_a)/(2p_a)`, noble modes hold `(1−p_b)/(2p_b)`.
pub fn initial_multimode_state(
    basis: &ModeBasis,
    p_a: f64,
    p_b: f64,
    block: &[f64; 4],
) -> Result<GaussianModeState> {
    let (na, nb) = (basis.n_alkali(), basis.n_noble());
    let bg_a = incoherent_occupation(p_a)? + 0.5;
    let bg_b = incoherent_occupation(p_b)? + 0.5;
    let u = basis.uniform_alkali_profile();
    let mut state = GaussianModeState::vacuum(na + nb);
    for i in 0..na {
        for j in 0..na {
            let w = u[i] * u[j];
            for (r, c, v) in [
                (0, 0, block[0]),
                (0, 1, block[1]),
                (1, 0, block[2]),
                (1, 1, block[3]),
            ] {
                let bg = if r == c && i == j { bg_a } else { 0.0 };
                let excess = w * (v - if r == c { bg_a } else { 0.0 });
                state.cov[(2 * i + r, 2 * j + c)] = bg + excess;
            }
        }
    }
    for k in 0..nb {
        let idx = na + k;
        state.cov[(2 * idx, 2 * idx)] = bg_b;
        state.cov[(2 * idx + 1, 2 * idx + 1)] = bg_b;
    }
    Ok(state)
}

/// Stable-mode corrections from adiabatically eliminated reservoir modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirCorrection {
    /// Number of stable modes per species.
    pub split: usize,
    /// Last reservoir mode kept explicitly (exclusive).
    pub tail: usize,
    pub eps_a: DMatrix<Complex64>,
    pub eps_b: DMatrix<Complex64>,
    /// Extra `⟨G†G⟩` and `⟨GG†⟩` rates over the `2 × split` stable modes.
    pub extra_normal: DMatrix<Complex64>,
    pub extra_anti_normal: DMatrix<Complex64>,
    /// `J/(π² γ_b,split)` and `J/(π² γ_a,split)`.
    pub bound_a: f64,
    pub bound_b: f64,
    pub warnings: Vec<String>,
}

impl ReservoirCorrection {
    pub fn max_eps_a(&self) -> f64 {
        self.eps_a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_eps_b(&self) -> f64 {
        self.eps_b.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Eliminates modes `split..tail` of both species at detuning `delta`, adding
/// the asymptotic tail `J/(π² γ_tail)` when modes beyond `tail` exist.
pub fn eliminate_reservoir(
    basis: &ModeBasis,
    rates: &DerivedRates,
    delta: f64,
    p_a: f64,
    p_b: f64,
    split: usize,
    tail: usize,
) -> Result<ReservoirCorrection> {
    let (na, nb) = (basis.n_alkali(), basis.n_noble());
    if split == 0 || split > na.min(nb) || tail < split || tail > na.min(nb) {
        return Err(Error::Domain(format!(
            "need 0 < split <= tail <= {} (split={split}, tail={tail})",
            na.min(nb)
        )));
    }
    let j = rates.j;
    let mut warnings = Vec::new();
    let mut eps_a = DMatrix::<Complex64>::zeros(split, split);
    let mut eps_b = DMatrix::<Complex64>::zeros(split, split);
    let mut extra_normal = DMatrix::<Complex64>::zeros(2 * split, 2 * split);
    let mut extra_anti = DMatrix::<Complex64>::zeros(2 * split, 2 * split);
    if tail > split {
        let (ga0, gb0) = (basis.gamma_alkali[split], basis.gamma_noble[split]);
        if ga0 < 10.0 * j || gb0 < 10.0 * j {
            warnings.push(format!(
                "weak reservoir: gamma_a,{split} = {ga0:.3e}, gamma_b,{split} = {gb0:.3e}, J = {j:.3e}"
            ));
        }
        for s in 0..split {
            for n in 0..split {
                let mut ea = Complex64::new(0.0, 0.0);
                let mut eb = Complex64::new(0.0, 0.0);
                for r in split..tail {
                    let gbr = basis.gamma_noble[r];
                    let gar = basis.gamma_alkali[r];
                    ea +=
                        basis.overlap[s][r] * basis.overlap[n][r] * j / Complex64::new(gbr, delta);
                    eb +=
                        basis.overlap[r][s] * basis.overlap[r][n] * j / Complex64::new(gar, -delta);
                }
                eps_a[(s, n)] = ea;
                eps_b[(s, n)] = eb;
            }
        }
        if tail < na.min(nb) {
            let tail_a = j / (std::f64::consts::PI.powi(2) * basis.gamma_noble[tail]);
            let tail_b = j / (std::f64::consts::PI.powi(2) * basis.gamma_alkali[tail]);
            eps_a.iter_mut().for_each(|z| *z += tail_a);
            eps_b.iter_mut().for_each(|z| *z += tail_b);
        }
        // Reservoir noise seen through the coupling, treated as white at the stable frequency.
        for r in split..tail {
            let gbr = basis.gamma_noble[r];
            let (nb_r, mb_r) = noble_noise(gbr, p_b);
            let wb = j * j / (gbr * gbr + delta * delta);
            let gar = basis.gamma_alkali[r];
            let noise_ar = alkali_noise(gar, rates.gamma_ex, p_a, p_b);
            let wa = j * j / (gar * gar + delta * delta);
            for s in 0..split {
                for s2 in 0..split {
                    let ca = basis.overlap[s][r] * basis.overlap[s2][r] * wb;
                    extra_normal[(s, s2)] += ca * nb_r;
                    extra_anti[(s, s2)] += ca * mb_r;
                    let cb = basis.overlap[r][s] * basis.overlap[r][s2] * wa;
                    extra_normal[(split + s, split + s2)] += cb * noise_ar.normal;
                    extra_anti[(split + s, split + s2)] += cb * noise_ar.anti_normal;
                }
            }
        }
    }
    let pi2 = std::f64::consts::PI.powi(2);
    Ok(ReservoirCorrection {
        split,
        tail,
        eps_a,
        eps_b,
        extra_normal,
        extra_anti_normal: extra_anti,
        bound_a: j / (pi2 * basis.gamma_noble[split.min(nb - 1)]),
        bound_b: j / (pi2 * basis.gamma_alkali[split.min(na - 1)]),
        warnings,
    })
}

/// Stable-mode system with the reservoir corrections applied.
pub fn build_eliminated_system(
    basis: &ModeBasis,
    rates: &DerivedRates,
    p_a: f64,
    p_b: f64,
    corr: &ReservoirCorrection,
) -> DriftDiffusion {
    let s = corr.split;
    let mut dd = build_multimode_system(&basis.truncated(s, s), rates, p_a, p_b);
    for i in 0..s {
        for k in 0..s {
            dd.drift[(i, k)] -= rates.j * corr.eps_a[(i, k)];
            dd.drift[(s + i, s + k)] -= rates.j * corr.eps_b[(i, k)];
        }
    }
    dd.normal += &corr.extra_normal;
    dd.anti_normal += &corr.extra_anti_normal;
    dd
}
