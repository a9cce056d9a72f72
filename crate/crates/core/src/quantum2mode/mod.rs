//! Collective bosonic modes: linear drift, Langevin noise, and Gaussian or
//! truncated-Fock propagation in the noble-gas rotating frame.

pub mod fock;
pub mod gaussian;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::params::{incoherent_occupation, DerivedRates};

pub use fock::{propagate_fock, thermal_loss_fock_distribution, FockDensityState, FockRun};
pub use gaussian::{propagate_gaussian, squeezing_db, GaussianModeState, Quadrature};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Noise rates injected into one alkali mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlkaliNoise {
    /// `⟨F†F⟩` rate.
    pub normal: f64,
    /// `⟨F F†⟩` rate.
    pub anti_normal: f64,
}

/// Spin-exchange noise with imperfect polarizations plus thermal noise for the
/// remaining relaxation `decay − exchange_decay` at occupation `(1−p_a)/(2p_a)`.
pub fn alkali_noise(decay: f64, exchange_decay: f64, p_a: f64, p_b: f64) -> AlkaliNoise {
    let exchange = exchange_decay.min(decay).max(0.0);
    let rest = (decay - exchange).max(0.0);
    let occupation = incoherent_occupation(p_a).unwrap_or(0.0);
    AlkaliNoise {
        normal: (2.0 - p_a - p_b) / (4.0 * p_a) * 2.0 * exchange + 2.0 * rest * occupation,
        anti_normal: (2.0 + p_a + p_b) / (4.0 * p_a) * 2.0 * exchange
            + 2.0 * rest * (occupation + 1.0),
    }
}

/// Linear Langevin system `d v/dt = A(B) v + F` over bosonic modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftDiffusion {
    /// Drift at zero detuning.
    pub drift: DMatrix<Complex64>,
    /// Modes that acquire `+iΔ` on the diagonal.
    pub detuned: Vec<bool>,
    /// `Δ(B) = detuning_slope · B + detuning_offset`.
    pub detuning_slope: f64,
    pub detuning_offset: f64,
    /// `⟨F_i† F_j⟩` rates (Hermitian).
    pub normal: DMatrix<Complex64>,
    /// `⟨F_i F_j†⟩` rates (Hermitian).
    pub anti_normal: DMatrix<Complex64>,
}

impl DriftDiffusion {
    pub fn modes(&self) -> usize {
        self.drift.nrows()
    }

    pub fn detuning(&self, b: f64) -> f64 {
        self.detuning_slope * b + self.detuning_offset
    }

    pub fn drift_at(&self, b: f64) -> DMatrix<Complex64> {
        let delta = self.detuning(b);
        let mut a = self.drift.clone();
        for (m, &on) in self.detuned.iter().enumerate() {
            if on {
                a[(m, m)] += I * delta;
            }
        }
        a
    }

    /// Real drift acting on interleaved quadratures `(X_0, P_0, X_1, P_1, ...)`.
    pub fn quadrature_drift(&self, b: f64) -> DMatrix<f64> {
        let a = self.drift_at(b);
        let n = self.modes();
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = a[(i, j)];
                out[(2 * i, 2 * j)] = z.re;
                out[(2 * i, 2 * j + 1)] = -z.im;
                out[(2 * i + 1, 2 * j)] = z.im;
                out[(2 * i + 1, 2 * j + 1)] = z.re;
            }
        }
        out
    }

    /// Symmetrized quadrature diffusion matrix.
    pub fn quadrature_diffusion(&self) -> DMatrix<f64> {
        let n = self.modes();
        let mut d = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let (nn, mm) = (self.normal[(i, j)], self.anti_normal[(i, j)]);
                let sym = 0.5 * (nn + mm).re;
                let cross = 0.5 * (nn.im - mm.im);
                d[(2 * i, 2 * j)] = sym;
                d[(2 * i + 1, 2 * j + 1)] = sym;
                d[(2 * i, 2 * j + 1)] = cross;
                d[(2 * i + 1, 2 * j)] = -cross;
            }
        }
        d
    }

    /// Alkali/noble pair with coupling `j`, alkali decay `decay`, no noble decay.
    pub fn two_mode(
        j: f64,
        decay: f64,
        exchange_decay: f64,
        p_a: f64,
        p_b: f64,
        detuning_slope: f64,
        detuning_offset: f64,
    ) -> Self {
        let drift = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(-decay, 0.0),
                -I * j,
                -I * j,
                Complex64::new(0.0, 0.0),
            ],
        );
        let noise = alkali_noise(decay, exchange_decay, p_a, p_b);
        let mut normal = DMatrix::zeros(2, 2);
        let mut anti_normal = DMatrix::zeros(2, 2);
        normal[(0, 0)] = Complex64::new(noise.normal, 0.0);
        anti_normal[(0, 0)] = Complex64::new(noise.anti_normal, 0.0);
        Self {
            drift,
            detuned: vec![true, false],
            detuning_slope,
            detuning_offset,
            normal,
            anti_normal,
        }
    }
}

/// Two-mode system with coupling `J`, decay `γ` and spin-exchange noise from `rates`.
pub fn build_two_mode(rates: &DerivedRates, p_a: f64, p_b: f64) -> DriftDiffusion {
    DriftDiffusion::two_mode(
        rates.j,
        rates.gamma,
        rates.gamma_ex,
        p_a,
        p_b,
        rates.g_a_slowed - rates.g_b,
        rates.delta_c,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_polarization_gives_vacuum_exchange_noise() {
        let n = alkali_noise(3.0, 3.0, 1.0, 1.0);
        assert_eq!(n.normal, 0.0);
        assert_eq!(n.anti_normal, 6.0);
    }

    #[test]
    fn imperfect_polarization_factors() {
        let n = alkali_noise(1.0, 1.0, 0.9, 0.9);
        assert!((n.normal / 2.0 - 0.2 / 3.6).abs() < 1e-15);
        assert!((n.anti_normal / 2.0 - 3.8 / 3.6).abs() < 1e-15);
        assert!((n.normal / 2.0 - 0.0556).abs() < 1e-4);
        assert!((n.anti_normal / 2.0 - 1.0556).abs() < 1e-4);
    }

    #[test]
    fn lossless_drift_is_a_beam_splitter() {
        let dd = DriftDiffusion::two_mode(2.0, 0.0, 0.0, 0.8, 0.7, 1.0, 0.0);
        let a = dd.drift_at(0.0);
        // -i A is Hermitian and D vanishes.
        let h = a.map(|z| -I * z);
        assert!((h.clone() - h.adjoint()).norm() < 1e-15);
        assert_eq!(dd.quadrature_diffusion().norm(), 0.0);
        assert_eq!(dd.drift_at(3.0)[(0, 0)], I * 3.0);
    }

    #[test]
    fn quadrature_diffusion_restores_vacuum() {
        let dd = DriftDiffusion::two_mode(0.0, 1.5, 0.5, 1.0, 1.0, 0.0, 0.0);
        let a = dd.quadrature_drift(0.0);
        let d = dd.quadrature_diffusion();
        let vac = DMatrix::<f64>::identity(4, 4) * 0.5;
        let lyap = &a * &vac + &vac * a.transpose() + d;
        assert!(lyap.norm() < 1e-15);
    }
}
