use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::DriftDiffusion;
use crate::error::{Error, Result};
use crate::params::FieldSchedule;

/// Means and quadrature covariance; vacuum variance is 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModeState {
    pub t: f64,
    pub means: Vec<Complex64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    X,
    P,
    /// Smallest variance over all quadrature angles.
    Min,
}

impl GaussianModeState {
    pub fn vacuum(modes: usize) -> Self {
        Self {
            t: 0.0,
            means: vec![Complex64::new(0.0, 0.0); modes],
            cov: DMatrix::identity(2 * modes, 2 * modes) * 0.5,
        }
    }

    /// Thermal product state with the given occupations.
    pub fn thermal(occupations: &[f64]) -> Self {
        let mut s = Self::vacuum(occupations.len());
        for (m, &n) in occupations.iter().enumerate() {
            s.set_block(m, &[n + 0.5, 0.0, 0.0, n + 0.5]);
        }
        s
    }

    pub fn modes(&self) -> usize {
        self.means.len()
    }

    /// Overwrites the 2×2 covariance block of one mode (row-major), clearing its correlations.
    pub fn set_block(&mut self, mode: usize, block: &[f64; 4]) {
        let n = 2 * self.modes();
        for k in 0..n {
            for r in [2 * mode, 2 * mode + 1] {
                self.cov[(r, k)] = 0.0;
                self.cov[(k, r)] = 0.0;
            }
        }
        self.cov[(2 * mode, 2 * mode)] = block[0];
        self.cov[(2 * mode, 2 * mode + 1)] = block[1];
        self.cov[(2 * mode + 1, 2 * mode)] = block[2];
        self.cov[(2 * mode + 1, 2 * mode + 1)] = block[3];
    }

    /// Squeezed thermal block: X variance reduced by `db` and P anti-squeezed.
    pub fn squeezed_block(db: f64, occupation: f64) -> [f64; 4] {
        let g = 10f64.powf(db / 10.0);
        let thermal = occupation + 0.5;
        [thermal / g, 0.0, 0.0, thermal * g]
    }

    /// Single-mode state of `Σ_i w_i â_i` for real, normalized weights.
    pub fn project(&self, weights: &[f64]) -> Self {
        let mut block = [0.0; 4];
        for (i, &wi) in weights.iter().enumerate() {
            for (j, &wj) in weights.iter().enumerate() {
                for (k, (r, c)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                    block[k] += wi * wj * self.cov[(2 * i + r, 2 * j + c)];
                }
            }
        }
        let mean = weights.iter().zip(&self.means).map(|(w, m)| m * *w).sum();
        let mut out = Self::vacuum(1);
        out.t = self.t;
        out.means[0] = mean;
        out.set_block(0, &block);
        out
    }

    pub fn variance(&self, mode: usize, quadrature: Quadrature) -> f64 {
        let (xx, xp, pp) = (
            self.cov[(2 * mode, 2 * mode)],
            self.cov[(2 * mode, 2 * mode + 1)],
            self.cov[(2 * mode + 1, 2 * mode + 1)],
        );
        match quadrature {
            Quadrature::X => xx,
            Quadrature::P => pp,
            Quadrature::Min => 0.5 * (xx + pp) - (0.25 * (xx - pp).powi(2) + xp * xp).sqrt(),
        }
    }

    /// `⟨a†a⟩` of one mode.
    pub fn population(&self, mode: usize) -> f64 {
        let v = self.cov[(2 * mode, 2 * mode)] + self.cov[(2 * mode + 1, 2 * mode + 1)];
        0.5 * (v - 1.0) + self.means[mode].norm_sqr()
    }

    /// Smallest eigenvalue of `Σ + (i/2)Ω`.
    pub fn uncertainty_margin(&self) -> f64 {
        let n = 2 * self.modes();
        let mut h =
            DMatrix::<Complex64>::from_fn(n, n, |r, c| Complex64::new(self.cov[(r, c)], 0.0));
        for m in 0..self.modes() {
            h[(2 * m, 2 * m + 1)] += Complex64::new(0.0, 0.5);
            h[(2 * m + 1, 2 * m)] -= Complex64::new(0.0, 0.5);
        }
        h.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let asym = (&self.cov - self.cov.transpose()).amax();
        if asym > tol {
            return Err(Error::Invariant(format!(
                "covariance asymmetric by {asym:e}"
            )));
        }
        let margin = self.uncertainty_margin();
        if margin < -tol {
            return Err(Error::Invariant(format!(
                "uncertainty relation violated: eigenvalue {margin:e}"
            )));
        }
        Ok(())
    }

    fn quadrature_means(&self) -> DVector<f64> {
        let s2 = std::f64::consts::SQRT_2;
        DVector::from_iterator(
            2 * self.modes(),
            self.means.iter().flat_map(|z| [s2 * z.re, s2 * z.im]),
        )
    }
}

/// `−10 log10(Var / Var_vacuum)`.
pub fn squeezing_db(state: &GaussianModeState, mode: usize, quadrature: Quadrature) -> f64 {
    -10.0 * (state.variance(mode, quadrature) / 0.5).log10()
}

/// Exact one-step maps `(Φ, Q)` for `dΣ/dt = ĀΣ + ΣĀᵀ + D` over a step `h` (Van Loan).
fn step_maps(a: &DMatrix<f64>, d: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut c = DMatrix::zeros(2 * n, 2 * n);
    c.view_mut((0, 0), (n, n)).copy_from(&(-a * h));
    c.view_mut((0, n), (n, n)).copy_from(&(d * h));
    c.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * h));
    let e = c.exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let q = &phi * e.view((0, n), (n, n));
    // Symmetrize to remove rounding asymmetry.
    let q = 0.5 * (&q + q.transpose());
    (phi, q)
}

/// Propagates through the schedule, recording a state every `dt` and at segment ends.
pub fn propagate_gaussian(
    state: &GaussianModeState,
    dd: &DriftDiffusion,
    schedule: &FieldSchedule,
    t_end: f64,
    dt: f64,
) -> Result<Vec<GaussianModeState>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if state.modes() != dd.modes() {
        return Err(Error::Domain(format!(
            "state has {} modes, system has {}",
            state.modes(),
            dd.modes()
        )));
    }
    state.check_physical(1e-9)?;
    let diffusion = dd.quadrature_diffusion();
    let mut current = state.clone();
    let mut means = current.quadrature_means();
    let mut out = vec![current.clone()];
    for (start, end, b) in schedule.intervals(t_end) {
        if end <= current.t {
            continue;
        }
        let start = start.max(current.t);
        let steps = ((end - start) / dt).ceil().max(1.0) as usize;
        let h = (end - start) / steps as f64;
        let (phi, q) = step_maps(&dd.quadrature_drift(b), &diffusion, h);
        for i in 0..steps {
            current.cov = &phi * &current.cov * phi.transpose() + &q;
            means = &phi * &means;
            current.t = start + (i + 1) as f64 * h;
            for m in 0..current.modes() {
                current.means[m] =
                    Complex64::new(means[2 * m], means[2 * m + 1]) / std::f64::consts::SQRT_2;
            }
            out.push(current.clone());
        }
        current.t = end;
        current.check_physical(1e-9)?;
    }
    Ok(out)
}
