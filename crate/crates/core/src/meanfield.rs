//! Mean-field Bloch equations for the two spin vectors, per atom.
//!
//! Integration runs in a frame rotating about ẑ at the noble-gas precession
//! frequency of the current schedule segment, so the fast common Larmor
//! rotation never limits the step size. Cross products are invariant under
//! rotations about ẑ, so only the Zeeman terms change.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::numerics::rk4_step;
use crate::params::{DerivedRates, FieldSchedule, PhysicalConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub t: f64,
    pub f: Vector3<f64>,
    pub k: Vector3<f64>,
}

/// Coefficients of the Bloch equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochModel {
    pub n_a: f64,
    pub n_b: f64,
    pub zeta: f64,
    pub k_se: f64,
    pub q: f64,
    pub p_a: f64,
    pub p_b: f64,
    /// Slowed alkali gyromagnetic ratio.
    pub g_a: f64,
    pub g_b: f64,
    /// Transverse damping of `f` on top of the spin-exchange term.
    pub damping_f: f64,
    /// Transverse damping of `k` on top of the spin-exchange term.
    pub damping_k: f64,
    pub volume: f64,
}

impl BlochModel {
    /// The explicit damping is reduced by the spin-exchange loss already present
    /// in the equations, so transverse decay totals `γ` and `γ_b`.
    pub fn new(cfg: &PhysicalConfig, rates: &DerivedRates) -> Self {
        Self {
            n_a: cfg.n_a,
            n_b: cfg.n_b,
            zeta: rates.zeta,
            k_se: rates.k_se,
            q: rates.q,
            p_a: cfg.p_a,
            p_b: cfg.p_b,
            g_a: rates.g_a_slowed,
            g_b: rates.g_b,
            damping_f: (rates.gamma - cfg.n_b * rates.k_se).max(0.0),
            damping_k: (rates.gamma_b - cfg.n_a * rates.k_se).max(0.0),
            volume: 4.0 / 3.0 * std::f64::consts::PI * cfg.radius.powi(3),
        }
    }

    pub fn coupling(&self) -> f64 {
        0.5 * self.zeta * (self.q * self.p_a * self.p_b * self.n_a * self.n_b).sqrt()
    }

    pub fn omega_a(&self, b: f64) -> f64 {
        self.g_a * b - 0.5 * self.zeta * self.p_b * self.n_b
    }

    pub fn omega_b(&self, b: f64) -> f64 {
        self.g_b * b - 0.5 * self.zeta * self.q * self.p_a * self.n_a
    }

    pub fn atoms_a(&self) -> f64 {
        self.n_a * self.volume
    }

    pub fn atoms_b(&self) -> f64 {
        self.n_b * self.volume
    }

    /// Polarized state carrying the requested transverse excitation numbers along x.
    pub fn tilted_state(&self, excitations_a: f64, excitations_b: f64) -> BlochState {
        let fz = 0.5 * self.q * self.p_a;
        let kz = 0.5 * self.p_b;
        let fx = (excitations_a * self.q * self.p_a / self.atoms_a()).sqrt();
        let kx = (excitations_b * self.p_b / self.atoms_b()).sqrt();
        BlochState {
            t: 0.0,
            f: Vector3::new(fx, 0.0, -(fz * fz - fx * fx).max(0.0).sqrt()),
            k: Vector3::new(kx, 0.0, -(kz * kz - kx * kx).max(0.0).sqrt()),
        }
    }

    /// Holstein-Primakoff excitation number of the alkali ensemble.
    pub fn excitations_a(&self, s: &BlochState) -> f64 {
        self.atoms_a() * (s.f.x * s.f.x + s.f.y * s.f.y) / (self.q * self.p_a)
    }

    pub fn excitations_b(&self, s: &BlochState) -> f64 {
        self.atoms_b() * (s.k.x * s.k.x + s.k.y * s.k.y) / self.p_b
    }
}

/// Time derivatives of `(f, k)` in a frame rotating at `frame_rate` about ẑ.
pub fn bloch_rhs(
    state: &BlochState,
    model: &BlochModel,
    b: f64,
    frame_rate: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let (f, k) = (&state.f, &state.k);
    let z = Vector3::z();
    let transverse = |v: &Vector3<f64>| Vector3::new(v.x, v.y, 0.0);
    let df = model.n_b * model.zeta * k.cross(f)
        + model.n_b * model.k_se * (model.q * k - f)
        + (model.g_a * b - frame_rate) * z.cross(f)
        - model.damping_f * transverse(f);
    let dk = model.n_a * model.zeta * f.cross(k)
        + model.n_a * model.k_se * (f / model.q - k)
        + (model.g_b * b - frame_rate) * z.cross(k)
        - model.damping_k * transverse(k);
    (df, dk)
}

/// Largest step allowed on a segment with field `b`.
pub fn max_step(model: &BlochModel, b: f64) -> f64 {
    let fastest = [
        model.coupling(),
        (model.omega_a(b) - model.omega_b(b)).abs(),
        model.damping_f + model.n_b * model.k_se,
        model.damping_k + model.n_a * model.k_se,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if fastest > 0.0 {
        0.01 / fastest
    } else {
        f64::INFINITY
    }
}

const MAX_STEPS: u64 = 2_000_000_000;

/// Fixed-step RK4 over the schedule; records at most about `max_samples` states
/// plus every segment boundary and the final state.
pub fn integrate(
    initial: &BlochState,
    model: &BlochModel,
    schedule: &FieldSchedule,
    t_end: f64,
    dt: f64,
    max_samples: usize,
) -> Result<Vec<BlochState>> {
    if !(dt > 0.0) || !(t_end >= initial.t) {
        return Err(Error::Domain(format!(
            "need dt > 0 and t_end >= t0 (dt={dt}, t_end={t_end})"
        )));
    }
    let intervals: Vec<_> = schedule
        .intervals(t_end)
        .into_iter()
        .filter(|&(_, end, _)| end > initial.t)
        .map(|(start, end, b)| (start.max(initial.t), end, b))
        .collect();
    let plan: Vec<(f64, f64, f64, u64)> = intervals
        .iter()
        .map(|&(start, end, b)| {
            let h = dt.min(max_step(model, b));
            (start, end, b, ((end - start) / h).ceil().max(1.0) as u64)
        })
        .collect();
    let total: u64 = plan.iter().map(|p| p.3).sum();
    if total > MAX_STEPS {
        return Err(Error::Numerical(format!(
            "step size underflow: {total} steps required"
        )));
    }
    let stride = (total / max_samples.max(1) as u64).max(1);
    let mut state = *initial;
    let mut out = vec![state];
    let mut y = [0.0; 6];
    let mut counter = 0u64;
    for (start, end, b, steps) in plan {
        let h = (end - start) / steps as f64;
        let frame = model.omega_b(b);
        for i in 0..steps {
            y[..3].copy_from_slice(state.f.as_slice());
            y[3..].copy_from_slice(state.k.as_slice());
            rk4_step(&mut y, h, |s, d| {
                let tmp = BlochState {
                    t: 0.0,
                    f: Vector3::new(s[0], s[1], s[2]),
                    k: Vector3::new(s[3], s[4], s[5]),
                };
                let (df, dk) = bloch_rhs(&tmp, model, b, frame);
                d[..3].copy_from_slice(df.as_slice());
                d[3..].copy_from_slice(dk.as_slice());
            });
            state.f = Vector3::new(y[0], y[1], y[2]);
            state.k = Vector3::new(y[3], y[4], y[5]);
            state.t = start + (i + 1) as f64 * h;
            counter += 1;
            if counter.is_multiple_of(stride) || i + 1 == steps {
                out.push(state);
            }
        }
        state.t = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bare_model() -> BlochModel {
        BlochModel {
            n_a: 1e14,
            n_b: 1e16,
            zeta: 1e-13,
            k_se: 0.0,
            q: 1.0,
            p_a: 1.0,
            p_b: 1.0,
            g_a: 1e3,
            g_b: 1e3,
            damping_f: 0.0,
            damping_k: 0.0,
            volume: 1.0,
        }
    }

    fn at_compensation(m: &BlochModel) -> f64 {
        // ω_a(B) = ω_b(B) with g_a != g_b.
        let shift = 0.5 * m.zeta * (m.p_b * m.n_b - m.q * m.p_a * m.n_a);
        shift / (m.g_a - m.g_b)
    }

    #[test]
    fn larmor_precession_only() {
        let m = BlochModel {
            zeta: 0.0,
            g_a: 2e3,
            g_b: 5e2,
            ..bare_model()
        };
        let s0 = BlochState {
            t: 0.0,
            f: Vector3::new(0.3, 0.0, -0.2),
            k: Vector3::new(0.0, 0.0, -0.5),
        };
        let b = 1.5;
        let t = 2.0e-3;
        let traj = integrate(&s0, &m, &FieldSchedule::constant(b), t, 1e-7, 10).unwrap();
        let last = traj.last().unwrap();
        // Rotating frame removes g_b B; the residue precesses at (g_a - g_b) B.
        let angle = (m.g_a - m.g_b) * b * t;
        assert!((last.f.x - 0.3 * angle.cos()).abs() < 1e-9);
        assert!((last.f.y - 0.3 * angle.sin()).abs() < 1e-9);
        assert!((last.f.z + 0.2).abs() < 1e-14);
        assert!((last.f.norm() - s0.f.norm()).abs() < 1e-10);
    }

    #[test]
    fn incoherent_transfer_conserves_total_spin() {
        let m = BlochModel {
            zeta: 0.0,
            k_se: 1e-17,
            ..bare_model()
        };
        let s = BlochState {
            t: 0.0,
            f: Vector3::new(0.1, 0.2, -0.4),
            k: Vector3::new(-0.3, 0.1, 0.2),
        };
        let (df, dk) = bloch_rhs(&s, &m, 0.0, 0.0);
        let total = m.atoms_a() * df + m.atoms_b() * dk;
        assert!(total.norm() < 1e-12 * m.atoms_b() * dk.norm());
    }

    #[test]
    fn precession_preserves_lengths() {
        let m = bare_model();
        let s = BlochState {
            t: 0.0,
            f: Vector3::new(0.1, 0.2, -0.4),
            k: Vector3::new(-0.3, 0.1, 0.2),
        };
        let (df, dk) = bloch_rhs(&s, &m, 0.7, 3.0);
        assert!(df.dot(&s.f).abs() < 1e-12 * df.norm());
        assert!(dk.dot(&s.k).abs() < 1e-12 * dk.norm());
    }

    #[test]
    fn resonant_lossless_exchange_is_complete() {
        let m = BlochModel {
            g_a: 2e3,
            ..bare_model()
        };
        let b = at_compensation(&m);
        let j = m.coupling();
        let s0 = m.tilted_state(1000.0, 0.0);
        let t = PI / (2.0 * j);
        let traj = integrate(&s0, &m, &FieldSchedule::constant(b), t, 1.0, 4).unwrap();
        let frac = m.excitations_b(traj.last().unwrap()) / m.excitations_a(&s0);
        assert!((frac - 1.0).abs() < 1e-6, "transfer {frac}");
    }

    #[test]
    fn detuned_transfer_bounded_by_rabi_formula() {
        let m = BlochModel {
            g_a: 2e3,
            ..bare_model()
        };
        let j = m.coupling();
        let delta = 10.0 * j;
        let b = at_compensation(&m) + delta / (m.g_a - m.g_b);
        let s0 = m.tilted_state(1000.0, 0.0);
        let traj = integrate(
            &s0,
            &m,
            &FieldSchedule::constant(b),
            3.0 * PI / j,
            1.0,
            4000,
        )
        .unwrap();
        let peak = traj.iter().map(|s| m.excitations_b(s)).fold(0.0, f64::max);
        let bound = 4.0 * j * j / (4.0 * j * j + delta * delta) * 1000.0;
        assert!(
            peak <= bound * 1.001 && peak > 0.9 * bound,
            "peak {peak} bound {bound}"
        );
    }

    #[test]
    fn overdamped_regime_single_maximum() {
        let base = bare_model();
        let j = base.coupling();
        let m = BlochModel {
            g_a: 2e3,
            damping_f: 10.0 * j,
            ..base
        };
        let b = at_compensation(&m);
        let s0 = m.tilted_state(1000.0, 0.0);
        let traj = integrate(&s0, &m, &FieldSchedule::constant(b), 20.0 / j, 1.0, 2000).unwrap();
        let pop: Vec<f64> = traj.iter().map(|s| m.excitations_b(s)).collect();
        assert_eq!(crate::numerics::local_maxima(&pop).len(), 1);
        let peak = pop.iter().cloned().fold(0.0, f64::max);
        assert!(peak < 0.5 * 1000.0);
    }

    #[test]
    fn halving_step_converges() {
        let m = BlochModel {
            g_a: 2e3,
            damping_f: 50.0,
            ..bare_model()
        };
        let b = at_compensation(&m) + 100.0;
        let s0 = m.tilted_state(1000.0, 10.0);
        let t = 1.0 / m.coupling();
        let dt = max_step(&m, b);
        let a = *integrate(&s0, &m, &FieldSchedule::constant(b), t, dt, 1)
            .unwrap()
            .last()
            .unwrap();
        let c = *integrate(&s0, &m, &FieldSchedule::constant(b), t, dt / 2.0, 1)
            .unwrap()
            .last()
            .unwrap();
        let diff = (a.f - c.f).norm() + (a.k - c.k).norm();
        assert!(diff < 1e-6 * (a.f.norm() + a.k.norm()));
    }
}
