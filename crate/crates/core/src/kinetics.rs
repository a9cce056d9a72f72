//! Ballistic hard-sphere collision statistics in a periodic box.
//!
//! `v_T` is the mean relative speed; relative velocities are Maxwellian with
//! most-probable speed `v_p = (√π/2) v_T`, so the per-alkali collision
//! probability is `τ n_b σ v_T` without approximation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::numerics::integrate;

type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticsConfig {
    /// Alkali atoms per sample.
    pub n_alkali: usize,
    pub n_b_per_cm3: f64,
    pub box_cm: f64,
    pub sigma_cm2: f64,
    /// Mean relative speed.
    pub v_t_cm_per_s: f64,
    pub tau_s: f64,
    /// `m_a / m_b`.
    pub mass_ratio: f64,
    pub coarse_length_cm: f64,
    pub bins: usize,
    pub samples: usize,
    pub phi_mean_rad: f64,
    pub phi_std_rad: f64,
}

impl Default for KineticsConfig {
    fn default() -> Self {
        // ε = 0.01 cm, v_T τ = 50 ε, p ≈ 0.05, mean free path 10 cm.
        Self {
            n_alkali: 2000,
            n_b_per_cm3: 318.0,
            box_cm: 8.0,
            sigma_cm2: std::f64::consts::PI * 1e-4,
            v_t_cm_per_s: 1e4,
            tau_s: 5e-5,
            mass_ratio: 13.0,
            coarse_length_cm: 2.5,
            bins: 40,
            samples: 60,
            phi_mean_rad: 1e-5,
            phi_std_rad: 1e-5,
        }
    }
}

impl KineticsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kinetics.n_b_per_cm3", self.n_b_per_cm3),
            ("kinetics.box_cm", self.box_cm),
            ("kinetics.sigma_cm2", self.sigma_cm2),
            ("kinetics.v_t_cm_per_s", self.v_t_cm_per_s),
            ("kinetics.tau_s", self.tau_s),
            ("kinetics.mass_ratio", self.mass_ratio),
            ("kinetics.coarse_length_cm", self.coarse_length_cm),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if self.n_alkali == 0 || self.samples == 0 || self.bins == 0 {
            return Err(Error::Config(
                "kinetics.n_alkali, samples and bins must be positive".into(),
            ));
        }
        if 2.0 * self.coarse_length_cm >= self.box_cm {
            return Err(Error::Config(format!(
                "kinetics.coarse_length_cm ({}) must be below half of kinetics.box_cm ({})",
                self.coarse_length_cm, self.box_cm
            )));
        }
        if !(self.phi_std_rad >= 0.0) {
            return Err(Error::Config("kinetics.phi_std_rad must be >= 0".into()));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        (self.sigma_cm2 / std::f64::consts::PI).sqrt()
    }

    pub fn most_probable_speed(&self) -> f64 {
        std::f64::consts::PI.sqrt() / 2.0 * self.v_t_cm_per_s
    }

    /// `τ n_b σ v_T`.
    pub fn nominal_probability(&self) -> f64 {
        self.tau_s * self.n_b_per_cm3 * self.sigma_cm2 * self.v_t_cm_per_s
    }

    pub fn noble_count(&self) -> usize {
        (self.n_b_per_cm3 * self.box_cm.powi(3)).round() as usize
    }
}

/// `P(|v| ≥ x v_p)` for a Maxwellian with most-probable speed `v_p`.
pub fn speed_tail(x: f64) -> f64 {
    2.0 / std::f64::consts::PI.sqrt() * x * (-x * x).exp() + erfc(x)
}

/// Collision probability of one pair at separation `r` under the window criterion.
pub fn kappa_exact(cfg: &KineticsConfig, r: f64) -> f64 {
    let cone = (cfg.epsilon() / r).min(std::f64::consts::PI);
    0.5 * (1.0 - cone.cos()) * speed_tail(r / (cfg.tau_s * cfg.most_probable_speed()))
}

/// Small-angle solid-angle form `σ/(4πr²) · P(v ≥ r/τ)`.
pub fn kappa_solid_angle(cfg: &KineticsConfig, r: f64) -> f64 {
    cfg.sigma_cm2 / (4.0 * std::f64::consts::PI * r * r)
        * speed_tail(r / (cfg.tau_s * cfg.most_probable_speed()))
}

/// Step approximation `σ/(4πr²) Θ(τ v_T − r)`.
pub fn kappa_heaviside(cfg: &KineticsConfig, r: f64) -> f64 {
    if r <= cfg.tau_s * cfg.v_t_cm_per_s {
        cfg.sigma_cm2 / (4.0 * std::f64::consts::PI * r * r)
    } else {
        0.0
    }
}

/// `n_b ∫ 4πr² κ(r) dr` under the window criterion.
pub fn exact_probability(cfg: &KineticsConfig) -> Result<f64> {
    let eps = cfg.epsilon();
    let reach = 12.0 * cfg.tau_s * cfg.most_probable_speed();
    let f = |r: f64| 4.0 * std::f64::consts::PI * r * r * kappa_exact(cfg, r);
    Ok(cfg.n_b_per_cm3
        * (integrate(f, 0.0, eps, 1e-12)? + integrate(f, eps, reach.max(2.0 * eps), 1e-12)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasSample {
    pub box_cm: f64,
    pub epsilon: f64,
    pub v_t: f64,
    pub alkali_positions: Vec<Vec3>,
    pub alkali_velocities: Vec<Vec3>,
    pub noble_positions: Vec<Vec3>,
    pub noble_velocities: Vec<Vec3>,
}

fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl GasSample {
    pub fn generate(cfg: &KineticsConfig, rng: &mut impl Rng) -> Self {
        // Relative velocity components have variance v_p²/2 split by reduced mass.
        let s = cfg.most_probable_speed() / std::f64::consts::SQRT_2;
        let s_a = s * (1.0 / (1.0 + cfg.mass_ratio)).sqrt();
        let s_b = s * (cfg.mass_ratio / (1.0 + cfg.mass_ratio)).sqrt();
        let l = cfg.box_cm;
        let pos = |rng: &mut dyn rand::RngCore| {
            [
                rng.gen::<f64>() * l,
                rng.gen::<f64>() * l,
                rng.gen::<f64>() * l,
            ]
        };
        let vel = |rng: &mut dyn rand::RngCore, sd: f64| -> Vec3 {
            let g = |rng: &mut dyn rand::RngCore| -> f64 { StandardNormal.sample(rng) };
            [sd * g(rng), sd * g(rng), sd * g(rng)]
        };
        let nb = cfg.noble_count();
        let mut alkali_positions = Vec::with_capacity(cfg.n_alkali);
        let mut alkali_velocities = Vec::with_capacity(cfg.n_alkali);
        for _ in 0..cfg.n_alkali {
            alkali_positions.push(pos(rng));
            alkali_velocities.push(vel(rng, s_a));
        }
        let mut noble_positions = Vec::with_capacity(nb);
        let mut noble_velocities = Vec::with_capacity(nb);
        for _ in 0..nb {
            noble_positions.push(pos(rng));
            noble_velocities.push(vel(rng, s_b));
        }
        Self {
            box_cm: l,
            epsilon: cfg.epsilon(),
            v_t: cfg.v_t_cm_per_s,
            alkali_positions,
            alkali_velocities,
            noble_positions,
            noble_velocities,
        }
    }

    /// Mean `|v_a − v_b|` over pairs `(i, i mod N_b)`.
    pub fn mean_relative_speed(&self) -> f64 {
        let nb = self.noble_velocities.len();
        let n = self.alkali_velocities.len().max(nb);
        (0..n)
            .map(|i| {
                let va = self.alkali_velocities[i % self.alkali_velocities.len()];
                let vb = self.noble_velocities[i % nb];
                norm(&[va[0] - vb[0], va[1] - vb[1], va[2] - vb[2]])
            })
            .sum::<f64>()
            / n as f64
    }

    /// Visits every pair that can satisfy `r ≤ τ |v_ab|`. Nobles are grouped by speed so
    /// each alkali scans a sphere sized by the group's fastest member, not the global one.
    fn for_each_causal_pair<F>(&self, tau: f64, mut f: F)
    where
        F: FnMut(usize, usize, Vec3, Vec3),
    {
        let mut by_speed: Vec<(f64, usize)> =
            self.noble_velocities.iter().map(norm).zip(0..).collect();
        by_speed.sort_by(|x, y| x.0.total_cmp(&y.0));
        let n = by_speed.len();
        let vmax_a = self.alkali_velocities.iter().map(norm).fold(0.0, f64::max);
        let mut lo = 0;
        for q in [0.5, 0.8, 0.95, 0.99, 1.0] {
            let hi = ((q * n as f64).ceil() as usize).min(n);
            if hi <= lo {
                continue;
            }
            let vmax_b = by_speed[hi - 1].0;
            let ids: Vec<usize> = by_speed[lo..hi].iter().map(|x| x.1).collect();
            let grid = NobleGrid::new(self, &ids, tau * (vmax_a + vmax_b));
            for (a, va) in self.alkali_velocities.iter().enumerate() {
                grid.visit(self, a, tau * (norm(va) + vmax_b), &mut f);
            }
            lo = hi;
        }
    }

    fn max_reach(&self, tau: f64) -> f64 {
        let vmax = |vs: &[Vec3]| vs.iter().map(norm).fold(0.0, f64::max);
        tau * (vmax(&self.alkali_velocities) + vmax(&self.noble_velocities))
    }
}

/// Periodic cell list over a subset of nobles, stored contiguously per cell.
struct NobleGrid {
    cells: usize,
    size: f64,
    start: Vec<usize>,
    ids: Vec<usize>,
    pos: Vec<Vec3>,
    vel: Vec<Vec3>,
}

impl NobleGrid {
    fn new(sample: &GasSample, subset: &[usize], max_radius: f64) -> Self {
        let l = sample.box_cm;
        let cells = ((l / (max_radius / 2.0)).floor() as usize).clamp(1, 128);
        let size = l / cells as f64;
        let mut keyed: Vec<(usize, usize)> = subset
            .iter()
            .map(|&b| (Self::flat(cells, size, &sample.noble_positions[b]), b))
            .collect();
        keyed.sort_unstable();
        let mut start = vec![0usize; cells * cells * cells + 1];
        for &(c, _) in &keyed {
            start[c + 1] += 1;
        }
        for i in 0..cells * cells * cells {
            start[i + 1] += start[i];
        }
        Self {
            cells,
            size,
            start,
            ids: keyed.iter().map(|x| x.1).collect(),
            pos: keyed.iter().map(|x| sample.noble_positions[x.1]).collect(),
            vel: keyed.iter().map(|x| sample.noble_velocities[x.1]).collect(),
        }
    }

    fn cell(cells: usize, size: f64, x: f64) -> usize {
        ((x / size) as usize).min(cells - 1)
    }

    fn flat(cells: usize, size: f64, p: &Vec3) -> usize {
        let c = |x| Self::cell(cells, size, x);
        (c(p[0]) * cells + c(p[1])) * cells + c(p[2])
    }

    fn visit<F>(&self, sample: &GasSample, a: usize, radius: f64, f: &mut F)
    where
        F: FnMut(usize, usize, Vec3, Vec3),
    {
        let (cells, l) = (self.cells, sample.box_cm);
        let pa = sample.alkali_positions[a];
        let va = sample.alkali_velocities[a];
        let r2 = radius * radius;
        let reach = (radius / self.size).ceil() as isize;
        let full = 2 * reach + 1 >= cells as isize;
        let span: Vec<isize> = if full {
            (0..cells as isize).collect()
        } else {
            (-reach..=reach).collect()
        };
        let base = pa.map(|x| Self::cell(cells, self.size, x) as isize);
        let index = |o: isize, d: isize| {
            if full {
                d as usize
            } else {
                (o + d).rem_euclid(cells as isize) as usize
            }
        };
        for &dx in &span {
            let cx = index(base[0], dx);
            for &dy in &span {
                let cy = index(base[1], dy);
                for &dz in &span {
                    let c = (cx * cells + cy) * cells + index(base[2], dz);
                    for k in self.start[c]..self.start[c + 1] {
                        let pb = self.pos[k];
                        let mut d = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
                        for x in d.iter_mut() {
                            *x -= l * (*x / l).round();
                        }
                        if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r2 {
                            let vb = self.vel[k];
                            f(
                                a,
                                self.ids[k],
                                d,
                                [va[0] - vb[0], va[1] - vb[1], va[2] - vb[2]],
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Collision criterion for one pair: `θ ≤ ε/r` and `r/v ≤ τ`.
pub fn pair_collides(r_ab: &Vec3, v_ab: &Vec3, epsilon: f64, tau: f64) -> bool {
    let r = norm(r_ab);
    let v = norm(v_ab);
    if v == 0.0 || r > v * tau {
        return false;
    }
    if r == 0.0 {
        return true;
    }
    let cos_theta = (r_ab[0] * v_ab[0] + r_ab[1] * v_ab[1] + r_ab[2] * v_ab[2]) / (r * v);
    let cone = epsilon / r;
    cone >= std::f64::consts::PI || cos_theta >= cone.cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Collision {
    pub a: usize,
    pub b: usize,
    pub r: f64,
    pub speed: f64,
}

/// Every colliding alkali–noble pair in `[0, τ]`.
pub fn detect_collisions(sample: &GasSample, tau: f64) -> Result<Vec<Collision>> {
    let reach = sample.max_reach(tau);
    if 2.0 * reach >= sample.box_cm {
        return Err(Error::Domain(format!(
            "ballistic reach {reach:.3e} cm exceeds half the box {:.3e} cm",
            sample.box_cm
        )));
    }
    let mut out = Vec::new();
    sample.for_each_causal_pair(tau, |a, b, r, v| {
        if pair_collides(&r, &v, sample.epsilon, tau) {
            out.push(Collision {
                a,
                b,
                r: norm(&r),
                speed: norm(&v),
            });
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaBin {
    pub r_lo: f64,
    pub r_hi: f64,
    /// Expected number of pairs in the shell: positions are uniform and independent.
    pub pairs: f64,
    pub collisions: u64,
    pub mean_kappa: f64,
    pub exact: f64,
    pub solid_angle: f64,
    pub heaviside: f64,
    pub chi2_exact: f64,
    pub chi2_solid_angle: f64,
    pub chi2_heaviside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaReport {
    pub trials: u64,
    pub collisions: u64,
    pub probability: f64,
    pub probability_se: f64,
    /// `τ n_b σ v_T`.
    pub probability_nominal: f64,
    /// Same integral with the finite cone and `r < ε` pairs included.
    pub probability_exact: f64,
    pub mean_free_time_s: f64,
    pub mean_free_time_nominal_s: f64,
    pub mean_relative_speed: f64,
    /// Largest separation of any detected collision, and `τ ·` largest pair speed.
    pub max_collision_distance: f64,
    pub max_reach: f64,
    pub bins: Vec<KappaBin>,
    pub chi2_exact: f64,
    pub chi2_solid_angle: f64,
    pub chi2_heaviside: f64,
    /// `Σκ²` and `Σκ` over all pairs.
    pub kappa_sq_sum: u64,
    pub kappa_sum: u64,
    pub coarse_pairs: f64,
    pub coarse_mean_kappa: f64,
    /// `σ τ v_T · 3/(4π l³)`.
    pub coarse_theory: f64,
    /// Alkali atoms with two collisions, observed and expected for independent pairs.
    pub alkali_doubles: u64,
    pub alkali_doubles_expected: f64,
    pub noble_doubles: u64,
    pub noble_doubles_expected: f64,
    /// `⟨κφ⟩/⟨κ⟩` and its standard error.
    pub mean_phi_given_collision: f64,
    pub mean_phi_se: f64,
    pub warnings: Vec<String>,
}

struct Tally {
    trials: u64,
    collisions: u64,
    kappa_sq: u64,
    hit_counts: Vec<u64>,
    coarse_hits: u64,
    alkali_doubles: u64,
    noble_doubles: u64,
    phi_sum: f64,
    phi_sq_sum: f64,
    speed_sum: f64,
    speed_count: u64,
    max_distance: f64,
    max_reach: f64,
}

impl Tally {
    fn new(bins: usize) -> Self {
        Self {
            trials: 0,
            collisions: 0,
            kappa_sq: 0,
            hit_counts: vec![0; bins],
            coarse_hits: 0,
            alkali_doubles: 0,
            noble_doubles: 0,
            phi_sum: 0.0,
            phi_sq_sum: 0.0,
            speed_sum: 0.0,
            speed_count: 0,
            max_distance: 0.0,
            max_reach: 0.0,
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.trials += o.trials;
        self.collisions += o.collisions;
        self.kappa_sq += o.kappa_sq;
        for (x, y) in self.hit_counts.iter_mut().zip(&o.hit_counts) {
            *x += y;
        }
        self.coarse_hits += o.coarse_hits;
        self.alkali_doubles += o.alkali_doubles;
        self.noble_doubles += o.noble_doubles;
        self.phi_sum += o.phi_sum;
        self.phi_sq_sum += o.phi_sq_sum;
        self.speed_sum += o.speed_sum;
        self.speed_count += o.speed_count;
        self.max_distance = self.max_distance.max(o.max_distance);
        self.max_reach = self.max_reach.max(o.max_reach);
        self
    }
}

fn bin_average(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let vol = (hi.powi(3) - lo.powi(3)) / 3.0;
    Ok(integrate(|r| r * r * f(r), lo, hi, 1e-13)? / vol)
}

/// Monte Carlo moments of the collision indicator over `cfg.samples` independent boxes.
pub fn estimate_kappa_moments(cfg: &KineticsConfig, seed: u64) -> Result<KappaReport> {
    cfg.validate()?;
    let l = cfg.coarse_length_cm;
    let width = l / cfg.bins as f64;
    let phi = if cfg.phi_std_rad > 0.0 {
        Some(
            Normal::new(cfg.phi_mean_rad, cfg.phi_std_rad)
                .map_err(|e| Error::Config(e.to_string()))?,
        )
    } else {
        None
    };
    let tally = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| -> Result<Tally> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let sample = GasSample::generate(cfg, &mut rng);
            let reach = sample.max_reach(cfg.tau_s);
            if reach > l {
                return Err(Error::Domain(format!(
                    "collision reach {reach:.3e} cm exceeds the coarse length {l:.3e} cm"
                )));
            }
            let mut t = Tally::new(cfg.bins);
            t.trials = cfg.n_alkali as u64;
            t.max_reach = reach;
            let mut per_alkali = vec![0u32; cfg.n_alkali];
            let mut per_noble = std::collections::HashMap::<usize, u32>::new();
            let mut hits = Vec::new();
            sample.for_each_causal_pair(cfg.tau_s, |a, b, r, v| {
                if pair_collides(&r, &v, sample.epsilon, cfg.tau_s) {
                    let dist = norm(&r);
                    hits.push((a, b, ((dist / width) as usize).min(cfg.bins - 1), dist));
                }
            });
            // Pair visits are ordered by cells; sort so the φ draws are seed-stable.
            hits.sort_by_key(|h| (h.0, h.1));
            for (a, b, bin, dist) in hits {
                t.hit_counts[bin] += 1;
                t.collisions += 1;
                t.kappa_sq += 1;
                t.coarse_hits += 1;
                t.max_distance = t.max_distance.max(dist);
                per_alkali[a] += 1;
                *per_noble.entry(b).or_default() += 1;
                let x = phi.map_or(cfg.phi_mean_rad, |d| d.sample(&mut rng));
                t.phi_sum += x;
                t.phi_sq_sum += x * x;
            }
            t.alkali_doubles = per_alkali.iter().filter(|&&c| c >= 2).count() as u64;
            t.noble_doubles = per_noble.values().filter(|&&c| c >= 2).count() as u64;
            t.speed_sum = sample.mean_relative_speed();
            t.speed_count = 1;
            Ok(t)
        })
        .try_reduce(|| Tally::new(cfg.bins), |x, y| Ok(x.merge(y)))?;

    let p = tally.collisions as f64 / tally.trials as f64;
    let p_se = (p * (1.0 - p) / tally.trials as f64).sqrt();
    let mut bins = Vec::with_capacity(cfg.bins);
    // Pairs per trial are Binomial(N_b, shell / box); only their mean is needed.
    let density = cfg.noble_count() as f64 / cfg.box_cm.powi(3) * tally.trials as f64;
    let sphere = |r3: f64| 4.0 * std::f64::consts::PI / 3.0 * r3;
    let coarse_pairs = density * sphere(l.powi(3));
    let (mut c_exact, mut c_solid, mut c_step) = (0.0, 0.0, 0.0);
    for i in 0..cfg.bins {
        let (lo, hi) = (i as f64 * width, (i + 1) as f64 * width);
        let exact = bin_average(|r| kappa_exact(cfg, r), lo.max(1e-300), hi)?;
        let solid = bin_average(
            |r| kappa_solid_angle(cfg, r),
            lo.max(cfg.epsilon()),
            hi.max(cfg.epsilon()),
        )? * ((hi.powi(3) - lo.max(cfg.epsilon()).min(hi).powi(3))
            / (hi.powi(3) - lo.powi(3)));
        let step = bin_average(
            |r| kappa_heaviside(cfg, r),
            lo.max(cfg.epsilon()),
            hi.max(cfg.epsilon()),
        )? * ((hi.powi(3) - lo.max(cfg.epsilon()).min(hi).powi(3))
            / (hi.powi(3) - lo.powi(3)));
        let n = density * sphere(hi.powi(3) - lo.powi(3));
        let h = tally.hit_counts[i];
        let chi2 = |model: f64| {
            let expected = model * n;
            if expected > 0.0 {
                (h as f64 - expected).powi(2) / expected
            } else if h == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let bin = KappaBin {
            r_lo: lo,
            r_hi: hi,
            pairs: n,
            collisions: h,
            mean_kappa: h as f64 / n,
            exact,
            solid_angle: solid,
            heaviside: step,
            chi2_exact: chi2(exact),
            chi2_solid_angle: chi2(solid),
            chi2_heaviside: chi2(step),
        };
        c_exact += bin.chi2_exact;
        c_solid += bin.chi2_solid_angle;
        c_step += bin.chi2_heaviside;
        bins.push(bin);
    }
    let nominal = cfg.nominal_probability();
    // Expected multiplicities for independent pairs: Poisson with the observed mean.
    let noble_mean = tally.collisions as f64 / (cfg.noble_count() as f64 * cfg.samples as f64);
    let double = |m: f64| 1.0 - (-m).exp() * (1.0 + m);
    let collisions = tally.collisions.max(1) as f64;
    let mean_phi = tally.phi_sum / collisions;
    let var_phi = (tally.phi_sq_sum / collisions - mean_phi * mean_phi).max(0.0);
    let mut warnings = Vec::new();
    if tally.collisions < 1000 {
        warnings.push(format!(
            "only {} collisions; moments are noisy",
            tally.collisions
        ));
    }
    Ok(KappaReport {
        trials: tally.trials,
        collisions: tally.collisions,
        probability: p,
        probability_se: p_se,
        probability_nominal: nominal,
        probability_exact: exact_probability(cfg)?,
        mean_free_time_s: cfg.tau_s / p,
        mean_free_time_nominal_s: 1.0 / (cfg.n_b_per_cm3 * cfg.sigma_cm2 * cfg.v_t_cm_per_s),
        mean_relative_speed: tally.speed_sum / tally.speed_count as f64,
        max_collision_distance: tally.max_distance,
        max_reach: tally.max_reach,
        bins,
        chi2_exact: c_exact,
        chi2_solid_angle: c_solid,
        chi2_heaviside: c_step,
        kappa_sq_sum: tally.kappa_sq,
        kappa_sum: tally.collisions,
        coarse_pairs,
        coarse_mean_kappa: tally.coarse_hits as f64 / coarse_pairs,
        coarse_theory: cfg.sigma_cm2 * cfg.tau_s * cfg.v_t_cm_per_s * 3.0
            / (4.0 * std::f64::consts::PI * l.powi(3)),
        alkali_doubles: tally.alkali_doubles,
        alkali_doubles_expected: tally.trials as f64 * double(p),
        noble_doubles: tally.noble_doubles,
        noble_doubles_expected: cfg.noble_count() as f64 * cfg.samples as f64 * double(noble_mean),
        mean_phi_given_collision: mean_phi,
        mean_phi_se: (var_phi / collisions).sqrt(),
        warnings,
    })
}
