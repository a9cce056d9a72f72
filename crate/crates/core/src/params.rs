//! Physical inputs (CGS units: cm, s, G, rad) and every rate derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Raw physical inputs. Serde keys carry their units.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConfig {
    pub nuclear_spin: f64,
    #[serde(rename = "n_a_per_cm3")]
    pub n_a: f64,
    #[serde(rename = "n_b_per_cm3")]
    pub n_b: f64,
    pub p_a: f64,
    pub p_b: f64,
    #[serde(rename = "sigma_cm2")]
    pub sigma: f64,
    #[serde(rename = "v_rel_cm_per_s")]
    pub v_rel: f64,
    #[serde(rename = "phi_mean_rad")]
    pub phi_mean: f64,
    /// Second moment of the precession angle; derived from `phi_std` or `phi_mean²` when absent.
    #[serde(rename = "phi_sq_rad2")]
    pub phi_sq: Option<f64>,
    #[serde(rename = "phi_std_rad")]
    pub phi_std: Option<f64>,
    /// Bare electron gyromagnetic ratio, before division by q.
    #[serde(rename = "g_a_rad_per_s_per_gauss")]
    pub g_a: f64,
    #[serde(rename = "g_b_rad_per_s_per_gauss")]
    pub g_b: f64,
    #[serde(rename = "sigma_sr_cm2")]
    pub sigma_sr: f64,
    #[serde(rename = "sigma_sd_cm2")]
    pub sigma_sd: f64,
    #[serde(rename = "v_a_cm_per_s")]
    pub v_a: f64,
    #[serde(rename = "d_a_cm2_per_s")]
    pub d_a: f64,
    #[serde(rename = "d_b_cm2_per_s")]
    pub d_b: f64,
    #[serde(rename = "radius_cm")]
    pub radius: f64,
    #[serde(rename = "t_b_inverse_per_s")]
    pub t_b_inverse: f64,
    #[serde(rename = "b_gauss")]
    pub b_field: f64,
    /// Initial occupation of the uniform alkali mode.
    pub alkali_occupation: f64,
    #[serde(rename = "k_se_override_cm3_per_s")]
    pub k_se_override: Option<f64>,
    #[serde(rename = "zeta_override_cm3_per_s")]
    pub zeta_override: Option<f64>,
    /// Replaces the total alkali decay `γ`; `γ_a` then becomes `γ − D_a π²/R²`.
    #[serde(rename = "gamma_override_per_s")]
    pub gamma_override: Option<f64>,
}

impl PhysicalConfig {
    /// Potassium / helium-3 hybrid at roughly 220 °C.
    pub fn potassium_helium3() -> Self {
        let sigma = 8e-15;
        let phi_mean = 1.4e-5;
        let v_rel = 2e-14 / (sigma * phi_mean);
        let k_se = 5.5e-20;
        Self {
            nuclear_spin: 1.5,
            n_a: 3e14,
            n_b: 2e20,
            p_a: 0.95,
            p_b: 0.75,
            sigma,
            v_rel,
            phi_mean,
            phi_sq: Some(2e-10),
            phi_std: None,
            g_a: 1.760_859_6e7,
            g_b: 2.037_894_6e4,
            // Chosen so that k_se / (sigma_sr v) = 0.34.
            sigma_sr: k_se / (0.34 * v_rel),
            sigma_sd: 1e-18,
            v_a: 5.15e4,
            d_a: 0.11,
            d_b: 0.6,
            radius: 2.54,
            t_b_inverse: 1.0 / (100.0 * 3600.0),
            b_field: 0.0,
            alkali_occupation: 0.05,
            k_se_override: Some(k_se),
            zeta_override: None,
            gamma_override: Some(17.5),
        }
    }

    pub fn phi_second_moment(&self) -> f64 {
        match (self.phi_sq, self.phi_std) {
            (Some(sq), _) => sq,
            (None, Some(sd)) => self.phi_mean * self.phi_mean + sd * sd,
            (None, None) => self.phi_mean * self.phi_mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let twice = 2.0 * self.nuclear_spin;
        if twice < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "nuclear_spin must be a non-negative half-integer, got {}",
                self.nuclear_spin
            )));
        }
        let positive = [
            ("n_a_per_cm3", self.n_a),
            ("n_b_per_cm3", self.n_b),
            ("sigma_cm2", self.sigma),
            ("v_rel_cm_per_s", self.v_rel),
            ("phi_mean_rad", self.phi_mean),
            ("sigma_sr_cm2", self.sigma_sr),
            ("sigma_sd_cm2", self.sigma_sd),
            ("v_a_cm_per_s", self.v_a),
            ("d_a_cm2_per_s", self.d_a),
            ("d_b_cm2_per_s", self.d_b),
            ("radius_cm", self.radius),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{key} must be positive and finite, got {v}"
                )));
            }
        }
        for (key, p) in [("p_a", self.p_a), ("p_b", self.p_b)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("{key} must lie in (0, 1], got {p}")));
            }
        }
        if self.phi_mean >= 1.0 {
            return Err(Error::Config(format!(
                "phi_mean_rad must be small, got {}",
                self.phi_mean
            )));
        }
        let sq = self.phi_second_moment();
        if sq < self.phi_mean * self.phi_mean * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "phi_sq_rad2 = {sq} is below phi_mean² = {}",
                self.phi_mean * self.phi_mean
            )));
        }
        if self.t_b_inverse < 0.0 || self.alkali_occupation < 0.0 {
            return Err(Error::Config(
                "t_b_inverse_per_s and alkali_occupation must be non-negative".into(),
            ));
        }
        for (key, v) in [
            ("k_se_override_cm3_per_s", self.k_se_override),
            ("zeta_override_cm3_per_s", self.zeta_override),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return Err(Error::Config(format!(
                        "{key} must be non-negative, got {v}"
                    )));
                }
            }
        }
        if let Some(g) = self.gamma_override {
            if !(g >= 0.0) {
                return Err(Error::Config(format!(
                    "gamma_override_per_s must be >= 0, got {g}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self::potassium_helium3()
    }
}

/// Rate-level quantities shared by every model.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct DerivedRates {
    pub q: f64,
    pub zeta: f64,
    pub k_se: f64,
    pub j: f64,
    pub delta_c: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    /// `ω_a − ω_b` at the configured field.
    pub delta: f64,
    pub gamma_a: f64,
    pub gamma: f64,
    pub gamma_b: f64,
    pub gamma_ex: f64,
    /// `None` when the gyromagnetic ratios are degenerate.
    pub b_comp: Option<f64>,
    pub eta: f64,
    /// Slowed alkali gyromagnetic ratio `g_a/q`.
    pub g_a_slowed: f64,
    pub g_b: f64,
    /// Noble-gas spin-exchange lifetime `1/(n_a k_se)`.
    pub noble_exchange_lifetime: f64,
}

impl DerivedRates {
    /// Detuning `Δ(B) = (g_a/q − g_b) B + Δ_c`.
    pub fn detuning_at(&self, b: f64) -> f64 {
        (self.g_a_slowed - self.g_b) * b + self.delta_c
    }

    /// Field realising a requested detuning.
    pub fn field_for_detuning(&self, delta: f64) -> Result<f64> {
        let slope = self.g_a_slowed - self.g_b;
        if slope == 0.0 {
            return Err(Error::DegenerateGyromagnetic(self.g_b));
        }
        Ok((delta - self.delta_c) / slope)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Larmor slowing-down factor for a spin-temperature distribution.
pub fn slowing_down_factor(nuclear_spin: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("polarization must lie in (0, 1], got {p}"));
    }
    let twice = 2.0 * nuclear_spin;
    if twice < 0.0 || (twice - twice.round()).abs() > 1e-12 {
        return domain(format!(
            "nuclear spin must be a half-integer, got {nuclear_spin}"
        ));
    }
    let n = twice.round() as u32 + 1;
    if p < 1e-3 {
        return Ok(slowing_down_series(n, p));
    }
    let nf = f64::from(n);
    let plus = (1.0 + p).powi(n as i32);
    let minus = (1.0 - p).powi(n as i32);
    Ok(nf / p * (plus + minus) / (plus - minus) - 1.0 / (p * p) + 1.0)
}

/// Expansion in `x = p²` of the closed form, through `x³`.
fn slowing_down_series(n: u32, p: f64) -> f64 {
    const ORDER: usize = 5;
    let nf = f64::from(n);
    // Numerator 1 + C(n,2)x + C(n,4)x² ..., denominator 1 + C(n,3)/n x + C(n,5)/n x² ...
    let num: Vec<f64> = (0..ORDER).map(|i| binomial(n, 2 * i as u32)).collect();
    let den: Vec<f64> = (0..ORDER)
        .map(|i| binomial(n, 2 * i as u32 + 1) / nf)
        .collect();
    let mut ratio = [0.0; ORDER];
    for k in 0..ORDER {
        ratio[k] = num[k] - (1..=k).map(|j| den[j] * ratio[k - j]).sum::<f64>();
    }
    let x = p * p;
    1.0 + ratio[1..].iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn derive_rates(cfg: &PhysicalConfig) -> Result<DerivedRates> {
    cfg.validate()?;
    let q = slowing_down_factor(cfg.nuclear_spin, cfg.p_a)?;
    let zeta = cfg
        .zeta_override
        .unwrap_or(cfg.v_rel * cfg.sigma * cfg.phi_mean / q);
    let k_se = cfg
        .k_se_override
        .unwrap_or(0.25 * cfg.v_rel * cfg.sigma * cfg.phi_second_moment());
    let j = 0.5 * zeta * (q * cfg.p_a * cfg.p_b * cfg.n_a * cfg.n_b).sqrt();
    let delta_c = 0.5 * zeta * (cfg.p_a * cfg.n_a * q - cfg.p_b * cfg.n_b);
    let diffusion = cfg.d_a * std::f64::consts::PI.powi(2) / cfg.radius.powi(2);
    let (gamma_a, gamma) = match cfg.gamma_override {
        Some(g) => ((g - diffusion).max(0.0), g),
        None => {
            let ga = cfg.n_b * (cfg.sigma_sr * cfg.v_rel + k_se)
                + cfg.n_a * cfg.sigma_sd * cfg.v_a / 2.0;
            (ga, ga + diffusion)
        }
    };
    let g_a_slowed = cfg.g_a / q;
    let omega_a = g_a_slowed * cfg.b_field - 0.5 * zeta * cfg.p_b * cfg.n_b;
    let omega_b = cfg.g_b * cfg.b_field - 0.5 * zeta * q * cfg.p_a * cfg.n_a;
    let mut rates = DerivedRates {
        q,
        zeta,
        k_se,
        j,
        delta_c,
        omega_a,
        omega_b,
        delta: omega_a - omega_b,
        gamma_a,
        gamma,
        gamma_b: k_se * cfg.n_a + cfg.t_b_inverse,
        gamma_ex: cfg.n_b * k_se / q,
        b_comp: None,
        eta: k_se / (cfg.sigma_sr * cfg.v_rel),
        g_a_slowed,
        g_b: cfg.g_b,
        noble_exchange_lifetime: 1.0 / (cfg.n_a * k_se),
    };
    rates.b_comp = compensation_field(&rates, cfg).ok();
    Ok(rates)
}

/// Field at which `Δ(B) = 0`.
pub fn compensation_field(rates: &DerivedRates, cfg: &PhysicalConfig) -> Result<f64> {
    let slope = cfg.g_a / rates.q - cfg.g_b;
    if slope == 0.0 {
        return Err(Error::DegenerateGyromagnetic(cfg.g_b));
    }
    Ok(-rates.delta_c / slope)
}

/// Mean number of incoherent excitations `(1−p)/(2p)`.
pub fn incoherent_occupation(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("polarization must lie in (0, 1], got {p}"));
    }
    Ok((1.0 - p) / (2.0 * p))
}

/// Probability of a collective excitation in an otherwise unexcited ensemble.
pub fn vacuum_background_probability(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("polarization must lie in (0, 1], got {p}"));
    }
    Ok(2.0 * p * (1.0 - p) / (1.0 + p).powi(2))
}

/// Reduced Planck constant in erg s.
pub const HBAR_CGS: f64 = 1.054_571_817e-27;
/// Bohr magneton in erg/G.
pub const BOHR_MAGNETON_CGS: f64 = 9.274_010_078_3e-21;
/// Nuclear magneton in erg/G.
pub const NUCLEAR_MAGNETON_CGS: f64 = 5.050_783_746_1e-24;

/// `ζ` from the Fermi-contact enhancement factor `κ₀` (all CGS).
pub fn zeta_from_enhancement(
    kappa_0: f64,
    g_e: f64,
    g_n: f64,
    mu_b: f64,
    mu_n: f64,
    q: f64,
) -> f64 {
    8.0 * std::f64::consts::PI * kappa_0 * g_e * g_n * mu_b * mu_n / (3.0 * q * HBAR_CGS)
}

/// One piece of a piecewise-constant field schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSegment {
    pub t_start: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSchedule {
    segments: Vec<FieldSegment>,
}

impl FieldSchedule {
    pub fn new(segments: Vec<FieldSegment>) -> Result<Self> {
        match segments.first() {
            None => return Err(Error::Config("field schedule is empty".into())),
            Some(s) if s.t_start != 0.0 => {
                return Err(Error::Config(format!(
                    "first schedule segment must start at 0, got {}",
                    s.t_start
                )))
            }
            _ => {}
        }
        if segments.windows(2).any(|w| w[1].t_start <= w[0].t_start) {
            return Err(Error::Config(
                "schedule start times must strictly increase".into(),
            ));
        }
        if segments.iter().any(|s| !s.b.is_finite()) {
            return Err(Error::Config("schedule field must be finite".into()));
        }
        Ok(Self { segments })
    }

    pub fn constant(b: f64) -> Self {
        Self {
            segments: vec![FieldSegment { t_start: 0.0, b }],
        }
    }

    pub fn segments(&self) -> &[FieldSegment] {
        &self.segments
    }

    pub fn field_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .rev()
            .find(|s| s.t_start <= t)
            .unwrap_or(&self.segments[0])
            .b
    }

    /// Splits `[0, t_end]` into `(start, end, field)` intervals of constant field.
    pub fn intervals(&self, t_end: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.t_start >= t_end {
                break;
            }
            let end = self
                .segments
                .get(i + 1)
                .map_or(t_end, |next| next.t_start.min(t_end));
            out.push((seg.t_start, end, seg.b));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slowing_down_reference_values() {
        assert!((slowing_down_factor(1.5, 0.95).unwrap() - 4.1025).abs() < 1e-3);
        assert!((slowing_down_factor(1.5, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((slowing_down_factor(0.5, 0.3).unwrap() - 2.0).abs() < 1e-12);
        assert!(slowing_down_factor(1.5, 0.0).is_err());
        assert!(slowing_down_factor(1.5, 1.1).is_err());
        assert!(slowing_down_factor(1.25, 0.5).is_err());
    }

    #[test]
    fn slowing_down_series_matches_closed_form_at_switch() {
        for spin in [0.5, 1.5, 2.5, 3.5] {
            let n = (2.0 * spin) as u32 + 1;
            let p: f64 = 1e-3;
            let nf = f64::from(n);
            let plus = (1.0 + p).powi(n as i32);
            let minus = (1.0 - p).powi(n as i32);
            let direct = nf / p * (plus + minus) / (plus - minus) - 1.0 / (p * p) + 1.0;
            assert!(
                (slowing_down_series(n, p) - direct).abs() < 1e-7,
                "I = {spin}"
            );
        }
    }

    #[test]
    fn low_polarization_limit_follows_closed_form() {
        // The closed form tends to 1 + 4I(I+1)/3 as p -> 0.
        for spin in [0.5f64, 1.5, 2.5, 3.5] {
            let q = slowing_down_factor(spin, 1e-6).unwrap();
            assert!((q - (1.0 + 4.0 * spin * (spin + 1.0) / 3.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn k_he_rates() {
        let cfg = PhysicalConfig::default();
        let r = derive_rates(&cfg).unwrap();
        assert!((r.q - 4.1025).abs() < 1e-3);
        assert!((r.j - 1000.0).abs() < 50.0, "J = {}", r.j);
        assert!((r.zeta - 4.9e-15).abs() < 0.1e-15);
        assert!((r.noble_exchange_lifetime / 3600.0 - 17.0).abs() < 0.5);
        assert!((r.eta - 0.34).abs() < 1e-12);
        let b = r.b_comp.unwrap();
        assert!(b > 0.047 && b < 0.188, "B_comp = {b}");
        assert!(r.detuning_at(b).abs() < 1e-9 * r.delta_c.abs());
    }

    #[test]
    fn unit_polarization_limits() {
        let cfg = PhysicalConfig {
            nuclear_spin: 0.0,
            p_a: 1.0,
            p_b: 1.0,
            n_b: 3e14,
            zeta_override: Some(1e-15),
            ..PhysicalConfig::default()
        };
        let r = derive_rates(&cfg).unwrap();
        assert_eq!(r.q, 1.0);
        assert!((r.j - 0.5 * 1e-15 * 3e14).abs() < 1e-12 * r.j);
        let bad = PhysicalConfig {
            p_a: 0.0,
            ..PhysicalConfig::default()
        };
        assert!(derive_rates(&bad).is_err());
    }

    #[test]
    fn compensation_examples() {
        let cfg = PhysicalConfig {
            nuclear_spin: 0.0,
            g_a: 30.0,
            g_b: 20.0,
            ..PhysicalConfig::default()
        };
        let mut r = derive_rates(&cfg).unwrap();
        r.delta_c = -10.0;
        assert!((compensation_field(&r, &cfg).unwrap() - 1.0).abs() < 1e-15);
        r.delta_c = 0.0;
        assert_eq!(compensation_field(&r, &cfg).unwrap(), 0.0);
        let degenerate = PhysicalConfig { g_a: 20.0, ..cfg };
        assert!(matches!(
            compensation_field(&r, &degenerate),
            Err(Error::DegenerateGyromagnetic(_))
        ));
    }

    #[test]
    fn occupations() {
        assert_eq!(incoherent_occupation(1.0).unwrap(), 0.0);
        assert!((incoherent_occupation(0.75).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(incoherent_occupation(0.5).unwrap(), 0.5);
        assert!(incoherent_occupation(0.0).is_err());
        assert_eq!(vacuum_background_probability(1.0).unwrap(), 0.0);
        // 2·0.95·0.05/1.95² and 2·0.75·0.25/1.75²
        assert!((vacuum_background_probability(0.95).unwrap() - 0.024_983_563_445).abs() < 1e-9);
        assert!((vacuum_background_probability(0.75).unwrap() - 0.122_448_979_592).abs() < 1e-9);
        assert!(vacuum_background_probability(1.5).is_err());
    }

    #[test]
    fn zeta_from_constants() {
        let unit = 3.0 * HBAR_CGS / (8.0 * std::f64::consts::PI);
        assert!((zeta_from_enhancement(unit, 1.0, 1.0, 1.0, 1.0, 1.0) - 1.0).abs() < 1e-12);
        // Helium-3: g_n = |μ|/(I μ_N) with μ = 2.1275 μ_N; K-He κ₀ ≈ 6.
        let q = slowing_down_factor(1.5, 0.95).unwrap();
        let z = zeta_from_enhancement(6.0, 2.0, 4.255, BOHR_MAGNETON_CGS, NUCLEAR_MAGNETON_CGS, q);
        assert!((z / 4.9e-15 - 1.0).abs() < 0.1, "zeta = {z}");
        let z2 =
            zeta_from_enhancement(12.0, 2.0, 4.255, BOHR_MAGNETON_CGS, NUCLEAR_MAGNETON_CGS, q);
        assert!((z2 / z - 2.0).abs() < 1e-14);
    }

    #[test]
    fn schedule_validation_and_lookup() {
        assert!(FieldSchedule::new(vec![]).is_err());
        assert!(FieldSchedule::new(vec![FieldSegment {
            t_start: 1.0,
            b: 0.0
        }])
        .is_err());
        let s = FieldSchedule::new(vec![
            FieldSegment {
                t_start: 0.0,
                b: 1.0,
            },
            FieldSegment {
                t_start: 2.0,
                b: 3.0,
            },
        ])
        .unwrap();
        assert_eq!(s.field_at(1.999), 1.0);
        assert_eq!(s.field_at(2.0), 3.0);
        assert_eq!(s.intervals(5.0), vec![(0.0, 2.0, 1.0), (2.0, 5.0, 3.0)]);
        assert_eq!(s.intervals(1.0), vec![(0.0, 1.0, 1.0)]);
    }
}
