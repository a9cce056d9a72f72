//! Scenario files: sectioned TOML whose keys carry their units, with dotted
//! `section.key=value` overrides applied before validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffmodes::AlkaliBoundary;
use crate::error::{Error, Result};
use crate::kinetics::KineticsConfig;
use crate::manybody::{InitialExcitation, ManyBodyConfig};
use crate::params::{
    derive_rates, incoherent_occupation, DerivedRates, FieldSchedule, FieldSegment, PhysicalConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Rates,
    Meanfield,
    Twomode,
    Multimode,
    ManybodySingle,
    ManybodyDouble,
    Kinetics,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rates => "rates",
            Self::Meanfield => "meanfield",
            Self::Twomode => "twomode",
            Self::Multimode => "multimode",
            Self::ManybodySingle => "manybody-single",
            Self::ManybodyDouble => "manybody-double",
            Self::Kinetics => "kinetics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationModel {
    #[default]
    Gaussian,
    Fock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Record interval; `t_end / records` when absent.
    pub dt_s: Option<f64>,
    pub records: usize,
    pub t_end_s: Option<f64>,
    /// End time in units of the swap time `π/(2J)`.
    pub t_end_swaps: Option<f64>,
    pub model: PropagationModel,
    pub n_max: usize,
    pub n_alkali_modes: usize,
    pub n_noble_modes: usize,
    /// Stable modes kept per species when eliminating the rest.
    pub reservoir_split: Option<usize>,
    pub reservoir_tail: Option<usize>,
    pub alkali_boundary: AlkaliBoundary,
    /// Mean-field trajectory length cap.
    pub max_samples: usize,
    pub seed: u64,
    pub seeds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_s: None,
            records: 400,
            t_end_s: None,
            t_end_swaps: None,
            model: PropagationModel::Gaussian,
            n_max: 6,
            n_alkali_modes: 100,
            n_noble_modes: 100,
            reservoir_split: None,
            reservoir_tail: None,
            alkali_boundary: AlkaliBoundary::Dirichlet,
            max_samples: 4000,
            seed: 1,
            seeds: 1,
        }
    }
}

impl SolverConfig {
    /// `(t_end, dt)` given the coupling that sets the swap time.
    pub fn time_grid(&self, j: f64) -> Result<(f64, f64)> {
        let t_end = match (self.t_end_s, self.t_end_swaps) {
            (Some(t), None) => t,
            (None, Some(n)) => n * swap_time(j)?,
            (None, None) => 2.0 * swap_time(j)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "solver: set only one of t_end_s and t_end_swaps".into(),
                ))
            }
        };
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!(
                "solver: end time must be positive, got {t_end}"
            )));
        }
        let dt = match self.dt_s {
            Some(dt) => dt,
            None if self.records > 0 => t_end / self.records as f64,
            None => return Err(Error::Config("solver.records must be positive".into())),
        };
        if !(dt > 0.0) {
            return Err(Error::Config(format!(
                "solver.dt_s must be positive, got {dt}"
            )));
        }
        Ok((t_end, dt))
    }
}

pub fn swap_time(j: f64) -> Result<f64> {
    if !(j > 0.0) {
        return Err(Error::Config(format!("swap time needs J > 0, got {j}")));
    }
    Ok(std::f64::consts::PI / (2.0 * j))
}

/// One schedule segment. The start is given in seconds or swap times, the level
/// as a field or as a detuning (absolute, or relative to `J`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentSpec {
    pub t_start_s: Option<f64>,
    pub t_start_swaps: Option<f64>,
    pub b_gauss: Option<f64>,
    pub delta_per_s: Option<f64>,
    pub delta_over_j: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Empty means a constant field at `physical.b_gauss`.
    pub segments: Vec<SegmentSpec>,
}

impl ScheduleConfig {
    pub fn resolve(&self, rates: &DerivedRates, j: f64, b_default: f64) -> Result<FieldSchedule> {
        if self.segments.is_empty() {
            return Ok(FieldSchedule::constant(b_default));
        }
        let segments = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let key = |k: &str| format!("schedule.segments[{i}].{k}");
                let t_start = match (s.t_start_s, s.t_start_swaps) {
                    (Some(t), None) => t,
                    (None, Some(n)) => n * swap_time(j)?,
                    (None, None) if i == 0 => 0.0,
                    _ => {
                        return Err(Error::Config(format!(
                            "{}: give exactly one of t_start_s, t_start_swaps",
                            key("t_start")
                        )))
                    }
                };
                let b = match (s.b_gauss, s.delta_per_s, s.delta_over_j) {
                    (Some(b), None, None) => b,
                    (None, Some(d), None) => rates.field_for_detuning(d)?,
                    (None, None, Some(r)) => rates.field_for_detuning(r * j)?,
                    _ => {
                        return Err(Error::Config(format!(
                            "{}: give exactly one of b_gauss, delta_per_s, delta_over_j",
                            key("level")
                        )))
                    }
                };
                Ok(FieldSegment { t_start, b })
            })
            .collect::<Result<Vec<_>>>()?;
        FieldSchedule::new(segments)
    }
}

/// Initial state of one bosonic mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeInit {
    Vacuum,
    /// The species' configured incoherent occupation.
    Incoherent,
    Thermal {
        occupation: f64,
    },
    Coherent {
        excitations: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    Fock {
        n: usize,
    },
    Squeezed {
        db: f64,
        #[serde(default)]
        occupation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub alkali: ModeInit,
    pub noble: ModeInit,
    /// Many-body single-excitation initial state.
    pub excitation: InitialExcitation,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            alkali: ModeInit::Coherent {
                excitations: 1000.0,
                phase_rad: 0.0,
            },
            noble: ModeInit::Vacuum,
            excitation: InitialExcitation::Symmetric,
        }
    }
}

/// Replaces derived two-mode rates, for regime studies at fixed ratios.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoModeOverrides {
    pub j_per_s: Option<f64>,
    pub gamma_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Option<ScenarioKind>,
    /// Free text: parameter provenance.
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub physical: PhysicalConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub twomode: TwoModeOverrides,
    #[serde(default)]
    pub manybody: ManyBodyConfig,
    #[serde(default)]
    pub kinetics: KineticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let scenario: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        self.manybody.validate()?;
        self.kinetics.validate()?;
        for (key, v) in [
            ("twomode.j_per_s", self.twomode.j_per_s),
            ("twomode.gamma_per_s", self.twomode.gamma_per_s),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!(
                        "{key} must be finite and >= 0, got {v}"
                    )));
                }
            }
        }
        if self.solver.seeds == 0 {
            return Err(Error::Config("solver.seeds must be positive".into()));
        }
        if self.solver.n_alkali_modes == 0 || self.solver.n_noble_modes == 0 {
            return Err(Error::Config(
                "solver.n_alkali_modes and n_noble_modes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn rates(&self) -> Result<DerivedRates> {
        derive_rates(&self.physical)
    }

    /// Derived rates with the two-mode overrides applied.
    pub fn two_mode_rates(&self) -> Result<DerivedRates> {
        let mut rates = self.rates()?;
        if let Some(j) = self.twomode.j_per_s {
            rates.j = j;
        }
        if let Some(g) = self.twomode.gamma_per_s {
            rates.gamma = g;
        }
        Ok(rates)
    }

    /// Occupation used by [`ModeInit::Incoherent`] for the alkali (`true`) or noble mode.
    pub fn incoherent_occupation(&self, alkali: bool) -> Result<f64> {
        if alkali {
            Ok(self.physical.alkali_occupation)
        } else {
            incoherent_occupation(self.physical.p_b)
        }
    }
}

/// Sets `a.b.c = value` in a TOML table; the value is parsed as TOML and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override key `{path}` is malformed")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut node = table;
    for k in parents {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{path}`: `{k}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let s = Scenario::from_toml("", &[]).unwrap();
        assert_eq!(s.physical, PhysicalConfig::default());
        assert_eq!(s.kind, None);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_section() {
        let err = Scenario::from_toml("[physical]\nn_a = 1e14\n", &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("n_a"), "{err}");
        assert!(Scenario::from_toml("[solver]\nbogus = 1\n", &[]).is_err());
        assert!(
            Scenario::from_toml("[initial.alkali]\nkind = \"fock\"\nn = 2\nextra = 1\n", &[])
                .is_err()
        );
    }

    #[test]
    fn overrides_create_and_replace_keys() {
        let s = Scenario::from_toml(
            "kind = \"twomode\"\n[physical]\np_a = 0.9\n",
            &[
                "physical.p_a=0.5".into(),
                "solver.seeds=3".into(),
                "initial.alkali.kind=vacuum".into(),
            ],
        )
        .unwrap();
        assert_eq!(s.physical.p_a, 0.5);
        assert_eq!(s.solver.seeds, 3);
        assert_eq!(s.initial.alkali, ModeInit::Vacuum);
        assert!(Scenario::from_toml("", &["physical".into()]).is_err());
        assert!(Scenario::from_toml("", &["physical.p_a.x=1".into()]).is_err());
    }

    #[test]
    fn schedule_resolution() {
        let s = Scenario::from_toml(
            "[[schedule.segments]]\ndelta_per_s = 0.0\n[[schedule.segments]]\nt_start_swaps = 1.0\ndelta_over_j = 100.0\n",
            &[],
        )
        .unwrap();
        let rates = s.rates().unwrap();
        let sched = s.schedule.resolve(&rates, rates.j, 0.0).unwrap();
        let seg = sched.segments();
        assert!(rates.detuning_at(seg[0].b).abs() < 1e-6 * rates.j);
        assert!((rates.detuning_at(seg[1].b) / rates.j - 100.0).abs() < 1e-9);
        assert!((seg[1].t_start - swap_time(rates.j).unwrap()).abs() < 1e-15);
        let bad = Scenario::from_toml(
            "[[schedule.segments]]\nb_gauss = 0.0\ndelta_per_s = 1.0\n",
            &[],
        )
        .unwrap();
        assert!(bad.schedule.resolve(&rates, rates.j, 0.0).is_err());
    }
}
