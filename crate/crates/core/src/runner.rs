//! Scenario execution: each kind produces tables plus a JSON summary that
//! always embeds the derived rates of the physical section.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::diffmodes::{
    build_eliminated_system, build_mode_basis, build_multimode_system, eliminate_reservoir,
    initial_multimode_state,
};
use crate::error::{Error, Result};
use crate::kinetics::estimate_kappa_moments;
use crate::manybody::{
    fit_two_mode_decay, mean_trajectory, single_excitation_runs, two_excitation_runs,
    InitialExcitation,
};
use crate::meanfield::{self, BlochModel};
use crate::output::{write_csv, write_json, Cell, Table};
use crate::quantum2mode::fock::{coherent_ket, pure_mode, thermal_mode};
use crate::quantum2mode::{
    build_two_mode, propagate_fock, propagate_gaussian, squeezing_db, FockDensityState,
    GaussianModeState, Quadrature,
};
use crate::scenario::{swap_time, ModeInit, PropagationModel, Scenario, ScenarioKind};

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub kind: ScenarioKind,
    /// `(file name, table)` pairs.
    pub tables: Vec<(String, Table)>,
    pub summary: Value,
    /// Extra JSON artifacts.
    pub documents: Vec<(String, Value)>,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for (name, table) in &self.tables {
            files.push(write_csv(dir, name, table)?);
        }
        for (name, doc) in &self.documents {
            files.push(write_json(dir, name, doc)?);
        }
        files.push(write_json(dir, "summary.json", &self.summary)?);
        Ok(files)
    }
}

pub fn execute(kind: ScenarioKind, scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    if let Some(declared) = scenario.kind {
        if declared != kind {
            return Err(Error::Config(format!(
                "scenario declares kind `{}` but `{}` was requested",
                declared.name(),
                kind.name()
            )));
        }
    }
    let seed = opts.seed.unwrap_or(scenario.solver.seed);
    let seeds = opts.seeds.unwrap_or(scenario.solver.seeds);
    if seeds == 0 {
        return Err(Error::Config("--seeds must be positive".into()));
    }
    let rates = scenario.rates()?;
    let mut out = match kind {
        ScenarioKind::Rates => RunOutput {
            kind,
            tables: vec![],
            summary: json!({}),
            documents: vec![],
        },
        ScenarioKind::Meanfield => run_meanfield(scenario)?,
        ScenarioKind::Twomode => run_twomode(scenario)?,
        ScenarioKind::Multimode => run_multimode(scenario)?,
        ScenarioKind::ManybodySingle => run_manybody_single(scenario, seed, seeds)?,
        ScenarioKind::ManybodyDouble => run_manybody_double(scenario, seed, seeds)?,
        ScenarioKind::Kinetics => run_kinetics(scenario, seed)?,
    };
    out.kind = kind;
    let mut summary = json!({
        "kind": kind.name(),
        "description": scenario.description,
        "seed": seed,
        "seeds": seeds,
        "rates": rates,
    });
    if let Value::Object(r) = &mut summary["rates"] {
        r.insert("j_over_gamma".into(), json!(rates.j / rates.gamma));
        r.insert(
            "noble_exchange_lifetime_h".into(),
            json!(rates.noble_exchange_lifetime / 3600.0),
        );
    }
    if let (Value::Object(base), Value::Object(extra)) = (&mut summary, out.summary.take()) {
        base.extend(extra);
    }
    out.summary = summary;
    Ok(out)
}

/// Runs and writes artifacts to `--out`, else the scenario's output directory.
pub fn run(
    kind: ScenarioKind,
    scenario: &Scenario,
    opts: &RunOptions,
) -> Result<(RunOutput, Vec<PathBuf>)> {
    let out = execute(kind, scenario, opts)?;
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| scenario.output.dir.clone());
    let files = out.write(&dir)?;
    Ok((out, files))
}

fn coherent_excitations(init: ModeInit, key: &str) -> Result<f64> {
    match init {
        ModeInit::Vacuum => Ok(0.0),
        ModeInit::Coherent { excitations, .. } => Ok(excitations),
        other => Err(Error::Config(format!(
            "{key}: mean-field runs need vacuum or coherent, got {other:?}"
        ))),
    }
}

fn run_meanfield(s: &Scenario) -> Result<RunOutput> {
    let rates = s.rates()?;
    let model = BlochModel::new(&s.physical, &rates);
    let initial = model.tilted_state(
        coherent_excitations(s.initial.alkali, "initial.alkali")?,
        coherent_excitations(s.initial.noble, "initial.noble")?,
    );
    let schedule = s.schedule.resolve(&rates, rates.j, s.physical.b_field)?;
    let (t_end, dt) = s.solver.time_grid(rates.j)?;
    let traj = meanfield::integrate(&initial, &model, &schedule, t_end, dt, s.solver.max_samples)?;
    let mut table = Table::new([
        "t_s",
        "f_x",
        "f_y",
        "f_z",
        "k_x",
        "k_y",
        "k_z",
        "f_perp_sq",
        "k_perp_sq",
        "excitations_a",
        "excitations_b",
    ]);
    let (mut peak, mut t_peak) = (0.0, 0.0);
    for st in &traj {
        let ex_b = model.excitations_b(st);
        if ex_b > peak {
            peak = ex_b;
            t_peak = st.t;
        }
        let perp = |v: &nalgebra::Vector3<f64>| v.x * v.x + v.y * v.y;
        table.push(
            [
                st.t,
                st.f.x,
                st.f.y,
                st.f.z,
                st.k.x,
                st.k.y,
                st.k.z,
                perp(&st.f),
                perp(&st.k),
                model.excitations_a(st),
                ex_b,
            ]
            .map(Cell::from)
            .to_vec(),
        );
    }
    let last = traj.last().expect("trajectory holds the initial state");
    Ok(RunOutput {
        kind: ScenarioKind::Meanfield,
        tables: vec![("meanfield.csv".into(), table)],
        summary: json!({
            "t_end_s": t_end,
            "max_excitations_b": peak,
            "t_max_excitations_b_s": t_peak,
            "final_excitations_a": model.excitations_a(last),
            "final_excitations_b": model.excitations_b(last),
        }),
        documents: vec![],
    })
}

/// Covariance block and mean amplitude of a Gaussian single-mode input.
fn gaussian_mode(init: ModeInit, incoherent: f64, key: &str) -> Result<([f64; 4], Complex64)> {
    let thermal = |n: f64| [n + 0.5, 0.0, 0.0, n + 0.5];
    Ok(match init {
        ModeInit::Vacuum => (thermal(0.0), Complex64::new(0.0, 0.0)),
        ModeInit::Incoherent => (thermal(incoherent), Complex64::new(0.0, 0.0)),
        ModeInit::Thermal { occupation } => (thermal(occupation), Complex64::new(0.0, 0.0)),
        ModeInit::Coherent {
            excitations,
            phase_rad,
        } => (
            thermal(0.0),
            Complex64::from_polar(excitations.sqrt(), phase_rad),
        ),
        ModeInit::Squeezed { db, occupation } => (
            GaussianModeState::squeezed_block(db, occupation),
            Complex64::new(0.0, 0.0),
        ),
        ModeInit::Fock { .. } => {
            return Err(Error::Config(format!(
                "{key}: Fock inputs need solver.model = \"fock\""
            )))
        }
    })
}

fn fock_mode(
    init: ModeInit,
    n_max: usize,
    incoherent: f64,
    key: &str,
) -> Result<DMatrix<Complex64>> {
    let basis = |n: usize| {
        let mut ket = vec![Complex64::new(0.0, 0.0); n_max + 1];
        ket[n] = Complex64::new(1.0, 0.0);
        pure_mode(&ket)
    };
    Ok(match init {
        ModeInit::Vacuum => basis(0),
        ModeInit::Incoherent => thermal_mode(n_max, incoherent),
        ModeInit::Thermal { occupation } => thermal_mode(n_max, occupation),
        ModeInit::Coherent {
            excitations,
            phase_rad,
        } => pure_mode(&coherent_ket(
            n_max,
            Complex64::from_polar(excitations.sqrt(), phase_rad),
        )),
        ModeInit::Fock { n } if n <= n_max => basis(n),
        ModeInit::Fock { n } => {
            return Err(Error::Config(format!(
                "{key}: Fock level {n} exceeds solver.n_max = {n_max}"
            )))
        }
        ModeInit::Squeezed { .. } => {
            return Err(Error::Config(format!(
                "{key}: squeezed inputs need solver.model = \"gaussian\""
            )))
        }
    })
}

fn gaussian_columns() -> Vec<&'static str> {
    vec![
        "t_s",
        "population_a",
        "population_b",
        "var_x_a",
        "var_p_a",
        "var_x_b",
        "var_p_b",
        "squeezing_x_a_db",
        "squeezing_p_b_db",
        "squeezing_min_a_db",
        "squeezing_min_b_db",
    ]
}

/// Row of [`gaussian_columns`] for single-mode states `a` and `b`.
fn gaussian_row(t: f64, a: &GaussianModeState, b: &GaussianModeState) -> Vec<Cell> {
    vec![
        t,
        a.population(0),
        b.population(0),
        a.variance(0, Quadrature::X),
        a.variance(0, Quadrature::P),
        b.variance(0, Quadrature::X),
        b.variance(0, Quadrature::P),
        squeezing_db(a, 0, Quadrature::X),
        squeezing_db(b, 0, Quadrature::P),
        squeezing_db(a, 0, Quadrature::Min),
        squeezing_db(b, 0, Quadrature::Min),
    ]
    .into_iter()
    .map(Cell::from)
    .collect()
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    w[i] = 1.0;
    w
}

/// Peak of a column and the time it occurs.
fn column_peak(table: &Table, column: &str) -> (f64, f64) {
    let t = table.column("t_s").unwrap_or_default();
    let y = table.column(column).unwrap_or_default();
    y.iter()
        .zip(&t)
        .fold((f64::NEG_INFINITY, 0.0), |acc, (&v, &ti)| {
            if v > acc.0 {
                (v, ti)
            } else {
                acc
            }
        })
}

fn run_twomode(s: &Scenario) -> Result<RunOutput> {
    let base = s.rates()?;
    let rates = s.two_mode_rates()?;
    let (p_a, p_b) = (s.physical.p_a, s.physical.p_b);
    let dd = build_two_mode(&rates, p_a, p_b);
    let schedule = s.schedule.resolve(&base, rates.j, s.physical.b_field)?;
    let (t_end, dt) = s.solver.time_grid(rates.j)?;
    let occ_a = s.incoherent_occupation(true)?;
    let occ_b = s.incoherent_occupation(false)?;
    let common = json!({
        "j_per_s": rates.j,
        "gamma_per_s": rates.gamma,
        "swap_time_s": swap_time(rates.j)?,
        "t_end_s": t_end,
    });
    let (table, mut extra) = match s.solver.model {
        PropagationModel::Gaussian => {
            let mut state = GaussianModeState::vacuum(2);
            let (ba, ma) = gaussian_mode(s.initial.alkali, occ_a, "initial.alkali")?;
            let (bb, mb) = gaussian_mode(s.initial.noble, occ_b, "initial.noble")?;
            state.set_block(0, &ba);
            state.set_block(1, &bb);
            state.means = vec![ma, mb];
            let traj = propagate_gaussian(&state, &dd, &schedule, t_end, dt)?;
            let mut table = Table::new(gaussian_columns());
            for st in &traj {
                table.push(gaussian_row(
                    st.t,
                    &st.project(&unit(2, 0)),
                    &st.project(&unit(2, 1)),
                ));
            }
            let last = traj.last().expect("non-empty");
            let b = last.project(&unit(2, 1));
            let extra = json!({
                "model": "gaussian",
                "final_population_a": last.population(0),
                "final_population_b": last.population(1),
                "final_squeezing_p_b_db": squeezing_db(&b, 0, Quadrature::P),
                "final_squeezing_min_b_db": squeezing_db(&b, 0, Quadrature::Min),
            });
            (table, extra)
        }
        PropagationModel::Fock => {
            let n_max = s.solver.n_max;
            let rho_a = fock_mode(s.initial.alkali, n_max, occ_a, "initial.alkali")?;
            let rho_b = fock_mode(s.initial.noble, n_max, occ_b, "initial.noble")?;
            let run = propagate_fock(
                &FockDensityState::product(&rho_a, &rho_b)?,
                &dd,
                &schedule,
                t_end,
                dt,
            )?;
            let mut header = vec![
                "t_s".to_string(),
                "population_a".into(),
                "population_b".into(),
            ];
            header.extend(["trace".into(), "purity".into()]);
            header.extend((0..=n_max).map(|k| format!("p_b_{k}")));
            let mut table = Table::new(header);
            for o in &run.samples {
                let mut row: Vec<Cell> = [o.t, o.population_a, o.population_b, o.trace, o.purity]
                    .map(Cell::from)
                    .to_vec();
                row.extend(o.probs_b.iter().map(|&p| Cell::from(p)));
                table.push(row);
            }
            let last = run.samples.last().expect("non-empty");
            let extra = json!({
                "model": "fock",
                "n_max": n_max,
                "final_population_a": last.population_a,
                "final_population_b": last.population_b,
                "final_probs_b": last.probs_b,
                "warnings": run.warnings,
            });
            (table, extra)
        }
    };
    let (peak, t_peak) = column_peak(&table, "population_b");
    if let (Value::Object(m), Value::Object(c)) = (&mut extra, common) {
        m.extend(c);
        m.insert("max_population_b".into(), json!(peak));
        m.insert("t_max_population_b_s".into(), json!(t_peak));
    }
    Ok(RunOutput {
        kind: ScenarioKind::Twomode,
        tables: vec![("twomode.csv".into(), table)],
        summary: extra,
        documents: vec![],
    })
}

fn run_multimode(s: &Scenario) -> Result<RunOutput> {
    let rates = s.rates()?;
    let (p_a, p_b) = (s.physical.p_a, s.physical.p_b);
    let solver = &s.solver;
    if s.initial.noble != ModeInit::Incoherent {
        return Err(Error::Config(
            "initial.noble: multimode runs start the noble modes incoherent".into(),
        ));
    }
    let basis = build_mode_basis(
        s.physical.radius,
        s.physical.d_a,
        s.physical.d_b,
        rates.gamma_a,
        rates.gamma_b,
        solver.n_alkali_modes,
        solver.n_noble_modes,
        solver.alkali_boundary,
    )?;
    let schedule = s.schedule.resolve(&rates, rates.j, s.physical.b_field)?;
    let (t_end, dt) = solver.time_grid(rates.j)?;
    let mut reservoir = Value::Null;
    let (working, dd) = match solver.reservoir_split {
        None => (
            basis.clone(),
            build_multimode_system(&basis, &rates, p_a, p_b),
        ),
        Some(split) => {
            let tail = solver
                .reservoir_tail
                .unwrap_or(basis.n_alkali().min(basis.n_noble()));
            let delta = rates.detuning_at(schedule.field_at(0.0));
            let corr = eliminate_reservoir(&basis, &rates, delta, p_a, p_b, split, tail)?;
            reservoir = json!({
                "split": corr.split,
                "tail": corr.tail,
                "max_eps_a": corr.max_eps_a(),
                "max_eps_b": corr.max_eps_b(),
                "bound_a": corr.bound_a,
                "bound_b": corr.bound_b,
                "warnings": corr.warnings,
            });
            let dd = build_eliminated_system(&basis, &rates, p_a, p_b, &corr);
            (basis.truncated(split, split), dd)
        }
    };
    let (na, nb) = (working.n_alkali(), working.n_noble());
    let (block, mean) = gaussian_mode(
        s.initial.alkali,
        s.incoherent_occupation(true)?,
        "initial.alkali",
    )?;
    let mut state = initial_multimode_state(&working, p_a, p_b, &block)?;
    let u = working.uniform_alkali_profile();
    for (m, &w) in u.iter().enumerate() {
        state.means[m] = mean * w;
    }
    let mut alkali_weights = u.clone();
    alkali_weights.resize(na + nb, 0.0);
    let noble_weights = unit(na + nb, na);
    let traj = propagate_gaussian(&state, &dd, &schedule, t_end, dt)?;

    // Perfectly polarized two-mode reference on the same time grid.
    let mut reference = GaussianModeState::vacuum(2);
    reference.set_block(0, &block);
    reference.means[0] = mean;
    let reference = propagate_gaussian(
        &reference,
        &build_two_mode(&rates, 1.0, 1.0),
        &schedule,
        t_end,
        dt,
    )?;

    let mut header = gaussian_columns();
    header.extend(["reference_population_b", "reference_squeezing_p_b_db"]);
    let mut table = Table::new(header);
    for (st, r) in traj.iter().zip(&reference) {
        let mut row = gaussian_row(
            st.t,
            &st.project(&alkali_weights),
            &st.project(&noble_weights),
        );
        let rb = r.project(&unit(2, 1));
        row.push(Cell::from(rb.population(0)));
        row.push(Cell::from(squeezing_db(&rb, 0, Quadrature::P)));
        table.push(row);
    }
    let (peak, t_peak) = column_peak(&table, "population_b");
    let swap = swap_time(rates.j)?;
    let nearest = traj
        .iter()
        .min_by(|a, b| (a.t - swap).abs().total_cmp(&(b.t - swap).abs()))
        .expect("non-empty");
    let b_swap = nearest.project(&noble_weights);
    let rows = (basis.n_alkali() / 2).max(1);
    Ok(RunOutput {
        kind: ScenarioKind::Multimode,
        tables: vec![("multimode.csv".into(), table)],
        summary: json!({
            "n_alkali_modes": basis.n_alkali(),
            "n_noble_modes": basis.n_noble(),
            "isometry_rows": rows,
            "isometry_residual": basis.isometry_residual(rows),
            "swap_time_s": swap,
            "t_end_s": t_end,
            "max_population_b": peak,
            "t_max_population_b_s": t_peak,
            "squeezing_p_b_db_at_swap": squeezing_db(&b_swap, 0, Quadrature::P),
            "squeezing_min_b_db_at_swap": squeezing_db(&b_swap, 0, Quadrature::Min),
            "reservoir": reservoir,
        }),
        documents: vec![(
            "basis.json".into(),
            serde_json::to_value(&basis).map_err(|e| Error::Numerical(e.to_string()))?,
        )],
    })
}

fn run_manybody_single(s: &Scenario, seed: u64, seeds: usize) -> Result<RunOutput> {
    let cfg = &s.manybody;
    let runs = single_excitation_runs(cfg, seed, seeds, s.initial.excitation)?;
    let mean = mean_trajectory(&runs)?;
    let to_table = |samples: &[crate::manybody::SingleSample]| {
        let mut t = Table::new(["step", "t_over_tau", "f10", "f01"]);
        for x in samples {
            t.push(vec![
                Cell::Int(x.step),
                Cell::Float(x.step as f64),
                x.f10.into(),
                x.f01.into(),
            ]);
        }
        t
    };
    let mut tables = vec![("manybody_single.csv".to_string(), to_table(&mean))];
    for (k, r) in runs.iter().enumerate() {
        tables.push((format!("trajectory_{k:04}.csv"), to_table(r)));
    }
    let theory_j = cfg.coupling_per_step();
    let dephasing = cfg.phi_second_moment() / 4.0;
    // The damped two-mode model only describes the symmetric input.
    let fit = (s.initial.excitation == InitialExcitation::Symmetric)
        .then(|| fit_two_mode_decay(&mean, theory_j, 4.0 * dephasing));
    let f01: Vec<f64> = mean.iter().map(|x| x.f01).collect();
    let contrast = f01.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - f01.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RunOutput {
        kind: ScenarioKind::ManybodySingle,
        tables,
        summary: json!({
            "manybody": cfg,
            "initial_excitation": s.initial.excitation,
            "field_phase_rad": cfg.field_phase_rad(),
            "theory_two_j_per_step": 2.0 * theory_j,
            "fitted_two_j_per_step": fit.map(|f| 2.0 * f.0),
            "fitted_gamma_per_step": fit.map(|f| f.1),
            "alpha": fit.map(|f| f.1 / dephasing),
            "f01_contrast": contrast,
            "final_norm_deficit": mean.last().map(|x| 1.0 - x.f10 - x.f01),
        }),
        documents: vec![],
    })
}

fn run_manybody_double(s: &Scenario, seed: u64, seeds: usize) -> Result<RunOutput> {
    let cfg = &s.manybody;
    let runs = two_excitation_runs(cfg, seed, seeds)?;
    let n = runs.len() as f64;
    let mut table = Table::new(["step", "t_over_tau", "coincidence", "bunch_a", "bunch_b"]);
    for i in 0..runs[0].len() {
        let sum = |f: fn(&crate::manybody::PairSample) -> f64| {
            runs.iter().map(|r| f(&r[i])).sum::<f64>() / n
        };
        let step = runs[0][i].step;
        table.push(vec![
            Cell::Int(step),
            Cell::Float(step as f64),
            sum(|p| p.coincidence).into(),
            sum(|p| p.bunch_a).into(),
            sum(|p| p.bunch_b).into(),
        ]);
    }
    let j = cfg.coupling_per_step();
    let steps = table.column("step").unwrap_or_default();
    let coincidence = table.column("coincidence").unwrap_or_default();
    let at = |t: f64| {
        steps
            .iter()
            .zip(&coincidence)
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|(s, c)| json!({"step": s, "coincidence": c}))
    };
    let half = std::f64::consts::PI / (4.0 * j);
    Ok(RunOutput {
        kind: ScenarioKind::ManybodyDouble,
        tables: vec![("manybody_double.csv".into(), table)],
        summary: json!({
            "manybody": cfg,
            "coupling_per_step": j,
            "balanced_step": half,
            "swap_step": 2.0 * half,
            "at_balanced": at(half),
            "at_swap": at(2.0 * half),
        }),
        documents: vec![],
    })
}

fn run_kinetics(s: &Scenario, seed: u64) -> Result<RunOutput> {
    let report = estimate_kappa_moments(&s.kinetics, seed)?;
    let mut table = Table::new([
        "r_lo_cm",
        "r_hi_cm",
        "pairs_expected",
        "collisions",
        "mean_kappa",
        "kappa_exact",
        "kappa_solid_angle",
        "kappa_heaviside",
        "chi2_exact",
        "chi2_solid_angle",
        "chi2_heaviside",
    ]);
    for b in &report.bins {
        table.push(vec![
            b.r_lo.into(),
            b.r_hi.into(),
            b.pairs.into(),
            Cell::Int(b.collisions),
            b.mean_kappa.into(),
            b.exact.into(),
            b.solid_angle.into(),
            b.heaviside.into(),
            b.chi2_exact.into(),
            b.chi2_solid_angle.into(),
            b.chi2_heaviside.into(),
        ]);
    }
    Ok(RunOutput {
        kind: ScenarioKind::Kinetics,
        tables: vec![("kinetics_bins.csv".into(), table)],
        summary: json!({ "kinetics": s.kinetics }),
        documents: vec![(
            "kinetics_report.json".into(),
            serde_json::to_value(&report).map_err(|e| Error::Numerical(e.to_string()))?,
        )],
    })
}
