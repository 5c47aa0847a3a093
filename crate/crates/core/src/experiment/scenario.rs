//! Scenario sweeps: every job is a (sweep point, placement) pair with its own seed.

use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{build_channel_statistics, PhaseConfig};
use crate::closed_form::se::{LinkParams, SystemModel};
use crate::error::{Error, Result};
use crate::estimation::{nmse_closed_form, nmse_monte_carlo};
use crate::experiment::config::{ExperimentConfig, OptimizerKind};
use crate::geometry::{AngleSet, RicianFactors, SystemTopology};
use crate::montecarlo::{centralized_sum_se, empirical_moments_all, McEstimate};
use crate::optimize::baselines::{coordinate_ascent, random_search};
use crate::optimize::env::RisEnvironment;
use crate::optimize::sac::{sac_train, TrainingTrace};
use crate::scalar::dbm_to_watts;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    NmseVsM,
    SeVsM,
    SeVsN,
    SeVsPower,
    SeCdf,
    CentralizedCompare,
    ValidateClosedForm,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Self::NmseVsM,
        Self::SeVsM,
        Self::SeVsN,
        Self::SeVsPower,
        Self::SeCdf,
        Self::CentralizedCompare,
        Self::ValidateClosedForm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::NmseVsM => "nmse-vs-m",
            Self::SeVsM => "se-vs-m",
            Self::SeVsN => "se-vs-n",
            Self::SeVsPower => "se-vs-power",
            Self::SeCdf => "se-cdf",
            Self::CentralizedCompare => "centralized-compare",
            Self::ValidateClosedForm => "validate-closed-form",
        }
    }

    fn default_sweep(self) -> Option<Vec<f64>> {
        match self {
            Self::NmseVsM => Some(vec![4.0, 16.0, 36.0, 64.0]),
            Self::SeVsM => Some(vec![4.0, 8.0, 16.0]),
            Self::SeVsN => Some(vec![2.0, 4.0, 8.0]),
            Self::SeVsPower => Some(vec![-5.0, 0.0, 5.0, 10.0]),
            _ => None,
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(master, parts...)`, mixed one part at a time.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub const STREAM_PHASE: u64 = 1;
pub const STREAM_MONTE_CARLO: u64 = 2;
pub const STREAM_OPTIMIZER: u64 = 3;

/// Most square `rows × cols = m` with `rows ≤ cols`.
pub fn auto_grid(m: usize) -> (usize, usize) {
    let rows = (1..=m)
        .take_while(|r| r * r <= m)
        .filter(|r| m.is_multiple_of(*r))
        .last()
        .unwrap_or(1);
    (rows, m / rows)
}

/// The parameters a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point {
    pub antennas: usize,
    pub elements: usize,
    pub rho_dbm: f64,
    pub with_ris: bool,
}

impl Point {
    pub fn base(cfg: &ExperimentConfig) -> Self {
        Self {
            antennas: cfg.antennas,
            elements: cfg.elements,
            rho_dbm: cfg.rho_dbm,
            with_ris: true,
        }
    }
}

/// Placement seed for placement index `p`; shared across sweep points.
pub fn placement_seed(cfg: &ExperimentConfig, p: usize) -> u64 {
    derive_seed(cfg.seed, &[p as u64])
}

/// Builds the system for one point; node positions and angles depend only on the seed.
pub fn build_model(cfg: &ExperimentConfig, point: &Point, seed: u64) -> Result<SystemModel<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (aps, mut ris, users) = match &cfg.positions {
        Some(p) => (p.aps.clone(), p.ris.clone(), p.users.clone()),
        None => cfg.placement.sample(&mut rng, cfg.num_aps, cfg.num_ris, cfg.num_users),
    };
    let mut angles = AngleSet::random(&mut rng, cfg.num_ris, cfg.num_aps, cfg.num_users);
    let num_ris = if point.with_ris { cfg.num_ris } else { 0 };
    ris.truncate(num_ris);
    for t in [
        &mut angles.aoa_ap,
        &mut angles.aod_ris_azimuth,
        &mut angles.aod_ris_elevation,
        &mut angles.aoa_ris_azimuth,
        &mut angles.aoa_ris_elevation,
    ] {
        t.truncate(num_ris);
    }
    let ris_grid = match cfg.ris_grid {
        Some(g) if point.elements == cfg.elements => g,
        _ => auto_grid(point.elements),
    };
    let topo = SystemTopology {
        num_aps: cfg.num_aps,
        antennas_per_ap: point.antennas,
        num_users: cfg.num_users,
        num_ris,
        elements_per_ris: point.elements,
        ris_grid,
        d_over_lambda: cfg.d_over_lambda,
        ap_positions: aps,
        ris_positions: ris,
        user_positions: users,
    };
    let rician = RicianFactors::uniform(cfg.kappa, cfg.epsilon, num_ris, cfg.num_aps, cfg.num_users);
    let stats = build_channel_statistics(&topo, &cfg.pathloss, &rician, &angles)?;
    let params = LinkParams {
        rho: dbm_to_watts(point.rho_dbm),
        rho_s: dbm_to_watts(point.rho_dbm + cfg.rho_s_dbm - cfg.rho_dbm),
        sigma2: cfg.sigma2(),
        tau_p: cfg.tau_p,
        tau_c: cfg.tau_c,
    };
    SystemModel::new(stats, params)
}

pub struct Optimized {
    pub phase: PhaseConfig<f64>,
    pub sum_se: f64,
    pub evaluations: usize,
    pub trace: Option<TrainingTrace>,
}

/// Chooses the phases with the configured optimizer.
pub fn optimize_phases(cfg: &ExperimentConfig, model: &SystemModel<f64>, seed: u64) -> Result<Optimized> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.stats.dims;
    let mut env = RisEnvironment::new(model.clone());
    let (phase, trace) = match cfg.optimizer {
        OptimizerKind::None => (PhaseConfig::random(&mut rng, d.num_ris, d.elements), None),
        OptimizerKind::Random => (random_search(&mut env, cfg.random_draws, &mut rng)?.phase, None),
        OptimizerKind::Coordinate => (
            coordinate_ascent(&mut env, cfg.coordinate_sweeps, cfg.coordinate_grid_points, &mut rng)?.phase,
            None,
        ),
        OptimizerKind::Sac => {
            let (phase, trace) = sac_train(&mut env, &cfg.sac, &mut rng)?;
            (phase, Some(trace))
        }
    };
    let sum_se = model.sum_se(&phase)?.sum_se;
    Ok(Optimized {
        phase,
        sum_se,
        evaluations: env.evaluations,
        trace,
    })
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

/// One job of a run, as recorded in the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct JobRecord {
    pub point: usize,
    pub placement: usize,
    pub seed: u64,
    pub sweep_value: Option<f64>,
}

pub struct ScenarioOutput {
    pub table: Table,
    pub jobs: Vec<JobRecord>,
    /// Trace of the first SAC run, if any.
    pub trace: Option<TrainingTrace>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

fn f(x: f64) -> String {
    format!("{x}")
}

/// One closed-form quantity next to its Monte-Carlo estimate.
#[derive(Clone, Debug)]
pub struct MomentCheck {
    pub user: usize,
    pub quantity: &'static str,
    /// Interfering user for second moments.
    pub other: Option<usize>,
    pub row: usize,
    pub col: usize,
    pub closed_form: Complex64,
    pub estimate: McEstimate,
    pub z: f64,
    /// `|closed − mc| / |closed|`.
    pub relative: f64,
    pub pass: bool,
}

/// z ≤ 3 everywhere, and relative deviation ≤ 2 % where `|value|/SE > 10`.
pub const MOMENT_Z_LIMIT: f64 = 3.0;
pub const MOMENT_REL_LIMIT: f64 = 0.02;
pub const MOMENT_SIGNIFICANCE: f64 = 10.0;

fn check(
    user: usize,
    quantity: &'static str,
    other: Option<usize>,
    row: usize,
    col: usize,
    cf: Complex64,
    est: McEstimate,
) -> MomentCheck {
    let z = est.z_score(cf);
    let relative = if cf.norm() > 0.0 {
        (cf - est.mean).norm() / cf.norm()
    } else {
        0.0
    };
    let significant = est.std_error > 0.0 && cf.norm() / est.std_error > MOMENT_SIGNIFICANCE;
    let pass = z <= MOMENT_Z_LIMIT && (!significant || relative <= MOMENT_REL_LIMIT);
    MomentCheck {
        user,
        quantity,
        other,
        row,
        col,
        closed_form: cf,
        estimate: est,
        z,
        relative,
        pass,
    }
}

/// Compares every closed-form moment with its empirical counterpart.
pub fn validate_moments(
    model: &SystemModel<f64>,
    phase: &PhaseConfig<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<MomentCheck>> {
    let cf = model.moments(phase)?;
    let mc = empirical_moments_all(
        &model.stats,
        &model.operator,
        phase,
        &model.assignment,
        None,
        n_samples,
        seed,
    );
    let jn = model.stats.dims.num_aps;
    let mut out = Vec::new();
    for (m, e) in cf.iter().zip(&mc) {
        let k = m.user;
        for j in 0..jn {
            out.push(check(k, "mean_wkk", None, j, 0, m.mean_wkk[j], e.mean_wkk[j]));
        }
        for (i, (s, se)) in m.second.iter().zip(&e.second).enumerate() {
            for r in 0..jn {
                for c in 0..jn {
                    out.push(check(k, "second", Some(i), r, c, s[(r, c)], se[r * jn + c]));
                }
            }
        }
        for j in 0..jn {
            let v_est = McEstimate {
                mean: Complex64::new(e.mean_wkk[j].mean.re, 0.0),
                ..e.mean_wkk[j]
            };
            out.push(check(k, "v", None, j, j, Complex64::new(m.v[j], 0.0), v_est));
            out.push(check(
                k,
                "estimate_power",
                None,
                j,
                0,
                Complex64::new(m.estimate_power[j], 0.0),
                e.estimate_power[j],
            ));
        }
    }
    Ok(out)
}

type Job = (usize, usize);

fn jobs_for(points: usize, placements: usize) -> Vec<Job> {
    (0..points).flat_map(|p| (0..placements).map(move |q| (p, q))).collect()
}

/// Runs jobs in parallel; rows keep job order and the first trace wins.
fn run_jobs(
    jobs: &[Job],
    f: impl Fn(usize, usize) -> Result<(Vec<Vec<String>>, Option<TrainingTrace>)> + Sync,
) -> Result<(Vec<Vec<String>>, Option<TrainingTrace>)> {
    let parts: Vec<_> = jobs.par_iter().map(|&(p, q)| f(p, q)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut trace = None;
    for (r, t) in parts {
        rows.extend(r);
        if trace.is_none() {
            trace = t;
        }
    }
    Ok((rows, trace))
}

pub fn run_scenario(cfg: &ExperimentConfig, scenario: Scenario) -> Result<ScenarioOutput> {
    if let Some(s) = &cfg.scenario {
        if s != scenario.name() {
            return Err(Error::InvalidArgument(format!(
                "config names scenario '{s}' but '{}' was requested",
                scenario.name()
            )));
        }
    }
    let sweep = cfg.sweep.clone().or_else(|| scenario.default_sweep());
    let base = Point::base(cfg);
    let placements = if scenario == Scenario::ValidateClosedForm {
        1
    } else {
        cfg.num_placements
    };
    let values = sweep.clone().unwrap_or_default();
    let points: Vec<(Option<f64>, Point)> = match scenario {
        Scenario::NmseVsM | Scenario::SeVsM => values
            .iter()
            .map(|&v| {
                Ok((
                    Some(v),
                    Point {
                        elements: as_count(v, "elements")?,
                        ..base
                    },
                ))
            })
            .collect::<Result<_>>()?,
        Scenario::SeVsN => values
            .iter()
            .map(|&v| {
                Ok((
                    Some(v),
                    Point {
                        antennas: as_count(v, "antennas")?,
                        ..base
                    },
                ))
            })
            .collect::<Result<_>>()?,
        Scenario::SeVsPower => values
            .iter()
            .map(|&v| (Some(v), Point { rho_dbm: v, ..base }))
            .collect(),
        _ => vec![(None, base)],
    };
    let jobs = jobs_for(points.len(), placements);
    let records = jobs
        .iter()
        .map(|&(p, q)| JobRecord {
            point: p,
            placement: q,
            seed: placement_seed(cfg, q),
            sweep_value: points[p].0,
        })
        .collect();
    let mut summary = Vec::new();
    let label = |p: usize| points[p].0.map(f).unwrap_or_default();

    let (table, trace) = match scenario {
        Scenario::NmseVsM => {
            let mut t = Table::new(&[
                "elements",
                "placement",
                "seed",
                "user",
                "nmse_closed_form",
                "nmse_monte_carlo",
                "nmse_monte_carlo_se",
            ]);
            let (rows, tr) = run_jobs(&jobs, |p, q| {
                let seed = placement_seed(cfg, q);
                let model = build_model(cfg, &points[p].1, seed)?;
                let d = model.stats.dims;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_PHASE, p as u64]));
                let phase = PhaseConfig::random(&mut rng, d.num_ris, d.elements);
                let cf = nmse_closed_form(&model.stats, &model.operator);
                let mc_seed = derive_seed(seed, &[STREAM_MONTE_CARLO, p as u64]);
                let mc = nmse_monte_carlo(
                    &model.stats,
                    &model.operator,
                    &phase,
                    &model.assignment,
                    cfg.n_samples,
                    mc_seed,
                )?;
                let rows = (0..d.num_users)
                    .map(|k| {
                        vec![
                            label(p),
                            q.to_string(),
                            seed.to_string(),
                            k.to_string(),
                            f(cf[k]),
                            f(mc[k].mean.re),
                            f(mc[k].std_error),
                        ]
                    })
                    .collect();
                Ok((rows, None))
            })?;
            t.rows = rows;
            for (p, (v, _)) in points.iter().enumerate() {
                let label = f(v.unwrap());
                let of = |c: usize| -> Vec<f64> {
                    t.rows.iter().filter(|r| r[0] == label).map(|r| r[c].parse().unwrap()).collect()
                };
                summary.push(format!(
                    "elements = {}: mean NMSE closed form {:.4e}, Monte-Carlo {:.4e}",
                    points[p].1.elements,
                    mean(&of(4)),
                    mean(&of(5))
                ));
            }
            (t, tr)
        }
        Scenario::SeVsM | Scenario::SeVsN | Scenario::SeVsPower => {
            let name = match scenario {
                Scenario::SeVsM => "elements",
                Scenario::SeVsN => "antennas",
                _ => "rho_dbm",
            };
            let mut t = Table::new(&[name, "placement", "seed", "optimizer", "sum_se", "evaluations"]);
            let (rows, tr) = run_jobs(&jobs, |p, q| {
                let seed = placement_seed(cfg, q);
                let model = build_model(cfg, &points[p].1, seed)?;
                let opt = optimize_phases(cfg, &model, derive_seed(seed, &[STREAM_OPTIMIZER]))?;
                let row = vec![
                    label(p),
                    q.to_string(),
                    seed.to_string(),
                    optimizer_name(cfg.optimizer).into(),
                    f(opt.sum_se),
                    opt.evaluations.to_string(),
                ];
                Ok((vec![row], opt.trace))
            })?;
            t.rows = rows;
            for (p, (v, _)) in points.iter().enumerate() {
                let vals: Vec<f64> = t
                    .rows
                    .iter()
                    .skip(p * placements)
                    .take(placements)
                    .map(|r| r[4].parse().unwrap())
                    .collect();
                summary.push(format!(
                    "{name} = {}: mean sum SE {:.4} over {placements} placements",
                    v.unwrap(),
                    mean(&vals)
                ));
            }
            (t, tr)
        }
        Scenario::SeCdf => {
            let mut t = Table::new(&[
                "placement",
                "seed",
                "sum_se_random",
                "sum_se_optimized",
                "sum_se_no_ris",
                "optimizer",
            ]);
            let (rows, tr) = run_jobs(&jobs, |_, q| {
                let seed = placement_seed(cfg, q);
                let model = build_model(cfg, &base, seed)?;
                let d = model.stats.dims;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_PHASE]));
                let random = model
                    .sum_se(&PhaseConfig::random(&mut rng, d.num_ris, d.elements))?
                    .sum_se;
                let opt = optimize_phases(cfg, &model, derive_seed(seed, &[STREAM_OPTIMIZER]))?;
                let plain = build_model(
                    cfg,
                    &Point {
                        with_ris: false,
                        ..base
                    },
                    seed,
                )?;
                let no_ris = plain.sum_se(&PhaseConfig::zeros(0, d.elements))?.sum_se;
                let row = vec![
                    q.to_string(),
                    seed.to_string(),
                    f(random),
                    f(opt.sum_se),
                    f(no_ris),
                    optimizer_name(cfg.optimizer).into(),
                ];
                Ok((vec![row], opt.trace))
            })?;
            t.rows = rows;
            for (c, name) in [(2, "random"), (3, "optimized"), (4, "no RIS")] {
                let vals: Vec<f64> = t.rows.iter().map(|r| r[c].parse().unwrap()).collect();
                summary.push(format!("{name}: mean sum SE {:.4}", mean(&vals)));
            }
            (t, tr)
        }
        Scenario::CentralizedCompare => {
            let mut t = Table::new(&[
                "placement",
                "seed",
                "two_timescale_sum_se",
                "centralized_sum_se",
                "centralized_sum_se_se",
            ]);
            let (rows, tr) = run_jobs(&jobs, |_, q| {
                let seed = placement_seed(cfg, q);
                let model = build_model(cfg, &base, seed)?;
                let opt = optimize_phases(cfg, &model, derive_seed(seed, &[STREAM_OPTIMIZER]))?;
                let p = &model.params;
                let c = centralized_sum_se(
                    &model.stats,
                    &opt.phase,
                    p.rho_s,
                    p.sigma2,
                    p.tau_p,
                    p.tau_c,
                    cfg.n_samples,
                    derive_seed(seed, &[STREAM_MONTE_CARLO]),
                );
                let row = vec![
                    q.to_string(),
                    seed.to_string(),
                    f(opt.sum_se),
                    f(c.mean.re),
                    f(c.std_error),
                ];
                Ok((vec![row], opt.trace))
            })?;
            t.rows = rows;
            for (c, name) in [(2, "two-timescale"), (3, "centralized")] {
                let vals: Vec<f64> = t.rows.iter().map(|r| r[c].parse().unwrap()).collect();
                summary.push(format!("{name}: mean sum SE {:.4}", mean(&vals)));
            }
            (t, tr)
        }
        Scenario::ValidateClosedForm => {
            let mut t = Table::new(&[
                "user",
                "quantity",
                "other",
                "row",
                "col",
                "closed_re",
                "closed_im",
                "mc_re",
                "mc_im",
                "mc_se",
                "z",
                "relative",
                "pass",
            ]);
            let seed = placement_seed(cfg, 0);
            let model = build_model(cfg, &base, seed)?;
            let d = model.stats.dims;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_PHASE]));
            let phase = PhaseConfig::random(&mut rng, d.num_ris, d.elements);
            let checks = validate_moments(&model, &phase, cfg.n_samples, derive_seed(seed, &[STREAM_MONTE_CARLO]))?;
            for c in &checks {
                t.rows.push(vec![
                    c.user.to_string(),
                    c.quantity.into(),
                    c.other.map(|i| i.to_string()).unwrap_or_default(),
                    c.row.to_string(),
                    c.col.to_string(),
                    f(c.closed_form.re),
                    f(c.closed_form.im),
                    f(c.estimate.mean.re),
                    f(c.estimate.mean.im),
                    f(c.estimate.std_error),
                    f(c.z),
                    f(c.relative),
                    c.pass.to_string(),
                ]);
            }
            summary.push(format!(
                "{:<16} {:>7} {:>7} {:>9} {:>12}",
                "quantity", "checks", "failed", "max z", "max rel"
            ));
            for q in ["mean_wkk", "second", "v", "estimate_power"] {
                let sel: Vec<&MomentCheck> = checks.iter().filter(|c| c.quantity == q).collect();
                let failed = sel.iter().filter(|c| !c.pass).count();
                let max_z = sel.iter().map(|c| c.z).fold(0.0, f64::max);
                let max_rel = sel
                    .iter()
                    .filter(|c| {
                        c.estimate.std_error > 0.0 && c.closed_form.norm() / c.estimate.std_error > MOMENT_SIGNIFICANCE
                    })
                    .map(|c| c.relative)
                    .fold(0.0, f64::max);
                summary.push(format!(
                    "{q:<16} {:>7} {failed:>7} {max_z:>9.3} {max_rel:>12.3e}",
                    sel.len()
                ));
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            summary.push(if failed == 0 {
                format!("all {} moment checks pass", checks.len())
            } else {
                format!("{failed} of {} moment checks fail", checks.len())
            });
            (t, None)
        }
    };
    Ok(ScenarioOutput {
        table,
        jobs: records,
        trace,
        summary,
    })
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidArgument(format!(
            "sweep value {v} is not a valid {what} count"
        )))
    }
}

fn optimizer_name(k: OptimizerKind) -> &'static str {
    match k {
        OptimizerKind::None => "none",
        OptimizerKind::Random => "random",
        OptimizerKind::Coordinate => "coordinate",
        OptimizerKind::Sac => "sac",
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
