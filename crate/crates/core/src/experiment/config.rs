//! Flat `key = value` experiment configuration with named presets.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{PathLossModel, PlacementBox, Point3};
use crate::optimize::sac::SacConfig;
use crate::scalar::dbm_to_watts;

pub const PRESETS: [&str; 3] = ["desk", "paper-table2", "paper-fig2"];

const DESK: &str = "
num_aps = 2
antennas = 2
num_users = 2
num_ris = 2
elements = 8
tau_p = 2
tau_c = 200
rho_dbm = 0
sigma2_dbm = -104
kappa = 10
epsilon = 10
box_width = 40
box_depth = 40
ap_height = 10
user_height = 1.5
ris_height_min = 5
ris_height_max = 15
exponent_ap_user = 5
n_samples = 20000
num_placements = 20
sac_num_episodes = 40
sac_steps_per_episode = 25
seed = 1
";

const TABLE2: &str = "
num_aps = 3
antennas = 4
num_users = 4
num_ris = 3
elements = 30
ris_grid = 5x6
tau_p = 4
tau_c = 200
rho_dbm = 0
sigma2_dbm = -104
kappa = 10
epsilon = 10
exponent_ap_user = 4
exponent_ap_ris = 2.5
exponent_ris_user = 2
num_placements = 50
seed = 1
";

const FIG2: &str = "
num_aps = 3
antennas = 4
num_users = 4
num_ris = 3
elements = 30
ris_grid = 5x6
tau_p = 4
tau_c = 200
rho_dbm = 0
sigma2_dbm = -104
kappa = 10
epsilon = 10
ap_positions = 500 200 30; 250 0 30; 250 400 30
ris_positions = 0 200 400; 250 200 400; 500 0 400
user_positions = 100 100 0; 100 300 0; 400 100 0; 400 300 0
num_placements = 1
seed = 1
";

/// Text of a named preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    match name {
        "desk" => Ok(DESK),
        "paper-table2" => Ok(TABLE2),
        "paper-fig2" => Ok(FIG2),
        other => Err(Error::InvalidArgument(format!(
            "unknown preset '{other}' (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}

const KEYS: &[&str] = &[
    "scenario",
    "num_aps",
    "antennas",
    "num_users",
    "num_ris",
    "elements",
    "ris_grid",
    "d_over_lambda",
    "ap_positions",
    "ris_positions",
    "user_positions",
    "box_width",
    "box_depth",
    "ap_height",
    "user_height",
    "ris_height_min",
    "ris_height_max",
    "rho_dbm",
    "rho_s_dbm",
    "sigma2_dbm",
    "tau_c",
    "tau_p",
    "kappa",
    "epsilon",
    "reference_gain",
    "exponent_ap_user",
    "exponent_ap_ris",
    "exponent_ris_user",
    "n_samples",
    "num_placements",
    "sweep",
    "optimizer",
    "random_draws",
    "coordinate_sweeps",
    "coordinate_grid_points",
    "sac_discount",
    "sac_hidden1",
    "sac_hidden2",
    "sac_learning_rate",
    "sac_buffer_capacity",
    "sac_batch_size",
    "sac_steps_per_episode",
    "sac_num_episodes",
    "sac_target_smoothing",
    "sac_reward_scale",
    "sac_gradient_steps",
    "seed",
];

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed key-value pairs before typing; later inserts override earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Self::default();
        raw.merge_text(text)?;
        Ok(raw)
    }

    /// Adds every line of `text`, overriding existing keys.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("expected 'key = value', found '{content}'"),
                });
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("unknown key '{key}'"),
                });
            }
            self.entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    line: line_no,
                },
            );
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    /// Key-value echo with a canonical ordering.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
    }

    /// `key = value` lines in key order; the basis of the input hash.
    pub fn canonical_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, e)| format!("{k} = {}\n", e.value))
            .collect()
    }

    fn typed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| Error::Config {
                line: e.line,
                message: format!("{key}: expected {what}, found '{}'", e.value),
            }),
        }
    }

    fn required<T: FromStr>(&self, key: &str, what: &str) -> Result<T> {
        self.typed(key, what)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    fn or<T: FromStr>(&self, key: &str, what: &str, default: T) -> Result<T> {
        Ok(self.typed(key, what)?.unwrap_or(default))
    }

    fn parse_with<T>(&self, key: &str, f: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).ok_or_else(|| Error::Config {
                line: e.line,
                message: format!("{key}: expected {what}, found '{}'", e.value),
            }),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// A single uniform random phase draw.
    None,
    Random,
    Coordinate,
    Sac,
}

impl FromStr for OptimizerKind {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "none" => Ok(Self::None),
            "random" => Ok(Self::Random),
            "coordinate" => Ok(Self::Coordinate),
            "sac" => Ok(Self::Sac),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Positions {
    pub aps: Vec<Point3<f64>>,
    pub ris: Vec<Point3<f64>>,
    pub users: Vec<Point3<f64>>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub scenario: Option<String>,
    pub num_aps: usize,
    pub antennas: usize,
    pub num_users: usize,
    pub num_ris: usize,
    pub elements: usize,
    pub ris_grid: Option<(usize, usize)>,
    pub d_over_lambda: f64,
    pub positions: Option<Positions>,
    pub placement: PlacementBox<f64>,
    pub rho_dbm: f64,
    pub rho_s_dbm: f64,
    pub sigma2_dbm: f64,
    pub tau_c: usize,
    pub tau_p: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub pathloss: PathLossModel<f64>,
    pub n_samples: usize,
    pub num_placements: usize,
    pub sweep: Option<Vec<f64>>,
    pub optimizer: OptimizerKind,
    pub random_draws: usize,
    pub coordinate_sweeps: usize,
    pub coordinate_grid_points: usize,
    pub sac: SacConfig<f64>,
    pub seed: u64,
    pub raw: RawConfig,
}

fn parse_grid(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once('x')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse().ok()).collect()
}

fn parse_points(s: &str) -> Option<Vec<Point3<f64>>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(';')
        .map(|p| {
            let v: Vec<f64> = p.split_whitespace().map(|x| x.parse().ok()).collect::<Option<_>>()?;
            (v.len() == 3).then(|| [v[0], v[1], v[2]])
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let r = &raw;
        let num_aps = r.required("num_aps", "an integer")?;
        let antennas = r.required("antennas", "an integer")?;
        let num_users = r.required("num_users", "an integer")?;
        let num_ris = r.required("num_ris", "an integer")?;
        let elements = r.required("elements", "an integer")?;
        let tau_p: usize = r.required("tau_p", "an integer")?;
        let tau_c: usize = r.required("tau_c", "an integer")?;
        let rho_dbm: f64 = r.required("rho_dbm", "a number")?;
        let sigma2_dbm = r.required("sigma2_dbm", "a number")?;
        let kappa = r.required("kappa", "a number")?;
        let epsilon = r.required("epsilon", "a number")?;
        let seed = r.required("seed", "an unsigned integer")?;

        let ap = r.parse_with("ap_positions", parse_points, "'x y z; x y z; ...'")?;
        let ris = r.parse_with("ris_positions", parse_points, "'x y z; x y z; ...'")?;
        let users = r.parse_with("user_positions", parse_points, "'x y z; x y z; ...'")?;
        let positions = match (ap, ris, users) {
            (None, None, None) => None,
            (Some(aps), Some(ris), Some(users)) => Some(Positions { aps, ris, users }),
            _ => {
                return Err(Error::Config {
                    line: r
                        .line_of("ap_positions")
                        .max(r.line_of("ris_positions"))
                        .max(r.line_of("user_positions")),
                    message: "ap_positions, ris_positions and user_positions must be given together".into(),
                })
            }
        };

        let d = PlacementBox::<f64>::default();
        let placement = PlacementBox {
            width: r.or("box_width", "a number", d.width)?,
            depth: r.or("box_depth", "a number", d.depth)?,
            ap_height: r.or("ap_height", "a number", d.ap_height)?,
            user_height: r.or("user_height", "a number", d.user_height)?,
            ris_height: (
                r.or("ris_height_min", "a number", d.ris_height.0)?,
                r.or("ris_height_max", "a number", d.ris_height.1)?,
            ),
        };
        let p = PathLossModel::<f64>::default();
        let pathloss = PathLossModel {
            reference_gain: r.or("reference_gain", "a number", p.reference_gain)?,
            exponent_ap_user: r.or("exponent_ap_user", "a number", p.exponent_ap_user)?,
            exponent_ap_ris: r.or("exponent_ap_ris", "a number", p.exponent_ap_ris)?,
            exponent_ris_user: r.or("exponent_ris_user", "a number", p.exponent_ris_user)?,
        };
        let s = SacConfig::<f64>::default();
        let sac = SacConfig {
            discount: r.or("sac_discount", "a number", s.discount)?,
            hidden_sizes: [
                r.or("sac_hidden1", "an integer", s.hidden_sizes[0])?,
                r.or("sac_hidden2", "an integer", s.hidden_sizes[1])?,
            ],
            learning_rate: r.or("sac_learning_rate", "a number", s.learning_rate)?,
            buffer_capacity: r.or("sac_buffer_capacity", "an integer", s.buffer_capacity)?,
            batch_size: r.or("sac_batch_size", "an integer", s.batch_size)?,
            steps_per_episode: r.or("sac_steps_per_episode", "an integer", s.steps_per_episode)?,
            num_episodes: r.or("sac_num_episodes", "an integer", s.num_episodes)?,
            target_smoothing: r.or("sac_target_smoothing", "a number", s.target_smoothing)?,
            reward_scale: r.or("sac_reward_scale", "a number", s.reward_scale)?,
            gradient_steps_per_env_step: r.or("sac_gradient_steps", "an integer", s.gradient_steps_per_env_step)?,
        };

        let cfg = Self {
            scenario: r.typed("scenario", "a scenario name")?,
            num_aps,
            antennas,
            num_users,
            num_ris,
            elements,
            ris_grid: r.parse_with("ris_grid", parse_grid, "'ROWSxCOLS'")?,
            d_over_lambda: r.or("d_over_lambda", "a number", 0.5)?,
            positions,
            placement,
            rho_dbm,
            rho_s_dbm: r.or("rho_s_dbm", "a number", rho_dbm)?,
            sigma2_dbm,
            tau_c,
            tau_p,
            kappa,
            epsilon,
            pathloss,
            n_samples: r.or("n_samples", "an integer", 20_000)?,
            num_placements: r.or("num_placements", "an integer", 50)?,
            sweep: r.parse_with("sweep", parse_list, "a comma-separated list of numbers")?,
            optimizer: r.or("optimizer", "one of none, random, coordinate, sac", OptimizerKind::None)?,
            random_draws: r.or("random_draws", "an integer", 100)?,
            coordinate_sweeps: r.or("coordinate_sweeps", "an integer", 2)?,
            coordinate_grid_points: r.or("coordinate_grid_points", "an integer", 16)?,
            sac,
            seed,
            raw,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let err = |key: &str, message: String| Error::Config {
            line: self.raw.line_of(key),
            message,
        };
        for (key, v) in [
            ("num_aps", self.num_aps),
            ("antennas", self.antennas),
            ("num_users", self.num_users),
            ("elements", self.elements),
            ("tau_p", self.tau_p),
            ("n_samples", self.n_samples),
            ("num_placements", self.num_placements),
            ("random_draws", self.random_draws),
        ] {
            if v == 0 {
                return Err(err(key, format!("{key} must be positive")));
            }
        }
        if self.tau_p > self.tau_c {
            return Err(err(
                "tau_p",
                format!("tau_p = {} exceeds tau_c = {}", self.tau_p, self.tau_c),
            ));
        }
        if self.coordinate_grid_points < 2 {
            return Err(err(
                "coordinate_grid_points",
                "coordinate_grid_points must be at least 2".into(),
            ));
        }
        if let Some((a, b)) = self.ris_grid {
            if a * b != self.elements {
                return Err(err(
                    "ris_grid",
                    format!("ris_grid {a}x{b} does not match elements = {}", self.elements),
                ));
            }
        }
        if let Some(p) = &self.positions {
            if p.aps.len() != self.num_aps || p.ris.len() != self.num_ris || p.users.len() != self.num_users {
                return Err(err(
                    "ap_positions",
                    "position counts do not match num_aps, num_ris, num_users".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        dbm_to_watts(self.rho_dbm)
    }

    pub fn rho_s(&self) -> f64 {
        dbm_to_watts(self.rho_s_dbm)
    }

    pub fn sigma2(&self) -> f64 {
        dbm_to_watts(self.sigma2_dbm)
    }
}

/// Parses a preset (if any) overlaid with `text`.
pub fn parse_config(text: &str, preset: Option<&str>) -> Result<ExperimentConfig> {
    let mut raw = match preset {
        Some(p) => RawConfig::parse(preset_text(p)?)?,
        None => RawConfig::default(),
    };
    raw.merge_text(text)?;
    ExperimentConfig::from_raw(raw)
}

pub fn load_config(path: &Path, preset: Option<&str>) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?, preset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            let c = parse_config("", Some(p)).unwrap();
            assert!(c.num_aps > 0, "{p}");
        }
    }

    #[test]
    fn type_errors_carry_line_numbers() {
        let e = parse_config("# header\n\ntau_p = four\n", Some("desk")).unwrap_err();
        match e {
            Error::Config { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("tau_p"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            parse_config("bogus = 1", Some("desk")),
            Err(Error::Config { line: 1, .. })
        ));
    }

    #[test]
    fn overrides_win() {
        let c = parse_config("elements = 4\nris_grid = 2x2 # square", Some("desk")).unwrap();
        assert_eq!((c.elements, c.ris_grid), (4, Some((2, 2))));
    }
}
