//! Experiment configuration: defaults, `key=value` files and CLI flags.
//!
//! Precedence is CLI flag > config file > built-in default. Every value is
//! validated under its key name so errors point at the offending setting.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Parser;
use nalgebra::DMatrix;

use crate::dynamics::{build_environment, LtvEnvironment, Preset, Theta};
use crate::error::{Error, Result};
use crate::ofu::{Algorithm, OfuConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CustomEnvironment {
    pub configurations: Vec<Theta>,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub custom: Option<CustomEnvironment>,
    pub horizon: usize,
    pub episodes: usize,
    pub noise_scale: f64,
    /// Seed of the environment schedule (only the `frequent` preset is random).
    pub env_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub ofu: OfuConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Switching,
            custom: None,
            horizon: 100,
            episodes: 100,
            noise_scale: 0.1,
            env_seed: 0,
            algorithms: vec![Algorithm::ROfu, Algorithm::SwOfu, Algorithm::OracleLqr],
            ofu: OfuConfig::default(),
            seeds: (1..=5).collect(),
            out_dir: PathBuf::from("results"),
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn build_environment(&self) -> Result<LtvEnvironment> {
        match (&self.custom, self.preset) {
            (Some(custom), Preset::Custom) => LtvEnvironment::from_configurations(
                &custom.configurations,
                custom.period,
                self.horizon,
                self.episodes,
                self.noise_scale,
            ),
            (None, Preset::Custom) => Err(Error::Config {
                key: "env".into(),
                message: "custom environments need custom_a and custom_b".into(),
            }),
            (_, preset) => build_environment(
                preset,
                self.horizon,
                self.episodes,
                self.noise_scale,
                self.env_seed,
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(config_err("algos", "at least one algorithm is required"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed is required"));
        }
        if self.jobs == 0 {
            return Err(config_err("jobs", "must be at least 1"));
        }
        if self.horizon < 2 {
            return Err(config_err("horizon", "must be at least 2"));
        }
        if self.preset == Preset::Frequent && self.horizon < 20 {
            return Err(config_err(
                "horizon",
                "the frequent preset needs at least 20 steps",
            ));
        }
        if self.episodes < 1 {
            return Err(config_err("episodes", "must be at least 1"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(config_err("noise", "must be finite and non-negative"));
        }
        self.ofu.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => config_err(name, &reason),
            other => other,
        })
    }
}

fn config_err(key: &str, message: &str) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.to_string(),
    }
}

/// Command-line flags. Values are kept as text and parsed per key so that file
/// and flag values go through the same validation.
#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "ltv-ofu",
    about = "Online optimistic control of unknown linear time-varying systems"
)]
pub struct CliArgs {
    /// Environment preset: switching, slow, frequent, lti (custom via --config)
    #[arg(long)]
    pub env: Option<String>,
    /// Comma-separated algorithms: r-ofu, sw-ofu, oracle-lqr, zero, omniscient
    #[arg(long)]
    pub algos: Option<String>,
    /// Number of episodes K
    #[arg(long)]
    pub episodes: Option<String>,
    /// Steps per episode H
    #[arg(long)]
    pub horizon: Option<String>,
    /// Restart epoch length L
    #[arg(long)]
    pub epoch: Option<String>,
    /// Sliding window size W
    #[arg(long)]
    pub window: Option<String>,
    /// Number of OFU candidates m (including the estimate)
    #[arg(long)]
    pub candidates: Option<String>,
    /// Half-width of the uniform candidate perturbation
    #[arg(long)]
    pub perturb: Option<String>,
    /// Ridge regularisation strength
    #[arg(long)]
    pub lambda: Option<String>,
    /// Confidence level of the ellipsoid, in (0, 1)
    #[arg(long)]
    pub delta: Option<String>,
    /// Standard deviation of the Gaussian process noise
    #[arg(long)]
    pub noise: Option<String>,
    /// Comma-separated seed list, or a count N meaning seeds 1..=N
    #[arg(long)]
    pub seeds: Option<String>,
    /// Output directory for the CSV files
    #[arg(long)]
    pub out: Option<String>,
    /// Worker threads
    #[arg(long)]
    pub jobs: Option<String>,
    /// key=value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Evaluate the optimistic objective at the current state
    #[arg(long)]
    pub eval_at_current_state: bool,
    /// Seed of the environment schedule
    #[arg(long)]
    pub env_seed: Option<String>,
}

impl CliArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut add = |k: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        };
        add("env", &self.env);
        add("algos", &self.algos);
        add("episodes", &self.episodes);
        add("horizon", &self.horizon);
        add("epoch", &self.epoch);
        add("window", &self.window);
        add("candidates", &self.candidates);
        add("perturb", &self.perturb);
        add("lambda", &self.lambda);
        add("delta", &self.delta);
        add("noise", &self.noise);
        add("seeds", &self.seeds);
        add("out", &self.out);
        add("jobs", &self.jobs);
        add("env_seed", &self.env_seed);
        if self.eval_at_current_state {
            out.push(("eval_at_current_state", "true".into()));
        }
        out
    }
}

const KEYS: &[&str] = &[
    "env",
    "algos",
    "episodes",
    "horizon",
    "epoch",
    "window",
    "candidates",
    "perturb",
    "lambda",
    "delta",
    "noise",
    "seeds",
    "out",
    "jobs",
    "env_seed",
    "eval_at_current_state",
    "custom_a",
    "custom_b",
    "custom_period",
];

/// Parses flat `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            key: format!("line {}", lineno + 1),
            message: format!("expected key=value, got `{line}`"),
        })?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(config_err(&key, "unknown key"));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Parses the process arguments (including the program name) into a config.
pub fn parse_config<I, T>(args: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = CliArgs::try_parse_from(args).map_err(|e| Error::Config {
        key: "args".into(),
        message: e.to_string(),
    })?;
    let file_text = match &cli.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: "config".into(),
            message: format!("{}: {e}", path.display()),
        })?),
        None => None,
    };
    merge_config(&cli, file_text.as_deref())
}

/// Applies `file_text` over the defaults, then the CLI flags over both.
pub fn merge_config(cli: &CliArgs, file_text: Option<&str>) -> Result<ExperimentConfig> {
    let mut values = match file_text {
        Some(text) => parse_key_values(text)?,
        None => BTreeMap::new(),
    };
    for (k, v) in cli.pairs() {
        values.insert(k.to_string(), v);
    }
    let mut cfg = ExperimentConfig::default();
    for (key, value) in &values {
        apply(&mut cfg, key, value)?;
    }
    if cfg.preset == Preset::Custom {
        cfg.custom = Some(parse_custom(&values)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| config_err(key, &format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(config_err(
            key,
            &format!("expected a boolean, got `{value}`"),
        )),
    }
}

fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let value = value.trim();
    if value.contains(',') {
        value
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_num("seeds", s))
            .collect()
    } else {
        let count: u64 = parse_num("seeds", value)?;
        Ok((1..=count).collect())
    }
}

fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "env" => {
            cfg.preset = value
                .parse()
                .map_err(|_| config_err(key, &format!("unknown preset `{value}`")))?
        }
        "algos" => {
            cfg.algorithms = value
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.parse::<Algorithm>()
                        .map_err(|_| config_err(key, &format!("unknown algorithm `{}`", s.trim())))
                })
                .collect::<Result<_>>()?
        }
        "episodes" => cfg.episodes = parse_num(key, value)?,
        "horizon" => cfg.horizon = parse_num(key, value)?,
        "epoch" => cfg.ofu.epoch_length = parse_num(key, value)?,
        "window" => cfg.ofu.window = parse_num(key, value)?,
        "candidates" => cfg.ofu.num_candidates = parse_num(key, value)?,
        "perturb" => cfg.ofu.perturb_scale = parse_num(key, value)?,
        "lambda" => cfg.ofu.lambda = parse_num(key, value)?,
        "delta" => cfg.ofu.delta = parse_num(key, value)?,
        "noise" => cfg.noise_scale = parse_num(key, value)?,
        "seeds" => cfg.seeds = parse_seeds(value)?,
        "out" => cfg.out_dir = PathBuf::from(value.trim()),
        "jobs" => cfg.jobs = parse_num(key, value)?,
        "env_seed" => cfg.env_seed = parse_num(key, value)?,
        "eval_at_current_state" => cfg.ofu.evaluate_at_current_state = parse_bool(key, value)?,
        "custom_a" | "custom_b" | "custom_period" => {}
        other => return Err(config_err(other, "unknown key")),
    }
    Ok(())
}

/// Matrix literal with `;` between rows and `,` between columns, e.g. `1,0.5;0,1`.
fn parse_matrix(key: &str, text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| parse_num(key, v))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(config_err(key, &format!("ragged or empty matrix `{text}`")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn parse_custom(values: &BTreeMap<String, String>) -> Result<CustomEnvironment> {
    let get = |key: &str| {
        values
            .get(key)
            .ok_or_else(|| config_err(key, "required when env=custom"))
    };
    let a_list: Vec<DMatrix<f64>> = get("custom_a")?
        .split('|')
        .map(|m| parse_matrix("custom_a", m))
        .collect::<Result<_>>()?;
    let b_list: Vec<DMatrix<f64>> = get("custom_b")?
        .split('|')
        .map(|m| parse_matrix("custom_b", m))
        .collect::<Result<_>>()?;
    if a_list.len() != b_list.len() {
        return Err(config_err(
            "custom_b",
            "custom_a and custom_b must list the same number of systems",
        ));
    }
    let configurations = a_list
        .iter()
        .zip(&b_list)
        .map(|(a, b)| Theta::from_ab(a, b).map_err(|e| config_err("custom_a", &e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let period = match values.get("custom_period") {
        Some(v) => parse_num("custom_period", v)?,
        None => usize::MAX,
    };
    if period == 0 {
        return Err(config_err("custom_period", "must be at least 1"));
    }
    Ok(CustomEnvironment {
        configurations,
        period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        std::iter::once("ltv-ofu")
            .chain(list.iter().copied())
            .map(String::from)
            .collect()
    }

    #[test]
    fn empty_args_give_defaults() {
        let cfg = parse_config(args(&[])).unwrap();
        assert_eq!(cfg.ofu.epoch_length, 20);
        assert_eq!(cfg.ofu.window, 20);
        assert_eq!(cfg.ofu.num_candidates, 50);
        assert_eq!(cfg.ofu.perturb_scale, 0.5);
        assert_eq!(cfg.noise_scale, 0.1);
        assert_eq!(cfg.ofu.delta, 0.1);
        assert_eq!(cfg.ofu.lambda, 1.0);
        assert_eq!(cfg.seeds.len(), 5);
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn cli_overrides_file() {
        let cli = CliArgs::try_parse_from(args(&["--epoch", "40"])).unwrap();
        let cfg = merge_config(&cli, Some("# tuned\nepoch=20\nwindow = 30\n")).unwrap();
        assert_eq!(cfg.ofu.epoch_length, 40);
        assert_eq!(cfg.ofu.window, 30);
    }

    #[test]
    fn out_of_range_delta_names_the_key() {
        let err = parse_config(args(&["--delta", "1.5"])).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "delta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_offending_key() {
        for (flags, key) in [
            (vec!["--horizon", "abc"], "horizon"),
            (vec!["--env", "chaotic"], "env"),
            (vec!["--algos", "r-ofu,greedy"], "algos"),
            (vec!["--candidates", "0"], "candidates"),
            (vec!["--seeds", "0"], "seeds"),
            (vec!["--jobs", "0"], "jobs"),
            (vec!["--env", "frequent", "--horizon", "10"], "horizon"),
        ] {
            match parse_config(args(&flags)).unwrap_err() {
                Error::Config { key: k, .. } => assert_eq!(k, key, "{flags:?}"),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(parse_config(args(&["--unknown-flag", "1"])).is_err());
        assert!(matches!(
            merge_config(&CliArgs::default(), Some("bogus=1")),
            Err(Error::Config { key, .. }) if key == "bogus"
        ));
        assert!(merge_config(&CliArgs::default(), Some("no equals sign")).is_err());
    }

    #[test]
    fn seeds_list_or_count() {
        let cfg = parse_config(args(&["--seeds", "3"])).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        let cfg = parse_config(args(&["--seeds", "7,11,2"])).unwrap();
        assert_eq!(cfg.seeds, vec![7, 11, 2]);
        let cfg = parse_config(args(&["--seeds", "42,"])).unwrap();
        assert_eq!(cfg.seeds, vec![42]);
    }

    #[test]
    fn flags_and_booleans() {
        let cfg = parse_config(args(&[
            "--eval-at-current-state",
            "--env",
            "slow",
            "--algos",
            "zero,omniscient",
        ]))
        .unwrap();
        assert!(cfg.ofu.evaluate_at_current_state);
        assert_eq!(cfg.preset, Preset::Slow);
        assert_eq!(cfg.algorithms, vec![Algorithm::Zero, Algorithm::Omniscient]);
        let cfg = merge_config(&CliArgs::default(), Some("eval_at_current_state=yes")).unwrap();
        assert!(cfg.ofu.evaluate_at_current_state);
    }

    #[test]
    fn config_file_is_read_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, "env=lti\nepisodes=7\n").unwrap();
        let cfg = parse_config(args(&[
            "--config",
            path.to_str().unwrap(),
            "--episodes",
            "9",
        ]))
        .unwrap();
        assert_eq!(cfg.preset, Preset::Lti);
        assert_eq!(cfg.episodes, 9);
        assert!(parse_config(args(&["--config", "/nonexistent/file.cfg"])).is_err());
    }

    #[test]
    fn custom_environment_from_file() {
        let text = "env=custom\nhorizon=10\nepisodes=2\n\
                    custom_a=1,0.5;0,1 | 1,1.5;0,1\ncustom_b=0;1.2 | 0;0.9\ncustom_period=5\n";
        let cfg = merge_config(&CliArgs::default(), Some(text)).unwrap();
        let env = cfg.build_environment().unwrap();
        assert_eq!(env.theta(1, 5).unwrap().b()[(1, 0)], 1.2);
        assert_eq!(env.theta(2, 6).unwrap().b()[(1, 0)], 0.9);
        assert_eq!(env.theta(1, 6).unwrap().a()[(0, 1)], 1.5);

        let lti = "env=custom\ncustom_a=0.5\ncustom_b=1\n";
        let env = merge_config(&CliArgs::default(), Some(lti))
            .unwrap()
            .build_environment()
            .unwrap();
        assert_eq!(env.episode_variation_budget(1).unwrap(), 0.0);

        assert!(merge_config(&CliArgs::default(), Some("env=custom\ncustom_a=1\n")).is_err());
        assert!(merge_config(
            &CliArgs::default(),
            Some("env=custom\ncustom_a=1,2;3\ncustom_b=1\n")
        )
        .is_err());
    }
}
