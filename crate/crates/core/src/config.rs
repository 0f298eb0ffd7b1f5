//! Line-oriented `key = value` run configuration.
//!
//! `#` starts a comment, blank lines are ignored, lists are comma-separated.
//! Unknown or repeated keys are rejected; omitted keys take their defaults.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::distributions::loss_laws;
use crate::error::{Error, Result};
use crate::generators::{shaping_schedules, PortfolioGenerator, WeightShape, DEFAULT_MAX_RETRIES};
use crate::model::ModelParams;
use crate::montecarlo::SweepConfig;
use crate::partition::{
    GridSpec, WitnessSearch, DEFAULT_BOUNDS, DEFAULT_CENSUS_BUDGET, DEFAULT_RESOLUTION,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub loss_law: String,
    pub shaping: String,
    /// Seed blend of the `pinned` schedule.
    pub pinned_base: f64,
    pub max_retries: usize,
    pub p_grid: Vec<f64>,
    pub d_grid: Vec<f64>,
    pub n_trials: usize,
    pub n_samples: usize,
    pub master_seed: u64,
    /// 0 = one worker per core.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub census_lo: f64,
    pub census_hi: f64,
    pub census_resolution: usize,
    pub census_budget: u128,
    pub witness_directions: usize,
    pub witness_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::default(),
            loss_law: "student_t".into(),
            shaping: "pinned".into(),
            pinned_base: 0.9,
            max_retries: DEFAULT_MAX_RETRIES,
            p_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            d_grid: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            n_trials: 100,
            n_samples: 2000,
            master_seed: 20_140_601,
            threads: 0,
            out_dir: PathBuf::from("out"),
            census_lo: DEFAULT_BOUNDS.0,
            census_hi: DEFAULT_BOUNDS.1,
            census_resolution: DEFAULT_RESOLUTION,
            census_budget: DEFAULT_CENSUS_BUDGET,
            witness_directions: 64,
            witness_steps: 256,
        }
    }
}

type Check<T> = fn(&T) -> std::result::Result<(), String>;

fn parse_f64(raw: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("`{raw}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{raw}` is not finite"))
    }
}

fn parse_int<T: std::str::FromStr>(raw: &str) -> std::result::Result<T, String> {
    raw.parse()
        .map_err(|_| format!("`{raw}` is not a non-negative integer"))
}

fn parse_list(raw: &str) -> std::result::Result<Vec<f64>, String> {
    raw.split(',').map(|x| parse_f64(x.trim())).collect()
}

fn checked<T>(value: T, check: Check<T>) -> std::result::Result<T, String> {
    check(&value)?;
    Ok(value)
}

fn open(lo: f64, hi: f64) -> impl Fn(&f64) -> std::result::Result<(), String> {
    move |v| {
        if *v > lo && *v < hi {
            Ok(())
        } else {
            Err(format!("{v} not in ({lo}, {hi})"))
        }
    }
}

#[allow(clippy::ptr_arg)] // must fit `Check<Vec<f64>>`
fn unit_grid(g: &Vec<f64>) -> std::result::Result<(), String> {
    if g.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err("values must lie in [0, 1]".into());
    }
    if g.windows(2).any(|w| w[0] >= w[1]) {
        return Err("values must be strictly increasing".into());
    }
    Ok(())
}

fn positive(n: &usize) -> std::result::Result<(), String> {
    if *n == 0 {
        Err("must be at least 1".into())
    } else {
        Ok(())
    }
}

impl RunConfig {
    fn set(&mut self, key: &str, raw: &str) -> std::result::Result<(), String> {
        let p = &mut self.params;
        match key {
            "n_banks" => {
                p.n_banks = checked(parse_int(raw)?, |n: &usize| {
                    if (1..=64).contains(n) {
                        Ok(())
                    } else {
                        Err(format!("{n} not in 1..=64"))
                    }
                })?
            }
            "n_assets" => p.n_assets = checked(parse_int(raw)?, positive)?,
            "eta" => p.eta = checked(parse_f64(raw)?, |v| open(0.0, 1.0)(v))?,
            "q" => p.q = checked(parse_f64(raw)?, |v| open(0.0, 0.5)(v))?,
            "w_max" => {
                p.w_max = checked(parse_f64(raw)?, |v| {
                    if (0.0..1.0).contains(v) {
                        Ok(())
                    } else {
                        Err(format!("{v} not in [0, 1)"))
                    }
                })?
            }
            "weight_shape" => {
                p.weight_shape = raw.parse::<WeightShape>().map_err(|e| e.to_string())?
            }
            "df" => p.df = checked(parse_f64(raw)?, |v| open(0.0, f64::INFINITY)(v))?,
            "s_list" => {
                p.s_list = checked(parse_list(raw)?, |s| {
                    if s.iter().any(|x| *x < 1.0) {
                        Err("exponents must be ≥ 1".into())
                    } else if s.windows(2).any(|w| w[0] >= w[1]) {
                        Err("exponents must be strictly increasing".into())
                    } else {
                        Ok(())
                    }
                })?
            }
            "loss_law" => {
                let laws = loss_laws();
                laws.get(raw).map_err(|e| e.to_string())?;
                self.loss_law = raw.to_string();
            }
            "shaping" => {
                shaping_schedules().get(raw).map_err(|e| e.to_string())?;
                self.shaping = raw.to_string();
            }
            "pinned_base" => {
                self.pinned_base = checked(parse_f64(raw)?, |v| {
                    if (0.0..=1.0).contains(v) {
                        Ok(())
                    } else {
                        Err(format!("{v} not in [0, 1]"))
                    }
                })?
            }
            "max_retries" => self.max_retries = checked(parse_int(raw)?, positive)?,
            "p_grid" => self.p_grid = checked(parse_list(raw)?, unit_grid)?,
            "d_grid" => self.d_grid = checked(parse_list(raw)?, unit_grid)?,
            "n_trials" => self.n_trials = checked(parse_int(raw)?, positive)?,
            "n_samples" => self.n_samples = checked(parse_int(raw)?, positive)?,
            "master_seed" => self.master_seed = parse_int(raw)?,
            "threads" => self.threads = parse_int(raw)?,
            "out_dir" => self.out_dir = PathBuf::from(raw),
            "census_lo" => self.census_lo = parse_f64(raw)?,
            "census_hi" => {
                self.census_hi = checked(parse_f64(raw)?, |v| {
                    if *v <= 1.0 {
                        Ok(())
                    } else {
                        Err(format!("{v} exceeds a total loss of 1"))
                    }
                })?
            }
            "census_resolution" => self.census_resolution = checked(parse_int(raw)?, positive)?,
            "census_budget" => self.census_budget = parse_int(raw)?,
            "witness_directions" => self.witness_directions = checked(parse_int(raw)?, positive)?,
            "witness_steps" => self.witness_steps = checked(parse_int(raw)?, positive)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn check_cross_fields(&self) -> std::result::Result<(), String> {
        if self.p_grid.is_empty() || self.d_grid.is_empty() {
            return Err("grids must not be empty".into());
        }
        if !(self.census_lo < self.census_hi) {
            return Err(format!(
                "census_lo ({}) must be below census_hi ({})",
                self.census_lo, self.census_hi
            ));
        }
        Ok(())
    }

    /// Parses and validates `key = value` text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("malformed line `{line}`"),
                });
            }
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("key `{key}` given twice"),
                });
            }
            seen.push(key.to_string());
            cfg.set(key, value).map_err(|message| Error::Config {
                line: line_no,
                message: format!("key `{key}`: {message}"),
            })?;
        }
        cfg.check_cross_fields()
            .map_err(|message| Error::Config { line: 0, message })?;
        Ok(cfg)
    }

    /// Full `key = value` serialization; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let p = &self.params;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("n_banks", p.n_banks.to_string());
        kv("n_assets", p.n_assets.to_string());
        kv("eta", p.eta.to_string());
        kv("q", p.q.to_string());
        kv("w_max", p.w_max.to_string());
        kv("weight_shape", p.weight_shape.to_string());
        kv("df", p.df.to_string());
        kv("s_list", list(&p.s_list));
        kv("loss_law", self.loss_law.clone());
        kv("shaping", self.shaping.clone());
        kv("pinned_base", self.pinned_base.to_string());
        kv("max_retries", self.max_retries.to_string());
        kv("p_grid", list(&self.p_grid));
        kv("d_grid", list(&self.d_grid));
        kv("n_trials", self.n_trials.to_string());
        kv("n_samples", self.n_samples.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("threads", self.threads.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("census_lo", self.census_lo.to_string());
        kv("census_hi", self.census_hi.to_string());
        kv("census_resolution", self.census_resolution.to_string());
        kv("census_budget", self.census_budget.to_string());
        kv("witness_directions", self.witness_directions.to_string());
        kv("witness_steps", self.witness_steps.to_string());
        out
    }

    pub fn portfolio_generator(&self) -> Result<PortfolioGenerator> {
        Ok(PortfolioGenerator::new(
            shaping_schedules().get(&self.shaping)?(self.pinned_base),
            self.max_retries,
        ))
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let law = loss_laws().get(&self.loss_law)?(self.params.df)?;
        let cfg = SweepConfig {
            p_grid: self.p_grid.clone(),
            d_grid: self.d_grid.clone(),
            n_trials: self.n_trials,
            n_samples: self.n_samples,
            master_seed: self.master_seed,
            params: self.params.clone(),
            loss_law: law,
            generator: self.portfolio_generator()?,
            threads: self.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn census_grid(&self) -> GridSpec {
        GridSpec::uniform(
            self.params.n_assets,
            self.census_lo,
            self.census_hi,
            self.census_resolution,
        )
    }

    pub fn witness_search(&self) -> WitnessSearch {
        WitnessSearch {
            directions: self.witness_directions,
            steps: self.witness_steps,
            seed: self.master_seed,
        }
    }
}

/// Parses a config file's text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(
            parse_config("# only a comment\n\n").unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn table_values() {
        let cfg = parse_config("n_banks = 10\nn_assets = 10\nw_max = 0.2\nweight_shape = linear")
            .unwrap();
        assert_eq!(cfg.params.n_banks, 10);
        assert_eq!(cfg.params.n_assets, 10);
        assert_eq!(cfg.params.w_max, 0.2);
        assert_eq!(cfg.params.weight_shape, WeightShape::Linear);
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn errors_name_key_and_line() {
        let err = parse_config("n_banks = 4\nq = 0.6")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2") && err.contains("`q`"), "{err}");

        let err = parse_config("\nbogus = 1").unwrap_err().to_string();
        assert!(
            err.contains("line 2") && err.contains("unknown key"),
            "{err}"
        );

        let err = parse_config("eta 0.1").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");

        assert!(parse_config("p_grid = 0.5, 0.25").is_err());
        assert!(parse_config("s_list = 0.5").is_err());
        assert!(parse_config("weight_shape = cubic").is_err());
        assert!(parse_config("loss_law = laplace").is_err());
        assert!(parse_config("n_trials = 0").is_err());
        assert!(parse_config("eta = 0.1\neta = 0.2").is_err());
        assert!(parse_config("census_lo = 2\ncensus_hi = 1").is_err());
    }

    #[test]
    fn comments_and_lists() {
        let cfg = parse_config("p_grid = 0, 0.25,0.5 # coarse\ns_list=1,2.5").unwrap();
        assert_eq!(cfg.p_grid, vec![0.0, 0.25, 0.5]);
        assert_eq!(cfg.params.s_list, vec![1.0, 2.5]);
    }

    #[test]
    fn builds_sweep_config() {
        let cfg = parse_config("loss_law = normal\nshaping = threshold").unwrap();
        let sweep = cfg.sweep_config().unwrap();
        assert_eq!(sweep.loss_law.name(), "normal");
        assert_eq!(sweep.generator.schedule().name(), "threshold");
        let bad = parse_config("n_assets = 3").unwrap();
        assert!(bad.sweep_config().is_err());
    }
}
