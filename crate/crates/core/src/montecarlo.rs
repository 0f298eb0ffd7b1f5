//! Expected systemic cost and the connectivity × diversification sweep.
//!
//! The expected cost `Σ_regions P(region)·K^S` is estimated by sampling loss
//! vectors: each sample lands in exactly one region, so the sample mean of
//! `K(V)^S` is unbiased. Costs are taken at the least fixed point (all banks
//! start solvent); how often the least and greatest fixed points disagree is
//! reported separately.

use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;

use crate::distributions::{LossLaw, LossModel, StudentT};
use crate::error::{Error, Result};
use crate::generators::{build_exposures, gen_er_network, interbank_weight, PortfolioGenerator};
use crate::model::{failure_count, Cascade, ExposureSystem, ModelParams};
use crate::rng::{derive_stream, StreamRole};

/// Outcome of one loss sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOutcome {
    /// Failures at the least fixed point.
    pub failed: usize,
    /// Least and greatest fixed points differ.
    pub multi: bool,
}

/// Runs `n_samples` loss draws through the cascade.
pub fn sample_outcomes(
    sys: &ExposureSystem,
    model: &LossModel,
    n_samples: usize,
    rng: &mut dyn RngCore,
) -> Vec<SampleOutcome> {
    let n = sys.n_banks();
    let mut v = vec![0.0; sys.n_assets()];
    (0..n_samples)
        .map(|_| {
            model.fill(rng, &mut v);
            let cascade = Cascade::new(sys, &v);
            let lfp = cascade.lfp();
            let failed = failure_count(&lfp);
            // all-failed is also the top of the lattice
            let multi = failed < n && cascade.gfp() != lfp;
            SampleOutcome { failed, multi }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostEstimate {
    /// Mean of `K^S`, one entry per exponent.
    pub per_s: Vec<f64>,
    /// Fraction of samples in a multiple-behavior region.
    pub multi_rate: f64,
}

/// `K^S` for every `K ∈ 0..=n`, one row per exponent.
fn power_table(n: usize, s_list: &[f64]) -> Vec<Vec<f64>> {
    s_list
        .iter()
        .map(|&s| {
            (0..=n)
                .map(|k| if k == 0 { 0.0 } else { (k as f64).powf(s) })
                .collect()
        })
        .collect()
}

fn check_exponents(s_list: &[f64]) -> Result<()> {
    if s_list.is_empty() {
        return Err(Error::param("s_list", "must not be empty"));
    }
    if let Some(s) = s_list.iter().find(|s| !(**s >= 1.0 && s.is_finite())) {
        return Err(Error::param("s_list", format!("exponent {s} is below 1")));
    }
    Ok(())
}

/// Monte Carlo estimate of the expected systemic cost for each exponent.
pub fn expected_cost(
    sys: &ExposureSystem,
    model: &LossModel,
    n_samples: usize,
    s_list: &[f64],
    rng: &mut dyn RngCore,
) -> Result<CostEstimate> {
    check_exponents(s_list)?;
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be at least 1"));
    }
    let outcomes = sample_outcomes(sys, model, n_samples, rng);
    Ok(summarize(&outcomes, &power_table(sys.n_banks(), s_list)))
}

fn summarize(outcomes: &[SampleOutcome], powers: &[Vec<f64>]) -> CostEstimate {
    let n = outcomes.len() as f64;
    let per_s = powers
        .iter()
        .map(|table| outcomes.iter().map(|o| table[o.failed]).sum::<f64>() / n)
        .collect();
    let multi = outcomes.iter().filter(|o| o.multi).count();
    CostEstimate {
        per_s,
        multi_rate: multi as f64 / n,
    }
}

/// Sweep protocol: for every `(p, d)` cell, `n_trials` random systems, each
/// priced with `n_samples` loss vectors.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub p_grid: Vec<f64>,
    pub d_grid: Vec<f64>,
    pub n_trials: usize,
    pub n_samples: usize,
    pub master_seed: u64,
    /// Model knobs; `params.s_list` holds the cost exponents.
    pub params: ModelParams,
    pub loss_law: Arc<dyn LossLaw>,
    pub generator: PortfolioGenerator,
    /// Worker threads; 0 uses the global rayon pool.
    pub threads: usize,
}

impl SweepConfig {
    /// Student-t losses with `params.df` and the default portfolio generator.
    pub fn new(params: ModelParams, p_grid: Vec<f64>, d_grid: Vec<f64>) -> Result<Self> {
        let loss_law = Arc::new(StudentT::new(params.df)?);
        Ok(SweepConfig {
            p_grid,
            d_grid,
            n_trials: 100,
            n_samples: 2000,
            master_seed: 0,
            params,
            loss_law,
            generator: PortfolioGenerator::default(),
            threads: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.params.n_banks != self.params.n_assets || self.params.n_banks < 2 {
            return Err(Error::param(
                "n_assets",
                "portfolio generation needs n_assets = n_banks ≥ 2",
            ));
        }
        check_grid("p_grid", &self.p_grid)?;
        check_grid("d_grid", &self.d_grid)?;
        if self.n_trials == 0 {
            return Err(Error::param("n_trials", "must be at least 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::param("n_samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn loss_model(&self) -> Result<LossModel> {
        LossModel::calibrate(self.loss_law.clone(), self.params.q, self.params.eta)
    }

    /// The random system of one trial, built exactly as the sweep builds it.
    pub fn trial_system(
        &self,
        p_index: usize,
        d_index: usize,
        trial: usize,
    ) -> Result<ExposureSystem> {
        let (p, d) = (self.p_grid[p_index], self.d_grid[d_index]);
        let params = &self.params;
        let mut net_rng = derive_stream(
            self.master_seed,
            p_index,
            d_index,
            trial,
            StreamRole::Network,
        );
        let graph = gen_er_network(params.n_banks, p, &mut net_rng)?;
        let w = interbank_weight(p, params.w_max, params.weight_shape)?;
        let mut port_rng = derive_stream(
            self.master_seed,
            p_index,
            d_index,
            trial,
            StreamRole::Portfolio,
        );
        let weights = self.generator.generate(params.n_assets, d, &mut port_rng)?;
        build_exposures(&graph, w, params.eta, &weights)
    }

    fn run_trial(
        &self,
        model: &LossModel,
        powers: &[Vec<f64>],
        (p_index, d_index, trial): (usize, usize, usize),
    ) -> Result<CostEstimate> {
        let tag = |source: Error| Error::Cell {
            p_index,
            d_index,
            p: self.p_grid[p_index],
            d: self.d_grid[d_index],
            trial,
            source: Box::new(source),
        };
        let sys = self.trial_system(p_index, d_index, trial).map_err(tag)?;
        let mut loss_rng = derive_stream(
            self.master_seed,
            p_index,
            d_index,
            trial,
            StreamRole::Losses,
        );
        let outcomes = sample_outcomes(&sys, model, self.n_samples, &mut loss_rng);
        Ok(summarize(&outcomes, powers))
    }
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param(name, "must not be empty"));
    }
    if let Some(x) = grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::param(name, format!("{x} not in [0, 1]")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(name, "must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub d: f64,
    pub s: f64,
    pub mean_cost: f64,
    pub std_err: f64,
    pub multi_rate: f64,
    pub n_trials: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, p: f64, d: f64, s: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.p == p && r.d == d && r.s == s)
    }

    /// Rows of one `(p, s)` slice in increasing `d`.
    pub fn slice(&self, p: f64, s: f64) -> Vec<&SweepRow> {
        let mut rows: Vec<_> = self.rows.iter().filter(|r| r.p == p && r.s == s).collect();
        rows.sort_by(|a, b| a.d.total_cmp(&b.d));
        rows
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.p.total_cmp(&b.p)
                .then(a.d.total_cmp(&b.d))
                .then(a.s.total_cmp(&b.s))
        });
    }
}

/// Runs the full grid. Tasks run in parallel; per-cell reduction happens in
/// trial order, so the table is bitwise independent of scheduling.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let model = cfg.loss_model()?;
    let powers = power_table(cfg.params.n_banks, &cfg.params.s_list);

    let tasks: Vec<(usize, usize, usize)> = (0..cfg.p_grid.len())
        .flat_map(|pi| (0..cfg.d_grid.len()).map(move |di| (pi, di)))
        .flat_map(|(pi, di)| (0..cfg.n_trials).map(move |t| (pi, di, t)))
        .collect();

    let run = || -> Result<Vec<CostEstimate>> {
        tasks
            .par_iter()
            .map(|&task| cfg.run_trial(&model, &powers, task))
            .collect()
    };
    let estimates = if cfg.threads == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::param("threads", e.to_string()))?
            .install(run)?
    };

    let mut table = SweepTable::default();
    for (cell, trials) in estimates.chunks(cfg.n_trials).enumerate() {
        let p = cfg.p_grid[cell / cfg.d_grid.len()];
        let d = cfg.d_grid[cell % cfg.d_grid.len()];
        let multi_rate = trials.iter().map(|e| e.multi_rate).sum::<f64>() / trials.len() as f64;
        for (si, &s) in cfg.params.s_list.iter().enumerate() {
            let values: Vec<f64> = trials.iter().map(|e| e.per_s[si]).collect();
            let (mean_cost, std_err) = mean_and_std_err(&values);
            table.rows.push(SweepRow {
                p,
                d,
                s,
                mean_cost,
                std_err,
                multi_rate,
                n_trials: cfg.n_trials,
                n_samples: cfg.n_samples,
            });
        }
    }
    table.sort();
    Ok(table)
}

/// Sample mean and standard error of the mean (0 for a single value).
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The `d` with the lowest mean cost in the `(p, s)` slice; ties go to the
/// smaller `d`.
pub fn find_d_opt(table: &SweepTable, p: f64, s: f64) -> Result<f64> {
    table
        .slice(p, s)
        .into_iter()
        .fold(None::<&SweepRow>, |best, row| match best {
            Some(b) if b.mean_cost <= row.mean_cost => Some(b),
            _ => Some(row),
        })
        .map(|row| row.d)
        .ok_or(Error::MissingSlice { p, s })
}
