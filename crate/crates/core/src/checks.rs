//! Named invariant checks run by `contagion validate`.

use rand::{Rng, SeedableRng};

use crate::config::RunConfig;
use crate::distributions::{loss_laws, LossModel};
use crate::generators::{diversification, DIVERSIFICATION_TOL, ROW_SUM_TOL};
use crate::model::{BankState, Cascade, ExposureSystem, Matrix};
use crate::partition::{census, multi_behavior_bound, GridSpec};
use crate::registry::Registry;
use crate::rng::Stream;

/// A check returns a short summary on success and a reason on failure.
pub type Check = fn(&RunConfig) -> Result<String, String>;

pub fn invariant_checks() -> Registry<Check> {
    let mut reg: Registry<Check> = Registry::new("check");
    reg.register("cascade-fixed-points", cascade_fixed_points);
    reg.register("loss-calibration", loss_calibration);
    reg.register("portfolio-fidelity", portfolio_fidelity);
    reg.register("exposure-balance", exposure_balance);
    reg.register("multi-behavior-bound", multi_bound);
    reg
}

fn random_system(rng: &mut Stream, n: usize, m: usize) -> ExposureSystem {
    let mut x = Matrix::zeros(n, m);
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..m {
            x.set(i, j, rng.random_range(0.0..3.0));
        }
        for j in 0..n {
            if i != j && rng.random_bool(0.6) {
                l.set(i, j, rng.random_range(0.0..0.8));
            }
        }
    }
    ExposureSystem::new(x, l).expect("generated system is valid")
}

/// Cascade results agree with brute-force fixed-point enumeration.
fn cascade_fixed_points(cfg: &RunConfig) -> Result<String, String> {
    let mut rng = Stream::seed_from_u64(cfg.master_seed);
    let mut checked = 0;
    for n in 2..=4usize {
        for _ in 0..200 {
            let sys = random_system(&mut rng, n, n);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..0.8)).collect();
            let cascade = Cascade::new(&sys, &v);
            let fixed: Vec<u64> = (0..1u64 << n)
                .filter(|&bits| {
                    let f = BankState::from_bits(bits, n);
                    let mut next = Vec::new();
                    cascade_apply(&sys, &v, &f, &mut next);
                    next == f.as_slice()
                })
                .collect();
            let sig = cascade.signature();
            let (lo, hi) = (sig.lfp.bits(), sig.gfp.bits());
            if !fixed.contains(&lo) || !fixed.contains(&hi) {
                return Err(format!("cascade result is not a fixed point (n = {n})"));
            }
            if fixed.iter().any(|&b| b & lo != lo || b & hi != b) {
                return Err(format!(
                    "cascade misses the least/greatest fixed point (n = {n})"
                ));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} random systems"))
}

fn cascade_apply(sys: &ExposureSystem, v: &[f64], f: &BankState, out: &mut Vec<bool>) {
    out.clear();
    for i in 0..sys.n_banks() {
        let ext: f64 = sys
            .holdings()
            .row(i)
            .iter()
            .zip(v)
            .map(|(x, v)| x * v)
            .sum();
        let ib: f64 = sys
            .loans()
            .row(i)
            .iter()
            .zip(f.as_slice())
            .filter(|(_, &f)| f)
            .map(|(l, _)| l)
            .sum();
        out.push(ext + ib >= 1.0);
    }
}

/// A sole-asset bank fails with probability `q` under the configured law.
fn loss_calibration(cfg: &RunConfig) -> Result<String, String> {
    let law = loss_laws()
        .get(&cfg.loss_law)
        .and_then(|f| f(cfg.params.df))
        .map_err(|e| e.to_string())?;
    let model =
        LossModel::calibrate(law, cfg.params.q, cfg.params.eta).map_err(|e| e.to_string())?;
    let mut rng = Stream::seed_from_u64(cfg.master_seed ^ 0xca1);
    let draws = 200_000;
    let hits = (0..draws)
        .filter(|_| model.sample_loss(&mut rng) >= cfg.params.eta)
        .count();
    let q = cfg.params.q;
    let freq = hits as f64 / draws as f64;
    let tol = 4.0 * (q * (1.0 - q) / draws as f64).sqrt();
    if (freq - q).abs() <= tol {
        Ok(format!("P(loss ≥ eta) = {freq:.5}, q = {q}"))
    } else {
        Err(format!(
            "P(loss ≥ eta) = {freq:.5} vs q = {q} (tolerance {tol:.5})"
        ))
    }
}

/// Generated portfolios are stochastic, non-negative and hit their target.
fn portfolio_fidelity(cfg: &RunConfig) -> Result<String, String> {
    let n = cfg.params.n_assets;
    if n < 2 || n != cfg.params.n_banks {
        return Ok("skipped: portfolio generation needs n_assets = n_banks ≥ 2".into());
    }
    let gen = cfg.portfolio_generator().map_err(|e| e.to_string())?;
    let mut rng = Stream::seed_from_u64(cfg.master_seed ^ 0x9e7);
    for &d in &cfg.d_grid {
        for _ in 0..20 {
            let m = gen.generate(n, d, &mut rng).map_err(|e| e.to_string())?;
            for i in 0..n {
                if (m.row_sum(i) - 1.0).abs() > ROW_SUM_TOL || m.row(i).iter().any(|v| *v < 0.0) {
                    return Err(format!("row {i} invalid at d = {d}"));
                }
            }
            let got = diversification(&m).map_err(|e| e.to_string())?;
            if (got - d).abs() > DIVERSIFICATION_TOL {
                return Err(format!("diversification {got} for target {d}"));
            }
        }
    }
    Ok(format!("{} targets × 20 matrices", cfg.d_grid.len()))
}

/// Every generated balance sheet totals `1/eta` buffers.
fn exposure_balance(cfg: &RunConfig) -> Result<String, String> {
    let mut sweep = match cfg.sweep_config() {
        Ok(s) => s,
        Err(e) => return Ok(format!("skipped: {e}")),
    };
    sweep.n_trials = 5;
    for pi in 0..sweep.p_grid.len() {
        for di in 0..sweep.d_grid.len() {
            for t in 0..sweep.n_trials {
                let sys = sweep.trial_system(pi, di, t).map_err(|e| e.to_string())?;
                sys.check_balance(cfg.params.eta)
                    .map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(format!("{} cells", sweep.p_grid.len() * sweep.d_grid.len()))
}

/// Multiple-behavior signature counts stay within the combinatorial bound.
fn multi_bound(cfg: &RunConfig) -> Result<String, String> {
    let mut rng = Stream::seed_from_u64(cfg.master_seed ^ 0xb0d);
    for n in 2..=3usize {
        let bound = multi_behavior_bound(n as u32);
        for _ in 0..10 {
            let sys = random_system(&mut rng, n, 2);
            let c = census(&sys, &GridSpec::uniform(2, -0.5, 1.0, 60), u128::MAX)
                .map_err(|e| e.to_string())?;
            if c.n_multi as u128 > bound || c.n_signatures() > 1 << n {
                return Err(format!(
                    "{} multi-behavior signatures for n = {n}",
                    c.n_multi
                ));
            }
        }
    }
    Ok("20 random systems".into())
}
