//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one `criterion N: PASS|FAIL ...` line; exits non-zero if
//! any criterion fails.
//!
//! Criteria 4-6 run at the default calibration (η = q = 0.05, Student-t
//! df = 1.5). Criterion 9 reruns them under a shared calibration
//! (η = 0.05, q = 0.2) for the Student-t and the normal law. At q = 0.05 a
//! normal shock almost never fails a diversified bank, so that cell would be
//! all zeros for both laws and compare nothing.

use std::collections::BTreeSet;
use std::time::Instant;

use contagion::csvio::format_sweep_csv;
use contagion::distributions::{loss_laws, LossModel};
use contagion::generators::PortfolioGenerator;
use contagion::montecarlo::{find_d_opt, sample_outcomes, sweep, SweepConfig, SweepTable};
use contagion::partition::{census, multi_behavior_bound, GridSpec, DEFAULT_CENSUS_BUDGET};
use contagion::rng::{derive_stream, Stream, StreamRole};
use contagion::{cascade_gfp, cascade_lfp, ExposureSystem, LossVector, Matrix, ModelParams};
use rand::{Rng, SeedableRng};

const MASTER_SEED: u64 = 20_140_601;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// 1. Cascade against exhaustive enumeration
// ---------------------------------------------------------------------------

/// Y_i for failure set `f`, computed independently of the library.
fn oracle_is_fixed(x: &[Vec<f64>], l: &[Vec<f64>], v: &[f64], f: &[bool]) -> bool {
    (0..x.len()).all(|i| {
        let ext: f64 = x[i].iter().zip(v).map(|(a, b)| a * b).sum();
        let inter: f64 = (0..x.len()).filter(|&k| f[k]).map(|k| l[i][k]).sum();
        (ext + inter >= 1.0) == f[i]
    })
}

fn oracle_fixed_points(x: &[Vec<f64>], l: &[Vec<f64>], v: &[f64]) -> Vec<Vec<bool>> {
    let n = x.len();
    (0u32..1 << n)
        .map(|bits| (0..n).map(|i| bits >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|f| oracle_is_fixed(x, l, v, f))
        .collect()
}

fn random_instance(
    n: usize,
    m: usize,
    rng: &mut Stream,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    // Half the instances use dyadic values, so Y often lands exactly on 1.
    let dyadic = rng.random_bool(0.5);
    let mut draw = |scale: f64, zero_p: f64| -> f64 {
        if rng.random_bool(zero_p) {
            0.0
        } else if dyadic {
            f64::from(rng.random_range(1..=8u32)) * scale / 8.0
        } else {
            rng.random::<f64>() * scale
        }
    };
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| draw(3.0, 0.2)).collect())
        .collect();
    let l: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| if i == k { 0.0 } else { draw(1.0, 0.3) })
                .collect()
        })
        .collect();
    let v: Vec<f64> = (0..m)
        .map(|_| draw(1.5, 0.1) - 0.5)
        .map(|t| t.min(1.0))
        .collect();
    (x, l, v)
}

fn criterion_1() -> Verdict {
    let mut rng = Stream::seed_from_u64(1);
    let mut mismatches = 0;
    let mut multi = 0;
    let mut checked = 0;
    for n in 2..=4 {
        for _ in 0..1000 {
            let m = rng.random_range(1..=3);
            let (x, l, v) = random_instance(n, m, &mut rng);
            let fixed = oracle_fixed_points(&x, &l, &v);
            let sys = ExposureSystem::new(
                Matrix::from_rows(x.clone()).unwrap(),
                Matrix::from_rows(l.clone()).unwrap(),
            )
            .unwrap();
            let lv = LossVector::new(v.clone()).unwrap();
            let lfp = cascade_lfp(&sys, &lv).unwrap();
            let gfp = cascade_gfp(&sys, &lv).unwrap();
            // Least and greatest in the componentwise order.
            let below_all =
                |f: &[bool]| fixed.iter().all(|g| f.iter().zip(g).all(|(a, b)| !a || *b));
            let above_all =
                |f: &[bool]| fixed.iter().all(|g| f.iter().zip(g).all(|(a, b)| *a || !b));
            let ok = fixed.iter().any(|f| f.as_slice() == lfp.as_slice())
                && fixed.iter().any(|f| f.as_slice() == gfp.as_slice())
                && below_all(lfp.as_slice())
                && above_all(gfp.as_slice());
            if !ok {
                mismatches += 1;
            }
            if lfp != gfp {
                multi += 1;
            }
            checked += 1;
        }
    }
    Verdict::new(
        mismatches == 0,
        format!("{checked} instances, {mismatches} mismatches, {multi} with lfp != gfp"),
    )
}

// ---------------------------------------------------------------------------
// 2. Portfolio generator fidelity
// ---------------------------------------------------------------------------

fn pairwise_distance(w: &Matrix) -> f64 {
    let n = w.rows();
    let mut total = 0.0;
    for i in 0..n {
        for l in 0..n {
            total += (0..w.cols())
                .map(|j| (w.get(i, j) - w.get(l, j)).abs())
                .sum::<f64>();
        }
    }
    total / (2.0 * (n * (n - 1)) as f64)
}

fn criterion_2() -> Verdict {
    let generator = PortfolioGenerator::default();
    let mut failures = 0;
    let mut worst_d = 0.0f64;
    let mut worst_row = 0.0f64;
    let mut errors = 0;
    for n in 2..=10 {
        for di in 0..10 {
            let d = di as f64 / 10.0;
            for trial in 0..100 {
                let mut rng = derive_stream(MASTER_SEED, n, di, trial, StreamRole::Portfolio);
                let w = match generator.generate(n, d, &mut rng) {
                    Ok(w) => w,
                    Err(_) => {
                        errors += 1;
                        continue;
                    }
                };
                let row_err = (0..n)
                    .map(|i| (w.row(i).iter().sum::<f64>() - 1.0).abs())
                    .fold(0.0, f64::max);
                let d_err = (pairwise_distance(&w) - d).abs();
                let nonneg = w.iter_rows().flatten().all(|&x| x >= 0.0);
                worst_row = worst_row.max(row_err);
                worst_d = worst_d.max(d_err);
                if row_err > 1e-12 || d_err > 1e-9 || !nonneg {
                    failures += 1;
                }
            }
        }
    }
    Verdict::new(
        failures == 0 && errors == 0,
        format!(
            "9000 matrices, {failures} out of tolerance, {errors} generation errors, \
             max row-sum error {worst_row:.1e}, max distance error {worst_d:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Loss calibration
// ---------------------------------------------------------------------------

fn criterion_3() -> Verdict {
    let draws = 1_000_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (eta, q)) in [(0.05, 0.05), (0.1, 0.01)].into_iter().enumerate() {
        let model = LossModel::student_t(q, eta, 1.5).unwrap();
        let mut rng = Stream::seed_from_u64(300 + k as u64);
        let hits = (0..draws)
            .filter(|_| model.sample_loss(&mut rng) >= eta)
            .count();
        let rate = hits as f64 / draws as f64;
        let tol = 3.0 * (q * (1.0 - q) / draws as f64).sqrt();
        pass &= (rate - q).abs() <= tol;
        parts.push(format!("(η={eta}, q={q}): {rate:.5} ± {tol:.5}"));
    }
    Verdict::new(pass, parts.join(", "))
}

// ---------------------------------------------------------------------------
// 4-6, 9. Desk-scale sweeps
// ---------------------------------------------------------------------------

fn desk_config(law: &str, q: f64) -> SweepConfig {
    let params = ModelParams {
        q,
        ..ModelParams::default()
    };
    let d_grid = (0..=10).map(|i| f64::from(i) / 10.0).collect();
    let mut cfg = SweepConfig::new(params.clone(), vec![0.0, 1.0], d_grid).unwrap();
    cfg.loss_law = loss_laws().get(law).unwrap()(params.df).unwrap();
    cfg.master_seed = MASTER_SEED;
    cfg
}

struct DeskRun {
    label: String,
    cfg: SweepConfig,
    table: SweepTable,
}

impl DeskRun {
    fn new(law: &str, q: f64) -> Self {
        let cfg = desk_config(law, q);
        let table = sweep(&cfg).unwrap();
        DeskRun {
            label: format!("{law}, q={q}"),
            cfg,
            table,
        }
    }

    fn d_opt_zero(&self) -> Verdict {
        let d_opt = find_d_opt(&self.table, 0.0, 1.0).unwrap();
        let row = |d: f64| self.table.row(0.0, d, 1.0).unwrap();
        Verdict::new(
            d_opt == 0.0,
            format!(
                "[{}] D_opt = {d_opt}; cost(d=0) = {:.4} ± {:.4}, cost(d=0.1) = {:.4} ± {:.4}",
                self.label,
                row(0.0).mean_cost,
                row(0.0).std_err,
                row(0.1).mean_cost,
                row(0.1).std_err
            ),
        )
    }

    fn initial_increase(&self) -> Verdict {
        let d1 = self.cfg.d_grid[1];
        let mut pass = true;
        let mut parts = Vec::new();
        for &s in &self.cfg.params.s_list {
            let a = self.table.row(1.0, 0.0, s).unwrap();
            let b = self.table.row(1.0, d1, s).unwrap();
            let margin = (b.mean_cost - a.mean_cost) / a.std_err.hypot(b.std_err);
            pass &= margin > 2.0;
            parts.push(format!("S={s}: {margin:.1}σ"));
        }
        Verdict::new(
            pass,
            format!("[{}] d={d1} vs d=0: {}", self.label, parts.join(", ")),
        )
    }

    fn lockstep(&self) -> Verdict {
        let model = self.cfg.loss_model().unwrap();
        let n = self.cfg.params.n_banks;
        let pi = 1;
        let mut seen = BTreeSet::new();
        let mut samples = 0;
        for trial in 0..self.cfg.n_trials {
            let sys = self.cfg.trial_system(pi, 0, trial).unwrap();
            let mut rng = derive_stream(self.cfg.master_seed, pi, 0, trial, StreamRole::Losses);
            for o in sample_outcomes(&sys, &model, self.cfg.n_samples, &mut rng) {
                seen.insert(o.failed);
                samples += 1;
            }
        }
        let pass = samples >= 100_000 && seen.iter().all(|&k| k == 0 || k == n);
        Verdict::new(
            pass,
            format!("[{}] {samples} samples, K values {seen:?}", self.label),
        )
    }

    fn verdicts(&self) -> [Verdict; 3] {
        [self.d_opt_zero(), self.initial_increase(), self.lockstep()]
    }
}

// ---------------------------------------------------------------------------
// 7. Multiple-behavior accounting
// ---------------------------------------------------------------------------

fn criterion_7() -> Verdict {
    let two = ExposureSystem::new(
        Matrix::from_rows(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap(),
        Matrix::from_rows(vec![vec![0.0, 0.6], vec![0.6, 0.0]]).unwrap(),
    )
    .unwrap();
    let grid = GridSpec::uniform(2, -0.5, 1.0, 400);
    let c2 = census(&two, &grid, DEFAULT_CENSUS_BUDGET).unwrap();

    let bound = multi_behavior_bound(3) as usize;
    let mut rng = Stream::seed_from_u64(7);
    let mut worst = 0;
    let mut with_multi = 0;
    let grid3 = GridSpec::uniform(2, -0.5, 1.0, 200);
    for _ in 0..100 {
        let x: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(0.0..3.0)).collect())
            .collect();
        let l: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|k| {
                        if i == k {
                            0.0
                        } else {
                            rng.random_range(0.0..1.2)
                        }
                    })
                    .collect()
            })
            .collect();
        let sys = ExposureSystem::new(Matrix::from_rows(x).unwrap(), Matrix::from_rows(l).unwrap())
            .unwrap();
        let c = census(&sys, &grid3, DEFAULT_CENSUS_BUDGET).unwrap();
        worst = worst.max(c.n_multi);
        with_multi += usize::from(c.n_multi > 0);
    }
    Verdict::new(
        c2.n_multi == 1 && worst <= bound,
        format!(
            "two-bank example: {} multi-behavior signature(s) of {}; \
             three-bank: max {worst} (bound {bound}), {with_multi}/100 systems have any",
            c2.n_multi,
            c2.n_signatures()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Determinism across thread counts
// ---------------------------------------------------------------------------

fn criterion_8() -> Verdict {
    let run = |threads: usize| {
        let mut cfg = SweepConfig::new(
            ModelParams::default(),
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.5, 0.9],
        )
        .unwrap();
        cfg.n_trials = 20;
        cfg.n_samples = 500;
        cfg.master_seed = MASTER_SEED;
        cfg.threads = threads;
        format_sweep_csv(&sweep(&cfg).unwrap())
    };
    let single = run(1);
    let multi = run(4);
    Verdict::new(
        single == multi,
        format!(
            "1 vs 4 threads, {} bytes, identical = {}",
            single.len(),
            single == multi
        ),
    )
}

fn report(results: &mut Vec<bool>, id: usize, v: Verdict, started: Instant) {
    let status = if v.pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {id}: {status} ({:.1}s) {}",
        started.elapsed().as_secs_f64(),
        v.detail
    );
    results.push(v.pass);
}

fn main() {
    let mut results = Vec::new();

    let t = Instant::now();
    report(&mut results, 1, criterion_1(), t);
    let t = Instant::now();
    report(&mut results, 2, criterion_2(), t);
    let t = Instant::now();
    report(&mut results, 3, criterion_3(), t);

    let t = Instant::now();
    let default_run = DeskRun::new("student_t", ModelParams::default().q);
    let [c4, c5, c6] = default_run.verdicts();
    report(&mut results, 4, c4, t);
    report(&mut results, 5, c5, t);
    report(&mut results, 6, c6, t);

    let t = Instant::now();
    report(&mut results, 7, criterion_7(), t);
    let t = Instant::now();
    report(&mut results, 8, criterion_8(), t);

    let t = Instant::now();
    let shared_q = 0.2;
    let runs: Vec<(String, Vec<bool>, Vec<String>)> = ["student_t", "normal"]
        .into_iter()
        .map(|law| {
            let run = DeskRun::new(law, shared_q);
            let vs = run.verdicts();
            (
                law.to_string(),
                vs.iter().map(|v| v.pass).collect(),
                vs.into_iter().map(|v| v.detail).collect(),
            )
        })
        .collect();
    let identical = runs[0].1 == runs[1].1;
    let all_pass = runs.iter().all(|(_, p, _)| p.iter().all(|&x| x));
    let mut detail = String::new();
    for (law, passes, details) in &runs {
        let held = passes.iter().filter(|&&p| p).count();
        detail.push_str(&format!("\n    {law}: criteria 4-6 held {held}/3"));
        for d in details {
            detail.push_str(&format!("\n      {d}"));
        }
    }
    report(
        &mut results,
        9,
        Verdict::new(
            identical && all_pass,
            format!("verdicts identical = {identical}{detail}"),
        ),
        t,
    );

    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
