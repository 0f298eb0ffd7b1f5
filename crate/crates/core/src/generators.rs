//! Random system construction: Erdős–Rényi lending networks, interbank
//! allocation as a function of connectivity, and square portfolio matrices
//! with a prescribed diversification distance.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::model::{ExposureSystem, Matrix};
use crate::registry::Registry;

/// Row sums of a portfolio-weight matrix must be 1 within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Achieved diversification must match the target within this tolerance.
pub const DIVERSIFICATION_TOL: f64 = 1e-9;
/// Entries this close below zero are rounding noise and are clamped.
const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightShape {
    Linear,
}

impl FromStr for WeightShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(WeightShape::Linear),
            other => Err(Error::UnknownStrategy {
                kind: "weight shape",
                name: other.to_string(),
                known: "linear".into(),
            }),
        }
    }
}

impl fmt::Display for WeightShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightShape::Linear => f.write_str("linear"),
        }
    }
}

/// Fraction of total assets a connected bank lends out at connectivity `p`.
pub fn interbank_weight(p: f64, w_max: f64, shape: WeightShape) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} not in [0, 1]")));
    }
    if !(0.0..1.0).contains(&w_max) {
        return Err(Error::param("w_max", format!("{w_max} not in [0, 1)")));
    }
    match shape {
        WeightShape::Linear => Ok(w_max * p),
    }
}

/// Directed lending graph; `adj(i, j)` means bank `i` lends to bank `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    adj: Vec<bool>,
}

impl DirectedGraph {
    pub fn empty(n: usize) -> Self {
        DirectedGraph {
            n,
            adj: vec![false; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = DirectedGraph::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::param(
                    "edge",
                    format!("({i}, {j}) is out of range or a self-loop"),
                ));
            }
            g.adj[i * n + j] = true;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_link(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.adj[i * self.n..(i + 1) * self.n]
            .iter()
            .filter(|&&a| a)
            .count()
    }

    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_link(i, j))
    }

    pub fn link_count(&self) -> usize {
        self.adj.iter().filter(|&&a| a).count()
    }
}

/// Each ordered pair `(i, j)`, `i ≠ j`, is linked independently with probability `p`.
pub fn gen_er_network<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<DirectedGraph> {
    if n == 0 {
        return Err(Error::param("n", "at least one bank is required"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} not in [0, 1]")));
    }
    let mut g = DirectedGraph::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                g.adj[i * n + j] = true;
            }
        }
    }
    Ok(g)
}

fn check_stochastic(weights: &Matrix) -> Result<()> {
    if weights.rows() == 0 || weights.cols() == 0 {
        return Err(Error::param("portfolio_weights", "matrix is empty"));
    }
    for (i, row) in weights.iter_rows().enumerate() {
        if let Some(w) = row.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::param(
                "portfolio_weights",
                format!("row {i} has entry {w}"),
            ));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::param(
                "portfolio_weights",
                format!("row {i} sums to {sum}, not 1"),
            ));
        }
    }
    Ok(())
}

/// Turns a network, an interbank share `w` and normalized portfolios into
/// balance sheets worth `1/eta` capital buffers each. Lenders split `w/eta`
/// equally over their out-neighbors; isolated banks hold external assets only.
pub fn build_exposures(
    g: &DirectedGraph,
    w: f64,
    eta: f64,
    portfolio_weights: &Matrix,
) -> Result<ExposureSystem> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::param("w", format!("{w} not in [0, 1)")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param("eta", format!("{eta} not in (0, 1)")));
    }
    if portfolio_weights.rows() != g.n() {
        return Err(Error::Dimension {
            context: "portfolio weights",
            expected: g.n(),
            actual: portfolio_weights.rows(),
        });
    }
    check_stochastic(portfolio_weights)?;

    let n = g.n();
    let mut x = portfolio_weights.clone();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        let degree = g.out_degree(i);
        let external = if degree > 0 {
            let per_loan = (w / eta) / degree as f64;
            for j in g.out_neighbors(i) {
                l.set(i, j, per_loan);
            }
            (1.0 - w) / eta
        } else {
            1.0 / eta
        };
        x.row_mut(i).iter_mut().for_each(|v| *v *= external);
    }
    ExposureSystem::new(x, l)
}

/// Mean L1 distance over unordered row pairs, halved; no normalization.
fn half_mean_pairwise_l1(rows: &Matrix) -> f64 {
    let n = rows.rows();
    let mut total = 0.0;
    for i in 0..n {
        for l in (i + 1)..n {
            total += rows
                .row(i)
                .iter()
                .zip(rows.row(l))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        }
    }
    // Σ over ordered pairs is twice the unordered sum, so
    // 1/(2N(N-1)) · 2·total = total / (N(N-1)).
    total / (n * (n - 1)) as f64
}

/// Diversification distance of normalized portfolios: 0 when every bank
/// holds the same mix, 1 when no two banks share an asset.
pub fn diversification(portfolio_weights: &Matrix) -> Result<f64> {
    check_stochastic(portfolio_weights)?;
    if portfolio_weights.rows() < 2 {
        return Err(Error::param(
            "portfolio_weights",
            "at least two banks are required",
        ));
    }
    Ok(half_mean_pairwise_l1(portfolio_weights))
}

/// A point drawn uniformly from the simplex (normalized exponentials).
pub fn gen_seed<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::param("n", "seed needs at least two assets"));
    }
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    Ok(draws.into_iter().map(|e| e / total).collect())
}

/// Row `k` is `seed + p` cyclically shifted by `k`, where
/// `p = (eps[0], -eps[1], ..., -eps[n-1])`, so `+eps[0]` lands on column `k`.
pub fn perturbed_rows(seed: &[f64], eps: &[f64]) -> Result<Matrix> {
    let n = seed.len();
    if eps.len() != n {
        return Err(Error::Dimension {
            context: "perturbation vector",
            expected: n,
            actual: eps.len(),
        });
    }
    let mut m = Matrix::zeros(n, n);
    for k in 0..n {
        for (j, s) in seed.iter().enumerate() {
            let idx = (j + n - k) % n;
            let delta = if idx == 0 { eps[0] } else { -eps[idx] };
            m.set(k, j, s + delta);
        }
    }
    Ok(m)
}

/// Sorts `raw` descending into `eps[1..]`, sets `eps[0]` to their sum, and
/// scales everything so the perturbed matrix has diversification `d_target`.
/// The distance is linear in the common scale once order and signs are fixed,
/// so one unit-scale measurement gives the factor.
pub fn scale_epsilons(raw: &[f64], d_target: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&d_target) {
        return Err(Error::param(
            "d_target",
            format!("{d_target} not in [0, 1]"),
        ));
    }
    if raw.is_empty() {
        return Err(Error::param("raw", "need at least one perturbation"));
    }
    if let Some(r) = raw.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::param("raw", format!("{r} is not positive")));
    }
    let n = raw.len() + 1;
    if d_target == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut tail = raw.to_vec();
    tail.sort_by(|a, b| b.total_cmp(a));
    let mut eps = Vec::with_capacity(n);
    eps.push(tail.iter().sum());
    eps.extend(tail);

    let unit = half_mean_pairwise_l1(&perturbed_rows(&vec![0.0; n], &eps)?);
    let factor = d_target / unit;
    eps.iter_mut().for_each(|e| *e *= factor);
    Ok(eps)
}

/// How the seed and the raw perturbation draws are pulled toward uniformity
/// as the diversification target grows. A larger seed blend raises the
/// smallest seed weight; a larger epsilon floor evens out the perturbations.
pub trait ShapingSchedule: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    /// Weight of the uniform vector when blending the seed, in `[0, 1]`.
    fn seed_blend(&self, d_target: f64) -> f64;
    /// Lower bound of the raw perturbation draws, in `[0, 1]`.
    fn epsilon_floor(&self, d_target: f64) -> f64;
}

/// Seed law held fixed across targets: the seed is blended toward uniform
/// with weight `max(base, d)` and perturbation draws are floored at
/// `d / blend`. Up to `d = base` every target shares one seed law, so cells
/// differ only in the perturbation. Smallest seed weight times evenness of
/// the perturbations is at least `d`, so every target is feasible.
#[derive(Debug)]
pub struct PinnedShaping {
    pub base: f64,
}

impl Default for PinnedShaping {
    fn default() -> Self {
        PinnedShaping { base: 0.9 }
    }
}

impl ShapingSchedule for PinnedShaping {
    fn name(&self) -> &'static str {
        "pinned"
    }

    fn seed_blend(&self, d_target: f64) -> f64 {
        self.base.max(d_target)
    }

    fn epsilon_floor(&self, d_target: f64) -> f64 {
        let blend = self.seed_blend(d_target);
        if blend > 0.0 {
            (d_target / blend).min(1.0)
        } else {
            1.0
        }
    }
}

/// Seed blend and epsilon floor both `sqrt(d)`. Their product bounds the
/// reachable distance from below, so every target in `[0, 1]` is feasible.
#[derive(Debug, Default)]
pub struct SqrtShaping;

impl ShapingSchedule for SqrtShaping {
    fn name(&self) -> &'static str {
        "sqrt"
    }

    fn seed_blend(&self, d_target: f64) -> f64 {
        d_target.sqrt()
    }

    fn epsilon_floor(&self, d_target: f64) -> f64 {
        d_target.sqrt()
    }
}

/// Seed blended linearly from `start` (weight 0) up to `d = 1` (weight 1);
/// perturbations untouched.
#[derive(Debug)]
pub struct ThresholdShaping {
    pub start: f64,
}

impl Default for ThresholdShaping {
    fn default() -> Self {
        ThresholdShaping { start: 0.8 }
    }
}

impl ShapingSchedule for ThresholdShaping {
    fn name(&self) -> &'static str {
        "threshold"
    }

    fn seed_blend(&self, d_target: f64) -> f64 {
        if d_target <= self.start {
            0.0
        } else {
            ((d_target - self.start) / (1.0 - self.start)).min(1.0)
        }
    }

    fn epsilon_floor(&self, _: f64) -> f64 {
        0.0
    }
}

/// Plain rejection sampling.
#[derive(Debug, Default)]
pub struct NoShaping;

impl ShapingSchedule for NoShaping {
    fn name(&self) -> &'static str {
        "none"
    }

    fn seed_blend(&self, _: f64) -> f64 {
        0.0
    }

    fn epsilon_floor(&self, _: f64) -> f64 {
        0.0
    }
}

/// Builds a schedule; `base` is the pinned seed blend and is ignored by the
/// other schedules.
pub type ShapingFactory = fn(base: f64) -> Arc<dyn ShapingSchedule>;

pub fn shaping_schedules() -> Registry<ShapingFactory> {
    let mut reg: Registry<ShapingFactory> = Registry::new("shaping schedule");
    reg.register("pinned", |base| Arc::new(PinnedShaping { base }));
    reg.register("sqrt", |_| Arc::new(SqrtShaping));
    reg.register("threshold", |_| Arc::new(ThresholdShaping::default()));
    reg.register("none", |_| Arc::new(NoShaping));
    reg
}

pub const DEFAULT_MAX_RETRIES: usize = 10_000;

/// Square portfolio generator: a random seed mix plus a cyclic zero-sum
/// perturbation, redrawn until every weight is non-negative.
#[derive(Debug, Clone)]
pub struct PortfolioGenerator {
    schedule: Arc<dyn ShapingSchedule>,
    max_retries: usize,
}

impl Default for PortfolioGenerator {
    fn default() -> Self {
        PortfolioGenerator::new(Arc::new(PinnedShaping::default()), DEFAULT_MAX_RETRIES)
    }
}

impl PortfolioGenerator {
    pub fn new(schedule: Arc<dyn ShapingSchedule>, max_retries: usize) -> Self {
        PortfolioGenerator {
            schedule,
            max_retries,
        }
    }

    pub fn schedule(&self) -> &dyn ShapingSchedule {
        self.schedule.as_ref()
    }

    pub fn generate(&self, n: usize, d_target: f64, rng: &mut dyn RngCore) -> Result<Matrix> {
        if n < 2 {
            return Err(Error::param("n", "portfolio generation needs n ≥ 2"));
        }
        if !(0.0..=1.0).contains(&d_target) {
            return Err(Error::param(
                "d_target",
                format!("{d_target} not in [0, 1]"),
            ));
        }
        let blend = self.schedule.seed_blend(d_target).clamp(0.0, 1.0);
        let floor = self.schedule.epsilon_floor(d_target).clamp(0.0, 1.0);
        let uniform = 1.0 / n as f64;

        for _ in 0..self.max_retries {
            let seed: Vec<f64> = gen_seed(n, rng)?
                .into_iter()
                .map(|s| (1.0 - blend) * s + blend * uniform)
                .collect();
            let raw: Vec<f64> = (0..n - 1)
                .map(|_| floor + (1.0 - floor) * (1.0 - rng.random::<f64>()))
                .collect();
            let eps = scale_epsilons(&raw, d_target)?;
            let mut m = perturbed_rows(&seed, &eps)?;
            if accept(&mut m, d_target) {
                return Ok(m);
            }
        }
        Err(Error::RetriesExhausted {
            attempts: self.max_retries,
            d_target,
        })
    }
}

/// Clamps rounding noise below zero and checks the achieved distance.
fn accept(m: &mut Matrix, d_target: f64) -> bool {
    for i in 0..m.rows() {
        for v in m.row_mut(i) {
            if *v < -CLAMP_TOL {
                return false;
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    diversification(m).is_ok_and(|d| (d - d_target).abs() <= DIVERSIFICATION_TOL)
}

/// `n×n` portfolios at distance `d_target` with the default schedule.
pub fn gen_portfolios<R: RngCore>(
    n: usize,
    d_target: f64,
    rng: &mut R,
    max_retries: usize,
) -> Result<Matrix> {
    PortfolioGenerator::new(Arc::new(PinnedShaping::default()), max_retries)
        .generate(n, d_target, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn er_extremes() {
        let mut r = rng(1);
        assert_eq!(gen_er_network(6, 0.0, &mut r).unwrap().link_count(), 0);
        let full = gen_er_network(6, 1.0, &mut r).unwrap();
        assert_eq!(full.link_count(), 30);
        assert!((0..6).all(|i| !full.has_link(i, i)));
        assert!(gen_er_network(6, 1.1, &mut r).is_err());
        assert!(gen_er_network(6, -0.1, &mut r).is_err());
        assert!(gen_er_network(0, 0.5, &mut r).is_err());
    }

    #[test]
    fn weight_examples() {
        let lin = WeightShape::Linear;
        assert_eq!(interbank_weight(0.0, 0.2, lin).unwrap(), 0.0);
        assert_eq!(interbank_weight(1.0, 0.2, lin).unwrap(), 0.2);
        assert!((interbank_weight(0.5, 0.2, lin).unwrap() - 0.1).abs() < 1e-15);
        assert!("logistic".parse::<WeightShape>().is_err());
        assert_eq!("linear".parse::<WeightShape>().unwrap(), lin);
    }

    #[test]
    fn exposure_examples() {
        let eta = 0.05;
        let g = DirectedGraph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let weights = Matrix::from_rows(vec![vec![0.5, 0.5]; 3]).unwrap();
        let sys = build_exposures(&g, 0.1, eta, &weights).unwrap();
        assert!((sys.loans().get(0, 1) - 1.0).abs() < 1e-12);
        assert!((sys.loans().get(0, 2) - 1.0).abs() < 1e-12);
        assert!((sys.holdings().row_sum(0) - 18.0).abs() < 1e-12);
        // banks 1 and 2 lend to nobody
        assert_eq!(sys.loans().row_sum(1), 0.0);
        assert!((sys.holdings().row_sum(1) - 20.0).abs() < 1e-12);
        sys.check_balance(eta).unwrap();

        let sys = build_exposures(&g, 0.0, eta, &weights).unwrap();
        assert!(sys.loans().iter_rows().all(|r| r.iter().all(|v| *v == 0.0)));
        assert!((sys.holdings().row_sum(0) - 20.0).abs() < 1e-12);

        assert!(build_exposures(&g, 1.0, eta, &weights).is_err());
        let ragged = Matrix::from_rows(vec![vec![0.6, 0.6]; 3]).unwrap();
        assert!(build_exposures(&g, 0.1, eta, &ragged).is_err());
    }

    #[test]
    fn diversification_examples() {
        let same = Matrix::from_rows(vec![vec![0.2, 0.3, 0.5]; 4]).unwrap();
        assert_eq!(diversification(&same).unwrap(), 0.0);
        assert!((diversification(&Matrix::identity(5)).unwrap() - 1.0).abs() < 1e-15);
        let pair = Matrix::from_rows(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        assert!((diversification(&pair).unwrap() - 0.2).abs() < 1e-15);
        let bad = Matrix::from_rows(vec![vec![0.6, 0.6], vec![0.4, 0.6]]).unwrap();
        assert!(diversification(&bad).is_err());
    }

    #[test]
    fn seed_on_simplex() {
        let mut r = rng(3);
        for n in 2..12 {
            let s = gen_seed(n, &mut r).unwrap();
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.iter().all(|v| *v >= 0.0));
        }
        assert!(gen_seed(1, &mut r).is_err());
    }

    #[test]
    fn epsilon_scaling() {
        let eps = scale_epsilons(&[0.1], 0.4).unwrap();
        assert!((eps[1] - 0.2).abs() < 1e-15 && (eps[0] - 0.2).abs() < 1e-15);
        assert_eq!(scale_epsilons(&[0.3, 0.1], 0.0).unwrap(), vec![0.0; 3]);

        let raw = [0.9, 0.2, 0.5, 0.7];
        let a = scale_epsilons(&raw, 0.3).unwrap();
        let b = scale_epsilons(&raw, 0.6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-15);
        }
        assert!(a[1..].windows(2).all(|w| w[0] >= w[1]));
        assert!((a[0] - a[1..].iter().sum::<f64>()).abs() < 1e-15);
        assert!(scale_epsilons(&[0.0, 0.1], 0.3).is_err());
        assert!(scale_epsilons(&[0.1], 1.1).is_err());
    }

    #[test]
    fn portfolio_examples() {
        let mut r = rng(5);
        let m = gen_portfolios(4, 0.0, &mut r, 10).unwrap();
        assert!(m.iter_rows().all(|row| row == m.row(0)));

        let m = gen_portfolios(2, 1.0, &mut r, 10).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

        let m = gen_portfolios(10, 1.0, &mut r, 10).unwrap();
        assert!((diversification(&m).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exhausted_retries_report_attempts() {
        let gen = PortfolioGenerator::new(Arc::new(NoShaping), 25);
        let err = gen.generate(10, 0.9, &mut rng(9)).unwrap_err();
        match err {
            Error::RetriesExhausted { attempts, .. } => assert_eq!(attempts, 25),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn threshold_schedule() {
        let t = ThresholdShaping::default();
        assert_eq!(t.seed_blend(0.5), 0.0);
        assert!((t.seed_blend(0.9) - 0.5).abs() < 1e-12);
        assert_eq!(t.seed_blend(1.0), 1.0);
        assert_eq!(
            shaping_schedules().names(),
            vec!["none", "pinned", "sqrt", "threshold"]
        );
    }
}
