//! Balance-sheet data model and the threshold-cascade fixed-point solver.
//!
//! A bank's asset-side loss, in units of its own capital buffer, is
//! `Y = X·V + L·F`: the external-asset loss plus the full face value of every
//! loan to a failed counterparty. A bank fails when `Y ≥ 1`. Iterating the
//! failure map from all-solvent gives the least fixed point; from all-failed,
//! the greatest. The map is monotone in `F`, so both iterations settle within
//! `N + 1` steps.

use std::fmt;

use crate::error::{Error, Result};
use crate::generators::WeightShape;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from nested rows, rejecting ragged input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::Dimension {
                    context: "matrix row length",
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }
}

/// Scalar knobs shared by every command.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n_banks: usize,
    pub n_assets: usize,
    /// Capital buffer as a fraction of total assets.
    pub eta: f64,
    /// Failure probability of a bank holding a single asset.
    pub q: f64,
    /// Interbank share of total assets on a complete network.
    pub w_max: f64,
    pub weight_shape: WeightShape,
    /// Degrees of freedom of the Student-t log-return law.
    pub df: f64,
    /// Cost exponents.
    pub s_list: Vec<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n_banks: 10,
            n_assets: 10,
            eta: 0.05,
            q: 0.05,
            w_max: 0.2,
            weight_shape: WeightShape::Linear,
            df: 1.5,
            s_list: vec![1.0, 2.0, 3.0, 4.0],
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_banks == 0 {
            return Err(Error::param("n_banks", "must be positive"));
        }
        if self.n_banks > 64 {
            return Err(Error::param("n_banks", "at most 64 banks are supported"));
        }
        if self.n_assets == 0 {
            return Err(Error::param("n_assets", "must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::param("eta", format!("{} not in (0, 1)", self.eta)));
        }
        if !(self.q > 0.0 && self.q < 0.5) {
            return Err(Error::param("q", format!("{} not in (0, 0.5)", self.q)));
        }
        if !(self.w_max >= 0.0 && self.w_max < 1.0) {
            return Err(Error::param(
                "w_max",
                format!("{} not in [0, 1)", self.w_max),
            ));
        }
        if !(self.df > 0.0 && self.df.is_finite()) {
            return Err(Error::param(
                "df",
                format!("{} is not a positive real", self.df),
            ));
        }
        if self.s_list.is_empty() {
            return Err(Error::param("s_list", "must not be empty"));
        }
        if let Some(s) = self.s_list.iter().find(|s| !(**s >= 1.0 && s.is_finite())) {
            return Err(Error::param("s_list", format!("exponent {s} is below 1")));
        }
        if self.s_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("s_list", "must be strictly increasing"));
        }
        Ok(())
    }
}

/// External holdings `X` (N×M) and interbank loans `L` (N×N), both in units
/// of the holder's capital buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSystem {
    x: Matrix,
    l: Matrix,
}

impl ExposureSystem {
    pub fn new(x: Matrix, l: Matrix) -> Result<Self> {
        let n = x.rows();
        if l.rows() != n || l.cols() != n {
            return Err(Error::Dimension {
                context: "interbank matrix",
                expected: n,
                actual: if l.rows() != n { l.rows() } else { l.cols() },
            });
        }
        if n == 0 {
            return Err(Error::InvalidSystem("no banks".into()));
        }
        if let Some(bad) = x.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidSystem(format!(
                "holding {bad} is negative or non-finite"
            )));
        }
        if let Some(bad) = l.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidSystem(format!(
                "loan {bad} is negative or non-finite"
            )));
        }
        if let Some(i) = (0..n).find(|&i| l.get(i, i) != 0.0) {
            return Err(Error::InvalidSystem(format!("bank {i} lends to itself")));
        }
        Ok(ExposureSystem { x, l })
    }

    pub fn n_banks(&self) -> usize {
        self.x.rows()
    }

    pub fn n_assets(&self) -> usize {
        self.x.cols()
    }

    pub fn holdings(&self) -> &Matrix {
        &self.x
    }

    pub fn loans(&self) -> &Matrix {
        &self.l
    }

    /// Largest deviation of a bank's total assets from `1/eta` buffers.
    pub fn balance_error(&self, eta: f64) -> f64 {
        (0..self.n_banks())
            .map(|i| (self.x.row_sum(i) + self.l.row_sum(i) - 1.0 / eta).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_balance(&self, eta: f64) -> Result<()> {
        let err = self.balance_error(eta);
        if err > 1e-9 {
            return Err(Error::InvalidSystem(format!(
                "asset side does not total 1/eta (max deviation {err:e})"
            )));
        }
        Ok(())
    }

    fn check_losses(&self, v: &LossVector) -> Result<()> {
        if v.len() != self.n_assets() {
            return Err(Error::Dimension {
                context: "loss vector",
                expected: self.n_assets(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    fn check_state(&self, f: &BankState) -> Result<()> {
        if f.len() != self.n_banks() {
            return Err(Error::Dimension {
                context: "bank state",
                expected: self.n_banks(),
                actual: f.len(),
            });
        }
        Ok(())
    }

    /// External loss `X·V` per bank. Zero holdings contribute nothing even
    /// when the paired loss is an unbounded gain.
    pub(crate) fn external_losses(&self, v: &[f64]) -> Vec<f64> {
        self.x
            .iter_rows()
            .map(|row| {
                row.iter()
                    .zip(v)
                    .filter(|(x, _)| **x != 0.0)
                    .map(|(x, v)| x * v)
                    .sum()
            })
            .collect()
    }
}

/// Fractional value loss per asset; negative entries are gains.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if let Some(bad) = v.iter().find(|x| !(**x <= 1.0)) {
            return Err(Error::param("loss", format!("{bad} exceeds 1 or is NaN")));
        }
        Ok(LossVector(v))
    }

    pub(crate) fn from_unchecked(v: Vec<f64>) -> Self {
        LossVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Solvency vector; `true` marks a failed bank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BankState(Vec<bool>);

impl BankState {
    pub fn new(f: Vec<bool>) -> Self {
        BankState(f)
    }

    pub fn all_solvent(n: usize) -> Self {
        BankState(vec![false; n])
    }

    pub fn all_failed(n: usize) -> Self {
        BankState(vec![true; n])
    }

    /// Decodes the low `n` bits of `bits`, bit `i` being bank `i`.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        BankState((0..n).map(|i| bits >> i & 1 == 1).collect())
    }

    pub fn bits(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &f)| acc | (u64::from(f) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_failed(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn all(&self) -> bool {
        self.0.iter().all(|&f| f)
    }

    pub fn none(&self) -> bool {
        !self.0.iter().any(|&f| f)
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &BankState) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| !a || *b)
    }
}

impl fmt::Display for BankState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, &b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", u8::from(b))?;
        }
        write!(f, ")")
    }
}

/// Least and greatest fixed point at one loss vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionSignature {
    pub lfp: BankState,
    pub gfp: BankState,
}

impl RegionSignature {
    pub fn is_multi_behavior(&self) -> bool {
        self.lfp != self.gfp
    }
}

/// A fixed point together with the number of map applications it took,
/// counting the final application that confirmed it.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub state: BankState,
    pub iterations: usize,
}

/// `Y = X·V + L·F`.
pub fn asset_losses(sys: &ExposureSystem, v: &LossVector, f: &BankState) -> Result<Vec<f64>> {
    sys.check_losses(v)?;
    sys.check_state(f)?;
    let mut y = sys.external_losses(v.as_slice());
    add_interbank(sys, f.as_slice(), &mut y);
    Ok(y)
}

/// One application of the failure map: bank `i` fails iff `Y_i ≥ 1`.
pub fn step(sys: &ExposureSystem, v: &LossVector, f: &BankState) -> Result<BankState> {
    let y = asset_losses(sys, v, f)?;
    Ok(BankState(y.into_iter().map(|y| y >= 1.0).collect()))
}

pub fn cascade_lfp(sys: &ExposureSystem, v: &LossVector) -> Result<BankState> {
    Ok(solve_lfp(sys, v)?.state)
}

pub fn cascade_gfp(sys: &ExposureSystem, v: &LossVector) -> Result<BankState> {
    Ok(solve_gfp(sys, v)?.state)
}

/// Least fixed point, iterated from all-solvent.
pub fn solve_lfp(sys: &ExposureSystem, v: &LossVector) -> Result<FixedPoint> {
    sys.check_losses(v)?;
    let cascade = Cascade::new(sys, v.as_slice());
    Ok(cascade.iterate(vec![false; sys.n_banks()]))
}

/// Greatest fixed point, iterated from all-failed.
pub fn solve_gfp(sys: &ExposureSystem, v: &LossVector) -> Result<FixedPoint> {
    sys.check_losses(v)?;
    let cascade = Cascade::new(sys, v.as_slice());
    Ok(cascade.iterate(vec![true; sys.n_banks()]))
}

pub fn failure_count(f: &BankState) -> usize {
    f.as_slice().iter().filter(|&&b| b).count()
}

/// Social cost `K^S` of `K` simultaneous failures.
pub fn cost(k: usize, s: f64) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(Error::param("s", format!("cost exponent {s} is below 1")));
    }
    Ok(if k == 0 { 0.0 } else { (k as f64).powf(s) })
}

fn add_interbank(sys: &ExposureSystem, f: &[bool], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        *yi += sys
            .l
            .row(i)
            .iter()
            .zip(f)
            .filter(|(_, &failed)| failed)
            .map(|(l, _)| *l)
            .sum::<f64>();
    }
}

/// Solver with the external loss `X·V` computed once for a given `V`.
pub(crate) struct Cascade<'a> {
    sys: &'a ExposureSystem,
    external: Vec<f64>,
}

impl<'a> Cascade<'a> {
    pub(crate) fn new(sys: &'a ExposureSystem, v: &[f64]) -> Self {
        Cascade {
            sys,
            external: sys.external_losses(v),
        }
    }

    fn apply(&self, f: &[bool], out: &mut Vec<bool>) {
        out.clear();
        for (i, ext) in self.external.iter().enumerate() {
            let interbank: f64 = self
                .sys
                .l
                .row(i)
                .iter()
                .zip(f)
                .filter(|(_, &failed)| failed)
                .map(|(l, _)| *l)
                .sum();
            out.push(ext + interbank >= 1.0);
        }
    }

    pub(crate) fn iterate(&self, mut f: Vec<bool>) -> FixedPoint {
        let mut next = Vec::with_capacity(f.len());
        let mut iterations = 0;
        loop {
            self.apply(&f, &mut next);
            iterations += 1;
            if next == f {
                return FixedPoint {
                    state: BankState(f),
                    iterations,
                };
            }
            std::mem::swap(&mut f, &mut next);
        }
    }

    pub(crate) fn lfp(&self) -> BankState {
        self.iterate(vec![false; self.external.len()]).state
    }

    pub(crate) fn gfp(&self) -> BankState {
        self.iterate(vec![true; self.external.len()]).state
    }

    pub(crate) fn signature(&self) -> RegionSignature {
        RegionSignature {
            lfp: self.lfp(),
            gfp: self.gfp(),
        }
    }
}
