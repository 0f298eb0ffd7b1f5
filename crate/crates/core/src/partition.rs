//! Small-N analysis of how loss space splits into regions by final bank state.
//!
//! Each bank draws a hyperplane `X_i·v = 1 - (L·F)_i` in loss space; it is
//! shifted toward the origin for every failed counterparty. Where the
//! shifted pieces of two or more banks overlap, the final state depends on
//! the initial one: least and greatest fixed points differ there.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BankState, Cascade, ExposureSystem, LossVector, RegionSignature};
use crate::rng::Stream;

pub const DEFAULT_BOUNDS: (f64, f64) = (-0.5, 1.0);
pub const DEFAULT_RESOLUTION: usize = 400;
/// Default cap on `2^N · resolution^M` for a census.
pub const DEFAULT_CENSUS_BUDGET: u128 = 1 << 36;

pub fn classify_region(sys: &ExposureSystem, v: &LossVector) -> Result<RegionSignature> {
    if v.len() != sys.n_assets() {
        return Err(Error::Dimension {
            context: "loss vector",
            expected: sys.n_assets(),
            actual: v.len(),
        });
    }
    Ok(Cascade::new(sys, v.as_slice()).signature())
}

/// Regular grid of cell centers, `resolution` cells per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: usize,
}

impl GridSpec {
    pub fn uniform(dims: usize, lo: f64, hi: f64, resolution: usize) -> Self {
        GridSpec {
            lo: vec![lo; dims],
            hi: vec![hi; dims],
            resolution,
        }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn n_points(&self) -> u128 {
        (self.resolution as u128).pow(self.dims() as u32)
    }

    /// Center of the cell with linear index `index` (axis 0 fastest).
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        (0..self.dims())
            .map(|axis| {
                let cell = index % self.resolution;
                index /= self.resolution;
                let h = (self.hi[axis] - self.lo[axis]) / self.resolution as f64;
                self.lo[axis] + (cell as f64 + 0.5) * h
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(Error::param("bounds", "need one (lo, hi) pair per asset"));
        }
        if self.resolution == 0 {
            return Err(Error::param("resolution", "must be at least 1"));
        }
        if let Some(axis) = (0..self.dims()).find(|&a| !(self.lo[a] < self.hi[a])) {
            return Err(Error::param("bounds", format!("axis {axis} has lo ≥ hi")));
        }
        if let Some(x) = self.hi.iter().find(|h| **h > 1.0) {
            return Err(Error::param(
                "bounds",
                format!("upper bound {x} exceeds a total loss"),
            ));
        }
        Ok(())
    }
}

/// Occupancy of each region signature over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCensus {
    pub counts: BTreeMap<RegionSignature, usize>,
    pub n_multi: usize,
    pub grid: GridSpec,
}

impl RegionCensus {
    pub fn n_signatures(&self) -> usize {
        self.counts.len()
    }

    pub fn distinct_lfp(&self) -> usize {
        let mut lfps: Vec<_> = self.counts.keys().map(|s| &s.lfp).collect();
        lfps.dedup();
        lfps.len()
    }

    pub fn multi_signatures(&self) -> impl Iterator<Item = (&RegionSignature, &usize)> {
        self.counts.iter().filter(|(s, _)| s.is_multi_behavior())
    }
}

/// Classifies every grid point. Refuses grids whose `2^N · points` exceeds `budget`.
pub fn census(sys: &ExposureSystem, grid: &GridSpec, budget: u128) -> Result<RegionCensus> {
    grid.validate()?;
    if grid.dims() != sys.n_assets() {
        return Err(Error::Dimension {
            context: "census grid",
            expected: sys.n_assets(),
            actual: grid.dims(),
        });
    }
    let required = (1u128 << sys.n_banks()).saturating_mul(grid.n_points());
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let n_points = grid.n_points() as usize;
    let counts = (0..n_points)
        .into_par_iter()
        .fold(
            BTreeMap::new,
            |mut acc: BTreeMap<RegionSignature, usize>, i| {
                let sig = Cascade::new(sys, &grid.point(i)).signature();
                *acc.entry(sig).or_default() += 1;
                acc
            },
        )
        .reduce(BTreeMap::new, |mut a, b| {
            for (sig, c) in b {
                *a.entry(sig).or_default() += c;
            }
            a
        });
    let n_multi = counts.keys().filter(|s| s.is_multi_behavior()).count();
    Ok(RegionCensus {
        counts,
        n_multi,
        grid: grid.clone(),
    })
}

/// Upper bound on the number of multiple-behavior regions for `n` banks:
/// `Σ_{i=2}^{n} C(n, i)·2^(n-i)`.
pub fn multi_behavior_bound(n: u32) -> u128 {
    let mut binom: u128 = 1; // C(n, 0)
    let mut total = 0;
    for i in 1..=n {
        binom = binom * u128::from(n - i + 1) / u128::from(i);
        if i >= 2 {
            total += binom << (n - i);
        }
    }
    total
}

/// Ray search for a loss vector where all banks survive when started
/// solvent but all fail when started failed.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSearch {
    pub directions: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for WitnessSearch {
    fn default() -> Self {
        WitnessSearch {
            directions: 64,
            steps: 256,
            seed: 0,
        }
    }
}

impl WitnessSearch {
    /// Directions on the positive simplex: the centroid first, then evenly
    /// spaced points for two assets or random ones otherwise.
    fn directions(&self, m: usize) -> Vec<Vec<f64>> {
        let mut dirs = vec![vec![1.0 / m as f64; m]];
        let extra = self.directions.saturating_sub(1);
        if m == 2 {
            dirs.extend((0..extra).map(|k| {
                let a = (k as f64 + 0.5) / extra as f64;
                vec![a, 1.0 - a]
            }));
        } else if m > 2 {
            let mut rng = Stream::seed_from_u64(self.seed);
            dirs.extend((0..extra).map(|_| {
                let e: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = e.iter().sum();
                e.into_iter().map(|x| x / total).collect()
            }));
        }
        dirs
    }
}

/// First `v = t·u` found with least fixed point all-solvent and greatest
/// fixed point all-failed; `None` if the budget runs out.
pub fn find_all_fail_witness(sys: &ExposureSystem, search: &WitnessSearch) -> Option<LossVector> {
    let m = sys.n_assets();
    for u in search.directions(m) {
        let t_max = 1.0 / u.iter().copied().fold(f64::MIN, f64::max);
        for k in 1..=search.steps {
            let t = t_max * k as f64 / search.steps as f64;
            let v: Vec<f64> = u.iter().map(|x| (t * x).min(1.0)).collect();
            let sig = Cascade::new(sys, &v).signature();
            if sig.lfp.none() && sig.gfp.all() {
                return Some(LossVector::from_unchecked(v));
            }
        }
    }
    None
}

/// Axis-aligned clip rectangle for two-asset loss space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipRect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl ClipRect {
    pub fn square(lo: f64, hi: f64) -> Self {
        ClipRect {
            lo: [lo, lo],
            hi: [hi, hi],
        }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        const SLACK: f64 = 1e-12;
        (0..2).all(|a| p[a] >= self.lo[a] - SLACK && p[a] <= self.hi[a] + SLACK)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentGeometry {
    Clipped {
        from: [f64; 2],
        to: [f64; 2],
    },
    /// The line misses the clip rectangle.
    Outside,
    /// The bank holds no external assets; there is no hyperplane.
    Degenerate,
}

/// Failure boundary of one bank, `normal · v = offset`, in a given context.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySegment {
    pub bank: usize,
    pub context: BankState,
    pub normal: [f64; 2],
    pub offset: f64,
    pub geometry: SegmentGeometry,
}

fn clip_line(normal: [f64; 2], offset: f64, rect: &ClipRect) -> SegmentGeometry {
    let [a, b] = normal;
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(4);
    if a != 0.0 {
        for y in [rect.lo[1], rect.hi[1]] {
            pts.push([(offset - b * y) / a, y]);
        }
    }
    if b != 0.0 {
        for x in [rect.lo[0], rect.hi[0]] {
            pts.push([x, (offset - a * x) / b]);
        }
    }
    pts.retain(|p| rect.contains(*p));
    let mut best: Option<([f64; 2], [f64; 2], f64)> = None;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i..] {
            let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
            if best.is_none_or(|(_, _, d)| dist > d) {
                best = Some((*p, *q, dist));
            }
        }
    }
    match best {
        Some((from, to, _)) => SegmentGeometry::Clipped { from, to },
        None => SegmentGeometry::Outside,
    }
}

/// Every bank's boundary line under the failure context `f_context`, clipped
/// to `bounds`. Two-asset systems only.
pub fn boundary_segments(
    sys: &ExposureSystem,
    f_context: &BankState,
    bounds: &ClipRect,
) -> Result<Vec<BoundarySegment>> {
    if sys.n_assets() != 2 {
        return Err(Error::param(
            "n_assets",
            "boundary export needs exactly two assets",
        ));
    }
    if f_context.len() != sys.n_banks() {
        return Err(Error::Dimension {
            context: "failure context",
            expected: sys.n_banks(),
            actual: f_context.len(),
        });
    }
    Ok((0..sys.n_banks())
        .map(|i| {
            let row = sys.holdings().row(i);
            let normal = [row[0], row[1]];
            let interbank: f64 = sys
                .loans()
                .row(i)
                .iter()
                .zip(f_context.as_slice())
                .filter(|(_, &f)| f)
                .map(|(l, _)| *l)
                .sum();
            let offset = 1.0 - interbank;
            let geometry = if normal == [0.0, 0.0] {
                SegmentGeometry::Degenerate
            } else {
                clip_line(normal, offset, bounds)
            };
            BoundarySegment {
                bank: i,
                context: f_context.clone(),
                normal,
                offset,
                geometry,
            }
        })
        .collect())
}

/// Boundaries of every bank under every context of the other banks.
pub fn all_boundary_segments(
    sys: &ExposureSystem,
    bounds: &ClipRect,
) -> Result<Vec<BoundarySegment>> {
    let n = sys.n_banks();
    if n > 16 {
        return Err(Error::param(
            "n_banks",
            "context enumeration is limited to 16 banks",
        ));
    }
    let mut out = Vec::new();
    for bits in 0..(1u64 << n) {
        let context = BankState::from_bits(bits, n);
        for seg in boundary_segments(sys, &context, bounds)? {
            if !context.is_failed(seg.bank) {
                out.push(seg);
            }
        }
    }
    out.sort_by_key(|s| (s.bank, s.context.bits()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Matrix;

    fn sys(x: Vec<Vec<f64>>, l: Vec<Vec<f64>>) -> ExposureSystem {
        ExposureSystem::new(Matrix::from_rows(x).unwrap(), Matrix::from_rows(l).unwrap()).unwrap()
    }

    fn diag2() -> Vec<Vec<f64>> {
        vec![vec![2.0, 0.0], vec![0.0, 2.0]]
    }

    fn mutual() -> ExposureSystem {
        sys(diag2(), vec![vec![0.0, 0.6], vec![0.6, 0.0]])
    }

    fn state(bits: &[u8]) -> BankState {
        BankState::new(bits.iter().map(|&b| b == 1).collect())
    }

    #[test]
    fn classify_examples() {
        let v = |a: f64, b: f64| LossVector::new(vec![a, b]).unwrap();
        let sig = classify_region(&mutual(), &v(0.4, 0.4)).unwrap();
        assert_eq!(sig.lfp, state(&[0, 0]));
        assert_eq!(sig.gfp, state(&[1, 1]));
        let sig = classify_region(&mutual(), &v(-1.0, -1.0)).unwrap();
        assert!(sig.lfp.none() && sig.gfp.none());
        let sig = classify_region(&mutual(), &v(1.0, 1.0)).unwrap();
        assert!(sig.lfp.all() && sig.gfp.all());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(multi_behavior_bound(1), 0);
        assert_eq!(multi_behavior_bound(2), 1);
        assert_eq!(multi_behavior_bound(3), 7);
        assert_eq!(multi_behavior_bound(4), 33);
        for n in 1..=20u32 {
            let closed = 3u128.pow(n) - (1u128 << n) - u128::from(n) * (1u128 << (n - 1));
            assert_eq!(multi_behavior_bound(n), closed, "n = {n}");
        }
    }

    #[test]
    fn census_without_links() {
        let s = sys(diag2(), vec![vec![0.0; 2]; 2]);
        let grid = GridSpec::uniform(2, 0.0, 1.0, 200);
        let c = census(&s, &grid, DEFAULT_CENSUS_BUDGET).unwrap();
        assert_eq!(c.n_signatures(), 4);
        assert_eq!(c.n_multi, 0);
        // each quadrant split at 0.5 holds a quarter of the points
        assert!(c.counts.values().all(|&n| n == 100 * 100));
    }

    #[test]
    fn census_with_mutual_links() {
        let grid = GridSpec::uniform(2, 0.0, 1.0, 200);
        let c = census(&mutual(), &grid, DEFAULT_CENSUS_BUDGET).unwrap();
        assert_eq!(c.n_signatures(), 5);
        assert_eq!(c.n_multi, 1);
        let (sig, _) = c.multi_signatures().next().unwrap();
        assert_eq!(sig.lfp, state(&[0, 0]));
        assert_eq!(sig.gfp, state(&[1, 1]));
    }

    #[test]
    fn census_budget_and_shape_errors() {
        let grid = GridSpec::uniform(2, 0.0, 1.0, 100);
        assert!(matches!(
            census(&mutual(), &grid, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(census(&mutual(), &GridSpec::uniform(3, 0.0, 1.0, 4), 1 << 20).is_err());
        assert!(census(&mutual(), &GridSpec::uniform(2, 1.0, 0.0, 4), 1 << 20).is_err());
    }

    #[test]
    fn witness_examples() {
        let w = find_all_fail_witness(&mutual(), &WitnessSearch::default()).unwrap();
        let sig = classify_region(&mutual(), &w).unwrap();
        assert!(sig.lfp.none() && sig.gfp.all());

        let unlinked = sys(diag2(), vec![vec![0.0; 2]; 2]);
        assert!(find_all_fail_witness(&unlinked, &WitnessSearch::default()).is_none());

        let x = vec![
            vec![2.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ];
        let l = vec![
            vec![0.0, 0.45, 0.45],
            vec![0.45, 0.0, 0.45],
            vec![0.45, 0.45, 0.0],
        ];
        let ring = sys(x, l);
        let w = find_all_fail_witness(&ring, &WitnessSearch::default()).unwrap();
        let sig = classify_region(&ring, &w).unwrap();
        assert!(sig.lfp.none() && sig.gfp.all());
    }

    #[test]
    fn boundary_examples() {
        let rect = ClipRect::square(0.0, 1.0);
        let unlinked = sys(diag2(), vec![vec![0.0; 2]; 2]);
        let segs = boundary_segments(&unlinked, &state(&[0, 0]), &rect).unwrap();
        assert_eq!(
            segs[0].geometry,
            SegmentGeometry::Clipped {
                from: [0.5, 0.0],
                to: [0.5, 1.0]
            }
        );
        assert_eq!(
            segs[1].geometry,
            SegmentGeometry::Clipped {
                from: [0.0, 0.5],
                to: [1.0, 0.5]
            }
        );

        let one_way = sys(diag2(), vec![vec![0.0, 0.0], vec![0.5, 0.0]]);
        let segs = boundary_segments(&one_way, &state(&[1, 0]), &rect).unwrap();
        assert_eq!(segs[1].offset, 0.5);
        assert_eq!(
            segs[1].geometry,
            SegmentGeometry::Clipped {
                from: [0.0, 0.25],
                to: [1.0, 0.25]
            }
        );

        let hollow = sys(vec![vec![0.0, 0.0], vec![0.0, 2.0]], vec![vec![0.0; 2]; 2]);
        let segs = boundary_segments(&hollow, &state(&[0, 0]), &rect).unwrap();
        assert_eq!(segs[0].geometry, SegmentGeometry::Degenerate);

        let far = sys(vec![vec![0.5, 0.0], vec![0.0, 2.0]], vec![vec![0.0; 2]; 2]);
        let segs = boundary_segments(&far, &state(&[0, 0]), &rect).unwrap();
        assert_eq!(segs[0].geometry, SegmentGeometry::Outside);

        let three = sys(vec![vec![1.0, 1.0, 1.0]], vec![vec![0.0]]);
        assert!(boundary_segments(&three, &state(&[0]), &rect).is_err());
    }

    #[test]
    fn all_contexts_skip_own_bit() {
        let segs = all_boundary_segments(&mutual(), &ClipRect::square(0.0, 1.0)).unwrap();
        // two banks × two contexts of the other bank
        assert_eq!(segs.len(), 4);
        assert!(segs.iter().all(|s| !s.context.is_failed(s.bank)));
    }
}
