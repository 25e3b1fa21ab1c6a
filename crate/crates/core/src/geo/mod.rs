//! Exact structures for point datasets and closed rectangle queries.
//!
//! All of them start from rank-space reduction: coordinates are replaced by
//! their ranks among the distinct values of each dimension, so queries become
//! integer rectangles. The 1D structure extracts each user's minimal
//! qualifying intervals, lifts them to weighted planar points, and answers
//! via dominance-region weight sums; higher dimensions tabulate over the
//! boundary-rank choices of dimensions 2..d and keep a 1D structure per
//! choice. A dense lookup table and a powers-of-two multi-threshold wrapper
//! round out the set.

pub mod dominance;
mod index;
pub mod intervals;

pub use dominance::DominanceCounter;
pub use index::{
    GeoIndex, GeoIndex1D, GeoIndexD, MultiKIndex, TabulationIndex, DEFAULT_GEO_BUDGET,
};
pub use intervals::{minimal_intervals, staircase_reduce, ColoredPoint};

use crate::error::{Error, Result};
use crate::model::{GeoTriplet, RectQuery, UserId};
use crate::time::Time;

/// Per-dimension sorted distinct coordinates; maps coordinates to 1-based ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct RankMap {
    dims: Vec<Vec<f64>>,
}

/// A dataset record with rank-space coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankPoint {
    pub user: UserId,
    pub ranks: Vec<u32>,
    pub time: Time,
}

impl RankMap {
    /// Collects the distinct coordinates of a dataset, `d` dimensions.
    pub fn build(dataset: &[GeoTriplet], d: usize) -> Result<RankMap> {
        if d == 0 {
            return Err(Error::validation("dimension must be at least 1"));
        }
        let mut dims = vec![Vec::new(); d];
        for t in dataset {
            if t.point.len() != d {
                return Err(Error::validation(format!(
                    "point dimension {} does not match dataset dimension {d}",
                    t.point.len()
                )));
            }
            for (dim, &c) in t.point.iter().enumerate() {
                if !c.is_finite() {
                    return Err(Error::validation("non-finite coordinate"));
                }
                dims[dim].push(c);
            }
        }
        for coords in &mut dims {
            coords.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            coords.dedup();
        }
        Ok(RankMap { dims })
    }

    /// Rebuilds from already-sorted distinct coordinates (snapshot loading).
    pub(crate) fn from_dims(dims: Vec<Vec<f64>>) -> RankMap {
        RankMap { dims }
    }

    pub fn dims(&self) -> usize {
        self.dims.len()
    }

    /// Number of distinct coordinates in one dimension (m_dim).
    pub fn size(&self, dim: usize) -> usize {
        self.dims[dim].len()
    }

    /// The coordinate holding a given rank (1-based).
    pub fn coord(&self, dim: usize, rank: u32) -> f64 {
        self.dims[dim][rank as usize - 1]
    }

    /// Rank of a coordinate that occurs in the dataset, 1-based.
    pub fn rank_of(&self, dim: usize, coord: f64) -> u32 {
        let idx = self.dims[dim]
            .binary_search_by(|c| c.partial_cmp(&coord).unwrap())
            .expect("coordinate not present in rank map");
        idx as u32 + 1
    }

    /// Smallest rank whose coordinate is ≥ `v`, or `None` past the last one.
    pub fn snap_lo(&self, dim: usize, v: f64) -> Option<u32> {
        let idx = self.dims[dim].partition_point(|&c| c < v);
        (idx < self.dims[dim].len()).then_some(idx as u32 + 1)
    }

    /// Largest rank whose coordinate is ≤ `v`, or `None` before the first one.
    pub fn snap_hi(&self, dim: usize, v: f64) -> Option<u32> {
        let idx = self.dims[dim].partition_point(|&c| c <= v);
        (idx > 0).then_some(idx as u32)
    }

    /// Snaps one dimension of a query; `None` means the query is empty there.
    pub fn snap_interval(&self, dim: usize, lo: f64, hi: f64) -> Option<(u32, u32)> {
        let a = self.snap_lo(dim, lo)?;
        let b = self.snap_hi(dim, hi)?;
        (a <= b).then_some((a, b))
    }

    /// Snaps a whole rectangle into rank space; `None` means the answer is 0.
    pub fn snap_rect(&self, rect: &RectQuery) -> Result<Option<Vec<(u32, u32)>>> {
        if rect.dims() != self.dims() {
            return Err(Error::validation(format!(
                "query dimension {} does not match index dimension {}",
                rect.dims(),
                self.dims()
            )));
        }
        let mut out = Vec::with_capacity(self.dims());
        for dim in 0..self.dims() {
            match self.snap_interval(dim, rect.lo()[dim], rect.hi()[dim]) {
                Some(pair) => out.push(pair),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }
}

/// Replaces every coordinate by its rank. The companion map answers snapping.
pub fn rank_reduce(dataset: &[GeoTriplet], d: usize) -> Result<(Vec<RankPoint>, RankMap)> {
    let map = RankMap::build(dataset, d)?;
    let points = dataset
        .iter()
        .map(|t| RankPoint {
            user: t.user,
            ranks: t
                .point
                .iter()
                .enumerate()
                .map(|(dim, &c)| map.rank_of(dim, c))
                .collect(),
            time: t.time,
        })
        .collect();
    Ok((points, map))
}
