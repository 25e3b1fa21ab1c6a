//! Canonical data model: deduplicated (user, region, time) records with the
//! two sorted views every structure builds on, plus the query types.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::time::Time;

pub type UserId = u32;
pub type RegionId = u32;

/// One aggregated visit: `user` spent `time` in `region`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub user: UserId,
    pub region: RegionId,
    pub time: Time,
}

/// Immutable normalized dataset.
///
/// Holds the same records twice: lexicographically sorted by `(user, region)`
/// for point lookups, and grouped per region (sorted by user) for scans.
/// Duplicate `(user, region)` inputs are merged by summing their times.
#[derive(Clone, Debug)]
pub struct TripletStore {
    triplets: Vec<Triplet>,
    region_lists: Vec<Vec<(UserId, Time)>>,
    n: usize,
    m: usize,
}

impl TripletStore {
    /// Normalizes raw records; `n` and `m` are inferred from the largest ids.
    pub fn from_triplets(
        records: impl IntoIterator<Item = (UserId, RegionId, Time)>,
    ) -> Result<TripletStore> {
        Self::build(records, None)
    }

    /// Normalizes raw records into a store with the given dimensions.
    /// Regions (or users) with no records are still part of the universe.
    pub fn with_dimensions(
        records: impl IntoIterator<Item = (UserId, RegionId, Time)>,
        n: usize,
        m: usize,
    ) -> Result<TripletStore> {
        Self::build(records, Some((n, m)))
    }

    fn build(
        records: impl IntoIterator<Item = (UserId, RegionId, Time)>,
        dims: Option<(usize, usize)>,
    ) -> Result<TripletStore> {
        let mut merged: BTreeMap<(UserId, RegionId), Time> = BTreeMap::new();
        for (user, region, time) in records {
            if !time.is_positive() {
                return Err(Error::validation(format!(
                    "non-positive time {time} for user {user} in region {region}"
                )));
            }
            if let Some((n, m)) = dims {
                if user as usize >= n || region as usize >= m {
                    return Err(Error::validation(format!(
                        "id out of range: user {user} region {region} for n={n} m={m}"
                    )));
                }
            }
            *merged.entry((user, region)).or_insert(Time::ZERO) += time;
        }

        let (n, m) = dims.unwrap_or_else(|| {
            let n = merged.keys().map(|&(u, _)| u as usize + 1).max().unwrap_or(0);
            let m = merged.keys().map(|&(_, r)| r as usize + 1).max().unwrap_or(0);
            (n, m)
        });

        let triplets: Vec<Triplet> = merged
            .into_iter()
            .map(|((user, region), time)| Triplet { user, region, time })
            .collect();

        let mut region_lists = vec![Vec::new(); m];
        for t in &triplets {
            region_lists[t.region as usize].push((t.user, t.time));
        }
        for list in &mut region_lists {
            list.sort_unstable_by_key(|&(u, _)| u);
        }

        Ok(TripletStore {
            triplets,
            region_lists,
            n,
            m,
        })
    }

    /// Number of users in the universe.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of regions in the universe.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Total triplet count N.
    pub fn triplet_count(&self) -> usize {
        self.triplets.len()
    }

    /// All triplets, sorted by `(user, region)`.
    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    /// The users of one region with their dwell times, sorted by user id.
    pub fn region_list(&self, region: RegionId) -> Result<&[(UserId, Time)]> {
        self.region_lists
            .get(region as usize)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::validation(format!("unknown region id {region}")))
    }

    /// τ(user, region), or zero when the pair is absent.
    pub fn lookup_time(&self, user: UserId, region: RegionId) -> Time {
        match self
            .triplets
            .binary_search_by_key(&(user, region), |t| (t.user, t.region))
        {
            Ok(i) => self.triplets[i].time,
            Err(_) => Time::ZERO,
        }
    }

    /// Number of triplets inside the query's regions (N_Q).
    pub fn query_triplet_count(&self, q: &RegionQuery) -> Result<u64> {
        let mut total = 0u64;
        for &j in q.regions() {
            total += self.region_list(j)?.len() as u64;
        }
        Ok(total)
    }

    pub fn validate_query(&self, q: &RegionQuery) -> Result<()> {
        for &j in q.regions() {
            if j as usize >= self.m {
                return Err(Error::validation(format!("unknown region id {j}")));
            }
        }
        Ok(())
    }
}

/// A query over a set of distinct regions with a positive threshold `k`.
#[derive(Clone, Debug)]
pub struct RegionQuery {
    regions: Vec<RegionId>,
    k: Time,
}

impl RegionQuery {
    pub fn new(regions: impl IntoIterator<Item = RegionId>, k: Time) -> Result<RegionQuery> {
        let mut regions: Vec<RegionId> = regions.into_iter().collect();
        regions.sort_unstable();
        regions.dedup();
        if regions.is_empty() {
            return Err(Error::validation("query must name at least one region"));
        }
        if !k.is_positive() {
            return Err(Error::validation(format!("threshold k must be positive, got {k}")));
        }
        Ok(RegionQuery { regions, k })
    }

    /// Region ids, sorted and distinct.
    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn k(&self) -> Time {
        self.k
    }

    /// Query size r (always at least 1).
    pub fn region_count(&self) -> usize {
        self.regions.len()
    }
}

/// One visit to a point in d-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoTriplet {
    pub user: UserId,
    pub point: Vec<f64>,
    pub time: Time,
}

/// A closed axis-aligned hyperrectangle query with threshold `k`.
#[derive(Clone, Debug)]
pub struct RectQuery {
    lo: Vec<f64>,
    hi: Vec<f64>,
    k: Time,
}

impl RectQuery {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, k: Time) -> Result<RectQuery> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::validation(format!(
                "rectangle bounds must share a positive dimension (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::validation(format!("non-finite bound in dimension {i}")));
            }
            if a > b {
                return Err(Error::validation(format!(
                    "empty rectangle: lo[{i}]={a} > hi[{i}]={b}"
                )));
            }
        }
        if !k.is_positive() {
            return Err(Error::validation(format!("threshold k must be positive, got {k}")));
        }
        Ok(RectQuery { lo, hi, k })
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn k(&self) -> Time {
        self.k
    }

    /// Closed containment: boundary points count.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims()
            && point
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&x, (&a, &b))| a <= x && x <= b)
    }
}
