//! Exact space/time tradeoff index.
//!
//! A region is *large* when it holds more than λ triplets; there are at most
//! min(m, N/λ) of them. For every subset of large regions up to the supported
//! query size, the index precomputes the per-user aggregate table twice: once
//! sorted by aggregate time (answering "how many users reach k" by binary
//! search) and once sorted by user id (answering point lookups). Queries
//! split into the precomputed large part and a scan over the small part.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{RegionId, RegionQuery, TripletStore, UserId};
use crate::snapshot as snap;
use crate::time::Time;

const MAGIC: &[u8; 8] = b"CLAVEXI\0";
const VERSION: u32 = 1;

/// Build-time resource limits.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    /// Maximum number of precomputed subset tables.
    pub max_tables: u64,
    /// Maximum number of (user, time) tuples stored across all tables.
    pub max_tuples: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_tables: 1_000_000,
            max_tuples: 100_000_000,
        }
    }
}

/// One precomputed subset: the same tuples under both sort orders.
#[derive(Clone, Debug, PartialEq)]
struct SubsetTables {
    /// Sorted by non-decreasing aggregate time, ties by user id.
    by_time: Vec<(UserId, Time)>,
    /// Sorted by user id.
    by_user: Vec<(UserId, Time)>,
}

/// The λ-parameterized exact index. Immutable after build.
#[derive(Clone, Debug)]
pub struct ExactIndex {
    lambda: u64,
    r_max: usize,
    large: Vec<RegionId>,
    tables: BTreeMap<Vec<RegionId>, SubsetTables>,
    base: TripletStore,
}

/// Space accounting for an [`ExactIndex`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceReport {
    /// Tuples stored across all tables (each subset counts both sort orders).
    pub stored_tuples: u64,
    /// Number of materialized subset tables (including the empty subset).
    pub table_count: u64,
    /// Word estimate: two words per stored tuple plus three per base triplet.
    pub word_estimate: u64,
}

impl ExactIndex {
    /// Builds the index for queries of up to `r_max` regions.
    pub fn build(store: TripletStore, lambda: u64, r_max: usize, budget: Budget) -> Result<ExactIndex> {
        if lambda == 0 {
            return Err(Error::validation("lambda must be at least 1"));
        }
        if r_max == 0 {
            return Err(Error::validation("r_max must be at least 1"));
        }

        let large: Vec<RegionId> = (0..store.m() as RegionId)
            .filter(|&j| store.region_list(j).unwrap().len() as u64 > lambda)
            .collect();

        let projected = subset_count(large.len(), r_max);
        if projected > budget.max_tables as u128 {
            return Err(Error::Resource {
                what: format!(
                    "exact index over {} large regions (subsets of size <= {r_max})",
                    large.len()
                ),
                required: projected.min(u64::MAX as u128) as u64,
                budget: budget.max_tables,
            });
        }

        let mut tables = BTreeMap::new();
        let mut stored_tuples = 0u64;
        let mut subset = Vec::new();
        build_subsets(
            &store,
            &large,
            r_max,
            0,
            &mut subset,
            &mut tables,
            &mut stored_tuples,
            budget.max_tuples,
        )?;

        Ok(ExactIndex {
            lambda,
            r_max,
            large,
            tables,
            base: store,
        })
    }

    pub fn lambda(&self) -> u64 {
        self.lambda
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    /// Region ids with more than λ triplets, sorted.
    pub fn large_regions(&self) -> &[RegionId] {
        &self.large
    }

    pub fn base(&self) -> &TripletStore {
        &self.base
    }

    /// Exact n_{Q,k}: precomputed answer for the large part of the query plus
    /// a deduplicated scan over its small regions.
    pub fn query(&self, q: &RegionQuery) -> Result<u64> {
        self.base.validate_query(q)?;
        if q.region_count() > self.r_max {
            return Err(Error::capability(format!(
                "query has {} regions but the index was built for at most {}",
                q.region_count(),
                self.r_max
            )));
        }
        let k = q.k();

        let mut large_part: Vec<RegionId> = Vec::new();
        let mut small_part: Vec<RegionId> = Vec::new();
        for &j in q.regions() {
            if self.large.binary_search(&j).is_ok() {
                large_part.push(j);
            } else {
                small_part.push(j);
            }
        }

        let tables = self
            .tables
            .get(&large_part)
            .expect("all subsets of large regions up to r_max are materialized");

        // users counted by the precomputed table alone
        let cut = tables.by_time.partition_point(|&(_, t)| t < k);
        let n_large = (tables.by_time.len() - cut) as u64;

        // aggregate the small regions per user, then add users that cross k
        // only with the small-region contribution
        let mut small_sums: BTreeMap<UserId, Time> = BTreeMap::new();
        for &j in &small_part {
            for &(user, time) in self.base.region_list(j)? {
                *small_sums.entry(user).or_insert(Time::ZERO) += time;
            }
        }
        let mut n_small = 0u64;
        for (&user, &small_time) in &small_sums {
            let large_time = match tables.by_user.binary_search_by_key(&user, |&(u, _)| u) {
                Ok(i) => tables.by_user[i].1,
                Err(_) => Time::ZERO,
            };
            if large_time < k && small_time + large_time >= k {
                n_small += 1;
            }
        }
        Ok(n_large + n_small)
    }

    pub fn space_report(&self) -> SpaceReport {
        let stored_tuples: u64 = self
            .tables
            .values()
            .map(|t| (t.by_time.len() + t.by_user.len()) as u64)
            .sum();
        SpaceReport {
            stored_tuples,
            table_count: self.tables.len() as u64,
            word_estimate: stored_tuples * 2 + self.base.triplet_count() as u64 * 3,
        }
    }

    /// Writes the index in the binary snapshot format. Loading the output and
    /// saving it again reproduces the bytes exactly.
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        snap::write_u32(w, VERSION)?;
        snap::write_u64(w, self.lambda)?;
        snap::write_u32(w, self.r_max as u32)?;
        snap::write_u64(w, self.base.n() as u64)?;
        snap::write_u64(w, self.base.m() as u64)?;
        snap::write_u64(w, self.base.triplet_count() as u64)?;
        for t in self.base.triplets() {
            snap::write_u32(w, t.user)?;
            snap::write_u32(w, t.region)?;
            snap::write_time(w, t.time)?;
        }
        snap::write_u64(w, self.tables.len() as u64)?;
        for (key, tables) in &self.tables {
            snap::write_u32(w, key.len() as u32)?;
            for &j in key {
                snap::write_u32(w, j)?;
            }
            snap::write_u64(w, tables.by_time.len() as u64)?;
        }
        for tables in self.tables.values() {
            for &(user, time) in tables.by_time.iter().chain(&tables.by_user) {
                snap::write_u32(w, user)?;
                snap::write_time(w, time)?;
            }
        }
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<ExactIndex> {
        snap::expect_magic(r, MAGIC)?;
        snap::expect_version(r, VERSION)?;
        let lambda = snap::read_u64(r)?;
        let r_max = snap::read_u32(r)? as usize;
        let n = snap::read_len(r, "user")?;
        let m = snap::read_len(r, "region")?;
        let triplet_count = snap::read_len(r, "triplet")?;
        let mut records = Vec::with_capacity(triplet_count);
        for _ in 0..triplet_count {
            let user = snap::read_u32(r)?;
            let region = snap::read_u32(r)?;
            let time = snap::read_time(r)?;
            records.push((user, region, time));
        }
        let base = TripletStore::with_dimensions(records, n, m)?;

        let table_count = snap::read_len(r, "table")?;
        let mut directory = Vec::with_capacity(table_count);
        for _ in 0..table_count {
            let key_len = snap::read_u32(r)? as usize;
            let mut key = Vec::with_capacity(key_len);
            for _ in 0..key_len {
                key.push(snap::read_u32(r)?);
            }
            let tuples = snap::read_len(r, "tuple")?;
            directory.push((key, tuples));
        }
        let mut tables = BTreeMap::new();
        for (key, tuples) in directory {
            let mut read_side = || -> Result<Vec<(UserId, Time)>> {
                let mut side = Vec::with_capacity(tuples);
                for _ in 0..tuples {
                    let user = snap::read_u32(r)?;
                    let time = snap::read_time(r)?;
                    side.push((user, time));
                }
                Ok(side)
            };
            let by_time = read_side()?;
            let by_user = read_side()?;
            tables.insert(key, SubsetTables { by_time, by_user });
        }

        let large: Vec<RegionId> = (0..base.m() as RegionId)
            .filter(|&j| base.region_list(j).unwrap().len() as u64 > lambda)
            .collect();

        // queries rely on every subset of the large set being present
        if tables.len() as u128 != subset_count(large.len(), r_max) {
            return Err(Error::Snapshot(format!(
                "table directory holds {} subsets, expected {}",
                tables.len(),
                subset_count(large.len(), r_max)
            )));
        }
        for key in tables.keys() {
            if key.len() > r_max
                || key.windows(2).any(|w| w[0] >= w[1])
                || key.iter().any(|j| large.binary_search(j).is_err())
            {
                return Err(Error::Snapshot(format!(
                    "invalid subset key {key:?} for the large-region set"
                )));
            }
        }

        Ok(ExactIndex {
            lambda,
            r_max,
            large,
            tables,
            base,
        })
    }
}

/// Σ_{t=0..=r_max} C(count, t), saturating.
fn subset_count(count: usize, r_max: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for t in 0..=r_max.min(count) {
        if t > 0 {
            binom = binom.saturating_mul((count - t + 1) as u128) / t as u128;
        }
        total = total.saturating_add(binom);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn build_subsets(
    store: &TripletStore,
    large: &[RegionId],
    r_max: usize,
    start: usize,
    subset: &mut Vec<RegionId>,
    tables: &mut BTreeMap<Vec<RegionId>, SubsetTables>,
    stored_tuples: &mut u64,
    max_tuples: u64,
) -> Result<()> {
    let mut aggregates: BTreeMap<UserId, Time> = BTreeMap::new();
    for &j in subset.iter() {
        for &(user, time) in store.region_list(j)? {
            *aggregates.entry(user).or_insert(Time::ZERO) += time;
        }
    }
    let by_user: Vec<(UserId, Time)> = aggregates.into_iter().collect();
    let mut by_time = by_user.clone();
    by_time.sort_unstable_by_key(|&(user, time)| (time, user));

    *stored_tuples += (by_time.len() + by_user.len()) as u64;
    if *stored_tuples > max_tuples {
        return Err(Error::Resource {
            what: "exact index tuple storage".into(),
            required: *stored_tuples,
            budget: max_tuples,
        });
    }
    tables.insert(subset.clone(), SubsetTables { by_time, by_user });

    if subset.len() == r_max {
        return Ok(());
    }
    for i in start..large.len() {
        subset.push(large[i]);
        build_subsets(
            store,
            large,
            r_max,
            i + 1,
            subset,
            tables,
            stored_tuples,
            max_tuples,
        )?;
        subset.pop();
    }
    Ok(())
}
