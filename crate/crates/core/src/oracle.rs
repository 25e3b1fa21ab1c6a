//! Brute-force reference answers, computed by full scan. Every other
//! structure in the crate is tested against these.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{GeoTriplet, RectQuery, RegionQuery, TripletStore, UserId};
use crate::time::Time;

/// Per-user aggregate dwell time over the query's regions.
pub fn query_aggregates(store: &TripletStore, q: &RegionQuery) -> Result<BTreeMap<UserId, Time>> {
    let mut sums: BTreeMap<UserId, Time> = BTreeMap::new();
    for &j in q.regions() {
        for &(user, time) in store.region_list(j)? {
            *sums.entry(user).or_insert(Time::ZERO) += time;
        }
    }
    Ok(sums)
}

/// Exact count of users with aggregate time ≥ k in the query's regions.
pub fn oracle_count(store: &TripletStore, q: &RegionQuery) -> Result<u64> {
    let sums = query_aggregates(store, q)?;
    Ok(sums.values().filter(|&&t| t >= q.k()).count() as u64)
}

/// Number of distinct users appearing anywhere in the query's regions (n_Q).
pub fn distinct_users(store: &TripletStore, q: &RegionQuery) -> Result<u64> {
    Ok(query_aggregates(store, q)?.len() as u64)
}

/// Exact count of users whose time inside the closed rectangle reaches k.
pub fn oracle_geo_count(dataset: &[GeoTriplet], q: &RectQuery) -> Result<u64> {
    let mut sums: BTreeMap<UserId, Time> = BTreeMap::new();
    for t in dataset {
        if t.point.len() != q.dims() {
            return Err(Error::validation(format!(
                "point dimension {} does not match query dimension {}",
                t.point.len(),
                q.dims()
            )));
        }
        if q.contains(&t.point) {
            *sums.entry(t.user).or_insert(Time::ZERO) += t.time;
        }
    }
    Ok(sums.values().filter(|&&t| t >= q.k()).count() as u64)
}
