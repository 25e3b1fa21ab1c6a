//! The query structures: 1D dominance-based, slab-tabulated d-dimensional,
//! dense lookup table, and the powers-of-two multi-threshold wrapper.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geo::dominance::DominanceCounter;
use crate::geo::intervals::{minimal_intervals, staircase_reduce, ColoredPoint};
use crate::geo::{rank_reduce, RankMap, RankPoint};
use crate::model::{GeoTriplet, RectQuery, UserId};
use crate::snapshot as snap;
use crate::time::Time;

const MAGIC: &[u8; 8] = b"CLAVGEO\0";
const VERSION: u32 = 1;

const TAG_ONE_D: u8 = 1;
const TAG_SLABBED: u8 = 2;
const TAG_TABULATED: u8 = 3;
const TAG_MULTI_K: u8 = 4;

/// Default cap on tabulated structures / table entries per build.
pub const DEFAULT_GEO_BUDGET: u64 = 10_000_000;

/// One 1D core: the weighted point set from all users' minimal intervals,
/// plus the dominance structure over it.
#[derive(Clone, Debug)]
struct Staircase1D {
    points: Vec<ColoredPoint>,
    counter: DominanceCounter,
    interval_count: u64,
    /// Aggregated (user, position) records the intervals came from.
    source_records: u64,
}

impl Staircase1D {
    fn build(per_user: &BTreeMap<UserId, Vec<(u32, Time)>>, k: Time) -> Staircase1D {
        let mut points = Vec::new();
        let mut interval_count = 0u64;
        let mut source_records = 0u64;
        for (&user, positions) in per_user {
            source_records += positions.len() as u64;
            let intervals = minimal_intervals(positions, k);
            interval_count += intervals.len() as u64;
            let mapped: Vec<(i64, i64)> = intervals
                .iter()
                .map(|&(l, r)| (-(l as i64), r as i64))
                .collect();
            points.extend(staircase_reduce(&mapped, user));
        }
        points.sort_unstable_by_key(|p| (p.x, p.y, p.color, p.weight));
        Staircase1D::from_points(points, interval_count, source_records)
    }

    fn from_points(points: Vec<ColoredPoint>, interval_count: u64, source_records: u64) -> Staircase1D {
        let raw: Vec<(i64, i64, i64)> = points
            .iter()
            .map(|p| (p.x, p.y, p.weight as i64))
            .collect();
        Staircase1D {
            points,
            counter: DominanceCounter::new(&raw),
            interval_count,
            source_records,
        }
    }

    /// Distinct users with a minimal interval inside `[lo, hi]` (rank space).
    fn query(&self, lo: u32, hi: u32) -> u64 {
        debug_assert!(lo <= hi);
        self.counter.dominance_sum(-(lo as i64), hi as i64).max(0) as u64
    }

    fn save(&self, w: &mut impl Write) -> Result<()> {
        snap::write_u64(w, self.interval_count)?;
        snap::write_u64(w, self.source_records)?;
        snap::write_u64(w, self.points.len() as u64)?;
        for p in &self.points {
            snap::write_i64(w, p.x)?;
            snap::write_i64(w, p.y)?;
            snap::write_u32(w, p.color)?;
            snap::write_u8(w, p.weight as u8)?;
        }
        Ok(())
    }

    fn load(r: &mut impl Read) -> Result<Staircase1D> {
        let interval_count = snap::read_u64(r)?;
        let source_records = snap::read_u64(r)?;
        let count = snap::read_len(r, "staircase point")?;
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            let x = snap::read_i64(r)?;
            let y = snap::read_i64(r)?;
            let color = snap::read_u32(r)?;
            let weight = snap::read_u8(r)? as i8;
            if weight != 1 && weight != -1 {
                return Err(Error::Snapshot(format!("invalid point weight {weight}")));
            }
            points.push(ColoredPoint {
                x,
                y,
                color,
                weight,
            });
        }
        Ok(Staircase1D::from_points(points, interval_count, source_records))
    }
}

fn write_rank_map(map: &RankMap, w: &mut impl Write) -> Result<()> {
    snap::write_u32(w, map.dims() as u32)?;
    for dim in 0..map.dims() {
        snap::write_u64(w, map.size(dim) as u64)?;
        for rank in 1..=map.size(dim) as u32 {
            snap::write_f64(w, map.coord(dim, rank))?;
        }
    }
    Ok(())
}

fn read_rank_map(r: &mut impl Read) -> Result<RankMap> {
    let d = snap::read_u32(r)? as usize;
    if d == 0 {
        return Err(Error::Snapshot("rank map with zero dimensions".into()));
    }
    let mut dims = Vec::with_capacity(d);
    for _ in 0..d {
        let len = snap::read_len(r, "coordinate")?;
        let mut coords = Vec::with_capacity(len);
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..len {
            let c = snap::read_f64(r)?;
            if !c.is_finite() || c <= prev {
                return Err(Error::Snapshot("rank map coordinates not increasing".into()));
            }
            prev = c;
            coords.push(c);
        }
        dims.push(coords);
    }
    Ok(RankMap::from_dims(dims))
}

/// Aggregates rank-space records per user along dimension 1, summing times
/// at equal positions. Position lists come out sorted.
fn aggregate_dim1<'a>(
    points: impl Iterator<Item = &'a RankPoint>,
) -> BTreeMap<UserId, Vec<(u32, Time)>> {
    let mut grouped: BTreeMap<UserId, BTreeMap<u32, Time>> = BTreeMap::new();
    for p in points {
        *grouped
            .entry(p.user)
            .or_default()
            .entry(p.ranks[0])
            .or_insert(Time::ZERO) += p.time;
    }
    grouped
        .into_iter()
        .map(|(user, positions)| (user, positions.into_iter().collect()))
        .collect()
}

/// Cartesian product of ordered rank pairs over dimensions 2..d.
fn slab_keys(map: &RankMap) -> Vec<Vec<(u32, u32)>> {
    let mut keys = vec![Vec::new()];
    for dim in 1..map.dims() {
        let m = map.size(dim) as u32;
        let mut next = Vec::new();
        for key in &keys {
            for lo in 1..=m {
                for hi in lo..=m {
                    let mut extended = key.clone();
                    extended.push((lo, hi));
                    next.push(extended);
                }
            }
        }
        keys = next;
    }
    keys
}

fn slab_structure_count(map: &RankMap) -> u128 {
    let mut total: u128 = 1;
    for dim in 1..map.dims() {
        let m = map.size(dim) as u128;
        total = total.saturating_mul(m * (m + 1) / 2);
    }
    total
}

fn in_slab(p: &RankPoint, key: &[(u32, u32)]) -> bool {
    key.iter()
        .enumerate()
        .all(|(i, &(lo, hi))| lo <= p.ranks[i + 1] && p.ranks[i + 1] <= hi)
}

fn check_k(built: Time, queried: Time) -> Result<()> {
    if built != queried {
        return Err(Error::validation(format!(
            "index was built for k={built} but the query asks k={queried}"
        )));
    }
    Ok(())
}

/// 1D structure: minimal intervals lifted to a weighted dominance query.
#[derive(Clone, Debug)]
pub struct GeoIndex1D {
    k: Time,
    rank_map: RankMap,
    core: Staircase1D,
}

impl GeoIndex1D {
    pub fn build(dataset: &[GeoTriplet], k: Time) -> Result<GeoIndex1D> {
        if !k.is_positive() {
            return Err(Error::validation(format!("k must be positive, got {k}")));
        }
        let (points, rank_map) = rank_reduce(dataset, 1)?;
        let per_user = aggregate_dim1(points.iter());
        Ok(GeoIndex1D {
            k,
            rank_map,
            core: Staircase1D::build(&per_user, k),
        })
    }

    pub fn k(&self) -> Time {
        self.k
    }

    /// Total number of minimal intervals stored (at most one per record).
    pub fn interval_count(&self) -> u64 {
        self.core.interval_count
    }

    /// The weighted points the dominance structure was built over.
    pub fn points(&self) -> &[ColoredPoint] {
        &self.core.points
    }

    /// Count over a real-coordinate interval, snapping to rank space.
    pub fn query_interval(&self, lo: f64, hi: f64) -> u64 {
        match self.rank_map.snap_interval(0, lo, hi) {
            Some((a, b)) => self.core.query(a, b),
            None => 0,
        }
    }

    pub fn query(&self, rect: &RectQuery) -> Result<u64> {
        check_k(self.k, rect.k())?;
        if rect.dims() != 1 {
            return Err(Error::validation(format!(
                "1D index cannot answer a {}-dimensional query",
                rect.dims()
            )));
        }
        Ok(self.query_interval(rect.lo()[0], rect.hi()[0]))
    }
}

/// d-dimensional structure: one 1D core per boundary-rank choice over
/// dimensions 2..d.
#[derive(Clone, Debug)]
pub struct GeoIndexD {
    d: usize,
    k: Time,
    rank_map: RankMap,
    slabs: BTreeMap<Vec<(u32, u32)>, Staircase1D>,
}

impl GeoIndexD {
    /// Builds with at most `max_structures` slab structures.
    pub fn build(
        dataset: &[GeoTriplet],
        d: usize,
        k: Time,
        max_structures: u64,
    ) -> Result<GeoIndexD> {
        if !k.is_positive() {
            return Err(Error::validation(format!("k must be positive, got {k}")));
        }
        let (points, rank_map) = rank_reduce(dataset, d)?;
        let required = slab_structure_count(&rank_map);
        if required > max_structures as u128 {
            return Err(Error::Resource {
                what: format!("slab structures over dimensions 2..{d}"),
                required: required.min(u64::MAX as u128) as u64,
                budget: max_structures,
            });
        }

        let mut slabs = BTreeMap::new();
        for key in slab_keys(&rank_map) {
            let per_user = aggregate_dim1(points.iter().filter(|p| in_slab(p, &key)));
            slabs.insert(key, Staircase1D::build(&per_user, k));
        }
        Ok(GeoIndexD {
            d,
            k,
            rank_map,
            slabs,
        })
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> Time {
        self.k
    }

    pub fn slab_count(&self) -> usize {
        self.slabs.len()
    }

    /// Per-slab (minimal interval count, aggregated record count) pairs.
    pub fn slab_stats(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.slabs
            .values()
            .map(|s| (s.interval_count, s.source_records))
    }

    /// Count over real-coordinate bounds with the built-in threshold.
    pub fn query_rect(&self, lo: &[f64], hi: &[f64]) -> Result<u64> {
        let rect = RectQuery::new(lo.to_vec(), hi.to_vec(), self.k)?;
        let snapped = match self.rank_map.snap_rect(&rect)? {
            Some(s) => s,
            None => return Ok(0),
        };
        let key: Vec<(u32, u32)> = snapped[1..].to_vec();
        let slab = match self.slabs.get(&key) {
            Some(s) => s,
            None => return Ok(0), // only when the dataset is empty
        };
        let (a, b) = snapped[0];
        Ok(slab.query(a, b))
    }

    pub fn query(&self, rect: &RectQuery) -> Result<u64> {
        check_k(self.k, rect.k())?;
        self.query_rect(rect.lo(), rect.hi())
    }
}

/// Dense rank-rectangle lookup table.
#[derive(Clone, Debug)]
pub struct TabulationIndex {
    d: usize,
    k: Time,
    rank_map: RankMap,
    table: Vec<u32>,
}

impl TabulationIndex {
    pub fn build(
        dataset: &[GeoTriplet],
        d: usize,
        k: Time,
        max_entries: u64,
    ) -> Result<TabulationIndex> {
        if !k.is_positive() {
            return Err(Error::validation(format!("k must be positive, got {k}")));
        }
        let (points, rank_map) = rank_reduce(dataset, d)?;
        let mut entries: u128 = 1;
        for dim in 0..d {
            let m = rank_map.size(dim) as u128;
            entries = entries.saturating_mul(m * m);
        }
        if entries > max_entries as u128 {
            return Err(Error::Resource {
                what: format!("tabulation table over {d} dimensions"),
                required: entries.min(u64::MAX as u128) as u64,
                budget: max_entries,
            });
        }
        let mut index = TabulationIndex {
            d,
            k,
            rank_map,
            table: vec![0; entries as usize],
        };
        if entries > 0 {
            index.fill(&points);
        }
        Ok(index)
    }

    /// Sweep fill: per slab of dimensions 2..d, a two-pointer pass per user
    /// marks the minimal right boundary for every left boundary, and prefix
    /// sums turn the marks into counts for all dimension-1 rectangles.
    fn fill(&mut self, points: &[RankPoint]) {
        let m1 = self.rank_map.size(0);
        #[allow(clippy::needless_range_loop)] // lo1/hi1 index two parallel tables
        for key in slab_keys(&self.rank_map) {
            let per_user = aggregate_dim1(points.iter().filter(|p| in_slab(p, &key)));
            let mut marks = vec![vec![0u32; m1 + 1]; m1 + 1]; // [lo1][minimal hi]
            for positions in per_user.values() {
                let mut right = 0usize;
                let mut sum = Time::ZERO;
                let mut prev_pos = 0u32;
                for left in 0..positions.len() {
                    while right < positions.len() && sum < self.k {
                        sum += positions[right].1;
                        right += 1;
                    }
                    if sum < self.k {
                        break;
                    }
                    let start = positions[left].0;
                    let reach = positions[right - 1].0;
                    for lo1 in (prev_pos + 1)..=start {
                        marks[lo1 as usize][reach as usize] += 1;
                    }
                    prev_pos = start;
                    sum = sum - positions[left].1;
                }
            }
            for lo1 in 1..=m1 {
                let mut running = 0u32;
                for hi1 in lo1..=m1 {
                    running += marks[lo1][hi1];
                    if running > 0 {
                        let mut ranks = Vec::with_capacity(self.d);
                        ranks.push((lo1 as u32, hi1 as u32));
                        ranks.extend_from_slice(&key);
                        let idx = self.entry_index(&ranks);
                        self.table[idx] = running;
                    }
                }
            }
        }
    }

    fn entry_index(&self, ranks: &[(u32, u32)]) -> usize {
        let mut idx = 0usize;
        for (dim, &(lo, hi)) in ranks.iter().enumerate() {
            let m = self.rank_map.size(dim);
            idx = idx * m * m + (lo as usize - 1) * m + (hi as usize - 1);
        }
        idx
    }

    pub fn k(&self) -> Time {
        self.k
    }

    pub fn entry_count(&self) -> usize {
        self.table.len()
    }

    pub fn query_rect(&self, lo: &[f64], hi: &[f64]) -> Result<u64> {
        let rect = RectQuery::new(lo.to_vec(), hi.to_vec(), self.k)?;
        match self.rank_map.snap_rect(&rect)? {
            Some(ranks) => Ok(self.table[self.entry_index(&ranks)] as u64),
            None => Ok(0),
        }
    }

    pub fn query(&self, rect: &RectQuery) -> Result<u64> {
        check_k(self.k, rect.k())?;
        self.query_rect(rect.lo(), rect.hi())
    }
}

/// Copies of [`GeoIndexD`] at thresholds 2, 4, ..., 2^⌈log₂ K⌉. A query at
/// threshold k is answered by the copy at the largest power of two ≤ k, so
/// the result counts users with aggregate time at least k/2.
#[derive(Clone, Debug)]
pub struct MultiKIndex {
    d: usize,
    max_k: u64,
    copies: Vec<GeoIndexD>,
}

impl MultiKIndex {
    pub fn build(
        dataset: &[GeoTriplet],
        d: usize,
        max_k: u64,
        max_structures: u64,
    ) -> Result<MultiKIndex> {
        if max_k < 2 {
            return Err(Error::validation(format!(
                "maximum threshold must be at least 2, got {max_k}"
            )));
        }
        if max_k > 1 << 62 {
            return Err(Error::validation(format!(
                "maximum threshold {max_k} exceeds the supported 2^62"
            )));
        }
        let levels = (u64::BITS - (max_k - 1).leading_zeros()) as usize;
        let map = RankMap::build(dataset, d)?;
        let per_copy = slab_structure_count(&map);
        let required = per_copy.saturating_mul(levels as u128);
        if required > max_structures as u128 {
            return Err(Error::Resource {
                what: format!("{levels} threshold copies of the slab structure"),
                required: required.min(u64::MAX as u128) as u64,
                budget: max_structures,
            });
        }
        let copies = (1..=levels)
            .map(|i| GeoIndexD::build(dataset, d, Time::from_int(1 << i), u64::MAX))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiKIndex { d, max_k, copies })
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    pub fn max_k(&self) -> u64 {
        self.max_k
    }

    pub fn copy_count(&self) -> usize {
        self.copies.len()
    }

    /// Answers at threshold 2^⌊log₂ k⌋; the query's k must be in [2, K].
    pub fn query(&self, rect: &RectQuery) -> Result<u64> {
        let k = rect.k();
        if k < Time::from_int(2) || k > Time::from_int(self.max_k as i64) {
            return Err(Error::validation(format!(
                "threshold {k} outside the supported range [2, {}]",
                self.max_k
            )));
        }
        let mut chosen = 1;
        for i in (1..=self.copies.len()).rev() {
            if Time::from_int(1 << i) <= k {
                chosen = i;
                break;
            }
        }
        self.copies[chosen - 1].query_rect(rect.lo(), rect.hi())
    }
}

/// Any of the geometric structures behind one interface; what the snapshot
/// format stores, distinguished by a structure-type tag.
#[derive(Clone, Debug)]
pub enum GeoIndex {
    OneD(GeoIndex1D),
    Slabbed(GeoIndexD),
    Tabulated(TabulationIndex),
    MultiK(MultiKIndex),
}

impl GeoIndex {
    pub fn structure(&self) -> &'static str {
        match self {
            GeoIndex::OneD(_) => "geo-1d",
            GeoIndex::Slabbed(_) => "geo-slab",
            GeoIndex::Tabulated(_) => "geo-tabulation",
            GeoIndex::MultiK(_) => "geo-multik",
        }
    }

    pub fn query(&self, rect: &RectQuery) -> Result<u64> {
        match self {
            GeoIndex::OneD(idx) => idx.query(rect),
            GeoIndex::Slabbed(idx) => idx.query(rect),
            GeoIndex::Tabulated(idx) => idx.query(rect),
            GeoIndex::MultiK(idx) => idx.query(rect),
        }
    }

    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        snap::write_u32(w, VERSION)?;
        match self {
            GeoIndex::OneD(idx) => {
                snap::write_u8(w, TAG_ONE_D)?;
                snap::write_time(w, idx.k)?;
                write_rank_map(&idx.rank_map, w)?;
                idx.core.save(w)
            }
            GeoIndex::Slabbed(idx) => {
                snap::write_u8(w, TAG_SLABBED)?;
                save_slabbed(idx, w)
            }
            GeoIndex::Tabulated(idx) => {
                snap::write_u8(w, TAG_TABULATED)?;
                snap::write_u32(w, idx.d as u32)?;
                snap::write_time(w, idx.k)?;
                write_rank_map(&idx.rank_map, w)?;
                snap::write_u64(w, idx.table.len() as u64)?;
                for &v in &idx.table {
                    snap::write_u32(w, v)?;
                }
                Ok(())
            }
            GeoIndex::MultiK(idx) => {
                snap::write_u8(w, TAG_MULTI_K)?;
                snap::write_u32(w, idx.d as u32)?;
                snap::write_u64(w, idx.max_k)?;
                snap::write_u32(w, idx.copies.len() as u32)?;
                for copy in &idx.copies {
                    save_slabbed(copy, w)?;
                }
                Ok(())
            }
        }
    }

    pub fn load(r: &mut impl Read) -> Result<GeoIndex> {
        snap::expect_magic(r, MAGIC)?;
        snap::expect_version(r, VERSION)?;
        match snap::read_u8(r)? {
            TAG_ONE_D => {
                let k = snap::read_time(r)?;
                let rank_map = read_rank_map(r)?;
                let core = Staircase1D::load(r)?;
                Ok(GeoIndex::OneD(GeoIndex1D { k, rank_map, core }))
            }
            TAG_SLABBED => Ok(GeoIndex::Slabbed(load_slabbed(r)?)),
            TAG_TABULATED => {
                let d = snap::read_u32(r)? as usize;
                let k = snap::read_time(r)?;
                let rank_map = read_rank_map(r)?;
                let len = snap::read_len(r, "table entry")?;
                let mut expected: u128 = 1;
                for dim in 0..rank_map.dims() {
                    let m = rank_map.size(dim) as u128;
                    expected = expected.saturating_mul(m * m);
                }
                if d != rank_map.dims() || len as u128 != expected {
                    return Err(Error::Snapshot(format!(
                        "table holds {len} entries, expected {expected} for {d} dimensions"
                    )));
                }
                let mut table = Vec::with_capacity(len);
                for _ in 0..len {
                    table.push(snap::read_u32(r)?);
                }
                Ok(GeoIndex::Tabulated(TabulationIndex {
                    d,
                    k,
                    rank_map,
                    table,
                }))
            }
            TAG_MULTI_K => {
                let d = snap::read_u32(r)? as usize;
                let max_k = snap::read_u64(r)?;
                let count = snap::read_u32(r)? as usize;
                let mut copies = Vec::with_capacity(count);
                for _ in 0..count {
                    copies.push(load_slabbed(r)?);
                }
                Ok(GeoIndex::MultiK(MultiKIndex { d, max_k, copies }))
            }
            tag => Err(Error::Snapshot(format!("unknown structure tag {tag}"))),
        }
    }
}

fn save_slabbed(idx: &GeoIndexD, w: &mut impl Write) -> Result<()> {
    snap::write_u32(w, idx.d as u32)?;
    snap::write_time(w, idx.k)?;
    write_rank_map(&idx.rank_map, w)?;
    snap::write_u64(w, idx.slabs.len() as u64)?;
    for (key, slab) in &idx.slabs {
        snap::write_u32(w, key.len() as u32)?;
        for &(lo, hi) in key {
            snap::write_u32(w, lo)?;
            snap::write_u32(w, hi)?;
        }
        slab.save(w)?;
    }
    Ok(())
}

fn load_slabbed(r: &mut impl Read) -> Result<GeoIndexD> {
    let d = snap::read_u32(r)? as usize;
    let k = snap::read_time(r)?;
    let rank_map = read_rank_map(r)?;
    let count = snap::read_len(r, "slab")?;
    if d != rank_map.dims() || count as u128 != slab_structure_count(&rank_map) {
        return Err(Error::Snapshot(format!(
            "{count} slabs for {d} dimensions, expected {}",
            slab_structure_count(&rank_map)
        )));
    }
    let mut slabs = BTreeMap::new();
    for _ in 0..count {
        let key_len = snap::read_u32(r)? as usize;
        let mut key = Vec::with_capacity(key_len);
        for _ in 0..key_len {
            let lo = snap::read_u32(r)?;
            let hi = snap::read_u32(r)?;
            key.push((lo, hi));
        }
        slabs.insert(key, Staircase1D::load(r)?);
    }
    Ok(GeoIndexD {
        d,
        k,
        rank_map,
        slabs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_geo_count;

    fn t(v: i64) -> Time {
        Time::from_int(v)
    }

    fn line_user(times: &[i64]) -> Vec<GeoTriplet> {
        times
            .iter()
            .enumerate()
            .map(|(i, &v)| GeoTriplet {
                user: 0,
                point: vec![(i + 1) as f64],
                time: t(v),
            })
            .collect()
    }

    #[test]
    fn one_user_line() {
        let data = line_user(&[3, 3, 3]);
        let idx = GeoIndex1D::build(&data, t(5)).unwrap();
        assert_eq!(idx.interval_count(), 2);
        assert_eq!(idx.query_interval(1.0, 2.0), 1);
        assert_eq!(idx.query_interval(1.0, 1.0), 0);
        assert_eq!(idx.query_interval(2.0, 3.0), 1);
        assert_eq!(idx.query_interval(1.0, 3.0), 1);
        assert_eq!(idx.query_interval(5.0, 9.0), 0);
    }

    #[test]
    fn empty_dataset_structures() {
        let idx = GeoIndex1D::build(&[], t(5)).unwrap();
        assert_eq!(idx.query_interval(0.0, 100.0), 0);
        let tab = TabulationIndex::build(&[], 2, t(5), DEFAULT_GEO_BUDGET).unwrap();
        assert_eq!(tab.entry_count(), 0);
        assert_eq!(tab.query_rect(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn horizontal_line_in_two_dims() {
        // all points share y=2: every slab containing rank(2.0) answers like 1D
        let data: Vec<GeoTriplet> = (1..=4)
            .map(|i| GeoTriplet {
                user: 0,
                point: vec![i as f64, 2.0],
                time: t(3),
            })
            .collect();
        let idx = GeoIndexD::build(&data, 2, t(6), DEFAULT_GEO_BUDGET).unwrap();
        assert_eq!(idx.slab_count(), 1);
        assert_eq!(idx.query_rect(&[1.0, 0.0], &[2.0, 5.0]).unwrap(), 1);
        assert_eq!(idx.query_rect(&[1.0, 0.0], &[1.0, 5.0]).unwrap(), 0);
        assert_eq!(idx.query_rect(&[1.0, 3.0], &[2.0, 5.0]).unwrap(), 0);
    }

    #[test]
    fn small_random_instance_matches_oracle_everywhere() {
        let data = crate::generate::gen_geo_instance(5, 12, 9, 2, (1, 4));
        let k = t(6);
        let dd = GeoIndexD::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap();
        let tab = TabulationIndex::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap();
        let map = RankMap::build(&data, 2).unwrap();
        for lo0 in 1..=map.size(0) as u32 {
            for hi0 in lo0..=map.size(0) as u32 {
                for lo1 in 1..=map.size(1) as u32 {
                    for hi1 in lo1..=map.size(1) as u32 {
                        let lo = vec![map.coord(0, lo0), map.coord(1, lo1)];
                        let hi = vec![map.coord(0, hi0), map.coord(1, hi1)];
                        let rect = RectQuery::new(lo.clone(), hi.clone(), k).unwrap();
                        let expect = oracle_geo_count(&data, &rect).unwrap();
                        assert_eq!(dd.query(&rect).unwrap(), expect, "dd {lo:?} {hi:?}");
                        assert_eq!(tab.query(&rect).unwrap(), expect, "tab {lo:?} {hi:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn budget_errors() {
        let data = crate::generate::gen_geo_instance(2, 6, 20, 2, (1, 4));
        assert!(matches!(
            GeoIndexD::build(&data, 2, t(4), 10),
            Err(Error::Resource { .. })
        ));
        assert!(matches!(
            TabulationIndex::build(&data, 2, t(4), 10),
            Err(Error::Resource { .. })
        ));
        assert!(matches!(
            MultiKIndex::build(&data, 2, 16, 10),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn multi_k_selects_the_right_copy() {
        let data = line_user(&[3, 3, 3]);
        let idx = MultiKIndex::build(&data, 1, 16, DEFAULT_GEO_BUDGET).unwrap();
        assert_eq!(idx.copy_count(), 4);
        // k=4 → copy at 4; the full line holds 9 total
        let rect = |k: i64| RectQuery::new(vec![1.0], vec![3.0], t(k)).unwrap();
        assert_eq!(idx.query(&rect(4)).unwrap(), 1);
        assert_eq!(idx.query(&rect(9)).unwrap(), 1);
        assert_eq!(idx.query(&rect(16)).unwrap(), 0);
        assert!(idx.query(&rect(1)).is_err());
        assert!(idx.query(&rect(17)).is_err());
        // non-integer thresholds pick the power of two below
        let frac = RectQuery::new(vec![1.0], vec![3.0], "8.5".parse().unwrap()).unwrap();
        assert_eq!(idx.query(&frac).unwrap(), idx.query(&rect(8)).unwrap());
    }

    #[test]
    fn corrupt_geo_snapshots_fail_to_load() {
        let data = crate::generate::gen_geo_instance(3, 6, 5, 2, (1, 4));
        let tab = GeoIndex::Tabulated(
            TabulationIndex::build(&data, 2, t(3), DEFAULT_GEO_BUDGET).unwrap(),
        );
        let mut bytes = Vec::new();
        tab.save(&mut bytes).unwrap();
        assert!(GeoIndex::load(&mut &bytes[..16]).is_err(), "truncated");
        let cut = bytes.len() - 4; // drop one table entry
        assert!(matches!(
            GeoIndex::load(&mut &bytes[..cut]),
            Err(Error::Io(_) | Error::Snapshot(_))
        ));

        let slab = GeoIndex::Slabbed(GeoIndexD::build(&data, 2, t(3), DEFAULT_GEO_BUDGET).unwrap());
        let mut bytes = Vec::new();
        slab.save(&mut bytes).unwrap();
        let mut fewer_slabs = bytes.clone();
        // slab count sits right after the tag, k, and rank map
        let pos = bytes.len()
            - find_slab_section_len(&bytes)
            - 8;
        fewer_slabs[pos..pos + 8].copy_from_slice(&1u64.to_le_bytes());
        assert!(GeoIndex::load(&mut fewer_slabs.as_slice()).is_err());
    }

    // length of everything after the slab-count field, located by re-reading
    fn find_slab_section_len(bytes: &[u8]) -> usize {
        let mut r = bytes;
        snap::expect_magic(&mut r, MAGIC).unwrap();
        snap::expect_version(&mut r, VERSION).unwrap();
        snap::read_u8(&mut r).unwrap();
        snap::read_u32(&mut r).unwrap(); // d
        snap::read_time(&mut r).unwrap();
        read_rank_map(&mut r).unwrap();
        r.len() - 8
    }

    #[test]
    fn snapshot_round_trips() {
        let data = crate::generate::gen_geo_instance(9, 10, 8, 2, (1, 5));
        let k = t(5);
        let indexes = vec![
            GeoIndex::OneD(
                GeoIndex1D::build(&crate::generate::gen_geo_instance(9, 10, 8, 1, (1, 5)), k)
                    .unwrap(),
            ),
            GeoIndex::Slabbed(GeoIndexD::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap()),
            GeoIndex::Tabulated(TabulationIndex::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap()),
            GeoIndex::MultiK(MultiKIndex::build(&data, 2, 8, DEFAULT_GEO_BUDGET).unwrap()),
        ];
        for idx in indexes {
            let mut bytes = Vec::new();
            idx.save(&mut bytes).unwrap();
            let loaded = GeoIndex::load(&mut bytes.as_slice()).unwrap();
            let mut again = Vec::new();
            loaded.save(&mut again).unwrap();
            assert_eq!(bytes, again, "{}", idx.structure());
        }
    }
}
