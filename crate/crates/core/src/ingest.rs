//! Flat-file ingestion.
//!
//! Triplet files are UTF-8 text, one `user,region,time` record per line with
//! `time` a decimal; geo files carry `user,x_1,...,x_d,time`. Lines starting
//! with `#` and blank lines are ignored. External ids are arbitrary strings;
//! they are assigned dense integer ids in order of first appearance, and the
//! assignment can be written to a sidecar mapping file.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{GeoTriplet, RegionId, Triplet, TripletStore, UserId};
use crate::time::Time;

/// Dense-id assignments produced during ingestion.
#[derive(Clone, Debug, Default)]
pub struct IdMap {
    users: Vec<String>,
    regions: Vec<String>,
    user_ids: HashMap<String, UserId>,
    region_ids: HashMap<String, RegionId>,
}

impl IdMap {
    fn user_id(&mut self, external: &str) -> UserId {
        if let Some(&id) = self.user_ids.get(external) {
            return id;
        }
        let id = self.users.len() as UserId;
        self.users.push(external.to_string());
        self.user_ids.insert(external.to_string(), id);
        id
    }

    fn region_id(&mut self, external: &str) -> RegionId {
        if let Some(&id) = self.region_ids.get(external) {
            return id;
        }
        let id = self.regions.len() as RegionId;
        self.regions.push(external.to_string());
        self.region_ids.insert(external.to_string(), id);
        id
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn external_user(&self, id: UserId) -> Option<&str> {
        self.users.get(id as usize).map(|s| s.as_str())
    }

    pub fn external_region(&self, id: RegionId) -> Option<&str> {
        self.regions.get(id as usize).map(|s| s.as_str())
    }

    /// Writes `kind,external,dense` lines for every assignment.
    pub fn write_sidecar(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# kind,external_id,dense_id")?;
        for (i, ext) in self.users.iter().enumerate() {
            writeln!(w, "user,{ext},{i}")?;
        }
        for (j, ext) in self.regions.iter().enumerate() {
            writeln!(w, "region,{ext},{j}")?;
        }
        Ok(())
    }
}

fn parse_time_field(field: &str, line: usize) -> Result<Time> {
    let time: Time = field
        .parse()
        .map_err(|e| Error::Parse { line, msg: e })?;
    if !time.is_positive() {
        return Err(Error::validation(format!(
            "line {line}: time must be positive, got {time}"
        )));
    }
    Ok(time)
}

/// Reads a triplet file into a normalized store plus the id assignments.
pub fn ingest_triplets(reader: impl BufRead) -> Result<(TripletStore, IdMap)> {
    let mut ids = IdMap::default();
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut fields = text.split(',');
        let (user, region, time) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(u), Some(r), Some(t), None) => (u.trim(), r.trim(), t.trim()),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `user,region,time`, got {text:?}"),
                })
            }
        };
        if user.is_empty() || region.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty user or region id".into(),
            });
        }
        let time = parse_time_field(time, line_no)?;
        records.push((ids.user_id(user), ids.region_id(region), time));
    }
    let store = TripletStore::with_dimensions(records, ids.user_count(), ids.region_count())?;
    Ok((store, ids))
}

/// Reads a geo file. When `dims` is `None` the dimension is inferred from the
/// first record; every record must then match it.
pub fn ingest_geo(reader: impl BufRead, dims: Option<usize>) -> Result<(Vec<GeoTriplet>, IdMap)> {
    let mut ids = IdMap::default();
    let mut dims = dims;
    let mut out: Vec<GeoTriplet> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `user,x_1,...,x_d,time`, got {text:?}"),
            });
        }
        let d = fields.len() - 2;
        match dims {
            None => dims = Some(d),
            Some(expect) if expect != d => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("record has {d} coordinates, expected {expect}"),
                })
            }
            _ => {}
        }
        let user = ids.user_id(fields[0]);
        let mut point = Vec::with_capacity(d);
        for f in &fields[1..=d] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad coordinate {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite coordinate {f:?}"),
                });
            }
            point.push(v);
        }
        let time = parse_time_field(fields[d + 1], line_no)?;
        // merge duplicate (user, point) records by summing
        if let Some(existing) = out
            .iter_mut()
            .find(|t| t.user == user && t.point == point)
        {
            existing.time += time;
        } else {
            out.push(GeoTriplet { user, point, time });
        }
    }
    Ok((out, ids))
}

/// Writes a store back out as a triplet file with dense numeric ids.
///
/// Records are emitted so that user and region ids first appear in increasing
/// order; re-ingesting the output then reassigns exactly the same ids and
/// reproduces the store.
pub fn write_triplets(store: &TripletStore, mut w: impl Write) -> Result<()> {
    for &idx in &emission_order(store) {
        let Triplet { user, region, time } = store.triplets()[idx];
        writeln!(w, "{user},{region},{time}")?;
    }
    Ok(())
}

/// Orders triplets so that id `u` is never seen before ids `0..u` (users and
/// regions alike). Any store produced by ingestion admits such an order; if a
/// hand-built store does not, the leftovers are appended in sorted order.
fn emission_order(store: &TripletStore) -> Vec<usize> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let triplets = store.triplets();
    let mut by_user: Vec<Vec<(RegionId, usize)>> = vec![Vec::new(); store.n()];
    let mut by_region: Vec<Vec<(UserId, usize)>> = vec![Vec::new(); store.m()];
    for (idx, t) in triplets.iter().enumerate() {
        by_user[t.user as usize].push((t.region, idx));
        by_region[t.region as usize].push((t.user, idx));
    }
    // consume from the low end via pop
    for list in &mut by_user {
        list.sort_unstable_by_key(|&(r, _)| Reverse(r));
    }
    for list in &mut by_region {
        list.sort_unstable_by_key(|&(u, _)| Reverse(u));
    }

    let mut heap: BinaryHeap<Reverse<(UserId, RegionId, usize)>> = BinaryHeap::new();
    let mut introduced_users = 0usize; // ids 0..introduced_users have appeared
    let mut introduced_regions = 0usize;
    let mut emitted = vec![false; triplets.len()];
    let mut order = Vec::with_capacity(triplets.len());

    let drain_user = |u: usize,
                      max_region: usize,
                      by_user: &mut Vec<Vec<(RegionId, usize)>>,
                      heap: &mut BinaryHeap<Reverse<(UserId, RegionId, usize)>>| {
        if u >= by_user.len() {
            return;
        }
        while let Some(&(r, idx)) = by_user[u].last() {
            if r as usize > max_region {
                break;
            }
            heap.push(Reverse((u as UserId, r, idx)));
            by_user[u].pop();
        }
    };
    let drain_region = |r: usize,
                        max_user: usize,
                        by_region: &mut Vec<Vec<(UserId, usize)>>,
                        heap: &mut BinaryHeap<Reverse<(UserId, RegionId, usize)>>| {
        if r >= by_region.len() {
            return;
        }
        while let Some(&(u, idx)) = by_region[r].last() {
            if u as usize > max_user {
                break;
            }
            heap.push(Reverse((u, r as RegionId, idx)));
            by_region[r].pop();
        }
    };

    drain_user(0, 0, &mut by_user, &mut heap);
    while let Some(Reverse((u, r, idx))) = heap.pop() {
        if emitted[idx] {
            continue;
        }
        emitted[idx] = true;
        order.push(idx);
        if u as usize == introduced_users {
            introduced_users += 1;
            drain_user(introduced_users, introduced_regions, &mut by_user, &mut heap);
        }
        if r as usize == introduced_regions {
            introduced_regions += 1;
            drain_region(introduced_regions, introduced_users, &mut by_region, &mut heap);
        }
    }

    if order.len() < triplets.len() {
        for (idx, seen) in emitted.iter().enumerate() {
            if !seen {
                order.push(idx);
            }
        }
    }
    order
}
