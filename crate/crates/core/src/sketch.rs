//! Mergeable per-region sketches with threshold extraction.
//!
//! Each region is summarized by `R` independent repetitions of an FM-style
//! level structure: users land at level `tail(h(u))`, and instead of a single
//! bit each level keeps a short vector of `W = ⌈1/ε⌉` saturating counters.
//! A user contributes `⌊τ·r²/k⌋` to one counter of its level, capped at `r²`;
//! users below `k/r²` contribute nothing. Merging regions sums counters
//! entrywise (capped), and the query reports `2^ℓ̃` for the largest level ℓ̃
//! holding a counter of at least `r² − r`, boosted by taking the median over
//! repetitions.

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{RegionId, TripletStore, UserId};
use crate::snapshot as snap;
use crate::time::Time;

const MAGIC: &[u8; 8] = b"CLAVSKT\0";
const VERSION: u32 = 1;

/// 2^61 − 1, prime; large enough for any u32 id universe.
const HASH_PRIME: u64 = (1 << 61) - 1;

/// A pairwise-independent hash `x ↦ (a·x + b) mod p`, reduced by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct PairwiseHash {
    a: u64,
    b: u64,
}

impl PairwiseHash {
    fn draw(rng: &mut ChaCha8Rng) -> PairwiseHash {
        PairwiseHash {
            a: rng.random_range(1..HASH_PRIME),
            b: rng.random_range(0..HASH_PRIME),
        }
    }

    fn eval(&self, x: u64) -> u64 {
        ((self.a as u128 * x as u128 + self.b as u128) % HASH_PRIME as u128) as u64
    }
}

/// Number of trailing zeros of `x` in an `levels`-bit domain; zero maps to
/// the deepest level.
pub fn tail(x: u64, levels: usize) -> usize {
    if x == 0 {
        levels - 1
    } else {
        x.trailing_zeros() as usize
    }
}

/// Everything fixed at build time: problem parameters, derived shape, and the
/// seeded hash functions shared by all region sketches.
#[derive(Clone, Debug)]
pub struct SketchParams {
    n: u64,
    r: u32,
    k: Time,
    epsilon: f64,
    seed: u64,
    repetitions: usize,
    levels: usize,
    width: usize,
    cap: u64,
    threshold: u64,
    level_hash: Vec<PairwiseHash>,      // one per repetition
    slot_hash: Vec<Vec<PairwiseHash>>,  // per repetition, per level
}

impl SketchParams {
    /// Derives the sketch shape from the problem parameters:
    /// `L = ⌊log₂ n⌋ + 1` levels, `W = ⌈1/ε⌉` counters per level, and
    /// `R = ⌈8·ln(1/δ)⌉` repetitions.
    pub fn new(n: u64, r: u32, k: Time, epsilon: f64, delta: f64, seed: u64) -> Result<SketchParams> {
        if n == 0 {
            return Err(Error::validation("n must be at least 1"));
        }
        if r < 2 {
            return Err(Error::validation(format!("r must be at least 2, got {r}")));
        }
        if !k.is_positive() {
            return Err(Error::validation(format!("k must be positive, got {k}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::validation(format!(
                "epsilon must lie strictly in (0,1), got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::validation(format!(
                "delta must lie strictly in (0,1), got {delta}"
            )));
        }
        let repetitions = (8.0 * (1.0 / delta).ln()).ceil() as usize;
        Self::with_repetitions(n, r, k, epsilon, repetitions, seed)
    }

    /// Same as [`SketchParams::new`] but with the repetition count given
    /// directly (also used when reloading snapshots).
    pub fn with_repetitions(
        n: u64,
        r: u32,
        k: Time,
        epsilon: f64,
        repetitions: usize,
        seed: u64,
    ) -> Result<SketchParams> {
        if repetitions == 0 {
            return Err(Error::validation("repetition count must be at least 1"));
        }
        let levels = n.ilog2() as usize + 1;
        let width = (1.0 / epsilon).ceil() as usize;
        let cap = r as u64 * r as u64;
        let threshold = cap - r as u64;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut level_hash = Vec::with_capacity(repetitions);
        let mut slot_hash = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            level_hash.push(PairwiseHash::draw(&mut rng));
            slot_hash.push((0..levels).map(|_| PairwiseHash::draw(&mut rng)).collect());
        }

        Ok(SketchParams {
            n,
            r,
            k,
            epsilon,
            seed,
            repetitions,
            levels,
            width,
            cap,
            threshold,
            level_hash,
            slot_hash,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn k(&self) -> Time {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Saturation cap r².
    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// Extraction threshold r² − r.
    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    /// Bits per counter: ⌈log₂(r²+1)⌉.
    pub fn counter_bits(&self) -> u32 {
        (self.cap + 1).next_power_of_two().trailing_zeros()
    }

    /// Logical sketch size per region, in bits.
    pub fn size_bits(&self) -> u64 {
        self.repetitions as u64
            * self.levels as u64
            * self.width as u64
            * self.counter_bits() as u64
    }

    /// Level a user lands on in one repetition: trailing zeros of the
    /// L-bit hash of its id.
    pub fn user_level(&self, rep: usize, user: UserId) -> usize {
        self.level_of(rep, user)
    }

    fn level_of(&self, rep: usize, user: UserId) -> usize {
        let mask = if self.levels >= 64 {
            u64::MAX
        } else {
            (1u64 << self.levels) - 1
        };
        tail(self.level_hash[rep].eval(user as u64) & mask, self.levels)
    }

    fn slot_of(&self, rep: usize, level: usize, user: UserId) -> usize {
        (self.slot_hash[rep][level].eval(user as u64) % self.width as u64) as usize
    }

    /// The scaled increment ⌊τ·r²/k⌋, already capped at r².
    fn increment(&self, time: Time) -> u64 {
        if time >= self.k {
            return self.cap;
        }
        // τ < k here, so the floor is < r² and fits comfortably
        let num = (time.numer() as i128)
            .checked_mul(self.k.denom() as i128)
            .and_then(|v| v.checked_mul(self.cap as i128))
            .expect("scaled increment overflowed");
        let den = (time.denom() as i128)
            .checked_mul(self.k.numer() as i128)
            .expect("scaled increment overflowed");
        (num / den) as u64
    }

    fn entries(&self) -> usize {
        self.repetitions * self.levels * self.width
    }

    /// Cheap structural identity used to reject mixing incompatible sketches.
    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x1000_0000_01b3);
        };
        mix(self.seed);
        mix(self.n);
        mix(self.r as u64);
        mix(self.k.numer() as u64);
        mix(self.k.denom() as u64);
        mix(self.epsilon.to_bits());
        mix(self.repetitions as u64);
        h
    }
}

/// The counters of one region (or of a merged region set):
/// `repetitions × levels × width`, flattened, each value in `[0, r²]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionSketch {
    fingerprint: u64,
    counters: Vec<u64>,
}

impl RegionSketch {
    fn empty(params: &SketchParams) -> RegionSketch {
        RegionSketch {
            fingerprint: params.fingerprint(),
            counters: vec![0; params.entries()],
        }
    }

    fn check_compatible(&self, params: &SketchParams) -> Result<()> {
        if self.fingerprint != params.fingerprint() {
            return Err(Error::validation(
                "sketch was built with different parameters",
            ));
        }
        Ok(())
    }

    /// Largest counter value anywhere in the sketch.
    pub fn max_counter(&self) -> u64 {
        self.counters.iter().copied().max().unwrap_or(0)
    }
}

/// Builds the sketch of one region.
pub fn sketch_region(
    store: &TripletStore,
    region: RegionId,
    params: &SketchParams,
) -> Result<RegionSketch> {
    let mut sketch = RegionSketch::empty(params);
    for &(user, time) in store.region_list(region)? {
        let inc = params.increment(time);
        if inc == 0 {
            continue;
        }
        for rep in 0..params.repetitions {
            let level = params.level_of(rep, user);
            let slot = params.slot_of(rep, level, user);
            let idx = (rep * params.levels + level) * params.width + slot;
            let cell = &mut sketch.counters[idx];
            *cell = (*cell + inc).min(params.cap);
        }
    }
    Ok(sketch)
}

/// Entrywise saturating sum over any number of sketches: the full sum is
/// taken in a wide accumulator and capped once, so the result does not
/// depend on argument order.
pub fn merge_sketches(sketches: &[&RegionSketch], params: &SketchParams) -> Result<RegionSketch> {
    let mut merged = RegionSketch::empty(params);
    for s in sketches {
        s.check_compatible(params)?;
    }
    for (idx, cell) in merged.counters.iter_mut().enumerate() {
        let sum: u64 = sketches.iter().map(|s| s.counters[idx]).sum();
        *cell = sum.min(params.cap);
    }
    Ok(merged)
}

/// The estimate: the median of the per-repetition values, each a power of
/// two (or zero when no level reaches the threshold).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchEstimate {
    pub value: u64,
    pub per_repetition: Vec<u64>,
}

/// Merges the sketches of the query's regions and extracts the estimate.
pub fn sketch_query(
    sketches: &[&RegionSketch],
    params: &SketchParams,
) -> Result<SketchEstimate> {
    if sketches.len() > params.r as usize {
        return Err(Error::capability(format!(
            "query has {} regions but the sketch was built for at most r={}",
            sketches.len(),
            params.r
        )));
    }
    let merged = merge_sketches(sketches, params)?;

    let mut per_repetition = Vec::with_capacity(params.repetitions);
    for rep in 0..params.repetitions {
        let mut value = 0u64;
        for level in (0..params.levels).rev() {
            let base = (rep * params.levels + level) * params.width;
            let row = &merged.counters[base..base + params.width];
            if row.iter().any(|&c| c >= params.threshold) {
                value = 1u64 << level;
                break;
            }
        }
        per_repetition.push(value);
    }

    // lower median, deterministic for even repetition counts
    let mut sorted = per_repetition.clone();
    sorted.sort_unstable();
    let value = sorted[(sorted.len() - 1) / 2];
    Ok(SketchEstimate {
        value,
        per_repetition,
    })
}

/// Sketches for a set of regions sharing one parameter block; what the
/// snapshot format stores.
#[derive(Clone, Debug)]
pub struct SketchSet {
    pub params: SketchParams,
    sketches: std::collections::BTreeMap<RegionId, RegionSketch>,
}

impl SketchSet {
    /// Builds the sketch of every region in the store.
    pub fn build(store: &TripletStore, params: SketchParams) -> Result<SketchSet> {
        let mut sketches = std::collections::BTreeMap::new();
        for region in 0..store.m() as RegionId {
            sketches.insert(region, sketch_region(store, region, &params)?);
        }
        Ok(SketchSet { params, sketches })
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.sketches.keys().copied()
    }

    pub fn get(&self, region: RegionId) -> Result<&RegionSketch> {
        self.sketches
            .get(&region)
            .ok_or_else(|| Error::validation(format!("no sketch for region {region}")))
    }

    /// Runs the threshold query over the named regions.
    pub fn query(&self, regions: &[RegionId]) -> Result<SketchEstimate> {
        let mut work = Vec::with_capacity(regions.len());
        for &j in regions {
            work.push(self.get(j)?);
        }
        sketch_query(&work, &self.params)
    }

    /// Absorbs another set built with identical parameters; duplicate region
    /// ids are rejected.
    pub fn absorb(&mut self, other: SketchSet) -> Result<()> {
        if self.params.fingerprint() != other.params.fingerprint() {
            return Err(Error::validation(
                "sketch sets were built with different parameters",
            ));
        }
        for (region, sketch) in other.sketches {
            if self.sketches.insert(region, sketch).is_some() {
                return Err(Error::validation(format!(
                    "region {region} present in both sketch sets"
                )));
            }
        }
        Ok(())
    }

    /// Snapshot layout: parameter header, then per region the counter array
    /// bit-packed at ⌈log₂(r²+1)⌉ bits per counter. Two files are mergeable
    /// exactly when their headers match.
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        snap::write_u32(w, VERSION)?;
        snap::write_u64(w, self.params.seed)?;
        snap::write_u64(w, self.params.n)?;
        snap::write_u32(w, self.params.r)?;
        snap::write_time(w, self.params.k)?;
        snap::write_f64(w, self.params.epsilon)?;
        snap::write_u32(w, self.params.repetitions as u32)?;
        snap::write_u32(w, self.params.levels as u32)?;
        snap::write_u32(w, self.params.width as u32)?;
        snap::write_u64(w, self.sketches.len() as u64)?;
        let bits = self.params.counter_bits();
        for (&region, sketch) in &self.sketches {
            snap::write_u32(w, region)?;
            let packed = pack_counters(&sketch.counters, bits);
            snap::write_u64(w, packed.len() as u64)?;
            w.write_all(&packed)?;
        }
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<SketchSet> {
        snap::expect_magic(r, MAGIC)?;
        snap::expect_version(r, VERSION)?;
        let seed = snap::read_u64(r)?;
        let n = snap::read_u64(r)?;
        let rr = snap::read_u32(r)?;
        let k = snap::read_time(r)?;
        let epsilon = snap::read_f64(r)?;
        let repetitions = snap::read_u32(r)? as usize;
        let levels = snap::read_u32(r)? as usize;
        let width = snap::read_u32(r)? as usize;
        let params = SketchParams::with_repetitions(n, rr, k, epsilon, repetitions, seed)?;
        if params.levels != levels || params.width != width {
            return Err(Error::Snapshot(format!(
                "inconsistent header: levels {levels}/width {width} do not match \
                 the derived shape {}x{}",
                params.levels, params.width
            )));
        }
        let region_count = snap::read_len(r, "region sketch")?;
        let bits = params.counter_bits();
        let mut sketches = std::collections::BTreeMap::new();
        for _ in 0..region_count {
            let region = snap::read_u32(r)?;
            let len = snap::read_len(r, "packed byte")?;
            let mut packed = vec![0u8; len];
            r.read_exact(&mut packed)?;
            let counters = unpack_counters(&packed, bits, params.entries())?;
            if counters.iter().any(|&c| c > params.cap) {
                return Err(Error::Snapshot(format!(
                    "counter above cap {} in region {region}",
                    params.cap
                )));
            }
            sketches.insert(
                region,
                RegionSketch {
                    fingerprint: params.fingerprint(),
                    counters,
                },
            );
        }
        Ok(SketchSet { params, sketches })
    }
}

/// Packs each value into `bits` bits, LSB-first within a little-endian stream.
fn pack_counters(values: &[u64], bits: u32) -> Vec<u8> {
    let total_bits = values.len() * bits as usize;
    let mut out = vec![0u8; total_bits.div_ceil(8)];
    let mut pos = 0usize;
    for &v in values {
        for i in 0..bits as usize {
            if (v >> i) & 1 == 1 {
                out[(pos + i) / 8] |= 1 << ((pos + i) % 8);
            }
        }
        pos += bits as usize;
    }
    out
}

fn unpack_counters(packed: &[u8], bits: u32, count: usize) -> Result<Vec<u64>> {
    let needed = (count * bits as usize).div_ceil(8);
    if packed.len() != needed {
        return Err(Error::Snapshot(format!(
            "packed counter block is {} bytes, expected {needed}",
            packed.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut pos = 0usize;
    for _ in 0..count {
        let mut v = 0u64;
        for i in 0..bits as usize {
            if packed[(pos + i) / 8] >> ((pos + i) % 8) & 1 == 1 {
                v |= 1 << i;
            }
        }
        out.push(v);
        pos += bits as usize;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TripletStore;

    fn t(v: i64) -> Time {
        Time::from_int(v)
    }

    fn params(n: u64, r: u32, k: i64, epsilon: f64, seed: u64) -> SketchParams {
        SketchParams::new(n, r, t(k), epsilon, 0.05, seed).unwrap()
    }

    #[test]
    fn derived_shape() {
        let p = params(1000, 4, 100, 0.25, 1);
        assert_eq!(p.levels(), 10);
        assert_eq!(p.cap(), 16);
        assert_eq!(p.threshold(), 12);
        assert_eq!(p.counter_bits(), 5);
        // δ=0.05 → ⌈8·ln 20⌉ = 24 repetitions
        assert_eq!(p.repetitions(), 24);
        assert_eq!(params(1, 2, 5, 0.5, 1).levels(), 1);
    }

    #[test]
    fn same_seed_same_hashes() {
        let a = params(100, 2, 10, 0.2, 42);
        let b = params(100, 2, 10, 0.2, 42);
        assert_eq!(a.level_hash, b.level_hash);
        assert_eq!(a.slot_hash, b.slot_hash);
        let c = params(100, 2, 10, 0.2, 43);
        assert_ne!(a.level_hash, c.level_hash);
    }

    #[test]
    fn tail_convention() {
        assert_eq!(tail(12, 8), 2);
        assert_eq!(tail(1, 8), 0);
        assert_eq!(tail(0, 8), 7);
    }

    #[test]
    fn increment_scaling() {
        let p = params(10, 2, 100, 0.5, 1);
        assert_eq!(p.increment(t(30)), 1); // ⌊30·4/100⌋
        assert_eq!(p.increment(t(100)), 4); // τ = k saturates immediately
        assert_eq!(p.increment(t(24)), 0); // below k/r²
        assert_eq!(p.increment(t(25)), 1); // exactly k/r²
        let frac = params(10, 4, 1, 0.5, 1);
        assert_eq!(frac.increment("0.3".parse().unwrap()), 4); // ⌊0.3·16⌋
    }

    #[test]
    fn size_bits_formula() {
        let p = SketchParams::with_repetitions(1000, 4, t(10), 0.25, 5, 7).unwrap();
        assert_eq!(p.size_bits(), 5 * 10 * 4 * 5);
        let halved = SketchParams::with_repetitions(1000, 4, t(10), 0.125, 5, 7).unwrap();
        assert_eq!(halved.size_bits(), 2 * p.size_bits());
        assert!(SketchParams::with_repetitions(1000, 4, t(10), 0.25, 0, 7).is_err());
    }

    #[test]
    fn merge_identity_commutativity_saturation() {
        let store = TripletStore::from_triplets(vec![
            (0, 0, t(50)),
            (1, 0, t(80)),
            (2, 1, t(120)),
            (0, 1, t(60)),
        ])
        .unwrap();
        let p = params(4, 2, 100, 0.25, 3);
        let a = sketch_region(&store, 0, &p).unwrap();
        let b = sketch_region(&store, 1, &p).unwrap();
        let zero = RegionSketch::empty(&p);

        assert_eq!(merge_sketches(&[&a, &zero], &p).unwrap(), a);
        assert_eq!(
            merge_sketches(&[&a, &b], &p).unwrap(),
            merge_sketches(&[&b, &a], &p).unwrap()
        );

        let mut x = RegionSketch::empty(&p);
        let mut y = RegionSketch::empty(&p);
        x.counters[0] = 3;
        y.counters[0] = 2;
        let merged = merge_sketches(&[&x, &y], &p).unwrap();
        assert_eq!(merged.counters[0], 4); // capped at r² = 4
    }

    #[test]
    fn mismatched_params_rejected() {
        let store = TripletStore::from_triplets(vec![(0, 0, t(5)), (1, 1, t(5))]).unwrap();
        let p1 = params(2, 2, 5, 0.5, 1);
        let p2 = params(2, 2, 5, 0.5, 2);
        let a = sketch_region(&store, 0, &p1).unwrap();
        let b = sketch_region(&store, 1, &p2).unwrap();
        assert!(merge_sketches(&[&a, &b], &p1).is_err());
    }

    #[test]
    fn single_qualifying_user_is_exact_per_repetition() {
        // one user holding exactly k in one region: every repetition must
        // report 2^{tail(h(u))}
        let store = TripletStore::from_triplets(vec![(3, 0, t(100))]).unwrap();
        let p = SketchParams::new(8, 2, t(100), 0.25, 0.05, 99).unwrap();
        let sk = sketch_region(&store, 0, &p).unwrap();
        let est = sketch_query(&[&sk], &p).unwrap();
        for (rep, &v) in est.per_repetition.iter().enumerate() {
            let expected = 1u64 << p.level_of(rep, 3);
            assert_eq!(v, expected, "repetition {rep}");
        }
    }

    #[test]
    fn empty_region_reports_zero() {
        let store = TripletStore::with_dimensions(vec![(0, 0, t(1))], 4, 2).unwrap();
        let p = params(4, 2, 100, 0.25, 5);
        let sk = sketch_region(&store, 1, &p).unwrap();
        assert_eq!(sk.max_counter(), 0);
        let est = sketch_query(&[&sk], &p).unwrap();
        assert_eq!(est.value, 0);
        assert!(est.per_repetition.iter().all(|&v| v == 0));
    }

    #[test]
    fn query_size_capability() {
        let store =
            TripletStore::from_triplets(vec![(0, 0, t(5)), (0, 1, t(5)), (0, 2, t(5))]).unwrap();
        let p = params(1, 2, 10, 0.5, 1);
        let set = SketchSet::build(&store, p).unwrap();
        assert!(matches!(
            set.query(&[0, 1, 2]),
            Err(Error::Capability(_))
        ));
        assert!(set.query(&[0, 1]).is_ok());
    }

    #[test]
    fn snapshot_round_trip() {
        let store = crate::generate::gen_instance(21, 60, 6, 0.5, (1, 40)).unwrap();
        let p = params(60, 4, 50, 0.2, 17);
        let set = SketchSet::build(&store, p).unwrap();
        let mut bytes = Vec::new();
        set.save(&mut bytes).unwrap();
        let loaded = SketchSet::load(&mut bytes.as_slice()).unwrap();
        for region in 0..6 {
            assert_eq!(
                set.get(region).unwrap(),
                loaded.get(region).unwrap(),
                "region {region}"
            );
        }
        let mut again = Vec::new();
        loaded.save(&mut again).unwrap();
        assert_eq!(bytes, again);
        assert_eq!(
            set.query(&[0, 2, 4]).unwrap(),
            loaded.query(&[0, 2, 4]).unwrap()
        );
    }

    #[test]
    fn sets_merge_only_with_matching_headers() {
        let store = TripletStore::from_triplets(vec![(0, 0, t(9)), (1, 1, t(9))]).unwrap();
        let a = SketchSet::build(&store, params(2, 2, 5, 0.5, 1)).unwrap();
        let mut b = SketchSet::build(&store, params(2, 2, 5, 0.5, 1)).unwrap();
        let c = SketchSet::build(&store, params(2, 2, 5, 0.5, 2)).unwrap();
        assert!(b.absorb(c).is_err(), "different seed must be rejected");
        assert!(
            b.absorb(a).is_err(),
            "duplicate region ids must be rejected even with matching headers"
        );
    }

    #[test]
    fn bit_packing_round_trip() {
        let values = vec![0u64, 1, 16, 9, 31, 7, 0, 30];
        let packed = pack_counters(&values, 5);
        assert_eq!(packed.len(), 5); // 40 bits
        assert_eq!(unpack_counters(&packed, 5, values.len()).unwrap(), values);
    }
}
