//! Sketch behavior beyond unit scope: mergeability against a one-region
//! rebuild, saturation safety, and the probabilistic answer band.

use clav_core::generate::gen_instance;
use clav_core::oracle::oracle_count;
use clav_core::sketch::{merge_sketches, sketch_query, sketch_region, SketchParams, SketchSet};
use clav_core::{RegionQuery, Time, TripletStore};

/// r regions; `qualifying` users split k evenly across all of them, the rest
/// carry a k/4 aggregate. Total users = 2 × qualifying.
fn band_instance(qualifying: usize, r: u32, k: i64) -> TripletStore {
    let users = 2 * qualifying;
    let mut records = Vec::new();
    for u in 0..users as u32 {
        for region in 0..r {
            let per_region = if (u as usize) < qualifying {
                Time::new(k, r as i64)
            } else {
                Time::new(k, 4 * r as i64)
            };
            records.push((u, region, per_region));
        }
    }
    TripletStore::with_dimensions(records, users, r as usize).unwrap()
}

#[test]
fn merge_equals_one_region_rebuild_without_saturation() {
    // users partitioned across regions; r chosen so no slot can saturate
    for seed in 0..20 {
        let store = gen_instance(seed, 40, 4, 1.0, (30, 60)).unwrap();
        let mut partitioned = Vec::new();
        let mut concatenated = Vec::new();
        for t in store.triplets() {
            if t.region == t.user % 4 {
                partitioned.push((t.user, t.region, t.time));
                concatenated.push((t.user, 0u32, t.time));
            }
        }
        let split = TripletStore::with_dimensions(partitioned, 40, 4).unwrap();
        let merged_store = TripletStore::with_dimensions(concatenated, 40, 1).unwrap();

        // k = 4000 with times ≤ 60 keeps every increment at most 1 for r=16
        let params = SketchParams::new(40, 16, Time::from_int(4000), 0.125, 0.1, seed).unwrap();
        let per_region: Vec<_> = (0..4)
            .map(|j| sketch_region(&split, j, &params).unwrap())
            .collect();
        let refs: Vec<_> = per_region.iter().collect();
        let merged = merge_sketches(&refs, &params).unwrap();
        let rebuilt = sketch_region(&merged_store, 0, &params).unwrap();
        assert_eq!(merged, rebuilt, "seed {seed}");
    }
}

#[test]
fn counters_never_exceed_cap() {
    for seed in 0..10 {
        let store = gen_instance(seed, 50, 5, 0.8, (1, 200)).unwrap();
        let params = SketchParams::new(50, 3, Time::from_int(40), 0.25, 0.1, seed).unwrap();
        let set = SketchSet::build(&store, params).unwrap();
        let cap = set.params.cap();
        let sketches: Vec<_> = (0..5).map(|j| set.get(j).unwrap()).collect();
        for s in &sketches {
            assert!(s.max_counter() <= cap);
        }
        let merged = merge_sketches(&sketches, &set.params).unwrap();
        assert!(merged.max_counter() <= cap);
    }
}

#[test]
fn answers_stay_in_the_probabilistic_band() {
    let qualifying = 64usize;
    let r = 2u32;
    let k = 16i64;
    let store = band_instance(qualifying, r, k);
    let regions: Vec<u32> = (0..r).collect();

    let truth = oracle_count(
        &store,
        &RegionQuery::new(regions.iter().copied(), Time::from_int(k)).unwrap(),
    )
    .unwrap() as f64;
    assert_eq!(truth as usize, qualifying);
    // threshold k(1-1/r), which the sketch may legitimately count
    let relaxed = oracle_count(
        &store,
        &RegionQuery::new(regions.iter().copied(), Time::new(k * (r as i64 - 1), r as i64)).unwrap(),
    )
    .unwrap() as f64;
    let users_in_q = 2.0 * qualifying as f64;

    let epsilon = 0.125;
    let trials = 200;
    let mut hits = 0usize;
    for seed in 0..trials as u64 {
        let params =
            SketchParams::new(store.n() as u64, r, Time::from_int(k), epsilon, 0.05, seed)
                .unwrap();
        let sketches: Vec<_> = regions
            .iter()
            .map(|&j| sketch_region(&store, j, &params).unwrap())
            .collect();
        let refs: Vec<_> = sketches.iter().collect();
        let est = sketch_query(&refs, &params).unwrap();

        let levels = params.levels();
        for &v in &est.per_repetition {
            assert!(
                v == 0 || (v.is_power_of_two() && v <= 1 << (levels - 1)),
                "per-repetition value {v} is not a power of two within range"
            );
        }

        let value = est.value as f64;
        if value >= truth / 3.0 && value <= 3.0 * relaxed + 4.0 * epsilon * users_in_q {
            hits += 1;
        }
    }
    assert!(
        hits as f64 >= 0.9 * trials as f64,
        "only {hits}/{trials} runs inside the band"
    );
}
