//! The geometric structures must agree with the brute-force oracle, both on
//! random instances and on the adversarial axis layout.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use clav_core::generate::{axis_points, gen_geo_instance};
use clav_core::geo::{
    GeoIndex1D, GeoIndexD, MultiKIndex, RankMap, TabulationIndex, DEFAULT_GEO_BUDGET,
};
use clav_core::oracle::oracle_geo_count;
use clav_core::{GeoTriplet, RectQuery, Time};

fn t(v: i64) -> Time {
    Time::from_int(v)
}

/// Every combinatorially distinct rank rectangle of a 2D dataset.
fn all_rank_rects(map: &RankMap) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for lo0 in 1..=map.size(0) as u32 {
        for hi0 in lo0..=map.size(0) as u32 {
            for lo1 in 1..=map.size(1) as u32 {
                for hi1 in lo1..=map.size(1) as u32 {
                    out.push((
                        vec![map.coord(0, lo0), map.coord(1, lo1)],
                        vec![map.coord(0, hi0), map.coord(1, hi1)],
                    ));
                }
            }
        }
    }
    out
}

#[test]
fn one_dimension_matches_oracle() {
    for seed in 0..5 {
        let data = gen_geo_instance(seed, 20, 25, 1, (1, 6));
        let k = t(8);
        let idx = GeoIndex1D::build(&data, k).unwrap();
        assert!(idx.interval_count() <= data.len() as u64);

        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for _ in 0..1000 {
            let a = rng.random_range(-5.0..105.0);
            let b = rng.random_range(-5.0..105.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let rect = RectQuery::new(vec![lo], vec![hi], k).unwrap();
            assert_eq!(
                idx.query(&rect).unwrap(),
                oracle_geo_count(&data, &rect).unwrap(),
                "seed {seed} [{lo},{hi}]"
            );
        }
    }
}

#[test]
fn two_dimensions_exhaustive_small() {
    for seed in 0..3 {
        let data = gen_geo_instance(seed, 15, 10, 2, (1, 5));
        let k = t(7);
        let dd = GeoIndexD::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap();
        let tab = TabulationIndex::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap();
        for (intervals, records) in dd.slab_stats() {
            assert!(intervals <= records);
        }
        let map = RankMap::build(&data, 2).unwrap();
        for (lo, hi) in all_rank_rects(&map) {
            let rect = RectQuery::new(lo, hi, k).unwrap();
            let expect = oracle_geo_count(&data, &rect).unwrap();
            assert_eq!(dd.query(&rect).unwrap(), expect);
            assert_eq!(tab.query(&rect).unwrap(), expect);
        }
    }
}

#[test]
fn axis_layout_with_unit_times() {
    // points on the axes; each user spends unit time at the 2d boundary
    // points of one axis-aligned rectangle, k = 2d
    let d = 2;
    let m_prime = 4;
    let points = axis_points(d, m_prime);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut data = Vec::new();
    for user in 0..40u32 {
        let l1 = rng.random_range(1..=m_prime as i64);
        let r1 = rng.random_range(1..=m_prime as i64);
        let l2 = rng.random_range(1..=m_prime as i64);
        let r2 = rng.random_range(1..=m_prime as i64);
        for p in &points {
            let on_boundary = (p[0] == -(l1 as f64) && p[1] == 0.0)
                || (p[0] == r1 as f64 && p[1] == 0.0)
                || (p[0] == 0.0 && p[1] == -(l2 as f64))
                || (p[0] == 0.0 && p[1] == r2 as f64);
            if on_boundary {
                data.push(GeoTriplet {
                    user,
                    point: p.clone(),
                    time: t(1),
                });
            }
        }
    }
    let k = t(2 * d as i64);
    let dd = GeoIndexD::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap();
    let tab = TabulationIndex::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap();
    for l1 in 1..=m_prime as i64 {
        for r1 in 1..=m_prime as i64 {
            for l2 in 1..=m_prime as i64 {
                for r2 in 1..=m_prime as i64 {
                    let rect = RectQuery::new(
                        vec![-(l1 as f64), -(l2 as f64)],
                        vec![r1 as f64, r2 as f64],
                        k,
                    )
                    .unwrap();
                    let expect = oracle_geo_count(&data, &rect).unwrap();
                    assert_eq!(dd.query(&rect).unwrap(), expect, "{rect:?}");
                    assert_eq!(tab.query(&rect).unwrap(), expect, "{rect:?}");
                }
            }
        }
    }
}

#[test]
fn correctness_survives_rank_preserving_perturbation() {
    let data = gen_geo_instance(8, 10, 8, 2, (1, 5));
    let k = t(6);
    // squash coordinates through a strictly increasing map
    let warped: Vec<GeoTriplet> = data
        .iter()
        .map(|p| GeoTriplet {
            user: p.user,
            point: p.point.iter().map(|&c| (c * 0.25).exp()).collect(),
            time: p.time,
        })
        .collect();
    let idx = GeoIndexD::build(&data, 2, k, DEFAULT_GEO_BUDGET).unwrap();
    let warped_idx = GeoIndexD::build(&warped, 2, k, DEFAULT_GEO_BUDGET).unwrap();
    let map = RankMap::build(&data, 2).unwrap();
    for (lo, hi) in all_rank_rects(&map) {
        let wlo: Vec<f64> = lo.iter().map(|&c| (c * 0.25).exp()).collect();
        let whi: Vec<f64> = hi.iter().map(|&c| (c * 0.25).exp()).collect();
        let a = idx.query(&RectQuery::new(lo, hi, k).unwrap()).unwrap();
        let b = warped_idx
            .query(&RectQuery::new(wlo, whi, k).unwrap())
            .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn three_dimensions_match_oracle() {
    let data = gen_geo_instance(21, 8, 8, 3, (1, 4));
    let k = t(5);
    let dd = GeoIndexD::build(&data, 3, k, DEFAULT_GEO_BUDGET).unwrap();
    let tab = TabulationIndex::build(&data, 3, k, DEFAULT_GEO_BUDGET).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..800 {
        let lo: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..34.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|&c| c + rng.random_range(0.0..30.0)).collect();
        let rect = RectQuery::new(lo, hi, k).unwrap();
        let expect = oracle_geo_count(&data, &rect).unwrap();
        assert_eq!(dd.query(&rect).unwrap(), expect, "{rect:?}");
        assert_eq!(tab.query(&rect).unwrap(), expect, "{rect:?}");
    }
}

#[test]
fn multi_k_sandwich_on_random_instances() {
    for seed in 0..3 {
        let data = gen_geo_instance(30 + seed, 15, 10, 2, (1, 6));
        let max_k = 32u64;
        let idx = MultiKIndex::build(&data, 2, max_k, DEFAULT_GEO_BUDGET).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        for _ in 0..500 {
            let lo: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..42.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|&c| c + rng.random_range(0.0..40.0)).collect();
            let k = rng.random_range(2..=max_k as i64);
            let rect = RectQuery::new(lo.clone(), hi.clone(), t(k)).unwrap();
            let got = idx.query(&rect).unwrap();

            let at_k = oracle_geo_count(&data, &rect).unwrap();
            let at_half =
                oracle_geo_count(&data, &RectQuery::new(lo, hi, Time::new(k, 2)).unwrap())
                    .unwrap();
            assert!(
                at_k <= got && got <= at_half,
                "k={k}: {at_k} <= {got} <= {at_half} violated"
            );

            // exact when k is a power of two
            if k & (k - 1) == 0 {
                assert_eq!(got, at_k);
            }
        }
    }
}

#[test]
fn multi_k_monotone_in_k() {
    let data = gen_geo_instance(77, 12, 8, 2, (1, 6));
    let idx = MultiKIndex::build(&data, 2, 64, DEFAULT_GEO_BUDGET).unwrap();
    let lo = vec![0.0, 0.0];
    let hi = vec![40.0, 40.0];
    let mut prev = u64::MAX;
    for k in 2..=64i64 {
        let rect = RectQuery::new(lo.clone(), hi.clone(), t(k)).unwrap();
        let got = idx.query(&rect).unwrap();
        assert!(got <= prev, "k={k}");
        prev = got;
    }
}
