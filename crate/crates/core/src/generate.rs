//! Seeded instance generators for tests and benchmarks. All of them are
//! deterministic functions of their arguments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{GeoTriplet, TripletStore};
use crate::time::Time;

/// Random store over `n` users and `m` regions. Each `(user, region)` pair is
/// present with probability `density`, with an integer time drawn uniformly
/// from `time_range` (inclusive).
pub fn gen_instance(
    seed: u64,
    n: usize,
    m: usize,
    density: f64,
    time_range: (i64, i64),
) -> Result<TripletStore> {
    assert!(n > 0 && m > 0, "n and m must be positive");
    assert!(density > 0.0 && density <= 1.0, "density must be in (0,1]");
    assert!(
        0 < time_range.0 && time_range.0 <= time_range.1,
        "time range must be positive and ordered"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for user in 0..n as u32 {
        for region in 0..m as u32 {
            if rng.random::<f64>() < density {
                let t = rng.random_range(time_range.0..=time_range.1);
                records.push((user, region, Time::from_int(t)));
            }
        }
    }
    TripletStore::with_dimensions(records, n, m)
}

/// Random geo dataset: `m` distinct lattice points in `d` dimensions, each of
/// the `n` users visiting each point with probability 0.4.
pub fn gen_geo_instance(
    seed: u64,
    n: usize,
    m: usize,
    d: usize,
    time_range: (i64, i64),
) -> Vec<GeoTriplet> {
    assert!(n > 0 && m > 0 && d > 0);
    assert!(0 < time_range.0 && time_range.0 <= time_range.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // lattice coordinates keep rank collisions common across dimensions
    let span = (4 * m) as i64;
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(m);
    while points.len() < m {
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(0..span) as f64).collect();
        if !points.contains(&p) {
            points.push(p);
        }
    }
    let mut out = Vec::new();
    for user in 0..n as u32 {
        for p in &points {
            if rng.random::<f64>() < 0.4 {
                let t = rng.random_range(time_range.0..=time_range.1);
                out.push(GeoTriplet {
                    user,
                    point: p.clone(),
                    time: Time::from_int(t),
                });
            }
        }
    }
    out
}

/// The adversarial axis layout: `2·d·m_prime` points on the coordinate axes,
/// at offsets `-m_prime..=-1` and `1..=m_prime` in each dimension. Callers
/// attach users and times.
pub fn axis_points(d: usize, m_prime: usize) -> Vec<Vec<f64>> {
    assert!(d > 0 && m_prime > 0);
    let mut out = Vec::with_capacity(2 * d * m_prime);
    for dim in 0..d {
        for s in -(m_prime as i64)..=(m_prime as i64) {
            if s == 0 {
                continue;
            }
            let mut p = vec![0.0; d];
            p[dim] = s as f64;
            out.push(p);
        }
    }
    out
}
