//! Unbiased estimation of n_{Q,k} from uniformly sampled records.
//!
//! Each sample draws one triplet uniformly (with replacement) from the
//! query's regions, checks whether its user's aggregate over the whole query
//! reaches k, and contributes 1/c where c is the number of query regions the
//! user appears in; rescaling the accumulated sum by N_Q/s gives an unbiased
//! estimate. The accumulator stays in exact rational arithmetic so the
//! statistical tests see no rounding noise.

use num_rational::Ratio;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{RegionQuery, TripletStore};

/// Accuracy, confidence, and reproducibility knobs for one estimate.
#[derive(Clone, Copy, Debug)]
pub struct SamplingConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    /// Explicit sample count; when absent, [`sample_size`] decides.
    pub override_s: Option<u64>,
}

impl SamplingConfig {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Result<SamplingConfig> {
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
        Ok(SamplingConfig {
            epsilon,
            delta,
            seed,
            override_s: None,
        })
    }

    pub fn with_samples(mut self, s: u64) -> SamplingConfig {
        self.override_s = Some(s);
        self
    }
}

/// The estimate together with what produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Estimate {
    /// z · N_Q / s, exact; always within [0, N_Q].
    pub value: Ratio<i64>,
    /// Samples actually drawn.
    pub s_used: u64,
    /// Triplet count N_Q of the query's regions.
    pub query_triplets: u64,
}

impl Estimate {
    pub fn value_f64(&self) -> f64 {
        *self.value.numer() as f64 / *self.value.denom() as f64
    }
}

/// Samples sufficient for an additive ε·n_Q error with probability 1−δ:
/// ⌈r²/(2ε²) · ln(2/δ)⌉.
pub fn sample_size(epsilon: f64, delta: f64, r: usize) -> u64 {
    let r = r as f64;
    let s = (r * r) / (2.0 * epsilon * epsilon) * (2.0 / delta).ln();
    s.ceil() as u64
}

/// Runs the estimator with an explicit configuration.
pub fn estimate_count(
    store: &TripletStore,
    q: &RegionQuery,
    cfg: &SamplingConfig,
) -> Result<Estimate> {
    store.validate_query(q)?;
    let total = store.query_triplet_count(q)?;
    if total == 0 {
        return Ok(Estimate {
            value: Ratio::from_integer(0),
            s_used: 0,
            query_triplets: 0,
        });
    }
    let s = cfg
        .override_s
        .unwrap_or_else(|| sample_size(cfg.epsilon, cfg.delta, q.region_count()));
    if s == 0 {
        return Err(Error::validation("sample count must be positive"));
    }

    // cumulative region sizes let one uniform draw over [0, N_Q) pick a
    // region proportionally to |R_j| and an element within it
    let mut bounds = Vec::with_capacity(q.region_count());
    let mut acc = 0u64;
    for &j in q.regions() {
        acc += store.region_list(j)?.len() as u64;
        bounds.push((acc, j));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut z: Ratio<i64> = Ratio::from_integer(0);
    for _ in 0..s {
        let pick = rng.random_range(0..total);
        let slot = bounds.partition_point(|&(end, _)| end <= pick);
        let (end, region) = bounds[slot];
        let list = store.region_list(region)?;
        let offset = (list.len() as u64 - (end - pick)) as usize;
        let (user, sampled_time) = list[offset];

        let mut appearances = 1i64;
        let mut aggregate = sampled_time;
        for &other in q.regions() {
            if other == region {
                continue;
            }
            let t = store.lookup_time(user, other);
            if t.is_positive() {
                appearances += 1;
                aggregate += t;
            }
        }
        if aggregate >= q.k() {
            z += Ratio::new(1, appearances);
        }
    }

    Ok(Estimate {
        value: z * Ratio::new(total as i64, s as i64),
        s_used: s,
        query_triplets: total,
    })
}

/// Convenience form: derive the sample size from (ε, δ, r), then estimate.
pub fn estimate_with_guarantee(
    store: &TripletStore,
    q: &RegionQuery,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<Estimate> {
    let cfg = SamplingConfig::new(epsilon, delta, seed)?;
    estimate_count(store, q, &cfg)
}

/// The deterministic contribution φ/c a sampled record of `user` makes.
/// Averaging these over all of T_Q and scaling by N_Q recovers n_{Q,k}
/// exactly, which is what makes the estimator unbiased.
pub fn triplet_contribution(
    store: &TripletStore,
    q: &RegionQuery,
    user: crate::model::UserId,
) -> Ratio<i64> {
    let mut appearances = 0i64;
    let mut aggregate = crate::time::Time::ZERO;
    for &j in q.regions() {
        let t = store.lookup_time(user, j);
        if t.is_positive() {
            appearances += 1;
            aggregate += t;
        }
    }
    if appearances > 0 && aggregate >= q.k() {
        Ratio::new(1, appearances)
    } else {
        Ratio::from_integer(0)
    }
}
