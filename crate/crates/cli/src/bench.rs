//! Space/time tradeoff measurements over a λ grid.
//!
//! For each λ the harness builds the exact index, reports its space
//! accounting, and measures the median latency of a fixed seeded query
//! workload, checking every answer against the brute-force oracle. Budget
//! errors mark their row and leave the remaining rows intact.

use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use clav_core::exact::{Budget, ExactIndex, SpaceReport};
use clav_core::ingest::ingest_triplets;
use clav_core::oracle::oracle_count;
use clav_core::{Error, RegionQuery, Result, Time, TripletStore};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub instance: InstanceConfig,
    pub workload: WorkloadConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// Path to a triplet file; mutually exclusive with the generator fields.
    pub file: Option<String>,
    pub seed: Option<u64>,
    pub users: Option<usize>,
    pub regions: Option<usize>,
    /// Region sizes ramp linearly between these two, so λ sweeps through them.
    pub min_region_size: Option<usize>,
    pub max_region_size: Option<usize>,
    pub time_range: Option<(i64, i64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub queries: usize,
    pub r: usize,
    /// Threshold, as a decimal string.
    pub k: String,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lambdas: Vec<u64>,
    pub rmax: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub max_tables: Option<u64>,
    pub max_tuples: Option<u64>,
}

impl BenchConfig {
    pub fn from_path(path: &str) -> Result<BenchConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Validation(format!("bad bench config: {e}")))
    }
}

/// Measurements of one λ grid point.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub lambda: u64,
    pub outcome: std::result::Result<BenchMeasurement, String>,
}

#[derive(Clone, Debug)]
pub struct BenchMeasurement {
    pub large_regions: usize,
    pub space: SpaceReport,
    pub build_seconds: f64,
    pub median_query_seconds: f64,
    pub answers_match_oracle: bool,
}

/// A store whose region sizes ramp linearly from `min_size` to `max_size`;
/// useful because a λ sweep then actually moves regions between the large
/// and small classes.
pub fn skewed_instance(
    seed: u64,
    users: usize,
    regions: usize,
    min_size: usize,
    max_size: usize,
    time_range: (i64, i64),
) -> Result<TripletStore> {
    if users == 0 || regions == 0 || min_size == 0 || max_size < min_size || max_size > users {
        return Err(Error::validation(
            "skewed instance needs 0 < min_size <= max_size <= users and positive counts",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for region in 0..regions {
        let size = if regions == 1 {
            min_size
        } else {
            min_size + (max_size - min_size) * region / (regions - 1)
        };
        for idx in sample(&mut rng, users, size) {
            let t = rng.random_range(time_range.0..=time_range.1);
            records.push((idx as u32, region as u32, Time::from_int(t)));
        }
    }
    TripletStore::with_dimensions(records, users, regions)
}

fn load_instance(cfg: &InstanceConfig) -> Result<TripletStore> {
    if let Some(path) = &cfg.file {
        let (store, _) = ingest_triplets(BufReader::new(File::open(path)?))?;
        return Ok(store);
    }
    skewed_instance(
        cfg.seed.unwrap_or(0),
        cfg.users.ok_or_else(|| Error::validation("instance.users missing"))?,
        cfg.regions.ok_or_else(|| Error::validation("instance.regions missing"))?,
        cfg.min_region_size.unwrap_or(1),
        cfg.max_region_size.ok_or_else(|| Error::validation("instance.max_region_size missing"))?,
        cfg.time_range.unwrap_or((1, 20)),
    )
}

fn build_workload(store: &TripletStore, cfg: &WorkloadConfig) -> Result<Vec<RegionQuery>> {
    let k: Time = cfg
        .k
        .parse()
        .map_err(|e| Error::Validation(format!("workload.k: {e}")))?;
    if cfg.r == 0 || cfg.r > store.m() {
        return Err(Error::validation(format!(
            "workload.r must be in 1..={}",
            store.m()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut queries = Vec::with_capacity(cfg.queries);
    for _ in 0..cfg.queries {
        let regions = sample(&mut rng, store.m(), cfg.r)
            .into_iter()
            .map(|j| j as u32);
        queries.push(RegionQuery::new(regions, k)?);
    }
    Ok(queries)
}

pub fn run(config: &BenchConfig) -> Result<(TripletStore, Vec<BenchRow>)> {
    let store = load_instance(&config.instance)?;
    let workload = build_workload(&store, &config.workload)?;
    let expected: Vec<u64> = workload
        .iter()
        .map(|q| oracle_count(&store, q))
        .collect::<Result<_>>()?;

    let budget = Budget {
        max_tables: config.budget.max_tables.unwrap_or(Budget::default().max_tables),
        max_tuples: config.budget.max_tuples.unwrap_or(Budget::default().max_tuples),
    };

    let mut rows = Vec::with_capacity(config.grid.lambdas.len());
    for &lambda in &config.grid.lambdas {
        let started = Instant::now();
        let index = match ExactIndex::build(store.clone(), lambda, config.grid.rmax, budget) {
            Ok(idx) => idx,
            Err(err @ Error::Resource { .. }) => {
                rows.push(BenchRow {
                    lambda,
                    outcome: Err(err.to_string()),
                });
                continue;
            }
            Err(other) => return Err(other),
        };
        let build_seconds = started.elapsed().as_secs_f64();

        // warmup pass, then per query the fastest of three timed runs
        let mut answers_match_oracle = true;
        for (q, &want) in workload.iter().zip(&expected) {
            if index.query(q)? != want {
                answers_match_oracle = false;
            }
        }
        let mut latencies = Vec::with_capacity(workload.len());
        for (q, &want) in workload.iter().zip(&expected) {
            let mut best = f64::INFINITY;
            for _ in 0..3 {
                let t0 = Instant::now();
                let got = index.query(q)?;
                best = best.min(t0.elapsed().as_secs_f64());
                if got != want {
                    answers_match_oracle = false;
                }
            }
            latencies.push(best);
        }
        latencies.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let median_query_seconds = latencies[latencies.len() / 2];

        rows.push(BenchRow {
            lambda,
            outcome: Ok(BenchMeasurement {
                large_regions: index.large_regions().len(),
                space: index.space_report(),
                build_seconds,
                median_query_seconds,
                answers_match_oracle,
            }),
        });
    }
    Ok((store, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skewed_sizes_ramp() {
        let store = skewed_instance(5, 200, 10, 20, 120, (1, 9)).unwrap();
        let sizes: Vec<usize> = (0..10)
            .map(|j| store.region_list(j).unwrap().len())
            .collect();
        assert_eq!(sizes[0], 20);
        assert_eq!(sizes[9], 120);
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rows_cover_grid_and_match_oracle() {
        let config = BenchConfig {
            instance: InstanceConfig {
                file: None,
                seed: Some(1),
                users: Some(300),
                regions: Some(8),
                min_region_size: Some(10),
                max_region_size: Some(200),
                time_range: Some((1, 15)),
            },
            workload: WorkloadConfig {
                queries: 40,
                r: 2,
                k: "18".into(),
                seed: 3,
            },
            grid: GridConfig {
                lambdas: vec![1, 60, 10_000],
                rmax: 2,
            },
            budget: BudgetConfig::default(),
        };
        let (_, rows) = run(&config).unwrap();
        assert_eq!(rows.len(), 3);
        let mut prev_tuples = u64::MAX;
        for row in &rows {
            let m = row.outcome.as_ref().unwrap();
            assert!(m.answers_match_oracle, "lambda={}", row.lambda);
            assert!(m.space.stored_tuples <= prev_tuples);
            prev_tuples = m.space.stored_tuples;
        }
    }

    #[test]
    fn budget_error_keeps_other_rows() {
        let config = BenchConfig {
            instance: InstanceConfig {
                file: None,
                seed: Some(1),
                users: Some(100),
                regions: Some(12),
                min_region_size: Some(30),
                max_region_size: Some(90),
                time_range: Some((1, 9)),
            },
            workload: WorkloadConfig {
                queries: 10,
                r: 2,
                k: "9".into(),
                seed: 1,
            },
            grid: GridConfig {
                lambdas: vec![1, 10_000],
                rmax: 2,
            },
            budget: BudgetConfig {
                max_tables: Some(5),
                max_tuples: None,
            },
        };
        let (_, rows) = run(&config).unwrap();
        assert!(rows[0].outcome.is_err(), "λ=1 must blow the 5-table budget");
        assert!(rows[1].outcome.is_ok());
    }
}
