//! `clav`: build, query, estimate, sketch, and benchmark structures for
//! counting users with long aggregated visits.
//!
//! Every subcommand prints a single `key=value` report line on success.
//! Exit codes: 0 success, 1 validation/parse error, 2 resource-budget error.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::time::Instant;

use clap::{Parser, Subcommand};

use clav_cli::bench::{self, BenchConfig};
use clav_cli::report::Report;
use clav_core::exact::{Budget, ExactIndex};
use clav_core::geo::{GeoIndex, GeoIndex1D, GeoIndexD, MultiKIndex, TabulationIndex};
use clav_core::ingest::{ingest_geo, ingest_triplets, write_triplets};
use clav_core::oracle::{oracle_count, oracle_geo_count};
use clav_core::sampling::{estimate_count, SamplingConfig};
use clav_core::sketch::{SketchParams, SketchSet};
use clav_core::{Error, GeoTriplet, RectQuery, RegionQuery, Result, Time, TripletStore};

#[derive(Parser)]
#[command(
    name = "clav",
    version,
    about = "Counting distinct users with long aggregated visits",
    after_help = "The CLAV_BUDGET environment variable overrides the default \
                  resource budgets where no explicit --max-* flag is given."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalize a triplet file
    Ingest {
        /// Triplet file: `user,region,time` per line
        #[arg(long)]
        input: String,
        /// Write the normalized store back out (dense ids)
        #[arg(long)]
        output: Option<String>,
        /// Write the external-id → dense-id sidecar mapping
        #[arg(long)]
        mapping: Option<String>,
    },
    /// Brute-force reference answer by full scan
    Oracle {
        #[arg(long)]
        input: String,
        /// Region ids, comma separated (region query)
        #[arg(long)]
        regions: Option<String>,
        /// Query rectangle `lo1,hi1,lo2,hi2,...` (geometric query)
        #[arg(long)]
        rect: Option<String>,
        /// Threshold, a decimal
        #[arg(long)]
        k: String,
        /// Point dimension for geometric inputs (inferred when omitted)
        #[arg(long)]
        dims: Option<usize>,
    },
    /// Build the exact λ index and optionally snapshot it
    Build {
        #[arg(long)]
        input: String,
        #[arg(long)]
        lambda: u64,
        /// Largest query size the index will answer
        #[arg(long)]
        rmax: usize,
        #[arg(long)]
        output: Option<String>,
        #[arg(long)]
        max_tables: Option<u64>,
        #[arg(long)]
        max_tuples: Option<u64>,
    },
    /// Query a built exact index snapshot
    Query {
        #[arg(long)]
        index: String,
        #[arg(long)]
        regions: String,
        #[arg(long)]
        k: String,
    },
    /// Sampling-based estimate of the count
    Estimate {
        #[arg(long)]
        input: String,
        #[arg(long)]
        regions: String,
        #[arg(long)]
        k: String,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Explicit sample count (otherwise derived from epsilon/delta)
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Per-region sketches: build, save, load, and query
    Sketch {
        /// Triplet file to sketch (or use --load)
        #[arg(long)]
        input: Option<String>,
        /// Load previously saved sketch files; headers must match
        #[arg(long)]
        load: Vec<String>,
        /// Save the sketch set
        #[arg(long)]
        save: Option<String>,
        /// Regions to query, comma separated
        #[arg(long)]
        regions: Option<String>,
        /// Largest query size r the sketch supports
        #[arg(long)]
        r: Option<u32>,
        #[arg(long)]
        k: Option<String>,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Geometric structures over point datasets
    Geo {
        /// Geo file: `user,x_1,...,x_d,time` per line (or use --load)
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        load: Option<String>,
        #[arg(long)]
        save: Option<String>,
        #[arg(long)]
        dims: Option<usize>,
        /// Structure: 1d, slab, tab, or multik
        #[arg(long, default_value = "slab")]
        structure: String,
        /// Threshold the structure is built for (decimal)
        #[arg(long)]
        k: Option<String>,
        /// Largest supported threshold (multik builds)
        #[arg(long)]
        max_k: Option<u64>,
        /// Query rectangle `lo1,hi1,lo2,hi2,...`
        #[arg(long)]
        rect: Option<String>,
        #[arg(long)]
        max_tables: Option<u64>,
    },
    /// λ-grid space/time tradeoff table
    Bench {
        /// TOML config: instance, workload, grid, budget
        #[arg(long)]
        config: String,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        let code = match err {
            Error::Resource { .. } => 2,
            _ => 1,
        };
        std::process::exit(code);
    }
}

fn env_budget() -> Option<u64> {
    std::env::var("CLAV_BUDGET").ok()?.parse().ok()
}

fn parse_regions(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<u32>()
                .map_err(|_| Error::validation(format!("bad region id {f:?}")))
        })
        .collect()
}

fn parse_time(text: &str, what: &str) -> Result<Time> {
    text.parse()
        .map_err(|e| Error::Validation(format!("{what}: {e}")))
}

/// `lo1,hi1,lo2,hi2,...` into per-dimension bounds.
fn parse_rect(text: &str, k: Time) -> Result<RectQuery> {
    let values: Vec<f64> = text
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("bad rectangle bound {f:?}")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() || !values.len().is_multiple_of(2) {
        return Err(Error::validation(
            "--rect expects an even list lo1,hi1,lo2,hi2,...",
        ));
    }
    let lo: Vec<f64> = values.iter().step_by(2).copied().collect();
    let hi: Vec<f64> = values.iter().skip(1).step_by(2).copied().collect();
    RectQuery::new(lo, hi, k)
}

fn read_store(path: &str) -> Result<TripletStore> {
    let (store, _) = ingest_triplets(BufReader::new(File::open(path)?))?;
    Ok(store)
}

fn read_geo(path: &str, dims: Option<usize>) -> Result<Vec<GeoTriplet>> {
    let (data, _) = ingest_geo(BufReader::new(File::open(path)?), dims)?;
    Ok(data)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            input,
            output,
            mapping,
        } => {
            let started = Instant::now();
            let (store, ids) = ingest_triplets(BufReader::new(File::open(&input)?))?;
            if let Some(path) = &output {
                write_triplets(&store, &mut BufWriter::new(File::create(path)?))?;
            }
            if let Some(path) = &mapping {
                ids.write_sidecar(&mut BufWriter::new(File::create(path)?))?;
            }
            let mut report = Report::new("ingest");
            report
                .push("input", &input)
                .push("n", store.n())
                .push("m", store.m())
                .push("N", store.triplet_count());
            if let Some(path) = &output {
                report.push("output", path);
            }
            if let Some(path) = &mapping {
                report.push("mapping", path);
            }
            report.push_ms("elapsed_ms", started.elapsed());
            println!("{report}");
            Ok(())
        }

        Command::Oracle {
            input,
            regions,
            rect,
            k,
            dims,
        } => {
            let k = parse_time(&k, "--k")?;
            let mut report = Report::new("oracle");
            let started = Instant::now();
            match (regions, rect) {
                (Some(regions), None) => {
                    let store = read_store(&input)?;
                    let query = RegionQuery::new(parse_regions(&regions)?, k)?;
                    let answer = oracle_count(&store, &query)?;
                    report
                        .push("answer", answer)
                        .push("k", k)
                        .push("regions", &regions);
                }
                (None, Some(rect)) => {
                    let data = read_geo(&input, dims)?;
                    let query = parse_rect(&rect, k)?;
                    let answer = oracle_geo_count(&data, &query)?;
                    report
                        .push("answer", answer)
                        .push("k", k)
                        .push("rect", &rect)
                        .push("dims", query.dims());
                }
                _ => {
                    return Err(Error::validation(
                        "oracle needs exactly one of --regions or --rect",
                    ))
                }
            }
            report.push_ms("query_ms", started.elapsed());
            println!("{report}");
            Ok(())
        }

        Command::Build {
            input,
            lambda,
            rmax,
            output,
            max_tables,
            max_tuples,
        } => {
            let store = read_store(&input)?;
            let defaults = Budget::default();
            let budget = Budget {
                max_tables: max_tables.or_else(env_budget).unwrap_or(defaults.max_tables),
                max_tuples: max_tuples.or_else(env_budget).unwrap_or(defaults.max_tuples),
            };
            let started = Instant::now();
            let index = ExactIndex::build(store, lambda, rmax, budget)?;
            let build = started.elapsed();
            if let Some(path) = &output {
                index.save(&mut BufWriter::new(File::create(path)?))?;
            }
            let space = index.space_report();
            let mut report = Report::new("exact");
            report
                .push("lambda", lambda)
                .push("rmax", rmax)
                .push("n", index.base().n())
                .push("m", index.base().m())
                .push("N", index.base().triplet_count())
                .push("large_regions", index.large_regions().len())
                .push("tables", space.table_count)
                .push("tuples", space.stored_tuples)
                .push("words", space.word_estimate);
            if let Some(path) = &output {
                report.push("output", path);
            }
            report.push_ms("build_ms", build);
            println!("{report}");
            Ok(())
        }

        Command::Query { index, regions, k } => {
            let idx = ExactIndex::load(&mut BufReader::new(File::open(&index)?))?;
            let k = parse_time(&k, "--k")?;
            let query = RegionQuery::new(parse_regions(&regions)?, k)?;
            let started = Instant::now();
            let answer = idx.query(&query)?;
            let elapsed = started.elapsed();
            let mut report = Report::new("exact");
            report
                .push("answer", answer)
                .push("k", k)
                .push("regions", &regions)
                .push("lambda", idx.lambda())
                .push("rmax", idx.r_max())
                .push("query_us", format!("{:.3}", elapsed.as_secs_f64() * 1e6));
            println!("{report}");
            Ok(())
        }

        Command::Estimate {
            input,
            regions,
            k,
            epsilon,
            delta,
            seed,
            samples,
        } => {
            let store = read_store(&input)?;
            let k = parse_time(&k, "--k")?;
            let query = RegionQuery::new(parse_regions(&regions)?, k)?;
            let mut cfg = SamplingConfig::new(epsilon, delta, seed)?;
            if let Some(s) = samples {
                cfg = cfg.with_samples(s);
            }
            let started = Instant::now();
            let estimate = estimate_count(&store, &query, &cfg)?;
            let elapsed = started.elapsed();
            let mut report = Report::new("sampling");
            report
                .push("estimate", format!("{:.6}", estimate.value_f64()))
                .push(
                    "estimate_exact",
                    format!("{}/{}", estimate.value.numer(), estimate.value.denom()),
                )
                .push("s_used", estimate.s_used)
                .push("N_Q", estimate.query_triplets)
                .push("k", k)
                .push("regions", &regions)
                .push("epsilon", epsilon)
                .push("delta", delta)
                .push("seed", seed)
                .push_ms("query_ms", elapsed);
            println!("{report}");
            Ok(())
        }

        Command::Sketch {
            input,
            load,
            save,
            regions,
            r,
            k,
            epsilon,
            delta,
            seed,
        } => {
            let started = Instant::now();
            let set = match (&input, load.as_slice()) {
                (Some(path), []) => {
                    let store = read_store(path)?;
                    let r = r.ok_or_else(|| Error::validation("--r is required to build"))?;
                    let k = parse_time(
                        &k.ok_or_else(|| Error::validation("--k is required to build"))?,
                        "--k",
                    )?;
                    let params =
                        SketchParams::new(store.n().max(1) as u64, r, k, epsilon, delta, seed)?;
                    SketchSet::build(&store, params)?
                }
                (None, [first, rest @ ..]) => {
                    let mut set = SketchSet::load(&mut BufReader::new(File::open(first)?))?;
                    for path in rest {
                        let more = SketchSet::load(&mut BufReader::new(File::open(path)?))?;
                        set.absorb(more)?;
                    }
                    set
                }
                _ => {
                    return Err(Error::validation(
                        "sketch needs exactly one of --input or --load",
                    ))
                }
            };
            let build = started.elapsed();
            if let Some(path) = &save {
                set.save(&mut BufWriter::new(File::create(path)?))?;
            }
            let mut report = Report::new("sketch");
            report
                .push("r", set.params.r())
                .push("k", set.params.k())
                .push("epsilon", set.params.epsilon())
                .push("repetitions", set.params.repetitions())
                .push("levels", set.params.levels())
                .push("width", set.params.width())
                .push("bits_per_region", set.params.size_bits())
                .push("regions_sketched", set.regions().count())
                .push("seed", set.params.seed());
            if let Some(text) = &regions {
                let query = parse_regions(text)?;
                let t0 = Instant::now();
                let estimate = set.query(&query)?;
                let elapsed = t0.elapsed();
                report
                    .push("regions", text)
                    .push("estimate", estimate.value)
                    .push(
                        "per_repetition",
                        estimate
                            .per_repetition
                            .iter()
                            .map(u64::to_string)
                            .collect::<Vec<_>>()
                            .join(","),
                    )
                    .push("query_us", format!("{:.3}", elapsed.as_secs_f64() * 1e6));
            }
            if let Some(path) = &save {
                report.push("saved", path);
            }
            report.push_ms("build_ms", build);
            println!("{report}");
            Ok(())
        }

        Command::Geo {
            input,
            load,
            save,
            dims,
            structure,
            k,
            max_k,
            rect,
            max_tables,
        } => {
            let budget = max_tables
                .or_else(env_budget)
                .unwrap_or(clav_core::geo::DEFAULT_GEO_BUDGET);
            let started = Instant::now();
            let index = match (&input, &load) {
                (Some(path), None) => {
                    let data = read_geo(path, dims)?;
                    let d = match (dims, data.first()) {
                        (Some(d), _) => d,
                        (None, Some(t)) => t.point.len(),
                        (None, None) => {
                            return Err(Error::validation(
                                "--dims is required for an empty dataset",
                            ))
                        }
                    };
                    let parse_k = |k: &Option<String>| -> Result<Time> {
                        parse_time(
                            k.as_ref()
                                .ok_or_else(|| Error::validation("--k is required to build"))?,
                            "--k",
                        )
                    };
                    match structure.as_str() {
                        "1d" => {
                            if d != 1 {
                                return Err(Error::validation(format!(
                                    "structure 1d needs a 1-dimensional dataset, got {d}"
                                )));
                            }
                            GeoIndex::OneD(GeoIndex1D::build(&data, parse_k(&k)?)?)
                        }
                        "slab" => {
                            GeoIndex::Slabbed(GeoIndexD::build(&data, d, parse_k(&k)?, budget)?)
                        }
                        "tab" => GeoIndex::Tabulated(TabulationIndex::build(
                            &data,
                            d,
                            parse_k(&k)?,
                            budget,
                        )?),
                        "multik" => {
                            let max_k = max_k.ok_or_else(|| {
                                Error::validation("--max-k is required for multik")
                            })?;
                            GeoIndex::MultiK(MultiKIndex::build(&data, d, max_k, budget)?)
                        }
                        other => {
                            return Err(Error::validation(format!(
                                "unknown structure {other:?} (expected 1d, slab, tab, multik)"
                            )))
                        }
                    }
                }
                (None, Some(path)) => GeoIndex::load(&mut BufReader::new(File::open(path)?))?,
                _ => {
                    return Err(Error::validation(
                        "geo needs exactly one of --input or --load",
                    ))
                }
            };
            let build = started.elapsed();
            if let Some(path) = &save {
                index.save(&mut BufWriter::new(File::create(path)?))?;
            }
            let mut report = Report::new(index.structure());
            if let Some(text) = &rect {
                let k = parse_time(
                    &k.ok_or_else(|| Error::validation("--k is required to query"))?,
                    "--k",
                )?;
                let query = parse_rect(text, k)?;
                let t0 = Instant::now();
                let answer = index.query(&query)?;
                let elapsed = t0.elapsed();
                report
                    .push("answer", answer)
                    .push("k", k)
                    .push("rect", text)
                    .push("query_us", format!("{:.3}", elapsed.as_secs_f64() * 1e6));
            }
            if let Some(path) = &save {
                report.push("saved", path);
            }
            report.push_ms("build_ms", build);
            println!("{report}");
            Ok(())
        }

        Command::Bench { config } => {
            let config = BenchConfig::from_path(&config)?;
            let (store, rows) = bench::run(&config)?;
            let mut header = Report::new("bench-instance");
            header
                .push("n", store.n())
                .push("m", store.m())
                .push("N", store.triplet_count())
                .push("queries", config.workload.queries)
                .push("r", config.workload.r)
                .push("k", &config.workload.k)
                .push("rmax", config.grid.rmax);
            println!("{header}");
            for row in rows {
                let mut report = Report::new("bench");
                report.push("lambda", row.lambda);
                match row.outcome {
                    Ok(m) => {
                        report
                            .push("status", "ok")
                            .push("large_regions", m.large_regions)
                            .push("tables", m.space.table_count)
                            .push("tuples", m.space.stored_tuples)
                            .push("words", m.space.word_estimate)
                            .push("build_ms", format!("{:.3}", m.build_seconds * 1e3))
                            .push(
                                "median_query_us",
                                format!("{:.3}", m.median_query_seconds * 1e6),
                            )
                            .push("answers_ok", m.answers_match_oracle);
                    }
                    Err(detail) => {
                        report
                            .push("status", "budget-exceeded")
                            .push("detail", format!("{detail:?}"));
                    }
                }
                println!("{report}");
            }
            Ok(())
        }
    }
}
