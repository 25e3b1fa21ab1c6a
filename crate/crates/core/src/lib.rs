//! Data structures for counting distinct users whose aggregated dwell time
//! across a set of regions (or inside a query hyperrectangle) reaches a
//! threshold `k`.
//!
//! The crate provides four query paths over one canonical dataset:
//!
//! * [`oracle`]: brute-force reference answers by full scan,
//! * [`exact`]: a λ-parameterized index trading precomputed subset tables
//!   against query-time scanning,
//! * [`sampling`]: an unbiased estimator from uniformly sampled records,
//! * [`sketch`]: compact mergeable per-region sketches with threshold
//!   extraction,
//! * [`geo`]: exact structures for point datasets and rectangle queries.

pub mod error;
pub mod exact;
pub mod generate;
pub mod geo;
pub mod ingest;
pub mod model;
pub mod oracle;
pub mod sampling;
pub mod sketch;
pub mod time;

mod snapshot;

pub use error::{Error, Result};
pub use model::{GeoTriplet, RectQuery, RegionId, RegionQuery, Triplet, TripletStore, UserId};
pub use time::Time;
