//! Exact sampling of high-utility patterns from quantitative databases.
//!
//! A pattern is drawn with probability proportional to its utility in the
//! database, optionally restricted to lengths `m..=M` and with average
//! (per-item) utility instead of plain utility. Preprocessing weighs each
//! transaction in closed form; drawing a pattern of length `ℓ` then costs
//! `ℓ` binary searches over one transaction.
//!
//! ```
//! use hupsamp_core::{
//!     build_weight_index, cache_for, parse_qdb_str, sample_patterns, LengthUtility, PriceTable,
//!     SampleRequest,
//! };
//!
//! let db = parse_qdb_str("a:44 b:12 c:75 d:34\na:44\nb:12\nc:75 d:34\n", PriceTable::new())?;
//! let u = LengthUtility::unconstrained();
//! let cache = cache_for(&db);
//! let index = build_weight_index(&db, &u, &cache)?;
//! assert_eq!(index.total().to_string(), "1594");
//! let sample = sample_patterns(&db, &index, &cache, &SampleRequest::new(u, 5, 7)?)?;
//! assert_eq!(sample.len(), 5);
//! # Ok::<(), hupsamp_core::Error>(())
//! ```

pub mod combinatorics;
pub mod disk;
pub mod error;
pub mod gen;
pub mod oracle;
pub mod profile;
pub mod qdb;
pub mod sampler;
pub mod weighting;

pub use combinatorics::{half_pascal_size, PascalCache, RandomSource};
pub use disk::{select_ids, stream_draw, stream_sample, stream_weigh, DiskWeights, SelectedIds};
pub use error::{Error, Result};
pub use gen::GenConfig;
pub use oracle::{compare_empirical, compare_records, enumerate, ExactDistribution};
pub use profile::{
    merge_subprofiles, pattern_to_subprofile, profile_to_qdb, Direction, PredicateWeights, Profile,
    SubProfile,
};
pub use qdb::{
    parse_qdb, parse_qdb_str, ItemId, LengthUtility, Pattern, PriceTable, QuantitativeDatabase,
    QuantitativeTransaction, UtilityMode,
};
pub use sampler::{
    bootstrap_sample, sample_patterns, sample_patterns_concurrent, write_jsonl, SampleRecord,
    SampleRequest, Sampler,
};
pub use weighting::{build_weight_index, cache_for, vutu, WeightIndex};
