//! Dataset construction and curation engine.
//!
//! The crate covers the whole annotation-first pipeline:
//!
//! * [`taxonomy`]: class/attribute design and search-query fan-out,
//! * [`collector`]: search backends, bounded concurrent fetching and the sample manifest,
//! * [`embedstore`]: binary feature containers and exact cosine k-NN,
//! * [`curator`]: noise transition estimation, label-noise detectors and relabeling,
//! * [`votes`]: crowdsourcing bundles and vote aggregation,
//! * [`evalkit`]: detection metrics, delta-worst accuracy and post-hoc logit adjustment,
//! * [`subsetter`]: splits, cleaned subsets and long-tail subsets.
//!
//! Everything that consumes randomness takes an explicit seed; see [`seed`].

pub mod collector;
pub mod curator;
pub mod embedstore;
pub mod evalkit;
pub mod lineio;
pub mod prompt;
pub mod seed;
pub mod subsetter;
pub mod taxonomy;
pub mod votes;

pub use collector::{FetchStatus, Manifest, SampleRecord, Split};
pub use curator::{CurationReport, TransitionEstimate};
pub use embedstore::{EmbeddingMatrix, ProbMatrix};
pub use taxonomy::{SubclassKey, TaxonomySpec};
