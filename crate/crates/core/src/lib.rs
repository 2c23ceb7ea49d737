//! Idiom linting with language models: corpus ingestion, prompt rendering,
//! linter-derived gold labels, response parsing, rewards, preference data and evaluation.

pub mod catalog;
pub mod codec;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod lint;
pub mod manifest;
pub mod preference;
pub mod reward;
pub mod sampler;

pub use catalog::{Catalog, Category, IdiomSpec, PromptInstance, Template};
pub use codec::{parse_response, serialize_block, ParseOptions, ParseStatus, ParsedResponse};
pub use corpus::{NumberedFile, SourceFile};
pub use dataset::{DatasetRecord, Split, TaskInstance};
pub use error::{Error, Result};
pub use eval::MetricsReport;
pub use lint::{LinterCommand, ViolationSet};
pub use manifest::RunManifest;
pub use preference::{PreferencePair, SampledResponse};
pub use reward::{instance_reward, RewardTriple};
pub use sampler::{JournalEntry, SamplingPlan};
