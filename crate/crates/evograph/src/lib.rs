//! Incremental knowledge-graph construction with lifecycle governance.
//!
//! `evograph` builds a knowledge graph from text that arrives in ordered
//! batches (windows). Each batch runs through a closed loop:
//!
//! 1. **Extraction** ([`extract`]) — statements are routed to a triple track
//!    or an event track and extracted under schema constraints retrieved
//!    from the meta-knowledge base.
//! 2. **Normalization** ([`normalize`]) — entity mentions and event
//!    instances are canonicalized within the batch and aligned against
//!    history.
//! 3. **Governance** ([`govern`]) — evidence verification, logical
//!    verification, and evolution-intent classification decide which
//!    candidates become facts and which historical facts to retire.
//! 4. **Schema evolution** ([`schema`]) — relation and event schemas are
//!    induced from verified knowledge, events are reified into facts, and
//!    entity profiles are refreshed.
//! 5. **Integration** ([`graph`]) — the batch's knowledge increment is
//!    applied transactionally; retired facts are soft-deprecated, never
//!    deleted.
//!
//! The [`mkb`] module holds the meta-knowledge base (entity profiles,
//! promoted schemas, the proposal pool, and vector indexes) that threads
//! state between batches. [`adapters`] supplies pluggable generation /
//! judging / embedding backends, including fully deterministic mocks.
//! [`pipeline`] orchestrates the loop and computes the incremental metrics.
//!
//! With the mock backends the whole pipeline is a pure function of its
//! inputs: two runs over the same stream produce byte-identical graph
//! exports, MKB snapshots, and batch reports.

pub mod adapters;
pub mod config;
pub mod extract;
pub mod govern;
pub mod graph;
pub mod ids;
pub mod jsonl;
pub mod mkb;
pub mod normalize;
pub mod pipeline;
pub mod schema;
pub mod time;

pub(crate) mod par;

pub use config::PipelineConfig;
pub use graph::{EntityNode, FactEdge, GraphState, KnowledgeIncrement};
pub use mkb::Mkb;
pub use pipeline::{process_batch, run_stream, BatchReport};
