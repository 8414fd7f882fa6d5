//! Seed-driven social-network crawler with declarative DOM extraction.
//!
//! The crate is organised along the stages of a crawl run:
//!
//! - [`config_io`]: seed, configuration and link-list files.
//! - [`fixture`]: a deterministic synthetic social network served over HTTP,
//!   used as a lawful, reproducible crawl target with ground truth.
//! - [`dom`]: HTML to DOM tree, extraction rules, page-level extractors.
//! - [`crawl`]: sessions, BFS frontier, pacing and the crawl procedure.
//! - [`coordinator`]: partitioning seeds across agents and merging their shards.
//! - [`pipeline`]: normalization, verification, deduplicating store, filters
//!   and behaviour statistics.
//! - [`demo`]: the whole chain on a seeded fixture.
//!
//! Batch stages run data-parallel through [`exec`] when the `parallel`
//! feature is enabled (the default) and sequentially otherwise.

pub mod config_io;
pub mod coordinator;
pub mod crawl;
pub mod demo;
pub mod dom;
pub mod exec;
pub mod fixture;
pub mod model;
pub mod pipeline;
