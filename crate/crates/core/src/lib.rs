//! Program embeddings learned from blended execution traces.
//!
//! A blended trace pairs every statement on one program path with the
//! program states that statement produced across several concrete runs.
//! This crate covers the whole pipeline: a small traced language
//! ([`minilang`]), the trace data model ([`trace_model`]), a reverse-mode
//! autodiff substrate ([`numcore`]), the fusion-attention encoder and
//! classifier ([`embedder`]), the method-name decoder ([`seqdec`]),
//! semantics-preserving rewrites ([`transforms`]) and synthetic corpora
//! ([`datasets`]), tied together by [`experiments`].

pub mod minilang;
pub mod datasets;
pub mod embedder;
pub mod experiments;
pub mod numcore;
pub mod rng;
pub mod seqdec;
pub mod trace_model;
pub mod transforms;
