//! tsforge: a desk-scale workbench for training and benchmarking small
//! transformer time-series forecasters.
//!
//! The pipeline runs from CSV ingestion through statistical prompting,
//! tokenization (trainable linear patch embedding or scale-and-bin ids),
//! a decoder-style transformer trained under three paradigms (from scratch,
//! full fine-tune, LoRA adapters), to an MSE/MAE evaluation harness covering
//! standard, few-shot, zero-shot, and dataset-diversity protocols.
//!
//! Everything is seeded and deterministic: the same config and seed produce
//! byte-identical result tables and checkpoints.

pub mod backbone;
pub mod config;
pub mod error;
pub mod evalkit;
pub mod mat;
pub mod par;
pub mod prompt;
pub mod rng;
pub mod runner;
pub mod series;
pub mod synth;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};
pub use mat::Mat;
