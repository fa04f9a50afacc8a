//! File formats, HTTP-backed curation and the command-line pipeline for
//! remaining-lifespan regression. Numerics live in [`lifespan_core`].

pub mod checkpoint;
pub mod cli;
pub mod curation;
pub mod emb1;
pub mod fsutil;
pub mod life_table;
pub mod manifest;
pub mod predictions;
pub mod report;

pub use lifespan_core as core;
