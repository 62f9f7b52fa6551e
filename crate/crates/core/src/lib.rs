//! Fingerprint-to-structure decoding for de novo molecule generation.
//!
//! The crate covers the structure side of a spectra -> fingerprint ->
//! structure pipeline: a molecular graph model with a SMILES reader/writer
//! and canonical form, Morgan fingerprints and probability-fingerprint
//! thresholding, a fingerprint-conditioned autoregressive decoder with beam
//! search, and the top-k accuracy / MCES / Tanimoto evaluation suite.

pub mod decoder;
pub mod elements;
pub mod eval;
pub mod fingerprint;
pub mod mces;
pub mod molgraph;
pub mod smiles;
