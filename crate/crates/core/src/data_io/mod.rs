//! Structure documents, corpus filtering, dataset splits and CIF export.

pub mod cif;
pub mod corpus;
pub mod records;

pub use cif::export_cif;
pub use corpus::{filter_corpus, group_key, reduced_formula, split_dataset, DatasetSplit, FilterConfig, FilterOutcome};
pub use records::{load_structures, save_structures, StructureRecord, STRICT_TOL};
