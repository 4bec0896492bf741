//! Target concept classes, their complexity and labeled data generation.

mod complexity;
mod dataset;
mod target;

pub use complexity::{
    complexity_additive, complexity_additive_truncated, complexity_aggregate, complexity_aggregate_with, complexity_nvars,
    complexity_nvars_truncated, ln_multinomial_max, Complexity, ComplexityReport, TermComplexity, DEFAULT_C1,
};
pub use dataset::{
    gen_dataset, gen_dataset_with, load_dataset, save_dataset, DatasetManifest, LabeledDataset, SequenceSampler, SphereSampler,
};
pub use target::{eval_target, SeriesSpec, TargetFunction, TargetKind, TargetTerm};
