//! Dataset ingestion, normalization, fold plans, synthetic generators and
//! metric reporting.

pub mod folds;
pub mod normalize;
pub mod report;
pub mod synth;
pub mod table;

pub use folds::{make_folds, shuffled_split, FoldPlan, Rotation};
pub use normalize::{normalize, NormMode, NormalizationSpec};
pub use report::{aggregate, report_metrics, Metric, ReportRecord};
pub use synth::{augment_dependent, synthesize_regression, DependentInput, SynthKind};
pub use table::{load_table, parse_descriptor, parse_table, Delimiter, RawTable, TableDescriptor, TableFormat};
