//! Evaluation bench: synthetic streams with known events, detection scoring,
//! annotation summaries, modality ablations and temporal histograms.

mod ablation;
mod reports;
mod synthetic;

pub use ablation::{render_ablation_table, run_ablation, AblationRow, AblationSpec, AblationTruth};
pub use reports::{
    highlights_over_time, load_annotations, read_annotations, read_count_rows, read_durations, render_fraction_table, score_detection,
    summarize_categories, Annotation, CategoryCounts, CategorySummary, DetectionScore, FractionRow, TemporalHistogram,
};
pub use synthetic::{generate_synthetic_stream, PlantedEvent, RecordingFiles, SyntheticStream, SyntheticStreamSpec};
