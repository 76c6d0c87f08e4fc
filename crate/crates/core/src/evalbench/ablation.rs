//! Pipeline runs restricted to modality subsets.

use serde::Serialize;

use super::reports::{score_detection, Annotation, CategoryCounts, DetectionScore, FractionRow};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::ingest::View;
use crate::pipeline::{run_on_inputs, ViewInputs};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AblationSpec {
    pub modalities: Vec<View>,
}

impl AblationSpec {
    pub fn new(modalities: &[View]) -> Self {
        let mut modalities = modalities.to_vec();
        modalities.sort();
        modalities.dedup();
        Self { modalities }
    }

    pub fn label(&self) -> String {
        self.modalities.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(",")
    }

    /// The five combinations compared in the evaluation.
    pub fn standard() -> Vec<Self> {
        use View::*;
        [&[Face, Game, Audio][..], &[Face, Audio], &[Face], &[Game], &[Audio]]
            .into_iter()
            .map(Self::new)
            .collect()
    }
}

/// Ground truth available to score an ablation.
#[derive(Clone, Debug, Default)]
pub struct AblationTruth {
    pub events: Option<Vec<f64>>,
    pub tolerance: f64,
    pub annotations: Option<Vec<Annotation>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub clips: usize,
    pub detection: Option<DetectionScore>,
    pub categories: Option<CategoryCounts>,
}

impl AblationRow {
    pub fn fractions(&self) -> Option<FractionRow> {
        self.categories.as_ref().map(|c| FractionRow::from_counts(self.label.clone(), c))
    }
}

/// Run the pipeline once per subset, each into `<out>/ablation_<label>`.
pub fn run_ablation(
    inputs: &ViewInputs,
    base: &PipelineConfig,
    ablations: &[AblationSpec],
    truth: &AblationTruth,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(ablations.len());
    for spec in ablations {
        let label = spec.label();
        if spec.modalities.is_empty() {
            return Err(Error::Config("ablation subset must not be empty".into()));
        }
        let mut config = base.clone();
        config.modalities = spec.modalities.clone();
        config.out = base.out.join(format!("ablation_{}", label.replace(',', "-")));
        let outcome = run_on_inputs(&config, inputs.restricted(&spec.modalities)).map_err(|e| e.in_stage(format!("ablation {label}")))?;
        let clips = &outcome.clips.clips;
        let detection = truth.events.as_ref().map(|events| score_detection(clips, events, truth.tolerance));
        let categories = truth.annotations.as_ref().map(|annotations| {
            let mut counts = CategoryCounts::default();
            for clip in clips {
                let label = annotations
                    .iter()
                    .find(|a| a.video_id == inputs.video_id && (a.start_s - clip.start).abs() <= 0.5 && (a.end_s - clip.end).abs() <= 0.5);
                match label {
                    Some(a) => counts.add(a.category),
                    None => log::warn!("clip [{}, {}] of `{}` has no annotation", clip.start, clip.end, inputs.video_id),
                }
            }
            counts
        });
        rows.push(AblationRow {
            label,
            clips: clips.len(),
            detection,
            categories,
        });
    }
    Ok(rows)
}

/// Comma-separated ablation table.
pub fn render_ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::from("modalities,clips,precision,recall,funny,action,interaction,highlight_total,no_highlight_total\n");
    for r in rows {
        let (p, rc) = r
            .detection
            .map(|d| (format!("{:.3}", d.precision), format!("{:.3}", d.recall)))
            .unwrap_or_default();
        let shares = r.fractions().map(|f| f.rendered().join(",")).unwrap_or_else(|| ",,,,".into());
        out.push_str(&format!("\"{}\",{},{p},{rc},{shares}\n", r.label, r.clips));
    }
    out
}
