//! Detection scoring, annotation summaries and temporal histograms.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clipper::{Category, HighlightClip, DEFAULT_PRE_SECONDS};
use crate::error::{Error, Result};

/// Precision and recall of clips against ground-truth event times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionScore {
    pub precision: f64,
    pub recall: f64,
    pub matched: usize,
}

/// One-to-one matching of events to the clips containing them (within
/// `tolerance`). Events are taken in time order and each claims the unmatched
/// containing clip that ends first, which yields a maximum matching.
pub fn score_detection(clips: &[HighlightClip], events: &[f64], tolerance: f64) -> DetectionScore {
    let tolerance = tolerance.max(0.0);
    let mut events = events.to_vec();
    events.sort_by(f64::total_cmp);
    let mut used = vec![false; clips.len()];
    let mut matched = 0;
    for &e in &events {
        let pick = (0..clips.len())
            .filter(|&c| !used[c] && clips[c].contains(e, tolerance))
            .min_by(|&a, &b| clips[a].end.total_cmp(&clips[b].end).then(a.cmp(&b)));
        if let Some(c) = pick {
            used[c] = true;
            matched += 1;
        }
    }
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    DetectionScore {
        precision: ratio(matched, clips.len()),
        recall: ratio(matched, events.len()),
        matched,
    }
}

/// One annotated clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub video_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub category: Category,
}

impl Annotation {
    /// Apex estimate for an annotated span: the pre-roll after its start,
    /// capped by its end.
    pub fn apex_estimate(&self) -> f64 {
        (self.start_s + DEFAULT_PRE_SECONDS).min(self.end_s)
    }

    pub fn to_clip(&self) -> HighlightClip {
        HighlightClip {
            start: self.start_s,
            end: self.end_s,
            apexes: vec![self.apex_estimate()],
            category: Some(self.category),
        }
    }
}

#[derive(Deserialize)]
struct RawAnnotation {
    video_id: String,
    start_s: f64,
    end_s: f64,
    category: String,
}

/// Read `video_id,start_s,end_s,category` records.
pub fn read_annotations(reader: impl Read) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (line, record) in csv::Reader::from_reader(reader).deserialize::<RawAnnotation>().enumerate() {
        let r = record.map_err(|e| Error::Parse(format!("annotation record {}: {e}", line + 1)))?;
        let category = r.category.parse()?;
        if !(r.start_s >= 0.0 && r.end_s >= r.start_s) {
            return Err(Error::Parse(format!(
                "annotation record {}: span [{}, {}] is not a valid interval",
                line + 1,
                r.start_s,
                r.end_s
            )));
        }
        out.push(Annotation {
            video_id: r.video_id,
            start_s: r.start_s,
            end_s: r.end_s,
            category,
        });
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<Annotation>> {
    read_annotations(std::fs::File::open(path)?)
}

/// Read `video_id,duration_s` records.
pub fn read_durations(reader: impl Read) -> Result<BTreeMap<String, f64>> {
    #[derive(Deserialize)]
    struct Row {
        video_id: String,
        duration_s: f64,
    }
    csv::Reader::from_reader(reader)
        .deserialize::<Row>()
        .map(|r| {
            let r = r.map_err(|e| Error::Parse(format!("duration record: {e}")))?;
            Ok((r.video_id, r.duration_s))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub funny: usize,
    pub action: usize,
    pub interaction: usize,
    pub none: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, category: Category) {
        *self.get_mut(category) += 1;
    }

    fn get_mut(&mut self, category: Category) -> &mut usize {
        match category {
            Category::Funny => &mut self.funny,
            Category::Action => &mut self.action,
            Category::Interaction => &mut self.interaction,
            Category::None => &mut self.none,
        }
    }

    pub fn get(&self, category: Category) -> usize {
        match category {
            Category::Funny => self.funny,
            Category::Action => self.action,
            Category::Interaction => self.interaction,
            Category::None => self.none,
        }
    }

    pub fn highlight_total(&self) -> usize {
        self.funny + self.action + self.interaction
    }

    pub fn clips(&self) -> usize {
        self.highlight_total() + self.none
    }

    fn merge(&mut self, other: &CategoryCounts) {
        for c in Category::ALL {
            *self.get_mut(c) += other.get(c);
        }
    }
}

/// Per-video category counts in first-appearance order, plus the totals.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CategorySummary {
    pub videos: Vec<(String, CategoryCounts)>,
    pub total: CategoryCounts,
}

pub fn summarize_categories(annotations: &[Annotation]) -> CategorySummary {
    let mut summary = CategorySummary::default();
    for a in annotations {
        let row = match summary.videos.iter().position(|(v, _)| *v == a.video_id) {
            Some(i) => i,
            None => {
                summary.videos.push((a.video_id.clone(), CategoryCounts::default()));
                summary.videos.len() - 1
            }
        };
        summary.videos[row].1.add(a.category);
    }
    for (_, counts) in &summary.videos {
        summary.total.merge(counts);
    }
    summary
}

impl CategorySummary {
    /// Comma-separated table with a `Total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("video_id,funny,action,interaction,highlight_total,no_highlight_total\n");
        let rows = self.videos.iter().map(|(v, c)| (v.as_str(), c)).chain([("Total", &self.total)]);
        for (v, c) in rows {
            out.push_str(&format!(
                "{v},{},{},{},{},{}\n",
                c.funny,
                c.action,
                c.interaction,
                c.highlight_total(),
                c.none
            ));
        }
        out
    }
}

/// Category shares of one modality combination.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FractionRow {
    pub label: String,
    pub clips: usize,
    pub funny: f64,
    pub action: f64,
    pub interaction: f64,
    pub highlight: f64,
    pub no_highlight: f64,
}

impl FractionRow {
    pub fn from_counts(label: impl Into<String>, counts: &CategoryCounts) -> Self {
        let n = counts.clips();
        let share = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        Self {
            label: label.into(),
            clips: n,
            funny: share(counts.funny),
            action: share(counts.action),
            interaction: share(counts.interaction),
            highlight: share(counts.highlight_total()),
            no_highlight: share(counts.none),
        }
    }

    /// The five shares at two decimals.
    pub fn rendered(&self) -> [String; 5] {
        [self.funny, self.action, self.interaction, self.highlight, self.no_highlight].map(|v| format!("{v:.2}"))
    }
}

/// Comma-separated fraction table.
pub fn render_fraction_table(rows: &[FractionRow]) -> String {
    let mut out = String::from("modalities,clips,funny,action,interaction,highlight_total,no_highlight_total\n");
    for r in rows {
        out.push_str(&format!("\"{}\",{},{}\n", r.label, r.clips, r.rendered().join(",")));
    }
    out
}

/// Read `modalities,funny,action,interaction,none` count rows.
pub fn read_count_rows(reader: impl Read) -> Result<Vec<(String, CategoryCounts)>> {
    #[derive(Deserialize)]
    struct Row {
        modalities: String,
        funny: usize,
        action: usize,
        interaction: usize,
        none: usize,
    }
    csv::Reader::from_reader(reader)
        .deserialize::<Row>()
        .map(|r| {
            let r = r.map_err(|e| Error::Parse(format!("count record: {e}")))?;
            Ok((
                r.modalities,
                CategoryCounts {
                    funny: r.funny,
                    action: r.action,
                    interaction: r.interaction,
                    none: r.none,
                },
            ))
        })
        .collect()
}

/// Histogram of first-apex positions (as a fraction of video duration), per category.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TemporalHistogram {
    pub bins: usize,
    pub counts: BTreeMap<Category, Vec<usize>>,
}

impl TemporalHistogram {
    /// Share of a category's clips in bins `range`.
    pub fn share(&self, category: Category, range: std::ops::Range<usize>) -> f64 {
        let Some(c) = self.counts.get(&category) else { return 0.0 };
        let total: usize = c.iter().sum();
        if total == 0 {
            return 0.0;
        }
        c[range].iter().sum::<usize>() as f64 / total as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end");
        for c in self.counts.keys() {
            out.push(',');
            out.push_str(c.as_str());
        }
        out.push('\n');
        for b in 0..self.bins {
            out.push_str(&format!("{},{}", b as f64 / self.bins as f64, (b + 1) as f64 / self.bins as f64));
            for counts in self.counts.values() {
                out.push_str(&format!(",{}", counts[b]));
            }
            out.push('\n');
        }
        out
    }
}

/// Bin each clip's first-apex position by category. Bins are half-open
/// except the last, which also takes position 1. Clips without a category
/// or without a known duration are skipped.
pub fn highlights_over_time(
    clips: &[(String, HighlightClip)],
    durations: &BTreeMap<String, f64>,
    bins: usize,
) -> Result<TemporalHistogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let mut counts: BTreeMap<Category, Vec<usize>> = Category::ALL.into_iter().map(|c| (c, vec![0; bins])).collect();
    for (video, clip) in clips {
        let (Some(category), Some(&duration)) = (clip.category, durations.get(video)) else {
            log::warn!("skipping clip at {} s of `{video}`: no category or duration", clip.start);
            continue;
        };
        let position = (clip.first_apex() / duration).clamp(0.0, 1.0);
        let bin = ((position * bins as f64).floor() as usize).min(bins - 1);
        counts.get_mut(&category).expect("all categories present")[bin] += 1;
    }
    Ok(TemporalHistogram { bins, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(start: f64, end: f64) -> HighlightClip {
        HighlightClip {
            start,
            end,
            apexes: vec![start],
            category: None,
        }
    }

    #[test]
    fn detection_examples() {
        let clips = [clip(10.0, 25.0), clip(40.0, 55.0)];
        let s = score_detection(&clips, &[20.0, 50.0], 0.0);
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let s = score_detection(&[], &[20.0], 2.0);
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
        let s = score_detection(&clips, &[20.0], 2.0);
        assert_eq!((s.precision, s.recall), (0.5, 1.0));
        let s = score_detection(&clips, &[26.5], 2.0);
        assert_eq!(s.recall, 1.0);
        let s = score_detection(&[clip(10.0, 25.0)], &[15.0, 20.0], 0.0);
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
    }

    proptest::proptest! {
        #[test]
        fn recall_monotone_in_tolerance(
            starts in proptest::collection::vec(0.0f64..100.0, 0..8),
            events in proptest::collection::vec(0.0f64..120.0, 1..8),
            tol in 0.0f64..5.0,
            extra in 0.0f64..5.0,
        ) {
            let clips: Vec<HighlightClip> = starts.iter().map(|&s| clip(s, s + 15.0)).collect();
            let a = score_detection(&clips, &events, tol);
            let b = score_detection(&clips, &events, tol + extra);
            proptest::prop_assert!(b.recall >= a.recall);
            proptest::prop_assert!((0.0..=1.0).contains(&a.precision) && (0.0..=1.0).contains(&a.recall));
        }
    }

    #[test]
    fn parses_and_rejects_annotations() {
        let text = "video_id,start_s,end_s,category\nv1,0,15,funny\nv1,20,35,none\nv2,5,20,action\n";
        let a = read_annotations(text.as_bytes()).unwrap();
        assert_eq!(a.len(), 3);
        let s = summarize_categories(&a);
        assert_eq!(
            s.total,
            CategoryCounts {
                funny: 1,
                action: 1,
                interaction: 0,
                none: 1
            }
        );
        assert_eq!(s.videos[0].0, "v1");
        let bad = "video_id,start_s,end_s,category\nv1,0,15,epic\n";
        assert!(matches!(read_annotations(bad.as_bytes()), Err(Error::Parse(_))));
        let empty = read_annotations("video_id,start_s,end_s,category\n".as_bytes()).unwrap();
        assert_eq!(summarize_categories(&empty).total, CategoryCounts::default());
    }

    #[test]
    fn fraction_rendering() {
        let counts = CategoryCounts {
            funny: 26,
            action: 25,
            interaction: 24,
            none: 23,
        };
        let row = FractionRow::from_counts("face,game,audio", &counts);
        assert_eq!(row.clips, 98);
        assert_eq!(row.rendered(), ["0.27", "0.26", "0.24", "0.77", "0.23"].map(String::from));
    }

    #[test]
    fn histogram_binning() {
        let durations = BTreeMap::from([("v".to_string(), 100.0)]);
        let mut c = clip(40.0, 55.0);
        c.apexes = vec![50.0];
        c.category = Some(Category::Funny);
        let mut end = c.clone();
        end.apexes = vec![100.0];
        let h = highlights_over_time(&[("v".into(), c), ("v".into(), end)], &durations, 10).unwrap();
        assert_eq!(h.counts[&Category::Funny][5], 1);
        assert_eq!(h.counts[&Category::Funny][9], 1);
        assert_eq!(h.counts[&Category::Funny].iter().sum::<usize>(), 2);
        assert!(highlights_over_time(&[], &durations, 0).is_err());
    }
}
