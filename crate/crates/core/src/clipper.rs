//! Apex selection on the fused prediction error, apex linking, and clip
//! boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::PredictionErrorSeries;

/// Seconds of context kept before the first apex of a clip.
pub const DEFAULT_PRE_SECONDS: f64 = 10.0;
/// Seconds kept after the last apex of a clip.
pub const DEFAULT_POST_SECONDS: f64 = 5.0;
/// Share of timesteps selected as apexes (0.01 %).
pub const DEFAULT_FRACTION: f64 = 0.0001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipperConfig {
    pub fraction: f64,
    pub pre_s: f64,
    pub post_s: f64,
}

impl Default for ClipperConfig {
    fn default() -> Self {
        Self {
            fraction: DEFAULT_FRACTION,
            pre_s: DEFAULT_PRE_SECONDS,
            post_s: DEFAULT_POST_SECONDS,
        }
    }
}

impl ClipperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Config(format!("clipper.fraction {} must lie in (0, 1]", self.fraction)));
        }
        if !(self.pre_s >= 0.0 && self.post_s >= 0.0) || self.pre_s + self.post_s <= 0.0 {
            return Err(Error::Config("clip padding must be non-negative with a positive total".into()));
        }
        Ok(())
    }
}

/// Human judgement attached to a clip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Funny,
    Action,
    Interaction,
    None,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Funny, Category::Action, Category::Interaction, Category::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Funny => "funny",
            Category::Action => "action",
            Category::Interaction => "interaction",
            Category::None => "none",
        }
    }

    pub fn is_highlight(self) -> bool {
        self != Category::None
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown category `{s}`")))
    }
}

/// Timesteps with the largest prediction errors.
#[derive(Clone, Debug, PartialEq)]
pub struct ApexSet {
    /// Ascending timestep indices.
    pub indices: Vec<usize>,
    pub fraction: f64,
    /// Smallest selected error.
    pub threshold_value: f64,
}

/// Number of apexes selected from `n` timesteps: `max(1, ceil(fraction · n))`.
pub fn apex_count(n: usize, fraction: f64) -> usize {
    let raw = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    raw.min(n)
}

/// Select the top `ceil(fraction · N)` errors; ties go to the earlier timestep.
pub fn select_apexes(errors: &[f64], fraction: f64) -> Result<ApexSet> {
    if errors.is_empty() {
        return Err(Error::Input("cannot select apexes from an empty series".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction {fraction} must lie in (0, 1]")));
    }
    let count = apex_count(errors.len(), fraction);
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));
    let mut indices = order[..count].to_vec();
    let threshold_value = errors[*indices.last().expect("count >= 1")];
    indices.sort_unstable();
    Ok(ApexSet {
        indices,
        fraction,
        threshold_value,
    })
}

/// Greedily chain sorted apex times whose clips would overlap: `next` joins
/// the current group when `next − pre < last + post`.
pub fn link_apexes(times: &[f64], pre_s: f64, post_s: f64) -> Vec<Vec<f64>> {
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for &t in times {
        match groups.last_mut() {
            Some(group) if t - pre_s < group.last().expect("non-empty group") + post_s => group.push(t),
            _ => groups.push(vec![t]),
        }
    }
    groups
}

/// A highlight clip with the apexes it was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighlightClip {
    pub start: f64,
    pub end: f64,
    pub apexes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl HighlightClip {
    pub fn first_apex(&self) -> f64 {
        self.apexes.first().copied().unwrap_or(self.start)
    }

    pub fn contains(&self, t: f64, tolerance: f64) -> bool {
        t >= self.start - tolerance && t <= self.end + tolerance
    }
}

/// `[max(0, first − pre), min(duration, last + post)]` for each group.
pub fn clips_from_groups(groups: &[Vec<f64>], duration: f64, pre_s: f64, post_s: f64) -> Result<Vec<HighlightClip>> {
    groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            if let Some(bad) = g.iter().find(|&&t| !(0.0..=duration).contains(&t)) {
                return Err(Error::Input(format!("apex at {bad} s lies outside the {duration} s video")));
            }
            Ok(HighlightClip {
                start: (g[0] - pre_s).max(0.0),
                end: (g[g.len() - 1] + post_s).min(duration),
                apexes: g.clone(),
                category: None,
            })
        })
        .collect()
}

/// Apex selection, linking and clip construction in one go.
pub fn detect_clips(errors: &PredictionErrorSeries, duration: f64, config: &ClipperConfig) -> Result<(ApexSet, Vec<HighlightClip>)> {
    config.validate()?;
    let apexes = select_apexes(&errors.values, config.fraction)?;
    let times: Vec<f64> = apexes.indices.iter().map(|&i| errors.timestamps[i]).collect();
    let groups = link_apexes(&times, config.pre_s, config.post_s);
    let clips = clips_from_groups(&groups, duration, config.pre_s, config.post_s)?;
    Ok((apexes, clips))
}
