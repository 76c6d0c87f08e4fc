//! On-disk formats: series tables and the line-delimited clip manifest.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clipper::{Category, HighlightClip};
use crate::error::{Error, Result};

/// A table of timestamped rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    /// Column names after `timestamp_s`.
    pub columns: Vec<String>,
    pub timestamps: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new(columns: Vec<String>, timestamps: Vec<f64>, rows: Vec<Vec<f64>>) -> Self {
        Self { columns, timestamps, rows }
    }

    pub fn single(column: &str, timestamps: &[f64], values: &[f64]) -> Self {
        Self::new(
            vec![column.to_string()],
            timestamps.to_vec(),
            values.iter().map(|&v| vec![v]).collect(),
        )
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(std::iter::once("timestamp_s").chain(self.columns.iter().map(String::as_str)))?;
        for (t, row) in self.timestamps.iter().zip(&self.rows) {
            out.write_record(std::iter::once(t).chain(row).map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("timestamp_s") {
            return Err(Error::Parse("series table must start with a timestamp_s column".into()));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(String::from).collect();
        let mut timestamps = Vec::new();
        let mut rows = Vec::new();
        for record in reader.records() {
            let values = record?
                .iter()
                .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(format!("`{v}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            timestamps.push(values[0]);
            rows.push(values[1..].to_vec());
        }
        Ok(Self { columns, timestamps, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

pub const MANIFEST_FORMAT: &str = "highlight-clips";

/// First line of a clip manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub video_id: String,
    pub duration_s: f64,
    pub seed: u64,
    pub fraction: f64,
}

impl ManifestHeader {
    pub fn new(video_id: impl Into<String>, duration_s: f64, seed: u64, fraction: f64) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            video_id: video_id.into(),
            duration_s,
            seed,
            fraction,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ClipRecord {
    video_id: String,
    start_s: f64,
    end_s: f64,
    apexes_s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<Category>,
}

/// Header plus clips, one JSON object per line.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipManifest {
    pub header: ManifestHeader,
    pub clips: Vec<HighlightClip>,
}

fn check_clips(clips: &[HighlightClip], duration: f64) -> Result<()> {
    for c in clips {
        let inside = c.start >= 0.0 && c.end <= duration && c.start < c.end;
        let spans = c.apexes.iter().all(|&a| a >= c.start && a <= c.end);
        if !(inside && spans) {
            return Err(Error::Invariant(format!("clip [{}, {}] violates its bounds", c.start, c.end)));
        }
    }
    for pair in clips.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::Invariant(format!(
                "clips [{}, {}] and [{}, {}] overlap or are out of order",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
    }
    Ok(())
}

/// Write the manifest after checking the clip invariants.
pub fn export_clip_manifest(mut w: impl Write, manifest: &ClipManifest) -> Result<()> {
    check_clips(&manifest.clips, manifest.header.duration_s)?;
    serde_json::to_writer(&mut w, &manifest.header)?;
    w.write_all(b"\n")?;
    for c in &manifest.clips {
        let record = ClipRecord {
            video_id: manifest.header.video_id.clone(),
            start_s: c.start,
            end_s: c.end,
            apexes_s: c.apexes.clone(),
            category: c.category,
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_clip_manifest(r: impl Read) -> Result<ClipManifest> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty clip manifest".into()))??;
    let header: ManifestHeader = serde_json::from_str(&first)?;
    if header.format != MANIFEST_FORMAT {
        return Err(Error::Parse(format!("not a clip manifest: format `{}`", header.format)));
    }
    let mut clips = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ClipRecord = serde_json::from_str(&line)?;
        clips.push(HighlightClip {
            start: r.start_s,
            end: r.end_s,
            apexes: r.apexes_s,
            category: r.category,
        });
    }
    Ok(ClipManifest { header, clips })
}

impl ClipManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        export_clip_manifest(&mut bytes, self)?;
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_clip_manifest(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(start: f64, end: f64, apexes: Vec<f64>) -> HighlightClip {
        HighlightClip {
            start,
            end,
            apexes,
            category: None,
        }
    }

    #[test]
    fn single_clip_record() {
        let m = ClipManifest {
            header: ManifestHeader::new("v", 1200.0, 1, 0.0001),
            clips: vec![clip(90.0, 105.0, vec![100.0])],
        };
        let mut bytes = Vec::new();
        export_clip_manifest(&mut bytes, &m).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], r#"{"video_id":"v","start_s":90.0,"end_s":105.0,"apexes_s":[100.0]}"#);
        assert_eq!(parse_clip_manifest(text.as_bytes()).unwrap(), m);
    }

    #[test]
    fn empty_manifest_has_header_only() {
        let m = ClipManifest {
            header: ManifestHeader::new("v", 10.0, 0, 0.5),
            clips: Vec::new(),
        };
        let mut bytes = Vec::new();
        export_clip_manifest(&mut bytes, &m).unwrap();
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
        assert_eq!(parse_clip_manifest(&bytes[..]).unwrap(), m);
    }

    #[test]
    fn overlap_is_an_invariant_error() {
        let m = ClipManifest {
            header: ManifestHeader::new("v", 1200.0, 0, 0.5),
            clips: vec![clip(90.0, 105.0, vec![100.0]), clip(100.0, 115.0, vec![110.0])],
        };
        assert!(matches!(export_clip_manifest(Vec::new(), &m), Err(Error::Invariant(_))));
    }

    proptest! {
        #[test]
        fn manifest_roundtrip(raw in proptest::collection::vec((0.0f64..50.0, 0.0f64..1.0), 0..12)) {
            let mut t = 0.0;
            let mut clips = Vec::new();
            for (gap, frac) in raw {
                let start = t + gap;
                let end = start + 15.0 + gap / 3.0;
                clips.push(clip(start, end, vec![start + frac * (end - start)]));
                t = end;
            }
            let m = ClipManifest { header: ManifestHeader::new("vid", t + 1.0, 3, 0.01), clips };
            let mut bytes = Vec::new();
            export_clip_manifest(&mut bytes, &m).unwrap();
            prop_assert_eq!(parse_clip_manifest(&bytes[..]).unwrap(), m);
        }

        #[test]
        fn series_roundtrip(values in proptest::collection::vec(proptest::num::f64::NORMAL, 0..30)) {
            let ts: Vec<f64> = (0..values.len()).map(|i| i as f64 / 10.0).collect();
            let table = SeriesTable::single("value", &ts, &values);
            let mut bytes = Vec::new();
            table.write_to(&mut bytes).unwrap();
            prop_assert_eq!(SeriesTable::read_from(&bytes[..]).unwrap(), table);
        }
    }
}
