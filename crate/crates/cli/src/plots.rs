//! Error traces of a run directory as SVG plots, with clips shaded and apexes marked.

use std::path::{Path, PathBuf};

use highlights::persist::{ClipManifest, SeriesTable};
use highlights::pipeline::{novelty_file, AUDIO_FILE, CLIPS_FILE, ERROR_FILE};
use highlights::{Error, Result, View};
use log::warn;
use plotters::prelude::*;

#[derive(Debug, Default)]
pub struct PlotReport {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Trace<'a> {
    name: &'a str,
    title: String,
    table: SeriesTable,
}

const PALETTE: [RGBColor; 4] = [
    RGBColor(31, 119, 180),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn plot_error(name: &str, e: impl std::fmt::Display) -> Error {
    Error::Pipeline(format!("plot {name}: {e}"))
}

fn draw(trace: &Trace, clips: &[(f64, f64)], apexes: &[f64], path: &Path) -> Result<()> {
    let t = &trace.table.timestamps;
    let (t0, t1) = (t[0], t[t.len() - 1].max(t[0] + 1e-6));
    let values = trace.table.rows.iter().flatten().copied();
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let pad = ((hi - lo) * 0.05).max(1e-9);
    let (y0, y1) = (lo - pad, hi + pad);

    let root = SVGBackend::new(path, (1000, 320)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_error(trace.name, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(&trace.title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(32)
        .y_label_area_size(64)
        .build_cartesian_2d(t0..t1, y0..y1)
        .map_err(|e| plot_error(trace.name, e))?;
    chart
        .configure_mesh()
        .x_desc("time (s)")
        .disable_mesh()
        .draw()
        .map_err(|e| plot_error(trace.name, e))?;
    chart
        .draw_series(
            clips
                .iter()
                .map(|&(s, e)| Rectangle::new([(s, y0), (e, y1)], RGBColor(255, 190, 60).mix(0.3).filled())),
        )
        .map_err(|e| plot_error(trace.name, e))?;
    for (j, column) in trace.table.columns.iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(t.iter().zip(&trace.table.rows).map(|(&x, r)| (x, r[j])), &color))
            .map_err(|e| plot_error(trace.name, e))?
            .label(column.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    let marks: Vec<(f64, f64)> = apexes
        .iter()
        .filter_map(|&a| {
            let i = t.partition_point(|&x| x < a - 1e-6);
            trace.table.rows.get(i).map(|r| (a, r[0]))
        })
        .collect();
    chart
        .draw_series(marks.iter().map(|&p| Circle::new(p, 3, RED.filled())))
        .map_err(|e| plot_error(trace.name, e))?;
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_error(trace.name, e))?;
    root.present().map_err(|e| plot_error(trace.name, e))?;
    Ok(())
}

/// One plot per available series (fused error, face, game, audio) under `out`.
pub fn emit_plots(run_dir: &Path, out: &Path) -> Result<PlotReport> {
    std::fs::create_dir_all(out)?;
    let mut report = PlotReport::default();
    let clips = match ClipManifest::load(&run_dir.join(CLIPS_FILE)) {
        Ok(m) => m.clips,
        Err(e) => {
            report.warnings.push(format!("no clip manifest, highlights not marked: {e}"));
            Vec::new()
        }
    };
    let spans: Vec<(f64, f64)> = clips.iter().map(|c| (c.start, c.end)).collect();
    let apexes: Vec<f64> = clips.iter().flat_map(|c| c.apexes.iter().copied()).collect();
    let sources = [
        ("fused", ERROR_FILE.to_string(), "Fused prediction error".to_string()),
        ("face", novelty_file(View::Face), "Face reconstruction error".to_string()),
        ("game", novelty_file(View::Game), "Game reconstruction error".to_string()),
        ("audio", AUDIO_FILE.to_string(), "Audio principal components".to_string()),
    ];
    for (name, file, title) in sources {
        let path = run_dir.join(&file);
        if !path.exists() {
            if name == "fused" {
                report.warnings.push(format!("{file} missing, fused plot skipped"));
            }
            continue;
        }
        let table = SeriesTable::load(&path)?;
        if table.timestamps.is_empty() {
            report.warnings.push(format!("{file} is empty, {name} plot skipped"));
            continue;
        }
        let target = out.join(format!("{name}.svg"));
        let marks = if name == "fused" { &apexes[..] } else { &[] };
        draw(&Trace { name, title, table }, &spans, marks, &target)?;
        report.written.push(target);
    }
    for w in &report.warnings {
        warn!("{w}");
    }
    Ok(report)
}
