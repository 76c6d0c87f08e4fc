//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass criterion numbers as arguments to run
//! a subset, e.g. `cargo test --test acceptance -- 3 4`.

use std::f64::consts::TAU;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use highlights::audio::{fit_pca, stft_magnitudes, BandSpec};
use highlights::clipper::{clips_from_groups, link_apexes, select_apexes, HighlightClip};
use highlights::config::{Architecture, PipelineConfig};
use highlights::evalbench::{
    generate_synthetic_stream, highlights_over_time, read_annotations, read_count_rows, read_durations, score_detection,
    summarize_categories, FractionRow, PlantedEvent, SyntheticStreamSpec,
};
use highlights::fusion::{prediction_errors, train_forecaster, ForecasterSpec, ForecasterTraining, FusedSeries};
use highlights::pipeline::{run_on_inputs, ViewInputs, CLIPS_FILE, ERROR_FILE};
use highlights::vision::{build_autoencoder, frame_error, train_autoencoder, AutoencoderSpec, LayerKind, TrainConfig};
use highlights::View;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture(name: &str) -> std::fs::File {
    std::fs::File::open(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).expect("fixture present")
}

fn synthetic_config(out: &Path, seed: u64, fraction: f64) -> PipelineConfig {
    let mut config = PipelineConfig {
        out: out.to_path_buf(),
        seed,
        ..Default::default()
    };
    config.vision.architecture = Architecture::Compact;
    config.clipper.fraction = fraction;
    config
}

/// 2-minute synthetic stream, 4 multi-view events, 2 s tolerance.
fn synthetic_end_to_end() -> Outcome {
    let spec = SyntheticStreamSpec::default();
    assert!(spec.events.len() == 4 && spec.events.iter().all(|e| e.views.len() >= 2));
    assert_eq!(
        (spec.duration_s, spec.frame_size, spec.rate, spec.sample_rate),
        (120.0, 64, 10.0, 16_000)
    );
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let stream = generate_synthetic_stream(&spec).unwrap();
    let run = run_on_inputs(
        &synthetic_config(dir.path(), 0, 0.03),
        ViewInputs::from_synthetic(&stream, "synthetic"),
    )
    .unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let score = score_detection(&run.clips.clips, &spec.event_times(), 2.0);
    let apexes = run.apexes.indices.len();
    check(
        apexes >= 4 && score.recall >= 0.75 && score.precision >= 0.6 && seconds < 900.0,
        format!(
            "apexes={apexes} clips={} recall={:.2} precision={:.2} runtime={seconds:.0}s",
            run.clips.clips.len(),
            score.recall,
            score.precision
        ),
    )
}

/// Trained on base patterns P, scored on disjoint novel patterns Q.
fn novelty_margin() -> Outcome {
    let size = 32;
    let base = SyntheticStreamSpec {
        duration_s: 10.0,
        frame_size: size,
        events: Vec::new(),
        seed: 11,
        ..Default::default()
    };
    let novel = SyntheticStreamSpec {
        events: vec![PlantedEvent {
            time_s: 2.0,
            views: vec![View::Face, View::Game],
            magnitude: 1.0,
        }],
        event_duration_s: 3.0,
        ..base.clone()
    };
    let p_stream = generate_synthetic_stream(&base).unwrap();
    let q_stream = generate_synthetic_stream(&novel).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for (view, p, q) in [
        (View::Face, &p_stream.face, &q_stream.face),
        (View::Game, &p_stream.game, &q_stream.game),
    ] {
        let model = build_autoencoder(&AutoencoderSpec::compact(size as usize), 3).unwrap();
        let config = TrainConfig {
            epochs: 20,
            batch_size: 8,
            seed: 3,
            ..Default::default()
        };
        let trained = train_autoencoder(model, &p.frames, &config).unwrap().model;
        let err = |f| frame_error(f, &trained.reconstruct(f).unwrap()).unwrap();
        let mut p_err: Vec<f64> = p.frames.iter().map(err).collect();
        p_err.sort_by(f64::total_cmp);
        let median = p_err[p_err.len() / 2];
        let q_frames = &q.frames[20..50];
        let q_mean = q_frames.iter().map(err).sum::<f64>() / q_frames.len() as f64;
        ok &= q_mean >= 2.0 * median;
        details.push(format!("{view}: mean(Q)/median(P)={:.1}", q_mean / median));
    }
    check(ok, details.join(" "))
}

/// Share of one-sided spectral energy left after the speech band filter.
fn audio_band_fidelity() -> Outcome {
    let sr = 16_000u32;
    let n = (0.4 * sr as f64) as usize;
    let band = BandSpec::default();
    let kept = |hz: f64| {
        let tone: Vec<f32> = (0..n).map(|i| (TAU * hz * i as f64 / sr as f64).sin() as f32).collect();
        stft_magnitudes(&tone, sr).unwrap().band_energy_fraction(&band).unwrap()
    };
    let (low, high) = (kept(1000.0), kept(5000.0));
    check(
        low >= 0.99 && high <= 0.01,
        format!("1000 Hz kept {:.4}, 5000 Hz kept {:.6}", low, high),
    )
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; eigenvectors are columns.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn pca_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_roundtrip = 0.0f64;
    let mut worst_component = 0.0f64;
    for (n, d) in [(60, 8), (6, 10)] {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|j| rng.gen_range(-1.0..1.0) * (1.0 + j as f64)).collect())
            .collect();
        let rank = (n - 1).min(d);
        let full = fit_pca(&rows, rank).unwrap();
        for r in &rows {
            let back = full.reconstruct(&full.project(r).unwrap());
            for (a, b) in back.iter().zip(r) {
                worst_roundtrip = worst_roundtrip.max((a - b).abs());
            }
        }
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64)
                    .collect()
            })
            .collect();
        let (values, vectors) = jacobi_eigen(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        for (c, &idx) in full.components.iter().zip(&order) {
            let oracle: Vec<f64> = vectors.iter().map(|row| row[idx]).collect();
            let same: f64 = c.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let flipped: f64 = c.iter().zip(&oracle).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            worst_component = worst_component.max(same.min(flipped));
        }
    }
    check(
        worst_roundtrip <= 1e-6 && worst_component <= 1e-6,
        format!("roundtrip max-abs {worst_roundtrip:.2e}, component max-abs vs Jacobi {worst_component:.2e}"),
    )
}

/// Clips from merging overlapping provisional clips, by repeated pairwise union.
fn interval_merge_oracle(times: &[f64], duration: f64) -> Vec<HighlightClip> {
    let mut spans: Vec<(f64, f64, Vec<f64>)> = times.iter().map(|&t| (t - 10.0, t + 5.0, vec![t])).collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..spans.len() {
            for j in i + 1..spans.len() {
                if spans[i].0 < spans[j].1 && spans[j].0 < spans[i].1 {
                    let (s, e, mut a) = spans.remove(j);
                    spans[i].0 = spans[i].0.min(s);
                    spans[i].1 = spans[i].1.max(e);
                    spans[i].2.append(&mut a);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    spans
        .into_iter()
        .map(|(s, e, mut a)| {
            a.sort_by(f64::total_cmp);
            HighlightClip {
                start: s.max(0.0),
                end: e.min(duration),
                apexes: a,
                category: None,
            }
        })
        .collect()
}

fn clip_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let mut singles = 0;
    for case in 0..1000 {
        let n = rng.gen_range(1..3000);
        let duration = n as f64 / 10.0;
        let errors: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let fraction = rng.gen_range(0.0005..0.02);
        let apexes = select_apexes(&errors, fraction).unwrap();
        let times: Vec<f64> = apexes.indices.iter().map(|&i| i as f64 / 10.0).collect();
        let groups = link_apexes(&times, 10.0, 5.0);
        let clips = clips_from_groups(&groups, duration, 10.0, 5.0).unwrap();
        if clips != interval_merge_oracle(&times, duration) {
            failures.push(format!("case {case}: oracle mismatch"));
        }
        if clips.windows(2).any(|p| p[1].start < p[0].end) {
            failures.push(format!("case {case}: overlap"));
        }
        for c in clips
            .iter()
            .filter(|c| c.apexes.len() == 1 && c.apexes[0] >= 10.0 && c.apexes[0] + 5.0 <= duration)
        {
            singles += 1;
            // Length in whole milliseconds.
            let millis = |t: f64| (t * 1000.0).round() as i64;
            let rule = c.start == c.apexes[0] - 10.0 && c.end == c.apexes[0] + 5.0;
            if !rule || millis(c.end) - millis(c.start) != 15_000 {
                failures.push(format!("case {case}: single-apex clip [{}, {}]", c.start, c.end));
            }
        }
        let relinked: Vec<Vec<f64>> = groups.iter().flat_map(|g| link_apexes(g, 10.0, 5.0)).collect();
        if relinked != groups {
            failures.push(format!("case {case}: relinking changed groups"));
        }
        let scale = rng.gen_range(0.01..100.0);
        let scaled: Vec<f64> = errors.iter().map(|e| e * scale).collect();
        if select_apexes(&scaled, fraction).unwrap().indices != apexes.indices {
            failures.push(format!("case {case}: selection changed under scaling"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("1000 sets agree, {singles} unclamped single-apex clips of 15 s")
        } else {
            failures[..failures.len().min(5)].join("; ")
        },
    )
}

fn forecaster_sanity() -> Outcome {
    let timestamps: Vec<f64> = (0..300).map(|i| i as f64 / 10.0).collect();
    let constant = FusedSeries::from_rows(
        vec!["a".into(), "b".into(), "c".into()],
        vec![vec![0.5; 3]; 300],
        timestamps.clone(),
    )
    .unwrap();
    let training = ForecasterTraining {
        epochs: 200,
        bptt_window: 50,
        seed: 1,
        ..Default::default()
    };
    let model = train_forecaster(&constant, &ForecasterSpec::for_width(3), &training).unwrap();
    let e = prediction_errors(&model, &constant).unwrap();
    let constant_mean = e.values.iter().sum::<f64>() / e.len() as f64;

    let spike = 180;
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|t| {
            let phase = TAU * t as f64 / 40.0;
            let mut r = vec![
                0.35 + 0.15 * phase.sin(),
                0.35 + 0.15 * phase.cos(),
                0.35 + 0.1 * (phase / 2.0).sin(),
            ];
            if t == spike {
                r[0] = 1.0;
                r[1] = 1.0;
            }
            r
        })
        .collect();
    let spiked = FusedSeries::from_rows(vec!["a".into(), "b".into(), "c".into()], rows, timestamps).unwrap();
    let training = ForecasterTraining {
        epochs: 50,
        seed: 1,
        ..Default::default()
    };
    let model = train_forecaster(&spiked, &ForecasterSpec::for_width(3), &training).unwrap();
    let e = prediction_errors(&model, &spiked).unwrap();
    let argmax = e.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    // E[t] scores row t + 1.
    let offset = (argmax + 1) as i64 - spike as i64;
    check(
        constant_mean < 1e-4 && offset.abs() <= 1,
        format!("constant mean E={constant_mean:.2e}, spike argmax offset {offset:+}"),
    )
}

fn fixture_reproduction() -> Outcome {
    let annotations = read_annotations(fixture("category_annotations.csv")).unwrap();
    let summary = summarize_categories(&annotations);
    let t = summary.total;
    let totals = (t.funny, t.action, t.interaction, t.highlight_total(), t.none);
    let s23 = summary
        .videos
        .iter()
        .find(|(v, _)| v == "S2_3")
        .map(|(_, c)| (c.highlight_total(), c.none));
    let rows = read_count_rows(fixture("subset_counts.csv")).unwrap();
    let rendered = FractionRow::from_counts(rows[0].0.clone(), &rows[0].1).rendered();
    let durations = read_durations(fixture("video_durations.csv")).unwrap();
    let clips: Vec<_> = annotations.iter().map(|a| (a.video_id.clone(), a.to_clip())).collect();
    let early_none = highlights_over_time(&clips, &durations, 10)
        .unwrap()
        .share(highlights::clipper::Category::None, 0..3);
    check(
        totals == (26, 25, 24, 75, 23)
            && s23 == Some((12, 2))
            && rendered == ["0.27", "0.26", "0.24", "0.77", "0.23"]
            && format!("{:.0}", early_none * 100.0) == "61",
        format!(
            "totals {totals:?}, S2_3 {s23:?}, row ({}), early no-highlight {:.0}%",
            rendered.join(", "),
            early_none * 100.0
        ),
    )
}

fn determinism() -> Outcome {
    let spec = SyntheticStreamSpec {
        duration_s: 40.0,
        frame_size: 32,
        events: vec![PlantedEvent {
            time_s: 25.0,
            views: View::ALL.to_vec(),
            magnitude: 1.0,
        }],
        seed: 9,
        ..Default::default()
    };
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let mut config = synthetic_config(dir.path(), 9, 0.01);
        config.vision.epochs = 3;
        config.fusion.epochs = 10;
        let stream = generate_synthetic_stream(&spec).unwrap();
        run_on_inputs(&config, ViewInputs::from_synthetic(&stream, "det")).unwrap();
        outputs.push((
            std::fs::read(dir.path().join(CLIPS_FILE)).unwrap(),
            std::fs::read(dir.path().join(ERROR_FILE)).unwrap(),
        ));
    }
    check(
        outputs[0] == outputs[1],
        format!(
            "clip manifest {} bytes, E series {} bytes, identical={}",
            outputs[0].0.len(),
            outputs[0].1.len(),
            outputs[0] == outputs[1]
        ),
    )
}

fn shape_audit() -> Outcome {
    let spec = AutoencoderSpec::vgg16(224);
    let plan = spec.layer_plan().unwrap();
    let encoder: Vec<String> = plan
        .iter()
        .filter(|l| l.encoder)
        .map(|l| match l.kind {
            LayerKind::Conv { .. } => format!("Conv2d{:?}->{:?}", l.input, l.output),
            _ => format!("MaxPool{:?}->{:?}", l.input, l.output),
        })
        .collect();
    let mut expected = Vec::new();
    let (mut side, mut ch) = (224usize, 3usize);
    for (convs, filters) in [(2, 64), (2, 128), (3, 256), (3, 512), (3, 512)] {
        for _ in 0..convs {
            expected.push(format!("Conv2d{:?}->{:?}", (side, side, ch), (side, side, filters)));
            ch = filters;
        }
        expected.push(format!("MaxPool{:?}->{:?}", (side, side, ch), (side / 2, side / 2, ch)));
        side /= 2;
    }
    let weights: Vec<[usize; 4]> = plan.iter().filter(|l| l.encoder).filter_map(|l| l.weight_shape()).collect();
    let kernels_ok = weights.iter().all(|w| w[2] == 3 && w[3] == 3) && weights.len() == 13;
    let bottleneck = spec.bottleneck_shape();
    check(
        bottleneck == (7, 7, 512) && encoder == expected && kernels_ok,
        format!(
            "bottleneck {bottleneck:?}, {} encoder layers, {} 3×3 convs",
            encoder.len(),
            weights.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("synthetic end-to-end detection", synthetic_end_to_end),
        ("visual novelty margin", novelty_margin),
        ("audio band fidelity", audio_band_fidelity),
        ("PCA correctness", pca_correctness),
        ("clip algebra", clip_algebra),
        ("forecaster sanity", forecaster_sanity),
        ("fixture reproduction", fixture_reproduction),
        ("determinism", determinism),
        ("shape audit", shape_audit),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut stdout = std::io::stdout();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(
            stdout,
            "[{tag}] criterion {n}: {name} ({detail}) [{:.1}s]",
            start.elapsed().as_secs_f64()
        )
        .unwrap();
        stdout.flush().unwrap();
    }
    if failed > 0 {
        writeln!(stdout, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
