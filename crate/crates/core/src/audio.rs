//! Speech-band spectral features of audio windows, reduced with PCA.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AudioWindowSeries;

/// One-sided magnitude spectrum of a window, bins `0..=N/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_freqs: Vec<f64>,
    /// Length of the transformed window.
    pub window_len: usize,
}

impl Spectrum {
    /// Multiplicity of bin `k` in the two-sided spectrum.
    fn bin_weight(&self, k: usize) -> f64 {
        let n = self.window_len;
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else {
            2.0
        }
    }

    /// Two-sided energy `Σ|X_k|² / N`; equals the windowed signal's energy.
    pub fn energy(&self) -> f64 {
        self.weighted_energy(0..self.magnitudes.len())
    }

    fn weighted_energy(&self, bins: impl Iterator<Item = usize>) -> f64 {
        bins.map(|k| self.bin_weight(k) * self.magnitudes[k].powi(2)).sum::<f64>() / self.window_len as f64
    }

    /// Fraction of spectral energy inside `band`.
    pub fn band_energy_fraction(&self, band: &BandSpec) -> Result<f64> {
        let range = band.bin_range(self)?;
        let total = self.energy();
        if total == 0.0 {
            return Ok(0.0);
        }
        Ok(self.weighted_energy(range) / total)
    }
}

/// Pass band in Hz, inclusive at both edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Default for BandSpec {
    /// Telephone speech band.
    fn default() -> Self {
        Self {
            low_hz: 300.0,
            high_hz: 3400.0,
        }
    }
}

impl BandSpec {
    pub fn validate(&self, nyquist: f64) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz <= nyquist) {
            return Err(Error::Config(format!(
                "band [{}, {}] Hz must satisfy 0 < low < high <= Nyquist ({nyquist} Hz)",
                self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }

    /// Indices of the bins with `low <= freq <= high`.
    pub fn bin_range(&self, spectrum: &Spectrum) -> Result<std::ops::Range<usize>> {
        let nyquist = spectrum.bin_freqs.last().copied().unwrap_or(0.0);
        self.validate(nyquist)?;
        const TOL: f64 = 1e-9;
        let start = spectrum.bin_freqs.partition_point(|&f| f < self.low_hz - TOL);
        let end = spectrum.bin_freqs.partition_point(|&f| f <= self.high_hz + TOL);
        Ok(start..end)
    }
}

/// Hann-tapered FFT magnitudes for windows of a fixed length.
pub struct SpectrumAnalyzer {
    sample_rate: u32,
    taper: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(window_len: usize, sample_rate: u32) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::Input("cannot transform an empty window".into()));
        }
        // Periodic Hann.
        let taper = (0..window_len)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / window_len as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(window_len);
        Ok(Self { sample_rate, taper, fft })
    }

    /// The window after tapering, as fed to the transform.
    pub fn tapered(&self, window: &[f32]) -> Vec<f64> {
        window.iter().zip(&self.taper).map(|(&x, &w)| x as f64 * w).collect()
    }

    pub fn magnitudes(&self, window: &[f32]) -> Result<Spectrum> {
        let n = self.taper.len();
        if window.len() != n {
            return Err(Error::Input(format!("window has {} samples, expected {n}", window.len())));
        }
        let mut buf: Vec<Complex<f64>> = self.tapered(window).into_iter().map(|x| Complex::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        let bins = n / 2 + 1;
        let width = self.sample_rate as f64 / n as f64;
        Ok(Spectrum {
            magnitudes: buf[..bins].iter().map(|c| c.norm()).collect(),
            bin_freqs: (0..bins).map(|k| k as f64 * width).collect(),
            window_len: n,
        })
    }
}

/// Magnitude spectrum of a single window.
pub fn stft_magnitudes(window: &[f32], sample_rate: u32) -> Result<Spectrum> {
    SpectrumAnalyzer::new(window.len(), sample_rate)?.magnitudes(window)
}

/// Magnitudes of the bins inside `band`, in ascending frequency order.
pub fn band_filter(spectrum: &Spectrum, band: &BandSpec) -> Result<Vec<f64>> {
    Ok(spectrum.magnitudes[band.bin_range(spectrum)?].to_vec())
}

/// Principal components of a centred data matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of input dimension.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Trace of the covariance matrix.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// `(x − mean) · componentsᵀ`
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!(
                "vector has {} entries, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    /// Map a k-vector back to input space.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &s) in self.components.iter().zip(z) {
            out.iter_mut().zip(c).for_each(|(o, c)| *o += s * c);
        }
        out
    }
}

/// Fit the top-`k` principal components of `rows` (one observation per row).
pub fn fit_pca(rows: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if k == 0 || k > n.min(d) {
        return Err(Error::Config(format!("k = {k} must be in 1..={} for a {n}x{d} matrix", n.min(d))));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Input("PCA rows have differing lengths".into()));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let denom = (n.max(2) - 1) as f64;
    let total_variance = centred.iter().map(|x| x * x).sum::<f64>() / denom;

    // Eigendecompose the smaller of the covariance (d×d) and Gram (n×n) matrices.
    let (values, mut components) = if n >= d {
        let cov = centred.tr_mul(&centred) / denom;
        let (values, vectors) = top_eigenpairs(cov, k);
        let comps = vectors.into_iter().map(|v| v.iter().copied().collect()).collect();
        (values, comps)
    } else {
        let gram = &centred * centred.transpose() / denom;
        let (values, vectors) = top_eigenpairs(gram, k);
        let mut comps: Vec<Vec<f64>> = Vec::with_capacity(k);
        for (lambda, u) in values.iter().zip(vectors) {
            let v = centred.tr_mul(&u);
            let norm = v.norm();
            if *lambda > 1e-12 * total_variance.max(f64::MIN_POSITIVE) && norm > 0.0 {
                comps.push((v / norm).iter().copied().collect());
            } else {
                comps.push(orthonormal_complement(&comps, d));
            }
        }
        (values, comps)
    };
    for c in &mut components {
        fix_sign(c);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: values.into_iter().map(|v| v.max(0.0)).collect(),
        total_variance,
    })
}

fn top_eigenpairs(matrix: DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<nalgebra::DVector<f64>>) {
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(k);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    (values, vectors)
}

/// First standard basis vector made orthogonal to `basis` (Gram-Schmidt).
fn orthonormal_complement(basis: &[Vec<f64>], d: usize) -> Vec<f64> {
    for axis in 0..d {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
    vec![0.0; d]
}

/// Make the largest-magnitude coordinate positive.
fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
        .0;
    if v.get(pivot).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Per-timestep k-dimensional audio features.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioFeatureSeries {
    pub values: Vec<Vec<f64>>,
    pub timestamps: Vec<f64>,
}

impl AudioFeatureSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn k(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn truncate(&mut self, len: usize) {
        self.values.truncate(len);
        self.timestamps.truncate(len);
    }

    /// Column `j` over time.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }
}

/// Speech-band magnitudes of every window.
pub fn band_matrix(windows: &AudioWindowSeries, band: &BandSpec) -> Result<Vec<Vec<f64>>> {
    let analyzer = SpectrumAnalyzer::new(windows.window_len, windows.sample_rate)?;
    windows.windows().map(|w| band_filter(&analyzer.magnitudes(w)?, band)).collect()
}

/// Band-filtered spectra of a video's windows projected on their own top-`k` components.
pub fn extract_features(windows: &AudioWindowSeries, band: &BandSpec, k: usize) -> Result<(AudioFeatureSeries, PcaModel)> {
    let rows = band_matrix(windows, band)?;
    let model = fit_pca(&rows, k)?;
    let values = rows.iter().map(|r| model.project(r)).collect::<Result<_>>()?;
    Ok((
        AudioFeatureSeries {
            values,
            timestamps: windows.timestamps(),
        },
        model,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(freq: f64, rate: u32, n: usize, amp: f64) -> Vec<f32> {
        (0..n)
            .map(|i| (amp * (2.0 * PI * freq * i as f64 / rate as f64).sin()) as f32)
            .collect()
    }

    /// Direct O(N²) DFT magnitude of bin `k`.
    fn dft_magnitude(x: &[f64], k: usize) -> f64 {
        let n = x.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &v) in x.iter().enumerate() {
            let a = -2.0 * PI * k as f64 * t as f64 / n;
            re += v * a.cos();
            im += v * a.sin();
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn zero_window_gives_zero_spectrum() {
        let s = stft_magnitudes(&vec![0.0; 6400], 16_000).unwrap();
        assert!(s.magnitudes.iter().all(|&m| m == 0.0));
        assert_eq!(s.magnitudes.len(), 3201);
        assert_eq!(s.bin_freqs[1], 2.5);
        assert_eq!(*s.bin_freqs.last().unwrap(), 8000.0);
    }

    #[test]
    fn empty_window_is_input_error() {
        assert!(matches!(stft_magnitudes(&[], 16_000), Err(Error::Input(_))));
    }

    #[test]
    fn tone_peaks_at_nearest_bin_and_matches_direct_dft() {
        let x = tone(1000.0, 16_000, 6400, 0.8);
        let analyzer = SpectrumAnalyzer::new(6400, 16_000).unwrap();
        let s = analyzer.magnitudes(&x).unwrap();
        let peak = (0..s.magnitudes.len())
            .max_by(|&a, &b| s.magnitudes[a].total_cmp(&s.magnitudes[b]))
            .unwrap();
        assert_eq!(peak, 400);
        let tapered = analyzer.tapered(&x);
        for k in [0, 17, 399, 400, 401, 1234, 3200] {
            let direct = dft_magnitude(&tapered, k);
            assert!((direct - s.magnitudes[k]).abs() < 1e-6 * (1.0 + direct), "bin {k}");
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [6400usize, 6401] {
            let x: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let analyzer = SpectrumAnalyzer::new(n, 16_000).unwrap();
            let s = analyzer.magnitudes(&x).unwrap();
            let time: f64 = analyzer.tapered(&x).iter().map(|v| v * v).sum();
            assert!((s.energy() - time).abs() <= 1e-6 * time);
        }
    }

    #[test]
    fn band_retains_expected_bins() {
        let s = stft_magnitudes(&vec![0.0; 6400], 16_000).unwrap();
        let band = BandSpec::default();
        let range = band.bin_range(&s).unwrap();
        assert_eq!(range, 120..1361);
        assert_eq!(band_filter(&s, &band).unwrap().len(), 1241);
    }

    #[test]
    fn band_energy_of_tones() {
        let band = BandSpec::default();
        let inside = stft_magnitudes(&tone(1000.0, 16_000, 6400, 1.0), 16_000).unwrap();
        assert!(inside.band_energy_fraction(&band).unwrap() >= 0.99);
        let outside = stft_magnitudes(&tone(5000.0, 16_000, 6400, 1.0), 16_000).unwrap();
        assert!(outside.band_energy_fraction(&band).unwrap() <= 0.01);
    }

    #[test]
    fn band_beyond_nyquist_is_config_error() {
        let s = stft_magnitudes(&vec![0.0; 3200], 8_000).unwrap();
        let band = BandSpec {
            low_hz: 300.0,
            high_hz: 4500.0,
        };
        assert!(matches!(band_filter(&s, &band), Err(Error::Config(_))));
        let inverted = BandSpec {
            low_hz: 500.0,
            high_hz: 400.0,
        };
        assert!(matches!(band_filter(&s, &inverted), Err(Error::Config(_))));
    }

    #[test]
    fn rank_one_data_explains_everything() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let model = fit_pca(&rows, 1).unwrap();
        assert!((model.explained_variance_ratio()[0] - 1.0).abs() < 1e-9);
        let c = &model.components[0];
        assert!(c[1] > 0.0 && (c[1] / c[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn full_rank_round_trip_both_routes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Tall (covariance route) and wide (Gram route) inputs.
        for (n, d) in [(30, 5), (5, 12)] {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let k = n.min(d);
            let model = fit_pca(&rows, k).unwrap();
            for (i, a) in model.components.iter().enumerate() {
                for (j, b) in model.components.iter().enumerate() {
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-6);
                }
            }
            for r in &rows {
                let back = model.reconstruct(&model.project(r).unwrap());
                for (x, y) in r.iter().zip(&back) {
                    assert!((x - y).abs() < 1e-6, "{n}x{d}");
                }
            }
            assert!(model.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn gram_and_covariance_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..8).map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let wide = fit_pca(&rows, 3).unwrap();
        // Mean-padded rows, covariance route.
        let mean = wide.mean.clone();
        let mut tall = rows.clone();
        tall.extend(std::iter::repeat_n(mean, 10));
        let tall = fit_pca(&tall, 3).unwrap();
        for (a, b) in wide.components.iter().zip(&tall.components) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn projection_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let model = fit_pca(&rows, 3).unwrap();
        assert!(model.project(&model.mean).unwrap().iter().all(|v| v.abs() < 1e-12));
        let shifted: Vec<f64> = model.mean.iter().zip(&model.components[0]).map(|(m, c)| m + 1.5 * c).collect();
        let z = model.project(&shifted).unwrap();
        assert!((z[0] - 1.5).abs() < 1e-9 && z[1].abs() < 1e-9 && z[2].abs() < 1e-9);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let z = model.project(&x).unwrap();
        for (j, c) in model.components.iter().enumerate() {
            let mut dot = 0.0;
            for i in 0..4 {
                dot += (x[i] - model.mean[i]) * c[i];
            }
            assert!((z[j] - dot).abs() < 1e-12);
        }
        assert!(matches!(model.project(&[0.0; 3]), Err(Error::Input(_))));
    }

    #[test]
    fn k_out_of_range_is_config_error() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(fit_pca(&rows, 3), Err(Error::Config(_))));
        assert!(matches!(fit_pca(&rows, 0), Err(Error::Config(_))));
    }

    #[test]
    fn projected_variances_match_explained_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..5).map(|j| rng.gen_range(-1.0..1.0) * (j + 1) as f64).collect())
            .collect();
        let model = fit_pca(&rows, 5).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| model.project(r).unwrap()).collect();
        for j in 0..5 {
            let var = z.iter().map(|v| v[j] * v[j]).sum::<f64>() / 59.0;
            assert!((var - model.explained_variance[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn band_length_constant_across_windows() {
        let mut samples = vec![0.0f32; 16_000 * 2];
        samples
            .iter_mut()
            .enumerate()
            .for_each(|(i, s)| *s = ((i % 97) as f32 / 97.0) - 0.5);
        let windows = AudioWindowSeries::from_samples(samples, 16_000);
        let rows = band_matrix(&windows, &BandSpec::default()).unwrap();
        assert!(rows.iter().all(|r| r.len() == 1241));
    }
}
