//! Force-trace smoothing and vibration spectrum analysis.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{seed, Error, Result};

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, values: Vec<f64>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::domain(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if values.is_empty() {
            return Err(Error::domain(
                "time series must contain at least one sample",
            ));
        }
        Ok(TimeSeries {
            sample_rate,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }
}

/// Causal single-pass exponential smoothing, seeded with the first sample.
pub fn exp_filter(x: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let mut out = Vec::with_capacity(x.values.len());
    let mut y = x.values[0];
    out.push(y);
    for &v in &x.values[1..] {
        y = alpha * v + (1.0 - alpha) * y;
        out.push(y);
    }
    Ok(TimeSeries {
        sample_rate: x.sample_rate,
        values: out,
    })
}

/// Unnormalized forward DFT of a real signal.
pub fn spectrum(values: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

/// Dominant tone of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    /// Interpolated frequency, Hz.
    pub frequency: f64,
    /// Uninterpolated bin index.
    pub bin: usize,
    /// Sinusoid amplitude estimated from the interpolated peak height.
    pub amplitude: f64,
}

/// Finds the largest non-DC peak of the Hann-windowed spectrum and refines it
/// by fitting a parabola through the log magnitudes of the three top bins.
pub fn spectral_peak(x: &TimeSeries) -> Result<SpectralPeak> {
    let n = x.values.len();
    if n < 2 {
        return Err(Error::domain("need at least two samples for a spectrum"));
    }
    let mean = x.values.iter().sum::<f64>() / n as f64;
    let window = hann(n);
    let windowed: Vec<f64> = x
        .values
        .iter()
        .zip(&window)
        .map(|(v, w)| (v - mean) * w)
        .collect();
    let mags: Vec<f64> = spectrum(&windowed)[..=n / 2]
        .iter()
        .map(|c| c.norm())
        .collect();

    let (bin, &peak) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::NoSpectralPeak)?;
    let scale: f64 = x.values.iter().map(|v| v.abs()).sum::<f64>();
    if !(peak > 1e-9 * scale) || peak == 0.0 {
        return Err(Error::NoSpectralPeak);
    }

    let mut delta = 0.0;
    if bin >= 2 && bin + 1 < mags.len() && mags[bin - 1] > 0.0 && mags[bin + 1] > 0.0 {
        let (a, b, c) = (mags[bin - 1].ln(), peak.ln(), mags[bin + 1].ln());
        let curvature = a - 2.0 * b + c;
        if curvature < 0.0 {
            delta = (0.5 * (a - c) / curvature).clamp(-0.5, 0.5);
        }
    }
    let nyquist = x.sample_rate / 2.0;
    let frequency = ((bin as f64 + delta) * x.sample_rate / n as f64).clamp(0.0, nyquist);
    // Hann main-lobe response at `delta` bins off center.
    let scallop = if delta == 0.0 {
        1.0
    } else {
        let pd = std::f64::consts::PI * delta;
        pd.sin() / (pd * (1.0 - delta * delta))
    };
    let window_sum: f64 = window.iter().sum();
    Ok(SpectralPeak {
        frequency,
        bin,
        amplitude: 2.0 * peak / (window_sum * scallop),
    })
}

pub fn fundamental_frequency(x: &TimeSeries) -> Result<f64> {
    spectral_peak(x).map(|p| p.frequency)
}

/// Mean of per-trial fundamentals.
pub fn mean_fundamental(trials: &[TimeSeries]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::domain("need at least one trial"));
    }
    let sum = trials
        .iter()
        .map(fundamental_frequency)
        .sum::<Result<f64>>()?;
    Ok(sum / trials.len() as f64)
}

/// `amplitude·sin(2πft + φ)` with random phase plus white noise at `snr_db`
/// (signal power over noise power). `snr_db = ∞` gives a clean tone.
pub fn synth_tone(
    frequency: f64,
    amplitude: f64,
    sample_rate: f64,
    duration: f64,
    snr_db: f64,
    seed: u64,
) -> Result<TimeSeries> {
    let n = (duration * sample_rate).round() as usize;
    let mut rng = seed::rng(seed);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let sigma = if snr_db.is_finite() {
        (amplitude * amplitude / 2.0 / 10f64.powf(snr_db / 10.0)).sqrt()
    } else {
        0.0
    };
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
    let values = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            let s = amplitude * (std::f64::consts::TAU * frequency * t + phase).sin();
            if sigma > 0.0 {
                s + noise.sample(&mut rng)
            } else {
                s
            }
        })
        .collect();
    TimeSeries::new(sample_rate, values)
}

/// A time series read from CSV together with its `# key=value` header comments.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub series: TimeSeries,
    pub metadata: BTreeMap<String, String>,
}

/// Writes `# sample_rate_hz=...` (plus any extra metadata) and `t,value` rows.
pub fn write_series_csv<W: Write>(
    mut w: W,
    x: &TimeSeries,
    metadata: &BTreeMap<String, String>,
) -> std::io::Result<()> {
    writeln!(w, "# sample_rate_hz={}", x.sample_rate)?;
    for (k, v) in metadata {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "t,value")?;
    for (i, v) in x.values.iter().enumerate() {
        writeln!(w, "{},{}", i as f64 / x.sample_rate, v)?;
    }
    Ok(())
}

/// Parses the format produced by [`write_series_csv`]. Without a
/// `sample_rate_hz` comment the rate is inferred from the time column.
pub fn parse_series_csv(text: &str, path: &Path) -> Result<SeriesFile> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as u64,
        message,
    };
    let mut metadata = BTreeMap::new();
    let mut header_seen = false;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !header_seen {
            header_seen = true;
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols == ["t", "value"] {
                continue;
            }
        }
        let mut cols = line.split(',');
        let (t, v) = match (cols.next(), cols.next(), cols.next()) {
            (Some(t), Some(v), None) => (t.trim(), v.trim()),
            _ => return Err(perr(line_no, format!("expected 2 columns, got {:?}", raw))),
        };
        let t: f64 = t
            .parse()
            .map_err(|_| perr(line_no, format!("bad time {t:?}")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| perr(line_no, format!("bad value {v:?}")))?;
        times.push(t);
        values.push(v);
    }
    if values.is_empty() {
        return Err(perr(text.lines().count().max(1), "no samples".into()));
    }
    let sample_rate = match metadata.get("sample_rate_hz") {
        Some(s) => s
            .parse::<f64>()
            .map_err(|_| perr(1, format!("bad sample_rate_hz {s:?}")))?,
        None => {
            let span = times[times.len() - 1] - times[0];
            if times.len() < 2 || !(span > 0.0) {
                return Err(perr(
                    1,
                    "cannot infer sample rate: add a '# sample_rate_hz=' line".into(),
                ));
            }
            (times.len() - 1) as f64 / span
        }
    };
    let series = TimeSeries::new(sample_rate, values).map_err(|e| perr(1, e.to_string()))?;
    Ok(SeriesFile { series, metadata })
}

pub fn read_series_csv(path: &Path) -> Result<SeriesFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(100.0, v.to_vec()).unwrap()
    }

    #[test]
    fn constant_is_fixed_point() {
        assert_eq!(
            exp_filter(&ts(&[5.0; 4]), 0.1).unwrap().values,
            vec![5.0; 4]
        );
    }

    #[test]
    fn unit_step_unrolled() {
        let y = exp_filter(&ts(&[0.0, 1.0, 1.0, 1.0]), 0.1).unwrap().values;
        for (got, want) in y.iter().zip([0.0, 0.1, 0.19, 0.271]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn alpha_one_is_identity() {
        let x = ts(&[3.0, -1.0, 7.5, 0.25]);
        assert_eq!(exp_filter(&x, 1.0).unwrap(), x);
    }

    #[test]
    fn alpha_out_of_range() {
        for a in [0.0, -0.5, 1.01, f64::NAN] {
            assert!(matches!(exp_filter(&ts(&[1.0]), a), Err(Error::Domain(_))));
        }
    }

    proptest! {
        #[test]
        fn filter_is_linear(
            xs in prop::collection::vec(-100.0f64..100.0, 1..64),
            a in -3.0f64..3.0, b in -3.0f64..3.0, alpha in 0.01f64..=1.0,
        ) {
            let ys: Vec<f64> = xs.iter().map(|v| v.sin() * 10.0).collect();
            let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
            let lhs = exp_filter(&ts(&combo), alpha).unwrap().values;
            let fx = exp_filter(&ts(&xs), alpha).unwrap().values;
            let fy = exp_filter(&ts(&ys), alpha).unwrap().values;
            for i in 0..xs.len() {
                prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
            }
        }

        #[test]
        fn filter_is_bounded(xs in prop::collection::vec(-1e3f64..1e3, 1..64), alpha in 0.01f64..=1.0) {
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for y in exp_filter(&ts(&xs), alpha).unwrap().values {
                prop_assert!(y >= lo - 1e-9 && y <= hi + 1e-9);
            }
        }

        #[test]
        fn pure_tone_within_tolerance(f in 5.0f64..245.0, seed in 0u64..1000) {
            let x = synth_tone(f, 1.0, 500.0, 2.0, f64::INFINITY, seed).unwrap();
            let peak = spectral_peak(&x).unwrap();
            let bin_width = x.sample_rate / x.len() as f64;
            prop_assert!((peak.bin as f64 * bin_width - f).abs() <= bin_width);
            prop_assert!((peak.frequency - f).abs() < 0.2, "{} vs {}", peak.frequency, f);
        }
    }

    #[test]
    fn parseval() {
        let x = synth_tone(37.0, 2.0, 500.0, 1.0, 5.0, 11).unwrap().values;
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spectrum(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        assert!(((time - freq) / time).abs() < 1e-9);
    }

    #[test]
    fn table_tone_156() {
        let x = synth_tone(156.0, 9.6, 500.0, 5.0, f64::INFINITY, 0).unwrap();
        assert_abs_diff_eq!(fundamental_frequency(&x).unwrap(), 156.0, epsilon = 0.2);
    }

    #[test]
    fn noisy_tone_213() {
        // 0.1·N(0,1) noise on a unit sine: SNR = 0.5 / 0.01 = 17 dB.
        let x = synth_tone(213.0, 1.0, 500.0, 5.0, 10.0 * (0.5f64 / 0.01).log10(), 5).unwrap();
        assert_abs_diff_eq!(fundamental_frequency(&x).unwrap(), 213.0, epsilon = 0.5);
    }

    #[test]
    fn amplitude_estimate() {
        let x = synth_tone(189.3, 19.8, 500.0, 5.0, f64::INFINITY, 2).unwrap();
        let p = spectral_peak(&x).unwrap();
        assert!((p.amplitude - 19.8).abs() / 19.8 < 0.01, "{}", p.amplitude);
    }

    #[test]
    fn dc_only_has_no_peak() {
        let x = TimeSeries::new(500.0, vec![1.0; 500]).unwrap();
        assert!(matches!(
            fundamental_frequency(&x),
            Err(Error::NoSpectralPeak)
        ));
        let z = TimeSeries::new(500.0, vec![0.0; 500]).unwrap();
        assert!(matches!(
            fundamental_frequency(&z),
            Err(Error::NoSpectralPeak)
        ));
    }

    #[test]
    fn mean_of_trials() {
        let a = synth_tone(189.0, 1.0, 500.0, 5.0, f64::INFINITY, 1).unwrap();
        let b = synth_tone(189.0, 1.0, 500.0, 5.0, f64::INFINITY, 2).unwrap();
        assert_abs_diff_eq!(
            mean_fundamental(&[a.clone(), b]).unwrap(),
            189.0,
            epsilon = 0.2
        );
        assert_eq!(
            mean_fundamental(std::slice::from_ref(&a)).unwrap(),
            fundamental_frequency(&a).unwrap()
        );
        assert!(mean_fundamental(&[]).is_err());
    }

    #[test]
    fn series_csv_round_trip() {
        let x = synth_tone(50.0, 1.0, 500.0, 0.1, 20.0, 3).unwrap();
        let mut meta = BTreeMap::new();
        meta.insert("label".to_string(), "6V".to_string());
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &x, &meta).unwrap();
        let back =
            parse_series_csv(std::str::from_utf8(&buf).unwrap(), Path::new("a.csv")).unwrap();
        assert_eq!(back.series, x);
        assert_eq!(back.metadata["label"], "6V");
    }

    #[test]
    fn series_csv_infers_rate_and_reports_lines() {
        let back = parse_series_csv("t,value\n0,1\n0.5,2\n1.0,3\n", Path::new("a.csv")).unwrap();
        assert_eq!(back.series.sample_rate, 2.0);
        match parse_series_csv(
            "# sample_rate_hz=10\nt,value\n0,1\n0.1,oops\n",
            Path::new("a.csv"),
        ) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_series_csv("", Path::new("e.csv")),
            Err(Error::Parse { .. })
        ));
    }
}
