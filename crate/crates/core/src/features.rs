//! Autoregressive spectral-envelope features.
//!
//! Each phoneme instance is summarized by one high-order all-pole model fitted
//! with Burg's lattice recursion over the whole segment, and the model's log
//! power spectrum sampled on a fixed 64-point grid.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::fmt_sig;

pub const FEATURE_DIM: usize = 64;
pub const GRID_LO_HZ: f64 = 20.0;
pub const GRID_HI_HZ: f64 = 6400.0;
pub const DEFAULT_ORDER: usize = 128;

/// All-pole model `A(z) = 1 + Σ a_k z^-k`, i.e. `x[n] ≈ -Σ a_k x[n-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    pub coefficients: Vec<f64>,
    /// Final prediction-error power.
    pub gain: f64,
    pub sample_rate: f64,
    pub reflection: Vec<f64>,
    /// Prediction-error power after each stage, starting with stage 0.
    pub stage_errors: Vec<f64>,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Builds a model from known coefficients, e.g. for analytic checks.
    pub fn from_coefficients(coefficients: Vec<f64>, gain: f64, sample_rate: f64) -> Self {
        Self {
            coefficients,
            gain,
            sample_rate,
            reflection: Vec::new(),
            stage_errors: vec![gain],
        }
    }
}

/// Minimum segment length for an order-`order` Burg fit.
pub const fn min_samples(order: usize) -> usize {
    2 * (order + 1)
}

/// Fits an order-`order` AR model with Burg's method.
pub fn fit_burg(samples: &[f64], order: usize, sample_rate: f64) -> Result<ArModel> {
    let n = samples.len();
    let needed = min_samples(order);
    if n < needed {
        return Err(Error::TooFewSamples {
            order,
            needed,
            got: n,
        });
    }
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteSample(i));
    }
    let energy: f64 = samples.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }

    let mut fwd = samples.to_vec();
    let mut bwd = samples.to_vec();
    let mut coefs = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = energy / n as f64;
    let mut stage_errors = Vec::with_capacity(order + 1);
    stage_errors.push(err);

    for m in 0..order {
        // forward errors live at fwd[m+1..n], backward (delayed) at bwd[m..n-1]
        let mut num = 0.0;
        let mut den = 0.0;
        for (f, b) in fwd[m + 1..].iter().zip(&bwd[m..n - 1]) {
            num += f * b;
            den += f * f + b * b;
        }
        if den <= 0.0 || err <= 0.0 {
            break;
        }
        let k = (-2.0 * num / den).clamp(-1.0, 1.0);
        for i in (m + 1..n).rev() {
            let f = fwd[i];
            let b = bwd[i - 1];
            fwd[i] = f + k * b;
            bwd[i] = b + k * f;
        }
        prev[..m].copy_from_slice(&coefs[..m]);
        for j in 0..m {
            coefs[j] = prev[j] + k * prev[m - 1 - j];
        }
        coefs[m] = k;
        err *= 1.0 - k * k;
        reflection.push(k);
        stage_errors.push(err);
    }

    Ok(ArModel {
        coefficients: coefs,
        gain: err,
        sample_rate,
        reflection,
        stage_errors,
    })
}

/// `n` uniformly spaced frequencies from `lo` to `hi`, both inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// The 64-point 20–6400 Hz analysis grid.
pub fn feature_grid() -> Vec<f64> {
    uniform_grid(GRID_LO_HZ, GRID_HI_HZ, FEATURE_DIM)
}

/// `ln(gain / |A(e^{-iω})|²)` at each grid frequency.
pub fn log_spectrum(model: &ArModel, grid: &[f64]) -> Result<Vec<f64>> {
    let nyquist = model.sample_rate / 2.0;
    if let Some(&freq) = grid.iter().find(|&&f| f >= nyquist) {
        return Err(Error::AboveNyquist { freq, nyquist });
    }
    let a = &model.coefficients;
    Ok(grid
        .iter()
        .map(|&f| {
            let w = std::f64::consts::TAU * f / model.sample_rate;
            let (zi, zr) = (-w).sin_cos();
            // Horner in z^-1: A = 1 + z^-1 (a1 + z^-1 (a2 + ...))
            let (mut re, mut im) = (0.0, 0.0);
            for &c in a.iter().rev() {
                let (r2, i2) = (re * zr - im * zi, re * zi + im * zr);
                re = r2 + c;
                im = i2;
            }
            let (r2, i2) = (re * zr - im * zi, re * zi + im * zr);
            let mag2 = (1.0 + r2).powi(2) + i2 * i2;
            (model.gain / mag2).ln()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub order: usize,
    pub grid_lo_hz: f64,
    pub grid_hi_hz: f64,
    pub grid_points: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            grid_lo_hz: GRID_LO_HZ,
            grid_hi_hz: GRID_HI_HZ,
            grid_points: FEATURE_DIM,
        }
    }
}

impl FeatureConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.grid_lo_hz, self.grid_hi_hz, self.grid_points)
    }

    pub fn min_samples(&self) -> usize {
        min_samples(self.order)
    }
}

/// Features of one segment: a single Burg fit over all of its samples.
pub fn segment_features(samples: &[f64], sample_rate: f64, config: &FeatureConfig) -> Result<Vec<f64>> {
    let needed = config.min_samples();
    if samples.len() < needed {
        return Err(Error::SegmentTooShort {
            needed,
            got: samples.len(),
        });
    }
    let model = fit_burg(samples, config.order, sample_rate)?;
    let values = log_spectrum(&model, &config.grid())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSpectrum);
    }
    Ok(values)
}

/// Where a feature vector came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub recording_id: String,
    pub speaker_id: String,
    pub phoneme: String,
    pub start: f64,
    pub dur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

fn feature_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["recording_id", "speaker_id", "phoneme", "start_s", "dur_s"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..dim).map(|i| format!("f{i:02}")));
    h
}

/// Writes feature vectors as CSV, floats at 9 significant digits.
pub fn write_features_csv<W: Write>(out: W, vectors: &[FeatureVector]) -> Result<()> {
    let dim = vectors.first().map_or(FEATURE_DIM, |v| v.values.len());
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv write: {e}"));
    w.write_record(feature_header(dim)).map_err(csv_err)?;
    for v in vectors {
        let p = &v.provenance;
        let mut row = vec![
            p.recording_id.clone(),
            p.speaker_id.clone(),
            p.phoneme.clone(),
            fmt_sig(p.start, 9),
            fmt_sig(p.dur, 9),
        ];
        row.extend(v.values.iter().map(|&x| fmt_sig(x, 9)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<features csv>", e))?;
    Ok(())
}

pub fn read_features_csv<R: Read>(input: R, path: &Path) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| malformed(path, 1, e.to_string()))?
        .clone();
    let dim = headers.len().saturating_sub(5);
    let expected = feature_header(dim);
    if dim == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::BadHeader {
            path: path.into(),
            expected: feature_header(FEATURE_DIM).join(","),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| malformed(path, line, e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| malformed(path, line, format!("unparsable number `{}`", &rec[j])))
        };
        let values = (5..5 + dim).map(num).collect::<Result<Vec<_>>>()?;
        out.push(FeatureVector {
            values,
            provenance: Provenance {
                recording_id: rec[0].to_string(),
                speaker_id: rec[1].to_string(),
                phoneme: rec[2].to_string(),
                start: num(3)?,
                dur: num(4)?,
            },
        });
    }
    Ok(out)
}

fn malformed(path: &Path, line: usize, message: String) -> Error {
    Error::MalformedRow {
        path: path.into(),
        line,
        message,
    }
}
