//! Mono PCM audio: WAV input, rate conversion and time-span slicing.

use std::path::Path;

use crate::error::{Error, Result};

/// Default pipeline sample rate in Hz.
pub const DEFAULT_RATE: u32 = 16_000;

/// Taps per polyphase branch of the resampling filter.
pub const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 8.0;
/// Passband edge as a fraction of the lower of the two Nyquist frequencies.
const CUTOFF_FRACTION: f64 = 0.95;
/// Phase tables above this many branches are evaluated on the fly.
const MAX_TABLE_PHASES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidRate(0.0));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sample index range `[round(start·rate), round((start+dur)·rate))`
    /// for a span, validated against the buffer.
    pub fn span_indices(&self, start: f64, dur: f64) -> Result<std::ops::Range<usize>> {
        if dur.is_nan() || dur <= 0.0 {
            return Err(Error::NonPositiveDuration(dur));
        }
        if start.is_nan() || start < 0.0 {
            return Err(Error::NegativeStart(start));
        }
        let rate = self.sample_rate as f64;
        let end_time = start + dur;
        // one sample of slack at the end
        if end_time > self.duration() + 1.0 / rate {
            return Err(Error::SpanExceedsBuffer {
                start,
                end: end_time,
                duration: self.duration(),
            });
        }
        let lo = ((start * rate).round() as usize).min(self.len());
        let hi = ((end_time * rate).round() as usize).min(self.len());
        Ok(lo..hi.max(lo))
    }

    pub fn span(&self, start: f64, dur: f64) -> Result<&[f64]> {
        let r = self.span_indices(start, dur)?;
        Ok(&self.samples[r])
    }
}

/// Copies the samples of `[start, start + dur)` into a new buffer.
pub fn slice_segment(buf: &AudioBuffer, start: f64, dur: f64) -> Result<AudioBuffer> {
    Ok(AudioBuffer {
        samples: buf.span(start, dur)?.to_vec(),
        sample_rate: buf.sample_rate,
    })
}

/// Reads a mono PCM WAV file, normalizes to [-1, 1] and resamples to
/// `target_rate`.
pub fn load_audio(path: &Path, target_rate: u32) -> Result<AudioBuffer> {
    let buf = read_wav(path)?;
    Ok(resample(&buf, target_rate))
}

/// Reads a mono WAV file at its native rate.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio {
            path: path.into(),
            what: format!("multi-channel ({} channels)", spec.channels),
        });
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| wav_error(path, e))?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedAudio {
                path: path.into(),
                what: format!("{bits}-bit {fmt:?} encoding"),
            })
        }
    };
    if samples.is_empty() {
        return Err(Error::EmptyAudio(path.into()));
    }
    AudioBuffer::new(samples, spec.sample_rate)
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedAudio {
            path: path.into(),
            what: "non-PCM format".into(),
        },
        other => Error::MalformedAudio {
            path: path.into(),
            message: other.to_string(),
        },
    }
}

/// Writes a buffer as 16-bit mono PCM.
pub fn write_wav_i16(path: &Path, buf: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in &buf.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(|e| wav_error(path, e))?;
    }
    w.finalize().map_err(|e| wav_error(path, e))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Windowed-sinc polyphase rate converter between two integer rates.
pub struct Resampler {
    up: usize,
    down: usize,
    cutoff: f64,
    table: Option<Vec<[f64; TAPS_PER_PHASE]>>,
}

impl Resampler {
    pub fn new(from: u32, to: u32) -> Self {
        let g = gcd(from as u64, to as u64).max(1);
        let up = (to as u64 / g) as usize;
        let down = (from as u64 / g) as usize;
        // cycles per input sample
        let cutoff = 0.5 * CUTOFF_FRACTION * (up as f64 / down as f64).min(1.0);
        let mut r = Self {
            up,
            down,
            cutoff,
            table: None,
        };
        if up <= MAX_TABLE_PHASES {
            r.table = Some((0..up).map(|p| r.branch(p)).collect());
        }
        r
    }

    /// Taps for input offsets `-(T/2-1)..=T/2` around the base sample at
    /// fractional phase `p / up`, normalized to unit DC gain.
    fn branch(&self, phase: usize) -> [f64; TAPS_PER_PHASE] {
        let half = (TAPS_PER_PHASE / 2) as f64;
        let frac = phase as f64 / self.up as f64;
        let i0_beta = bessel_i0(KAISER_BETA);
        let mut taps = [0.0; TAPS_PER_PHASE];
        for (i, tap) in taps.iter_mut().enumerate() {
            let k = i as f64 - (half - 1.0);
            let tau = k - frac;
            let arg = 2.0 * self.cutoff * tau;
            let sinc = if arg.abs() < 1e-12 {
                1.0
            } else {
                (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
            };
            let w = (tau / half).clamp(-1.0, 1.0);
            let window = bessel_i0(KAISER_BETA * (1.0 - w * w).sqrt()) / i0_beta;
            *tap = 2.0 * self.cutoff * sinc * window;
        }
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        taps
    }

    pub fn output_len(&self, n: usize) -> usize {
        ((n as f64) * self.up as f64 / self.down as f64).round() as usize
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let n_out = self.output_len(input.len());
        let offset = TAPS_PER_PHASE / 2 - 1;
        let mut out = Vec::with_capacity(n_out);
        let mut scratch;
        for j in 0..n_out {
            let pos = j * self.down;
            let base = pos / self.up;
            let phase = pos % self.up;
            let taps = match &self.table {
                Some(t) => &t[phase],
                None => {
                    scratch = self.branch(phase);
                    &scratch
                }
            };
            let mut acc = 0.0;
            for (i, &h) in taps.iter().enumerate() {
                let idx = base as isize + i as isize - offset as isize;
                if idx >= 0 && (idx as usize) < input.len() {
                    acc += h * input[idx as usize];
                }
            }
            out.push(acc);
        }
        out
    }
}

/// Converts `buf` to `target_rate`; identical rates pass through unchanged.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    if buf.sample_rate == target_rate {
        return buf.clone();
    }
    let r = Resampler::new(buf.sample_rate, target_rate);
    AudioBuffer {
        samples: r.process(&buf.samples),
        sample_rate: target_rate,
    }
}
