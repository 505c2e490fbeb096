//! STFT spectrograms and zero-padded FFT range profiles.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::Fft;
use crate::Profile;

/// Floor added to magnitudes before taking logarithms.
pub const DB_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
}

/// Framing of one fixed-length signal into STFT frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub signal_len: usize,
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window: WindowKind,
    /// Zeros appended to the signal before framing.
    pub tail_pad: usize,
}

const PAPER_WINDOW: usize = 106;
const DESK_WINDOW: usize = 26;

impl StftConfig {
    /// 1024 samples, hop 6, no padding: 154 x 2048.
    pub fn paper_hop6() -> Self {
        Self {
            signal_len: 1024,
            window_len: PAPER_WINDOW,
            hop: 6,
            fft_len: 2048,
            window: WindowKind::Hamming,
            tail_pad: 0,
        }
    }

    /// 1024 samples, hop 1, 105 trailing zeros: 1024 x 2048.
    pub fn paper_hop1() -> Self {
        Self {
            hop: 1,
            tail_pad: PAPER_WINDOW - 1,
            ..Self::paper_hop6()
        }
    }

    /// 256 samples, hop 6: 39 x 512.
    pub fn desk_hop6() -> Self {
        Self {
            signal_len: 256,
            window_len: DESK_WINDOW,
            hop: 6,
            fft_len: 512,
            window: WindowKind::Hamming,
            tail_pad: 0,
        }
    }

    /// 256 samples, hop 1, 25 trailing zeros: 256 x 512.
    pub fn desk_hop1() -> Self {
        Self {
            hop: 1,
            tail_pad: DESK_WINDOW - 1,
            ..Self::desk_hop6()
        }
    }

    /// The canonical configuration for a profile and hop (6 or 1).
    pub fn canonical(profile: Profile, hop: usize) -> Result<Self> {
        match (profile, hop) {
            (Profile::Paper, 6) => Ok(Self::paper_hop6()),
            (Profile::Paper, 1) => Ok(Self::paper_hop1()),
            (Profile::Desk, 6) => Ok(Self::desk_hop6()),
            (Profile::Desk, 1) => Ok(Self::desk_hop1()),
            _ => Err(invalid("hop", "canonical configurations use hop 6 or hop 1")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_len {
            return Err(invalid("hop", "must satisfy 1 <= hop <= window_len"));
        }
        if self.window_len > self.fft_len {
            return Err(invalid("window_len", "must not exceed fft_len"));
        }
        if !self.fft_len.is_power_of_two() {
            return Err(invalid("fft_len", "must be a power of two"));
        }
        if self.signal_len + self.tail_pad < self.window_len {
            return Err(invalid("window_len", "longer than the padded signal"));
        }
        Ok(())
    }

    /// `floor((N + pad - W) / R) + 1`.
    pub fn frames(&self) -> usize {
        (self.signal_len + self.tail_pad - self.window_len) / self.hop + 1
    }

    pub fn window_coefficients(&self) -> Vec<f64> {
        match self.window {
            WindowKind::Hamming => hamming(self.window_len),
        }
    }
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2 pi n / (W - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

/// `20 log10(|v| + eps)`.
pub fn to_db(magnitude: f64) -> f64 {
    20.0 * (magnitude.abs() + DB_EPSILON).log10()
}

pub fn magnitude_db(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|v| to_db(v.norm())).collect()
}

pub fn real_db(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| to_db(v)).collect()
}

/// Complex STFT plus its dB image, both row-major `frames x bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub stft: Vec<Complex64>,
    pub db_image: Vec<f64>,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn row(&self, frame: usize) -> &[Complex64] {
        &self.stft[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.bins)
    }
}

/// Reusable STFT plan (window and FFT twiddles computed once).
#[derive(Debug, Clone)]
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    fft: Fft,
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            window: config.window_coefficients(),
            fft: Fft::new(config.fft_len)?,
            config,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    /// Calls `sink(frame, spectrum)` for every frame in order.
    ///
    /// Frame `m` holds `sum_n x[n] w[n - mR] exp(-j 2 pi k n / N_fft)` with `n`
    /// the absolute (padded) sample index.
    pub fn for_each_frame(
        &self,
        signal: &[Complex64],
        mut sink: impl FnMut(usize, &[Complex64]),
    ) -> Result<()> {
        let cfg = &self.config;
        if signal.len() != cfg.signal_len {
            return Err(Error::LengthMismatch {
                what: "stft input",
                expected: cfg.signal_len,
                actual: signal.len(),
            });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
        for m in 0..cfg.frames() {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            let start = m * cfg.hop;
            for (i, &w) in self.window.iter().enumerate() {
                let n = start + i;
                if n < signal.len() {
                    buf[n % cfg.fft_len] = signal[n] * w;
                }
            }
            self.fft.process(&mut buf);
            sink(m, &buf);
        }
        Ok(())
    }

    pub fn compute(&self, signal: &[Complex64]) -> Result<Spectrogram> {
        let frames = self.config.frames();
        let bins = self.config.fft_len;
        let mut stft = Vec::with_capacity(frames * bins);
        self.for_each_frame(signal, |_, spec| stft.extend_from_slice(spec))?;
        let db_image = magnitude_db(&stft);
        Ok(Spectrogram {
            frames,
            bins,
            stft,
            db_image,
            config: self.config,
        })
    }

    /// dB image only, as `f32`, without keeping the complex matrix.
    pub fn db_image_f32(&self, signal: &[Complex64]) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(self.config.frames() * self.config.fft_len);
        self.for_each_frame(signal, |_, spec| {
            out.extend(spec.iter().map(|v| to_db(v.norm()) as f32))
        })?;
        Ok(out)
    }
}

pub fn stft(signal: &[Complex64], config: StftConfig) -> Result<Spectrogram> {
    Stft::new(config)?.compute(signal)
}

/// Complex FFT bins and their dB magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub bins: Vec<Complex64>,
    pub magnitude_db: Vec<f64>,
}

impl RangeProfile {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Reusable range-profile plan for a fixed signal length.
#[derive(Debug, Clone)]
pub struct RangeFft {
    signal_len: usize,
    fft: Fft,
}

impl RangeFft {
    /// Profile length is `2 * signal_len`, which must be a power of two.
    pub fn new(signal_len: usize) -> Result<Self> {
        Ok(Self {
            signal_len,
            fft: Fft::new(2 * signal_len)?,
        })
    }

    pub fn fft_len(&self) -> usize {
        self.fft.len()
    }

    /// Unwindowed FFT of the signal with `signal_len` trailing zeros.
    pub fn compute(&self, signal: &[Complex64]) -> Result<RangeProfile> {
        if signal.len() != self.signal_len {
            return Err(Error::LengthMismatch {
                what: "range profile input",
                expected: self.signal_len,
                actual: signal.len(),
            });
        }
        let mut bins = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        bins[..signal.len()].copy_from_slice(signal);
        self.fft.process(&mut bins);
        let magnitude_db = magnitude_db(&bins);
        Ok(RangeProfile { bins, magnitude_db })
    }
}

pub fn range_profile(signal: &[Complex64]) -> Result<RangeProfile> {
    RangeFft::new(signal.len())?.compute(signal)
}
