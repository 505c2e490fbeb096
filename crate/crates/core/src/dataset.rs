//! Scenario sampling, per-sample seeding, sample records and split arithmetic.
//!
//! A record stores the complete scenario (targets, SNR, interferer and the
//! waveform seed) next to the f32 waveforms, so every stored sample can be
//! re-simulated bit-exactly from its own metadata.
//!
//! Record layout (little-endian, format version 1):
//!
//! ```text
//! u64 sample_id | u64 rng_seed | f64 snr_db
//! u8  has_interference | f64 relative_slope | f64 sir_db | f64 crossing_time_s
//! u8  n_targets | n_targets x (f64 distance_m, f64 amplitude, f64 phase_rad)
//! u32 n_samples | n_samples x (f32 re, f32 im) clean | n_samples x (f32 re, f32 im) interfered
//! u32 n_label   | n_label x (u32 bin, f32 re, f32 im), sorted by bin
//! ```

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{PutLe, Reader};
use crate::error::{invalid, Error, Result};
use crate::radar::{self, InterferenceSpec, RadarParams, Scenario, Target};

pub const FORMAT_VERSION: u16 = 1;

/// Name of the per-sample seed mixer; changing it changes the format version.
pub const SEED_MIXER: &str = "splitmix64(global ^ splitmix64(sample_id))";

/// Fraction of the training ids held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Joint sampling distribution of scenario parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub snr_values_db: Vec<f64>,
    pub sir_values_db: Vec<f64>,
    pub slope_values: Vec<f64>,
    pub target_count_range: (usize, usize),
    pub amplitude_range: (f64, f64),
    pub distance_range_m: (f64, f64),
    pub phase_range_rad: (f64, f64),
}

impl ParameterGrid {
    /// SNR 5..40 dB step 5, SIR -5..40 dB step 5, slope 0..1.5 step 0.1,
    /// 1..4 targets, amplitude [0.01, 1], distance [2, 95] m, phase [-pi, pi].
    pub fn paper() -> Self {
        Self {
            snr_values_db: (1..=8).map(|i| 5.0 * i as f64).collect(),
            sir_values_db: (0..10).map(|i| -5.0 + 5.0 * i as f64).collect(),
            slope_values: (0..=15).map(|i| i as f64 / 10.0).collect(),
            target_count_range: (1, radar::MAX_TARGETS),
            amplitude_range: (radar::MIN_TARGET_AMPLITUDE, radar::MAX_TARGET_AMPLITUDE),
            distance_range_m: (radar::MIN_TARGET_DISTANCE_M, radar::MAX_TARGET_DISTANCE_M),
            phase_range_rad: (-PI, PI),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_values_db.is_empty()
            || self.sir_values_db.is_empty()
            || self.slope_values.is_empty()
        {
            return Err(invalid("parameter_grid", "grid lists must be non-empty"));
        }
        let (lo, hi) = self.target_count_range;
        if lo == 0 || lo > hi || hi > radar::MAX_TARGETS {
            return Err(invalid("target_count_range", "must lie within [1, 4]"));
        }
        for (name, (a, b)) in [
            ("amplitude_range", self.amplitude_range),
            ("distance_range_m", self.distance_range_m),
            ("phase_range_rad", self.phase_range_rad),
        ] {
            if !(a <= b) {
                return Err(invalid(name, "lower bound above upper bound"));
            }
        }
        Ok(())
    }
}

fn pick<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> f64 {
    values[rng.random_range(0..values.len())]
}

/// Draws one scenario. The interferer is always present; its crossing time
/// is uniform over the sweep. The returned `rng_seed` is the last draw.
pub fn sample_scenario<R: Rng + ?Sized>(
    grid: &ParameterGrid,
    params: &RadarParams,
    rng: &mut R,
) -> Scenario {
    let (lo, hi) = grid.target_count_range;
    let count = rng.random_range(lo..=hi);
    let targets = (0..count)
        .map(|_| Target {
            distance_m: rng.random_range(grid.distance_range_m.0..=grid.distance_range_m.1),
            amplitude: rng.random_range(grid.amplitude_range.0..=grid.amplitude_range.1),
            phase_rad: rng.random_range(grid.phase_range_rad.0..=grid.phase_range_rad.1),
        })
        .collect();
    let snr_db = pick(&grid.snr_values_db, rng);
    let sir_db = pick(&grid.sir_values_db, rng);
    let relative_slope = pick(&grid.slope_values, rng);
    let crossing_time_s = rng.random_range(0.0..=params.sweep_time_s);
    Scenario {
        targets,
        snr_db,
        interference: Some(InterferenceSpec {
            relative_slope,
            sir_db,
            crossing_time_s,
        }),
        rng_seed: rng.random(),
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `sample_id`; independent of generation order.
pub fn sample_seed(global_seed: u64, sample_id: u64) -> u64 {
    splitmix64(global_seed ^ splitmix64(sample_id))
}

/// Stored label entry (one occupied profile bin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredLabel {
    pub bin: u32,
    pub re: f32,
    pub im: f32,
}

impl StoredLabel {
    pub fn magnitude(&self) -> f32 {
        Complex32::new(self.re, self.im).norm()
    }
}

/// One stored sample: metadata, f32 waveforms and the sparse label.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: u64,
    pub scenario: Scenario,
    pub clean: Vec<Complex32>,
    pub interfered: Vec<Complex32>,
    pub label: Vec<StoredLabel>,
}

fn to_f32(v: &[Complex64]) -> Vec<Complex32> {
    v.iter()
        .map(|c| Complex32::new(c.re as f32, c.im as f32))
        .collect()
}

fn to_f64(v: &[Complex32]) -> Vec<Complex64> {
    v.iter()
        .map(|c| Complex64::new(c.re as f64, c.im as f64))
        .collect()
}

impl SampleRecord {
    /// Simulates `scenario` and quantizes the waveforms to f32.
    pub fn simulate(sample_id: u64, scenario: Scenario, params: &RadarParams) -> Result<Self> {
        let sample = radar::compose_sample(&scenario, params)?;
        let label = sample
            .label
            .iter()
            .map(|e| StoredLabel {
                bin: e.bin as u32,
                re: e.value.re as f32,
                im: e.value.im as f32,
            })
            .collect();
        Ok(Self {
            sample_id,
            scenario,
            clean: to_f32(&sample.clean),
            interfered: to_f32(&sample.interfered),
            label,
        })
    }

    /// Samples a scenario from the seed of `sample_id` and simulates it.
    pub fn generate(
        global_seed: u64,
        sample_id: u64,
        grid: &ParameterGrid,
        params: &RadarParams,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(global_seed, sample_id));
        let scenario = sample_scenario(grid, params, &mut rng);
        Self::simulate(sample_id, scenario, params)
    }

    pub fn clean_f64(&self) -> Vec<Complex64> {
        to_f64(&self.clean)
    }

    pub fn interfered_f64(&self) -> Vec<Complex64> {
        to_f64(&self.interfered)
    }

    pub fn label_bins(&self) -> Vec<usize> {
        self.label.iter().map(|l| l.bin as usize).collect()
    }

    /// Bin of the label entry with the largest magnitude (first on ties).
    pub fn strongest_bin(&self) -> Option<usize> {
        let mut best: Option<&StoredLabel> = None;
        for l in &self.label {
            if best.is_none_or(|b| l.magnitude() > b.magnitude()) {
                best = Some(l);
            }
        }
        best.map(|l| l.bin as usize)
    }

    /// Checks stored parameters against the sampling bounds and shapes.
    pub fn validate(&self, params: &RadarParams) -> Result<()> {
        let wrap = |e: Error| Error::Sample {
            sample_id: self.sample_id,
            reason: format!("{e}"),
        };
        self.scenario.validate(params).map_err(wrap)?;
        for (what, len) in [("clean", self.clean.len()), ("interfered", self.interfered.len())] {
            if len != params.num_samples {
                return Err(wrap(Error::LengthMismatch {
                    what: if what == "clean" { "clean waveform" } else { "interfered waveform" },
                    expected: params.num_samples,
                    actual: len,
                }));
            }
        }
        if self.label.is_empty() {
            return Err(wrap(Error::EmptyLabel));
        }
        if self.label.windows(2).any(|w| w[0].bin >= w[1].bin) {
            return Err(wrap(invalid("label", "entries not strictly sorted by bin")));
        }
        if let Some(l) = self.label.iter().find(|l| l.bin as usize >= params.fft_len()) {
            return Err(wrap(Error::LabelOutOfRange {
                bin: l.bin as usize,
                len: params.fft_len(),
            }));
        }
        Ok(())
    }

    /// True when re-simulating the stored scenario reproduces the stored bytes.
    pub fn matches_resimulation(&self, params: &RadarParams) -> Result<bool> {
        let again = Self::simulate(self.sample_id, self.scenario.clone(), params)?;
        Ok(again.encode() == self.encode())
    }

    pub fn encoded_len(&self) -> usize {
        8 + 8 + 8 + 1 + 24 + 1 + 24 * self.scenario.targets.len()
            + 4
            + 16 * self.clean.len()
            + 4
            + 12 * self.label.len()
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.reserve(self.encoded_len());
        out.put_u64(self.sample_id);
        out.put_u64(self.scenario.rng_seed);
        out.put_f64(self.scenario.snr_db);
        match &self.scenario.interference {
            Some(i) => {
                out.put_u8(1);
                out.put_f64(i.relative_slope);
                out.put_f64(i.sir_db);
                out.put_f64(i.crossing_time_s);
            }
            None => {
                out.put_u8(0);
                out.put_f64(0.0);
                out.put_f64(0.0);
                out.put_f64(0.0);
            }
        }
        out.put_u8(self.scenario.targets.len() as u8);
        for t in &self.scenario.targets {
            out.put_f64(t.distance_m);
            out.put_f64(t.amplitude);
            out.put_f64(t.phase_rad);
        }
        out.put_u32(self.clean.len() as u32);
        for c in self.clean.iter().chain(&self.interfered) {
            out.put_f32(c.re);
            out.put_f32(c.im);
        }
        out.put_u32(self.label.len() as u32);
        for l in &self.label {
            out.put_u32(l.bin);
            out.put_f32(l.re);
            out.put_f32(l.im);
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    /// Decodes exactly one record occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "sample record");
        let sample_id = r.u64()?;
        let rng_seed = r.u64()?;
        let snr_db = r.f64()?;
        let has_interference = r.u8()?;
        let spec = InterferenceSpec {
            relative_slope: r.f64()?,
            sir_db: r.f64()?,
            crossing_time_s: r.f64()?,
        };
        let interference = match has_interference {
            0 => None,
            1 => Some(spec),
            other => return Err(r.corrupt(format!("interference flag {other}"))),
        };
        let n_targets = r.u8()? as usize;
        if n_targets > radar::MAX_TARGETS {
            return Err(r.corrupt(format!("{n_targets} targets")));
        }
        let mut targets = Vec::with_capacity(n_targets);
        for _ in 0..n_targets {
            targets.push(Target {
                distance_m: r.f64()?,
                amplitude: r.f64()?,
                phase_rad: r.f64()?,
            });
        }
        let n = r.u32()? as usize;
        if r.remaining() < 16 * n {
            return Err(r.corrupt(format!("waveform length {n} exceeds record")));
        }
        let read_wave = |r: &mut Reader| -> Result<Vec<Complex32>> {
            (0..n).map(|_| Ok(Complex32::new(r.f32()?, r.f32()?))).collect()
        };
        let clean = read_wave(&mut r)?;
        let interfered = read_wave(&mut r)?;
        let n_label = r.u32()? as usize;
        if r.remaining() != 12 * n_label {
            return Err(r.corrupt(format!(
                "label of {n_label} entries does not fill the remaining {} bytes",
                r.remaining()
            )));
        }
        let label = (0..n_label)
            .map(|_| {
                Ok(StoredLabel {
                    bin: r.u32()?,
                    re: r.f32()?,
                    im: r.f32()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sample_id,
            scenario: Scenario {
                targets,
                snr_db,
                interference,
                rng_seed,
            },
            clean,
            interfered,
            label,
        })
    }
}

/// Train/test partition of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: u64,
    pub test: u64,
}

/// `train = floor(5 total / 6)`, remainder to test (48,000 -> 40,000 / 8,000).
pub fn split_counts(total: u64) -> SplitCounts {
    let train = total * 5 / 6;
    SplitCounts {
        train,
        test: total - train,
    }
}

/// `round(train x fraction)`, half up.
pub fn validation_count(train: u64, fraction: f64) -> u64 {
    num_traits::Float::floor(train as f64 * fraction + 0.5) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    /// Training ids minus the validation hold-out.
    Train,
    /// Last `round(0.2 x train)` ids of the training range.
    Validation,
    Test,
    /// Every training id including the validation hold-out.
    TrainFull,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Validation => "validation",
            SplitKind::Test => "test",
            SplitKind::TrainFull => "train_full",
        }
    }
}

impl core::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitKind::Train),
            "validation" | "val" => Ok(SplitKind::Validation),
            "test" => Ok(SplitKind::Test),
            "train_full" => Ok(SplitKind::TrainFull),
            other => Err(invalid(
                "split",
                format!("unknown split `{other}` (expected train|validation|test)"),
            )),
        }
    }
}

/// Sample ids belonging to a split. Ids `0..train` are training samples,
/// `train..train+test` are test samples.
pub fn split_ids(counts: SplitCounts, validation_fraction: f64, which: SplitKind) -> Range<u64> {
    let val = validation_count(counts.train, validation_fraction);
    match which {
        SplitKind::Train => 0..counts.train - val,
        SplitKind::Validation => counts.train - val..counts.train,
        SplitKind::Test => counts.train..counts.train + counts.test,
        SplitKind::TrainFull => 0..counts.train,
    }
}
