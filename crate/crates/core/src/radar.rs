//! FMCW chirp, beat-signal, interference and noise synthesis.
//!
//! All waveforms are complex baseband sequences sampled at `f_s` over one
//! sweep. Target echoes and the interferer are mixed with the transmitted
//! chirp analytically, so no carrier-rate sampling is ever needed.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::Profile;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const MIN_TARGET_DISTANCE_M: f64 = 2.0;
pub const MAX_TARGET_DISTANCE_M: f64 = 95.0;
pub const MIN_TARGET_AMPLITUDE: f64 = 0.01;
pub const MAX_TARGET_AMPLITUDE: f64 = 1.0;
pub const MAX_TARGETS: usize = 4;
pub const MAX_RELATIVE_SLOPE: f64 = 1.5;

/// Fixed sensor parameters for one chirp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    pub bandwidth_hz: f64,
    pub sweep_time_s: f64,
    pub sampling_freq_hz: f64,
    pub center_freq_hz: f64,
    pub num_samples: usize,
    pub chirp_rate_hz_per_s: f64,
}

impl RadarParams {
    pub fn new(
        bandwidth_hz: f64,
        sweep_time_s: f64,
        sampling_freq_hz: f64,
        center_freq_hz: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("bandwidth_hz", bandwidth_hz),
            ("sweep_time_s", sweep_time_s),
            ("sampling_freq_hz", sampling_freq_hz),
            ("center_freq_hz", center_freq_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be finite and strictly positive"));
            }
        }
        let num_samples = (sweep_time_s * sampling_freq_hz).round() as usize;
        if num_samples == 0 {
            return Err(invalid("num_samples", "sweep holds no samples"));
        }
        Ok(Self {
            bandwidth_hz,
            sweep_time_s,
            sampling_freq_hz,
            center_freq_hz,
            num_samples,
            chirp_rate_hz_per_s: bandwidth_hz / sweep_time_s,
        })
    }

    /// 1.6 GHz over 25.6 us sampled at 40 MHz around 78 GHz (1024 samples).
    pub fn paper() -> Self {
        Self::new(1.6e9, 25.6e-6, 40e6, 78e9).expect("paper parameters are valid")
    }

    /// Same chirp rate and sampling rate as [`paper`](Self::paper), quarter sweep (256 samples).
    pub fn desk() -> Self {
        Self::new(0.4e9, 6.4e-6, 40e6, 78e9).expect("desk parameters are valid")
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => Self::paper(),
            Profile::Desk => Self::desk(),
        }
    }

    /// Re-checks the construction invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        let fresh = Self::new(
            self.bandwidth_hz,
            self.sweep_time_s,
            self.sampling_freq_hz,
            self.center_freq_hz,
        )?;
        if fresh != *self {
            return Err(invalid(
                "radar_params",
                "num_samples or chirp_rate inconsistent with bandwidth/sweep/sampling",
            ));
        }
        Ok(())
    }

    /// Range-profile length: the sweep zero-padded to twice its length.
    pub fn fft_len(&self) -> usize {
        2 * self.num_samples
    }

    pub fn beat_frequency(&self, distance_m: f64) -> f64 {
        2.0 * self.chirp_rate_hz_per_s * distance_m / SPEED_OF_LIGHT
    }

    /// Fractional profile bin of a beat frequency.
    pub fn bin_of_frequency(&self, beat_hz: f64) -> f64 {
        beat_hz * self.fft_len() as f64 / self.sampling_freq_hz
    }

    /// Nearest profile bin of a target distance (half away from zero).
    pub fn range_bin(&self, distance_m: f64) -> usize {
        let bin = self.bin_of_frequency(self.beat_frequency(distance_m)).round() as usize;
        bin % self.fft_len()
    }

    /// Distance that maps exactly onto a (possibly fractional) profile bin.
    pub fn bin_to_range(&self, bin: f64) -> f64 {
        let beat = bin * self.sampling_freq_hz / self.fft_len() as f64;
        beat * SPEED_OF_LIGHT / (2.0 * self.chirp_rate_hz_per_s)
    }

    fn time(&self, n: usize) -> f64 {
        n as f64 / self.sampling_freq_hz
    }
}

/// A point reflector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub distance_m: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
}

impl Target {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_TARGET_DISTANCE_M..=MAX_TARGET_DISTANCE_M).contains(&self.distance_m) {
            return Err(invalid("distance_m", "outside [2, 95] m"));
        }
        if !(MIN_TARGET_AMPLITUDE..=MAX_TARGET_AMPLITUDE).contains(&self.amplitude) {
            return Err(invalid("amplitude", "outside [0.01, 1]"));
        }
        if !(-PI..=PI).contains(&self.phase_rad) {
            return Err(invalid("phase_rad", "outside [-pi, pi]"));
        }
        Ok(())
    }

    pub fn delay_s(&self) -> f64 {
        2.0 * self.distance_m / SPEED_OF_LIGHT
    }

    pub fn complex_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase_rad)
    }
}

/// One uncorrelated interferer, described after mixing with the victim chirp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSpec {
    /// Interferer chirp rate divided by the victim chirp rate.
    pub relative_slope: f64,
    pub sir_db: f64,
    /// Instant at which the mixed interference sweeps through `f_s / 2`.
    pub crossing_time_s: f64,
}

impl InterferenceSpec {
    pub fn validate(&self, params: &RadarParams) -> Result<()> {
        if !(0.0..=MAX_RELATIVE_SLOPE).contains(&self.relative_slope) {
            return Err(invalid("relative_slope", "outside [0, 1.5]"));
        }
        if !(-5.0..=40.0).contains(&self.sir_db) {
            return Err(invalid("sir_db", "outside [-5, 40] dB"));
        }
        if !(0.0..=params.sweep_time_s).contains(&self.crossing_time_s) {
            return Err(invalid("crossing_time_s", "outside the sweep"));
        }
        Ok(())
    }
}

/// Complete parametrization of one simulated measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub targets: Vec<Target>,
    pub snr_db: f64,
    pub interference: Option<InterferenceSpec>,
    /// Seeds the interferer phase and the noise realization.
    pub rng_seed: u64,
}

fn on_grid(value: f64, lo: f64, hi: f64, step: f64) -> bool {
    if !(lo..=hi).contains(&value) {
        return false;
    }
    let k = ((value - lo) / step).round();
    (lo + k * step - value).abs() < 1e-9
}

impl Scenario {
    /// Checks the scenario against the sampling grid and the sensor band.
    pub fn validate(&self, params: &RadarParams) -> Result<()> {
        if self.targets.is_empty() || self.targets.len() > MAX_TARGETS {
            return Err(invalid("targets", "between 1 and 4 targets required"));
        }
        for t in &self.targets {
            t.validate()?;
            check_in_band(t, params)?;
        }
        if !on_grid(self.snr_db, 5.0, 40.0, 5.0) {
            return Err(invalid("snr_db", "not on the {5, 10, ..., 40} grid"));
        }
        if let Some(spec) = &self.interference {
            spec.validate(params)?;
            if !on_grid(spec.sir_db, -5.0, 40.0, 5.0) {
                return Err(invalid("sir_db", "not on the {-5, 0, ..., 40} grid"));
            }
            if !on_grid(spec.relative_slope, 0.0, MAX_RELATIVE_SLOPE, 0.1) {
                return Err(invalid("relative_slope", "not on the {0.0, 0.1, ..., 1.5} grid"));
            }
        }
        Ok(())
    }

    /// Amplitude of the strongest target; the SNR and SIR reference.
    pub fn reference_amplitude(&self) -> f64 {
        self.targets.iter().map(|t| t.amplitude).fold(0.0, f64::max)
    }
}

fn check_in_band(target: &Target, params: &RadarParams) -> Result<()> {
    let beat = params.beat_frequency(target.distance_m);
    if !(0.0..params.sampling_freq_hz).contains(&beat) {
        return Err(Error::BeatOutOfBand {
            distance_m: target.distance_m,
            beat_hz: beat,
            fs_hz: params.sampling_freq_hz,
        });
    }
    Ok(())
}

/// `exp(j 2 pi cycles)` with the integer part of `cycles` removed first.
fn unit_phasor(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.floor();
    let theta = 2.0 * PI * frac;
    Complex64::new(theta.cos(), theta.sin())
}

/// Transmitted analytic chirp `exp(j 2 pi (f0 t + alpha t^2 / 2))` on the sample grid.
pub fn transmit_chirp(params: &RadarParams) -> Vec<Complex64> {
    let alpha = params.chirp_rate_hz_per_s;
    (0..params.num_samples)
        .map(|n| {
            let t = params.time(n);
            unit_phasor(params.center_freq_hz * t + 0.5 * alpha * t * t)
        })
        .collect()
}

/// Sum over targets of `s_TX(t) * conj(A e^{j phi} s_TX(t - tau))`.
///
/// The product is evaluated in closed form; samples before the echo arrives
/// (`t < tau`) are zero because the delayed chirp has no support there.
pub fn beat_signal(targets: &[Target], params: &RadarParams) -> Result<Vec<Complex64>> {
    if targets.is_empty() {
        return Err(invalid("targets", "at least one target required"));
    }
    let alpha = params.chirp_rate_hz_per_s;
    let mut out = vec![Complex64::new(0.0, 0.0); params.num_samples];
    for target in targets {
        check_in_band(target, params)?;
        let tau = target.delay_s();
        // phase(t) = f0 tau - alpha tau^2 / 2 + alpha tau t  (in cycles)
        let constant = params.center_freq_hz * tau - 0.5 * alpha * tau * tau;
        let slope = alpha * tau;
        let gain = target.complex_amplitude().conj();
        for (n, slot) in out.iter_mut().enumerate() {
            let t = params.time(n);
            if t < tau {
                continue;
            }
            *slot += gain * unit_phasor(constant + slope * t);
        }
    }
    Ok(out)
}

/// Dechirped interference: a linear chirp in the beat domain crossing `f_s/2`
/// at `crossing_time_s` with slope `(r - 1) alpha`, gated to `[0, f_s)`.
///
/// The random initial phase is the only draw taken from `rng`.
pub fn interference_signal<R: Rng + ?Sized>(
    spec: &InterferenceSpec,
    params: &RadarParams,
    reference_amplitude: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    spec.validate(params)?;
    if !(reference_amplitude.is_finite() && reference_amplitude > 0.0) {
        return Err(invalid("reference_amplitude", "must be positive"));
    }
    let amplitude = reference_amplitude * 10f64.powf(-spec.sir_db / 20.0);
    let initial_phase: f64 = rng.random_range(-PI..PI);
    let start = Complex64::from_polar(amplitude, initial_phase);
    let center = 0.5 * params.sampling_freq_hz;
    let slope = (spec.relative_slope - 1.0) * params.chirp_rate_hz_per_s;
    Ok((0..params.num_samples)
        .map(|n| {
            if in_band(spec, params, n) {
                let u = params.time(n) - spec.crossing_time_s;
                start * unit_phasor(center * u + 0.5 * slope * u * u)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect())
}

fn in_band(spec: &InterferenceSpec, params: &RadarParams, n: usize) -> bool {
    let fs = params.sampling_freq_hz;
    let u = params.time(n) - spec.crossing_time_s;
    let freq = 0.5 * fs + (spec.relative_slope - 1.0) * params.chirp_rate_hz_per_s * u;
    (0.0..fs).contains(&freq)
}

/// Number of samples that pass the anti-aliasing gate.
pub fn gate_length(spec: &InterferenceSpec, params: &RadarParams) -> usize {
    (0..params.num_samples).filter(|&n| in_band(spec, params, n)).count()
}

/// Time-domain reference amplitudes `(noise, interference)` that make the
/// scenario's SNR and SIR hold in the range profile.
///
/// Both ratios compare the strongest target's peak power `(N A)^2` with the
/// mean per-bin power of the disturbance over the zero-padded profile: noise
/// gives `N sigma^2`, a gated interference burst of `L` samples gives
/// `L A_int^2`. Hence `sigma^2 = N A^2 10^(-SNR/10)` and
/// `A_int = N A / sqrt(L) 10^(-SIR/20)`.
pub fn profile_references(scenario: &Scenario, params: &RadarParams) -> (f64, Option<f64>) {
    let a = scenario.reference_amplitude();
    let n = params.num_samples as f64;
    let interference = scenario.interference.as_ref().map(|spec| {
        let l = gate_length(spec, params).max(1) as f64;
        a * n / l.sqrt()
    });
    (a * n.sqrt(), interference)
}

/// Per-sample complex noise variance for a given SNR and reference amplitude.
pub fn noise_variance(snr_db: f64, reference_amplitude: f64) -> f64 {
    reference_amplitude * reference_amplitude * 10f64.powf(-snr_db / 10.0)
}

/// Adds circular complex white Gaussian noise. `snr_db = +inf` disables it.
pub fn add_noise<R: Rng + ?Sized>(
    signal: &[Complex64],
    snr_db: f64,
    reference_amplitude: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(reference_amplitude > 0.0) {
        return Err(invalid("reference_amplitude", "must be positive"));
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.to_vec());
    }
    let sigma = (0.5 * noise_variance(snr_db, reference_amplitude)).sqrt();
    Ok(signal
        .iter()
        .map(|&x| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            x + Complex64::new(sigma * re, sigma * im)
        })
        .collect())
}

/// Ground-truth complex amplitude at one profile bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelEntry {
    pub bin: usize,
    pub value: Complex64,
}

/// Clean/interfered signal pair plus the sparse target label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub clean: Vec<Complex64>,
    pub interfered: Vec<Complex64>,
    pub label: Vec<LabelEntry>,
}

/// Sparse label: one entry per occupied bin, sorted by bin; targets that
/// round onto the same bin are summed.
pub fn label_for(targets: &[Target], params: &RadarParams) -> Vec<LabelEntry> {
    let mut label: Vec<LabelEntry> = Vec::with_capacity(targets.len());
    for t in targets {
        let bin = params.range_bin(t.distance_m);
        match label.iter_mut().find(|e| e.bin == bin) {
            Some(e) => e.value += t.complex_amplitude(),
            None => label.push(LabelEntry {
                bin,
                value: t.complex_amplitude(),
            }),
        }
    }
    label.sort_by_key(|e| e.bin);
    label
}

/// Simulates one measurement with SNR and SIR calibrated by
/// [`profile_references`]. Clean and interfered copies share the noise
/// realization, so they differ exactly where the gated interference is non-zero.
pub fn compose_sample(scenario: &Scenario, params: &RadarParams) -> Result<Sample> {
    scenario.validate(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let (noise_ref, interference_ref) = profile_references(scenario, params);
    let beat = beat_signal(&scenario.targets, params)?;
    let interference = match (&scenario.interference, interference_ref) {
        (Some(spec), Some(r)) => Some(interference_signal(spec, params, r, &mut rng)?),
        _ => None,
    };
    let clean = add_noise(&beat, scenario.snr_db, noise_ref, &mut rng)?;
    let interfered = match interference {
        Some(int) => clean.iter().zip(&int).map(|(&c, &i)| c + i).collect(),
        None => clean.clone(),
    };
    Ok(Sample {
        clean,
        interfered,
        label: label_for(&scenario.targets, params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::Fft;
    use proptest::prelude::*;

    fn argmax_profile(signal: &[Complex64], fft_len: usize) -> usize {
        let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
        buf[..signal.len()].copy_from_slice(signal);
        Fft::new(fft_len).unwrap().process(&mut buf);
        (0..fft_len)
            .max_by(|&a, &b| buf[a].norm().partial_cmp(&buf[b].norm()).unwrap())
            .unwrap()
    }

    fn target(d: f64) -> Target {
        Target {
            distance_m: d,
            amplitude: 1.0,
            phase_rad: 0.0,
        }
    }

    #[test]
    fn paper_params() {
        let p = RadarParams::paper();
        assert_eq!(p.num_samples, 1024);
        assert_eq!(p.fft_len(), 2048);
        assert!((p.chirp_rate_hz_per_s - 6.25e13).abs() < 1.0);
        let d = RadarParams::desk();
        assert_eq!(d.num_samples, 256);
        assert_eq!(d.chirp_rate_hz_per_s, p.chirp_rate_hz_per_s);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(RadarParams::new(0.0, 1e-6, 1e6, 1e9).is_err());
        assert!(RadarParams::new(1e9, f64::NAN, 1e6, 1e9).is_err());
        let mut p = RadarParams::paper();
        p.num_samples = 1000;
        assert!(p.validate().is_err());
    }

    #[test]
    fn chirp_starts_at_unity_and_is_unit_modulus() {
        let s = transmit_chirp(&RadarParams::paper());
        assert_eq!(s[0], Complex64::new(1.0, 0.0));
        assert!(s.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn chirp_instantaneous_slope_is_alpha() {
        // second difference of unwrapped phase / (2 pi dt^2) = alpha
        let p = RadarParams::paper();
        let s = transmit_chirp(&p);
        let dt = 1.0 / p.sampling_freq_hz;
        let second_diff = s[501] * s[500].conj() * s[500].conj() * s[499];
        let slope = second_diff.arg() / (2.0 * PI * dt * dt);
        assert!((slope - 6.25e13).abs() / 6.25e13 < 1e-6, "{slope}");
    }

    #[test]
    fn beat_peak_matches_closed_form_bin() {
        let p = RadarParams::paper();
        // closed form: 48 m -> 20.0138 MHz -> 1024.71 -> 1025; 2 m -> 42.70 -> 43
        assert_eq!(p.range_bin(48.0), 1025);
        assert_eq!(p.range_bin(2.0), 43);
        assert_eq!(p.range_bin(p.bin_to_range(1024.0)), 1024);
        for (d, bin) in [(48.0, 1025), (2.0, 43), (p.bin_to_range(1024.0), 1024)] {
            let s = beat_signal(&[target(d)], &p).unwrap();
            let peak = argmax_profile(&s, 2048) as i64;
            assert!((peak - bin as i64).abs() <= 1, "d={d} peak={peak} bin={bin}");
        }
    }

    #[test]
    fn zero_delay_beat_is_constant() {
        let p = RadarParams::paper();
        let t = Target {
            distance_m: 0.0,
            amplitude: 0.3,
            phase_rad: 1.1,
        };
        let s = beat_signal(&[t], &p).unwrap();
        assert!(s.iter().all(|v| (v - s[0]).norm() < 1e-12 && (v.norm() - 0.3).abs() < 1e-12));
    }

    #[test]
    fn beat_rejects_out_of_band_target() {
        let p = RadarParams::paper();
        // 100 m -> 41.7 MHz >= 40 MHz
        let err = beat_signal(&[target(100.0)], &p).unwrap_err();
        assert!(matches!(err, Error::BeatOutOfBand { .. }));
        assert!(beat_signal(&[], &p).is_err());
    }

    fn spec(r: f64, sir: f64, tc: f64) -> InterferenceSpec {
        InterferenceSpec {
            relative_slope: r,
            sir_db: sir,
            crossing_time_s: tc,
        }
    }

    #[test]
    fn interference_zero_slope_unit_amplitude() {
        let p = RadarParams::paper();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = interference_signal(&spec(0.0, 0.0, 12.8e-6), &p, 1.0, &mut rng).unwrap();
        let nz: Vec<usize> = (0..s.len()).filter(|&n| s[n].norm() > 0.0).collect();
        assert!(!nz.is_empty());
        assert!(nz.iter().all(|&n| (s[n].norm() - 1.0).abs() < 1e-12));
        // beat slope -alpha: phase second difference
        let mid = nz[nz.len() / 2];
        let dt = 1.0 / p.sampling_freq_hz;
        let second_diff = s[mid + 1] * s[mid].conj() * s[mid].conj() * s[mid - 1];
        let slope = second_diff.arg() / (2.0 * PI * dt * dt);
        assert!((slope + 6.25e13).abs() / 6.25e13 < 1e-6, "{slope}");
    }

    #[test]
    fn interference_sir_sets_amplitude() {
        let p = RadarParams::paper();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = interference_signal(&spec(0.3, 40.0, 5e-6), &p, 1.0, &mut rng).unwrap();
        let nz: Vec<f64> = s.iter().map(|v| v.norm()).filter(|&m| m > 0.0).collect();
        assert!(!nz.is_empty());
        assert!(nz.iter().all(|&m| (m - 0.01).abs() < 1e-12));
        let power = nz.iter().map(|m| m * m).sum::<f64>() / nz.len() as f64;
        assert!((power - 1e-4).abs() / 1e-4 < 1e-9);
    }

    #[test]
    fn interference_gate_matches_brute_force_count() {
        let p = RadarParams::paper();
        let tc = p.sweep_time_s / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = interference_signal(&spec(0.5, 0.0, tc), &p, 1.0, &mut rng).unwrap();
        // oracle: evaluate the instantaneous frequency directly on the grid
        let slope = -0.5 * p.chirp_rate_hz_per_s;
        let expected: Vec<usize> = (0..1024)
            .filter(|&n| {
                let f = 20e6 + slope * (n as f64 / 40e6 - tc);
                (0.0..40e6).contains(&f)
            })
            .collect();
        let got: Vec<usize> = (0..1024).filter(|&n| s[n].norm() > 0.0).collect();
        assert_eq!(got, expected);
        // 1.28 us in band at 40 MHz -> 51.2 samples, centered on sample 512
        assert!((51..=52).contains(&got.len()), "{}", got.len());
        let center = (got[0] + got[got.len() - 1]) as f64 / 2.0;
        assert!((center - 512.0).abs() <= 1.0);
    }

    #[test]
    fn correlated_slope_is_full_sweep_tone() {
        let p = RadarParams::paper();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = interference_signal(&spec(1.0, 10.0, 1e-6), &p, 1.0, &mut rng).unwrap();
        assert!(s.iter().all(|v| v.norm() > 0.0));
        assert_eq!(argmax_profile(&s, 2048), 1024);
    }

    #[test]
    fn interference_rejects_bad_input() {
        let p = RadarParams::paper();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(interference_signal(&spec(2.0, 0.0, 0.0), &p, 1.0, &mut rng).is_err());
        assert!(interference_signal(&spec(0.5, 0.0, 0.0), &p, 0.0, &mut rng).is_err());
    }

    #[test]
    fn noise_disabled_and_variance_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = vec![Complex64::new(0.5, -0.25); 8];
        assert_eq!(add_noise(&x, f64::INFINITY, 1.0, &mut rng).unwrap(), x);
        assert!((noise_variance(20.0, 0.5) - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn noise_variance_empirical() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let zeros = vec![Complex64::new(0.0, 0.0); n];
        let y = add_noise(&zeros, 0.0, 1.0, &mut rng).unwrap();
        let var = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((0.99..=1.01).contains(&var), "{var}");
    }

    fn scenario(targets: Vec<Target>, interference: Option<InterferenceSpec>) -> Scenario {
        Scenario {
            targets,
            snr_db: 20.0,
            interference,
            rng_seed: 99,
        }
    }

    #[test]
    fn compose_without_interference_is_identical() {
        let p = RadarParams::paper();
        let s = compose_sample(&scenario(vec![target(30.0)], None), &p).unwrap();
        assert_eq!(s.clean, s.interfered);
    }

    #[test]
    fn compose_label_and_determinism() {
        let p = RadarParams::paper();
        let d = p.bin_to_range(1024.0);
        let sc = scenario(vec![target(d)], Some(spec(0.4, 0.0, 10e-6)));
        let a = compose_sample(&sc, &p).unwrap();
        let b = compose_sample(&sc, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.label, vec![LabelEntry { bin: 1024, value: Complex64::new(1.0, 0.0) }]);
        for n in 0..a.clean.len() {
            if a.clean[n] != a.interfered[n] {
                let u = n as f64 / 40e6 - 10e-6;
                let f = 20e6 - 0.6 * 6.25e13 * u;
                assert!((0.0..40e6).contains(&f));
            }
        }
    }

    fn mean_bin_power(x: &[Complex64], fft_len: usize) -> f64 {
        let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
        buf[..x.len()].copy_from_slice(x);
        Fft::new(fft_len).unwrap().process(&mut buf);
        buf.iter().map(|v| v.norm_sqr()).sum::<f64>() / fft_len as f64
    }

    #[test]
    fn sir_holds_in_profile() {
        let p = RadarParams::paper();
        for (r, sir, tc) in [(0.0, -5.0, 12e-6), (0.7, 15.0, 3e-6), (1.0, 40.0, 0.0), (1.5, 0.0, 25e-6)] {
            let t = Target { distance_m: 40.0, amplitude: 0.3, phase_rad: 1.0 };
            let sc = scenario(vec![t], Some(spec(r, sir, tc)));
            let s = compose_sample(&sc, &p).unwrap();
            let int: Vec<Complex64> = s.interfered.iter().zip(&s.clean).map(|(a, b)| a - b).collect();
            let peak = (1024.0 * 0.3f64).powi(2);
            let measured = 10.0 * (peak / mean_bin_power(&int, 2048)).log10();
            assert!((measured - sir).abs() < 1e-9, "r={r} sir={sir} got {measured}");
        }
    }

    #[test]
    fn snr_holds_in_profile() {
        let p = RadarParams::paper();
        let t = Target { distance_m: 40.0, amplitude: 0.5, phase_rad: 0.0 };
        let beat = beat_signal(&[t], &p).unwrap();
        let mut total = 0.0;
        for seed in 0..50 {
            let sc = Scenario { targets: vec![t], snr_db: 15.0, interference: None, rng_seed: seed };
            let s = compose_sample(&sc, &p).unwrap();
            let noise: Vec<Complex64> = s.clean.iter().zip(&beat).map(|(a, b)| a - b).collect();
            total += mean_bin_power(&noise, 2048);
        }
        let measured = 10.0 * ((1024.0 * 0.5f64).powi(2) / (total / 50.0)).log10();
        // 51200 noise samples: relative std of the power estimate ~ 0.45%
        assert!((measured - 15.0).abs() < 0.1, "{measured}");
    }

    #[test]
    fn colliding_targets_sum_in_label() {
        let p = RadarParams::paper();
        let t1 = Target { distance_m: 30.0, amplitude: 0.5, phase_rad: 0.0 };
        let t2 = Target { distance_m: 30.001, amplitude: 0.25, phase_rad: PI / 2.0 };
        let label = label_for(&[t2, t1], &p);
        assert_eq!(label.len(), 1);
        assert!((label[0].value - Complex64::new(0.5, 0.25)).norm() < 1e-12);
    }

    #[test]
    fn scenario_validation() {
        let p = RadarParams::paper();
        let mut sc = scenario(vec![target(30.0)], Some(spec(0.7, 15.0, 1e-6)));
        assert!(sc.validate(&p).is_ok());
        sc.snr_db = 12.0;
        assert!(sc.validate(&p).is_err());
        sc.snr_db = 20.0;
        sc.targets = vec![target(30.0); 5];
        assert!(sc.validate(&p).is_err());
        sc.targets = vec![target(1.0)];
        assert!(sc.validate(&p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn single_target_peak_within_one_bin(d in 2.0f64..95.0, phase in -PI..PI, seed: u64) {
            let p = RadarParams::paper();
            let t = Target { distance_m: d, amplitude: 1.0, phase_rad: phase };
            let sc = Scenario { targets: vec![t], snr_db: 20.0, interference: None, rng_seed: seed };
            let s = compose_sample(&sc, &p).unwrap();
            let peak = argmax_profile(&s.clean, 2048) as i64;
            prop_assert!((peak - s.label[0].bin as i64).abs() <= 1);
        }

        #[test]
        fn clean_differs_only_under_gate(r in 0u32..=15, sir in 0u32..10, tc in 0.0f64..25.6e-6, seed: u64) {
            let p = RadarParams::paper();
            let r = r as f64 / 10.0;
            let sir = -5.0 + 5.0 * sir as f64;
            let sc = Scenario {
                targets: vec![target(20.0)],
                snr_db: 10.0,
                interference: Some(spec(r, sir, tc)),
                rng_seed: seed,
            };
            let s = compose_sample(&sc, &p).unwrap();
            let slope = (r - 1.0) * p.chirp_rate_hz_per_s;
            for n in 0..1024 {
                let f = 20e6 + slope * (n as f64 / 40e6 - tc);
                if !(0.0..40e6).contains(&f) {
                    prop_assert_eq!(s.clean[n], s.interfered[n]);
                }
            }
        }
    }
}
