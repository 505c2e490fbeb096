//! Time-domain zeroing baseline, its threshold search, and the clean-signal oracle.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleRecord;
use crate::error::{invalid, Result};
use crate::eval::{auc, DetectionConfig, MitigationMethod};
use crate::timefreq::{range_profile, RangeFft, RangeProfile};

/// Relative zeroing threshold `k` (in multiples of the median magnitude) and
/// the grid searched on validation data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroingConfig {
    pub threshold_factor: f64,
    pub search_grid: Vec<f64>,
}

impl Default for ZeroingConfig {
    fn default() -> Self {
        Self {
            threshold_factor: 3.0,
            search_grid: default_grid(),
        }
    }
}

/// `k` in {1.5, 2.0, ..., 6.0}.
pub fn default_grid() -> Vec<f64> {
    (3..=12).map(|i| i as f64 * 0.5).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("search_grid", "must be non-empty"));
    }
    if grid.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(invalid("search_grid", "factors must be positive"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("search_grid", "must be strictly increasing"));
    }
    Ok(())
}

fn median_magnitude(signal: &[Complex64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    let mut mags: Vec<f64> = signal.iter().map(|v| v.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let n = mags.len();
    if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    }
}

/// Replaces every sample with `|x| > threshold` by zero.
pub fn clip_above(signal: &[Complex64], threshold: f64) -> Vec<Complex64> {
    signal
        .iter()
        .map(|&x| {
            if x.norm() > threshold {
                Complex64::new(0.0, 0.0)
            } else {
                x
            }
        })
        .collect()
}

/// Replaces every sample with `|x| > k * median(|x|)` by zero.
///
/// The median is taken from the input, so a second application may clip
/// further (the zeros pull the median down); [`clip_above`] with the same
/// absolute threshold is idempotent.
pub fn zero_clip(signal: &[Complex64], k: f64) -> Result<Vec<Complex64>> {
    if !(k > 0.0) {
        return Err(invalid("threshold_factor", "must be positive"));
    }
    Ok(clip_above(signal, k * median_magnitude(signal)))
}

/// Zeroing followed by the range FFT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zeroing {
    pub threshold_factor: f64,
}

impl MitigationMethod for Zeroing {
    fn name(&self) -> String {
        format!("zeroing(k={})", self.threshold_factor)
    }

    fn profile_db(&self, record: &SampleRecord) -> Result<Vec<f64>> {
        let clipped = zero_clip(&record.interfered_f64(), self.threshold_factor)?;
        Ok(range_profile(&clipped)?.magnitude_db)
    }
}

/// Upper bound: the profile of the stored clean signal.
pub fn oracle_profile(record: &SampleRecord) -> Result<RangeProfile> {
    range_profile(&record.clean_f64())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Oracle;

impl MitigationMethod for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn profile_db(&self, record: &SampleRecord) -> Result<Vec<f64>> {
        Ok(oracle_profile(record)?.magnitude_db)
    }
}

/// Per-factor mean validation AUC accumulated over a record stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSearch {
    pub grid: Vec<f64>,
    pub mean_auc: Vec<f64>,
    pub samples: usize,
}

impl ThresholdSearch {
    /// Grid point with the highest mean AUC; ties go to the smaller factor.
    pub fn best(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.grid.len() {
            if self.mean_auc[i] > self.mean_auc[best] {
                best = i;
            }
        }
        self.grid[best]
    }
}

/// Scores every grid factor on the validation stream in a single pass.
pub fn search_threshold<I>(validation: I, grid: &[f64], cfg: &DetectionConfig) -> Result<ThresholdSearch>
where
    I: IntoIterator<Item = Result<SampleRecord>>,
{
    check_grid(grid)?;
    let mut sums = vec![0.0; grid.len()];
    let mut samples = 0usize;
    let mut plan: Option<RangeFft> = None;
    for record in validation {
        let record = record?;
        let signal = record.interfered_f64();
        let plan = match &plan {
            Some(p) => p,
            None => plan.insert(RangeFft::new(signal.len())?),
        };
        let bins = record.label_bins();
        for (sum, &k) in sums.iter_mut().zip(grid) {
            let profile = plan.compute(&zero_clip(&signal, k)?)?;
            *sum += auc(&profile.magnitude_db, &bins, cfg)?;
        }
        samples += 1;
    }
    if samples == 0 {
        return Err(invalid("validation", "no samples to tune on"));
    }
    Ok(ThresholdSearch {
        grid: grid.to_vec(),
        mean_auc: sums.into_iter().map(|s| s / samples as f64).collect(),
        samples,
    })
}

/// The zeroing factor maximizing mean validation AUC.
pub fn tune_threshold<I>(validation: I, grid: &[f64], cfg: &DetectionConfig) -> Result<f64>
where
    I: IntoIterator<Item = Result<SampleRecord>>,
{
    Ok(search_threshold(validation, grid, cfg)?.best())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ParameterGrid, SampleRecord};
    use crate::radar::RadarParams;
    use proptest::prelude::*;

    fn unit_tone(n: usize) -> Vec<Complex64> {
        (0..n).map(|i| Complex64::from_polar(1.0, 0.3 * i as f64)).collect()
    }

    #[test]
    fn high_threshold_is_identity() {
        let x: Vec<Complex64> = (0..64).map(|i| Complex64::new(i as f64, -0.5)).collect();
        assert_eq!(zero_clip(&x, 1e6).unwrap(), x);
    }

    #[test]
    fn constant_modulus_unchanged() {
        let x = unit_tone(100);
        for k in [1.0, 1.5, 4.0] {
            assert_eq!(zero_clip(&x, k).unwrap(), x);
        }
    }

    #[test]
    fn burst_samples_are_zeroed() {
        let mut x = unit_tone(1024);
        let burst: Vec<usize> = (500..510).collect();
        for &i in &burst {
            x[i] = Complex64::from_polar(100.0, 0.1 * i as f64);
        }
        let y = zero_clip(&x, 3.0).unwrap();
        // brute force: median of |x| is 1 (1014 unit samples), threshold 3
        let zeroed: Vec<usize> = (0..1024).filter(|&i| y[i] == Complex64::new(0.0, 0.0)).collect();
        assert_eq!(zeroed, burst);
    }

    #[test]
    fn all_zero_signal_unchanged() {
        let x = vec![Complex64::new(0.0, 0.0); 32];
        assert_eq!(zero_clip(&x, 2.0).unwrap(), x);
        assert!(zero_clip(&x, 0.0).is_err());
    }

    #[test]
    fn relative_reclip_can_clip_more() {
        // |x| = 1, 1.5, 2, 2.5, 9 and k = 1.2: threshold 2.4 clips 2.5 and 9;
        // the result 1, 1.5, 2, 0, 0 has median 1, so a second pass clips more
        let y: Vec<Complex64> = [1.0, 1.5, 2.0, 2.5, 9.0].iter().map(|&m| Complex64::new(m, 0.0)).collect();
        let once = zero_clip(&y, 1.2).unwrap();
        assert_eq!(once.iter().filter(|v| v.norm() == 0.0).count(), 2);
        assert_ne!(zero_clip(&once, 1.2).unwrap(), once);
        assert_eq!(clip_above(&once, 2.4), once);
    }

    fn desk_records(n: u64, seed: u64) -> Vec<SampleRecord> {
        let mut grid = ParameterGrid::paper();
        grid.sir_values_db = vec![-5.0, 0.0];
        grid.slope_values = vec![0.0, 0.2, 0.4];
        (0..n)
            .map(|id| SampleRecord::generate(seed, id, &grid, &RadarParams::desk()).unwrap())
            .collect()
    }

    #[test]
    fn single_point_grid() {
        let recs = desk_records(3, 1);
        let k = tune_threshold(recs.into_iter().map(Ok), &[2.5], &DetectionConfig::default()).unwrap();
        assert_eq!(k, 2.5);
    }

    #[test]
    fn tuning_prefers_clipping_on_strong_bursts() {
        // brute-force oracle: evaluate both factors directly and compare
        let recs = desk_records(50, 9);
        let cfg = DetectionConfig::default();
        let mean_auc = |k: f64| {
            recs.iter()
                .map(|r| {
                    let p = Zeroing { threshold_factor: k }.profile_db(r).unwrap();
                    auc(&p, &r.label_bins(), &cfg).unwrap()
                })
                .sum::<f64>()
                / recs.len() as f64
        };
        let (low, high) = (mean_auc(2.0), mean_auc(50.0));
        let chosen = tune_threshold(recs.iter().cloned().map(Ok), &[2.0, 50.0], &cfg).unwrap();
        assert!(low > high, "low={low} high={high}");
        assert_eq!(chosen, 2.0);
    }

    #[test]
    fn ties_go_to_smaller_factor() {
        let s = ThresholdSearch {
            grid: vec![1.0, 2.0, 3.0],
            mean_auc: vec![0.5, 0.9, 0.9],
            samples: 1,
        };
        assert_eq!(s.best(), 2.0);
    }

    #[test]
    fn grid_validation() {
        let cfg = DetectionConfig::default();
        assert!(tune_threshold(core::iter::empty(), &[], &cfg).is_err());
        assert!(tune_threshold(core::iter::empty(), &[2.0, 1.0], &cfg).is_err());
        assert!(tune_threshold(core::iter::empty(), &[1.0], &cfg).is_err());
        assert_eq!(default_grid().first(), Some(&1.5));
        assert_eq!(default_grid().last(), Some(&6.0));
    }

    #[test]
    fn oracle_matches_clean_profile() {
        let r = desk_records(1, 4).remove(0);
        let p = oracle_profile(&r).unwrap();
        assert_eq!(p, range_profile(&r.clean_f64()).unwrap());
        let mut quiet = r.clone();
        quiet.interfered = quiet.clean.clone();
        let identity = crate::eval::Identity.profile_db(&quiet).unwrap();
        assert_eq!(Oracle.profile_db(&quiet).unwrap(), identity);
    }

    fn signal() -> impl Strategy<Value = Vec<Complex64>> {
        proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..200)
            .prop_map(|v| v.into_iter().map(|(r, i)| Complex64::new(r, i)).collect())
    }

    proptest! {
        #[test]
        fn zero_clip_invariants(x in signal(), k in 0.5f64..4.0) {
            let once = zero_clip(&x, k).unwrap();
            let threshold = k * median_magnitude(&x);
            prop_assert_eq!(&clip_above(&once, threshold), &once);
            for (a, b) in x.iter().zip(&once) {
                prop_assert!(b.norm() <= a.norm());
                prop_assert!(b == a || *b == Complex64::new(0.0, 0.0));
            }
        }
    }
}
