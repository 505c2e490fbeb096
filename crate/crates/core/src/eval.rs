//! Detection AUC, target-amplitude MAE and SNR improvement, and batch
//! evaluation of any profile-producing mitigation method.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::SampleRecord;
use crate::error::{invalid, Error, Result};
use crate::timefreq::RangeFft;

/// Geometry of target matching on a range profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// A target counts as detected when any bin within this distance crosses the threshold.
    pub match_tolerance_bins: usize,
    /// Bins within this distance of a target are excluded from false-alarm counting.
    pub guard_band_bins: usize,
    /// `None`: sweep every distinct profile value. `Some(n)`: `n` levels
    /// uniform between the profile minimum and maximum.
    pub threshold_levels: Option<usize>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            match_tolerance_bins: 1,
            guard_band_bins: 3,
            threshold_levels: None,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.guard_band_bins < self.match_tolerance_bins {
            return Err(invalid("guard_band_bins", "must be >= match_tolerance_bins"));
        }
        if matches!(self.threshold_levels, Some(n) if n < 2) {
            return Err(invalid("threshold_levels", "need at least two levels"));
        }
        Ok(())
    }
}

fn check_label(label_bins: &[usize], len: usize) -> Result<()> {
    if label_bins.is_empty() {
        return Err(Error::EmptyLabel);
    }
    if let Some(&bin) = label_bins.iter().find(|&&b| b >= len) {
        return Err(Error::LabelOutOfRange { bin, len });
    }
    Ok(())
}

fn window(bin: usize, radius: usize, len: usize) -> core::ops::Range<usize> {
    bin.saturating_sub(radius)..(bin + radius + 1).min(len)
}

/// Index of the largest value within `radius` of `bin` (first on ties).
pub fn window_argmax(profile: &[f64], bin: usize, radius: usize) -> usize {
    let mut best = bin.min(profile.len() - 1);
    for i in window(bin, radius, profile.len()) {
        if profile[i] > profile[best] || (profile[i] == profile[best] && i < best) {
            best = i;
        }
    }
    best
}

/// Bins farther than the guard band from every target.
pub fn noise_bins(len: usize, label_bins: &[usize], guard: usize) -> Vec<usize> {
    (0..len)
        .filter(|&j| label_bins.iter().all(|&b| j.abs_diff(b) > guard))
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Area under the detection ROC of one profile.
///
/// Each target is scored by the maximum of its match window, each noise bin
/// by its own value. Sweeping a threshold `t` gives `TPR(t)` = fraction of
/// targets scoring `>= t` and `FPR(t)` = fraction of noise bins `>= t`; the
/// area is the trapezoidal integral including `(0,0)` and `(1,1)`.
pub fn auc(profile_db: &[f64], label_bins: &[usize], cfg: &DetectionConfig) -> Result<f64> {
    check_label(label_bins, profile_db.len())?;
    cfg.validate()?;
    let positives: Vec<f64> = label_bins
        .iter()
        .map(|&b| profile_db[window_argmax(profile_db, b, cfg.match_tolerance_bins)])
        .collect();
    let mut negatives: Vec<f64> = noise_bins(profile_db.len(), label_bins, cfg.guard_band_bins)
        .into_iter()
        .map(|j| profile_db[j])
        .collect();
    if negatives.is_empty() {
        return Err(invalid("profile", "no bins outside the guard band"));
    }
    match cfg.threshold_levels {
        None => {
            negatives.sort_by(f64::total_cmp);
            let mut wins = 0.0;
            for &p in &positives {
                let below = negatives.partition_point(|&n| n < p);
                let not_above = negatives.partition_point(|&n| n <= p);
                wins += below as f64 + 0.5 * (not_above - below) as f64;
            }
            Ok(wins / (positives.len() * negatives.len()) as f64)
        }
        Some(levels) => {
            let lo = profile_db.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = profile_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut points: Vec<(f64, f64)> = Vec::with_capacity(levels + 2);
            points.push((0.0, 0.0));
            points.push((1.0, 1.0));
            for i in 0..levels {
                let t = lo + (hi - lo) * i as f64 / (levels - 1) as f64;
                let tpr = positives.iter().filter(|&&p| p >= t).count() as f64
                    / positives.len() as f64;
                let fpr = negatives.iter().filter(|&&n| n >= t).count() as f64
                    / negatives.len() as f64;
                points.push((fpr, tpr));
            }
            Ok(trapezoid(&mut points))
        }
    }
}

fn trapezoid(points: &mut [(f64, f64)]) -> f64 {
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

/// Mean over targets of `|pred[b*] - clean[b']|` in dB, where `b*` and `b'`
/// are the window maxima of each profile around the target bin.
pub fn mae_db(
    predicted_db: &[f64],
    clean_db: &[f64],
    label_bins: &[usize],
    cfg: &DetectionConfig,
) -> Result<f64> {
    if predicted_db.len() != clean_db.len() {
        return Err(Error::LengthMismatch {
            what: "mae profiles",
            expected: clean_db.len(),
            actual: predicted_db.len(),
        });
    }
    check_label(label_bins, clean_db.len())?;
    let tol = cfg.match_tolerance_bins;
    let total: f64 = label_bins
        .iter()
        .map(|&b| {
            let p = predicted_db[window_argmax(predicted_db, b, tol)];
            let c = clean_db[window_argmax(clean_db, b, tol)];
            (p - c).abs()
        })
        .sum();
    Ok(total / label_bins.len() as f64)
}

/// Peak dB near the target minus the median dB of the noise bins.
pub fn snr_db(
    profile_db: &[f64],
    target_bin: usize,
    label_bins: &[usize],
    cfg: &DetectionConfig,
) -> Result<f64> {
    check_label(label_bins, profile_db.len())?;
    check_label(&[target_bin], profile_db.len())?;
    let peak = profile_db[window_argmax(profile_db, target_bin, cfg.match_tolerance_bins)];
    let mut floor: Vec<f64> = noise_bins(profile_db.len(), label_bins, cfg.guard_band_bins)
        .into_iter()
        .map(|j| profile_db[j])
        .collect();
    if floor.is_empty() {
        return Err(invalid("profile", "no bins outside the guard band"));
    }
    Ok(peak - median(&mut floor))
}

/// `SNR(after) - SNR(before)` for the strongest target.
pub fn delta_snr(
    before_db: &[f64],
    after_db: &[f64],
    strongest_bin: usize,
    label_bins: &[usize],
    cfg: &DetectionConfig,
) -> Result<f64> {
    Ok(snr_db(after_db, strongest_bin, label_bins, cfg)?
        - snr_db(before_db, strongest_bin, label_bins, cfg)?)
}

/// Anything that turns a stored sample into a dB range profile.
pub trait MitigationMethod {
    fn name(&self) -> String;

    /// dB magnitude profile of the mitigated interfered signal.
    fn profile_db(&self, record: &SampleRecord) -> Result<Vec<f64>>;
}

/// No mitigation: the profile of the interfered signal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl MitigationMethod for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn profile_db(&self, record: &SampleRecord) -> Result<Vec<f64>> {
        let plan = RangeFft::new(record.interfered.len())?;
        Ok(plan.compute(&record.interfered_f64())?.magnitude_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub sample_id: u64,
    pub auc: f64,
    pub mae_db: f64,
    pub delta_snr_db: f64,
}

/// Split-level means plus the per-sample records they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub split: String,
    pub count: usize,
    pub mean_auc: f64,
    pub mae_db: f64,
    pub mean_delta_snr_db: f64,
    pub samples: Vec<SampleMetrics>,
}

impl EvalReport {
    pub fn from_samples(method: String, split: String, samples: Vec<SampleMetrics>) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = |f: fn(&SampleMetrics) -> f64| samples.iter().map(f).sum::<f64>() / n;
        Self {
            method,
            split,
            count: samples.len(),
            mean_auc: mean(|s| s.auc),
            mae_db: mean(|s| s.mae_db),
            mean_delta_snr_db: mean(|s| s.delta_snr_db),
            samples,
        }
    }

    /// True when the stored aggregates equal the means of the stored samples.
    pub fn is_consistent(&self) -> bool {
        let again = Self::from_samples(self.method.clone(), self.split.clone(), self.samples.clone());
        again.count == self.count
            && again.mean_auc == self.mean_auc
            && again.mae_db == self.mae_db
            && again.mean_delta_snr_db == self.mean_delta_snr_db
    }
}

/// Metrics of one sample: the method's profile against the clean profile,
/// with the unmitigated interfered profile as the SNR baseline.
pub fn evaluate_sample<M: MitigationMethod + ?Sized>(
    method: &M,
    record: &SampleRecord,
    cfg: &DetectionConfig,
) -> Result<SampleMetrics> {
    let ctx = |e: Error| Error::Sample {
        sample_id: record.sample_id,
        reason: format!("{}: {e}", method.name()),
    };
    let plan = RangeFft::new(record.clean.len()).map_err(ctx)?;
    let clean_db = plan.compute(&record.clean_f64()).map_err(ctx)?.magnitude_db;
    let before_db = plan.compute(&record.interfered_f64()).map_err(ctx)?.magnitude_db;
    let after_db = method.profile_db(record).map_err(ctx)?;
    if after_db.len() != clean_db.len() {
        return Err(ctx(Error::LengthMismatch {
            what: "method profile",
            expected: clean_db.len(),
            actual: after_db.len(),
        }));
    }
    let bins = record.label_bins();
    let strongest = record.strongest_bin().ok_or(Error::EmptyLabel).map_err(ctx)?;
    Ok(SampleMetrics {
        sample_id: record.sample_id,
        auc: auc(&after_db, &bins, cfg).map_err(ctx)?,
        mae_db: mae_db(&after_db, &clean_db, &bins, cfg).map_err(ctx)?,
        delta_snr_db: delta_snr(&before_db, &after_db, strongest, &bins, cfg).map_err(ctx)?,
    })
}

/// Sequential evaluation over a stream of records, in stream order.
pub fn evaluate<M, I>(method: &M, records: I, split: &str, cfg: &DetectionConfig) -> Result<EvalReport>
where
    M: MitigationMethod + ?Sized,
    I: IntoIterator<Item = Result<SampleRecord>>,
{
    let mut samples = Vec::new();
    for record in records {
        samples.push(evaluate_sample(method, &record?, cfg)?);
    }
    Ok(EvalReport::from_samples(method.name(), split.into(), samples))
}
