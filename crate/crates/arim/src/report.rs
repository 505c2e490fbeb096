use std::path::Path;

use arim_core::dataset::SampleRecord;
use arim_core::eval::{evaluate_sample, DetectionConfig, EvalReport, MitigationMethod, SampleMetrics};
use arim_core::fcn::EpochRecord;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io, Error, Result};
use crate::write_atomic;

/// Records evaluated per parallel batch.
const EVAL_CHUNK: usize = 256;

/// JSON report written by `arim evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub report: EvalReport,
    /// Zeroing factor picked on the validation split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeroing_threshold: Option<f64>,
    pub data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

/// Parallel [`arim_core::eval::evaluate`]: identical output, any thread count.
pub fn evaluate_stream<M, I>(method: &M, records: I, split: &str, cfg: &DetectionConfig) -> Result<EvalReport>
where
    M: MitigationMethod + Sync + ?Sized,
    I: IntoIterator<Item = Result<SampleRecord>>,
{
    let mut samples = Vec::new();
    let mut chunk = Vec::with_capacity(EVAL_CHUNK);
    let flush = |chunk: &mut Vec<SampleRecord>, samples: &mut Vec<SampleMetrics>| -> Result<()> {
        let scored: Vec<_> = chunk.par_iter().map(|r| evaluate_sample(method, r, cfg)).collect();
        for s in scored {
            samples.push(s?);
        }
        chunk.clear();
        Ok(())
    };
    for record in records {
        chunk.push(record?);
        if chunk.len() == EVAL_CHUNK {
            flush(&mut chunk, &mut samples)?;
        }
    }
    flush(&mut chunk, &mut samples)?;
    Ok(EvalReport::from_samples(method.name(), split.into(), samples))
}

pub fn write_report(path: &Path, report: &ReportFile) -> Result<()> {
    let json = serde_json::to_vec_pretty(report).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    write_atomic(path, &json)
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.into(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv {
        path: path.into(),
        source: e.into_error().into(),
    })?;
    write_atomic(path, &bytes)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

/// Per-sample metrics, columns `sample_id,auc,mae_db,delta_snr_db`.
pub fn write_samples_csv(path: &Path, samples: &[SampleMetrics]) -> Result<()> {
    write_csv(path, samples)
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<SampleMetrics>> {
    read_csv(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct HistoryRow {
    epoch: usize,
    train_loss: f64,
    val_loss: Option<f64>,
}

/// Training history, columns `epoch,train_loss,val_loss` (empty without validation).
pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let rows: Vec<HistoryRow> = history
        .iter()
        .map(|r| HistoryRow {
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_loss: r.val_loss,
        })
        .collect();
    write_csv(path, &rows)
}

pub fn read_history_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    Ok(read_csv::<HistoryRow>(path)?
        .into_iter()
        .map(|r| EpochRecord {
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_loss: r.val_loss,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use arim_core::dataset::ParameterGrid;
    use arim_core::eval::{evaluate, Identity};
    use arim_core::radar::RadarParams;

    #[test]
    fn parallel_matches_sequential() {
        let params = RadarParams::desk();
        let grid = ParameterGrid::paper();
        let records: Vec<_> = (0..300).map(|i| SampleRecord::generate(5, i, &grid, &params).unwrap()).collect();
        let cfg = DetectionConfig::default();
        let seq = evaluate(&Identity, records.iter().cloned().map(Ok), "test", &cfg).unwrap();
        let par = evaluate_stream(&Identity, records.into_iter().map(Ok), "test", &cfg).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn csv_roundtrips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![
            SampleMetrics { sample_id: 3, auc: 0.1 + 0.2, mae_db: 1e-300, delta_snr_db: -7.25 },
            SampleMetrics { sample_id: 4, auc: 1.0, mae_db: 0.0, delta_snr_db: 1.0 / 3.0 },
        ];
        let p = dir.path().join("s.csv");
        write_samples_csv(&p, &samples).unwrap();
        assert_eq!(read_samples_csv(&p).unwrap(), samples);

        let history = vec![
            EpochRecord { epoch: 0, train_loss: 0.5, val_loss: None },
            EpochRecord { epoch: 1, train_loss: 0.125, val_loss: Some(2.0 / 7.0) },
        ];
        let h = dir.path().join("h.csv");
        write_history_csv(&h, &history).unwrap();
        let text = std::fs::read_to_string(&h).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss\n0,0.5,\n"), "{text}");
        assert_eq!(read_history_csv(&h).unwrap(), history);
    }

    #[test]
    fn report_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![SampleMetrics { sample_id: 0, auc: 0.75, mae_db: 2.0, delta_snr_db: 3.0 }];
        let file = ReportFile {
            report: EvalReport::from_samples("zeroing(k=3)".into(), "test".into(), samples),
            zeroing_threshold: Some(3.0),
            data: "d".into(),
            model: None,
        };
        let p = dir.path().join("r.json");
        write_report(&p, &file).unwrap();
        let back = read_report(&p).unwrap();
        assert_eq!(back, file);
        assert!(back.report.is_consistent());
    }
}
