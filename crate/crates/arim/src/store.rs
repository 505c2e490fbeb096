//! Sharded on-disk datasets.
//!
//! A dataset directory holds `manifest.json` and shards `shard-00000.bin`, ...
//! Each shard is `"ARIM"`, a little-endian u16 format version, then records,
//! each a u32 byte length followed by the encoded [`SampleRecord`]. Shard `k`
//! holds the consecutive ids `first_id .. first_id + count`.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use arim_core::dataset::{
    split_counts, split_ids, ParameterGrid, SampleRecord, SplitCounts, SplitKind,
    FORMAT_VERSION, SEED_MIXER, VALIDATION_FRACTION,
};
use arim_core::radar::RadarParams;
use arim_core::Profile;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{core_at, format, io, Error, Result};
use crate::write_atomic;

pub const SHARD_MAGIC: &[u8; 4] = b"ARIM";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Samples per shard.
pub const SHARD_SIZE: u64 = 1000;
/// Sample count of the full-size corpus.
pub const PAPER_COUNT: u64 = 48_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitInfo {
    pub train_count: u64,
    pub test_count: u64,
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShardEntry {
    pub file: String,
    pub first_id: u64,
    pub count: u64,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u16,
    pub total_samples: u64,
    pub global_seed: u64,
    pub profile: Profile,
    pub radar_params: RadarParams,
    pub grid: ParameterGrid,
    pub seed_mixer: String,
    pub split: SplitInfo,
    pub shards: Vec<ShardEntry>,
}

impl Manifest {
    pub fn split_counts(&self) -> SplitCounts {
        SplitCounts {
            train: self.split.train_count,
            test: self.split.test_count,
        }
    }

    pub fn split_range(&self, which: SplitKind) -> Range<u64> {
        split_ids(self.split_counts(), self.split.validation_fraction, which)
    }

    /// Structural checks that need no shard access.
    pub fn validate(&self, path: &Path) -> Result<()> {
        let bad = |reason: String| Err(format(path, reason));
        if self.format_version != FORMAT_VERSION {
            return bad(format!(
                "unsupported format version {} (supported: {FORMAT_VERSION})",
                self.format_version
            ));
        }
        if self.seed_mixer != SEED_MIXER {
            return bad(format!("unknown seed mixer `{}`", self.seed_mixer));
        }
        self.radar_params.validate().map_err(core_at(path))?;
        self.grid.validate().map_err(core_at(path))?;
        if self.radar_params != RadarParams::for_profile(self.profile) {
            return bad(format!("radar parameters do not match the {} profile", self.profile));
        }
        if self.split.train_count + self.split.test_count != self.total_samples {
            return bad("train_count + test_count != total_samples".into());
        }
        let f = self.split.validation_fraction;
        if !(0.0..1.0).contains(&f) {
            return bad(format!("validation_fraction {f} outside [0, 1)"));
        }
        let mut next = 0;
        for s in &self.shards {
            if s.first_id != next || s.count == 0 {
                return bad(format!("shard {} does not continue at id {next}", s.file));
            }
            if s.file.contains(['/', '\\']) || s.file.starts_with('.') {
                return bad(format!("shard file name `{}` must be a plain file name", s.file));
            }
            next += s.count;
        }
        if next != self.total_samples {
            return bad(format!("shards cover {next} samples, manifest says {}", self.total_samples));
        }
        Ok(())
    }
}

/// Options of one generation run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub count: u64,
    pub global_seed: u64,
    pub profile: Profile,
    pub shard_size: u64,
}

impl GenerateOptions {
    pub fn new(count: u64, global_seed: u64, profile: Profile) -> Self {
        Self {
            count,
            global_seed,
            profile,
            shard_size: SHARD_SIZE,
        }
    }
}

pub fn shard_name(index: usize) -> String {
    format!("shard-{index:05}.bin")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode_shard(records: &[Vec<u8>]) -> Vec<u8> {
    let len = 6 + records.iter().map(|r| 4 + r.len()).sum::<usize>();
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(SHARD_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.len() as u32).to_le_bytes());
        out.extend_from_slice(r);
    }
    out
}

/// Writes a dataset into `out_dir`. Samples are simulated in parallel; the
/// bytes depend only on the options. On failure every file this call created
/// is removed and no manifest is left behind.
pub fn generate(out_dir: &Path, opts: &GenerateOptions) -> Result<Manifest> {
    if opts.count == 0 {
        return Err(format(out_dir, "count must be at least 1"));
    }
    if opts.shard_size == 0 {
        return Err(format(out_dir, "shard size must be at least 1"));
    }
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    match fs::remove_file(&manifest_path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(io(&manifest_path)(e)),
        _ => {}
    }

    let mut written = Vec::new();
    let result = write_shards(out_dir, opts, &mut written).and_then(|shards| {
        let manifest = build_manifest(opts, shards);
        let json = serde_json::to_vec_pretty(&manifest).map_err(|source| Error::Json {
            path: manifest_path.clone(),
            source,
        })?;
        write_atomic(&manifest_path, &json)?;
        Ok(manifest)
    });
    if result.is_err() {
        for path in written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn build_manifest(opts: &GenerateOptions, shards: Vec<ShardEntry>) -> Manifest {
    let counts = split_counts(opts.count);
    Manifest {
        format_version: FORMAT_VERSION,
        total_samples: opts.count,
        global_seed: opts.global_seed,
        profile: opts.profile,
        radar_params: RadarParams::for_profile(opts.profile),
        grid: ParameterGrid::paper(),
        seed_mixer: SEED_MIXER.into(),
        split: SplitInfo {
            train_count: counts.train,
            test_count: counts.test,
            validation_fraction: VALIDATION_FRACTION,
        },
        shards,
    }
}

fn write_shards(out_dir: &Path, opts: &GenerateOptions, written: &mut Vec<PathBuf>) -> Result<Vec<ShardEntry>> {
    let params = RadarParams::for_profile(opts.profile);
    let grid = ParameterGrid::paper();
    let mut shards = Vec::new();
    let mut first = 0;
    while first < opts.count {
        let end = (first + opts.shard_size).min(opts.count);
        let records: Vec<Vec<u8>> = (first..end)
            .into_par_iter()
            .map(|id| SampleRecord::generate(opts.global_seed, id, &grid, &params).map(|r| r.encode()))
            .collect::<std::result::Result<_, _>>()?;
        let bytes = encode_shard(&records);
        let file = shard_name(shards.len());
        let path = out_dir.join(&file);
        written.push(path.clone());
        write_atomic(&path, &bytes)?;
        log::info!("wrote {} (ids {first}..{end})", path.display());
        shards.push(ShardEntry {
            file,
            first_id: first,
            count: end - first,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        first = end;
    }
    Ok(shards)
}

/// A dataset opened for reading.
#[derive(Debug, Clone)]
pub struct Dataset {
    dir: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    /// Opens `path`, which is either the dataset directory or its manifest.
    pub fn open(path: &Path) -> Result<Self> {
        let (dir, manifest_path) = if path.is_dir() {
            (path.to_path_buf(), path.join(MANIFEST_FILE))
        } else {
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (dir, path.to_path_buf())
        };
        let text = fs::read(&manifest_path).map_err(io(&manifest_path))?;
        let manifest: Manifest = serde_json::from_slice(&text).map_err(|source| Error::Json {
            path: manifest_path.clone(),
            source,
        })?;
        manifest.validate(&manifest_path)?;
        Ok(Self { dir, manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn params(&self) -> &RadarParams {
        &self.manifest.radar_params
    }

    /// Verified bytes of one shard.
    pub fn read_shard(&self, index: usize) -> Result<Vec<u8>> {
        let entry = &self.manifest.shards[index];
        let path = self.dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(io(&path))?;
        let actual = sha256_hex(&bytes);
        if actual != entry.sha256 {
            return Err(Error::Checksum {
                path,
                expected: entry.sha256.clone(),
                actual,
            });
        }
        if bytes.len() as u64 != entry.bytes {
            return Err(format(&path, format!("{} bytes, manifest says {}", bytes.len(), entry.bytes)));
        }
        Ok(bytes)
    }

    /// Decodes and validates the records of shard `index` whose ids fall in `ids`.
    fn shard_records(&self, index: usize, ids: &Range<u64>) -> Result<Vec<SampleRecord>> {
        let entry = &self.manifest.shards[index];
        let path = self.dir.join(&entry.file);
        let bytes = self.read_shard(index)?;
        let mut reader = ShardReader::new(&bytes).map_err(|r| format(&path, r))?;
        let mut out = Vec::new();
        for offset in 0..entry.count {
            let id = entry.first_id + offset;
            let raw = reader
                .next_record()
                .map_err(|r| format(&path, r))?
                .ok_or_else(|| format(&path, format!("ends after {offset} of {} records", entry.count)))?;
            if !ids.contains(&id) {
                continue;
            }
            let record = SampleRecord::decode(raw).map_err(core_at(&path))?;
            if record.sample_id != id {
                return Err(format(&path, format!("record {offset} has id {}, expected {id}", record.sample_id)));
            }
            record.validate(self.params()).map_err(core_at(&path))?;
            out.push(record);
        }
        if reader.remaining() != 0 {
            return Err(format(&path, format!("{} trailing bytes", reader.remaining())));
        }
        Ok(out)
    }

    /// Streams the records with ids in `ids`, in id order, one shard in memory at a time.
    pub fn records(&self, ids: Range<u64>) -> Records<'_> {
        let shards = self
            .manifest
            .shards
            .iter()
            .enumerate()
            .filter(|(_, s)| s.first_id < ids.end && ids.start < s.first_id + s.count)
            .map(|(i, _)| i)
            .collect::<Vec<_>>()
            .into_iter();
        Records {
            dataset: self,
            ids,
            shards,
            buffer: Vec::new().into_iter(),
            failed: false,
        }
    }

    pub fn split(&self, which: SplitKind) -> Records<'_> {
        self.records(self.manifest.split_range(which))
    }

    /// Loads a whole split into memory.
    pub fn load(&self, which: SplitKind) -> Result<Vec<SampleRecord>> {
        self.split(which).collect()
    }

    pub fn get(&self, sample_id: u64) -> Result<SampleRecord> {
        let total = self.manifest.total_samples;
        if sample_id >= total {
            return Err(Error::UnknownSample { sample_id, total });
        }
        self.records(sample_id..sample_id + 1)
            .next()
            .unwrap_or(Err(Error::UnknownSample { sample_id, total }))
    }
}

/// Iterator returned by [`Dataset::records`]. Stops after the first error.
pub struct Records<'a> {
    dataset: &'a Dataset,
    ids: Range<u64>,
    shards: std::vec::IntoIter<usize>,
    buffer: std::vec::IntoIter<SampleRecord>,
    failed: bool,
}

impl Iterator for Records<'_> {
    type Item = Result<SampleRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if let Some(r) = self.buffer.next() {
                return Some(Ok(r));
            }
            let shard = self.shards.next()?;
            match self.dataset.shard_records(shard, &self.ids) {
                Ok(records) => self.buffer = records.into_iter(),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Walks the length-prefixed records of a shard image.
pub struct ShardReader<'a> {
    rest: &'a [u8],
}

impl<'a> ShardReader<'a> {
    pub fn new(bytes: &'a [u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 6 || &bytes[..4] != SHARD_MAGIC {
            return Err("not an ARIM shard (bad magic)".into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(format!("unsupported shard version {version} (supported: {FORMAT_VERSION})"));
        }
        Ok(Self { rest: &bytes[6..] })
    }

    pub fn next_record(&mut self) -> std::result::Result<Option<&'a [u8]>, String> {
        if self.rest.is_empty() {
            return Ok(None);
        }
        if self.rest.len() < 4 {
            return Err("truncated record length".into());
        }
        let len = u32::from_le_bytes(self.rest[..4].try_into().unwrap()) as usize;
        let body = self.rest.get(4..4 + len).ok_or("truncated record")?;
        self.rest = &self.rest[4 + len..];
        Ok(Some(body))
    }

    pub fn remaining(&self) -> usize {
        self.rest.len()
    }
}
