//! Trained-model container, inference and the binary model format.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::arch::{ArchKind, FcnArchitecture, Network};
use super::layers::Tensor;
use crate::codec::{PutLe, Reader};
use crate::dataset::SampleRecord;
use crate::error::{invalid, Error, Result};
use crate::eval::MitigationMethod;
use crate::timefreq::{Stft, StftConfig, WindowKind};
use crate::Profile;

pub const MODEL_MAGIC: &[u8; 7] = b"ARIMFCN";
pub const MODEL_VERSION: u16 = 1;

/// Affine map `(x - offset) * scale` from dB to network units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            offset: 0.0,
            scale: 1.0,
        }
    }
}

impl Normalization {
    /// Maps `[min, max]` onto `[0, 1]`; a degenerate range gets scale 1.
    pub fn from_range(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(invalid("normalization", format!("bad range [{min}, {max}]")));
        }
        let span = max - min;
        Ok(Self {
            offset: min,
            scale: if span > 0.0 { 1.0 / span } else { 1.0 },
        })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.offset) * self.scale
    }

    pub fn invert(&self, y: f64) -> f64 {
        y / self.scale + self.offset
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.offset.is_finite() && self.scale.is_finite() && self.scale > 0.0) {
            return Err(invalid("normalization", "constants must be finite with positive scale"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_trained: u32,
    /// Epoch whose weights are stored (0 = initialization).
    pub best_epoch: u32,
    pub final_train_loss: Option<f64>,
    pub best_val_loss: Option<f64>,
    pub seed: u64,
}

/// Architecture, STFT front end, f32 parameters and normalization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnModel {
    pub architecture: FcnArchitecture,
    pub profile: Profile,
    pub stft: StftConfig,
    pub params: Vec<f32>,
    pub input_norm: Normalization,
    pub target_norm: Normalization,
    pub meta: TrainingMeta,
}

impl FcnModel {
    /// Freshly initialized canonical model for a profile.
    pub fn new(kind: ArchKind, profile: Profile, seed: u64) -> Result<Self> {
        let architecture = FcnArchitecture::for_profile(kind, profile);
        let stft = StftConfig::canonical(profile, kind.hop())?;
        Self::with_architecture(architecture, profile, stft, seed)
    }

    pub fn with_architecture(
        architecture: FcnArchitecture,
        profile: Profile,
        stft: StftConfig,
        seed: u64,
    ) -> Result<Self> {
        let params = architecture.network()?.init_params(seed);
        let model = Self {
            architecture,
            profile,
            stft,
            params,
            input_norm: Normalization::default(),
            target_norm: Normalization::default(),
            meta: TrainingMeta {
                seed,
                ..TrainingMeta::default()
            },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn kind(&self) -> ArchKind {
        self.architecture.kind
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        let (h, w) = self.architecture.input_shape;
        if (self.stft.frames(), self.stft.fft_len) != (h, w) {
            return Err(Error::ShapeMismatch {
                what: "stft image vs network input",
                expected: (1, h, w),
                actual: (1, self.stft.frames(), self.stft.fft_len),
            });
        }
        if 2 * self.stft.signal_len != w {
            return Err(invalid("stft", "network width must equal the range-profile length"));
        }
        let expected = self.architecture.param_count();
        if self.params.len() != expected {
            return Err(Error::LengthMismatch {
                what: "model parameters",
                expected,
                actual: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("params", "non-finite weight"));
        }
        self.input_norm.validate()?;
        self.target_norm.validate()
    }

    /// Normalized network input for a dB spectrogram image.
    pub fn input_tensor(&self, db_image: &[f32]) -> Result<Tensor<f32>> {
        let (h, w) = self.architecture.input_shape;
        let n = self.input_norm;
        let data = db_image.iter().map(|&v| n.apply(v as f64) as f32).collect();
        Tensor::from_vec(1, h, w, data)
    }

    /// Normalized regression target for a dB profile.
    pub fn target_vector(&self, profile_db: &[f64]) -> Vec<f32> {
        profile_db.iter().map(|&v| self.target_norm.apply(v) as f32).collect()
    }

    /// Predicted clean range profile in dB.
    pub fn infer(&self, signal: &[Complex64]) -> Result<Vec<f64>> {
        let net = self.architecture.network()?;
        let stft = Stft::new(self.stft)?;
        self.infer_with(&net, &stft, signal)
    }

    fn infer_with(&self, net: &Network, stft: &Stft, signal: &[Complex64]) -> Result<Vec<f64>> {
        let image = stft.db_image_f32(signal)?;
        let out = net.forward(&self.params, &self.input_tensor(&image)?)?;
        Ok(out.data.iter().map(|&y| self.target_norm.invert(y as f64)).collect())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128 + 4 * self.params.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.put_u16(MODEL_VERSION);
        out.put_u8(self.architecture.kind.id());
        out.put_u8(self.profile.id());
        out.put_u32(self.architecture.input_shape.0 as u32);
        out.put_u32(self.architecture.input_shape.1 as u32);
        out.put_u32(self.architecture.channel_divisor as u32);
        let s = &self.stft;
        for v in [s.signal_len, s.window_len, s.hop, s.fft_len, s.tail_pad] {
            out.put_u32(v as u32);
        }
        out.put_u8(match s.window {
            WindowKind::Hamming => 0,
        });
        for v in [self.input_norm.offset, self.input_norm.scale, self.target_norm.offset, self.target_norm.scale] {
            out.put_f64(v);
        }
        let m = &self.meta;
        out.put_u32(m.epochs_trained);
        out.put_u32(m.best_epoch);
        for v in [m.final_train_loss, m.best_val_loss] {
            out.put_u8(v.is_some() as u8);
            out.put_f64(v.unwrap_or(0.0));
        }
        out.put_u64(m.seed);
        out.put_u64(self.params.len() as u64);
        for &p in &self.params {
            out.put_f32(p);
        }
        let crc = crc32fast::hash(&out);
        out.put_u32(crc);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt { what: "model", reason };
        if bytes.len() < MODEL_MAGIC.len() + 2 + 4 {
            return Err(corrupt(format!("truncated: {} bytes", bytes.len())));
        }
        if &bytes[..7] != MODEL_MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[7], bytes[8]]);
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                what: "model",
                found: version,
                supported: MODEL_VERSION,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(corrupt(format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}")));
        }
        let mut r = Reader::new(&body[9..], "model");
        let kind_id = r.u8()?;
        let kind = ArchKind::from_id(kind_id).ok_or_else(|| r.corrupt(format!("unknown architecture id {kind_id}")))?;
        let profile_id = r.u8()?;
        let profile = Profile::from_id(profile_id).ok_or_else(|| r.corrupt(format!("unknown profile id {profile_id}")))?;
        let h = r.u32()? as usize;
        let w = r.u32()? as usize;
        let divisor = r.u32()? as usize;
        let architecture = FcnArchitecture::new(kind, (h, w), divisor)?;
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let window = match r.u8()? {
            0 => WindowKind::Hamming,
            other => return Err(r.corrupt(format!("unknown window id {other}"))),
        };
        let stft = StftConfig {
            signal_len: dims[0],
            window_len: dims[1],
            hop: dims[2],
            fft_len: dims[3],
            tail_pad: dims[4],
            window,
        };
        let input_norm = Normalization {
            offset: r.f64()?,
            scale: r.f64()?,
        };
        let target_norm = Normalization {
            offset: r.f64()?,
            scale: r.f64()?,
        };
        let epochs_trained = r.u32()?;
        let best_epoch = r.u32()?;
        let mut opt = || -> Result<Option<f64>> {
            let flag = r.u8()?;
            let v = r.f64()?;
            Ok((flag != 0).then_some(v))
        };
        let final_train_loss = opt()?;
        let best_val_loss = opt()?;
        let seed = r.u64()?;
        let count = r.u64()? as usize;
        if count != architecture.param_count() {
            return Err(Error::LengthMismatch {
                what: "model parameters",
                expected: architecture.param_count(),
                actual: count,
            });
        }
        if r.remaining() != 4 * count {
            return Err(r.corrupt(format!("expected {} parameter bytes, found {}", 4 * count, r.remaining())));
        }
        let params = (0..count).map(|_| r.f32()).collect::<Result<Vec<f32>>>()?;
        let model = Self {
            architecture,
            profile,
            stft,
            params,
            input_norm,
            target_norm,
            meta: TrainingMeta {
                epochs_trained,
                best_epoch,
                final_train_loss,
                best_val_loss,
                seed,
            },
        };
        model.validate()?;
        Ok(model)
    }

    /// Decodes and rejects a model of a different architecture.
    pub fn decode_expecting(bytes: &[u8], kind: ArchKind) -> Result<Self> {
        let model = Self::decode(bytes)?;
        if model.kind() != kind {
            return Err(Error::ArchitectureMismatch {
                expected: kind.name(),
                found: model.kind().name(),
            });
        }
        Ok(model)
    }
}

/// A model ready for repeated inference.
#[derive(Debug, Clone)]
pub struct FcnMitigation {
    model: FcnModel,
    network: Network,
    stft: Stft,
}

impl FcnMitigation {
    pub fn new(model: FcnModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            network: model.architecture.network()?,
            stft: Stft::new(model.stft)?,
            model,
        })
    }

    pub fn model(&self) -> &FcnModel {
        &self.model
    }

    pub fn infer(&self, signal: &[Complex64]) -> Result<Vec<f64>> {
        self.model.infer_with(&self.network, &self.stft, signal)
    }
}

impl MitigationMethod for FcnMitigation {
    fn name(&self) -> String {
        format!("fcn-{}", self.model.kind())
    }

    fn profile_db(&self, record: &SampleRecord) -> Result<Vec<f64>> {
        self.infer(&record.interfered_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn desk(kind: ArchKind) -> FcnModel {
        let mut m = FcnModel::new(kind, Profile::Desk, 7).unwrap();
        m.input_norm = Normalization::from_range(-120.0, 40.0).unwrap();
        m.target_norm = Normalization::from_range(-100.0, 60.0).unwrap();
        m.meta.epochs_trained = 3;
        m.meta.final_train_loss = Some(0.125);
        m
    }

    fn tone(n: usize) -> Vec<Complex64> {
        (0..n).map(|i| Complex64::from_polar(1.0, 0.4 * i as f64)).collect()
    }

    #[test]
    fn roundtrip_is_bitwise() {
        for kind in [ArchKind::Shallow, ArchKind::Deep] {
            let m = desk(kind);
            let bytes = m.encode();
            let back = FcnModel::decode(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.encode(), bytes);
            assert!(back.params.iter().zip(&m.params).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn truncation_and_corruption_rejected() {
        let bytes = desk(ArchKind::Shallow).encode();
        for cut in [0, 5, 9, 40, bytes.len() - 1] {
            assert!(FcnModel::decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[60] ^= 1;
        assert!(matches!(FcnModel::decode(&flipped), Err(Error::Corrupt { .. })));
        let mut v2 = bytes.clone();
        v2[7] = 2;
        assert!(matches!(
            FcnModel::decode(&v2),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
    }

    #[test]
    fn cross_architecture_rejected() {
        let bytes = desk(ArchKind::Shallow).encode();
        match FcnModel::decode_expecting(&bytes, ArchKind::Deep) {
            Err(Error::ArchitectureMismatch { expected, found }) => {
                assert_eq!((expected, found), ("deep", "shallow"));
            }
            other => panic!("{other:?}"),
        }
        assert!(FcnModel::decode_expecting(&bytes, ArchKind::Shallow).is_ok());
    }

    #[test]
    fn zero_weights_give_denormalized_bias() {
        let mut m = desk(ArchKind::Shallow);
        let n = m.params.len();
        m.params = vec![0.0; n];
        m.params[n - 1] = 0.25;
        let out = m.infer(&tone(256)).unwrap();
        assert_eq!(out.len(), 512);
        let want = m.target_norm.invert(0.25f32 as f64);
        assert!(out.iter().all(|&v| v == want));
    }

    #[test]
    fn both_architectures_emit_full_profiles() {
        let x = tone(256);
        assert_eq!(desk(ArchKind::Shallow).infer(&x).unwrap().len(), 512);
        assert_eq!(desk(ArchKind::Deep).infer(&x).unwrap().len(), 512);
        assert!(desk(ArchKind::Deep).infer(&tone(100)).is_err());
    }

    #[test]
    fn mismatched_front_end_rejected() {
        let arch = FcnArchitecture::desk(ArchKind::Shallow);
        assert!(FcnModel::with_architecture(arch, Profile::Desk, StftConfig::desk_hop1(), 0).is_err());
    }

    #[test]
    fn normalization_maps_range() {
        let n = Normalization::from_range(-50.0, 30.0).unwrap();
        assert_eq!(n.apply(-50.0), 0.0);
        assert_eq!(n.apply(30.0), 1.0);
        assert!((n.invert(n.apply(12.5)) - 12.5).abs() < 1e-12);
        assert!(Normalization::from_range(1.0, f64::NAN).is_err());
        assert_eq!(Normalization::from_range(2.0, 2.0).unwrap().scale, 1.0);
    }
}
