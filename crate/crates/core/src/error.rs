use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("shape mismatch in {what}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("target at {distance_m} m has beat frequency {beat_hz} Hz outside [0, {fs_hz}) Hz")]
    BeatOutOfBand {
        distance_m: f64,
        beat_hz: f64,
        fs_hz: f64,
    },

    #[error("empty label: at least one target is required")]
    EmptyLabel,

    #[error("label bin {bin} out of range for a {len}-bin profile")]
    LabelOutOfRange { bin: usize, len: usize },

    #[error("backward called without a cached forward pass")]
    NoForwardCache,

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("architecture mismatch: model is {found}, expected {expected}")]
    ArchitectureMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("corrupt {what}: {reason}")]
    Corrupt { what: &'static str, reason: String },

    #[error("unsupported {what} version {found} (supported: {supported})")]
    UnsupportedVersion {
        what: &'static str,
        found: u16,
        supported: u16,
    },

    #[error("sample {sample_id}: {reason}")]
    Sample { sample_id: u64, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
