use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("{}: checksum mismatch (manifest {expected}, file {actual})", path.display())]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("sample {sample_id} not in dataset (ids 0..{total})")]
    UnknownSample { sample_id: u64, total: u64 },

    #[error("{}: {source}", path.display())]
    Core {
        path: PathBuf,
        #[source]
        source: arim_core::Error,
    },

    #[error(transparent)]
    Compute(#[from] arim_core::Error),
}

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

pub(crate) fn core_at(path: impl Into<PathBuf>) -> impl FnOnce(arim_core::Error) -> Error {
    let path = path.into();
    move |source| Error::Core { path, source }
}

pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.into(),
        reason: reason.into(),
    }
}
