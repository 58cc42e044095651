//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// GOP structure violation (bad intra period, partial GOP, ...).
    #[error("schedule error: {0}")]
    Schedule(String),

    /// Tensor shape inconsistency.
    #[error("shape error: {0}")]
    Shape(String),

    /// Dataset problems (missing clips, short clips, unreadable frames).
    #[error("data error: {0}")]
    Data(String),

    /// Training diverged (non-finite loss three steps in a row).
    #[error("training aborted: {0}")]
    Training(String),

    /// Malformed or corrupted bitstream container.
    #[error("container error: {0}")]
    Container(String),

    /// Substream payload failed its checksum.
    #[error("checksum mismatch in frame {frame}")]
    Checksum { frame: usize },

    /// Bitstream was produced by a different model checkpoint.
    #[error("model hash mismatch: container {container:016x}, checkpoint {checkpoint:016x}")]
    HashMismatch { container: u64, checkpoint: u64 },

    /// Corrupt or truncated range-coder substream.
    #[error("entropy decode error: {0}")]
    EntropyDecode(String),

    /// Malformed checkpoint file.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
