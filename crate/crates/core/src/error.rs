use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid device id {0:?}")]
    InvalidDeviceId(String),
    #[error("unsupported bandwidth {0} MHz")]
    UnsupportedBandwidth(u32),
    #[error("frame has {0} subcarriers, expected a supported FFT size (64, 128 or 256)")]
    InvalidFftSize(usize),
    #[error("frames mix FFT sizes {expected} and {found}")]
    MixedFftSize { expected: usize, found: usize },
    #[error("invalid timestamp {0}")]
    InvalidTimestamp(f64),
    #[error("invalid subcarrier set: {0}")]
    InvalidSubcarrierSet(&'static str),
    #[error("subcarrier index {index} out of range for FFT size {fft_size}")]
    SubcarrierOutOfRange { index: i16, fft_size: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("no frames left after device filtering")]
    NoFrames,
    #[error("aggregation requires an outlier-filtered matrix")]
    Unfiltered,
    #[error("invalid interval [{0}, {1})")]
    InvalidInterval(f64, f64),
    #[error("length mismatch: {0} predictions against {1} labels")]
    LengthMismatch(usize, usize),
    #[error("ground truth contains a single class; ROC/AUC undefined")]
    SingleClass,
    #[error("registry: {0}")]
    Registry(String),
    #[error("container: {0}")]
    Container(&'static str),
    #[error("container version {0} not supported")]
    ContainerVersion(u8),
    #[error("quantization bits {0} outside [1, 16]")]
    BitsOutOfRange(u8),
    #[error("stage {0} outside 1..=4")]
    InvalidStage(u8),
    #[error("stage {stage} cannot take {input} input")]
    StageMismatch { stage: u8, input: &'static str },
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
}
