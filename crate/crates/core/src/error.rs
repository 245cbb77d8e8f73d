use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::Shape;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // Container format.
    #[error("bad magic")]
    BadMagic,
    #[error("version mismatch: expected format version 1, found byte {0:#04x}")]
    VersionMismatch(u8),
    #[error("unknown container kind {0}")]
    UnknownKind(u8),
    #[error("truncated payload")]
    TruncatedPayload,
    #[error("dimension overflow")]
    DimensionOverflow,
    #[error("invalid dimensions {0}: every dimension must be positive")]
    ZeroDimension(Shape),
    #[error("NaN or infinite value at element {index}")]
    NonFinite { index: usize },
    #[error("value at element {index} does not fit in a 32-bit float")]
    F32Overflow { index: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid presence bitmap {0:#010b}")]
    InvalidPresence(u8),
    #[error("invalid metadata: {0}")]
    BadMetadata(String),
    #[error("records out of order: expected step_index {expected}, found {found}")]
    StepOrder { expected: usize, found: usize },
    #[error("expected a {expected} container, found a {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },

    // Tensors and spectra.
    #[error("data length {found} does not match {shape} = {expected}")]
    DataLength {
        shape: Shape,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("mask is {mask_h}x{mask_w} but the field is {field_h}x{field_w}")]
    MaskMismatch {
        mask_h: usize,
        mask_w: usize,
        field_h: usize,
        field_w: usize,
    },
    #[error("non-negligible imaginary residue {residue:e} (threshold {threshold:e})")]
    ImaginaryResidue { residue: f64, threshold: f64 },

    // Cutoffs and schedules.
    #[error("cutoff ratio r0 = {0} outside [0, 1]")]
    InvalidRatio(f64),
    #[error("cutoff radius {0} must be finite and non-negative")]
    InvalidRadius(f64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule step {step} outside [0, {total})")]
    ScheduleStep { step: usize, total: usize },

    // Guidance.
    #[error("invalid guidance config: {0}")]
    InvalidGuidance(String),
    #[error("missing branch: {0}")]
    MissingBranch(&'static str),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    // Toy diffusion.
    #[error("invalid noise schedule: {0}")]
    InvalidNoiseSchedule(String),
    #[error("alpha_bar = {0} is outside (0, 1); the noise prediction is degenerate there")]
    DegenerateAlphaBar(f64),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("condition label {0:?} selects no mixture component")]
    EmptyCondition(String),

    // Diagnostics.
    #[error("undefined relative reference: DC bucket has zero amplitude")]
    UndefinedReference,
    #[error("all-zero spectrum")]
    ZeroSpectrum,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn at_step(step: usize, err: Error) -> Self {
        Error::AtStep {
            step,
            source: Box::new(err),
        }
    }

    /// The innermost error, with any per-step context peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
