use thiserror::Error;

use crate::corpus::CorpusError;
use crate::encoder::EncoderError;
use crate::fusion::FusionError;
use crate::kge::KgeError;
use crate::kgstore::KgError;

/// Pipeline failure, classified by process exit code.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Numeric(_) => 4,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        PipelineError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Config(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<KgError> for PipelineError {
    fn from(e: KgError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<KgeError> for PipelineError {
    fn from(e: KgeError) -> Self {
        match e {
            KgeError::Config(_) => PipelineError::Config(e.to_string()),
            KgeError::Divergence { .. } => PipelineError::Numeric(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<EncoderError> for PipelineError {
    fn from(e: EncoderError) -> Self {
        match e {
            EncoderError::Config(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<FusionError> for PipelineError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Config(_) => PipelineError::Config(e.to_string()),
            FusionError::Divergence { .. } => PipelineError::Numeric(e.to_string()),
            FusionError::Encoder(inner) => inner.into(),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let div: PipelineError = KgeError::Divergence {
            epoch: 3,
            detail: "nan".into(),
        }
        .into();
        assert_eq!(div.exit_code(), 4);
        let cfg: PipelineError = FusionError::Config("x".into()).into();
        assert_eq!(cfg.exit_code(), 2);
        let data: PipelineError =
            FusionError::Encoder(EncoderError::MissingEmbedding { id: "d".into() }).into();
        assert_eq!(data.exit_code(), 3);
    }
}
