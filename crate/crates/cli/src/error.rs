//! One error shape for the whole CLI: a machine-parsable category plus a
//! human message. Module errors exit 1; configuration errors exit 2.

use c2t_core::{anomaly, codec, dataset, evaluation, geometry, model, synth};

#[derive(Debug)]
pub struct CliError {
    pub category: String,
    pub message: String,
    pub exit_code: u8,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            category: "cli/ConfigError".into(),
            message: message.into(),
            exit_code: 2,
        }
    }

    pub fn io(message: impl std::fmt::Display) -> Self {
        Self {
            category: "cli/IoError".into(),
            message: message.to_string(),
            exit_code: 1,
        }
    }

    fn module(category: &str, message: impl std::fmt::Display) -> Self {
        Self {
            category: category.into(),
            message: message.to_string(),
            exit_code: 1,
        }
    }
}

impl From<geometry::GeometryError> for CliError {
    fn from(e: geometry::GeometryError) -> Self {
        Self::module(e.category(), e)
    }
}

impl From<codec::CodecError> for CliError {
    fn from(e: codec::CodecError) -> Self {
        Self::module(e.category(), e)
    }
}

impl From<dataset::DatasetError> for CliError {
    fn from(e: dataset::DatasetError) -> Self {
        Self::module(e.category(), e)
    }
}

impl From<model::ModelError> for CliError {
    fn from(e: model::ModelError) -> Self {
        Self::module(e.category(), e)
    }
}

impl From<anomaly::AnomalyError> for CliError {
    fn from(e: anomaly::AnomalyError) -> Self {
        Self::module(e.category(), e)
    }
}

impl From<evaluation::EvalError> for CliError {
    fn from(e: evaluation::EvalError) -> Self {
        Self::module(e.category(), e)
    }
}

impl From<synth::SynthError> for CliError {
    fn from(e: synth::SynthError) -> Self {
        Self::module(e.category(), e)
    }
}
