use serde::Serialize;

use mrl_core::inference::InferenceError;
use mrl_core::sim::SimError;
use mrl_core::{KmError, MrlError, SampleError, SmootherError};

/// Failure of one invocation. Printed to stderr as a single JSON line.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data { message: String, pointer: Option<String> },
    Numeric { message: String, t: Vec<f64> },
}

#[derive(Serialize)]
struct Line<'a> {
    error: &'a str,
    code: i32,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pointer: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<&'a [f64]>,
}

impl CliError {
    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data { message: message.into(), pointer: None }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError::Numeric { message: message.into(), t: Vec::new() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Numeric { .. } => 4,
        }
    }

    pub fn to_line(&self) -> String {
        let line = match self {
            CliError::Usage(m) => Line { error: "usage", code: 2, message: m, pointer: None, t: None },
            CliError::Data { message, pointer } => Line {
                error: "data",
                code: 3,
                message,
                pointer: pointer.as_deref(),
                t: None,
            },
            CliError::Numeric { message, t } => Line {
                error: "numeric",
                code: 4,
                message,
                pointer: None,
                t: (!t.is_empty()).then_some(t.as_slice()),
            },
        };
        serde_json::to_string(&line).expect("error line serializes")
    }
}

impl From<SampleError> for CliError {
    fn from(e: SampleError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<KmError> for CliError {
    fn from(e: KmError) -> Self {
        match e {
            KmError::AllCensored => CliError::data(e.to_string()),
            _ => CliError::numeric(e.to_string()),
        }
    }
}

impl From<SmootherError> for CliError {
    fn from(e: SmootherError) -> Self {
        match e {
            SmootherError::InvalidLambda(_) | SmootherError::InvalidTailEpsilon(_) => CliError::Usage(e.to_string()),
            SmootherError::InvalidPoint(t) => CliError::Numeric { message: e.to_string(), t: vec![t] },
            _ => CliError::numeric(e.to_string()),
        }
    }
}

impl From<MrlError> for CliError {
    fn from(e: MrlError) -> Self {
        match e {
            MrlError::Smoother(inner) => inner.into(),
            MrlError::DomainExceeded(t) | MrlError::DegenerateDenominator(t) => {
                CliError::Numeric { message: e.to_string(), t: vec![t] }
            }
            MrlError::EmptyLambdaList => CliError::Usage(e.to_string()),
            _ => CliError::numeric(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::DomainExceeded(t) | InferenceError::TailDivergence(t) => {
                CliError::Numeric { message: e.to_string(), t: vec![t] }
            }
            InferenceError::InvalidAlpha(_) => CliError::Usage(e.to_string()),
            InferenceError::Km(inner) => inner.into(),
            _ => CliError::numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(_) | SimError::Law(_) => CliError::data(e.to_string()),
            SimError::Io(_) => CliError::data(e.to_string()),
            SimError::ThreadPool(_) => CliError::numeric(e.to_string()),
        }
    }
}
