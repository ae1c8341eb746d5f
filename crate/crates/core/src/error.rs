use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("degenerate reference antenna: zero magnitude at subcarrier {subcarrier}")]
    DegenerateReference { subcarrier: usize },

    #[error("model order selection failed: {0}")]
    OrderSelection(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("point coincides with a focus of link {link}; boundary normal undefined")]
    FocusSingularity { link: u32 },

    #[error("underdetermined: {constraints} constraint(s), need at least 2")]
    Underdetermined { constraints: usize },

    #[error("no motion: all link fluctuation variances are zero")]
    NoMotion,

    #[error("unknown preset scenario `{0}`")]
    UnknownPreset(String),

    #[error("budget infeasible for {requested} link(s); max feasible is {max_feasible}")]
    Infeasible { requested: u32, max_feasible: u32 },

    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch}, first seen in layer {layer}")]
    NanLoss {
        epoch: usize,
        batch: usize,
        layer: String,
    },

    #[error("request timed out after {elapsed_s:.3} s (budget {budget_s:.3} s)")]
    Timeout { elapsed_s: f64, budget_s: f64 },

    #[error("service returned {status}: {body_excerpt}")]
    Service { status: u16, body_excerpt: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("malformed {format} data: {detail}")]
    Format { format: String, detail: String },

    #[error("pipeline stage `{stage}` failed at frame {frame}: {source}")]
    Stage {
        stage: String,
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage and frame index it occurred in.
    pub fn at_stage(self, stage: &str, frame: usize) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            frame,
            source: Box::new(self),
        }
    }

    /// True for configuration/IO problems (CLI exit code 2), false for
    /// runtime stage failures (exit code 1).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::UnknownPreset(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Format { .. } => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
