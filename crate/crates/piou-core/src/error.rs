use thiserror::Error;

/// Errors shared by all toolkit modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: width={width}, height={height} (both sides must be positive and finite)")]
    InvalidBox { width: f64, height: f64 },

    #[error("point ({x}, {y}) lies outside the closed box")]
    OutOfBox { x: f64, y: f64 },

    #[error("invalid parameter `{name}` = {value} (expected {expected})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid label {value} (expected 0 or 1)")]
    InvalidLabel { value: u8 },

    #[error("invalid prediction: component `{name}` = {value} must be strictly positive")]
    InvalidPrediction { name: &'static str, value: f64 },

    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },

    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },

    #[error("inconsistent data: {reason}")]
    Inconsistent { reason: String },

    #[error("JSON parse error: {source}")]
    Json {
        #[from]
        source: serde_json::Error,
    },

    #[error("XML parse error: {source}")]
    Xml {
        #[from]
        source: roxmltree::Error,
    },

    #[error("annotation schema error in {context}: {reason}")]
    Schema { context: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
