use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// H dropped to zero or below at some node; the flow cannot continue.
    #[error("mean convexity lost at node {node} (theta = {theta:.6}) at t = {t:.6}: H = {h:e}")]
    MeanConvexityLost { node: usize, theta: f64, t: f64, h: f64 },

    /// The initial profile is not mean convex; the flow is refused before it starts.
    #[error("initial profile is not mean convex (min H = {min_h:e}) at theta = {thetas:?}")]
    NotMeanConvex { thetas: Vec<f64>, min_h: f64 },

    #[error("time step underflow at t = {t:.6}: dt = {dt:e}")]
    Stiffness { t: f64, dt: f64 },

    /// Two independent evaluation routes of the same quantity disagree.
    #[error("cross-check failed for {quantity} at node {node}: {first} vs {second}")]
    CrossCheck { quantity: &'static str, node: usize, first: f64, second: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
