use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("point ({x}, {y}) lies outside the grid [{x_min}, {x_max}) x [{y_min}, {y_max})")]
    OutOfBounds {
        x: f64,
        y: f64,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },

    #[error("cell index ({j}, {k}) outside {nx}x{ny} grid")]
    IndexOutOfRange { j: usize, k: usize, nx: usize, ny: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("duplicate id {id} in frame {frame}")]
    DuplicateId { id: u64, frame: usize },

    #[error("frame {got} presented after frame {last}; frames must be strictly increasing")]
    FrameOrder { last: usize, got: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("stride mismatch: expected {expected}, got {got}")]
    StrideMismatch { expected: u32, got: u32 },

    #[error("stride {0} cannot be doubled further (maximum stride is 8)")]
    StrideOverflow(u32),

    #[error("infeasible scene: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
