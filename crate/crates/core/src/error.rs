use thiserror::Error;

/// Errors raised by the core primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("timestamps out of order: issued {issued}, started {started}, completed {completed:?}")]
    TimestampOrder {
        issued: u64,
        started: u64,
        completed: Option<u64>,
    },
    #[error("deadline {deadline} precedes start {started}")]
    DeadlineBeforeStart { deadline: u64, started: u64 },
    #[error("linear timeliness needs deadline > start (start {start}, deadline {deadline})")]
    DegenerateWindow { start: u64, deadline: u64 },
    #[error("duplicate rating event {0}")]
    DuplicateEvent(u64),
    #[error("negative queue length after update")]
    NegativeQueue,
    #[error("served {served} exceeds backlog {backlog}")]
    OverServed { served: u64, backlog: u64 },
    #[error("parameter `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("latency function is decreasing on connection {0}")]
    DecreasingLatency(usize),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("csv export failed: {0}")]
    Csv(String),
}

impl From<csv::Error> for CoreError {
    fn from(e: csv::Error) -> Self {
        CoreError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
