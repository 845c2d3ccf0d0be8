use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("failed to parse configuration: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Positive payload over a zero-rate link.
    #[error("vehicle {vehicle}: zero uplink rate with {bits} bits to offload")]
    DegenerateAllocation { vehicle: usize, bits: f64 },

    #[error("vehicle {vehicle}: zero downlink rate with {bits} bits to return")]
    DegenerateDownlink { vehicle: usize, bits: f64 },

    /// Local bits remain but there is no time (or no frequency) to process them.
    #[error("vehicle {vehicle}: {bits} local bits cannot be processed in zero time")]
    InfeasibleLocalCompute { vehicle: usize, bits: f64 },

    #[error("required CPU frequency {required:e} Hz exceeds f_max = {f_max:e} Hz")]
    FrequencyBound { required: f64, f_max: f64 },

    #[error("no strictly feasible starting point found (best max-constraint {max_violation:e})")]
    InfeasibleStart { max_violation: f64 },

    #[error("invalid sweep specification: {0}")]
    InvalidSweep(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
