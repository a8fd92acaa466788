use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: negative measurement in column `{column}` ({value})")]
    NegativeMeasurement { row: usize, column: &'static str, value: f64 },

    #[error("row {row}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { row: usize, timestamp: String },

    #[error("row {row}: gap in measurements ({missing} step(s) missing before {timestamp})")]
    Gap { row: usize, missing: i64, timestamp: String },

    #[error("row {row}: timestamps not strictly increasing ({timestamp})")]
    OutOfOrder { row: usize, timestamp: String },

    #[error("row {row}: spacing of {found_secs} s does not match the {expected_secs} s step")]
    NonUniformSpacing { row: usize, expected_secs: i64, found_secs: i64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("degenerate scenario: total consumption is zero, self-sufficiency undefined")]
    DegenerateScenario,

    #[error("invalid tariff: {0}")]
    InvalidTariff(String),

    #[error("invalid PPC schedule: {0}")]
    InvalidPpc(String),

    #[error("invalid battery `{name}`: {message}")]
    InvalidBattery { name: String, message: String },

    #[error("ramp bound violated: |x| = {x} kWh exceeds the per-step limit [{lo}, {hi}]")]
    RampViolation { x: f64, lo: f64, hi: f64 },

    #[error("invalid linear program: {0}")]
    InvalidLp(String),

    #[error("dispatch infeasible at step {step}: {reason}")]
    Infeasible { step: usize, reason: String },

    #[error("baseline peak of {peak_kw:.3} kW exceeds every PPC level")]
    PeakAboveContracts { peak_kw: f64 },

    #[error("LP solver failed: {0}")]
    Solver(String),

    #[error("oracle refused: {0}")]
    OracleRefused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}
