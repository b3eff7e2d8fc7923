//! Scenario driver for the lattice evolution core and the 4d short-distance
//! expansion: parses structured-text configs, orchestrates the solver modules,
//! and writes machine-readable artifacts.
//!
//! * [`config`] — the TOML scenario schema (`key = value` blocks, unknown keys
//!   rejected) with call-syntax values for tagged choices;
//! * [`scenario`] — turns a parsed scenario into module objects and executes
//!   the requested mode (switched window, always-on with corrected data, or a
//!   restart stitched from reconstructed per-order data);
//! * [`report`] — the versioned run report: config echo with snapped times,
//!   invariant drift, per-order residual norms, coupling-scaling fits, restart
//!   equivalence, and wall-clock timings;
//! * [`outputs`] — long-format CSV writers for the field and two-point tables
//!   and the JSON coefficient-table exporter.
//!
//! The binary (`semilat`) maps failures to the exit-code contract: parse
//! failures exit 2, validation failures 3, numerical blow-up 4, each with a
//! one-line `ERROR: <class>: <reason>` on the diagnostic stream.

pub mod config;
pub mod outputs;
pub mod report;
pub mod scenario;

/// Failure classes of the driver, ordered by their exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed configuration (exit 2).
    Parse(String),
    /// Well-formed configuration rejected by a module constructor, or an I/O
    /// failure while reading inputs or writing artifacts (exit 3).
    Validation(String),
    /// The explicit time integration exceeded its blow-up guard (exit 4).
    Blowup(String),
}

impl CliError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Blowup(_) => 4,
        }
    }

    /// Stable class token used in the diagnostic-stream line.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Validation(_) => "validation",
            CliError::Blowup(_) => "blow-up",
        }
    }

    /// The reason, guaranteed single-line.
    pub fn reason(&self) -> String {
        let (CliError::Parse(m) | CliError::Validation(m) | CliError::Blowup(m)) = self;
        config::one_line(m)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.class(), self.reason())
    }
}

impl std::error::Error for CliError {}

impl From<semilat_core::Error> for CliError {
    fn from(e: semilat_core::Error) -> Self {
        match e {
            semilat_core::Error::Blowup(m) => CliError::Blowup(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<semilat_hadamard::Error> for CliError {
    fn from(e: semilat_hadamard::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {e}"))
    }
}

/// Result alias for the driver.
pub type Result<T> = std::result::Result<T, CliError>;
