use std::fmt;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// An error message paired with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, msg: msg.into() }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, msg: msg.into() }
    }

    /// Prefixes the message with what was being done.
    pub fn context(self, what: impl fmt::Display) -> Self {
        Self { code: self.code, msg: format!("{what}: {}", self.msg) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<rrid::Error> for CliError {
    fn from(e: rrid::Error) -> Self {
        use rrid::Error as E;
        let code = match &e {
            E::Config(_) | E::Shape { .. } | E::Synth(_) | E::Json(_) => EXIT_USAGE,
            E::Dataset(_) | E::Format(_) | E::Image { .. } | E::Io(_) => EXIT_DATA,
            E::NonFinite(_) | E::Tape(_) => EXIT_NUMERIC,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
