use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Rejected command line; `text` is clap's rendering with usage.
    #[error("{message}")]
    Usage { text: String, message: String },

    #[error("config: {0}")]
    Config(String),

    /// A parameter outside its module's preconditions.
    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] ringwave::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    /// Short stable tag for the `kind` field of the error line.
    pub fn kind(&self) -> &'static str {
        use ringwave::Error as E;
        match self {
            CliError::Usage { .. } => "usage",
            CliError::Config(_) => "config",
            CliError::Invalid(_) => "invalid",
            CliError::Json(_) => "json",
            CliError::Core(e) => match e {
                E::Domain(_) => "domain",
                E::Singular { .. } => "singular",
                E::NonFinite(_) => "non-finite",
                E::GridMismatch(_) => "grid-mismatch",
                E::Format(_) => "format",
                E::Io(_) => "io",
                E::SupportOverflow(_) => "support-overflow",
                E::Infeasible(_) => "infeasible",
                E::Resolution(_) => "resolution",
                E::Cfl { .. } => "cfl",
                E::NotConverged { .. } => "not-converged",
                E::EnergyDecrease { .. } => "energy-decrease",
            },
        }
    }

    /// One-line JSON record for stderr.
    pub fn line(&self) -> String {
        let msg = self.to_string();
        let msg = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
        let msg = msg.strip_prefix("error: ").unwrap_or(msg);
        serde_json::json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": msg }).to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(ringwave::Error::Io(e))
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}
