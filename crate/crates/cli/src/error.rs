use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", config_message(.line, .message))]
    Config {
        line: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] hamq_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Runtime(String),
}

fn config_message(line: &Option<usize>, message: &str) -> String {
    match line {
        Some(n) => format!("config error at line {n}: {message}"),
        None => format!("config error: {message}"),
    }
}

impl CliError {
    /// Process exit status: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            _ => 2,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
