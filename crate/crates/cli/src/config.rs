use std::fs;
use std::path::{Path, PathBuf};

use qfix::fixpoint::Method;
use qfix::QfixError;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::commands::Outcome;

pub const MAX_OPERATOR_DIM: usize = 256;
pub const MAX_SUPEROP_DIM: usize = 64;

/// Keys accepted in a `--config` file. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub allow_large: Option<bool>,
    pub method: Option<Method>,
    pub n: Option<usize>,
    pub tol: Option<f64>,
    pub epsilons: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub constraints: Option<PathBuf>,
    pub trials: Option<usize>,
    pub dim_max: Option<usize>,
}

pub struct Settings {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub allow_large: bool,
    pub file: FileConfig,
}

impl Settings {
    pub fn resolve(
        config: Option<&Path>,
        seed: Option<u64>,
        output: Option<PathBuf>,
        allow_large: bool,
    ) -> Result<Self, CliError> {
        let file: FileConfig = match config {
            Some(p) => load_json(p)?,
            None => FileConfig::default(),
        };
        let env_seed = match std::env::var("QFIX_SEED") {
            Ok(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Input(format!("QFIX_SEED is not a u64: {s:?}")))?,
            ),
            Err(_) => None,
        };
        Ok(Self {
            seed: seed.or(file.seed).or(env_seed).unwrap_or(0),
            output: output.or_else(|| file.output.clone()),
            allow_large: allow_large || file.allow_large.unwrap_or(false),
            file,
        })
    }

    pub fn check_operator_dim(&self, what: &str, dim: usize) -> Result<(), CliError> {
        self.check_cap(what, dim, MAX_OPERATOR_DIM)
    }

    pub fn check_superop_dim(&self, what: &str, dim: usize) -> Result<(), CliError> {
        self.check_cap(what, dim, MAX_SUPEROP_DIM)
    }

    fn check_cap(&self, what: &str, dim: usize, cap: usize) -> Result<(), CliError> {
        if !self.allow_large && dim > cap {
            return Err(CliError::Cap(format!(
                "{what} has dimension {dim}, above the cap of {cap} (pass --allow-large to override)"
            )));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input.
    Input(String),
    /// Dimension cap exceeded.
    Cap(String),
    /// A solver or computation failed on valid input.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Input(_) => 2,
            CliError::Cap(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Failure(_) => "failure",
            CliError::Input(_) => "malformed_input",
            CliError::Cap(_) => "dimension_cap",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Failure(m) | CliError::Input(m) | CliError::Cap(m) => m,
        }
    }

    pub fn diagnostic(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.message(),
            "exit_code": self.exit_code(),
            "version": qfix::VERSION,
        })
        .to_string()
    }

    /// Errors raised while computing on inputs that already parsed.
    pub fn computing(e: QfixError) -> Self {
        match e {
            QfixError::BasisTooLarge { .. } => CliError::Cap(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }

    /// Errors raised while interpreting input files.
    pub fn loading(e: QfixError) -> Self {
        match e {
            QfixError::BasisTooLarge { .. } => CliError::Cap(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        // basis enumeration failures surface through serde as custom errors
        let msg = format!("{}: {e}", path.display());
        if msg.contains("basis exceeds") {
            CliError::Cap(msg)
        } else {
            CliError::Input(msg)
        }
    })
}

pub fn emit(settings: &Settings, outcome: &Outcome) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| CliError::Failure(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    match &settings.output {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(CliError::Input(format!("{name} must be positive and finite, got {x}")))
    }
}
