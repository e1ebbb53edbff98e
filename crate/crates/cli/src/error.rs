//! Process-level error type. Every failure carries an exit class so
//! scripts can branch on configuration vs. data vs. numeric problems.

use std::fmt;

use icelayer_core::CoreError;

/// Exit code classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// Anything uncategorized.
    Other,
    /// Bad flags, bad config keys or values.
    Config,
    /// Missing, unreadable, or malformed input files.
    Data,
    /// NaN/Inf during training or evaluation.
    Numeric,
}

impl Class {
    pub fn code(self) -> i32 {
        match self {
            Class::Other => 1,
            Class::Config => 2,
            Class::Data => 3,
            Class::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct AppError {
    pub class: Class,
    msg: String,
}

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError { class: Class::Config, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        AppError { class: Class::Data, msg: msg.into() }
    }

    pub fn other(msg: impl Into<String>) -> Self {
        AppError { class: Class::Other, msg: msg.into() }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

/// Exit class for a core error. Numeric failures keep their own code no
/// matter where they surface; file-shaped errors are data errors; the rest
/// take the phase default supplied by the call site.
fn classify(e: &CoreError, default: Class) -> Class {
    match e {
        CoreError::Numeric(_) => Class::Numeric,
        CoreError::Io(_)
        | CoreError::Corrupt(_)
        | CoreError::VersionMismatch { .. }
        | CoreError::MalformedRecord(_)
        | CoreError::IncompleteLayer(_) => Class::Data,
        _ => default,
    }
}

/// Attach an exit class to core results at the call site.
pub trait IntoAppResult<T> {
    /// Phase default: configuration error.
    fn or_config(self) -> Result<T, AppError>;
    /// Phase default: data error.
    fn or_data(self) -> Result<T, AppError>;
    /// Phase default: generic failure.
    fn or_other(self) -> Result<T, AppError>;
}

impl<T> IntoAppResult<T> for Result<T, CoreError> {
    fn or_config(self) -> Result<T, AppError> {
        self.map_err(|e| AppError { class: classify(&e, Class::Config), msg: e.to_string() })
    }

    fn or_data(self) -> Result<T, AppError> {
        self.map_err(|e| AppError { class: classify(&e, Class::Data), msg: e.to_string() })
    }

    fn or_other(self) -> Result<T, AppError> {
        self.map_err(|e| AppError { class: classify(&e, Class::Other), msg: e.to_string() })
    }
}
