//! Exit codes and the error JSON written to stderr.

use serde::Serialize;
use wsrot::WsError;

pub const EXIT_FAILED_CHECKS: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NO_FIXED_POINT: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub exit_code: i32,
}

impl Failure {
    pub fn config(message: String, path: Option<String>) -> Self {
        Failure {
            error: "config".into(),
            message,
            path,
            exit_code: EXIT_VALIDATION,
        }
    }

    /// Rejected input, found before any numerical work.
    pub fn invalid(e: WsError) -> Self {
        Failure {
            error: e.kind().into(),
            message: e.to_string(),
            path: None,
            exit_code: EXIT_VALIDATION,
        }
    }

    pub fn numerical(e: WsError) -> Self {
        let exit_code = match e {
            WsError::NoFixedPoint { .. } | WsError::Boundary { .. } => EXIT_NO_FIXED_POINT,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            error: e.kind().into(),
            message: e.to_string(),
            path: None,
            exit_code,
        }
    }

    pub fn io(e: std::io::Error) -> Self {
        Failure {
            error: "io".into(),
            message: e.to_string(),
            path: None,
            exit_code: EXIT_NUMERICAL,
        }
    }

    pub fn checks(message: String) -> Self {
        Failure {
            error: "checks_failed".into(),
            message,
            path: None,
            exit_code: EXIT_FAILED_CHECKS,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::io(e)
    }
}
