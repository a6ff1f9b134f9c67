//! Scenario runner: loads configurations, drives the core pipeline and
//! writes plot-ready artifacts.

pub mod commands;
pub mod config;

use fris_core::FrisError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONDITIONING: i32 = 3;

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<FrisError>() {
            return match f {
                FrisError::Config(_) => EXIT_CONFIG,
                FrisError::Conditioning(_) | FrisError::DegenerateChannel(_) | FrisError::Quadrature { .. } => {
                    EXIT_CONDITIONING
                }
                _ => EXIT_FAILURE,
            };
        }
    }
    EXIT_FAILURE
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_the_root_cause() {
        let cfg: anyhow::Result<()> = Err(FrisError::Config("x".into())).context("loading");
        assert_eq!(exit_code(&cfg.unwrap_err()), EXIT_CONFIG);
        let cond = anyhow::Error::from(FrisError::Conditioning("drift".into()));
        assert_eq!(exit_code(&cond), EXIT_CONDITIONING);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_FAILURE);
    }
}
