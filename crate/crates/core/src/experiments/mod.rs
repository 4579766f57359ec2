//! End-to-end studies: identity suites, the stability sweep and exponent fits.

pub mod config;
pub mod fit;
pub mod sweep;
pub mod verify;

pub use config::{load, CutoffConfig, Fault, ForwardConfig, Suite, SweepConfig, VerifyConfig};
pub use fit::{fit_exponent, linear_fit, loglog_slope, ExponentFit};
pub use sweep::{read_rows_csv, run_sweep, write_rows_csv, SweepReport, SweepRow};
pub use verify::{run_verify, trace_growth_ratio, CheckResult, CheckStatus, VerifyReport};
