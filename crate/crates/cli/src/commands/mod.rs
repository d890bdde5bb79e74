//! One module per subcommand. Each returns the process exit code on
//! success; argument and configuration problems bubble as errors and exit 1.

pub mod fixtures;
pub mod run;
pub mod score;
pub mod validate;
