//! Experiment orchestration and result emission for the path-dependent
//! McKean-Vlasov toolkit: config ingestion, the six subcommand runners, and
//! deterministic CSV/JSON output.

pub mod experiments;
pub mod output;

pub use experiments::RunStatus;
