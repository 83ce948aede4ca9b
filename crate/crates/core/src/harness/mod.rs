//! Campaign configuration, execution and output files.

pub mod campaign;
pub mod config;
pub mod output;

pub use campaign::{run_campaign, CampaignOutcome};
pub use config::{load_config, CampaignConfig, Emit, FitWidth, Mode};
pub use output::{emit_curve_csv, emit_summary_json, read_curve_csv, RunManifest};
