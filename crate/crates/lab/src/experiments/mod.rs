//! One module per registered experiment strategy.

pub mod annulus;
pub mod combine;
pub mod cone_check;
pub mod decompose;
pub mod dynloc;
pub mod lifshitz;
pub mod msa_plan;
pub mod spectrum;
pub mod sperner;
pub mod wegner_mc;

use crate::config::ExperimentConfig;
use crate::record::ResultRecord;

/// Fresh record pre-stamped with the config echo and fingerprint.
pub(crate) fn record_for(cfg: &ExperimentConfig) -> ResultRecord {
    ResultRecord::new(
        cfg.spec.kind_name(),
        cfg.seed,
        cfg.fingerprint(),
        serde_json::to_value(cfg).expect("config serializes"),
    )
}
