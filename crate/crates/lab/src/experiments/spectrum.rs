//! Spectrum dumps: all eigenvalues below the dense cap, the lowest block
//! above it.

use anderson_core::operators::{
    assemble, eigenvalues_only, extremal_eigs, Which, DEFAULT_DENSE_CAP,
};

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::experiment::{Experiment, LabError, RunContext};
use crate::experiments::record_for;
use crate::record::ResultRecord;

pub struct Spectrum;

impl Experiment for Spectrum {
    fn name(&self) -> &'static str {
        "spectrum"
    }

    fn describe(&self) -> &'static str {
        "eigenvalues of one sampled finite-volume Hamiltonian (CSV)"
    }

    fn run(&self, cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ResultRecord, LabError> {
        let ExperimentSpec::Spectrum {
            cube,
            potential,
            lowest,
        } = &cfg.spec
        else {
            return Err(LabError::Config("wrong spec kind".into()));
        };
        let cube = cube.to_core()?;
        let pot = potential.realize(&cube, cfg.seed)?;
        let h = assemble(&cube, &pot).map_err(LabError::from_core)?;
        let values = if h.dim() <= DEFAULT_DENSE_CAP {
            eigenvalues_only(&h, DEFAULT_DENSE_CAP).map_err(LabError::numeric)?
        } else {
            let count = lowest.unwrap_or(16).min(h.dim());
            extremal_eigs(&h, count, Which::Low)
                .map_err(LabError::numeric)?
                .values
        };
        let mut record = record_for(cfg);
        record.scalar("dim", h.dim() as f64);
        record.scalar("count", values.len() as f64);
        record.scalar("min", *values.last().unwrap_or(&f64::NAN));
        record.scalar("max", *values.first().unwrap_or(&f64::NAN));
        let rows: Vec<Vec<String>> = values
            .iter()
            .enumerate()
            .map(|(k, v)| vec![(k + 1).to_string(), format!("{v:.17e}")])
            .collect();
        record.write_table(&ctx.out_dir, "eigenvalues", &["k", "eigenvalue"], &rows)?;
        Ok(record)
    }
}
