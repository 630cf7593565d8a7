//! Exhaustive cone-descent verification over eigenpairs of sampled
//! instances: every apex, axis, sign, and layer depth up to the cap.

use anderson_core::lattice::{cone_layer, ConeSpec};
use anderson_core::operators::{assemble, extremal_eigs, Which};
use anderson_core::rng;
use anderson_core::wegner::cone_descent;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::experiment::{Experiment, LabError, RunContext};
use crate::experiments::record_for;
use crate::record::ResultRecord;

pub struct ConeCheck;

/// Checks for one realization; returns (checks, failures).
pub fn realization_cone_checks(
    field: &anderson_core::ensembles::PotentialField,
    cube: &anderson_core::lattice::Cube,
    eigenpairs: usize,
    k_max: i64,
    seed: u64,
) -> Result<(usize, usize), LabError> {
    let pot =
        anderson_core::ensembles::sample_potential(field, cube, seed).map_err(LabError::from_core)?;
    let h = assemble(cube, &pot).map_err(LabError::from_core)?;
    let k_bound = 12.0 + field.m_bound();
    let eig = extremal_eigs(&h, eigenpairs.min(h.dim()), Which::Low).map_err(LabError::numeric)?;
    let mut checks = 0usize;
    let mut failures = 0usize;
    for col in 0..eig.len() {
        let u: Vec<f64> = eig.vectors.column(col).iter().copied().collect();
        for apex in cube.sites() {
            for axis in 0..3usize {
                for sign in [-1i64, 1] {
                    for k in 1..=k_max {
                        let spec = ConeSpec::new(apex, axis, sign).map_err(LabError::from_core)?;
                        if cone_layer(&spec, k, cube).is_empty() {
                            continue;
                        }
                        let d = cone_descent(&u, cube, k_bound, &apex, axis, sign, k)
                            .map_err(LabError::from_core)?;
                        checks += 1;
                        failures += usize::from(!d.satisfied);
                    }
                }
            }
        }
    }
    Ok((checks, failures))
}

impl Experiment for ConeCheck {
    fn name(&self) -> &'static str {
        "cone-check"
    }

    fn describe(&self) -> &'static str {
        "cone-descent existence over all apexes, directions, and depths"
    }

    fn run(&self, cfg: &ExperimentConfig, _ctx: &RunContext) -> Result<ResultRecord, LabError> {
        let ExperimentSpec::ConeCheck {
            cube,
            potential,
            eigenpairs,
            k_max,
            realizations,
        } = &cfg.spec
        else {
            return Err(LabError::Config("wrong spec kind".into()));
        };
        if *realizations == 0 || *eigenpairs == 0 || *k_max < 1 {
            return Err(LabError::Config(
                "realizations, eigenpairs, k_max must be positive".into(),
            ));
        }
        let cube = cube.to_core()?;
        let field = potential.field()?;
        let per: Result<Vec<(usize, usize)>, LabError> = (0..*realizations as u64)
            .into_par_iter()
            .map(|t| {
                realization_cone_checks(
                    &field,
                    &cube,
                    *eigenpairs,
                    *k_max,
                    rng::substream(cfg.seed, t),
                )
            })
            .collect();
        let per = per?;
        let checks: usize = per.iter().map(|p| p.0).sum();
        let failures: usize = per.iter().map(|p| p.1).sum();
        let mut record = record_for(cfg);
        record.scalar("checks", checks as f64);
        record.scalar("failures", failures as f64);
        record.scalar(
            "success_rate",
            if checks == 0 {
                f64::NAN
            } else {
                1.0 - failures as f64 / checks as f64
            },
        );
        if failures > 0 {
            record.finding(format!(
                "cone descent failed {failures} of {checks} checks"
            ));
        }
        Ok(record)
    }
}
