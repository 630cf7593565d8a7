//! Desk-scale dynamical-localization probe: the gridded supremum of the
//! weighted-moment norm of the spectrally filtered evolution, averaged over
//! disorder realizations.

use anderson_core::operators::{assemble, dynloc_moment, extremal_eigs, Which};
use anderson_core::rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::experiment::{Experiment, LabError, RunContext};
use crate::experiments::record_for;
use crate::record::ResultRecord;

pub struct Dynloc;

/// Time grid: uniform plus seeded random times, as one sorted list.
pub fn time_grid(horizon: f64, points: usize, random: usize, seed: u64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..points)
        .map(|i| horizon * i as f64 / (points.max(2) - 1) as f64)
        .collect();
    let mut stream = rng::Stream::new(rng::substream(seed, 0x7135));
    times.extend((0..random).map(|_| horizon * stream.next_unit()));
    times
}

/// One realization of the gridded sup-moment.
pub fn realization_moment(
    field: &anderson_core::ensembles::PotentialField,
    cube: &anderson_core::lattice::Cube,
    e0: f64,
    b: f64,
    s: f64,
    times: &[f64],
    seed: u64,
) -> Result<f64, LabError> {
    let pot =
        anderson_core::ensembles::sample_potential(field, cube, seed).map_err(LabError::from_core)?;
    let h = assemble(cube, &pot).map_err(LabError::from_core)?;
    // lowest block large enough to bracket the spectral window
    let mut count = 16.min(h.dim());
    loop {
        let eig = extremal_eigs(&h, count, Which::Low).map_err(LabError::numeric)?;
        if eig.values[0] > e0 || count == h.dim() {
            return dynloc_moment(&h, &eig, e0, b, s, times).map_err(LabError::numeric);
        }
        count = (2 * count).min(h.dim());
    }
}

impl Experiment for Dynloc {
    fn name(&self) -> &'static str {
        "dynloc"
    }

    fn describe(&self) -> &'static str {
        "gridded sup of the weighted moment of filtered time evolution"
    }

    fn run(&self, cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ResultRecord, LabError> {
        let ExperimentSpec::Dynloc {
            cube,
            potential,
            e0,
            b,
            s,
            realizations,
            time_horizon,
            time_points,
            random_times,
        } = &cfg.spec
        else {
            return Err(LabError::Config("wrong spec kind".into()));
        };
        if *realizations == 0 {
            return Err(LabError::Config("realizations must be >= 1".into()));
        }
        let cube = cube.to_core()?;
        let field = potential.field()?;
        let times = time_grid(*time_horizon, *time_points, *random_times, cfg.seed);
        let moments: Result<Vec<f64>, LabError> = (0..*realizations as u64)
            .into_par_iter()
            .map(|t| {
                realization_moment(
                    &field,
                    &cube,
                    *e0,
                    *b,
                    *s,
                    &times,
                    rng::substream(cfg.seed, t),
                )
            })
            .collect();
        let moments = moments?;
        let mean = moments.iter().sum::<f64>() / moments.len() as f64;
        let max = moments.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut record = record_for(cfg);
        record.scalar("mean_moment", mean);
        record.scalar("max_moment", max);
        record.scalar("realizations", moments.len() as f64);
        let rows: Vec<Vec<String>> = moments
            .iter()
            .enumerate()
            .map(|(i, m)| vec![i.to_string(), format!("{m:.12e}")])
            .collect();
        record.write_table(&ctx.out_dir, "moments", &["realization", "moment"], &rows)?;
        Ok(record)
    }
}
