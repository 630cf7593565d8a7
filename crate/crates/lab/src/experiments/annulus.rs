//! Annulus-event classifier census: the union of indexed events against the
//! direct predicate on randomized eigenvalue configurations.

use anderson_core::rng;
use anderson_core::wegner::{annulus_brute_predicate, annulus_union_holds};

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::experiment::{Experiment, LabError, RunContext};
use crate::experiments::record_for;
use crate::record::ResultRecord;

pub struct Annulus;

impl Experiment for Annulus {
    fn name(&self) -> &'static str {
        "annulus"
    }

    fn describe(&self) -> &'static str {
        "classifier-versus-predicate census on random eigenvalue configurations"
    }

    fn run(&self, cfg: &ExperimentConfig, _ctx: &RunContext) -> Result<ResultRecord, LabError> {
        let ExperimentSpec::Annulus {
            dim,
            trials,
            s_low,
            s_high,
            ebar,
        } = &cfg.spec
        else {
            return Err(LabError::Config("wrong spec kind".into()));
        };
        if *trials == 0 || *dim < 2 {
            return Err(LabError::Config("need trials >= 1 and dim >= 2".into()));
        }
        if !(0.0 < *s_low && s_low < s_high) {
            return Err(LabError::Config("need 0 < s_low < s_high".into()));
        }
        let mut stream = rng::Stream::new(cfg.seed);
        let mut mismatches = 0usize;
        let mut events = 0usize;
        for _ in 0..*trials {
            let mut eigs: Vec<f64> = (0..*dim)
                .map(|_| match stream.next_below(4) {
                    0 => ebar + (stream.next_unit() - 0.5) * 2.0 * s_low,
                    1 => ebar + (stream.next_unit() - 0.5) * 2.0 * s_high,
                    2 => ebar + (0.5 + stream.next_unit()) * 3.0 * s_high,
                    _ => ebar - (0.5 + stream.next_unit()) * 3.0 * s_high,
                })
                .collect();
            eigs.sort_by(|a, b| b.total_cmp(a));
            let union = annulus_union_holds(&eigs, *ebar, *s_low, *s_high);
            let brute = annulus_brute_predicate(&eigs, *ebar, *s_low, *s_high);
            mismatches += usize::from(union != brute);
            events += usize::from(brute);
        }
        let mut record = record_for(cfg);
        record.scalar("trials", *trials as f64);
        record.scalar("events", events as f64);
        record.scalar("mismatches", mismatches as f64);
        if mismatches > 0 {
            record.finding(format!(
                "classifier disagreed with the predicate {mismatches} times"
            ));
        }
        Ok(record)
    }
}
