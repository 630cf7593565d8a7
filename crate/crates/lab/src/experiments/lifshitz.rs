//! Net-certified principal-eigenvalue verification sweeps with the optional
//! Neumann decay comparison; one CSV row per instance.

use anderson_core::ensembles::Potential;
use anderson_core::initial_scale::{
    check_rnet, neumann_decay_check, principal_lower_bound, verify_lifshitz, RNetCertificate,
};
use anderson_core::lattice::{Cube, Site};
use anderson_core::operators::assemble;
use anderson_core::rng;
use std::collections::HashSet;

use crate::config::{ExperimentConfig, ExperimentSpec, LifshitzInstanceSpec};
use crate::experiment::{Experiment, LabError, RunContext};
use crate::experiments::record_for;
use crate::record::ResultRecord;

pub struct Lifshitz;

/// Randomized net instance: a jittered sublattice net plus extras, with
/// potential at least kappa on the net and arbitrary in [0, kappa] off it.
pub fn net_instance(
    l: i64,
    r: i64,
    kappa: f64,
    seed: u64,
) -> Result<
    (
        anderson_core::operators::HamiltonianInstance,
        RNetCertificate,
    ),
    LabError,
> {
    let cube = Cube::centered(l);
    let mut stream = rng::Stream::new(seed);
    let anchor = [
        stream.next_below(r as usize) as i64,
        stream.next_below(r as usize) as i64,
        stream.next_below(r as usize) as i64,
    ];
    let big: HashSet<Site> = cube
        .sites()
        .into_iter()
        .filter(|s| {
            let on_grid = (0..3).all(|i| (s.0[i] - anchor[i]).rem_euclid(r) == 0);
            on_grid || stream.next_unit() < 0.08
        })
        .collect();
    let net = check_rnet(&cube, &big, r);
    if !net.is_net {
        return Err(LabError::Numeric(format!(
            "constructed set failed the {r}-net check (worst {})",
            net.worst_distance
        )));
    }
    let pot = Potential::from_fn(cube, |s| {
        if big.contains(s) {
            kappa * (1.0 + 0.5 * stream.next_unit())
        } else {
            kappa * stream.next_unit()
        }
    });
    let h = assemble(&cube, &pot).map_err(LabError::from_core)?;
    let cert = RNetCertificate::new(cube, big, r, kappa).map_err(LabError::from_core)?;
    Ok((h, cert))
}

impl Experiment for Lifshitz {
    fn name(&self) -> &'static str {
        "lifshitz"
    }

    fn describe(&self) -> &'static str {
        "principal-eigenvalue lower-bound verification on randomized net instances"
    }

    fn run(&self, cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ResultRecord, LabError> {
        let ExperimentSpec::Lifshitz { instances, neumann } = &cfg.spec else {
            return Err(LabError::Config("wrong spec kind".into()));
        };
        if instances.is_empty() {
            return Err(LabError::Config("no instances listed".into()));
        }
        let mut record = record_for(cfg);
        let mut rows = Vec::new();
        let mut passes = 0usize;
        for (idx, LifshitzInstanceSpec { l, r, kappa }) in instances.iter().enumerate() {
            let seed = rng::substream(cfg.seed, idx as u64);
            let (h, cert) = net_instance(*l, *r, *kappa, seed)?;
            let rep = verify_lifshitz(&h, &cert).map_err(LabError::from_core)?;
            passes += usize::from(rep.pass);
            if !rep.pass {
                record.finding(format!(
                    "instance {idx} (L={l}, R={r}, kappa={kappa}): lambda_min {} below bound {}",
                    rep.lambda_min, rep.bound
                ));
            }
            let mut neumann_violations = String::new();
            if *neumann {
                let lam = principal_lower_bound(*kappa, 3, *r).map_err(LabError::from_core)? / 2.0;
                let nrep =
                    neumann_decay_check(&h, lam, *r, *kappa).map_err(LabError::from_core)?;
                if !nrep.violations.is_empty() {
                    record.finding(format!(
                        "instance {idx}: {} resolvent entries above the decay bound",
                        nrep.violations.len()
                    ));
                }
                neumann_violations = nrep.violations.len().to_string();
            }
            rows.push(vec![
                l.to_string(),
                r.to_string(),
                kappa.to_string(),
                format!("{:.12e}", rep.lambda_min),
                format!("{:.12e}", rep.bound),
                rep.pass.to_string(),
                neumann_violations,
            ]);
        }
        record.scalar("instances", instances.len() as f64);
        record.scalar("passes", passes as f64);
        record.write_table(
            &ctx.out_dir,
            "instances",
            &["L", "R", "kappa", "lambda_min", "bound", "pass", "neumann_violations"],
            &rows,
        )?;
        Ok(record)
    }
}
