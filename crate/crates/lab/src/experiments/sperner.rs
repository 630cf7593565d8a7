//! Exact family probabilities against the scaled Sperner bound, for slice
//! families and randomized witnessed families.

use anderson_core::combinatorics::{
    family_probability, sperner_bound, verify_kappa_sperner, BernoulliEnsemble, SpernerFamily,
};
use anderson_core::rng;

use crate::config::{ExperimentConfig, ExperimentSpec, FamilySpec};
use crate::experiment::{Experiment, LabError, RunContext};
use crate::experiments::record_for;
use crate::record::ResultRecord;

pub struct Sperner;

/// Randomized witnessed family: distinct half-size members (an antichain by
/// construction), each with a witness block that hits every other member and
/// reaches the target relative size.
pub fn random_witnessed_family(
    n: usize,
    members: usize,
    kappa_target: f64,
    seed: u64,
) -> Result<(SpernerFamily, f64), LabError> {
    if n < 4 || n > 24 {
        return Err(LabError::Config("ground size must be in 4..=24".into()));
    }
    let mut stream = rng::Stream::new(seed);
    let k = n / 2;
    let full: u32 = if n >= 32 { u32::MAX } else { (1 << n) - 1 };
    let mut chosen: Vec<u32> = Vec::new();
    let mut guard = 0;
    while chosen.len() < members && guard < 10_000 {
        guard += 1;
        // random k-subset
        let mut mask = 0u32;
        while (mask.count_ones() as usize) < k {
            mask |= 1 << stream.next_below(n);
        }
        if !chosen.contains(&mask) {
            chosen.push(mask);
        }
    }
    if chosen.len() < members {
        return Err(LabError::Config(
            "could not draw enough distinct members".into(),
        ));
    }
    // witness blocks: one hitting element per other member, padded to size
    let mut blocks = Vec::with_capacity(chosen.len());
    let mut kappa = f64::INFINITY;
    for (i, &a) in chosen.iter().enumerate() {
        let comp = !a & full;
        let mut block = 0u32;
        for (j, &other) in chosen.iter().enumerate() {
            if i != j {
                let hitting = other & comp;
                if hitting == 0 {
                    return Err(LabError::Numeric(
                        "slice members stopped being an antichain".into(),
                    ));
                }
                // lowest set bit as the deterministic hitting element
                block |= hitting & hitting.wrapping_neg();
            }
        }
        let want = (kappa_target * comp.count_ones() as f64).ceil() as u32;
        let mut spare = comp & !block;
        while block.count_ones() < want && spare != 0 {
            let bit = spare & spare.wrapping_neg();
            block |= bit;
            spare &= !bit;
        }
        kappa = kappa.min(block.count_ones() as f64 / comp.count_ones() as f64);
        blocks.push(block);
    }
    let family = SpernerFamily::with_witness(n, chosen, Some(blocks))
        .map_err(LabError::from_core)?;
    Ok((family, kappa))
}

impl Experiment for Sperner {
    fn name(&self) -> &'static str {
        "sperner"
    }

    fn describe(&self) -> &'static str {
        "exact family probability versus the scaled Sperner bound"
    }

    fn run(&self, cfg: &ExperimentConfig, _ctx: &RunContext) -> Result<ResultRecord, LabError> {
        let ExperimentSpec::Sperner {
            ground_size,
            family,
            p_low,
            p_high,
            constant,
        } = &cfg.spec
        else {
            return Err(LabError::Config("wrong spec kind".into()));
        };
        if !(0.0 < *p_low && *p_low <= *p_high && *p_high < 1.0) {
            return Err(LabError::Config("need 0 < p_low <= p_high < 1".into()));
        }
        let (fam, kappa) = match family {
            FamilySpec::Slice { k } => (
                SpernerFamily::slice(*ground_size, *k).map_err(LabError::from_core)?,
                1.0,
            ),
            FamilySpec::RandomWitnessed {
                members,
                kappa_target,
            } => random_witnessed_family(*ground_size, *members, *kappa_target, cfg.seed)?,
        };
        if !verify_kappa_sperner(&fam, kappa).map_err(LabError::from_core)? {
            return Err(LabError::Numeric(format!(
                "constructed family failed the kappa = {kappa} check"
            )));
        }
        let mut stream = rng::Stream::new(rng::substream(cfg.seed, 1));
        let probs: Vec<f64> = (0..*ground_size)
            .map(|_| stream.next_range(*p_low, *p_high))
            .collect();
        let ens = BernoulliEnsemble::new(probs).map_err(LabError::from_core)?;
        let p = family_probability(&fam, &ens).map_err(LabError::from_core)?;
        let bound = sperner_bound(ens.beta, kappa, *ground_size, *constant)
            .map_err(LabError::from_core)?;
        let minimal_c = p * ens.beta.powf(2.5) * kappa * (*ground_size as f64).sqrt();
        let mut record = record_for(cfg);
        record.scalar("members", fam.len() as f64);
        record.scalar("kappa", kappa);
        record.scalar("beta", ens.beta);
        record.scalar("probability", p);
        record.scalar("bound", bound);
        record.scalar("minimal_sufficient_c", minimal_c);
        if p > bound {
            record.finding(format!("probability {p} exceeds the bound {bound}"));
        }
        Ok(record)
    }
}
