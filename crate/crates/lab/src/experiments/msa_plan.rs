//! Scale/decay schedule planning with the final-parameter derivation,
//! emitted in the documented JSON layout.

use anderson_core::msa::{final_params, scale_chain};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::experiment::{Experiment, LabError, RunContext};
use crate::experiments::record_for;
use crate::record::ResultRecord;

pub struct MsaPlan;

#[derive(Serialize)]
struct PlanJson {
    epsilon: f64,
    delta: f64,
    delta_prime: f64,
    #[serde(rename = "L")]
    scales: Vec<i64>,
    m: Vec<f64>,
    m_star: f64,
    kappa_star: f64,
    eps_star: f64,
}

impl Experiment for MsaPlan {
    fn name(&self) -> &'static str {
        "msa-plan"
    }

    fn describe(&self) -> &'static str {
        "dyadic scale schedule, decay rates, and final parameters (JSON)"
    }

    fn run(&self, cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ResultRecord, LabError> {
        let ExperimentSpec::MsaPlan {
            l0_exponent,
            epsilon,
            delta,
            delta_prime,
            kappa,
            m0,
            count,
        } = &cfg.spec
        else {
            return Err(LabError::Config("wrong spec kind".into()));
        };
        if *l0_exponent >= 62 || *count == 0 {
            return Err(LabError::Config("bad schedule extent".into()));
        }
        let chain =
            scale_chain(1i64 << l0_exponent, *epsilon, *count).map_err(LabError::from_core)?;
        let schedule = final_params(*kappa, *epsilon, *m0, *delta_prime, *delta, &chain)
            .map_err(LabError::from_core)?;
        let plan = PlanJson {
            epsilon: schedule.epsilon,
            delta: schedule.delta,
            delta_prime: schedule.delta_prime,
            scales: schedule.scales.clone(),
            m: schedule.rates.clone(),
            m_star: schedule.m_star,
            kappa_star: schedule.kappa_star,
            eps_star: schedule.eps_star,
        };
        std::fs::create_dir_all(&ctx.out_dir)
            .map_err(|e| LabError::Config(format!("creating {:?}: {e}", ctx.out_dir)))?;
        let mut record = record_for(cfg);
        let path = ctx.out_dir.join(format!(
            "msa-plan-{}-schedule.json",
            record.config_fingerprint
        ));
        std::fs::write(&path, serde_json::to_string_pretty(&plan).unwrap())
            .map_err(|e| LabError::Config(format!("writing {path:?}: {e}")))?;
        record.scalar("m_star", schedule.m_star);
        record.scalar("kappa_star", schedule.kappa_star);
        record.scalar("eps_star", schedule.eps_star);
        record.scalar("scales", schedule.scales.len() as f64);
        if schedule.m_star <= 0.0 {
            record.finding(format!("m_star {} not positive", schedule.m_star));
        }
        Ok(record)
    }
}
