//! Experiment configuration schema (JSON, schema_version 1) and conversions
//! into core types.  Field specifications round-trip losslessly.

use anderson_core::ensembles::{Component, FieldRule, Potential, PotentialField, SiteDistribution};
use anderson_core::lattice::{Cube, Site};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::experiment::LabError;

pub const SCHEMA_VERSION: u32 = 1;

/// A site distribution as a list of mixture components.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DistSpec {
    pub components: Vec<ComponentSpec>,
    pub m_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ComponentSpec {
    Atom { x: f64, w: f64 },
    Uniform { lo: f64, hi: f64, w: f64 },
}

impl DistSpec {
    pub fn to_core(&self) -> Result<SiteDistribution, LabError> {
        let components = self
            .components
            .iter()
            .map(|c| match *c {
                ComponentSpec::Atom { x, w } => Component::Atom { x, w },
                ComponentSpec::Uniform { lo, hi, w } => Component::Uniform { lo, hi, w },
            })
            .collect();
        SiteDistribution::new(components, self.m_bound).map_err(LabError::config)
    }

    pub fn from_core(dist: &SiteDistribution) -> Self {
        DistSpec {
            components: dist
                .components()
                .iter()
                .map(|c| match *c {
                    Component::Atom { x, w } => ComponentSpec::Atom { x, w },
                    Component::Uniform { lo, hi, w } => ComponentSpec::Uniform { lo, hi, w },
                })
                .collect(),
            m_bound: dist.m_bound(),
        }
    }

    /// Shorthand specs for the standard laws.
    pub fn bernoulli(q: f64) -> Self {
        DistSpec {
            components: vec![
                ComponentSpec::Atom { x: 0.0, w: 1.0 - q },
                ComponentSpec::Atom { x: 1.0, w: q },
            ],
            m_bound: 1.0,
        }
    }

    pub fn uniform01() -> Self {
        DistSpec {
            components: vec![ComponentSpec::Uniform {
                lo: 0.0,
                hi: 1.0,
                w: 1.0,
            }],
            m_bound: 1.0,
        }
    }
}

/// Assignment rule over sites.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RuleSpec {
    Iid { dist: DistSpec },
    Checkerboard { even: DistSpec, odd: DistSpec },
    Interface { left: DistSpec, right: DistSpec },
    Explicit { sites: Vec<ExplicitSiteSpec> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExplicitSiteSpec {
    pub site: [i64; 3],
    pub dist: DistSpec,
}

/// Documented field-specification schema: rule, distributions, M, sigma2_min.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub rule: RuleSpec,
    pub m_bound: f64,
    pub sigma2_min: f64,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

impl FieldSpec {
    pub fn to_core(&self) -> Result<PotentialField, LabError> {
        let rule = match &self.rule {
            RuleSpec::Iid { dist } => FieldRule::Iid(dist.to_core()?),
            RuleSpec::Checkerboard { even, odd } => FieldRule::Checkerboard {
                even: even.to_core()?,
                odd: odd.to_core()?,
            },
            RuleSpec::Interface { left, right } => FieldRule::Interface {
                left: left.to_core()?,
                right: right.to_core()?,
            },
            RuleSpec::Explicit { sites } => {
                let mut map = BTreeMap::new();
                for e in sites {
                    map.insert(Site(e.site), e.dist.to_core()?);
                }
                FieldRule::Explicit(map)
            }
        };
        PotentialField::new(rule, self.m_bound, self.sigma2_min).map_err(LabError::config)
    }

    pub fn from_core(field: &PotentialField) -> Self {
        let rule = match field.rule() {
            FieldRule::Iid(d) => RuleSpec::Iid {
                dist: DistSpec::from_core(d),
            },
            FieldRule::Checkerboard { even, odd } => RuleSpec::Checkerboard {
                even: DistSpec::from_core(even),
                odd: DistSpec::from_core(odd),
            },
            FieldRule::Interface { left, right } => RuleSpec::Interface {
                left: DistSpec::from_core(left),
                right: DistSpec::from_core(right),
            },
            FieldRule::Explicit(map) => RuleSpec::Explicit {
                sites: map
                    .iter()
                    .map(|(s, d)| ExplicitSiteSpec {
                        site: s.0,
                        dist: DistSpec::from_core(d),
                    })
                    .collect(),
            },
        };
        FieldSpec {
            schema_version: SCHEMA_VERSION,
            rule,
            m_bound: field.m_bound(),
            sigma2_min: field.sigma2_min(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("reading {path:?}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| LabError::Config(format!("parsing {path:?}: {e}")))
    }
}

/// Cube parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CubeSpec {
    #[serde(default)]
    pub center: [i64; 3],
    pub radius: i64,
}

impl CubeSpec {
    pub fn to_core(&self) -> Result<Cube, LabError> {
        Cube::new(Site(self.center), self.radius).map_err(LabError::config)
    }
}

/// How an experiment obtains its potential: a deterministic constant or a
/// sampled field (inline or from a file).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Constant { value: f64 },
    Field { field: FieldSpec },
    FieldFile { path: String },
}

impl PotentialSpec {
    pub fn realize(&self, cube: &Cube, seed: u64) -> Result<Potential, LabError> {
        match self {
            PotentialSpec::Constant { value } => {
                if *value < 0.0 {
                    return Err(LabError::Config("constant potential must be >= 0".into()));
                }
                Ok(Potential::constant(*cube, *value))
            }
            PotentialSpec::Field { field } => {
                let f = field.to_core()?;
                anderson_core::ensembles::sample_potential(&f, cube, seed)
                    .map_err(LabError::numeric)
            }
            PotentialSpec::FieldFile { path } => {
                let f = FieldSpec::load(Path::new(path))?.to_core()?;
                anderson_core::ensembles::sample_potential(&f, cube, seed)
                    .map_err(LabError::numeric)
            }
        }
    }

    pub fn field(&self) -> Result<PotentialField, LabError> {
        match self {
            PotentialSpec::Field { field } => field.to_core(),
            PotentialSpec::FieldFile { path } => FieldSpec::load(Path::new(path))?.to_core(),
            PotentialSpec::Constant { .. } => Err(LabError::Config(
                "this experiment needs a random field, not a constant".into(),
            )),
        }
    }
}

/// Per-kind experiment parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Spectrum {
        cube: CubeSpec,
        potential: PotentialSpec,
        /// eigenvalue count for the iterative path when the dimension
        /// exceeds the dense cap
        #[serde(default)]
        lowest: Option<usize>,
    },
    Lifshitz {
        instances: Vec<LifshitzInstanceSpec>,
        /// also run the Neumann decay comparison at lambda = bound / 2
        #[serde(default)]
        neumann: bool,
    },
    WegnerMc {
        cube: CubeSpec,
        potential: PotentialSpec,
        ebar: f64,
        threshold_exponent: f64,
        trials: usize,
    },
    Dynloc {
        cube: CubeSpec,
        potential: PotentialSpec,
        e0: f64,
        b: f64,
        s: f64,
        realizations: usize,
        #[serde(default = "default_time_horizon")]
        time_horizon: f64,
        #[serde(default = "default_time_points")]
        time_points: usize,
        #[serde(default = "default_random_times")]
        random_times: usize,
    },
    Decompose {
        dist: DistSpec,
        sigma2: f64,
    },
    Sperner {
        ground_size: usize,
        family: FamilySpec,
        p_low: f64,
        p_high: f64,
        constant: f64,
    },
    ConeCheck {
        cube: CubeSpec,
        potential: PotentialSpec,
        eigenpairs: usize,
        k_max: i64,
        realizations: usize,
    },
    MsaPlan {
        l0_exponent: u32,
        epsilon: f64,
        delta: f64,
        delta_prime: f64,
        kappa: f64,
        m0: f64,
        count: usize,
    },
    Combine {
        cube: CubeSpec,
        potential: PotentialSpec,
        ebar: f64,
        scales: [i64; 7],
        m: f64,
        nu: f64,
    },
    Annulus {
        dim: usize,
        trials: usize,
        s_low: f64,
        s_high: f64,
        ebar: f64,
    },
}

fn default_time_horizon() -> f64 {
    1e3
}
fn default_time_points() -> usize {
    10_000
}
fn default_random_times() -> usize {
    1_000
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LifshitzInstanceSpec {
    pub l: i64,
    pub r: i64,
    pub kappa: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilySpec {
    Slice { k: usize },
    RandomWitnessed { members: usize, kappa_target: f64 },
}

impl ExperimentSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExperimentSpec::Spectrum { .. } => "spectrum",
            ExperimentSpec::Lifshitz { .. } => "lifshitz",
            ExperimentSpec::WegnerMc { .. } => "wegner-mc",
            ExperimentSpec::Dynloc { .. } => "dynloc",
            ExperimentSpec::Decompose { .. } => "decompose",
            ExperimentSpec::Sperner { .. } => "sperner",
            ExperimentSpec::ConeCheck { .. } => "cone-check",
            ExperimentSpec::MsaPlan { .. } => "msa-plan",
            ExperimentSpec::Combine { .. } => "combine",
            ExperimentSpec::Annulus { .. } => "annulus",
        }
    }
}

/// A complete experiment configuration.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub spec: ExperimentSpec,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("reading {path:?}: {e}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| LabError::Config(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(LabError::Config(format!(
                "unsupported schema_version {} (this tool speaks {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Stable hex fingerprint of the canonicalized config JSON.
    pub fn fingerprint(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = canonical_json(&value);
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canonical.as_bytes() {
            hash ^= u64::from(*b);
            hash = hash.wrapping_mul(0x100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

/// Deterministic JSON rendering with sorted object keys.
pub fn canonical_json(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let inner: Vec<String> = keys
                .iter()
                .map(|k| format!("{}:{}", serde_json::to_string(k).unwrap(), canonical_json(&map[*k])))
                .collect();
            format!("{{{}}}", inner.join(","))
        }
        serde_json::Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", inner.join(","))
        }
        other => serde_json::to_string(other).unwrap(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_spec_round_trips_losslessly() {
        let spec = FieldSpec {
            schema_version: 1,
            rule: RuleSpec::Checkerboard {
                even: DistSpec::bernoulli(0.5),
                odd: DistSpec::uniform01(),
            },
            m_bound: 1.0,
            sigma2_min: 1.0 / 13.0,
        };
        let field = spec.to_core().unwrap();
        let back = FieldSpec::from_core(&field);
        assert_eq!(spec, back);
        let json = serde_json::to_string(&spec).unwrap();
        let reparsed: FieldSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, reparsed);
    }

    #[test]
    fn config_fingerprint_is_key_order_independent() {
        let a = ExperimentConfig::parse(
            r#"{"schema_version":1,"seed":7,"kind":"msa-plan","l0_exponent":10,
                "epsilon":0.0166,"delta":0.01,"delta_prime":0.02,"kappa":1.0,
                "m0":1.0,"count":4}"#,
        )
        .unwrap();
        let b = ExperimentConfig::parse(
            r#"{"kind":"msa-plan","count":4,"m0":1.0,"kappa":1.0,"delta_prime":0.02,
                "delta":0.01,"epsilon":0.0166,"l0_exponent":10,"seed":7,
                "schema_version":1}"#,
        )
        .unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn unknown_schema_version_is_rejected() {
        let err = ExperimentConfig::parse(r#"{"schema_version":9,"kind":"annulus","dim":4,"trials":10,"s_low":0.001,"s_high":0.01,"ebar":1.0}"#);
        assert!(err.is_err());
    }
}
