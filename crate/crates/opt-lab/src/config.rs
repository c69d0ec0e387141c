//! Experiment configuration: a flat `key = value` text file plus command-line
//! overrides (overrides win). The canonicalized key-value map is what gets
//! hashed into the manifest, so whitespace and key order never change a
//! config's identity; output location and worker count are excluded from the
//! hash since they do not affect results.

use crate::error::{Error, Result};
use crate::optimizers::{MeasureKind, Method, ModelType, Schedule, StochasticFamily};
use crate::problems::{
    synthetic_least_squares, synthetic_logistic_data, NoiseKind, ProblemSpec, RngStream,
};
use crate::regularizers::RegKind;
use std::collections::BTreeMap;

/// Keys that do not influence the produced numbers.
const NON_SEMANTIC_KEYS: [&str; 2] = ["out_dir", "jobs"];

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// FNV-1a over the sorted semantic entries, hex encoded.
pub fn config_hash(map: &BTreeMap<String, String>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    };
    for (k, v) in map {
        if NON_SEMANTIC_KEYS.contains(&k.as_str()) {
            continue;
        }
        feed(k.as_bytes());
        feed(b"=");
        feed(v.as_bytes());
        feed(b"\n");
    }
    format!("{h:016x}")
}

/// Validated experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub method: Method,
    pub problem: ProblemSpec,
    pub regularizer: Option<RegKind>,
    pub model_type: Option<ModelType>,
    pub model_family: Option<StochasticFamily>,
    pub oracle_c: f64,
    pub oracle_d: f64,
    pub noise_kind: NoiseKind,
    pub schedule: Schedule,
    pub t: u64,
    pub reps: usize,
    pub seed: u64,
    pub measure: MeasureKind,
    pub stride: u64,
    pub theta: Option<f64>,
    pub x0: f64,
    pub out_dir: String,
    pub jobs: usize,
    /// Canonical key-value source of this config.
    pub raw: BTreeMap<String, String>,
}

fn get_f64(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("key `{key}`: bad number `{v}`"))),
    }
}

fn get_u64(map: &BTreeMap<String, String>, key: &str, default: u64) -> Result<u64> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<u64>()
            .map_err(|_| Error::Parse(format!("key `{key}`: bad integer `{v}`"))),
    }
}

impl ExperimentConfig {
    /// Build and validate from a canonical key-value map. The seed falls
    /// back to the `OPT_LAB_SEED` environment variable when absent.
    pub fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        if !map.contains_key("seed") {
            if let Ok(env_seed) = std::env::var("OPT_LAB_SEED") {
                map.insert("seed".into(), env_seed);
            }
        }
        let method: Method = map
            .get("method")
            .ok_or_else(|| Error::IncompatibleConfig("missing `method`".into()))?
            .parse()?;

        let problem = Self::problem_from(&map)?;
        let regularizer = Self::regularizer_from(&map)?;
        let model_type = map.get("model.type").map(|s| s.parse()).transpose()?;
        let model_family = Self::family_from(&map)?;

        let schedule = Schedule::parse(
            map.get("schedule")
                .ok_or_else(|| Error::IncompatibleConfig("missing `schedule`".into()))?,
        )?;
        let noise_kind: NoiseKind = map
            .get("oracle.noise")
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(NoiseKind::Zero);
        let measure: MeasureKind = map
            .get("measure")
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(match method {
                Method::Sgd | Method::Rr => MeasureKind::Grad,
                Method::ProxSgd | Method::Smm => MeasureKind::EnvGrad,
            });

        let theta = if map.contains_key("theta") {
            Some(get_f64(&map, "theta", 0.0)?)
        } else {
            None
        };
        let cfg = ExperimentConfig {
            method,
            problem,
            regularizer,
            model_type,
            model_family,
            oracle_c: get_f64(&map, "oracle.c", 0.0)?,
            oracle_d: get_f64(&map, "oracle.d", 0.0)?,
            noise_kind,
            schedule,
            t: get_u64(&map, "t", 1000)?,
            reps: get_u64(&map, "reps", 8)? as usize,
            seed: get_u64(&map, "seed", 0)?,
            measure,
            stride: get_u64(&map, "stride", 0)?,
            theta,
            x0: get_f64(&map, "x0", 2.0)?,
            out_dir: map.get("out_dir").cloned().unwrap_or_else(|| "out".into()),
            jobs: get_u64(&map, "jobs", 0)? as usize,
            raw: map,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn problem_from(map: &BTreeMap<String, String>) -> Result<ProblemSpec> {
        let name = map
            .get("problem.name")
            .ok_or_else(|| Error::IncompatibleConfig("missing `problem.name`".into()))?;
        let dim = get_u64(map, "problem.dim", 2)? as usize;
        let data_seed = get_u64(map, "problem.data_seed", 12345)?;
        match name.as_str() {
            "quadratic" => {
                let eig_min = get_f64(map, "problem.eig_min", 1.0)?;
                let eig_max = get_f64(map, "problem.eig_max", 1.0)?;
                let q = (0..dim)
                    .map(|i| {
                        (0..dim)
                            .map(|j| {
                                if i == j {
                                    if dim > 1 {
                                        eig_min
                                            + (eig_max - eig_min) * i as f64 / (dim as f64 - 1.0)
                                    } else {
                                        eig_max
                                    }
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect();
                Ok(ProblemSpec::Quadratic { q, center: vec![0.0; dim] })
            }
            "least_squares" => {
                let m = get_u64(map, "problem.m", 2 * dim as u64)? as usize;
                let (a, b) = synthetic_least_squares(m, dim, data_seed);
                Ok(ProblemSpec::LeastSquares { a, b })
            }
            "logistic_finite_sum" => {
                let n_points = get_u64(map, "problem.n_points", 8)? as usize;
                Ok(ProblemSpec::LogisticFiniteSum {
                    data: synthetic_logistic_data(n_points, dim, data_seed),
                })
            }
            "rosenbrock_regularized" => Ok(ProblemSpec::RosenbrockRegularized {
                mu: get_f64(map, "problem.mu", 0.1)?,
            }),
            other => Err(Error::UnknownName(format!("problem `{other}`"))),
        }
    }

    fn regularizer_from(map: &BTreeMap<String, String>) -> Result<Option<RegKind>> {
        let Some(kind) = map.get("regularizer.kind") else {
            return Ok(None);
        };
        let lambda = get_f64(map, "regularizer.lambda", 1.0)?;
        let theta = get_f64(map, "regularizer.theta", 2.0)?;
        let reg = match kind.as_str() {
            "zero" => RegKind::Zero,
            "l1" => RegKind::L1 { lambda },
            "mcp" => RegKind::Mcp { lambda, theta },
            "scad" => RegKind::Scad {
                lambda,
                theta: get_f64(map, "regularizer.theta", 3.0)?,
            },
            "student_t" => RegKind::StudentT {
                theta: get_f64(map, "regularizer.theta", 1.0)?,
            },
            "box_indicator" => RegKind::BoxIndicator {
                lo: get_f64(map, "regularizer.lo", -1.0)?,
                hi: get_f64(map, "regularizer.hi", 1.0)?,
            },
            other => return Err(Error::UnknownName(format!("regularizer `{other}`"))),
        };
        Ok(Some(reg))
    }

    fn family_from(map: &BTreeMap<String, String>) -> Result<Option<StochasticFamily>> {
        let Some(name) = map.get("model.family") else {
            return Ok(None);
        };
        let n = get_u64(map, "model.n", 8)? as usize;
        let dim = get_u64(map, "model.dim", 1)? as usize;
        let data_seed = get_u64(map, "model.data_seed", 777)?;
        let mut rng = RngStream::new(data_seed, u64::MAX - 2);
        let mut vecs = |scale: f64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..dim).map(|_| scale * rng.next_normal()).collect())
                .collect()
        };
        match name.as_str() {
            "robust_linear" => {
                let a = vecs(1.0);
                let b = (0..n).map(|_| rng.next_normal()).collect();
                Ok(Some(StochasticFamily::RobustLinear { a, b }))
            }
            "phase_retrieval" => {
                let a = vecs(1.0);
                let b = (0..n).map(|_| rng.next_normal().abs() + 0.1).collect();
                Ok(Some(StochasticFamily::PhaseRetrieval { a, b }))
            }
            "smooth_quadratic" => Ok(Some(StochasticFamily::SmoothQuadratic {
                centers: vecs(1.0),
                scale: get_f64(map, "model.scale", 1.0)?,
            })),
            other => Err(Error::UnknownName(format!("model family `{other}`"))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t < 1 {
            return Err(Error::IncompatibleConfig("t must be >= 1".into()));
        }
        if self.reps < 1 {
            return Err(Error::IncompatibleConfig("reps must be >= 1".into()));
        }
        match self.method {
            Method::Rr => {
                if !matches!(self.problem, ProblemSpec::LogisticFiniteSum { .. }) {
                    return Err(Error::IncompatibleConfig(
                        "method `rr` needs a finite-sum problem (problem.name = logistic_finite_sum)"
                            .into(),
                    ));
                }
            }
            Method::ProxSgd => {
                if self.regularizer.is_none() {
                    return Err(Error::IncompatibleConfig(
                        "method `prox_sgd` needs `regularizer.kind`".into(),
                    ));
                }
            }
            Method::Smm => {
                if self.regularizer.is_none() {
                    return Err(Error::IncompatibleConfig(
                        "method `smm` needs `regularizer.kind`".into(),
                    ));
                }
                if self.model_type.is_none() {
                    return Err(Error::IncompatibleConfig(
                        "method `smm` needs `model.type`".into(),
                    ));
                }
                if self.model_family.is_none() {
                    return Err(Error::IncompatibleConfig(
                        "method `smm` needs `model.family`".into(),
                    ));
                }
            }
            Method::Sgd => {}
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(&self.raw)
    }
}
