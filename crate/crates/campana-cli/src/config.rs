//! Experiment configuration: a TOML file and/or command-line flags.

use campana::curve::CurveModel;
use campana::error::Error;
use campana::fan::Fan;
use campana::gring::MotClass;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub fan: String,
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub q: Vec<u64>,
    pub m: Option<Vec<u32>>,
    pub degrees: Option<Vec<Vec<u32>>>,
    pub diag_max: Option<u32>,
    pub bound: Option<u32>,
    pub max_tuples: Option<u128>,
    pub time_limit_secs: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Deserialize, Clone)]
#[serde(untagged)]
pub enum CurveSpec {
    Preset(String),
    Custom {
        genus: u32,
        numerator_coeffs: Vec<toml::Value>,
        label: Option<String>,
    },
}

pub fn resolve_curve_name(name: &str) -> Result<CurveModel, Error> {
    CurveModel::preset(name)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {}", path.display(), e)))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("bad config: {}", e)))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn merge_flags(
        &mut self,
        fan: Option<String>,
        curve: Option<String>,
        q: Option<Vec<u64>>,
        m: Option<Vec<u32>>,
        deg: &[String],
        diag: Option<u32>,
        bound: Option<u32>,
        budget: Option<u128>,
        time_limit: Option<u64>,
        workers: Option<usize>,
        out: Option<PathBuf>,
    ) -> Result<(), Error> {
        if let Some(f) = fan {
            self.fan = f;
        }
        if let Some(c) = curve {
            self.curve = Some(CurveSpec::Preset(c));
        }
        if let Some(q) = q {
            self.q = q;
        }
        if m.is_some() {
            self.m = m;
        }
        if !deg.is_empty() {
            let mut degrees = self.degrees.take().unwrap_or_default();
            for spec in deg {
                let parsed: Result<Vec<u32>, _> =
                    spec.split(',').map(|p| p.trim().parse()).collect();
                degrees.push(
                    parsed.map_err(|_| Error::Config(format!("bad degree '{}'", spec)))?,
                );
            }
            self.degrees = Some(degrees);
        }
        if diag.is_some() {
            self.diag_max = diag;
        }
        if bound.is_some() {
            self.bound = bound;
        }
        if budget.is_some() {
            self.max_tuples = budget;
        }
        if time_limit.is_some() {
            self.time_limit_secs = time_limit;
        }
        if workers.is_some() {
            self.workers = workers;
        }
        if out.is_some() {
            self.out = out;
        }
        if self.fan.is_empty() {
            return Err(Error::Config("no fan given (use --fan or a config file)".into()));
        }
        if self.q.is_empty() {
            return Err(Error::Config("no field sizes given (use --q)".into()));
        }
        Ok(())
    }

    pub fn resolve_curve(&self) -> Result<CurveModel, Error> {
        match &self.curve {
            None => CurveModel::preset("p1"),
            Some(CurveSpec::Preset(name)) => CurveModel::preset(name),
            Some(CurveSpec::Custom {
                genus,
                numerator_coeffs,
                label,
            }) => {
                let coeffs: Result<Vec<MotClass>, Error> = numerator_coeffs
                    .iter()
                    .map(|v| match v {
                        toml::Value::Integer(i) => Ok(MotClass::from_int(*i)),
                        toml::Value::String(s) => MotClass::parse(s),
                        other => Err(Error::Config(format!(
                            "bad numerator coefficient {:?}",
                            other
                        ))),
                    })
                    .collect();
                CurveModel::new(
                    *genus,
                    coeffs?,
                    label.clone().unwrap_or_else(|| "custom".to_string()),
                )
            }
        }
    }

    pub fn resolve_mults(&self, fan: &Fan) -> Result<Vec<u32>, Error> {
        let m = self
            .m
            .clone()
            .unwrap_or_else(|| vec![1; fan.num_rays()]);
        if m.len() != fan.num_rays() {
            return Err(Error::DegreeLength(m.len(), fan.num_rays()));
        }
        if m.iter().any(|&x| x == 0) {
            return Err(Error::InvalidMultiplicity);
        }
        Ok(m)
    }

    /// All requested multidegrees (explicit list plus the diagonal
    /// generator), deduplicated, in request order.
    pub fn resolve_degrees(&self, fan: &Fan) -> Result<Vec<Vec<u32>>, Error> {
        let mut out: Vec<Vec<u32>> = Vec::new();
        if let Some(ds) = &self.degrees {
            for d in ds {
                if d.len() != fan.num_rays() {
                    return Err(Error::DegreeLength(d.len(), fan.num_rays()));
                }
                if !out.contains(d) {
                    out.push(d.clone());
                }
            }
        }
        if let Some(max) = self.diag_max {
            for a in 1..=max {
                let d = vec![a; fan.num_rays()];
                if fan.degree_admissible(&d)? && !out.contains(&d) {
                    out.push(d);
                }
            }
        }
        Ok(out)
    }

    pub fn resolve_bound(&self, degrees: &[Vec<u32>]) -> u32 {
        self.bound.unwrap_or_else(|| {
            degrees
                .iter()
                .map(|d| d.iter().sum::<u32>())
                .max()
                .unwrap_or(4)
                + 1
        })
    }
}
