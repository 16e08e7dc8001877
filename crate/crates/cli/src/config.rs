//! Scenario and matrix files. The format follows the file extension:
//! `.toml` or `.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hdqkd_core::bounds::SecurityTargets;
use hdqkd_core::entropy::PrimeDimension;
use hdqkd_core::keyrate::{LeakMode, LeakageModel, NoiseThresholds};
use hdqkd_core::mub::BellWeights;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "toml" => toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        "json" => serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        _ => Err(CliError::Config(format!(
            "{}: unknown config format (expected .toml or .json)",
            path.display()
        ))),
    }
}

fn prime(d: usize) -> Result<PrimeDimension, CliError> {
    PrimeDimension::new(d).map_err(|e| CliError::Config(format!("d: {e}")))
}

/// Rows keyed by index, or a plain list of rows.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Rows {
    Keyed(BTreeMap<String, Vec<f64>>),
    List(Vec<Vec<f64>>),
}

impl Rows {
    fn ordered(&self, count: usize, what: &str) -> Result<Vec<Vec<f64>>, CliError> {
        match self {
            Rows::List(rows) => {
                if rows.len() != count {
                    return Err(CliError::Config(format!(
                        "{what}: expected {count} rows, found {}",
                        rows.len()
                    )));
                }
                Ok(rows.clone())
            }
            Rows::Keyed(map) => {
                let mut out = vec![None; count];
                for (k, v) in map {
                    let i: usize = k
                        .parse()
                        .map_err(|_| CliError::Config(format!("{what}: row key {k:?} is not an index")))?;
                    if i >= count {
                        return Err(CliError::Config(format!("{what}: row {i} out of range (< {count})")));
                    }
                    out[i] = Some(v.clone());
                }
                out.into_iter()
                    .enumerate()
                    .map(|(i, r)| r.ok_or_else(|| CliError::Config(format!("{what}: row {i} missing"))))
                    .collect()
            }
        }
    }
}

/// `d` plus one row of `d-1` thresholds per basis.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub d: usize,
    pub rows: Rows,
}

impl MatrixFile {
    pub fn thresholds(&self) -> Result<NoiseThresholds, CliError> {
        let d = prime(self.d)?;
        let rows = self.rows.ordered(d.get() + 1, "rows")?;
        NoiseThresholds::from_rows(d, &rows).map_err(|e| CliError::Config(format!("rows: {e}")))
    }
}

/// `d` plus the Bell weights, one row of `d` values per `alpha`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaFile {
    pub d: usize,
    pub lambda: Rows,
}

impl LambdaFile {
    pub fn weights(&self) -> Result<BellWeights, CliError> {
        let d = prime(self.d)?;
        let rows = self.lambda.ordered(d.get(), "lambda")?;
        if rows.iter().any(|r| r.len() != d.get()) {
            return Err(CliError::Config(format!("lambda: every row needs {} entries", d.get())));
        }
        BellWeights::from_row_major(d, rows.concat()).map_err(|e| CliError::Config(format!("lambda: {e}")))
    }
}

pub fn load_thresholds(path: &Path) -> Result<NoiseThresholds, CliError> {
    load::<MatrixFile>(path)?.thresholds()
}

fn default_eps() -> f64 {
    1e-14
}

fn default_eps_sec() -> f64 {
    1e-12
}

fn default_efficiency() -> f64 {
    1.0
}

fn default_eps_cor() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    /// `Q̂_c^j = q/(d-1)`; `q` comes from the axis on a noise sweep.
    Symmetric { q: Option<f64> },
    /// A full threshold matrix, inline or from a matrix file.
    Matrix {
        rows: Option<Rows>,
        path: Option<PathBuf>,
    },
    /// Every basis at `others`, basis `basis` at `q` (or the axis value).
    Asymmetric {
        basis: usize,
        others: f64,
        q: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LeakConfig {
    Shannon {
        #[serde(default = "default_efficiency")]
        efficiency: f64,
        #[serde(default = "default_eps_cor")]
        eps_cor: f64,
    },
    Fixed {
        bits: f64,
        #[serde(default = "default_eps_cor")]
        eps_cor: f64,
    },
}

impl Default for LeakConfig {
    fn default() -> Self {
        LeakConfig::Shannon {
            efficiency: 1.0,
            eps_cor: 1.0,
        }
    }
}

impl LeakConfig {
    pub fn model(&self) -> Result<LeakageModel, CliError> {
        let (mode, eps_cor) = match *self {
            LeakConfig::Shannon { efficiency, eps_cor } => (LeakMode::Shannon { efficiency }, eps_cor),
            LeakConfig::Fixed { bits, eps_cor } => (LeakMode::Fixed { bits }, eps_cor),
        };
        LeakageModel::new(mode, eps_cor).map_err(|e| CliError::Config(format!("leak: {e}")))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MPolicy {
    #[default]
    Optimize,
    /// Either an absolute `value` or a `fraction` of N.
    Fixed {
        value: Option<u64>,
        fraction: Option<f64>,
    },
}

impl MPolicy {
    /// `None` means optimize.
    pub fn resolve(&self, total: u64) -> Result<Option<u64>, CliError> {
        match *self {
            MPolicy::Optimize => Ok(None),
            MPolicy::Fixed { value: Some(m), fraction: None } => Ok(Some(m)),
            MPolicy::Fixed { value: None, fraction: Some(f) } if f > 0.0 && f < 1.0 => {
                Ok(Some(((total as f64 * f).round() as u64).max(1)))
            }
            MPolicy::Fixed { .. } => Err(CliError::Config(
                "m: fixed policy needs exactly one of value or fraction in (0, 1)".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Axis {
    #[serde(rename = "N")]
    Total,
    #[serde(rename = "Q")]
    Noise,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Total => "N",
            Axis::Noise => "Q",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
    /// Signal count for noise sweeps.
    #[serde(rename = "N")]
    pub total: Option<f64>,
}

impl SweepConfig {
    /// Axis values, ascending and deduplicated.
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let mut v = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(k)) if k >= 1 => {
                if k == 1 {
                    vec![a]
                } else {
                    match self.spacing {
                        Spacing::Linear => (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect(),
                        Spacing::Log => {
                            if !(a > 0.0 && b > 0.0) {
                                return Err(CliError::Config("sweep: log spacing needs positive start and stop".into()));
                            }
                            let (la, lb) = (a.log10(), b.log10());
                            (0..k)
                                .map(|i| 10f64.powf(la + (lb - la) * i as f64 / (k - 1) as f64))
                                .collect()
                        }
                    }
                }
            }
            _ => {
                return Err(CliError::Config(
                    "sweep: give either values or start, stop and points".into(),
                ))
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config("sweep: axis values must be finite".into()));
        }
        for x in &mut v {
            *x = match self.axis {
                Axis::Total => x.round(),
                // drop the last bits of grid arithmetic
                Axis::Noise => format!("{x:.12e}").parse().expect("formatted float"),
            };
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        if v.is_empty() {
            return Err(CliError::Config("sweep: no axis values".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub d: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eps_sec")]
    pub eps_sec: f64,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub leak: LeakConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub m: MPolicy,
    /// Split ratio `c`; `c_gamma` when absent.
    pub split: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn dimension(&self) -> Result<PrimeDimension, CliError> {
        prime(self.d)
    }

    pub fn targets(&self) -> Result<SecurityTargets, CliError> {
        SecurityTargets::new(self.eps, self.eps_sec).map_err(|e| CliError::Config(format!("eps: {e}")))
    }

    /// Thresholds at a given axis point.
    pub fn thresholds_at(&self, axis_value: f64, base_dir: &Path) -> Result<NoiseThresholds, CliError> {
        let d = self.dimension()?;
        let noise_axis = self.sweep.axis == Axis::Noise;
        let pick = |fixed: Option<f64>, what: &str| -> Result<f64, CliError> {
            match (noise_axis, fixed) {
                (true, None) => Ok(axis_value),
                (false, Some(q)) => Ok(q),
                (true, Some(_)) => Err(CliError::Config(format!(
                    "noise.{what}: must be omitted on a Q sweep (the axis supplies it)"
                ))),
                (false, None) => Err(CliError::Config(format!("noise.{what}: required on an N sweep"))),
            }
        };
        let bad = |e: hdqkd_core::Error| CliError::Config(format!("noise: {e}"));
        match &self.noise {
            NoiseConfig::Symmetric { q } => NoiseThresholds::symmetric(d, pick(*q, "q")?).map_err(bad),
            NoiseConfig::Asymmetric { basis, others, q } => {
                let q = pick(*q, "q")?;
                NoiseThresholds::symmetric(d, *others)
                    .and_then(|t| t.with_basis_noise(*basis, q))
                    .map_err(bad)
            }
            NoiseConfig::Matrix { rows, path } => {
                if noise_axis {
                    return Err(CliError::Config("noise: a matrix cannot be swept along Q".into()));
                }
                let file = match (rows, path) {
                    (Some(rows), None) => MatrixFile {
                        d: self.d,
                        rows: rows.clone(),
                    },
                    (None, Some(p)) => {
                        let f: MatrixFile = load(&base_dir.join(p))?;
                        if f.d != self.d {
                            return Err(CliError::Config(format!(
                                "noise.path: matrix has d = {}, scenario has d = {}",
                                f.d, self.d
                            )));
                        }
                        f
                    }
                    _ => return Err(CliError::Config("noise: matrix needs exactly one of rows or path".into())),
                };
                file.thresholds()
            }
        }
    }

    /// Signal count at a given axis point.
    pub fn total_at(&self, axis_value: f64) -> Result<u64, CliError> {
        let n = match self.sweep.axis {
            Axis::Total => axis_value,
            Axis::Noise => self
                .sweep
                .total
                .ok_or_else(|| CliError::Config("sweep.N: required on a Q sweep".into()))?,
        };
        if !(n >= 2.0 && n.fract() == 0.0 && n < 1.8e19) {
            return Err(CliError::Config(format!("N = {n} is not an integer >= 2")));
        }
        Ok(n as u64)
    }
}
