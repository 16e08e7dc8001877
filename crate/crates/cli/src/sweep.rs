use std::path::Path;

use hdqkd_core::keyrate::{evaluate_flagged, optimize_m, EvalOptions, Flag, KeyRateResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Axis, ScenarioConfig};
use crate::report::{flags_field, num, Table};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: f64,
    pub rate: f64,
    pub ell: u64,
    pub m_opt: u64,
    pub delta: f64,
    pub flags: Vec<&'static str>,
}

impl SweepRow {
    fn from_result(axis: f64, r: &KeyRateResult) -> Self {
        SweepRow {
            axis,
            rate: r.rate,
            ell: r.ell,
            m_opt: r.m,
            delta: r.delta_used,
            flags: r.flag_names(),
        }
    }

    pub fn infeasible(&self) -> bool {
        self.flags.contains(&Flag::Infeasible.as_str())
    }
}

/// An axis interval on which the rate strictly increases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Increase {
    pub from: f64,
    pub to: f64,
    pub rate_from: f64,
    pub rate_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutput {
    pub axis: &'static str,
    pub rows: Vec<SweepRow>,
    /// Present for noise sweeps.
    pub nonmonotone: Option<Vec<Increase>>,
}

impl SweepOutput {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["axis", "rate", "ell", "m_opt", "delta", "flags"]);
        for r in &self.rows {
            t.push(vec![
                num(r.axis),
                num(r.rate),
                r.ell.to_string(),
                r.m_opt.to_string(),
                num(r.delta),
                flags_field(&r.flags),
            ]);
        }
        t
    }
}

/// Adjacent rows where the rate strictly increases with the axis value.
pub fn detect_nonmonotonicity(rows: &[SweepRow]) -> Result<Vec<Increase>, CliError> {
    if rows.len() < 3 {
        return Err(CliError::Config("non-monotonicity check needs at least 3 rows".into()));
    }
    Ok(rows
        .windows(2)
        .filter(|w| w[1].rate > w[0].rate)
        .map(|w| Increase {
            from: w[0].axis,
            to: w[1].axis,
            rate_from: w[0].rate,
            rate_to: w[1].rate,
        })
        .collect())
}

/// One optimize (or fixed-m) evaluation per axis point, in axis order.
pub fn run_sweep(config: &ScenarioConfig, base_dir: &Path) -> Result<SweepOutput, CliError> {
    let targets = config.targets()?;
    let leak = config.leak.model()?;
    let opts = EvalOptions {
        split: config.split,
        beta: config.beta,
        ..EvalOptions::default()
    };
    let axis = config.sweep.points()?;
    let rows: Vec<Result<SweepRow, CliError>> = axis
        .par_iter()
        .map(|&x| {
            let qhat = config.thresholds_at(x, base_dir)?;
            let total = config.total_at(x)?;
            let r = match config.m.resolve(total)? {
                None => optimize_m(&qhat, total, &targets, &leak, &opts)?,
                Some(m) => evaluate_flagged(&qhat, total, m, &targets, &leak, &opts)?,
            };
            Ok(SweepRow::from_result(x, &r))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let nonmonotone = if config.sweep.axis == Axis::Noise && rows.len() >= 3 {
        Some(detect_nonmonotonicity(&rows)?)
    } else {
        None
    };
    Ok(SweepOutput {
        axis: config.sweep.axis.name(),
        rows,
        nonmonotone,
    })
}
