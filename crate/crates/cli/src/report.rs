use hdqkd_core::bounds::ConsistencyReport;
use hdqkd_core::keyrate::KeyRateResult;
use hdqkd_core::mub::BellWeights;
use serde::Serialize;

use crate::CliError;

/// Rows of strings with a header; rendered through the csv writer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Output(e.to_string())
}

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn flags_field(flags: &[&str]) -> String {
    flags.join(";")
}

pub fn weight_rows(w: &BellWeights) -> Vec<Vec<f64>> {
    w.as_slice().chunks(w.dimension().get()).map(<[f64]>::to_vec).collect()
}

fn matrix_field(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyRateRecord {
    pub d: usize,
    #[serde(rename = "N")]
    pub total: u64,
    pub m: u64,
    pub n: u64,
    pub ell: u64,
    pub rate: f64,
    pub delta: f64,
    pub branch: &'static str,
    pub c: f64,
    pub beta: f64,
    pub gamma: f64,
    pub leak: f64,
    pub margin: Option<f64>,
    pub achieved_security: f64,
    pub negativity: f64,
    pub lambda: Vec<Vec<f64>>,
    pub flags: Vec<&'static str>,
}

impl KeyRateRecord {
    pub const HEADER: [&'static str; 17] = [
        "d", "N", "m", "n", "ell", "rate", "delta", "branch", "c", "beta", "gamma", "leak", "margin",
        "achieved_security", "negativity", "lambda", "flags",
    ];

    pub fn from_result(r: &KeyRateResult) -> Self {
        KeyRateRecord {
            d: r.d.get(),
            total: r.total,
            m: r.m,
            n: r.key_rounds,
            ell: r.ell,
            rate: r.rate,
            delta: r.delta_used,
            branch: r.branch.as_str(),
            c: r.split,
            beta: r.beta,
            gamma: r.gamma,
            leak: r.leak,
            margin: r.margin.is_finite().then_some(r.margin),
            achieved_security: r.achieved_security,
            negativity: r.negativity,
            lambda: weight_rows(&r.lambda),
            flags: r.flag_names(),
        }
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.total.to_string(),
            self.m.to_string(),
            self.n.to_string(),
            self.ell.to_string(),
            num(self.rate),
            num(self.delta),
            self.branch.to_string(),
            num(self.c),
            num(self.beta),
            num(self.gamma),
            num(self.leak),
            self.margin.map(num).unwrap_or_default(),
            num(self.achieved_security),
            num(self.negativity),
            matrix_field(&self.lambda),
            flags_field(&self.flags),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRecord {
    pub d: usize,
    #[serde(rename = "N")]
    pub total: u64,
    pub m: u64,
    pub eps: f64,
    pub eps_sec: f64,
    pub c: f64,
    pub beta: f64,
    pub c_gamma: f64,
    pub chi: f64,
    pub delta_min: f64,
    pub branch: &'static str,
    pub key_candidate: f64,
    pub test_candidate: f64,
    pub delta: f64,
    pub ln_key_term: f64,
    pub ln_test_term: f64,
    pub ln_size_term: f64,
    pub ln_simple_error: f64,
    pub ln_union_error: f64,
    pub ln_basic_error: Option<f64>,
    pub achieved_security: f64,
    pub achieved_security_outer_union: f64,
    pub within_target: bool,
    pub slack: f64,
    pub size_term_dominated: bool,
    pub hoeffding_condition: bool,
    pub m_at_most_half: bool,
}

impl BoundsRecord {
    pub const HEADER: [&'static str; 27] = [
        "d", "N", "m", "eps", "eps_sec", "c", "beta", "c_gamma", "chi", "delta_min", "branch",
        "key_candidate", "test_candidate", "delta", "ln_key_term", "ln_test_term", "ln_size_term",
        "ln_simple_error", "ln_union_error", "ln_basic_error", "achieved_security",
        "achieved_security_outer_union", "within_target", "slack", "size_term_dominated",
        "hoeffding_condition", "m_at_most_half",
    ];

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        total: u64,
        m: u64,
        eps: f64,
        eps_sec: f64,
        delta: f64,
        basic: Option<f64>,
        r: &ConsistencyReport,
    ) -> Self {
        let dm = &r.delta_min;
        BoundsRecord {
            d,
            total,
            m,
            eps,
            eps_sec,
            c: dm.split,
            beta: dm.beta,
            c_gamma: dm.c_gamma,
            chi: dm.chi,
            delta_min: dm.delta,
            branch: dm.branch.as_str(),
            key_candidate: dm.key_candidate,
            test_candidate: dm.test_candidate,
            delta,
            ln_key_term: r.terms.key,
            ln_test_term: r.terms.test,
            ln_size_term: r.terms.size,
            ln_simple_error: r.simple_error.ln(),
            ln_union_error: r.union_error.ln(),
            ln_basic_error: basic,
            achieved_security: r.achieved_security,
            achieved_security_outer_union: r.achieved_security_outer_union,
            within_target: r.within_target,
            slack: r.slack,
            size_term_dominated: r.size_term_dominated,
            hoeffding_condition: r.hoeffding_condition,
            m_at_most_half: 2 * m <= total,
        }
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.total.to_string(),
            self.m.to_string(),
            num(self.eps),
            num(self.eps_sec),
            num(self.c),
            num(self.beta),
            num(self.c_gamma),
            num(self.chi),
            num(self.delta_min),
            self.branch.to_string(),
            num(self.key_candidate),
            num(self.test_candidate),
            num(self.delta),
            num(self.ln_key_term),
            num(self.ln_test_term),
            num(self.ln_size_term),
            num(self.ln_simple_error),
            num(self.ln_union_error),
            self.ln_basic_error.map(num).unwrap_or_default(),
            num(self.achieved_security),
            num(self.achieved_security_outer_union),
            self.within_target.to_string(),
            num(self.slack),
            self.size_term_dominated.to_string(),
            self.hoeffding_condition.to_string(),
            self.m_at_most_half.to_string(),
        ]
    }
}
