//! Tabular check reports shared by the diagnostic routines.

use serde::Serialize;

use crate::group::GroupPoint;

/// One line of a check report. `worst_slack` is the smallest observed
/// slack of the checked inequality (negative means violated); `argmax_pair`
/// names the sample that attained it.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub worst_slack: f64,
    pub argmax_pair: String,
    pub violations: usize,
    pub passed: bool,
}

impl CheckRow {
    pub fn new(check: impl Into<String>) -> Self {
        CheckRow {
            check: check.into(),
            worst_slack: f64::INFINITY,
            argmax_pair: String::new(),
            violations: 0,
            passed: true,
        }
    }

    /// Records one slack observation; `ok` says whether it satisfies the check.
    pub(crate) fn observe(&mut self, slack: f64, ok: bool, witness: impl FnOnce() -> String) {
        if !ok {
            self.violations += 1;
            self.passed = false;
        }
        if slack < self.worst_slack || (slack.is_nan() && !self.worst_slack.is_nan()) {
            self.worst_slack = slack;
            self.argmax_pair = witness();
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckReport {
    pub title: String,
    pub notes: Vec<String>,
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn new(title: impl Into<String>) -> Self {
        CheckReport {
            title: title.into(),
            notes: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn row(&self, check: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.check == check)
    }

    /// CSV with columns `check,worst_slack,argmax_pair`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,worst_slack,argmax_pair\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                r.check,
                fmt_f64(r.worst_slack),
                csv_field(&r.argmax_pair)
            ));
        }
        out
    }
}

/// 12-significant-digit rendering used in every text output, in the style
/// of C's `%.12g`: fixed notation for exponents in `[-5, 12)`, scientific
/// otherwise, trailing zeros removed.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn fmt_point(p: &GroupPoint) -> String {
    let parts: Vec<String> = p.coords().iter().map(|c| format!("{c:.12e}")).collect();
    format!("({})", parts.join(" "))
}

pub(crate) fn fmt_pair(p: &GroupPoint, q: &GroupPoint) -> String {
    format!("{}|{}", fmt_point(p), fmt_point(q))
}
