//! Text, CSV and JSON renderings of analysis and validation results.
//!
//! CSV and JSON carry 12 significant digits, the table 6. Values are rounded
//! once to the target precision and then printed in shortest round-trip form,
//! so a CSV cell and the matching JSON number are the same decimal.

use std::io::{self, Write};

use serde::Serialize;

use crate::measures::BankRiskReport;
use crate::oracle::ValidationReport;

pub const EXPORT_DIGITS: usize = 12;
pub const TABLE_DIGITS: usize = 6;

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    if !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v)
        .parse()
        .unwrap_or(v)
}

fn fmt_table_number(v: f64) -> String {
    let r = round_sig(v, TABLE_DIGITS);
    if r == 0.0 {
        "0".to_owned()
    } else if (1e-4..1e15).contains(&r.abs()) {
        r.to_string()
    } else {
        format!("{:.*e}", TABLE_DIGITS - 1, r)
    }
}

fn fmt_export_number(v: Option<f64>) -> String {
    v.map(|v| round_sig(v, EXPORT_DIGITS).to_string())
        .unwrap_or_default()
}

/// One bank's line in an analysis report. Statistics are `None` when the bank
/// could not be analysed or the statistic is undefined for it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub bank: String,
    pub status: String,
    pub var_i: Option<f64>,
    pub var_mean_i: Option<f64>,
    pub covar_ai: Option<f64>,
    pub covare_ai: Option<f64>,
    pub delta_coll_var: Option<f64>,
    pub delta_coll_es: Option<f64>,
    pub delta_cond_var: Option<f64>,
    pub delta_contr_var: Option<f64>,
    pub var_contribution: Option<f64>,
    pub beta_ai: Option<f64>,
    pub beta_si: Option<f64>,
    pub beta_is: Option<f64>,
    pub rho: Option<f64>,
}

/// Column keys (CSV/JSON) and table headings, in output order.
pub const ROW_COLUMNS: [(&str, &str); 13] = [
    ("var_i", "VaR"),
    ("var_mean_i", "VaR_mean"),
    ("covar_ai", "CoVaR"),
    ("covare_ai", "CoVaRe"),
    ("delta_coll_var", "ΔCollVaR"),
    ("delta_coll_es", "ΔCollES"),
    ("delta_cond_var", "ΔCondVaR"),
    ("delta_contr_var", "ΔContrVaR"),
    ("var_contribution", "VaR_contrib"),
    ("beta_ai", "β_Ai"),
    ("beta_si", "β_Si"),
    ("beta_is", "β_iS"),
    ("rho", "ρ"),
];

impl ReportRow {
    pub fn from_report(bank: &str, r: &BankRiskReport) -> Self {
        let status = if r.delta_contr_var.is_some() {
            "ok"
        } else {
            "degenerate system: contribution statistics unavailable"
        };
        Self {
            bank: bank.to_owned(),
            status: status.to_owned(),
            var_i: Some(r.var_i),
            var_mean_i: Some(r.var_mean_i),
            covar_ai: Some(r.covar_ai),
            covare_ai: Some(r.covare_ai),
            delta_coll_var: Some(r.delta_coll_var),
            delta_coll_es: Some(r.delta_coll_es),
            delta_cond_var: Some(r.delta_cond_var),
            delta_contr_var: r.delta_contr_var,
            var_contribution: r.var_contribution,
            beta_ai: Some(r.beta_ai),
            beta_si: Some(r.beta_si),
            beta_is: r.beta_is,
            rho: Some(r.rho),
        }
    }

    pub fn unavailable(bank: &str, reason: impl Into<String>) -> Self {
        Self {
            bank: bank.to_owned(),
            status: reason.into(),
            var_i: None,
            var_mean_i: None,
            covar_ai: None,
            covare_ai: None,
            delta_coll_var: None,
            delta_coll_es: None,
            delta_cond_var: None,
            delta_contr_var: None,
            var_contribution: None,
            beta_ai: None,
            beta_si: None,
            beta_is: None,
            rho: None,
        }
    }

    pub fn values(&self) -> [Option<f64>; 13] {
        [
            self.var_i,
            self.var_mean_i,
            self.covar_ai,
            self.covare_ai,
            self.delta_coll_var,
            self.delta_coll_es,
            self.delta_cond_var,
            self.delta_contr_var,
            self.var_contribution,
            self.beta_ai,
            self.beta_si,
            self.beta_is,
            self.rho,
        ]
    }

    fn rounded(&self, digits: usize) -> Self {
        let r = |v: Option<f64>| v.map(|v| round_sig(v, digits));
        Self {
            bank: self.bank.clone(),
            status: self.status.clone(),
            var_i: r(self.var_i),
            var_mean_i: r(self.var_mean_i),
            covar_ai: r(self.covar_ai),
            covare_ai: r(self.covare_ai),
            delta_coll_var: r(self.delta_coll_var),
            delta_coll_es: r(self.delta_coll_es),
            delta_cond_var: r(self.delta_cond_var),
            delta_contr_var: r(self.delta_contr_var),
            var_contribution: r(self.var_contribution),
            beta_ai: r(self.beta_ai),
            beta_si: r(self.beta_si),
            beta_is: r(self.beta_is),
            rho: r(self.rho),
        }
    }
}

/// Result of `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOutput {
    pub alpha: f64,
    pub quantile: f64,
    /// `"model"` or the panel path.
    pub source: String,
    pub frequency: Option<String>,
    pub statistic: Option<String>,
    pub sample_size: Option<usize>,
    /// `VaR(X_S)` of the whole system.
    pub system_var: Option<f64>,
    pub warnings: Vec<String>,
    pub rows: Vec<ReportRow>,
}

fn write_aligned(out: &mut dyn Write, cells: &[Vec<String>], left_cols: usize) -> io::Result<()> {
    let ncols = cells.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|c| {
            cells
                .iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    for row in cells {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let pad = widths[c] - cell.chars().count();
            if c < left_cols || c + 1 == row.len() {
                line.push_str(cell);
                if c + 1 < row.len() {
                    line.extend(std::iter::repeat_n(' ', pad));
                }
            } else {
                line.extend(std::iter::repeat_n(' ', pad));
                line.push_str(cell);
            }
        }
        writeln!(out, "{}", line.trim_end())?;
    }
    Ok(())
}

impl AnalysisOutput {
    pub fn write_table(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(
            out,
            "alpha = {}  quantile = {}  source = {}",
            self.alpha,
            fmt_table_number(self.quantile),
            self.source
        )?;
        if let Some(t) = self.sample_size {
            writeln!(out, "observations = {t}")?;
        }
        let mut cells = vec![std::iter::once("bank".to_owned())
            .chain(ROW_COLUMNS.iter().map(|(_, h)| (*h).to_owned()))
            .chain(std::iter::once("status".to_owned()))
            .collect::<Vec<_>>()];
        for row in &self.rows {
            cells.push(
                std::iter::once(row.bank.clone())
                    .chain(
                        row.values()
                            .iter()
                            .map(|v| v.map_or_else(|| "n/a".to_owned(), fmt_table_number)),
                    )
                    .chain(std::iter::once(row.status.clone()))
                    .collect(),
            );
        }
        write_aligned(out, &cells, 1)?;
        if let Some(v) = self.system_var {
            writeln!(out, "system VaR = {}", fmt_table_number(v))?;
        }
        Ok(())
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header = std::iter::once("bank")
            .chain(ROW_COLUMNS.iter().map(|(k, _)| *k))
            .chain(std::iter::once("status"));
        w.write_record(header)?;
        for row in &self.rows {
            let record = std::iter::once(row.bank.clone())
                .chain(row.values().into_iter().map(fmt_export_number))
                .chain(std::iter::once(row.status.clone()));
            w.write_record(record)?;
        }
        w.flush()
    }

    pub fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        let rounded = AnalysisOutput {
            quantile: round_sig(self.quantile, EXPORT_DIGITS),
            system_var: self.system_var.map(|v| round_sig(v, EXPORT_DIGITS)),
            rows: self.rows.iter().map(|r| r.rounded(EXPORT_DIGITS)).collect(),
            ..self.clone()
        };
        serde_json::to_writer_pretty(&mut *out, &rounded)?;
        writeln!(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BankValidation {
    pub bank: String,
    #[serde(flatten)]
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationOutput {
    pub passed: bool,
    pub reports: Vec<BankValidation>,
}

impl ValidationOutput {
    pub fn new(reports: Vec<BankValidation>) -> Self {
        let passed = reports.iter().all(|r| r.report.passed());
        Self { passed, reports }
    }

    pub fn write_table(&self, out: &mut dyn Write) -> io::Result<()> {
        for (k, bv) in self.reports.iter().enumerate() {
            if k > 0 {
                writeln!(out)?;
            }
            let r = &bv.report;
            writeln!(
                out,
                "bank {}  N = {}  bandwidth = {}  seed = {}  alpha = {}",
                bv.bank, r.config.sample_count, r.config.bandwidth, r.config.seed, r.config.alpha
            )?;
            writeln!(out, "rng: {}", r.rng)?;
            let mut cells = vec![[
                "statistic",
                "closed_form",
                "empirical",
                "abs_error",
                "tolerance",
                "tail_n",
                "result",
            ]
            .map(str::to_owned)
            .to_vec()];
            for c in &r.records {
                cells.push(vec![
                    c.statistic.name().to_owned(),
                    fmt_table_number(c.closed_form),
                    fmt_table_number(c.empirical),
                    fmt_table_number(c.abs_error),
                    fmt_table_number(c.tolerance),
                    c.effective_tail_samples.to_string(),
                    if c.pass { "PASS" } else { "FAIL" }.to_owned(),
                ]);
            }
            for u in &r.unevaluated {
                cells.push(vec![
                    u.statistic.name().to_owned(),
                    fmt_table_number(u.closed_form),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    format!("UNEVALUATED ({})", u.reason),
                ]);
            }
            write_aligned(out, &cells, 1)?;
        }
        writeln!(
            out,
            "overall: {}",
            if self.passed { "PASS" } else { "FAIL" }
        )
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "bank",
            "statistic",
            "closed_form",
            "empirical",
            "abs_error",
            "tolerance",
            "effective_tail_samples",
            "pass",
        ])?;
        for bv in &self.reports {
            for c in &bv.report.records {
                w.write_record([
                    bv.bank.clone(),
                    c.statistic.name().to_owned(),
                    fmt_export_number(Some(c.closed_form)),
                    fmt_export_number(Some(c.empirical)),
                    fmt_export_number(Some(c.abs_error)),
                    fmt_export_number(Some(c.tolerance)),
                    c.effective_tail_samples.to_string(),
                    c.pass.to_string(),
                ])?;
            }
            for u in &bv.report.unevaluated {
                w.write_record([
                    bv.bank.clone(),
                    u.statistic.name().to_owned(),
                    fmt_export_number(Some(u.closed_form)),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "unevaluated".to_owned(),
                ])?;
            }
        }
        w.flush()
    }

    pub fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut *out, self)?;
        writeln!(out)
    }
}
