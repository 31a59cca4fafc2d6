//! Panel ingestion and moment estimation.
//!
//! A panel holds `T` observations of the same statistic (returns, P/L,
//! asset changes...) for `n` banks. For each bank `i` the rest of the system
//! `A` is the plain sum of the other banks' series, so `X_S = X_i + X_A` is
//! the sum of all columns.

use std::collections::HashSet;
use std::io::Read;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Result, RiskError};
use crate::gaussian::{var_normal, RiskParams};
use crate::measures::GaussianPair;

/// Smallest number of observations accepted in a panel.
pub const MIN_OBSERVATIONS: usize = 3;

/// Eigenvalues down to `-PSD_TOLERANCE * trace` are accepted as rounding.
const PSD_TOLERANCE: f64 = 1e-10;

/// Free-text description of what a panel contains. Carried through to
/// reports, never interpreted.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PanelMeta {
    /// Sampling frequency, e.g. "daily".
    pub frequency: Option<String>,
    /// Observed statistic, e.g. "log return" or "P/L".
    pub statistic: Option<String>,
}

/// How to read a panel from CSV.
#[derive(Debug, Clone)]
pub struct CsvFormat {
    pub delimiter: u8,
    pub meta: PanelMeta,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            meta: PanelMeta::default(),
        }
    }
}

/// `T x n` matrix of observations with one label per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    labels: Vec<String>,
    observations: DMatrix<f64>,
    meta: PanelMeta,
}

impl ReturnPanel {
    pub fn new(labels: Vec<String>, observations: DMatrix<f64>, meta: PanelMeta) -> Result<Self> {
        validate_labels(&labels)?;
        if observations.ncols() != labels.len() {
            return Err(RiskError::Domain(format!(
                "{} labels for {} columns",
                labels.len(),
                observations.ncols()
            )));
        }
        if observations.nrows() < MIN_OBSERVATIONS {
            return Err(RiskError::Domain(format!(
                "need at least {MIN_OBSERVATIONS} observations, got {}",
                observations.nrows()
            )));
        }
        if let Some((idx, v)) = observations
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            // column-major storage
            let (row, col) = (idx % observations.nrows(), idx / observations.nrows());
            return Err(RiskError::Domain(format!(
                "non-finite observation {v} at row {row}, column {:?}",
                labels[col]
            )));
        }
        Ok(Self {
            labels,
            observations,
            meta,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.observations
    }

    pub fn meta(&self) -> &PanelMeta {
        &self.meta
    }

    pub fn bank_count(&self) -> usize {
        self.labels.len()
    }

    pub fn sample_size(&self) -> usize {
        self.observations.nrows()
    }
}

fn validate_labels(labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(RiskError::Domain("panel has no banks".into()));
    }
    let mut seen = HashSet::new();
    for label in labels {
        if label.is_empty() {
            return Err(RiskError::Domain("empty bank label".into()));
        }
        if !seen.insert(label.as_str()) {
            return Err(RiskError::Domain(format!("duplicate bank label {label:?}")));
        }
    }
    Ok(())
}

/// Reads a panel from CSV.
///
/// The first row is the header with one label per bank. A leading column
/// whose header is `date` (any case) is skipped. Every other cell must be a
/// finite decimal number; row numbers in errors are 1-based file lines.
pub fn load_panel<R: Read>(source: R, format: &CsvFormat) -> Result<ReturnPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(1, e))?,
        None => {
            return Err(RiskError::parse(
                1,
                "-",
                "empty input, expected a header row",
            ))
        }
    };
    let skip_date = header
        .get(0)
        .is_some_and(|h| h.eq_ignore_ascii_case("date"));
    let first = usize::from(skip_date);
    let labels: Vec<String> = header.iter().skip(first).map(str::to_owned).collect();
    if labels.is_empty() {
        return Err(RiskError::parse(1, "-", "header has no bank columns"));
    }
    let mut seen = HashSet::new();
    for (k, label) in labels.iter().enumerate() {
        let column = (k + first + 1).to_string();
        if label.is_empty() {
            return Err(RiskError::parse(1, column, "empty bank label"));
        }
        if !seen.insert(label.as_str()) {
            return Err(RiskError::parse(
                1,
                column,
                format!("duplicate bank label {label:?}"),
            ));
        }
    }

    let width = header.len();
    let n = labels.len();
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    let mut last_line = 1usize;
    for rec in records {
        let rec = rec.map_err(|e| csv_error(last_line + 1, e))?;
        let line = rec.position().map_or(last_line + 1, |p| p.line() as usize);
        last_line = line;
        if rec.len() != width {
            return Err(RiskError::parse(
                line,
                "-",
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for (k, cell) in rec.iter().skip(first).enumerate() {
            let column = format!("{} ({})", k + first + 1, labels[k]);
            let v: f64 = cell.parse().map_err(|_| {
                RiskError::parse(line, column.clone(), format!("not a number: {cell:?}"))
            })?;
            if !v.is_finite() {
                return Err(RiskError::parse(
                    line,
                    column,
                    format!("non-finite value {cell:?}"),
                ));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows < MIN_OBSERVATIONS {
        return Err(RiskError::parse(
            last_line,
            "-",
            format!("need at least {MIN_OBSERVATIONS} data rows, found {rows}"),
        ));
    }
    let observations = DMatrix::from_row_slice(rows, n, &values);
    ReturnPanel::new(labels, observations, format.meta.clone())
}

fn csv_error(line: usize, err: csv::Error) -> RiskError {
    let line = err.position().map_or(line, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => RiskError::Io(e),
        kind => RiskError::parse(line, "-", format!("{kind:?}")),
    }
}

/// Sample means and covariance of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    labels: Vec<String>,
    means: DVector<f64>,
    covariance: DMatrix<f64>,
    sample_size: usize,
    warnings: Vec<String>,
}

impl MomentEstimate {
    /// Wraps externally supplied moments. The covariance must be symmetric,
    /// have a non-negative diagonal and be positive semidefinite.
    pub fn new(
        labels: Vec<String>,
        means: DVector<f64>,
        covariance: DMatrix<f64>,
        sample_size: usize,
    ) -> Result<Self> {
        validate_labels(&labels)?;
        let n = labels.len();
        if means.len() != n || covariance.shape() != (n, n) {
            return Err(RiskError::Domain(format!(
                "{n} labels, {} means, {}x{} covariance",
                means.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if means
            .iter()
            .chain(covariance.iter())
            .any(|v| !v.is_finite())
        {
            return Err(RiskError::Domain("moments must be finite".into()));
        }
        for i in 0..n {
            if covariance[(i, i)] < 0.0 {
                return Err(RiskError::InvalidCovariance(format!(
                    "negative variance for {:?}",
                    labels[i]
                )));
            }
            for j in 0..i {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                    return Err(RiskError::InvalidCovariance(format!(
                        "not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        check_psd(&covariance)?;
        let warnings = labels
            .iter()
            .enumerate()
            .filter(|&(i, _)| covariance[(i, i)] == 0.0)
            .map(|(_, l)| format!("bank {l:?} has zero variance"))
            .collect();
        Ok(Self {
            labels,
            means,
            covariance,
            sample_size,
            warnings,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.means
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    /// Non-fatal findings, e.g. banks with zero variance.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn index_of(&self, bank: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == bank)
    }

    /// Expected value of the system, the sum of all means.
    pub fn system_mean(&self) -> f64 {
        self.means.sum()
    }

    /// Variance of the system, `1' Sigma 1`.
    pub fn system_variance(&self) -> f64 {
        self.covariance.sum()
    }

    pub fn system_value_at_risk(&self, params: &RiskParams) -> Result<f64> {
        var_normal(self.system_mean(), self.system_variance().max(0.0), params)
    }
}

fn check_psd(covariance: &DMatrix<f64>) -> Result<()> {
    let trace = covariance.trace();
    let eig = SymmetricEigen::new(covariance.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE * trace.max(0.0) {
        Err(RiskError::NotPositiveSemidefinite(min))
    } else {
        Ok(())
    }
}

/// Column means and the unbiased (`T - 1`) sample covariance.
pub fn estimate_moments(panel: &ReturnPanel) -> Result<MomentEstimate> {
    let x = panel.observations();
    let t = x.nrows();
    let n = x.ncols();
    let means = DVector::from_iterator(n, x.column_iter().map(|c| c.sum() / t as f64));
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let mut covariance = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let c = centered.column(i).dot(&centered.column(j)) / (t - 1) as f64;
            covariance[(i, j)] = c;
            covariance[(j, i)] = c;
        }
    }
    MomentEstimate::new(panel.labels().to_vec(), means, covariance, t)
}

/// `(X_i, X_A)` for one bank, with `A` the sum of all other banks.
pub fn pair_for_bank(est: &MomentEstimate, bank: &str) -> Result<GaussianPair> {
    let i = est
        .index_of(bank)
        .ok_or_else(|| RiskError::UnknownBank(bank.to_owned()))?;
    let n = est.labels.len();
    if n < 2 {
        return Err(RiskError::DegenerateModel(
            "need at least two banks to form the rest of the system".into(),
        ));
    }
    let cov = &est.covariance;
    let var_i = cov[(i, i)];
    if var_i <= 0.0 {
        return Err(RiskError::DegenerateBank(bank.to_owned()));
    }
    let others = || (0..n).filter(move |&j| j != i);
    let mu_i = est.means[i];
    let mu_a = others().map(|j| est.means[j]).sum();
    let cov_ia = others().map(|j| cov[(i, j)]).sum();
    let var_a = others()
        .map(|j| others().map(|k| cov[(j, k)]).sum::<f64>())
        .sum();
    GaussianPair::new(mu_i, mu_a, var_i, var_a, cov_ia)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::to_system_view;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn load(text: &str) -> Result<ReturnPanel> {
        load_panel(text.as_bytes(), &CsvFormat::default())
    }

    #[test]
    fn minimal_panel() {
        let p = load("A,B\n1,2\n3,4\n5,7\n").unwrap();
        assert_eq!(p.bank_count(), 2);
        assert_eq!(p.sample_size(), 3);
        assert_eq!(p.observations()[(2, 1)], 7.0);
    }

    #[test]
    fn date_column_is_skipped() {
        let p = load("Date,A,B\n2024-01-02,1,2\n2024-01-03,3,4\n2024-01-04,5,7\n").unwrap();
        assert_eq!(p.labels(), &["A", "B"]);
        assert_eq!(p.observations()[(0, 0)], 1.0);
    }

    #[test]
    fn nan_cell_is_located() {
        let err = load("A,B\n1,2\n3,NaN\n5,7\n").unwrap_err();
        match err {
            RiskError::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "2 (B)");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            load("A,B\n1,2\n3\n5,7\n"),
            Err(RiskError::Parse { row: 3, .. })
        ));
        assert!(matches!(
            load("A,B\n1,x\n3,4\n5,7\n"),
            Err(RiskError::Parse { row: 2, .. })
        ));
        assert!(matches!(
            load("A,A\n1,2\n3,4\n5,7\n"),
            Err(RiskError::Parse { row: 1, .. })
        ));
        assert!(matches!(
            load("A,B\n1,2\n3,4\n"),
            Err(RiskError::Parse { .. })
        ));
        assert!(matches!(load(""), Err(RiskError::Parse { row: 1, .. })));
        assert!(matches!(
            load("A,B\n1,2\n3,inf\n5,6\n"),
            Err(RiskError::Parse { .. })
        ));
    }

    #[test]
    fn identical_columns_give_equal_entries() {
        let p = load("A,B\n1,1\n-2,-2\n0.5,0.5\n4,4\n").unwrap();
        let est = estimate_moments(&p).unwrap();
        let c = est.covariance();
        assert_eq!(c[(0, 0)], c[(1, 1)]);
        assert_eq!(c[(0, 1)], c[(0, 0)]);
        assert_eq!(c[(1, 0)], c[(0, 0)]);
    }

    #[test]
    fn negated_column_has_correlation_minus_one() {
        let p = load("A,B\n1,-1\n-2,2\n0.5,-0.5\n4,-4\n").unwrap();
        let est = estimate_moments(&p).unwrap();
        let c = est.covariance();
        let rho = c[(0, 1)] / (c[(0, 0)] * c[(1, 1)]).sqrt();
        assert!((rho + 1.0).abs() < 1e-15);
    }

    #[test]
    fn unbiased_divisor() {
        let p = load("A,B\n1,0\n2,0\n3,1\n").unwrap();
        let est = estimate_moments(&p).unwrap();
        assert_eq!(est.means()[0], 2.0);
        assert_eq!(est.covariance()[(0, 0)], 1.0);
        assert!(est.warnings().is_empty());
        let p = load("A,B\n1,5\n2,5\n3,5\n").unwrap();
        let est = estimate_moments(&p).unwrap();
        assert_eq!(est.warnings().len(), 1);
    }

    #[test]
    fn moment_estimate_validation() {
        let l = labels(&["a", "b"]);
        let m = DVector::zeros(2);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(MomentEstimate::new(l.clone(), m.clone(), asym, 10).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            MomentEstimate::new(l.clone(), m.clone(), indef, 10),
            Err(RiskError::NotPositiveSemidefinite(_))
        ));
        let neg = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(MomentEstimate::new(l, m, neg, 10).is_err());
    }

    #[test]
    fn two_bank_pair_is_the_off_diagonal() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let est = MomentEstimate::new(
            labels(&["a", "b"]),
            DVector::from_vec(vec![0.1, 0.2]),
            cov,
            10,
        )
        .unwrap();
        let pair = pair_for_bank(&est, "a").unwrap();
        assert_eq!(
            (
                pair.mu_i(),
                pair.mu_a(),
                pair.var_i(),
                pair.var_a(),
                pair.cov_ia()
            ),
            (0.1, 0.2, 1.0, 2.0, 0.3)
        );
        let view = to_system_view(&pair);
        assert_eq!(view.var_s, 1.0 + 2.0 * 0.3 + 2.0);
    }

    #[test]
    fn three_bank_pairs() {
        let ident = MomentEstimate::new(
            labels(&["a", "b", "c"]),
            DVector::zeros(3),
            DMatrix::identity(3, 3),
            10,
        )
        .unwrap();
        let p = pair_for_bank(&ident, "b").unwrap();
        assert_eq!((p.var_i(), p.var_a(), p.cov_ia()), (1.0, 2.0, 0.0));

        let ones = MomentEstimate::new(
            labels(&["a", "b", "c"]),
            DVector::zeros(3),
            DMatrix::from_element(3, 3, 1.0),
            10,
        )
        .unwrap();
        let p = pair_for_bank(&ones, "c").unwrap();
        assert_eq!((p.var_i(), p.var_a(), p.cov_ia()), (1.0, 4.0, 2.0));
    }

    #[test]
    fn pair_errors() {
        let est = MomentEstimate::new(
            labels(&["a", "b", "c"]),
            DVector::zeros(3),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0])),
            10,
        )
        .unwrap();
        assert!(matches!(
            pair_for_bank(&est, "zz"),
            Err(RiskError::UnknownBank(_))
        ));
        assert!(matches!(
            pair_for_bank(&est, "a"),
            Err(RiskError::DegenerateBank(_))
        ));
        let single = MomentEstimate::new(
            labels(&["a"]),
            DVector::zeros(1),
            DMatrix::identity(1, 1),
            10,
        )
        .unwrap();
        assert!(pair_for_bank(&single, "a").is_err());
    }
}
