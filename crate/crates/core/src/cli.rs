//! The `sysrisk` command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or input error.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Result, RiskError};
use crate::estimation::{self, CsvFormat, MomentEstimate, PanelMeta};
use crate::gaussian::RiskParams;
use crate::measures::{self, GaussianPair};
use crate::oracle::{self, ClosedForms, McConfig};
use crate::render::{AnalysisOutput, BankValidation, ReportRow, ValidationOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Label of the single row produced from `--model`.
pub const MODEL_BANK: &str = "i";

#[derive(Debug, Parser)]
#[command(
    name = "sysrisk",
    version,
    about = "Gaussian systemic-risk statistics per bank"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the per-bank risk report.
    Analyze(AnalyzeArgs),
    /// Check the closed forms against Monte Carlo simulation.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct Source {
    /// Panel CSV with one column per bank; "-" reads stdin.
    #[arg(long, value_name = "PATH", group = "source")]
    pub input: Option<PathBuf>,
    /// Inline bivariate model.
    #[arg(
        long,
        value_name = "MU_I,MU_A,VAR_I,VAR_A,COV",
        group = "source",
        allow_hyphen_values = true
    )]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[command(flatten)]
    pub source: Source,
    /// VaR level, strictly between 0.5 and 1.
    #[arg(long, default_value_t = 0.99)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Comma-separated subset of panel labels.
    #[arg(long, value_delimiter = ',')]
    pub banks: Vec<String>,
    /// Free-text sampling frequency recorded with the panel.
    #[arg(long)]
    pub frequency: Option<String>,
    /// Free-text name of the observed statistic (return, P/L, ...).
    #[arg(long)]
    pub statistic: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = McConfig::default().sample_count)]
    pub samples: usize,
    /// Conditioning half-width in standard deviations of the conditioning variable.
    #[arg(long, default_value_t = McConfig::default().bandwidth)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = McConfig::default().seed)]
    pub seed: u64,
    /// Adds 1 to the named closed form before comparing (debug builds only).
    #[cfg(debug_assertions)]
    #[arg(long, hide = true, value_name = "STATISTIC")]
    pub corrupt: Option<String>,
}

/// Error that ends the command with a nonzero exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<RiskError> for Failure {
    fn from(e: RiskError) -> Self {
        let code = match e {
            RiskError::InternalConsistency { .. } => EXIT_VALIDATION_FAILED,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Parses `MU_I,MU_A,VAR_I,VAR_A,COV`.
pub fn parse_model(spec: &str) -> Result<GaussianPair> {
    const FIELDS: [&str; 5] = ["MU_I", "MU_A", "VAR_I", "VAR_A", "COV"];
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != FIELDS.len() {
        return Err(RiskError::InvalidConfig(format!(
            "--model expects 5 comma-separated numbers MU_I,MU_A,VAR_I,VAR_A,COV, got {}",
            parts.len()
        )));
    }
    let mut v = [0.0; 5];
    for (k, (part, field)) in parts.iter().zip(FIELDS).enumerate() {
        v[k] = part
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| {
                RiskError::InvalidConfig(format!(
                    "--model field {field}: {part:?} is not a finite number"
                ))
            })?;
    }
    GaussianPair::new(v[0], v[1], v[2], v[3], v[4])
        .map_err(|e| RiskError::InvalidConfig(format!("--model: {e}")))
}

enum Loaded {
    Model(GaussianPair),
    Panel {
        source: String,
        estimate: MomentEstimate,
        meta: PanelMeta,
    },
}

fn load(common: &CommonArgs, stdin: &mut dyn Read) -> std::result::Result<Loaded, Failure> {
    if let Some(spec) = &common.source.model {
        if !common.banks.is_empty() {
            return Err(usage("--banks applies only to --input panels"));
        }
        return Ok(Loaded::Model(parse_model(spec)?));
    }
    let path = common
        .source
        .input
        .as_ref()
        .ok_or_else(|| usage("one of --input or --model is required"))?;
    let format = CsvFormat {
        meta: PanelMeta {
            frequency: common.frequency.clone(),
            statistic: common.statistic.clone(),
        },
        ..CsvFormat::default()
    };
    let (source, panel) = if path.as_os_str() == "-" {
        ("stdin".to_owned(), estimation::load_panel(stdin, &format))
    } else {
        let file =
            File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
        (
            path.display().to_string(),
            estimation::load_panel(BufReader::new(file), &format),
        )
    };
    let panel = panel.map_err(|e| usage(format!("{source}: {e}")))?;
    if panel.bank_count() < 2 {
        return Err(usage(format!(
            "{source}: need at least two banks, found {}",
            panel.bank_count()
        )));
    }
    let estimate =
        estimation::estimate_moments(&panel).map_err(|e| usage(format!("{source}: {e}")))?;
    Ok(Loaded::Panel {
        source,
        estimate,
        meta: panel.meta().clone(),
    })
}

fn selected_banks(
    est: &MomentEstimate,
    filter: &[String],
) -> std::result::Result<Vec<String>, Failure> {
    if filter.is_empty() {
        return Ok(est.labels().to_vec());
    }
    for b in filter {
        if est.index_of(b).is_none() {
            return Err(RiskError::UnknownBank(b.clone()).into());
        }
    }
    Ok(filter.to_vec())
}

fn analyze(
    args: &AnalyzeArgs,
    stdin: &mut dyn Read,
) -> std::result::Result<(AnalysisOutput, i32), Failure> {
    let common = &args.common;
    let params = RiskParams::new(common.alpha)?;
    let mut out = AnalysisOutput {
        alpha: params.alpha(),
        quantile: params.quantile(),
        source: "model".to_owned(),
        frequency: None,
        statistic: None,
        sample_size: None,
        system_var: None,
        warnings: Vec::new(),
        rows: Vec::new(),
    };
    match load(common, stdin)? {
        Loaded::Model(pair) => {
            let report = measures::full_report(&pair, &params)?;
            out.system_var = Some(measures::system_value_at_risk(&pair, &params)?);
            out.rows.push(ReportRow::from_report(MODEL_BANK, &report));
        }
        Loaded::Panel {
            source,
            estimate,
            meta,
        } => {
            out.source = source;
            out.frequency = meta.frequency;
            out.statistic = meta.statistic;
            out.sample_size = Some(estimate.sample_size());
            out.system_var = Some(estimate.system_value_at_risk(&params)?);
            out.warnings.extend(estimate.warnings().iter().cloned());
            for bank in selected_banks(&estimate, &common.banks)? {
                let row = match estimation::pair_for_bank(&estimate, &bank) {
                    Ok(pair) => {
                        ReportRow::from_report(&bank, &measures::full_report(&pair, &params)?)
                    }
                    Err(e) => {
                        out.warnings.push(format!("bank {bank}: {e}"));
                        ReportRow::unavailable(&bank, format!("unavailable: {e}"))
                    }
                };
                out.rows.push(row);
            }
        }
    }
    for row in &out.rows {
        if row.status != "ok" && row.var_i.is_some() {
            out.warnings
                .push(format!("bank {}: {}", row.bank, row.status));
        }
    }
    Ok((out, EXIT_OK))
}

fn validate(
    args: &ValidateArgs,
    stdin: &mut dyn Read,
) -> std::result::Result<(ValidationOutput, i32), Failure> {
    let common = &args.common;
    let config = McConfig {
        sample_count: args.samples,
        bandwidth: args.bandwidth,
        seed: args.seed,
        alpha: common.alpha,
    };
    config.validate()?;
    let params = config.params()?;
    let pairs: Vec<(String, GaussianPair)> = match load(common, stdin)? {
        Loaded::Model(pair) => vec![(MODEL_BANK.to_owned(), pair)],
        Loaded::Panel { estimate, .. } => selected_banks(&estimate, &common.banks)?
            .into_iter()
            .map(|b| {
                let pair = estimation::pair_for_bank(&estimate, &b)
                    .map_err(|e| usage(format!("bank {b}: {e}")))?;
                Ok((b, pair))
            })
            .collect::<std::result::Result<_, Failure>>()?,
    };
    let mut reports = Vec::with_capacity(pairs.len());
    for (bank, pair) in pairs {
        #[allow(unused_mut)]
        let mut closed = ClosedForms::from_pair(&pair, &params)
            .map_err(|e| usage(format!("bank {bank}: {e}")))?;
        #[cfg(debug_assertions)]
        if let Some(name) = &args.corrupt {
            let stat = oracle::Statistic::from_name(name)
                .ok_or_else(|| usage(format!("unknown statistic {name:?}")))?;
            closed.set(stat, closed.get(stat) + 1.0);
        }
        let report = oracle::validate_against(&pair, &config, &closed)?;
        reports.push(BankValidation { bank, report });
    }
    let out = ValidationOutput::new(reports);
    let code = if out.passed {
        EXIT_OK
    } else {
        EXIT_VALIDATION_FAILED
    };
    Ok((out, code))
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Analyze(args) => analyze(args, stdin).and_then(|(out, code)| {
            for w in &out.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            match args.common.format {
                Format::Table => out.write_table(stdout),
                Format::Csv => out.write_csv(stdout),
                Format::Json => out.write_json(stdout),
            }?;
            Ok(code)
        }),
        Command::Validate(args) => validate(args, stdin).and_then(|(out, code)| {
            for bv in &out.reports {
                for u in &bv.report.unevaluated {
                    let _ = writeln!(
                        stderr,
                        "warning: bank {}: {} unevaluated: {}",
                        bv.bank,
                        u.statistic.name(),
                        u.reason
                    );
                }
            }
            match args.common.format {
                Format::Table => out.write_table(stdout),
                Format::Csv => out.write_csv(stdout),
                Format::Json => out.write_json(stdout),
            }?;
            Ok(code)
        }),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_parsing() {
        let p = parse_model("0, 0, 1, 4, 1").unwrap();
        assert_eq!((p.var_i(), p.var_a(), p.cov_ia()), (1.0, 4.0, 1.0));
        let e = parse_model("0,0,x,4,1").unwrap_err().to_string();
        assert!(e.contains("VAR_I"), "{e}");
        let e = parse_model("0,0,1,4").unwrap_err().to_string();
        assert!(e.contains("5"), "{e}");
        assert!(parse_model("0,0,1,1,2").is_err());
        assert!(parse_model("0,0,0,1,0").is_err());
    }

    #[test]
    fn parser_accepts_negative_model_values() {
        let cli = Cli::try_parse_from(["sysrisk", "analyze", "--model", "-1,0,1,1,-0.5"]).unwrap();
        let Command::Analyze(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.common.source.model.as_deref(), Some("-1,0,1,1,-0.5"));
    }

    #[test]
    fn exactly_one_source() {
        assert!(Cli::try_parse_from(["sysrisk", "analyze"]).is_err());
        assert!(Cli::try_parse_from([
            "sysrisk",
            "analyze",
            "--input",
            "a.csv",
            "--model",
            "0,0,1,1,0"
        ])
        .is_err());
    }
}
