//! CSV and JSON formats for tables, ledgers, curves and fit results.

use std::fmt::Write as _;

use serde::Serialize;

use crate::analytic::PrevalenceResult;
use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::simulator::{AgeGroupRow, AgeGroupTable, PopulationLedger};

pub const TABLE_HEADER: &str = "k,age_lo,age_hi,n,c";
pub const LEDGER_HEADER: &str = "birth,onset,death";
pub const ESTIMATES_HEADER: &str = "param,input,estimate,ci_lo,ci_hi";

/// The reference cross-section, shipped with the crate.
pub const REFERENCE_TABLE_CSV: &str = include_str!("../data/reference_table.csv");

/// Current-status table with a trailing totals row.
pub fn table_to_csv(table: &AgeGroupTable) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.k, r.age_lo, r.age_hi, r.n, r.c);
    }
    let (n, c) = table.totals();
    let _ = writeln!(out, "total,,,{n},{c}");
    out
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: u64) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} from {field:?}"),
    })
}

/// Parses a table in the [`TABLE_HEADER`] layout. A totals row, when
/// present, must equal the column sums.
pub fn table_from_csv(text: &str, cross_section_time: f64) -> Result<AgeGroupTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != TABLE_HEADER.split(',').collect::<Vec<_>>() {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {TABLE_HEADER:?}"),
        });
    }
    let mut rows = Vec::new();
    let mut totals: Option<(u64, u64, u64)> = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if totals.is_some() {
            return Err(Error::Parse {
                line,
                message: "rows after the totals row".into(),
            });
        }
        if record[0].eq_ignore_ascii_case("total") {
            totals = Some((
                parse_field(&record[3], "n", line)?,
                parse_field(&record[4], "c", line)?,
                line,
            ));
            continue;
        }
        let row = AgeGroupRow {
            k: parse_field(&record[0], "k", line)?,
            age_lo: parse_field(&record[1], "age_lo", line)?,
            age_hi: parse_field(&record[2], "age_hi", line)?,
            n: parse_field(&record[3], "n", line)?,
            c: parse_field(&record[4], "c", line)?,
        };
        if row.c > row.n || !(row.age_lo < row.age_hi) {
            return Err(Error::Parse {
                line,
                message: "need c <= n and age_lo < age_hi".into(),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let table = AgeGroupTable {
        cross_section_time,
        rows,
    };
    if let Some((n, c, line)) = totals {
        if table.totals() != (n, c) {
            return Err(Error::Parse {
                line,
                message: format!("totals row ({n}, {c}) disagrees with column sums {:?}", table.totals()),
            });
        }
    }
    Ok(table)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn ledger_to_csv(ledger: &PopulationLedger) -> String {
    let mut out = String::from(LEDGER_HEADER);
    out.push('\n');
    for r in &ledger.records {
        let _ = writeln!(out, "{},{},{}", r.birth_time, opt(r.onset_time), opt(r.death_time));
    }
    out
}

/// Odds curve with one column per evaluated method; all slices must be
/// evaluated on the same ages.
pub fn curve_to_csv(columns: &[(&str, &[PrevalenceResult])]) -> Result<String> {
    let Some((_, first)) = columns.first() else {
        return Err(Error::Config("no curve columns".into()));
    };
    if columns.iter().any(|(_, c)| c.len() != first.len()) {
        return Err(Error::Config("curve columns differ in length".into()));
    }
    let mut out = String::from("age");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..first.len() {
        out.push_str(&first[i].a.to_string());
        for (_, col) in columns {
            let _ = write!(out, ",{}", col[i].odds);
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct FitJson<'a> {
    gamma_hat: [f64; 3],
    loglik: f64,
    hessian: [[f64; 3]; 3],
    cov: Option<[[f64; 3]; 3]>,
    ci95: Option<[[f64; 2]; 3]>,
    converged: bool,
    free: [bool; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<[f64; 3]>,
    diagnostics: &'a crate::estimator::FitDiagnostics,
}

pub fn fit_to_json(fit: &FitResult, input: Option<[f64; 3]>) -> Result<String> {
    let doc = FitJson {
        gamma_hat: fit.gamma_hat,
        loglik: fit.loglik,
        hessian: fit.hessian,
        cov: fit.covariance,
        ci95: fit.ci95,
        converged: fit.converged,
        free: fit.free,
        input,
        diagnostics: &fit.diagnostics,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

/// Estimates as a `param,input,estimate,ci_lo,ci_hi` table. The `input`
/// column is left empty without known true values.
pub fn fit_to_estimates_csv(fit: &FitResult, input: Option<[f64; 3]>) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for j in 0..3 {
        let (lo, hi) = match fit.ci95 {
            Some(ci) => (ci[j][0].to_string(), ci[j][1].to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "gamma{},{},{},{},{}",
            j + 1,
            opt(input.map(|g| g[j])),
            fit.gamma_hat[j],
            lo,
            hi
        );
    }
    out
}
