use std::collections::HashSet;

use chrono::NaiveDate;

use super::FEATURE_AGREEMENT_TOLERANCE;
use super::{compute_ltm, compute_lty, ContractTerm, DealRecord, RevenueMap};
use crate::error::{Error, Result};

pub const DEALS_HEADER: [&str; 7] = [
    "asset_id",
    "trade_date",
    "price",
    "ltm",
    "lty",
    "age_years",
    "term",
];

/// A validated deals.csv row whose LTM/LTY may still be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct DealRow {
    pub line: u64,
    pub asset_id: String,
    pub trade_date: NaiveDate,
    pub price: f64,
    pub ltm: Option<f64>,
    pub lty: Option<f64>,
    pub age: f64,
    pub term: ContractTerm,
}

fn positive(line: u64, field: &str, raw: &str) -> Result<f64> {
    let value: f64 = raw
        .parse()
        .map_err(|_| Error::parse(line, field, format!("`{raw}` is not a number")))?;
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::parse(
            line,
            field,
            format!("must be positive, got {raw}"),
        ));
    }
    Ok(value)
}

fn optional_positive(line: u64, field: &str, raw: &str) -> Result<Option<f64>> {
    if raw.is_empty() {
        Ok(None)
    } else {
        positive(line, field, raw).map(Some)
    }
}

pub(super) fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::parse(
            1,
            "header",
            format!(
                "expected `{}`, found `{}`",
                expected.join(","),
                found.join(",")
            ),
        ));
    }
    Ok(())
}

pub(super) fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes())
}

/// Parses deals.csv without resolving missing LTM/LTY.
pub fn parse_deal_rows(csv_text: &str) -> Result<Vec<DealRow>> {
    let mut rdr = reader(csv_text);
    if csv_text.trim().is_empty() {
        return Ok(Vec::new());
    }
    check_header(rdr.headers()?, &DEALS_HEADER)?;

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != DEALS_HEADER.len() {
            return Err(Error::parse(
                line,
                "row",
                format!(
                    "expected {} fields, found {}",
                    DEALS_HEADER.len(),
                    record.len()
                ),
            ));
        }
        let field = |i: usize| record[i].trim();

        let asset_id = field(0);
        if asset_id.is_empty() {
            return Err(Error::parse(line, "asset_id", "empty"));
        }
        let trade_date = NaiveDate::parse_from_str(field(1), "%Y-%m-%d").map_err(|_| {
            Error::parse(
                line,
                "trade_date",
                format!("`{}` is not YYYY-MM-DD", field(1)),
            )
        })?;
        let price = positive(line, "price", field(2))?;
        let ltm = optional_positive(line, "ltm", field(3))?;
        let lty = optional_positive(line, "lty", field(4))?;
        let age: f64 = field(5).parse().map_err(|_| {
            Error::parse(line, "age_years", format!("`{}` is not a number", field(5)))
        })?;
        if !age.is_finite() || age < 0.0 {
            return Err(Error::parse(
                line,
                "age_years",
                format!("must be non-negative, got {age}"),
            ));
        }
        let term: ContractTerm = field(6)
            .parse()
            .map_err(|e| Error::parse(line, "term", e))?;

        if !seen.insert((asset_id.to_string(), trade_date)) {
            return Err(Error::DuplicateDeal {
                asset_id: asset_id.to_string(),
                trade_date: trade_date.to_string(),
                line,
            });
        }
        rows.push(DealRow {
            line,
            asset_id: asset_id.to_string(),
            trade_date,
            price,
            ltm,
            lty,
            age,
            term,
        });
    }
    Ok(rows)
}

fn reconcile(row: &DealRow, field: &str, stated: Option<f64>, derived: Option<f64>) -> Result<f64> {
    match (stated, derived) {
        (Some(s), Some(d)) => {
            if (s - d).abs() > FEATURE_AGREEMENT_TOLERANCE * d.abs() {
                Err(Error::parse(
                    row.line,
                    field,
                    format!("{s} disagrees with {d} recomputed from revenues"),
                ))
            } else {
                Ok(s)
            }
        }
        (Some(s), None) => Ok(s),
        (None, Some(d)) => Ok(d),
        (None, None) => Err(Error::parse(
            row.line,
            field,
            "missing and not derivable from the revenue series",
        )),
    }
}

/// Turns rows into deal records, filling or cross-checking LTM/LTY against the
/// revenue series at each trade quarter when `revenues` is given.
pub fn resolve_deals(rows: &[DealRow], revenues: Option<&RevenueMap>) -> Result<Vec<DealRecord>> {
    rows.iter()
        .map(|row| {
            let series = revenues.and_then(|m| m.get(&row.asset_id));
            let as_of = super::Quarter::containing(row.trade_date);
            let derived_ltm = series.and_then(|s| compute_ltm(s, as_of).ok());
            let derived_lty = series.and_then(|s| compute_lty(s, as_of).ok());
            let ltm = reconcile(row, "ltm", row.ltm, derived_ltm)?;
            let lty = reconcile(row, "lty", row.lty, derived_lty)?;
            DealRecord::new(
                row.asset_id.clone(),
                row.trade_date,
                row.price,
                ltm,
                lty,
                row.age,
                row.term,
            )
            .map_err(|e| Error::parse(row.line, "row", e.to_string()))
        })
        .collect()
}

/// Parses a self-contained deals.csv in which every row carries LTM and LTY.
pub fn parse_deals(csv_text: &str) -> Result<Vec<DealRecord>> {
    resolve_deals(&parse_deal_rows(csv_text)?, None)
}

pub fn serialize_deals(deals: &[DealRecord]) -> String {
    let mut out = DEALS_HEADER.join(",");
    out.push('\n');
    for d in deals {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            d.asset_id(),
            d.trade_date().format("%Y-%m-%d"),
            d.price(),
            d.ltm(),
            d.lty(),
            d.age(),
            d.term()
        ));
    }
    out
}
