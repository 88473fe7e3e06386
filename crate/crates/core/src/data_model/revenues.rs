use std::collections::BTreeMap;

use super::deals::{check_header, reader};
use super::{Quarter, RevenueSeries};
use crate::error::{Error, Result};

pub const REVENUES_HEADER: [&str; 3] = ["asset_id", "quarter", "amount"];

/// Revenue series keyed by asset id, in asset-id order.
pub type RevenueMap = BTreeMap<String, RevenueSeries>;

/// Parses revenues.csv. Rows may arrive in any order; each asset's quarters
/// must form one contiguous run.
pub fn parse_revenues(csv_text: &str) -> Result<RevenueMap> {
    if csv_text.trim().is_empty() {
        return Ok(RevenueMap::new());
    }
    let mut rdr = reader(csv_text);
    check_header(rdr.headers()?, &REVENUES_HEADER)?;

    let mut by_asset: BTreeMap<String, Vec<(Quarter, f64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != REVENUES_HEADER.len() {
            return Err(Error::parse(
                line,
                "row",
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let asset_id = record[0].trim();
        if asset_id.is_empty() {
            return Err(Error::parse(line, "asset_id", "empty"));
        }
        let quarter: Quarter = record[1]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line, "quarter", e))?;
        let raw = record[2].trim();
        let amount: f64 = raw
            .parse()
            .map_err(|_| Error::parse(line, "amount", format!("`{raw}` is not a number")))?;
        if !amount.is_finite() || amount < 0.0 {
            return Err(Error::parse(
                line,
                "amount",
                format!("must be non-negative, got {raw}"),
            ));
        }
        by_asset
            .entry(asset_id.to_string())
            .or_default()
            .push((quarter, amount));
    }

    by_asset
        .into_iter()
        .map(|(asset_id, mut rows)| {
            rows.sort_by_key(|(q, _)| *q);
            let start = rows[0].0;
            for pair in rows.windows(2) {
                let (prev, next) = (pair[0].0, pair[1].0);
                if prev == next {
                    return Err(Error::DuplicateQuarter {
                        asset_id,
                        quarter: next,
                    });
                }
                if next != prev + 1 {
                    return Err(Error::RevenueGap {
                        asset_id,
                        missing: prev + 1,
                    });
                }
            }
            let amounts = rows.into_iter().map(|(_, a)| a).collect();
            let series = RevenueSeries::new(asset_id.clone(), start, amounts)?;
            Ok((asset_id, series))
        })
        .collect()
}

pub fn serialize_revenues<'a>(series: impl IntoIterator<Item = &'a RevenueSeries>) -> String {
    let mut out = REVENUES_HEADER.join(",");
    out.push('\n');
    for s in series {
        for (i, amount) in s.amounts().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                s.asset_id(),
                s.start() + i as i64,
                amount
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_flat_quarters() {
        let text =
            "asset_id,quarter,amount\nA1,2017-Q1,25\nA1,2017-Q2,25\nA1,2017-Q3,25\nA1,2017-Q4,25\n";
        let map = parse_revenues(text).unwrap();
        let s = &map["A1"];
        assert_eq!(s.amounts(), &[25.0; 4]);
        assert_eq!(s.start(), Quarter::new(2017, 1).unwrap());
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let text = "asset_id,quarter,amount\nA1,2017-Q2,2\nB,2017-Q1,9\nA1,2017-Q1,1\n";
        let map = parse_revenues(text).unwrap();
        assert_eq!(map["A1"].amounts(), &[1.0, 2.0]);
        assert_eq!(map.keys().collect::<Vec<_>>(), ["A1", "B"]);
    }

    #[test]
    fn gap_names_missing_quarter() {
        let text = "asset_id,quarter,amount\nA1,2017-Q1,25\nA1,2017-Q3,25\n";
        match parse_revenues(text).unwrap_err() {
            Error::RevenueGap { missing, .. } => assert_eq!(missing.to_string(), "2017-Q2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_and_malformed_rows() {
        let neg = "asset_id,quarter,amount\nA1,2017-Q1,-1\n";
        assert!(matches!(
            parse_revenues(neg),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad_q = "asset_id,quarter,amount\nA1,2017Q1,1\n";
        assert!(
            matches!(parse_revenues(bad_q), Err(Error::Parse { ref field, .. }) if field == "quarter")
        );
        let dup = "asset_id,quarter,amount\nA1,2017-Q1,1\nA1,2017-Q1,2\n";
        assert!(matches!(
            parse_revenues(dup),
            Err(Error::DuplicateQuarter { .. })
        ));
    }

    #[test]
    fn empty_input_is_empty_map() {
        assert!(parse_revenues("").unwrap().is_empty());
        assert!(parse_revenues("asset_id,quarter,amount\n")
            .unwrap()
            .is_empty());
    }
}
