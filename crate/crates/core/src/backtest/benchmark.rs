use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::stats::span_label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Median,
    P10,
    P90,
}

impl Stat {
    pub const ALL: [Stat; 3] = [Stat::Median, Stat::P10, Stat::P90];

    pub fn token(self) -> &'static str {
        match self {
            Stat::Median => "median",
            Stat::P10 => "p10",
            Stat::P90 => "p90",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|stat| stat.token() == s)
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One column of a return table: a one-year cohort, or the total and
/// annualized figures of a multi-year hold (keyed by quarters held).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GridColumn {
    Year(i32),
    Total(u32),
    Annualized(u32),
}

impl GridColumn {
    fn parse(label: &str) -> Option<Self> {
        if let Ok(year) = label.parse::<i32>() {
            return Some(GridColumn::Year(year));
        }
        let quarters = |rest: &str| -> Option<u32> {
            let years: f64 = rest.strip_suffix("yr")?.parse().ok()?;
            let q = years * 4.0;
            (q > 0.0 && q.fract() == 0.0 && q <= u32::MAX as f64).then_some(q as u32)
        };
        if let Some(rest) = label.strip_prefix("total_") {
            return quarters(rest).map(GridColumn::Total);
        }
        label
            .strip_prefix("annualized_")
            .and_then(quarters)
            .map(GridColumn::Annualized)
    }
}

impl fmt::Display for GridColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridColumn::Year(y) => write!(f, "{y}"),
            GridColumn::Total(q) => write!(f, "total_{}", span_label(*q as f64 / 4.0)),
            GridColumn::Annualized(q) => write!(f, "annualized_{}", span_label(*q as f64 / 4.0)),
        }
    }
}

/// Total-return percentiles laid out as `stat x column`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReturnGrid {
    cells: BTreeMap<(Stat, GridColumn), f64>,
}

impl ReturnGrid {
    pub fn insert(&mut self, stat: Stat, column: GridColumn, value: f64) {
        self.cells.insert((stat, column), value);
    }

    pub fn get(&self, stat: Stat, column: GridColumn) -> Option<f64> {
        self.cells.get(&(stat, column)).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn columns(&self) -> Vec<GridColumn> {
        let mut cols: Vec<_> = self.cells.keys().map(|(_, c)| *c).collect();
        cols.sort();
        cols.dedup();
        cols
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stat, GridColumn, f64)> + '_ {
        self.cells.iter().map(|(&(s, c), &v)| (s, c, v))
    }

    /// Same layout as the benchmark file; absent cells are left empty.
    pub fn to_csv(&self) -> String {
        let columns = self.columns();
        let mut out = String::from("metric");
        for c in &columns {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for stat in Stat::ALL {
            out.push_str(stat.token());
            for c in &columns {
                out.push(',');
                if let Some(v) = self.get(stat, *c) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Parses `metric,2017,...,total_5yr,annualized_5yr` with rows
/// `median`, `p10`, `p90` and fractional values. Empty cells are absent.
pub fn parse_return_grid(csv_text: &str) -> Result<ReturnGrid> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("metric") {
        return Err(Error::parse(1, "header", "first column must be `metric`"));
    }
    let columns = headers
        .iter()
        .skip(1)
        .map(|label| {
            GridColumn::parse(label).ok_or_else(|| {
                Error::parse(1, label, "expected a year, total_Nyr or annualized_Nyr")
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grid = ReturnGrid::default();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let stat = Stat::parse(&record[0]).ok_or_else(|| {
            Error::parse(
                line,
                "metric",
                format!("`{}` is not median, p10 or p90", &record[0]),
            )
        })?;
        if record.len() > columns.len() + 1 {
            return Err(Error::parse(line, "row", "more cells than header columns"));
        }
        for (raw, column) in record.iter().skip(1).zip(&columns) {
            if raw.is_empty() {
                continue;
            }
            let value: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(
                        line,
                        &column.to_string(),
                        format!("`{raw}` is not a number"),
                    )
                })?;
            grid.insert(stat, *column, value);
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub stat: Stat,
    #[serde(serialize_with = "column_label")]
    pub column: GridColumn,
    pub asset: f64,
    pub benchmark: f64,
    /// `asset - benchmark`, as a fraction.
    pub difference: f64,
}

fn column_label<S: serde::Serializer>(
    c: &GridColumn,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,column,asset,benchmark,difference\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.stat, r.column, r.asset, r.benchmark, r.difference
            ));
        }
        out
    }

    pub fn max_abs_difference(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.difference.abs())
            .fold(0.0, f64::max)
    }
}

/// Lines up every cell of `asset` with the benchmark table. Every asset
/// cell must have a benchmark counterpart; benchmark cells the asset table
/// lacks are ignored.
pub fn benchmark_compare(asset: &ReturnGrid, benchmark_csv: &str) -> Result<Comparison> {
    let benchmark = parse_return_grid(benchmark_csv)?;
    let mut missing = Vec::new();
    let mut rows = Vec::new();
    for (stat, column, value) in asset.iter() {
        match benchmark.get(stat, column) {
            Some(b) => rows.push(ComparisonRow {
                stat,
                column,
                asset: value,
                benchmark: b,
                difference: value - b,
            }),
            None => missing.push(format!("{column} ({stat})")),
        }
    }
    if !missing.is_empty() {
        return Err(Error::GridMismatch { missing });
    }
    Ok(Comparison { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUNDLED: &str = include_str!("../../data/sp500_benchmark.csv");

    #[test]
    fn bundled_table_parses() {
        let grid = parse_return_grid(BUNDLED).unwrap();
        assert_eq!(grid.len(), 21);
        assert_eq!(
            grid.get(Stat::Median, GridColumn::Annualized(20)),
            Some(0.122)
        );
        assert_eq!(grid.get(Stat::P10, GridColumn::Year(2019)), Some(0.046));
        assert_eq!(grid.get(Stat::P90, GridColumn::Total(20)), Some(2.572));
    }

    #[test]
    fn self_comparison_is_zero() {
        let grid = parse_return_grid(BUNDLED).unwrap();
        let cmp = benchmark_compare(&grid, BUNDLED).unwrap();
        assert_eq!(cmp.rows.len(), 21);
        assert_eq!(cmp.max_abs_difference(), 0.0);
        assert_eq!(parse_return_grid(&grid.to_csv()).unwrap(), grid);
    }

    #[test]
    fn annualized_difference() {
        let mut asset = ReturnGrid::default();
        asset.insert(Stat::Median, GridColumn::Annualized(20), 0.128);
        let cmp = benchmark_compare(&asset, BUNDLED).unwrap();
        assert!((cmp.rows[0].difference - 0.006).abs() < 1e-12);
        assert!(cmp.to_csv().contains("median,annualized_5yr,0.128,0.122,"));
    }

    #[test]
    fn missing_year_is_reported() {
        let without_2019 = "metric,2017,2018,2020\nmedian,0.1,0.2,0.3\n";
        let mut asset = ReturnGrid::default();
        asset.insert(Stat::Median, GridColumn::Year(2018), 0.07);
        asset.insert(Stat::Median, GridColumn::Year(2019), 0.09);
        match benchmark_compare(&asset, without_2019).unwrap_err() {
            Error::GridMismatch { missing } => assert_eq!(missing, ["2019 (median)"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_tables() {
        assert!(parse_return_grid("stat,2017\nmedian,0.1\n").is_err());
        assert!(parse_return_grid("metric,2017\nmean,0.1\n").is_err());
        assert!(parse_return_grid("metric,2017\nmedian,abc\n").is_err());
        assert!(parse_return_grid("metric,total_5\nmedian,0.1\n").is_err());
    }
}
