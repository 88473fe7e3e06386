use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::benchmark::{GridColumn, ReturnGrid, Stat};
use super::{annualize, HoldingResult};
use crate::error::{Error, Result};

/// Linear interpolation between closest ranks: with the sample sorted
/// ascending and `h = (n - 1) p`, returns `x[floor h] + frac(h) (x[floor h + 1] - x[floor h])`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!(
            "percentile {p} outside [0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
}

impl Percentiles {
    fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            p10: percentile_sorted(&sorted, 0.10),
            median: percentile_sorted(&sorted, 0.50),
            p90: percentile_sorted(&sorted, 0.90),
        }
    }

    pub fn get(&self, stat: Stat) -> f64 {
        match stat {
            Stat::Median => self.median,
            Stat::P10 => self.p10,
            Stat::P90 => self.p90,
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            p10: f(self.p10),
            median: f(self.median),
            p90: f(self.p90),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub d: Percentiles,
    pub e: Percentiles,
    pub f: Percentiles,
    pub r: Percentiles,
}

/// Distribution of returns for one entry year and holding period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub entry_year: i32,
    pub quarters_held: u32,
    pub count: usize,
    pub metrics: MetricSummary,
    /// Per-year equivalents of the `r` percentiles for multi-year holds;
    /// `NaN` where the total return is -100% or worse.
    pub annualized_r: Option<Percentiles>,
}

impl CohortSummary {
    fn years(&self) -> f64 {
        self.quarters_held as f64 / 4.0
    }
}

/// Cohort columns in (holding period, entry year) order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub cohorts: Vec<CohortSummary>,
}

/// Groups results by (entry year, holding period) and takes the 10th, 50th
/// and 90th percentiles of each metric. Input order does not matter.
pub fn summarize(results: &[HoldingResult]) -> Result<SummaryTable> {
    if results.is_empty() {
        return Err(Error::Empty("summarize needs at least one holding result"));
    }
    let mut groups: BTreeMap<(i64, i32), Vec<&HoldingResult>> = BTreeMap::new();
    for r in results {
        groups
            .entry((r.quarters_held(), r.entry_quarter.year()))
            .or_default()
            .push(r);
    }
    let cohorts = groups
        .into_iter()
        .map(|((held, year), members)| {
            let column = |pick: fn(&HoldingResult) -> f64| -> Vec<f64> {
                members.iter().map(|m| pick(m)).collect()
            };
            let metrics = MetricSummary {
                d: Percentiles::of(&column(|m| m.decomposition.d)),
                e: Percentiles::of(&column(|m| m.decomposition.e)),
                f: Percentiles::of(&column(|m| m.decomposition.f)),
                r: Percentiles::of(&column(|m| m.decomposition.r)),
            };
            let quarters_held = held as u32;
            let years = quarters_held as f64 / 4.0;
            let annualized_r = (quarters_held != 4).then(|| {
                metrics
                    .r
                    .map(|total| annualize(total, years).unwrap_or(f64::NAN))
            });
            CohortSummary {
                entry_year: year,
                quarters_held,
                count: members.len(),
                metrics,
                annualized_r,
            }
        })
        .collect();
    Ok(SummaryTable { cohorts })
}

const ROWS: [(&str, Stat); 12] = [
    ("d_median", Stat::Median),
    ("d_p10", Stat::P10),
    ("d_p90", Stat::P90),
    ("e_median", Stat::Median),
    ("e_p10", Stat::P10),
    ("e_p90", Stat::P90),
    ("f_median", Stat::Median),
    ("f_p10", Stat::P10),
    ("f_p90", Stat::P90),
    ("r_median", Stat::Median),
    ("r_p90", Stat::P90),
    ("r_p10", Stat::P10),
];

fn metric_of<'a>(m: &'a MetricSummary, row: &str) -> &'a Percentiles {
    match &row[..1] {
        "d" => &m.d,
        "e" => &m.e,
        "f" => &m.f,
        _ => &m.r,
    }
}

impl SummaryTable {
    /// Column headers: the entry year for one-year holds, and
    /// `total_Nyr` / `annualized_Nyr` pairs for N-year holds.
    fn columns(&self) -> Vec<(String, usize, bool)> {
        let mut multi_year: BTreeMap<u32, usize> = BTreeMap::new();
        for c in &self.cohorts {
            if c.quarters_held != 4 {
                *multi_year.entry(c.quarters_held).or_default() += 1;
            }
        }
        let mut out = Vec::new();
        for (i, c) in self.cohorts.iter().enumerate() {
            if c.quarters_held == 4 {
                out.push((c.entry_year.to_string(), i, false));
                continue;
            }
            let span = span_label(c.years());
            let suffix = if multi_year[&c.quarters_held] > 1 {
                format!("_{}", c.entry_year)
            } else {
                String::new()
            };
            out.push((format!("total_{span}{suffix}"), i, false));
            out.push((format!("annualized_{span}{suffix}"), i, true));
        }
        out
    }

    fn cell(&self, row: &str, stat: Stat, cohort: usize, annualized: bool) -> Option<f64> {
        let c = &self.cohorts[cohort];
        if annualized {
            (row.starts_with('r'))
                .then(|| c.annualized_r.map(|p| p.get(stat)))
                .flatten()
        } else {
            Some(metric_of(&c.metrics, row).get(stat))
        }
    }

    /// Rows `d/e/f/r x median/p10/p90`, one column per cohort, values as
    /// fractions.
    pub fn to_csv(&self) -> String {
        let columns = self.columns();
        let mut out = String::from("metric");
        for (label, _, _) in &columns {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (row, stat) in ROWS {
            out.push_str(row);
            for (_, cohort, annualized) in &columns {
                out.push(',');
                if let Some(v) = self
                    .cell(row, stat, *cohort, *annualized)
                    .filter(|v| !v.is_nan())
                {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out.push_str("count");
        for (_, cohort, _) in &columns {
            let _ = write!(out, ",{}", self.cohorts[*cohort].count);
        }
        out.push('\n');
        out
    }

    /// Aligned percentage table in the layout of a printed returns table.
    pub fn to_text(&self, title: &str) -> String {
        let columns = self.columns();
        let labels = [
            "d - Median Dividends",
            "e - Median Capital Gains",
            "f - Median TC",
            "r - Median Return",
            "90th Percentile Return",
            "10th Percentile Return",
        ];
        let rows: [(&str, Stat); 6] = [
            ("d", Stat::Median),
            ("e", Stat::Median),
            ("f", Stat::Median),
            ("r", Stat::Median),
            ("r", Stat::P90),
            ("r", Stat::P10),
        ];
        let width = columns.iter().map(|c| c.0.len()).max().unwrap_or(0).max(9);
        let mut out = format!("{title}\n{:<26}", "Metric (%)");
        for (label, _, _) in &columns {
            let _ = write!(out, " {label:>width$}");
        }
        out.push('\n');
        for (label, (row, stat)) in labels.iter().zip(rows) {
            let _ = write!(out, "{label:<26}");
            for (_, cohort, annualized) in &columns {
                let text = match self.cell(row, stat, *cohort, *annualized) {
                    Some(v) if !v.is_nan() => format_percent(v),
                    _ => String::new(),
                };
                let _ = write!(out, " {text:>width$}");
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<26}", "Assets");
        for (_, cohort, _) in &columns {
            let _ = write!(out, " {:>width$}", self.cohorts[*cohort].count);
        }
        out.push('\n');
        out
    }

    /// The total-return percentiles on the benchmark grid. Multi-year
    /// columns carry no entry year, so when several multi-year cohorts share
    /// a holding period the earliest entry year fills them.
    pub fn return_grid(&self) -> ReturnGrid {
        let mut grid = ReturnGrid::default();
        for c in self.cohorts.iter().rev() {
            for stat in Stat::ALL {
                if c.quarters_held == 4 {
                    grid.insert(stat, GridColumn::Year(c.entry_year), c.metrics.r.get(stat));
                } else {
                    let q = c.quarters_held;
                    grid.insert(stat, GridColumn::Total(q), c.metrics.r.get(stat));
                    if let Some(a) = c.annualized_r {
                        grid.insert(stat, GridColumn::Annualized(q), a.get(stat));
                    }
                }
            }
        }
        grid
    }
}

/// One decimal place, without a sign on values that round to zero.
fn format_percent(fraction: f64) -> String {
    let text = format!("{:.1}", fraction * 100.0);
    match text.strip_prefix('-') {
        Some(rest) if rest.trim_start_matches(['0', '.']).is_empty() => format!("{rest}%"),
        _ => format!("{text}%"),
    }
}

pub(super) fn span_label(years: f64) -> String {
    format!("{years}yr")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::ReturnDecomposition;
    use crate::data_model::{ContractTerm, Quarter};

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[0.01, 0.02, 0.03], 0.5).unwrap(), 0.02);
        assert!((percentile(&[0.0, 0.10], 0.10).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(percentile(&[0.1, 0.0], 0.0).unwrap(), 0.0);
        assert_eq!(percentile(&[0.1, 0.0], 1.0).unwrap(), 0.1);
        assert_eq!(percentile(&[7.0; 5], 0.9).unwrap(), 7.0);
        assert!(percentile(&[], 0.5).is_err());
        assert!(percentile(&[1.0], 1.5).is_err());
    }

    fn result(id: &str, year: i32, held: i64, r: f64) -> HoldingResult {
        let entry = Quarter::new(year, 1).unwrap();
        HoldingResult {
            asset_id: id.into(),
            term: ContractTerm::LifeOfRights,
            entry_quarter: entry,
            exit_quarter: entry + held,
            buy_price: 1.0,
            sell_price: 1.0,
            cash_collected: r,
            cost: 0.0,
            decomposition: ReturnDecomposition {
                d: r,
                e: 0.0,
                f: 0.0,
                r,
            },
        }
    }

    #[test]
    fn summary_groups_and_orders_cohorts() {
        let results = vec![
            result("A", 2018, 4, 0.1),
            result("B", 2017, 4, 0.2),
            result("C", 2017, 20, 0.8264),
            result("D", 2017, 4, 0.3),
        ];
        let table = summarize(&results).unwrap();
        let keys: Vec<_> = table
            .cohorts
            .iter()
            .map(|c| (c.quarters_held, c.entry_year, c.count))
            .collect();
        assert_eq!(keys, [(4, 2017, 2), (4, 2018, 1), (20, 2017, 1)]);
        let five = &table.cohorts[2];
        assert!((five.annualized_r.unwrap().median - 0.128).abs() < 1e-3);
        assert!(table.cohorts[0].annualized_r.is_none());

        let csv = table.to_csv();
        assert!(csv.starts_with("metric,2017,2018,total_5yr,annualized_5yr\n"));
        let d_row = csv.lines().find(|l| l.starts_with("d_median")).unwrap();
        assert!(d_row.ends_with(','), "annualized d is blank: {d_row}");

        let text = table.to_text("LOR");
        assert!(text.contains("r - Median Return"));
        assert!(text.contains("12.8%"));
    }

    #[test]
    fn percent_cells() {
        assert_eq!(format_percent(-0.0001), "0.0%");
        assert_eq!(format_percent(-0.0006), "-0.1%");
        assert_eq!(format_percent(0.128), "12.8%");
    }

    #[test]
    fn identical_values_collapse() {
        let results: Vec<_> = (0..7)
            .map(|i| result(&i.to_string(), 2019, 4, 0.05))
            .collect();
        let s = summarize(&results).unwrap().cohorts[0].metrics.r;
        assert_eq!((s.p10, s.median, s.p90), (0.05, 0.05, 0.05));
    }

    #[test]
    fn empty_results_rejected() {
        assert!(summarize(&[]).is_err());
    }
}
