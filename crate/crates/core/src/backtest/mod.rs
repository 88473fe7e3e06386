//! Buy-and-hold backtests at model-implied prices.
//!
//! An investor buys at the model price computed from the revenue history
//! available at entry, collects the realized quarterly cashflows, and sells
//! at the model price recomputed from the history available at exit. The
//! per-asset return splits into dividend yield `d`, capital gain `e` and
//! cost drag `f`, with `r = d + e - f`.

mod benchmark;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_model::{
    features_at, ContractTerm, DealRecord, Quarter, RevenueMap, RevenueSeries,
};
use crate::error::{Error, Result};
use crate::pricing::{price_over, ModelParams};

pub use benchmark::{
    benchmark_compare, parse_return_grid, Comparison, ComparisonRow, GridColumn, ReturnGrid, Stat,
};
pub use stats::{percentile, summarize, CohortSummary, MetricSummary, Percentiles, SummaryTable};

/// Quarters of revenue history needed at entry (for LTY).
pub const LOOKBACK_QUARTERS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSchedule {
    /// Fixed fee paid by the buyer.
    pub buyer_fee: f64,
    /// Fraction of the sale price paid by the seller.
    pub seller_commission: f64,
}

impl Default for CostSchedule {
    fn default() -> Self {
        Self {
            buyer_fee: 500.0,
            seller_commission: 0.08,
        }
    }
}

impl CostSchedule {
    pub fn new(buyer_fee: f64, seller_commission: f64) -> Result<Self> {
        let s = Self {
            buyer_fee,
            seller_commission,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn zero() -> Self {
        Self {
            buyer_fee: 0.0,
            seller_commission: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.buyer_fee.is_finite() && self.buyer_fee >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "buyer_fee must be non-negative, got {}",
                self.buyer_fee
            )));
        }
        if !(0.0..1.0).contains(&self.seller_commission) {
            return Err(Error::InvalidInput(format!(
                "seller_commission must be in [0, 1), got {}",
                self.seller_commission
            )));
        }
        Ok(())
    }
}

/// Round-trip cost of one holding period: the buyer fee at entry plus the
/// commission on the sale price at exit.
pub fn transaction_cost(schedule: &CostSchedule, sell_price: f64) -> f64 {
    schedule.buyer_fee + schedule.seller_commission * sell_price
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnDecomposition {
    /// Dividend yield, cash / buy price.
    pub d: f64,
    /// Capital gain, (sell - buy) / buy price.
    pub e: f64,
    /// Cost drag, cost / buy price.
    pub f: f64,
    /// Total return, (sell + cash - buy - cost) / buy price.
    pub r: f64,
}

impl ReturnDecomposition {
    pub fn from_flows(buy_price: f64, cash: f64, sell_price: f64, cost: f64) -> Self {
        Self {
            d: cash / buy_price,
            e: (sell_price - buy_price) / buy_price,
            f: cost / buy_price,
            r: (sell_price + cash - buy_price - cost) / buy_price,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldingResult {
    pub asset_id: String,
    pub term: ContractTerm,
    pub entry_quarter: Quarter,
    pub exit_quarter: Quarter,
    pub buy_price: f64,
    pub sell_price: f64,
    pub cash_collected: f64,
    pub cost: f64,
    pub decomposition: ReturnDecomposition,
}

impl HoldingResult {
    pub fn quarters_held(&self) -> i64 {
        self.exit_quarter.quarters_since(self.entry_quarter)
    }
}

/// Buys at the end of `entry`, collects the next `quarters_held` quarters of
/// revenue and sells at the end of the last one.
///
/// Exit pricing recomputes LTM/LTY from realized revenue, advances the age
/// by the holding period and shortens a finite term by the same amount; a
/// term that has run out is worth zero.
pub fn hold(
    series: &RevenueSeries,
    term: ContractTerm,
    age_at_entry: f64,
    params: &ModelParams,
    entry: Quarter,
    quarters_held: u32,
    schedule: &CostSchedule,
) -> Result<HoldingResult> {
    if quarters_held == 0 {
        return Err(Error::InvalidInput("quarters_held must be positive".into()));
    }
    let held = quarters_held as i64;
    let exit = entry + held;
    let years = quarters_held as f64 / 4.0;
    if !series.covers(entry + 1, exit) {
        return Err(Error::InsufficientHistory {
            asset_id: series.asset_id().to_string(),
            as_of: exit,
            needed: quarters_held as usize,
            available: series
                .end()
                .map_or(0, |end| end.quarters_since(entry).clamp(0, held) as usize),
        });
    }

    let entry_features = features_at(series, entry, age_at_entry, term)?;
    let buy_price = price_over(params, &entry_features, term.horizon())?.price;

    let mut cash_collected = 0.0;
    for i in 1..=held {
        cash_collected += series.amount_at(entry + i).expect("covered above");
    }

    let exit_horizon = term.horizon().after(years);
    let sell_price = if exit_horizon.years() == Some(0.0) {
        0.0
    } else {
        let exit_features = features_at(series, exit, age_at_entry + years, term)?;
        price_over(params, &exit_features, exit_horizon)?.price
    };

    let cost = transaction_cost(schedule, sell_price);
    Ok(HoldingResult {
        asset_id: series.asset_id().to_string(),
        term,
        entry_quarter: entry,
        exit_quarter: exit,
        buy_price,
        sell_price,
        cash_collected,
        cost,
        decomposition: ReturnDecomposition::from_flows(buy_price, cash_collected, sell_price, cost),
    })
}

/// An asset left out of a backtest, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedAsset {
    pub asset_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRun {
    pub entry_year: i32,
    pub quarters_held: u32,
    /// Sorted by asset id.
    pub results: Vec<HoldingResult>,
    /// Sorted by asset id.
    pub skipped: Vec<SkippedAsset>,
}

impl BacktestRun {
    pub fn skip_report_csv(&self) -> String {
        let mut out = String::from("asset_id,reason\n");
        for s in &self.skipped {
            out.push_str(&format!(
                "{},\"{}\"\n",
                s.asset_id,
                s.reason.replace('"', "'")
            ));
        }
        out
    }
}

/// First quarter of `year` with a full lookback window before it and the
/// whole holding period after it.
fn first_eligible_entry(series: &RevenueSeries, year: i32, quarters_held: u32) -> Option<Quarter> {
    (1..=4)
        .filter_map(|q| Quarter::new(year, q))
        .find(|&entry| {
            series.trailing(entry, LOOKBACK_QUARTERS).is_ok()
                && series.covers(entry + 1, entry + quarters_held as i64)
        })
}

/// Runs [`hold`] for every asset that appears in both `deals` and `revenues`.
///
/// Each asset's contract term and age come from its earliest deal; the age
/// is rolled forward (or back, floored at zero) from that trade to the entry
/// quarter.
pub fn run_backtest(
    deals: &[DealRecord],
    revenues: &RevenueMap,
    params: &ModelParams,
    entry_year: i32,
    quarters_held: u32,
    schedule: &CostSchedule,
) -> Result<BacktestRun> {
    schedule.validate()?;
    if quarters_held == 0 {
        return Err(Error::InvalidInput("quarters_held must be positive".into()));
    }

    let mut anchors: BTreeMap<&str, &DealRecord> = BTreeMap::new();
    for deal in deals {
        anchors
            .entry(deal.asset_id())
            .and_modify(|current| {
                if deal.trade_date() < current.trade_date() {
                    *current = deal;
                }
            })
            .or_insert(deal);
    }

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    let skip = |skipped: &mut Vec<SkippedAsset>, id: &str, reason: String| {
        skipped.push(SkippedAsset {
            asset_id: id.to_string(),
            reason,
        })
    };

    for (id, deal) in &anchors {
        let Some(series) = revenues.get(*id) else {
            skip(&mut skipped, id, "no revenue series".into());
            continue;
        };
        let Some(entry) = first_eligible_entry(series, entry_year, quarters_held) else {
            skip(
                &mut skipped,
                id,
                format!(
                    "revenue history cannot support entry in {entry_year} ({LOOKBACK_QUARTERS} quarters before, {quarters_held} after)"
                ),
            );
            continue;
        };
        let years_since_trade = entry.quarters_since(deal.trade_quarter()) as f64 / 4.0;
        let age = (deal.age() + years_since_trade).max(0.0);
        match hold(
            series,
            deal.term(),
            age,
            params,
            entry,
            quarters_held,
            schedule,
        ) {
            Ok(result) => results.push(result),
            Err(e) => skip(&mut skipped, id, e.to_string()),
        }
    }
    for id in revenues.keys() {
        if !anchors.contains_key(id.as_str()) {
            skip(&mut skipped, id, "no deal record for term and age".into());
        }
    }
    skipped.sort_by(|a, b| a.asset_id.cmp(&b.asset_id));

    if results.is_empty() {
        return Err(Error::EmptyCohort {
            entry_year,
            skipped: skipped.len(),
        });
    }
    Ok(BacktestRun {
        entry_year,
        quarters_held,
        results,
        skipped,
    })
}

/// Per-year rate with the same compounded total over `years`.
pub fn annualize(total_return: f64, years: f64) -> Result<f64> {
    if total_return.is_nan() || total_return <= -1.0 {
        return Err(Error::InvalidInput(format!(
            "cannot annualize a total return of {total_return} (must exceed -100%)"
        )));
    }
    if !(years.is_finite() && years > 0.0) {
        return Err(Error::InvalidInput(format!(
            "years must be positive, got {years}"
        )));
    }
    Ok((total_return.ln_1p() / years).exp_m1())
}
