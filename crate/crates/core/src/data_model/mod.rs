//! Deal and revenue records, CSV ingestion, and the trailing-revenue features
//! (LTM, LTY, LTM/LTY ratio, catalog age) that every pricing model consumes.

mod deals;
mod quarter;
mod revenues;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pricing::Horizon;

pub use deals::{parse_deal_rows, parse_deals, resolve_deals, serialize_deals, DealRow};
pub use quarter::Quarter;
pub use revenues::{parse_revenues, serialize_revenues, RevenueMap};

/// Relative tolerance between deal-file LTM/LTY and the value recomputed from
/// the revenue series.
pub const FEATURE_AGREEMENT_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContractTerm {
    #[serde(rename = "10Y")]
    TenYear,
    #[serde(rename = "30Y")]
    ThirtyYear,
    #[serde(rename = "LOR")]
    LifeOfRights,
}

impl ContractTerm {
    pub const ALL: [ContractTerm; 3] = [
        ContractTerm::TenYear,
        ContractTerm::ThirtyYear,
        ContractTerm::LifeOfRights,
    ];

    /// Remaining horizon of a freshly written contract.
    pub fn horizon(self) -> Horizon {
        match self {
            ContractTerm::TenYear => Horizon::Years(10.0),
            ContractTerm::ThirtyYear => Horizon::Years(30.0),
            ContractTerm::LifeOfRights => Horizon::Perpetual,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            ContractTerm::TenYear => "10Y",
            ContractTerm::ThirtyYear => "30Y",
            ContractTerm::LifeOfRights => "LOR",
        }
    }
}

impl fmt::Display for ContractTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ContractTerm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "10Y" => Ok(ContractTerm::TenYear),
            "30Y" => Ok(ContractTerm::ThirtyYear),
            "LOR" => Ok(ContractTerm::LifeOfRights),
            other => Err(format!("unknown term `{other}` (expected 10Y, 30Y or LOR)")),
        }
    }
}

/// One observed transaction. The multiplier is always `price / ltm`.
#[derive(Debug, Clone, PartialEq)]
pub struct DealRecord {
    asset_id: String,
    trade_date: NaiveDate,
    price: f64,
    ltm: f64,
    lty: f64,
    age: f64,
    term: ContractTerm,
    multiplier: f64,
}

impl DealRecord {
    pub fn new(
        asset_id: impl Into<String>,
        trade_date: NaiveDate,
        price: f64,
        ltm: f64,
        lty: f64,
        age: f64,
        term: ContractTerm,
    ) -> Result<Self> {
        let asset_id = asset_id.into();
        if asset_id.trim().is_empty() {
            return Err(Error::InvalidInput("asset_id is empty".into()));
        }
        for (name, value) in [("price", price), ("ltm", ltm), ("lty", lty)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(age.is_finite() && age >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "age must be non-negative, got {age}"
            )));
        }
        Ok(Self {
            asset_id,
            trade_date,
            price,
            ltm,
            lty,
            age,
            term,
            multiplier: price / ltm,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn trade_date(&self) -> NaiveDate {
        self.trade_date
    }

    pub fn trade_quarter(&self) -> Quarter {
        Quarter::containing(self.trade_date)
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn ltm(&self) -> f64 {
        self.ltm
    }

    pub fn lty(&self) -> f64 {
        self.lty
    }

    pub fn age(&self) -> f64 {
        self.age
    }

    pub fn term(&self) -> ContractTerm {
        self.term
    }

    /// Traded price-to-LTM multiple.
    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn features(&self) -> PricingFeatures {
        PricingFeatures {
            ltm: self.ltm,
            lty: self.lty,
            ratio: self.ltm / self.lty,
            age: self.age,
            term: self.term,
        }
    }

    /// Same deal with price, LTM and LTY multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.asset_id.clone(),
            self.trade_date,
            self.price * factor,
            self.ltm * factor,
            self.lty * factor,
            self.age,
            self.term,
        )
    }
}

/// Inputs to the multiplier formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingFeatures {
    ltm: f64,
    lty: f64,
    ratio: f64,
    age: f64,
    term: ContractTerm,
}

impl PricingFeatures {
    pub fn new(ltm: f64, lty: f64, age: f64, term: ContractTerm) -> Result<Self> {
        if !(ltm.is_finite() && ltm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ltm must be positive, got {ltm}"
            )));
        }
        if !(lty.is_finite() && lty > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lty must be positive, got {lty}"
            )));
        }
        if !(age.is_finite() && age >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "age must be non-negative, got {age}"
            )));
        }
        Ok(Self {
            ltm,
            lty,
            ratio: ltm / lty,
            age,
            term,
        })
    }

    pub fn ltm(&self) -> f64 {
        self.ltm
    }

    pub fn lty(&self) -> f64 {
        self.lty
    }

    /// LTM / LTY.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn age(&self) -> f64 {
        self.age
    }

    pub fn term(&self) -> ContractTerm {
        self.term
    }
}

/// Contiguous quarterly royalty cashflows for one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenueSeries {
    asset_id: String,
    start: Quarter,
    amounts: Vec<f64>,
}

impl RevenueSeries {
    pub fn new(asset_id: impl Into<String>, start: Quarter, amounts: Vec<f64>) -> Result<Self> {
        let asset_id = asset_id.into();
        if let Some((i, bad)) = amounts
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a >= 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "revenue for `{asset_id}` at {} is {bad}; amounts must be non-negative",
                start + i as i64
            )));
        }
        Ok(Self {
            asset_id,
            start,
            amounts,
        })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn start(&self) -> Quarter {
        self.start
    }

    /// Last quarter covered, `None` for an empty series.
    pub fn end(&self) -> Option<Quarter> {
        (!self.amounts.is_empty()).then(|| self.start + (self.amounts.len() as i64 - 1))
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    pub fn len(&self) -> usize {
        self.amounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amounts.is_empty()
    }

    pub fn amount_at(&self, quarter: Quarter) -> Option<f64> {
        let offset = quarter.quarters_since(self.start);
        usize::try_from(offset)
            .ok()
            .and_then(|i| self.amounts.get(i).copied())
    }

    /// The `count` quarters ending at `as_of`, inclusive.
    pub fn trailing(&self, as_of: Quarter, count: usize) -> Result<&[f64]> {
        // Quarters available up to and including `as_of`; zero when `as_of`
        // falls outside the series.
        let available = usize::try_from(as_of.quarters_since(self.start))
            .ok()
            .filter(|&end| end < self.amounts.len())
            .map_or(0, |end| end + 1);
        if available < count {
            return Err(Error::InsufficientHistory {
                asset_id: self.asset_id.clone(),
                as_of,
                needed: count,
                available,
            });
        }
        Ok(&self.amounts[available - count..available])
    }

    /// Whether quarters `from..=to` are all present.
    pub fn covers(&self, from: Quarter, to: Quarter) -> bool {
        match self.end() {
            Some(end) => from >= self.start && to <= end && from <= to,
            None => false,
        }
    }
}

fn year_sum(quarters: &[f64]) -> f64 {
    debug_assert_eq!(quarters.len(), 4);
    (quarters[0] + quarters[1]) + (quarters[2] + quarters[3])
}

/// Last-twelve-months revenue: the four quarters ending at `as_of`.
pub fn compute_ltm(series: &RevenueSeries, as_of: Quarter) -> Result<f64> {
    Ok(year_sum(series.trailing(as_of, 4)?))
}

/// Last-three-years revenue, annualized: the twelve quarters ending at `as_of`
/// divided by three.
///
/// Evaluated as `latest + ((middle - latest) + (oldest - latest)) / 3` over the
/// three yearly sums, so a flat series gives LTY equal to LTM bit for bit.
pub fn compute_lty(series: &RevenueSeries, as_of: Quarter) -> Result<f64> {
    let window = series.trailing(as_of, 12)?;
    let oldest = year_sum(&window[0..4]);
    let middle = year_sum(&window[4..8]);
    let latest = year_sum(&window[8..12]);
    Ok(latest + ((middle - latest) + (oldest - latest)) / 3.0)
}

/// LTM, LTY and ratio at `as_of`, with the supplied age and term.
pub fn features_at(
    series: &RevenueSeries,
    as_of: Quarter,
    age: f64,
    term: ContractTerm,
) -> Result<PricingFeatures> {
    let ltm = compute_ltm(series, as_of)?;
    let lty = compute_lty(series, as_of)?;
    PricingFeatures::new(ltm, lty, age, term).map_err(|e| match e {
        Error::InvalidInput(msg) => {
            Error::InvalidInput(format!("`{}` at {as_of}: {msg}", series.asset_id()))
        }
        other => other,
    })
}
