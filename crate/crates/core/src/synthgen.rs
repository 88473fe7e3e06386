//! Synthetic deals and revenue series generated from known parameters.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64`, so a
//! seed fixes the output on every platform. Draw order within one deal is
//! LTM, ratio, age, term, then noise; changing it changes every test vector.

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};

use crate::data_model::{
    features_at, ContractTerm, DealRecord, PricingFeatures, Quarter, RevenueMap, RevenueSeries,
};
use crate::error::{Error, Result};
use crate::pricing::{multiplier, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub theta: ModelParams,
    pub deal_count: usize,
    /// Standard deviation of the additive noise on each traded multiplier.
    pub noise_sigma: f64,
    pub ltm_range: (f64, f64),
    pub ratio_range: (f64, f64),
    pub age_range: (f64, f64),
    /// Weights over `ContractTerm::ALL` (10Y, 30Y, LOR).
    pub term_mix: [f64; 3],
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(theta: ModelParams, deal_count: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            theta,
            deal_count,
            noise_sigma,
            ltm_range: (1e4, 5e5),
            ratio_range: (0.5, 1.5),
            age_range: (0.0, 40.0),
            term_mix: [1.0, 1.0, 1.0],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.deal_count == 0 {
            return Err(Error::InvalidInput("deal_count must be positive".into()));
        }
        check_sigma("noise_sigma", self.noise_sigma)?;
        check_range("ltm_range", self.ltm_range, false)?;
        check_range("ratio_range", self.ratio_range, false)?;
        check_range("age_range", self.age_range, true)?;
        check_mix(&self.term_mix)
    }
}

fn check_sigma(name: &str, sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be non-negative, got {sigma}"
        )))
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), zero_ok: bool) -> Result<()> {
    let lower_ok = if zero_ok { lo >= 0.0 } else { lo > 0.0 };
    if lo.is_finite() && hi.is_finite() && lower_ok && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} [{lo}, {hi}] is not a valid interval"
        )))
    }
}

fn check_mix(mix: &[f64; 3]) -> Result<()> {
    if mix.iter().all(|w| w.is_finite() && *w >= 0.0) && mix.iter().any(|w| *w > 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "term_mix {mix:?} needs non-negative weights, not all zero"
        )))
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

/// Additive multiplier noise, redrawn until the traded multiplier is positive.
struct Noise(Option<Normal<f64>>);

impl Noise {
    fn new(sigma: f64) -> Result<Self> {
        if sigma == 0.0 {
            return Ok(Self(None));
        }
        Normal::new(0.0, sigma)
            .map(|n| Self(Some(n)))
            .map_err(|e| Error::InvalidInput(format!("noise: {e}")))
    }

    fn traded(&self, rng: &mut ChaCha8Rng, model_multiplier: f64) -> f64 {
        let Some(normal) = &self.0 else {
            return model_multiplier;
        };
        loop {
            let m = model_multiplier + normal.sample(rng);
            if m > 0.0 {
                return m;
            }
        }
    }
}

/// A price whose ratio to `ltm` rounds to exactly `multiplier`, searching a
/// few ulps around the rounded product.
fn exact_price(multiplier: f64, ltm: f64) -> Option<f64> {
    let start = multiplier * ltm;
    let (mut up, mut down) = (start, start);
    for _ in 0..=8 {
        for p in [up, down] {
            if p > 0.0 && p / ltm == multiplier {
                return Some(p);
            }
        }
        up = up.next_up();
        down = down.next_down();
    }
    None
}

fn synthetic_id(i: usize) -> String {
    format!("SYN{:06}", i + 1)
}

/// Deterministic trade dates spread over four years from 2016-01-01.
fn synthetic_date(i: usize) -> NaiveDate {
    let base = NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date");
    base + Days::new((i % 1461) as u64)
}

/// Deals whose features are drawn uniformly from the configured ranges and
/// whose traded multiplier is the model multiplier plus Gaussian noise.
///
/// Prices are chosen so that `price / ltm` reproduces the traded multiplier
/// exactly; with zero noise every residual under `theta` is exactly zero.
pub fn generate_deals(config: &SynthConfig) -> Result<Vec<DealRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let terms = WeightedIndex::new(config.term_mix)
        .map_err(|e| Error::InvalidInput(format!("term_mix: {e}")))?;
    let noise = Noise::new(config.noise_sigma)?;

    let mut deals = Vec::with_capacity(config.deal_count);
    for i in 0..config.deal_count {
        let deal = loop {
            let ltm = uniform(&mut rng, config.ltm_range);
            let ratio = uniform(&mut rng, config.ratio_range);
            let age = uniform(&mut rng, config.age_range);
            let term = ContractTerm::ALL[terms.sample(&mut rng)];
            let lty = ltm / ratio;
            let features = PricingFeatures::new(ltm, lty, age, term)?;
            let traded = noise.traded(&mut rng, multiplier(&config.theta, &features)?);
            if let Some(price) = exact_price(traded, ltm) {
                break DealRecord::new(
                    synthetic_id(i),
                    synthetic_date(i),
                    price,
                    ltm,
                    lty,
                    age,
                    term,
                )?;
            }
        };
        deals.push(deal);
    }
    Ok(deals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevenueConfig {
    pub asset_id: String,
    pub start: Quarter,
    pub quarters: usize,
    /// Quarterly revenue at the first quarter, before noise.
    pub level: f64,
    /// Annual growth rate; negative for decaying catalogs.
    pub annual_growth: f64,
    /// Standard deviation of the log of the multiplicative noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl RevenueConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.level.is_finite() && self.level > 0.0) {
            return Err(Error::InvalidInput(format!(
                "level must be positive, got {}",
                self.level
            )));
        }
        if self.quarters < 12 {
            return Err(Error::InvalidInput(format!(
                "a revenue series needs at least 12 quarters, got {}",
                self.quarters
            )));
        }
        if !(self.annual_growth.is_finite() && self.annual_growth > -1.0) {
            return Err(Error::InvalidInput(format!(
                "annual_growth must exceed -1, got {}",
                self.annual_growth
            )));
        }
        check_sigma("noise_sigma", self.noise_sigma)
    }
}

/// `level * (1 + g)^(i / 4)` times lognormal noise for quarter `i`.
pub fn generate_revenue_series(config: &RevenueConfig) -> Result<RevenueSeries> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = if config.noise_sigma > 0.0 {
        Some(
            LogNormal::new(0.0, config.noise_sigma)
                .map_err(|e| Error::InvalidInput(format!("noise: {e}")))?,
        )
    } else {
        None
    };
    let growth = 1.0 + config.annual_growth;
    let amounts = (0..config.quarters)
        .map(|i| {
            let trend = config.level * growth.powf(i as f64 / 4.0);
            match &noise {
                Some(n) => trend * n.sample(&mut rng),
                None => trend,
            }
        })
        .collect();
    RevenueSeries::new(config.asset_id.clone(), config.start, amounts)
}

/// A joint deals-and-revenues data set for end-to-end runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub theta: ModelParams,
    pub asset_count: usize,
    /// Additive noise on each traded multiplier.
    pub noise_sigma: f64,
    pub start: Quarter,
    pub quarters: usize,
    pub level_range: (f64, f64),
    pub growth_range: (f64, f64),
    pub revenue_noise: f64,
    pub age_range: (f64, f64),
    pub term_mix: [f64; 3],
    pub seed: u64,
}

impl MarketConfig {
    /// Eleven years of quarterly revenue from 2014-Q1, enough for one-year
    /// holds entered 2017-2022 and five-year holds entered 2017-2019.
    pub fn new(theta: ModelParams, asset_count: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            theta,
            asset_count,
            noise_sigma,
            start: Quarter::new(2014, 1).expect("valid quarter"),
            quarters: 44,
            level_range: (2_500.0, 125_000.0),
            growth_range: (-0.15, 0.10),
            revenue_noise: 0.05,
            age_range: (0.0, 40.0),
            term_mix: [1.0, 1.0, 1.0],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.asset_count == 0 {
            return Err(Error::InvalidInput("asset_count must be positive".into()));
        }
        if self.quarters < 16 {
            return Err(Error::InvalidInput(format!(
                "market history needs at least 16 quarters, got {}",
                self.quarters
            )));
        }
        check_sigma("noise_sigma", self.noise_sigma)?;
        check_sigma("revenue_noise", self.revenue_noise)?;
        check_range("level_range", self.level_range, false)?;
        check_range("age_range", self.age_range, true)?;
        let (g_lo, g_hi) = self.growth_range;
        if !(g_lo.is_finite() && g_hi.is_finite() && g_lo > -1.0 && g_lo <= g_hi) {
            return Err(Error::InvalidInput(format!(
                "growth_range [{g_lo}, {g_hi}] must lie above -1"
            )));
        }
        check_mix(&self.term_mix)
    }
}

/// Revenue series for every asset plus one deal per asset, traded in one of
/// the five quarters after the first twelve. Deal LTM and LTY are computed
/// from the series at the trade quarter.
pub fn generate_market(config: &MarketConfig) -> Result<(Vec<DealRecord>, RevenueMap)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let terms = WeightedIndex::new(config.term_mix)
        .map_err(|e| Error::InvalidInput(format!("term_mix: {e}")))?;
    let noise = Noise::new(config.noise_sigma)?;

    let mut deals = Vec::with_capacity(config.asset_count);
    let mut revenues = RevenueMap::new();
    for i in 0..config.asset_count {
        let asset_id = synthetic_id(i);
        let series = generate_revenue_series(&RevenueConfig {
            asset_id: asset_id.clone(),
            start: config.start,
            quarters: config.quarters,
            level: uniform(&mut rng, config.level_range),
            annual_growth: uniform(&mut rng, config.growth_range),
            noise_sigma: config.revenue_noise,
            seed: rng.next_u64(),
        })?;
        let age = uniform(&mut rng, config.age_range);
        let term = ContractTerm::ALL[terms.sample(&mut rng)];
        let first_trade = config.start + 11 + rng.random_range(0..5);

        // If no price reproduces the multiplier exactly, trade a quarter later.
        let last_quarter = config.start + (config.quarters as i64 - 1);
        let mut trade = first_trade;
        let deal = loop {
            let features = features_at(&series, trade, age, term)?;
            let traded = noise.traded(&mut rng, multiplier(&config.theta, &features)?);
            if let Some(price) = exact_price(traded, features.ltm()) {
                let date = trade.first_day() + Days::new(i as u64 % 80);
                break DealRecord::new(
                    &asset_id,
                    date,
                    price,
                    features.ltm(),
                    features.lty(),
                    age,
                    term,
                )?;
            }
            if trade >= last_quarter {
                return Err(Error::InvalidInput(format!(
                    "no exactly representable price for `{asset_id}`"
                )));
            }
            trade = trade + 1;
        };
        deals.push(deal);
        revenues.insert(asset_id, series);
    }
    Ok((deals, revenues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{mse, residuals};
    use crate::data_model::{
        compute_ltm, compute_lty, parse_deal_rows, parse_deals, resolve_deals, serialize_deals,
    };

    fn theta3() -> ModelParams {
        ModelParams::age_premium(0.083, 0.61, 0.058, 0.0098).unwrap()
    }

    #[test]
    fn noiseless_deals_have_zero_residuals() {
        for theta in [ModelParams::flat(0.14).unwrap(), theta3()] {
            let deals = generate_deals(&SynthConfig::new(theta, 500, 0.0, 7)).unwrap();
            assert_eq!(deals.len(), 500);
            assert!(residuals(&theta, &deals).unwrap().iter().all(|r| *r == 0.0));
        }
    }

    #[test]
    fn same_seed_same_deals() {
        let cfg = SynthConfig::new(theta3(), 50, 0.3, 42);
        assert_eq!(generate_deals(&cfg).unwrap(), generate_deals(&cfg).unwrap());
        let other = SynthConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(
            generate_deals(&cfg).unwrap(),
            generate_deals(&other).unwrap()
        );
    }

    #[test]
    fn noise_sets_the_error_floor() {
        let deals = generate_deals(&SynthConfig::new(theta3(), 10_000, 0.5, 11)).unwrap();
        let floor = mse(&theta3(), &deals).unwrap();
        assert!((floor - 0.25).abs() < 0.025, "mse {floor}");
        assert!(deals.iter().all(|d| d.multiplier() > 0.0));
    }

    #[test]
    fn deals_round_trip_through_csv() {
        let deals = generate_deals(&SynthConfig::new(theta3(), 200, 0.2, 5)).unwrap();
        assert_eq!(parse_deals(&serialize_deals(&deals)).unwrap(), deals);
    }

    #[test]
    fn term_mix_is_honoured() {
        let cfg = SynthConfig {
            term_mix: [0.0, 0.0, 1.0],
            ..SynthConfig::new(theta3(), 40, 0.0, 1)
        };
        assert!(generate_deals(&cfg)
            .unwrap()
            .iter()
            .all(|d| d.term() == ContractTerm::LifeOfRights));
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = SynthConfig::new(theta3(), 10, 0.0, 1);
        let bad = [
            SynthConfig {
                deal_count: 0,
                ..base.clone()
            },
            SynthConfig {
                noise_sigma: -0.1,
                ..base.clone()
            },
            SynthConfig {
                ltm_range: (5.0, 1.0),
                ..base.clone()
            },
            SynthConfig {
                ratio_range: (0.0, 1.0),
                ..base.clone()
            },
            SynthConfig {
                age_range: (-1.0, 1.0),
                ..base.clone()
            },
            SynthConfig {
                term_mix: [0.0; 3],
                ..base.clone()
            },
        ];
        for cfg in bad {
            assert!(generate_deals(&cfg).is_err(), "{cfg:?}");
        }
    }

    fn revenue(growth: f64, noise: f64, quarters: usize, seed: u64) -> RevenueConfig {
        RevenueConfig {
            asset_id: "R".into(),
            start: Quarter::new(2014, 1).unwrap(),
            quarters,
            level: 25.0,
            annual_growth: growth,
            noise_sigma: noise,
            seed,
        }
    }

    #[test]
    fn flat_series_has_unit_ratio() {
        let s = generate_revenue_series(&revenue(0.0, 0.0, 20, 1)).unwrap();
        assert!(s.amounts().iter().all(|a| *a == 25.0));
        for k in 11..20 {
            let q = s.start() + k;
            assert_eq!(compute_ltm(&s, q).unwrap(), compute_lty(&s, q).unwrap());
        }
    }

    #[test]
    fn decaying_series_has_ratio_below_one() {
        let s = generate_revenue_series(&revenue(-0.1, 0.0, 16, 1)).unwrap();
        let last = s.end().unwrap();
        assert!(compute_ltm(&s, last).unwrap() < compute_lty(&s, last).unwrap());
    }

    #[test]
    fn revenue_is_deterministic_and_validated() {
        let a = generate_revenue_series(&revenue(0.05, 0.2, 24, 9)).unwrap();
        assert_eq!(
            a,
            generate_revenue_series(&revenue(0.05, 0.2, 24, 9)).unwrap()
        );
        assert!(generate_revenue_series(&revenue(0.0, 0.0, 11, 1)).is_err());
        assert!(generate_revenue_series(&revenue(-1.0, 0.0, 12, 1)).is_err());
        let bad_level = RevenueConfig {
            level: 0.0,
            ..revenue(0.0, 0.0, 12, 1)
        };
        assert!(generate_revenue_series(&bad_level).is_err());
    }

    #[test]
    fn market_deals_agree_with_revenues() {
        let (deals, revenues) = generate_market(&MarketConfig::new(theta3(), 60, 0.0, 3)).unwrap();
        assert_eq!(deals.len(), 60);
        assert_eq!(revenues.len(), 60);
        assert!(residuals(&theta3(), &deals)
            .unwrap()
            .iter()
            .all(|r| *r == 0.0));
        let rows = parse_deal_rows(&serialize_deals(&deals)).unwrap();
        assert_eq!(resolve_deals(&rows, Some(&revenues)).unwrap(), deals);
    }
}
