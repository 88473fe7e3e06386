//! Discounted-cashflow pricing of royalty assets.
//!
//! An `n`-year asset paying an expected yearly cashflow `C` at a constant
//! discount rate `R` is worth `sum_{i=1..n} C / (1+R)^i`, with end-of-year
//! cashflows. Life-of-rights contracts are priced as the perpetuity `C / R`.
//! The three models differ only in how `C` and `R` are built from the LTM,
//! the LTM/LTY ratio and the catalog age:
//!
//! | model            | `C`                 | `R`                     |
//! |------------------|---------------------|-------------------------|
//! | `Flat`           | `ltm`               | `r`                     |
//! | `RiskAdjusted`   | `ltm * a`           | `r + k * |ratio - 1|`   |
//! | `AgePremium`     | `ltm * (a + b*age)` | `r + k * |ratio - 1|`   |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data_model::{ContractTerm, PricingFeatures};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    /// Flat cashflows at a constant rate; parameters `(r)`.
    Flat,
    /// Haircut cashflows at a trend-penalized rate; parameters `(r, a, k)`.
    RiskAdjusted,
    /// `RiskAdjusted` plus a cashflow premium per year of catalog age;
    /// parameters `(r, a, k, b)`.
    AgePremium,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::Flat, ModelId::RiskAdjusted, ModelId::AgePremium];

    pub fn number(self) -> u8 {
        match self {
            ModelId::Flat => 1,
            ModelId::RiskAdjusted => 2,
            ModelId::AgePremium => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(ModelId::Flat),
            2 => Some(ModelId::RiskAdjusted),
            3 => Some(ModelId::AgePremium),
            _ => None,
        }
    }

    /// Number of fitted parameters.
    pub fn dimension(self) -> usize {
        match self {
            ModelId::Flat => 1,
            ModelId::RiskAdjusted => 3,
            ModelId::AgePremium => 4,
        }
    }

    /// The next simpler model, if any.
    pub fn simpler(self) -> Option<ModelId> {
        match self {
            ModelId::Flat => None,
            ModelId::RiskAdjusted => Some(ModelId::Flat),
            ModelId::AgePremium => Some(ModelId::RiskAdjusted),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Model id plus `(r, a, k, b)`. Parameters a model does not use hold their
/// fixed values `a = 1`, `k = 0`, `b = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsJson", into = "ParamsJson")]
pub struct ModelParams {
    model: ModelId,
    r: f64,
    a: f64,
    k: f64,
    b: f64,
}

impl ModelParams {
    pub fn new(model: ModelId, r: f64, a: f64, k: f64, b: f64) -> Result<Self> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameters(format!(
                    "model {model}: {what} (r={r}, a={a}, k={k}, b={b})"
                )))
            }
        };
        check(r.is_finite() && r >= 0.0, "r must be non-negative")?;
        check(a.is_finite() && a > 0.0, "a must be positive")?;
        check(k.is_finite() && k >= 0.0, "k must be non-negative")?;
        check(b.is_finite() && b >= 0.0, "b must be non-negative")?;
        match model {
            ModelId::Flat => check(
                a == 1.0 && k == 0.0 && b == 0.0,
                "model 1 fixes a=1, k=0, b=0",
            )?,
            ModelId::RiskAdjusted => check(b == 0.0, "model 2 fixes b=0")?,
            ModelId::AgePremium => {}
        }
        Ok(Self { model, r, a, k, b })
    }

    pub fn flat(r: f64) -> Result<Self> {
        Self::new(ModelId::Flat, r, 1.0, 0.0, 0.0)
    }

    pub fn risk_adjusted(r: f64, a: f64, k: f64) -> Result<Self> {
        Self::new(ModelId::RiskAdjusted, r, a, k, 0.0)
    }

    pub fn age_premium(r: f64, a: f64, k: f64, b: f64) -> Result<Self> {
        Self::new(ModelId::AgePremium, r, a, k, b)
    }

    pub fn model(&self) -> ModelId {
        self.model
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// The model's free parameters in `(r, a, k, b)` order.
    pub fn free_values(&self) -> Vec<f64> {
        let all = [self.r, self.a, self.k, self.b];
        all[..self.model.dimension()].to_vec()
    }

    pub fn from_free_values(model: ModelId, values: &[f64]) -> Result<Self> {
        if values.len() != model.dimension() {
            return Err(Error::InvalidParameters(format!(
                "model {model} takes {} parameters, got {}",
                model.dimension(),
                values.len()
            )));
        }
        let get = |i: usize, fixed: f64| values.get(i).copied().unwrap_or(fixed);
        Self::new(
            model,
            get(0, f64::NAN),
            get(1, 1.0),
            get(2, 0.0),
            get(3, 0.0),
        )
    }

    /// The same pricing function expressed in a richer model.
    pub fn embed_into(&self, model: ModelId) -> Result<Self> {
        Self::new(model, self.r, self.a, self.k, self.b)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsJson {
    model: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
}

impl TryFrom<ParamsJson> for ModelParams {
    type Error = String;

    fn try_from(j: ParamsJson) -> std::result::Result<Self, String> {
        let model = ModelId::from_number(j.model)
            .ok_or_else(|| format!("unknown model {} (expected 1, 2 or 3)", j.model))?;
        let dim = model.dimension();
        let field = |name: &str, value: Option<f64>, index: usize, fixed: f64| match value {
            Some(v) => Ok(v),
            None if index >= dim => Ok(fixed),
            None => Err(format!("model {model} requires `{name}`")),
        };
        let r = field("r", j.r, 0, f64::NAN)?;
        let a = field("a", j.a, 1, 1.0)?;
        let k = field("k", j.k, 2, 0.0)?;
        let b = field("b", j.b, 3, 0.0)?;
        ModelParams::new(model, r, a, k, b).map_err(|e| e.to_string())
    }
}

impl From<ModelParams> for ParamsJson {
    fn from(p: ModelParams) -> Self {
        let dim = p.model.dimension();
        let keep = |index: usize, v: f64| (index < dim).then_some(v);
        ParamsJson {
            model: p.model.number(),
            r: Some(p.r),
            a: keep(1, p.a),
            k: keep(2, p.k),
            b: keep(3, p.b),
        }
    }
}

/// Remaining life of a contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    Years(f64),
    Perpetual,
}

impl Horizon {
    /// The horizon after `years` have elapsed, floored at zero.
    pub fn after(self, years: f64) -> Horizon {
        match self {
            Horizon::Years(n) => Horizon::Years((n - years).max(0.0)),
            Horizon::Perpetual => Horizon::Perpetual,
        }
    }

    pub fn years(self) -> Option<f64> {
        match self {
            Horizon::Years(n) => Some(n),
            Horizon::Perpetual => None,
        }
    }
}

/// Present value of one unit paid at the end of each year over `horizon`.
///
/// Finite horizons use `(1 - (1+R)^-n) / R`, evaluated through `expm1` and
/// `ln_1p` so small rates keep full relative precision; `R = 0` gives `n`.
/// Fractional `n` is accepted.
pub fn annuity_factor(rate: f64, horizon: Horizon) -> Result<f64> {
    if !rate.is_finite() || rate <= -1.0 {
        return Err(Error::InvalidParameters(format!(
            "discount rate must exceed -1, got {rate}"
        )));
    }
    match horizon {
        Horizon::Perpetual => {
            if rate <= 0.0 {
                Err(Error::DivergentPerpetuity { rate })
            } else {
                Ok(1.0 / rate)
            }
        }
        Horizon::Years(n) => {
            if !n.is_finite() || n < 0.0 {
                return Err(Error::InvalidParameters(format!(
                    "horizon must be a non-negative number of years, got {n}"
                )));
            }
            if rate == 0.0 {
                Ok(n)
            } else {
                Ok(-(-n * rate.ln_1p()).exp_m1() / rate)
            }
        }
    }
}

/// `r` for the flat model, `r + k |ratio - 1|` otherwise.
pub fn discount_rate(params: &ModelParams, ratio: f64) -> f64 {
    debug_assert!(ratio > 0.0);
    match params.model {
        ModelId::Flat => params.r,
        ModelId::RiskAdjusted | ModelId::AgePremium => params.r + params.k * (ratio - 1.0).abs(),
    }
}

pub fn expected_cashflow(params: &ModelParams, ltm: f64, age: f64) -> Result<f64> {
    if !(ltm.is_finite() && ltm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "ltm must be positive, got {ltm}"
        )));
    }
    if !(age.is_finite() && age >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "age must be non-negative, got {age}"
        )));
    }
    let level = match params.model {
        ModelId::Flat => return Ok(ltm),
        ModelId::RiskAdjusted => params.a,
        ModelId::AgePremium => params.a + params.b * age,
    };
    if level <= 0.0 {
        return Err(Error::InvalidParameters(format!(
            "cashflow level a + b*age = {level} is not positive"
        )));
    }
    Ok(ltm * level)
}

/// Price-to-LTM multiple implied by `params` for an asset with `features`.
pub fn multiplier(params: &ModelParams, features: &PricingFeatures) -> Result<f64> {
    multiplier_over(params, features, features.term().horizon())
}

/// As [`multiplier`], over an explicit remaining horizon.
pub fn multiplier_over(
    params: &ModelParams,
    features: &PricingFeatures,
    horizon: Horizon,
) -> Result<f64> {
    multiplier_from_parts(params, features.ratio(), features.age(), horizon)
}

pub(crate) fn multiplier_from_parts(
    params: &ModelParams,
    ratio: f64,
    age: f64,
    horizon: Horizon,
) -> Result<f64> {
    let level = match params.model {
        ModelId::Flat => 1.0,
        ModelId::RiskAdjusted => params.a,
        ModelId::AgePremium => params.a + params.b * age,
    };
    if level <= 0.0 {
        return Err(Error::InvalidParameters(format!(
            "cashflow level a + b*age = {level} is not positive"
        )));
    }
    Ok(level * annuity_factor(discount_rate(params, ratio), horizon)?)
}

/// Model price of one asset and the quantities behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Valuation {
    pub price: f64,
    pub multiplier: f64,
    pub discount_rate: f64,
    pub expected_cashflow: f64,
    /// Remaining years; `None` for a perpetuity.
    pub horizon_years: Option<f64>,
}

pub fn price(params: &ModelParams, features: &PricingFeatures) -> Result<Valuation> {
    price_over(params, features, features.term().horizon())
}

pub fn price_over(
    params: &ModelParams,
    features: &PricingFeatures,
    horizon: Horizon,
) -> Result<Valuation> {
    let expected_cashflow = expected_cashflow(params, features.ltm(), features.age())?;
    let multiplier = multiplier_over(params, features, horizon)?;
    Ok(Valuation {
        price: multiplier * features.ltm(),
        multiplier,
        discount_rate: discount_rate(params, features.ratio()),
        expected_cashflow,
        horizon_years: horizon.years(),
    })
}

/// Which feature a curve varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Ratio,
    Age,
}

/// Evenly spaced grid `lo, lo+step, ...` up to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let Grid { lo, hi, step } = *self;
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
            return Err(Error::InvalidInput(format!(
                "range {lo}:{hi}:{step} must satisfy lo <= hi and step > 0"
            )));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| lo + i as f64 * step).collect())
    }
}

/// Model multiplier across `grid`, holding the non-swept feature at
/// `fixed_ratio` or `fixed_age`.
pub fn curve(
    params: &ModelParams,
    term: ContractTerm,
    sweep: Sweep,
    grid: Grid,
    fixed_ratio: f64,
    fixed_age: f64,
) -> Result<Vec<(f64, f64)>> {
    let xs = grid.points()?;
    match sweep {
        Sweep::Ratio if grid.lo <= 0.0 => {
            return Err(Error::InvalidInput("ratio sweep must stay positive".into()))
        }
        Sweep::Age if grid.lo < 0.0 => {
            return Err(Error::InvalidInput("age sweep must be non-negative".into()))
        }
        _ => {}
    }
    xs.into_iter()
        .map(|x| {
            let (ratio, age) = match sweep {
                Sweep::Ratio => (x, fixed_age),
                Sweep::Age => (fixed_ratio, x),
            };
            // ltm = ratio with lty = 1 keeps the ratio bit-exact.
            let features = PricingFeatures::new(ratio, 1.0, age, term)?;
            Ok((x, multiplier(params, &features)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_annuity(rate: f64, n: u32) -> f64 {
        (1..=n).map(|i| 1.0 / (1.0 + rate).powi(i as i32)).sum()
    }

    fn features(ltm: f64, ratio: f64, age: f64, term: ContractTerm) -> PricingFeatures {
        PricingFeatures::new(ltm, ltm / ratio, age, term).unwrap()
    }

    #[test]
    fn annuity_spot_values() {
        assert_eq!(annuity_factor(0.0, Horizon::Years(1.0)).unwrap(), 1.0);
        assert_eq!(annuity_factor(0.0, Horizon::Years(10.0)).unwrap(), 10.0);
        // Oracle: direct ten-term sum, 5.21611584...
        let oracle = brute_force_annuity(0.14, 10);
        assert!((oracle - 5.2161).abs() < 5e-5);
        let closed = annuity_factor(0.14, Horizon::Years(10.0)).unwrap();
        assert!((closed - oracle).abs() <= 1e-12 * oracle);
        let perp = annuity_factor(0.14, Horizon::Perpetual).unwrap();
        assert!((perp - 7.142857142857143).abs() < 1e-12);
        assert!((brute_force_annuity(0.14, 2000) - perp).abs() < 1e-9);
        assert_eq!(annuity_factor(0.1, Horizon::Years(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn perpetuity_needs_positive_rate() {
        assert!(matches!(
            annuity_factor(0.0, Horizon::Perpetual),
            Err(Error::DivergentPerpetuity { .. })
        ));
        assert!(annuity_factor(-0.1, Horizon::Perpetual).is_err());
        assert!(annuity_factor(-1.0, Horizon::Years(3.0)).is_err());
    }

    #[test]
    fn discount_rates() {
        let m2 = ModelParams::risk_adjusted(0.076, 0.69, 0.071).unwrap();
        assert_eq!(discount_rate(&m2, 1.0), 0.076);
        assert!((discount_rate(&m2, 1.5) - 0.1115).abs() < 1e-15);
        let m1 = ModelParams::flat(0.14).unwrap();
        assert_eq!(discount_rate(&m1, 0.3), 0.14);
    }

    #[test]
    fn expected_cashflows() {
        let m1 = ModelParams::flat(0.14).unwrap();
        assert_eq!(expected_cashflow(&m1, 100_000.0, 5.0).unwrap(), 100_000.0);
        let m2 = ModelParams::risk_adjusted(0.076, 0.69, 0.071).unwrap();
        assert!((expected_cashflow(&m2, 100_000.0, 0.0).unwrap() - 69_000.0).abs() < 1e-9);
        let m3 = ModelParams::age_premium(0.083, 0.61, 0.058, 0.0098).unwrap();
        assert!((expected_cashflow(&m3, 100_000.0, 20.0).unwrap() - 80_600.0).abs() < 1e-8);
        assert!(expected_cashflow(&m3, 0.0, 20.0).is_err());
        assert!(expected_cashflow(&m3, 1.0, -1.0).is_err());
    }

    #[test]
    fn multipliers_at_published_fits() {
        let m1 = ModelParams::flat(0.14).unwrap();
        let ten = features(123.0, 0.7, 3.0, ContractTerm::TenYear);
        assert!((multiplier(&m1, &ten).unwrap() - 5.2161).abs() < 1e-4);

        let m3 = ModelParams::age_premium(0.083, 0.61, 0.058, 0.0098).unwrap();
        let lor = features(100_000.0, 1.0, 20.0, ContractTerm::LifeOfRights);
        let m = multiplier(&m3, &lor).unwrap();
        assert!((m - 0.806 / 0.083).abs() < 1e-12);
        assert!((m - 9.711).abs() < 1e-3);

        let m2 = ModelParams::risk_adjusted(0.076, 0.69, 0.071).unwrap();
        let lor = features(100_000.0, 1.5, 0.0, ContractTerm::LifeOfRights);
        assert!((multiplier(&m2, &lor).unwrap() - 0.69 / 0.1115).abs() < 1e-12);
    }

    #[test]
    fn valuation_is_consistent() {
        let m3 = ModelParams::age_premium(0.083, 0.61, 0.058, 0.0098).unwrap();
        let f = features(100_000.0, 1.0, 20.0, ContractTerm::LifeOfRights);
        let v = price(&m3, &f).unwrap();
        assert!((v.price - 971_084.337).abs() < 1e-2);
        assert_eq!(v.price, v.multiplier * f.ltm());
        assert_eq!(v.discount_rate, 0.083);
        assert!((v.expected_cashflow - 80_600.0).abs() < 1e-8);
        assert_eq!(v.horizon_years, None);
    }

    #[test]
    fn params_json_shapes() {
        let m3: ModelParams =
            serde_json::from_str(r#"{"model": 3, "r": 0.083, "a": 0.61, "k": 0.058, "b": 0.0098}"#)
                .unwrap();
        assert_eq!(
            m3,
            ModelParams::age_premium(0.083, 0.61, 0.058, 0.0098).unwrap()
        );
        let m1: ModelParams = serde_json::from_str(r#"{"model":1,"r":0.14}"#).unwrap();
        assert_eq!(
            serde_json::to_string(&m1).unwrap(),
            r#"{"model":1,"r":0.14}"#
        );
        assert!(serde_json::from_str::<ModelParams>(r#"{"model":4,"r":0.1}"#).is_err());
        assert!(serde_json::from_str::<ModelParams>(r#"{"model":3,"r":0.1,"a":1,"k":0}"#).is_err());
        assert!(serde_json::from_str::<ModelParams>(r#"{"model":1,"r":0.1,"a":0.5}"#).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::flat(-0.01).is_err());
        assert!(ModelParams::risk_adjusted(0.1, 0.0, 0.0).is_err());
        assert!(ModelParams::age_premium(0.1, 1.0, -0.1, 0.0).is_err());
        let m1 = ModelParams::flat(0.1).unwrap();
        assert_eq!(
            m1.embed_into(ModelId::AgePremium).unwrap().free_values(),
            [0.1, 1.0, 0.0, 0.0]
        );
        assert!(ModelParams::age_premium(0.1, 1.0, 0.1, 0.01)
            .unwrap()
            .embed_into(ModelId::Flat)
            .is_err());
    }

    #[test]
    fn curves() {
        let m2 = ModelParams::risk_adjusted(0.076, 0.69, 0.071).unwrap();
        let grid = Grid {
            lo: 0.5,
            hi: 1.5,
            step: 0.01,
        };
        let pts = curve(
            &m2,
            ContractTerm::LifeOfRights,
            Sweep::Ratio,
            grid,
            1.0,
            10.0,
        )
        .unwrap();
        assert_eq!(pts.len(), 101);
        let peak = pts
            .iter()
            .cloned()
            .fold((0.0, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
        assert_eq!(peak.0, 1.0);

        let m3 = ModelParams::age_premium(0.083, 0.61, 0.058, 0.0098).unwrap();
        let ages = curve(
            &m3,
            ContractTerm::TenYear,
            Sweep::Age,
            Grid {
                lo: 0.0,
                hi: 40.0,
                step: 1.0,
            },
            1.0,
            0.0,
        )
        .unwrap();
        assert!(ages.windows(2).all(|w| w[1].1 > w[0].1));

        let m1 = ModelParams::flat(0.14).unwrap();
        let flat = curve(
            &m1,
            ContractTerm::TenYear,
            Sweep::Age,
            Grid {
                lo: 0.0,
                hi: 40.0,
                step: 5.0,
            },
            1.3,
            0.0,
        )
        .unwrap();
        assert!(flat.iter().all(|p| p.1 == flat[0].1));

        assert!(Grid {
            lo: 2.0,
            hi: 1.0,
            step: 0.1
        }
        .points()
        .is_err());
        assert!(Grid {
            lo: 0.0,
            hi: 1.0,
            step: 0.0
        }
        .points()
        .is_err());
    }
}
