//! C ABI over `royalty-core`.
//!
//! Every fallible function returns a [`RoyaltyStatus`] and writes results
//! through out-pointers. On failure, [`royalty_last_error`] returns a
//! message for the calling thread. Objects created here are opaque handles
//! released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use royalty_core::backtest::{annualize, transaction_cost, CostSchedule, ReturnDecomposition};
use royalty_core::calibration::{calibrate, CalibrationConfig};
use royalty_core::data_model::{parse_deals, ContractTerm, DealRecord, PricingFeatures};
use royalty_core::pricing::{annuity_factor, multiplier, price, Horizon, ModelId, ModelParams};
use royalty_core::Error;

/// Result of every fallible call. `PricingInfeasible` covers parameter
/// values outside a model's domain as well as divergent perpetuities.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoyaltyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    ParseError = 3,
    PricingInfeasible = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoyaltyTerm {
    TenYear = 0,
    ThirtyYear = 1,
    LifeOfRights = 2,
}

impl From<RoyaltyTerm> for ContractTerm {
    fn from(t: RoyaltyTerm) -> Self {
        match t {
            RoyaltyTerm::TenYear => ContractTerm::TenYear,
            RoyaltyTerm::ThirtyYear => ContractTerm::ThirtyYear,
            RoyaltyTerm::LifeOfRights => ContractTerm::LifeOfRights,
        }
    }
}

/// Model parameters. Create with `royalty_params_new` or
/// `royalty_params_from_json`; release with `royalty_params_free`.
pub struct RoyaltyParams(ModelParams);

/// A parsed deal set. Release with `royalty_deals_free`.
pub struct RoyaltyDeals(Vec<DealRecord>);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoyaltyValuation {
    pub price: f64,
    pub multiplier: f64,
    pub discount_rate: f64,
    pub expected_cashflow: f64,
    /// Remaining years, or NaN for a perpetuity.
    pub horizon_years: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoyaltyDecomposition {
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub r: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoyaltyCalibration {
    pub mse: f64,
    pub iterations: usize,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RoyaltyStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::DuplicateDeal { .. } | Error::Csv(_) | Error::Json(_) => {
                RoyaltyStatus::ParseError
            }
            e if e.is_pricing_infeasible() => RoyaltyStatus::PricingInfeasible,
            _ => RoyaltyStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, records any failure or panic for `royalty_last_error`, and
/// turns the outcome into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RoyaltyStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| slot.borrow_mut().take());
            RoyaltyStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RoyaltyStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(RoyaltyStatus::NullPointer, format!("`{name}` is null"))
}

/// # Safety
/// `p` must be null or valid for writes of `T`.
unsafe fn write_out<T>(p: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

/// # Safety
/// `p` must be null or point to a live `T`.
unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn utf8<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        Failure(
            RoyaltyStatus::InvalidInput,
            format!("`{name}` is not UTF-8"),
        )
    })
}

fn model_id(model: u8) -> Result<ModelId, Failure> {
    ModelId::from_number(model).ok_or_else(|| {
        Failure(
            RoyaltyStatus::InvalidInput,
            format!("model must be 1, 2 or 3, got {model}"),
        )
    })
}

/// Message describing the last failure on this thread, or null if the last
/// call succeeded. Valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn royalty_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn royalty_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates parameters for `model` (1, 2 or 3). Values a model does not use
/// must be its fixed values (`a = 1`, `k = 0`, `b = 0`).
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn royalty_params_new(
    model: u8,
    r: f64,
    a: f64,
    k: f64,
    b: f64,
    out: *mut *mut RoyaltyParams,
) -> RoyaltyStatus {
    guard(|| {
        let params = ModelParams::new(model_id(model)?, r, a, k, b)?;
        write_out(out, "out", Box::into_raw(Box::new(RoyaltyParams(params))))
    })
}

/// Parses parameters from JSON such as `{"model":1,"r":0.14}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn royalty_params_from_json(
    json: *const c_char,
    out: *mut *mut RoyaltyParams,
) -> RoyaltyStatus {
    guard(|| {
        let params: ModelParams = serde_json::from_str(utf8(json, "json")?).map_err(Error::from)?;
        write_out(out, "out", Box::into_raw(Box::new(RoyaltyParams(params))))
    })
}

/// Writes the model number and all four parameter values.
///
/// # Safety
/// `params` must be a live handle; each out-pointer valid for one value.
#[no_mangle]
pub unsafe extern "C" fn royalty_params_get(
    params: *const RoyaltyParams,
    model: *mut u8,
    r: *mut f64,
    a: *mut f64,
    k: *mut f64,
    b: *mut f64,
) -> RoyaltyStatus {
    guard(|| {
        let p = &borrow(params, "params")?.0;
        write_out(model, "model", p.model().number())?;
        write_out(r, "r", p.r())?;
        write_out(a, "a", p.a())?;
        write_out(k, "k", p.k())?;
        write_out(b, "b", p.b())
    })
}

/// # Safety
/// `params` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn royalty_params_free(params: *mut RoyaltyParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Annuity factor over `years` at `rate`; a negative `years` means a
/// perpetuity.
///
/// # Safety
/// `out` must be valid for one `double`.
#[no_mangle]
pub unsafe extern "C" fn royalty_annuity_factor(
    rate: f64,
    years: f64,
    out: *mut f64,
) -> RoyaltyStatus {
    guard(|| {
        let horizon = if years < 0.0 {
            Horizon::Perpetual
        } else {
            Horizon::Years(years)
        };
        write_out(out, "out", annuity_factor(rate, horizon)?)
    })
}

/// # Safety
/// `params` must be a live handle; `out` valid for one `double`.
#[no_mangle]
pub unsafe extern "C" fn royalty_multiplier(
    params: *const RoyaltyParams,
    ltm: f64,
    lty: f64,
    age: f64,
    term: RoyaltyTerm,
    out: *mut f64,
) -> RoyaltyStatus {
    guard(|| {
        let p = &borrow(params, "params")?.0;
        let features = PricingFeatures::new(ltm, lty, age, term.into())?;
        write_out(out, "out", multiplier(p, &features)?)
    })
}

/// # Safety
/// `params` must be a live handle; `out` valid for one `RoyaltyValuation`.
#[no_mangle]
pub unsafe extern "C" fn royalty_price(
    params: *const RoyaltyParams,
    ltm: f64,
    lty: f64,
    age: f64,
    term: RoyaltyTerm,
    out: *mut RoyaltyValuation,
) -> RoyaltyStatus {
    guard(|| {
        let p = &borrow(params, "params")?.0;
        let v = price(p, &PricingFeatures::new(ltm, lty, age, term.into())?)?;
        write_out(
            out,
            "out",
            RoyaltyValuation {
                price: v.price,
                multiplier: v.multiplier,
                discount_rate: v.discount_rate,
                expected_cashflow: v.expected_cashflow,
                horizon_years: v.horizon_years.unwrap_or(f64::NAN),
            },
        )
    })
}

/// Parses a deals CSV (header `asset_id,trade_date,price,ltm,lty,age_years,term`).
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn royalty_deals_parse_csv(
    csv: *const c_char,
    out: *mut *mut RoyaltyDeals,
) -> RoyaltyStatus {
    guard(|| {
        let deals = parse_deals(utf8(csv, "csv")?)?;
        write_out(out, "out", Box::into_raw(Box::new(RoyaltyDeals(deals))))
    })
}

/// Number of deals in the set, or 0 for a null handle.
///
/// # Safety
/// `deals` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn royalty_deals_len(deals: *const RoyaltyDeals) -> usize {
    deals.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `deals` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn royalty_deals_free(deals: *mut RoyaltyDeals) {
    if !deals.is_null() {
        drop(Box::from_raw(deals));
    }
}

/// Fits `model` with default bounds and tolerance. `max_iterations` of 0
/// keeps the default budget. Running out of iterations is not an error:
/// check `summary.converged`.
///
/// # Safety
/// `deals` must be a live handle; `out_params` valid for one pointer and
/// `summary` for one `RoyaltyCalibration`.
#[no_mangle]
pub unsafe extern "C" fn royalty_calibrate(
    deals: *const RoyaltyDeals,
    model: u8,
    max_iterations: usize,
    out_params: *mut *mut RoyaltyParams,
    summary: *mut RoyaltyCalibration,
) -> RoyaltyStatus {
    guard(|| {
        let deals = &borrow(deals, "deals")?.0;
        if out_params.is_null() {
            return Err(null("out_params"));
        }
        if summary.is_null() {
            return Err(null("summary"));
        }
        let mut config = CalibrationConfig::new(model_id(model)?);
        if max_iterations > 0 {
            config.max_iterations = max_iterations;
        }
        let fit = calibrate(deals, &config)?;
        write_out(
            summary,
            "summary",
            RoyaltyCalibration {
                mse: fit.mse,
                iterations: fit.iterations,
                converged: fit.converged,
            },
        )?;
        write_out(
            out_params,
            "out_params",
            Box::into_raw(Box::new(RoyaltyParams(fit.params))),
        )
    })
}

/// `buyer_fee + seller_commission * sell_price`.
///
/// # Safety
/// `out` must be valid for one `double`.
#[no_mangle]
pub unsafe extern "C" fn royalty_transaction_cost(
    buyer_fee: f64,
    seller_commission: f64,
    sell_price: f64,
    out: *mut f64,
) -> RoyaltyStatus {
    guard(|| {
        let schedule = CostSchedule::new(buyer_fee, seller_commission)?;
        write_out(out, "out", transaction_cost(&schedule, sell_price))
    })
}

/// Splits one holding period's flows into dividend yield, capital gain,
/// cost drag and total return.
///
/// # Safety
/// `out` must be valid for one `RoyaltyDecomposition`.
#[no_mangle]
pub unsafe extern "C" fn royalty_decompose(
    buy_price: f64,
    cash: f64,
    sell_price: f64,
    cost: f64,
    out: *mut RoyaltyDecomposition,
) -> RoyaltyStatus {
    guard(|| {
        if !(buy_price.is_finite() && buy_price > 0.0) {
            return Err(Failure(
                RoyaltyStatus::InvalidInput,
                format!("buy_price must be positive, got {buy_price}"),
            ));
        }
        let ReturnDecomposition { d, e, f, r } =
            ReturnDecomposition::from_flows(buy_price, cash, sell_price, cost);
        write_out(out, "out", RoyaltyDecomposition { d, e, f, r })
    })
}

/// Per-year rate compounding to `total_return` over `years`.
///
/// # Safety
/// `out` must be valid for one `double`.
#[no_mangle]
pub unsafe extern "C" fn royalty_annualize(
    total_return: f64,
    years: f64,
    out: *mut f64,
) -> RoyaltyStatus {
    guard(|| write_out(out, "out", annualize(total_return, years)?))
}
