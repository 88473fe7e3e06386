use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::json;

use super::manifest::{manifest_path, RunManifest};
use super::{
    BacktestArgs, CalibrateArgs, Command, CurvesArgs, PriceArgs, ReplayArgs, SynthArgs,
    EXIT_NOT_CONVERGED, EXIT_OK,
};
use crate::backtest::{benchmark_compare, run_backtest, summarize, CostSchedule, HoldingResult};
use crate::calibration::{calibrate, report_csv, CalibrationConfig, ParamBounds};
use crate::data_model::{
    parse_deal_rows, parse_revenues, resolve_deals, serialize_deals, serialize_revenues,
    ContractTerm, DealRecord, PricingFeatures, RevenueMap,
};
use crate::error::{Error, Result};
use crate::pricing::{curve, price, ModelId, ModelParams, Sweep};
use crate::synthgen::{generate_deals, generate_market, MarketConfig, SynthConfig};

pub(super) fn dispatch(command: Command, args: Vec<String>) -> Result<u8> {
    match command {
        Command::Calibrate(a) => cmd_calibrate(a, args),
        Command::Price(a) => cmd_price(a),
        Command::Backtest(a) => cmd_backtest(a, args),
        Command::Curves(a) => cmd_curves(a, args),
        Command::Synth(a) => cmd_synth(a, args),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

fn load_deals(deals: &Path, revenues: Option<&RevenueMap>) -> Result<Vec<DealRecord>> {
    resolve_deals(&parse_deal_rows(&read_text(deals)?)?, revenues)
}

fn cmd_calibrate(a: CalibrateArgs, args: Vec<String>) -> Result<u8> {
    let revenues = a
        .revenues
        .as_deref()
        .map(|p| read_text(p).and_then(|t| parse_revenues(&t)))
        .transpose()?;
    let deals = load_deals(&a.deals, revenues.as_ref())?;
    let model = ModelId::from_number(a.model).expect("clap restricts the model number");
    let mut config = CalibrationConfig::new(model);
    if let Some(path) = &a.bounds {
        config.bounds = read_json::<ParamBounds>(path)?;
    }
    if let Some(path) = &a.initial {
        config.initial_guess = Some(read_json::<ModelParams>(path)?);
    }
    config.objective_tolerance = a.tolerance;
    config.max_iterations = a.max_iter;

    let result = calibrate(&deals, &config)?;
    let params_json = format!("{}\n", serde_json::to_string_pretty(&result.params)?);
    let report = report_csv(std::slice::from_ref(&result));

    let mut manifest = RunManifest::new("calibrate", args);
    manifest.input("deals", Some(&a.deals));
    manifest.input("revenues", a.revenues.as_deref());
    manifest.input("bounds", a.bounds.as_deref());
    manifest.input("initial", a.initial.as_deref());
    manifest.config = json!({
        "model": a.model,
        "bounds": config.bounds,
        "objective_tolerance": config.objective_tolerance,
        "max_iterations": config.max_iterations,
    });
    match &a.out {
        Some(path) => {
            write_text(path, &params_json)?;
            manifest.output(path);
        }
        None => print!("{params_json}"),
    }
    match &a.report {
        Some(path) => {
            write_text(path, &report)?;
            manifest.output(path);
        }
        None => eprint!("{report}"),
    }
    if let Some(first) = a.out.as_ref().or(a.report.as_ref()) {
        manifest.write(&manifest_path(first))?;
    }

    if result.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "warning: model {model} did not converge within {} iterations",
            config.max_iterations
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_price(a: PriceArgs) -> Result<u8> {
    let params: ModelParams = read_json(&a.params)?;
    let features = PricingFeatures::new(a.ltm, a.lty, a.age, a.term)?;
    let valuation = price(&params, &features)?;
    println!("{}", serde_json::to_string_pretty(&valuation)?);
    Ok(EXIT_OK)
}

fn term_title(term: ContractTerm) -> &'static str {
    match term {
        ContractTerm::TenYear => "10-Year Assets",
        ContractTerm::ThirtyYear => "30-Year Assets",
        ContractTerm::LifeOfRights => "Life of Rights Assets",
    }
}

fn results_csv(results: &[HoldingResult]) -> String {
    let mut out = String::from(
        "asset_id,term,entry_quarter,exit_quarter,buy_price,sell_price,cash_collected,cost,d,e,f,r\n",
    );
    for r in results {
        let dec = &r.decomposition;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.asset_id,
            r.term,
            r.entry_quarter,
            r.exit_quarter,
            r.buy_price,
            r.sell_price,
            r.cash_collected,
            r.cost,
            dec.d,
            dec.e,
            dec.f,
            dec.r
        ));
    }
    out
}

fn cmd_backtest(a: BacktestArgs, args: Vec<String>) -> Result<u8> {
    let params: ModelParams = read_json(&a.params)?;
    let revenues = parse_revenues(&read_text(&a.revenues)?)?;
    let deals = load_deals(&a.deals, Some(&revenues))?;
    let costs = match &a.costs {
        Some(path) => read_json::<CostSchedule>(path)?,
        None => CostSchedule::default(),
    };
    costs.validate()?;
    let benchmark = a.benchmark.as_deref().map(read_text).transpose()?;
    let quarters_held = a.horizon.quarters();

    let mut years = a.entry_year.clone();
    years.sort_unstable();
    years.dedup();
    let runs = years
        .iter()
        .map(|&year| run_backtest(&deals, &revenues, &params, year, quarters_held, &costs))
        .collect::<Result<Vec<_>>>()?;

    // Everything is computed before the first file is written, so a failing
    // term leaves no partial output behind.
    let mut files: Vec<(String, String)> = Vec::new();
    let mut report = String::new();
    let all: Vec<HoldingResult> = runs
        .iter()
        .flat_map(|r| r.results.iter().cloned())
        .collect();
    files.push(("results.csv".into(), results_csv(&all)));
    for run in &runs {
        files.push((
            format!("skipped_{}.csv", run.entry_year),
            run.skip_report_csv(),
        ));
    }
    for term in ContractTerm::ALL {
        let subset: Vec<HoldingResult> = all.iter().filter(|r| r.term == term).cloned().collect();
        if subset.is_empty() {
            continue;
        }
        let table = summarize(&subset)?;
        let text = table.to_text(term_title(term));
        files.push((format!("summary_{}.csv", term.token()), table.to_csv()));
        files.push((format!("summary_{}.txt", term.token()), text.clone()));
        report.push_str(&text);
        report.push('\n');
        if let Some(bench) = &benchmark {
            let comparison = benchmark_compare(&table.return_grid(), bench)?;
            files.push((
                format!("benchmark_{}.csv", term.token()),
                comparison.to_csv(),
            ));
        }
    }

    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let mut manifest = RunManifest::new("backtest", args);
    manifest.input("params", Some(&a.params));
    manifest.input("deals", Some(&a.deals));
    manifest.input("revenues", Some(&a.revenues));
    manifest.input("costs", a.costs.as_deref());
    manifest.input("benchmark", a.benchmark.as_deref());
    manifest.config = json!({
        "params": params,
        "entry_years": years,
        "quarters_held": quarters_held,
        "costs": costs,
    });
    for (name, text) in &files {
        let path = a.out_dir.join(name);
        write_text(&path, text)?;
        manifest.output(&path);
    }
    manifest.write(&a.out_dir.join("manifest.json"))?;
    for run in &runs {
        if !run.skipped.is_empty() {
            eprintln!(
                "{}: skipped {} assets (see skipped_{}.csv)",
                run.entry_year,
                run.skipped.len(),
                run.entry_year
            );
        }
    }
    print!("{report}");
    Ok(EXIT_OK)
}

fn cmd_curves(a: CurvesArgs, args: Vec<String>) -> Result<u8> {
    let params: ModelParams = read_json(&a.params)?;
    let sweep = Sweep::from(a.sweep);
    let points = curve(&params, a.term, sweep, a.range, a.ratio, a.age)?;
    let mut csv = String::from(match sweep {
        Sweep::Ratio => "ratio,multiplier\n",
        Sweep::Age => "age,multiplier\n",
    });
    for (x, m) in points {
        csv.push_str(&format!("{x},{m}\n"));
    }
    match &a.out {
        Some(path) => {
            write_text(path, &csv)?;
            let mut manifest = RunManifest::new("curves", args);
            manifest.input("params", Some(&a.params));
            manifest.config = json!({
                "params": params,
                "term": a.term,
                "sweep": format!("{sweep:?}").to_lowercase(),
                "range": [a.range.lo, a.range.hi, a.range.step],
                "fixed_age": a.age,
                "fixed_ratio": a.ratio,
            });
            manifest.output(path);
            manifest.write(&manifest_path(path))?;
        }
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

fn cmd_synth(a: SynthArgs, args: Vec<String>) -> Result<u8> {
    let theta: ModelParams = read_json(&a.theta)?;
    let count = usize::try_from(a.n)
        .map_err(|_| Error::InvalidInput(format!("--n {} is too large", a.n)))?;
    let mut manifest = RunManifest::new("synth", args);
    manifest.input("theta", Some(&a.theta));
    manifest.seed = Some(a.seed);
    manifest.config = json!({
        "theta": theta,
        "n": a.n,
        "noise": a.noise,
        "with_revenues": a.out_revenues.is_some(),
    });

    match &a.out_revenues {
        Some(rev_path) => {
            let (deals, revenues) =
                generate_market(&MarketConfig::new(theta, count, a.noise, a.seed))?;
            write_text(&a.out_deals, &serialize_deals(&deals))?;
            write_text(rev_path, &serialize_revenues(revenues.values()))?;
            manifest.output(&a.out_deals);
            manifest.output(rev_path);
        }
        None => {
            let deals = generate_deals(&SynthConfig::new(theta, count, a.noise, a.seed))?;
            write_text(&a.out_deals, &serialize_deals(&deals))?;
            manifest.output(&a.out_deals);
        }
    }
    manifest.write(&manifest_path(&a.out_deals))?;
    Ok(EXIT_OK)
}

fn cmd_replay(a: ReplayArgs) -> Result<u8> {
    let manifest = RunManifest::read(&a.manifest)?;
    if manifest.command == "replay" {
        return Err(Error::InvalidInput(
            "a replay manifest cannot be replayed".into(),
        ));
    }
    let argv = std::iter::once("royalty".to_string()).chain(manifest.args);
    Ok(super::run(argv))
}
