//! The five subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use defbond::{estimate_bond, price, price_surface, zcb_curve, PricerConfig, PricingResult};

use crate::config::RunConfig;
use crate::fmt::{pad, sig9};
use crate::{CliError, RunArgs};

const SWEEP_STEPS: [u32; 3] = [90, 180, 360];
const SWEEP_MESHES: [usize; 4] = [4, 8, 16, 32];

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Machine-readable pricing record.
#[derive(Serialize)]
struct ResultFile {
    bond_value: f64,
    u1: Vec<(f64, f64)>,
    u2: Vec<(f64, f64)>,
    integral_term: f64,
    mesh: usize,
    steps_per_year: u32,
}

fn run_price(spec: &defbond::BondSpec, cfg: &PricerConfig) -> Result<PricingResult, CliError> {
    price(spec, cfg).map_err(|e| CliError::Compute(e.to_string()))
}

/// `price`: single valuation, or the full mesh×steps sweep with `--sweep`.
pub fn cmd_price(rc: &RunConfig, args: &RunArgs) -> Result<(), CliError> {
    let spec = rc.bond()?;
    let cfg = rc.pricer(args.mesh, args.steps_per_year)?;

    if args.sweep {
        println!(
            "bond value sweep (rows: steps/year, columns: mesh elements per axis)"
        );
        print!("{}", pad("steps\\mesh", 12));
        for m in SWEEP_MESHES {
            print!("{}", pad(&m.to_string(), 15));
        }
        println!();
        for spy in SWEEP_STEPS {
            print!("{}", pad(&spy.to_string(), 12));
            for mesh in SWEEP_MESHES {
                let cell = PricerConfig {
                    mesh,
                    steps_per_year: spy,
                    ..cfg.clone()
                };
                let v = run_price(&spec, &cell)?.bond_value;
                print!("{}", pad(&sig9(v), 15));
            }
            println!();
        }
        return Ok(());
    }

    let result = run_price(&spec, &cfg)?;
    println!("bond value: {}", sig9(result.bond_value));
    println!();
    println!("{}{}", pad("date", 8), pad("u1(0,S0,r0;t)", 18));
    for &(t, u) in &result.u1_values {
        println!("{}{}", pad(&format!("{t:.2}"), 8), pad(&sig9(u), 18));
    }
    println!("recovery integral: {}", sig9(result.integral_term));

    if let Some(path) = out_path(args, rc, |o| o.results.clone()) {
        let record = ResultFile {
            bond_value: result.bond_value,
            u1: result.u1_values.clone(),
            u2: result.u2_values.clone(),
            integral_term: result.integral_term,
            mesh: cfg.mesh,
            steps_per_year: cfg.steps_per_year,
        };
        let json = serde_json::to_string_pretty(&record)
            .map_err(|e| CliError::Io(format!("serializing result: {e}")))?;
        write_file(&path, &json)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// `zcb`: hazard-free PDE vs analytic Vasicek discount, maturities 1–10y.
/// The curve sizes its own per-maturity truncation window; the config's
/// `[truncation]` (sized for the bond) is not applied here.
pub fn cmd_zcb(rc: &RunConfig, args: &RunArgs) -> Result<(), CliError> {
    let cfg = PricerConfig {
        trunc: None,
        ..rc.pricer(args.mesh, args.steps_per_year)?
    };
    let maturities: Vec<f64> = (1..=10).map(f64::from).collect();
    let curve = zcb_curve(&maturities, &cfg).map_err(|e| CliError::Compute(e.to_string()))?;
    println!(
        "{}{}{}{}",
        pad("maturity", 10),
        pad("model", 16),
        pad("analytic", 16),
        pad("difference", 14)
    );
    for p in &curve {
        println!(
            "{}{}{}{}",
            pad(&format!("{:.1}", p.maturity), 10),
            pad(&sig9(p.pde), 16),
            pad(&sig9(p.analytic), 16),
            pad(&format!("{:+.3e}", p.pde - p.analytic), 14)
        );
    }
    Ok(())
}

/// `mc`: Monte Carlo bond estimate with its 95% confidence interval.
pub fn cmd_mc(rc: &RunConfig, _args: &RunArgs) -> Result<(), CliError> {
    let spec = rc.bond()?;
    let mc = rc.mc()?;
    let est = estimate_bond(&spec, &mc).map_err(|e| CliError::Compute(e.to_string()))?;
    let (lo, hi) = est.ci95();
    println!("paths: {}   dt: {:.6}   seed: {}", mc.n_paths, mc.dt, mc.seed);
    println!("mc value: {}", sig9(est.mean));
    println!("std error: {}", sig9(est.std_error));
    println!("ci95: [{}, {}]", sig9(lo), sig9(hi));
    Ok(())
}

/// `compare`: PDE valuation against the Monte Carlo interval, one row.
pub fn cmd_compare(rc: &RunConfig, args: &RunArgs) -> Result<(), CliError> {
    let spec = rc.bond()?;
    let cfg = rc.pricer(args.mesh, args.steps_per_year)?;
    let pde = run_price(&spec, &cfg)?.bond_value;
    let est = estimate_bond(&spec, &rc.mc()?).map_err(|e| CliError::Compute(e.to_string()))?;
    let (lo, hi) = est.ci95();
    let contains = est.contains(pde);
    println!(
        "{}{}{}{}{}",
        pad("pde", 15),
        pad("mc", 15),
        pad("ci95_low", 15),
        pad("ci95_high", 15),
        pad("contains", 10)
    );
    println!(
        "{}{}{}{}{}",
        pad(&sig9(pde), 15),
        pad(&sig9(est.mean), 15),
        pad(&sig9(lo), 15),
        pad(&sig9(hi), 15),
        pad(if contains { "yes" } else { "no" }, 10)
    );
    Ok(())
}

/// `surface`: bond value over the whole (S, r) node grid as CSV.
/// Values are printed in shortest round-trip form, so re-reading the file
/// reproduces them bit-exactly.
pub fn cmd_surface(rc: &RunConfig, args: &RunArgs) -> Result<(), CliError> {
    let spec = rc.bond()?;
    let cfg = rc.pricer(args.mesh, args.steps_per_year)?;
    let path = out_path(args, rc, |o| o.surface.clone()).ok_or_else(|| {
        CliError::Usage("surface needs --out PATH (or [output] surface in the config)".into())
    })?;
    let surface = price_surface(&spec, &cfg).map_err(|e| CliError::Compute(e.to_string()))?;
    let records = surface.node_records();

    let mut csv = String::with_capacity(records.len() * 48);
    csv.push_str("S,r,value\n");
    for (s, r, v) in &records {
        csv.push_str(&format!("{s},{r},{v}\n"));
    }
    write_file(&path, &csv)?;

    println!("wrote {} records to {}", records.len(), path.display());
    println!("value at spot: {}", sig9(surface.result.bond_value));
    Ok(())
}

fn out_path(
    args: &RunArgs,
    rc: &RunConfig,
    pick: impl Fn(&crate::config::OutputSection) -> Option<PathBuf>,
) -> Option<PathBuf> {
    args.out
        .clone()
        .or_else(|| rc.output.as_ref().and_then(pick))
}

/// `--dump-config`: echo the parsed (and override-applied) configuration.
pub fn dump_config(rc: &RunConfig, args: &RunArgs) -> Result<(), CliError> {
    let mut rc = rc.clone();
    if let Some(m) = args.mesh {
        rc.numerics.mesh = m;
    }
    if let Some(s) = args.steps_per_year {
        rc.numerics.steps_per_year = s;
    }
    let text = toml::to_string_pretty(&rc)
        .map_err(|e| CliError::Config(format!("re-serializing config: {e}")))?;
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}
