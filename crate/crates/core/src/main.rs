use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use curvature_reduction::checks::{self, CheckReport};
use curvature_reduction::config::{ProblemConfig, RunReport};
use curvature_reduction::morse;
use curvature_reduction::quadrature::{self, IntegralResult};
use curvature_reduction::reduction::{self, ReducedModel};
use curvature_reduction::{ConcentrationBox, Error, Result};

const EXIT_CONFIG: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_FAILED: u8 = 3;
const EXIT_INCOMPLETE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "curvred", version, about = "Reduced-energy analysis of curvature prescription on the unit ball")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Problem description (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination for gamma-scan.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides quadrature.rel_tol.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Overrides search.starts.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Overrides kappa (and the default scan box).
    #[arg(long, global = true)]
    kappa: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Model constants with cubature and closed-form values side by side.
    Constants,
    /// Reduced energy on a grid of bubble parameters, written as CSV.
    GammaScan,
    /// Run one verification suite.
    Verify {
        #[arg(value_enum)]
        which: Which,
    },
    /// Critical points of the boundary trace and the existence verdict.
    Theorem,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Which {
    Bubble,
    Kernel,
    EnergyConst,
    EnergyIdentity,
    Limit,
    Expansion,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Constants => "constants".into(),
            Command::GammaScan => "gamma-scan".into(),
            Command::Verify { which } => {
                format!("verify {}", which.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default())
            }
            Command::Theorem => "theorem".into(),
        }
    }
}

/// What a command produced, and which exit code it maps to.
struct Outcome {
    results: Value,
    exit: u8,
    summary: Vec<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        Error::FitUnstable { .. } => EXIT_FAILED,
        Error::IncompleteCriticalSet(_) => EXIT_INCOMPLETE,
        _ => EXIT_CONFIG,
    }
}

fn load_config(cli: &Cli) -> Result<ProblemConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut config = ProblemConfig::parse(&text)?;
    if let Some(t) = cli.rel_tol {
        config.quadrature.rel_tol = t;
    }
    if let Some(s) = cli.seeds {
        config.search.starts = s;
    }
    if let Some(k) = cli.kappa {
        config.kappa = k;
        config.scan = None;
    }
    config.resolve()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = cli.command.name();
    let started = Instant::now();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => return fail(&command, None, &e),
    };
    match run(&cli, &config) {
        Ok(outcome) => {
            let report = RunReport::new(&command, &config, outcome.results, started.elapsed().as_secs_f64());
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            for line in &outcome.summary {
                eprintln!("{line}");
            }
            ExitCode::from(outcome.exit)
        }
        Err(e) => fail(&command, Some(&config), &e),
    }
}

fn fail(command: &str, config: Option<&ProblemConfig>, e: &Error) -> ExitCode {
    let code = exit_code(e);
    let body = json!({ "tool": env!("CARGO_PKG_NAME"), "command": command, "config": config, "error": e.to_string(), "exit_code": code });
    println!("{}", serde_json::to_string_pretty(&body).expect("error report serializes"));
    eprintln!("{command}: {e}");
    ExitCode::from(code)
}

fn run(cli: &Cli, config: &ProblemConfig) -> Result<Outcome> {
    match cli.command {
        Command::Constants => constants(config),
        Command::GammaScan => {
            let out = cli.out.as_ref().ok_or_else(|| Error::Config("gamma-scan needs --out <path>".into()))?;
            gamma_scan(config, out)
        }
        Command::Verify { which } => verify(config, which),
        Command::Theorem => theorem(config),
    }
}

fn constant_entry(q: &IntegralResult, oracle: f64) -> Value {
    let rel = if oracle == 0.0 { q.value.abs() } else { (q.value - oracle).abs() / oracle.abs() };
    json!({ "cubature": q.value, "error_estimate": q.error_estimate, "closed_form": oracle, "relative_difference": rel })
}

fn constants(config: &ProblemConfig) -> Result<Outcome> {
    let c = config.constants()?;
    let spec = &config.quadrature;
    let a = quadrature::constant_a(&c, spec)?;
    let b = quadrature::constant_b(&c, spec)?;
    let cc = quadrature::constant_c(&c, spec)?;
    let (oa, ob, oc) = (quadrature::closed_form_a(&c), quadrature::closed_form_b(&c), quadrature::closed_form_c(&c));
    let results = json!({
        "n": c.n, "K0": c.k0, "H0": c.h0, "D": c.d,
        "Lambda_n": c.lambda_n, "alpha_n": c.alpha_n, "beta_n": c.beta_n,
        "a_n": constant_entry(&a, oa), "b_n": constant_entry(&b, ob), "c_n": constant_entry(&cc, oc),
    });
    let summary = vec![
        format!("n = {}, D = {}", c.n, c.d),
        format!("a_n = {} (closed form {oa})", a.value),
        format!("b_n = {} (closed form {ob})", b.value),
        format!("c_n = {} (closed form {oc})", cc.value),
    ];
    Ok(Outcome { results, exit: 0, summary })
}

fn gamma_scan(config: &ProblemConfig, out: &PathBuf) -> Result<Outcome> {
    let (c, f) = (config.constants()?, config.fields()?);
    let scan = config.scan.clone().expect("resolved config has a scan");
    let grid = scan.grid(c.n);
    let cells: Vec<Result<Option<reduction::GammaReport>>> = grid
        .par_iter()
        .map(|p| match reduction::gamma(&c, &f, p, &config.quadrature) {
            Ok(g) => Ok(Some(g)),
            Err(Error::NotConverged { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();

    let mut csv = String::from("lambda");
    for k in 1..c.n {
        csv.push_str(&format!(",zbar{k}"));
    }
    csv.push_str(",gamma,interior,boundary,converged\n");
    let mut failed = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (p, cell) in grid.iter().zip(cells) {
        csv.push_str(&p.lambda.to_string());
        for z in &p.z_bar {
            csv.push_str(&format!(",{z}"));
        }
        match cell? {
            Some(g) => {
                lo = lo.min(g.value);
                hi = hi.max(g.value);
                csv.push_str(&format!(",{},{},{},true\n", g.value, g.interior_part, g.boundary_part));
            }
            None => {
                failed += 1;
                csv.push_str(",NaN,NaN,NaN,false\n");
            }
        }
    }
    fs::File::create(out)
        .and_then(|mut file| file.write_all(csv.as_bytes()))
        .map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
    let results = json!({ "out": out, "cells": grid.len(), "not_converged": failed, "gamma_min": lo, "gamma_max": hi });
    let summary = vec![format!("wrote {} cells to {} ({failed} not converged)", grid.len(), out.display())];
    Ok(Outcome { results, exit: if failed > 0 { EXIT_NOT_CONVERGED } else { 0 }, summary })
}

fn verify(config: &ProblemConfig, which: Which) -> Result<Outcome> {
    let (c, f, spec) = (config.constants()?, config.fields()?, &config.quadrature);
    let reports: Vec<CheckReport> = match which {
        Which::Bubble => checks::bubble_residuals(&c, 1000, 1),
        Which::Kernel => checks::kernel_residuals(&c, 1000, 2),
        Which::EnergyConst => vec![checks::energy_constancy(&c, config.kappa, 5, spec)?],
        Which::EnergyIdentity => {
            let params = ConcentrationBox::new(config.kappa)?.grid(c.n, 3);
            vec![checks::energy_identity(&c, &f, 0.1, &params, spec)?]
        }
        Which::Limit => checks::limit_at_infinity(&ReducedModel::new(&c, spec)?, &f, spec)?,
        Which::Expansion => {
            let mut e1 = vec![0.0; c.n - 1];
            e1[0] = 1.0;
            checks::small_lambda_expansion(&ReducedModel::new(&c, spec)?, &f, &[vec![0.0; c.n - 1], e1], spec)?
        }
    };
    let passed = reports.iter().all(|r| r.passed);
    let summary = reports
        .iter()
        .map(|r| {
            let verdict = if r.passed { "PASS" } else { "FAIL" };
            format!("{verdict} {}: {:e} (tolerance {:e})", r.name, r.metric, r.tolerance)
        })
        .collect();
    Ok(Outcome { results: json!({ "passed": passed, "checks": reports }), exit: if passed { 0 } else { EXIT_FAILED }, summary })
}

fn theorem(config: &ProblemConfig) -> Result<Outcome> {
    let (c, f) = (config.constants()?, config.fields()?);
    let model = ReducedModel::new(&c, &config.quadrature)?;
    let verdict = morse::theorem_check(&model, &f, &config.search)?;
    let conclusion = if verdict.conclusion {
        "a solution exists for every sufficiently small eps > 0, concentrating at a predicted location"
    } else {
        "no existence guarantee from these conditions"
    };
    let locations: Vec<&[f64]> = verdict.witnesses.iter().map(|w| w.point.xi.as_slice()).collect();
    let mut summary = vec![format!(
        "{} critical points, Euler sum {:?}; conditions {} {} {}; degree sum {:?}",
        verdict.critical_points.len(),
        verdict.euler_sum,
        verdict.condition1,
        verdict.condition2,
        verdict.condition3,
        verdict.degree_sum
    )];
    summary.push(conclusion.to_string());
    let results = json!({
        "constants": { "a_n": model.a, "b_n": model.b, "c_n": model.c },
        "verdict": verdict,
        "predicted_locations": locations,
        "conclusion_text": conclusion,
    });
    Ok(Outcome { results, exit: 0, summary })
}
