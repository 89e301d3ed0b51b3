//! `pdde`: batch front end for mild solutions of delayed parabolic systems.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 failed check (reports are still written).

mod config;
mod error;
mod output;
mod run;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use pdde_core::analysis::{regularization_schedule, weakstar_study};
use pdde_core::grid::{lp_norm, Exponent};
use pdde_core::mild::MildProblem;

use config::{RunConfig, Setup};
use error::CliError;
use output::{num, time, CheckStatus, RunManifest};
use suites::{Context, SuiteRegistry};

#[derive(Parser)]
#[command(name = "pdde", version, about = "Mild solutions of linear parabolic systems with a unit delay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and write norms over time.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one verification suite.
    Verify {
        /// cocycle, duality, picard, oracles, gronwall or smoothing
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the regularization schedule.
    Schedule {
        #[arg(long = "N")]
        big_n: usize,
        #[arg(long, default_value = "1")]
        p: String,
        #[arg(long, default_value = "inf")]
        q: String,
        #[arg(long)]
        r0: String,
    },
    /// Weak-* continuous-dependence study.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, out),
        Command::Verify { suite, config, out } => cmd_verify(&suite, &config, out),
        Command::Schedule { big_n, p, q, r0 } => cmd_schedule(big_n, &p, &q, &r0),
        Command::Study { config, out } => cmd_study(&config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pdde: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn out_dir(setup: &Setup, out: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
    let dir = out.or_else(|| setup.config.output.clone());
    if let Some(d) = &dir {
        output::ensure_dir(d)?;
    }
    Ok(dir)
}

fn manifest(command: &str, path: &Path, setup: &Setup) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_path: path.display().to_string(),
        config_sha256: output::config_hash(&setup.raw),
        solver: Some(setup.config.solver.name.clone()),
        seed: setup.config.estimate.seed,
        constants: run::constants(setup, None, None),
        wall_time_s: 0.0,
        checks: Vec::new(),
        artifacts: Vec::new(),
    }
}

fn cmd_solve(path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let started = Instant::now();
    let setup = RunConfig::load(path)?;
    let dir = out_dir(&setup, out)?.ok_or_else(|| CliError::Config("no output directory (--out or output)".into()))?;
    let fam = setup.family()?;
    let fit = run::fit(&setup, &fam, Exponent::TWO, Exponent::TWO)?;
    let chosen = run::solver(&setup, &fit)?;
    let problem = MildProblem::new(&setup.point, &fam)?;
    let solution = chosen.solver.solve(&problem, &setup.history, 0)?;

    let mut header = vec!["t".to_string()];
    header.extend(setup.norms.iter().map(|q| format!("norm_L{q}")));
    let rows = solution.trajectory.solution().map(|(t, u)| {
        let mut row = vec![time(t)];
        row.extend(setup.norms.iter().map(|&q| num(lp_norm(u, q))));
        row
    });
    output::write_csv(&dir.join("norms.csv"), &header, rows)?;
    let mut artifacts = vec!["norms.csv".to_string()];

    if setup.config.snapshots {
        let header = ["t", "component", "x1", "x2", "u"].map(String::from);
        let grid = &setup.grid;
        let rows = solution.trajectory.solution().flat_map(|(t, u)| {
            (0..u.n()).flat_map(move |k| {
                u.component(k).iter().enumerate().map(move |(idx, v)| {
                    let x = grid.node(idx);
                    vec![time(t), (k + 1).to_string(), num(x[0]), num(x[1]), num(*v)]
                })
            })
        });
        output::write_csv(&dir.join("snapshots.csv"), &header, rows)?;
        artifacts.push("snapshots.csv".into());
    }

    let mut m = manifest("solve", path, &setup);
    m.constants = run::constants(&setup, Some(&fit), Some(&chosen));
    m.checks.push(CheckStatus {
        name: "solve".into(),
        pass: true,
    });
    m.artifacts = artifacts;
    m.wall_time_s = started.elapsed().as_secs_f64();
    output::write_manifest(&dir, &m)?;
    println!(
        "solved {} steps with {} ({} iterations); wrote {}",
        setup.time.steps(),
        chosen.solver.name(),
        solution.iterations,
        dir.display()
    );
    Ok(())
}

fn cmd_verify(suite: &str, path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let started = Instant::now();
    let registry = SuiteRegistry::default();
    let runner = registry.get(suite).ok_or_else(|| {
        CliError::Config(format!("unknown suite '{suite}', expected one of {}", registry.names().join(", ")))
    })?;
    let setup = RunConfig::load(path)?;
    let dir = out_dir(&setup, out)?;
    let mut ctx = Context {
        setup: &setup,
        fits: Vec::new(),
    };
    let rows = runner.run(&mut ctx)?;

    for r in &rows {
        println!(
            "{:<34} {}  measured {}  bound {}",
            r.check,
            if r.pass { "PASS" } else { "FAIL" },
            num(r.measured),
            num(r.theoretical)
        );
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    if let Some(dir) = dir {
        let header = ["check", "theoretical", "measured", "margin", "pass"].map(String::from);
        let csv_rows = rows.iter().map(|r| {
            vec![
                r.check.clone(),
                num(r.theoretical),
                num(r.measured),
                num(r.margin),
                r.pass.to_string(),
            ]
        });
        output::write_csv(&dir.join("report.csv"), &header, csv_rows)?;
        let mut m = manifest(&format!("verify {suite}"), path, &setup);
        m.constants = run::constants(&setup, ctx.fits.first(), None);
        m.checks = rows
            .iter()
            .map(|r| CheckStatus {
                name: r.check.clone(),
                pass: r.pass,
            })
            .collect();
        m.artifacts = vec!["report.csv".into()];
        m.wall_time_s = started.elapsed().as_secs_f64();
        output::write_manifest(&dir, &m)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}

fn cmd_schedule(big_n: usize, p: &str, q: &str, r0: &str) -> Result<(), CliError> {
    let exp = |s: &str, what: &str| -> Result<Exponent, CliError> {
        s.parse().map_err(|e| CliError::Config(format!("--{what}: {e}")))
    };
    let (p, q, r0) = (exp(p, "p")?, exp(q, "q")?, exp(r0, "r0")?);
    let s = regularization_schedule(big_n, p, q, r0).map_err(|e| CliError::Config(e.to_string()))?;
    let chain: Vec<String> = s.chain.iter().map(|e| e.to_string()).collect();
    println!("N = {}", s.big_n);
    println!("p = {}, q = {}, r0 = {}, r' = {}", s.p, s.q, s.r, s.r_prime);
    println!("Theta = {}", s.theta);
    println!("m0 = {}", s.m0);
    println!("chain = {}", chain.join(", "));
    println!("valid = {}", s.valid);
    Ok(())
}

fn cmd_study(path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let started = Instant::now();
    let setup = RunConfig::load(path)?;
    let spec = setup
        .study
        .clone()
        .ok_or_else(|| CliError::Config("the config has no study section".into()))?;
    let dir = out_dir(&setup, out)?.ok_or_else(|| CliError::Config("no output directory (--out or output)".into()))?;
    let fam = setup.family()?;
    let fit = run::fit(&setup, &fam, Exponent::TWO, Exponent::TWO)?;
    let chosen = run::solver(&setup, &fit)?;
    let study = weakstar_study(&setup.point, &fam, &setup.history, &spec, chosen.solver.as_ref())?;

    let header = ["m", "err"].map(String::from);
    let rows = study.ms.iter().zip(&study.errors).map(|(m, e)| vec![m.to_string(), num(*e)]);
    output::write_csv(&dir.join("study.csv"), &header, rows)?;
    for w in &study.warnings {
        eprintln!("pdde: warning: {w}");
    }
    let d = study.decision;
    println!(
        "window [{}, {}], final/initial {}, nonincreasing {}: {}",
        time(study.window.0),
        time(study.window.1),
        num(d.final_ratio),
        d.nonincreasing,
        if d.pass { "PASS" } else { "FAIL" }
    );
    let mut m = manifest("study", path, &setup);
    m.constants = run::constants(&setup, Some(&fit), Some(&chosen));
    m.checks.push(CheckStatus {
        name: "trend".into(),
        pass: d.pass,
    });
    m.artifacts = vec!["study.csv".into()];
    m.wall_time_s = started.elapsed().as_secs_f64();
    output::write_manifest(&dir, &m)?;
    if d.pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("trend rule failed (final/initial {})", num(d.final_ratio))))
    }
}
