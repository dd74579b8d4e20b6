use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gsdelay::design::{round_for_report, GroupSequentialDesign, Rounding};
use gsdelay::report::golden::{self, TableCheck};
use gsdelay::report::simulate::{run_simulations, SimulationRow};
use gsdelay::report::sweep::build_designs;
use gsdelay::report::{case_study, run_sweep, OutputFormat, Scenario};
use gsdelay::Error;

#[derive(Parser)]
#[command(
    name = "gsdelay",
    version,
    about = "Group-sequential designs under delayed outcomes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boundaries, stage sizes, ESS and EG of each design in a scenario.
    Design {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Delay metrics over the scenario grid.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Efficiency lost to a six-month delay in the 220-participant example trial.
    CaseStudy {
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo check of the analytic operating characteristics.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        replicates: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Reproduce the published reference tables and report mismatches.
    VerifyTables {
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

enum Outcome {
    Done,
    Mismatch,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::RootNotBracketed { .. } | Error::PowerUnattainable { .. } => 3,
        _ => 2,
    }
}

fn run(command: Command) -> Result<Outcome, Error> {
    match command {
        Command::Design { scenario, output } => {
            let scenario = Scenario::from_path(&scenario)?;
            let designs = build_designs(&scenario, None)?;
            let labels: Vec<&str> = scenario
                .designs
                .iter()
                .map(|g| g.spacing.as_str())
                .collect();
            emit(&output, None, |w, f| match f {
                Some(Format::Json) => write_design_json(w, &labels, &designs),
                Some(Format::Csv) => write_design_csv(w, &labels, &designs),
                None => write_design_text(w, &labels, &designs),
            })?;
        }
        Command::Sweep {
            scenario,
            output,
            threads,
        } => {
            let scenario = Scenario::from_path(&scenario)?;
            let table = run_sweep(&scenario, threads)?;
            let output = with_scenario_defaults(output, &scenario);
            emit(&output, Some(Format::Csv), |w, f| match f {
                Some(Format::Json) => table.write_json(w),
                _ => table.write_csv(w),
            })?;
        }
        Command::CaseStudy { output } => {
            let rows = case_study::case_study()?;
            emit(&output, Some(Format::Csv), |w, f| match f {
                Some(Format::Json) => Ok(serde_json::to_writer_pretty(w, &rows)?),
                _ => case_study::write_csv(&rows, w),
            })?;
        }
        Command::Simulate {
            scenario,
            replicates,
            seed,
            threads,
            output,
        } => {
            let scenario = Scenario::from_path(&scenario)?;
            let rows = run_simulations(&scenario, replicates, seed, threads)?;
            let output = with_scenario_defaults(output, &scenario);
            emit(&output, Some(Format::Csv), |w, f| match f {
                Some(Format::Json) => Ok(serde_json::to_writer_pretty(w, &rows)?),
                _ => write_simulation_csv(w, &rows),
            })?;
        }
        Command::VerifyTables { output } => {
            let checks = golden::verify_all()?;
            for t in &checks {
                let failed = t.failures().count();
                eprintln!(
                    "{} {}: {} of {} checked cells within tolerance",
                    if t.passed() { "PASS" } else { "FAIL" },
                    t.id,
                    t.gating_count() - failed,
                    t.gating_count()
                );
                for note in &t.notes {
                    eprintln!("    note: {note}");
                }
            }
            emit(&output, Some(Format::Csv), |w, f| match f {
                Some(Format::Json) => Ok(serde_json::to_writer_pretty(w, &checks)?),
                _ => write_checks_csv(w, &checks),
            })?;
            if !checks.iter().all(TableCheck::passed) {
                return Ok(Outcome::Mismatch);
            }
        }
    }
    Ok(Outcome::Done)
}

fn with_scenario_defaults(mut output: OutputArgs, scenario: &Scenario) -> OutputArgs {
    if output.out.is_none() {
        output.out = scenario.path.clone();
    }
    if output.format.is_none() {
        output.format = scenario.format.map(Format::from);
    }
    output
}

/// Writes to the requested file or stdout. Files are written through a
/// temporary sibling so a failed run leaves no partial output.
fn emit(
    output: &OutputArgs,
    default: Option<Format>,
    body: impl FnOnce(&mut dyn Write, Option<Format>) -> Result<(), Error>,
) -> Result<(), Error> {
    let format = output.format.or(default);
    match &output.out {
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w, format)?;
            w.flush()?;
        }
        Some(path) => {
            let tmp = temp_path(path);
            let result = (|| -> Result<(), Error> {
                let mut w = BufWriter::new(File::create(&tmp)?);
                body(&mut w, format)?;
                w.flush()?;
                drop(w);
                std::fs::rename(&tmp, path)?;
                Ok(())
            })();
            if result.is_err() {
                let _ = std::fs::remove_file(&tmp);
            }
            result?;
        }
    }
    Ok(())
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

fn fmt_bound(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "-inf".into()
    }
}

fn write_design_text(
    w: &mut dyn Write,
    labels: &[&str],
    designs: &[GroupSequentialDesign],
) -> Result<(), Error> {
    for (label, d) in labels.iter().zip(designs) {
        let spec = d.spec();
        writeln!(
            w,
            "design {label}: K={} family={} futility={} alpha={} beta={} tau={}",
            d.stages(),
            spec.family.label(),
            spec.futility.label(),
            spec.alpha,
            spec.beta,
            spec.tau
        )?;
        writeln!(
            w,
            "  n_single {:.2}  n_max {:.2}  ESS {:.2}  EG {:.2}%",
            d.n_single(),
            d.max_n(),
            d.ess(),
            100.0 * d.eg()
        )?;
        writeln!(
            w,
            "  {:>5} {:>7} {:>9} {:>9} {:>7} {:>9} {:>9} {:>8} {:>8}",
            "stage", "rho", "info", "n_k", "ceil", "efficacy", "futility", "accept", "reject"
        )?;
        let rounded = round_for_report(d, Rounding::Total);
        let b = d.boundaries();
        for k in 0..d.stages() {
            writeln!(
                w,
                "  {:>5} {:>7.4} {:>9.4} {:>9.2} {:>7} {:>9} {:>9} {:>8.5} {:>8.5}",
                k + 1,
                spec.rho[k],
                d.info()[k],
                d.sample_sizes()[k],
                rounded[k],
                fmt_bound(b.efficacy[k]),
                fmt_bound(b.futility[k]),
                d.exit().accept()[k],
                d.exit().reject()[k]
            )?;
        }
    }
    Ok(())
}

fn write_design_csv(
    w: &mut dyn Write,
    labels: &[&str],
    designs: &[GroupSequentialDesign],
) -> Result<(), Error> {
    writeln!(w, "spacing,stages,stage,rho,info,n_k,n_k_ceil,efficacy,futility,accept,reject,n_single,ess,eg_percent")?;
    for (label, d) in labels.iter().zip(designs) {
        let rounded = round_for_report(d, Rounding::Total);
        let b = d.boundaries();
        for k in 0..d.stages() {
            writeln!(
                w,
                "{label},{},{},{:.6},{:.6},{:.2},{},{},{},{:.8},{:.8},{:.2},{:.2},{:.2}",
                d.stages(),
                k + 1,
                d.spec().rho[k],
                d.info()[k],
                d.sample_sizes()[k],
                rounded[k],
                fmt_bound(b.efficacy[k]),
                fmt_bound(b.futility[k]),
                d.exit().accept()[k],
                d.exit().reject()[k],
                d.n_single(),
                d.ess(),
                100.0 * d.eg()
            )?;
        }
    }
    Ok(())
}

fn write_design_json(
    w: &mut dyn Write,
    labels: &[&str],
    designs: &[GroupSequentialDesign],
) -> Result<(), Error> {
    let out: Vec<_> = labels
        .iter()
        .zip(designs)
        .map(|(label, d)| {
            let b = d.boundaries();
            let futility: Vec<Option<f64>> = b
                .futility
                .iter()
                .map(|f| f.is_finite().then_some(*f))
                .collect();
            serde_json::json!({
                "spacing": label,
                "spec": d.spec(),
                "efficacy": b.efficacy,
                "futility": futility,
                "achieved_alpha": b.achieved_alpha,
                "info": d.info(),
                "sample_sizes": d.sample_sizes(),
                "rounded_sizes": round_for_report(d, Rounding::Total),
                "accept": d.exit().accept(),
                "reject": d.exit().reject(),
                "n_single": d.n_single(),
                "ess": d.ess(),
                "eg": d.eg(),
            })
        })
        .collect();
    serde_json::to_writer_pretty(&mut *w, &out)?;
    writeln!(w)?;
    Ok(())
}

fn write_simulation_csv(w: &mut dyn Write, rows: &[SimulationRow]) -> Result<(), Error> {
    writeln!(
        w,
        "spacing,stages,pattern,l,m,replicates,reject_mc,reject_exact,ess_mc,ess_se,ess_exact,ess_delay_mc,ess_delay_se,ess_delay_exact,et_mc,et_se,et_exact"
    )?;
    for r in rows {
        let s = &r.simulated;
        let reject_mc: f64 = s.reject.iter().map(|e| e.mean).sum();
        let reject_exact: f64 = r.analytic_reject.iter().sum();
        let nd = s
            .sample_size_delay
            .expect("simulations always carry a delay");
        let et = s.duration.expect("simulations always carry a delay");
        writeln!(
            w,
            "{},{},{},{},{:.2},{},{:.5},{:.5},{:.2},{:.3},{:.2},{:.2},{:.3},{:.2},{:.2},{:.3},{:.2}",
            r.spacing,
            r.stages,
            r.query.pattern.name(),
            r.query.pattern.ramp_fraction().map(|l| format!("{l:.2}")).unwrap_or_default(),
            r.query.delay,
            s.replicates,
            reject_mc,
            reject_exact,
            s.sample_size.mean,
            s.sample_size.se,
            r.analytic_ess,
            nd.mean,
            nd.se,
            r.analytic_ess_delay,
            et.mean,
            et.se,
            r.analytic_et
        )?;
    }
    Ok(())
}

fn write_checks_csv(w: &mut dyn Write, checks: &[TableCheck]) -> Result<(), Error> {
    writeln!(w, "table,cell,published,computed,tolerance,gating,pass")?;
    for t in checks {
        for c in &t.checks {
            let tol = match c.tolerance {
                golden::Tolerance::Absolute(v) => format!("abs {v}"),
                golden::Tolerance::Relative(v) => format!("rel {v}"),
            };
            writeln!(
                w,
                "{},\"{}\",{},{:.4},{},{},{}",
                t.id,
                c.cell.label(),
                c.cell.value,
                c.computed,
                tol,
                c.gating,
                c.pass
            )?;
        }
    }
    Ok(())
}
