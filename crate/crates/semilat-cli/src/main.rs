//! `semilat` — scenario runner for the lattice evolution core.
//!
//! Subcommands:
//! * `run <CONFIG>` — solve a scenario and write its artifact files;
//! * `verify <CONFIG>` — solve and print the diagnostic report to stdout;
//! * `hadamard-table` — emit the exact short-distance coefficient table.
//!
//! Failures print one line `ERROR: <class>: <reason>` on stderr and exit
//! with 2 (parse), 3 (validation), or 4 (numerical blow-up). Warnings are
//! `WARN:` lines on stderr; stdout carries only requested documents.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use semilat_core::perturb::SolutionTower;
use semilat_core::Strategy;
use semilat_hadamard::{recursion_coeffs, PsiPoly};

use semilat_cli::config::{parse_scenario, Format, ModeSpec};
use semilat_cli::scenario::{build, cut_slice, execute, execute_unsplit, Executed};
use semilat_cli::{outputs, report, CliError, Result};

#[derive(Parser)]
#[command(
    name = "semilat",
    version,
    about = "Order-by-order scalar-field evolution on a periodic lattice"
)]
struct Cli {
    /// Run every solver single-threaded (results are bitwise identical).
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write psi_k.csv, phi2_k.csv, g_equal_time_k.csv
    /// and report.json into the configured output directory.
    Run {
        /// Path to the scenario config (TOML).
        #[arg(required_unless_present = "inline")]
        config: Option<PathBuf>,
        /// Inline scenario text instead of a file.
        #[arg(long, conflicts_with = "config")]
        inline: Option<String>,
    },
    /// Solve a scenario and print the diagnostic report (JSON) to stdout;
    /// writes no field files. Includes the coupling-scaling sweep, and the
    /// restart-equivalence check when the scenario uses a restart mode.
    Verify {
        /// Path to the scenario config (TOML).
        #[arg(required_unless_present = "inline")]
        config: Option<PathBuf>,
        /// Inline scenario text instead of a file.
        #[arg(long, conflicts_with = "config")]
        inline: Option<String>,
    },
    /// Emit the exact coincidence-limit coefficient table as JSON.
    HadamardTable {
        /// Mass of the quantized field.
        #[arg(long)]
        m: f64,
        /// Reference length of the logarithm.
        #[arg(long, default_value_t = 1.0)]
        ell: f64,
        /// Largest σ-order to tabulate.
        #[arg(long)]
        sigma_orders: usize,
        /// Largest λ-order to tabulate.
        #[arg(long)]
        lambda_orders: usize,
        /// Largest Taylor rank to store (default: the background's degree).
        #[arg(long)]
        rank: Option<usize>,
        /// One background layer per flag, lowest λ-order first. Layer syntax:
        /// terms separated by ';', each 'coeff' or 'coeff e0 e1 e2 e3'.
        #[arg(long)]
        psi: Vec<String>,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let strategy = if cli.sequential {
        Strategy::Sequential
    } else {
        Strategy::default()
    };
    if let Err(e) = dispatch(cli.command, strategy) {
        eprintln!("ERROR: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(command: Command, strategy: Strategy) -> Result<()> {
    match command {
        Command::Run { config, inline } => cmd_run(load_text(config, inline)?, strategy),
        Command::Verify { config, inline } => cmd_verify(load_text(config, inline)?, strategy),
        Command::HadamardTable { m, ell, sigma_orders, lambda_orders, rank, psi, out } => {
            cmd_table(m, ell, sigma_orders, lambda_orders, rank, &psi, out)
        }
    }
}

/// Reads the scenario text from the file argument or the inline flag.
fn load_text(config: Option<PathBuf>, inline: Option<String>) -> Result<String> {
    match (config, inline) {
        (Some(path), None) => std::fs::read_to_string(&path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        }),
        (None, Some(text)) => Ok(text),
        // clap enforces exactly one; this arm is unreachable in practice.
        _ => Err(CliError::Parse("exactly one of <CONFIG> or --inline".into())),
    }
}

fn emit_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("WARN: {w}");
    }
}

fn cmd_run(text: String, strategy: Strategy) -> Result<()> {
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let t0 = Instant::now();
    let scn = parse_scenario(&text)?;
    timings.insert("parse".into(), ms(t0));

    let out_block = scn.output.clone().ok_or_else(|| {
        CliError::Validation("run requires an [output] block in the scenario".into())
    })?;

    let t1 = Instant::now();
    let built = build(&scn)?;
    emit_warnings(&built.warnings);
    timings.insert("build".into(), ms(t1));

    let t2 = Instant::now();
    let run = execute(&built, out_block.sample_stride, strategy)?;
    timings.insert("solve".into(), ms(t2));

    let t3 = Instant::now();
    let mut diagnostics = report::base_diagnostics(&built, &run)?;
    diagnostics.pass = report::overall_pass(&diagnostics);
    timings.insert("diagnostics".into(), ms(t3));

    let t4 = Instant::now();
    let dir = out_block.directory.as_path();
    let lambda = built.config.lambda;
    if out_block.formats.contains(&Format::Csv) {
        outputs::write_artifact(dir, "psi_k.csv", &outputs::psi_csv(&run, &built.spec, lambda))?;
        outputs::write_artifact(
            dir,
            "phi2_k.csv",
            &outputs::phi2_csv(&run, &built.spec, lambda),
        )?;
        outputs::write_artifact(
            dir,
            "g_equal_time_k.csv",
            &outputs::g_equal_time_csv(&run, &built.spec, lambda),
        )?;
    }
    timings.insert("write_csv".into(), ms(t4));

    if out_block.formats.contains(&Format::Json) {
        let rep = report::RunReport {
            schema_version: 1,
            command: "run".into(),
            config: report::config_echo(&scn, &built),
            warnings: built.warnings.clone(),
            diagnostics,
            timings_ms: timings.clone(),
        };
        outputs::write_artifact(dir, "report.json", &outputs::report_json(&rep))?;
    }
    for (phase, t) in &timings {
        eprintln!("INFO: timing {phase} {t:.3} ms");
    }
    Ok(())
}

fn cmd_verify(text: String, strategy: Strategy) -> Result<()> {
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let t0 = Instant::now();
    let scn = parse_scenario(&text)?;
    timings.insert("parse".into(), ms(t0));

    let t1 = Instant::now();
    let built = build(&scn)?;
    emit_warnings(&built.warnings);
    timings.insert("build".into(), ms(t1));

    // verify writes no field artifacts, so the output sample stride has no
    // role here; every slice is recorded to enable the full diagnostic set.
    let stride = 1;
    let t2 = Instant::now();
    let run = execute(&built, stride, strategy)?;
    timings.insert("solve".into(), ms(t2));

    let t3 = Instant::now();
    let mut diagnostics = report::base_diagnostics(&built, &run)?;

    // The scaling sweep fits residuals of one uninterrupted tower; a
    // stitched run gets a dedicated comparison solve, which then also
    // serves as the unsplit side of the equivalence check.
    let unsplit_holder: Option<SolutionTower>;
    let fit_tower: &SolutionTower = match &run {
        Executed::Single(t) => t,
        Executed::Stitched { .. } => {
            unsplit_holder = Some(execute_unsplit(&built, stride, strategy)?);
            unsplit_holder.as_ref().unwrap()
        }
    };
    diagnostics.lambda_fit = Some(report::lambda_fit(fit_tower)?);
    if let ModeSpec::Restart(t_restart) = built.mode {
        let cut = cut_slice(&built.spec, t_restart)?;
        diagnostics.restart_equivalence =
            Some(report::restart_equivalence(t_restart, cut, &run, fit_tower));
    }
    diagnostics.pass = report::overall_pass(&diagnostics);
    timings.insert("diagnostics".into(), ms(t3));

    let rep = report::RunReport {
        schema_version: 1,
        command: "verify".into(),
        config: report::config_echo(&scn, &built),
        warnings: built.warnings.clone(),
        diagnostics,
        timings_ms: timings.clone(),
    };
    let json = outputs::report_json(&rep);
    std::io::stdout()
        .write_all(json.as_bytes())
        .map_err(CliError::from)?;
    for (phase, t) in &timings {
        eprintln!("INFO: timing {phase} {t:.3} ms");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_table(
    m: f64,
    ell: f64,
    sigma_orders: usize,
    lambda_orders: usize,
    rank: Option<usize>,
    psi: &[String],
    out: Option<PathBuf>,
) -> Result<()> {
    let layers: Vec<PsiPoly> = psi
        .iter()
        .map(|s| parse_psi_layer(s))
        .collect::<Result<_>>()?;
    let rank_max = rank.unwrap_or_else(|| layers.iter().map(|p| p.degree()).max().unwrap_or(0));
    let coeffs = recursion_coeffs(m, &layers, sigma_orders, lambda_orders, rank_max, ell)?;
    let doc = outputs::hadamard_table_doc(&coeffs)?;
    let json = outputs::hadamard_table_json(&doc);
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(&path, json.as_bytes())?;
        }
        None => std::io::stdout()
            .write_all(json.as_bytes())
            .map_err(CliError::from)?,
    }
    Ok(())
}

/// Parses one background layer: `;`-separated terms, each a bare
/// coefficient or `coeff e0 e1 e2 e3`.
fn parse_psi_layer(s: &str) -> Result<PsiPoly> {
    let mut terms: Vec<([usize; 4], f64)> = Vec::new();
    for term in s.split(';') {
        let term = term.trim();
        if term.is_empty() {
            continue;
        }
        let parts: Vec<&str> = term.split_whitespace().collect();
        let coeff: f64 = parts[0].parse().map_err(|_| {
            CliError::Parse(format!("background term '{term}': bad coefficient"))
        })?;
        let exps = match parts.len() {
            1 => [0usize; 4],
            5 => {
                let mut e = [0usize; 4];
                for (slot, p) in e.iter_mut().zip(&parts[1..]) {
                    *slot = p.parse().map_err(|_| {
                        CliError::Parse(format!("background term '{term}': bad exponent"))
                    })?;
                }
                e
            }
            _ => {
                return Err(CliError::Parse(format!(
                    "background term '{term}': expected 'coeff' or 'coeff e0 e1 e2 e3'"
                )))
            }
        };
        terms.push((exps, coeff));
    }
    Ok(PsiPoly::from_terms(&terms)?)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}
