//! Command implementations for the `phaseconj` binary.
//!
//! Every command fills a [`RunReport`]; the process exit status follows
//! [`RunReport::exit_code`]. Commands are plain functions so they can be
//! driven from tests without spawning a process.

pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use phaseconj::channel::{
    channel_covariance_deviation, choi_from_kraus, covariance_deviation, is_cpt, ChannelError,
    ChannelFile, KrausChannel,
};
use phaseconj::dilation::{
    circulant_unitary, controlled_unitary, generic_stinespring, matching_unitary,
    paper_formula_unitary, verify_dilation, DilationError, DilationSpec,
};
use phaseconj::linalg::{frobenius_distance, ComplexMatrix};
use phaseconj::nsb::{
    canonical, decompose_d4, family_d4, load_nsb, matchings, MatchingPermutation, NsbError,
    NsbMatrix,
};
use phaseconj::optimal::{
    analytic_fidelity, choi_fidelity, fidelity_report, fidelity_table, optimal_choi, optimal_kraus,
    oracle_max_fidelity_seeded, FidelityRow, OptimalError,
};

pub use report::{Check, RunReport};

pub const DEFAULT_SEED: u64 = 12345;
/// Default tolerance for structural checks (CPT, covariance, dilations).
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default certified gap for the oracle.
pub const DEFAULT_ORACLE_TOL: f64 = 1e-9;
/// Oracle value must land this close to `2/d`.
pub const ORACLE_VALUE_TOL: f64 = 1e-6;
/// Largest singleton weight `c_k` accepted at the oracle's maximizer.
pub const ORACLE_SINGLETON_TOL: f64 = 1e-5;
/// Random inputs used by `dilation`.
pub const DILATION_SAMPLES: usize = 20;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Nsb(#[from] NsbError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Optimal(#[from] OptimalError),
    #[error(transparent)]
    Dilation(#[from] DilationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "phaseconj",
    version,
    about = "Optimal phase-covariant conjugation channels"
)]
pub struct Cli {
    /// Tolerance for the command's checks (command-specific default)
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for every random sample drawn by the command
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output format for `table`; other commands always write JSON
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the run report here instead of printing it
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fidelity of the optimal, universal and phase-estimation strategies
    Table(TableArgs),
    /// Build the optimal channel of an NSB matrix (Kraus and Choi forms)
    Build(BuildArgs),
    /// Run the CPT, covariance, fidelity and dilation checks
    Verify(VerifyArgs),
    /// Maximize the fidelity numerically over covariant channels
    Oracle(OracleArgs),
    /// Build and verify a unitary dilation
    Dilation(DilationArgs),
    /// Evaluate the literal general even-d block formula for every k
    FormulaCheck(FormulaCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub dmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["nsb", "canonical", "p1"])))]
pub struct BuildArgs {
    #[arg(long)]
    pub d: usize,
    /// NSB matrix as CSV or JSON
    #[arg(long)]
    pub nsb: Option<PathBuf>,
    /// Use (J − I)/(d − 1)
    #[arg(long)]
    pub canonical: bool,
    /// Weight of the matching {01,23} (d = 4 only)
    #[arg(long, requires = "p2")]
    pub p1: Option<f64>,
    /// Weight of the matching {02,13} (d = 4 only)
    #[arg(long, requires = "p1")]
    pub p2: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub d: usize,
    /// NSB matrix as CSV or JSON; the canonical matrix when omitted
    #[arg(long)]
    pub nsb: Option<PathBuf>,
    /// Number of random phase vectors and inputs per sampled check
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub d: usize,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DilationArgs {
    #[arg(long)]
    pub d: usize,
    /// Perfect matching such as "01,23" (":"-separated pairs for d > 10)
    #[arg(long, conflicts_with = "control")]
    pub matching: Option<String>,
    /// Controlled dilation over d − 1 matchings
    #[arg(long, requires = "p")]
    pub control: bool,
    /// Control weights "w0,w1,..."
    #[arg(long, requires = "control")]
    pub p: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FormulaCheckArgs {
    #[arg(long)]
    pub d: usize,
}

/// Settings shared by all commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Global {
    pub tol: Option<f64>,
    pub seed: u64,
    pub format: Format,
}

impl Default for Global {
    fn default() -> Self {
        Self {
            tol: None,
            seed: DEFAULT_SEED,
            format: Format::Json,
        }
    }
}

impl Global {
    fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

/// Primary output of a command: written to `path`, or to stdout when `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub path: Option<PathBuf>,
}

/// A finished run: the report and whatever should go to stdout.
#[derive(Debug, Clone)]
pub struct Execution {
    pub report: RunReport,
    pub stdout: Option<String>,
}

/// Run one parsed command line, writing `--out` and `--report` files.
pub fn execute(cli: &Cli) -> Execution {
    let global = Global {
        tol: cli.tol,
        seed: cli.seed,
        format: cli.format,
    };
    let mut report = RunReport::new(command_name(&cli.command));
    report.param("seed", global.seed);
    if let Some(t) = global.tol {
        report.param("tol", t);
    }
    let result = match &cli.command {
        Command::Table(a) => cmd_table(a, &global, &mut report),
        Command::Build(a) => cmd_build(a, &global, &mut report),
        Command::Verify(a) => cmd_verify(a, &global, &mut report).map(|()| None),
        Command::Oracle(a) => cmd_oracle(a, &global, &mut report).map(|()| None),
        Command::Dilation(a) => cmd_dilation(a, &global, &mut report),
        Command::FormulaCheck(a) => cmd_formula_check(a, &mut report).map(|()| None),
    };
    let mut stdout = None;
    match result {
        Ok(Some(out)) => match &out.path {
            Some(path) => match write_file(path, &out.text) {
                Ok(()) => report.artifacts.push(path.display().to_string()),
                Err(e) => report.error = Some(e.to_string()),
            },
            None => stdout = Some(out.text),
        },
        Ok(None) => {}
        Err(e) => report.error = Some(e.to_string()),
    }
    if let Some(path) = &cli.report {
        report.artifacts.push(path.display().to_string());
        report.finish();
        if let Err(e) = write_file(path, &report.to_json()) {
            report.error = Some(e.to_string());
        }
    }
    report.finish();
    Execution { report, stdout }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Table(_) => "table",
        Command::Build(_) => "build",
        Command::Verify(_) => "verify",
        Command::Oracle(_) => "oracle",
        Command::Dilation(_) => "dilation",
        Command::FormulaCheck(_) => "formula-check",
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_dimension(d: usize) -> Result<(), CliError> {
    if d < 2 {
        return Err(CliError::Usage(format!("--d must be at least 2, got {d}")));
    }
    Ok(())
}

fn load_nsb_file(path: &Path, d: usize, tol: f64) -> Result<NsbMatrix, CliError> {
    let b = load_nsb(&read_file(path)?, tol)?;
    if b.d() != d {
        return Err(CliError::Usage(format!(
            "{} holds a {}x{} matrix but --d is {d}",
            path.display(),
            b.d(),
            b.d()
        )));
    }
    Ok(b)
}

/// `d,opt,universal,phase_est` with 15 decimals.
pub fn table_csv(rows: &[FidelityRow]) -> String {
    let mut s = String::from("d,opt,universal,phase_est\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.15},{:.15},{:.15}\n",
            r.d, r.opt, r.universal, r.phase_est
        ));
    }
    s
}

pub fn cmd_table(
    args: &TableArgs,
    global: &Global,
    report: &mut RunReport,
) -> Result<Option<Output>, CliError> {
    report
        .param("dmax", args.dmax)
        .param("format", global.format);
    let rows = fidelity_table(args.dmax)?;
    let margin = |f: fn(&FidelityRow) -> f64| {
        rows.iter()
            .map(|r| r.opt - f(r))
            .fold(f64::INFINITY, f64::min)
    };
    report
        .check(Check::above(
            "optimal_beats_phase_estimation",
            margin(|r| r.phase_est),
            0.0,
        ))
        .check(Check::above(
            "optimal_beats_universal",
            margin(|r| r.universal),
            0.0,
        ))
        .datum("rows", rows.len());
    let text = match global.format {
        Format::Csv => table_csv(&rows),
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows are plain data") + "\n",
    };
    Ok(Some(Output {
        text,
        path: args.out.clone(),
    }))
}

fn cpt_check(b: &NsbMatrix, tol: f64) -> (Check, Value) {
    let cpt = is_cpt(&optimal_choi(b), tol);
    let measured = cpt.deviation.max(-cpt.min_eigenvalue).max(0.0);
    let mut check = Check::at_most("cpt", measured, tol);
    check.pass &= cpt.passed();
    (check, serde_json::to_value(cpt).expect("plain data"))
}

pub fn cmd_build(
    args: &BuildArgs,
    global: &Global,
    report: &mut RunReport,
) -> Result<Option<Output>, CliError> {
    let tol = global.tol_or(DEFAULT_TOL);
    let d = args.d;
    report.param("d", d);
    check_dimension(d)?;
    let b = match (&args.nsb, args.canonical, args.p1, args.p2) {
        (Some(path), false, None, None) => {
            report.param("nsb", path.display().to_string());
            load_nsb_file(path, d, tol)?
        }
        (None, true, None, None) => {
            report.param("canonical", true);
            canonical(d)?
        }
        (None, false, Some(p1), Some(p2)) => {
            report.param("p1", p1).param("p2", p2);
            if d != 4 {
                return Err(CliError::Usage("--p1/--p2 describe d = 4 only".into()));
            }
            family_d4(p1, p2)?
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --nsb, --canonical, or --p1 with --p2".into(),
            ))
        }
    };
    let kraus = optimal_kraus(&b);
    let choi = optimal_choi(&b);
    let fidelity = choi_fidelity(&choi);
    let (cpt, cpt_data) = cpt_check(&b, tol);
    report
        .check(cpt)
        .check(Check::at_most(
            "analytic_fidelity",
            (fidelity - analytic_fidelity(d)).abs(),
            tol,
        ))
        .check(Check::at_most(
            "covariance",
            covariance_deviation(&choi, 20, global.seed),
            tol,
        ))
        .datum("nsb", b.rows())
        .datum("fidelity", fidelity)
        .datum("kraus_count", kraus.len())
        .datum("cpt", cpt_data);

    let mut file = serde_json::to_value(ChannelFile::from_kraus(&kraus)).expect("plain data");
    file["nsb"] = serde_json::to_value(b.rows()).expect("plain data");
    Ok(Some(Output {
        text: serde_json::to_string(&file).expect("plain data") + "\n",
        path: args.out.clone(),
    }))
}

pub fn cmd_verify(
    args: &VerifyArgs,
    global: &Global,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let tol = global.tol_or(DEFAULT_TOL);
    let (d, n, seed) = (args.d, args.seeds, global.seed);
    report.param("d", d).param("seeds", n);
    check_dimension(d)?;
    if n == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    let b = match &args.nsb {
        Some(path) => {
            report.param("nsb", path.display().to_string());
            load_nsb_file(path, d, tol)?
        }
        None => {
            report.param("nsb", "canonical");
            canonical(d)?
        }
    };
    let ch = optimal_kraus(&b);
    let r = optimal_choi(&b);
    let target = analytic_fidelity(d);
    let fidelity = choi_fidelity(&r);
    let fr = fidelity_report(&ch, n, 50 * n, seed)?;
    let pointwise: Vec<f64> = fr.pointwise_samples.iter().map(|(_, f)| *f).collect();
    let flatness = pointwise
        .iter()
        .map(|f| (f - target).abs())
        .fold(0.0, f64::max);
    let (cpt, cpt_data) = cpt_check(&b, tol);
    report
        .check(cpt)
        .check(Check::at_most(
            "analytic_fidelity",
            (fidelity - target).abs(),
            tol,
        ))
        .check(Check::at_most(
            "channel_covariance",
            channel_covariance_deviation(&ch, n, 5, seed),
            tol,
        ))
        .check(Check::at_most(
            "choi_covariance",
            covariance_deviation(&r, n, seed),
            tol,
        ))
        .check(Check::at_most("fidelity_flatness", flatness, tol))
        .check(Check::at_most(
            "kraus_choi_agreement",
            frobenius_distance(choi_from_kraus(&ch).matrix(), r.matrix()).expect("same shape"),
            tol,
        ))
        .datum("nsb", b.rows())
        .datum("fidelity", fidelity)
        .datum("analytic", target)
        .datum(
            "fidelity_variance",
            phaseconj::optimal::variance(&pointwise),
        )
        .datum("monte_carlo_mean", fr.monte_carlo_mean)
        .datum("monte_carlo_stderr", fr.monte_carlo_stderr)
        .datum("cpt", cpt_data);

    if d % 2 == 0 {
        let (spec, realization) = if d == 2 {
            let m = MatchingPermutation::new(2, &[(0, 1)])?;
            (matching_unitary(&m)?, "unitary")
        } else if d == 4 {
            let (p1, p2, p3) = decompose_d4(&b)?;
            let total = p1 + p2 + p3;
            let w = [p1 / total, p2 / total, p3 / total];
            report.datum("control_weights", w);
            (controlled_unitary(4)?.with_weights(&w)?, "controlled")
        } else {
            (generic_stinespring(&ch)?, "stinespring")
        };
        let rep = verify_dilation(&spec, &ch, n, seed, tol)?;
        report
            .check(Check::at_most("dilation", rep.max_distance, tol))
            .datum(
                "dilation",
                serde_json::json!({
                    "realization": realization,
                    "ancilla_dim": spec.ancilla_dim,
                    "control_dim": spec.control_dim,
                    "max_distance": rep.max_distance,
                }),
            );
        if d == 2 {
            report.datum("unitary", &spec.unitary);
        }
    }
    Ok(())
}

pub fn cmd_oracle(
    args: &OracleArgs,
    global: &Global,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let tol = global.tol_or(DEFAULT_ORACLE_TOL);
    let d = args.d;
    report.param("d", d).param("oracle_tol", tol);
    let target = analytic_fidelity(d.max(1));
    match oracle_max_fidelity_seeded(d, tol, global.seed) {
        Ok(res) => {
            let c_max = res.singleton_weights.iter().copied().fold(0.0, f64::max);
            report
                .check(Check::at_most("converged", res.gap_bound, tol))
                .check(Check::at_most(
                    "matches_analytic",
                    (res.value - target).abs(),
                    ORACLE_VALUE_TOL,
                ))
                .check(Check::at_most(
                    "singleton_weights",
                    c_max,
                    ORACLE_SINGLETON_TOL,
                ))
                .datum("value", res.value)
                .datum("analytic", target)
                .datum("gap_to_analytic", target - res.value)
                .datum("gap_bound", res.gap_bound)
                .datum("iterations", res.iterations)
                .datum("singleton_weights", &res.singleton_weights)
                .datum("block_weights", &res.weights);
            Ok(())
        }
        Err(OptimalError::NotConverged {
            best,
            gap_bound,
            iterations,
        }) => {
            report
                .check(Check::at_most("converged", gap_bound, tol))
                .datum("value", best)
                .datum("analytic", target)
                .datum("gap_bound", gap_bound)
                .datum("iterations", iterations);
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn parse_weights(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad weight {:?} in --p", t.trim())))
        })
        .collect()
}

pub fn cmd_dilation(
    args: &DilationArgs,
    global: &Global,
    report: &mut RunReport,
) -> Result<Option<Output>, CliError> {
    let tol = global.tol_or(DEFAULT_TOL);
    let d = args.d;
    report.param("d", d).param("samples", DILATION_SAMPLES);
    check_dimension(d)?;
    let minimal = d.is_multiple_of(2) && (args.matching.is_some() || args.control);
    let (spec, ch): (DilationSpec, KrausChannel) = match (&args.matching, args.control) {
        (Some(_), true) => {
            return Err(CliError::Usage(
                "--matching and --control are exclusive".into(),
            ))
        }
        (Some(text), false) => {
            report.param("matching", text);
            let m = MatchingPermutation::parse(d, text)?;
            report
                .datum("matching", m.to_string())
                .datum("realization", "matching");
            (matching_unitary(&m)?, optimal_kraus(&m.to_nsb()))
        }
        (None, true) => {
            let text = args
                .p
                .as_deref()
                .ok_or_else(|| CliError::Usage("--control needs --p".into()))?;
            report.param("p", text);
            let weights = parse_weights(text)?;
            let cu = controlled_unitary(d)?;
            let target = cu.target_nsb(&weights)?;
            let names: Vec<String> = cu.matchings.iter().map(|m| m.to_string()).collect();
            report
                .datum("control_matchings", names)
                .datum("target_nsb", target.rows())
                .datum("realization", "controlled");
            (cu.with_weights(&weights)?, optimal_kraus(&target))
        }
        (None, false) => {
            let b = canonical(d)?;
            let ch = optimal_kraus(&b);
            report.datum("realization", "stinespring");
            report.warn(format!(
                "no minimal construction requested for d = {d}: generic Stinespring \
                 dilation of the canonical channel, ancilla dimension {} is not minimal",
                ch.len()
            ));
            (generic_stinespring(&ch)?, ch)
        }
    };
    let rep = verify_dilation(&spec, &ch, DILATION_SAMPLES, global.seed, tol)?;
    report
        .check(Check::at_most(
            "unitarity",
            spec.unitary.unitarity_deviation(),
            tol,
        ))
        .check(Check::at_most("verify_dilation", rep.max_distance, tol))
        .datum("ancilla_dim", spec.ancilla_dim)
        .datum("control_dim", spec.control_dim)
        .datum("minimal", minimal);
    if minimal {
        report.check(Check::at_most(
            "ancilla_dim",
            spec.ancilla_dim as f64,
            (d / 2) as f64,
        ));
    }
    Ok(Some(Output {
        text: serde_json::to_string(&spec).expect("plain data") + "\n",
        path: args.out.clone(),
    }))
}

/// The d = 4 block unitaries `[[A, B], [B, A]]` in system ⊗ ancilla order.
pub fn reference_blocks_d4() -> [ComplexMatrix; 3] {
    let t = |i, j| phaseconj::dilation::pair_swap(i, j, 4).expect("valid pair");
    let block = |a: ComplexMatrix, b: ComplexMatrix| {
        let e = |i, j| ComplexMatrix::basis_op(2, i, j);
        let diag = &e(0, 0) + &e(1, 1);
        let off = &e(0, 1) + &e(1, 0);
        &phaseconj::linalg::kron(&a, &diag) + &phaseconj::linalg::kron(&b, &off)
    };
    [
        block(t(1, 0), t(3, 2)),
        block(t(2, 0), t(3, 1)),
        block(t(3, 0), t(2, 1)),
    ]
}

pub fn cmd_formula_check(args: &FormulaCheckArgs, report: &mut RunReport) -> Result<(), CliError> {
    let d = args.d;
    report.param("d", d);
    if d < 2 || d % 2 == 1 {
        return Err(CliError::Usage(format!(
            "--d must be even and at least 2, got {d}"
        )));
    }
    let mut entries = Vec::new();
    let mut odd_mismatch: f64 = 0.0;
    for k in 1..d {
        let f = paper_formula_unitary(d, k)?;
        if k % 2 == 1 {
            let pairs: Vec<(usize, usize)> = (0..d / 2).map(|r| (2 * r, (2 * r + k) % d)).collect();
            let c = circulant_unitary(d, &pairs)?;
            odd_mismatch = odd_mismatch.max(frobenius_distance(&f.matrix, &c).expect("same shape"));
        }
        if !f.unitary {
            report.warn(format!(
                "k = {k}: the formula is not unitary under the mod-d reading (deviation {:.3e})",
                f.deviation
            ));
        }
        entries.push(serde_json::json!({ "k": k, "unitary": f.unitary, "deviation": f.deviation }));
    }
    report
        .check(Check::at_most("odd_k_equals_circulant", odd_mismatch, 0.0))
        .datum("formula", entries)
        .datum("reading", "i ⊕ j = (i + j) mod d");
    if d == 4 {
        let circulants = matchings(4)?
            .iter()
            .map(|m| matching_unitary(m).map(|s| s.unitary))
            .collect::<Result<Vec<_>, _>>()?;
        let worst = circulants
            .iter()
            .zip(reference_blocks_d4().iter())
            .map(|(c, r)| frobenius_distance(c, r).expect("same shape"))
            .fold(0.0, f64::max);
        report.check(Check::at_most(
            "circulant_equals_reference_blocks",
            worst,
            0.0,
        ));
    }
    Ok(())
}
