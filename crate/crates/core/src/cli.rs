//! The `fibcode` command-line front end.
//!
//! Verification reports are printed as JSON lines (one object per suite) or,
//! with `--pretty`, as an aligned table. Exit status is 0 on success, 1 when
//! a verification fails and 2 on usage or input errors.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::circuit::{Circuit, CostModel};
use crate::exec;
use crate::fib_data::fibonacci;
use crate::lattice::{TrivalentLattice, MAX_SIDES, MIN_SIDES};
use crate::levinwen::{self, VerificationReport, VerifyOptions};
use crate::statevec::StateVector;
use crate::Result;

/// Environment variable capping the worker pool; 0 or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "FIBCODE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fibcode", version, about = "Fibonacci Levin-Wen measurement circuits")]
pub struct RunConfig {
    /// Seed for randomized-state checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Overrides every suite's tolerance.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Human-readable tables instead of JSON lines.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run verification suites.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Gate counts of a circuit under a cost model.
    Counts {
        #[command(flatten)]
        circuit: CircuitArgs,
        #[arg(long, value_enum, default_value_t = ModelArg::Decomposed)]
        model: ModelArg,
    },
    /// Dimensions of the B_p = 1 and B_p = 0 sectors of an n-gon.
    Dims {
        #[arg(long)]
        sides: usize,
    },
    /// Write a circuit in the text format.
    Export {
        #[command(flatten)]
        circuit: CircuitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a measurement circuit on a state read from a dump file.
    Measure {
        #[arg(value_enum)]
        which: MeasureKind,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = MAX_SIDES)]
        sides: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum Suite {
    Pentagon,
    SimplifiedPentagon,
    Bp {
        #[arg(long, default_value_t = MAX_SIDES)]
        sides: usize,
        /// Random valid-subspace states for the smoke test.
        #[arg(long, default_value_t = 16)]
        random_cases: usize,
    },
    FmoveCommutes {
        #[arg(long, default_value_t = MAX_SIDES)]
        sides: usize,
    },
    TadpolePull,
    /// Projector and commutation checks; all of n = 2, 3, 6 unless `--sides`.
    Commutation {
        #[arg(long)]
        sides: Option<usize>,
    },
    Qv,
    Involutions,
    Lowering,
    All,
}

#[derive(Debug, Args)]
pub struct CircuitArgs {
    #[arg(long = "circuit", value_enum)]
    pub kind: CircuitKind,
    #[arg(long, default_value_t = MAX_SIDES)]
    pub sides: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CircuitKind {
    Qv,
    F,
    ReducedF,
    S,
    Bp,
    Pentagon,
    TadpolePull,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Decomposed,
    Primitive,
}

impl From<ModelArg> for CostModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Decomposed => CostModel::Decomposed,
            ModelArg::Primitive => CostModel::PrimitiveNToffoli,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeasureKind {
    Qv,
    Bp,
}

enum Failure {
    Verification,
    Usage(String),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Parses `argv` (including the program name) and runs the command on the
/// process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) => exec::configure_threads(n),
            Err(_) => {
                let _ = writeln!(err, "fibcode: {THREADS_ENV} must be a non-negative integer, got `{v}`");
                return 2;
            }
        }
    }
    if let Some(t) = config.tolerance {
        if !(t.is_finite() && t >= 0.0) {
            let _ = writeln!(err, "fibcode: --tolerance must be a finite non-negative number, got {t}");
            return 2;
        }
    }
    match execute(&config, out) {
        Ok(()) => 0,
        Err(Failure::Verification) => 1,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(err, "fibcode: {message}");
            2
        }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn execute(config: &RunConfig, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match &config.command {
        Command::Verify { suite } => {
            let reports = run_suite(suite, config)?;
            print_reports(&reports, config.pretty, out).map_err(io_failure)?;
            if reports.iter().all(VerificationReport::passed) {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
        Command::Counts { circuit, model } => {
            let c = build_circuit(circuit)?;
            let counts = c.count_gates((*model).into());
            if config.pretty {
                writeln!(out, "{:<10} {:>6}", "gate", "count").map_err(io_failure)?;
                if counts.cost_model == CostModel::PrimitiveNToffoli {
                    writeln!(out, "{:<10} {:>6}", "toffoli5", counts.toffoli5).map_err(io_failure)?;
                    writeln!(out, "{:<10} {:>6}", "toffoli4", counts.toffoli4).map_err(io_failure)?;
                }
                writeln!(out, "{:<10} {:>6}", "toffoli", counts.toffoli3).map_err(io_failure)?;
                writeln!(out, "{:<10} {:>6}", "cnot", counts.cnot).map_err(io_failure)?;
                writeln!(out, "{:<10} {:>6}", "rotations", counts.single_qubit_rotation).map_err(io_failure)?;
            } else {
                writeln!(out, "{counts}").map_err(io_failure)?;
            }
            Ok(())
        }
        Command::Dims { sides } => dims(*sides, out),
        Command::Export { circuit, out: path } => {
            let c = build_circuit(circuit)?;
            std::fs::write(path, c.export_text())
                .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            Ok(())
        }
        Command::Measure { which, state, sides } => measure(*which, state, *sides, out),
    }
}

fn options(config: &RunConfig) -> VerifyOptions {
    VerifyOptions { tolerance: config.tolerance, seed: config.seed, ..VerifyOptions::default() }
}

fn run_suite(suite: &Suite, config: &RunConfig) -> Result<Vec<VerificationReport>> {
    let opts = options(config);
    Ok(match suite {
        Suite::Pentagon => vec![levinwen::verify_pentagon(&opts)?],
        Suite::SimplifiedPentagon => vec![levinwen::verify_simplified_pentagon(&opts)?],
        Suite::Bp { sides, random_cases } => {
            let opts = VerifyOptions { random_cases: *random_cases, ..opts };
            vec![levinwen::verify_bp(*sides, &opts)?, levinwen::verify_bp_random(*sides, &opts)?]
        }
        Suite::FmoveCommutes { sides } => vec![levinwen::verify_fmove_commutes(*sides, &opts)?],
        Suite::TadpolePull => vec![levinwen::verify_tadpole_pull(&opts)?],
        Suite::Commutation { sides } => {
            let sizes = sides.map_or(vec![2, 3, 6], |n| vec![n]);
            sizes.into_iter().map(|n| levinwen::verify_commutation(n, &opts)).collect::<Result<_>>()?
        }
        Suite::Qv => vec![levinwen::verify_qv(&opts)?],
        Suite::Involutions => vec![levinwen::verify_involutions(&opts)?],
        Suite::Lowering => vec![levinwen::verify_lowering(&opts)?],
        Suite::All => levinwen::verify_all(&opts)?,
    })
}

fn print_reports(reports: &[VerificationReport], pretty: bool, out: &mut dyn Write) -> std::io::Result<()> {
    if !pretty {
        for r in reports {
            writeln!(out, "{}", r.to_json())?;
        }
        return Ok(());
    }
    writeln!(out, "{:<22} {:>6} {:>11} {:>8} {:>12}  witness", "suite", "status", "passed", "skipped", "max dev")?;
    for r in reports {
        writeln!(
            out,
            "{:<22} {:>6} {:>11} {:>8} {:>12.3e}  {}",
            r.name,
            if r.passed() { "PASS" } else { "FAIL" },
            format!("{}/{}", r.cases_passed, r.cases_total),
            r.skipped_invalid,
            r.max_deviation,
            r.witness.as_deref().unwrap_or("-"),
        )?;
    }
    Ok(())
}

fn build_circuit(args: &CircuitArgs) -> Result<Circuit> {
    Ok(match args.kind {
        CircuitKind::Qv => levinwen::qv_circuit(),
        CircuitKind::F => levinwen::f_circuit(),
        CircuitKind::ReducedF => levinwen::reduced_f_circuit(),
        CircuitKind::S => levinwen::s_circuit(),
        CircuitKind::Bp => levinwen::bp_measure_circuit(args.sides)?,
        CircuitKind::Pentagon => levinwen::pentagon_circuit()?,
        CircuitKind::TadpolePull => levinwen::tadpole_pull_circuit()?,
    })
}

fn dims(n: usize, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    if !(MIN_SIDES..=MAX_SIDES).contains(&n) {
        return Err(Failure::Usage(format!("--sides must be in {MIN_SIDES}..={MAX_SIDES}, got {n}")));
    }
    let k = n as u32;
    let fib = |i| fibonacci(i).map_err(|e| Failure::Usage(e.to_string()));
    let (ones, zeros) = (fib(2 * k - 1)?, fib(2 * k + 1)?);
    let total = ones + zeros;
    writeln!(out, "{ones} {zeros} {total}").map_err(io_failure)?;
    let lattice = TrivalentLattice::build_plaquette(n).map_err(crate::Error::from)?;
    let enumerated = lattice.enumerate_valid_states().map_err(crate::Error::from)?.len() as u64;
    let status = if enumerated == total { "ok" } else { "MISMATCH" };
    writeln!(out, "enumerated {enumerated} {status}").map_err(io_failure)?;
    if enumerated == total {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn measure(which: MeasureKind, path: &PathBuf, sides: usize, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let state = StateVector::parse_dump(&text).map_err(crate::Error::from)?;
    let circuit = match which {
        MeasureKind::Qv => levinwen::qv_circuit(),
        MeasureKind::Bp => levinwen::bp_measure_circuit(sides)?,
    };
    let syndrome = circuit.num_qubits() - 1;
    let input = if state.num_qubits() == syndrome {
        state.extend(1).map_err(crate::Error::from)?
    } else if state.num_qubits() == circuit.num_qubits() {
        state
    } else {
        return Err(Failure::Usage(format!(
            "state has {} qubits, expected {syndrome} (data) or {} (data and syndrome)",
            state.num_qubits(),
            circuit.num_qubits()
        )));
    };
    let result = circuit.simulate(&input).map_err(crate::Error::from)?;
    let m = result.measure_qubit(syndrome).map_err(crate::Error::from)?;
    writeln!(out, "p0 {:.16e}", m.prob0).map_err(io_failure)?;
    writeln!(out, "p1 {:.16e}", m.prob1()).map_err(io_failure)?;
    for (s, branch) in [(0, &m.zero), (1, &m.one)] {
        match branch {
            Some(post) => {
                writeln!(out, "# syndrome {s}").map_err(io_failure)?;
                write!(out, "{}", post.dump()).map_err(io_failure)?;
            }
            None => writeln!(out, "# syndrome {s} absent").map_err(io_failure)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("fibcode").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn dims_hexagon() {
        let (code, out, _) = capture(&["dims", "--sides", "6"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().next(), Some("89 233 322"));
        assert_eq!(out.lines().nth(1), Some("enumerated 322 ok"));
    }

    #[test]
    fn counts_hexagon() {
        let (code, out, _) = capture(&["counts", "--circuit", "bp", "--sides", "6", "--model", "decomposed"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "toffoli=82 cnot=43 rotations=24");
        let (_, out, _) = capture(&["counts", "--circuit", "qv", "--model", "primitive"]);
        assert_eq!(out.trim(), "toffoli5=0 toffoli4=1 toffoli=0 cnot=3 rotations=0");
    }

    #[test]
    fn verify_pentagon_json_line() {
        let (code, out, _) = capture(&["verify", "pentagon"]);
        assert_eq!(code, 0);
        let r: VerificationReport = serde_json::from_str(out.trim()).unwrap();
        assert!(r.passed() && r.cases_total == 34);
    }

    #[test]
    fn failing_tolerance_exits_one() {
        let (code, out, _) = capture(&["verify", "bp", "--sides", "2", "--tolerance", "1e-300"]);
        assert_eq!(code, 1);
        let r: VerificationReport = serde_json::from_str(out.lines().next().unwrap()).unwrap();
        assert!(r.witness.is_some());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(capture(&["verify", "nonsense"]).0, 2);
        assert_eq!(capture(&["dims", "--sides", "9"]).0, 2);
        assert_eq!(capture(&["counts", "--circuit", "bp", "--sides", "1"]).0, 2);
        assert_eq!(capture(&[]).0, 2);
        assert_eq!(capture(&["verify", "qv", "--tolerance=-1"]).0, 2);
        let (code, _, err) = capture(&["measure", "qv", "--state", "/nonexistent/state"]);
        assert_eq!(code, 2);
        assert!(err.contains("cannot read"));
    }

    #[test]
    fn pretty_table_has_header() {
        let (code, out, _) = capture(&["--pretty", "verify", "qv"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("suite"));
        assert!(out.contains("PASS"));
    }
}
