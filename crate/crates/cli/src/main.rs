//! `mismatch`: key-rate analysis for BB84 receivers with mismatched detectors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mismatch_core::{
    analyze_pair, compute_c, diagonal_only_response, discretize_response, mismatch_spectrum,
    run_sweep, sample_grid, simulate_time_shift, solve_unconstrained_bounds_numeric,
    ContinuousResponse, DetectorPair, DetectorSpec, Knowledge, SolverConfig, SweepConfig,
    TimeShiftScenario, ZeroReason,
};

/// Exit code for a rate that is provably zero.
const EXIT_ZERO_RATE: u8 = 2;

#[derive(Parser)]
#[command(
    version,
    about = "Key rates for BB84 with detector efficiency mismatch"
)]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Random seed for the multistart solver.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random starts per solve.
    #[arg(long, default_value_t = 64)]
    starts: usize,
    /// Rank of Eve's state.
    #[arg(long, default_value_t = 1)]
    rank: usize,
    /// Also try ranks 1, 2 and 4d and keep the best.
    #[arg(long)]
    scan_ranks: bool,
    /// Constraint tolerance for the observed error rates.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// BFGS iterations per inner solve.
    #[arg(long, default_value_t = 400)]
    max_iters: usize,
    /// Initial penalty weight.
    #[arg(long, default_value_t = 10.0)]
    penalty_init: f64,
    /// Restrict Eve to attacks symmetric under bit and basis flips.
    #[arg(long)]
    symmetric: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            starts: self.starts,
            rank: self.rank,
            scan_ranks: self.scan_ranks,
            seed: self.seed,
            max_iters: self.max_iters,
            penalty_init: self.penalty_init,
            constraint_tol: self.tol,
            symmetric: self.symmetric,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mismatch spectrum, noiseless rate and bounds for a detector spec.
    Analyze {
        #[arg(long)]
        spec: PathBuf,
        /// Treat the matrices as known only through their diagonals.
        #[arg(long)]
        diagonal_only: bool,
        /// Cross-check the analytic bounds with the numerical solver.
        #[arg(long)]
        numeric: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Rates over observed error rates e_b = e_p' = e, as CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        e_max: f64,
        #[arg(long, default_value_t = 21)]
        steps: usize,
        /// Skip the constrained solves.
        #[arg(long)]
        bounds_only: bool,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Build a detector spec from tabulated time responses.
    Characterize {
        #[arg(long)]
        csv0: PathBuf,
        #[arg(long)]
        csv1: PathBuf,
        #[arg(long)]
        bandwidth_ghz: f64,
        /// Gate window in ns, as START:END.
        #[arg(long, value_parser = parse_gate)]
        gate_ns: (f64, f64),
        /// Keep only the diagonal (no correlations between time slots).
        #[arg(long)]
        diagonal_only: bool,
        /// Write the spec here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a time-shift attack.
    Attack {
        #[arg(long)]
        spec: PathBuf,
        /// Time slot Eve shifts to, as INDEX or INDEX:PROB. Repeatable. Defaults
        /// to the single slot with the largest imbalance.
        #[arg(long = "shift", value_parser = parse_shift)]
        shifts: Vec<(usize, f64)>,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_gate(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn parse_shift(s: &str) -> std::result::Result<(usize, f64), String> {
    let (index, prob) = match s.split_once(':') {
        Some((i, p)) => (i, p.trim().parse::<f64>().map_err(|e| format!("{p}: {e}"))?),
        None => (s, 1.0),
    };
    let index = index
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("{index}: {e}"))?;
    Ok((index, prob))
}

/// Four significant figures.
fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 {
            "0.000".into()
        } else {
            x.to_string()
        };
    }
    let decimals = |x: f64| (3 - x.abs().log10().floor() as i32).max(0) as usize;
    // Rounding can carry into the next decade, as 0.99999 does.
    let d = decimals(x);
    let d = decimals(format!("{x:.d$}").parse().unwrap()).min(d);
    format!("{x:.d$}")
}

fn list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| sig(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn load_spec(path: &Path) -> Result<DetectorPair> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec =
        DetectorSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(spec.to_pair()?)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct NumericBounds {
    p_succ_min: f64,
    ep_ratio_max: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    #[serde(flatten)]
    analysis: mismatch_core::PairAnalysis,
    numeric: Option<NumericBounds>,
}

fn reason_name(reason: ZeroReason) -> &'static str {
    match reason {
        ZeroReason::SingularDetector => "SingularDetector",
        ZeroReason::DiagonalOnlyKnowledge => "DiagonalOnlyKnowledge",
    }
}

fn analyze(
    spec: &Path,
    diagonal_only: bool,
    numeric: bool,
    solver: &SolverArgs,
    json: bool,
) -> Result<ExitCode> {
    let pair = load_spec(spec)?;
    let knowledge = if diagonal_only {
        Knowledge::DiagonalOnly
    } else {
        Knowledge::FullMatrices
    };
    let analysis = analyze_pair(&pair, knowledge)?;
    let numeric = if numeric && !analysis.spectrum.is_empty() {
        let spectrum = mismatch_spectrum(&pair)?;
        let filter = compute_c(&spectrum, &pair)?;
        let b = solve_unconstrained_bounds_numeric(&pair, &filter, &solver.config())?;
        Some(NumericBounds {
            p_succ_min: b.p_succ_min,
            ep_ratio_max: b.ep_ratio_max,
        })
    } else {
        None
    };
    let zero = analysis.zero_reason;
    if json {
        print_json(&AnalyzeReport { analysis, numeric })?;
    } else {
        let yes_no = |b: bool| if b { "full rank" } else { "singular" };
        println!("d = {}", analysis.d);
        println!(
            "E0: {}, E1: {}",
            yes_no(analysis.full_rank[0]),
            yes_no(analysis.full_rank[1])
        );
        if !analysis.spectrum.is_empty() {
            println!("D = {}", list(&analysis.spectrum));
        }
        println!("R_noiseless = {}", sig(analysis.noiseless_rate));
        if let (Some(lo), Some(hi)) = (analysis.p_succ_lower, analysis.ep_ratio_upper) {
            println!("p_succ_min = {}", sig(lo));
            println!("ep_ratio_max = {}", sig(hi));
        }
        if let Some(m) = analysis.validity_margin {
            println!("filter validity margin = {m:.1e}");
        }
        if let Some(n) = &numeric {
            println!(
                "numeric: p_succ_min = {}, ratio_max = {}",
                sig(n.p_succ_min),
                sig(n.ep_ratio_max)
            );
        }
        if let Some(reason) = zero {
            println!("rate is zero: {}", reason_name(reason));
        }
    }
    Ok(if zero.is_some() {
        ExitCode::from(EXIT_ZERO_RATE)
    } else {
        ExitCode::SUCCESS
    })
}

fn sweep(
    spec: &Path,
    e_max: f64,
    steps: usize,
    bounds_only: bool,
    out: Option<&Path>,
    solver: &SolverArgs,
    json: bool,
) -> Result<ExitCode> {
    let pair = load_spec(spec)?;
    let analysis = analyze_pair(&pair, Knowledge::FullMatrices)?;
    if let Some(reason) = analysis.zero_reason {
        eprintln!("rate is zero: {}", reason_name(reason));
        return Ok(ExitCode::from(EXIT_ZERO_RATE));
    }
    let rows = run_sweep(
        &pair,
        &SweepConfig {
            e_max,
            steps,
            bounds_only,
            solver: solver.config(),
        },
    )?;
    let text = if json {
        serde_json::to_string_pretty(&rows)? + "\n"
    } else {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &rows {
            writer.serialize(row)?;
        }
        String::from_utf8(writer.into_inner()?)?
    };
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            let failed = rows
                .iter()
                .filter(|r| r.status != "ok" && r.status != "bounds-only")
                .count();
            eprintln!(
                "wrote {} rows to {} ({failed} with solver issues)",
                rows.len(),
                path.display()
            );
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CharacterizeSummary {
    d: usize,
    sample_times_ns: Vec<f64>,
    diagonal_only: bool,
    eigenvalue_range: [[f64; 2]; 2],
    mismatch_spectrum: Vec<f64>,
}

fn characterize(
    csv0: &Path,
    csv1: &Path,
    bandwidth_ghz: f64,
    gate: (f64, f64),
    diagonal_only: bool,
    out: Option<&Path>,
    json: bool,
) -> Result<ExitCode> {
    let grid = sample_grid(bandwidth_ghz, gate.0, gate.1)?;
    let mut responses = Vec::new();
    for path in [csv0, csv1] {
        let resp = ContinuousResponse::from_csv_path(path)?;
        let e = if diagonal_only {
            diagonal_only_response(&resp, &grid)
        } else {
            discretize_response(&resp, &grid)
        }
        .with_context(|| format!("discretizing {}", path.display()))?;
        responses.push(e);
    }
    let pair = mismatch_core::load_pair(responses[0].matrix(), responses[1].matrix())?;
    let label = |p: &Path| {
        p.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let spec = DetectorSpec::from_pair(&pair, &label(csv0), &label(csv1));
    let range = |i: usize| {
        let ev = responses[i].eigenvalues();
        [*ev.last().unwrap(), ev[0]]
    };
    let summary = CharacterizeSummary {
        d: grid.d(),
        sample_times_ns: grid.sample_times_ns.clone(),
        diagonal_only,
        eigenvalue_range: [range(0), range(1)],
        mismatch_spectrum: if pair.both_full_rank() {
            mismatch_spectrum(&pair)?.ratios
        } else {
            Vec::new()
        },
    };
    let human = format!(
        "d = {}\nsamples (ns) = {}\nE0 eigenvalues in [{}, {}]\nE1 eigenvalues in [{}, {}]\nD = {}",
        summary.d,
        list(&summary.sample_times_ns),
        sig(summary.eigenvalue_range[0][0]),
        sig(summary.eigenvalue_range[0][1]),
        sig(summary.eigenvalue_range[1][0]),
        sig(summary.eigenvalue_range[1][1]),
        if summary.mismatch_spectrum.is_empty() {
            "undefined (singular detector)".into()
        } else {
            list(&summary.mismatch_spectrum)
        },
    );
    match out {
        Some(path) => {
            fs::write(path, spec.to_json() + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
            if json {
                print_json(&summary)?;
            } else {
                println!("{human}");
                println!("wrote {}", path.display());
            }
        }
        None => {
            println!("{}", spec.to_json());
            if json {
                eprintln!("{}", serde_json::to_string(&summary)?);
            } else {
                eprintln!("{human}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn attack(
    spec: &Path,
    shifts: Vec<(usize, f64)>,
    n: usize,
    seed: u64,
    json: bool,
) -> Result<ExitCode> {
    let pair = load_spec(spec)?;
    let strategy = if shifts.is_empty() {
        let imbalance = |j: usize| {
            let (a, b) = (
                pair.efficiency(0).get(j, j).re,
                pair.efficiency(1).get(j, j).re,
            );
            if a + b > 0.0 {
                a.max(b) / (a + b)
            } else {
                0.0
            }
        };
        let best = (0..pair.dim()).fold(0, |best, j| {
            if imbalance(j) > imbalance(best) {
                j
            } else {
                best
            }
        });
        vec![(best, 1.0)]
    } else {
        shifts
    };
    if strategy.iter().any(|&(_, p)| p < 0.0) {
        bail!("shift probabilities must be non-negative");
    }
    let scenario = TimeShiftScenario {
        pair,
        strategy: strategy.clone(),
        n_signals: n,
        seed,
    };
    let outcome = simulate_time_shift(&scenario)?;
    if json {
        #[derive(Serialize)]
        struct Report {
            strategy: Vec<(usize, f64)>,
            n_signals: usize,
            seed: u64,
            #[serde(flatten)]
            outcome: mismatch_core::AttackOutcome,
        }
        print_json(&Report {
            strategy,
            n_signals: n,
            seed,
            outcome,
        })?;
    } else {
        let slots: Vec<String> = strategy
            .iter()
            .map(|(j, p)| format!("{j}:{}", sig(*p)))
            .collect();
        println!("strategy = {}", slots.join(", "));
        println!(
            "detected fraction = {} (simulated {})",
            sig(outcome.detected_fraction),
            sig(outcome.empirical_detected_fraction)
        );
        println!(
            "eve guess probability = {} (simulated {} ± {})",
            sig(outcome.eve_guess_prob),
            sig(outcome.empirical_guess_prob),
            sig(outcome.guess_std_error)
        );
        println!(
            "eve information = {} bits per detected signal",
            sig(outcome.eve_leak_bits)
        );
        println!("naive rate = {}", sig(outcome.naive_rate));
        println!("aware rate = {}", sig(outcome.aware_rate));
        if let Some(reason) = outcome.aware_zero_reason {
            println!("aware rate is zero: {}", reason_name(reason));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let json = cli.json;
    match cli.command {
        Command::Analyze {
            spec,
            diagonal_only,
            numeric,
            solver,
        } => analyze(&spec, diagonal_only, numeric, &solver, json),
        Command::Sweep {
            spec,
            e_max,
            steps,
            bounds_only,
            out,
            solver,
        } => sweep(
            &spec,
            e_max,
            steps,
            bounds_only,
            out.as_deref(),
            &solver,
            json,
        ),
        Command::Characterize {
            csv0,
            csv1,
            bandwidth_ghz,
            gate_ns,
            diagonal_only,
            out,
        } => characterize(
            &csv0,
            &csv1,
            bandwidth_ghz,
            gate_ns,
            diagonal_only,
            out.as_deref(),
            json,
        ),
        Command::Attack {
            spec,
            shifts,
            n,
            seed,
        } => attack(&spec, shifts, n, seed, json),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
