//! `effham` — derive effective Hamiltonians for harmonically decomposed
//! drives, validate them against the series-expansion oracle, and compare
//! effective against exact dynamics.
//!
//! Times are in units of 1/(base frequency); one base period is 2π of them.
//!
//! Exit codes: 0 success, 1 input/scenario error, 2 degenerate resonance,
//! 3 boson-cutoff leakage, 4 step too large, 5 invalid basis label,
//! 6 oracle disagreement above 5%, 7 window too short.

mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use effham_core::decomposition::{FrequencyDecomposition, ScenarioFile};
use effham_core::dynamics::{
    compare, propagate_effective, propagate_full, rotate_into_frame, write_trajectory_csv,
    StateVector, Trajectory,
};
use effham_core::dyson::secular_rates;
use effham_core::effective::{
    effn, effn_with_policy, DegeneracyPolicy, EffectiveHamiltonian,
};
use effham_core::error::Error;
use effham_core::hilbert::Operator;
use effham_core::jsonio::{fnv1a64, render};
use effham_core::rational::Rational;
use effham_core::scenarios::{
    build_rabi_compensated, compensated_scenario_file, effective_model, ScenarioKind,
    ScenarioParams,
};
use effham_core::Result;

#[derive(Parser)]
#[command(
    name = "effham",
    version,
    about = "Effective Hamiltonians for largely detuned drives, with exact cross-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive an effective Hamiltonian and write it with its resonance ledger
    Derive(DeriveArgs),
    /// Propagate full and/or effective dynamics and export trajectories
    Simulate(SimulateArgs),
    /// Check generator matrix elements against series-expansion growth rates
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Two-level atom absorbing three cavity photons (frequencies 2, 4)
    Rabi,
    /// Two qubits excited by one photon (frequencies 1, 2, 3)
    #[value(alias = "two_atom")]
    TwoAtom,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario
    #[arg(long, value_enum, conflicts_with = "scenario")]
    preset: Option<Preset>,
    /// Scenario JSON file (see README for the format)
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Coupling strength in base-frequency units (presets only).
    /// `simulate` accepts a comma-separated list to fan out a scan.
    #[arg(long)]
    lambda: Option<String>,
    /// Mixing angle in radians (two-atom preset)
    #[arg(long)]
    theta: Option<f64>,
    /// Bosonic cutoff dimension (presets only)
    #[arg(long)]
    cutoff: Option<usize>,
    /// Initial Fock occupancy (presets only)
    #[arg(long)]
    n_initial: Option<usize>,
}

#[derive(Args)]
struct DeriveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Generator order (>= 2)
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Output JSON path
    #[arg(long, default_value = "effective.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Full,
    Effective,
    Both,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
    /// Final time in 1/(base frequency)
    #[arg(long)]
    t_final: f64,
    /// Step size in 1/(base frequency)
    #[arg(long, default_value_t = 0.005)]
    dt: f64,
    /// Initial basis state, e.g. `g,3` or `gg,1` (defaults to the preset's)
    #[arg(long)]
    initial: Option<String>,
    /// Shift the drive frequencies to cancel the second-order Stark
    /// detuning of the three-photon resonance (rabi preset)
    #[arg(long)]
    compensate_stark: bool,
    /// Generator orders composing the effective model, e.g. `2,3` or `3`
    /// (the latter isolates the resonant coupling from the level shifts)
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3])]
    orders: Vec<usize>,
    /// Extra observables (basis labels) for the comparison report
    #[arg(long = "observable")]
    observables: Vec<String>,
    /// Cap on recorded grid points per trajectory
    #[arg(long, default_value_t = 4096)]
    samples: usize,
    #[arg(long, default_value = "effham_run")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Fit window `t0:t1` in 1/(base frequency); default 40 base periods
    #[arg(long, default_value = "0:251.327412287183")]
    window: String,
    #[arg(long, default_value_t = 0.002)]
    dt: f64,
    /// Largest number of transitions to check
    #[arg(long, default_value_t = 6)]
    max_rows: usize,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Derive(args) => run(cmd_derive(&args)),
        Command::Simulate(args) => run(cmd_simulate(&args)),
        Command::Oracle(args) => run(cmd_oracle(&args)),
    };
    std::process::exit(code);
}

fn run(outcome: Result<i32>) -> i32 {
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::DegenerateResonance { .. } => 2,
        Error::LeakageExceeded { .. } => 3,
        Error::StepTooLarge { .. } => 4,
        Error::InvalidLabel(_) => 5,
        Error::WindowTooShort { .. } => 7,
        _ => 1,
    }
}

// ---------------------------------------------------------------------------
// Scenario resolution
// ---------------------------------------------------------------------------

struct Resolved {
    /// Canonical scenario describing the drive actually simulated
    /// (compensated when requested).
    file: ScenarioFile,
    d: FrequencyDecomposition,
    preset: Option<ScenarioParams>,
    delta: Option<Rational>,
    hash: String,
}

fn preset_params(sc: &ScenarioArgs, preset: Preset, lambda: Option<f64>) -> Result<ScenarioParams> {
    let lambda = match lambda {
        Some(v) => v,
        None => match &sc.lambda {
            Some(text) => parse_lambda_list(text)?[0],
            None => 0.05,
        },
    };
    match preset {
        Preset::Rabi => ScenarioParams::rabi(
            lambda,
            sc.cutoff.unwrap_or(10),
            sc.n_initial.unwrap_or(3),
        ),
        Preset::TwoAtom => ScenarioParams::two_atom(
            lambda,
            sc.theta.unwrap_or(std::f64::consts::FRAC_PI_4),
            sc.cutoff.unwrap_or(6),
            sc.n_initial.unwrap_or(1),
        ),
    }
}

fn parse_lambda_list(text: &str) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values = values.map_err(|_| Error::InvalidScenario(format!("bad --lambda `{text}`")))?;
    if values.is_empty() {
        return Err(Error::InvalidScenario("empty --lambda list".into()));
    }
    Ok(values)
}

fn scenario_hash(file: &ScenarioFile) -> Result<String> {
    let value = serde_json::to_value(file)?;
    Ok(format!("{:016x}", fnv1a64(render(&value).as_bytes())))
}

fn resolve_scenario(
    sc: &ScenarioArgs,
    lambda: Option<f64>,
    compensate: bool,
) -> Result<Resolved> {
    if let Some(path) = &sc.scenario {
        if compensate {
            return Err(Error::InvalidScenario(
                "--compensate-stark requires --preset rabi".into(),
            ));
        }
        let file = ScenarioFile::load(path)?;
        let d = file.to_decomposition()?;
        let hash = scenario_hash(&file)?;
        return Ok(Resolved {
            file,
            d,
            preset: None,
            delta: None,
            hash,
        });
    }
    let preset = sc.preset.ok_or_else(|| {
        Error::InvalidScenario("one of --preset or --scenario is required".into())
    })?;
    let params = preset_params(sc, preset, lambda)?;
    for warning in params.warnings() {
        eprintln!("warning: {warning}");
    }
    if compensate {
        if params.kind != ScenarioKind::RabiThreePhoton {
            return Err(Error::InvalidScenario(
                "--compensate-stark applies to the rabi preset".into(),
            ));
        }
        let (d, delta) = build_rabi_compensated(&params)?;
        let file = compensated_scenario_file(&params)?;
        let hash = scenario_hash(&file)?;
        Ok(Resolved {
            file,
            d,
            preset: Some(params),
            delta: Some(delta),
            hash,
        })
    } else {
        let file = params.scenario_file();
        let d = params.build()?;
        let hash = scenario_hash(&file)?;
        Ok(Resolved {
            file,
            d,
            preset: Some(params),
            delta: None,
            hash,
        })
    }
}

// ---------------------------------------------------------------------------
// derive
// ---------------------------------------------------------------------------

fn complex_entries(op: &Operator) -> Value {
    let entries: Vec<Value> = op
        .entries()
        .map(|(r, c, v)| json!({"row": r, "col": c, "re": v.re, "im": v.im}))
        .collect();
    json!({"dim": op.dim(), "entries": entries})
}

fn effective_json(eh: &EffectiveHamiltonian, r: &Resolved, order: usize) -> Result<Value> {
    let ledger: Vec<Value> = eh
        .ledger
        .iter()
        .map(|(tuple, contribution)| {
            json!({
                "component_indices": tuple.component_indices,
                "nus": tuple.nus.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "tail_sums": tuple.tail_sums.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "coefficient": tuple.coefficient.to_string(),
                "contribution": complex_entries(contribution),
            })
        })
        .collect();
    let degenerate: Vec<Value> = eh
        .degeneracy_report
        .iter()
        .map(|t| {
            json!({
                "component_indices": t.component_indices,
                "nus": t.nus.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "zero_tail_positions": t.zero_tail_positions,
            })
        })
        .collect();
    Ok(json!({
        "schema": "effham.derive.v1",
        "order": order,
        "base_frequency": r.d.base_frequency_label(),
        "scenario": serde_json::to_value(&r.file)?,
        "scenario_hash": r.hash,
        "hermitian_defect": eh.total.hermitian_defect(),
        "operator": complex_entries(&eh.total),
        "ledger": ledger,
        "degenerate": degenerate,
        "tool_version": manifest::tool_version(),
        "git_describe": manifest::git_describe(),
    }))
}

fn cmd_derive(args: &DeriveArgs) -> Result<i32> {
    let r = resolve_scenario(&args.scenario, None, false)?;
    let eh = effn_with_policy(&r.d, args.order, DegeneracyPolicy::Report)?;
    let value = effective_json(&eh, &r, args.order)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&args.out, render(&value))?;
    if eh.degeneracy_report.is_empty() {
        Ok(0)
    } else {
        eprintln!(
            "degenerate resonance: {} zero-sum tuple(s) with vanishing tail sums \
             (excluded from the total; see the degeneracy report)",
            eh.degeneracy_report.len()
        );
        Ok(2)
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn scenario_effective_generator(
    r: &Resolved,
    compensate: bool,
    orders: &[usize],
) -> Result<Operator> {
    let mut orders: Vec<usize> = orders.to_vec();
    orders.sort_unstable();
    orders.dedup();
    if compensate {
        if orders != [2, 3] {
            return Err(Error::InvalidScenario(
                "--compensate-stark defines the effective model at orders 2,3".into(),
            ));
        }
        let p = r.preset.as_ref().expect("compensation implies a preset");
        return effective_model(p, true)?.total();
    }
    let mut total = Operator::zero(r.d.space());
    for &order in &orders {
        total = total.add(&effn(&r.d, order)?.total)?;
    }
    Ok(total)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let lambdas = match (&args.scenario.preset, &args.scenario.lambda) {
        (Some(_), Some(text)) => parse_lambda_list(text)?,
        _ => vec![f64::NAN], // marker: single run with default/file lambda
    };
    if lambdas.len() == 1 {
        let lambda = if lambdas[0].is_nan() {
            None
        } else {
            Some(lambdas[0])
        };
        return simulate_single(args, lambda, &args.out_dir);
    }
    // parameter scan: independent runs, each in its own directory
    let threads: usize = std::env::var("EFFHAM_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    let jobs: Vec<(f64, PathBuf)> = lambdas
        .iter()
        .map(|&l| (l, args.out_dir.join(format!("lambda_{l}"))))
        .collect();
    let mut worst = 0i32;
    std::thread::scope(|scope| {
        for chunk in jobs.chunks(threads) {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(l, dir)| {
                    let (l, dir) = (*l, dir.clone());
                    scope.spawn(move || run(simulate_single(args, Some(l), &dir)))
                })
                .collect();
            for h in handles {
                let code = h.join().unwrap_or(1);
                if worst == 0 {
                    worst = code;
                }
            }
        }
    });
    Ok(worst)
}

fn simulate_single(args: &SimulateArgs, lambda: Option<f64>, out_dir: &Path) -> Result<i32> {
    let r = resolve_scenario(&args.scenario, lambda, args.compensate_stark)?;
    let initial = match (&args.initial, &r.preset) {
        (Some(label), _) => label.clone(),
        (None, Some(p)) => p.initial_label(),
        (None, None) => {
            return Err(Error::InvalidScenario(
                "--initial is required for scenario files".into(),
            ))
        }
    };
    let psi0 = StateVector::basis(r.d.space(), &initial)?;
    std::fs::create_dir_all(out_dir)?;
    let mut outputs: Vec<String> = Vec::new();

    let full: Option<Trajectory> = if matches!(args.mode, Mode::Full | Mode::Both) {
        let traj = propagate_full(&r.d, &psi0, args.t_final, args.dt, args.samples)?;
        let f = std::fs::File::create(out_dir.join("trajectory_full.csv"))?;
        write_trajectory_csv(&traj, std::io::BufWriter::new(f))?;
        outputs.push("trajectory_full.csv".into());
        Some(traj)
    } else {
        None
    };

    let effective: Option<Trajectory> = if matches!(args.mode, Mode::Effective | Mode::Both) {
        let h = scenario_effective_generator(&r, args.compensate_stark, &args.orders)?;
        let traj = propagate_effective(&h, &psi0, args.t_final, args.dt, args.samples)?;
        let f = std::fs::File::create(out_dir.join("trajectory_effective.csv"))?;
        write_trajectory_csv(&traj, std::io::BufWriter::new(f))?;
        outputs.push("trajectory_effective.csv".into());
        Some(traj)
    } else {
        None
    };

    if let (Some(full), Some(effective)) = (&full, &effective) {
        let mut observables = vec![initial.clone()];
        if let Some(p) = &r.preset {
            if let Ok(target) = p.target_label() {
                observables.push(target);
            }
        }
        observables.extend(args.observables.iter().cloned());
        observables.dedup();
        // the compensated effective model is static in the frame of its
        // δ·n̂ term; overlaps are compared there (populations agree either
        // way)
        let report = if args.compensate_stark {
            let p = r.preset.as_ref().expect("compensation implies a preset");
            let model = effective_model(p, true)?;
            let rotated = rotate_into_frame(full, &model.compensation)?;
            compare(&rotated, effective, &observables)?
        } else {
            compare(full, effective, &observables)?
        };
        std::fs::write(out_dir.join("comparison.json"), render(&report.to_json()))?;
        outputs.push("comparison.json".into());
    }

    std::fs::write(
        out_dir.join("scenario.json"),
        render(&serde_json::to_value(&r.file)?),
    )?;
    outputs.push("scenario.json".into());

    let mut params = serde_json::Map::new();
    let labels: Vec<String> = (0..r.d.space().dim())
        .map(|i| r.d.space().index_to_label(i))
        .collect();
    params.insert("basis_labels".into(), json!(labels));
    params.insert("mode".into(), json!(format!("{:?}", args.mode).to_lowercase()));
    params.insert("t_final".into(), json!(args.t_final));
    params.insert("dt".into(), json!(args.dt));
    params.insert("initial".into(), json!(initial));
    params.insert("samples".into(), json!(args.samples));
    params.insert("compensate_stark".into(), json!(args.compensate_stark));
    if let Some(delta) = &r.delta {
        params.insert("stark_delta".into(), json!(delta.to_string()));
    }
    if let Some(p) = &r.preset {
        params.insert("preset".into(), json!(p.kind.name()));
        params.insert("lambda".into(), json!(p.lambda));
        params.insert("theta".into(), json!(p.theta));
        params.insert("cutoff".into(), json!(p.cutoff));
        params.insert("n_initial".into(), json!(p.n_initial));
    }
    outputs.push("manifest.json".into());
    manifest::write_manifest(out_dir, &r.hash, Value::Object(params), &outputs)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn parse_window(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidScenario(format!("bad --window `{text}`, expected t0:t1"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let t0: f64 = a.trim().parse().map_err(|_| bad())?;
    let t1: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((t0, t1))
}

fn cmd_oracle(args: &OracleArgs) -> Result<i32> {
    let r = resolve_scenario(&args.scenario, None, false)?;
    let window = parse_window(&args.window)?;
    let eh = effn(&r.d, args.order)?;
    let space = r.d.space();

    let threshold = (eh.total.max_norm() * 1e-6).max(1e-12);
    // canonical direction only; hermiticity makes (r,c) and (c,r) equivalent
    let mut elements: Vec<(usize, usize, Complex64)> = eh
        .significant_elements(threshold)
        .into_iter()
        .filter(|(row, col, _)| row <= col)
        .collect();
    elements.sort_by(|a, b| b.2.norm().partial_cmp(&a.2.norm()).unwrap());
    elements.truncate(args.max_rows);
    if elements.is_empty() {
        println!("no resonant transitions above threshold at order {}", args.order);
        return Ok(0);
    }

    // one hierarchy integration per distinct initial column
    let mut by_initial: std::collections::BTreeMap<usize, Vec<(usize, f64)>> =
        std::collections::BTreeMap::new();
    for (row, col, v) in &elements {
        by_initial.entry(*col).or_default().push((*row, v.norm()));
    }

    println!(
        "{:<24} {:>16} {:>16} {:>10}",
        "transition", "generator", "series slope", "rel err"
    );
    let mut all_ok = true;
    for (initial, targets) in by_initial {
        let rows: Vec<usize> = targets.iter().map(|(row, _)| *row).collect();
        let measured = secular_rates(&r.d, args.order, initial, &rows, window, args.dt)?;
        for ((row, predicted), measured) in targets.iter().zip(measured) {
            let rel = (measured - predicted).abs() / predicted;
            if rel > 0.05 {
                all_ok = false;
            }
            let label = format!(
                "|{}> -> |{}>",
                space.index_to_label(initial),
                space.index_to_label(*row)
            );
            println!(
                "{:<24} {:>16.6e} {:>16.6e} {:>9.3}%",
                label,
                predicted,
                measured,
                rel * 100.0
            );
        }
    }
    if all_ok {
        println!("all transitions within 5%");
        Ok(0)
    } else {
        println!("disagreement above 5%");
        Ok(6)
    }
}
