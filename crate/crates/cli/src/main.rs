//! `gmmsteer`: synthesize and validate Gaussian-mixture steering policies.
//!
//! Subcommands:
//!   solve     — load a problem file, synthesize the optimal policy
//!   simulate  — Monte-Carlo rollouts of a saved policy
//!   fit       — fit a GMM to a CSV sample set with EM
//!   density   — evaluate a GMM pdf on a grid
//!
//! Exit codes: 0 success, 1 solver/infeasibility error, 2 config/parse
//! error.

mod csv_io;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde_json::json;

use gmm_steering::io::{
    DistributionJson, GmmJson, McReportJson, PlanJson, PolicyJson, ProblemJson,
};
use gmm_steering::{em_fit_with_trace, sim, synthesize, Gmm, SteeringError};

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 2 }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 1 }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<SteeringError> for CliError {
    fn from(e: SteeringError) -> Self {
        match e {
            SteeringError::InvalidArgument(_) => CliError::config(e.to_string()),
            _ => CliError::solver(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "gmmsteer", version, about = "Gaussian-mixture density steering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the optimal steering policy for a problem file.
    Solve {
        /// Problem JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for policy.json, plan.json, summary.json.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Also print the plan dump to standard output.
        #[arg(long)]
        dump_plan: bool,
    },
    /// Monte-Carlo simulation of a saved policy.
    Simulate {
        /// Policy JSON written by `solve`.
        #[arg(long)]
        policy: PathBuf,
        /// Problem JSON file (for the system, cost, and initial mixture).
        #[arg(long)]
        config: PathBuf,
        /// Number of Monte-Carlo samples.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated time steps for state snapshot CSVs
        /// (default 0, N/5, 2N/5, ..., N).
        #[arg(long)]
        snapshots: Option<String>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Fit a Gaussian mixture to a CSV sample set.
    Fit {
        /// Sample CSV, one row per sample.
        #[arg(long)]
        samples: PathBuf,
        /// Number of mixture components.
        #[arg(long)]
        components: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output GMM JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a GMM density on a rectangular grid.
    Density {
        /// GMM JSON file.
        #[arg(long)]
        gmm: PathBuf,
        /// Per-axis grid spec `min:max:count`, repeated once per dimension.
        #[arg(long, required = true)]
        grid: Vec<String>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, out_dir, dump_plan } => cmd_solve(&config, &out_dir, dump_plan),
        Command::Simulate { policy, config, count, seed, snapshots, out_dir } => {
            cmd_simulate(&policy, &config, count, seed, snapshots.as_deref(), &out_dir)
        }
        Command::Fit { samples, components, seed, out } => {
            cmd_fit(&samples, components, seed, &out)
        }
        Command::Density { gmm, grid, out } => cmd_density(&gmm, &grid, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn load_problem(path: &Path) -> Result<ProblemJson, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn resolve_distribution(dist: &DistributionJson, base: &Path) -> Result<Gmm, CliError> {
    match dist {
        DistributionJson::Gmm(g) => Ok(g.to_gmm()?),
        DistributionJson::Samples { samples, components, seed } => {
            let sample_path = base.parent().unwrap_or(Path::new(".")).join(samples);
            let data = csv_io::read_samples(&sample_path)?;
            let (gmm, _) = em_fit_with_trace(&data, *components, *seed, 500, 1e-6)?;
            Ok(gmm)
        }
    }
}

fn cmd_solve(config: &Path, out_dir: &Path, dump_plan: bool) -> Result<(), CliError> {
    let problem = load_problem(config)?;
    let sys = problem.system()?;
    let cost = problem.cost()?;
    let initial = resolve_distribution(&problem.initial_gmm, config)?;
    let desired = resolve_distribution(&problem.desired_gmm, config)?;

    let start = Instant::now();
    let synthesis = synthesize(&sys, &cost, &initial, &desired)?;
    let wall = start.elapsed().as_secs_f64();

    let policy_json = serde_json::to_string_pretty(&PolicyJson::from_policy(&synthesis.policy))
        .expect("policy serializes");
    csv_io::write_file(&out_dir.join("policy.json"), policy_json.as_bytes())?;

    let plan = PlanJson::from_synthesis(&synthesis);
    let plan_text = serde_json::to_string_pretty(&plan).expect("plan serializes");
    csv_io::write_file(&out_dir.join("plan.json"), plan_text.as_bytes())?;

    let summary = json!({
        "expected_cost": synthesis.expected_cost,
        "wall_time_seconds": wall,
        "source_components": synthesis.policy.source_count(),
        "target_components": synthesis.policy.target_count(),
        "tilde_lambda": plan.tilde_lambda,
        "lambda": gmm_steering::io::matrix_to_json(synthesis.policy.lambda()),
    });
    csv_io::write_file(
        &out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).unwrap().as_bytes(),
    )?;

    println!("expected cost: {}", synthesis.expected_cost);
    println!("wall time: {wall:.4} s");
    println!("tilde_lambda: {:?}", plan.tilde_lambda);
    if dump_plan {
        println!("{plan_text}");
    }
    Ok(())
}

fn parse_snapshots(spec: Option<&str>, horizon: usize) -> Result<Vec<usize>, CliError> {
    match spec {
        Some(s) => {
            let mut out = Vec::new();
            for part in s.split(',') {
                let k: usize = part
                    .trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("bad snapshot index '{part}'")))?;
                if k > horizon {
                    return Err(CliError::config(format!(
                        "snapshot {k} exceeds horizon {horizon}"
                    )));
                }
                out.push(k);
            }
            Ok(out)
        }
        None => {
            // Default: multiples of N/5 from 0 through N.
            let step = (horizon / 5).max(1);
            let mut out: Vec<usize> = (0..=horizon).step_by(step).collect();
            if *out.last().unwrap() != horizon {
                out.push(horizon);
            }
            Ok(out)
        }
    }
}

fn cmd_simulate(
    policy_path: &Path,
    config: &Path,
    count: usize,
    seed: u64,
    snapshots: Option<&str>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let problem = load_problem(config)?;
    let sys = problem.system()?;
    let cost = problem.cost()?;
    let initial = resolve_distribution(&problem.initial_gmm, config)?;

    let text = fs::read_to_string(policy_path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", policy_path.display())))?;
    let policy_json: PolicyJson = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", policy_path.display())))?;
    let policy = policy_json.to_policy()?;
    if policy.state_dim() != sys.state_dim()
        || policy.input_dim() != sys.input_dim()
        || policy.horizon() != sys.horizon()
    {
        return Err(CliError::config(format!(
            "policy dims (n={}, m={}, N={}) do not match the problem (n={}, m={}, N={})",
            policy.state_dim(),
            policy.input_dim(),
            policy.horizon(),
            sys.state_dim(),
            sys.input_dim(),
            sys.horizon()
        )));
    }

    let snaps = parse_snapshots(snapshots, sys.horizon())?;
    let trajectories = sim::simulate_trajectories(&sys, &cost, &initial, &policy, count, seed)?;

    for &k in &snaps {
        let rows: Vec<((usize, usize), DVector<f64>)> = trajectories
            .iter()
            .map(|t| (t.pair.unwrap(), t.states[k].clone()))
            .collect();
        csv_io::write_labelled_states(
            &out_dir.join(format!("snapshot_k{k}.csv")),
            &rows,
            sys.state_dim(),
        )?;
    }

    let report = sim::mc_report_from_trajectories(&policy, &trajectories)?;
    let capped: Vec<_> = report.terminal_samples.iter().take(100_000).cloned().collect();
    csv_io::write_labelled_states(
        &out_dir.join("terminal_samples.csv"),
        &capped,
        sys.state_dim(),
    )?;
    let report_json = McReportJson::from_report(&report);
    csv_io::write_file(
        &out_dir.join("report.json"),
        serde_json::to_string_pretty(&report_json).unwrap().as_bytes(),
    )?;
    println!(
        "simulated {count} samples; empirical mean cost {}",
        report.empirical_mean_cost
    );
    Ok(())
}

fn cmd_fit(samples: &Path, components: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let data = csv_io::read_samples(samples)?;
    let (gmm, trace) = em_fit_with_trace(&data, components, seed, 500, 1e-6)?;
    let ll = trace.last().copied().unwrap_or(f64::NEG_INFINITY);
    let mut value = serde_json::to_value(GmmJson::from_gmm(&gmm)).unwrap();
    value
        .as_object_mut()
        .unwrap()
        .insert("log_likelihood".into(), json!(ll));
    csv_io::write_file(out, serde_json::to_string_pretty(&value).unwrap().as_bytes())?;
    println!("fitted {components} components; final log-likelihood {ll}");
    Ok(())
}

fn cmd_density(gmm_path: &Path, grid: &[String], out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(gmm_path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", gmm_path.display())))?;
    let gmm_json: GmmJson = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", gmm_path.display())))?;
    let gmm = gmm_json.to_gmm()?;
    if grid.len() != gmm.dim() {
        return Err(CliError::config(format!(
            "need one --grid spec per dimension ({} expected, {} given)",
            gmm.dim(),
            grid.len()
        )));
    }
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for spec in grid {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::config(format!("grid spec '{spec}' is not min:max:count")));
        }
        let min: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::config(format!("bad grid min '{}'", parts[0])))?;
        let max: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::config(format!("bad grid max '{}'", parts[1])))?;
        let cnt: usize = parts[2]
            .parse()
            .map_err(|_| CliError::config(format!("bad grid count '{}'", parts[2])))?;
        if cnt == 0 || max < min || (cnt > 1 && max <= min) {
            return Err(CliError::config(format!("empty grid range '{spec}'")));
        }
        let axis = if cnt == 1 {
            vec![(min + max) * 0.5]
        } else {
            (0..cnt)
                .map(|i| min + (max - min) * i as f64 / (cnt - 1) as f64)
                .collect()
        };
        axes.push(axis);
    }
    // Row-major walk over the grid nodes.
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut coords = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    for flat in 0..total {
        let mut rem = flat;
        let mut point = vec![0.0; axes.len()];
        for d in (0..axes.len()).rev() {
            point[d] = axes[d][rem % dims[d]];
            rem /= dims[d];
        }
        let x = DVector::from_vec(point.clone());
        values.push(gmm.pdf(&x));
        coords.push(point);
    }
    csv_io::write_density_grid(out, &coords, &values)?;
    println!("wrote {total} grid nodes");
    Ok(())
}
