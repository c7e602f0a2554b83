//! Command-line front end. Exit codes: 0 success, 1 input or usage error,
//! 2 infeasible (or dominance violated / no feasible policy), 3 unbounded.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::alp::{solve_alp, BasisFile, BasisSet, Psi};
use crate::average::{solve_average, solve_average_cost, solve_average_unconstrained};
use crate::discounted::{rescale_benchmark, solve_discounted, solve_discounted_cost, solve_discounted_unconstrained};
use crate::dominance::{check_icv, check_icx};
use crate::error::{Error, Result};
use crate::io::{load_distribution, load_problem, parse_policy, report_json, to_json_string, write_output, InstanceFile};
use crate::lp::LpStatus;
use crate::mdp::Mode;
use crate::occupation::{DominanceSpec, SolveReport};
use crate::portfolio::{build_portfolio_instance, PortfolioConfig};
use crate::simulate::{brute_force_best_feasible, estimate_average_shortfalls, estimate_discounted_shortfalls, simulate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_UNBOUNDED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "domlp", version, about = "MDPs with stochastic dominance constraints via occupation-measure LPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderArg {
    Icv,
    Icx,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PsiArg {
    Uniform,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the dominance-constrained LP of an instance file.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tolerance (relative to the report scale) for the `verified` flag.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Multiply the benchmark support by 1/(1-delta) (discounted mode).
        #[arg(long)]
        rescale_benchmark: bool,
        /// Treat r and z as costs: minimize, with increasing convex rows.
        #[arg(long)]
        cost: bool,
    },
    /// Simulate a policy and estimate shortfalls.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 20)]
        paths: usize,
        #[arg(long, default_value_t = 100_000)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated eta grid; defaults to the benchmark support.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two finitely supported distributions at the benchmark support.
    CheckDominance {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long, value_enum, default_value = "icv")]
        order: OrderArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximate LP with sampled constraints.
    Alp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        /// Basis file; defaults to the complete tabular basis.
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "uniform")]
        psi: PsiArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a discretized portfolio instance.
    GenPortfolio {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Best feasible deterministic policy by enumeration.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(std::io::stdout(), "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    write_output(&to_json_string(value)?, out)
}

fn status_code(status: LpStatus) -> i32 {
    match status {
        LpStatus::Optimal => EXIT_OK,
        LpStatus::Infeasible => EXIT_INFEASIBLE,
        LpStatus::Unbounded => EXIT_UNBOUNDED,
    }
}

fn verified(report: &SolveReport, tol: f64) -> bool {
    let scale = report.scale();
    report.is_optimal()
        && report.gap <= tol * (1.0 + report.objective.abs())
        && report.slackness.as_ref().is_some_and(|s| s.within(tol))
        && report.dual_infeasibility() <= tol * scale
        && report.optimality_residuals.iter().all(|r| !r.required || r.residual <= tol * scale)
}

fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Solve { instance, out, tol, rescale_benchmark: rescale, cost } => {
            let problem = load_problem(instance)?;
            let inst = &problem.instance;
            let mut spec = problem.spec.clone();
            let mut scale = None;
            if *rescale {
                if inst.mode != Mode::Discounted {
                    return Err(Error::InvalidArgument("--rescale-benchmark applies to discounted instances".into()));
                }
                let delta = inst.discount_factor()?;
                spec = match spec {
                    Some(DominanceSpec::Scalar(b)) => Some(DominanceSpec::Scalar(rescale_benchmark(&b, delta))),
                    Some(DominanceSpec::Family(_)) => {
                        return Err(Error::InvalidArgument("--rescale-benchmark needs a scalar benchmark".into()))
                    }
                    None => return Err(Error::InvalidArgument("--rescale-benchmark without a benchmark".into())),
                };
                scale = Some(1.0 / (1.0 - delta));
            }
            let mut report = match (inst.mode, &spec, cost) {
                (_, Some(DominanceSpec::Family(_)), true) => {
                    return Err(Error::InvalidArgument("--cost needs a scalar benchmark".into()))
                }
                (Mode::Average, Some(DominanceSpec::Scalar(b)), true) => solve_average_cost(inst, b)?,
                (Mode::Discounted, Some(DominanceSpec::Scalar(b)), true) => solve_discounted_cost(inst, b)?,
                (_, None, true) => return Err(Error::InvalidArgument("--cost needs a benchmark".into())),
                (Mode::Average, Some(s), false) => solve_average(inst, s)?,
                (Mode::Discounted, Some(s), false) => solve_discounted(inst, s)?,
                (Mode::Average, None, false) => solve_average_unconstrained(inst)?,
                (Mode::Discounted, None, false) => solve_discounted_unconstrained(inst)?,
            };
            report.benchmark_scale = scale;
            let bench = match &spec {
                Some(DominanceSpec::Scalar(b)) => Some(b),
                _ => None,
            };
            let mut value = report_json(&report, inst, bench, &problem.extra_grid);
            value["verified"] = json!(verified(&report, *tol));
            value["tolerance"] = json!(tol);
            emit(&value, out.as_deref())?;
            Ok(status_code(report.status))
        }
        Command::Simulate { instance, policy, paths, horizon, seed, grid, out } => {
            let problem = load_problem(instance)?;
            let inst = &problem.instance;
            let policy = parse_policy(&std::fs::read_to_string(policy)?, inst)?;
            let grid: Vec<f64> = match grid {
                Some(g) => g
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| t.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("grid value {t:?}: {e}"))))
                    .collect::<Result<_>>()?,
                None => problem.scalar_benchmark()?.support().to_vec(),
            };
            let nu = match &inst.initial {
                Some(nu) => nu.clone(),
                None => vec![1.0 / inst.num_states as f64; inst.num_states],
            };
            let trajs = simulate(inst, &policy, &nu, *horizon, *paths, *seed)?;
            let value = match inst.mode {
                Mode::Average => {
                    let est = estimate_average_shortfalls(&trajs, &grid)?;
                    json!({"mode": "average", "burn_in": horizon / 10, "estimates": est, "paths": paths, "horizon": horizon, "seed": seed})
                }
                Mode::Discounted => {
                    let (zmin, _) = inst.z_range();
                    let est = estimate_discounted_shortfalls(&trajs, &grid, inst.discount_factor()?, zmin)?;
                    json!({"mode": "discounted", "estimates": est, "paths": paths, "horizon": horizon, "seed": seed})
                }
            };
            emit(&value, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::CheckDominance { x, benchmark, order, out } => {
            let xd = load_distribution(x)?;
            let bd = load_distribution(benchmark)?;
            let check = match order {
                OrderArg::Icv => check_icv(&xd, &bd),
                OrderArg::Icx => check_icx(&xd, &bd),
            };
            let value = json!({
                "order": match order { OrderArg::Icv => "icv", OrderArg::Icx => "icx" },
                "holds": check.holds,
                "worst_eta": check.worst_eta,
                "worst_margin": check.worst_margin,
                "margins": check.margins,
            });
            emit(&value, out.as_deref())?;
            Ok(if check.holds { EXIT_OK } else { EXIT_INFEASIBLE })
        }
        Command::Alp { instance, epsilon, delta, basis, psi, seed, out } => {
            let problem = load_problem(instance)?;
            let inst = &problem.instance;
            let bench = problem.scalar_benchmark()?;
            let bases = match basis {
                Some(p) => BasisSet::from_file(&read_json::<BasisFile>(p)?, inst.num_states)?,
                None => BasisSet::complete(inst.num_states, bench),
            };
            let psi = match psi {
                PsiArg::Uniform => Psi::Uniform,
            };
            let r = solve_alp(inst, bench, &bases, *epsilon, *delta, &psi, *seed)?;
            let mut value = json!({
                "status": r.status.as_str(),
                "mode": r.mode,
                "objective": r.objective,
                "gamma": r.gamma,
                "alpha": r.alpha,
                "k": r.k,
                "samples": r.num_samples,
                "distinct_samples": r.distinct_samples,
                "test_samples": r.test_samples,
                "violation_fraction": r.violation_fraction,
                "alpha_nonnegative": r.alpha_nonnegative,
                "epsilon": epsilon,
                "delta": delta,
                "seed": seed,
            });
            if let Some(b) = r.beta {
                value["beta"] = json!(b);
            }
            if let Some(u) = &r.utility {
                value["utility"] = json!({"breakpoints": u.breakpoints(), "weights": u.weights()});
            }
            if r.status == LpStatus::Optimal {
                value["values"] = json!(r.values(&bases, inst.num_states));
            }
            emit(&value, out.as_deref())?;
            Ok(status_code(r.status))
        }
        Command::GenPortfolio { config, out } => {
            let cfg: PortfolioConfig = read_json(config)?;
            cfg.validate()?;
            let built = build_portfolio_instance(&cfg)?;
            let mut value = serde_json::to_value(InstanceFile::from_instance(&built.instance, built.benchmark.as_ref()))?;
            value["portfolio"] = json!({
                "base_states": built.base_states,
                "states": built.states,
                "profiles": built.profiles,
                "grid": built.grid,
            });
            emit(&value, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Oracle { instance, out } => {
            let problem = load_problem(instance)?;
            let inst = &problem.instance;
            let bench = match &problem.spec {
                Some(DominanceSpec::Scalar(b)) => b.clone(),
                Some(DominanceSpec::Family(_)) => {
                    return Err(Error::InvalidArgument("the oracle needs a scalar benchmark".into()))
                }
                None => crate::fixtures::vacuous_benchmark(inst),
            };
            let r = brute_force_best_feasible(inst, &bench)?;
            emit(&serde_json::to_value(&r)?, out.as_deref())?;
            Ok(if r.value.is_some() { EXIT_OK } else { EXIT_INFEASIBLE })
        }
    }
}
