use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use gip_cli::export;
use gip_cli::files::{read_instance, write_trace, InstanceFile, Metadata, RatioSummary, SolutionFile};
use gip_core::aleksandrov::{check_weak_with, classical_report, weak_report_at_uniform};
use gip_core::oracles::{arc_cells, brute_force_maximize, CircleDensity, BRUTE_FORCE_MAX_ATOMS};
use gip_core::solver::{ratio_improvement_loop, solve};
use gip_core::{compute_partition, InitStrategy, SolverConfig, StepRule, Verdict, WeakOptions};
use serde_json::json;

const EXIT_INVALID: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_FAILS: u8 = 3;
const EXIT_INDETERMINATE: u8 = 4;

#[derive(Parser)]
#[command(name = "gip", version, about = "Discrete Gauss image problem: solve, check and verify polytope solutions")]
struct Cli {
    /// Worker threads for the data-parallel kernels (0 = one per core).
    #[arg(long, env = "GIP_THREADS", global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Polyak,
    Diminishing,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Ones,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the functional and write the solution polytope.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Solution file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration CSV trace.
        #[arg(long)]
        trace_csv: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Rule::Polyak)]
        step_rule: Rule,
        /// Base step for the diminishing and fixed rules.
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, value_enum, default_value_t = Init::Ones)]
        init: Init,
        #[arg(long)]
        no_recovery: bool,
        /// Run the radius-ratio improvement loop on the solution.
        #[arg(long)]
        improve_ratio: bool,
    },
    /// Test the weak Aleksandrov relation and print the report as JSON.
    #[command(group(ArgGroup::new("angle").required(true).args(["alpha", "find_alpha"])))]
    Check {
        instance: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        find_alpha: bool,
        /// Sampled hemisphere subsets instead of exhaustive enumeration.
        #[arg(long)]
        heuristic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also report the classical relation.
        #[arg(long)]
        classical: bool,
    },
    /// Exact arc cells and the brute-force maximizer (planar instances).
    Oracle {
        instance: PathBuf,
        /// Use this solution instead of solving first.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Half-width of the log-α box (default: from the solution).
        #[arg(long)]
        width: Option<f64>,
        /// Quadrature nodes for the brute-force search.
        #[arg(long, default_value_t = 4096)]
        brute_nodes: usize,
    },
    /// Render a solution as SVG (planar) or OBJ (spatial).
    #[command(group(ArgGroup::new("format").required(true).args(["obj", "svg"])))]
    Export {
        solution: PathBuf,
        #[arg(long)]
        obj: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn cmd_solve(
    instance: &Path,
    cfg: SolverConfig,
    out: Option<&Path>,
    trace_csv: Option<&Path>,
    improve_ratio: bool,
) -> Result<u8> {
    let inst = read_instance(instance)?;
    let report = solve(&inst.mu, &inst.lam, &cfg)?;
    let mut sol = SolutionFile::from_report(&report, &cfg, Metadata::now());
    if improve_ratio {
        match report.uniform_alpha_used {
            Some(alpha) => {
                let r = ratio_improvement_loop(&report.final_p, &inst.mu, &inst.lam, alpha, &cfg)?;
                let p = &r.polytope;
                let part = compute_partition(p, &inst.lam)?;
                sol.alphas = p.alphas().to_vec();
                sol.betas = p.alphas().iter().map(|a| 1.0 / a).collect();
                sol.residual = r.residual_inf;
                sol.phi = gip_core::phi(p, &inst.mu, &inst.lam)?.phi;
                sol.radii_ratio = r.ratio;
                sol.cell_masses = part.cell_masses;
                sol.ratio_loop = Some(RatioSummary::from(&r));
            }
            None => log::warn!("no uniform weak constant; skipping the ratio loop"),
        }
    }
    if let Some(path) = trace_csv {
        write_trace(path, &report.trace).with_context(|| format!("writing {}", path.display()))?;
    }
    match out {
        Some(path) => sol.write(path).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", sol.to_json()),
    }
    eprintln!(
        "{} after {} iterations: residual {:.3e} (tolerance {:.3e}), phi {:.6}",
        if report.converged { "converged" } else { "not converged" },
        report.iterations,
        sol.residual,
        cfg.tol * inst.mu.weights().iter().sum::<f64>(),
        sol.phi
    );
    Ok(if report.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_check(instance: &Path, alpha: Option<f64>, heuristic: bool, seed: u64, classical: bool) -> Result<u8> {
    let inst = read_instance(instance)?;
    let opts = WeakOptions { heuristic, seed };
    let weak = match alpha {
        Some(a) => check_weak_with(&inst.mu, &inst.lam, a, opts)?,
        None => weak_report_at_uniform(&inst.mu, &inst.lam, opts)?,
    };
    if classical {
        let c = classical_report(&inst.mu, &inst.lam, None)?;
        print_json(&json!({ "weak": weak, "classical": c }))?;
    } else {
        print_json(&weak)?;
    }
    Ok(match weak.verdict {
        Verdict::Holds => 0,
        Verdict::Fails => EXIT_FAILS,
        Verdict::Indeterminate => EXIT_INDETERMINATE,
    })
}

fn cmd_oracle(instance: &Path, solution: Option<&Path>, points: usize, width: Option<f64>, brute_nodes: usize) -> Result<u8> {
    let file = InstanceFile::read(instance)?;
    if file.dimension != 2 {
        bail!("the oracle handles planar instances only (dimension 2)");
    }
    let inst = file.build(instance)?;
    let p = match solution {
        Some(path) => {
            let p = SolutionFile::read(path)?.polytope()?;
            if p.directions() != inst.mu.atoms() {
                bail!("{}: directions differ from the instance atoms", path.display());
            }
            p
        }
        None => solve(&inst.mu, &inst.lam, &SolverConfig::default())?.final_p,
    };
    let density = CircleDensity::from_spec(&file.lambda)?;
    let cells = arc_cells(&p)?;
    let mut arc_masses = cells.masses(&density);
    if file.normalize_lambda {
        let scale = inst.mu.weights().iter().sum::<f64>() / density.integrate(0.0, 2.0 * std::f64::consts::PI);
        arc_masses.iter_mut().for_each(|m| *m *= scale);
    }
    let grid_masses = compute_partition(&p, &inst.lam)?.cell_masses;
    let brute = if inst.mu.len() <= BRUTE_FORCE_MAX_ATOMS {
        let coarse = file.build_with_count(instance, brute_nodes.min(file.quadrature.count))?;
        let w = width.unwrap_or_else(|| p.alphas().iter().map(|a| a.ln().abs()).fold(0.0, f64::max) + 0.5);
        let r = brute_force_maximize(&coarse.mu, &coarse.lam, w, points)?;
        Some(json!({
            "t": r.t,
            "alphas": r.t.iter().map(|x| x.exp()).collect::<Vec<_>>(),
            "f": r.f,
            "fine_spacing": r.fine_spacing,
            "resolution_bound": r.resolution_bound,
            "evaluations": r.evaluations,
            "quadrature_count": coarse.lam.grid().len(),
            "box_halfwidth": w,
        }))
    } else {
        None
    };
    print_json(&json!({
        "alphas": p.alphas(),
        "arc_cells": cells.cells,
        "arc_masses": arc_masses,
        "grid_masses": grid_masses,
        "eps_quad": inst.lam.eps_quad(),
        "brute_force": brute,
    }))?;
    Ok(0)
}

fn cmd_export(solution: &Path, obj: Option<&Path>, svg: Option<&Path>) -> Result<u8> {
    let p = SolutionFile::read(solution)?.polytope()?;
    if let Some(path) = svg {
        fs::write(path, export::svg(&p)?).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = obj {
        fs::write(path, export::obj(&p)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    match cli.command {
        Command::Solve { instance, tol, max_iters, seed, out, trace_csv, step_rule, eta, init, no_recovery, improve_ratio } => {
            let cfg = SolverConfig {
                tol,
                max_iters,
                seed,
                step_rule: match step_rule {
                    Rule::Polyak => StepRule::Polyak,
                    Rule::Diminishing => StepRule::Diminishing { eta0: eta },
                    Rule::Fixed => StepRule::Fixed { eta },
                },
                init: match init {
                    Init::Ones => InitStrategy::Ones,
                    Init::Random => InitStrategy::Random,
                },
                rescale_recovery: !no_recovery,
                ..SolverConfig::default()
            };
            cmd_solve(&instance, cfg, out.as_deref(), trace_csv.as_deref(), improve_ratio)
        }
        Command::Check { instance, alpha, find_alpha: _, heuristic, seed, classical } => {
            cmd_check(&instance, alpha, heuristic, seed, classical)
        }
        Command::Oracle { instance, solution, points, width, brute_nodes } => {
            cmd_oracle(&instance, solution.as_deref(), points, width, brute_nodes)
        }
        Command::Export { solution, obj, svg } => cmd_export(&solution, obj.as_deref(), svg.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
