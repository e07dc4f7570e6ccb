//! The four solver pipelines and their artifacts.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dgtau_core::adaptation::{run_adaptation, AdaptConfig, AdaptOutcome, AdaptSolver, Decision};
use dgtau_core::dg::{l2_error, NodalField, OrderField, Problem};
use dgtau_core::mesh::{build_cartesian, read_mesh, Mesh2D};
use dgtau_core::multigrid::{fmg_solve, MgConfig, Phase, Recorder};
use dgtau_core::physics::case_by_name;
use dgtau_core::time::march_to_steady_with;

use crate::artifacts::{config_hash, ArtifactWriter, Failure, StageSummary, Summary, FAILURE_FILE, SUMMARY_FILE};
use crate::config::{Mode, RunConfig};
use crate::error::{CliError, CliResult};

const ALL_DECISIONS: [Decision; 4] = [
    Decision::InnerMap,
    Decision::Extrapolated,
    Decision::FallbackNMax,
    Decision::StageCapped,
];

pub fn build_mesh(cfg: &RunConfig) -> CliResult<Mesh2D> {
    let mesh = match &cfg.mesh.file {
        Some(path) => read_mesh(path),
        None => build_cartesian(cfg.mesh.nx, cfg.mesh.ny, cfg.mesh.domain(), cfg.mesh.grading()),
    };
    mesh.map_err(|e| CliError::Config(format!("mesh: {e}")))
}

pub fn build_problem(cfg: &RunConfig) -> CliResult<Problem> {
    let case = case_by_name(&cfg.case).ok_or_else(|| CliError::Config(format!("case: unknown case '{}'", cfg.case)))?;
    Ok(Problem::new(build_mesh(cfg)?, case))
}

pub fn mg_config(cfg: &RunConfig) -> MgConfig {
    MgConfig {
        smoother: cfg.mg.smoother(),
        cfl: cfg.cfl,
        rule: cfg.mg.rule,
        fmg_level_tol: cfg.mg.fmg_level_tol,
        final_tol: cfg.solver.tolerance,
        max_cycles: cfg.solver.max_cycles,
    }
}

pub fn adapt_solver(cfg: &RunConfig) -> AdaptSolver {
    let before = mg_config(cfg);
    AdaptSolver {
        before,
        after: MgConfig {
            smoother: cfg.mg.adapted_smoother(),
            ..before
        },
    }
}

pub fn adapt_config(cfg: &RunConfig) -> AdaptConfig {
    match cfg.mode {
        // A single-stage run ignores any stage list.
        Mode::FasAdapt => AdaptConfig {
            stages: Vec::new(),
            ..cfg.adapt.clone()
        },
        _ => cfg.adapt.clone(),
    }
}

/// What a finished pipeline hands back for the summary.
struct Solved {
    orders: OrderField,
    initial: OrderField,
    solution: NodalField,
    residual: f64,
    converged: bool,
    iterations: usize,
    adaptation: Option<AdaptOutcome>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub summary: Summary,
}

/// Executes `cfg` and writes its artifacts. Solver failures leave the
/// history and a failure record behind and are returned as errors.
pub fn run(cfg: &RunConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let dir = cfg.output_dir();
    let writer = ArtifactWriter::create(&dir, config_hash(cfg))?;
    for stale in [SUMMARY_FILE, FAILURE_FILE] {
        let _ = std::fs::remove_file(dir.join(stale));
    }
    writer.write_json("config.json", cfg)?;
    let initial = initial_orders(cfg, &problem);
    let mut rec = Recorder::new(&problem, initial.dofs());
    let result = match cfg.mode {
        Mode::Rk3 => run_rk3(cfg, &problem, &initial, &mut rec),
        Mode::Fas => run_fas(cfg, &problem, &initial, &mut rec),
        Mode::FasAdapt | Mode::FasMultistage => run_adapt(cfg, &problem, &initial, &mut rec),
    };
    writer.write_history(&rec.entries)?;
    let solved = match result {
        Ok(s) => s,
        Err(e) => {
            let failure = Failure {
                case: cfg.case.clone(),
                mode: cfg.mode.name().into(),
                error: e.to_string(),
                work_units: rec.work_units(),
                history_entries: rec.entries.len(),
            };
            writer.write_json(FAILURE_FILE, &failure)?;
            return Err(e);
        }
    };
    let summary = write_artifacts(cfg, &problem, &writer, &rec, &solved)?;
    Ok(RunOutput { dir, summary })
}

fn initial_orders(cfg: &RunConfig, problem: &Problem) -> OrderField {
    let n = match cfg.mode {
        Mode::Rk3 | Mode::Fas => cfg.solver.order,
        Mode::FasAdapt | Mode::FasMultistage => adapt_config(cfg).stage_orders()[0],
    };
    OrderField::uniform(problem.mesh.n_elements(), [n, n])
}

fn run_rk3(cfg: &RunConfig, problem: &Problem, orders: &OrderField, rec: &mut Recorder) -> CliResult<Solved> {
    let op = problem.operator(orders.clone(), 1)?;
    let mut q = op.zeros();
    let s = op.source().clone();
    let level = 1;
    let result = march_to_steady_with(
        &op,
        &mut q,
        &s,
        &cfg.cfl,
        cfg.solver.tolerance,
        cfg.solver.max_sweeps,
        cfg.solver.log_every,
        |sweep, r| rec.record(level, Phase::Smooth, sweep, r),
    )?;
    if !result.converged {
        rec.warn(format!(
            "rk3 stopped at {} sweeps with residual {:e}",
            result.sweeps, result.residual
        ));
    }
    Ok(Solved {
        orders: orders.clone(),
        initial: orders.clone(),
        solution: q,
        residual: result.residual,
        converged: result.converged,
        iterations: result.sweeps,
        adaptation: None,
    })
}

fn run_fas(cfg: &RunConfig, problem: &Problem, orders: &OrderField, rec: &mut Recorder) -> CliResult<Solved> {
    let (q, r) = fmg_solve(problem, orders, &mg_config(cfg), None, rec)?;
    Ok(Solved {
        orders: orders.clone(),
        initial: orders.clone(),
        solution: q,
        residual: r,
        converged: r <= cfg.solver.tolerance,
        iterations: rec.cycle,
        adaptation: None,
    })
}

fn run_adapt(cfg: &RunConfig, problem: &Problem, initial: &OrderField, rec: &mut Recorder) -> CliResult<Solved> {
    let out = run_adaptation(problem, &adapt_config(cfg), &adapt_solver(cfg), rec)?;
    Ok(Solved {
        orders: out.orders.clone(),
        initial: initial.clone(),
        solution: out.solution.clone(),
        residual: out.residual,
        converged: out.residual <= cfg.solver.tolerance,
        iterations: rec.cycle,
        adaptation: Some(out),
    })
}

fn write_artifacts(
    cfg: &RunConfig,
    problem: &Problem,
    writer: &ArtifactWriter,
    rec: &Recorder,
    solved: &Solved,
) -> CliResult<Summary> {
    writer.write_orders("orders_initial.csv", &solved.initial)?;
    writer.write_orders("orders.csv", &solved.orders)?;
    if cfg.output.solution {
        writer.write_solution("solution.txt", &solved.solution)?;
    }
    let mut decisions = BTreeMap::new();
    let mut stages = Vec::new();
    if let Some(out) = &solved.adaptation {
        for d in ALL_DECISIONS {
            decisions.insert(d.name().to_string(), 0);
        }
        for (k, map) in out.tau_maps.iter().enumerate() {
            writer.write_json(&format!("tau_map_stage{}.json", k + 1), map)?;
            if cfg.output.tau_csv {
                writer.write_tau_csv(&format!("tau_map_stage{}.csv", k + 1), map)?;
            }
        }
        for (report, orders) in out.reports.iter().zip(&out.stage_orders) {
            writer.write_json(&format!("adaptation_report_stage{}.json", report.stage), report)?;
            writer.write_orders(&format!("orders_stage{}.csv", report.stage), orders)?;
            for d in ALL_DECISIONS {
                *decisions.get_mut(d.name()).expect("seeded") += report.count(d);
            }
            stages.push(StageSummary {
                stage: report.stage,
                reference: report.reference,
                cap: report.cap,
                dofs_before: report.dofs_before,
                dofs_after: report.dofs_after,
                max_orders: orders.max_orders(),
            });
        }
    }
    let disc = problem.discretize(solved.orders.clone())?;
    let error = l2_error(&disc, &solved.solution, |p| problem.case.exact.value(p));
    let work = problem.work.snapshot();
    let summary = Summary {
        config_hash: writer.hash().to_string(),
        case: cfg.case.clone(),
        mode: cfg.mode.name().into(),
        converged: solved.converged,
        residual: solved.residual,
        iterations: solved.iterations,
        work_units: rec.work_units(),
        reference_dofs: rec.reference_dofs(),
        node_evaluations: work.full_node_evals + work.isolated_node_evals,
        dofs_initial: solved.initial.dofs(),
        dofs_final: solved.orders.dofs(),
        l2_error: error,
        decisions,
        stages,
        warnings: rec.warnings.clone(),
    };
    writer.write_json(SUMMARY_FILE, &summary)?;
    Ok(summary)
}
