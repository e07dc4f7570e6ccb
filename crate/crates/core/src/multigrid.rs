//! Nonlinear FAS p-multigrid.
//!
//! Levels are numbered from 1 (coarsest) upward; [`Hierarchy`] stores them
//! in that order. Coarsening always drops one order per level and stops at
//! order 1.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dg::{NodalField, OrderField, Problem, SpatialOperator};
use crate::error::{Error, Result};
use crate::time::{smooth, CflConfig};

/// Order dropped per coarsening step.
pub const DELTA_N: usize = 1;
/// Order of the coarsest level.
pub const N_COARSE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoarseningRule {
    /// Every element drops one order per level.
    Uniform,
    /// Level `l` caps every element at order `l`; lower elements are kept.
    #[default]
    HighOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseningMode {
    Isotropic,
    /// Only the given reference direction is coarsened.
    Anisotropic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub eta: f64,
    pub coarsest_sweeps: usize,
    pub max_batches: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            pre_sweeps: 100,
            post_sweeps: 100,
            eta: 1.1,
            coarsest_sweeps: 400,
            max_batches: 20,
        }
    }
}

impl SmootherConfig {
    /// Lighter smoothing used once the mesh has been adapted.
    pub fn post_adaptation() -> Self {
        Self {
            pre_sweeps: 50,
            post_sweeps: 50,
            coarsest_sweeps: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pre_sweeps == 0 || self.post_sweeps == 0 || self.coarsest_sweeps == 0 || self.max_batches == 0 {
            return Err(Error::InvalidInput("smoother sweep counts must be positive".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidInput(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgConfig {
    pub smoother: SmootherConfig,
    pub cfl: CflConfig,
    pub rule: CoarseningRule,
    /// Residual each FMG level must reach before the order is raised.
    pub fmg_level_tol: f64,
    pub final_tol: f64,
    pub max_cycles: usize,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            smoother: SmootherConfig::default(),
            cfl: CflConfig::default(),
            rule: CoarseningRule::HighOrder,
            fmg_level_tol: 1e-1,
            final_tol: 1e-9,
            max_cycles: 500,
        }
    }
}

/// Cycles over which a residual must drop by [`STALL_FACTOR`].
pub const STALL_WINDOW: usize = 10;
pub const STALL_FACTOR: f64 = 0.99;

/// Order fields of every level, coarsest first.
pub fn hierarchy_orders(orders: &OrderField, mode: CoarseningMode, rule: CoarseningRule) -> Result<Vec<OrderField>> {
    if orders.is_empty() {
        return Err(Error::InvalidInput("empty order field".into()));
    }
    let min = orders.min_order();
    if min < N_COARSE {
        return Err(Error::OrderTooLow { order: min, min: N_COARSE });
    }
    let dirs: &[usize] = match mode {
        CoarseningMode::Isotropic => &[0, 1],
        CoarseningMode::Anisotropic(0) => &[0],
        CoarseningMode::Anisotropic(1) => &[1],
        CoarseningMode::Anisotropic(d) => {
            return Err(Error::InvalidInput(format!("direction {d} out of range")));
        }
    };
    let max = orders.max_orders();
    let top = dirs.iter().map(|&d| max[d]).max().unwrap_or(N_COARSE);
    let n_levels = top - N_COARSE + 1;
    let mut levels = vec![orders.clone()];
    for step in 1..n_levels {
        let cap = top - step * DELTA_N;
        let prev = levels.last().expect("at least one level");
        let next: Vec<[usize; 2]> = (0..orders.len())
            .map(|e| {
                let mut o = prev.get(e);
                for &d in dirs {
                    o[d] = match rule {
                        CoarseningRule::Uniform => o[d].saturating_sub(DELTA_N).max(N_COARSE),
                        CoarseningRule::HighOrder => o[d].min(cap),
                    };
                }
                o
            })
            .collect();
        levels.push(OrderField::new(next));
    }
    levels.reverse();
    Ok(levels)
}

pub struct Hierarchy {
    levels: Vec<SpatialOperator>,
    mode: CoarseningMode,
    rule: CoarseningRule,
}

impl Hierarchy {
    pub fn build(problem: &Problem, orders: &OrderField, mode: CoarseningMode, rule: CoarseningRule) -> Result<Self> {
        let fields = hierarchy_orders(orders, mode, rule)?;
        let levels = fields
            .into_iter()
            .enumerate()
            .map(|(k, o)| problem.operator(o, k + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels, mode, rule })
    }

    /// Uses already-built operators, coarsest first.
    pub fn from_levels(levels: Vec<SpatialOperator>, mode: CoarseningMode, rule: CoarseningRule) -> Self {
        Self { levels, mode, rule }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Level `l`, counting from 1 at the coarsest.
    pub fn level(&self, l: usize) -> &SpatialOperator {
        &self.levels[l - 1]
    }

    pub fn finest(&self) -> &SpatialOperator {
        self.levels.last().expect("non-empty hierarchy")
    }

    pub fn mode(&self) -> CoarseningMode {
        self.mode
    }

    pub fn rule(&self) -> CoarseningRule {
        self.rule
    }

    /// The first `n` levels as a hierarchy of their own.
    pub fn prefix(&self, n: usize) -> Hierarchy {
        Hierarchy {
            levels: self.levels[..n].to_vec(),
            mode: self.mode,
            rule: self.rule,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Pre,
    Post,
    Coarsest,
    Cycle,
    Smooth,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
            Phase::Coarsest => "coarsest",
            Phase::Cycle => "cycle",
            Phase::Smooth => "smooth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub cycle: usize,
    /// Level index, or the maximum order for adapted fields.
    pub level: usize,
    pub phase: Phase,
    pub sweeps: usize,
    pub residual: f64,
    pub work_units: f64,
    pub wall_time: f64,
}

/// Collects the residual history and warnings of a run.
#[derive(Debug)]
pub struct Recorder {
    start: Instant,
    problem: Problem,
    reference_dofs: usize,
    pub cycle: usize,
    pub entries: Vec<HistoryEntry>,
    pub warnings: Vec<String>,
}

impl Recorder {
    pub fn new(problem: &Problem, reference_dofs: usize) -> Self {
        Self {
            start: Instant::now(),
            problem: problem.clone(),
            reference_dofs: reference_dofs.max(1),
            cycle: 0,
            entries: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn reference_dofs(&self) -> usize {
        self.reference_dofs
    }

    pub fn work_units(&self) -> f64 {
        self.problem.work.snapshot().work_units(self.reference_dofs)
    }

    pub fn record(&mut self, level: usize, phase: Phase, sweeps: usize, residual: f64) {
        self.entries.push(HistoryEntry {
            cycle: self.cycle,
            level,
            phase,
            sweeps,
            residual,
            work_units: self.work_units(),
            wall_time: self.start.elapsed().as_secs_f64(),
        });
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }
}

/// Hook called on each level the V-cycle descends to, right after the
/// restricted state has been evaluated for the coarse source.
pub trait LevelObserver {
    /// `a` is `A(q)` on `op`'s orders.
    fn on_descent(&mut self, op: &SpatialOperator, q: &NodalField, a: &NodalField) -> Result<()>;
}

struct NoObserver;

impl LevelObserver for NoObserver {
    fn on_descent(&mut self, _: &SpatialOperator, _: &NodalField, _: &NodalField) -> Result<()> {
        Ok(())
    }
}

/// FAS V-cycles on a hierarchy.
pub struct VCycle<'a> {
    pub hierarchy: &'a Hierarchy,
    pub smoother: SmootherConfig,
    pub cfl: CflConfig,
}

impl<'a> VCycle<'a> {
    pub fn new(hierarchy: &'a Hierarchy, smoother: SmootherConfig, cfl: CflConfig) -> Self {
        Self {
            hierarchy,
            smoother,
            cfl,
        }
    }

    /// One cycle from the finest level with source `s`. Returns the finest
    /// residual norm at exit.
    pub fn run(&self, q: &mut NodalField, s: &NodalField, rec: &mut Recorder) -> Result<f64> {
        self.run_observed(q, s, rec, &mut NoObserver)
    }

    pub fn run_observed(
        &self,
        q: &mut NodalField,
        s: &NodalField,
        rec: &mut Recorder,
        observer: &mut dyn LevelObserver,
    ) -> Result<f64> {
        self.cycle(self.hierarchy.n_levels(), q, s, rec, observer)
    }

    fn smooth_batch(&self, op: &SpatialOperator, q: &mut NodalField, s: &NodalField, sweeps: usize) -> Result<NodalField> {
        smooth(op, q, s, sweeps, &self.cfl).map_err(|e| with_level(e, op.level()))?;
        op.residual(q, s).map_err(|e| with_level(e, op.level()))
    }

    fn cycle(
        &self,
        l: usize,
        q: &mut NodalField,
        s: &NodalField,
        rec: &mut Recorder,
        observer: &mut dyn LevelObserver,
    ) -> Result<f64> {
        let op = self.hierarchy.level(l);
        let cfg = &self.smoother;
        if l == 1 {
            let r = self.smooth_batch(op, q, s, cfg.coarsest_sweeps)?.max_norm();
            rec.record(l, Phase::Coarsest, cfg.coarsest_sweeps, r);
            return Ok(r);
        }
        let coarse = self.hierarchy.level(l - 1);

        // Pre-smoothing until the residual is no longer dominated by
        // components the coarser level cannot see, or is at round-off.
        let floor = roundoff_floor(s);
        let mut batches = 0;
        let (r, r_coarse) = loop {
            let r = self.smooth_batch(op, q, s, cfg.pre_sweeps)?;
            batches += 1;
            let rc = r.transfer_to(coarse.orders());
            if r.max_norm() < cfg.eta * rc.max_norm() || r.max_norm() <= floor {
                break (r, rc);
            }
            if batches >= cfg.max_batches {
                rec.warn(format!(
                    "cycle {} level {l}: pre-smoothing stopped at the {} batch cap",
                    rec.cycle, cfg.max_batches
                ));
                break (r, rc);
            }
        };
        let r_pre = r.max_norm();
        rec.record(l, Phase::Pre, batches * cfg.pre_sweeps, r_pre);

        let qc0 = q.transfer_to(coarse.orders());
        let ac = coarse.apply(&qc0).map_err(|e| with_level(e, l - 1))?;
        observer.on_descent(coarse, &qc0, &ac)?;
        let mut sc = ac;
        sc.axpy(1.0, &r_coarse);
        let mut qc = qc0.clone();
        self.cycle(l - 1, &mut qc, &sc, rec, observer)?;
        let eps = qc.difference(&qc0);
        q.axpy(1.0, &eps.transfer_to(op.orders()));

        let mut batches = 0;
        let r_post = loop {
            let r = self.smooth_batch(op, q, s, cfg.post_sweeps)?.max_norm();
            batches += 1;
            if r <= r_pre || r <= floor {
                break r;
            }
            if batches >= cfg.max_batches {
                rec.warn(format!(
                    "cycle {} level {l}: post-smoothing stopped at the {} batch cap",
                    rec.cycle, cfg.max_batches
                ));
                break r;
            }
        };
        rec.record(l, Phase::Post, batches * cfg.post_sweeps, r_post);
        Ok(r_post)
    }
}

/// Residual level below which smoothing cannot make further progress.
pub fn roundoff_floor(s: &NodalField) -> f64 {
    64.0 * f64::EPSILON * s.max_norm().max(1.0)
}

fn with_level(e: Error, level: usize) -> Error {
    match e {
        Error::Diverged { element, .. } => Error::Diverged { element, level },
        other => other,
    }
}

/// Repeats V-cycles on the finest level until `tol`, failing on a stall
/// or after `max_cycles`.
pub fn cycle_to_tolerance(
    vc: &VCycle,
    q: &mut NodalField,
    s: &NodalField,
    tol: f64,
    max_cycles: usize,
    rec: &mut Recorder,
) -> Result<f64> {
    let top = vc.hierarchy.finest();
    let mut r = top.residual(q, s)?.max_norm();
    let level = vc.hierarchy.n_levels();
    rec.record(level, Phase::Cycle, 0, r);
    let mut history = vec![r];
    let mut cycles = 0;
    while r > tol {
        if cycles >= max_cycles {
            return Err(Error::CycleLimit { cycles, residual: r });
        }
        rec.cycle += 1;
        r = vc.run(q, s, rec)?;
        cycles += 1;
        rec.record(level, Phase::Cycle, 0, r);
        history.push(r);
        if history.len() > STALL_WINDOW {
            let previous = history[history.len() - 1 - STALL_WINDOW];
            if r > STALL_FACTOR * previous && r > tol {
                return Err(Error::Stalled {
                    level,
                    cycles,
                    residual: r,
                    previous,
                });
            }
        }
    }
    Ok(r)
}

/// Full multigrid: converge each order of the hierarchy in turn, prolong,
/// and finish with V-cycles on the finest level. Returns the solution and
/// the finest residual.
pub fn fmg_solve(
    problem: &Problem,
    target: &OrderField,
    cfg: &MgConfig,
    initial: Option<NodalField>,
    rec: &mut Recorder,
) -> Result<(NodalField, f64)> {
    let full = Hierarchy::build(problem, target, CoarseningMode::Isotropic, cfg.rule)?;
    let n = full.n_levels();
    let mut q = match initial {
        Some(q0) => q0.transfer_to(full.level(1).orders()),
        None => full.level(1).zeros(),
    };
    let mut r = f64::INFINITY;
    for k in 1..=n {
        let sub = full.prefix(k);
        let op = sub.finest();
        if k > 1 {
            q = q.transfer_to(op.orders());
        }
        let vc = VCycle::new(&sub, cfg.smoother, cfg.cfl);
        let tol = if k == n { cfg.final_tol } else { cfg.fmg_level_tol };
        let s = op.source().clone();
        r = cycle_to_tolerance(&vc, &mut q, &s, tol, cfg.max_cycles, rec)?;
    }
    Ok((q, r))
}

/// V-cycles on an existing order field, no FMG ramp.
pub fn solve_on(
    problem: &Problem,
    orders: &OrderField,
    q: &mut NodalField,
    cfg: &MgConfig,
    tol: f64,
    rec: &mut Recorder,
) -> Result<f64> {
    let h = Hierarchy::build(problem, orders, CoarseningMode::Isotropic, cfg.rule)?;
    let vc = VCycle::new(&h, cfg.smoother, cfg.cfl);
    let s = h.finest().source().clone();
    cycle_to_tolerance(&vc, q, &s, tol, cfg.max_cycles, rec)
}
