//! p-adaptation driven by the truncation error map.

use serde::{Deserialize, Serialize};

use crate::dg::{l2_error, NodalField, OrderField, Problem};
use crate::error::{Error, Result};
use crate::mesh::{side_normal_direction, side_tangent_direction, FaceNeighbor, Mesh2D};
use crate::multigrid::{fmg_solve, solve_on, MgConfig, Recorder, SmootherConfig};
use crate::tau::{estimate, ElementTau, EstimateConfig, Region, TauMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum JumpRule {
    /// `|N+ - N-| <= 1` across every face.
    #[default]
    StrictOne,
    /// `N+ >= floor(2/3 N-)` in both directions of every face.
    Softened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    pub tau_max: f64,
    pub n_max: usize,
    pub n_min: usize,
    pub jump_rule: JumpRule,
    /// Boundary tags whose elements share tangential orders.
    pub conforming: Vec<String>,
    /// Reference orders of a multi-stage run; empty means one stage at
    /// `reference`.
    pub stages: Vec<usize>,
    pub reference: usize,
    pub isolated: bool,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            tau_max: 1e-3,
            n_max: 10,
            n_min: 1,
            jump_rule: JumpRule::StrictOne,
            conforming: Vec::new(),
            stages: Vec::new(),
            reference: 4,
            isolated: true,
        }
    }
}

impl AdaptConfig {
    pub fn stage_orders(&self) -> Vec<usize> {
        if self.stages.is_empty() {
            vec![self.reference]
        } else {
            self.stages.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_max > 0.0) {
            return Err(Error::InvalidInput(format!("tau_max must be positive, got {}", self.tau_max)));
        }
        if self.n_min < 1 {
            return Err(Error::InvalidInput("n_min must be at least 1".into()));
        }
        let stages = self.stage_orders();
        if stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("stages must increase strictly: {stages:?}")));
        }
        if stages[0] <= self.n_min || *stages.last().expect("non-empty") > self.n_max {
            return Err(Error::InvalidInput(format!(
                "stages {stages:?} must lie in ({}, {}]",
                self.n_min, self.n_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    InnerMap,
    Extrapolated,
    FallbackNMax,
    StageCapped,
}

impl Decision {
    pub fn name(self) -> &'static str {
        match self {
            Decision::InnerMap => "inner-map",
            Decision::Extrapolated => "extrapolated",
            Decision::FallbackNMax => "fallback-n-max",
            Decision::StageCapped => "stage-capped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDecision {
    pub element: usize,
    pub old: [usize; 2],
    /// Result of the map search, before any cap or limiting.
    pub selected: [usize; 2],
    pub new: [usize; 2],
    pub path: Decision,
    /// Map value at the final orders; `None` where the map is unbounded.
    pub predicted_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub stage: usize,
    pub reference: usize,
    pub cap: usize,
    pub tau_max: f64,
    pub dofs_before: usize,
    pub dofs_after: usize,
    pub elements: Vec<ElementDecision>,
}

impl AdaptationReport {
    pub fn count(&self, path: Decision) -> usize {
        self.elements.iter().filter(|d| d.path == path).count()
    }
}

fn dof_key(n: [usize; 2]) -> (usize, usize, usize) {
    ((n[0] + 1) * (n[1] + 1), n[0].max(n[1]), n[0])
}

/// Cheapest combination of one element's map that meets `tau_max`, and
/// the region it came from.
pub fn select_element(t: &ElementTau, tau_max: f64, n_min: usize, n_max: usize) -> ([usize; 2], Decision) {
    let mut best: Option<[usize; 2]> = None;
    let consider = |n: [usize; 2], best: &mut Option<[usize; 2]>| {
        if best.is_none_or(|b| dof_key(n) < dof_key(b)) {
            *best = Some(n);
        }
    };
    for n1 in n_min..t.reference[0] {
        for n2 in n_min..t.reference[1] {
            if t.combined([n1, n2]).0 <= tau_max {
                consider([n1, n2], &mut best);
            }
        }
    }
    if let Some(b) = best {
        return (b, Decision::InnerMap);
    }
    for n1 in n_min..=n_max {
        for n2 in n_min..=n_max {
            let (v, region) = t.combined([n1, n2]);
            if region == Region::Extrapolated && v <= tau_max {
                consider([n1, n2], &mut best);
            }
        }
    }
    match best {
        Some(b) => (b, Decision::Extrapolated),
        None => ([n_max, n_max], Decision::FallbackNMax),
    }
}

/// Map search for every element, with per-element orders capped at `cap`.
pub fn select_orders(map: &TauMap, old: &OrderField, cfg: &AdaptConfig, cap: usize) -> Result<(OrderField, Vec<ElementDecision>)> {
    if map.is_empty() {
        return Err(Error::EmptyMap(0));
    }
    if map.len() != old.len() {
        return Err(Error::InvalidInput(format!(
            "map covers {} elements, order field {}",
            map.len(),
            old.len()
        )));
    }
    let mut orders = Vec::with_capacity(map.len());
    let mut decisions = Vec::with_capacity(map.len());
    for (e, t) in map.elements.iter().enumerate() {
        let (selected, mut path) = select_element(t, cfg.tau_max, cfg.n_min, cfg.n_max);
        let new = selected.map(|n| n.min(cap));
        if new != selected {
            path = Decision::StageCapped;
        }
        orders.push(new);
        decisions.push(ElementDecision {
            element: e,
            old: old.get(e),
            selected,
            new,
            path,
            predicted_tau: None,
        });
    }
    Ok((OrderField::new(orders), decisions))
}

/// Interior faces as `(element, side, element, side)`.
fn interior_faces(mesh: &Mesh2D) -> Vec<(usize, usize, usize, usize)> {
    mesh.faces()
        .iter()
        .filter_map(|f| match f.right {
            FaceNeighbor::Interior { side, .. } => Some((f.left.element, f.left.side, side.element, side.side)),
            FaceNeighbor::Boundary { .. } => None,
        })
        .collect()
}

/// Lowest order an element may have next to a neighbour of order `other`.
fn required(rule: JumpRule, other: usize) -> usize {
    match rule {
        JumpRule::StrictOne => other.saturating_sub(1),
        JumpRule::Softened => 2 * other / 3,
    }
}

/// Raises orders until the jump rule holds on every interior face. Both
/// the tangential and the normal order pairs of a face are checked.
pub fn limit_jumps(mesh: &Mesh2D, orders: &OrderField, rule: JumpRule) -> OrderField {
    let faces = interior_faces(mesh);
    let mut o: Vec<[usize; 2]> = orders.as_slice().to_vec();
    loop {
        let mut changed = false;
        for &(a, sa, b, sb) in &faces {
            for dirs in [
                (side_tangent_direction(sa), side_tangent_direction(sb)),
                (side_normal_direction(sa), side_normal_direction(sb)),
            ] {
                let (da, db) = dirs;
                let need_a = required(rule, o[b][db]);
                if o[a][da] < need_a {
                    o[a][da] = need_a;
                    changed = true;
                }
                let need_b = required(rule, o[a][da]);
                if o[b][db] < need_b {
                    o[b][db] = need_b;
                    changed = true;
                }
            }
        }
        if !changed {
            return OrderField::new(o);
        }
    }
}

/// Gives all elements on each tagged boundary the largest tangential order
/// found along it, alternating with [`limit_jumps`] until nothing changes.
pub fn conforming_pass(mesh: &Mesh2D, orders: &OrderField, tags: &[String], rule: JumpRule) -> Result<OrderField> {
    let ids = tags
        .iter()
        .map(|t| {
            mesh.tag_id(t)
                .ok_or_else(|| Error::InvalidInput(format!("unknown boundary tag '{t}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if ids.is_empty() {
        return Ok(orders.clone());
    }
    let mut current = orders.clone();
    loop {
        let mut o: Vec<[usize; 2]> = current.as_slice().to_vec();
        for &id in &ids {
            let sides = mesh.boundary_sides(id);
            let max = sides
                .iter()
                .map(|s| o[s.element][side_tangent_direction(s.side)])
                .max()
                .unwrap_or(0);
            for s in &sides {
                o[s.element][side_tangent_direction(s.side)] = max;
            }
        }
        let next = limit_jumps(mesh, &OrderField::new(o), rule);
        if next == current {
            return Ok(next);
        }
        current = next;
    }
}

/// Limiting and conforming passes as configured.
pub fn finalize_orders(mesh: &Mesh2D, orders: &OrderField, cfg: &AdaptConfig) -> Result<OrderField> {
    let limited = limit_jumps(mesh, orders, cfg.jump_rule);
    conforming_pass(mesh, &limited, &cfg.conforming, cfg.jump_rule)
}

/// Keeps, per element and direction, the estimate with the higher
/// reference order.
pub fn merge_maps(old: &TauMap, new: &TauMap) -> TauMap {
    let elements = old
        .elements
        .iter()
        .zip(&new.elements)
        .map(|(a, b)| {
            let pick = |d: usize| if b.reference[d] >= a.reference[d] { b } else { a };
            let (p0, p1) = (pick(0), pick(1));
            ElementTau {
                element: a.element,
                reference: [p0.reference[0], p1.reference[1]],
                directional: [p0.directional[0].clone(), p1.directional[1].clone()],
                fits: [p0.fits[0], p1.fits[1]],
            }
        })
        .collect();
    TauMap {
        elements,
        ..new.clone()
    }
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub orders: OrderField,
    pub solution: NodalField,
    pub residual: f64,
    pub reports: Vec<AdaptationReport>,
    /// Estimates as measured at each stage, before merging.
    pub tau_maps: Vec<TauMap>,
    /// Every order field produced by a stage.
    pub stage_orders: Vec<OrderField>,
}

impl AdaptOutcome {
    pub fn l2_error(&self, problem: &Problem) -> Result<f64> {
        let disc = problem.discretize(self.orders.clone())?;
        Ok(l2_error(&disc, &self.solution, |p| problem.case.exact.value(p)))
    }
}

/// Solver settings of an adaptation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptSolver {
    /// Used up to the first adaptation.
    pub before: MgConfig,
    /// Used on adapted order fields.
    pub after: MgConfig,
}

impl Default for AdaptSolver {
    fn default() -> Self {
        let before = MgConfig::default();
        Self {
            before,
            after: MgConfig {
                smoother: SmootherConfig::post_adaptation(),
                ..before
            },
        }
    }
}

/// Single- or multi-stage adaptation followed by the final solve.
pub fn run_adaptation(problem: &Problem, cfg: &AdaptConfig, solver: &AdaptSolver, rec: &mut Recorder) -> Result<AdaptOutcome> {
    cfg.validate()?;
    let stages = cfg.stage_orders();
    let ne = problem.mesh.n_elements();
    let est = EstimateConfig {
        tau_max: cfg.tau_max,
        isolated: cfg.isolated,
    };
    let estimation_tol = cfg.tau_max / 10.0;
    let mut orders = OrderField::uniform(ne, [stages[0], stages[0]]);
    let mut q = {
        let mg = MgConfig {
            final_tol: estimation_tol,
            ..solver.before
        };
        fmg_solve(problem, &orders, &mg, None, rec)?.0
    };
    let mut merged: Option<TauMap> = None;
    let mut reports = Vec::new();
    let mut tau_maps = Vec::new();
    let mut stage_orders = Vec::new();
    for (i, &p) in stages.iter().enumerate() {
        if i > 0 {
            solve_on(problem, &orders, &mut q, &solver.after, estimation_tol, rec)?;
        }
        let mg = if i == 0 { &solver.before } else { &solver.after };
        let (map, q_est) = estimate(problem, &orders, &q, &est, mg, rec)?;
        q = q_est;
        let map_all = match merged.take() {
            Some(old) => merge_maps(&old, &map),
            None => map.clone(),
        };
        tau_maps.push(map);
        let cap = stages.get(i + 1).copied().unwrap_or(cfg.n_max);
        let (selected, mut decisions) = select_orders(&map_all, &orders, cfg, cap)?;
        let new = finalize_orders(&problem.mesh, &selected, cfg)?;
        for d in &mut decisions {
            d.new = new.get(d.element);
            let v = map_all.element(d.element).combined(d.new).0;
            d.predicted_tau = v.is_finite().then_some(v);
        }
        let capped = decisions.iter().any(|d| d.path == Decision::StageCapped);
        reports.push(AdaptationReport {
            stage: i + 1,
            reference: p,
            cap,
            tau_max: cfg.tau_max,
            dofs_before: orders.dofs(),
            dofs_after: new.dofs(),
            elements: decisions,
        });
        q = q.transfer_to(&new);
        orders = new;
        stage_orders.push(orders.clone());
        merged = Some(map_all);
        if !capped {
            break;
        }
    }
    let residual = solve_on(problem, &orders, &mut q, &solver.after, solver.after.final_tol, rec)?;
    Ok(AdaptOutcome {
        orders,
        solution: q,
        residual,
        reports,
        tau_maps,
        stage_orders,
    })
}

/// One adaptation at reference order `p`.
pub fn run_single_stage(
    problem: &Problem,
    p: usize,
    cfg: &AdaptConfig,
    solver: &AdaptSolver,
    rec: &mut Recorder,
) -> Result<AdaptOutcome> {
    let cfg = AdaptConfig {
        stages: Vec::new(),
        reference: p,
        ..cfg.clone()
    };
    run_adaptation(problem, &cfg, solver, rec)
}
