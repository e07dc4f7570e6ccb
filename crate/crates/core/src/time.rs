//! Williamson low-storage RK3 pseudo-time stepping.

use serde::{Deserialize, Serialize};

use crate::dg::{NodalField, SpatialOperator};
use crate::error::{Error, Result};

/// Williamson's 2N-storage third-order coefficients.
pub const RK3_A: [f64; 3] = [0.0, -5.0 / 9.0, -153.0 / 128.0];
pub const RK3_B: [f64; 3] = [1.0 / 3.0, 15.0 / 16.0, 8.0 / 15.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    /// One step size for the whole mesh, the most restrictive one.
    #[default]
    GlobalMin,
    /// Each element marches with its own limit.
    ElementLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CflConfig {
    pub advective: f64,
    pub viscous: f64,
    pub mode: StepMode,
}

impl Default for CflConfig {
    fn default() -> Self {
        Self {
            advective: 0.4,
            viscous: 0.2,
            mode: StepMode::GlobalMin,
        }
    }
}

impl CflConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.advective > 0.0 && self.viscous > 0.0) {
            return Err(Error::InvalidInput(format!(
                "CFL constants must be positive, got {} and {}",
                self.advective, self.viscous
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeStep {
    Global(f64),
    PerElement(Vec<f64>),
}

impl TimeStep {
    #[inline]
    pub fn for_element(&self, e: usize) -> f64 {
        match self {
            TimeStep::Global(dt) => *dt,
            TimeStep::PerElement(v) => v[e],
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            TimeStep::Global(dt) => *dt,
            TimeStep::PerElement(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

pub const MIN_CFL_ORDER: usize = 2;

/// Per-direction limits `C_a h / (S N^2)` and `C_nu h^2 / (mu N^4)` for one
/// element, minimised over both directions. Orders below
/// [`MIN_CFL_ORDER`] use that order: the bare formula is unstable at N = 1.
pub fn element_dt(size: [f64; 2], order: [usize; 2], speed: f64, mu: f64, cfl: &CflConfig) -> f64 {
    let mut dt = f64::INFINITY;
    for d in 0..2 {
        let n = order[d].max(MIN_CFL_ORDER) as f64;
        let h = size[d];
        if speed > 0.0 {
            dt = dt.min(cfl.advective * h / (speed * n * n));
        }
        if mu > 0.0 {
            dt = dt.min(cfl.viscous * h * h / (mu * n.powi(4)));
        }
    }
    dt
}

pub fn compute_dt(op: &SpatialOperator, q: &NodalField, cfl: &CflConfig) -> Result<TimeStep> {
    let disc = op.discretization();
    let law = &*op.problem().case.law;
    let mu = law.viscosity();
    let mut per = Vec::with_capacity(disc.n_elements());
    for e in 0..disc.n_elements() {
        let speed = q
            .element(e)
            .iter()
            .map(|&v| law.max_wave_speed(v))
            .fold(0.0, f64::max);
        let g = disc.element(e);
        let dt = element_dt(g.size, g.order, speed, mu, cfl);
        if !dt.is_finite() {
            return Err(Error::NoTimeScale);
        }
        per.push(dt);
    }
    Ok(match cfl.mode {
        StepMode::GlobalMin => TimeStep::Global(per.iter().copied().fold(f64::INFINITY, f64::min)),
        StepMode::ElementLocal => TimeStep::PerElement(per),
    })
}

/// One RK3 step of `dQ/dt = S - A(Q)`. Returns the residual of the
/// incoming state, which the first stage computes anyway.
pub fn rk3_step(op: &SpatialOperator, q: &mut NodalField, s: &NodalField, dt: &TimeStep) -> Result<f64> {
    let mut g = op.zeros();
    let mut r0 = 0.0;
    for stage in 0..3 {
        let r = op.residual(q, s)?;
        if stage == 0 {
            r0 = r.max_norm();
        }
        for e in 0..q.n_elements() {
            let h = dt.for_element(e);
            let ge = g.element_mut(e);
            for (gv, rv) in ge.iter_mut().zip(r.element(e)) {
                *gv = RK3_A[stage] * *gv + h * rv;
            }
        }
        q.axpy(RK3_B[stage], &g);
    }
    Ok(r0)
}

/// `sweeps` RK3 steps with a fresh step size each sweep. Returns the
/// residual norm before each sweep.
pub fn smooth(
    op: &SpatialOperator,
    q: &mut NodalField,
    s: &NodalField,
    sweeps: usize,
    cfl: &CflConfig,
) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let dt = compute_dt(op, q, cfl)?;
        history.push(rk3_step(op, q, s, &dt)?);
    }
    Ok(history)
}

/// Low-storage RK3 step for a plain ODE system `y' = f(y)`.
pub fn rk3_ode_step(mut f: impl FnMut(&[f64]) -> Vec<f64>, y: &mut [f64], dt: f64) {
    let mut g = vec![0.0; y.len()];
    for stage in 0..3 {
        let rhs = f(y);
        for ((gv, yv), r) in g.iter_mut().zip(y.iter_mut()).zip(rhs) {
            *gv = RK3_A[stage] * *gv + dt * r;
            *yv += RK3_B[stage] * *gv;
        }
    }
}

/// Outcome of plain pseudo-time marching to a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct MarchResult {
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
    /// `(sweep, residual)` every `log_every` sweeps.
    pub history: Vec<(usize, f64)>,
}

/// Marches until `||S - A(Q)||_inf <= tol` or `max_sweeps`. The residual
/// is read off the first stage of each step, so the returned state has had
/// one step more than the recorded residual belongs to.
pub fn march_to_steady(
    op: &SpatialOperator,
    q: &mut NodalField,
    s: &NodalField,
    cfl: &CflConfig,
    tol: f64,
    max_sweeps: usize,
    log_every: usize,
) -> Result<MarchResult> {
    march_to_steady_with(op, q, s, cfl, tol, max_sweeps, log_every, |_, _| {})
}

/// [`march_to_steady`] that also hands every logged `(sweep, residual)`
/// pair to `on_log` as it happens.
#[allow(clippy::too_many_arguments)]
pub fn march_to_steady_with(
    op: &SpatialOperator,
    q: &mut NodalField,
    s: &NodalField,
    cfl: &CflConfig,
    tol: f64,
    max_sweeps: usize,
    log_every: usize,
    mut on_log: impl FnMut(usize, f64),
) -> Result<MarchResult> {
    let mut history = Vec::new();
    let mut log = |sweep: usize, r: f64, history: &mut Vec<(usize, f64)>| {
        history.push((sweep, r));
        on_log(sweep, r);
    };
    for sweep in 0..max_sweeps {
        let dt = compute_dt(op, q, cfl)?;
        let r = rk3_step(op, q, s, &dt)?;
        if r <= tol {
            log(sweep, r, &mut history);
            return Ok(MarchResult {
                sweeps: sweep + 1,
                residual: r,
                converged: true,
                history,
            });
        }
        if log_every > 0 && sweep % log_every == 0 {
            log(sweep, r, &mut history);
        }
    }
    let r = op.residual(q, s)?.max_norm();
    log(max_sweeps, r, &mut history);
    Ok(MarchResult {
        sweeps: max_sweeps,
        residual: r,
        converged: r <= tol,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::{OrderField, Problem};
    use crate::mesh::{build_cartesian, Rectangle};
    use crate::physics::{advection_diffusion, Constant, ManufacturedCase, Polynomial2D};

    fn unit_problem(velocity: [f64; 2], mu: f64) -> Problem {
        let case = ManufacturedCase::new("t", advection_diffusion(velocity, mu), Constant(0.0));
        Problem::new(build_cartesian(1, 1, Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }, None).unwrap(), case)
    }

    #[test]
    fn direct_formula_example() {
        let cfl = CflConfig { advective: 1.0, ..CflConfig::default() };
        assert_eq!(element_dt([1.0, 1.0], [4, 4], 1.0, 0.0, &cfl), 1.0 / 16.0);
        let p = unit_problem([1.0, 0.0], 0.0);
        let op = p.operator(OrderField::uniform(1, [4, 4]), 0).unwrap();
        assert_eq!(compute_dt(&op, &op.zeros(), &cfl).unwrap(), TimeStep::Global(1.0 / 16.0));
    }

    #[test]
    fn diffusive_limit_selected_when_smaller() {
        let cfl = CflConfig::default();
        let adv = cfl.advective * 1.0 / 16.0;
        let visc = cfl.viscous / (10.0 * 256.0);
        assert!(visc < adv);
        assert_eq!(element_dt([1.0, 1.0], [4, 4], 1.0, 10.0, &cfl), visc);
    }

    #[test]
    fn anisotropic_orders_use_higher_direction() {
        let cfl = CflConfig::default();
        let dt = element_dt([1.0, 1.0], [2, 8], 1.0, 0.0, &cfl);
        assert_eq!(dt, cfl.advective / 64.0);
        let dt = element_dt([1.0, 1.0], [2, 8], 0.0, 0.5, &cfl);
        assert_eq!(dt, cfl.viscous / (0.5 * 4096.0));
    }

    #[test]
    fn homogeneous_in_element_size() {
        let cfl = CflConfig::default();
        let a1 = element_dt([0.3, 0.3], [3, 3], 2.0, 0.0, &cfl);
        let a2 = element_dt([0.6, 0.6], [3, 3], 2.0, 0.0, &cfl);
        assert!((a2 / a1 - 2.0).abs() < 1e-14);
        let v1 = element_dt([0.3, 0.3], [3, 3], 0.0, 0.1, &cfl);
        let v2 = element_dt([0.6, 0.6], [3, 3], 0.0, 0.1, &cfl);
        assert!((v2 / v1 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn no_time_scale_is_an_error() {
        let p = unit_problem([0.0, 0.0], 0.0);
        let op = p.operator(OrderField::uniform(1, [2, 2]), 0).unwrap();
        assert_eq!(compute_dt(&op, &op.zeros(), &CflConfig::default()), Err(Error::NoTimeScale));
    }

    #[test]
    fn stability_polynomial() {
        for z in [-0.1, -0.5, 0.3, -1.2] {
            let mut y = [1.0];
            rk3_ode_step(|y| vec![z * y[0]], &mut y, 1.0);
            let expect = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
            assert!((y[0] - expect).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn third_order_convergence() {
        let lambda = -1.3;
        let t_end = 1.0;
        let errs: Vec<f64> = [10, 20, 40, 80]
            .iter()
            .map(|&n| {
                let dt = t_end / n as f64;
                let mut y = [1.0];
                for _ in 0..n {
                    rk3_ode_step(|y| vec![lambda * y[0]], &mut y, dt);
                }
                (y[0] - (lambda * t_end).exp()).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1] - 8.0).abs() < 0.5, "{errs:?}");
        }
        // Least-squares slope of log error against log dt.
        let xs: Vec<f64> = [10.0f64, 20.0, 40.0, 80.0].iter().map(|n| (1.0 / n).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 3.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn fixed_point_is_preserved() {
        let p = unit_problem([1.0, 0.5], 0.1);
        let op = p.operator(OrderField::uniform(1, [3, 3]), 0).unwrap();
        let mut q = op.zeros();
        for (k, v) in q.values_mut().iter_mut().enumerate() {
            *v = (k as f64 * 0.37).cos();
        }
        let s = op.apply(&q).unwrap();
        let before = q.clone();
        smooth(&op, &mut q, &s, 3, &CflConfig::default()).unwrap();
        assert!(q.difference(&before).max_norm() < 1e-14);
        assert!(smooth(&op, &mut q, &s, 0, &CflConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn single_element_advection_converges() {
        let case = ManufacturedCase::new(
            "p",
            advection_diffusion([1.0, 0.6], 0.0),
            Polynomial2D { coeffs: vec![vec![0.2, 1.0], vec![0.5, -0.3], vec![0.1]] },
        );
        let p = Problem::new(build_cartesian(1, 1, Rectangle::UNIT, None).unwrap(), case);
        let op = p.operator(OrderField::uniform(1, [3, 3]), 0).unwrap();
        let mut q = op.zeros();
        let s = op.source().clone();
        let out = march_to_steady(&op, &mut q, &s, &CflConfig::default(), 1e-10, 500, 100).unwrap();
        assert!(out.converged, "{out:?}");
        assert!(out.sweeps <= 500);
        assert!(op.residual(&q, &s).unwrap().max_norm() <= 1e-10);
    }

    #[test]
    fn element_local_steps_reach_the_same_state() {
        let case = ManufacturedCase::new(
            "p",
            advection_diffusion([1.0, 0.6], 0.05),
            Polynomial2D { coeffs: vec![vec![0.2, 1.0], vec![0.5, -0.3]] },
        );
        let mesh = build_cartesian(3, 1, Rectangle::UNIT, None).unwrap();
        let p = Problem::new(mesh, case);
        let op = p.operator(OrderField::new(vec![[2, 2], [4, 3], [1, 2]]), 0).unwrap();
        let s = op.source().clone();
        let mut a = op.zeros();
        let mut b = op.zeros();
        let local = CflConfig { mode: StepMode::ElementLocal, ..CflConfig::default() };
        march_to_steady(&op, &mut a, &s, &CflConfig::default(), 1e-11, 20000, 0).unwrap();
        march_to_steady(&op, &mut b, &s, &local, 1e-11, 20000, 0).unwrap();
        assert!(a.difference(&b).max_norm() < 1e-8);
    }
}
