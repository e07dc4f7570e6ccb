//! Truncation error estimation.
//!
//! Estimates are quasi a-priori: a partially converged fine solution on the
//! reference orders `P` is restricted during one anisotropic V-cycle per
//! direction, and at each coarse order the coarse residual of the
//! restricted state is recorded. The weak-form truncation error
//! `M S - F(Q)` (with `F = M A`) is reduced to one scalar per element by
//! the infinity norm of its nodal values `S - A(Q)`, the same norm the
//! residual is measured in.

use serde::{Deserialize, Serialize};

use crate::dg::{NodalField, OrderField, Problem, SpatialOperator};
use crate::error::{Error, Result};
use crate::multigrid::{CoarseningMode, CoarseningRule, Hierarchy, LevelObserver, MgConfig, Recorder, VCycle};

pub const NORM_NAME: &str = "nodal-max";

/// Least-squares line through `log10(tau)` against order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square misfit in decades.
    pub residual: f64,
    pub points: usize,
    /// False when the data do not decay; extrapolated values are then
    /// infinite.
    pub spectral: bool,
}

impl Fit {
    pub fn from_points(points: &[(usize, f64)]) -> Fit {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .filter(|(_, t)| *t > 0.0 && t.is_finite())
            .map(|&(n, t)| (n as f64, t.log10()))
            .collect();
        let m = pts.len();
        if m < 2 {
            return Fit {
                slope: 0.0,
                intercept: 0.0,
                residual: 0.0,
                points: m,
                spectral: false,
            };
        }
        let mf = m as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / mf;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / mf).sqrt();
        Fit {
            slope,
            intercept,
            residual,
            points: m,
            spectral: slope < 0.0,
        }
    }

    pub fn evaluate(&self, n: usize) -> f64 {
        if self.spectral {
            10f64.powf(self.intercept + self.slope * n as f64)
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Inner,
    Extrapolated,
}

/// Directional estimates of one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementTau {
    pub element: usize,
    pub reference: [usize; 2],
    /// `directional[d][k]` is the estimate at order `N_MIN + k` in
    /// direction `d`, for orders below the reference.
    pub directional: [Vec<f64>; 2],
    pub fits: [Fit; 2],
}

/// Lowest order that is estimated.
pub const N_MIN: usize = 1;

impl ElementTau {
    pub fn new(element: usize, reference: [usize; 2], directional: [Vec<f64>; 2]) -> Self {
        let fits = [0, 1].map(|d| {
            let pts: Vec<(usize, f64)> = directional[d].iter().enumerate().map(|(k, &t)| (N_MIN + k, t)).collect();
            Fit::from_points(&pts)
        });
        Self {
            element,
            reference,
            directional,
            fits,
        }
    }

    /// Directional value at order `n`: measured below the reference,
    /// extrapolated at or above it.
    pub fn directional_at(&self, d: usize, n: usize) -> (f64, Region) {
        if n < self.reference[d] && n >= N_MIN {
            (self.directional[d][n - N_MIN], Region::Inner)
        } else {
            (self.fits[d].evaluate(n), Region::Extrapolated)
        }
    }

    /// Combined estimate as the sum of the directional parts.
    pub fn combined(&self, n: [usize; 2]) -> (f64, Region) {
        let (a, ra) = self.directional_at(0, n[0]);
        let (b, rb) = self.directional_at(1, n[1]);
        let region = if ra == Region::Inner && rb == Region::Inner {
            Region::Inner
        } else {
            Region::Extrapolated
        };
        (a + b, region)
    }

    /// `tau[n1 - N_MIN][n2 - N_MIN]` over the inner orders.
    pub fn inner_map(&self) -> Vec<Vec<f64>> {
        assemble_inner_map(&self.directional[0], &self.directional[1])
    }
}

/// Inner map from directional arrays: `tau[i][j] = tau1[i] + tau2[j]`.
pub fn assemble_inner_map(tau1: &[f64], tau2: &[f64]) -> Vec<Vec<f64>> {
    tau1.iter().map(|a| tau2.iter().map(|b| a + b).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMap {
    pub isolated: bool,
    pub norm: String,
    /// Fine residual when the estimate was taken.
    pub residual: f64,
    pub threshold: f64,
    pub elements: Vec<ElementTau>,
}

impl TauMap {
    pub fn element(&self, e: usize) -> &ElementTau {
        &self.elements[e]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub tau_max: f64,
    pub isolated: bool,
}

struct DirectionalObserver<'a> {
    direction: usize,
    reference: &'a OrderField,
    isolated: bool,
    values: Vec<Vec<Option<f64>>>,
}

impl LevelObserver for DirectionalObserver<'_> {
    fn on_descent(&mut self, op: &SpatialOperator, q: &NodalField, a: &NodalField) -> Result<()> {
        let t = tau_field(op, q, Some(a), self.isolated)?;
        let d = self.direction;
        for e in 0..op.orders().len() {
            let n = op.orders().get(e)[d];
            let p = self.reference.get(e)[d];
            if n < p && n >= N_MIN {
                let slot = &mut self.values[e][n - N_MIN];
                if slot.is_none() {
                    *slot = Some(t.element_max_norm(e));
                }
            }
        }
        Ok(())
    }
}

/// Nodal values `M^-1 (M S - F(q)) = S - A(q)` on `op`'s orders, with `S`
/// the physical source. `a` may pass a precomputed `A(q)` for the
/// non-isolated variant.
pub fn tau_field(op: &SpatialOperator, q: &NodalField, a: Option<&NodalField>, isolated: bool) -> Result<NodalField> {
    let a = match (isolated, a) {
        (true, _) => op.apply_isolated(q)?,
        (false, Some(a)) => a.clone(),
        (false, None) => op.apply(q)?,
    };
    let mut d = op.source().clone();
    d.axpy(-1.0, &a);
    Ok(d)
}

/// Runs one anisotropic V-cycle per direction from `q` and returns the
/// directional map together with the state after both cycles.
///
/// Refuses when the fine residual exceeds `tau_max / 10`.
pub fn estimate(
    problem: &Problem,
    reference: &OrderField,
    q: &NodalField,
    cfg: &EstimateConfig,
    mg: &MgConfig,
    rec: &mut Recorder,
) -> Result<(TauMap, NodalField)> {
    let fine = problem.operator(reference.clone(), 0)?;
    let s = fine.source().clone();
    let residual = fine.residual(q, &s)?.max_norm();
    let threshold = cfg.tau_max / 10.0;
    if !(residual <= threshold) {
        return Err(Error::InsufficientConvergence { residual, threshold });
    }
    let mut q = q.clone();
    let mut per_dir: [Vec<Vec<Option<f64>>>; 2] = [Vec::new(), Vec::new()];
    for d in 0..2 {
        let mut obs = DirectionalObserver {
            direction: d,
            reference,
            isolated: cfg.isolated,
            values: (0..reference.len())
                .map(|e| vec![None; reference.get(e)[d].saturating_sub(N_MIN)])
                .collect(),
        };
        // High-order coarsening visits every lower order of every element
        // exactly once.
        let h = Hierarchy::build(problem, reference, CoarseningMode::Anisotropic(d), CoarseningRule::HighOrder)?;
        if h.n_levels() > 1 {
            rec.cycle += 1;
            VCycle::new(&h, mg.smoother, mg.cfl).run_observed(&mut q, &s, rec, &mut obs)?;
        }
        per_dir[d] = obs.values;
    }
    let elements = (0..reference.len())
        .map(|e| {
            let dirs = [0, 1].map(|d| {
                per_dir[d][e]
                    .iter()
                    .map(|v| v.expect("every lower order is visited"))
                    .collect::<Vec<f64>>()
            });
            ElementTau::new(e, reference.get(e), dirs)
        })
        .collect();
    let map = TauMap {
        isolated: cfg.isolated,
        norm: NORM_NAME.to_string(),
        residual,
        threshold,
        elements,
    };
    Ok((map, q))
}

/// Estimate obtained by restricting `q` in both directions at once.
pub fn coupled_estimate(problem: &Problem, q: &NodalField, orders: &OrderField, isolated: bool) -> Result<Vec<f64>> {
    let op = problem.operator(orders.clone(), 0)?;
    let qc = q.transfer_to(orders);
    let t = tau_field(&op, &qc, None, isolated)?;
    Ok((0..orders.len()).map(|e| t.element_max_norm(e)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactTau {
    pub tau: Vec<f64>,
    pub isolated: Vec<f64>,
}

/// Truncation error of the sampled exact solution on `orders`.
pub fn exact_tau(problem: &Problem, orders: &OrderField) -> Result<ExactTau> {
    let op = problem.operator(orders.clone(), 0)?;
    let q = op.exact_solution();
    let full = tau_field(&op, &q, None, false)?;
    let iso = tau_field(&op, &q, None, true)?;
    let n = orders.len();
    Ok(ExactTau {
        tau: (0..n).map(|e| full.element_max_norm(e)).collect(),
        isolated: (0..n).map(|e| iso.element_max_norm(e)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, Rectangle};
    use crate::multigrid::fmg_solve;
    use crate::physics::{advdiff_sine, burgers_tanh, ManufacturedCase, Polynomial2D};
    use proptest::prelude::*;

    #[test]
    fn inner_map_is_a_direct_sum() {
        let m = assemble_inner_map(&[4.0, 2.0], &[6.0, 1.0]);
        assert_eq!(m, vec![vec![10.0, 5.0], vec![8.0, 3.0]]);
    }

    #[test]
    fn geometric_sequence_extrapolates_exactly() {
        let e = ElementTau::new(0, [4, 4], [vec![1e-1, 1e-2, 1e-3], vec![1e-1, 1e-2, 1e-3]]);
        for (n, expect) in [(4, 1e-4), (5, 1e-5), (8, 1e-8)] {
            let (v, region) = e.directional_at(0, n);
            assert_eq!(region, Region::Extrapolated);
            assert!((v / expect - 1.0).abs() < 1e-12, "n={n}: {v}");
        }
        assert!(e.fits[0].residual < 1e-12);
        let (v, region) = e.combined([2, 5]);
        assert_eq!(region, Region::Extrapolated);
        assert!((v - (1e-2 + 1e-5)).abs() < 1e-15);
        assert_eq!(e.combined([3, 3]).1, Region::Inner);
    }

    #[test]
    fn two_point_fit_matches_example() {
        let f = Fit::from_points(&[(2, 1e-2), (3, 1e-3)]);
        assert!((f.evaluate(4) / 1e-4 - 1.0).abs() < 1e-12);
        assert!((f.evaluate(5) / 1e-5 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_or_short_data_is_non_spectral() {
        let f = Fit::from_points(&[(1, 1e-3), (2, 1e-3), (3, 1e-3)]);
        assert!(!f.spectral);
        assert_eq!(f.evaluate(6), f64::INFINITY);
        assert!(!Fit::from_points(&[(1, 1e-3)]).spectral);
        assert!(!Fit::from_points(&[(1, 1e-3), (2, 0.0)]).spectral);
    }

    proptest! {
        #[test]
        fn inner_entries_dominate_their_parts(
            t1 in proptest::collection::vec(0.0f64..1.0, 1..7),
            t2 in proptest::collection::vec(0.0f64..1.0, 1..7),
        ) {
            let m = assemble_inner_map(&t1, &t2);
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    prop_assert!(v >= t1[i].max(t2[j]));
                }
            }
            let sym = assemble_inner_map(&t1, &t1);
            for i in 0..t1.len() {
                for j in 0..t1.len() {
                    prop_assert_eq!(sym[i][j], sym[j][i]);
                }
            }
        }
    }

    fn problem(case: ManufacturedCase, n: usize) -> Problem {
        Problem::new(build_cartesian(n, n, Rectangle::UNIT, None).unwrap(), case)
    }

    #[test]
    fn representable_solution_has_no_truncation_error() {
        let mut coeffs = vec![vec![0.0; 3]; 3];
        coeffs[0][0] = 0.5;
        coeffs[1][1] = 1.0;
        coeffs[2][0] = -0.3;
        coeffs[0][2] = 0.7;
        let law = crate::physics::advection_diffusion([1.0, 0.5], 0.1);
        let case = ManufacturedCase::new("poly", law, Polynomial2D { coeffs });
        let p = problem(case, 2);
        let t = exact_tau(&p, &OrderField::uniform(4, [3, 4])).unwrap();
        assert!(t.tau.iter().chain(&t.isolated).all(|&v| v <= 1e-11), "{t:?}");
    }

    #[test]
    fn exact_isolated_tau_decays_spectrally() {
        let p = problem(advdiff_sine(), 2);
        let pts: Vec<(usize, f64)> = (2..=7)
            .map(|n| (n, exact_tau(&p, &OrderField::uniform(4, [n, n])).unwrap().isolated[0]))
            .collect();
        let fit = Fit::from_points(&pts);
        assert!(fit.slope < -0.3, "{fit:?}");
        assert!(fit.residual < 0.3, "{fit:?}");
    }

    #[test]
    fn isolated_tau_ignores_neighbour_orders() {
        let p = problem(burgers_tanh(), 2);
        let a = exact_tau(&p, &OrderField::new(vec![[4, 4], [2, 5], [3, 3], [6, 2]])).unwrap();
        let b = exact_tau(&p, &OrderField::new(vec![[4, 4], [5, 1], [1, 2], [3, 3]])).unwrap();
        assert_eq!(a.isolated[0], b.isolated[0]);
    }

    #[test]
    fn injected_discrete_solution_has_zero_tau_at_reference() {
        let p = problem(advdiff_sine(), 2);
        let orders = OrderField::uniform(4, [4, 4]);
        let mg = MgConfig {
            final_tol: 1e-13,
            ..MgConfig::default()
        };
        let mut rec = Recorder::new(&p, orders.dofs());
        let (q, _) = fmg_solve(&p, &orders, &mg, None, &mut rec).unwrap();
        let t = coupled_estimate(&p, &q, &orders, false).unwrap();
        assert!(t.iter().all(|&v| v <= 1e-13), "{t:?}");
    }

    fn converged(p: &Problem, orders: &OrderField, tol: f64) -> (NodalField, MgConfig, Recorder) {
        let mg = MgConfig {
            final_tol: tol,
            ..MgConfig::default()
        };
        let mut rec = Recorder::new(p, orders.dofs());
        let (q, _) = fmg_solve(p, orders, &mg, None, &mut rec).unwrap();
        (q, mg, rec)
    }

    #[test]
    fn estimation_refuses_unconverged_solutions() {
        let p = problem(advdiff_sine(), 2);
        let orders = OrderField::uniform(4, [3, 3]);
        let op = p.operator(orders.clone(), 0).unwrap();
        let mut rec = Recorder::new(&p, orders.dofs());
        let cfg = EstimateConfig {
            tau_max: 1e-6,
            isolated: true,
        };
        let err = estimate(&p, &orders, &op.zeros(), &cfg, &MgConfig::default(), &mut rec).unwrap_err();
        assert!(matches!(err, Error::InsufficientConvergence { .. }));
    }

    #[test]
    fn estimation_is_repeatable_and_adds_no_full_evaluations() {
        let p = problem(burgers_tanh(), 2);
        let orders = OrderField::new(vec![[4, 3], [3, 4], [4, 4], [2, 3]]);
        let (q, mg, mut rec) = converged(&p, &orders, 1e-8);
        let cfg = EstimateConfig {
            tau_max: 1e-6,
            isolated: true,
        };
        let before = p.work.snapshot();
        let (a, qa) = estimate(&p, &orders, &q, &cfg, &mg, &mut rec).unwrap();
        let mid = p.work.snapshot();
        let (b, qb) = estimate(&p, &orders, &q, &cfg, &mg, &mut rec).unwrap();
        assert_eq!(a, b);
        assert_eq!(qa, qb);
        for e in 0..orders.len() {
            for d in 0..2 {
                assert_eq!(a.element(e).directional[d].len(), orders.get(e)[d] - 1);
                assert!(a.element(e).directional[d].iter().all(|&t| t >= 0.0));
            }
        }

        // The same two cycles without an observer, plus the residual check.
        let fine = p.operator(orders.clone(), 0).unwrap();
        let s = fine.source().clone();
        let plain_start = p.work.snapshot();
        fine.residual(&q, &s).unwrap();
        let mut qp = q.clone();
        for d in 0..2 {
            let h = Hierarchy::build(&p, &orders, CoarseningMode::Anisotropic(d), CoarseningRule::HighOrder).unwrap();
            VCycle::new(&h, mg.smoother, mg.cfl).run(&mut qp, &s, &mut rec).unwrap();
        }
        let plain = p.work.snapshot().since(&plain_start);
        let est = mid.since(&before);
        assert_eq!(est.full_calls, plain.full_calls);
        assert_eq!(est.full_node_evals, plain.full_node_evals);
        assert_eq!(qp, qa);
    }
}
