//! Quick invariant suite on tiny meshes.

use dgtau_core::adaptation::{conforming_pass, limit_jumps, JumpRule};
use dgtau_core::dg::{NodalField, OrderField, Problem};
use dgtau_core::mesh::{bent_pair, build_cartesian, Rectangle};
use dgtau_core::multigrid::{CoarseningMode, CoarseningRule, Hierarchy, Recorder, SmootherConfig, VCycle};
use dgtau_core::physics::{advdiff_constant, advdiff_sine};
use dgtau_core::tau::Fit;
use dgtau_core::time::CflConfig;
use dgtau_core::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, value: f64, bound: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value <= bound,
        detail: format!("{value:.3e} <= {bound:.0e}"),
    }
}

fn free_stream() -> Result<CheckResult> {
    let p = Problem::new(bent_pair()?, advdiff_constant());
    let mut worst: f64 = 0.0;
    for orders in [[2, 2], [3, 5], [6, 6]] {
        let op = p.operator(OrderField::uniform(2, orders), 1)?;
        let f = op.weighted(&op.apply(&op.sample(|_| 1.5))?);
        worst = worst.max(f.max_norm());
    }
    Ok(outcome("free-stream on curved pair", worst, 1e-12))
}

fn fixed_point() -> Result<CheckResult> {
    let mesh = build_cartesian(2, 2, Rectangle::UNIT, None)?;
    let p = Problem::new(mesh, advdiff_sine());
    let orders = OrderField::new(vec![[3, 3], [4, 2], [2, 4], [3, 3]]);
    let h = Hierarchy::build(&p, &orders, CoarseningMode::Isotropic, CoarseningRule::HighOrder)?;
    let op = h.finest();
    let q0 = op.sample(|x| (3.0 * x[0]).sin() * x[1]);
    let s = op.apply(&q0)?;
    let mut q = q0.clone();
    let smoother = SmootherConfig {
        pre_sweeps: 5,
        post_sweeps: 5,
        coarsest_sweeps: 10,
        max_batches: 1,
        ..SmootherConfig::default()
    };
    let mut rec = Recorder::new(&p, orders.dofs());
    VCycle::new(&h, smoother, CflConfig::default()).run(&mut q, &s, &mut rec)?;
    Ok(outcome("FAS fixed point", q.difference(&q0).max_norm(), 1e-10))
}

fn transfer_embedding() -> CheckResult {
    let low = OrderField::new(vec![[2, 3], [1, 1]]);
    let high = OrderField::new(vec![[5, 4], [3, 6]]);
    let values = vec![(0..12).map(|k| (k as f64 * 0.7).cos()).collect(), vec![1.0, -2.0, 0.5, 3.0]];
    let q = NodalField::from_elements(&low, values).expect("sizes match");
    let back = q.transfer_to(&high).transfer_to(&low);
    outcome("order-raising transfer is exact", back.difference(&q).max_norm(), 1e-13)
}

fn geometric_fit() -> CheckResult {
    let points: Vec<(usize, f64)> = (1..6).map(|n| (n, 3.0 * 10f64.powi(-(n as i32)))).collect();
    let fit = Fit::from_points(&points);
    let err = (fit.evaluate(9) / 3e-9 - 1.0).abs();
    outcome("geometric extrapolation", err, 1e-12)
}

fn jump_passes() -> Result<CheckResult> {
    let mesh = build_cartesian(4, 3, Rectangle::UNIT, None)?;
    let orders = OrderField::new((0..12).map(|e| [(e * 7 + 3) % 9 + 1, (e * 5 + 1) % 8 + 1]).collect());
    let mut worst = 0usize;
    for rule in [JumpRule::StrictOne, JumpRule::Softened] {
        let once = limit_jumps(&mesh, &orders, rule);
        let twice = limit_jumps(&mesh, &once, rule);
        let conf = conforming_pass(&mesh, &once, &["south".to_string()], rule)?;
        let conf2 = conforming_pass(&mesh, &conf, &["south".to_string()], rule)?;
        let lowered = (0..12).any(|e| (0..2).any(|d| once.get(e)[d] < orders.get(e)[d]));
        worst += usize::from(once != twice) + usize::from(conf != conf2) + usize::from(lowered);
    }
    Ok(CheckResult {
        name: "jump limiting idempotent and monotone",
        passed: worst == 0,
        detail: format!("{worst} violations"),
    })
}

pub fn run_checks() -> Vec<CheckResult> {
    let lift = |name: &'static str, r: Result<CheckResult>| {
        r.unwrap_or_else(|e| CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        })
    };
    vec![
        lift("free-stream on curved pair", free_stream()),
        lift("FAS fixed point", fixed_point()),
        transfer_embedding(),
        geometric_fit(),
        lift("jump limiting idempotent and monotone", jump_passes()),
    ]
}
