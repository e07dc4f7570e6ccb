//! Scalar conservation laws `q_t + div(f_a(q) - mu grad q) = s` and the
//! manufactured solutions that drive them.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use crate::mesh::Point;

pub trait ConservationLaw: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of conserved variables. Both shipped laws are scalar.
    fn n_vars(&self) -> usize {
        1
    }

    fn advective_flux(&self, q: f64) -> Point;

    /// `d f_a / d q`.
    fn flux_jacobian(&self, q: f64) -> Point;

    fn viscosity(&self) -> f64;

    /// Upwind-type advective flux normal to the unit vector `n`.
    fn numerical_flux(&self, ql: f64, qr: f64, n: Point) -> f64;

    fn max_wave_speed(&self, q: f64) -> f64 {
        let a = self.flux_jacobian(q);
        a[0].hypot(a[1])
    }

    /// True when `f_a` is linear in `q`.
    fn is_linear(&self) -> bool;
}

#[inline]
fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvectionDiffusion {
    pub velocity: Point,
    pub mu: f64,
}

pub fn advection_diffusion(velocity: Point, mu: f64) -> AdvectionDiffusion {
    assert!(mu >= 0.0, "viscosity must be non-negative");
    AdvectionDiffusion { velocity, mu }
}

impl ConservationLaw for AdvectionDiffusion {
    fn name(&self) -> &'static str {
        "advection-diffusion"
    }

    fn advective_flux(&self, q: f64) -> Point {
        [self.velocity[0] * q, self.velocity[1] * q]
    }

    fn flux_jacobian(&self, _q: f64) -> Point {
        self.velocity
    }

    fn viscosity(&self) -> f64 {
        self.mu
    }

    fn numerical_flux(&self, ql: f64, qr: f64, n: Point) -> f64 {
        let an = dot(self.velocity, n);
        if an >= 0.0 {
            an * ql
        } else {
            an * qr
        }
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// `f_a = (q^2/2, q^2/2)` with a Rusanov flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscousBurgers {
    pub mu: f64,
}

pub fn viscous_burgers(mu: f64) -> ViscousBurgers {
    assert!(mu > 0.0, "viscous Burgers needs a positive viscosity");
    ViscousBurgers { mu }
}

impl ConservationLaw for ViscousBurgers {
    fn name(&self) -> &'static str {
        "viscous-burgers"
    }

    fn advective_flux(&self, q: f64) -> Point {
        let f = 0.5 * q * q;
        [f, f]
    }

    fn flux_jacobian(&self, q: f64) -> Point {
        [q, q]
    }

    fn viscosity(&self) -> f64 {
        self.mu
    }

    fn numerical_flux(&self, ql: f64, qr: f64, n: Point) -> f64 {
        let fl = dot(self.advective_flux(ql), n);
        let fr = dot(self.advective_flux(qr), n);
        let sn = n[0] + n[1];
        let lambda = (ql * sn).abs().max((qr * sn).abs());
        0.5 * (fl + fr) - 0.5 * lambda * (qr - ql)
    }

    fn is_linear(&self) -> bool {
        false
    }
}

/// Smooth steady solution with hand-coded derivatives.
pub trait ExactSolution: Debug + Send + Sync {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> Point;
    fn laplacian(&self, p: Point) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl ExactSolution for Constant {
    fn value(&self, _p: Point) -> f64 {
        self.0
    }
    fn gradient(&self, _p: Point) -> Point {
        [0.0, 0.0]
    }
    fn laplacian(&self, _p: Point) -> f64 {
        0.0
    }
}

/// `amplitude * sin(pi x) sin(pi y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineProduct {
    pub amplitude: f64,
}

impl ExactSolution for SineProduct {
    fn value(&self, p: Point) -> f64 {
        self.amplitude * (PI * p[0]).sin() * (PI * p[1]).sin()
    }
    fn gradient(&self, p: Point) -> Point {
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [self.amplitude * PI * cx * sy, self.amplitude * PI * sx * cy]
    }
    fn laplacian(&self, p: Point) -> f64 {
        -2.0 * PI * PI * self.value(p)
    }
}

/// `base + amplitude * tanh((x + y - offset) / width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhFront {
    pub base: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub width: f64,
}

impl ExactSolution for TanhFront {
    fn value(&self, p: Point) -> f64 {
        self.base + self.amplitude * ((p[0] + p[1] - self.offset) / self.width).tanh()
    }
    fn gradient(&self, p: Point) -> Point {
        let t = ((p[0] + p[1] - self.offset) / self.width).tanh();
        let d = self.amplitude * (1.0 - t * t) / self.width;
        [d, d]
    }
    fn laplacian(&self, p: Point) -> f64 {
        let t = ((p[0] + p[1] - self.offset) / self.width).tanh();
        let d2 = -2.0 * self.amplitude * t * (1.0 - t * t) / (self.width * self.width);
        2.0 * d2
    }
}

/// `(1 - exp(-y / thickness)) * (1 + amplitude * sin(pi x))`: a layer
/// against the wall `y = 0` with a gentle streamwise modulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallLayer {
    pub thickness: f64,
    pub amplitude: f64,
}

impl WallLayer {
    fn parts(&self, p: Point) -> ([f64; 3], [f64; 3]) {
        let e = (-p[1] / self.thickness).exp();
        let d = self.thickness;
        let layer = [1.0 - e, e / d, -e / (d * d)];
        let (s, c) = (PI * p[0]).sin_cos();
        let stream = [
            1.0 + self.amplitude * s,
            self.amplitude * PI * c,
            -self.amplitude * PI * PI * s,
        ];
        (stream, layer)
    }
}

impl ExactSolution for WallLayer {
    fn value(&self, p: Point) -> f64 {
        let (g, h) = self.parts(p);
        g[0] * h[0]
    }
    fn gradient(&self, p: Point) -> Point {
        let (g, h) = self.parts(p);
        [g[1] * h[0], g[0] * h[1]]
    }
    fn laplacian(&self, p: Point) -> f64 {
        let (g, h) = self.parts(p);
        g[2] * h[0] + g[0] * h[2]
    }
}

/// `sum c[a][b] x^a y^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial2D {
    pub coeffs: Vec<Vec<f64>>,
}

impl Polynomial2D {
    fn eval(&self, p: Point, dx: u32, dy: u32) -> f64 {
        let falling = |k: usize, d: u32| -> f64 {
            (0..d).map(|m| k as f64 - m as f64).product::<f64>()
        };
        let mut total = 0.0;
        for (a, row) in self.coeffs.iter().enumerate() {
            if (a as u32) < dx {
                continue;
            }
            for (b, &c) in row.iter().enumerate() {
                if (b as u32) < dy || c == 0.0 {
                    continue;
                }
                total += c
                    * falling(a, dx)
                    * falling(b, dy)
                    * p[0].powi(a as i32 - dx as i32)
                    * p[1].powi(b as i32 - dy as i32);
            }
        }
        total
    }
}

impl ExactSolution for Polynomial2D {
    fn value(&self, p: Point) -> f64 {
        self.eval(p, 0, 0)
    }
    fn gradient(&self, p: Point) -> Point {
        [self.eval(p, 1, 0), self.eval(p, 0, 1)]
    }
    fn laplacian(&self, p: Point) -> f64 {
        self.eval(p, 2, 0) + self.eval(p, 0, 2)
    }
}

/// A conservation law paired with the exact steady solution it is forced
/// towards. The source makes `q` exact and the boundary ghost state is
/// `q` itself.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub law: Arc<dyn ConservationLaw>,
    pub exact: Arc<dyn ExactSolution>,
}

impl ManufacturedCase {
    pub fn new(
        name: impl Into<String>,
        law: impl ConservationLaw + 'static,
        exact: impl ExactSolution + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            law: Arc::new(law),
            exact: Arc::new(exact),
        }
    }

    /// `s = f_a'(q) . grad q - mu lap q`.
    pub fn source(&self, p: Point) -> f64 {
        let q = self.exact.value(p);
        dot(self.law.flux_jacobian(q), self.exact.gradient(p)) - self.law.viscosity() * self.exact.laplacian(p)
    }

    pub fn boundary_value(&self, p: Point) -> f64 {
        self.exact.value(p)
    }
}

/// Names accepted by [`case_by_name`].
pub const CASE_NAMES: &[&str] = &[
    "advdiff-sine",
    "burgers-tanh",
    "advdiff-boundary-layer",
    "advdiff-constant",
];

pub fn advdiff_sine() -> ManufacturedCase {
    ManufacturedCase::new(
        "advdiff-sine",
        advection_diffusion([1.0, 1.0], 0.1),
        SineProduct { amplitude: 1.0 },
    )
}

pub fn burgers_tanh() -> ManufacturedCase {
    ManufacturedCase::new(
        "burgers-tanh",
        viscous_burgers(0.05),
        TanhFront {
            base: 1.0,
            amplitude: 0.5,
            offset: 1.0,
            width: 0.25,
        },
    )
}

pub fn advdiff_boundary_layer() -> ManufacturedCase {
    ManufacturedCase::new(
        "advdiff-boundary-layer",
        advection_diffusion([1.0, 0.0], 0.01),
        WallLayer {
            thickness: 0.1,
            amplitude: 0.25,
        },
    )
}

pub fn advdiff_constant() -> ManufacturedCase {
    ManufacturedCase::new(
        "advdiff-constant",
        advection_diffusion([1.0, 0.5], 0.0),
        Constant(1.5),
    )
}

pub fn case_by_name(name: &str) -> Option<ManufacturedCase> {
    match name {
        "advdiff-sine" => Some(advdiff_sine()),
        "burgers-tanh" => Some(burgers_tanh()),
        "advdiff-boundary-layer" => Some(advdiff_boundary_layer()),
        "advdiff-constant" => Some(advdiff_constant()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_check(exact: &dyn ExactSolution, p: Point) {
        let h = 1e-4;
        let f = |x: f64, y: f64| exact.value([x, y]);
        let gx = (f(p[0] + h, p[1]) - f(p[0] - h, p[1])) / (2.0 * h);
        let gy = (f(p[0], p[1] + h) - f(p[0], p[1] - h)) / (2.0 * h);
        let lap = (f(p[0] + h, p[1]) + f(p[0] - h, p[1]) + f(p[0], p[1] + h) + f(p[0], p[1] - h)
            - 4.0 * f(p[0], p[1]))
            / (h * h);
        let g = exact.gradient(p);
        let scale = 1.0 + g[0].abs() + g[1].abs();
        assert!((g[0] - gx).abs() < 1e-6 * scale, "{exact:?} d/dx at {p:?}");
        assert!((g[1] - gy).abs() < 1e-6 * scale, "{exact:?} d/dy at {p:?}");
        let l = exact.laplacian(p);
        assert!((l - lap).abs() < 1e-3 * (1.0 + l.abs()), "{exact:?} laplacian at {p:?}: {l} vs {lap}");
    }

    #[test]
    fn hand_coded_derivatives_match_finite_differences() {
        let pts = [[0.13, 0.71], [0.5, 0.5], [0.9, 0.05], [0.33, 0.2]];
        let exacts: Vec<Box<dyn ExactSolution>> = vec![
            Box::new(SineProduct { amplitude: 1.3 }),
            Box::new(TanhFront { base: 1.0, amplitude: 0.5, offset: 1.0, width: 0.25 }),
            Box::new(WallLayer { thickness: 0.1, amplitude: 0.25 }),
            Box::new(Polynomial2D { coeffs: vec![vec![1.0, 2.0, 0.5], vec![-1.0, 0.0, 3.0], vec![0.7]] }),
            Box::new(Constant(2.0)),
        ];
        for e in &exacts {
            for p in pts {
                fd_check(e.as_ref(), p);
            }
        }
    }

    #[test]
    fn sine_source_matches_symbolic_form() {
        let case = advdiff_sine();
        for p in [[0.2, 0.3], [0.75, 0.1], [0.5, 0.5]] {
            let (sx, cx) = (PI * p[0]).sin_cos();
            let (sy, cy) = (PI * p[1]).sin_cos();
            let expect = PI * (cx * sy + sx * cy) + 2.0 * 0.1 * PI * PI * sx * sy;
            assert!((case.source(p) - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn burgers_source_matches_symbolic_form() {
        let case = burgers_tanh();
        let w: f64 = 0.25;
        for p in [[0.2, 0.3], [0.6, 0.5], [0.9, 0.9]] {
            let t = ((p[0] + p[1] - 1.0) / w).tanh();
            let q = 1.0 + 0.5 * t;
            let d = 0.5 * (1.0 - t * t) / w;
            let d2 = -2.0 * 0.5 * t * (1.0 - t * t) / (w * w);
            let expect = 2.0 * q * d - 0.05 * 2.0 * d2;
            assert!((case.source(p) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_state_has_no_source() {
        let case = ManufacturedCase::new("c", advection_diffusion([1.0, 0.0], 0.0), Constant(3.0));
        assert_eq!(case.source([0.3, 0.4]), 0.0);
    }

    #[test]
    fn pure_upwinding() {
        let law = advection_diffusion([1.0, 0.0], 0.0);
        assert_eq!(law.numerical_flux(2.0, 5.0, [1.0, 0.0]), 2.0);
        assert_eq!(law.numerical_flux(2.0, 5.0, [-1.0, 0.0]), -5.0);
    }

    #[test]
    fn burgers_rusanov_reduces_to_max_speed_on_axis_normals() {
        let law = viscous_burgers(0.1);
        let (ql, qr) = (2.0, -1.0);
        let expect = 0.5 * (0.5 * ql * ql + 0.5 * qr * qr) - 0.5 * 2.0 * (qr - ql);
        assert!((law.numerical_flux(ql, qr, [1.0, 0.0]) - expect).abs() < 1e-15);
        assert!((law.numerical_flux(2.0, 1.0, [0.6, 0.8]) + law.numerical_flux(1.0, 2.0, [-0.6, -0.8])).abs() < 1e-15);
    }

    #[test]
    fn registry_knows_every_listed_case() {
        for name in CASE_NAMES {
            assert_eq!(case_by_name(name).unwrap().name, *name);
        }
        assert!(case_by_name("nope").is_none());
    }

    fn unit_normal() -> impl Strategy<Value = Point> {
        (0.0..std::f64::consts::TAU).prop_map(|t: f64| [t.cos(), t.sin()])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn advection_flux_consistent_and_conservative(
            ql in -5.0f64..5.0, qr in -5.0f64..5.0, n in unit_normal(),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
        ) {
            let law = advection_diffusion([a, b], 0.0);
            let f = law.advective_flux(ql);
            prop_assert!((law.numerical_flux(ql, ql, n) - dot(f, n)).abs() < 1e-13);
            let lhs = law.numerical_flux(ql, qr, n);
            let rhs = -law.numerical_flux(qr, ql, [-n[0], -n[1]]);
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }

        #[test]
        fn burgers_flux_consistent_and_conservative(
            ql in -5.0f64..5.0, qr in -5.0f64..5.0, n in unit_normal(),
        ) {
            let law = viscous_burgers(0.1);
            let f = law.advective_flux(ql);
            prop_assert!((law.numerical_flux(ql, ql, n) - dot(f, n)).abs() < 1e-13);
            let lhs = law.numerical_flux(ql, qr, n);
            let rhs = -law.numerical_flux(qr, ql, [-n[0], -n[1]]);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
