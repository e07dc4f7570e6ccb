//! Metric terms sampled at the Gauss points of an element's current orders.
//!
//! With covariant vectors `a1 = (x_xi, y_xi)` and `a2 = (x_eta, y_eta)` the
//! 2D contravariant vectors are `Ja1 = (y_eta, -x_eta)` and
//! `Ja2 = (-y_xi, x_xi)`, and `J = x_xi y_eta - x_eta y_xi`.

use super::{side_point, side_tangent_direction, Element, Point};
use crate::error::{Error, Result};
use crate::spectral::basis;

/// Face samples of one side at its own tangential order.
#[derive(Debug, Clone, PartialEq)]
pub struct SideGeometry {
    pub order: usize,
    pub coords: Vec<Point>,
    /// Outward normal scaled by the surface Jacobian.
    pub scaled_normal: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub order: [usize; 2],
    pub coords: Vec<Point>,
    pub covariant: Vec<[Point; 2]>,
    pub jacobian: Vec<f64>,
    pub contravariant: Vec<[Point; 2]>,
    /// Diagonal mass matrix `w_i w_j J_ij`.
    pub mass: Vec<f64>,
    pub sides: [SideGeometry; 4],
    /// Directional element sizes used by the time step limit.
    pub size: [f64; 2],
}

/// Outward normal times surface Jacobian on `side` at reference point
/// `(xi, eta)` from the covariant vectors there.
pub fn scaled_normal(side: usize, cov: [Point; 2]) -> Point {
    let [a1, a2] = cov;
    match side {
        0 => [a1[1], -a1[0]],
        1 => [a2[1], -a2[0]],
        2 => [-a1[1], a1[0]],
        3 => [-a2[1], a2[0]],
        _ => panic!("side index {side} out of range"),
    }
}

/// Samples `side` of `element` at the Gauss nodes of `order`.
pub fn side_geometry(element: &Element, side: usize, order: usize) -> SideGeometry {
    let b = basis(order);
    let mut coords = Vec::with_capacity(order + 1);
    let mut scaled = Vec::with_capacity(order + 1);
    for &t in b.nodes() {
        let (xi, eta) = side_point(side, t);
        coords.push(element.mapping.map(xi, eta));
        scaled.push(scaled_normal(side, element.mapping.covariant(xi, eta)));
    }
    SideGeometry {
        order,
        coords,
        scaled_normal: scaled,
    }
}

pub fn compute_metrics(element: &Element, id: usize, order: [usize; 2]) -> Result<ElementGeometry> {
    let m = element.mapping.order();
    if m > order[0] || m > order[1] {
        return Err(Error::MappingOrderTooHigh {
            element: id,
            mapping: m,
            order,
        });
    }
    let bx = basis(order[0]);
    let by = basis(order[1]);
    let n = (order[0] + 1) * (order[1] + 1);
    let mut coords = Vec::with_capacity(n);
    let mut covariant = Vec::with_capacity(n);
    let mut jacobian = Vec::with_capacity(n);
    let mut contravariant = Vec::with_capacity(n);
    let mut mass = Vec::with_capacity(n);
    for (j, (&eta, &wy)) in by.nodes().iter().zip(by.weights()).enumerate() {
        for (i, (&xi, &wx)) in bx.nodes().iter().zip(bx.weights()).enumerate() {
            let cov = element.mapping.covariant(xi, eta);
            let [a1, a2] = cov;
            let jac = a1[0] * a2[1] - a2[0] * a1[1];
            if jac <= 0.0 || !jac.is_finite() {
                return Err(Error::InvertedElement {
                    element: id,
                    node: i + (order[0] + 1) * j,
                    jacobian: jac,
                });
            }
            coords.push(element.mapping.map(xi, eta));
            covariant.push(cov);
            jacobian.push(jac);
            contravariant.push([[a2[1], -a2[0]], [-a1[1], a1[0]]]);
            mass.push(wx * wy * jac);
        }
    }
    let sides = [0, 1, 2, 3].map(|s| side_geometry(element, s, order[side_tangent_direction(s)]));
    Ok(ElementGeometry {
        order,
        coords,
        covariant,
        jacobian,
        contravariant,
        mass,
        sides,
        size: element.directional_size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, side_corners, Mapping, Rectangle};

    #[test]
    fn unit_square_single_element() {
        let mesh = build_cartesian(1, 1, Rectangle::UNIT, None).unwrap();
        let g = compute_metrics(mesh.element(0), 0, [3, 3]).unwrap();
        assert!(g.jacobian.iter().all(|j| (j - 0.25).abs() < 1e-15));
        let total: f64 = g.mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_square_normals_axis_aligned() {
        let h = 0.3;
        let el = Element {
            mapping: Mapping::bilinear([[0.0, 0.0], [h, 0.0], [h, h], [0.0, h]]),
        };
        let g = compute_metrics(&el, 0, [2, 2]).unwrap();
        assert!(g.jacobian.iter().all(|j| (j - h * h / 4.0).abs() < 1e-15));
        let expect = [[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
        for (s, side) in g.sides.iter().enumerate() {
            for n in &side.scaled_normal {
                assert!((n[0] - expect[s][0] * h / 2.0).abs() < 1e-15);
                assert!((n[1] - expect[s][1] * h / 2.0).abs() < 1e-15);
            }
        }
    }

    fn curved_element() -> Element {
        Element {
            mapping: Mapping::from_fn(2, |xi, eta| [(1.0 + xi) / 2.0, (1.0 + eta) / 2.0 + 0.1 * xi * xi])
                .unwrap(),
        }
    }

    #[test]
    fn curved_element_matches_analytic_metrics() {
        let el = curved_element();
        for order in [[4, 4], [2, 2], [5, 3]] {
            let g = compute_metrics(&el, 0, order).unwrap();
            let bx = basis(order[0]);
            let by = basis(order[1]);
            let mut k = 0;
            for &eta in by.nodes() {
                for &xi in bx.nodes() {
                    // x_xi = 1/2, x_eta = 0, y_xi = 0.2 xi, y_eta = 1/2
                    assert!((g.jacobian[k] - 0.25).abs() < 1e-13);
                    let [ja1, ja2] = g.contravariant[k];
                    assert!((ja1[0] - 0.5).abs() < 1e-13 && ja1[1].abs() < 1e-13);
                    assert!((ja2[0] + 0.2 * xi).abs() < 1e-13 && (ja2[1] - 0.5).abs() < 1e-13);
                    let p = g.coords[k];
                    assert!((p[0] - (1.0 + xi) / 2.0).abs() < 1e-14);
                    assert!((p[1] - (1.0 + eta) / 2.0 - 0.1 * xi * xi).abs() < 1e-14);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn mapping_order_above_polynomial_order_rejected() {
        let el = curved_element();
        assert_eq!(
            compute_metrics(&el, 7, [1, 3]),
            Err(Error::MappingOrderTooHigh {
                element: 7,
                mapping: 2,
                order: [1, 3]
            })
        );
    }

    #[test]
    fn folded_element_reported_as_inverted() {
        // The centre control point sits below the bottom side.
        let el2 = Element {
            mapping: Mapping::new(
                2,
                vec![
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [2.0, 0.0],
                    [0.0, 1.0],
                    [1.0, -0.9],
                    [2.0, 1.0],
                    [0.0, 2.0],
                    [1.0, 2.0],
                    [2.0, 2.0],
                ],
            )
            .unwrap(),
        };
        assert!(matches!(
            compute_metrics(&el2, 3, [4, 4]),
            Err(Error::InvertedElement { element: 3, .. })
        ));
    }

    #[test]
    fn side_samples_run_between_expected_corners() {
        let el = curved_element();
        let c = el.corners();
        for s in 0..4 {
            let g = side_geometry(&el, s, 0);
            let (a, b) = side_corners(s);
            let mid = el.mapping.map(side_point(s, 0.0).0, side_point(s, 0.0).1);
            assert!((g.coords[0][0] - mid[0]).abs() < 1e-15);
            // First and last nodes of a higher order run from corner a toward b.
            let g5 = side_geometry(&el, s, 5);
            let da = (g5.coords[0][0] - c[a][0]).hypot(g5.coords[0][1] - c[a][1]);
            let db = (g5.coords[0][0] - c[b][0]).hypot(g5.coords[0][1] - c[b][1]);
            assert!(da < db);
        }
    }
}
