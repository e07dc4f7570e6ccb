use std::sync::Arc;

use super::OrderField;
use crate::error::{Error, Result};
use crate::mesh::metrics::{compute_metrics, side_geometry};
use crate::mesh::{side_tangent_direction, ElementGeometry, FaceNeighbor, Mesh2D, Point};

/// Face samples at the mortar (the higher of the two face orders), taken
/// from the left element's mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGeometry {
    pub mortar_order: usize,
    pub left_order: usize,
    /// `None` on boundary faces.
    pub right_order: Option<usize>,
    pub coords: Vec<Point>,
    pub unit_normal: Vec<Point>,
    pub surface_jacobian: Vec<f64>,
}

/// A mesh together with the metric terms of one order field.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Arc<Mesh2D>,
    orders: OrderField,
    elements: Vec<ElementGeometry>,
    faces: Vec<FaceGeometry>,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh2D>, orders: OrderField) -> Result<Self> {
        if orders.len() != mesh.n_elements() {
            return Err(Error::InvalidInput(format!(
                "{} orders for {} elements",
                orders.len(),
                mesh.n_elements()
            )));
        }
        let elements = mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(e, el)| compute_metrics(el, e, orders.get(e)))
            .collect::<Result<Vec<_>>>()?;
        let faces = mesh
            .faces()
            .iter()
            .map(|face| {
                let l = face.left;
                let left_order = orders.get(l.element)[side_tangent_direction(l.side)];
                let right_order = match face.right {
                    FaceNeighbor::Interior { side, .. } => {
                        Some(orders.get(side.element)[side_tangent_direction(side.side)])
                    }
                    FaceNeighbor::Boundary { .. } => None,
                };
                let mortar_order = left_order.max(right_order.unwrap_or(0));
                let g = side_geometry(mesh.element(l.element), l.side, mortar_order);
                let surface_jacobian: Vec<f64> = g.scaled_normal.iter().map(|n| n[0].hypot(n[1])).collect();
                let unit_normal = g
                    .scaled_normal
                    .iter()
                    .zip(&surface_jacobian)
                    .map(|(n, s)| [n[0] / s, n[1] / s])
                    .collect();
                FaceGeometry {
                    mortar_order,
                    left_order,
                    right_order,
                    coords: g.coords,
                    unit_normal,
                    surface_jacobian,
                }
            })
            .collect();
        Ok(Self {
            mesh,
            orders,
            elements,
            faces,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh2D> {
        &self.mesh
    }

    pub fn orders(&self) -> &OrderField {
        &self.orders
    }

    pub fn element(&self, e: usize) -> &ElementGeometry {
        &self.elements[e]
    }

    pub fn elements(&self) -> &[ElementGeometry] {
        &self.elements
    }

    pub fn face(&self, f: usize) -> &FaceGeometry {
        &self.faces[f]
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn dofs(&self) -> usize {
        self.orders.dofs()
    }
}
