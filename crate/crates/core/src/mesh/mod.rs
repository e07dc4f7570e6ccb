//! Quadrilateral meshes with polynomial element mappings.
//!
//! Local conventions used throughout the crate:
//!
//! * reference element `[-1, 1]^2`, corners `c0 = (-1,-1)`, `c1 = (1,-1)`,
//!   `c2 = (1,1)`, `c3 = (-1,1)` (counter-clockwise);
//! * sides `0: eta = -1`, `1: xi = +1`, `2: eta = +1`, `3: xi = -1`;
//! * each side is parameterised by the reference coordinate running along
//!   it, so sides 0 and 2 run `c0 -> c1` and `c3 -> c2`, sides 3 and 1 run
//!   `c0 -> c3` and `c1 -> c2`.

mod cartesian;
mod io;
pub mod metrics;

pub use cartesian::{bent_pair, build_cartesian, Grading, Rectangle, Wall};
pub use io::{parse_mesh, read_mesh, write_mesh};
pub use metrics::{ElementGeometry, SideGeometry};

use crate::error::{Error, Result};
use crate::spectral::{barycentric_weights, lagrange_basis, lagrange_basis_derivative};

pub type Point = [f64; 2];

/// Tag given to boundary faces that no boundary block names.
pub const DEFAULT_BOUNDARY_TAG: &str = "boundary";

/// Reference direction running along a side.
#[inline]
pub fn side_tangent_direction(side: usize) -> usize {
    match side {
        0 | 2 => 0,
        _ => 1,
    }
}

/// Reference direction normal to a side.
#[inline]
pub fn side_normal_direction(side: usize) -> usize {
    1 - side_tangent_direction(side)
}

/// The corner indices a side runs between, in parameter order.
#[inline]
pub fn side_corners(side: usize) -> (usize, usize) {
    match side {
        0 => (0, 1),
        1 => (1, 2),
        2 => (3, 2),
        3 => (0, 3),
        _ => panic!("side index {side} out of range"),
    }
}

/// Reference point of a side at parameter `t`.
#[inline]
pub fn side_point(side: usize, t: f64) -> (f64, f64) {
    match side {
        0 => (t, -1.0),
        1 => (1.0, t),
        2 => (t, 1.0),
        3 => (-1.0, t),
        _ => panic!("side index {side} out of range"),
    }
}

/// Lagrange mapping of order `M` from `[-1,1]^2` onto the element, defined
/// by `(M+1)^2` control points on an equispaced reference grid, first index
/// fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Mapping {
    order: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    control: Vec<Point>,
}

impl Mapping {
    pub fn new(order: usize, control: Vec<Point>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("mapping order must be at least 1".into()));
        }
        if control.len() != (order + 1) * (order + 1) {
            return Err(Error::InvalidInput(format!(
                "mapping of order {order} needs {} control points, got {}",
                (order + 1) * (order + 1),
                control.len()
            )));
        }
        let nodes: Vec<f64> = (0..=order)
            .map(|k| -1.0 + 2.0 * k as f64 / order as f64)
            .collect();
        let bary = barycentric_weights(&nodes);
        Ok(Self {
            order,
            nodes,
            bary,
            control,
        })
    }

    /// Bilinear map through four counter-clockwise corners.
    pub fn bilinear(corners: [Point; 4]) -> Self {
        Self::new(1, vec![corners[0], corners[1], corners[3], corners[2]])
            .expect("four control points")
    }

    /// Samples `f` on the equispaced control grid of order `order`.
    pub fn from_fn(order: usize, f: impl Fn(f64, f64) -> Point) -> Result<Self> {
        let mut control = Vec::with_capacity((order + 1) * (order + 1));
        for b in 0..=order {
            for a in 0..=order {
                let xi = -1.0 + 2.0 * a as f64 / order as f64;
                let eta = -1.0 + 2.0 * b as f64 / order as f64;
                control.push(f(xi, eta));
            }
        }
        Self::new(order, control)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn control(&self) -> &[Point] {
        &self.control
    }

    pub fn corner(&self, c: usize) -> Point {
        let m = self.order;
        let (a, b) = match c {
            0 => (0, 0),
            1 => (m, 0),
            2 => (m, m),
            3 => (0, m),
            _ => panic!("corner index {c} out of range"),
        };
        self.control[a + (m + 1) * b]
    }

    pub fn map(&self, xi: f64, eta: f64) -> Point {
        let lx = lagrange_basis(&self.nodes, &self.bary, xi);
        let ly = lagrange_basis(&self.nodes, &self.bary, eta);
        let m1 = self.order + 1;
        let mut p = [0.0; 2];
        for (b, wb) in ly.iter().enumerate() {
            for (a, wa) in lx.iter().enumerate() {
                let c = self.control[a + m1 * b];
                p[0] += wa * wb * c[0];
                p[1] += wa * wb * c[1];
            }
        }
        p
    }

    /// Covariant vectors `(x_xi, y_xi)` and `(x_eta, y_eta)` at a point.
    pub fn covariant(&self, xi: f64, eta: f64) -> [Point; 2] {
        let lx = lagrange_basis(&self.nodes, &self.bary, xi);
        let ly = lagrange_basis(&self.nodes, &self.bary, eta);
        let dx = lagrange_basis_derivative(&self.nodes, &self.bary, xi);
        let dy = lagrange_basis_derivative(&self.nodes, &self.bary, eta);
        let m1 = self.order + 1;
        let mut a1 = [0.0; 2];
        let mut a2 = [0.0; 2];
        for b in 0..m1 {
            for a in 0..m1 {
                let c = self.control[a + m1 * b];
                let w1 = dx[a] * ly[b];
                let w2 = lx[a] * dy[b];
                a1[0] += w1 * c[0];
                a1[1] += w1 * c[1];
                a2[0] += w2 * c[0];
                a2[1] += w2 * c[1];
            }
        }
        [a1, a2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub mapping: Mapping,
}

impl Element {
    pub fn corners(&self) -> [Point; 4] {
        [0, 1, 2, 3].map(|c| self.mapping.corner(c))
    }

    /// Physical distance between the midpoints of opposite sides, per
    /// reference direction.
    pub fn directional_size(&self) -> [f64; 2] {
        let dist = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let m = &self.mapping;
        [
            dist(m.map(1.0, 0.0), m.map(-1.0, 0.0)),
            dist(m.map(0.0, 1.0), m.map(0.0, -1.0)),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SideRef {
    pub element: usize,
    pub side: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceNeighbor {
    /// `flip` is set when the right side runs against the left side's
    /// parameter direction.
    Interior { side: SideRef, flip: bool },
    Boundary { tag: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub left: SideRef,
    pub right: FaceNeighbor,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        matches!(self.right, FaceNeighbor::Boundary { .. })
    }
}

/// Where an element side lives in the face list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SideLink {
    pub face: usize,
    pub is_left: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    elements: Vec<Element>,
    faces: Vec<Face>,
    links: Vec<[SideLink; 4]>,
    tags: Vec<String>,
}

/// Boundary side assignment used while building a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryBlock {
    pub tag: String,
    pub sides: Vec<SideRef>,
}

impl Mesh2D {
    /// Builds connectivity by matching side end points. Unmatched sides
    /// become boundary faces, tagged from `boundaries` where listed.
    pub fn new(elements: Vec<Element>, boundaries: &[BoundaryBlock]) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInput("mesh has no elements".into()));
        }
        for (e, el) in elements.iter().enumerate() {
            let c = el.corners();
            let area2: f64 = (0..4)
                .map(|k| {
                    let (p, q) = (c[k], c[(k + 1) % 4]);
                    p[0] * q[1] - q[0] * p[1]
                })
                .sum();
            if area2 <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "element {e} corners are not counter-clockwise"
                )));
            }
        }
        let scale = elements
            .iter()
            .flat_map(|el| el.corners())
            .flat_map(|p| p.map(f64::abs))
            .fold(1.0, f64::max);
        let tol = 1e-10 * scale;
        let close = |a: Point, b: Point| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol;

        let n = elements.len();
        let ends: Vec<[(Point, Point); 4]> = elements
            .iter()
            .map(|el| {
                let c = el.corners();
                [0, 1, 2, 3].map(|s| {
                    let (a, b) = side_corners(s);
                    (c[a], c[b])
                })
            })
            .collect();

        let mut tags: Vec<String> = Vec::new();
        let mut tag_of: std::collections::HashMap<(usize, usize), usize> = Default::default();
        for block in boundaries {
            let id = match tags.iter().position(|t| *t == block.tag) {
                Some(i) => i,
                None => {
                    tags.push(block.tag.clone());
                    tags.len() - 1
                }
            };
            for s in &block.sides {
                if s.element >= n || s.side > 3 {
                    return Err(Error::InvalidInput(format!(
                        "boundary '{}' names missing side {}/{}",
                        block.tag, s.element, s.side
                    )));
                }
                tag_of.insert((s.element, s.side), id);
            }
        }

        let unset = SideLink {
            face: usize::MAX,
            is_left: true,
        };
        let mut links = vec![[unset; 4]; n];
        let mut faces = Vec::new();
        for e in 0..n {
            for s in 0..4 {
                if links[e][s].face != usize::MAX {
                    continue;
                }
                let (a, b) = ends[e][s];
                let mut partner = None;
                'search: for (e2, sides2) in ends.iter().enumerate().skip(e + 1) {
                    for (s2, &(a2, b2)) in sides2.iter().enumerate() {
                        if links[e2][s2].face != usize::MAX {
                            continue;
                        }
                        if close(a, a2) && close(b, b2) {
                            partner = Some((e2, s2, false));
                            break 'search;
                        }
                        if close(a, b2) && close(b, a2) {
                            partner = Some((e2, s2, true));
                            break 'search;
                        }
                    }
                }
                let face = faces.len();
                links[e][s] = SideLink { face, is_left: true };
                let left = SideRef { element: e, side: s };
                let right = match partner {
                    Some((e2, s2, flip)) => {
                        if tag_of.contains_key(&(e, s)) || tag_of.contains_key(&(e2, s2)) {
                            return Err(Error::InvalidInput(format!(
                                "interior side {e}/{s} listed in a boundary block"
                            )));
                        }
                        links[e2][s2] = SideLink {
                            face,
                            is_left: false,
                        };
                        FaceNeighbor::Interior {
                            side: SideRef {
                                element: e2,
                                side: s2,
                            },
                            flip,
                        }
                    }
                    None => {
                        let tag = match tag_of.get(&(e, s)) {
                            Some(&t) => t,
                            None => match tags.iter().position(|t| t == DEFAULT_BOUNDARY_TAG) {
                                Some(i) => i,
                                None => {
                                    tags.push(DEFAULT_BOUNDARY_TAG.to_string());
                                    tags.len() - 1
                                }
                            },
                        };
                        FaceNeighbor::Boundary { tag }
                    }
                };
                faces.push(Face { left, right });
            }
        }
        Ok(Self {
            elements,
            faces,
            links,
            tags,
        })
    }

    #[inline]
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> &Element {
        &self.elements[e]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Face index and role of each side of element `e`.
    pub fn links(&self, e: usize) -> &[SideLink; 4] {
        &self.links[e]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn tag_id(&self, name: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == name)
    }

    /// Element sides lying on boundary `tag`.
    pub fn boundary_sides(&self, tag: usize) -> Vec<SideRef> {
        self.faces
            .iter()
            .filter(|f| f.right == FaceNeighbor::Boundary { tag })
            .map(|f| f.left)
            .collect()
    }

    /// The element across side `s` of element `e`, with its side index.
    pub fn neighbor(&self, e: usize, s: usize) -> Option<SideRef> {
        let link = self.links[e][s];
        let face = &self.faces[link.face];
        match face.right {
            FaceNeighbor::Boundary { .. } => None,
            FaceNeighbor::Interior { side, .. } => Some(if link.is_left { side } else { face.left }),
        }
    }
}
