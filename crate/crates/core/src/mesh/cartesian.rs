use serde::{Deserialize, Serialize};

use super::{BoundaryBlock, Element, Mapping, Mesh2D, SideRef};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rectangle {
    pub const UNIT: Rectangle = Rectangle {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    South,
    East,
    North,
    West,
}

impl Wall {
    pub fn name(self) -> &'static str {
        match self {
            Wall::South => "south",
            Wall::East => "east",
            Wall::North => "north",
            Wall::West => "west",
        }
    }
}

/// Geometric stretching: each element is `ratio` times the size of its
/// neighbour closer to `wall`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    pub wall: Wall,
    pub ratio: f64,
}

/// Break points of `n` cells on `[a, b]`, sizes growing by `ratio` from `a`.
fn graded_points(a: f64, b: f64, n: usize, ratio: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..n).map(|k| ratio.powi(k as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut pts = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    pts.push(a);
    for w in &weights[..n - 1] {
        acc += w;
        pts.push(a + (b - a) * acc / total);
    }
    pts.push(b);
    pts
}

/// Structured `nx` by `ny` mesh of bilinear elements, numbered with x
/// fastest. Boundary sides are tagged `south`, `east`, `north` and `west`.
pub fn build_cartesian(
    nx: usize,
    ny: usize,
    domain: Rectangle,
    grading: Option<Grading>,
) -> Result<Mesh2D> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("nx and ny must be at least 1".into()));
    }
    let finite = [domain.x0, domain.x1, domain.y0, domain.y1]
        .iter()
        .all(|v| v.is_finite());
    if !finite || domain.x1 <= domain.x0 || domain.y1 <= domain.y0 {
        return Err(Error::InvalidInput(format!("degenerate rectangle {domain:?}")));
    }
    let mut xs = graded_points(domain.x0, domain.x1, nx, 1.0);
    let mut ys = graded_points(domain.y0, domain.y1, ny, 1.0);
    if let Some(g) = grading {
        if !(g.ratio.is_finite() && g.ratio > 0.0) {
            return Err(Error::InvalidInput(format!("grading ratio {} must be positive", g.ratio)));
        }
        match g.wall {
            Wall::West => xs = graded_points(domain.x0, domain.x1, nx, g.ratio),
            Wall::East => {
                xs = graded_points(domain.x1, domain.x0, nx, g.ratio);
                xs.reverse();
            }
            Wall::South => ys = graded_points(domain.y0, domain.y1, ny, g.ratio),
            Wall::North => {
                ys = graded_points(domain.y1, domain.y0, ny, g.ratio);
                ys.reverse();
            }
        }
    }

    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(Element {
                mapping: Mapping::bilinear([
                    [xs[i], ys[j]],
                    [xs[i + 1], ys[j]],
                    [xs[i + 1], ys[j + 1]],
                    [xs[i], ys[j + 1]],
                ]),
            });
        }
    }
    let id = |i: usize, j: usize| i + nx * j;
    let blocks = vec![
        BoundaryBlock {
            tag: Wall::South.name().into(),
            sides: (0..nx).map(|i| SideRef { element: id(i, 0), side: 0 }).collect(),
        },
        BoundaryBlock {
            tag: Wall::East.name().into(),
            sides: (0..ny).map(|j| SideRef { element: id(nx - 1, j), side: 1 }).collect(),
        },
        BoundaryBlock {
            tag: Wall::North.name().into(),
            sides: (0..nx).map(|i| SideRef { element: id(i, ny - 1), side: 2 }).collect(),
        },
        BoundaryBlock {
            tag: Wall::West.name().into(),
            sides: (0..ny).map(|j| SideRef { element: id(0, j), side: 3 }).collect(),
        },
    ];
    Mesh2D::new(elements, &blocks)
}

/// Two elements on `[0, 2] x [0, 1]` sharing the parabolic edge
/// `x = 1 + 0.15 (1 - (2y - 1)^2)`, quadratic mappings. The left element
/// is also bulged inside.
pub fn bent_pair() -> Result<Mesh2D> {
    let bend = |y: f64| 1.0 + 0.15 * (1.0 - (2.0 * y - 1.0).powi(2));
    let left = Mapping::from_fn(2, |xi, eta| {
        let y = (1.0 + eta) / 2.0;
        let t = (1.0 + xi) / 2.0;
        [t * bend(y), y + 0.05 * (1.0 - xi * xi) * (1.0 - eta * eta)]
    })?;
    let right = Mapping::from_fn(2, |xi, eta| {
        let y = (1.0 + eta) / 2.0;
        let t = (1.0 + xi) / 2.0;
        [bend(y) + t * (2.0 - bend(y)), y]
    })?;
    Mesh2D::new(vec![Element { mapping: left }, Element { mapping: right }], &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::FaceNeighbor;

    #[test]
    fn single_element_unit_square() {
        let m = build_cartesian(1, 1, Rectangle::UNIT, None).unwrap();
        assert_eq!(m.n_elements(), 1);
        assert_eq!(m.faces().len(), 4);
        assert!(m.faces().iter().all(|f| f.is_boundary()));
        assert_eq!(m.tags().len(), 4);
    }

    #[test]
    fn two_elements_share_one_face() {
        let m = build_cartesian(2, 1, Rectangle::UNIT, None).unwrap();
        let interior: Vec<_> = m.faces().iter().filter(|f| !f.is_boundary()).collect();
        assert_eq!(interior.len(), 1);
        let f = interior[0];
        assert_eq!(f.left, SideRef { element: 0, side: 1 });
        assert_eq!(
            f.right,
            FaceNeighbor::Interior {
                side: SideRef { element: 1, side: 3 },
                flip: false
            }
        );
    }

    #[test]
    fn geometric_grading_toward_south() {
        let m = build_cartesian(1, 4, Rectangle::UNIT, Some(Grading { wall: Wall::South, ratio: 1.2 }))
            .unwrap();
        let h: Vec<f64> = (0..4).map(|j| m.element(j).directional_size()[1]).collect();
        let base = 1.0 / (1.0 + 1.2 + 1.44 + 1.728);
        for (k, expect) in [1.0, 1.2, 1.44, 1.728].iter().enumerate() {
            assert!((h[k] - base * expect).abs() < 1e-14, "{h:?}");
        }
    }

    #[test]
    fn grading_toward_north_mirrors() {
        let g = Some(Grading { wall: Wall::North, ratio: 2.0 });
        let m = build_cartesian(1, 3, Rectangle::UNIT, g).unwrap();
        let h: Vec<f64> = (0..3).map(|j| m.element(j).directional_size()[1]).collect();
        assert!((h[0] - 4.0 / 7.0).abs() < 1e-14);
        assert!((h[2] - 1.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        let r = Rectangle { x0: 0.0, x1: 0.0, y0: 0.0, y1: 1.0 };
        assert!(build_cartesian(1, 1, r, None).is_err());
        assert!(build_cartesian(0, 1, Rectangle::UNIT, None).is_err());
    }

    #[test]
    fn wall_tags_cover_the_perimeter() {
        let m = build_cartesian(3, 2, Rectangle::UNIT, None).unwrap();
        for (wall, count) in [(Wall::South, 3), (Wall::East, 2), (Wall::North, 3), (Wall::West, 2)] {
            let t = m.tag_id(wall.name()).unwrap();
            assert_eq!(m.boundary_sides(t).len(), count);
        }
    }
}
