//! Plain text mesh format.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! elements 2
//! 0 0  1 0  1 1  0 1          # four counter-clockwise corners per element
//! 1 0  2 0  2 1  1 1
//! curved 1 2                  # element id, mapping order M
//! 1 0                         # (M+1)^2 control points, xi fastest,
//! ...                         # equispaced on the reference square
//! boundary inflow 1           # tag, number of sides
//! 0 3                         # element id, local side
//! ```
//!
//! Boundary sides not named in any block get the tag `boundary`.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryBlock, Element, Mapping, Mesh2D, Point, SideRef};
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let line = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((i + 1, tokens));
            }
        }
        None
    }

    fn expect_tokens(&mut self, what: &str, last: usize) -> Result<(usize, Vec<&'a str>)> {
        self.next_tokens().ok_or_else(|| Error::MeshFormat {
            line: last,
            message: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::MeshFormat {
        line,
        message: format!("cannot parse '{tok}'"),
    })
}

fn parse_points(tokens: &[&str], line: usize, count: usize) -> Result<Vec<Point>> {
    if tokens.len() != 2 * count {
        return Err(Error::MeshFormat {
            line,
            message: format!("expected {} numbers, found {}", 2 * count, tokens.len()),
        });
    }
    let vals: Vec<f64> = tokens
        .iter()
        .map(|t| parse_num(t, line))
        .collect::<Result<_>>()?;
    Ok(vals.chunks(2).map(|c| [c[0], c[1]]).collect())
}

pub fn parse_mesh(text: &str) -> Result<Mesh2D> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let mut elements: Vec<Element> = Vec::new();
    let mut blocks: Vec<BoundaryBlock> = Vec::new();
    let mut seen_elements = false;
    let mut last = 0;
    while let Some((line, tok)) = lines.next_tokens() {
        last = line;
        match tok[0] {
            "elements" => {
                if seen_elements || tok.len() != 2 {
                    return Err(Error::MeshFormat {
                        line,
                        message: "expected a single 'elements <count>' header".into(),
                    });
                }
                seen_elements = true;
                let n: usize = parse_num(tok[1], line)?;
                for _ in 0..n {
                    let (l, t) = lines.expect_tokens("element corners", last)?;
                    last = l;
                    let p = parse_points(&t, l, 4)?;
                    elements.push(Element {
                        mapping: Mapping::bilinear([p[0], p[1], p[2], p[3]]),
                    });
                }
            }
            "curved" => {
                if tok.len() != 3 {
                    return Err(Error::MeshFormat {
                        line,
                        message: "expected 'curved <element> <order>'".into(),
                    });
                }
                let id: usize = parse_num(tok[1], line)?;
                let order: usize = parse_num(tok[2], line)?;
                if id >= elements.len() {
                    return Err(Error::MeshFormat {
                        line,
                        message: format!("curved block for unknown element {id}"),
                    });
                }
                let mut control = Vec::with_capacity((order + 1) * (order + 1));
                for _ in 0..(order + 1) * (order + 1) {
                    let (l, t) = lines.expect_tokens("control point", last)?;
                    last = l;
                    control.extend(parse_points(&t, l, 1)?);
                }
                let mapping = Mapping::new(order, control).map_err(|e| Error::MeshFormat {
                    line,
                    message: e.to_string(),
                })?;
                let old = elements[id].corners();
                let new = Element { mapping };
                let moved = old
                    .iter()
                    .zip(new.corners())
                    .any(|(a, b)| (a[0] - b[0]).abs() > 1e-12 || (a[1] - b[1]).abs() > 1e-12);
                if moved {
                    return Err(Error::MeshFormat {
                        line,
                        message: format!("curved block corners disagree with element {id}"),
                    });
                }
                elements[id] = new;
            }
            "boundary" => {
                if tok.len() != 3 {
                    return Err(Error::MeshFormat {
                        line,
                        message: "expected 'boundary <tag> <count>'".into(),
                    });
                }
                let count: usize = parse_num(tok[2], line)?;
                let mut sides = Vec::with_capacity(count);
                for _ in 0..count {
                    let (l, t) = lines.expect_tokens("boundary side", last)?;
                    last = l;
                    if t.len() != 2 {
                        return Err(Error::MeshFormat {
                            line: l,
                            message: "expected '<element> <side>'".into(),
                        });
                    }
                    sides.push(SideRef {
                        element: parse_num(t[0], l)?,
                        side: parse_num(t[1], l)?,
                    });
                }
                blocks.push(BoundaryBlock {
                    tag: tok[1].to_string(),
                    sides,
                });
            }
            other => {
                return Err(Error::MeshFormat {
                    line,
                    message: format!("unknown keyword '{other}'"),
                })
            }
        }
    }
    if !seen_elements {
        return Err(Error::MeshFormat {
            line: last,
            message: "missing 'elements' block".into(),
        });
    }
    Mesh2D::new(elements, &blocks)
}

pub fn read_mesh(path: &Path) -> Result<Mesh2D> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read mesh {}: {e}", path.display())))?;
    parse_mesh(&text)
}

/// Serialises a mesh so that [`parse_mesh`] rebuilds it.
pub fn write_mesh(mesh: &Mesh2D) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "elements {}", mesh.n_elements());
    for el in mesh.elements() {
        let c = el.corners();
        let _ = writeln!(
            out,
            "{:e} {:e}  {:e} {:e}  {:e} {:e}  {:e} {:e}",
            c[0][0], c[0][1], c[1][0], c[1][1], c[2][0], c[2][1], c[3][0], c[3][1]
        );
    }
    for (e, el) in mesh.elements().iter().enumerate() {
        if el.mapping.order() > 1 {
            let _ = writeln!(out, "curved {e} {}", el.mapping.order());
            for p in el.mapping.control() {
                let _ = writeln!(out, "{:e} {:e}", p[0], p[1]);
            }
        }
    }
    for (t, tag) in mesh.tags().iter().enumerate() {
        let sides = mesh.boundary_sides(t);
        let _ = writeln!(out, "boundary {tag} {}", sides.len());
        for s in sides {
            let _ = writeln!(out, "{} {}", s.element, s.side);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, Rectangle};

    const CURVED: &str = "\
# two elements sharing a curved edge
elements 2
0 0  1 0  1 1  0 1
1 0  2 0  2 1  1 1
curved 1 2
1 0
1.5 0
2 0
1.1 0.5
1.5 0.5
2 0.5
1 1
1.5 1
2 1
boundary inflow 1
0 3
";

    #[test]
    fn parses_curved_block_and_tags() {
        let mesh = parse_mesh(CURVED).unwrap();
        assert_eq!(mesh.n_elements(), 2);
        assert_eq!(mesh.element(1).mapping.order(), 2);
        let inflow = mesh.tag_id("inflow").unwrap();
        assert_eq!(mesh.boundary_sides(inflow), vec![SideRef { element: 0, side: 3 }]);
        assert_eq!(mesh.faces().iter().filter(|f| !f.is_boundary()).count(), 1);
    }

    #[test]
    fn round_trip() {
        let mesh = build_cartesian(3, 2, Rectangle::UNIT, None).unwrap();
        let again = parse_mesh(&write_mesh(&mesh)).unwrap();
        assert_eq!(again.faces(), mesh.faces());
        assert_eq!(again.tags(), mesh.tags());
        let curved = parse_mesh(CURVED).unwrap();
        let again = parse_mesh(&write_mesh(&curved)).unwrap();
        assert_eq!(again.element(1).mapping.control(), curved.element(1).mapping.control());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_mesh("elements 1\n0 0 1 0 1 1\n").unwrap_err();
        assert_eq!(
            err,
            Error::MeshFormat {
                line: 2,
                message: "expected 8 numbers, found 6".into()
            }
        );
        assert!(matches!(parse_mesh("bogus\n"), Err(Error::MeshFormat { line: 1, .. })));
        assert!(matches!(parse_mesh("# nothing\n"), Err(Error::MeshFormat { .. })));
    }
}
