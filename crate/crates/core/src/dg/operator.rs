//! Weak-form DGSEM operator on Gauss nodes.
//!
//! For an element with orders `(N1, N2)` the operator returns
//!
//! ```text
//! A_ij = 1/J_ij [ sum_k H1_ik Ft_kj + sum_k H2_jk Gt_ik
//!                 + (F*_1,j l_i(1) + F*_3,j l_i(-1)) / w_i
//!                 + (F*_2,i l_j(1) + F*_0,i l_j(-1)) / w_j ]
//! ```
//!
//! with `H_ik = -w_k D_ki / w_i`, contravariant fluxes `Ft = Ja1 . F`,
//! `Gt = Ja2 . F` of `F = f_a(q) - mu g`, and `F*_s` the outward numerical
//! flux on side `s` scaled by the surface Jacobian. The semi-discrete
//! system is `dQ/dt = S - A(Q)`, and `F(Q) = M A(Q)` with the diagonal
//! mass matrix `M = w_i w_j J_ij`.
//!
//! The gradient `g` is lifted with the same weak operator using interface
//! values `q^ = {q}`. Faces with different orders on each side are
//! evaluated on a mortar at the higher order and projected back.

use std::sync::Arc;

use super::{Discretization, NodalField, OrderField};
use crate::error::{Error, Result};
use crate::mesh::{side_tangent_direction, ElementGeometry, FaceNeighbor, Mesh2D, Point};
use crate::physics::ManufacturedCase;
use crate::spectral::{basis, transfer, Basis1D};
use crate::work::WorkCounter;

/// Mesh, physics and the shared work counter of one run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Arc<Mesh2D>,
    pub case: Arc<ManufacturedCase>,
    pub work: Arc<WorkCounter>,
}

impl Problem {
    pub fn new(mesh: Mesh2D, case: ManufacturedCase) -> Self {
        Self {
            mesh: Arc::new(mesh),
            case: Arc::new(case),
            work: Arc::new(WorkCounter::new()),
        }
    }

    pub fn discretize(&self, orders: OrderField) -> Result<Arc<Discretization>> {
        Discretization::new(self.mesh.clone(), orders).map(Arc::new)
    }

    pub fn operator(&self, orders: OrderField, level: usize) -> Result<SpatialOperator> {
        Ok(SpatialOperator::new(self, self.discretize(orders)?, level))
    }
}

type Sides = [Vec<f64>; 4];

fn empty_sides() -> Sides {
    [Vec::new(), Vec::new(), Vec::new(), Vec::new()]
}

/// Values of the element interpolant on its four sides, at the side's own
/// tangential Gauss nodes.
fn traces(b1: &Basis1D, b2: &Basis1D, v: &[f64]) -> Sides {
    let n1 = b1.order() + 1;
    let n2 = b2.order() + 1;
    let mut s0 = vec![0.0; n1];
    let mut s2 = vec![0.0; n1];
    let mut s1 = vec![0.0; n2];
    let mut s3 = vec![0.0; n2];
    for j in 0..n2 {
        let row = &v[j * n1..(j + 1) * n1];
        let (lo, hi) = (b2.at_left[j], b2.at_right[j]);
        let mut east = 0.0;
        let mut west = 0.0;
        for i in 0..n1 {
            s0[i] += lo * row[i];
            s2[i] += hi * row[i];
            east += b1.at_right[i] * row[i];
            west += b1.at_left[i] * row[i];
        }
        s1[j] = east;
        s3[j] = west;
    }
    [s0, s1, s2, s3]
}

/// Accumulates the weak divergence of `(ft, gt)` plus surface terms and
/// divides by the Jacobian.
fn weak_divergence(
    geom: &ElementGeometry,
    b1: &Basis1D,
    b2: &Basis1D,
    ft: &[f64],
    gt: &[f64],
    surface: [&[f64]; 4],
    out: &mut [f64],
) {
    let n1 = b1.order() + 1;
    let n2 = b2.order() + 1;
    let (w1, w2) = (b1.weights(), b2.weights());
    for j in 0..n2 {
        for i in 0..n1 {
            let h1 = b1.hat.row(i);
            let mut acc = 0.0;
            for k in 0..n1 {
                acc += h1[k] * ft[k + n1 * j];
            }
            let h2 = b2.hat.row(j);
            for k in 0..n2 {
                acc += h2[k] * gt[i + n1 * k];
            }
            acc += (surface[1][j] * b1.at_right[i] + surface[3][j] * b1.at_left[i]) / w1[i];
            acc += (surface[2][i] * b2.at_right[j] + surface[0][i] * b2.at_left[j]) / w2[j];
            let idx = i + n1 * j;
            out[idx] = acc / geom.jacobian[idx];
        }
    }
}

fn to_mortar(v: &[f64], from: usize, mortar: usize, flip: bool) -> Vec<f64> {
    let mut out = if from == mortar {
        v.to_vec()
    } else {
        transfer(from, mortar).apply(v)
    };
    if flip {
        out.reverse();
    }
    out
}

fn from_mortar(mut v: Vec<f64>, mortar: usize, to: usize, flip: bool) -> Vec<f64> {
    if flip {
        v.reverse();
    }
    if mortar == to {
        v
    } else {
        transfer(mortar, to).apply(&v)
    }
}

/// Gradient lifted to the nodes, one array per physical component.
type Gradient = [Vec<f64>; 2];

/// Spatial operator of one order field.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    problem: Problem,
    disc: Arc<Discretization>,
    level: usize,
    source: NodalField,
}

impl SpatialOperator {
    pub fn new(problem: &Problem, disc: Arc<Discretization>, level: usize) -> Self {
        let case = problem.case.clone();
        let source = sample_on(&disc, |p| case.source(p));
        Self {
            problem: problem.clone(),
            disc,
            level,
            source,
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn orders(&self) -> &OrderField {
        self.disc.orders()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dofs(&self) -> usize {
        self.disc.dofs()
    }

    /// Physical source sampled at the nodes.
    pub fn source(&self) -> &NodalField {
        &self.source
    }

    pub fn zeros(&self) -> NodalField {
        NodalField::zeros(self.disc.orders())
    }

    pub fn sample(&self, f: impl Fn(Point) -> f64) -> NodalField {
        sample_on(&self.disc, f)
    }

    /// Exact solution injected at the nodes.
    pub fn exact_solution(&self) -> NodalField {
        let case = self.problem.case.clone();
        self.sample(|p| case.exact.value(p))
    }

    /// `A(Q) = M^-1 F(Q)`.
    pub fn apply(&self, q: &NodalField) -> Result<NodalField> {
        self.problem.work.record_full(q.len());
        self.evaluate(q, false)
    }

    /// Isolated variant: interfaces and boundaries see only the element's
    /// own traces.
    pub fn apply_isolated(&self, q: &NodalField) -> Result<NodalField> {
        self.problem.work.record_isolated(q.len());
        self.evaluate(q, true)
    }

    /// `M a`.
    pub fn weighted(&self, a: &NodalField) -> NodalField {
        let mut out = a.clone();
        for e in 0..self.disc.n_elements() {
            let m = &self.disc.element(e).mass;
            for (v, w) in out.element_mut(e).iter_mut().zip(m) {
                *v *= w;
            }
        }
        out
    }

    /// `r = S - A(Q)`.
    pub fn residual(&self, q: &NodalField, s: &NodalField) -> Result<NodalField> {
        let a = self.apply(q)?;
        Ok(s.difference(&a))
    }

    fn bases(&self, e: usize) -> (Arc<Basis1D>, Arc<Basis1D>) {
        let o = self.disc.orders().get(e);
        (basis(o[0]), basis(o[1]))
    }

    fn evaluate(&self, q: &NodalField, isolated: bool) -> Result<NodalField> {
        if !q.matches(self.disc.orders()) {
            return Err(Error::InvalidInput(
                "nodal field does not match the operator's order field".into(),
            ));
        }
        let n_el = self.disc.n_elements();
        let law = &*self.problem.case.law;
        let mu = law.viscosity();
        let q_tr: Vec<Sides> = (0..n_el)
            .map(|e| {
                let (b1, b2) = self.bases(e);
                traces(&b1, &b2, q.element(e))
            })
            .collect();

        let (grad, g_tr) = if mu > 0.0 {
            let qhat = if isolated {
                q_tr.clone()
            } else {
                self.interface_average(&q_tr)
            };
            let grad: Vec<Gradient> = (0..n_el).map(|e| self.lift_gradient(e, q.element(e), &qhat[e])).collect();
            let g_tr: Vec<[Sides; 2]> = grad
                .iter()
                .enumerate()
                .map(|(e, g)| {
                    let (b1, b2) = self.bases(e);
                    [traces(&b1, &b2, &g[0]), traces(&b1, &b2, &g[1])]
                })
                .collect();
            (Some(grad), Some(g_tr))
        } else {
            (None, None)
        };

        let fstar = if isolated {
            self.own_fluxes(&q_tr, g_tr.as_deref())
        } else {
            self.interface_fluxes(&q_tr, g_tr.as_deref())
        };

        let mut out = NodalField::zeros(self.disc.orders());
        for e in 0..n_el {
            let geom = self.disc.element(e);
            let (b1, b2) = self.bases(e);
            let qe = q.element(e);
            let n = qe.len();
            let mut ft = vec![0.0; n];
            let mut gt = vec![0.0; n];
            for k in 0..n {
                let mut fl = law.advective_flux(qe[k]);
                if let Some(g) = &grad {
                    fl[0] -= mu * g[e][0][k];
                    fl[1] -= mu * g[e][1][k];
                }
                let [ja1, ja2] = geom.contravariant[k];
                ft[k] = ja1[0] * fl[0] + ja1[1] * fl[1];
                gt[k] = ja2[0] * fl[0] + ja2[1] * fl[1];
            }
            let s = &fstar[e];
            let dst = out.element_mut(e);
            weak_divergence(geom, &b1, &b2, &ft, &gt, [&s[0], &s[1], &s[2], &s[3]], dst);
            if dst.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    element: e,
                    level: self.level,
                });
            }
        }
        Ok(out)
    }

    fn interface_average(&self, q_tr: &[Sides]) -> Vec<Sides> {
        let mesh = self.disc.mesh();
        let case = &self.problem.case;
        let mut out: Vec<Sides> = (0..q_tr.len()).map(|_| empty_sides()).collect();
        for (f, face) in mesh.faces().iter().enumerate() {
            let g = self.disc.face(f);
            let l = face.left;
            let tl = &q_tr[l.element][l.side];
            match face.right {
                FaceNeighbor::Interior { side: r, flip } => {
                    let mo = g.mortar_order;
                    let nr = g.right_order.expect("interior face");
                    let ml = to_mortar(tl, g.left_order, mo, false);
                    let mr = to_mortar(&q_tr[r.element][r.side], nr, mo, flip);
                    let avg: Vec<f64> = ml.iter().zip(&mr).map(|(a, b)| 0.5 * (a + b)).collect();
                    out[l.element][l.side] = from_mortar(avg.clone(), mo, g.left_order, false);
                    out[r.element][r.side] = from_mortar(avg, mo, nr, flip);
                }
                FaceNeighbor::Boundary { .. } => {
                    out[l.element][l.side] = tl
                        .iter()
                        .zip(&g.coords)
                        .map(|(qi, p)| 0.5 * (qi + case.boundary_value(*p)))
                        .collect();
                }
            }
        }
        out
    }

    fn lift_gradient(&self, e: usize, qe: &[f64], qhat: &Sides) -> Gradient {
        let geom = self.disc.element(e);
        let (b1, b2) = self.bases(e);
        let n = qe.len();
        let mut grad = [vec![0.0; n], vec![0.0; n]];
        for (c, g) in grad.iter_mut().enumerate() {
            let ft: Vec<f64> = (0..n).map(|k| geom.contravariant[k][0][c] * qe[k]).collect();
            let gt: Vec<f64> = (0..n).map(|k| geom.contravariant[k][1][c] * qe[k]).collect();
            let surface: Sides = [0, 1, 2, 3].map(|s| {
                qhat[s]
                    .iter()
                    .zip(&geom.sides[s].scaled_normal)
                    .map(|(v, ns)| v * ns[c])
                    .collect()
            });
            weak_divergence(geom, &b1, &b2, &ft, &gt, [&surface[0], &surface[1], &surface[2], &surface[3]], g);
        }
        grad
    }

    fn interface_fluxes(&self, q_tr: &[Sides], g_tr: Option<&[[Sides; 2]]>) -> Vec<Sides> {
        let mesh = self.disc.mesh();
        let case = &self.problem.case;
        let law = &*case.law;
        let mu = law.viscosity();
        let mut out: Vec<Sides> = (0..q_tr.len()).map(|_| empty_sides()).collect();
        for (f, face) in mesh.faces().iter().enumerate() {
            let g = self.disc.face(f);
            let l = face.left;
            let mo = g.mortar_order;
            let ql = to_mortar(&q_tr[l.element][l.side], g.left_order, mo, false);
            let gl = g_tr.map(|gt| {
                [
                    to_mortar(&gt[l.element][0][l.side], g.left_order, mo, false),
                    to_mortar(&gt[l.element][1][l.side], g.left_order, mo, false),
                ]
            });
            match face.right {
                FaceNeighbor::Interior { side: r, flip } => {
                    let nr = g.right_order.expect("interior face");
                    let qr = to_mortar(&q_tr[r.element][r.side], nr, mo, flip);
                    let gr = g_tr.map(|gt| {
                        [
                            to_mortar(&gt[r.element][0][r.side], nr, mo, flip),
                            to_mortar(&gt[r.element][1][r.side], nr, mo, flip),
                        ]
                    });
                    let flux: Vec<f64> = (0..=mo)
                        .map(|k| {
                            let n = g.unit_normal[k];
                            let mut fl = law.numerical_flux(ql[k], qr[k], n);
                            if let (Some(a), Some(b)) = (&gl, &gr) {
                                let gx = 0.5 * (a[0][k] + b[0][k]);
                                let gy = 0.5 * (a[1][k] + b[1][k]);
                                fl -= mu * (gx * n[0] + gy * n[1]);
                            }
                            fl * g.surface_jacobian[k]
                        })
                        .collect();
                    let neg: Vec<f64> = flux.iter().map(|v| -v).collect();
                    out[l.element][l.side] = from_mortar(flux, mo, g.left_order, false);
                    out[r.element][r.side] = from_mortar(neg, mo, nr, flip);
                }
                FaceNeighbor::Boundary { .. } => {
                    let flux: Vec<f64> = (0..=mo)
                        .map(|k| {
                            let n = g.unit_normal[k];
                            let ghost = case.boundary_value(g.coords[k]);
                            let mut fl = law.numerical_flux(ql[k], ghost, n);
                            if let Some(a) = &gl {
                                fl -= mu * (a[0][k] * n[0] + a[1][k] * n[1]);
                            }
                            fl * g.surface_jacobian[k]
                        })
                        .collect();
                    out[l.element][l.side] = flux;
                }
            }
        }
        out
    }

    fn own_fluxes(&self, q_tr: &[Sides], g_tr: Option<&[[Sides; 2]]>) -> Vec<Sides> {
        let law = &*self.problem.case.law;
        let mu = law.viscosity();
        (0..q_tr.len())
            .map(|e| {
                let geom = self.disc.element(e);
                [0, 1, 2, 3].map(|s| {
                    geom.sides[s]
                        .scaled_normal
                        .iter()
                        .enumerate()
                        .map(|(k, ns)| {
                            let mut fl = law.advective_flux(q_tr[e][s][k]);
                            if let Some(gt) = g_tr {
                                fl[0] -= mu * gt[e][0][s][k];
                                fl[1] -= mu * gt[e][1][s][k];
                            }
                            fl[0] * ns[0] + fl[1] * ns[1]
                        })
                        .collect()
                })
            })
            .collect()
    }
}

/// Samples `f` at the physical node coordinates of every element.
pub fn sample_on(disc: &Discretization, f: impl Fn(Point) -> f64) -> NodalField {
    let mut out = NodalField::zeros(disc.orders());
    for e in 0..disc.n_elements() {
        let coords = &disc.element(e).coords;
        for (v, p) in out.element_mut(e).iter_mut().zip(coords) {
            *v = f(*p);
        }
    }
    out
}

/// Tangential order seen by side `s` of an element with orders `o`.
#[inline]
pub fn face_order(o: [usize; 2], s: usize) -> usize {
    o[side_tangent_direction(s)]
}
