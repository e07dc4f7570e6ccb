use super::{Discretization, NodalField};
use crate::mesh::Point;
use crate::spectral::{basis, lagrange_basis};

/// Points per direction of the fixed rule used to measure errors.
pub const ERROR_QUADRATURE_POINTS: usize = 24;

/// `||q_h - f||_L2` over the mesh, integrated with a fixed Gauss rule of
/// [`ERROR_QUADRATURE_POINTS`] per direction and element, independent of
/// the solution orders.
pub fn l2_error(disc: &Discretization, q: &NodalField, f: impl Fn(Point) -> f64) -> f64 {
    let quad = basis(ERROR_QUADRATURE_POINTS - 1);
    let mesh = disc.mesh();
    let mut total = 0.0;
    for e in 0..disc.n_elements() {
        let o = disc.orders().get(e);
        let (bx, by) = (basis(o[0]), basis(o[1]));
        let lx: Vec<Vec<f64>> = quad.nodes().iter().map(|&x| lagrange_basis(bx.nodes(), &bx.bary, x)).collect();
        let ly: Vec<Vec<f64>> = quad.nodes().iter().map(|&y| lagrange_basis(by.nodes(), &by.bary, y)).collect();
        let qe = q.element(e);
        let n1 = o[0] + 1;
        let mapping = &mesh.element(e).mapping;
        for (b, &eta) in quad.nodes().iter().enumerate() {
            // Collapse the eta direction first.
            let row: Vec<f64> = (0..n1)
                .map(|i| (0..=o[1]).map(|j| ly[b][j] * qe[i + n1 * j]).sum())
                .collect();
            for (a, &xi) in quad.nodes().iter().enumerate() {
                let qh: f64 = row.iter().zip(&lx[a]).map(|(v, l)| v * l).sum();
                let [a1, a2] = mapping.covariant(xi, eta);
                let jac = a1[0] * a2[1] - a2[0] * a1[1];
                let d = qh - f(mapping.map(xi, eta));
                total += quad.weights()[a] * quad.weights()[b] * jac * d * d;
            }
        }
    }
    total.sqrt()
}
