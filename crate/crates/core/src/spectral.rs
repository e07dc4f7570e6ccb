//! One-dimensional spectral building blocks on `[-1, 1]`.
//!
//! Legendre-Gauss quadrature, Lagrange interpolation on the Gauss nodes,
//! nodal differentiation and the L2 transfer matrices used between
//! polynomial orders. Every operator for a given order (or order pair) is
//! built once and shared through [`basis`] and [`transfer`].

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Dense row-major matrix, sized for the small operators used here.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix shapes do not compose");
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        })
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Legendre-Gauss rule of order `N` (N + 1 points).
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature1D {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    match n {
        0 => (1.0, 0.0),
        1 => (x, 1.0),
        _ => {
            let (mut p_prev, mut p) = (1.0, x);
            let (mut d_prev, mut d) = (0.0, 1.0);
            for k in 2..=n {
                let kf = k as f64;
                let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
                let d_next = d_prev + (2.0 * kf - 1.0) * p;
                p_prev = p;
                p = p_next;
                d_prev = d;
                d = d_next;
            }
            (p, d)
        }
    }
}

/// Roots of `P_{N+1}` and the matching Gauss weights.
///
/// Newton iteration from Chebyshev-like initial guesses; the lower half is
/// computed and mirrored so the rule is exactly symmetric.
pub fn gauss_nodes(order: usize) -> Quadrature1D {
    let n = order + 1;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = x;
        nodes[n - 1 - k] = -x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Quadrature1D {
        order,
        nodes,
        weights,
    }
}

/// Barycentric weights for Lagrange interpolation on `nodes`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| nodes[j] - xk)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Values of all Lagrange polynomials on `nodes` at `x`.
pub fn lagrange_basis(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&xj| (x - xj).abs() < 1e-15) {
        let mut l = vec![0.0; nodes.len()];
        l[j] = 1.0;
        return l;
    }
    let terms: Vec<f64> = nodes
        .iter()
        .zip(bary)
        .map(|(&xj, &bj)| bj / (x - xj))
        .collect();
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / total).collect()
}

/// Derivatives of all Lagrange polynomials on `nodes` at an arbitrary `x`.
pub fn lagrange_basis_derivative(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    if let Some(i) = nodes.iter().position(|&xj| (x - xj).abs() < 1e-15) {
        let d = differentiation_matrix_on(nodes, bary);
        return d.row(i).to_vec();
    }
    // l_j'(x) = l_j(x) * sum_{k != j} 1/(x - x_k)
    let l = lagrange_basis(nodes, bary, x);
    let inv: Vec<f64> = nodes.iter().map(|&xk| 1.0 / (x - xk)).collect();
    let total: f64 = inv.iter().sum();
    (0..n).map(|j| l[j] * (total - inv[j])).collect()
}

fn differentiation_matrix_on(nodes: &[f64], bary: &[f64]) -> Matrix {
    let n = nodes.len();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// `D[i][j] = l_j'(x_i)` on the Gauss nodes of `q`.
pub fn differentiation_matrix(q: &Quadrature1D) -> Matrix {
    differentiation_matrix_on(&q.nodes, &barycentric_weights(&q.nodes))
}

/// L2 transfer from order `from` to order `to` on Gauss nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix1D {
    pub from_order: usize,
    pub to_order: usize,
    pub entries: Matrix,
}

impl TransferMatrix1D {
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.entries.apply(values)
    }
}

/// Matrix mapping nodal values at order-`from` Gauss nodes to nodal values
/// of the L2-best polynomial of degree `to`.
///
/// Built as `W_to^{-1} V_to^T W_q V_from` on a Gauss rule of order
/// `max(from, to)`, which integrates the products exactly. For `to >= from`
/// this reduces to interpolation.
pub fn l2_projection(from: usize, to: usize) -> TransferMatrix1D {
    if from == to {
        return TransferMatrix1D {
            from_order: from,
            to_order: to,
            entries: Matrix::identity(from + 1),
        };
    }
    let src = gauss_nodes(from);
    let dst = gauss_nodes(to);
    let quad = gauss_nodes(from.max(to));
    let src_bary = barycentric_weights(&src.nodes);
    let dst_bary = barycentric_weights(&dst.nodes);
    let mut entries = Matrix::zeros(to + 1, from + 1);
    for (&xm, &wm) in quad.nodes.iter().zip(&quad.weights) {
        let ls = lagrange_basis(&src.nodes, &src_bary, xm);
        let ld = lagrange_basis(&dst.nodes, &dst_bary, xm);
        for i in 0..=to {
            for k in 0..=from {
                entries[(i, k)] += wm * ld[i] * ls[k];
            }
        }
    }
    for i in 0..=to {
        let inv = 1.0 / dst.weights[i];
        for k in 0..=from {
            entries[(i, k)] *= inv;
        }
    }
    TransferMatrix1D {
        from_order: from,
        to_order: to,
        entries,
    }
}

/// Pre-multiplied operators for one order, as used by the DG kernels.
#[derive(Debug, Clone)]
pub struct Basis1D {
    pub quad: Quadrature1D,
    pub bary: Vec<f64>,
    pub diff: Matrix,
    /// `hat[i][k] = -w_k D[k][i] / w_i`, the weak-form volume operator.
    pub hat: Matrix,
    /// Lagrange polynomials evaluated at `-1` and `+1`.
    pub at_left: Vec<f64>,
    pub at_right: Vec<f64>,
}

impl Basis1D {
    pub fn new(order: usize) -> Self {
        let quad = gauss_nodes(order);
        let bary = barycentric_weights(&quad.nodes);
        let diff = differentiation_matrix_on(&quad.nodes, &bary);
        let w = &quad.weights;
        let hat = Matrix::from_fn(order + 1, order + 1, |i, k| -w[k] * diff[(k, i)] / w[i]);
        let at_left = lagrange_basis(&quad.nodes, &bary, -1.0);
        let at_right = lagrange_basis(&quad.nodes, &bary, 1.0);
        Self {
            quad,
            bary,
            diff,
            hat,
            at_left,
            at_right,
        }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.quad.order
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.quad.nodes
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.quad.weights
    }

    pub fn interpolate_at(&self, values: &[f64], x: f64) -> f64 {
        lagrange_basis(&self.quad.nodes, &self.bary, x)
            .iter()
            .zip(values)
            .map(|(l, v)| l * v)
            .sum()
    }
}

/// Keyed operator cache. Values are built outside the lock and published
/// with a single insert, so concurrent readers never see partial state.
struct Cache<K, V> {
    map: RwLock<HashMap<K, Arc<V>>>,
}

impl<K: std::hash::Hash + Eq + Copy, V> Cache<K, V> {
    fn new() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
        }
    }

    fn get_or_build(&self, key: K, build: impl FnOnce() -> V) -> Arc<V> {
        if let Some(v) = self.map.read().expect("cache poisoned").get(&key) {
            return Arc::clone(v);
        }
        let value = Arc::new(build());
        let mut map = self.map.write().expect("cache poisoned");
        Arc::clone(map.entry(key).or_insert(value))
    }
}

fn basis_cache() -> &'static Cache<usize, Basis1D> {
    static CACHE: OnceLock<Cache<usize, Basis1D>> = OnceLock::new();
    CACHE.get_or_init(Cache::new)
}

fn transfer_cache() -> &'static Cache<(usize, usize), TransferMatrix1D> {
    static CACHE: OnceLock<Cache<(usize, usize), TransferMatrix1D>> = OnceLock::new();
    CACHE.get_or_init(Cache::new)
}

/// Shared [`Basis1D`] for `order`.
pub fn basis(order: usize) -> Arc<Basis1D> {
    basis_cache().get_or_build(order, || Basis1D::new(order))
}

/// Shared [`l2_projection`] for the pair `(from, to)`.
pub fn transfer(from: usize, to: usize) -> Arc<TransferMatrix1D> {
    transfer_cache().get_or_build((from, to), || l2_projection(from, to))
}

/// Applies 1D transfers along both directions of a tensor-product array
/// stored with the first index fastest.
pub fn transfer_2d(values: &[f64], from: [usize; 2], to: [usize; 2]) -> Vec<f64> {
    let (p1, p2) = (from[0] + 1, from[1] + 1);
    let (n1, n2) = (to[0] + 1, to[1] + 1);
    debug_assert_eq!(values.len(), p1 * p2);
    let t1 = transfer(from[0], to[0]);
    let t2 = transfer(from[1], to[1]);
    let mut tmp = vec![0.0; n1 * p2];
    for j in 0..p2 {
        let src = &values[j * p1..(j + 1) * p1];
        t1.entries.apply_into(src, &mut tmp[j * n1..(j + 1) * n1]);
    }
    let mut out = vec![0.0; n1 * n2];
    let m = &t2.entries;
    for j in 0..n2 {
        let row = m.row(j);
        for (k, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let src = &tmp[k * n1..(k + 1) * n1];
            let dst = &mut out[j * n1..(j + 1) * n1];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += c * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weighted_norm(q: &Quadrature1D, v: &[f64]) -> f64 {
        q.weights
            .iter()
            .zip(v)
            .map(|(w, x)| w * x * x)
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn midpoint_rule() {
        let q = gauss_nodes(0);
        assert_eq!(q.nodes, vec![0.0]);
        assert!((q.weights[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_rule_matches_companion_eigenvalues() {
        // Jacobi matrix for Legendre with two points: [[0, 1/sqrt(3)], [1/sqrt(3), 0]].
        let q = gauss_nodes(1);
        let root = 1.0 / 3f64.sqrt();
        assert!((q.nodes[0] + 0.5773502691896258).abs() < 1e-15);
        assert!((q.nodes[1] - root).abs() < 1e-15);
        assert!((q.weights[0] - 1.0).abs() < 1e-15);
        assert!((q.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn x8_with_five_points() {
        let q = gauss_nodes(4);
        let v = q.integrate(|x| x.powi(8));
        assert!((v - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn exact_up_to_degree_2n_plus_1() {
        for n in 0..=8 {
            let q = gauss_nodes(n);
            for d in 0..=(2 * n + 1) {
                let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
                let v = q.integrate(|x| x.powi(d as i32));
                assert!((v - exact).abs() < 1e-13, "N={n} degree {d}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn nodes_sorted_symmetric_weights_sum_two() {
        for n in 0..=30 {
            let q = gauss_nodes(n);
            assert!(q.nodes.windows(2).all(|w| w[0] < w[1]), "N={n}");
            for k in 0..=n {
                assert!((q.nodes[k] + q.nodes[n - k]).abs() < 1e-15);
                assert!(q.weights[k] > 0.0);
                assert!(q.nodes[k].abs() < 1.0);
            }
            let total: f64 = q.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "N={n}: {total}");
        }
    }

    #[test]
    fn derivative_of_constants_vanishes() {
        for n in 0..=12 {
            let d = differentiation_matrix(&gauss_nodes(n));
            let ones = vec![1.0; n + 1];
            let r = d.apply(&ones);
            assert!(r.iter().all(|v| v.abs() < 1e-13), "N={n}: {r:?}");
        }
    }

    #[test]
    fn derivative_of_linear_is_one() {
        let q = gauss_nodes(3);
        let d = differentiation_matrix(&q);
        let r = d.apply(&q.nodes);
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn derivative_of_quartic() {
        let q = gauss_nodes(4);
        let d = differentiation_matrix(&q);
        let f: Vec<f64> = q.nodes.iter().map(|x| x.powi(4)).collect();
        let r = d.apply(&f);
        for (x, v) in q.nodes.iter().zip(r) {
            assert!((v - 4.0 * x.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_same_order_is_identity() {
        let t = l2_projection(5, 5);
        assert_eq!(t.entries, Matrix::identity(6));
    }

    #[test]
    fn embedding_reproduces_quadratic() {
        let src = gauss_nodes(2);
        let dst = gauss_nodes(5);
        let v: Vec<f64> = src.nodes.iter().map(|x| x * x).collect();
        let out = l2_projection(2, 5).apply(&v);
        for (x, o) in dst.nodes.iter().zip(out) {
            assert!((o - x * x).abs() < 1e-14);
        }
    }

    #[test]
    fn restriction_of_x5_is_legendre_truncation() {
        // x^5 = 8/63 P5 + 4/9 P3 + 3/7 P1, so the degree-2 truncation is 3x/7.
        let src = gauss_nodes(5);
        let dst = gauss_nodes(2);
        let v: Vec<f64> = src.nodes.iter().map(|x| x.powi(5)).collect();
        let out = l2_projection(5, 2).apply(&v);
        for (x, o) in dst.nodes.iter().zip(out) {
            assert!((o - 3.0 * x / 7.0).abs() < 1e-14, "{o} vs {}", 3.0 * x / 7.0);
        }
    }

    #[test]
    fn restriction_matches_numerical_legendre_expansion() {
        // Oracle: Legendre coefficients by a 40-point rule, truncated and evaluated.
        let f = |x: f64| (2.0 * x).sin() + x.powi(3);
        let fine = gauss_nodes(40);
        for (p, n) in [(7, 3), (9, 4), (6, 5)] {
            let src = gauss_nodes(p);
            let dst = gauss_nodes(n);
            let vals: Vec<f64> = src.nodes.iter().map(|&x| f(x)).collect();
            // Projection of the degree-p interpolant of f.
            let interp = basis(p);
            let coeffs: Vec<f64> = (0..=n)
                .map(|k| {
                    let c = fine.integrate(|x| interp.interpolate_at(&vals, x) * legendre(k, x).0);
                    c * (2.0 * k as f64 + 1.0) / 2.0
                })
                .collect();
            let out = l2_projection(p, n).apply(&vals);
            for (x, o) in dst.nodes.iter().zip(out) {
                let expect: f64 = coeffs.iter().enumerate().map(|(k, c)| c * legendre(k, *x).0).sum();
                assert!((o - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn prolong_then_restrict_is_identity() {
        for p in 0..6 {
            for n in p..9 {
                let up = l2_projection(p, n);
                let down = l2_projection(n, p);
                let c = down.entries.matmul(&up.entries);
                assert!(c.max_abs_diff(&Matrix::identity(p + 1)) < 1e-13, "{p}->{n}");
            }
        }
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        let p = 7;
        let n = 3;
        let src = gauss_nodes(p);
        let vals: Vec<f64> = src.nodes.iter().map(|x| (3.0 * x).cos()).collect();
        let down = l2_projection(p, n).apply(&vals);
        let back = l2_projection(n, p).apply(&down);
        let resid: Vec<f64> = vals.iter().zip(&back).map(|(a, b)| a - b).collect();
        let b = basis(p);
        for k in 0..=n {
            let ip: f64 = (0..=p)
                .map(|i| b.weights()[i] * resid[i] * legendre(k, b.nodes()[i]).0)
                .sum();
            assert!(ip.abs() < 1e-14);
        }
    }

    #[test]
    fn transfer_2d_embeds_tensor_polynomial() {
        let from = [2, 3];
        let to = [4, 5];
        let bx = basis(from[0]);
        let by = basis(from[1]);
        let mut v = Vec::new();
        for &y in by.nodes() {
            for &x in bx.nodes() {
                v.push(x * x * y.powi(3) + x);
            }
        }
        let out = transfer_2d(&v, from, to);
        let tx = basis(to[0]);
        let ty = basis(to[1]);
        let mut k = 0;
        for &y in ty.nodes() {
            for &x in tx.nodes() {
                assert!((out[k] - (x * x * y.powi(3) + x)).abs() < 1e-13);
                k += 1;
            }
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn restriction_never_increases_l2_norm(
            p in 1usize..12,
            drop in 1usize..6,
            raw in proptest::collection::vec(-10.0f64..10.0, 12),
        ) {
            let n = p.saturating_sub(drop);
            let src = gauss_nodes(p);
            let dst = gauss_nodes(n);
            let v = &raw[..=p];
            let out = l2_projection(p, n).apply(v);
            prop_assert!(weighted_norm(&dst, &out) <= weighted_norm(&src, v) * (1.0 + 1e-12) + 1e-13);
        }
    }

    #[test]
    fn restriction_preserves_norm_in_target_space() {
        let p = 8;
        let n = 4;
        let src = gauss_nodes(p);
        let dst = gauss_nodes(n);
        let v: Vec<f64> = src.nodes.iter().map(|x| 1.0 - 2.0 * x + x.powi(4)).collect();
        let out = l2_projection(p, n).apply(&v);
        assert!((weighted_norm(&dst, &out) - weighted_norm(&src, &v)).abs() < 1e-13);
    }
}
