use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::transfer_2d;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Per-element anisotropic polynomial orders `(N1, N2)`.
///
/// Every construction or mutation draws a fresh version stamp; equality
/// compares the orders only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderField {
    orders: Vec<[usize; 2]>,
    #[serde(skip, default = "next_version")]
    version: u64,
}

impl PartialEq for OrderField {
    fn eq(&self, other: &Self) -> bool {
        self.orders == other.orders
    }
}

impl Eq for OrderField {}

impl OrderField {
    pub fn new(orders: Vec<[usize; 2]>) -> Self {
        Self {
            orders,
            version: next_version(),
        }
    }

    pub fn uniform(n_elements: usize, order: [usize; 2]) -> Self {
        Self::new(vec![order; n_elements])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    #[inline]
    pub fn get(&self, e: usize) -> [usize; 2] {
        self.orders[e]
    }

    pub fn set(&mut self, e: usize, order: [usize; 2]) {
        if self.orders[e] != order {
            self.orders[e] = order;
            self.version = next_version();
        }
    }

    pub fn as_slice(&self) -> &[[usize; 2]] {
        &self.orders
    }

    #[inline]
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn dofs(&self) -> usize {
        self.orders.iter().map(|o| (o[0] + 1) * (o[1] + 1)).sum()
    }

    /// Largest order per direction.
    pub fn max_orders(&self) -> [usize; 2] {
        self.orders
            .iter()
            .fold([0, 0], |m, o| [m[0].max(o[0]), m[1].max(o[1])])
    }

    pub fn min_order(&self) -> usize {
        self.orders.iter().flat_map(|o| o.iter().copied()).min().unwrap_or(0)
    }

    pub fn max_order(&self) -> usize {
        let m = self.max_orders();
        m[0].max(m[1])
    }
}

/// Nodal values per element, stored contiguously with the first reference
/// index fastest inside each element. Equality ignores the version stamp.
#[derive(Debug, Clone)]
pub struct NodalField {
    orders: Vec<[usize; 2]>,
    version: u64,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl PartialEq for NodalField {
    fn eq(&self, other: &Self) -> bool {
        self.orders == other.orders && self.data == other.data
    }
}

impl NodalField {
    pub fn zeros(orders: &OrderField) -> Self {
        let mut offsets = Vec::with_capacity(orders.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for o in orders.as_slice() {
            total += (o[0] + 1) * (o[1] + 1);
            offsets.push(total);
        }
        Self {
            orders: orders.as_slice().to_vec(),
            version: orders.version(),
            offsets,
            data: vec![0.0; total],
        }
    }

    pub fn from_elements(orders: &OrderField, values: Vec<Vec<f64>>) -> Result<Self> {
        let mut f = Self::zeros(orders);
        if values.len() != orders.len() {
            return Err(Error::InvalidInput(format!(
                "{} element arrays for {} elements",
                values.len(),
                orders.len()
            )));
        }
        for (e, v) in values.into_iter().enumerate() {
            if v.len() != f.element(e).len() {
                return Err(Error::InvalidInput(format!(
                    "element {e}: {} values for order {:?}",
                    v.len(),
                    orders.get(e)
                )));
            }
            f.element_mut(e).copy_from_slice(&v);
        }
        Ok(f)
    }

    #[inline]
    pub fn n_elements(&self) -> usize {
        self.orders.len()
    }

    #[inline]
    pub fn order(&self, e: usize) -> [usize; 2] {
        self.orders[e]
    }

    pub fn orders(&self) -> &[[usize; 2]] {
        &self.orders
    }

    #[inline]
    pub fn version(&self) -> u64 {
        self.version
    }

    /// True when the shape fits `orders`.
    pub fn matches(&self, orders: &OrderField) -> bool {
        self.orders == orders.as_slice()
    }

    #[inline]
    pub fn element(&self, e: usize) -> &[f64] {
        &self.data[self.offsets[e]..self.offsets[e + 1]]
    }

    #[inline]
    pub fn element_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.data[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn element_max_norm(&self, e: usize) -> f64 {
        self.element(e).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &NodalField) {
        debug_assert_eq!(self.orders, x.orders);
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// `self - other`
    pub fn difference(&self, other: &NodalField) -> NodalField {
        debug_assert_eq!(self.orders, other.orders);
        let mut out = self.clone();
        for (s, v) in out.data.iter_mut().zip(&other.data) {
            *s -= v;
        }
        out
    }

    /// Element-wise L2 transfer to new orders.
    pub fn transfer_to(&self, target: &OrderField) -> NodalField {
        assert_eq!(self.n_elements(), target.len(), "element count mismatch");
        let mut out = NodalField::zeros(target);
        for e in 0..self.n_elements() {
            let from = self.order(e);
            let to = target.get(e);
            if from == to {
                out.element_mut(e).copy_from_slice(self.element(e));
            } else {
                let v = transfer_2d(self.element(e), from, to);
                out.element_mut(e).copy_from_slice(&v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_orders() {
        let orders = OrderField::new(vec![[1, 2], [3, 3]]);
        let f = NodalField::zeros(&orders);
        assert_eq!(f.element(0).len(), 6);
        assert_eq!(f.element(1).len(), 16);
        assert_eq!(f.len(), orders.dofs());
        assert!(f.matches(&orders));
        assert_eq!(f.version(), orders.version());
    }

    #[test]
    fn versions_change_on_mutation_only() {
        let mut o = OrderField::uniform(3, [2, 2]);
        let v0 = o.version();
        o.set(1, [2, 2]);
        assert_eq!(o.version(), v0);
        o.set(1, [3, 2]);
        assert_ne!(o.version(), v0);
        assert_eq!(o, OrderField::new(vec![[2, 2], [3, 2], [2, 2]]));
    }

    #[test]
    fn transfer_round_trip_is_identity_upward() {
        let low = OrderField::uniform(2, [2, 1]);
        let high = OrderField::uniform(2, [4, 3]);
        let mut f = NodalField::zeros(&low);
        for (k, v) in f.values_mut().iter_mut().enumerate() {
            *v = (k as f64).sin();
        }
        let back = f.transfer_to(&high).transfer_to(&low);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn axpy_and_norms() {
        let o = OrderField::uniform(1, [1, 1]);
        let mut a = NodalField::from_elements(&o, vec![vec![1.0, -2.0, 3.0, 0.5]]).unwrap();
        let b = NodalField::from_elements(&o, vec![vec![1.0, 1.0, 1.0, 1.0]]).unwrap();
        a.axpy(-1.0, &b);
        assert_eq!(a.values(), &[0.0, -3.0, 2.0, -0.5]);
        assert_eq!(a.max_norm(), 3.0);
        assert!(NodalField::from_elements(&o, vec![vec![1.0]]).is_err());
    }
}
