//! Operator-evaluation bookkeeping.
//!
//! Every evaluation of the spatial operator adds the number of nodal
//! values it touched. One work unit is one RK3 sweep (three evaluations)
//! on a reference field, so coarse-level sweeps count in proportion to
//! their size.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Default)]
pub struct WorkCounter {
    full: AtomicU64,
    isolated: AtomicU64,
    full_calls: AtomicU64,
    isolated_calls: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WorkSnapshot {
    pub full_node_evals: u64,
    pub isolated_node_evals: u64,
    pub full_calls: u64,
    pub isolated_calls: u64,
}

impl WorkSnapshot {
    /// Work units relative to `reference_dofs`, counting every evaluation.
    pub fn work_units(&self, reference_dofs: usize) -> f64 {
        (self.full_node_evals + self.isolated_node_evals) as f64 / (3.0 * reference_dofs as f64)
    }

    pub fn since(&self, earlier: &WorkSnapshot) -> WorkSnapshot {
        WorkSnapshot {
            full_node_evals: self.full_node_evals - earlier.full_node_evals,
            isolated_node_evals: self.isolated_node_evals - earlier.isolated_node_evals,
            full_calls: self.full_calls - earlier.full_calls,
            isolated_calls: self.isolated_calls - earlier.isolated_calls,
        }
    }
}

impl WorkCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_full(&self, dofs: usize) {
        self.full.fetch_add(dofs as u64, Ordering::Relaxed);
        self.full_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_isolated(&self, dofs: usize) {
        self.isolated.fetch_add(dofs as u64, Ordering::Relaxed);
        self.isolated_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> WorkSnapshot {
        WorkSnapshot {
            full_node_evals: self.full.load(Ordering::Relaxed),
            isolated_node_evals: self.isolated.load(Ordering::Relaxed),
            full_calls: self.full_calls.load(Ordering::Relaxed),
            isolated_calls: self.isolated_calls.load(Ordering::Relaxed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sweep_is_one_unit() {
        let w = WorkCounter::new();
        for _ in 0..3 {
            w.record_full(50);
        }
        assert_eq!(w.snapshot().work_units(50), 1.0);
        w.record_isolated(25);
        let s = w.snapshot();
        assert_eq!(s.full_calls, 3);
        assert_eq!(s.isolated_calls, 1);
        assert!((s.work_units(50) - 7.0 / 6.0).abs() < 1e-15);
    }
}
