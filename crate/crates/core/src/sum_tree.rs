//! Sum segment tree for proportional sampling, plus a min tracker.
//!
//! Leaves hold transformed priorities `p^alpha`. A leaf holding `0.0` is an
//! empty slot: it carries no sampling mass and is invisible to the min tracker.

use crate::error::{Error, Result};

/// Binary min tree over `(value, key)` pairs. Ties on `value` resolve to the
/// smaller `key`. Empty leaves hold `(+inf, u64::MAX)`.
#[derive(Debug, Clone)]
pub struct MinTree {
    capacity: usize,
    size: usize,
    nodes: Vec<(f64, u64)>,
}

const EMPTY: (f64, u64) = (f64::INFINITY, u64::MAX);

fn less(a: (f64, u64), b: (f64, u64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn min_pair(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if less(b, a) {
        b
    } else {
        a
    }
}

impl MinTree {
    pub fn new(capacity: usize) -> Self {
        let size = capacity.max(1).next_power_of_two();
        Self {
            capacity,
            size,
            nodes: vec![EMPTY; 2 * size],
        }
    }

    pub fn set(&mut self, index: usize, value: f64, key: u64) {
        debug_assert!(index < self.capacity);
        let mut i = index + self.size;
        self.nodes[i] = (value, key);
        while i > 1 {
            i /= 2;
            self.nodes[i] = min_pair(self.nodes[2 * i], self.nodes[2 * i + 1]);
        }
    }

    pub fn clear(&mut self, index: usize) {
        self.set(index, EMPTY.0, EMPTY.1);
    }

    /// Minimum value and the slot holding it, if any slot is occupied.
    pub fn min(&self) -> Option<(f64, usize)> {
        let root = self.nodes[1];
        if root.0 == f64::INFINITY && root.1 == u64::MAX {
            return None;
        }
        let mut i = 1;
        while i < self.size {
            i = if self.nodes[2 * i] == root { 2 * i } else { 2 * i + 1 };
        }
        Some((root.0, i - self.size))
    }

    /// Recomputes every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for i in (1..self.size).rev() {
            self.nodes[i] = min_pair(self.nodes[2 * i], self.nodes[2 * i + 1]);
        }
    }

    /// Writes a leaf without updating ancestors; callers must `rebuild`.
    pub(crate) fn set_leaf_raw(&mut self, index: usize, value: f64, key: u64) {
        self.nodes[index + self.size] = (value, key);
    }
}

/// Sum tree over transformed priorities with an exact minimum tracker.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    size: usize,
    sums: Vec<f64>,
    mins: MinTree,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let size = capacity.max(1).next_power_of_two();
        Self {
            capacity,
            size,
            sums: vec![0.0; 2 * size],
            mins: MinTree::new(capacity),
        }
    }

    /// Builds a tree from leaf values in one O(N) pass.
    pub fn from_leaves(capacity: usize, leaves: &[f64]) -> Result<Self> {
        let mut tree = Self::new(capacity);
        if leaves.len() > capacity {
            return Err(Error::IndexOutOfRange {
                index: leaves.len() - 1,
                capacity,
            });
        }
        for (i, &v) in leaves.iter().enumerate() {
            check_value(v)?;
            tree.write_leaf(i, v);
        }
        tree.rebuild();
        Ok(tree)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn set_leaf(&mut self, index: usize, value: f64) -> Result<()> {
        if index >= self.capacity {
            return Err(Error::IndexOutOfRange {
                index,
                capacity: self.capacity,
            });
        }
        check_value(value)?;
        let mut i = index + self.size;
        self.sums[i] = value;
        while i > 1 {
            i /= 2;
            self.sums[i] = self.sums[2 * i] + self.sums[2 * i + 1];
        }
        if value > 0.0 {
            self.mins.set(index, value, index as u64);
        } else {
            self.mins.clear(index);
        }
        Ok(())
    }

    pub fn leaf(&self, index: usize) -> f64 {
        self.sums[index + self.size]
    }

    pub fn total(&self) -> f64 {
        self.sums[1]
    }

    /// Smallest positive leaf.
    pub fn min_transformed(&self) -> Result<f64> {
        self.mins.min().map(|(v, _)| v).ok_or(Error::EmptyTree)
    }

    /// Smallest index whose inclusive cumulative sum exceeds `x`.
    pub fn prefix_find(&self, x: f64) -> Result<usize> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::EmptyTree);
        }
        if !(x >= 0.0 && x < total) {
            return Err(Error::PrefixOutOfRange { x, total });
        }
        let mut rem = x;
        let mut i = 1;
        while i < self.size {
            let (left, right) = (2 * i, 2 * i + 1);
            let go_right = rem >= self.sums[left];
            // Rounding can make a descent target a zero-mass subtree.
            i = if (go_right && self.sums[right] > 0.0) || self.sums[left] <= 0.0 {
                rem -= self.sums[left];
                right
            } else {
                left
            };
        }
        Ok(i - self.size)
    }

    /// Recomputes all internal sums and the min tracker from the leaves.
    pub fn rebuild(&mut self) {
        for i in (1..self.size).rev() {
            self.sums[i] = self.sums[2 * i] + self.sums[2 * i + 1];
        }
        self.mins.rebuild();
    }

    /// Writes a leaf without touching ancestors; callers must `rebuild`.
    fn write_leaf(&mut self, index: usize, value: f64) {
        self.sums[index + self.size] = value;
        let (v, k) = if value > 0.0 { (value, index as u64) } else { EMPTY };
        self.mins.set_leaf_raw(index, v, k);
    }

    /// Overwrites leaves in bulk and rebuilds once.
    pub fn set_leaves_and_rebuild(&mut self, values: &[(usize, f64)]) -> Result<()> {
        for &(i, v) in values {
            if i >= self.capacity {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    capacity: self.capacity,
                });
            }
            check_value(v)?;
        }
        for &(i, v) in values {
            self.write_leaf(i, v);
        }
        self.rebuild();
        Ok(())
    }
}

fn check_value(value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLeafValue(value))
    }
}
