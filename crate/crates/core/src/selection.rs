//! Placement selections: which candidate points the antennas occupy.
//!
//! Indices are 0-based internally (`0..I_pos`).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered candidate indices, one per antenna.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selection(Vec<usize>);

impl Selection {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_range(&self, limit: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= limit) {
            Some(&index) => Err(Error::IndexOutOfRange { index, limit }),
            None => Ok(()),
        }
    }

    /// In range and pairwise distinct.
    pub fn check(&self, limit: usize) -> Result<()> {
        self.check_range(limit)?;
        let mut seen = HashSet::with_capacity(self.0.len());
        for &i in &self.0 {
            if !seen.insert(i) {
                return Err(Error::DuplicateIndex { index: i });
            }
        }
        Ok(())
    }

    /// Number of antenna pairs `m < m'` sharing a candidate point, i.e. the
    /// sum of `xi_m^T xi_m'` over pairs.
    pub fn collision_pairs(&self) -> usize {
        let mut pairs = 0;
        for (a, &i) in self.0.iter().enumerate() {
            pairs += self.0[a + 1..].iter().filter(|&&j| j == i).count();
        }
        pairs
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for Selection {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}
