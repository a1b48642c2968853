//! Discrete action grid over the continuous charge/discharge fraction.

use serde::{Deserialize, Serialize};

use evshunt_core::error::{CoreError, Result};

/// Ordered discretization of the action fraction in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    levels: Vec<f64>,
}

impl ActionGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(CoreError::Config("action grid needs at least 2 levels".into()));
        }
        for pair in levels.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(CoreError::Config(format!(
                    "action levels must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if levels.first() != Some(&-1.0) || levels.last() != Some(&1.0) {
            return Err(CoreError::Config(
                "action grid must include -1 and 1 as its endpoints".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// `n` uniformly spaced levels over [-1, 1].
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::Config("action grid needs at least 2 levels".into()));
        }
        let levels = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        Self::new(levels)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn fraction(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Index of the zero-power action (closest level to 0).
    pub fn idle_index(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.levels.iter().enumerate() {
            if v.abs() < self.levels[best].abs() {
                best = i;
            }
        }
        best
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}
