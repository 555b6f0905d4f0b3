//! Disagreement probabilities between three binarized readouts and the
//! triangle inequalities they obey whenever a common joint distribution
//! exists.

use serde::{Deserialize, Serialize};

/// Pairwise disagreement probabilities `d_ij = P(A_i != A_j)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Disagreements {
    pub d12: f64,
    pub d13: f64,
    pub d23: f64,
}

impl Disagreements {
    pub fn new(d12: f64, d13: f64, d23: f64) -> Self {
        Disagreements { d12, d13, d23 }
    }

    /// Disagreement indicators of a single deterministic triple.
    pub fn of_triple(a: [bool; 3]) -> Self {
        let d = |x: bool, y: bool| if x != y { 1.0 } else { 0.0 };
        Disagreements {
            d12: d(a[0], a[1]),
            d13: d(a[0], a[2]),
            d23: d(a[1], a[2]),
        }
    }

    pub fn slacks(&self) -> TriangleSlacks {
        TriangleSlacks {
            eq1: self.d12 + self.d23 - self.d13,
            eq2: self.d12 + self.d13 - self.d23,
            eq3: self.d13 + self.d23 - self.d12,
        }
    }
}

/// Slack of each triangle inequality; negative means violated.
///
/// * `eq1 = d12 + d23 - d13`
/// * `eq2 = d12 + d13 - d23`
/// * `eq3 = d13 + d23 - d12`
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleSlacks {
    pub eq1: f64,
    pub eq2: f64,
    pub eq3: f64,
}

impl TriangleSlacks {
    pub fn as_array(&self) -> [f64; 3] {
        [self.eq1, self.eq2, self.eq3]
    }

    pub fn min(&self) -> f64 {
        self.eq1.min(self.eq2).min(self.eq3)
    }

    pub fn any_violated(&self) -> bool {
        self.min() < 0.0
    }
}

/// Labels used when reporting the three inequalities.
pub const INEQUALITY_IDS: [&str; 3] = ["d12+d23>=d13", "d12+d13>=d23", "d13+d23>=d12"];
