//! Internal states, evaluations and sequential composition.
//!
//! An evaluation is a pair of a back-action, which moves the internal state,
//! and a readout, which maps a state to an observable value in `[0, 1]`.
//! States live on the unit sphere in R³; back-actions are proper rotations
//! and readouts are affine projections `(1 + a·v) / 2` onto a unit axis.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance accepted on `|v| - 1` when constructing a state from raw input.
pub const UNIT_INPUT_TOLERANCE: f64 = 1e-9;

/// Tolerance on the entries of `B·Bᵀ - I` for a back-action matrix.
pub const ROTATION_TOLERANCE: f64 = 1e-10;

/// Default threshold separating "equal" from "different" in
/// [`classify_order_dependence`].
pub const DEFAULT_ORDER_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> StateVector {
        let mut c = [0.0; 3];
        c[self.index()] = 1.0;
        StateVector(c)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// A pure internal state: a point on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StateVector([f64; 3]);

impl StateVector {
    /// Builds a state from components that are already unit length (within
    /// [`UNIT_INPUT_TOLERANCE`]); the result is re-normalized exactly.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = norm3([x, y, z]);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_INPUT_TOLERANCE {
            return Err(Error::NonUnitState { norm });
        }
        Ok(StateVector([x / norm, y / norm, z / norm]))
    }

    /// Projects an arbitrary nonzero vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = norm3([x, y, z]);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::DegenerateVector);
        }
        Ok(StateVector([x / norm, y / norm, z / norm]))
    }

    /// `(1, 1, 1) / √3`, the reference initial state of the rotation model.
    pub fn diagonal() -> Self {
        let c = 1.0 / 3f64.sqrt();
        StateVector([c, c, c])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm3(self.0)
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        dot3(self.0, other.0)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        norm3([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(deserializer)?;
        StateVector::new(x, y, z).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.0[0], self.0[1], self.0[2])
    }
}

/// A finite probability mixture of pure states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedState {
    components: Vec<(f64, StateVector)>,
}

impl MixedState {
    pub fn new(components: Vec<(f64, StateVector)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture("no components".into()));
        }
        if let Some((w, _)) = components
            .iter()
            .find(|(w, _)| !w.is_finite() || !(0.0..=1.0).contains(w))
        {
            return Err(Error::InvalidMixture(format!("weight {w} outside [0, 1]")));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(MixedState { components })
    }

    pub fn pure(state: StateVector) -> Self {
        MixedState {
            components: vec![(1.0, state)],
        }
    }

    pub fn components(&self) -> &[(f64, StateVector)] {
        &self.components
    }

    /// Applies the back-action to every component; weights are unchanged.
    pub fn apply(&self, evaluation: &Evaluation) -> MixedState {
        MixedState {
            components: self
                .components
                .iter()
                .map(|&(w, s)| (w, apply_back_action(evaluation, &s)))
                .collect(),
        }
    }

    /// Expected readout over the mixture.
    pub fn mean_readout(&self, evaluation: &Evaluation) -> f64 {
        self.components
            .iter()
            .map(|(w, s)| w * readout(evaluation, s))
            .sum()
    }
}

/// A proper rotation matrix (orthogonal, determinant +1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    pub fn identity() -> Self {
        Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NotARotation {
                reason: "non-finite entry".into(),
            });
        }
        let deviation = orthogonality_deviation(&m);
        if deviation > ROTATION_TOLERANCE {
            return Err(Error::NotARotation {
                reason: format!("max |B·Bᵀ - I| entry is {deviation:e}"),
            });
        }
        let det = determinant(&m);
        if det <= 0.0 {
            return Err(Error::NotARotation {
                reason: format!("determinant is {det}"),
            });
        }
        Ok(Rotation(m))
    }

    /// Callers guarantee `m` is in SO(3).
    pub(crate) fn from_matrix_unchecked(m: [[f64; 3]; 3]) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.0
    }

    /// Applies the matrix without re-normalizing.
    pub fn apply_raw(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            dot3(m[0], v),
            dot3(m[1], v),
            dot3(m[2], v),
        ]
    }

    /// `self · other`, i.e. `other` acts first.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Rotation(out)
    }

    pub fn determinant(&self) -> f64 {
        determinant(&self.0)
    }

    pub fn orthogonality_deviation(&self) -> f64 {
        orthogonality_deviation(&self.0)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let m = <[[f64; 3]; 3]>::deserialize(deserializer)?;
        Rotation::new(m).map_err(serde::de::Error::custom)
    }
}

/// A metacognitive evaluation: back-action plus readout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub id: String,
    pub back_action: Rotation,
    pub readout_axis: StateVector,
}

impl Evaluation {
    pub fn new(id: impl Into<String>, back_action: Rotation, readout_axis: StateVector) -> Self {
        Evaluation {
            id: id.into(),
            back_action,
            readout_axis,
        }
    }

    /// Evaluation with no back-action reading out along `axis`.
    pub fn passive(id: impl Into<String>, axis: Axis) -> Self {
        Evaluation::new(id, Rotation::identity(), axis.unit())
    }
}

/// Applies `e`'s back-action to `s` and re-normalizes. No readout is produced.
pub fn apply_back_action(e: &Evaluation, s: &StateVector) -> StateVector {
    let v = e.back_action.apply_raw(s.0);
    let n = norm3(v);
    StateVector([v[0] / n, v[1] / n, v[2] / n])
}

/// `(1 + a·s) / 2` for readout axis `a`, clamped against rounding at the poles.
pub fn readout(e: &Evaluation, s: &StateVector) -> f64 {
    (0.5 * (1.0 + e.readout_axis.dot(s))).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceOutcome {
    pub r1: f64,
    pub r2: f64,
    pub final_state: StateVector,
}

/// Performs `first` then `second` on `s`: the first readout is taken on `s`,
/// the second on the state left behind by `first`.
pub fn run_sequence(first: &Evaluation, second: &Evaluation, s: &StateVector) -> SequenceOutcome {
    let r1 = readout(first, s);
    let after_first = apply_back_action(first, s);
    let r2 = readout(second, &after_first);
    SequenceOutcome {
        r1,
        r2,
        final_state: apply_back_action(second, &after_first),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderDependenceKind {
    None,
    Weak,
    Strong,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderDependenceVerdict {
    pub kind: OrderDependenceKind,
    /// `|T₂T₁s - T₁T₂s|`
    pub state_gap: f64,
    /// `|π₂(T₁s) - π₁(T₂s)|`
    pub readout_gap: f64,
    /// Set whenever some order dependence is present: the two evaluations
    /// then admit no representation as commuting events of one Boolean algebra.
    pub no_boolean_commutative_representation: bool,
}

/// Strong when the final states differ, weak when only the second-position
/// readouts differ.
pub fn classify_order_dependence(
    e1: &Evaluation,
    e2: &Evaluation,
    s: &StateVector,
    tol: f64,
) -> Result<OrderDependenceVerdict> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::validation("tol", "must be positive and finite"));
    }
    let one_then_two = run_sequence(e1, e2, s);
    let two_then_one = run_sequence(e2, e1, s);
    let state_gap = one_then_two.final_state.distance(&two_then_one.final_state);
    let readout_gap = (one_then_two.r2 - two_then_one.r2).abs();
    let kind = if state_gap > tol {
        OrderDependenceKind::Strong
    } else if readout_gap > tol {
        OrderDependenceKind::Weak
    } else {
        OrderDependenceKind::None
    };
    Ok(OrderDependenceVerdict {
        kind,
        state_gap,
        readout_gap,
        no_boolean_commutative_representation: kind != OrderDependenceKind::None,
    })
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(v: [f64; 3]) -> f64 {
    dot3(v, v).sqrt()
}

fn determinant(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn orthogonality_deviation(m: &[[f64; 3]; 3]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot3(m[i], m[j]) - target).abs());
        }
    }
    worst
}
