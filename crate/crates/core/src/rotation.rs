//! The three-rotation model on the sphere.
//!
//! Evaluation `E1` rotates about x by `alpha` and reads out along x, `E2`
//! rotates about y by `beta` and reads out along y, `E3` rotates about z by
//! `gamma` and reads out along z. With all angles at π/3 and the initial state
//! on the diagonal, each second-position readout takes one of two values and
//! every sequential-mean equality is violated by exactly one half.

use std::f64::consts::FRAC_PI_3;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::framework::{readout, run_sequence, Axis, Evaluation, Rotation, StateVector};
use crate::triangle::{Disagreements, TriangleSlacks};

pub const MODEL_LABELS: [&str; 3] = ["E1", "E2", "E3"];

/// Rotation matrix about a coordinate axis (right-handed, counter-clockwise).
pub fn build_rotation(axis: Axis, angle: f64) -> Rotation {
    let (s, c) = angle.sin_cos();
    let m = match axis {
        Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    };
    Rotation::from_matrix_unchecked(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationModelConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub v0: StateVector,
}

impl Default for RotationModelConfig {
    fn default() -> Self {
        RotationModelConfig {
            alpha: FRAC_PI_3,
            beta: FRAC_PI_3,
            gamma: FRAC_PI_3,
            v0: StateVector::diagonal(),
        }
    }
}

impl RotationModelConfig {
    pub fn angles(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn is_default(&self) -> bool {
        *self == RotationModelConfig::default()
    }

    /// The three evaluations with ids `E1`, `E2`, `E3`.
    pub fn evaluations(&self) -> [Evaluation; 3] {
        self.evaluations_labeled(MODEL_LABELS)
    }

    pub fn evaluations_labeled<S: AsRef<str>>(&self, labels: [S; 3]) -> [Evaluation; 3] {
        let angles = self.angles();
        std::array::from_fn(|k| {
            let axis = Axis::ALL[k];
            Evaluation::new(labels[k].as_ref(), build_rotation(axis, angles[k]), axis.unit())
        })
    }
}

/// Second-position mean readouts `C[i][j]` (evaluation `i` first, `j` second).
///
/// The diagonal holds the repeated-evaluation value `C_ii`; it is kept for
/// completeness and never enters the equality battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    pub labels: [String; 3],
    pub entries: [[f64; 3]; 3],
}

impl CMatrix {
    pub fn get(&self, first: usize, second: usize) -> Option<f64> {
        (first != second).then(|| self.entries[first][second])
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.entries[i][i]
    }

    /// The six ordered off-diagonal cells as `(first, second, value)`.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..3).flat_map(move |i| {
            (0..3)
                .filter(move |&j| j != i)
                .map(move |j| (i, j, self.entries[i][j]))
        })
    }

    /// `max |C_ij - C_kj|` over second evaluations `j` and predecessors `i, k != j`.
    pub fn max_equality_violation(&self) -> f64 {
        (0..3)
            .map(|j| {
                let preds: Vec<usize> = (0..3).filter(|&i| i != j).collect();
                (self.entries[preds[0]][j] - self.entries[preds[1]][j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Deterministic `C_ij = π_j(T_i(v0))`, no sampling.
pub fn exact_c_matrix(cfg: &RotationModelConfig) -> CMatrix {
    let evals = cfg.evaluations();
    let mut entries = [[0.0; 3]; 3];
    for (i, row) in entries.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = run_sequence(&evals[i], &evals[j], &cfg.v0).r2;
        }
    }
    CMatrix {
        labels: MODEL_LABELS.map(String::from),
        entries,
    }
}

/// `½(1 + c(1 - √3)/2)` and `½(1 + c(1 + √3)/2)` with `c = 1/√3`: the two
/// values every off-diagonal cell takes under the default configuration.
pub fn default_closed_forms() -> (f64, f64) {
    let c = 1.0 / 3f64.sqrt();
    let r3 = 3f64.sqrt();
    (0.5 * (1.0 + c * (1.0 - r3) / 2.0), 0.5 * (1.0 + c * (1.0 + r3) / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryCheck {
    pub readouts: [f64; 3],
    pub binarized: [bool; 3],
    pub disagreements: Disagreements,
    pub slacks: TriangleSlacks,
}

/// Binarizes the first-position readouts at ½ (`A_j = 1` iff `π_j(v0) >= ½`)
/// and evaluates the triangle inequalities for the single deterministic state.
pub fn binary_check(cfg: &RotationModelConfig) -> BinaryCheck {
    let evals = cfg.evaluations();
    let readouts = std::array::from_fn(|k| readout(&evals[k], &cfg.v0));
    let binarized = readouts.map(|r: f64| r >= 0.5);
    let disagreements = Disagreements::of_triple(binarized);
    BinaryCheck {
        readouts,
        binarized,
        disagreements,
        slacks: disagreements.slacks(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationTableRow {
    pub first: String,
    pub second: String,
    pub expression: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationTable {
    pub config: RotationModelConfig,
    pub first_states: [StateVector; 3],
    pub rows: Vec<RotationTableRow>,
    pub binary: BinaryCheck,
    pub max_equality_violation: f64,
}

/// The six-row sequential readout table with a symbolic form per entry.
pub fn rotation_table(cfg: &RotationModelConfig) -> RotationTable {
    let c = exact_c_matrix(cfg);
    let evals = cfg.evaluations();
    let default = cfg.is_default();
    let rows = c
        .off_diagonal()
        .map(|(i, j, value)| RotationTableRow {
            first: MODEL_LABELS[i].to_string(),
            second: MODEL_LABELS[j].to_string(),
            expression: expression(i, j, default),
            value,
        })
        .collect();
    RotationTable {
        config: *cfg,
        first_states: std::array::from_fn(|k| {
            crate::framework::apply_back_action(&evals[k], &cfg.v0)
        }),
        rows,
        binary: binary_check(cfg),
        max_equality_violation: c.max_equality_violation(),
    }
}

fn expression(first: usize, second: usize, default: bool) -> String {
    if default {
        // C12, C23, C31 take the lower value.
        let lower = (first + 1) % 3 == second;
        let sign = if lower { "1-√3" } else { "1+√3" };
        return format!("½(1 + c({sign})/2)");
    }
    let general = match (first, second) {
        (0, 1) => "½(1 + v_y cos α - v_z sin α)",
        (0, 2) => "½(1 + v_y sin α + v_z cos α)",
        (1, 0) => "½(1 + v_x cos β + v_z sin β)",
        (1, 2) => "½(1 - v_x sin β + v_z cos β)",
        (2, 0) => "½(1 + v_x cos γ - v_y sin γ)",
        (2, 1) => "½(1 + v_x sin γ + v_y cos γ)",
        _ => unreachable!("diagonal cells are not tabulated"),
    };
    general.to_string()
}

impl fmt::Display for RotationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cfg = &self.config;
        writeln!(
            f,
            "alpha = {:.6}  beta = {:.6}  gamma = {:.6}  v0 = {}",
            cfg.alpha, cfg.beta, cfg.gamma, cfg.v0
        )?;
        if cfg.is_default() {
            writeln!(f, "c = 1/√3 ≈ {:.6}", 1.0 / 3f64.sqrt())?;
        }
        for (k, s) in self.first_states.iter().enumerate() {
            writeln!(f, "T{}(v0) = {}", k + 1, s)?;
        }
        writeln!(f)?;
        writeln!(f, "{:<16} {:<32} {:>10}", "sequence", "C_ij (exact)", "C_ij")?;
        for row in &self.rows {
            fn idx(label: &str) -> &str {
                &label[1..]
            }
            let seq = format!("{} then {}", row.first, row.second);
            let name = format!("C{}{}", idx(&row.first), idx(&row.second));
            writeln!(
                f,
                "{:<16} {:<32} {:>10.6}",
                seq,
                format!("{name} = {}", row.expression),
                row.value
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "max |C_ij - C_kj| over shared second evaluation: {:.6}",
            self.max_equality_violation
        )?;
        let d = self.binary.disagreements;
        writeln!(
            f,
            "binarized A = {:?}, d12 = {}, d13 = {}, d23 = {}, triangle violation: {}",
            self.binary.binarized.map(u8::from),
            d.d12,
            d.d13,
            d.d23,
            if self.binary.slacks.any_violated() { "yes" } else { "no" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn rx_at_sixty_degrees() {
        let m = build_rotation(Axis::X, PI / 3.0).matrix();
        let h = 3f64.sqrt() / 2.0;
        let expected = [[1.0, 0.0, 0.0], [0.0, 0.5, -h], [0.0, h, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(m[i][j], expected[i][j], epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(m[1][2], -0.866025, epsilon = 1e-6);
    }

    #[test]
    fn trivial_angles_give_identity() {
        let id = Rotation::identity().matrix();
        assert_eq!(build_rotation(Axis::Z, 0.0).matrix(), id);
        let full = build_rotation(Axis::Y, 2.0 * PI).matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(full[i][j], id[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn every_built_rotation_is_proper() {
        for axis in Axis::ALL {
            for k in -20..=20 {
                let r = build_rotation(axis, k as f64 * 0.37);
                assert!(Rotation::new(r.matrix()).is_ok());
                assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn default_table_values() {
        let c = exact_c_matrix(&RotationModelConfig::default());
        let (lo, hi) = default_closed_forms();
        assert_abs_diff_eq!(lo, 0.394338, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 0.894338, epsilon = 1e-6);
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            assert_abs_diff_eq!(c.get(i, j).unwrap(), lo, epsilon = 1e-12);
        }
        for (i, j) in [(0, 2), (1, 0), (2, 1)] {
            assert_abs_diff_eq!(c.get(i, j).unwrap(), hi, epsilon = 1e-12);
        }
        assert!(c.get(1, 1).is_none());
        assert_abs_diff_eq!(c.max_equality_violation(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn zero_angles_read_out_the_initial_state() {
        let cfg = RotationModelConfig {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            ..Default::default()
        };
        let c = exact_c_matrix(&cfg);
        for (_, _, v) in c.off_diagonal() {
            assert_abs_diff_eq!(v, 0.788675, epsilon = 1e-6);
        }
        assert_eq!(c.max_equality_violation(), 0.0);
    }

    #[test]
    fn north_pole_state() {
        // R_x(α)·(0,0,1) = (0, -sin α, cos α), so C13 = ½(1 + cos α).
        let cfg = RotationModelConfig {
            v0: Axis::Z.unit(),
            ..Default::default()
        };
        let c = exact_c_matrix(&cfg);
        assert_abs_diff_eq!(c.get(0, 2).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn general_closed_forms_match() {
        let cfg = RotationModelConfig {
            alpha: 0.3,
            beta: -1.2,
            gamma: 2.5,
            v0: StateVector::normalized(0.2, -0.5, 0.8).unwrap(),
        };
        let [x, y, z] = cfg.v0.components();
        let (a, b, g) = (cfg.alpha, cfg.beta, cfg.gamma);
        let half = |t: f64| 0.5 * (1.0 + t);
        let expected = [
            (0, 1, half(y * a.cos() - z * a.sin())),
            (0, 2, half(y * a.sin() + z * a.cos())),
            (1, 0, half(x * b.cos() + z * b.sin())),
            (1, 2, half(-x * b.sin() + z * b.cos())),
            (2, 0, half(x * g.cos() - y * g.sin())),
            (2, 1, half(x * g.sin() + y * g.cos())),
        ];
        let c = exact_c_matrix(&cfg);
        for (i, j, e) in expected {
            assert_abs_diff_eq!(c.get(i, j).unwrap(), e, epsilon = 1e-12);
        }
    }

    #[test]
    fn binary_check_cases() {
        let default = binary_check(&RotationModelConfig::default());
        assert_eq!(default.binarized, [true; 3]);
        assert_eq!(default.disagreements, Disagreements::default());
        assert!(!default.slacks.any_violated());

        let mixed = binary_check(&RotationModelConfig {
            v0: StateVector::normalized(1.0, -1.0, 1.0).unwrap(),
            ..Default::default()
        });
        assert_eq!(mixed.disagreements, Disagreements::new(1.0, 0.0, 1.0));

        let tie = binary_check(&RotationModelConfig {
            v0: Axis::X.unit(),
            ..Default::default()
        });
        assert_eq!(tie.readouts[1], 0.5);
        assert_eq!(tie.readouts[2], 0.5);
        assert_eq!(tie.binarized, [true; 3]);
        assert_eq!(tie.disagreements, Disagreements::default());
    }

    #[test]
    fn table_rendering() {
        let table = rotation_table(&RotationModelConfig::default());
        assert_eq!(table.rows.len(), 6);
        let text = table.to_string();
        assert!(text.contains("C12 = ½(1 + c(1-√3)/2)"));
        assert!(text.contains("0.394338"));
        assert!(text.contains("0.894338"));
        assert!(text.contains("triangle violation: no"));
    }

    #[test]
    fn violation_is_continuous_in_angle() {
        let at = |t: f64| {
            exact_c_matrix(&RotationModelConfig {
                alpha: t,
                beta: t,
                gamma: t,
                ..Default::default()
            })
            .max_equality_violation()
        };
        let mut prev = at(0.0);
        assert_eq!(prev, 0.0);
        for k in 1..=1000 {
            let cur = at(k as f64 * 1e-3);
            assert!((cur - prev).abs() < 5e-3);
            prev = cur;
        }
    }
}
