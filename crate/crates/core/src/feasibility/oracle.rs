//! Grid-search feasibility oracle.
//!
//! Enumerates joints whose atom probabilities are multiples of `1/grid`,
//! depth first with branch-and-bound on the largest marginal discrepancy, and
//! calls the system feasible when some grid joint comes within `1/(2·grid)`
//! of every supplied marginal. Works in floating point and shares no code
//! with the exact solver.

use super::{to_f64, Coordinate, FeasibilityResult, MarginalSystem, Q};

/// Result of the grid search.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSearch {
    /// Smallest discrepancy found below the limit, with the grid joint
    /// (atom counts out of `grid`).
    pub best: Option<(f64, Vec<u32>)>,
    pub grid: u32,
}

struct Constraint {
    atoms: Vec<usize>,
    /// Target in grid units.
    target: f64,
}

/// Searches for the grid joint minimizing the largest marginal discrepancy,
/// considering only discrepancies strictly below `limit`. The search starts
/// from a tight bound and widens it only when nothing is found, which keeps
/// the tree small when a near-exact joint exists.
pub fn oracle_search(m: &MarginalSystem, grid: u32, limit: f64) -> OracleSearch {
    let step = 1.0 / f64::from(grid);
    let mut bound = 0.5 * step;
    loop {
        let bound_now = bound.min(limit);
        let found = search_below(m, grid, bound_now);
        if found.best.is_some() || bound_now >= limit {
            return found;
        }
        bound *= 4.0;
    }
}

fn search_below(m: &MarginalSystem, grid: u32, limit: f64) -> OracleSearch {
    let n_atoms = m.n_atoms();
    let g = f64::from(grid);
    let mut constraints = Vec::new();
    for k in 0..m.n() {
        constraints.push(Coordinate::Single(k));
    }
    for p in m.pairs() {
        for a in 0..2u8 {
            for b in 0..2u8 {
                constraints.push(Coordinate::PairCell { i: p.i, j: p.j, a, b });
            }
        }
    }
    let constraints: Vec<Constraint> = constraints
        .into_iter()
        .map(|c| Constraint {
            atoms: (0..n_atoms)
                .filter(|&atom| {
                    let bit = |k: usize| ((atom >> k) & 1) as u8;
                    match c {
                        Coordinate::Total => true,
                        Coordinate::Single(k) => bit(k) == 1,
                        Coordinate::PairCell { i, j, a, b } => bit(i) == a && bit(j) == b,
                    }
                })
                .collect(),
            target: to_f64(&m.value(c).expect("own coordinate")) * g,
        })
        .collect();

    // Atoms with more ones first: their pair cells close early and narrow
    // the branching. The all-zeros atom comes last and takes the remainder.
    let mut order: Vec<usize> = (0..n_atoms).collect();
    order.sort_by_key(|&a| (std::cmp::Reverse(a.count_ones()), a));
    let position: Vec<usize> = {
        let mut pos = vec![0; n_atoms];
        for (p, &a) in order.iter().enumerate() {
            pos[a] = p;
        }
        pos
    };
    // For each depth: constraints that contain this atom, and whether the
    // atom is the last of them to be assigned.
    let touching: Vec<Vec<(usize, bool)>> = order
        .iter()
        .map(|&atom| {
            constraints
                .iter()
                .enumerate()
                .filter(|(_, c)| c.atoms.contains(&atom))
                .map(|(ci, c)| {
                    let last = c.atoms.iter().map(|&a| position[a]).max() == Some(position[atom]);
                    (ci, last)
                })
                .collect()
        })
        .collect();

    let mut search = Search {
        constraints: &constraints,
        touching: &touching,
        order: &order,
        partial: vec![0.0; constraints.len()],
        counts: vec![0; n_atoms],
        bound: limit * g,
        best: None,
    };
    search.descend(0, grid);
    OracleSearch {
        best: search.best.map(|(d, joint)| (d / g, joint)),
        grid,
    }
}

struct Search<'a> {
    constraints: &'a [Constraint],
    touching: &'a [Vec<(usize, bool)>],
    order: &'a [usize],
    partial: Vec<f64>,
    counts: Vec<u32>,
    /// Current discrepancy bound in grid units (strict).
    bound: f64,
    best: Option<(f64, Vec<u32>)>,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, remaining: u32) {
        let atom = self.order[depth];
        let is_last = depth + 1 == self.order.len();
        let (lo, hi) = if is_last {
            (remaining, remaining)
        } else {
            let mut lo = 0.0f64;
            let mut hi = f64::from(remaining);
            for &(ci, closes) in &self.touching[depth] {
                let c = &self.constraints[ci];
                let room = c.target + self.bound - self.partial[ci];
                hi = hi.min(room);
                if closes {
                    lo = lo.max(c.target - self.bound - self.partial[ci]);
                }
            }
            if hi < 0.0 || lo > hi {
                return;
            }
            let lo = lo.max(0.0).ceil() as u32;
            let hi = (hi.floor() as u32).min(remaining);
            (lo, hi)
        };
        for v in lo..=hi {
            let x = f64::from(v);
            let mut ok = true;
            for &(ci, closes) in &self.touching[depth] {
                let value = self.partial[ci] + x;
                let c = &self.constraints[ci];
                if closes {
                    let dev = (value - c.target).abs();
                    if dev >= self.bound {
                        ok = false;
                        break;
                    }
                } else if value - c.target >= self.bound {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            for &(ci, _) in &self.touching[depth] {
                self.partial[ci] += x;
            }
            self.counts[atom] = v;
            if is_last {
                let discrepancy = self.leaf_discrepancy();
                if discrepancy < self.bound {
                    self.bound = discrepancy;
                    self.best = Some((discrepancy, self.counts.clone()));
                }
            } else {
                self.descend(depth + 1, remaining - v);
            }
            for &(ci, _) in &self.touching[depth] {
                self.partial[ci] -= x;
            }
            self.counts[atom] = 0;
            if self.bound < 1e-9 {
                return;
            }
        }
    }

    fn leaf_discrepancy(&self) -> f64 {
        self.constraints
            .iter()
            .zip(&self.partial)
            .map(|(c, v)| (v - c.target).abs())
            .fold(0.0, f64::max)
    }
}

/// Feasible iff some joint on the `1/grid` simplex grid reproduces every
/// supplied marginal to within `1/(2·grid)`. Never produces a certificate.
pub fn brute_force_oracle(m: &MarginalSystem, grid: u32) -> FeasibilityResult {
    let grid = grid.max(1);
    let search = oracle_search(m, grid, 0.5 / f64::from(grid));
    match search.best {
        Some((_, counts)) => FeasibilityResult {
            feasible: true,
            witness: Some(
                counts
                    .iter()
                    .map(|&c| Q::new(c.into(), grid.into()))
                    .collect(),
            ),
            certificate: None,
        },
        None => FeasibilityResult {
            feasible: false,
            witness: None,
            certificate: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::{q, MarginalSystem, PairTable};
    use super::*;

    #[test]
    fn finds_exact_grid_joint() {
        let joint: Vec<Q> = [3, 0, 5, 2, 0, 0, 7, 3].iter().map(|&k| q(k, 20)).collect();
        let m = MarginalSystem::from_joint(3, &joint).unwrap();
        let s = oracle_search(&m, 200, 1.0);
        let (d, _) = s.best.unwrap();
        assert!(d < 1e-9);
        assert!(brute_force_oracle(&m, 200).feasible);
    }

    #[test]
    fn reports_minimum_discrepancy() {
        // A1 = A2 with P = 1/2 on an odd grid: every grid joint misses the
        // singles by half a step.
        let m = MarginalSystem::from_disagreements(vec![q(1, 2), q(1, 2)], &[((0, 1), q(0, 1))]).unwrap();
        let s = oracle_search(&m, 51, 1.0);
        let (d, _) = s.best.unwrap();
        assert!((d - 0.5 / 51.0).abs() < 1e-12);
        // Exactly on the tolerance boundary: not declared feasible.
        assert!(!brute_force_oracle(&m, 51).feasible);
        assert!(brute_force_oracle(&m, 50).feasible);
    }

    #[test]
    fn infeasible_cycle() {
        let m = MarginalSystem::from_disagreements(
            vec![q(1, 2); 3],
            &[((0, 1), q(1, 1)), ((0, 2), q(1, 1)), ((1, 2), q(1, 1))],
        )
        .unwrap();
        assert!(!brute_force_oracle(&m, 200).feasible);
        let s = oracle_search(&m, 50, 1.0);
        assert!(s.best.unwrap().0 >= 0.1);
    }

    #[test]
    fn singles_only() {
        let m = MarginalSystem::new(3, vec![q(1, 5), q(1, 2), q(3, 4)], Vec::<PairTable>::new()).unwrap();
        assert!(brute_force_oracle(&m, 60).feasible);
    }
}
