//! Does a joint distribution over two or three dichotomic readouts reproduce
//! a given set of singleton and pairwise marginals?
//!
//! [`check_feasibility`] answers exactly with rational arithmetic: a witness
//! joint when one exists, otherwise an affine functional on the marginal
//! coordinates that is nonnegative on every deterministic joint and negative
//! on the input. [`brute_force_oracle`] answers the same question by grid
//! search in floating point and exists to cross-check the exact route.

mod oracle;
mod rational;
mod simplex;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triangle::TriangleSlacks;

pub use oracle::{brute_force_oracle, oracle_search, OracleSearch};
pub use rational::{limit_denominator, parse_rational, rationalize, to_f64};

pub type Q = BigRational;

pub const DEFAULT_DENOMINATOR_BOUND: u64 = 1_000_000;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// `cells[a][b] = P(A_i = a, A_j = b)`, with `i < j` (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct PairTable {
    pub i: usize,
    pub j: usize,
    pub cells: [[Q; 2]; 2],
}

impl PairTable {
    pub fn new(i: usize, j: usize, cells: [[Q; 2]; 2]) -> Self {
        if i < j {
            PairTable { i, j, cells }
        } else {
            let [[a, b], [c, d]] = cells;
            PairTable {
                i: j,
                j: i,
                cells: [[a, c], [b, d]],
            }
        }
    }

    /// The unique table with the given singles and disagreement probability.
    pub fn from_disagreement(i: usize, j: usize, single_i: &Q, single_j: &Q, d: &Q) -> Self {
        let two = Q::from_integer(2.into());
        let p10 = (d + single_i - single_j) / &two;
        let p01 = (d - single_i + single_j) / &two;
        let p11 = single_i - &p10;
        let p00 = Q::one() - single_i - &p01;
        PairTable::new(i, j, [[p00, p01], [p10, p11]])
    }

    pub fn disagreement(&self) -> Q {
        &self.cells[0][1] + &self.cells[1][0]
    }
}

/// Where a float input was replaced by a nearby rational.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rounding {
    pub location: String,
    pub input: f64,
    pub rational: String,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalSystem {
    n: usize,
    singles: Vec<Q>,
    pairs: Vec<PairTable>,
    pub roundings: Vec<Rounding>,
}

impl MarginalSystem {
    /// Validates exactly: `n` in {2, 3}, probabilities in `[0, 1]`, each pair
    /// table summing to one and agreeing with both of its singles.
    pub fn new(n: usize, singles: Vec<Q>, pairs: Vec<PairTable>) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidMarginals(format!(
                "n must be 2 or 3, got {n}"
            )));
        }
        if singles.len() != n {
            return Err(Error::InvalidMarginals(format!(
                "expected {n} singleton probabilities, got {}",
                singles.len()
            )));
        }
        let unit = |v: &Q| !v.is_negative() && *v <= Q::one();
        if let Some(k) = singles.iter().position(|s| !unit(s)) {
            return Err(Error::InvalidMarginals(format!(
                "P(A{} = 1) = {} is outside [0, 1]",
                k + 1,
                singles[k]
            )));
        }
        let mut pairs = pairs;
        pairs.sort_by_key(|p| (p.i, p.j));
        for w in pairs.windows(2) {
            if (w[0].i, w[0].j) == (w[1].i, w[1].j) {
                return Err(Error::InconsistentMarginals {
                    i: w[0].i + 1,
                    j: w[0].j + 1,
                    reason: "table supplied twice".into(),
                });
            }
        }
        for p in &pairs {
            let fail = |reason: String| Error::InconsistentMarginals {
                i: p.i + 1,
                j: p.j + 1,
                reason,
            };
            if p.i == p.j || p.j >= n {
                return Err(fail("indices out of range".into()));
            }
            if let Some(c) = p.cells.iter().flatten().find(|c| c.is_negative()) {
                return Err(fail(format!("negative cell {c}")));
            }
            let total = p.cells.iter().flatten().fold(Q::zero(), |s, c| s + c);
            if !total.is_one() {
                return Err(fail(format!("cells sum to {total}, not 1")));
            }
            let row1 = &p.cells[1][0] + &p.cells[1][1];
            if row1 != singles[p.i] {
                return Err(fail(format!(
                    "P(A{} = 1) from the table is {row1}, singles say {}",
                    p.i + 1,
                    singles[p.i]
                )));
            }
            let col1 = &p.cells[0][1] + &p.cells[1][1];
            if col1 != singles[p.j] {
                return Err(fail(format!(
                    "P(A{} = 1) from the table is {col1}, singles say {}",
                    p.j + 1,
                    singles[p.j]
                )));
            }
        }
        Ok(MarginalSystem {
            n,
            singles,
            pairs,
            roundings: Vec::new(),
        })
    }

    /// All singles and all pair tables of a joint over `{0,1}^n`; atom index
    /// bit `k` is the value of `A_{k+1}`.
    pub fn from_joint(n: usize, joint: &[Q]) -> Result<Self> {
        if joint.len() != 1 << n {
            return Err(Error::InvalidMarginals(format!(
                "a joint over {n} variables has {} atoms",
                1 << n
            )));
        }
        let bit = |atom: usize, k: usize| (atom >> k) & 1;
        let singles = (0..n)
            .map(|k| {
                (0..joint.len())
                    .filter(|&a| bit(a, k) == 1)
                    .fold(Q::zero(), |s, a| s + &joint[a])
            })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut cells = [[Q::zero(), Q::zero()], [Q::zero(), Q::zero()]];
                for (a, w) in joint.iter().enumerate() {
                    cells[bit(a, i)][bit(a, j)] += w;
                }
                pairs.push(PairTable { i, j, cells });
            }
        }
        MarginalSystem::new(n, singles, pairs)
    }

    /// Singles plus a disagreement probability for every pair.
    pub fn from_disagreements(singles: Vec<Q>, d: &[((usize, usize), Q)]) -> Result<Self> {
        let pairs = d
            .iter()
            .map(|((i, j), dij)| {
                let (si, sj) = (
                    singles.get(*i).cloned().unwrap_or_default(),
                    singles.get(*j).cloned().unwrap_or_default(),
                );
                PairTable::from_disagreement(*i, *j, &si, &sj, dij)
            })
            .collect();
        MarginalSystem::new(singles.len(), singles, pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn singles(&self) -> &[Q] {
        &self.singles
    }

    pub fn pairs(&self) -> &[PairTable] {
        &self.pairs
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairTable> {
        let (i, j) = (i.min(j), i.max(j));
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }

    /// Constraint coordinates used by the exact solver: total mass, each
    /// single, and the `(1, 1)` cell of each supplied pair. The remaining
    /// cells are affine in these once the system is validated.
    pub fn coordinates(&self) -> Vec<Coordinate> {
        let mut out = vec![Coordinate::Total];
        out.extend((0..self.n).map(Coordinate::Single));
        out.extend(self.pairs.iter().map(|p| Coordinate::PairCell {
            i: p.i,
            j: p.j,
            a: 1,
            b: 1,
        }));
        out
    }

    pub fn value(&self, coord: Coordinate) -> Option<Q> {
        match coord {
            Coordinate::Total => Some(Q::one()),
            Coordinate::Single(k) => self.singles.get(k).cloned(),
            Coordinate::PairCell { i, j, a, b } => {
                let p = self.pair(i, j)?;
                Some(if p.i == i {
                    p.cells[a as usize][b as usize].clone()
                } else {
                    p.cells[b as usize][a as usize].clone()
                })
            }
        }
    }

    pub fn n_atoms(&self) -> usize {
        1 << self.n
    }
}

/// A coordinate of the marginal vector (0-based variable indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coordinate {
    /// Always 1: carries the constant term of an affine functional.
    Total,
    Single(usize),
    PairCell { i: usize, j: usize, a: u8, b: u8 },
}

impl Coordinate {
    /// Value of this coordinate at the point mass on `atom`.
    pub fn at_atom(&self, atom: usize) -> Q {
        let bit = |k: usize| ((atom >> k) & 1) as u8;
        let hit = match *self {
            Coordinate::Total => true,
            Coordinate::Single(k) => bit(k) == 1,
            Coordinate::PairCell { i, j, a, b } => bit(i) == a && bit(j) == b,
        };
        if hit {
            Q::one()
        } else {
            Q::zero()
        }
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Coordinate::Total => f.write_str("1"),
            Coordinate::Single(k) => write!(f, "P(A{}=1)", k + 1),
            Coordinate::PairCell { i, j, a, b } => {
                write!(f, "P(A{}={a},A{}={b})", i + 1, j + 1)
            }
        }
    }
}

/// An affine functional `f(m) = Σ coefficient · m[coordinate]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub terms: Vec<(Coordinate, Q)>,
}

impl Certificate {
    pub fn evaluate(&self, m: &MarginalSystem) -> Q {
        self.terms.iter().fold(Q::zero(), |s, (c, w)| {
            s + w * m.value(*c).expect("certificate coordinates come from the system")
        })
    }

    pub fn evaluate_atom(&self, atom: usize) -> Q {
        self.terms
            .iter()
            .fold(Q::zero(), |s, (c, w)| s + w * c.at_atom(atom))
    }

    /// Nonnegative at every atom and negative at `m`.
    pub fn separates(&self, m: &MarginalSystem) -> bool {
        (0..m.n_atoms()).all(|a| !self.evaluate_atom(a).is_negative())
            && self.evaluate(m).is_negative()
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, w) in &self.terms {
            if w.is_zero() {
                continue;
            }
            let sign = if w.is_negative() { "-" } else { "+" };
            let mag = w.abs();
            if first {
                if w.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            match (c, mag.is_one()) {
                (Coordinate::Total, _) => write!(f, "{mag}")?,
                (_, true) => write!(f, "{c}")?,
                (_, false) => write!(f, "{mag}·{c}")?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        f.write_str(" >= 0")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityResult {
    pub feasible: bool,
    /// Joint over atoms `0..2^n` (bit `k` of the index is `A_{k+1}`).
    pub witness: Option<Vec<Q>>,
    pub certificate: Option<Certificate>,
}

/// Exact phase-one simplex over the `2^n` atom probabilities.
pub fn check_feasibility(m: &MarginalSystem) -> FeasibilityResult {
    let coords = m.coordinates();
    let atoms = m.n_atoms();
    let a: Vec<Vec<Q>> = coords
        .iter()
        .map(|c| (0..atoms).map(|atom| c.at_atom(atom)).collect())
        .collect();
    let b: Vec<Q> = coords
        .iter()
        .map(|c| m.value(*c).expect("own coordinate"))
        .collect();
    match simplex::phase_one(&a, &b) {
        simplex::PhaseOne::Feasible(x) => FeasibilityResult {
            feasible: true,
            witness: Some(x),
            certificate: None,
        },
        simplex::PhaseOne::Infeasible(z) => {
            let certificate = Certificate {
                terms: coords.into_iter().zip(z).collect(),
            };
            debug_assert!(certificate.separates(m));
            FeasibilityResult {
                feasible: false,
                witness: None,
                certificate: Some(certificate),
            }
        }
    }
}

/// Checks that a witness reproduces every supplied marginal exactly.
pub fn witness_reproduces(m: &MarginalSystem, witness: &[Q]) -> bool {
    if witness.len() != m.n_atoms() || witness.iter().any(|w| w.is_negative()) {
        return false;
    }
    let Ok(back) = MarginalSystem::from_joint(m.n, witness) else {
        return false;
    };
    back.singles == m.singles
        && m.pairs
            .iter()
            .all(|p| back.pair(p.i, p.j).is_some_and(|q| q.cells == p.cells))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSlacks {
    pub d12: Q,
    pub d13: Q,
    pub d23: Q,
    pub eq1: Q,
    pub eq2: Q,
    pub eq3: Q,
}

impl ExactSlacks {
    pub fn any_negative(&self) -> bool {
        self.eq1.is_negative() || self.eq2.is_negative() || self.eq3.is_negative()
    }

    pub fn to_f64(&self) -> TriangleSlacks {
        TriangleSlacks {
            eq1: to_f64(&self.eq1),
            eq2: to_f64(&self.eq2),
            eq3: to_f64(&self.eq3),
        }
    }
}

/// Triangle slacks from the pair tables. Needs `n = 3` and all three pairs.
pub fn triangle_necessary_check(m: &MarginalSystem) -> Result<ExactSlacks> {
    if m.n != 3 {
        return Err(Error::InvalidMarginals("triangle check needs n = 3".into()));
    }
    let d = |i: usize, j: usize| {
        m.pair(i, j).map(PairTable::disagreement).ok_or_else(|| {
            Error::InvalidMarginals(format!("pair ({}, {}) is missing", i + 1, j + 1))
        })
    };
    let (d12, d13, d23) = (d(0, 1)?, d(0, 2)?, d(1, 2)?);
    Ok(ExactSlacks {
        eq1: &d12 + &d23 - &d13,
        eq2: &d12 + &d13 - &d23,
        eq3: &d13 + &d23 - &d12,
        d12,
        d13,
        d23,
    })
}

/// A probability in a marginals file: a JSON number (rationalized at the
/// file's denominator bound) or a string holding an exact fraction/decimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbabilityInput {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairInput {
    /// 1-based variable indices.
    pub pair: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<[[ProbabilityInput; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disagreement: Option<ProbabilityInput>,
}

/// The declarative marginals file read by the `feasibility` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalsFile {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator_bound: Option<u64>,
    pub singles: Vec<ProbabilityInput>,
    #[serde(default)]
    pub pairs: Vec<PairInput>,
}

impl MarginalsFile {
    pub fn into_system(self) -> Result<MarginalSystem> {
        let bound = self.denominator_bound.unwrap_or(DEFAULT_DENOMINATOR_BOUND);
        let mut roundings = Vec::new();
        let mut read = |p: &ProbabilityInput, location: String| -> Result<Q> {
            match p {
                ProbabilityInput::Text(s) => parse_rational(s),
                ProbabilityInput::Number(x) => {
                    let r = rationalize(*x, bound)?;
                    let err = (to_f64(&r) - x).abs();
                    if BigRational::from_float(*x).as_ref() != Some(&r) {
                        roundings.push(Rounding {
                            location,
                            input: *x,
                            rational: r.to_string(),
                            error: err,
                        });
                    }
                    Ok(r)
                }
            }
        };
        let singles = self
            .singles
            .iter()
            .enumerate()
            .map(|(k, p)| read(p, format!("singles[{}]", k + 1)))
            .collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::new();
        for p in &self.pairs {
            let [i, j] = p.pair;
            if i == 0 || j == 0 || i > self.n || j > self.n || i == j {
                return Err(Error::InconsistentMarginals {
                    i,
                    j,
                    reason: "indices must be distinct and in 1..=n".into(),
                });
            }
            let (i0, j0) = (i - 1, j - 1);
            let table = match (&p.table, &p.disagreement) {
                (Some(t), None) => {
                    let mut cells = [[Q::zero(), Q::zero()], [Q::zero(), Q::zero()]];
                    for a in 0..2 {
                        for b in 0..2 {
                            cells[a][b] = read(&t[a][b], format!("pair ({i}, {j}) cell ({a}, {b})"))?;
                        }
                    }
                    PairTable::new(i0, j0, cells)
                }
                (None, Some(d)) => {
                    let d = read(d, format!("pair ({i}, {j}) disagreement"))?;
                    PairTable::from_disagreement(i0, j0, &singles[i0], &singles[j0], &d)
                }
                _ => {
                    return Err(Error::InconsistentMarginals {
                        i,
                        j,
                        reason: "give exactly one of `table` or `disagreement`".into(),
                    })
                }
            };
            pairs.push(table);
        }
        let mut system = MarginalSystem::new(self.n, singles, pairs)?;
        system.roundings = roundings;
        Ok(system)
    }
}
