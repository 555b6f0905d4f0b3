//! Phase-one simplex over exact rationals.
//!
//! Solves `min 1ᵀw  s.t.  A x + w = b, x >= 0, w >= 0` with `b >= 0` starting
//! from the all-artificial basis. Bland's rule makes the pivot sequence finite.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub(crate) type Q = BigRational;

pub(crate) enum PhaseOne {
    /// A nonnegative `x` with `A x = b`.
    Feasible(Vec<Q>),
    /// `z` with `zᵀA >= 0` columnwise and `zᵀb < 0`.
    Infeasible(Vec<Q>),
}

pub(crate) fn phase_one(a: &[Vec<Q>], b: &[Q]) -> PhaseOne {
    let m = a.len();
    let nv = a.first().map_or(0, Vec::len);
    assert!(b.iter().all(|v| !v.is_negative()), "phase one needs b >= 0");
    let width = nv + m + 1;
    let rhs = nv + m;

    let mut tableau: Vec<Vec<Q>> = (0..m)
        .map(|r| {
            let mut row = Vec::with_capacity(width);
            row.extend(a[r].iter().cloned());
            row.extend((0..m).map(|k| if k == r { Q::one() } else { Q::zero() }));
            row.push(b[r].clone());
            row
        })
        .collect();
    let mut basis: Vec<usize> = (nv..nv + m).collect();
    let cost = |c: usize| if c >= nv && c < nv + m { Q::one() } else { Q::zero() };

    loop {
        // Reduced cost d_c = cost_c - Σ_r cost_{basis[r]} T[r][c]; artificial
        // basics have cost 1, structural basics cost 0.
        let entering = (0..nv + m).find(|&c| {
            if basis.contains(&c) {
                return false;
            }
            let mut d = cost(c);
            for (r, row) in tableau.iter().enumerate() {
                if basis[r] >= nv {
                    d -= &row[c];
                }
            }
            d.is_negative()
        });
        let Some(col) = entering else { break };

        let mut leave: Option<(usize, Q)> = None;
        for (r, row) in tableau.iter().enumerate() {
            if !row[col].is_positive() {
                continue;
            }
            let ratio = &row[rhs] / &row[col];
            let better = match &leave {
                None => true,
                Some((lr, best)) => ratio < *best || (ratio == *best && basis[r] < basis[*lr]),
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        // The phase-one objective is bounded below by zero, so an entering
        // column with negative reduced cost always has a positive entry.
        let (pr, _) = leave.expect("phase one is bounded");
        pivot(&mut tableau, pr, col);
        basis[pr] = col;
    }

    let objective: Q = (0..m)
        .filter(|&r| basis[r] >= nv)
        .map(|r| tableau[r][rhs].clone())
        .fold(Q::zero(), |acc, v| acc + v);
    if objective.is_zero() {
        let mut x = vec![Q::zero(); nv];
        for (r, &c) in basis.iter().enumerate() {
            if c < nv {
                x[c] = tableau[r][rhs].clone();
            }
        }
        PhaseOne::Feasible(x)
    } else {
        // The artificial columns of the tableau hold B⁻¹, so the duals are
        // y = c_Bᵀ B⁻¹ and the certificate is z = -y.
        let z = (0..m)
            .map(|k| {
                let y = (0..m)
                    .filter(|&r| basis[r] >= nv)
                    .map(|r| tableau[r][nv + k].clone())
                    .fold(Q::zero(), |acc, v| acc + v);
                -y
            })
            .collect();
        PhaseOne::Infeasible(z)
    }
}

fn pivot(tableau: &mut [Vec<Q>], pr: usize, pc: usize) {
    let inv = Q::one() / &tableau[pr][pc];
    for v in tableau[pr].iter_mut() {
        *v *= &inv;
    }
    let pivot_row = tableau[pr].clone();
    for (r, row) in tableau.iter_mut().enumerate() {
        if r == pr || row[pc].is_zero() {
            continue;
        }
        let factor = row[pc].clone();
        for (v, p) in row.iter_mut().zip(&pivot_row) {
            if !p.is_zero() {
                *v -= &factor * p;
            }
        }
    }
}
