//! Dense reference computations and verification predicates.

use crate::dense::{frob, matmul, CMat, ZERO};
use crate::error::Result;
use crate::givens::{givens_apply_left, givens_apply_right, givens_compute};
use crate::journal::Journal;

/// Givens-based Hessenberg reduction: returns `(H, Q)` with `H = Q A Q^H`.
pub fn dense_hessenberg(a: &CMat) -> (CMat, CMat) {
    let (h, log) = dense_hessenberg_logged(a);
    let q = log.replay(a.nrows()).expect("journal planes are in range");
    (h, q)
}

/// Like [`dense_hessenberg`] but returns the rotation journal instead of `Q`.
pub fn dense_hessenberg_logged(a: &CMat) -> (CMat, Journal) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "dense_hessenberg needs a square matrix");
    let mut h = a.clone();
    let mut log = Journal::new();
    for j in 0..n.saturating_sub(2) {
        for i in (j + 2..n).rev() {
            if h[(i, j)] == ZERO {
                continue;
            }
            let (g, _) = givens_compute(h[(i - 1, j)], h[(i, j)]);
            let g = g.at(i - 1);
            givens_apply_left(&g, &mut h, j..n).expect("plane in range");
            givens_apply_right(&g, &mut h, 0..n).expect("plane in range");
            h[(i, j)] = ZERO;
            log.push_rotation(g);
        }
    }
    (h, log)
}

/// Dense `Q` from a journal.
pub fn replay_journal(journal: &Journal, n: usize) -> Result<CMat> {
    journal.replay(n)
}

/// `||A - Q^H H Q||_F / ||A||_F`.
pub fn backward_error(a: &CMat, h: &CMat, q: &CMat) -> f64 {
    let qh = q.adjoint();
    let back = matmul(&matmul(&qh, h), q);
    let na = frob(a);
    let diff = frob(&(a - back));
    if na == 0.0 {
        diff
    } else {
        diff / na
    }
}

/// `||Q Q^H - I||_F`.
pub fn unitarity_error(q: &CMat) -> f64 {
    let n = q.nrows();
    frob(&(matmul(q, &q.adjoint()) - CMat::identity(n, n)))
}

/// Numerical ranks of the off-diagonal blocks at one cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutRanks {
    /// Cut position `i`: blocks `M[i.., ..i]` and `M[..i, i..]`.
    pub cut: usize,
    pub lower: usize,
    pub upper: usize,
}

/// Number of singular values above `threshold`.
pub fn numerical_rank(m: &CMat, threshold: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.clone()
        .singular_values()
        .iter()
        .filter(|&&s| s > threshold)
        .count()
}

/// Lower and upper off-diagonal ranks for every cut `1..n`, counting singular
/// values above `tol * ||M||_2`.
pub fn qs_rank_probe(m: &CMat, tol: f64) -> Vec<CutRanks> {
    let n = m.nrows();
    if n < 2 {
        return Vec::new();
    }
    let sigma1 = m.clone().singular_values().max();
    let threshold = tol * sigma1;
    (1..n)
        .map(|i| CutRanks {
            cut: i,
            lower: numerical_rank(&m.view((i, 0), (n - i, i)).clone_owned(), threshold),
            upper: numerical_rank(&m.view((0, i), (i, n - i)).clone_owned(), threshold),
        })
        .collect()
}

/// Largest magnitude below the first subdiagonal.
pub fn below_subdiagonal_max(h: &CMat) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in j + 2..n {
            worst = worst.max(h[(i, j)].norm());
        }
    }
    worst
}
