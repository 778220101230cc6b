//! Hessenberg reduction for `A = D + U V^H` with real diagonal `D`.
//!
//! Stage one rotates `U` to upper triangular form while keeping the Hermitian
//! part banded. Stage two eliminates the remaining subdiagonals, acting only
//! on `tril(A)` and the generators `U`, `V`.

use num_complex::Complex64 as C64;

use crate::band::BandMatrix;
use crate::dense::{dot_h, CMat, Rows, ZERO};
use crate::error::{HessError, Result};
use crate::givens::{givens_compute, Givens, Tolerance};
use crate::journal::Journal;
use crate::problem::{DPR1Problem, Kind};

/// `l(i, j) = k (n + j - i) + j` on `[1, n] x [1, k]` (1-based).
pub fn ell(i: usize, j: usize, n: usize, k: usize) -> Result<usize> {
    if i == 0 || i > n || j == 0 || j > k {
        return Err(HessError::Index(format!("({i}, {j}) outside [1, {n}] x [1, {k}]")));
    }
    Ok(k * (n + j - i) + j)
}

/// Inverse of [`ell`]; values outside its image are an error.
pub fn ell_inv(v: usize, n: usize, k: usize) -> Result<(usize, usize)> {
    if v == 0 || k == 0 {
        return Err(HessError::Index(format!("{v} is not in the image of l")));
    }
    let j = (v - 1) % k + 1;
    let q = (v - j) / k;
    if q < j || q > n + j - 1 {
        return Err(HessError::Index(format!("{v} is not in the image of l")));
    }
    Ok((n + j - q, j))
}

/// Output of the band reduction stage.
#[derive(Clone, Debug)]
pub struct BandReduction {
    /// Hermitian band matrix `Q1 diag(d) Q1^H` of bandwidth `min(k, n-1)`.
    pub d1: BandMatrix,
    /// `Q1 U`: upper triangular, nonzero only in its first `k` rows.
    pub u1: Rows,
    /// `Q1 V`.
    pub v1: Rows,
    pub log: Journal,
}

/// Similarity by `g` on a Hermitian band matrix stored by its lower half.
fn hermitian_rotate(d: &mut BandMatrix, g: &Givens) -> Result<()> {
    let p = g.plane;
    d.rotate_lower_offblock(g)?;
    let (i00, i10, i11) = (d.lower_index(p, p), d.lower_index(p + 1, p), d.lower_index(p + 1, p + 1));
    let data = d.raw_mut();
    let b = data[i10];
    let block = rotate_block(g, [[data[i00], b.conj()], [b, data[i11]]]);
    data[i00] = C64::new(block[0][0].re, 0.0);
    data[i10] = block[1][0];
    data[i11] = C64::new(block[1][1].re, 0.0);
    Ok(())
}

/// `R B R^H` for a 2x2 block.
fn rotate_block(g: &Givens, b: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let (t00, t10) = g.rotate(b[0][0], b[1][0]);
    let (t01, t11) = g.rotate(b[0][1], b[1][1]);
    let (r00, r01) = g.rotate_right(t00, t01);
    let (r10, r11) = g.rotate_right(t10, t11);
    [[r00, r01], [r10, r11]]
}

/// Rotate `U` to upper triangular form while keeping `Q1 diag(d) Q1^H`
/// banded. Zeros of `U` are introduced in increasing `l` order; after each
/// completed subdiagonal the band bulges are chased to the bottom.
pub fn band_reduce(d: &[f64], u: &CMat, v: &CMat) -> Result<BandReduction> {
    let n = d.len();
    let k = u.ncols();
    if u.nrows() != n || v.nrows() != n || v.ncols() != k {
        return Err(HessError::Shape(format!(
            "band_reduce: d has {n} entries, U is {}x{k}, V is {}x{}",
            u.nrows(),
            v.nrows(),
            v.ncols()
        )));
    }
    if k == 0 {
        return Err(HessError::Shape("band_reduce needs k >= 1".into()));
    }
    let bw = k.min(n.saturating_sub(1));
    let work_bw = (k + 2).min(n.saturating_sub(1));
    let mut dm = BandMatrix::hermitian(n, work_bw);
    for (i, &x) in d.iter().enumerate() {
        dm.set(i, i, C64::new(x, 0.0))?;
    }
    let mut u1 = Rows::from_cmat(u);
    let mut v1 = Rows::from_cmat(v);
    let mut log = Journal::new();

    let mut touched = false;
    for val in 1..=k * n {
        if let Ok((i1, j1)) = ell_inv(val, n, k) {
            if i1 > j1 {
                let (i, j) = (i1 - 1, j1 - 1);
                let x = u1.get(i, j);
                if x != ZERO {
                    let (g, _) = givens_compute(u1.get(i - 1, j), x);
                    let g = g.at(i - 1);
                    hermitian_rotate(&mut dm, &g)?;
                    u1.rotate(&g);
                    v1.rotate(&g);
                    u1.set(i, j, ZERO);
                    log.push_rotation(g);
                    touched = true;
                }
            }
        }
        if val % k == 0 && touched {
            // Subdiagonal t = n - val/k + 1 (1-based) is complete.
            let t = n + 1 - val / k;
            chase_band_bulges(&mut dm, &mut u1, &mut v1, &mut log, k, t.saturating_sub(1))?;
            touched = false;
        }
    }
    let d1 = dm.rebanded(bw, bw, 0.0)?;
    Ok(BandReduction { d1, u1, v1, log })
}

fn chase_band_bulges(
    dm: &mut BandMatrix,
    u1: &mut Rows,
    v1: &mut Rows,
    log: &mut Journal,
    k: usize,
    from_col: usize,
) -> Result<()> {
    let n = dm.n();
    let l = dm.lower_bw();
    for q in from_col..n {
        let top = (q + l).min(n - 1);
        let mut p = top;
        while p > q + k {
            let x = dm.get(p, q);
            if x != ZERO {
                let (g, _) = givens_compute(dm.get(p - 1, q), x);
                let g = g.at(p - 1);
                hermitian_rotate(dm, &g)?;
                u1.rotate(&g);
                v1.rotate(&g);
                dm.set(p, q, ZERO)?;
                log.push_rotation(g);
            }
            p -= 1;
        }
    }
    Ok(())
}

/// Generalized Hessenberg matrix represented through
/// `tril(A) + tril(A, -1)^H + triu(U V^H - V U^H, 1)`.
#[derive(Clone, Debug)]
pub struct CondensedGenHessenberg {
    /// `tril(A)` with lower bandwidth `k` (plus chasing workspace).
    pub tril_a: BandMatrix,
    pub u: Rows,
    pub v: Rows,
    pub k: usize,
}

impl CondensedGenHessenberg {
    pub fn new(tril_a: BandMatrix, u: Rows, v: Rows, k: usize) -> Result<Self> {
        let n = tril_a.n();
        if u.n != n || v.n != n || u.k != v.k || tril_a.upper_bw() != 0 {
            return Err(HessError::Shape("inconsistent condensed form".into()));
        }
        Ok(CondensedGenHessenberg { tril_a, u, v, k })
    }

    /// Condensed form of `diag(d1) + U1 V1^H` from the band stage, with two
    /// extra diagonals of chasing room.
    pub fn from_band(br: &BandReduction) -> Result<Self> {
        let n = br.d1.n();
        let k = br.u1.k;
        let work_bw = (k + 2).min(n.saturating_sub(1));
        let mut a = BandMatrix::general(n, work_bw, 0);
        for i in 0..n {
            for j in i.saturating_sub(br.d1.lower_bw())..=i {
                a.set(i, j, br.d1.get(i, j))?;
            }
        }
        for i in 0..k.min(n) {
            for j in 0..=i {
                let x = a.get(i, j) + br.u1.dot_h(i, &br.v1, j);
                a.set(i, j, x)?;
            }
        }
        CondensedGenHessenberg::new(a, br.u1.clone(), br.v1.clone(), k)
    }

    pub fn n(&self) -> usize {
        self.tril_a.n()
    }

    /// Entry `(i, j)` of the represented matrix.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        if i >= j {
            self.tril_a.get(i, j)
        } else {
            self.tril_a.get(j, i).conj() + self.u.dot_h(i, &self.v, j) - self.v.dot_h(i, &self.u, j)
        }
    }

    /// Dense expansion of the represented matrix.
    pub fn phi_assemble(&self) -> CMat {
        let n = self.n();
        let u = self.u.to_cmat();
        let v = self.v.to_cmat();
        let skew = crate::dense::matmul(&u, &v.adjoint()) - crate::dense::matmul(&v, &u.adjoint());
        CMat::from_fn(n, n, |i, j| {
            if i >= j {
                self.tril_a.get(i, j)
            } else {
                self.tril_a.get(j, i).conj() + skew[(i, j)]
            }
        })
    }

    /// Similarity by `g`, touching `O(k)` stored entries.
    fn rotate(&mut self, g: &Givens) -> Result<()> {
        let p = g.plane;
        let a = &mut self.tril_a;
        let upper = a.get(p + 1, p).conj() + dot_h(self.u.row(p), self.v.row(p + 1))
            - dot_h(self.v.row(p), self.u.row(p + 1));
        a.rotate_lower_offblock(g)?;
        let (i00, i10, i11) = (a.lower_index(p, p), a.lower_index(p + 1, p), a.lower_index(p + 1, p + 1));
        let data = a.raw_mut();
        let block = rotate_block(g, [[data[i00], upper], [data[i10], data[i11]]]);
        data[i00] = block[0][0];
        data[i10] = block[1][0];
        data[i11] = block[1][1];
        self.u.rotate(g);
        self.v.rotate(g);
        Ok(())
    }

    /// Annihilate `(i, j)` against `(i - 1, j)`; returns the rotation used.
    fn annihilate(&mut self, i: usize, j: usize) -> Result<Option<Givens>> {
        let x = self.tril_a.get(i, j);
        if x == ZERO {
            return Ok(None);
        }
        let (g, _) = givens_compute(self.tril_a.get(i - 1, j), x);
        let g = g.at(i - 1);
        self.rotate(&g)?;
        self.tril_a.set(i, j, ZERO)?;
        Ok(Some(g))
    }

    /// Deviation of the diagonal from `A - A^H = U V^H - V U^H`.
    fn diagonal_defect(&self, i: usize) -> f64 {
        (self.tril_a.get(i, i).im - self.u.dot_h(i, &self.v, i).im).abs()
    }
}

/// Result of a real-path reduction.
#[derive(Clone, Debug)]
pub struct ReductionResult {
    /// Upper Hessenberg output in condensed form (lower bandwidth 1).
    pub h: CondensedGenHessenberg,
    pub rotation_log: Journal,
    /// Accumulated `Q` with `H = Q A Q^H`, when requested.
    pub q: Option<CMat>,
}

impl ReductionResult {
    pub fn h_dense(&self) -> CMat {
        self.h.phi_assemble()
    }
}

/// Reduce a condensed generalized Hessenberg matrix to upper Hessenberg form.
pub fn subdiag_eliminate(
    state: CondensedGenHessenberg,
    tol: &Tolerance,
    norm_a: f64,
) -> Result<(CondensedGenHessenberg, Journal)> {
    subdiag_eliminate_observed(state, tol, norm_a, |_, _, _| {})
}

/// [`subdiag_eliminate`] calling `observe(j, state, journal)` after column `j`
/// has been processed.
pub fn subdiag_eliminate_observed<F>(
    mut state: CondensedGenHessenberg,
    tol: &Tolerance,
    norm_a: f64,
    mut observe: F,
) -> Result<(CondensedGenHessenberg, Journal)>
where
    F: FnMut(usize, &CondensedGenHessenberg, &Journal),
{
    let n = state.n();
    let k = state.k;
    if state.tril_a.lower_bw() < (k + 1).min(n.saturating_sub(1)) {
        state.tril_a = state.tril_a.widen((k + 2).min(n.saturating_sub(1)), 0)?;
    }
    let mut log = Journal::new();
    let limit = tol.structure_threshold(n, norm_a);
    for j in 0..n.saturating_sub(2) {
        for i in (j + 2..=(j + k).min(n - 1)).rev() {
            if let Some(g) = state.annihilate(i, j)? {
                log.push_rotation(g);
            }
            let mut s = i + k;
            while s < n {
                if let Some(g) = state.annihilate(s, s - k - 1)? {
                    log.push_rotation(g);
                }
                s += k;
            }
        }
        let defect = state.diagonal_defect(j);
        if defect > limit {
            return Err(HessError::Integrity {
                step: j,
                i: j,
                j,
                mag: defect,
            });
        }
        observe(j, &state, &log);
    }
    state.tril_a = state.tril_a.rebanded(1usize.min(n.saturating_sub(1)), 0, 0.0)?;
    Ok((state, log))
}

/// Two-stage reduction of a real-diagonal problem.
pub fn hessenberg_reduce_real(
    problem: &DPR1Problem,
    accumulate_q: bool,
    tol: &Tolerance,
) -> Result<ReductionResult> {
    if problem.kind != Kind::Real {
        return Err(HessError::Kind("hessenberg_reduce_real needs a real diagonal".into()));
    }
    problem.check_kind(tol)?;
    let n = problem.n();
    let d: Vec<f64> = problem.d.iter().map(|z| z.re).collect();
    let band = band_reduce(&d, &problem.u, &problem.v)?;
    let state = CondensedGenHessenberg::from_band(&band)?;
    let (h, tail) = subdiag_eliminate(state, tol, problem.norm_bound())?;
    let mut rotation_log = band.log;
    rotation_log.extend(tail);
    let q = if accumulate_q {
        Some(rotation_log.replay(n)?)
    } else {
        None
    };
    Ok(ReductionResult {
        h,
        rotation_log,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{frob, matmul};
    use crate::oracle::backward_error;

    #[test]
    fn ell_examples() {
        assert_eq!(ell(8, 1, 8, 3).unwrap(), 4);
        let mut order: Vec<(usize, (usize, usize))> = (1..=8)
            .flat_map(|i| (1..=3).map(move |j| (i, j)))
            .map(|(i, j)| (ell(i, j, 8, 3).unwrap(), (i, j)))
            .collect();
        order.sort();
        let first: Vec<_> = order.iter().take(4).map(|x| x.1).collect();
        assert_eq!(first, vec![(8, 1), (7, 1), (8, 2), (6, 1)]);
        assert!(ell(0, 1, 8, 3).is_err());
        assert!(ell(1, 4, 8, 3).is_err());
    }

    #[test]
    fn ell_inverse_exhaustive() {
        for n in 1..=10 {
            for k in 1..=4 {
                let mut seen = std::collections::HashSet::new();
                for i in 1..=n {
                    for j in 1..=k {
                        let v = ell(i, j, n, k).unwrap();
                        assert!(seen.insert(v));
                        assert_eq!(ell_inv(v, n, k).unwrap(), (i, j));
                    }
                }
                let max = k * (n + k - 1) + k;
                for v in 1..=max + 3 {
                    if !seen.contains(&v) {
                        assert!(ell_inv(v, n, k).is_err());
                    }
                }
            }
        }
    }

    #[test]
    fn band_reduce_on_reduced_input_is_trivial() {
        let d = [0.5, -0.25, 0.75, 1.0];
        let mut u = CMat::zeros(4, 1);
        u[(0, 0)] = C64::new(1.0, 0.0);
        let v = CMat::from_element(4, 1, C64::new(0.3, 0.1));
        let br = band_reduce(&d, &u, &v).unwrap();
        assert_eq!(br.log.len(), 0);
        for i in 0..4 {
            assert_eq!(br.d1.get(i, i), C64::new(d[i], 0.0));
        }
        assert_eq!(br.u1.to_cmat(), u);
    }

    #[test]
    fn band_reduce_forced_swap() {
        let u = CMat::from_column_slice(2, 1, &[ZERO, C64::new(1.0, 0.0)]);
        let v = u.clone();
        let br = band_reduce(&[1.0, 2.0], &u, &v).unwrap();
        assert_eq!(br.log.rotation_count(), 1);
        match br.log.entries()[0] {
            crate::journal::JournalEntry::Rotation(g) => {
                assert_eq!(g.c, 0.0);
                assert!((g.s.norm() - 1.0).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        assert_eq!(br.d1.get(0, 0), C64::new(2.0, 0.0));
        assert_eq!(br.d1.get(1, 1), C64::new(1.0, 0.0));
        assert_eq!(br.d1.get(1, 0), ZERO);
        assert!((br.u1.get(0, 0).norm() - 1.0).abs() < 1e-15);
        assert_eq!(br.u1.get(1, 0), ZERO);
    }

    #[test]
    fn band_reduce_random_replays() {
        let p = DPR1Problem::random(Kind::Real, 16, 3, 4);
        let d: Vec<f64> = p.d.iter().map(|z| z.re).collect();
        let br = band_reduce(&d, &p.u, &p.v).unwrap();
        let q = br.log.replay(16).unwrap();
        let dd = CMat::from_diagonal(&nalgebra::DVector::from_vec(p.d.clone()));
        let back = matmul(&matmul(&q.adjoint(), &br.d1.to_dense()), &q);
        let dnorm = frob(&dd);
        assert!(frob(&(back - &dd)) <= 100.0 * 16.0 * f64::EPSILON * dnorm);
        assert_eq!(br.d1.measured_bandwidths().0, 3);
        let u1 = br.u1.to_cmat();
        for i in 0..16 {
            for j in 0..3.min(i) {
                assert_eq!(u1[(i, j)], ZERO);
            }
        }
        assert!(frob(&(matmul(&q, &p.u) - &u1)) < 1e-13 * frob(&p.u));
        assert!(frob(&(matmul(&q, &p.v) - br.v1.to_cmat())) < 1e-13 * frob(&p.v));
        assert_eq!(br.log.rotation_count(), 16 * 15 / 2);
    }

    #[test]
    fn band_reduce_with_large_k() {
        let p = DPR1Problem::random(Kind::Real, 5, 7, 2);
        let d: Vec<f64> = p.d.iter().map(|z| z.re).collect();
        let br = band_reduce(&d, &p.u, &p.v).unwrap();
        let q = br.log.replay(5).unwrap();
        assert!(frob(&(matmul(&q, &p.u) - br.u1.to_cmat())) < 1e-13 * frob(&p.u));
        let u1 = br.u1.to_cmat();
        for i in 0..5 {
            for j in 0..i.min(7) {
                assert_eq!(u1[(i, j)], ZERO);
            }
        }
    }

    #[test]
    fn non_real_diagonal_is_rejected() {
        let p = DPR1Problem::random(Kind::Unitary, 4, 1, 0);
        assert!(matches!(
            hessenberg_reduce_real(&p, false, &Tolerance::default()),
            Err(HessError::Kind(_))
        ));
    }

    fn random_state(n: usize, k: usize, seed: u64) -> CondensedGenHessenberg {
        let p = DPR1Problem::random(Kind::Real, n, k, seed);
        let d: Vec<f64> = p.d.iter().map(|z| z.re).collect();
        CondensedGenHessenberg::from_band(&band_reduce(&d, &p.u, &p.v).unwrap()).unwrap()
    }

    #[test]
    fn phi_skew_identity() {
        let s = random_state(9, 2, 3);
        let a = s.phi_assemble();
        let u = s.u.to_cmat();
        let v = s.v.to_cmat();
        let skew = matmul(&u, &v.adjoint()) - matmul(&v, &u.adjoint());
        let lhs = &a - a.adjoint();
        assert!(frob(&(lhs - &skew)) <= 8.0 * f64::EPSILON * frob(&a) * 9.0);
    }

    #[test]
    fn phi_small_hand_example() {
        let mut t = BandMatrix::general(3, 1, 0);
        t.set(0, 0, C64::new(1.0, 0.0)).unwrap();
        t.set(1, 0, C64::new(2.0, 1.0)).unwrap();
        t.set(1, 1, C64::new(3.0, 0.0)).unwrap();
        t.set(2, 1, C64::new(0.0, -1.0)).unwrap();
        t.set(2, 2, C64::new(-1.0, 0.0)).unwrap();
        let u = Rows::from_cmat(&CMat::from_column_slice(3, 1, &[C64::new(1.0, 0.0), ZERO, C64::new(0.0, 2.0)]));
        let v = Rows::from_cmat(&CMat::from_column_slice(3, 1, &[C64::new(0.5, 0.0), C64::new(1.0, 1.0), ZERO]));
        let s = CondensedGenHessenberg::new(t, u, v, 1).unwrap();
        let a = s.phi_assemble();
        // (0,1): conj(2+i) + u0 conj(v1) - v0 conj(u1) = 2 - i + (1 - i)
        assert_eq!(a[(0, 1)], C64::new(3.0, -2.0));
        // (0,2): conj(0) + u0 conj(v2) - v0 conj(u2) = -0.5 * (-2i)
        assert_eq!(a[(0, 2)], C64::new(0.0, 1.0));
        // (1,2): conj(-i) + u1 conj(v2) - v1 conj(u2) = i - (1+i)(-2i)
        assert_eq!(a[(1, 2)], C64::new(-2.0, 3.0));
        assert_eq!(a[(2, 0)], ZERO);
    }

    #[test]
    fn hessenberg_input_needs_no_rotations() {
        let s = random_state(8, 1, 6);
        let before = s.phi_assemble();
        let (out, log) = subdiag_eliminate(s, &Tolerance::default(), 10.0).unwrap();
        assert_eq!(log.len(), 0);
        assert_eq!(out.phi_assemble(), before);
    }

    #[test]
    fn diagonal_state_is_untouched() {
        let mut t = BandMatrix::general(5, 2, 0);
        for i in 0..5 {
            t.set(i, i, C64::new(i as f64, 0.0)).unwrap();
        }
        let s = CondensedGenHessenberg::new(t, Rows::zeros(5, 2), Rows::zeros(5, 2), 2).unwrap();
        let before = s.phi_assemble();
        let (out, log) = subdiag_eliminate(s, &Tolerance::default(), 10.0).unwrap();
        assert_eq!(log.len(), 0);
        assert_eq!(out.phi_assemble(), before);
    }

    #[test]
    fn subdiag_lockstep_small() {
        let s = random_state(6, 2, 8);
        let mut dense = s.phi_assemble();
        let scale = frob(&dense);
        let mut applied = 0;
        let (out, log) = subdiag_eliminate_observed(s, &Tolerance::default(), scale, |_, st, log| {
            for e in &log.entries()[applied..] {
                if let crate::journal::JournalEntry::Rotation(g) = e {
                    crate::givens::givens_apply_left(g, &mut dense, 0..6).unwrap();
                    crate::givens::givens_apply_right(g, &mut dense, 0..6).unwrap();
                }
            }
            applied = log.len();
            assert!(frob(&(st.phi_assemble() - &dense)) <= 1e3 * 6.0 * f64::EPSILON * scale);
        })
        .unwrap();
        assert!(log.len() > 0);
        let h = out.phi_assemble();
        for i in 0..6usize {
            for j in 0..i.saturating_sub(1) {
                assert_eq!(h[(i, j)], ZERO);
            }
        }
    }

    #[test]
    fn full_reduction_small() {
        for &(n, k, seed) in &[(1, 1, 0), (2, 1, 1), (16, 2, 2), (20, 5, 3), (7, 9, 4)] {
            let p = DPR1Problem::random(Kind::Real, n, k, seed);
            let r = hessenberg_reduce_real(&p, true, &Tolerance::default()).unwrap();
            let q = r.q.as_ref().unwrap();
            let h = r.h_dense();
            let be = backward_error(&p.dense(), &h, q);
            assert!(be <= 100.0 * n as f64 * f64::EPSILON, "n={n} k={k} be={be:e}");
            for i in 0..n {
                for j in 0..i.saturating_sub(1) {
                    assert_eq!(h[(i, j)], ZERO);
                }
            }
            let count = r.rotation_log.rotation_count();
            assert!(count <= n * (n.saturating_sub(1)) / 2 + n * k * ((n + k - 1) / k));
        }
    }

    #[test]
    fn hermitian_input_gives_tridiagonal() {
        let mut p = DPR1Problem::random(Kind::Real, 16, 2, 5);
        p.v = p.u.clone();
        let r = hessenberg_reduce_real(&p, false, &Tolerance::default()).unwrap();
        let h = r.h_dense();
        let tol = 100.0 * 16.0 * f64::EPSILON * frob(&h);
        assert!(frob(&(&h - h.adjoint())) <= tol);
        for i in 0..16 {
            for j in i + 2..16 {
                assert!(h[(i, j)].norm() <= tol);
            }
        }
    }
}
