//! Block CMV matrices: validation, factored form, block-diagonal splitting
//! and the reduction of a unitary diagonal to block CMV shape.
//!
//! Positions and block indices are 0-based. The factored form is
//! `A = A1 A2`, where `A1` collects the transformations at even positions
//! (blocks `(0,1), (2,3), ..`) and `A2` those at odd positions
//! (`I_k` followed by blocks `(1,2), (3,4), ..`).

use num_complex::Complex64 as C64;

use crate::band::{BandKind, BandMatrix};
use crate::block::{
    block_qr_tall, fuse, pass_diagonal, turnover, BlockUnitaryTransformation,
    TriangularCornerFlags,
};
use crate::dense::{frob, matmul, qr, upper_left, lower_right, CMat, ONE};
use crate::error::{HessError, Result};
use crate::givens::Tolerance;
use crate::journal::Journal;
use crate::oracle::numerical_rank;

/// Whether `(i, c)` may be nonzero in a block CMV matrix with block size `k`.
pub fn cmv_allowed(i: usize, c: usize, k: usize) -> bool {
    cmv_zone(i, c, k) == Zone::Free
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Zone {
    Free,
    /// Inside a triangular corner block but on the wrong side of its diagonal.
    Triangle,
    Zero,
}

fn cmv_zone(i: usize, c: usize, k: usize) -> Zone {
    let (bi, a) = (i / k, i % k);
    let (bc, b) = (c / k, c % k);
    let (bi, bc) = (bi as isize, bc as isize);
    let tri = |ok: bool| if ok { Zone::Free } else { Zone::Triangle };
    if bi == 0 {
        return match bc {
            0 | 1 => Zone::Free,
            2 => tri(b <= a),
            _ => Zone::Zero,
        };
    }
    if bi == 1 {
        return match bc {
            0 => tri(b >= a),
            1 | 2 => Zone::Free,
            _ => Zone::Zero,
        };
    }
    if bi % 2 == 0 {
        let p = bi / 2;
        if (2 * p - 1..=2 * p + 1).contains(&bc) {
            Zone::Free
        } else if bc == 2 * p + 2 {
            tri(b <= a)
        } else {
            Zone::Zero
        }
    } else {
        let p = (bi - 1) / 2;
        if (2 * p..=2 * p + 2).contains(&bc) {
            Zone::Free
        } else if bc == 2 * p - 1 {
            tri(b >= a)
        } else {
            Zone::Zero
        }
    }
}

/// Diagnostic summary of how far a matrix is from block CMV shape.
#[derive(Clone, Debug, PartialEq)]
pub struct CmvReport {
    /// Largest magnitude in blocks that must vanish.
    pub zero_block_max: f64,
    /// Largest magnitude on the wrong side of a triangular corner.
    pub triangle_max: f64,
    /// `(p, rank)` of `A[2pk..(2p+2)k, (2p-1)k..(2p+2)k]` for `p >= 1`.
    pub rank_blocks: Vec<(usize, usize)>,
}

impl CmvReport {
    pub fn max_violation(&self) -> f64 {
        self.zero_block_max.max(self.triangle_max)
    }
}

/// Checks the block CMV pattern of a dense matrix; ranks count singular values
/// above `tol * sigma_max` of each probed block.
pub fn cmv_validate(m: &CMat, k: usize, tol: f64) -> Result<CmvReport> {
    let n = m.nrows();
    if k == 0 || m.ncols() != n || n % k != 0 {
        return Err(HessError::Shape(format!(
            "cmv_validate needs a square matrix of order a multiple of k; got {}x{} with k = {k}",
            n,
            m.ncols()
        )));
    }
    let (mut zero_block_max, mut triangle_max) = (0.0f64, 0.0f64);
    for c in 0..n {
        for i in 0..n {
            match cmv_zone(i, c, k) {
                Zone::Free => {}
                Zone::Triangle => triangle_max = triangle_max.max(m[(i, c)].norm()),
                Zone::Zero => zero_block_max = zero_block_max.max(m[(i, c)].norm()),
            }
        }
    }
    let mut rank_blocks = Vec::new();
    let mut p = 1;
    while (2 * p + 2) * k <= n {
        let block = m
            .view((2 * p * k, (2 * p - 1) * k), (2 * k, 3 * k))
            .clone_owned();
        let sigma = block.clone().singular_values().max();
        rank_blocks.push((p, numerical_rank(&block, tol * sigma)));
        p += 1;
    }
    Ok(CmvReport {
        zero_block_max,
        triangle_max,
        rank_blocks,
    })
}

/// Band version of [`cmv_validate`]; entries outside the stored band are zero.
pub fn cmv_validate_band(m: &BandMatrix, k: usize, tol: f64) -> Result<CmvReport> {
    cmv_validate(&m.to_dense(), k, tol)
}

/// Block CMV matrix held as `A1 A2` through its block unitary transformations.
#[derive(Clone, Debug, PartialEq)]
pub struct CMVFactored {
    pub k: usize,
    pub ell: usize,
    /// Even positions first, then odd positions, each in increasing order.
    pub transformations: Vec<BlockUnitaryTransformation>,
    /// Set once the corners have been triangularized.
    pub corner_flags: Option<Vec<TriangularCornerFlags>>,
}

impl CMVFactored {
    pub fn new(k: usize, ell: usize, transformations: Vec<BlockUnitaryTransformation>) -> Result<Self> {
        if k == 0 || ell < 2 {
            return Err(HessError::Shape(format!("invalid CMV dimensions k = {k}, l = {ell}")));
        }
        let expected: Vec<usize> = (0..ell - 1)
            .filter(|p| p % 2 == 0)
            .chain((0..ell - 1).filter(|p| p % 2 == 1))
            .collect();
        let got: Vec<usize> = transformations.iter().map(|t| t.j).collect();
        if got != expected || transformations.iter().any(|t| t.k != k) {
            return Err(HessError::Index(format!(
                "factored CMV positions {got:?} do not follow the even-then-odd order {expected:?}"
            )));
        }
        Ok(CMVFactored {
            k,
            ell,
            transformations,
            corner_flags: None,
        })
    }

    pub fn n(&self) -> usize {
        self.k * self.ell
    }

    fn split_index(&self) -> usize {
        self.ell / 2
    }

    /// Transformations forming `A1`.
    pub fn left(&self) -> &[BlockUnitaryTransformation] {
        &self.transformations[..self.split_index()]
    }

    /// Transformations forming `A2`.
    pub fn right(&self) -> &[BlockUnitaryTransformation] {
        &self.transformations[self.split_index()..]
    }

    pub fn identity(k: usize, ell: usize) -> Result<Self> {
        let ts = (0..ell.saturating_sub(1))
            .filter(|p| p % 2 == 0)
            .chain((0..ell.saturating_sub(1)).filter(|p| p % 2 == 1))
            .map(|p| BlockUnitaryTransformation::identity(p, k))
            .collect();
        CMVFactored::new(k, ell, ts)
    }

    /// Dense product `A1 A2`.
    pub fn to_dense(&self) -> CMat {
        let n = self.n();
        let mut m = CMat::identity(n, n);
        for t in self.transformations.iter().rev() {
            t.apply_left(&mut m).expect("positions validated");
        }
        m
    }

    /// Measures and stores the corner flags of every transformation.
    pub fn measure_corner_flags(&mut self, tol: &Tolerance) {
        self.corner_flags = Some(self.transformations.iter().map(|t| t.corner_flags(tol)).collect());
    }
}

/// Band expansion with `lower_bw = upper_bw = 2k`.
///
/// Requires the corner structure that keeps the product inside the band;
/// otherwise the first offending entry is reported.
pub fn cmv_expand(f: &CMVFactored) -> Result<BandMatrix> {
    let (n, k) = (f.n(), f.k);
    let wide = expand_wide(f)?;
    let tol = Tolerance::default().structure_threshold(n, 1.0);
    wide.rebanded(2 * k, 2 * k, tol)
}

/// Expansion into a `3k` band, which holds the product for any corners.
pub fn expand_wide(f: &CMVFactored) -> Result<BandMatrix> {
    let (n, k) = (f.n(), f.k);
    let mut b = BandMatrix::zeros(n, 3 * k, 3 * k, BandKind::General);
    for i in 0..n {
        b.set(i, i, ONE)?;
    }
    for t in f.transformations.iter().rev() {
        t.apply_left_band(&mut b)?;
    }
    Ok(b)
}

/// `A = A1 A2` with both factors block diagonal.
#[derive(Clone, Debug)]
pub struct BlockDiagonalSplit {
    pub a1: CMat,
    pub a2: CMat,
    /// Blocks whose construction met a rank collapse (singular corners).
    pub degenerate_blocks: Vec<usize>,
}

/// Unitary `W` with `X W` upper triangular; the identity when `X` already is.
fn right_upper(x: &CMat) -> CMat {
    let m = x.nrows();
    let flip = |a: &CMat| CMat::from_fn(m, m, |i, j| a[(m - 1 - i, m - 1 - j)]);
    flip(&upper_left(&flip(&x.adjoint())).adjoint())
}

/// Unitary completion of an orthonormal `s x k` block `y`; qr normalizes
/// `R` to a positive diagonal, so for orthonormal `y` the leading columns of
/// `Q` reproduce `y`. A diagonal of `R` away from one flags a rank collapse.
fn complete(y: &CMat, noise: f64) -> (CMat, bool) {
    let (q, r) = qr(y);
    let degenerate = (0..y.ncols()).any(|i| (r[(i, i)].norm() - 1.0).abs() > noise);
    (q, degenerate)
}

/// Splits a block CMV matrix into its two block-diagonal factors.
pub fn cmv_block_diagonal_split(a: &CMat, k: usize) -> Result<BlockDiagonalSplit> {
    let n = a.nrows();
    if k == 0 || a.ncols() != n || n % k != 0 || n < 2 * k {
        return Err(HessError::Shape(format!(
            "cannot split a {}x{} matrix with block size {k}",
            n,
            a.ncols()
        )));
    }
    let ell = n / k;
    let noise = Tolerance::default().structure_threshold(n, 1.0).sqrt();
    let mut degenerate_blocks = Vec::new();
    let mut a1 = CMat::zeros(n, n);

    let (q0, bad) = complete(&a.view((0, 0), (2 * k, k)).clone_owned(), noise);
    if bad {
        degenerate_blocks.push(0);
    }
    a1.view_mut((0, 0), (2 * k, 2 * k)).copy_from(&q0);
    let mut prev = q0;
    let mut p = 1;
    while 2 * p * k < n {
        let r0 = 2 * p * k;
        let s = (2 * k).min(n - r0);
        let c0 = (2 * p - 1) * k;
        // Top half of the A2 block at rows c0..c0+2k, already determined.
        let t = (prev.adjoint() * a.view((r0 - 2 * k, c0), (2 * k, 2 * k)))
            .rows(k, k)
            .clone_owned();
        let q = qr(&t.adjoint()).0;
        let x = q.columns(k, k).adjoint();
        let y = a.view((r0, c0), (s, 2 * k)) * x.adjoint();
        let (qp, bad) = complete(&y, noise);
        if bad {
            degenerate_blocks.push(p);
        }
        a1.view_mut((r0, r0), (s, s)).copy_from(&qp);
        prev = qp;
        p += 1;
    }

    let full = matmul(&a1.adjoint(), a);
    let mut a2 = CMat::zeros(n, n);
    for i in 0..k {
        a2[(i, i)] = ONE;
    }
    let mut r0 = k;
    while r0 < n {
        let s = (2 * k).min(n - r0);
        a2.view_mut((r0, r0), (s, s)).copy_from(&full.view((r0, r0), (s, s)));
        r0 += 2 * k;
    }

    // The factorization is unique up to A1 W, W^H A2 with W block diagonal;
    // choose W to make the corners triangular.
    for b in 1..ell {
        let w = if b % 2 == 0 {
            if b + 1 < ell {
                right_upper(&a1.view((b * k + k, b * k), (k, k)).clone_owned())
            } else {
                upper_left(&a2.view((b * k, b * k - k), (k, k)).clone_owned()).adjoint()
            }
        } else {
            lower_right(&a1.view((b * k - k, b * k), (k, k)).clone_owned()).adjoint()
        };
        let cols = a1.columns(b * k, k) * &w;
        a1.columns_mut(b * k, k).copy_from(&cols);
        let rows = w.adjoint() * a2.rows(b * k, k);
        a2.rows_mut(b * k, k).copy_from(&rows);
    }
    Ok(BlockDiagonalSplit {
        a1,
        a2,
        degenerate_blocks,
    })
}

fn push_transformation(journal: &mut Journal, t: &BlockUnitaryTransformation) {
    if !t.is_identity() {
        journal.push_block(t.offset(), t.active.clone());
    }
}

/// Turns the V-shaped product `A_0 .. A_{L-1} B_{L-1} .. B_0` into a
/// descending one: returns `P` (as a journal) and `C_0 .. C_{L-1}` with
/// `P (prod A)(prod B) P^H = prod C`. `P` never touches the first block.
///
/// `bseq` is given in product order, i.e. positions `L-1, .., 0`.
pub fn v_to_descending(
    aseq: &[BlockUnitaryTransformation],
    bseq: &[BlockUnitaryTransformation],
) -> Result<(Journal, Vec<BlockUnitaryTransformation>)> {
    let len = aseq.len();
    if len == 0 || bseq.len() != len {
        return Err(HessError::Index(format!(
            "V shape needs two sequences of equal positive length; got {} and {}",
            len,
            bseq.len()
        )));
    }
    for (p, t) in aseq.iter().enumerate() {
        let b = &bseq[len - 1 - p];
        if t.j != p || b.j != p {
            return Err(HessError::Index(format!(
                "malformed V shape at position {p}: ({}, {})",
                t.j, b.j
            )));
        }
    }
    let b_at = |m: usize| &bseq[len - 1 - m];
    let mut journal = Journal::new();
    let mut d = vec![fuse(&aseq[len - 1], b_at(len - 1))?];
    for m in (0..len - 1).rev() {
        let mut out = Vec::with_capacity(len - m);
        let mut x = aseq[m].clone();
        let mut y = b_at(m).clone();
        for dt in &d {
            let (bhat, c, dhat) = turnover(&x, dt, &y)?;
            push_transformation(&mut journal, &bhat.adjoint());
            out.push(c);
            x = dhat;
            y = bhat;
        }
        out.push(fuse(&x, &y)?);
        d = out;
    }
    Ok((journal, d))
}

/// Reorders a descending product `C_0 .. C_{L-1}` into CMV order by
/// similarities built from the `C_i` themselves. The similarity `P_S`
/// (returned as a journal) never touches the first block.
pub fn descending_to_cmv(cseq: Vec<BlockUnitaryTransformation>) -> Result<(Journal, CMVFactored)> {
    let len = cseq.len();
    if len == 0 {
        return Err(HessError::Index("empty descending sequence".into()));
    }
    let k = cseq[0].k;
    for (p, t) in cseq.iter().enumerate() {
        if t.j != p || t.k != k {
            return Err(HessError::Index(format!(
                "expected a descending sequence; entry {p} sits at block {}",
                t.j
            )));
        }
    }
    let mut journal = Journal::new();
    // After round r the product reads (C_1 C_3 .. C_{2r-1})(C_0 C_2 .. C_{2r-2}) C_{2r} ..;
    // round r + 1 conjugates by the tail C_{2r+1} .. C_{L-1}.
    let mut start = 1;
    while start < len {
        for t in cseq[start..].iter().rev() {
            push_transformation(&mut journal, t);
        }
        start += 2;
    }
    // (odd)(even) -> (even)(odd) by conjugating with the odd group.
    for t in cseq.iter().skip(1).step_by(2) {
        push_transformation(&mut journal, &t.adjoint());
    }
    let mut ordered: Vec<BlockUnitaryTransformation> = Vec::with_capacity(len);
    ordered.extend(cseq.iter().step_by(2).cloned());
    ordered.extend(cseq.iter().skip(1).step_by(2).cloned());
    Ok((journal, CMVFactored::new(k, len + 1, ordered)?))
}

/// Block-diagonal similarity `P_T = diag(P_0, .., P_{l-1})` (with `P_0 = I`)
/// that makes every lower-left corner upper triangular and every upper-right
/// corner lower triangular. The last transformation keeps only the corner
/// that bounds the bandwidth (its lower-left one when it belongs to `A1`,
/// its upper-right one otherwise); its flags record the outcome.
pub fn triangularize_cmv(f: &CMVFactored, tol: &Tolerance) -> Result<(Vec<CMat>, CMVFactored)> {
    let (k, ell) = (f.k, f.ell);
    let ident = CMat::identity(k, k);
    let mut qs = vec![ident.clone(); ell];
    let mut ps = vec![ident; ell];
    let by_pos: Vec<&BlockUnitaryTransformation> = {
        let mut v: Vec<&BlockUnitaryTransformation> = f.transformations.iter().collect();
        v.sort_by_key(|t| t.j);
        v
    };
    for b in 1..ell {
        let x = &by_pos[b - 1].active;
        let lc = x.view((0, k), (k, k)).clone_owned();
        let rc = x.view((k, 0), (k, k)).clone_owned();
        let in_left = (b - 1) % 2 == 0;
        let last = b == ell - 1;
        // Left multipliers act on rows, right multipliers on columns.
        let (lf, rt) = if in_left { (&mut qs, &mut ps) } else { (&mut ps, &mut qs) };
        if !last || !in_left {
            rt[b] = lower_right(&(&lf[b - 1] * &lc));
        }
        if !last || in_left {
            lf[b] = upper_left(&(&rc * rt[b - 1].adjoint()));
        }
        if last {
            ps[b] = qs[b].clone();
        }
    }
    let conj = |t: &BlockUnitaryTransformation, lm: &[CMat], rm: &[CMat]| {
        let (j, s) = (t.j, 2 * k);
        let mut l = CMat::zeros(s, s);
        let mut r = CMat::zeros(s, s);
        l.view_mut((0, 0), (k, k)).copy_from(&lm[j]);
        l.view_mut((k, k), (k, k)).copy_from(&lm[j + 1]);
        r.view_mut((0, 0), (k, k)).copy_from(&rm[j]);
        r.view_mut((k, k), (k, k)).copy_from(&rm[j + 1]);
        BlockUnitaryTransformation {
            j,
            k,
            active: l * &t.active * r.adjoint(),
        }
    };
    let transformations = f
        .transformations
        .iter()
        .map(|t| if t.j % 2 == 0 { conj(t, &qs, &ps) } else { conj(t, &ps, &qs) })
        .collect();
    let mut out = CMVFactored::new(k, ell, transformations)?;
    out.measure_corner_flags(tol);
    Ok((qs, out))
}

/// Output of [`diagonal_to_cmv`].
#[derive(Clone, Debug)]
pub struct CmvReduction {
    pub cmv: CMVFactored,
    /// Replays to `P` with `P diag(d) P^H = cmv` and `P U = e_1 (x) U1`.
    pub journal: Journal,
    pub u1: CMat,
}

/// Reduces `diag(d)` (unimodular) to block CMV form by a similarity that also
/// compresses `U` (`n x k`) to its leading `k x k` block.
pub fn diagonal_to_cmv(d: &[C64], u: &CMat, tol: &Tolerance) -> Result<CmvReduction> {
    let n = d.len();
    let k = u.ncols();
    if u.nrows() != n {
        return Err(HessError::Shape(format!("U has {} rows, expected {n}", u.nrows())));
    }
    if k == 0 || n % (2 * k) != 0 {
        return Err(HessError::Shape(format!(
            "order {n} is not a multiple of 2k = {}; pad the problem first",
            2 * k
        )));
    }
    let (qseq, r) = block_qr_tall(u, k)?;
    let mut journal = Journal::new();
    for t in qseq.iter().rev() {
        push_transformation(&mut journal, t);
    }
    let u1 = r.rows(0, k).clone_owned();

    let aseq = pass_diagonal(&qseq, d, tol)?;
    let bseq: Vec<BlockUnitaryTransformation> = qseq.iter().rev().map(|t| t.adjoint()).collect();
    let (pv, cseq) = v_to_descending(&aseq, &bseq)?;
    journal.extend(pv);
    let (ps, f) = descending_to_cmv(cseq)?;
    journal.extend(ps);
    let (pt, cmv) = triangularize_cmv(&f, tol)?;
    for (b, blk) in pt.iter().enumerate().skip(1) {
        if *blk != CMat::identity(k, k) {
            journal.push_block(b * k, blk.clone());
        }
    }
    Ok(CmvReduction { cmv, journal, u1 })
}

/// `||P (e_1 (x) I_k) - e_1 (x) I_k||_F` for a dense `P`.
pub fn first_block_column_defect(p: &CMat, k: usize) -> f64 {
    let n = p.nrows();
    let mut e = CMat::zeros(n, k);
    for i in 0..k {
        e[(i, i)] = ONE;
    }
    frob(&(p.columns(0, k) - e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::sequence_product;
    use crate::dense::{complex_gaussian, haar_unitary, ZERO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const U: f64 = f64::EPSILON;

    fn random_t<R: Rng>(j: usize, k: usize, rng: &mut R) -> BlockUnitaryTransformation {
        BlockUnitaryTransformation::new(j, k, haar_unitary(2 * k, rng)).unwrap()
    }

    fn random_factored<R: Rng>(k: usize, ell: usize, rng: &mut R) -> CMVFactored {
        let ts = (0..ell - 1)
            .filter(|p| p % 2 == 0)
            .chain((0..ell - 1).filter(|p| p % 2 == 1))
            .map(|p| random_t(p, k, rng))
            .collect();
        CMVFactored::new(k, ell, ts).unwrap()
    }

    fn random_cmv<R: Rng>(k: usize, ell: usize, rng: &mut R) -> CMVFactored {
        let tol = Tolerance::default();
        triangularize_cmv(&random_factored(k, ell, rng), &tol).unwrap().1
    }

    fn unimodular<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
        (0..n)
            .map(|_| C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect()
    }

    fn diag(d: &[C64]) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_vec(d.to_vec()))
    }

    #[test]
    fn pattern_examples() {
        // k = 1: pentadiagonal staircase.
        assert!(cmv_allowed(0, 2, 1));
        assert!(!cmv_allowed(0, 3, 1));
        assert!(cmv_allowed(1, 0, 1));
        assert!(!cmv_allowed(2, 0, 1));
        assert!(cmv_allowed(3, 1, 1));
        assert!(!cmv_allowed(1, 3, 1));
        // k = 2: corner triangles.
        assert!(!cmv_allowed(0, 5, 2));
        assert!(cmv_allowed(1, 5, 2));
        assert!(!cmv_allowed(3, 0, 2));
        assert!(cmv_allowed(3, 1, 2));
    }

    #[test]
    fn validate_identity_and_haar() {
        let id = CMat::identity(8, 8);
        assert_eq!(cmv_validate(&id, 2, 1e-12).unwrap().max_violation(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = haar_unitary(8, &mut rng);
        assert!(cmv_validate(&h, 2, 1e-12).unwrap().max_violation() > 1e-3);
    }

    #[test]
    fn expanded_random_cmv_passes_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (k, ell) in [(1, 6), (2, 4), (2, 5), (3, 6)] {
            let f = random_cmv(k, ell, &mut rng);
            let n = f.n();
            let band = cmv_expand(&f).unwrap();
            let dense = band.to_dense();
            assert!(frob(&(&dense - f.to_dense())) <= 100.0 * n as f64 * U);
            let rep = cmv_validate(&dense, k, 100.0 * n as f64 * U).unwrap();
            assert!(rep.max_violation() <= 100.0 * n as f64 * U, "{k} {ell} {rep:?}");
            assert!(frob(&(matmul(&dense, &dense.adjoint()) - CMat::identity(n, n))) <= 100.0 * n as f64 * U);
        }
    }

    #[test]
    fn expand_trivial_cases() {
        let f = CMVFactored::identity(2, 4).unwrap();
        assert_eq!(cmv_expand(&f).unwrap().to_dense(), CMat::identity(8, 8));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_cmv(2, 2, &mut rng);
        assert!(frob(&(cmv_expand(&f).unwrap().to_dense() - f.transformations[0].embed(4).unwrap())) < 1e-15);
    }

    #[test]
    fn untriangular_factors_do_not_fit_the_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_factored(2, 6, &mut rng);
        assert!(cmv_expand(&f).is_err());
        assert!(frob(&(expand_wide(&f).unwrap().to_dense() - f.to_dense())) < 1e-13);
    }

    #[test]
    fn split_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (k, ell) in [(1, 8), (2, 4), (2, 6), (3, 4), (2, 5)] {
            let a = random_cmv(k, ell, &mut rng).to_dense();
            let n = a.nrows();
            let s = cmv_block_diagonal_split(&a, k).unwrap();
            assert!(s.degenerate_blocks.is_empty());
            assert!(frob(&(matmul(&s.a1, &s.a2) - &a)) <= 100.0 * n as f64 * U, "{k} {ell}");
            // Block structure and corners of both factors.
            for i in 0..n {
                for j in 0..n {
                    let (bi, bj) = (i / k, j / k);
                    let in1 = bi / 2 == bj / 2;
                    let in2 = (bi == 0 && bj == 0) || (bi >= 1 && bj >= 1 && (bi - 1) / 2 == (bj - 1) / 2);
                    if !in1 {
                        assert_eq!(s.a1[(i, j)], ZERO);
                    }
                    if !in2 {
                        assert_eq!(s.a2[(i, j)], ZERO);
                    }
                    let tri_bad = (bi == bj + 1 && i % k > j % k) || (bj == bi + 1 && j % k > i % k);
                    if tri_bad && in1 {
                        assert!(s.a1[(i, j)].norm() <= 100.0 * n as f64 * U, "A1 corner ({i},{j})");
                    }
                    if tri_bad && in2 {
                        assert!(s.a2[(i, j)].norm() <= 100.0 * n as f64 * U, "A2 corner ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn split_trivial_cases() {
        let s = cmv_block_diagonal_split(&CMat::identity(8, 8), 2).unwrap();
        assert!(frob(&(s.a1 - CMat::identity(8, 8))) < 1e-15);
        assert!(frob(&(s.a2 - CMat::identity(8, 8))) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut a = CMat::zeros(8, 8);
        a.view_mut((0, 0), (4, 4)).copy_from(&haar_unitary(4, &mut rng));
        a.view_mut((4, 4), (4, 4)).copy_from(&haar_unitary(4, &mut rng));
        let s = cmv_block_diagonal_split(&a, 2).unwrap();
        assert!(frob(&(matmul(&s.a1, &s.a2) - &a)) < 1e-13);
        // A2 is a block-diagonal unitary with k x k blocks only.
        for i in 0..8 {
            for j in 0..8 {
                if i / 2 != j / 2 {
                    assert!(s.a2[(i, j)].norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn v_to_descending_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = 2;
        let a = vec![random_t(0, k, &mut rng)];
        let b = vec![random_t(0, k, &mut rng)];
        let (p, c) = v_to_descending(&a, &b).unwrap();
        assert!(p.is_empty());
        assert_eq!(c[0], fuse(&a[0], &b[0]).unwrap());

        let ids: Vec<_> = (0..3).map(|j| BlockUnitaryTransformation::identity(j, k)).collect();
        let rev: Vec<_> = ids.iter().rev().cloned().collect();
        let (p, c) = v_to_descending(&ids, &rev).unwrap();
        assert!(p.is_empty());
        for t in c {
            assert!(frob(&(t.active - CMat::identity(2 * k, 2 * k))) <= 100.0 * k as f64 * U);
        }

        let ell = 4;
        let n = ell * k;
        let a: Vec<_> = (0..ell - 1).map(|j| random_t(j, k, &mut rng)).collect();
        let b: Vec<_> = (0..ell - 1).rev().map(|j| random_t(j, k, &mut rng)).collect();
        let (p, c) = v_to_descending(&a, &b).unwrap();
        let pm = p.replay(n).unwrap();
        let lhs = matmul(
            &matmul(&pm, &matmul(&sequence_product(&a, n).unwrap(), &sequence_product(&b, n).unwrap())),
            &pm.adjoint(),
        );
        assert!(frob(&(lhs - sequence_product(&c, n).unwrap())) <= 1e3 * n as f64 * U);
        assert_eq!(first_block_column_defect(&pm, k), 0.0);

        assert!(v_to_descending(&a, &a).is_err());
    }

    #[test]
    fn descending_to_cmv_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = 2;
        for ell in [2, 3, 4, 6, 7] {
            let n = ell * k;
            let c: Vec<_> = (0..ell - 1).map(|j| random_t(j, k, &mut rng)).collect();
            let (ps, f) = descending_to_cmv(c.clone()).unwrap();
            let pm = ps.replay(n).unwrap();
            let lhs = matmul(&matmul(&pm, &sequence_product(&c, n).unwrap()), &pm.adjoint());
            assert!(frob(&(lhs - f.to_dense())) <= 100.0 * n as f64 * U, "l = {ell}");
            assert_eq!(first_block_column_defect(&pm, k), 0.0);
            if ell == 2 {
                assert!(ps.is_empty());
                assert_eq!(f.transformations, c);
            }
        }
    }

    #[test]
    fn triangularization_examples() {
        let tol = Tolerance::default();
        let f = CMVFactored::identity(2, 4).unwrap();
        let (pt, g) = triangularize_cmv(&f, &tol).unwrap();
        assert!(pt.iter().all(|p| *p == CMat::identity(2, 2)));
        assert_eq!(g.transformations, f.transformations);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for ell in [4, 5] {
            let k = 2;
            let n = ell * k;
            let f = random_factored(k, ell, &mut rng);
            let (pt, g) = triangularize_cmv(&f, &tol).unwrap();
            let mut p = CMat::zeros(n, n);
            for (b, blk) in pt.iter().enumerate() {
                p.view_mut((b * k, b * k), (k, k)).copy_from(blk);
            }
            let lhs = matmul(&matmul(&p, &f.to_dense()), &p.adjoint());
            assert!(frob(&(lhs - g.to_dense())) <= 100.0 * n as f64 * U);
            let flags = g.corner_flags.as_ref().unwrap();
            let last = flags.iter().zip(&g.transformations).position(|(_, t)| t.j == ell - 2).unwrap();
            for (i, (fl, t)) in flags.iter().zip(&g.transformations).enumerate() {
                let (lo, up) = t.corner_defects();
                if i == last {
                    if t.j % 2 == 0 {
                        assert!(fl.lower_left_upper_triangular && lo <= 100.0 * k as f64 * U);
                    } else {
                        assert!(fl.upper_right_lower_triangular && up <= 100.0 * k as f64 * U);
                    }
                } else {
                    assert!(fl.both());
                    assert!(lo.max(up) <= 100.0 * k as f64 * U);
                }
            }
            // Already triangular input needs no further work.
            let (pt2, _) = triangularize_cmv(&g, &tol).unwrap();
            for blk in pt2 {
                assert!(frob(&(blk - CMat::identity(k, k))) <= 100.0 * k as f64 * U);
            }
        }
    }

    #[test]
    fn diagonal_to_cmv_pipeline() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (n, k) in [(8, 2), (12, 3), (16, 2), (8, 1), (8, 4)] {
            let d = unimodular(n, &mut rng);
            let u = complex_gaussian(n, k, &mut rng);
            let red = diagonal_to_cmv(&d, &u, &tol).unwrap();
            let p = red.journal.replay(n).unwrap();
            let cmv = cmv_expand(&red.cmv).unwrap().to_dense();
            let sim = matmul(&matmul(&p, &diag(&d)), &p.adjoint());
            let scale = 100.0 * n as f64 * U;
            assert!(frob(&(&sim - &cmv)) <= scale, "n={n} k={k}: {}", frob(&(&sim - &cmv)));
            assert!(cmv_validate(&cmv, k, scale).unwrap().max_violation() <= scale);
            let pu = matmul(&p, &u);
            let mut e = CMat::zeros(n, k);
            e.rows_mut(0, k).copy_from(&red.u1);
            assert!(frob(&(pu - e)) <= scale * frob(&u));
        }
    }

    #[test]
    fn diagonal_to_cmv_trivial_inputs() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, k) = (8, 2);
        let u = complex_gaussian(n, k, &mut rng);
        let red = diagonal_to_cmv(&vec![ONE; n], &u, &tol).unwrap();
        assert!(frob(&(cmv_expand(&red.cmv).unwrap().to_dense() - CMat::identity(n, n))) <= 100.0 * n as f64 * U);
        let r = qr(&u).1;
        assert!(frob(&(&red.u1 - r.rows(0, k))) <= 100.0 * n as f64 * U * frob(&u));

        let mut e = CMat::zeros(n, k);
        e[(0, 0)] = ONE;
        e[(1, 1)] = ONE;
        let (seq, _) = block_qr_tall(&e, k).unwrap();
        assert!(seq.iter().all(|t| t.is_identity()));
        let d = unimodular(n, &mut rng);
        let red = diagonal_to_cmv(&d, &e, &tol).unwrap();
        let p = red.journal.replay(n).unwrap();
        let sim = matmul(&matmul(&p, &diag(&d)), &p.adjoint());
        assert!(frob(&(sim - cmv_expand(&red.cmv).unwrap().to_dense())) <= 100.0 * n as f64 * U);

        assert!(diagonal_to_cmv(&vec![ONE; 6], &complex_gaussian(6, 2, &mut rng), &tol).is_err());
        let mut bad = d.clone();
        bad[0] = C64::new(2.0, 0.0);
        assert!(matches!(diagonal_to_cmv(&bad, &e, &tol), Err(HessError::Kind(_))));
    }

    #[test]
    fn rank_blocks_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (k, ell) = (2, 6);
        let a = random_cmv(k, ell, &mut rng).to_dense();
        let rep = cmv_validate(&a, k, 1e-10).unwrap();
        assert_eq!(rep.rank_blocks.len(), 2);
        // Generic block CMV matrices have full rank 2k in these windows.
        assert!(rep.rank_blocks.iter().all(|&(_, r)| r == 2 * k));
    }
}
