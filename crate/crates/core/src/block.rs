//! Block unitary transformations with block size `k`.
//!
//! A transformation at position `j` (0-based) is the identity except for a
//! `2k x 2k` active block on rows and columns `j*k .. (j+2)*k`. Sequences are
//! stored in product order: `[T0, T1, ..]` stands for `T0 * T1 * ..`.

use num_complex::Complex64 as C64;

use crate::band::BandMatrix;
use crate::dense::{frob, qr, CMat, ONE, ZERO};
use crate::error::{HessError, Result};
use crate::givens::Tolerance;

#[derive(Clone, Debug, PartialEq)]
pub struct BlockUnitaryTransformation {
    /// Block position: the active part covers block rows `j` and `j + 1`.
    pub j: usize,
    pub k: usize,
    pub active: CMat,
}

/// Triangularity of the off-diagonal corners of an active block
/// `[X L; R Y]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TriangularCornerFlags {
    /// `R` is upper triangular.
    pub lower_left_upper_triangular: bool,
    /// `L` is lower triangular.
    pub upper_right_lower_triangular: bool,
}

impl TriangularCornerFlags {
    pub fn both(&self) -> bool {
        self.lower_left_upper_triangular && self.upper_right_lower_triangular
    }
}

impl BlockUnitaryTransformation {
    pub fn identity(j: usize, k: usize) -> Self {
        BlockUnitaryTransformation {
            j,
            k,
            active: CMat::identity(2 * k, 2 * k),
        }
    }

    pub fn new(j: usize, k: usize, active: CMat) -> Result<Self> {
        if k == 0 || active.shape() != (2 * k, 2 * k) {
            return Err(HessError::Shape(format!(
                "active block {:?} does not match block size {k}",
                active.shape()
            )));
        }
        if active.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(HessError::Kind("active block has non-finite entries".into()));
        }
        Ok(BlockUnitaryTransformation { j, k, active })
    }

    /// First row/column touched.
    pub fn offset(&self) -> usize {
        self.j * self.k
    }

    pub fn size(&self) -> usize {
        2 * self.k
    }

    pub fn adjoint(&self) -> Self {
        BlockUnitaryTransformation {
            j: self.j,
            k: self.k,
            active: self.active.adjoint(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.active == CMat::identity(2 * self.k, 2 * self.k)
    }

    /// `||active^H active - I||_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let s = self.size();
        frob(&(self.active.adjoint() * &self.active - CMat::identity(s, s)))
    }

    /// Dense embedding of order `n`.
    pub fn embed(&self, n: usize) -> Result<CMat> {
        self.check_fits(n)?;
        let mut m = CMat::identity(n, n);
        m.view_mut((self.offset(), self.offset()), (self.size(), self.size()))
            .copy_from(&self.active);
        Ok(m)
    }

    fn check_fits(&self, n: usize) -> Result<()> {
        if self.offset() + self.size() > n {
            return Err(HessError::Index(format!(
                "transformation at block {} (k = {}) exceeds order {n}",
                self.j, self.k
            )));
        }
        Ok(())
    }

    /// `M <- T M`.
    pub fn apply_left(&self, m: &mut CMat) -> Result<()> {
        self.check_fits(m.nrows())?;
        let (o, s) = (self.offset(), self.size());
        let rows = m.rows(o, s).clone_owned();
        m.rows_mut(o, s).copy_from(&(&self.active * rows));
        Ok(())
    }

    /// `M <- M T`.
    pub fn apply_right(&self, m: &mut CMat) -> Result<()> {
        self.check_fits(m.ncols())?;
        let (o, s) = (self.offset(), self.size());
        let cols = m.columns(o, s).clone_owned();
        m.columns_mut(o, s).copy_from(&(cols * &self.active));
        Ok(())
    }

    /// `M <- T M` on band storage; fill outside the band is a structure error.
    pub fn apply_left_band(&self, m: &mut BandMatrix) -> Result<()> {
        let n = m.n();
        self.check_fits(n)?;
        let (o, s) = (self.offset(), self.size());
        let c0 = o.saturating_sub(m.lower_bw());
        let c1 = (o + s + m.upper_bw()).min(n);
        let mut x = vec![ZERO; s];
        for c in c0..c1 {
            for (t, xt) in x.iter_mut().enumerate() {
                *xt = m.get(o + t, c);
            }
            for r in 0..s {
                let mut acc = ZERO;
                for (t, xt) in x.iter().enumerate() {
                    acc += self.active[(r, t)] * xt;
                }
                m.set_or_zero(o + r, c, acc)?;
            }
        }
        Ok(())
    }

    /// `M <- M T` on band storage; fill outside the band is a structure error.
    pub fn apply_right_band(&self, m: &mut BandMatrix) -> Result<()> {
        let n = m.n();
        self.check_fits(n)?;
        let (o, s) = (self.offset(), self.size());
        let r0 = o.saturating_sub(m.upper_bw());
        let r1 = (o + s + m.lower_bw()).min(n);
        let mut x = vec![ZERO; s];
        for r in r0..r1 {
            for (t, xt) in x.iter_mut().enumerate() {
                *xt = m.get(r, o + t);
            }
            for c in 0..s {
                let mut acc = ZERO;
                for (t, xt) in x.iter().enumerate() {
                    acc += xt * self.active[(t, c)];
                }
                m.set_or_zero(r, o + c, acc)?;
            }
        }
        Ok(())
    }

    /// Corner triangularity measured against `c_z * k * u * ||active||_F`.
    pub fn corner_flags(&self, tol: &Tolerance) -> TriangularCornerFlags {
        let k = self.k;
        let limit = tol.zero_threshold(k, frob(&self.active));
        let (lower, upper) = self.corner_defects();
        TriangularCornerFlags {
            lower_left_upper_triangular: lower <= limit,
            upper_right_lower_triangular: upper <= limit,
        }
    }

    /// Largest entries below the diagonal of `R` and above the diagonal of `L`.
    pub fn corner_defects(&self) -> (f64, f64) {
        let k = self.k;
        let (mut lower, mut upper) = (0.0f64, 0.0f64);
        for r in 0..k {
            for c in 0..k {
                if r > c {
                    lower = lower.max(self.active[(k + r, c)].norm());
                }
                if c > r {
                    upper = upper.max(self.active[(r, k + c)].norm());
                }
            }
        }
        (lower, upper)
    }
}

/// Transformations at positions `i` and `j` commute.
pub fn commute_ok(i: usize, j: usize) -> bool {
    i.abs_diff(j) > 1
}

/// `E = A B` for transformations at the same position.
pub fn fuse(
    a: &BlockUnitaryTransformation,
    b: &BlockUnitaryTransformation,
) -> Result<BlockUnitaryTransformation> {
    if a.j != b.j || a.k != b.k {
        return Err(HessError::Index(format!(
            "cannot fuse transformations at ({}, k={}) and ({}, k={})",
            a.j, a.k, b.j, b.k
        )));
    }
    Ok(BlockUnitaryTransformation {
        j: a.j,
        k: a.k,
        active: &a.active * &b.active,
    })
}

fn check_descending(seq: &[BlockUnitaryTransformation]) -> Result<usize> {
    let k = seq.first().map_or(0, |t| t.k);
    for (p, t) in seq.iter().enumerate() {
        if t.j != p || t.k != k {
            return Err(HessError::Index(format!(
                "expected a descending sequence; entry {p} sits at block {} (k = {})",
                t.j, t.k
            )));
        }
    }
    Ok(k)
}

/// Dense product `seq[0] * seq[1] * ..` of order `n`.
pub fn sequence_product(seq: &[BlockUnitaryTransformation], n: usize) -> Result<CMat> {
    let mut m = CMat::identity(n, n);
    for t in seq.iter().rev() {
        t.apply_left(&mut m)?;
    }
    Ok(m)
}

/// Rewrites a descending sequence `A_0 .. A_{l-2}` so that its product
/// absorbs the unitary diagonal `d` on the right.
pub fn pass_diagonal(
    seq: &[BlockUnitaryTransformation],
    d: &[C64],
    tol: &Tolerance,
) -> Result<Vec<BlockUnitaryTransformation>> {
    let k = check_descending(seq)?;
    if seq.is_empty() {
        return Err(HessError::Shape("pass_diagonal needs at least one transformation".into()));
    }
    let n = (seq.len() + 1) * k;
    if d.len() != n {
        return Err(HessError::Shape(format!(
            "diagonal of length {} does not match order {n}",
            d.len()
        )));
    }
    let limit = tol.c_z * tol.u;
    if let Some((i, z)) = d.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > limit) {
        return Err(HessError::Kind(format!(
            "diagonal entry {i} has modulus {} (not unimodular)",
            z.norm()
        )));
    }
    let last = seq.len() - 1;
    let mut out = seq.to_vec();
    for (p, t) in out.iter_mut().enumerate() {
        let width = if p == last { 2 * k } else { k };
        for c in 0..width {
            let s = d[p * k + c];
            t.active.column_mut(c).iter_mut().for_each(|z| *z *= s);
        }
    }
    Ok(out)
}

fn unit_phase(z: C64) -> C64 {
    let a = z.norm();
    if a == 0.0 {
        ONE
    } else {
        z / a
    }
}

/// Turnover `A_j B_{j+1} C_j = A'_{j+1} B'_j C'_{j+1}`.
///
/// The unitary diagonal left over by the QR steps sits on the first block
/// and is absorbed into the middle factor.
pub fn turnover(
    a: &BlockUnitaryTransformation,
    b: &BlockUnitaryTransformation,
    c: &BlockUnitaryTransformation,
) -> Result<(
    BlockUnitaryTransformation,
    BlockUnitaryTransformation,
    BlockUnitaryTransformation,
)> {
    if a.j != c.j || b.j != a.j + 1 || a.k != b.k || b.k != c.k {
        return Err(HessError::Index(format!(
            "turnover needs positions (j, j+1, j); got ({}, {}, {})",
            a.j, b.j, c.j
        )));
    }
    let (j, k) = (a.j, a.k);
    let (s2, s3) = (2 * k, 3 * k);
    let mut w = CMat::identity(s3, s3);
    w.view_mut((0, 0), (s2, s2)).copy_from(&c.active);
    let lower = b.active.clone() * w.rows(k, s2);
    w.rows_mut(k, s2).copy_from(&lower);
    let upper = a.active.clone() * w.rows(0, s2);
    w.rows_mut(0, s2).copy_from(&upper);

    // Entries at rounding level in the columns being reduced are treated as
    // zero so that exact structure yields identity factors.
    let noise = Tolerance::default().zero_threshold(s3, 1.0);
    let flushed = |x: CMat| x.map(|z| if z.norm() <= noise { ZERO } else { z });
    let q1 = qr(&flushed(w.view((k, 0), (s2, k)).clone_owned())).0;
    let lower = q1.adjoint() * w.rows(k, s2);
    w.rows_mut(k, s2).copy_from(&lower);

    let mut q2 = qr(&flushed(w.view((0, 0), (s2, k)).clone_owned())).0;
    let upper = q2.adjoint() * w.rows(0, s2);
    w.rows_mut(0, s2).copy_from(&upper);
    for i in 0..k {
        let ph = unit_phase(w[(i, i)]);
        q2.column_mut(i).iter_mut().for_each(|z| *z *= ph);
    }
    let c_new = w.view((k, k), (s2, s2)).clone_owned();
    Ok((
        BlockUnitaryTransformation { j: j + 1, k, active: q1 },
        BlockUnitaryTransformation { j, k, active: q2 },
        BlockUnitaryTransformation { j: j + 1, k, active: c_new },
    ))
}

/// Block QR of a tall `n x k` matrix, `n = l k`: returns the descending
/// sequence `Q_0 .. Q_{l-2}` with `Q_0 .. Q_{l-2} U = R` (only the top
/// `k x k` block of `R` is nonzero, and it is upper triangular).
///
/// Transformations are computed bottom-up; a stack that is already reduced
/// yields the identity.
pub fn block_qr_tall(u: &CMat, k: usize) -> Result<(Vec<BlockUnitaryTransformation>, CMat)> {
    let n = u.nrows();
    if k == 0 || u.ncols() != k || n % k != 0 || n < 2 * k {
        return Err(HessError::Shape(format!(
            "block QR needs an n x k factor with n a multiple of k and n >= 2k; got {}x{} with k = {k}",
            n,
            u.ncols()
        )));
    }
    let ell = n / k;
    let mut r = u.clone();
    let mut seq = Vec::with_capacity(ell - 1);
    for i in (0..ell - 1).rev() {
        let stack = r.rows(i * k, 2 * k).clone_owned();
        let (q, rr) = qr(&stack);
        r.rows_mut(i * k, 2 * k).copy_from(&rr);
        seq.push(BlockUnitaryTransformation {
            j: i,
            k,
            active: q.adjoint(),
        });
    }
    seq.reverse();
    Ok((seq, r))
}
