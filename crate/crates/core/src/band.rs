//! Compressed diagonal storage for banded matrices.

use num_complex::Complex64 as C64;

use crate::dense::{frob, CMat, ZERO};
use crate::error::{HessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandKind {
    /// Only the lower triangle is stored; the upper one is its conjugate.
    Hermitian,
    General,
}

/// Band matrix stored diagonal by diagonal.
///
/// Diagonal `d = j - i` lives in slot `d + lower_bw`; entry `(i, j)` sits at
/// `slot * n + i`. Hermitian matrices store only `d <= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    lower_bw: usize,
    upper_bw: usize,
    kind: BandKind,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower_bw: usize, upper_bw: usize, kind: BandKind) -> Self {
        let upper_stored = match kind {
            BandKind::Hermitian => 0,
            BandKind::General => upper_bw,
        };
        BandMatrix {
            n,
            lower_bw,
            upper_bw: upper_stored,
            kind,
            data: vec![ZERO; (lower_bw + upper_stored + 1) * n],
        }
    }

    pub fn hermitian(n: usize, bw: usize) -> Self {
        Self::zeros(n, bw, 0, BandKind::Hermitian)
    }

    pub fn general(n: usize, lower_bw: usize, upper_bw: usize) -> Self {
        Self::zeros(n, lower_bw, upper_bw, BandKind::General)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> BandKind {
        self.kind
    }

    pub fn lower_bw(&self) -> usize {
        self.lower_bw
    }

    /// Logical upper bandwidth (equal to the lower one for Hermitian storage).
    pub fn upper_bw(&self) -> usize {
        match self.kind {
            BandKind::Hermitian => self.lower_bw,
            BandKind::General => self.upper_bw,
        }
    }

    /// Number of stored complex entries.
    pub fn storage_len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n {
            return None;
        }
        if j > i {
            let d = j - i;
            (d <= self.upper_bw).then(|| (self.lower_bw + d) * self.n + i)
        } else {
            let d = i - j;
            (d <= self.lower_bw).then(|| (self.lower_bw - d) * self.n + i)
        }
    }

    /// Entry `(i, j)`; zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.kind == BandKind::Hermitian && j > i {
            return self.get(j, i).conj();
        }
        match self.slot(i, j) {
            Some(s) => self.data[s],
            None => ZERO,
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(HessError::Index(format!("({i}, {j}) outside order {}", self.n)));
        }
        if self.kind == BandKind::Hermitian && j > i {
            return self.set(j, i, v.conj());
        }
        match self.slot(i, j) {
            Some(s) => {
                self.data[s] = v;
                Ok(())
            }
            None => Err(HessError::Structure { i, j, mag: v.norm() }),
        }
    }

    /// Write `v`, accepting exact zeros outside the band as no-ops.
    #[inline]
    pub fn set_or_zero(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        if v.re == 0.0 && v.im == 0.0 && self.slot_for_write(i, j).is_none() {
            return Ok(());
        }
        self.set(i, j, v)
    }

    fn slot_for_write(&self, i: usize, j: usize) -> Option<usize> {
        if self.kind == BandKind::Hermitian && j > i {
            self.slot(j, i)
        } else {
            self.slot(i, j)
        }
    }

    /// Similarity by `g` restricted to stored lower entries outside the 2x2
    /// block of its plane: rows `p, p+1` left of the block and columns
    /// `p, p+1` below it. Fill beyond the band is a structure error.
    pub fn rotate_lower_offblock(&mut self, g: &crate::givens::Givens) -> Result<()> {
        let n = self.n;
        let l = self.lower_bw;
        let p = g.plane;
        let at = |i: usize, j: usize| (l - (i - j)) * n + i;
        if p >= l {
            // Row p+1 has no stored entry in column p - l.
            let m = p - l;
            let x = self.data[at(p, m)];
            let (nx, ny) = g.rotate(x, ZERO);
            if ny != ZERO {
                return Err(HessError::Structure { i: p + 1, j: m, mag: ny.norm() });
            }
            self.data[at(p, m)] = nx;
        }
        for m in (p + 1).saturating_sub(l)..p {
            let (a, b) = (at(p, m), at(p + 1, m));
            let (x, y) = g.rotate(self.data[a], self.data[b]);
            self.data[a] = x;
            self.data[b] = y;
        }
        let last = (p + 1 + l).min(n - 1);
        for m in p + 2..=last {
            if m - p > l {
                let y = self.data[at(m, p + 1)];
                let (nx, ny) = g.rotate_right(ZERO, y);
                if nx != ZERO {
                    return Err(HessError::Structure { i: m, j: p, mag: nx.norm() });
                }
                self.data[at(m, p + 1)] = ny;
            } else {
                let (a, b) = (at(m, p), at(m, p + 1));
                let (x, y) = g.rotate_right(self.data[a], self.data[b]);
                self.data[a] = x;
                self.data[b] = y;
            }
        }
        Ok(())
    }

    /// Storage index of a lower entry `(i, j)`, `0 <= i - j <= lower_bw`.
    #[inline]
    pub fn lower_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.lower_bw && i < self.n);
        (self.lower_bw - (i - j)) * self.n + i
    }

    /// Raw storage, diagonal-major.
    #[inline]
    pub fn raw_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Whether `(i, j)` is inside the stored band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        self.slot_for_write(i, j).is_some()
    }

    /// Copy into storage with larger bandwidths.
    pub fn widen(&self, new_lower: usize, new_upper: usize) -> Result<BandMatrix> {
        if new_lower < self.lower_bw || new_upper < self.upper_bw() {
            return Err(HessError::Shape(format!(
                "cannot widen ({}, {}) to ({new_lower}, {new_upper})",
                self.lower_bw,
                self.upper_bw()
            )));
        }
        self.rebanded(new_lower, new_upper, 0.0)
    }

    /// Copy into storage with different bandwidths; dropped entries must not
    /// exceed `tol` in magnitude.
    pub fn rebanded(&self, new_lower: usize, new_upper: usize, tol: f64) -> Result<BandMatrix> {
        let mut out = BandMatrix::zeros(self.n, new_lower, new_upper, self.kind);
        let (lo, up) = (self.lower_bw, self.upper_bw);
        for i in 0..self.n {
            for j in i.saturating_sub(lo)..(i + up + 1).min(self.n) {
                let v = self.get(i, j);
                if out.in_band(i, j) {
                    out.set(i, j, v)?;
                } else if v.norm() > tol {
                    return Err(HessError::Structure { i, j, mag: v.norm() });
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        let (lo, up) = (self.lower_bw, self.upper_bw());
        for i in 0..self.n {
            for j in i.saturating_sub(lo)..(i + up + 1).min(self.n) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// Band copy of `a`; entries outside the band must be at most
    /// `tol * ||a||_F`, otherwise the worst offender is reported.
    pub fn from_dense(
        a: &CMat,
        lower_bw: usize,
        upper_bw: usize,
        kind: BandKind,
        tol: f64,
    ) -> Result<BandMatrix> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(HessError::Shape(format!("{}x{} is not square", n, a.ncols())));
        }
        let limit = tol * frob(a);
        let mut worst: Option<(usize, usize, f64)> = None;
        let mut out = BandMatrix::zeros(n, lower_bw, upper_bw, kind);
        for j in 0..n {
            for i in 0..n {
                let v = a[(i, j)];
                let inside = if i >= j { i - j <= lower_bw } else { j - i <= upper_bw };
                if inside {
                    if kind == BandKind::General || i >= j {
                        out.set(i, j, v)?;
                    }
                } else if v.norm() > limit && worst.map_or(true, |w| v.norm() > w.2) {
                    worst = Some((i, j, v.norm()));
                }
            }
        }
        match worst {
            Some((i, j, mag)) => Err(HessError::Structure { i, j, mag }),
            None => Ok(out),
        }
    }

    /// Maximum `|i - j|` over nonzero stored entries below and above the diagonal.
    pub fn measured_bandwidths(&self) -> (usize, usize) {
        let (mut lo, mut up) = (0, 0);
        for i in 0..self.n {
            for j in i.saturating_sub(self.lower_bw)..(i + self.upper_bw + 1).min(self.n) {
                if self.get(i, j) != ZERO {
                    if i > j {
                        lo = lo.max(i - j);
                    } else {
                        up = up.max(j - i);
                    }
                }
            }
        }
        if self.kind == BandKind::Hermitian {
            up = lo;
        }
        (lo, up)
    }
}
