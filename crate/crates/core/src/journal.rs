//! Ordered record of the unitary similarities applied during a reduction.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::dense::{CMat, Rows};
use crate::error::{HessError, Result};
use crate::givens::Givens;

#[derive(Clone, Debug, PartialEq)]
pub enum JournalEntry {
    Rotation(Givens),
    Block(Box<BlockEntry>),
}

/// Unitary `active` embedded at rows/columns `offset..offset + active.nrows()`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEntry {
    pub offset: usize,
    pub active: CMat,
}

/// Each entry `E` updates the accumulated transform as `Q <- E Q`, so the
/// reduced matrix is `Q A Q^H`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Journal {
    entries: Vec<JournalEntry>,
}

/// Journal holding plane rotations only.
pub type RotationLog = Journal;

impl Journal {
    pub fn new() -> Self {
        Journal::default()
    }

    pub fn push_rotation(&mut self, g: Givens) {
        self.entries.push(JournalEntry::Rotation(g));
    }

    pub fn push_block(&mut self, offset: usize, active: CMat) {
        self.entries.push(JournalEntry::Block(Box::new(BlockEntry { offset, active })));
    }

    pub fn extend(&mut self, other: Journal) {
        self.entries.extend(other.entries);
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rotation_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e, JournalEntry::Rotation(_)))
            .count()
    }

    /// Journal whose replay is the inverse of this one.
    pub fn inverse(&self) -> Journal {
        let entries = self
            .entries
            .iter()
            .rev()
            .map(|e| match e {
                JournalEntry::Rotation(g) => JournalEntry::Rotation(g.adjoint()),
                JournalEntry::Block(b) => JournalEntry::Block(Box::new(BlockEntry {
                    offset: b.offset,
                    active: b.active.adjoint(),
                })),
            })
            .collect();
        Journal { entries }
    }

    /// Dense `Q` of order `n`.
    pub fn replay(&self, n: usize) -> Result<CMat> {
        let mut z = SplitColumns::identity(n);
        for e in &self.entries {
            match e {
                JournalEntry::Rotation(g) => {
                    if g.plane + 1 >= n {
                        return Err(HessError::Index(format!(
                            "journal rotation plane {} outside order {n}",
                            g.plane
                        )));
                    }
                    if !g.is_identity() {
                        z.rotate_columns(g);
                    }
                }
                JournalEntry::Block(b) => {
                    let (offset, active) = (&b.offset, &b.active);
                    if offset + active.nrows() > n || active.nrows() != active.ncols() {
                        return Err(HessError::Index(format!(
                            "journal block at {offset} of size {} outside order {n}",
                            active.nrows()
                        )));
                    }
                    z.multiply_block_adjoint(*offset, active);
                }
            }
        }
        Ok(z.to_cmat().adjoint())
    }

    /// `X <- Q X` for a tall factor stored by rows.
    pub fn apply_rows(&self, x: &mut Rows) -> Result<()> {
        let n = x.n;
        for e in &self.entries {
            match e {
                JournalEntry::Rotation(g) => {
                    if g.plane + 1 >= n {
                        return Err(HessError::Index(format!(
                            "journal rotation plane {} outside order {n}",
                            g.plane
                        )));
                    }
                    x.rotate(g);
                }
                JournalEntry::Block(b) => {
                    let s = b.active.nrows();
                    if b.offset + s > n {
                        return Err(HessError::Index(format!(
                            "journal block at {} of size {s} outside order {n}",
                            b.offset
                        )));
                    }
                    let mut old = CMat::zeros(s, x.k);
                    for r in 0..s {
                        for t in 0..x.k {
                            old[(r, t)] = x.get(b.offset + r, t);
                        }
                    }
                    let new = &b.active * old;
                    for r in 0..s {
                        for t in 0..x.k {
                            x.set(b.offset + r, t, new[(r, t)]);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Column-major complex matrix with separate real and imaginary planes,
/// holding `Q^H` during replay.
struct SplitColumns {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitColumns {
    fn identity(n: usize) -> Self {
        let mut re = vec![0.0; n * n];
        for i in 0..n {
            re[i * n + i] = 1.0;
        }
        SplitColumns {
            n,
            re,
            im: vec![0.0; n * n],
        }
    }

    /// Columns `p, p+1` <- columns * R^H.
    fn rotate_columns(&mut self, g: &Givens) {
        let n = self.n;
        let p = g.plane;
        let (c, sr, si) = (g.c, g.s.re, g.s.im);
        let (re_a, re_b) = self.re[p * n..(p + 2) * n].split_at_mut(n);
        let (im_a, im_b) = self.im[p * n..(p + 2) * n].split_at_mut(n);
        for i in 0..n {
            let (xr, xi, yr, yi) = (re_a[i], im_a[i], re_b[i], im_b[i]);
            re_a[i] = c * xr - (sr * yr - si * yi);
            im_a[i] = c * xi - (sr * yi + si * yr);
            re_b[i] = sr * xr + si * xi + c * yr;
            im_b[i] = sr * xi - si * xr + c * yi;
        }
    }

    /// Columns `offset..offset+s` <- columns * E^H.
    fn multiply_block_adjoint(&mut self, offset: usize, e: &CMat) {
        let n = self.n;
        let s = e.nrows();
        if s <= 16 {
            self.multiply_small_block_adjoint(offset, e);
            return;
        }
        let range = offset * n..(offset + s) * n;
        let zr = DMatrix::from_column_slice(n, s, &self.re[range.clone()]);
        let zi = DMatrix::from_column_slice(n, s, &self.im[range.clone()]);
        // E^H = Er^T - i Ei^T
        let er_t = e.map(|z| z.re).transpose();
        let ei_t = e.map(|z| -z.im).transpose();
        let nr = &zr * &er_t - &zi * &ei_t;
        let ni = &zr * &ei_t + &zi * &er_t;
        self.re[range.clone()].copy_from_slice(nr.as_slice());
        self.im[range].copy_from_slice(ni.as_slice());
    }

    /// Same as `multiply_block_adjoint`, as column axpys.
    fn multiply_small_block_adjoint(&mut self, offset: usize, e: &CMat) {
        let n = self.n;
        let s = e.nrows();
        let range = offset * n..(offset + s) * n;
        let old_re = self.re[range.clone()].to_vec();
        let old_im = self.im[range].to_vec();
        for c in 0..s {
            let (dst_re, dst_im) = (
                &mut self.re[(offset + c) * n..(offset + c + 1) * n],
                &mut self.im[(offset + c) * n..(offset + c + 1) * n],
            );
            dst_re.fill(0.0);
            dst_im.fill(0.0);
            for t in 0..s {
                // column c of E^H at row t is conj(E[c, t])
                let (wr, wi) = (e[(c, t)].re, -e[(c, t)].im);
                if wr == 0.0 && wi == 0.0 {
                    continue;
                }
                let (sr, si) = (&old_re[t * n..(t + 1) * n], &old_im[t * n..(t + 1) * n]);
                for i in 0..n {
                    dst_re[i] += sr[i] * wr - si[i] * wi;
                    dst_im[i] += sr[i] * wi + si[i] * wr;
                }
            }
        }
    }

    fn to_cmat(&self) -> CMat {
        let n = self.n;
        CMat::from_fn(n, n, |i, j| C64::new(self.re[j * n + i], self.im[j * n + i]))
    }
}
